//! Occupancy probabilities for time-inhomogeneous Markov chains: the forward
//! system `dP/ds = P·Λ(t+s)` with generator `Λ` built from the intensity
//! family (off-diagonal `μ^{ij}`, diagonal `-μ^i`).

use crate::error::{EngineError, Result};
use crate::grid::TimeGrid;
use crate::intensity::IntensityFamily;
use crate::ode;

/// Small dense square matrix; `m` is 2..4 in every model here, so nothing
/// clever is needed.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    m: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(m: usize) -> Self {
        SquareMatrix {
            m,
            data: vec![0.0; m * m],
        }
    }

    pub fn identity(m: usize) -> Self {
        let mut out = Self::zeros(m);
        for i in 0..m {
            out.data[i * m + i] = 1.0;
        }
        out
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let m = rows.len();
        assert!(rows.iter().all(|r| r.len() == m));
        SquareMatrix {
            m,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.m + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn matmul(&self, other: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.m, other.m);
        let m = self.m;
        let mut out = SquareMatrix::zeros(m);
        for i in 0..m {
            for k in 0..m {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..m {
                    out.data[i * m + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// `self · v` for a column vector `v`.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.m);
        (0..self.m)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Gauss–Jordan inverse with partial pivoting. Reports singularity (tiny
    /// pivot) instead of regularizing.
    pub fn inverse(&self) -> std::result::Result<SquareMatrix, f64> {
        let m = self.m;
        let mut a = self.data.clone();
        let mut inv = SquareMatrix::identity(m).data;
        for col in 0..m {
            let mut piv = col;
            for r in col + 1..m {
                if a[r * m + col].abs() > a[piv * m + col].abs() {
                    piv = r;
                }
            }
            let pval = a[piv * m + col];
            if pval.abs() < 1e-13 {
                return Err(pval);
            }
            if piv != col {
                for j in 0..m {
                    a.swap(col * m + j, piv * m + j);
                    inv.swap(col * m + j, piv * m + j);
                }
            }
            let d = a[col * m + col];
            for j in 0..m {
                a[col * m + j] /= d;
                inv[col * m + j] /= d;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let factor = a[r * m + col];
                if factor == 0.0 {
                    continue;
                }
                for j in 0..m {
                    a[r * m + j] -= factor * a[col * m + j];
                    inv[r * m + j] -= factor * inv[col * m + j];
                }
            }
        }
        Ok(SquareMatrix { m, data: inv })
    }
}

/// `dP/ds` for the row-ordered occupancy system: each row evolves as
/// `p' = p·Λ(t)`. The generator is assembled fresh at every evaluation
/// point; intensities are evaluated exactly, not tabulated.
fn occupancy_rhs(family: &IntensityFamily, m: usize, t: f64, p: &[f64], dp: &mut [f64]) {
    dp.fill(0.0);
    let rows = p.len() / m;
    for r in 0..rows {
        let row = &p[r * m..(r + 1) * m];
        let drow = &mut dp[r * m..(r + 1) * m];
        for (i, j, f) in family.pairs() {
            let rate = f.eval(t);
            let flow = row[i] * rate;
            drow[j] += flow;
            drow[i] -= flow;
        }
    }
}

/// Occupancy matrix `P(t, s)` with `P[i][j] = P_ij(t, s)`, by RK4 on
/// `dP/ds = P·Λ(t+s)` from the identity. The span is integrated in
/// `ceil(s/h)` equal steps of at most the grid step.
pub fn occupancy_matrix(
    family: &IntensityFamily,
    m: usize,
    t: f64,
    s: f64,
    grid: &TimeGrid,
) -> Result<SquareMatrix> {
    if s < 0.0 {
        return Err(EngineError::NegativeDuration { s });
    }
    if t < -1e-12 || t + s > grid.term() + 1e-9 {
        return Err(EngineError::OutsideGrid {
            t,
            end: t + s,
            n: grid.term(),
        });
    }
    if s == 0.0 {
        return Ok(SquareMatrix::identity(m));
    }
    let steps = (s / grid.step()).ceil().max(1.0) as usize;
    let y0 = SquareMatrix::identity(m).data;
    let y = ode::rk4_span(t, s, steps, &y0, |tau, p, dp| {
        occupancy_rhs(family, m, tau, p, dp)
    });
    Ok(SquareMatrix { m, data: y })
}

/// Full occupancy matrices `P(0, t_k)` at every grid point, from a single
/// forward integration.
pub fn occupancy_path(
    family: &IntensityFamily,
    m: usize,
    grid: &TimeGrid,
) -> Result<Vec<SquareMatrix>> {
    family.validate(m)?;
    let y0 = SquareMatrix::identity(m).data;
    let path = ode::rk4_forward_path(grid, &y0, |t, p, dp| occupancy_rhs(family, m, t, p, dp));
    Ok(path
        .into_iter()
        .map(|data| SquareMatrix { m, data })
        .collect())
}

/// Occupancy row from the start state: `p_i(t_k) = P_{1i}(0, t_k)`.
/// This is the workhorse behind every EPV quadrature.
pub fn occupancy_row_path(
    family: &IntensityFamily,
    m: usize,
    grid: &TimeGrid,
) -> Result<Vec<Vec<f64>>> {
    family.validate(m)?;
    let mut y0 = vec![0.0; m];
    y0[0] = 1.0;
    Ok(ode::rk4_forward_path(grid, &y0, |t, p, dp| {
        occupancy_rhs(family, m, t, p, dp)
    }))
}

/// `exp(-∫_t^{t+s} μ^i_r dr)`: the probability of not leaving state `i`,
/// by RK4 quadrature of the exit intensity.
pub fn no_exit_probability(
    family: &IntensityFamily,
    m: usize,
    state: usize,
    t: f64,
    s: f64,
    grid: &TimeGrid,
) -> Result<f64> {
    if state >= m {
        return Err(EngineError::StateOutOfRange {
            state: state + 1,
            m,
        });
    }
    if s < 0.0 {
        return Err(EngineError::NegativeDuration { s });
    }
    if t < -1e-12 || t + s > grid.term() + 1e-9 {
        return Err(EngineError::OutsideGrid {
            t,
            end: t + s,
            n: grid.term(),
        });
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    let steps = (s / grid.step()).ceil().max(1.0) as usize;
    let integral = ode::rk4_span(t, s, steps, &[0.0], |tau, _y, dy| {
        dy[0] = family.total_exit(state, tau)
    })[0];
    Ok((-integral).exp())
}

/// Expected present value `∫_0^n e^{-δs} Σ_i P_{1i}(0,s)·g_i(s) ds` plus the
/// terminal row `P_{1·}(0,n)`, with the occupancy row and the accumulator
/// integrated together by RK4 so the quadrature inherits the integrator's
/// order. Used for pricing, where premium accuracy feeds boundary
/// conditions.
pub fn epv_rk4<G>(
    family: &IntensityFamily,
    m: usize,
    grid: &TimeGrid,
    delta: f64,
    g: G,
) -> Result<(f64, Vec<f64>)>
where
    G: Fn(usize, f64) -> f64,
{
    family.validate(m)?;
    let mut y0 = vec![0.0; m + 1];
    y0[0] = 1.0;
    let y = ode::rk4_span(0.0, grid.term(), grid.steps(), &y0, |t, y, dy| {
        occupancy_rhs(family, m, t, &y[..m], &mut dy[..m]);
        let disc = (-delta * t).exp();
        dy[m] = disc * (0..m).map(|i| y[i] * g(i, t)).sum::<f64>();
    });
    let epv = y[m];
    if !epv.is_finite() {
        return Err(EngineError::NonFinite("EPV quadrature".into()));
    }
    Ok((epv, y[..m].to_vec()))
}
