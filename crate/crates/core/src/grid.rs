//! Uniform time grid and grid-sampled statewise functions.
//!
//! Every solver output is stored at the grid points `t_k = k·h` and linearly
//! interpolated in between. Path functionals integrate `e^{-δs}` against the
//! linear interpolant in closed form per grid cell, so their values do not
//! depend on how jump times align with the grid.

use crate::error::{EngineError, Result};

/// Uniform grid over `[0, n]` with step `h`; `n/h` must be an integer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    n: f64,
    h: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(n: f64, h: f64) -> Result<Self> {
        if !(n > 0.0) || !(h > 0.0) || !n.is_finite() || !h.is_finite() {
            return Err(EngineError::InvalidGrid { n, h });
        }
        let ratio = n / h;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) || steps < 1.0 {
            return Err(EngineError::InvalidGrid { n, h });
        }
        Ok(TimeGrid {
            n,
            h,
            steps: steps as usize,
        })
    }

    /// Default step from the engine's numerics decisions: h = 1/256 year.
    pub const DEFAULT_STEP: f64 = 1.0 / 256.0;

    pub fn with_default_step(n: f64) -> Result<Self> {
        TimeGrid::new(n, Self::DEFAULT_STEP)
    }

    pub fn term(&self) -> f64 {
        self.n
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points (`steps + 1`).
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, k: usize) -> f64 {
        if k == self.steps {
            self.n
        } else {
            k as f64 * self.h
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.point(k))
    }

    /// Index of the cell containing `t`, clamped to `[0, steps-1]`.
    pub fn cell_of(&self, t: f64) -> usize {
        let k = (t / self.h).floor() as isize;
        k.clamp(0, self.steps as isize - 1) as usize
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= -1e-12 && t <= self.n + 1e-12
    }

    /// Grid index closest to `t`; errors unless `t` is within `1e-9` of a
    /// grid point.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let k = (t / self.h).round();
        if !self.contains(t) || (t - k * self.h).abs() > 1e-9 {
            return Err(EngineError::GridMismatch(format!(
                "t = {t} is not a grid point (h = {})",
                self.h
            )));
        }
        Ok(k as usize)
    }

    /// Halved-step refinement of this grid.
    pub fn refined(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.n, self.h / 2.0)
    }
}

/// A time-gridded map `t ↦ vector over states`: policy values `V_t^i`,
/// accumulation funds `A_t^i`, surplus rates `W_t^i`.
#[derive(Debug, Clone)]
pub struct StatewiseFunction {
    grid: TimeGrid,
    m: usize,
    /// `values[k][i]` is the value in state `i` (0-based) at grid point `k`.
    values: Vec<Vec<f64>>,
}

impl StatewiseFunction {
    pub fn new(grid: TimeGrid, m: usize, values: Vec<Vec<f64>>) -> Self {
        assert_eq!(values.len(), grid.len(), "one vector per grid point");
        assert!(values.iter().all(|v| v.len() == m));
        StatewiseFunction { grid, m, values }
    }

    pub fn zeros(grid: TimeGrid, m: usize) -> Self {
        let values = vec![vec![0.0; m]; grid.len()];
        StatewiseFunction { grid, m, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn states(&self) -> usize {
        self.m
    }

    /// Value at grid point `k`, state `i` (0-based).
    pub fn at(&self, k: usize, i: usize) -> f64 {
        self.values[k][i]
    }

    pub fn at_mut(&mut self, k: usize, i: usize) -> &mut f64 {
        &mut self.values[k][i]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    /// Linear interpolation; evaluation outside `[0, n]` is an error.
    pub fn eval(&self, t: f64, i: usize) -> Result<f64> {
        if i >= self.m {
            return Err(EngineError::StateOutOfRange {
                state: i + 1,
                m: self.m,
            });
        }
        if !self.grid.contains(t) {
            return Err(EngineError::OutOfDomain {
                t,
                n: self.grid.term(),
            });
        }
        let k = self.grid.cell_of(t);
        let t0 = self.grid.point(k);
        let w = ((t - t0) / self.grid.step()).clamp(0.0, 1.0);
        Ok(self.values[k][i] + w * (self.values[k + 1][i] - self.values[k][i]))
    }

    pub fn sup_abs_diff(&self, other: &StatewiseFunction) -> f64 {
        assert_eq!(self.grid, other.grid);
        assert_eq!(self.m, other.m);
        let mut sup: f64 = 0.0;
        for k in 0..self.grid.len() {
            for i in 0..self.m {
                sup = sup.max((self.values[k][i] - other.values[k][i]).abs());
            }
        }
        sup
    }
}

/// `(1 - e^{ -x }) / x`, accurate as `x → 0`.
fn g0(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 - x / 2.0 + x * x / 6.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// `(1 - (1 + x) e^{ -x }) / x²`, accurate as `x → 0`.
fn g1(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        0.5 - x / 3.0 + x * x / 8.0
    } else {
        (1.0 + (-x).exp() * (-1.0 - x)) / (x * x)
    }
}

/// Closed-form `∫_u^v e^{-δ s} (f0 + slope·(s - u)) ds`.
fn exp_linear_piece(delta: f64, u: f64, v: f64, f0: f64, slope: f64) -> f64 {
    let len = v - u;
    if len <= 0.0 {
        return 0.0;
    }
    let x = delta * len;
    let d = (-delta * u).exp();
    d * len * (f0 * g0(x) + slope * len * g1(x))
}

/// `∫_a^b e^{-δ s}·f̃(s) ds` where `f̃` is the linear interpolant of the
/// per-grid-point samples `f(k)`. Exact per cell for the interpolant, stable
/// as `δ → 0`.
pub fn integrate_discounted_linear<F>(grid: &TimeGrid, delta: f64, f: F, a: f64, b: f64) -> f64
where
    F: Fn(usize) -> f64,
{
    debug_assert!(a <= b + 1e-12);
    if b <= a {
        return 0.0;
    }
    let h = grid.step();
    let k_first = grid.cell_of(a);
    let k_last = grid.cell_of(b - 1e-15 * b.abs().max(1.0));
    let mut total = 0.0;
    for k in k_first..=k_last {
        let t0 = grid.point(k);
        let t1 = grid.point(k + 1);
        let u = a.max(t0);
        let v = b.min(t1);
        if v <= u {
            continue;
        }
        let f0 = f(k);
        let slope = (f(k + 1) - f0) / h;
        // value of the interpolant at the clipped left endpoint
        let fu = f0 + slope * (u - t0);
        total += exp_linear_piece(delta, u, v, fu, slope);
    }
    total
}

/// Trapezoid rule on grid values of `g`: `∫_0^{t_k} g ≈ Σ w_j g(j)`.
/// This is the quadrature family shared by all analytic EPV identities.
pub fn trapezoid_prefix<G>(grid: &TimeGrid, g: G) -> Vec<f64>
where
    G: Fn(usize) -> f64,
{
    let h = grid.step();
    let mut acc = vec![0.0; grid.len()];
    let mut prev = g(0);
    for k in 1..grid.len() {
        let cur = g(k);
        acc[k] = acc[k - 1] + 0.5 * h * (prev + cur);
        prev = cur;
    }
    acc
}

/// Trapezoid rule over the whole grid.
pub fn trapezoid<G>(grid: &TimeGrid, g: G) -> f64
where
    G: Fn(usize) -> f64,
{
    let h = grid.step();
    let mut sum = 0.5 * (g(0) + g(grid.steps()));
    for k in 1..grid.steps() {
        sum += g(k);
    }
    sum * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_non_integer_ratio() {
        assert!(TimeGrid::new(10.0, 3.0).is_err());
        assert!(TimeGrid::new(10.0, 0.0).is_err());
        let g = TimeGrid::new(20.0, 1.0 / 256.0).unwrap();
        assert_eq!(g.steps(), 5120);
        assert_eq!(g.point(g.steps()), 20.0);
    }

    #[test]
    fn interpolation_is_linear_between_points() {
        let grid = TimeGrid::new(1.0, 0.25).unwrap();
        let f = StatewiseFunction::new(
            grid,
            1,
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
        );
        assert!((f.eval(0.125, 0).unwrap() - 0.5).abs() < 1e-15);
        assert!((f.eval(1.0, 0).unwrap() - 4.0).abs() < 1e-15);
        assert!(f.eval(1.5, 0).is_err());
        assert!(f.eval(-0.1, 0).is_err());
    }

    #[test]
    fn discounted_integral_matches_closed_forms() {
        let grid = TimeGrid::new(2.0, 0.125).unwrap();
        // f ≡ 1, δ = 0.3: ∫_0^2 e^{-0.3 s} ds = (1 - e^{-0.6}) / 0.3
        let exact = (1.0 - (-0.6f64).exp()) / 0.3;
        let got = integrate_discounted_linear(&grid, 0.3, |_| 1.0, 0.0, 2.0);
        assert!((got - exact).abs() < 1e-14, "got {got}, exact {exact}");

        // f(s) = s, δ = 0: ∫_a^b s ds, partial cells
        let got = integrate_discounted_linear(&grid, 0.0, |k| grid.point(k), 0.3, 1.7);
        let exact = 0.5 * (1.7f64 * 1.7 - 0.3 * 0.3);
        assert!((got - exact).abs() < 1e-14, "got {got}, exact {exact}");

        // f(s) = s with discounting: ∫_0^2 s e^{-δ s} ds
        let d = 0.7;
        let exact = (1.0 - (1.0 + d * 2.0) * (-d * 2.0f64).exp()) / (d * d);
        let got = integrate_discounted_linear(&grid, d, |k| grid.point(k), 0.0, 2.0);
        assert!((got - exact).abs() < 1e-13, "got {got}, exact {exact}");
    }

    #[test]
    fn small_delta_branch_is_continuous() {
        let grid = TimeGrid::new(1.0, 0.5).unwrap();
        let a = integrate_discounted_linear(&grid, 1e-6, |k| 1.0 + grid.point(k), 0.0, 1.0);
        let b = integrate_discounted_linear(&grid, 1.1e-5, |k| 1.0 + grid.point(k), 0.0, 1.0);
        assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn trapezoid_prefix_ends_at_full_integral() {
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let pre = trapezoid_prefix(&grid, |k| grid.point(k).powi(2));
        let full = trapezoid(&grid, |k| grid.point(k).powi(2));
        assert!((pre[grid.steps()] - full).abs() < 1e-15);
        assert!((full - 1.0 / 3.0).abs() < 1e-4);
    }
}
