//! Backward and forward solutions of the Markov Thiele system
//!
//! `dV^i/dt = δ V^i + π_i(t) − Σ_{j≠i} μ^{ij}(t) (b_ij(t) + V^j − V^i)`,
//!
//! sums at risk, and surplus rates between pairs of bases. Premium rates
//! enter with the sign above: `π_i` is the rate received while in state `i`.
//! Maturity benefits are boundary data, never cashflows inside the
//! integral.

use crate::basis::{AugmentedValuationBasis, TechnicalBasis};
use crate::contract::{Contract, PremiumRates};
use crate::error::{EngineError, Result};
use crate::grid::{StatewiseFunction, TimeGrid};
use crate::ode;

fn thiele_rhs(
    basis: &TechnicalBasis,
    contract: &Contract,
    premiums: &PremiumRates,
    t: f64,
    v: &[f64],
    dv: &mut [f64],
) {
    let m = v.len();
    for i in 0..m {
        dv[i] = basis.delta * v[i] + premiums.rate(i, t);
    }
    for (i, j, f) in basis.intensities.pairs() {
        let risk = contract.transition_benefit(i, j, t) + v[j] - v[i];
        dv[i] -= f.eval(t) * risk;
    }
}

fn check_shapes(contract: &Contract, premiums: &PremiumRates, grid: &TimeGrid) -> Result<()> {
    if premiums.states() != contract.states() {
        return Err(EngineError::GridMismatch(
            "premium rates state count differs from the contract".into(),
        ));
    }
    if (grid.term() - contract.term()).abs() > 1e-12 {
        return Err(EngineError::GridMismatch(format!(
            "grid term {} differs from contract term {}",
            grid.term(),
            contract.term()
        )));
    }
    Ok(())
}

/// Backward solution with terminal condition `V_n^i = M_i` (imposed exactly
/// at the terminal grid point), integrating on the reversed grid so forward
/// and backward solutions share grid points.
pub fn solve_backward(
    aug: &AugmentedValuationBasis,
    contract: &Contract,
    grid: &TimeGrid,
) -> Result<StatewiseFunction> {
    check_shapes(contract, &aug.valuation_premiums, grid)?;
    let m = contract.states();
    aug.basis.intensities.validate(m)?;
    let terminal: Vec<f64> = (0..m).map(|i| contract.maturity_benefit(i)).collect();
    let path = ode::rk4_backward_path(grid, &terminal, |t, v, dv| {
        thiele_rhs(&aug.basis, contract, &aug.valuation_premiums, t, v, dv)
    });
    Ok(StatewiseFunction::new(*grid, m, path))
}

/// Forward solution from a given initial statewise vector (all-zero for
/// accumulation funds); no terminal condition is imposed, and the terminal
/// values feed classification.
pub fn solve_forward(
    basis: &TechnicalBasis,
    contract: &Contract,
    premiums: &PremiumRates,
    initial: &[f64],
    grid: &TimeGrid,
) -> Result<StatewiseFunction> {
    check_shapes(contract, premiums, grid)?;
    let m = contract.states();
    basis.intensities.validate(m)?;
    if initial.len() != m {
        return Err(EngineError::GridMismatch(
            "initial vector length differs from the state count".into(),
        ));
    }
    let path = ode::rk4_forward_path(grid, initial, |t, v, dv| {
        thiele_rhs(basis, contract, premiums, t, v, dv)
    });
    Ok(StatewiseFunction::new(*grid, m, path))
}

/// Sums at risk `R^{ij}_t = b_ij(t) + V^j_t − V^i_t` on the solution grid,
/// for every ordered pair.
#[derive(Debug, Clone)]
pub struct SumsAtRisk {
    grid: TimeGrid,
    m: usize,
    /// `values[k][i * m + j]`
    values: Vec<Vec<f64>>,
}

impl SumsAtRisk {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn at(&self, k: usize, i: usize, j: usize) -> f64 {
        self.values[k][i * self.m + j]
    }

    /// Linear interpolation between grid points.
    pub fn eval(&self, t: f64, i: usize, j: usize) -> Result<f64> {
        if !self.grid.contains(t) {
            return Err(EngineError::OutOfDomain {
                t,
                n: self.grid.term(),
            });
        }
        let k = self.grid.cell_of(t);
        let w = ((t - self.grid.point(k)) / self.grid.step()).clamp(0.0, 1.0);
        let a = self.at(k, i, j);
        let b = self.at(k + 1, i, j);
        Ok(a + w * (b - a))
    }
}

pub fn sums_at_risk(v: &StatewiseFunction, contract: &Contract) -> SumsAtRisk {
    let m = v.states();
    let grid = *v.grid();
    let values = (0..grid.len())
        .map(|k| {
            let t = grid.point(k);
            let mut row = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    row[i * m + j] = contract.transition_benefit(i, j, t) + v.at(k, j) - v.at(k, i);
                }
            }
            row
        })
        .collect();
    SumsAtRisk { grid, m, values }
}

/// Surplus rates between a valuation basis (with its solved policy values)
/// and an accumulation basis operating the contractual premiums:
///
/// `W_t^i = (δ^A − δ^L) V_t^i + (P_i − π_i^L)
///          − Σ_{j≠i} (μ^{A,ij}_t − μ^{L,ij}_t) R_t^{ij}`.
pub fn surplus_rates(
    valuation: &AugmentedValuationBasis,
    v: &StatewiseFunction,
    accumulation: &TechnicalBasis,
    contractual: &PremiumRates,
    contract: &Contract,
) -> Result<StatewiseFunction> {
    if v.states() != contract.states() {
        return Err(EngineError::GridMismatch(
            "solution state count differs from the contract".into(),
        ));
    }
    let grid = *v.grid();
    let m = v.states();
    let risk = sums_at_risk(v, contract);
    let d_delta = accumulation.delta - valuation.basis.delta;
    let mut w = StatewiseFunction::zeros(grid, m);
    for k in 0..grid.len() {
        let t = grid.point(k);
        for i in 0..m {
            let mut acc = d_delta * v.at(k, i)
                + (contractual.rate(i, t) - valuation.valuation_premiums.rate(i, t));
            for j in 0..m {
                if j == i {
                    continue;
                }
                let dmu =
                    accumulation.intensities.rate(i, j, t) - valuation.basis.intensities.rate(i, j, t);
                if dmu != 0.0 {
                    acc -= dmu * risk.at(k, i, j);
                }
            }
            *w.at_mut(k, i) = acc;
        }
    }
    Ok(w)
}
