//! Analytic (quadrature) surplus machinery: initial surplus two ways, the
//! premium decomposition, expected surplus processes, and the
//! valuation-basis-independence table.
//!
//! All expectations are under the experience basis `B^M` (occupancy row from
//! state 1), and every EPV here uses the trapezoid rule on grid values so
//! that identities between these quantities close to solver tolerance
//! instead of mixing quadrature families. Pricing is the one exception (see
//! `basis::pure_premium`).

use crate::basis::{pure_premium, AugmentedValuationBasis, TechnicalBasis};
use crate::contract::{Contract, PremiumRates};
use crate::error::{EngineError, Result};
use crate::grid::{trapezoid_prefix, StatewiseFunction, TimeGrid};
use crate::markov::occupancy_row_path;
use crate::thiele::{solve_backward, sums_at_risk, SumsAtRisk};

fn prefix_eval(prefix: &[f64], grid: &TimeGrid, t: f64) -> Result<f64> {
    if !grid.contains(t) {
        return Err(EngineError::OutOfDomain { t, n: grid.term() });
    }
    let k = grid.cell_of(t);
    let w = ((t - grid.point(k)) / grid.step()).clamp(0.0, 1.0);
    Ok(prefix[k] + w * (prefix[k + 1] - prefix[k]))
}

/// `Σ_i ∫_0^t v^s P^M_{1i}(0,s)·f(k,i) ds` with trapezoid weights on the
/// grid; `f` receives the grid index and the state.
fn expectation_integral<F>(
    experience: &TechnicalBasis,
    delta: f64,
    m: usize,
    grid: &TimeGrid,
    t: f64,
    f: F,
) -> Result<f64>
where
    F: Fn(usize, usize) -> f64,
{
    let occ = occupancy_row_path(&experience.intensities, m, grid)?;
    let prefix = trapezoid_prefix(grid, |k| {
        let disc = (-delta * grid.point(k)).exp();
        disc * (0..m).map(|i| occ[k][i] * f(k, i)).sum::<f64>()
    });
    prefix_eval(&prefix, grid, t)
}

/// Initial surplus computed two ways: the backward Thiele solution's
/// `V_0^1`, and the capitalized-loading quadrature
/// `Σ_j ∫_0^n v^s P^L_{1j}(0,s) (π*_j − π^L_j) ds` under the valuation
/// basis. Both are reported along with their difference.
#[derive(Debug, Clone, Copy)]
pub struct InitialSurplus {
    pub from_solver: f64,
    pub from_quadrature: f64,
}

impl InitialSurplus {
    pub fn difference(&self) -> f64 {
        (self.from_solver - self.from_quadrature).abs()
    }

    /// Released surplus is `-V_0^1`; a negative release is capital strain.
    pub fn released(&self) -> f64 {
        -self.from_solver
    }
}

pub fn initial_surplus(
    aug: &AugmentedValuationBasis,
    contract: &Contract,
    grid: &TimeGrid,
) -> Result<InitialSurplus> {
    let m = contract.states();
    let v = solve_backward(aug, contract, grid)?;
    let pure = pure_premium(&aug.basis, contract, grid)?;
    let pure_rates = PremiumRates::from_pattern(contract.premium_pattern(), pure.scale);
    let occ = occupancy_row_path(&aug.basis.intensities, m, grid)?;
    let delta = aug.basis.delta;
    let prefix = trapezoid_prefix(grid, |k| {
        let t = grid.point(k);
        let disc = (-delta * t).exp();
        disc * (0..m)
            .map(|j| occ[k][j] * (pure_rates.rate(j, t) - aug.valuation_premiums.rate(j, t)))
            .sum::<f64>()
    });
    Ok(InitialSurplus {
        from_solver: v.at(0, 0),
        from_quadrature: prefix[grid.steps()],
    })
}

/// The exact split `P_i = π*_i + (π^L_i − π*_i) + (P_i − π^L_i)`:
/// pure risk premium, loading capitalized at outset, loading emerging as
/// premiums are paid. Pure arithmetic on a common pattern; no tolerance.
#[derive(Debug, Clone)]
pub struct PremiumDecomposition {
    contractual: PremiumRates,
    pure: PremiumRates,
    valuation: PremiumRates,
}

impl PremiumDecomposition {
    pub fn risk(&self, i: usize, t: f64) -> f64 {
        self.pure.rate(i, t)
    }

    pub fn capitalized_loading(&self, i: usize, t: f64) -> f64 {
        self.valuation.rate(i, t) - self.pure.rate(i, t)
    }

    pub fn emerging_loading(&self, i: usize, t: f64) -> f64 {
        self.contractual.rate(i, t) - self.valuation.rate(i, t)
    }

    pub fn contractual(&self, i: usize, t: f64) -> f64 {
        self.contractual.rate(i, t)
    }

    /// Max pointwise defect of the identity over the grid, for audit; it is
    /// a telescoping sum, so this is rounding noise only.
    pub fn identity_defect(&self, grid: &TimeGrid) -> f64 {
        let m = self.contractual.states();
        let mut worst: f64 = 0.0;
        for k in 0..grid.len() {
            let t = grid.point(k);
            for i in 0..m {
                let sum =
                    self.risk(i, t) + self.capitalized_loading(i, t) + self.emerging_loading(i, t);
                worst = worst.max((sum - self.contractual(i, t)).abs());
            }
        }
        worst
    }
}

pub fn premium_decomposition(
    contractual: &PremiumRates,
    pure: &PremiumRates,
    valuation: &PremiumRates,
) -> Result<PremiumDecomposition> {
    if !contractual.same_pattern(pure) || !contractual.same_pattern(valuation) {
        return Err(EngineError::GridMismatch(
            "premium rates are not on a common pattern".into(),
        ));
    }
    Ok(PremiumDecomposition {
        contractual: contractual.clone(),
        pure: pure.clone(),
        valuation: valuation.clone(),
    })
}

/// `E[Γ_t^L]` from the accumulated-surplus form:
/// `Σ_i Σ_{j≠i} ∫_0^t v^s P^M_{1i}(0,s) (μ^{L,ij}_s − μ^{M,ij}_s) R_s^{ij} ds − V_0^1`,
/// occupancy under the experience basis, the martingale term contributing
/// zero mean. Premiums here are the valued rates; any contractual loading
/// is accounted separately by `loading_epv`.
pub fn expected_gamma_l(
    valuation: &AugmentedValuationBasis,
    v: &StatewiseFunction,
    experience: &TechnicalBasis,
    contract: &Contract,
    t: f64,
    grid: &TimeGrid,
) -> Result<f64> {
    let m = contract.states();
    let risk = sums_at_risk(v, contract);
    let delta = valuation.basis.delta;
    let integral = expectation_integral(experience, delta, m, grid, t, |k, i| {
        let tk = grid.point(k);
        (0..m)
            .filter(|&j| j != i)
            .map(|j| {
                (valuation.basis.intensities.rate(i, j, tk)
                    - experience.intensities.rate(i, j, tk))
                    * risk.at(k, i, j)
            })
            .sum()
    })?;
    Ok(integral - v.at(0, 0))
}

/// EPV of the emerging premium loadings under the experience basis:
/// `Σ_i ∫_0^t v^s P^M_{1i}(0,s) (P_i − π^L_i) ds`.
pub fn loading_epv(
    contractual: &PremiumRates,
    valuation_premiums: &PremiumRates,
    experience: &TechnicalBasis,
    delta: f64,
    contract: &Contract,
    t: f64,
    grid: &TimeGrid,
) -> Result<f64> {
    expectation_integral(experience, delta, contract.states(), grid, t, |k, i| {
        let tk = grid.point(k);
        contractual.rate(i, tk) - valuation_premiums.rate(i, tk)
    })
}

/// `E[Γ_t^{L,A}] = Σ_i ∫_0^t v^s P^M_{1i}(0,s) W_s^i ds` with the surplus
/// rates `W` already computed between the valuation and accumulation bases.
pub fn expected_gamma_la(
    w: &StatewiseFunction,
    experience: &TechnicalBasis,
    delta: f64,
    t: f64,
    grid: &TimeGrid,
) -> Result<f64> {
    expectation_integral(experience, delta, w.states(), grid, t, |k, i| w.at(k, i))
}

/// Systematic surplus between accumulation and experience bases:
/// `Σ_i Σ_{j≠i} ∫_0^t v^s P^M_{1i}(0,s) Δ^Aμ^{ij}_s R_s^{ij} ds` with
/// `Δ^Aμ = μ^A − μ^M`.
pub fn systematic_surplus_epv(
    accumulation: &TechnicalBasis,
    experience: &TechnicalBasis,
    v: &StatewiseFunction,
    contract: &Contract,
    delta: f64,
    t: f64,
    grid: &TimeGrid,
) -> Result<f64> {
    let m = contract.states();
    let risk = sums_at_risk(v, contract);
    expectation_integral(experience, delta, m, grid, t, |k, i| {
        let tk = grid.point(k);
        (0..m)
            .filter(|&j| j != i)
            .map(|j| {
                (accumulation.intensities.rate(i, j, tk) - experience.intensities.rate(i, j, tk))
                    * risk.at(k, i, j)
            })
            .sum()
    })
}

/// EPV surplus report at time `t` for the canonical three-basis model.
/// `systematic_epv` here is the valuation-vs-accumulation intensity term
/// `Σ ∫ v^s P^M_{1i} (μ^L − μ^A) R ds`, so the report closes exactly:
/// `total = loading_epv + systematic_epv + martingale_epv − V_0^1`.
#[derive(Debug, Clone, Copy)]
pub struct SurplusEpvReport {
    pub t: f64,
    /// `-V_0^1`: released surplus at outset, capital strain when negative.
    pub initial_surplus: f64,
    pub loading_epv: f64,
    pub systematic_epv: f64,
    /// Zero analytically (martingale increments have zero mean under `B^M`).
    pub martingale_epv: f64,
    /// `E[Γ_t^{L,A}] − V_0^1`.
    pub total: f64,
}

impl SurplusEpvReport {
    pub fn strain_label(value: f64) -> &'static str {
        if value < 0.0 {
            "capital strain"
        } else {
            "surplus release"
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn surplus_epv_report(
    valuation: &AugmentedValuationBasis,
    v: &StatewiseFunction,
    accumulation: &TechnicalBasis,
    experience: &TechnicalBasis,
    contractual: &PremiumRates,
    contract: &Contract,
    t: f64,
    grid: &TimeGrid,
) -> Result<SurplusEpvReport> {
    let m = contract.states();
    let delta = valuation.basis.delta;
    let risk = sums_at_risk(v, contract);
    let loading = loading_epv(
        contractual,
        &valuation.valuation_premiums,
        experience,
        delta,
        contract,
        t,
        grid,
    )?;
    let systematic = expectation_integral(experience, delta, m, grid, t, |k, i| {
        let tk = grid.point(k);
        (0..m)
            .filter(|&j| j != i)
            .map(|j| {
                (valuation.basis.intensities.rate(i, j, tk)
                    - accumulation.intensities.rate(i, j, tk))
                    * risk.at(k, i, j)
            })
            .sum()
    })?;
    let v0 = v.at(0, 0);
    Ok(SurplusEpvReport {
        t,
        initial_surplus: -v0,
        loading_epv: loading,
        systematic_epv: systematic,
        martingale_epv: 0.0,
        total: loading + systematic - v0,
    })
}

/// One row of the Corollary-3 table: the EPV of total surplus
/// `E[Γ_n^{L,A}] − V_0^1` for a single valuation basis, assembled through
/// the pathwise-identity decomposition (`Γ^L`-route) at `t = n`, plus the
/// direct `Γ^{L,A}`-route value for cross-checking.
#[derive(Debug, Clone)]
pub struct Cor3Row {
    pub label: String,
    pub v0: f64,
    pub expected_gamma_l: f64,
    pub loading_epv: f64,
    pub systematic_epv: f64,
    /// `loading + E[Γ_n^L] − systematic` (identity route).
    pub total: f64,
    /// `E[Γ_n^{L,A}] − V_0^1` integrated directly from the surplus rates.
    pub total_direct: f64,
}

#[derive(Debug, Clone)]
pub struct Cor3Report {
    pub rows: Vec<Cor3Row>,
    /// Max pairwise spread of the identity-route totals.
    pub spread: f64,
    pub accumulation_is_experience: bool,
}

/// Builds the Corollary-3 table over at least two valuation bases. When the
/// accumulation basis is the experience basis, the totals are independent
/// of the valuation basis; otherwise the spread quantifies the dependence
/// introduced through the sums at risk in the systematic surplus.
pub fn corollary3_report(
    valuations: &[(String, AugmentedValuationBasis)],
    accumulation: &TechnicalBasis,
    experience: &TechnicalBasis,
    contractual: &PremiumRates,
    contract: &Contract,
    grid: &TimeGrid,
    accumulation_is_experience: bool,
) -> Result<Cor3Report> {
    if valuations.len() < 2 {
        return Err(EngineError::Config(
            "corollary-3 table needs at least two valuation bases".into(),
        ));
    }
    let n = grid.term();
    let mut rows = Vec::with_capacity(valuations.len());
    for (label, aug) in valuations {
        let v = solve_backward(aug, contract, grid)?;
        let delta = aug.basis.delta;
        let gamma_l = expected_gamma_l(aug, &v, experience, contract, n, grid)?;
        let loading = loading_epv(
            contractual,
            &aug.valuation_premiums,
            experience,
            delta,
            contract,
            n,
            grid,
        )?;
        let systematic =
            systematic_surplus_epv(accumulation, experience, &v, contract, delta, n, grid)?;
        let w = crate::thiele::surplus_rates(aug, &v, accumulation, contractual, contract)?;
        let gamma_la = expected_gamma_la(&w, experience, delta, n, grid)?;
        rows.push(Cor3Row {
            label: label.clone(),
            v0: v.at(0, 0),
            expected_gamma_l: gamma_l,
            loading_epv: loading,
            systematic_epv: systematic,
            total: loading + gamma_l - systematic,
            total_direct: gamma_la - v.at(0, 0),
        });
    }
    let mut spread: f64 = 0.0;
    for a in &rows {
        for b in &rows {
            spread = spread.max((a.total - b.total).abs());
        }
    }
    Ok(Cor3Report {
        rows,
        spread,
        accumulation_is_experience,
    })
}

/// Sums at risk for external callers that already solved `V`.
pub fn risk_from_solution(v: &StatewiseFunction, contract: &Contract) -> SumsAtRisk {
    sums_at_risk(v, contract)
}
