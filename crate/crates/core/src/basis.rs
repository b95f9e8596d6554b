//! Technical bases, augmented valuation bases, equivalence-principle
//! premiums, the boundary-condition classification, and the two
//! retrospective-value formulas from the literature.

use crate::contract::{Contract, PremiumRates};
use crate::error::{EngineError, Result};
use crate::grid::{StatewiseFunction, TimeGrid};
use crate::intensity::IntensityFamily;
use crate::markov;

/// A technical basis: constant force of interest `δ` plus a family of
/// transition intensities. Discounting is `v^t = e^{-δt}`.
#[derive(Debug, Clone)]
pub struct TechnicalBasis {
    pub delta: f64,
    pub intensities: IntensityFamily,
}

impl TechnicalBasis {
    pub fn new(delta: f64, intensities: IntensityFamily) -> Self {
        TechnicalBasis { delta, intensities }
    }

    pub fn discount(&self, t: f64) -> f64 {
        (-self.delta * t).exp()
    }

    /// Same interest, intensities scaled by `factor`.
    pub fn with_scaled_intensities(&self, factor: f64) -> TechnicalBasis {
        TechnicalBasis {
            delta: self.delta,
            intensities: self.intensities.scaled(factor),
        }
    }
}

/// A technical basis paired with the valuation premium rates `π^L` actually
/// valued. `π^L` is auditable: it is produced either by `pure_premium` of a
/// declared basis or equals the contractual premium (or an explicitly
/// declared scale on the contract's pattern).
#[derive(Debug, Clone)]
pub struct AugmentedValuationBasis {
    pub basis: TechnicalBasis,
    pub valuation_premiums: PremiumRates,
}

impl AugmentedValuationBasis {
    pub fn new(basis: TechnicalBasis, valuation_premiums: PremiumRates) -> Self {
        AugmentedValuationBasis {
            basis,
            valuation_premiums,
        }
    }

    /// Net-premium augmentation: `π^L = π*(B)` under this basis itself.
    pub fn net(basis: TechnicalBasis, contract: &Contract, grid: &TimeGrid) -> Result<Self> {
        let pp = pure_premium(&basis, contract, grid)?;
        let rates = PremiumRates::from_pattern(contract.premium_pattern(), pp.scale);
        Ok(AugmentedValuationBasis::new(basis, rates))
    }
}

/// Pure premium computation: the scale `π*` and the two EPVs it is the
/// ratio of, returned for audit.
#[derive(Debug, Clone, Copy)]
pub struct PurePremium {
    pub scale: f64,
    pub benefit_epv: f64,
    pub annuity_epv: f64,
}

/// Solves the equation of value for the single scalar scale on the
/// contract's premium shapes:
///
/// `0 = Σ_i ∫_0^n v^s P_1i(0,s) [π*·shape_i(s) − Σ_{j≠i} μ^{ij}_s b_ij(s)] ds
///      − v^n Σ_i P_1i(0,n) M_i`
///
/// Both EPVs are integrated together with the occupancy row by the shared
/// RK4 integrator, so the premium carries the integrator's order rather
/// than a lower-order quadrature error.
pub fn pure_premium(
    basis: &TechnicalBasis,
    contract: &Contract,
    grid: &TimeGrid,
) -> Result<PurePremium> {
    let m = contract.states();
    let fam = &basis.intensities;
    let (mut benefit_epv, row_n) = markov::epv_rk4(fam, m, grid, basis.delta, |i, t| {
        (0..m)
            .filter(|&j| j != i)
            .map(|j| fam.rate(i, j, t) * contract.transition_benefit(i, j, t))
            .sum()
    })?;
    let vn = basis.discount(grid.term());
    benefit_epv += vn
        * row_n
            .iter()
            .zip(contract.maturity_benefits())
            .map(|(p, m)| p * m)
            .sum::<f64>();
    let (annuity_epv, _) = markov::epv_rk4(fam, m, grid, basis.delta, |i, t| {
        contract.premium_pattern().shape(i, t)
    })?;
    if !(annuity_epv.abs() > 1e-12) {
        return Err(EngineError::DegeneratePattern);
    }
    let scale = benefit_epv / annuity_epv;
    if !scale.is_finite() {
        return Err(EngineError::NonFinite("pure premium".into()));
    }
    Ok(PurePremium {
        scale,
        benefit_epv,
        annuity_epv,
    })
}

/// Contractual premium rates on the premium basis: `P = π*(B^P)` applied to
/// the contract's pattern. All accumulations of past cashflows accumulate
/// this premium.
pub fn contractual_premium(
    premium_basis: &TechnicalBasis,
    contract: &Contract,
    grid: &TimeGrid,
) -> Result<(PremiumRates, PurePremium)> {
    let pp = pure_premium(premium_basis, contract, grid)?;
    Ok((
        PremiumRates::from_pattern(contract.premium_pattern(), pp.scale),
        pp,
    ))
}

/// Names of technical bases by the boundary conditions their Thiele
/// solution satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisClass {
    Unclassified,
    Accumulation,
    Valuation,
    ProperValuation,
    Premium,
    Experience,
}

/// Designation flags that cannot be inferred from boundary conditions:
/// exactly one basis is designated the pricing basis, and the experience
/// basis is a modelling designation, never inferred.
#[derive(Debug, Clone, Copy, Default)]
pub struct Designations {
    pub pricing: bool,
    pub experience: bool,
}

/// Classify a Thiele solution by its boundary values:
/// accumulation iff `|V_0^i| ≤ tol` for all `i`; valuation iff
/// `|V_n^i − M_i| ≤ tol` for all `i`; proper valuation additionally needs
/// `|V_0^1| ≤ tol`. Premium and Experience refine proper-valuation and
/// accumulation respectively via the designation flags.
pub fn classify(
    solution: &StatewiseFunction,
    contract: &Contract,
    tol: f64,
    flags: Designations,
) -> Result<BasisClass> {
    if (solution.grid().term() - contract.term()).abs() > 1e-12
        || solution.states() != contract.states()
    {
        return Err(EngineError::GridMismatch(
            "solution grid does not match the contract".into(),
        ));
    }
    let k_n = solution.grid().steps();
    let m = solution.states();
    let initial_zero = (0..m).all(|i| solution.at(0, i).abs() <= tol);
    let terminal = (0..m).all(|i| (solution.at(k_n, i) - contract.maturity_benefit(i)).abs() <= tol);
    let proper = terminal && solution.at(0, 0).abs() <= tol;

    if flags.pricing && proper {
        return Ok(BasisClass::Premium);
    }
    if flags.experience && initial_zero {
        return Ok(BasisClass::Experience);
    }
    Ok(if proper {
        BasisClass::ProperValuation
    } else if terminal {
        BasisClass::Valuation
    } else if initial_zero {
        BasisClass::Accumulation
    } else {
        BasisClass::Unclassified
    })
}

/// Hoem's retrospective formula: the equal share per survivor of the
/// accumulated funds,
/// `V⁻_1(t) = V_1(t) − V_1(0) / (v^t P_11(0,t))`, and `V⁻_i = V_i` for
/// `i > 1`.
pub fn hoem_retrospective(
    aug: &AugmentedValuationBasis,
    contract: &Contract,
    v: &StatewiseFunction,
    grid: &TimeGrid,
) -> Result<StatewiseFunction> {
    let m = contract.states();
    let row_path = markov::occupancy_row_path(&aug.basis.intensities, m, grid)?;
    let v0 = v.at(0, 0);
    let mut out = v.clone();
    for k in 0..grid.len() {
        let t = grid.point(k);
        let denom = aug.basis.discount(t) * row_path[k][0];
        if denom.abs() < 1e-300 {
            return Err(EngineError::VanishingOccupancy {
                t,
                value: row_path[k][0],
            });
        }
        *out.at_mut(k, 0) = v.at(k, 0) - v0 / denom;
    }
    Ok(out)
}

/// Wolthuis' matrix generalization:
/// `V⁻(t) = V(t) − v^{-t} P(0,t)^{-1} (V_1(0), …, V_m(0))ᵀ`.
/// Singular occupancy matrices are reported, not regularized.
pub fn wolthuis_retrospective(
    aug: &AugmentedValuationBasis,
    contract: &Contract,
    v: &StatewiseFunction,
    grid: &TimeGrid,
) -> Result<StatewiseFunction> {
    let m = contract.states();
    let mats = markov::occupancy_path(&aug.basis.intensities, m, grid)?;
    let v0: Vec<f64> = (0..m).map(|i| v.at(0, i)).collect();
    let mut out = v.clone();
    for k in 0..grid.len() {
        let t = grid.point(k);
        let inv = mats[k]
            .inverse()
            .map_err(|pivot| EngineError::SingularOccupancy { t, pivot })?;
        let correction = inv.matvec(&v0);
        let growth = (aug.basis.delta * t).exp();
        for i in 0..m {
            *out.at_mut(k, i) = v.at(k, i) - growth * correction[i];
        }
    }
    Ok(out)
}
