//! Lapse-supported business: endowments to age 100 priced with future lapse
//! profits "mortgaged" into a lower premium. States: 1 = in-force,
//! 2 = dead, 3 = lapsed (2 and 3 absorbing). The case prices the contract
//! with and without lapse support, computes surplus rates under both
//! valuation bases against the experience basis, and verifies the
//! premium-mortgaging identity and its zero-surrender specialization.

use serde::{Deserialize, Serialize};

use crate::basis::{pure_premium, AugmentedValuationBasis, TechnicalBasis};
use crate::contract::{Contract, PremiumPattern, PremiumRates};
use crate::error::Result;
use crate::grid::{trapezoid, TimeGrid};
use crate::intensity::{IntensityFamily, IntensityFunction};
use crate::ode;
use crate::report::{curves_csv, fmt_sig};
use crate::surplus::SurplusEpvReport;
use crate::thiele::{solve_backward, surplus_rates};
use crate::timefn::TimeFunction;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LapseCaseConfig {
    /// Issue age x; the contract is an endowment to age 100, term 100 − x.
    pub age: f64,
    pub death_benefit: f64,
    /// Maturity benefit at age 100.
    pub maturity_benefit: f64,
    /// Surrender value C(t) paid on lapse.
    pub surrender: TimeFunction,
    pub delta: f64,
    pub mortality: IntensityFunction,
    /// Lapse intensity of the experience basis (and of the lapse-supported
    /// valuation basis).
    pub lapse: IntensityFunction,
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_step() -> f64 {
    1.0 / 1024.0
}

impl LapseCaseConfig {
    pub fn term(&self) -> f64 {
        100.0 - self.age
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| crate::error::EngineError::Config(format!("{e}")))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Eq36Check {
    pub lhs: f64,
    pub rhs: f64,
    pub rel_residual: f64,
}

#[derive(Debug, Clone)]
pub struct LapseReport {
    /// P: pure premium anticipating lapses (the contractual premium).
    pub premium_with_lapse: f64,
    /// P*: pure premium of the nil-lapse proper valuation basis.
    pub premium_nil_lapse: f64,
    pub lapse_support_lowers_premium: bool,
    /// EPV of premiums mortgaged by assuming lapse support (the identity's
    /// left side); negative means a need for capital support.
    pub mortgaged_epv: f64,
    pub mortgaged_label: &'static str,
    pub eq35_lhs: f64,
    pub eq35_rhs: f64,
    pub eq35_rel_residual: f64,
    /// Present only for the zero-surrender specialization.
    pub eq36: Option<Eq36Check>,
    pub csvs: Vec<(String, String)>,
    pub summary: String,
}

fn rel_residual(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-30)
}

pub fn lapse_case(cfg: &LapseCaseConfig, sig_digits: usize) -> Result<LapseReport> {
    let n = cfg.term();
    let grid = TimeGrid::new(n, cfg.step)?;
    let mut benefits = BTreeMap::new();
    benefits.insert((0usize, 1usize), TimeFunction::constant(cfg.death_benefit));
    benefits.insert((0usize, 2usize), cfg.surrender.clone());
    let contract = Contract::new(
        n,
        3,
        benefits,
        vec![cfg.maturity_benefit, 0.0, 0.0],
        PremiumPattern::level_in_start_state(3),
    )?;

    let with_lapse = TechnicalBasis::new(
        cfg.delta,
        IntensityFamily::new()
            .with(0, 1, cfg.mortality.clone())
            .with(0, 2, cfg.lapse.clone()),
    );
    let nil_lapse = TechnicalBasis::new(
        cfg.delta,
        IntensityFamily::new().with(0, 1, cfg.mortality.clone()),
    );

    // P on the lapse-supported basis (premium basis = experience basis);
    // P* on the nil-lapse alternative.
    let p = pure_premium(&with_lapse, &contract, &grid)?.scale;
    let p_star = pure_premium(&nil_lapse, &contract, &grid)?.scale;
    let p_rates = PremiumRates::from_pattern(contract.premium_pattern(), p);
    let p_star_rates = PremiumRates::from_pattern(contract.premium_pattern(), p_star);

    let aug_l = AugmentedValuationBasis::new(with_lapse.clone(), p_rates.clone());
    let aug_l_star = AugmentedValuationBasis::new(nil_lapse, p_star_rates);
    let v_l = solve_backward(&aug_l, &contract, &grid)?;
    let v_l_star = solve_backward(&aug_l_star, &contract, &grid)?;

    // ψ_t = exp(-∫_0^t (δ + μ^{12} + μ^{M,13})): survivorship discount under
    // the experience basis, accumulated with the shared integrator.
    let hazard = |t: f64| cfg.delta + cfg.mortality.eval(t) + cfg.lapse.eval(t);
    let cumulative = ode::rk4_forward_path(&grid, &[0.0], |t, _y, dy| dy[0] = hazard(t));
    let psi: Vec<f64> = cumulative.iter().map(|y| (-y[0]).exp()).collect();

    // Both sides of the mortgaging identity, assembled from disjoint code
    // paths: the left side discounts the premium gap, the right side prices
    // the anticipated lapse surpluses plus the shortfall adjustment between
    // the two reserves.
    let eq35_lhs = trapezoid(&grid, |k| psi[k] * (p - p_star));
    let anticipated = trapezoid(&grid, |k| {
        let t = grid.point(k);
        psi[k] * cfg.lapse.eval(t) * (cfg.surrender.eval(t) - v_l.at(k, 0))
    });
    let shortfall = trapezoid(&grid, |k| {
        let t = grid.point(k);
        psi[k] * cfg.lapse.eval(t) * (v_l.at(k, 0) - v_l_star.at(k, 0))
    });
    let eq35_rhs = anticipated + shortfall;

    let eq36 = if cfg.surrender.is_identically_zero() {
        let rhs = -trapezoid(&grid, |k| {
            psi[k] * cfg.lapse.eval(grid.point(k)) * v_l_star.at(k, 0)
        });
        Some(Eq36Check {
            lhs: eq35_lhs,
            rhs,
            rel_residual: rel_residual(eq35_lhs, rhs),
        })
    } else {
        None
    };

    // Surplus rates in state 1 under both valuation bases, accumulating at
    // the experience basis with the contractual premium.
    let w_l = surplus_rates(&aug_l, &v_l, &with_lapse, &p_rates, &contract)?;
    let w_l_star = surplus_rates(&aug_l_star, &v_l_star, &with_lapse, &p_rates, &contract)?;

    let points: Vec<f64> = grid.points().collect();
    let csvs = vec![
        (
            "lapse_policy_values.csv".to_string(),
            curves_csv(
                &points,
                &[
                    (
                        "V_lapse_supported".to_string(),
                        (0..grid.len()).map(|k| v_l.at(k, 0)).collect(),
                    ),
                    (
                        "V_nil_lapse".to_string(),
                        (0..grid.len()).map(|k| v_l_star.at(k, 0)).collect(),
                    ),
                ],
                sig_digits,
            ),
        ),
        (
            "lapse_surplus_rates.csv".to_string(),
            curves_csv(
                &points,
                &[
                    (
                        "W1_lapse_supported".to_string(),
                        (0..grid.len()).map(|k| w_l.at(k, 0)).collect(),
                    ),
                    (
                        "W1_nil_lapse".to_string(),
                        (0..grid.len()).map(|k| w_l_star.at(k, 0)).collect(),
                    ),
                ],
                sig_digits,
            ),
        ),
    ];

    let mortgaged_label = SurplusEpvReport::strain_label(eq35_lhs);
    let mut summary = String::new();
    summary.push_str(&format!(
        "premium with lapse support   P  = {}\n",
        fmt_sig(p, sig_digits)
    ));
    summary.push_str(&format!(
        "premium without lapses       P* = {}\n",
        fmt_sig(p_star, sig_digits)
    ));
    summary.push_str(&format!(
        "lapse support lowers premium: {}\n",
        p < p_star
    ));
    summary.push_str(&format!(
        "mortgaged premium EPV = {} ({})\n",
        fmt_sig(eq35_lhs, sig_digits),
        mortgaged_label
    ));
    summary.push_str(&format!(
        "premium-mortgaging identity: lhs = {}, rhs = {}, rel residual = {:.3e}\n",
        fmt_sig(eq35_lhs, sig_digits),
        fmt_sig(eq35_rhs, sig_digits),
        rel_residual(eq35_lhs, eq35_rhs)
    ));
    if let Some(e) = &eq36 {
        summary.push_str(&format!(
            "zero-surrender specialization: lhs = {}, rhs = {}, rel residual = {:.3e}\n",
            fmt_sig(e.lhs, sig_digits),
            fmt_sig(e.rhs, sig_digits),
            e.rel_residual
        ));
    }

    Ok(LapseReport {
        premium_with_lapse: p,
        premium_nil_lapse: p_star,
        lapse_support_lowers_premium: p < p_star,
        mortgaged_epv: eq35_lhs,
        mortgaged_label,
        eq35_lhs,
        eq35_rhs,
        eq35_rel_residual: rel_residual(eq35_lhs, eq35_rhs),
        eq36,
        csvs,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk() -> LapseCaseConfig {
        LapseCaseConfig {
            age: 40.0,
            death_benefit: 1.0,
            maturity_benefit: 1.0,
            surrender: TimeFunction::zero(),
            delta: 0.05,
            mortality: IntensityFunction::gm82_males(40.0),
            lapse: IntensityFunction::constant(0.04),
            step: 1.0 / 256.0,
        }
    }

    #[test]
    fn no_lapses_means_no_mortgaging() {
        let mut cfg = desk();
        cfg.lapse = IntensityFunction::constant(0.0);
        let r = lapse_case(&cfg, 10).unwrap();
        assert!((r.premium_with_lapse - r.premium_nil_lapse).abs() < 1e-14);
        assert!(r.eq35_lhs.abs() < 1e-12);
        assert!(r.eq35_rhs.abs() < 1e-12);
        assert!(!r.lapse_support_lowers_premium);
    }

    #[test]
    fn desk_case_lowers_premium_and_flags_strain() {
        let r = lapse_case(&desk(), 10).unwrap();
        assert!(
            r.lapse_support_lowers_premium,
            "P = {}, P* = {}",
            r.premium_with_lapse, r.premium_nil_lapse
        );
        assert!(r.mortgaged_epv < 0.0);
        assert_eq!(r.mortgaged_label, "capital strain");
    }

    #[test]
    fn zero_surrender_specialization_closes() {
        let r = lapse_case(&desk(), 10).unwrap();
        let e = r.eq36.expect("C ≡ 0 triggers the specialization");
        assert!(
            e.rel_residual <= 1e-7,
            "relative residual {}",
            e.rel_residual
        );
        assert!(
            r.eq35_rel_residual <= 1e-7,
            "general identity residual {}",
            r.eq35_rel_residual
        );
    }

    #[test]
    fn constant_intensity_specialization_closes() {
        let cfg = LapseCaseConfig {
            age: 40.0,
            death_benefit: 1.0,
            maturity_benefit: 1.0,
            surrender: TimeFunction::zero(),
            delta: 0.03,
            mortality: IntensityFunction::constant(0.006),
            lapse: IntensityFunction::constant(0.05),
            step: 1.0 / 256.0,
        };
        let r = lapse_case(&cfg, 10).unwrap();
        let e = r.eq36.unwrap();
        assert!(e.rel_residual <= 1e-7, "residual {}", e.rel_residual);
    }

    #[test]
    fn nonzero_surrender_exercises_both_identity_terms() {
        let mut cfg = desk();
        cfg.surrender =
            TimeFunction::piecewise_linear(vec![0.0, 40.0, 60.0], vec![0.0, 0.6, 0.6]);
        let r = lapse_case(&cfg, 10).unwrap();
        assert!(r.eq36.is_none());
        assert!(
            r.eq35_rel_residual <= 1e-7,
            "residual {}",
            r.eq35_rel_residual
        );
    }
}
