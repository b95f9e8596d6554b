//! Term-insurance desk case, three panels: (a) proper (net premium) policy
//! values at 80%/100%/120% mortality, (b) gross premium policy values at the
//! same mortality variants, (c) accumulation funds at interest 4%/5%/6%
//! with the contractual premium fixed. Sum assured 1, age 40, term 20,
//! baseline δ = 0.05, G82M mortality.

use crate::basis::{contractual_premium, pure_premium, AugmentedValuationBasis, TechnicalBasis};
use crate::contract::{Contract, PremiumRates};
use crate::error::Result;
use crate::grid::TimeGrid;
use crate::intensity::{IntensityFamily, IntensityFunction};
use crate::report::{curves_csv, fmt_sig};
use crate::thiele::{solve_backward, solve_forward};

pub struct Fig2Case {
    /// Contractual premium on the baseline basis.
    pub premium: f64,
    /// Pure premiums per mortality factor (panel a bases).
    pub pure_premiums: Vec<(f64, f64)>,
    /// Panel (a): state-1 net premium policy values per mortality factor.
    pub panel_a: Vec<(f64, Vec<f64>)>,
    /// Panel (b): state-1 gross premium policy values per mortality factor.
    pub panel_b: Vec<(f64, Vec<f64>)>,
    /// Panel (c): state-1 accumulation funds per force of interest.
    pub panel_c: Vec<(f64, Vec<f64>)>,
    pub grid: TimeGrid,
    /// `(filename, content)` per panel.
    pub csvs: Vec<(String, String)>,
    pub summary: String,
}

pub fn fig2_case(
    delta: f64,
    mortality: &IntensityFunction,
    term: f64,
    step: f64,
    sig_digits: usize,
) -> Result<Fig2Case> {
    let grid = TimeGrid::new(term, step)?;
    let contract = Contract::term_insurance(term, 1.0, 0.0);
    let base_family = IntensityFamily::new().with(0, 1, mortality.clone());
    let premium_basis = TechnicalBasis::new(delta, base_family);
    let (p_rates, p) = contractual_premium(&premium_basis, &contract, &grid)?;

    let factors = [0.8, 1.0, 1.2];
    let mut pure_premiums: Vec<(f64, f64)> = Vec::new();
    let mut panel_a: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut panel_b: Vec<(f64, Vec<f64>)> = Vec::new();
    for f in factors {
        let b = premium_basis.with_scaled_intensities(f);
        let pp = pure_premium(&b, &contract, &grid)?;
        pure_premiums.push((f, pp.scale));
        let net = AugmentedValuationBasis::new(
            b.clone(),
            PremiumRates::from_pattern(contract.premium_pattern(), pp.scale),
        );
        let va = solve_backward(&net, &contract, &grid)?;
        panel_a.push((f, (0..grid.len()).map(|k| va.at(k, 0)).collect()));
        let gross = AugmentedValuationBasis::new(b, p_rates.clone());
        let vb = solve_backward(&gross, &contract, &grid)?;
        panel_b.push((f, (0..grid.len()).map(|k| vb.at(k, 0)).collect()));
    }

    let interests = [0.04, 0.05, 0.06];
    let mut panel_c: Vec<(f64, Vec<f64>)> = Vec::new();
    for d in interests {
        let b = TechnicalBasis::new(d, premium_basis.intensities.clone());
        let a = solve_forward(&b, &contract, &p_rates, &[0.0, 0.0], &grid)?;
        panel_c.push((d, (0..grid.len()).map(|k| a.at(k, 0)).collect()));
    }

    let points: Vec<f64> = grid.points().collect();
    let label = |tag: &str, x: f64| format!("{tag}_{x}");
    let csvs = vec![
        (
            "fig2_panel_a_net_policy_values.csv".to_string(),
            curves_csv(
                &points,
                &panel_a
                    .iter()
                    .map(|(f, v)| (label("V_net_mort", *f), v.clone()))
                    .collect::<Vec<_>>(),
                sig_digits,
            ),
        ),
        (
            "fig2_panel_b_gross_policy_values.csv".to_string(),
            curves_csv(
                &points,
                &panel_b
                    .iter()
                    .map(|(f, v)| (label("V_gross_mort", *f), v.clone()))
                    .collect::<Vec<_>>(),
                sig_digits,
            ),
        ),
        (
            "fig2_panel_c_accumulation_funds.csv".to_string(),
            curves_csv(
                &points,
                &panel_c
                    .iter()
                    .map(|(d, v)| (label("A_delta", *d), v.clone()))
                    .collect::<Vec<_>>(),
                sig_digits,
            ),
        ),
    ];

    let mut summary = String::new();
    summary.push_str(&format!(
        "contractual premium P = {}\n",
        fmt_sig(p.scale, sig_digits)
    ));
    for (f, pi) in &pure_premiums {
        summary.push_str(&format!(
            "pure premium at mortality x{f}: {}\n",
            fmt_sig(*pi, sig_digits)
        ));
    }
    for (f, v) in &panel_a {
        summary.push_str(&format!(
            "panel a, mortality x{f}: V(0) = {:.3e}, V(n) = {:.3e}\n",
            v[0],
            v[grid.steps()]
        ));
    }
    for (f, v) in &panel_b {
        summary.push_str(&format!(
            "panel b, mortality x{f}: V(0) = {:.3e}, V(n) = {:.3e}\n",
            v[0],
            v[grid.steps()]
        ));
    }
    for (d, v) in &panel_c {
        summary.push_str(&format!(
            "panel c, delta {d}: A(0) = {:.3e}, A(n) = {:.3e}\n",
            v[0],
            v[grid.steps()]
        ));
    }

    Ok(Fig2Case {
        premium: p.scale,
        pure_premiums,
        panel_a,
        panel_b,
        panel_c,
        grid,
        csvs,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case() -> Fig2Case {
        fig2_case(
            0.05,
            &IntensityFunction::gm82_males(40.0),
            20.0,
            1.0 / 256.0,
            10,
        )
        .unwrap()
    }

    #[test]
    fn premium_matches_frozen_continuum_value() {
        // converged value of the equation of value under G82M at δ = 0.05
        let c = case();
        assert!(
            (c.premium - 0.006301826966).abs() < 1e-9,
            "P = {}",
            c.premium
        );
    }

    #[test]
    fn panel_a_curves_start_at_zero() {
        let c = case();
        for (f, v) in &c.panel_a {
            assert!(v[0].abs() < 1e-9, "mortality x{f} starts at {}", v[0]);
        }
    }

    #[test]
    fn panel_b_curves_end_at_zero_and_differ_at_outset() {
        let c = case();
        for (_, v) in &c.panel_b {
            assert_eq!(*v.last().unwrap(), 0.0);
        }
        let starts: Vec<f64> = c.panel_b.iter().map(|(_, v)| v[0]).collect();
        assert!(starts[0] < starts[1] && starts[1] < starts[2]);
        assert!(starts[1].abs() < 1e-9, "baseline gross is proper");
    }

    #[test]
    fn panel_c_curves_share_origin_and_spread_at_maturity() {
        let c = case();
        let mut ends = Vec::new();
        for (_, v) in &c.panel_c {
            assert_eq!(v[0], 0.0);
            ends.push(*v.last().unwrap());
        }
        assert!(ends[0] < ends[1] && ends[1] < ends[2]);
    }

    #[test]
    fn csvs_cover_three_panels() {
        let c = case();
        assert_eq!(c.csvs.len(), 3);
        for (_, content) in &c.csvs {
            assert_eq!(content.lines().count(), c.grid.len() + 1);
        }
    }
}
