//! Counting-process simulation under the experience basis and the pathwise
//! surplus functionals built on it: `Γ^L`, `Γ^{L,A}`, martingale residuals,
//! and the two pathwise identities used for verification.
//!
//! Between-jump integrals of `e^{-δs}·(grid-linear integrand)` are evaluated
//! in closed form per grid cell, so path functionals do not depend on how
//! jump times align with the grid.

mod rng;

pub use rng::{SeedPolicy, SplitMix64};

use std::collections::BTreeMap;

use crate::basis::{AugmentedValuationBasis, TechnicalBasis};
use crate::contract::{Contract, PremiumRates};
use crate::error::{EngineError, Result};
use crate::grid::{integrate_discounted_linear, StatewiseFunction, TimeGrid};
use crate::thiele::SumsAtRisk;

/// One transition on a sample path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub from: usize,
    pub to: usize,
}

/// A sample path of the state process: start state 1 (index 0), jump times
/// strictly increasing in `(0, n]`, consecutive jumps chaining. Induces the
/// counting processes `N^{ij}` and the sojourn indicators `Y^i`.
#[derive(Debug, Clone)]
pub struct SamplePath {
    term: f64,
    jumps: Vec<Jump>,
}

impl SamplePath {
    pub const START_STATE: usize = 0;

    pub fn new(term: f64, jumps: Vec<Jump>) -> Result<Self> {
        let mut state = Self::START_STATE;
        let mut last = 0.0;
        for j in &jumps {
            if j.time <= last || j.time > term {
                return Err(EngineError::Config(format!(
                    "jump times must be strictly increasing within (0, {term}]; got {}",
                    j.time
                )));
            }
            if j.from != state {
                return Err(EngineError::Config(format!(
                    "jump at t = {} leaves state {} but the path is in state {}",
                    j.time,
                    j.from + 1,
                    state + 1
                )));
            }
            if j.from == j.to {
                return Err(EngineError::Config("self-jump (i, i)".into()));
            }
            last = j.time;
            state = j.to;
        }
        Ok(SamplePath { term, jumps })
    }

    pub fn term(&self) -> f64 {
        self.term
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// Right-continuous state `J(t)`.
    pub fn state_at(&self, t: f64) -> usize {
        let mut state = Self::START_STATE;
        for j in &self.jumps {
            if j.time <= t {
                state = j.to;
            } else {
                break;
            }
        }
        state
    }

    /// `N^{ij}_t`: direct transitions `i → j` in `[0, t]`.
    pub fn count(&self, from: usize, to: usize, t: f64) -> usize {
        self.jumps
            .iter()
            .filter(|j| j.time <= t && j.from == from && j.to == to)
            .count()
    }

    /// Maximal constant-state intervals `(a, b, state)` covering `[0, t]`.
    /// Exactly one state occupies each instant, so the segments partition
    /// the interval.
    pub fn segments(&self, up_to: f64) -> Vec<(f64, f64, usize)> {
        let t_end = up_to.min(self.term);
        let mut out = Vec::with_capacity(self.jumps.len() + 1);
        let mut a = 0.0;
        let mut state = Self::START_STATE;
        for j in &self.jumps {
            if j.time >= t_end {
                break;
            }
            if j.time > a {
                out.push((a, j.time, state));
            }
            a = j.time;
            state = j.to;
        }
        if t_end > a {
            out.push((a, t_end, state));
        }
        out
    }
}

/// Samples an inhomogeneous Markov path by thinning: in state `i`, propose
/// exponential arrivals at the per-unit-year supremum of `μ^i`, accept a
/// proposal at `t` with probability `μ^i(t)/μ̄^i`, and pick the destination
/// with probabilities `μ^{ij}(t)/μ^i(t)`. Exact for bounded intensities.
pub fn simulate_path(
    experience: &TechnicalBasis,
    n: f64,
    seed: &SeedPolicy,
    k: u64,
) -> Result<SamplePath> {
    let fam = &experience.intensities;
    let mut rng = seed.stream(k);
    let mut jumps = Vec::new();
    let mut state = SamplePath::START_STATE;
    let mut t = 0.0f64;
    while t < n {
        // nothing ahead can fire: absorbing for the rest of the term
        if fam.sup_total_exit(state, t, n) == 0.0 {
            break;
        }
        let window_end = (t.floor() + 1.0).min(n);
        let bound = fam.sup_total_exit(state, t, window_end);
        if !bound.is_finite() {
            return Err(EngineError::UnboundedIntensity {
                state: state + 1,
                a: t,
                b: window_end,
            });
        }
        if bound <= 0.0 {
            t = window_end;
            continue;
        }
        let proposal = t + rng.next_exp(bound);
        if proposal >= window_end {
            t = window_end;
            continue;
        }
        t = proposal;
        let total = fam.total_exit(state, t);
        if rng.next_unit() * bound <= total {
            // accepted: choose the destination by its share of the total
            let mut pick = rng.next_unit() * total;
            let mut dest = None;
            for (j, f) in fam.pairs_from(state) {
                pick -= f.eval(t);
                if pick <= 0.0 {
                    dest = Some(j);
                    break;
                }
            }
            let to = dest.unwrap_or_else(|| {
                // rounding guard: the last destination takes the remainder
                fam.pairs_from(state).last().map(|(j, _)| j).unwrap()
            });
            jumps.push(Jump {
                time: t,
                from: state,
                to,
            });
            state = to;
        }
    }
    SamplePath::new(n, jumps)
}

/// Cumulative `Σ_i ∫_0^{t_k} e^{-δs} Y^i_s f̃_i(s) ds` at every grid point,
/// where `f̃_i` linearly interpolates `sample(k, i)`.
fn cumulative_state_integral<F>(
    grid: &TimeGrid,
    delta: f64,
    path: &SamplePath,
    sample: F,
) -> Vec<f64>
where
    F: Fn(usize, usize) -> f64,
{
    let mut per_cell = vec![0.0; grid.steps()];
    for (a, b, state) in path.segments(grid.term()) {
        let k0 = grid.cell_of(a);
        let k1 = grid.cell_of(b - 1e-15 * b.abs().max(1.0));
        for k in k0..=k1 {
            let u = a.max(grid.point(k));
            let v = b.min(grid.point(k + 1));
            if v <= u {
                continue;
            }
            per_cell[k] += integrate_discounted_linear(grid, delta, |kk| sample(kk, state), u, v);
        }
    }
    let mut cum = vec![0.0; grid.len()];
    for k in 0..grid.steps() {
        cum[k + 1] = cum[k] + per_cell[k];
    }
    cum
}

/// `Γ_t^L`: discounted premiums received minus benefits paid minus the
/// discounted policy value held, along one path:
///
/// `Γ_t^L = Σ_i ∫_0^t v^s Y^i_s P_i(s) ds − Σ jumps ≤ t v^T b_ij(T)
///          − v^t V_t^{J(t)}`.
pub fn path_gamma_l(
    path: &SamplePath,
    v: &StatewiseFunction,
    contract: &Contract,
    contractual: &PremiumRates,
    delta: f64,
    t: f64,
) -> Result<f64> {
    let grid = v.grid();
    if !grid.contains(t) {
        return Err(EngineError::OutOfDomain { t, n: grid.term() });
    }
    let mut premiums = 0.0;
    for (a, b, state) in path.segments(t) {
        premiums += integrate_discounted_linear(
            grid,
            delta,
            |k| contractual.rate(state, grid.point(k)),
            a,
            b,
        );
    }
    let mut benefits = 0.0;
    for j in path.jumps().iter().filter(|j| j.time <= t) {
        benefits +=
            (-delta * j.time).exp() * contract.transition_benefit(j.from, j.to, j.time);
    }
    let held = (-delta * t).exp() * v.eval(t, path.state_at(t))?;
    Ok(premiums - benefits - held)
}

/// `Γ_t^{L,A} = Σ_i ∫_0^t v^s Y^i_s W_s^i ds` along one path.
pub fn path_gamma_la(
    path: &SamplePath,
    w: &StatewiseFunction,
    delta: f64,
    t: f64,
) -> Result<f64> {
    let grid = w.grid();
    if !grid.contains(t) {
        return Err(EngineError::OutOfDomain { t, n: grid.term() });
    }
    let mut acc = 0.0;
    for (a, b, state) in path.segments(t) {
        acc += integrate_discounted_linear(grid, delta, |k| w.at(k, state), a, b);
    }
    Ok(acc)
}

/// Per-pair decomposition of the martingale residual: compensated jump sums
/// `Σ v^T R^{ij}(T) − ∫ v^s Y^i μ^{M,ij}_s R^{ij}_s ds`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairLedger {
    pub jump_part: f64,
    pub compensator_part: f64,
}

impl PairLedger {
    pub fn residual(&self) -> f64 {
        self.jump_part - self.compensator_part
    }
}

#[derive(Debug, Clone, Default)]
pub struct MartingaleLedger {
    pub pairs: BTreeMap<(usize, usize), PairLedger>,
}

impl MartingaleLedger {
    pub fn total(&self) -> f64 {
        self.pairs.values().map(PairLedger::residual).sum()
    }
}

/// The martingale term `Σ_{i,j} ∫_0^t v^s R^{ij}_s dM^{ij}_s` evaluated on
/// one path, with the per-pair ledger. Has zero mean under the experience
/// basis.
pub fn martingale_residual(
    path: &SamplePath,
    experience: &TechnicalBasis,
    risk: &SumsAtRisk,
    delta: f64,
    t: f64,
) -> Result<(f64, MartingaleLedger)> {
    let grid = risk.grid();
    if !grid.contains(t) {
        return Err(EngineError::OutOfDomain { t, n: grid.term() });
    }
    let mut ledger = MartingaleLedger::default();
    for j in path.jumps().iter().filter(|j| j.time <= t) {
        let entry = ledger.pairs.entry((j.from, j.to)).or_default();
        entry.jump_part += (-delta * j.time).exp() * risk.eval(j.time, j.from, j.to)?;
    }
    // compensators accrue for every pair out of the occupied state
    for (a, b, state) in path.segments(t) {
        for (to, f) in experience.intensities.pairs_from(state) {
            let entry = ledger.pairs.entry((state, to)).or_default();
            entry.compensator_part += integrate_discounted_linear(
                grid,
                delta,
                |k| f.eval(grid.point(k)) * risk.at(k, state, to),
                a,
                b,
            );
        }
    }
    Ok((ledger.total(), ledger))
}

/// Pathwise check of the total-surplus identity: at every grid point,
///
/// `Γ_t^{L,A} − V_0^1  =  Γ_t^L − Σ_i ∫_0^t v^s Y^i Σ_j Δ^Aμ^{ij} R^{ij} ds
///                        + Σ_{i,j} ∫_0^t v^s R^{ij} dM^{ij}`,
///
/// with `Δ^Aμ = μ^A − μ^M`. Returns the sup over grid points of the
/// two-sided residual, which measures only discretization.
#[allow(clippy::too_many_arguments)]
pub fn pathwise_prop2_check(
    path: &SamplePath,
    valuation: &AugmentedValuationBasis,
    v: &StatewiseFunction,
    w: &StatewiseFunction,
    risk: &SumsAtRisk,
    accumulation: &TechnicalBasis,
    experience: &TechnicalBasis,
    contract: &Contract,
    contractual: &PremiumRates,
) -> Result<f64> {
    let grid = *v.grid();
    let m = v.states();
    let delta = valuation.basis.delta;
    let v0 = v.at(0, 0);

    let cum_w = cumulative_state_integral(&grid, delta, path, |k, i| w.at(k, i));
    let cum_prem = cumulative_state_integral(&grid, delta, path, |k, i| {
        contractual.rate(i, grid.point(k))
    });
    let cum_sys = cumulative_state_integral(&grid, delta, path, |k, i| {
        let tk = grid.point(k);
        (0..m)
            .filter(|&j| j != i)
            .map(|j| {
                (accumulation.intensities.rate(i, j, tk) - experience.intensities.rate(i, j, tk))
                    * risk.at(k, i, j)
            })
            .sum()
    });
    let cum_comp = cumulative_state_integral(&grid, delta, path, |k, i| {
        let tk = grid.point(k);
        (0..m)
            .filter(|&j| j != i)
            .map(|j| experience.intensities.rate(i, j, tk) * risk.at(k, i, j))
            .sum()
    });

    let mut max_residual: f64 = 0.0;
    let mut jump_benefits = 0.0;
    let mut jump_risk = 0.0;
    let mut next_jump = 0usize;
    for k in 0..grid.len() {
        let tk = grid.point(k);
        while next_jump < path.jumps().len() && path.jumps()[next_jump].time <= tk {
            let j = &path.jumps()[next_jump];
            let disc = (-delta * j.time).exp();
            jump_benefits += disc * contract.transition_benefit(j.from, j.to, j.time);
            jump_risk += disc * risk.eval(j.time, j.from, j.to)?;
            next_jump += 1;
        }
        let state = path.state_at(tk);
        let gamma_l =
            cum_prem[k] - jump_benefits - (-delta * tk).exp() * v.at(k.min(grid.steps()), state);
        let lhs = cum_w[k] - v0;
        let rhs = gamma_l - cum_sys[k] + (jump_risk - cum_comp[k]);
        max_residual = max_residual.max((lhs - rhs).abs());
    }
    Ok(max_residual)
}

/// Pathwise check of the integration-by-parts identity used throughout the
/// surplus algebra:
///
/// `Σ_i ∫_0^t Y^i_s d(v^s V^i_s) + Σ jumps v^T (V^j_T − V^i_T)
///   = v^t V_t^{J(t)} − V_0^1`.
///
/// The derivative is taken from centered differences of the solver output,
/// so the residual measures quadrature error, not an algebraic tautology.
pub fn pathwise_key_identity(
    path: &SamplePath,
    v: &StatewiseFunction,
    delta: f64,
) -> Result<f64> {
    let grid = *v.grid();
    let m = v.states();
    let h = grid.step();
    let last = grid.steps();
    // g_i(t_k) = e^{-δ t_k} (V_i'(t_k) − δ V_i(t_k))
    let mut g = vec![vec![0.0; m]; grid.len()];
    for k in 0..grid.len() {
        let disc = (-delta * grid.point(k)).exp();
        for i in 0..m {
            let slope = if k == 0 {
                (-3.0 * v.at(0, i) + 4.0 * v.at(1, i) - v.at(2, i)) / (2.0 * h)
            } else if k == last {
                (3.0 * v.at(last, i) - 4.0 * v.at(last - 1, i) + v.at(last - 2, i)) / (2.0 * h)
            } else {
                (v.at(k + 1, i) - v.at(k - 1, i)) / (2.0 * h)
            };
            g[k][i] = disc * (slope - delta * v.at(k, i));
        }
    }
    // Σ_i ∫ Y^i g_i ds with plain (undiscounted) cell integration: the
    // discount already lives inside the samples.
    let cum_g = cumulative_state_integral(&grid, 0.0, path, |k, i| g[k][i]);

    let mut max_residual: f64 = 0.0;
    let mut jump_term = 0.0;
    let mut next_jump = 0usize;
    let v0 = v.at(0, 0);
    for k in 0..grid.len() {
        let tk = grid.point(k);
        while next_jump < path.jumps().len() && path.jumps()[next_jump].time <= tk {
            let j = &path.jumps()[next_jump];
            jump_term += (-delta * j.time).exp()
                * (v.eval(j.time, j.to)? - v.eval(j.time, j.from)?);
            next_jump += 1;
        }
        let rhs = (-delta * tk).exp() * v.at(k, path.state_at(tk)) - v0;
        max_residual = max_residual.max((cum_g[k] + jump_term - rhs).abs());
    }
    Ok(max_residual)
}

/// Monte Carlo estimate: sample mean and standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Pairwise (cascade) summation: order-insensitive aggregation whose result
/// is reproducible bit-for-bit for a given value vector.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Evaluates `f(k)` for `k in 0..n_paths` into slot order, optionally on
/// several threads. Slot order makes the result independent of scheduling.
pub fn compute_path_values<F>(n_paths: usize, threads: usize, f: &F) -> Vec<f64>
where
    F: Fn(u64) -> f64 + Sync,
{
    let mut values = vec![0.0; n_paths];
    let workers = threads.max(1).min(n_paths.max(1));
    if workers <= 1 {
        for (k, slot) in values.iter_mut().enumerate() {
            *slot = f(k as u64);
        }
        return values;
    }
    let chunk = n_paths.div_ceil(workers);
    std::thread::scope(|scope| {
        for (ci, slots) in values.chunks_mut(chunk).enumerate() {
            let start = ci * chunk;
            scope.spawn(move || {
                for (off, slot) in slots.iter_mut().enumerate() {
                    *slot = f((start + off) as u64);
                }
            });
        }
    });
    values
}

pub fn estimate(values: &[f64]) -> Result<McEstimate> {
    let n = values.len();
    if n < 2 {
        return Err(EngineError::Config(
            "Monte Carlo needs at least two paths".into(),
        ));
    }
    let mean = pairwise_sum(values) / n as f64;
    let sq: Vec<f64> = values.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    Ok(McEstimate {
        mean,
        std_error: (var / n as f64).sqrt(),
        n,
    })
}

/// Runs `functional` over `n_paths` independent path indices and aggregates
/// deterministically; the caller's functional derives each path from
/// `(master_seed, k)`.
pub fn monte_carlo<F>(n_paths: usize, threads: usize, functional: F) -> Result<McEstimate>
where
    F: Fn(u64) -> f64 + Sync,
{
    let values = compute_path_values(n_paths, threads, &functional);
    estimate(&values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{contractual_premium, AugmentedValuationBasis};
    use crate::intensity::{IntensityFamily, IntensityFunction};
    use crate::thiele::{solve_backward, sums_at_risk, surplus_rates};

    fn grid(n: f64) -> TimeGrid {
        TimeGrid::new(n, 1.0 / 256.0).unwrap()
    }

    fn seed() -> SeedPolicy {
        SeedPolicy::new(0x2026_0808)
    }

    #[test]
    fn zero_intensities_stay_in_start_state() {
        let basis = TechnicalBasis::new(0.05, IntensityFamily::new());
        let path = simulate_path(&basis, 20.0, &seed(), 7).unwrap();
        assert!(path.jumps().is_empty());
        assert_eq!(path.state_at(13.0), SamplePath::START_STATE);
    }

    #[test]
    fn paths_are_deterministic_in_seed_and_index() {
        let basis = TechnicalBasis::new(
            0.05,
            IntensityFamily::new().with(0, 1, IntensityFunction::gm82_males(70.0)),
        );
        let a = simulate_path(&basis, 20.0, &seed(), 11).unwrap();
        let b = simulate_path(&basis, 20.0, &seed(), 11).unwrap();
        assert_eq!(a.jumps(), b.jumps());
        // a different index gives a different path with overwhelming
        // probability at this mortality level; check a few indices
        let mut distinct = false;
        for k in 0..10 {
            let c = simulate_path(&basis, 20.0, &seed(), k).unwrap();
            if c.jumps() != a.jumps() {
                distinct = true;
            }
        }
        assert!(distinct);
    }

    #[test]
    fn survival_fraction_matches_constant_hazard() {
        // μ^{12} ≡ 0.02, n = 20: P(no jump) = e^{-0.4}; 10^5 paths within
        // three binomial standard errors.
        let basis = TechnicalBasis::new(
            0.0,
            IntensityFamily::new().with(0, 1, IntensityFunction::constant(0.02)),
        );
        let n_paths = 100_000;
        let policy = seed();
        let mut alive = 0usize;
        for k in 0..n_paths {
            if simulate_path(&basis, 20.0, &policy, k as u64)
                .unwrap()
                .jumps()
                .is_empty()
            {
                alive += 1;
            }
        }
        let p = (-0.4f64).exp();
        let se = (p * (1.0 - p) / n_paths as f64).sqrt();
        let observed = alive as f64 / n_paths as f64;
        assert!(
            (observed - p).abs() <= 3.0 * se,
            "observed {observed}, expected {p} ± {}",
            3.0 * se
        );
    }

    #[test]
    fn destination_split_matches_competing_risks() {
        // constant μ^{12} = 0.01, μ^{13} = 0.05: jumpers split 1:5
        let basis = TechnicalBasis::new(
            0.0,
            IntensityFamily::new()
                .with(0, 1, IntensityFunction::constant(0.01))
                .with(0, 2, IntensityFunction::constant(0.05)),
        );
        let policy = seed();
        let (mut to_dead, mut to_lapsed) = (0usize, 0usize);
        for k in 0..60_000u64 {
            let path = simulate_path(&basis, 20.0, &policy, k).unwrap();
            if let Some(j) = path.jumps().first() {
                if j.to == 1 {
                    to_dead += 1;
                } else {
                    to_lapsed += 1;
                }
            }
        }
        let jumps = (to_dead + to_lapsed) as f64;
        let share = to_dead as f64 / jumps;
        let se = (jumps * (1.0 / 6.0) * (5.0 / 6.0)).sqrt() / jumps;
        assert!(
            (share - 1.0 / 6.0).abs() <= 3.0 * se,
            "death share {share}, expected {} ± {}",
            1.0 / 6.0,
            3.0 * se
        );
    }

    #[test]
    fn time_varying_acceptance_matches_survival() {
        // GM82 at a high age stresses the thinning acceptance step; compare
        // against the closed-form survival from the no-exit probability.
        let basis = TechnicalBasis::new(
            0.0,
            IntensityFamily::new().with(0, 1, IntensityFunction::gm82_males(70.0)),
        );
        let g = grid(10.0);
        let p_exact =
            crate::markov::no_exit_probability(&basis.intensities, 2, 0, 0.0, 10.0, &g)
                .unwrap();
        let n_paths = 40_000;
        let policy = seed();
        let mut alive = 0usize;
        for k in 0..n_paths {
            if simulate_path(&basis, 10.0, &policy, k as u64)
                .unwrap()
                .jumps()
                .is_empty()
            {
                alive += 1;
            }
        }
        let observed = alive as f64 / n_paths as f64;
        let se = (p_exact * (1.0 - p_exact) / n_paths as f64).sqrt();
        assert!(
            (observed - p_exact).abs() <= 3.0 * se,
            "observed {observed}, exact {p_exact}"
        );
    }

    #[test]
    fn exactly_one_state_at_all_times() {
        let basis = TechnicalBasis::new(
            0.0,
            IntensityFamily::new()
                .with(0, 1, IntensityFunction::constant(0.3))
                .with(1, 0, IntensityFunction::constant(0.4))
                .with(0, 2, IntensityFunction::constant(0.1)),
        );
        let policy = seed();
        for k in 0..50u64 {
            let path = simulate_path(&basis, 20.0, &policy, k).unwrap();
            let segs = path.segments(20.0);
            // segments partition [0, n]: consecutive, covering, one state each
            assert!((segs[0].0 - 0.0).abs() < 1e-15);
            for w in segs.windows(2) {
                assert_eq!(w[0].1, w[1].0);
            }
            assert!((segs.last().unwrap().1 - 20.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gamma_l_is_zero_on_the_deterministic_single_basis_model() {
        // With zero intensities the no-jump path is the whole probability
        // space, and the equivalence-principle premium makes the contract
        // self-financing pathwise: Γ_t^L = 0 for all t.
        let contract = Contract::term_insurance(20.0, 0.0, 1.0);
        let basis = TechnicalBasis::new(0.05, IntensityFamily::new());
        let g = grid(20.0);
        let (p, _) = contractual_premium(&basis, &contract, &g).unwrap();
        let aug = AugmentedValuationBasis::new(basis.clone(), p.clone());
        let v = solve_backward(&aug, &contract, &g).unwrap();
        let path = simulate_path(&basis, 20.0, &seed(), 0).unwrap();
        for t in [0.0, 3.7, 11.0, 20.0] {
            let gl = path_gamma_l(&path, &v, &contract, &p, 0.05, t).unwrap();
            // off-grid evaluation carries the O(h²) interpolation error of V
            assert!(gl.abs() < 1e-8, "Γ_{t}^L = {gl}");
        }
    }

    #[test]
    fn gamma_l_at_time_zero_is_minus_initial_value() {
        let contract = Contract::term_insurance(20.0, 1.0, 0.0);
        let base = TechnicalBasis::new(
            0.05,
            IntensityFamily::new().with(0, 1, IntensityFunction::gm82_males(40.0)),
        );
        let g = grid(20.0);
        let (p, _) = contractual_premium(&base, &contract, &g).unwrap();
        let aug = AugmentedValuationBasis::new(base.with_scaled_intensities(1.2), p.clone());
        let v = solve_backward(&aug, &contract, &g).unwrap();
        let path = SamplePath::new(20.0, vec![]).unwrap();
        let g0 = path_gamma_l(&path, &v, &contract, &p, 0.05, 0.0).unwrap();
        assert!((g0 + v.at(0, 0)).abs() < 1e-14);
    }

    #[test]
    fn gamma_l_death_path_assembles_directly() {
        // one death at T: premiums to T, then −v^T S, then the held value is
        // the dead-state solution (zero here)
        let contract = Contract::term_insurance(20.0, 1.0, 0.0);
        let delta = 0.05;
        let base = TechnicalBasis::new(
            delta,
            IntensityFamily::new().with(0, 1, IntensityFunction::constant(0.01)),
        );
        let g = grid(20.0);
        let (p, pp) = contractual_premium(&base, &contract, &g).unwrap();
        let aug = AugmentedValuationBasis::new(base, p.clone());
        let v = solve_backward(&aug, &contract, &g).unwrap();
        let t_death = 7.3;
        let path = SamplePath::new(
            20.0,
            vec![Jump {
                time: t_death,
                from: 0,
                to: 1,
            }],
        )
        .unwrap();
        let got = path_gamma_l(&path, &v, &contract, &p, delta, 15.0).unwrap();
        let annuity = (1.0 - (-delta * t_death).exp()) / delta;
        let expect = pp.scale * annuity - (-delta * t_death).exp() * 1.0 - 0.0;
        assert!(
            (got - expect).abs() < 1e-10,
            "Γ = {got}, direct assembly {expect}"
        );
    }

    #[test]
    fn gamma_la_zero_and_flat_cases() {
        let g = grid(10.0);
        let path = SamplePath::new(10.0, vec![]).unwrap();
        let w0 = StatewiseFunction::zeros(g, 2);
        assert_eq!(path_gamma_la(&path, &w0, 0.05, 10.0).unwrap(), 0.0);

        // W^1 ≡ w, δ = 0, no jumps: Γ_t^{L,A} = w t
        let mut w = StatewiseFunction::zeros(g, 2);
        for k in 0..g.len() {
            *w.at_mut(k, 0) = 0.37;
        }
        let got = path_gamma_la(&path, &w, 0.0, 6.5).unwrap();
        assert!((got - 0.37 * 6.5).abs() < 1e-12);
    }

    #[test]
    fn gamma_la_loading_only_matches_annuity_integral() {
        // W from identical bases except a loading c in state 1 equals
        // c·∫_0^t v^s Y^1_s ds
        let contract = Contract::term_insurance(20.0, 1.0, 0.0);
        let base = TechnicalBasis::new(
            0.05,
            IntensityFamily::new().with(0, 1, IntensityFunction::gm82_males(40.0)),
        );
        let g = grid(20.0);
        let (p, pp) = contractual_premium(&base, &contract, &g).unwrap();
        let c = 0.002;
        let aug = AugmentedValuationBasis::new(
            base.clone(),
            PremiumRates::from_pattern(contract.premium_pattern(), pp.scale - c),
        );
        let v = solve_backward(&aug, &contract, &g).unwrap();
        let w = surplus_rates(&aug, &v, &base, &p, &contract).unwrap();
        let path = simulate_path(&base, 20.0, &seed(), 3).unwrap();
        let t = 20.0;
        let got = path_gamma_la(&path, &w, 0.05, t).unwrap();
        let mut annuity = 0.0;
        for (a, b, state) in path.segments(t) {
            if state == 0 {
                annuity += ((-0.05 * a).exp() - (-0.05 * b).exp()) / 0.05;
            }
        }
        assert!(
            (got - c * annuity).abs() < 1e-12,
            "Γ^{{L,A}} = {got}, c·annuity = {}",
            c * annuity
        );
    }

    #[test]
    fn martingale_residual_trivial_cases() {
        let contract = Contract::term_insurance(20.0, 1.0, 0.0);
        let g = grid(20.0);
        let none = TechnicalBasis::new(0.05, IntensityFamily::new());
        let v = StatewiseFunction::zeros(g, 2);
        let risk = sums_at_risk(&v, &contract);

        // no intensities, no jumps
        let path = SamplePath::new(20.0, vec![]).unwrap();
        let (r, ledger) = martingale_residual(&path, &none, &risk, 0.05, 20.0).unwrap();
        assert_eq!(r, 0.0);
        assert!(ledger.pairs.is_empty());

        // injected deterministic jump with a zero-intensity compensator:
        // residual = v^T R(T) exactly
        let t_jump = 4.25;
        let path = SamplePath::new(
            20.0,
            vec![Jump {
                time: t_jump,
                from: 0,
                to: 1,
            }],
        )
        .unwrap();
        let (r, ledger) = martingale_residual(&path, &none, &risk, 0.05, 20.0).unwrap();
        let expect = (-0.05 * t_jump).exp() * risk.eval(t_jump, 0, 1).unwrap();
        assert!((r - expect).abs() < 1e-15);
        assert_eq!(ledger.pairs.len(), 1);
        assert_eq!(ledger.pairs[&(0, 1)].compensator_part, 0.0);
    }

    #[test]
    fn martingale_residual_mean_is_zero() {
        let contract = Contract::term_insurance(20.0, 1.0, 0.0);
        let base = TechnicalBasis::new(
            0.05,
            IntensityFamily::new().with(0, 1, IntensityFunction::gm82_males(55.0)),
        );
        let g = grid(20.0);
        let aug = AugmentedValuationBasis::net(base.clone(), &contract, &g).unwrap();
        let v = solve_backward(&aug, &contract, &g).unwrap();
        let risk = sums_at_risk(&v, &contract);
        let policy = seed();
        let est = monte_carlo(10_000, 1, |k| {
            let path = simulate_path(&base, 20.0, &policy, k).unwrap();
            martingale_residual(&path, &base, &risk, 0.05, 20.0).unwrap().0
        })
        .unwrap();
        assert!(
            est.mean.abs() <= 3.0 * est.std_error,
            "mean {} vs 3·SE {}",
            est.mean,
            3.0 * est.std_error
        );
        assert!(est.std_error > 0.0);
    }

    #[test]
    fn per_pair_residuals_are_uncorrelated_within_noise() {
        // three-state lapse model: residuals for (1,2) and (1,3) should show
        // no correlation beyond sampling noise (orthogonality proxy)
        let base = TechnicalBasis::new(
            0.05,
            IntensityFamily::new()
                .with(0, 1, IntensityFunction::gm82_males(55.0))
                .with(0, 2, IntensityFunction::constant(0.04)),
        );
        let g = grid(20.0);
        let contract3 = {
            let mut benefits = std::collections::BTreeMap::new();
            benefits.insert((0usize, 1usize), crate::timefn::TimeFunction::constant(1.0));
            Contract::new(
                20.0,
                3,
                benefits,
                vec![0.0; 3],
                crate::contract::PremiumPattern::level_in_start_state(3),
            )
            .unwrap()
        };
        let aug = AugmentedValuationBasis::net(base.clone(), &contract3, &g).unwrap();
        let v = solve_backward(&aug, &contract3, &g).unwrap();
        let risk = sums_at_risk(&v, &contract3);
        let policy = seed();
        let n = 10_000usize;
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for k in 0..n {
            let path = simulate_path(&base, 20.0, &policy, k as u64).unwrap();
            let (_, ledger) = martingale_residual(&path, &base, &risk, 0.05, 20.0).unwrap();
            xs.push(ledger.pairs.get(&(0, 1)).map_or(0.0, PairLedger::residual));
            ys.push(ledger.pairs.get(&(0, 2)).map_or(0.0, PairLedger::residual));
        }
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        let mut syy = 0.0;
        for k in 0..n {
            sxy += (xs[k] - mx) * (ys[k] - my);
            sxx += (xs[k] - mx).powi(2);
            syy += (ys[k] - my).powi(2);
        }
        let corr = sxy / (sxx * syy).sqrt();
        // SE of a sample correlation near zero is ~1/√n
        assert!(
            corr.abs() <= 3.0 / (n as f64).sqrt(),
            "sample correlation {corr}"
        );
    }

    #[test]
    fn key_identity_constant_value_and_jump_paths() {
        let g = grid(10.0);
        // V ≡ c, δ = 0, no jumps: both sides vanish identically
        let mut v = StatewiseFunction::zeros(g, 2);
        for k in 0..g.len() {
            *v.at_mut(k, 0) = 0.8;
            *v.at_mut(k, 1) = 0.8;
        }
        let path = SamplePath::new(10.0, vec![]).unwrap();
        assert!(pathwise_key_identity(&path, &v, 0.0).unwrap() < 1e-14);

        // solver output, no-jump and one-jump paths
        let contract = Contract::term_insurance(10.0, 1.0, 0.0);
        let base = TechnicalBasis::new(
            0.05,
            IntensityFamily::new().with(0, 1, IntensityFunction::gm82_males(50.0)),
        );
        let aug = AugmentedValuationBasis::net(base, &contract, &g).unwrap();
        let sol = solve_backward(&aug, &contract, &g).unwrap();
        let none = SamplePath::new(10.0, vec![]).unwrap();
        assert!(pathwise_key_identity(&none, &sol, 0.05).unwrap() < 1e-6);
        let one = SamplePath::new(
            10.0,
            vec![Jump {
                time: 6.183,
                from: 0,
                to: 1,
            }],
        )
        .unwrap();
        assert!(pathwise_key_identity(&one, &sol, 0.05).unwrap() < 1e-6);
    }

    #[test]
    fn prop2_reduces_to_gamma_l_when_bases_coincide() {
        // B^A = B^L = B^M and π^L = P: W ≡ 0, systematic ≡ 0, and the
        // residual is pure discretization
        let contract = Contract::term_insurance(20.0, 1.0, 0.0);
        let base = TechnicalBasis::new(
            0.05,
            IntensityFamily::new().with(0, 1, IntensityFunction::gm82_males(40.0)),
        );
        let g = grid(20.0);
        let (p, _) = contractual_premium(&base, &contract, &g).unwrap();
        let aug = AugmentedValuationBasis::new(base.clone(), p.clone());
        let v = solve_backward(&aug, &contract, &g).unwrap();
        let w = surplus_rates(&aug, &v, &base, &p, &contract).unwrap();
        let risk = sums_at_risk(&v, &contract);
        let path = SamplePath::new(20.0, vec![]).unwrap();
        let res = pathwise_prop2_check(
            &path, &aug, &v, &w, &risk, &base, &base, &contract, &p,
        )
        .unwrap();
        assert!(res < 1e-7, "residual {res}");
    }

    #[test]
    fn prop2_holds_on_simulated_paths_with_three_distinct_bases() {
        let contract = Contract::term_insurance(20.0, 1.0, 0.0);
        let experience = TechnicalBasis::new(
            0.05,
            IntensityFamily::new().with(0, 1, IntensityFunction::gm82_males(40.0)),
        );
        let g = grid(20.0);
        let (p, _) = contractual_premium(&experience, &contract, &g).unwrap();
        let accumulation = experience.with_scaled_intensities(0.9);
        let aug =
            AugmentedValuationBasis::new(experience.with_scaled_intensities(1.2), p.clone());
        let v = solve_backward(&aug, &contract, &g).unwrap();
        let w = surplus_rates(&aug, &v, &accumulation, &p, &contract).unwrap();
        let risk = sums_at_risk(&v, &contract);
        let policy = seed();
        let mut worst: f64 = 0.0;
        for k in 0..100u64 {
            let path = simulate_path(&experience, 20.0, &policy, k).unwrap();
            let res = pathwise_prop2_check(
                &path,
                &aug,
                &v,
                &w,
                &risk,
                &accumulation,
                &experience,
                &contract,
                &p,
            )
            .unwrap();
            worst = worst.max(res);
        }
        assert!(worst < 1e-6, "max residual {worst}");
    }

    #[test]
    fn prop2_residual_shrinks_under_grid_refinement() {
        // jump-free path: the residual is pure discretization and must fall
        // at least quadratically (the order of the grid-linear integrand
        // representation) when the step is halved
        let contract = Contract::term_insurance(20.0, 1.0, 0.0);
        let experience = TechnicalBasis::new(
            0.05,
            IntensityFamily::new().with(0, 1, IntensityFunction::gm82_males(40.0)),
        );
        let path = SamplePath::new(20.0, vec![]).unwrap();
        let residual_at = |h: f64| {
            let g = TimeGrid::new(20.0, h).unwrap();
            let (p, _) = contractual_premium(&experience, &contract, &g).unwrap();
            let accumulation = experience.with_scaled_intensities(0.9);
            let aug =
                AugmentedValuationBasis::new(experience.with_scaled_intensities(1.2), p.clone());
            let v = solve_backward(&aug, &contract, &g).unwrap();
            let w = surplus_rates(&aug, &v, &accumulation, &p, &contract).unwrap();
            let risk = sums_at_risk(&v, &contract);
            pathwise_prop2_check(
                &path,
                &aug,
                &v,
                &w,
                &risk,
                &accumulation,
                &experience,
                &contract,
                &p,
            )
            .unwrap()
        };
        let coarse = residual_at(1.0 / 32.0);
        let fine = residual_at(1.0 / 64.0);
        assert!(coarse > 1e-12, "coarse residual must sit above rounding");
        assert!(
            coarse / fine > 3.5,
            "refinement ratio {} below quadratic",
            coarse / fine
        );
    }

    #[test]
    fn gamma_definitions_differ_pathwise() {
        // Γ_t^{L,M} (surplus rates against the experience basis) is not the
        // cashflow surplus Γ_t^L; a death path separates them by more than
        // 10⁻³.
        let contract = Contract::term_insurance(20.0, 1.0, 0.0);
        let base = TechnicalBasis::new(
            0.05,
            IntensityFamily::new().with(0, 1, IntensityFunction::gm82_males(40.0)),
        );
        let g = grid(20.0);
        let (p, _) = contractual_premium(&base, &contract, &g).unwrap();
        let aug = AugmentedValuationBasis::new(base.with_scaled_intensities(1.2), p.clone());
        let v = solve_backward(&aug, &contract, &g).unwrap();
        let w = surplus_rates(&aug, &v, &base, &p, &contract).unwrap();
        let path = SamplePath::new(
            20.0,
            vec![Jump {
                time: 9.0,
                from: 0,
                to: 1,
            }],
        )
        .unwrap();
        let gl = path_gamma_l(&path, &v, &contract, &p, 0.05, 20.0).unwrap();
        let glm = path_gamma_la(&path, &w, 0.05, 20.0).unwrap();
        assert!(
            (gl - glm).abs() > 1e-3,
            "Γ^L = {gl} and Γ^{{L,M}} = {glm} should differ"
        );
    }

    #[test]
    fn monte_carlo_gamma_la_matches_quadrature() {
        // E[Γ_n^{L,A}] by simulation vs the occupancy-weighted quadrature of
        // the same surplus rates, within three standard errors
        let contract = Contract::term_insurance(20.0, 1.0, 0.0);
        let experience = TechnicalBasis::new(
            0.05,
            IntensityFamily::new().with(0, 1, IntensityFunction::gm82_males(40.0)),
        );
        let g = grid(20.0);
        let (p, _) = contractual_premium(&experience, &contract, &g).unwrap();
        let acc = experience.with_scaled_intensities(0.9);
        let aug = AugmentedValuationBasis::new(experience.with_scaled_intensities(1.2), p.clone());
        let v = solve_backward(&aug, &contract, &g).unwrap();
        let w = surplus_rates(&aug, &v, &acc, &p, &contract).unwrap();
        let quadrature =
            crate::surplus::expected_gamma_la(&w, &experience, 0.05, 20.0, &g).unwrap();
        let policy = seed();
        let est = monte_carlo(2_000, 1, |k| {
            let path = simulate_path(&experience, 20.0, &policy, k).unwrap();
            path_gamma_la(&path, &w, 0.05, 20.0).unwrap()
        })
        .unwrap();
        assert!(
            (est.mean - quadrature).abs() <= 3.0 * est.std_error,
            "MC {} vs quadrature {quadrature} (3SE {})",
            est.mean,
            3.0 * est.std_error
        );
    }

    #[test]
    fn unbounded_intensity_is_reported_with_its_window() {
        // an overflowing Gompertz term makes the thinning bound non-finite
        let basis = TechnicalBasis::new(
            0.0,
            IntensityFamily::new().with(
                0,
                1,
                IntensityFunction::GompertzMakeham {
                    alpha: 0.0,
                    beta: 1.0,
                    c: 1e300,
                    age: 10.0,
                },
            ),
        );
        match simulate_path(&basis, 20.0, &seed(), 0) {
            Err(crate::error::EngineError::UnboundedIntensity { state, .. }) => {
                assert_eq!(state, 1)
            }
            other => panic!("expected UnboundedIntensity, got {other:?}"),
        }
    }

    #[test]
    fn functionals_reject_times_beyond_the_grid() {
        let contract = Contract::term_insurance(20.0, 1.0, 0.0);
        let g = grid(20.0);
        let v = StatewiseFunction::zeros(g, 2);
        let p = PremiumRates::from_pattern(contract.premium_pattern(), 0.01);
        let path = SamplePath::new(20.0, vec![]).unwrap();
        assert!(path_gamma_l(&path, &v, &contract, &p, 0.05, 25.0).is_err());
        assert!(path_gamma_la(&path, &v, 0.05, -1.0).is_err());
    }

    #[test]
    fn monte_carlo_constant_functional() {
        let est = monte_carlo(100, 1, |_| 1.0).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.std_error, 0.0);
        assert!(monte_carlo(1, 1, |_| 1.0).is_err());
    }

    #[test]
    fn monte_carlo_se_scales_like_clt() {
        // SE(N)/SE(2N) ≈ √2; average the ratio over a few seeds and accept a
        // loose band
        let mut ratios = Vec::new();
        for s in 0..5u64 {
            let policy = SeedPolicy::new(1000 + s);
            let f = |k: u64| {
                let mut rng = policy.stream(k);
                rng.next_unit()
            };
            let small = monte_carlo(2_000, 1, f).unwrap();
            let large = monte_carlo(4_000, 1, f).unwrap();
            ratios.push(small.std_error / large.std_error);
        }
        let avg = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!(avg > 1.2 && avg < 1.7, "average SE ratio {avg}");
    }

    #[test]
    fn pairwise_sum_is_close_to_sequential_and_thread_invariant() {
        let policy = SeedPolicy::new(99);
        let f = |k: u64| {
            let mut rng = policy.stream(k);
            rng.next_unit() - 0.5
        };
        let v1 = compute_path_values(10_001, 1, &f);
        let v4 = compute_path_values(10_001, 4, &f);
        assert_eq!(v1, v4, "slot values must not depend on thread count");
        let sequential: f64 = v1.iter().sum();
        let cascades = pairwise_sum(&v1);
        assert!((sequential - cascades).abs() <= 1e-12);
    }
}
