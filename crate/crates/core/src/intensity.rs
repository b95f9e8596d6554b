//! Transition-intensity functions and the per-model family `μ^{ij}(t)`.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{EngineError, Result};

/// Danish G82 male basis: `μ(x) = α + β·10^{0.038 x}`. The engine's default
/// mortality for the worked cases.
pub const GM82_ALPHA: f64 = 5.0e-4;
pub const GM82_BETA: f64 = 7.5858e-5;
pub const GM82_C_LOG10: f64 = 0.038;

/// A nonnegative intensity function evaluable at any `t ∈ [0, n]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntensityFunction {
    Constant {
        rate: f64,
    },
    /// `α + β·c^{x+t}` with `x` the age at time 0.
    GompertzMakeham {
        alpha: f64,
        beta: f64,
        c: f64,
        age: f64,
    },
    /// Shorthand for the G82M parametrization at a given issue age.
    Gm82Males {
        age: f64,
    },
    /// `rates[i]` on `[breakpoints[i-1], breakpoints[i])`, with `rates[0]`
    /// before the first breakpoint and the last rate after the last one.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        rates: Vec<f64>,
    },
    /// `factor · inner(t)`; supports the 80%/100%/120% mortality variants.
    Scaled {
        factor: f64,
        inner: Box<IntensityFunction>,
    },
}

impl IntensityFunction {
    pub fn constant(rate: f64) -> Self {
        IntensityFunction::Constant { rate }
    }

    pub fn gm82_males(age: f64) -> Self {
        IntensityFunction::Gm82Males { age }
    }

    pub fn scaled(factor: f64, inner: IntensityFunction) -> Self {
        IntensityFunction::Scaled {
            factor,
            inner: Box::new(inner),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            IntensityFunction::Constant { rate } => *rate,
            IntensityFunction::GompertzMakeham { alpha, beta, c, age } => {
                alpha + beta * c.powf(age + t)
            }
            IntensityFunction::Gm82Males { age } => {
                GM82_ALPHA + GM82_BETA * 10f64.powf(GM82_C_LOG10 * (age + t))
            }
            IntensityFunction::PiecewiseConstant { breakpoints, rates } => {
                let idx = breakpoints.partition_point(|&b| b <= t);
                rates[idx.min(rates.len() - 1)]
            }
            IntensityFunction::Scaled { factor, inner } => factor * inner.eval(t),
        }
    }

    /// Exact supremum over `[a, b]`. Gompertz–Makeham is monotone in `t`, so
    /// the supremum sits at an endpoint; piecewise-constant scans the
    /// breakpoints inside the window.
    pub fn sup_on(&self, a: f64, b: f64) -> f64 {
        match self {
            IntensityFunction::Constant { rate } => *rate,
            IntensityFunction::GompertzMakeham { .. } | IntensityFunction::Gm82Males { .. } => {
                self.eval(a).max(self.eval(b))
            }
            IntensityFunction::PiecewiseConstant { breakpoints, rates } => {
                let mut sup = self.eval(a).max(self.eval(b));
                for (i, bp) in breakpoints.iter().enumerate() {
                    if *bp > a && *bp < b {
                        sup = sup.max(rates[(i + 1).min(rates.len() - 1)]);
                    }
                }
                sup
            }
            IntensityFunction::Scaled { factor, inner } => factor * inner.sup_on(a, b),
        }
    }

    /// Checks nonnegativity at the structural level (constants, scale
    /// factors, piecewise rates); Gompertz–Makeham additionally requires
    /// nonnegative `α, β`.
    pub fn validate(&self) -> Result<()> {
        let bad = |value: f64| EngineError::NegativeIntensity { t: 0.0, value };
        match self {
            IntensityFunction::Constant { rate } => {
                if *rate < 0.0 || !rate.is_finite() {
                    return Err(bad(*rate));
                }
            }
            IntensityFunction::GompertzMakeham { alpha, beta, c, .. } => {
                if *alpha < 0.0 || *beta < 0.0 || *c <= 0.0 {
                    return Err(bad(alpha.min(*beta)));
                }
            }
            IntensityFunction::Gm82Males { .. } => {}
            IntensityFunction::PiecewiseConstant { breakpoints, rates } => {
                if rates.is_empty() || rates.len() != breakpoints.len() + 1 {
                    return Err(EngineError::Config(
                        "piecewise_constant requires rates.len() == breakpoints.len() + 1".into(),
                    ));
                }
                if !breakpoints.windows(2).all(|w| w[0] < w[1]) {
                    return Err(EngineError::Config(
                        "piecewise_constant breakpoints must be strictly increasing".into(),
                    ));
                }
                if let Some(r) = rates.iter().find(|r| **r < 0.0 || !r.is_finite()) {
                    return Err(bad(*r));
                }
            }
            IntensityFunction::Scaled { factor, inner } => {
                if *factor < 0.0 || !factor.is_finite() {
                    return Err(bad(*factor));
                }
                inner.validate()?;
            }
        }
        Ok(())
    }
}

/// The family `μ^{ij}(t)` over ordered pairs `(i, j)`, `i ≠ j`; absent pairs
/// are identically zero. States are 0-based in code (state 0 is the start
/// state; external interfaces label states 1..m).
#[derive(Debug, Clone, Default)]
pub struct IntensityFamily {
    entries: BTreeMap<(usize, usize), IntensityFunction>,
}

impl IntensityFamily {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, from: usize, to: usize, f: IntensityFunction) -> Self {
        self.insert(from, to, f);
        self
    }

    pub fn insert(&mut self, from: usize, to: usize, f: IntensityFunction) {
        assert_ne!(from, to, "no self-intensities (i, i)");
        self.entries.insert((from, to), f);
    }

    pub fn get(&self, from: usize, to: usize) -> Option<&IntensityFunction> {
        self.entries.get(&(from, to))
    }

    /// `μ^{ij}(t)`, zero when the pair is absent.
    pub fn rate(&self, from: usize, to: usize, t: f64) -> f64 {
        self.entries
            .get(&(from, to))
            .map_or(0.0, |f| f.eval(t))
    }

    /// Ordered pairs carrying a (possibly zero) intensity, in deterministic
    /// `(i, j)` order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, &IntensityFunction)> {
        self.entries.iter().map(|(&(i, j), f)| (i, j, f))
    }

    pub fn pairs_from(&self, from: usize) -> impl Iterator<Item = (usize, &IntensityFunction)> {
        self.entries
            .range((from, 0)..(from + 1, 0))
            .map(|(&(_, j), f)| (j, f))
    }

    /// Total exit intensity `μ^i(t) = Σ_{j≠i} μ^{ij}(t)`; zero when state `i`
    /// has no outgoing intensities.
    pub fn total_exit(&self, from: usize, t: f64) -> f64 {
        self.pairs_from(from).map(|(_, f)| f.eval(t)).sum()
    }

    /// Upper bound for the total exit intensity on `[a, b]` (sum of per-pair
    /// exact suprema, hence a valid bound for thinning).
    pub fn sup_total_exit(&self, from: usize, a: f64, b: f64) -> f64 {
        self.pairs_from(from).map(|(_, f)| f.sup_on(a, b)).sum()
    }

    /// Largest state index mentioned by any pair, plus one.
    pub fn max_state(&self) -> usize {
        self.entries
            .keys()
            .map(|&(i, j)| i.max(j) + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        for (&(i, j), f) in &self.entries {
            if i >= m {
                return Err(EngineError::StateOutOfRange { state: i + 1, m });
            }
            if j >= m {
                return Err(EngineError::StateOutOfRange { state: j + 1, m });
            }
            f.validate()?;
        }
        Ok(())
    }

    /// New family with every intensity scaled by `factor` (e.g. the 80%/120%
    /// mortality variants).
    pub fn scaled(&self, factor: f64) -> IntensityFamily {
        let mut out = IntensityFamily::new();
        for (i, j, f) in self.pairs() {
            out.insert(i, j, IntensityFunction::scaled(factor, f.clone()));
        }
        out
    }
}

/// Total exit intensity with state-range checking, as a free operation.
pub fn total_exit_intensity(
    family: &IntensityFamily,
    m: usize,
    state: usize,
    t: f64,
) -> Result<f64> {
    if state >= m {
        return Err(EngineError::StateOutOfRange {
            state: state + 1,
            m,
        });
    }
    Ok(family.total_exit(state, t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_exit_single_term() {
        // two-state model, μ^{12}(t) ≡ 0.02, i = 1 (0-based 0)
        let fam = IntensityFamily::new().with(0, 1, IntensityFunction::constant(0.02));
        assert_eq!(total_exit_intensity(&fam, 2, 0, 5.0).unwrap(), 0.02);
    }

    #[test]
    fn total_exit_absorbing_state_is_zero() {
        let fam = IntensityFamily::new().with(0, 1, IntensityFunction::constant(0.02));
        assert_eq!(total_exit_intensity(&fam, 2, 1, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn total_exit_two_terms() {
        let fam = IntensityFamily::new()
            .with(0, 1, IntensityFunction::constant(0.01))
            .with(0, 2, IntensityFunction::constant(0.03));
        assert!((total_exit_intensity(&fam, 3, 0, 1.0).unwrap() - 0.04).abs() < 1e-15);
    }

    #[test]
    fn total_exit_checks_state_range() {
        let fam = IntensityFamily::new().with(0, 1, IntensityFunction::constant(0.02));
        assert!(total_exit_intensity(&fam, 2, 2, 0.0).is_err());
    }

    #[test]
    fn gm82_matches_formula() {
        let f = IntensityFunction::gm82_males(40.0);
        let expect = 5.0e-4 + 7.5858e-5 * 10f64.powf(0.038 * 60.0);
        assert!((f.eval(20.0) - expect).abs() < 1e-18);
        // monotone increasing, so sup at right endpoint
        assert_eq!(f.sup_on(0.0, 20.0), f.eval(20.0));
    }

    #[test]
    fn scaled_multiplies() {
        let f = IntensityFunction::scaled(0.8, IntensityFunction::gm82_males(40.0));
        let base = IntensityFunction::gm82_males(40.0);
        assert!((f.eval(7.0) - 0.8 * base.eval(7.0)).abs() < 1e-18);
    }

    #[test]
    fn piecewise_constant_lookup_and_sup() {
        let f = IntensityFunction::PiecewiseConstant {
            breakpoints: vec![1.0, 2.0],
            rates: vec![0.1, 0.5, 0.2],
        };
        assert_eq!(f.eval(0.5), 0.1);
        assert_eq!(f.eval(1.0), 0.5);
        assert_eq!(f.eval(1.99), 0.5);
        assert_eq!(f.eval(2.0), 0.2);
        assert_eq!(f.sup_on(0.0, 3.0), 0.5);
        assert_eq!(f.sup_on(2.1, 3.0), 0.2);
    }

    #[test]
    fn negative_rate_rejected() {
        assert!(IntensityFunction::constant(-0.1).validate().is_err());
        assert!(IntensityFunction::scaled(-1.0, IntensityFunction::constant(0.1))
            .validate()
            .is_err());
    }
}
