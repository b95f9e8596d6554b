//! Contracts: transitionwise lump sums `b_ij(t)`, maturity benefits `M_i`,
//! and the premium pattern (a single scalar scale on declared statewise
//! shapes, which keeps the equation of value affine in the scale).

use std::collections::BTreeMap;

use crate::error::{EngineError, Result};
use crate::timefn::TimeFunction;

/// Premium pattern: statewise nonnegative base-rate shapes; the contractual
/// rates are `P_i(t) = scale · shape_i(t)`. Level premiums while in state 1
/// are `shape ≡ 1` there and zero elsewhere.
#[derive(Debug, Clone)]
pub struct PremiumPattern {
    shapes: Vec<TimeFunction>,
}

impl PremiumPattern {
    pub fn new(shapes: Vec<TimeFunction>) -> Result<Self> {
        if shapes.iter().all(|s| s.is_identically_zero()) {
            return Err(EngineError::DegeneratePattern);
        }
        Ok(PremiumPattern { shapes })
    }

    /// Level premiums payable continuously while in state 1 (0-based 0).
    pub fn level_in_start_state(m: usize) -> Self {
        let mut shapes = vec![TimeFunction::zero(); m];
        shapes[0] = TimeFunction::constant(1.0);
        PremiumPattern { shapes }
    }

    pub fn states(&self) -> usize {
        self.shapes.len()
    }

    pub fn shape(&self, state: usize, t: f64) -> f64 {
        self.shapes[state].eval(t)
    }

    pub fn shape_fn(&self, state: usize) -> &TimeFunction {
        &self.shapes[state]
    }
}

/// Statewise premium rate functions `π_i(t) = scale · shape_i(t)`.
/// Every premium object in the engine (contractual `P`, pure `π*`,
/// valuation `π^L`) is a scale on the contract's declared pattern, so the
/// Corollary-1 decomposition is exact arithmetic on scales.
#[derive(Debug, Clone)]
pub struct PremiumRates {
    scale: f64,
    shapes: Vec<TimeFunction>,
}

impl PremiumRates {
    pub fn from_pattern(pattern: &PremiumPattern, scale: f64) -> Self {
        PremiumRates {
            scale,
            shapes: pattern.shapes.clone(),
        }
    }

    pub fn zero(m: usize) -> Self {
        PremiumRates {
            scale: 0.0,
            shapes: vec![TimeFunction::zero(); m],
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn states(&self) -> usize {
        self.shapes.len()
    }

    pub fn rate(&self, state: usize, t: f64) -> f64 {
        self.scale * self.shapes[state].eval(t)
    }

    pub fn same_pattern(&self, other: &PremiumRates) -> bool {
        self.shapes.len() == other.shapes.len()
    }
}

/// Contract parameters: term, transition benefits, maturity benefits and
/// premium pattern. Benefits default to zero when unspecified.
#[derive(Debug, Clone)]
pub struct Contract {
    term: f64,
    states: usize,
    transition_benefits: BTreeMap<(usize, usize), TimeFunction>,
    maturity_benefits: Vec<f64>,
    premium_pattern: PremiumPattern,
}

impl Contract {
    pub fn new(
        term: f64,
        states: usize,
        transition_benefits: BTreeMap<(usize, usize), TimeFunction>,
        maturity_benefits: Vec<f64>,
        premium_pattern: PremiumPattern,
    ) -> Result<Self> {
        if !(term > 0.0) {
            return Err(EngineError::Config(format!("term must be positive, got {term}")));
        }
        if states < 2 {
            return Err(EngineError::Config(format!(
                "a multi-state contract needs at least 2 states, got {states}"
            )));
        }
        let mut maturity = maturity_benefits;
        maturity.resize(states, 0.0);
        for &(i, j) in transition_benefits.keys() {
            if i >= states || j >= states {
                return Err(EngineError::StateOutOfRange {
                    state: i.max(j) + 1,
                    m: states,
                });
            }
            if i == j {
                return Err(EngineError::Config(
                    "transition benefit on a self-pair (i, i)".into(),
                ));
            }
        }
        if premium_pattern.states() != states {
            return Err(EngineError::Config(
                "premium pattern state count differs from the model".into(),
            ));
        }
        Ok(Contract {
            term,
            states,
            transition_benefits,
            maturity_benefits: maturity,
            premium_pattern,
        })
    }

    /// Alive/dead term insurance: sum `s` on death (1→2), maturity `m_1` in
    /// the alive state, level premiums in state 1.
    pub fn term_insurance(term: f64, sum_insured: f64, maturity: f64) -> Self {
        let mut benefits = BTreeMap::new();
        benefits.insert((0usize, 1usize), TimeFunction::constant(sum_insured));
        Contract::new(
            term,
            2,
            benefits,
            vec![maturity, 0.0],
            PremiumPattern::level_in_start_state(2),
        )
        .expect("static construction")
    }

    pub fn term(&self) -> f64 {
        self.term
    }

    pub fn states(&self) -> usize {
        self.states
    }

    /// `b_ij(t)`, zero when unspecified.
    pub fn transition_benefit(&self, from: usize, to: usize, t: f64) -> f64 {
        self.transition_benefits
            .get(&(from, to))
            .map_or(0.0, |f| f.eval(t))
    }

    pub fn maturity_benefit(&self, state: usize) -> f64 {
        self.maturity_benefits[state]
    }

    pub fn maturity_benefits(&self) -> &[f64] {
        &self.maturity_benefits
    }

    pub fn premium_pattern(&self) -> &PremiumPattern {
        &self.premium_pattern
    }

    /// Scale all benefits (transition and maturity) by `factor`; premiums
    /// are untouched. Used by the scale-equivariance property of pricing.
    pub fn with_scaled_benefits(&self, factor: f64) -> Contract {
        let mut out = self.clone();
        for f in out.transition_benefits.values_mut() {
            *f = match f {
                TimeFunction::Constant { value } => TimeFunction::constant(factor * *value),
                TimeFunction::PiecewiseLinear { times, values } => TimeFunction::piecewise_linear(
                    times.clone(),
                    values.iter().map(|v| factor * v).collect(),
                ),
            };
        }
        for m in out.maturity_benefits.iter_mut() {
            *m *= factor;
        }
        out
    }
}
