use serde::{Deserialize, Serialize};

/// A deterministic function of time on `[0, n]`, used for time-dependent
/// benefits, premium shapes, surrender values and (in the casebook) an
/// interest curve. Piecewise-linear is the only non-trivial shape the
/// contracts here need; it is closed under the sampling conventions of the
/// grid machinery.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeFunction {
    Constant {
        value: f64,
    },
    /// Linear interpolation through `(times[i], values[i])`; constant
    /// extrapolation outside the knot range. Knots must be strictly
    /// increasing.
    PiecewiseLinear {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl TimeFunction {
    pub fn constant(value: f64) -> Self {
        TimeFunction::Constant { value }
    }

    pub fn zero() -> Self {
        TimeFunction::Constant { value: 0.0 }
    }

    pub fn piecewise_linear(times: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(times.len(), values.len(), "knot count mismatch");
        assert!(!times.is_empty(), "need at least one knot");
        assert!(
            times.windows(2).all(|w| w[0] < w[1]),
            "knots must be strictly increasing"
        );
        TimeFunction::PiecewiseLinear { times, values }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFunction::Constant { value } => *value,
            TimeFunction::PiecewiseLinear { times, values } => {
                if t <= times[0] {
                    return values[0];
                }
                if t >= *times.last().unwrap() {
                    return *values.last().unwrap();
                }
                // partition_point: first knot strictly above t
                let hi = times.partition_point(|&x| x <= t);
                let lo = hi - 1;
                let w = (t - times[lo]) / (times[hi] - times[lo]);
                values[lo] + w * (values[hi] - values[lo])
            }
        }
    }

    /// Exact supremum over `[a, b]` (piecewise-linear attains it at a knot or
    /// an endpoint).
    pub fn sup_on(&self, a: f64, b: f64) -> f64 {
        match self {
            TimeFunction::Constant { value } => *value,
            TimeFunction::PiecewiseLinear { times, values } => {
                let mut sup = self.eval(a).max(self.eval(b));
                for (t, v) in times.iter().zip(values.iter()) {
                    if *t > a && *t < b {
                        sup = sup.max(*v);
                    }
                }
                sup
            }
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            TimeFunction::Constant { value } => *value == 0.0,
            TimeFunction::PiecewiseLinear { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }
}
