//! Executable worked cases: the three-panel policy-value/accumulation
//! figure, lapse-supported business, and the retrospectively-oriented
//! first/second/third-order regime. Each case returns its datasets as CSV
//! strings plus a plain-text summary of checked identities and residuals.

mod fig2;
mod lapse;
mod ms;

pub use fig2::{fig2_case, Fig2Case};
pub use lapse::{lapse_case, Eq36Check, LapseCaseConfig, LapseReport};
pub use ms::{
    ms_calibrate_second_order, ms_implied_maturity_benefit, ms_technical_reserve,
    ms_total_reserve, MsCaseConfig, MsReport,
};
