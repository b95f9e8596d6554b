//! CSV formatting helpers shared by the CLI and the casebook. Output is
//! deterministic: fixed significant-digit formatting, stable column order.

use crate::grid::StatewiseFunction;

/// Format with a fixed number of significant digits (default 10), the
/// engine-wide numeric CSV convention.
pub fn fmt_sig(x: f64, sig_digits: usize) -> String {
    format!("{:.*e}", sig_digits.saturating_sub(1), x)
}

/// CSV for one statewise curve: header `t,<prefix>_1..<prefix>_m`, one row
/// per grid point.
pub fn statewise_csv(f: &StatewiseFunction, prefix: &str, sig_digits: usize) -> String {
    let m = f.states();
    let mut out = String::from("t");
    for i in 1..=m {
        out.push_str(&format!(",{prefix}_{i}"));
    }
    out.push('\n');
    for k in 0..f.grid().len() {
        out.push_str(&format!("{}", f.grid().point(k)));
        for i in 0..m {
            out.push(',');
            out.push_str(&fmt_sig(f.at(k, i), sig_digits));
        }
        out.push('\n');
    }
    out
}

/// CSV with one `t` column and several named statewise curves side by side
/// (used by the casebook panels, one column per variant).
pub fn curves_csv(
    grid_points: &[f64],
    columns: &[(String, Vec<f64>)],
    sig_digits: usize,
) -> String {
    let mut out = String::from("t");
    for (name, _) in columns {
        out.push_str(&format!(",{name}"));
    }
    out.push('\n');
    for (k, t) in grid_points.iter().enumerate() {
        out.push_str(&format!("{t}"));
        for (_, vals) in columns {
            out.push(',');
            out.push_str(&fmt_sig(vals[k], sig_digits));
        }
        out.push('\n');
    }
    out
}
