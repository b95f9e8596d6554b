//! Classical 4th-order one-step integration. Fixed step, no adaptivity:
//! determinism and reproducible golden numbers matter more than speed at
//! actuarial intensity scales. This one integrator is shared by the
//! occupancy solver, the Thiele solvers and the casebook.

use crate::grid::TimeGrid;

/// One RK4 step of size `h` (which may be negative for backward
/// integration) starting at `(t, y)`.
fn rk4_step<F>(f: &F, t: f64, h: f64, y: &[f64], scratch: &mut Scratch) -> Vec<f64>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    let Scratch { k1, k2, k3, k4, tmp } = scratch;
    f(t, y, k1);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    f(t + 0.5 * h, tmp, k2);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    f(t + 0.5 * h, tmp, k3);
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    f(t + h, tmp, k4);
    let mut out = y.to_vec();
    for i in 0..n {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

struct Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

/// Integrate `y' = f(t, y)` forward over the grid from `y(0) = y0`,
/// recording the state at every grid point.
pub fn rk4_forward_path<F>(grid: &TimeGrid, y0: &[f64], f: F) -> Vec<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let mut scratch = Scratch::new(y0.len());
    let mut path = Vec::with_capacity(grid.len());
    let mut y = y0.to_vec();
    path.push(y.clone());
    for k in 0..grid.steps() {
        let t = grid.point(k);
        let h = grid.point(k + 1) - t;
        y = rk4_step(&f, t, h, &y, &mut scratch);
        path.push(y.clone());
    }
    path
}

/// Integrate backward from `y(n) = yn` on the reversed grid; the returned
/// path is indexed by grid point (entry `k` holds `y(t_k)`), so forward and
/// backward solutions share grid points exactly.
pub fn rk4_backward_path<F>(grid: &TimeGrid, yn: &[f64], f: F) -> Vec<Vec<f64>>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let mut scratch = Scratch::new(yn.len());
    let mut path = vec![Vec::new(); grid.len()];
    let mut y = yn.to_vec();
    path[grid.steps()] = y.clone();
    for k in (0..grid.steps()).rev() {
        let t = grid.point(k + 1);
        let h = grid.point(k) - t; // negative
        y = rk4_step(&f, t, h, &y, &mut scratch);
        path[k] = y.clone();
    }
    path
}

/// Integrate over an arbitrary span `[t0, t0 + s]` in `steps` equal steps,
/// returning only the final state. Used for occupancy matrices at off-grid
/// arguments.
pub fn rk4_span<F>(t0: f64, s: f64, steps: usize, y0: &[f64], f: F) -> Vec<f64>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let mut scratch = Scratch::new(y0.len());
    let h = s / steps as f64;
    let mut y = y0.to_vec();
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        y = rk4_step(&f, t, h, &y, &mut scratch);
    }
    y
}
