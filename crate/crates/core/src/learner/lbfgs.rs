//! L-BFGS with lower bounds on a few coordinates, projected line search.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop once the projected gradient's infinity norm falls below this.
    pub grad_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iters: 1000,
            grad_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// The line search could not decrease the objective any further.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub reason: StopReason,
    /// Objective after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project(x: &mut [f64], bounds: &[(usize, f64)]) {
    for &(i, lb) in bounds {
        if x[i] < lb {
            x[i] = lb;
        }
    }
}

/// Projected gradient: zero where a bound is active and the gradient pushes
/// outward.
fn projected_grad(x: &[f64], g: &[f64], bounds: &[(usize, f64)]) -> Vec<f64> {
    let mut pg = g.to_vec();
    for &(i, lb) in bounds {
        if x[i] <= lb && g[i] > 0.0 {
            pg[i] = 0.0;
        }
    }
    pg
}

/// Minimizes `f` subject to `x[i] >= lb` for each `(i, lb)` in `bounds`.
/// `f` writes the gradient into its second argument and returns the value.
pub fn minimize(
    mut f: impl FnMut(&[f64], &mut [f64]) -> f64,
    x0: Vec<f64>,
    bounds: &[(usize, f64)],
    opts: &LbfgsOptions,
) -> LbfgsResult {
    let n = x0.len();
    let mut x = x0;
    project(&mut x, bounds);
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let mut trace = vec![fx];
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut reason = StopReason::MaxIterations;
    let mut iters = 0;
    let mut g_new = vec![0.0; n];

    while iters < opts.max_iters {
        let pg = projected_grad(&x, &g, bounds);
        if pg.iter().fold(0.0f64, |m, v| m.max(v.abs())) <= opts.grad_tol {
            reason = StopReason::Converged;
            break;
        }
        // two-loop recursion on the projected gradient
        let mut d = pg.clone();
        let k = s_hist.len();
        let mut alpha = vec![0.0; k];
        for j in (0..k).rev() {
            let rho = 1.0 / dot(&y_hist[j], &s_hist[j]);
            alpha[j] = rho * dot(&s_hist[j], &d);
            for (di, yi) in d.iter_mut().zip(&y_hist[j]) {
                *di -= alpha[j] * yi;
            }
        }
        let gamma = if k > 0 {
            dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1])
        } else {
            1.0 / pg.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0)
        };
        for di in d.iter_mut() {
            *di *= gamma;
        }
        for j in 0..k {
            let rho = 1.0 / dot(&y_hist[j], &s_hist[j]);
            let beta = rho * dot(&y_hist[j], &d);
            for (di, si) in d.iter_mut().zip(&s_hist[j]) {
                *di += (alpha[j] - beta) * si;
            }
        }
        for di in d.iter_mut() {
            *di = -*di;
        }
        for &(i, lb) in bounds {
            if x[i] <= lb && pg[i] == 0.0 {
                d[i] = 0.0;
            }
        }
        if dot(&d, &g) >= 0.0 {
            d = pg.iter().map(|v| -v).collect();
            s_hist.clear();
            y_hist.clear();
        }

        // backtracking Armijo search along the projected path
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            project(&mut xn, bounds);
            let moved: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &moved);
            if decrease >= 0.0 {
                step *= 0.5;
                continue;
            }
            let fn_ = f(&xn, &mut g_new);
            if fn_.is_finite() && fn_ <= fx + 1e-4 * decrease {
                accepted = Some((xn, fn_, moved));
                break;
            }
            step *= 0.5;
        }
        iters += 1;
        let Some((xn, fn_, s)) = accepted else {
            reason = StopReason::Stalled;
            break;
        };
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 * dot(&s, &s).max(1e-300) {
            if s_hist.len() == opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
        }
        x = xn;
        fx = fn_;
        std::mem::swap(&mut g, &mut g_new);
        trace.push(fx);
    }
    LbfgsResult {
        x,
        value: fx,
        iterations: iters,
        reason,
        trace,
    }
}
