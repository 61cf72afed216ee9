//! Plain Nelder-Mead with restarts. Good enough for the handful of
//! log-power coordinates the oracle searches.

pub(super) struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;
const MAX_RESTARTS: usize = 20;

/// Minimises `f` from `x0`. A descent stops once the relative spread of the
/// simplex values drops below `tol`; it is then restarted from the best
/// vertex with a fresh simplex until a restart no longer improves the value.
pub(super) fn minimize<F: Fn(&[f64]) -> f64>(f: &F, x0: &[f64], step: f64, tol: f64, max_iter: usize) -> Minimum {
    let mut best = Minimum {
        point: x0.to_vec(),
        value: f(x0),
        converged: false,
    };
    let mut budget = max_iter;
    for _ in 0..MAX_RESTARTS {
        let (point, value, used, converged) = descend(f, &best.point, step, tol, budget);
        budget = budget.saturating_sub(used);
        let improved = best.value - value > tol * best.value.abs().max(f64::MIN_POSITIVE);
        if value <= best.value {
            best.point = point;
            best.value = value;
        }
        if !converged {
            best.converged = false;
            return best;
        }
        best.converged = true;
        if !improved {
            break;
        }
    }
    best
}

fn descend<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    step: f64,
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64, usize, bool) {
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x);
        simplex.push((x, v));
    }

    for iter in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (lo, hi) = (simplex[0].1, simplex[n].1);
        if (hi - lo).abs() <= tol * lo.abs().max(f64::MIN_POSITIVE) {
            let (x, v) = simplex.swap_remove(0);
            return (x, v, iter, true);
        }

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(REFLECT);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(EXPAND);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let x = along(CONTRACT);
                let v = eval(&x);
                (x, v)
            } else {
                let x = along(-CONTRACT);
                let v = eval(&x);
                (x, v)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for (x, v) in simplex.iter_mut().skip(1) {
                    for (xi, bi) in x.iter_mut().zip(&best) {
                        *xi = bi + SHRINK * (*xi - bi);
                    }
                    *v = eval(x);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v, max_iter, false)
}
