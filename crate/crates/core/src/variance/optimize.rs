use num_complex::Complex64;

use super::{brent, geom_log_leading, gerf_log_leading, var_gerf, PairStats, VarianceValue};
use crate::error::{Error, Result};
use crate::mechanisms::Sign;

pub const BRENT_ITERATIONS: usize = 100;
pub const COMPLEX_SEARCH_ITERATIONS: usize = 50;
/// The geometric parameter is searched on `[margin, 1 - margin]`.
pub const GEOM_P_MARGIN: f64 = 1e-6;

/// Variance-minimizing real `A` for `s = +1` given `z = |x + y|^2`.
///
/// Uses `rho* = 2d / (sqrt((2z + d)^2 + 8dz) + 2z + d)`, the rationalized form
/// of the positive root, which stays accurate as `z -> 0` (where `A -> 0`).
pub fn optimal_a_oprf(sq_norm_sum_plus: f64, d: usize) -> Result<f64> {
    if !(sq_norm_sum_plus >= 0.0) || !sq_norm_sum_plus.is_finite() {
        return Err(Error::invalid_argument(format!(
            "|x + y|^2 must be finite and non-negative, got {sq_norm_sum_plus}"
        )));
    }
    if d == 0 {
        return Err(Error::invalid_argument("dimension must be positive"));
    }
    let z = sq_norm_sum_plus;
    let d = d as f64;
    let b = 2.0 * z + d;
    let rho = 2.0 * d / ((b * b + 8.0 * d * z).sqrt() + b);
    Ok((1.0 - 1.0 / rho) / 8.0)
}

/// `lambda* = sqrt(sum_l x_l^2 y_l^2 / d)`.
pub fn optimal_lambda(stats: &PairStats) -> Result<f64> {
    if !(stats.sum_sq_prod > 0.0) || !stats.sum_sq_prod.is_finite() {
        return Err(Error::invalid_argument(
            "sum of x_l^2 y_l^2 is zero; the Poisson variance has no interior minimum",
        ));
    }
    Ok((stats.sum_sq_prod / stats.d as f64).sqrt())
}

/// Brent search of the geometric variance over `p`.
pub fn optimize_p(stats: &PairStats) -> f64 {
    let m = brent::minimize(
        |p| geom_log_leading(p, stats),
        GEOM_P_MARGIN,
        1.0 - GEOM_P_MARGIN,
        1e-10,
        BRENT_ITERATIONS,
    );
    m.x.clamp(GEOM_P_MARGIN, 1.0 - GEOM_P_MARGIN)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexSearch {
    pub a: Complex64,
    pub s: Sign,
    pub variance: VarianceValue,
    pub iterations: usize,
}

/// Local search over complex `A` for both signs; returns the better branch.
pub fn optimize_a_complex(stats: &PairStats) -> ComplexSearch {
    let plus = optimize_a_for_sign(stats, Sign::Plus);
    let minus = optimize_a_for_sign(stats, Sign::Minus);
    if minus.variance.log_leading < plus.variance.log_leading {
        minus
    } else {
        plus
    }
}

/// Quasi-Newton (BFGS) search over `(Re A, Im A)` inside `Re(1 - 8A) > 0`,
/// started at `A = 0` with a budget of [`COMPLEX_SEARCH_ITERATIONS`].
///
/// The objective is symmetric under `A -> conj(A)`, so a run started on the
/// real axis never leaves it; once it stalls there, a small imaginary probe
/// is tried and the search resumes from it if it improves.
pub fn optimize_a_for_sign(stats: &PairStats, s: Sign) -> ComplexSearch {
    let f = |p: [f64; 2]| -> f64 {
        if !(1.0 - 8.0 * p[0] > 0.0) {
            return f64::INFINITY;
        }
        let v = gerf_log_leading(Complex64::new(p[0], p[1]), s, stats);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut x = [0.0, 0.0];
    let mut fx = f(x);
    let mut used = 0;
    let mut probed = false;
    loop {
        let (nx, nfx, it) = bfgs(&f, x, fx, COMPLEX_SEARCH_ITERATIONS - used);
        used += it;
        x = nx;
        fx = nfx;
        if probed || x[1] != 0.0 || used >= COMPLEX_SEARCH_ITERATIONS {
            break;
        }
        probed = true;
        let probe = [x[0], 1e-2 * x[0].abs().max(1.0)];
        let fp = f(probe);
        if fp < fx - 1e-12 * fx.abs().max(1.0) {
            x = probe;
            fx = fp;
        } else {
            break;
        }
    }

    let a = Complex64::new(x[0], x[1]);
    let variance = var_gerf(a, s, stats).unwrap_or(VarianceValue {
        log_leading: f64::INFINITY,
        log_kernel_sq: stats.log_kernel_sq(),
    });
    ComplexSearch {
        a,
        s,
        variance,
        iterations: used,
    }
}

fn gradient<F: Fn([f64; 2]) -> f64>(f: &F, x: [f64; 2], fx: f64) -> [f64; 2] {
    let mut g = [0.0; 2];
    for k in 0..2 {
        let h = 1e-6 * x[k].abs().max(1.0);
        let mut fwd = x;
        fwd[k] += h;
        let mut bwd = x;
        bwd[k] -= h;
        let (ff, fb) = (f(fwd), f(bwd));
        g[k] = if ff.is_finite() && fb.is_finite() {
            (ff - fb) / (2.0 * h)
        } else if fb.is_finite() {
            (fx - fb) / h
        } else {
            (ff - fx) / h
        };
    }
    g
}

const MAX_STEP: f64 = 0.25;

/// Returns the final point, its value and the number of iterations used.
fn bfgs<F: Fn([f64; 2]) -> f64>(f: &F, mut x: [f64; 2], mut fx: f64, budget: usize) -> ([f64; 2], f64, usize) {
    let mut h = [[1.0, 0.0], [0.0, 1.0]];
    let mut g = gradient(f, x, fx);
    let mut it = 0;
    while it < budget {
        let gnorm = g[0].hypot(g[1]);
        if !gnorm.is_finite() || gnorm <= 1e-9 * fx.abs().max(1.0) {
            break;
        }
        it += 1;
        let mut p = [
            -(h[0][0] * g[0] + h[0][1] * g[1]),
            -(h[1][0] * g[0] + h[1][1] * g[1]),
        ];
        if !(g[0] * p[0] + g[1] * p[1] < 0.0) {
            h = [[1.0, 0.0], [0.0, 1.0]];
            p = [-g[0], -g[1]];
        }
        // Objective gradients reach e^{100}-scale curvature; cap the step.
        let cap = MAX_STEP * x[0].hypot(x[1]).max(1.0);
        let plen = p[0].hypot(p[1]);
        if plen > cap {
            p = [p[0] * cap / plen, p[1] * cap / plen];
        }
        let slope = g[0] * p[0] + g[1] * p[1];

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let cand = [x[0] + t * p[0], x[1] + t * p[1]];
            let fc = f(cand);
            if fc.is_finite() && fc <= fx + 1e-4 * t * slope {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fxn)) = accepted else { break };

        let gn = gradient(f, xn, fxn);
        let sk = [xn[0] - x[0], xn[1] - x[1]];
        let yk = [gn[0] - g[0], gn[1] - g[1]];
        let sy = sk[0] * yk[0] + sk[1] * yk[1];
        let yy = yk[0] * yk[0] + yk[1] * yk[1];
        if sy > 1e-14 * (sk[0].hypot(sk[1]) * yy.sqrt()) {
            if it == 1 {
                let scale = sy / yy;
                h = [[scale, 0.0], [0.0, scale]];
            }
            let rho = 1.0 / sy;
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let hy = [
                h[0][0] * yk[0] + h[0][1] * yk[1],
                h[1][0] * yk[0] + h[1][1] * yk[1],
            ];
            let yhy = yk[0] * hy[0] + yk[1] * hy[1];
            for i in 0..2 {
                for j in 0..2 {
                    h[i][j] += -rho * (hy[i] * sk[j] + sk[i] * hy[j])
                        + (rho * rho * yhy + rho) * sk[i] * sk[j];
                }
            }
        }
        let moved = (fx - fxn).abs();
        x = xn;
        fx = fxn;
        g = gn;
        if moved <= 1e-15 * fx.abs().max(1.0) {
            break;
        }
    }
    (x, fx, it)
}
