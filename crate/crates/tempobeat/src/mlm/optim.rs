//! Box-constrained minimizers for the low-dimensional variance-component
//! searches: quasi-Newton BFGS with central-difference gradients for the
//! production fitter, Nelder-Mead for the independent dense oracle, and a
//! Newton polish that tightens either optimum to near machine precision.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::Result;

/// Step used for central finite differences, matching the step at which
/// optima are later gradient-checked.
pub const FD_STEP: f64 = 1e-5;

pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    /// Relative objective change over the final iteration was below 1e-8.
    pub converged: bool,
}

fn clamp(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn fd_gradient<F: FnMut(&[f64]) -> Result<f64>>(f: &mut F, x: &[f64]) -> Result<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + FD_STEP;
        let hi = f(&probe)?;
        probe[i] = x[i] - FD_STEP;
        let lo = f(&probe)?;
        probe[i] = x[i];
        g[i] = (hi - lo) / (2.0 * FD_STEP);
    }
    Ok(g)
}

/// Gradient with boundary-blocked components zeroed.
fn project_gradient(g: &[f64], x: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    g.iter()
        .enumerate()
        .map(|(i, &gi)| {
            if (x[i] <= lo[i] && gi > 0.0) || (x[i] >= hi[i] && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(x.abs()))
}

/// BFGS with projection onto a box, central-difference gradients, and an
/// Armijo backtracking line search. Converged means the relative objective
/// change across the final iteration fell below 1e-8.
pub fn bfgs_box<F: FnMut(&[f64]) -> Result<f64>>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_iter: usize,
    gtol: f64,
) -> Result<MinimizeResult> {
    let d = x0.len();
    let mut x = x0.to_vec();
    clamp(&mut x, lo, hi);
    let mut fx = f(&x)?;
    let mut g = fd_gradient(&mut f, &x)?;
    let mut h = identity(d);
    let mut last_rel_change = f64::INFINITY;
    let mut iterations = 0;

    for iter in 0..max_iter {
        iterations = iter + 1;
        let pg = project_gradient(&g, &x, lo, hi);
        if inf_norm(&pg) < gtol {
            last_rel_change = 0.0;
            break;
        }

        let mut dir = neg_mat_vec(&h, &g);
        if dot(&dir, &g) >= 0.0 {
            h = identity(d);
            dir = g.iter().map(|v| -v).collect();
        }

        // Backtracking from a unit step, then a steepest-descent rescue.
        let mut accepted = None;
        for direction in [dir.clone(), g.iter().map(|v| -v).collect::<Vec<f64>>()] {
            let slope = dot(&direction, &g);
            if slope >= 0.0 {
                continue;
            }
            let mut alpha = 1.0;
            for _ in 0..40 {
                let mut cand = x.clone();
                for i in 0..d {
                    cand[i] += alpha * direction[i];
                }
                clamp(&mut cand, lo, hi);
                if cand == x {
                    break;
                }
                let fc = f(&cand)?;
                if fc <= fx + 1e-4 * alpha * slope || fc < fx - 1e-14 * fx.abs() {
                    accepted = Some((cand, fc));
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }

        let Some((x_new, f_new)) = accepted else {
            // No progress possible along descent directions: numerical optimum.
            last_rel_change = 0.0;
            break;
        };

        let g_new = fd_gradient(&mut f, &x_new)?;
        let s: Vec<f64> = (0..d).map(|i| x_new[i] - x[i]).collect();
        let yv: Vec<f64> = (0..d).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 * inf_norm(&s) * inf_norm(&yv) {
            bfgs_update(&mut h, &s, &yv, sy);
        }

        last_rel_change = (fx - f_new).abs() / fx.abs().max(1.0);
        x = x_new;
        fx = f_new;
        g = g_new;

        if last_rel_change < 1e-8 && inf_norm(&project_gradient(&g, &x, lo, hi)) < gtol {
            break;
        }
    }

    Ok(MinimizeResult {
        converged: last_rel_change < 1e-8,
        x,
        f: fx,
        iterations,
    })
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn neg_mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| -dot(row, v)).collect()
}

/// Standard BFGS inverse-Hessian update.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let d = s.len();
    let hy: Vec<f64> = h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    let c1 = (sy + yhy) / (sy * sy);
    for i in 0..d {
        for j in 0..d {
            h[i][j] += c1 * s[i] * s[j] - (hy[i] * s[j] + s[i] * hy[j]) / sy;
        }
    }
}

/// A few damped Newton steps over the `free` coordinates with finite
/// differences, driving the gradient toward the FD noise floor. Coordinates
/// outside `free` (typically those pinned at the variance floor) stay fixed.
pub fn newton_polish<F: FnMut(&[f64]) -> Result<f64>>(
    mut f: F,
    x: &mut [f64],
    fx: &mut f64,
    lo: &[f64],
    hi: &[f64],
    free: &[bool],
    max_steps: usize,
) -> Result<()> {
    let idx: Vec<usize> = (0..x.len()).filter(|&i| free[i]).collect();
    let m = idx.len();
    if m == 0 {
        return Ok(());
    }
    let hess_h = 1e-3;
    for _ in 0..max_steps {
        let mut g = DVector::zeros(m);
        let mut probe = x.to_vec();
        for (a, &i) in idx.iter().enumerate() {
            probe[i] = x[i] + FD_STEP;
            let up = f(&probe)?;
            probe[i] = x[i] - FD_STEP;
            let down = f(&probe)?;
            probe[i] = x[i];
            g[a] = (up - down) / (2.0 * FD_STEP);
        }
        if g.amax() < 1e-9 * fx.abs().max(1.0) {
            break;
        }

        let mut hess = DMatrix::zeros(m, m);
        let f0 = *fx;
        for (a, &i) in idx.iter().enumerate() {
            let mut p = x.to_vec();
            p[i] += hess_h;
            let fp = f(&p)?;
            p[i] = x[i] - hess_h;
            let fm = f(&p)?;
            hess[(a, a)] = (fp - 2.0 * f0 + fm) / (hess_h * hess_h);
            for (b, &j) in idx.iter().enumerate().skip(a + 1) {
                let mut q = x.to_vec();
                q[i] += hess_h;
                q[j] += hess_h;
                let fpp = f(&q)?;
                q[j] = x[j] - hess_h;
                let fpm = f(&q)?;
                q[i] = x[i] - hess_h;
                let fmm = f(&q)?;
                q[j] = x[j] + hess_h;
                let fmp = f(&q)?;
                let v = (fpp - fpm - fmp + fmm) / (4.0 * hess_h * hess_h);
                hess[(a, b)] = v;
                hess[(b, a)] = v;
            }
        }
        let Some(chol) = Cholesky::new(hess) else {
            break;
        };
        let step = chol.solve(&(-&g));

        let mut accepted = false;
        for scale in [1.0, 0.5, 0.25, 0.1] {
            let mut cand = x.to_vec();
            for (a, &i) in idx.iter().enumerate() {
                cand[i] = (cand[i] + scale * step[a]).clamp(lo[i], hi[i]);
            }
            let fc = f(&cand)?;
            if fc <= *fx {
                let improvement = *fx - fc;
                x.copy_from_slice(&cand);
                *fx = fc;
                accepted = true;
                if improvement < 1e-12 * fx.abs().max(1.0) {
                    return Ok(());
                }
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    Ok(())
}

/// Nelder-Mead with vertices clamped to the box; restarts shrink a fresh
/// simplex around the incumbent best point.
pub fn nelder_mead_box<F: FnMut(&[f64]) -> Result<f64>>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    initial_scale: f64,
    max_iter_per_round: usize,
    rounds: usize,
) -> Result<MinimizeResult> {
    let d = x0.len();
    let mut best = x0.to_vec();
    clamp(&mut best, lo, hi);
    let mut best_f = f(&best)?;
    let mut scale = initial_scale;
    let mut total_iters = 0;

    for _ in 0..rounds {
        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
        simplex.push(best.clone());
        for i in 0..d {
            let mut v = best.clone();
            v[i] = (v[i] + scale).clamp(lo[i], hi[i]);
            if v == best {
                v[i] = (best[i] - scale).clamp(lo[i], hi[i]);
            }
            simplex.push(v);
        }
        let mut fv: Vec<f64> = Vec::with_capacity(d + 1);
        for v in &simplex {
            fv.push(f(v)?);
        }

        for _ in 0..max_iter_per_round {
            total_iters += 1;
            let mut order: Vec<usize> = (0..=d).collect();
            order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
            let (b, w) = (order[0], order[d]);
            let second_worst = order[d - 1];

            let spread = (fv[w] - fv[b]).abs();
            let diam = simplex
                .iter()
                .map(|v| {
                    v.iter()
                        .zip(&simplex[b])
                        .map(|(a, c)| (a - c).abs())
                        .fold(0.0f64, f64::max)
                })
                .fold(0.0f64, f64::max);
            if spread < 1e-13 * (1.0 + fv[b].abs()) && diam < 1e-10 {
                break;
            }

            let mut centroid = vec![0.0; d];
            for (i, v) in simplex.iter().enumerate() {
                if i == w {
                    continue;
                }
                for k in 0..d {
                    centroid[k] += v[k] / d as f64;
                }
            }

            let point = |coef: f64| {
                let mut p: Vec<f64> = (0..d)
                    .map(|k| centroid[k] + coef * (centroid[k] - simplex[w][k]))
                    .collect();
                clamp(&mut p, lo, hi);
                p
            };

            let xr = point(1.0);
            let fr = f(&xr)?;
            if fr < fv[b] {
                let xe = point(2.0);
                let fe = f(&xe)?;
                if fe < fr {
                    simplex[w] = xe;
                    fv[w] = fe;
                } else {
                    simplex[w] = xr;
                    fv[w] = fr;
                }
            } else if fr < fv[second_worst] {
                simplex[w] = xr;
                fv[w] = fr;
            } else {
                let xc = point(-0.5);
                let fc = f(&xc)?;
                if fc < fv[w] {
                    simplex[w] = xc;
                    fv[w] = fc;
                } else {
                    // Shrink toward the best vertex.
                    let best_v = simplex[b].clone();
                    for (i, v) in simplex.iter_mut().enumerate() {
                        if i == b {
                            continue;
                        }
                        for k in 0..d {
                            v[k] = best_v[k] + 0.5 * (v[k] - best_v[k]);
                        }
                        fv[i] = f(v)?;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        if fv[order[0]] < best_f {
            best_f = fv[order[0]];
            best = simplex[order[0]].clone();
        }
        scale /= 10.0;
    }

    Ok(MinimizeResult {
        x: best,
        f: best_f,
        iterations: total_iters,
        converged: true,
    })
}
