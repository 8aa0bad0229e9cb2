//! Profiled marginal log-likelihood for the three-factor random-intercept
//! model, evaluated through Henderson's mixed-model equations.
//!
//! For V = sigma2_e I + sum_f sigma2_f Z_f Z_f^T the Woodbury identity gives
//!   V^{-1} = R^{-1} - R^{-1} Z C^{-1} Z^T R^{-1},   C = Z^T Z / sigma2_e + G^{-1}
//!   log|V| = n log sigma2_e + sum_f q_f log sigma2_f + log|C|.
//! C is factorized block-sparsely: each factor's own block is diagonal, so the
//! largest factor (the ~500 calendar dates) is eliminated first and only the
//! small hour + month-year Schur complement is factorized densely.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::mlm::design::Design;

/// Natural-scale variance components in canonical order:
/// hour, day, month-year, residual.
pub type Sigma2 = [f64; 4];

/// Sufficient statistics of a design, independent of the variance components.
pub struct DesignStats {
    pub n: usize,
    pub p: usize,
    pub q: [usize; 3],
    pub xtx: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yty: f64,
    pub sum_y: f64,
    /// Index of the factor eliminated first (the one with most groups).
    pub elim: usize,
    /// The two remaining factors in canonical order.
    pub rest: [usize; 2],
    pub counts: [Vec<f64>; 3],
    /// Z_f^T X per factor (q_f x p).
    pub ztx: [DMatrix<f64>; 3],
    pub zty: [DVector<f64>; 3],
    /// Pair counts between the stacked rest factors and the eliminated one
    /// (q_rest_total x q_elim).
    pub cross: DMatrix<f64>,
    /// Z^T Z over the stacked rest factors (q_rest_total x q_rest_total).
    pub rest_ztz: DMatrix<f64>,
}

impl DesignStats {
    pub fn new(design: &Design) -> Result<DesignStats> {
        let n = design.n_rows();
        let p = design.n_fixed();
        if n == 0 {
            return Err(Error::EmptySeries);
        }
        for f in &design.factors {
            if f.n_groups() < 2 {
                return Err(Error::InvalidConfig(format!(
                    "random factor {} has {} group(s); at least 2 are required",
                    f.name,
                    f.n_groups()
                )));
            }
        }

        let q = [
            design.factors[0].n_groups(),
            design.factors[1].n_groups(),
            design.factors[2].n_groups(),
        ];
        let elim = (0..3).max_by_key(|&f| q[f]).unwrap();
        let rest: [usize; 2] = match elim {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        };

        let x = &design.x;
        let idx = |f: usize, row: usize| design.factors[f].index[row];

        // Accumulate in a canonical row order so estimates are bit-identical
        // under any permutation of the input rows.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let ka = (idx(0, a), idx(1, a), idx(2, a), design.y[a].to_bits());
            let kb = (idx(0, b), idx(1, b), idx(2, b), design.y[b].to_bits());
            ka.cmp(&kb).then_with(|| {
                for c in 0..p {
                    let o = x[(a, c)].to_bits().cmp(&x[(b, c)].to_bits());
                    if o != std::cmp::Ordering::Equal {
                        return o;
                    }
                }
                std::cmp::Ordering::Equal
            })
        });

        let mut xtx = DMatrix::zeros(p, p);
        let mut xty = DVector::zeros(p);
        let mut yty = 0.0;
        let mut sum_y = 0.0;
        let mut counts: [Vec<f64>; 3] = std::array::from_fn(|f| vec![0.0; q[f]]);
        let mut ztx: [DMatrix<f64>; 3] = std::array::from_fn(|f| DMatrix::zeros(q[f], p));
        let mut zty: [DVector<f64>; 3] = std::array::from_fn(|f| DVector::zeros(q[f]));
        let qr_total = q[rest[0]] + q[rest[1]];
        let mut cross = DMatrix::zeros(qr_total, q[elim]);
        let mut rest_ztz = DMatrix::zeros(qr_total, qr_total);

        for &i in &order {
            let yi = design.y[i];
            yty += yi * yi;
            sum_y += yi;
            for a in 0..p {
                xty[a] += x[(i, a)] * yi;
                for b in 0..p {
                    xtx[(a, b)] += x[(i, a)] * x[(i, b)];
                }
            }
            let gs = [idx(0, i), idx(1, i), idx(2, i)];
            for f in 0..3 {
                counts[f][gs[f]] += 1.0;
                zty[f][gs[f]] += yi;
                for c in 0..p {
                    ztx[f][(gs[f], c)] += x[(i, c)];
                }
            }
            let r0 = gs[rest[0]];
            let r1 = q[rest[0]] + gs[rest[1]];
            let e = gs[elim];
            cross[(r0, e)] += 1.0;
            cross[(r1, e)] += 1.0;
            rest_ztz[(r0, r0)] += 1.0;
            rest_ztz[(r1, r1)] += 1.0;
            rest_ztz[(r0, r1)] += 1.0;
            rest_ztz[(r1, r0)] += 1.0;
        }

        Ok(DesignStats {
            n,
            p,
            q,
            xtx,
            xty,
            yty,
            sum_y,
            elim,
            rest,
            counts,
            ztx,
            zty,
            cross,
            rest_ztz,
        })
    }

    /// Stacks the per-factor blocks of a q_total-vector in MME order
    /// (eliminated factor first, then the two rest factors).
    fn stack_rhs(&self, per_factor: [DVector<f64>; 3]) -> (DVector<f64>, DVector<f64>) {
        let elim = per_factor[self.elim].clone();
        let mut rest = DVector::zeros(self.q[self.rest[0]] + self.q[self.rest[1]]);
        rest.rows_mut(0, self.q[self.rest[0]])
            .copy_from(&per_factor[self.rest[0]]);
        rest.rows_mut(self.q[self.rest[0]], self.q[self.rest[1]])
            .copy_from(&per_factor[self.rest[1]]);
        (elim, rest)
    }
}

/// The factorization of C at one set of variance components.
pub struct MmeFactor {
    /// Diagonal of the eliminated block.
    a: Vec<f64>,
    /// cross / sigma2_e.
    cross_scaled: DMatrix<f64>,
    schur: Cholesky<f64, Dyn>,
    pub logdet_c: f64,
}

impl MmeFactor {
    pub fn new(stats: &DesignStats, sigma2: &Sigma2) -> Result<MmeFactor> {
        let se = sigma2[3];
        if sigma2.iter().any(|&s| !s.is_finite() || s <= 0.0) {
            return Err(Error::SingularFactorization(format!(
                "variance components must be positive and finite, got {sigma2:?}"
            )));
        }
        let elim = stats.elim;
        let a: Vec<f64> = stats.counts[elim]
            .iter()
            .map(|&c| c / se + 1.0 / sigma2[elim])
            .collect();

        let cross_scaled = &stats.cross / se;
        // S = rest_ZtZ/se + G_rest^{-1} - W W^T with W = cross_scaled * diag(1/sqrt(a)).
        let mut w = cross_scaled.clone();
        for (j, &aj) in a.iter().enumerate() {
            let scale = 1.0 / aj.sqrt();
            for i in 0..w.nrows() {
                w[(i, j)] *= scale;
            }
        }
        let mut s = &stats.rest_ztz / se;
        let q0 = stats.q[stats.rest[0]];
        let q1 = stats.q[stats.rest[1]];
        for i in 0..q0 {
            s[(i, i)] += 1.0 / sigma2[stats.rest[0]];
        }
        for i in 0..q1 {
            s[(q0 + i, q0 + i)] += 1.0 / sigma2[stats.rest[1]];
        }
        s -= &w * w.transpose();

        let schur = Cholesky::new(s).ok_or_else(|| {
            Error::SingularFactorization("Schur complement is not positive definite".into())
        })?;
        let mut logdet_c: f64 = a.iter().map(|v| v.ln()).sum();
        for i in 0..q0 + q1 {
            logdet_c += 2.0 * schur.l_dirty()[(i, i)].ln();
        }

        Ok(MmeFactor {
            a,
            cross_scaled,
            schur,
            logdet_c,
        })
    }

    /// Solves C [x_elim; x_rest] = [b_elim; b_rest].
    pub fn solve(&self, b_elim: &DVector<f64>, b_rest: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let w: DVector<f64> = DVector::from_iterator(
            b_elim.len(),
            b_elim.iter().zip(&self.a).map(|(b, a)| b / a),
        );
        let rhs = b_rest - &self.cross_scaled * &w;
        let x_rest = self.schur.solve(&rhs);
        let back = self.cross_scaled.transpose() * &x_rest;
        let x_elim = DVector::from_iterator(
            b_elim.len(),
            b_elim
                .iter()
                .zip(back.iter())
                .zip(&self.a)
                .map(|((b, c), a)| (b - c) / a),
        );
        (x_elim, x_rest)
    }
}

/// One full evaluation of the profiled likelihood at fixed variance components.
pub struct Evaluation {
    pub loglik: f64,
    pub deviance: f64,
    pub beta: DVector<f64>,
    /// (X^T V^{-1} X)^{-1}: the GLS covariance of beta.
    pub beta_cov: DMatrix<f64>,
    /// BLUPs per factor in canonical factor order.
    pub blups: [Vec<f64>; 3],
}

/// Evaluates the profiled deviance, optionally returning the full GLS state.
pub fn evaluate(stats: &DesignStats, sigma2: &Sigma2, want_full: bool) -> Result<Evaluation> {
    let se = sigma2[3];
    let factor = MmeFactor::new(stats, sigma2)?;

    // Right-hand sides Z^T X / se and Z^T y / se in MME order.
    let (bx_elim, bx_rest) = {
        let per: [DMatrix<f64>; 3] = std::array::from_fn(|f| &stats.ztx[f] / se);
        let elim = per[stats.elim].clone();
        let mut rest = DMatrix::zeros(
            stats.q[stats.rest[0]] + stats.q[stats.rest[1]],
            stats.p,
        );
        rest.rows_mut(0, stats.q[stats.rest[0]])
            .copy_from(&per[stats.rest[0]]);
        rest.rows_mut(stats.q[stats.rest[0]], stats.q[stats.rest[1]])
            .copy_from(&per[stats.rest[1]]);
        (elim, rest)
    };
    let (by_elim, by_rest) = stats.stack_rhs(std::array::from_fn(|f| &stats.zty[f] / se));

    // U = C^{-1} [Z^T X / se], u_y = C^{-1} [Z^T y / se], column by column.
    let mut ux_elim = DMatrix::zeros(bx_elim.nrows(), stats.p);
    let mut ux_rest = DMatrix::zeros(bx_rest.nrows(), stats.p);
    for c in 0..stats.p {
        let (xe, xr) = factor.solve(&bx_elim.column(c).into_owned(), &bx_rest.column(c).into_owned());
        ux_elim.set_column(c, &xe);
        ux_rest.set_column(c, &xr);
    }
    let (uy_elim, uy_rest) = factor.solve(&by_elim, &by_rest);

    // X^T V^{-1} X = X^T X / se - (Z^T X/se)^T C^{-1} (Z^T X/se), etc.
    let xtvix =
        &stats.xtx / se - bx_elim.transpose() * &ux_elim - bx_rest.transpose() * &ux_rest;
    let xtviy = &stats.xty / se - ux_elim.transpose() * &by_elim - ux_rest.transpose() * &by_rest;
    let ytviy = stats.yty / se - by_elim.dot(&uy_elim) - by_rest.dot(&uy_rest);

    let gls = Cholesky::new(xtvix.clone()).ok_or(Error::RankDeficientFixed)?;
    let beta = gls.solve(&xtviy);
    let quad = ytviy - beta.dot(&xtviy);

    let logdet_v = stats.n as f64 * se.ln()
        + (0..3).map(|f| stats.q[f] as f64 * sigma2[f].ln()).sum::<f64>()
        + factor.logdet_c;
    let loglik = -0.5 * (stats.n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet_v + quad);

    let (beta_cov, blups) = if want_full {
        let cov = gls.inverse();
        // u = C^{-1} Z^T (y - X beta) / se.
        let rx_elim = &by_elim - &bx_elim * &beta;
        let rx_rest = &by_rest - &bx_rest * &beta;
        let (ue, ur) = factor.solve(&rx_elim, &rx_rest);
        let mut blups: [Vec<f64>; 3] = std::array::from_fn(|f| vec![0.0; stats.q[f]]);
        blups[stats.elim] = ue.iter().copied().collect();
        let q0 = stats.q[stats.rest[0]];
        blups[stats.rest[0]] = ur.rows(0, q0).iter().copied().collect();
        blups[stats.rest[1]] = ur.rows(q0, stats.q[stats.rest[1]]).iter().copied().collect();
        (cov, blups)
    } else {
        (DMatrix::zeros(0, 0), std::array::from_fn(|_| Vec::new()))
    };

    Ok(Evaluation {
        loglik,
        deviance: -2.0 * loglik,
        beta,
        beta_cov,
        blups,
    })
}

/// The profiled deviance as a function of log variance components, with the
/// design statistics built once.
pub struct ProfiledDeviance {
    stats: DesignStats,
}

impl ProfiledDeviance {
    pub fn new(design: &Design) -> Result<ProfiledDeviance> {
        Ok(ProfiledDeviance {
            stats: DesignStats::new(design)?,
        })
    }

    pub fn stats(&self) -> &DesignStats {
        &self.stats
    }

    /// Population variance of the response, from order-canonical sums.
    pub fn response_variance(&self) -> f64 {
        let n = self.stats.n as f64;
        let mean = self.stats.sum_y / n;
        (self.stats.yty / n - mean * mean).max(0.0)
    }

    /// Deviance (-2 log-likelihood) at the given log variance components.
    pub fn deviance(&self, log_sigma2: &[f64; 4]) -> Result<f64> {
        let sigma2 = log_sigma2.map(f64::exp);
        Ok(evaluate(&self.stats, &sigma2, false)?.deviance)
    }

    pub fn evaluate_full(&self, sigma2: &Sigma2) -> Result<Evaluation> {
        evaluate(&self.stats, sigma2, true)
    }
}
