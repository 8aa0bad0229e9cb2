//! Dense verification oracle: the marginal likelihood is evaluated with the
//! full N x N covariance built explicitly and maximized with Nelder-Mead,
//! independently of the profiled MME path used by `fit_ml`.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::mlm::design::{Design, ModelSpec};
use crate::mlm::fit::{
    ols_loglik, FixedEffectEstimate, ModelFit, RandomEffects, VarianceComponent,
    VarianceComponents, LOG_VAR_HI, LOG_VAR_LO, Z_95,
};
use crate::mlm::optim::{nelder_mead_box, newton_polish};
use crate::mlm::solve::Sigma2;

pub const ORACLE_MAX_ROWS: usize = 500;

struct DenseState {
    beta: DVector<f64>,
    beta_cov: DMatrix<f64>,
    loglik: f64,
}

fn build_v(design: &Design, sigma2: &Sigma2) -> DMatrix<f64> {
    let n = design.n_rows();
    let mut v = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut val = 0.0;
            for f in 0..3 {
                if design.factors[f].index[i] == design.factors[f].index[j] {
                    val += sigma2[f];
                }
            }
            if i == j {
                val += sigma2[3];
            }
            v[(i, j)] = val;
        }
    }
    v
}

fn dense_eval(design: &Design, sigma2: &Sigma2) -> Result<DenseState> {
    let n = design.n_rows();
    let v = build_v(design, sigma2);
    let chol = Cholesky::new(v).ok_or_else(|| {
        Error::SingularFactorization("dense covariance is not positive definite".into())
    })?;
    let logdet: f64 = (0..n).map(|i| 2.0 * chol.l_dirty()[(i, i)].ln()).sum();
    let y = DVector::from_column_slice(&design.y);
    let vix = chol.solve(&design.x);
    let viy = chol.solve(&y);
    let xtvix = design.x.transpose() * &vix;
    let xtviy = design.x.transpose() * &viy;
    let gls = Cholesky::new(xtvix).ok_or(Error::RankDeficientFixed)?;
    let beta = gls.solve(&xtviy);
    let beta_cov = gls.inverse();
    let r = &y - &design.x * &beta;
    let quad = r.dot(&chol.solve(&r));
    let loglik = -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad);
    Ok(DenseState {
        beta,
        beta_cov,
        loglik,
    })
}

/// BLUPs by the textbook formula u_f = sigma2_f Z_f^T V^{-1} (y - X beta),
/// computed fully densely.
pub fn dense_blups(design: &Design, sigma2: &Sigma2, beta: &[f64]) -> Result<[Vec<f64>; 3]> {
    let v = build_v(design, sigma2);
    let chol = Cholesky::new(v).ok_or_else(|| {
        Error::SingularFactorization("dense covariance is not positive definite".into())
    })?;
    let y = DVector::from_column_slice(&design.y);
    let beta = DVector::from_column_slice(beta);
    let r = &y - &design.x * beta;
    let vir = chol.solve(&r);
    let mut out: [Vec<f64>; 3] = std::array::from_fn(|f| vec![0.0; design.factors[f].n_groups()]);
    for i in 0..design.n_rows() {
        for f in 0..3 {
            out[f][design.factors[f].index[i]] += sigma2[f] * vir[i];
        }
    }
    Ok(out)
}

/// Maximizes the exact dense marginal likelihood with a generic bounded
/// optimizer. Output contract matches `fit_ml`.
pub fn oracle_fit_dense(design: &Design, spec: &ModelSpec) -> Result<ModelFit> {
    let n = design.n_rows();
    if n > ORACLE_MAX_ROWS {
        return Err(Error::TooLargeForOracle {
            n,
            max: ORACLE_MAX_ROWS,
        });
    }
    if n == 0 {
        return Err(Error::EmptySeries);
    }

    let var_y = crate::series::population_variance(&design.y).max(1e-12);
    let start = [(var_y / 4.0).ln().clamp(LOG_VAR_LO, LOG_VAR_HI); 4];
    let lo = [LOG_VAR_LO; 4];
    let hi = [LOG_VAR_HI; 4];

    // Validate once, then treat failures at extreme corners as infinitely bad.
    dense_eval(design, &start.map(f64::exp))?;
    let objective = |x: &[f64]| -> Result<f64> {
        let sigma2 = [x[0].exp(), x[1].exp(), x[2].exp(), x[3].exp()];
        Ok(dense_eval(design, &sigma2)
            .map(|s| -2.0 * s.loglik)
            .unwrap_or(f64::INFINITY))
    };

    let result = nelder_mead_box(objective, &start, &lo, &hi, 0.8, 1200, 3)?;

    let mut log_vec = result.x.clone();
    let mut dev_opt = result.f;
    for i in 0..4 {
        if log_vec[i] > LOG_VAR_LO + 1e-6 {
            let mut trial = log_vec.clone();
            trial[i] = LOG_VAR_LO;
            let d = objective(&trial)?;
            if d <= dev_opt + 1e-6 * dev_opt.abs().max(1.0) {
                log_vec = trial;
                dev_opt = d;
            }
        }
    }
    let free: Vec<bool> = log_vec.iter().map(|&v| v > LOG_VAR_LO + 1e-6).collect();
    newton_polish(objective, &mut log_vec, &mut dev_opt, &lo, &hi, &free, 8)?;

    let log_opt = [log_vec[0], log_vec[1], log_vec[2], log_vec[3]];
    let sigma2: Sigma2 = log_opt.map(f64::exp);
    let state = dense_eval(design, &sigma2)?;

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let beta: Vec<FixedEffectEstimate> = (0..design.n_fixed())
        .map(|c| {
            let coef = state.beta[c];
            let se = state.beta_cov[(c, c)].max(0.0).sqrt();
            let z = coef / se;
            FixedEffectEstimate {
                name: design.x_names[c].clone(),
                coef,
                se,
                z,
                p: 2.0 * (1.0 - normal.cdf(z.abs())),
                ci95: [coef - Z_95 * se, coef + Z_95 * se],
            }
        })
        .collect();

    // Component SEs from a numerical Hessian of the dense deviance.
    let at_bound = |i: usize| log_opt[i] <= LOG_VAR_LO + 1e-6;
    let interior: Vec<usize> = (0..4).filter(|&i| !at_bound(i)).collect();
    let mut se_log: [Option<f64>; 4] = [None, None, None, None];
    if !interior.is_empty() {
        let h = 1e-3;
        let m = interior.len();
        let dev = |x: &[f64; 4]| -> Result<f64> {
            let s = x.map(f64::exp);
            Ok(-2.0 * dense_eval(design, &s)?.loglik)
        };
        let f0 = dev(&log_opt)?;
        let mut hess = DMatrix::zeros(m, m);
        for (a, &i) in interior.iter().enumerate() {
            let mut xp = log_opt;
            xp[i] += h;
            let mut xm = log_opt;
            xm[i] -= h;
            hess[(a, a)] = (dev(&xp)? - 2.0 * f0 + dev(&xm)?) / (h * h);
            for (b, &j) in interior.iter().enumerate().skip(a + 1) {
                let mut pp = log_opt;
                pp[i] += h;
                pp[j] += h;
                let mut pm = log_opt;
                pm[i] += h;
                pm[j] -= h;
                let mut mp = log_opt;
                mp[i] -= h;
                mp[j] += h;
                let mut mm = log_opt;
                mm[i] -= h;
                mm[j] -= h;
                let v = (dev(&pp)? - dev(&pm)? - dev(&mp)? + dev(&mm)?) / (4.0 * h * h);
                hess[(a, b)] = v;
                hess[(b, a)] = v;
            }
        }
        if let Some(chol) = Cholesky::new(hess) {
            let cov = chol.inverse() * 2.0;
            for (a, &i) in interior.iter().enumerate() {
                let v = cov[(a, a)];
                if v.is_finite() && v > 0.0 {
                    se_log[i] = Some(v.sqrt());
                }
            }
        }
    }

    let total: f64 = sigma2.iter().sum();
    let mut cum = 0.0;
    let comp = |i: usize, cum: &mut f64| {
        let share = sigma2[i] / total;
        *cum += share;
        let bound = at_bound(i);
        let (se, ci95) = match (se_log[i], bound) {
            (Some(sl), false) => (
                Some(sigma2[i] * sl),
                Some([sigma2[i] * (-Z_95 * sl).exp(), sigma2[i] * (Z_95 * sl).exp()]),
            ),
            _ => (None, None),
        };
        VarianceComponent {
            estimate: sigma2[i],
            se,
            share,
            cumulative_share: *cum,
            ci95,
            at_boundary: bound,
        }
    };
    let components = VarianceComponents {
        hour: comp(0, &mut cum),
        day: comp(1, &mut cum),
        month_year: comp(2, &mut cum),
        residual: comp(3, &mut cum),
    };

    let blups = {
        let coefs: Vec<f64> = beta.iter().map(|b| b.coef).collect();
        dense_blups(design, &sigma2, &coefs)?
    };
    let table = |f: usize| -> BTreeMap<String, f64> {
        design.factors[f]
            .labels
            .iter()
            .cloned()
            .zip(blups[f].iter().copied())
            .collect()
    };

    let lr = (2.0 * (state.loglik - ols_loglik(design)?)).max(0.0);

    Ok(ModelFit {
        spec: spec.clone(),
        beta,
        components,
        loglik: state.loglik,
        n_obs: n,
        converged: result.converged,
        lr_chi2_vs_linear: lr,
        lr_clamped_negative: false,
        iterations: result.iterations,
        log_sigma2: log_opt,
        random_effects: RandomEffects {
            hour_of_day: table(0),
            date: table(1),
            month_year: table(2),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlm::design::Restriction;
    use nalgebra::DMatrix;

    fn spec() -> ModelSpec {
        ModelSpec {
            label: "oracle".into(),
            fixed_effects: vec![],
            restriction: Restriction::None,
        }
    }

    #[test]
    fn guards_oversized_designs() {
        let n = 501;
        let labels: [Vec<String>; 3] = std::array::from_fn(|f| {
            (0..n).map(|i| format!("g{}", (i + f) % 5)).collect()
        });
        let x = DMatrix::from_element(n, 1, 1.0);
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let design = Design::from_parts(y, x, vec!["constant".into()], labels).unwrap();
        assert!(matches!(
            oracle_fit_dense(&design, &spec()),
            Err(Error::TooLargeForOracle { n: 501, max: 500 })
        ));
    }

    #[test]
    fn single_group_per_factor_degenerates_to_mean() {
        let n = 60;
        let labels: [Vec<String>; 3] =
            std::array::from_fn(|_| (0..n).map(|_| "only".to_string()).collect());
        let x = DMatrix::from_element(n, 1, 1.0);
        let y: Vec<f64> = (0..n).map(|i| 2.0 + (i as f64 * 0.91).sin()).collect();
        let mean = y.iter().sum::<f64>() / n as f64;
        let design = Design::from_parts(y, x, vec!["constant".into()], labels).unwrap();
        let fit = oracle_fit_dense(&design, &spec()).unwrap();
        // The shared intercept direction is orthogonal to the residuals, so
        // every group component slides to the boundary and the fixed part is
        // the sample mean.
        assert!((fit.beta[0].coef - mean).abs() < 1e-6);
        assert!(fit.components.hour.at_boundary);
        assert!(fit.components.day.at_boundary);
        assert!(fit.components.month_year.at_boundary);
    }
}
