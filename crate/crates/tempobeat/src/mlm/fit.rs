//! Maximum-likelihood fitting of the three-factor random-intercept model:
//! fixed effects are profiled out by GLS and the profiled deviance is
//! minimized over log variance components with box-constrained BFGS.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::mlm::design::{Design, ModelSpec, FACTOR_NAMES};
use crate::mlm::optim::{bfgs_box, newton_polish, MinimizeResult};
use crate::mlm::solve::{evaluate, ProfiledDeviance, Sigma2};

/// 95% two-sided normal quantile used for every Wald interval.
pub const Z_95: f64 = 1.959964;

/// Log-variance box: components are floored at e^-30.
pub const LOG_VAR_LO: f64 = -30.0;
pub const LOG_VAR_HI: f64 = 10.0;

const MAX_ITER: usize = 500;
const GRAD_TOL: f64 = 2e-5;

/// One estimated variance component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponent {
    pub estimate: f64,
    /// Natural-scale standard error; absent at the boundary.
    pub se: Option<f64>,
    pub share: f64,
    pub cumulative_share: f64,
    /// Log-normal Wald interval; absent at the boundary.
    pub ci95: Option<[f64; 2]>,
    pub at_boundary: bool,
}

/// The four components in reporting order: hour, day, month-year, residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub hour: VarianceComponent,
    pub day: VarianceComponent,
    pub month_year: VarianceComponent,
    pub residual: VarianceComponent,
}

impl VarianceComponents {
    pub fn as_array(&self) -> [&VarianceComponent; 4] {
        [&self.hour, &self.day, &self.month_year, &self.residual]
    }

    pub fn estimates(&self) -> [f64; 4] {
        [
            self.hour.estimate,
            self.day.estimate,
            self.month_year.estimate,
            self.residual.estimate,
        ]
    }

    pub fn shares(&self) -> [f64; 4] {
        [
            self.hour.share,
            self.day.share,
            self.month_year.share,
            self.residual.share,
        ]
    }

    pub fn total(&self) -> f64 {
        self.estimates().iter().sum()
    }
}

/// One fixed-effect estimate with Wald inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedEffectEstimate {
    pub name: String,
    pub coef: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
    pub ci95: [f64; 2],
}

/// BLUP tables keyed by group label, per factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomEffects {
    pub hour_of_day: BTreeMap<String, f64>,
    pub date: BTreeMap<String, f64>,
    pub month_year: BTreeMap<String, f64>,
}

impl RandomEffects {
    fn table(&self, factor: usize) -> &BTreeMap<String, f64> {
        match factor {
            0 => &self.hour_of_day,
            1 => &self.date,
            _ => &self.month_year,
        }
    }
}

/// A fitted model: coefficients, variance components, likelihood, and the
/// realized random-effect predictions needed for conditional prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub spec: ModelSpec,
    pub beta: Vec<FixedEffectEstimate>,
    pub components: VarianceComponents,
    pub loglik: f64,
    pub n_obs: usize,
    pub converged: bool,
    pub lr_chi2_vs_linear: f64,
    /// Set when a slightly negative LR statistic was clamped to zero.
    pub lr_clamped_negative: bool,
    pub iterations: usize,
    /// Log variance components at the reported optimum, for diagnostics.
    pub log_sigma2: [f64; 4],
    pub random_effects: RandomEffects,
}

impl ModelFit {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<ModelFit> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn coef(&self, name: &str) -> Option<&FixedEffectEstimate> {
        self.beta.iter().find(|b| b.name == name)
    }
}

fn boundary(log_s: f64) -> bool {
    log_s <= LOG_VAR_LO + 1e-6
}

/// Numerical Hessian of the profiled deviance over the interior log-variance
/// coordinates at the optimum; returns per-coordinate SEs of log sigma2.
fn log_scale_ses(profile: &ProfiledDeviance, log_opt: &[f64; 4]) -> Result<[Option<f64>; 4]> {
    let interior: Vec<usize> = (0..4).filter(|&i| !boundary(log_opt[i])).collect();
    let mut ses: [Option<f64>; 4] = [None, None, None, None];
    if interior.is_empty() {
        return Ok(ses);
    }
    let h = 1e-3;
    let m = interior.len();
    let mut hess = DMatrix::zeros(m, m);
    let f0 = profile.deviance(log_opt)?;
    let at = |shifts: &[(usize, f64)]| -> Result<f64> {
        let mut x = *log_opt;
        for &(i, delta) in shifts {
            x[i] += delta;
        }
        profile.deviance(&x)
    };
    for (a, &i) in interior.iter().enumerate() {
        let fp = at(&[(i, h)])?;
        let fm = at(&[(i, -h)])?;
        hess[(a, a)] = (fp - 2.0 * f0 + fm) / (h * h);
        for (b, &j) in interior.iter().enumerate().skip(a + 1) {
            let fpp = at(&[(i, h), (j, h)])?;
            let fpm = at(&[(i, h), (j, -h)])?;
            let fmp = at(&[(i, -h), (j, h)])?;
            let fmm = at(&[(i, -h), (j, -h)])?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    // Information of the log-likelihood is half the deviance Hessian, so
    // cov(log sigma2) = 2 * H^{-1}.
    if let Some(chol) = Cholesky::new(hess) {
        let cov = chol.inverse() * 2.0;
        for (a, &i) in interior.iter().enumerate() {
            let v = cov[(a, a)];
            if v.is_finite() && v > 0.0 {
                ses[i] = Some(v.sqrt());
            }
        }
    }
    Ok(ses)
}

fn component(estimate: f64, se_log: Option<f64>, share: f64, cum: f64, at_bound: bool) -> VarianceComponent {
    let (se, ci95) = match (se_log, at_bound) {
        (Some(sl), false) => (
            Some(estimate * sl),
            Some([
                estimate * (-Z_95 * sl).exp(),
                estimate * (Z_95 * sl).exp(),
            ]),
        ),
        _ => (None, None),
    };
    VarianceComponent {
        estimate,
        se,
        share,
        cumulative_share: cum,
        ci95,
        at_boundary: at_bound,
    }
}

fn ols_loglik_from_stats(xtx: &DMatrix<f64>, xty: &DVector<f64>, yty: f64, n: usize) -> Result<f64> {
    let beta = Cholesky::new(xtx.clone())
        .ok_or(Error::RankDeficientFixed)?
        .solve(xty);
    let n = n as f64;
    let rss = yty - beta.dot(xty);
    let sigma2 = rss / n;
    if sigma2 <= 0.0 {
        return Err(Error::DegenerateSeries("OLS residuals are exactly zero".into()));
    }
    Ok(-0.5 * n * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0))
}

/// Ordinary least squares log-likelihood with the same fixed effects,
/// used as the reference for the LR test.
pub fn ols_loglik(design: &Design) -> Result<f64> {
    let y = DVector::from_column_slice(&design.y);
    let xtx = design.x.transpose() * &design.x;
    let xty = design.x.transpose() * &y;
    ols_loglik_from_stats(&xtx, &xty, y.dot(&y), design.n_rows())
}

fn lr_statistic(loglik_mixed: f64, loglik_ols: f64) -> (f64, bool) {
    let lr = 2.0 * (loglik_mixed - loglik_ols);
    if lr < 0.0 {
        (0.0, true)
    } else {
        (lr, false)
    }
}

/// Maximum-likelihood fit. The profiled deviance is minimized over log
/// variance components in [-30, 10]; convergence is a relative deviance
/// change below 1e-8 across an iteration. After 500 iterations the best
/// point is returned flagged as non-converged.
pub fn fit_ml(design: &Design, spec: &ModelSpec) -> Result<ModelFit> {
    let profile = ProfiledDeviance::new(design)?;
    let stats = profile.stats();

    // Starting point: equal split of the response variance, computed from
    // the order-canonical sums so row permutations cannot perturb the path.
    let var_y = profile.response_variance().max(1e-12);
    let start = [(var_y / 4.0).ln().clamp(LOG_VAR_LO, LOG_VAR_HI); 4];

    // Fail fast on rank-deficient fixed effects.
    let sigma_start: Sigma2 = start.map(f64::exp);
    evaluate(stats, &sigma_start, false)?;

    // Once the design is validated, evaluation failures at extreme points
    // visited by the optimizer mean "infinitely bad", not "abort".
    let objective = |x: &[f64]| -> Result<f64> {
        let arr = [x[0], x[1], x[2], x[3]];
        Ok(profile.deviance(&arr).unwrap_or(f64::INFINITY))
    };

    let lo = [LOG_VAR_LO; 4];
    let hi = [LOG_VAR_HI; 4];
    let result: MinimizeResult = bfgs_box(objective, &start, &lo, &hi, MAX_ITER, GRAD_TOL)?;

    if !result.f.is_finite() {
        return Err(Error::SingularFactorization(
            "optimizer returned a non-finite deviance".into(),
        ));
    }
    let mut log_vec = result.x.clone();
    let mut dev_opt = result.f;

    // Likelihood-flat components snap to the floor so boundaries are
    // reported canonically, then the interior coordinates get a Newton
    // polish toward the finite-difference noise floor.
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
    let eval = profile.evaluate_full(&sigma2)?;

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let beta: Vec<FixedEffectEstimate> = (0..stats.p)
        .map(|c| {
            let coef = eval.beta[c];
            let se = eval.beta_cov[(c, c)].max(0.0).sqrt();
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

    let se_log = log_scale_ses(&profile, &log_opt)?;
    let total: f64 = sigma2.iter().sum();
    let shares = sigma2.map(|s| s / total);
    let mut cum = 0.0;
    let mut comps = Vec::with_capacity(4);
    for i in 0..4 {
        cum += shares[i];
        comps.push(component(sigma2[i], se_log[i], shares[i], cum, boundary(log_opt[i])));
    }
    let components = VarianceComponents {
        hour: comps[0].clone(),
        day: comps[1].clone(),
        month_year: comps[2].clone(),
        residual: comps[3].clone(),
    };

    let random_effects = {
        let table = |f: usize| -> BTreeMap<String, f64> {
            design.factors[f]
                .labels
                .iter()
                .cloned()
                .zip(eval.blups[f].iter().copied())
                .collect()
        };
        RandomEffects {
            hour_of_day: table(0),
            date: table(1),
            month_year: table(2),
        }
    };

    let (lr, lr_clamped) = lr_statistic(
        eval.loglik,
        ols_loglik_from_stats(&stats.xtx, &stats.xty, stats.yty, stats.n)?,
    );

    Ok(ModelFit {
        spec: spec.clone(),
        beta,
        components,
        loglik: eval.loglik,
        n_obs: design.n_rows(),
        converged: result.converged,
        lr_chi2_vs_linear: lr,
        lr_clamped_negative: lr_clamped,
        iterations: result.iterations,
        log_sigma2: log_opt,
        random_effects,
    })
}

/// 2 (loglik_mixed - loglik_ols) with the same fixed effects; negative values
/// from boundary noise clamp to zero.
pub fn lr_test_vs_linear(fit: &ModelFit, design: &Design) -> Result<f64> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    Ok(lr_statistic(fit.loglik, ols_loglik(design)?).0)
}

/// Conditional predictions: fixed part plus the BLUPs of all three random
/// intercepts for each row's groups.
pub fn predict_conditional(fit: &ModelFit, design: &Design) -> Result<Vec<f64>> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    if design.x_names.len() != fit.beta.len()
        || design.x_names.iter().zip(&fit.beta).any(|(n, b)| *n != b.name)
    {
        return Err(Error::InvalidConfig(format!(
            "design fixed effects {:?} do not match the fit's {:?}",
            design.x_names,
            fit.beta.iter().map(|b| b.name.clone()).collect::<Vec<_>>()
        )));
    }
    let coefs: Vec<f64> = fit.beta.iter().map(|b| b.coef).collect();

    // Resolve each factor's group ids against the fit's BLUP tables once.
    let mut lookups: Vec<Vec<f64>> = Vec::with_capacity(3);
    for f in 0..3 {
        let table = fit.random_effects.table(f);
        let mut per_group = Vec::with_capacity(design.factors[f].n_groups());
        for label in &design.factors[f].labels {
            let u = table.get(label).ok_or_else(|| Error::GroupUnseen {
                factor: FACTOR_NAMES[f].to_string(),
                label: label.clone(),
            })?;
            per_group.push(*u);
        }
        lookups.push(per_group);
    }

    let mut out = Vec::with_capacity(design.n_rows());
    for i in 0..design.n_rows() {
        let mut yhat = 0.0;
        for c in 0..design.n_fixed() {
            yhat += design.x[(i, c)] * coefs[c];
        }
        for f in 0..3 {
            yhat += lookups[f][design.factors[f].index[i]];
        }
        out.push(yhat);
    }
    Ok(out)
}

/// Closed-form ML estimates for a balanced one-way layout: G groups of m
/// observations each. Returns (sigma2_group, sigma2_resid).
pub fn one_way_ml_closed_form(y: &[f64], groups: &[usize], n_groups: usize) -> (f64, f64) {
    let n = y.len() as f64;
    let m = n / n_groups as f64;
    let grand = y.iter().sum::<f64>() / n;
    let mut group_means = vec![0.0; n_groups];
    for (v, &g) in y.iter().zip(groups) {
        group_means[g] += v / m;
    }
    let ssw: f64 = y
        .iter()
        .zip(groups)
        .map(|(v, &g)| (v - group_means[g]).powi(2))
        .sum();
    let ssb_m: f64 = group_means.iter().map(|gm| m * (gm - grand).powi(2)).sum();
    let sigma_e = ssw / (n - n_groups as f64);
    let lambda = ssb_m / n_groups as f64;
    let sigma_g = ((lambda - sigma_e) / m).max(0.0);
    (sigma_g, sigma_e)
}
