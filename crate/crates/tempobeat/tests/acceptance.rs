//! Acceptance suite: every release criterion runs here at its stated
//! tolerance and prints one pass/fail line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

mod common;

use std::time::Instant;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};
use tempobeat::acf::{acf_at_lag, aggregate_daily, correlogram_preset, CorrelogramPreset};
use tempobeat::mlm::{
    build_design, fit_ml, one_way_ml_closed_form, oracle_fit_dense, predict_conditional,
    Design, ModelSpec, ProfiledDeviance,
};
use tempobeat::rmsd::{full_report, recommend, rmsd};
use tempobeat::series::{flag_anomalies, standardize, weekday_from_index};
use tempobeat::synth::{generate_proxy_pair, generate_series, AnnualCycle, SynthConfig};

fn criterion(n: u32, desc: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n:02} {status}: {desc} [{detail}]");
    assert!(pass, "criterion {n:02} FAILED: {desc} [{detail}]");
}

fn jan2018() -> NaiveDate {
    NaiveDate::from_ymd_opt(2018, 1, 1).unwrap()
}

#[test]
fn criterion_01_variance_share_recovery() {
    let started = Instant::now();
    let config = SynthConfig::realistic(jan2018(), 17, 20180101);
    let (dataset, truth) = generate_series(&config).unwrap();
    let design = build_design(&dataset, &ModelSpec::empty()).unwrap();
    let fit = fit_ml(&design, &ModelSpec::empty()).unwrap();
    assert!(fit.converged, "empty-model fit did not converge");

    let shares = fit.components.shares();
    let mut worst = 0.0f64;
    for (got, want) in shares.iter().zip(truth.shares) {
        worst = worst.max((got - want).abs());
    }
    let elapsed = started.elapsed().as_secs_f64();
    criterion(
        1,
        "17-month empty-model fit recovers the configured shares within +/-0.02",
        worst <= 0.02 && elapsed < 60.0,
        &format!(
            "n={}, worst share error {worst:.4}, {elapsed:.1}s (shares {shares:?})",
            dataset.n_rows()
        ),
    );
}

#[test]
fn criterion_02_oracle_equivalence() {
    let shapes: [[usize; 3]; 4] = [[8, 10, 4], [6, 14, 3], [10, 6, 5], [12, 9, 2]];
    let mut worst_loglik = 0.0f64;
    let mut worst_component = 0.0f64;
    let mut worst_pred = 0.0f64;
    for seed in 0..20u64 {
        let q = shapes[seed as usize % shapes.len()];
        let n = 140 + (seed as usize * 3) % 61;
        let p_extra = (seed % 2) as usize * 2;
        let design = common::random_identified_design(1000 + seed, n, q, p_extra);
        let spec = ModelSpec::empty();
        let fit = fit_ml(&design, &spec).unwrap();
        let oracle = oracle_fit_dense(&design, &spec).unwrap();
        assert!(fit.converged, "seed {seed}: fit did not converge");

        worst_loglik = worst_loglik.max((fit.loglik - oracle.loglik).abs());
        for (a, b) in fit
            .components
            .estimates()
            .iter()
            .zip(oracle.components.estimates())
        {
            worst_component = worst_component.max((a - b).abs() / b.abs().max(1e-300));
        }
        let pa = predict_conditional(&fit, &design).unwrap();
        let pb = predict_conditional(&oracle, &design).unwrap();
        for (a, b) in pa.iter().zip(&pb) {
            worst_pred = worst_pred.max((a - b).abs());
        }
    }
    criterion(
        2,
        "profiled fit matches the dense oracle on 20 seeded designs",
        worst_loglik <= 1e-6 && worst_component <= 1e-4 && worst_pred <= 1e-6,
        &format!(
            "max |dloglik| {worst_loglik:.2e}, max rel component {worst_component:.2e}, max |dpred| {worst_pred:.2e}"
        ),
    );
}

#[test]
fn criterion_03_optimum_gradient_check() {
    let mut designs: Vec<(String, Design)> = Vec::new();
    let config = SynthConfig::realistic(jan2018(), 6, 33);
    let (dataset, _) = generate_series(&config).unwrap();
    designs.push((
        "6-month empty".into(),
        build_design(&dataset, &ModelSpec::empty()).unwrap(),
    ));
    let config = SynthConfig::realistic(jan2018(), 6, 34).with_standard_events(1.0);
    let (dataset, _) = generate_series(&config).unwrap();
    designs.push((
        "6-month full".into(),
        build_design(&dataset, &ModelSpec::full(&dataset)).unwrap(),
    ));
    for seed in 0..5u64 {
        designs.push((
            format!("tiny #{seed}"),
            common::random_identified_design(500 + seed, 180, [8, 12, 4], 1),
        ));
    }

    let mut worst = 0.0f64;
    let mut worst_name = String::new();
    for (name, design) in &designs {
        let spec = ModelSpec::empty();
        let fit = fit_ml(design, &spec).unwrap();
        assert!(fit.converged, "{name}: fit did not converge");
        let profile = ProfiledDeviance::new(design).unwrap();
        let grad = common::fd_gradient(
            |x| profile.deviance(x).unwrap(),
            &fit.log_sigma2,
            1e-5,
        );
        for g in grad {
            if g.abs() > worst {
                worst = g.abs();
                worst_name = name.clone();
            }
        }
    }
    criterion(
        3,
        "finite-difference gradient of the profiled deviance vanishes at every optimum",
        worst < 1e-4,
        &format!("max |gradient| {worst:.2e} (at {worst_name})"),
    );
}

#[test]
fn criterion_04_fixed_effect_recovery() {
    let mut covered_religious = 0;
    let mut covered_secular = 0;
    let reps = 20;
    for rep in 0..reps {
        let config = SynthConfig::realistic(jan2018(), 6, 40_000 + rep).with_standard_events(1.0);
        let (dataset, truth) = generate_series(&config).unwrap();
        let design = build_design(&dataset, &ModelSpec::full(&dataset)).unwrap();
        let fit = fit_ml(&design, &ModelSpec::full(&dataset)).unwrap();
        assert!(fit.converged, "rep {rep}: full-model fit did not converge");

        for (name, counter) in [
            ("religious_holiday", &mut covered_religious),
            ("secular_holiday", &mut covered_secular),
        ] {
            let truth_value = truth.effects_z[name];
            let estimate = fit.coef(name).unwrap();
            if estimate.ci95[0] <= truth_value && truth_value <= estimate.ci95[1] {
                *counter += 1;
            }
        }
    }
    criterion(
        4,
        "95% Wald CIs cover injected holiday effects in >= 17/20 replications",
        covered_religious >= 17 && covered_secular >= 17,
        &format!("religious {covered_religious}/20, secular {covered_secular}/20"),
    );
}

#[test]
fn criterion_05_one_way_closed_form() {
    // The two padding factors are balanced-crossed with the active one, and
    // the noise is centered within their groups so ML pins them at the floor
    // exactly and the three-factor fit reduces to the one-way problem.
    let mut worst = 0.0f64;
    for (seed, groups, per_group, sg, se) in [
        (71u64, 10usize, 24usize, 0.9, 0.4),
        (72, 16, 12, 0.3, 0.8),
        (73, 6, 48, 1.5, 0.2),
    ] {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let n = groups * per_group;
        let effects: Vec<f64> = (0..groups)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * sg
            })
            .collect();
        let mut noise: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * se
            })
            .collect();
        let b_of = |i: usize| (i % per_group) % 2;
        let c_of = |i: usize| (i % per_group) % 3;
        for (n_groups, assign) in [(2usize, &b_of as &dyn Fn(usize) -> usize), (3, &c_of)] {
            let mut sums = vec![0.0; n_groups];
            let mut counts = vec![0usize; n_groups];
            for i in 0..n {
                sums[assign(i)] += noise[i];
                counts[assign(i)] += 1;
            }
            for i in 0..n {
                noise[i] -= sums[assign(i)] / counts[assign(i)] as f64;
            }
        }

        let mut y = Vec::with_capacity(n);
        let mut labels: [Vec<String>; 3] = std::array::from_fn(|_| Vec::with_capacity(n));
        for i in 0..n {
            let g = i / per_group;
            y.push(0.7 + effects[g] + noise[i]);
            labels[0].push(format!("g{g:02}"));
            labels[1].push(format!("b{}", b_of(i)));
            labels[2].push(format!("c{}", c_of(i)));
        }
        let x = nalgebra::DMatrix::from_element(n, 1, 1.0);
        let design = Design::from_parts(y.clone(), x, vec!["constant".into()], labels).unwrap();
        let fit = fit_ml(&design, &ModelSpec::empty()).unwrap();
        assert!(
            fit.components.day.at_boundary && fit.components.month_year.at_boundary,
            "padding factors must stay inert"
        );
        let (cf_group, cf_resid) =
            one_way_ml_closed_form(&y, &design.factors[0].index, groups);
        worst = worst.max((fit.components.hour.estimate - cf_group).abs());
        worst = worst.max((fit.components.residual.estimate - cf_resid).abs());
    }
    criterion(
        5,
        "balanced one-way layouts match analytic ML estimates within 1e-6",
        worst <= 1e-6,
        &format!("max |difference| {worst:.2e}"),
    );
}

#[test]
fn criterion_06_acf_periodicity() {
    // Weekly structure at signal:noise 5:1 over more than 180 days.
    let mut config = SynthConfig::realistic(jan2018(), 8, 60);
    config.sigma2_month_year = 0.0;
    config.sigma2_day = 0.002;
    config.sigma2_resid = 0.05;
    let daily_noise_sd = (576.0 * config.sigma2_day + 24.0 * config.sigma2_resid).sqrt();
    let pattern = [0.25, 0.05, -0.10, -0.30, 0.10, 0.55, 0.40];
    let mean: f64 = pattern.iter().sum::<f64>() / 7.0;
    let sd = (pattern.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / 7.0).sqrt();
    let target_sd = 5.0 * daily_noise_sd / 24.0;
    config.weekday_effects = pattern.map(|p| (p - mean) * target_sd / sd);
    let (dataset, _) = generate_series(&config).unwrap();
    let daily = aggregate_daily(&dataset.observations()).unwrap();
    assert!(daily.z.len() >= 180);
    let acf = correlogram_preset(&daily.z, CorrelogramPreset::DailyWithinMonth, None).unwrap();
    let value_at = |lag: usize| acf.r[acf.lags.iter().position(|&l| l == lag).unwrap()];
    let multiples = [7usize, 14, 21, 28];
    let min_multiple = multiples.iter().map(|&l| value_at(l)).fold(f64::MAX, f64::min);
    let max_other = acf
        .lags
        .iter()
        .zip(&acf.r)
        .filter(|(l, _)| **l <= 28 && !multiples.contains(l))
        .map(|(_, &r)| r)
        .fold(f64::MIN, f64::max);
    let weekly_ok = min_multiple > max_other;

    // Annual seasonal component: the week-step correlogram bottoms out near
    // lag 26 weeks. Two full annual periods keep the finite-window
    // correlogram close to the cosine it estimates.
    let mut config = SynthConfig::realistic(jan2018(), 25, 61);
    config.sigma2_month_year = 0.0;
    config.sigma2_day = 0.002;
    config.sigma2_resid = 0.05;
    config.weekday_effects = pattern.map(|p| (p - mean) * 0.1 / sd);
    config.annual_cycle = Some(AnnualCycle {
        amplitude: 0.21,
        period_days: 365.25,
        phase: 0.4,
    });
    let (dataset, _) = generate_series(&config).unwrap();
    let daily = aggregate_daily(&dataset.observations()).unwrap();
    let acf = correlogram_preset(&daily.z, CorrelogramPreset::DailyWeekStep, None).unwrap();
    let (argmin_lag, _) = acf
        .lags
        .iter()
        .zip(&acf.r)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let annual_ok = (*argmin_lag as i64 - 182).abs() <= 21;

    criterion(
        6,
        "weekly lags dominate <=28d and the week-step minimum sits at ~26 weeks",
        weekly_ok && annual_ok,
        &format!(
            "min weekly-multiple r {min_multiple:.3} vs max other {max_other:.3}; argmin lag {argmin_lag}d"
        ),
    );
}

#[test]
fn criterion_07_rmsd_consistency() {
    // Conditional RMSD of the empty model tracks the residual sd.
    let config = SynthConfig::realistic(jan2018(), 17, 20180101);
    let (dataset, _) = generate_series(&config).unwrap();
    let design = build_design(&dataset, &ModelSpec::empty()).unwrap();
    let fit = fit_ml(&design, &ModelSpec::empty()).unwrap();
    let pred = predict_conditional(&fit, &design).unwrap();
    let overall = rmsd(&design.y, &pred).unwrap();
    let resid_sd = fit.components.residual.estimate.sqrt();
    let ratio = overall / resid_sd;
    let part1 = (ratio - 1.0).abs() <= 0.10;

    // Event-laden data orders the three models.
    let mut config = SynthConfig::realistic(jan2018(), 12, 62).with_standard_events(5.0);
    config.event_hour_shape = Some(SynthConfig::diurnal_event_shape());
    let (dataset, _) = generate_series(&config).unwrap();
    let mut overalls = Vec::new();
    for spec in [
        ModelSpec::empty(),
        ModelSpec::full(&dataset),
        ModelSpec::restricted(),
    ] {
        let design = build_design(&dataset, &spec).unwrap();
        let fit = fit_ml(&design, &spec).unwrap();
        assert!(fit.converged, "{}: fit did not converge", spec.label);
        let pred = predict_conditional(&fit, &design).unwrap();
        overalls.push(rmsd(&design.y, &pred).unwrap());
    }
    let (empty, full, restricted) = (overalls[0], overalls[1], overalls[2]);
    let part2 = restricted <= full && full <= empty;

    criterion(
        7,
        "empty-model RMSD ~ residual sd and RMSD(restricted) <= RMSD(full) <= RMSD(empty)",
        part1 && part2,
        &format!(
            "rmsd/resid_sd {ratio:.3}; restricted {restricted:.4} <= full {full:.4} <= empty {empty:.4}"
        ),
    );
}

#[test]
fn criterion_08_recommendation_correctness() {
    let mut hits = 0;
    let reps = 20;
    for rep in 0..reps {
        let mut config = SynthConfig::realistic(jan2018(), 6, 80_000 + rep);
        config.weekday_noise_multipliers[3] = 0.5; // Thursday
        config.hour_noise_multipliers[11] = 0.5; // 11:00
        let (dataset, _) = generate_series(&config).unwrap();
        let design = build_design(&dataset, &ModelSpec::empty()).unwrap();
        let fit = fit_ml(&design, &ModelSpec::empty()).unwrap();
        let pred = predict_conditional(&fit, &design).unwrap();
        let report = full_report("empty", &design.y, &pred, &dataset.keys).unwrap();
        let rec = recommend(&[&report], 4).unwrap();
        let best = rec.best_slot();
        if best.weekday == 3 && best.hour == 11 {
            hits += 1;
        }
        assert_eq!(weekday_from_index(3), chrono::Weekday::Thu);
    }
    criterion(
        8,
        "recommend returns (Thursday, 11:00) in >= 18/20 seeded replications",
        hits >= 18,
        &format!("{hits}/20 hits"),
    );
}

#[test]
fn criterion_09_proxy_validation() {
    let config = SynthConfig::realistic(jan2018(), 3, 90);
    let (sizes, counts) = generate_proxy_pair(&config, 0.01).unwrap();
    let r2 = tempobeat::series::proxy_r2(&sizes, &counts).unwrap();
    criterion(
        9,
        "1% relative proxy noise keeps R^2 at or above 0.99",
        r2 >= 0.99,
        &format!("R^2 = {r2:.5}"),
    );
}

#[test]
fn criterion_10_eq1_fidelity() {
    // Literal transcription of the estimator: truncated numerator over the
    // full-length denominator, all deviations from the series mean.
    fn reference(y: &[f64], h: usize) -> f64 {
        let n = y.len();
        let mut mean = 0.0;
        for t in 0..n {
            mean += y[t];
        }
        mean /= n as f64;
        let mut num = 0.0;
        for t in 0..n - h {
            num += (y[t] - mean) * (y[t + h] - mean);
        }
        let mut den = 0.0;
        for t in 0..n {
            den += (y[t] - mean) * (y[t] - mean);
        }
        num / den
    }

    let mut rng = ChaCha12Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let mut r0_exact = true;
    for _ in 0..100 {
        let n = 50 + rng.gen_range(0..200);
        let y: Vec<f64> = (0..n)
            .map(|_| {
                let u: f64 = StandardNormal.sample(&mut rng);
                u * 3.0 + 10.0
            })
            .collect();
        r0_exact &= acf_at_lag(&y, 0).unwrap() == 1.0;
        for h in [1usize, 2, 5, 7, 24] {
            if h < n {
                let got = acf_at_lag(&y, h).unwrap();
                worst = worst.max((got - reference(&y, h)).abs());
            }
        }
    }
    criterion(
        10,
        "estimator matches a literal transcription to 1e-12 and r_0 = 1 exactly",
        worst <= 1e-12 && r0_exact,
        &format!("max |difference| {worst:.2e}, r0 exact: {r0_exact}"),
    );
}

#[test]
fn criterion_11_anomaly_screening() {
    let config = SynthConfig::realistic(jan2018(), 17, 20180101);
    let (dataset, _) = generate_series(&config).unwrap();
    let mut obs = dataset.observations();
    let n = obs.len();

    // Five spikes at |z| = 5 on the raw scale, alternating sign.
    let base = standardize(&obs).unwrap();
    let spike_rows = [n / 7, 2 * n / 7, 3 * n / 7, 4 * n / 7, 6 * n / 7];
    for (k, &row) in spike_rows.iter().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        obs[row].value = base.mean + sign * 5.0 * base.sd;
    }

    let z = standardize(&obs).unwrap();
    let flagged = flag_anomalies(&z, 2.0);
    let spikes_recovered = spike_rows
        .iter()
        .all(|&row| flagged.iter().any(|(stamp, zv)| *stamp == obs[row].stamp && zv.abs() >= 4.0));

    let normal = Normal::new(0.0, 1.0).unwrap();
    let expected = 2.0 * normal.cdf(-2.0) * n as f64;
    let others = flagged.len() - spike_rows.len();
    let within_band =
        (others as f64) >= 0.7 * expected && (others as f64) <= 1.3 * expected;
    criterion(
        11,
        "k=2 screening recovers all injected spikes with a normal-tail flag rate",
        spikes_recovered && within_band,
        &format!(
            "spikes {}/5, other flags {others} vs expected {expected:.0} (+/-30%)",
            spike_rows
                .iter()
                .filter(|&&row| flagged.iter().any(|(s, _)| *s == obs[row].stamp))
                .count()
        ),
    );
}

#[test]
fn criterion_12_determinism() {
    let config = SynthConfig::realistic(jan2018(), 2, 7).with_standard_events(1.0);

    // Generated inputs are byte-identical across runs.
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    tempobeat::synth::generate_bundle(&config)
        .unwrap()
        .write_inputs(dir_a.path())
        .unwrap();
    tempobeat::synth::generate_bundle(&config)
        .unwrap()
        .write_inputs(dir_b.path())
        .unwrap();
    let mut inputs_equal = true;
    for file in ["observations.csv", "weather.csv", "events.csv", "truth.json"] {
        inputs_equal &= std::fs::read(dir_a.path().join(file)).unwrap()
            == std::fs::read(dir_b.path().join(file)).unwrap();
    }

    // The assembled bundle and a fit serialize identically across runs.
    let (dataset, _) = generate_series(&config).unwrap();
    tempobeat::ingest::write_bundle(&dataset, dir_a.path()).unwrap();
    let (dataset2, _) = generate_series(&config).unwrap();
    tempobeat::ingest::write_bundle(&dataset2, dir_b.path()).unwrap();
    let bundle_equal = std::fs::read(dir_a.path().join("dataset.csv")).unwrap()
        == std::fs::read(dir_b.path().join("dataset.csv")).unwrap()
        && std::fs::read(dir_a.path().join("dataset_meta.json")).unwrap()
            == std::fs::read(dir_b.path().join("dataset_meta.json")).unwrap();

    let design = build_design(&dataset, &ModelSpec::empty()).unwrap();
    let fit_a = fit_ml(&design, &ModelSpec::empty()).unwrap().to_json().unwrap();
    let design2 = build_design(&dataset2, &ModelSpec::empty()).unwrap();
    let fit_b = fit_ml(&design2, &ModelSpec::empty()).unwrap().to_json().unwrap();
    let fit_equal = fit_a == fit_b;

    criterion(
        12,
        "every stage is byte-reproducible for fixed seed and inputs",
        inputs_equal && bundle_equal && fit_equal,
        &format!("inputs {inputs_equal}, bundle {bundle_equal}, fit json {fit_equal}"),
    );
}
