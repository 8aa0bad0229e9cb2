//! Shared generators for the integration and acceptance suites.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use tempobeat::mlm::Design;

/// A random three-factor design with every group realized and group effects
/// rescaled to their exact configured variance, so all components are well
/// identified and away from the boundary.
pub fn random_identified_design(seed: u64, n: usize, q: [usize; 3], p_extra: usize) -> Design {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sigma2 = [
        0.4 + 0.8 * rng.gen::<f64>(),
        0.3 + 0.6 * rng.gen::<f64>(),
        0.3 + 0.6 * rng.gen::<f64>(),
    ];
    let resid_sd = 0.3 + 0.4 * rng.gen::<f64>();

    let effects: [Vec<f64>; 3] = std::array::from_fn(|f| {
        let draws: Vec<f64> = (0..q[f]).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / q[f] as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / q[f] as f64;
        let scale = (sigma2[f] / var).sqrt();
        draws.iter().map(|d| (d - mean) * scale).collect()
    });

    let p = 1 + p_extra;
    let mut x = DMatrix::zeros(n, p);
    let mut x_names = vec!["constant".to_string()];
    for c in 0..p_extra {
        x_names.push(format!("cov{c}"));
    }
    let mut labels: [Vec<String>; 3] = std::array::from_fn(|_| Vec::with_capacity(n));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for c in 0..p_extra {
            x[(i, c + 1)] = rng.gen::<f64>() * 2.0 - 1.0;
        }
        let mut mu = 0.2;
        for f in 0..3 {
            // The first q rows touch every group.
            let g = if i < q[f] { i % q[f] } else { rng.gen_range(0..q[f]) };
            labels[f].push(format!("g{g:03}"));
            mu += effects[f][g];
        }
        for c in 0..p_extra {
            mu += 0.3 * x[(i, c + 1)];
        }
        let e: f64 = StandardNormal.sample(&mut rng);
        y.push(mu + resid_sd * e);
    }
    Design::from_parts(y, x, x_names, labels).unwrap()
}

/// Central finite-difference gradient of a function of four log variances.
#[allow(dead_code)]
pub fn fd_gradient(f: impl Fn(&[f64; 4]) -> f64, x: &[f64; 4], h: f64) -> [f64; 4] {
    let mut g = [0.0; 4];
    for i in 0..4 {
        let mut up = *x;
        up[i] += h;
        let mut down = *x;
        down[i] -= h;
        g[i] = (f(&up) - f(&down)) / (2.0 * h);
    }
    g
}
