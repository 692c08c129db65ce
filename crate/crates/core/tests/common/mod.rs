#![allow(dead_code)]

use gplm_bar::{BasisSpec, Dataset, Family, Problem};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

/// Layout of a small random problem.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub n: usize,
    pub p: usize,
    pub q_w: usize,
    /// Degree of the single sieve component; 0 for none.
    pub degree: usize,
}

/// Random dataset with standard-normal `X`, binary `W`, uniform `Z` on
/// `[0, 1]` and a response drawn from `family` with modest effects.
pub fn random_problem(family: Family, shape: Shape, seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Shape { n, p, q_w, degree } = shape;
    let x = Array2::from_shape_simple_fn((n, p), || rng.sample::<f64, _>(StandardNormal));
    let w = Array2::from_shape_simple_fn((n, q_w), || if rng.random_bool(0.5) { 1.0 } else { 0.0 });
    let q_z = usize::from(degree > 0);
    let z = Array2::from_shape_simple_fn((n, q_z), || rng.random::<f64>());
    let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-0.6..0.6)).collect();
    let alpha: Vec<f64> = (0..q_w).map(|_| rng.random_range(-0.5..0.5)).collect();
    let y = (0..n)
        .map(|i| {
            let mut eta = 0.2;
            eta += x.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>();
            eta += w.row(i).iter().zip(&alpha).map(|(a, b)| a * b).sum::<f64>();
            if q_z == 1 {
                eta += (std::f64::consts::PI * z[[i, 0]]).sin() - 0.5;
            }
            match family {
                Family::Logistic => f64::from(u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp()))),
                Family::Poisson => Poisson::new(eta.exp()).unwrap().sample(&mut rng),
            }
        })
        .collect();
    let specs: Vec<BasisSpec> = if q_z == 1 {
        vec![BasisSpec::new(degree, 0.0, 1.0).unwrap()]
    } else {
        vec![]
    };
    let data = Dataset::new(y, x, w, z).unwrap();
    Problem::from_dataset(&data, &specs, family).unwrap()
}

/// Dense copy of the design, one row per observation.
pub fn dense_design(problem: &Problem) -> Array2<f64> {
    let (n, k) = (problem.n(), problem.design.ncols());
    let mut m = Array2::zeros((n, k));
    for j in 0..k {
        for (i, v) in problem.design.column(j).iter().enumerate() {
            m[[i, j]] = *v;
        }
    }
    m
}

/// Log-likelihood written out from scratch, without the crate's helpers.
pub fn oracle_log_likelihood(family: Family, y: &[f64], eta: &[f64]) -> f64 {
    y.iter()
        .zip(eta)
        .map(|(&y, &e)| match family {
            Family::Logistic => y * e - (e.max(0.0) + (-e.abs()).exp().ln_1p()),
            Family::Poisson => y * e - e.exp(),
        })
        .sum()
}

pub fn oracle_mean(family: Family, eta: f64) -> f64 {
    match family {
        Family::Logistic => 1.0 / (1.0 + (-eta).exp()),
        Family::Poisson => eta.exp(),
    }
}
