//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::f64::consts::PI;

use dctmars::dct::{reconstruct, CoeffSelection, CoeffVector, Reconstructor, SpatialField};
use dctmars::design::{build_training_inputs, coarse_center, DesignSpec};
use dctmars::emulator::{BasisFunction, Scaling, TrainingSet};
use dctmars::forward::{simulate_dataset, ForwardModel, ToyWatercut, Transform};
use dctmars::posterior::{CoarseData, FineObs, Hyperparams, ObservationSet};
use dctmars::sampler::{ChainConfig, ChainInit};
use dctmars::upscale::{block_average, CoarseGeometry};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss-Legendre rule on `[a, b]`.
pub fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((lo + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
        }
    }
    out
}

/// One-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Log marginal likelihood of `z` under `z ~ N(B beta, sigma2 S)`,
/// `beta ~ N(0, alpha sigma2 I)`, `sigma2 ~ IG(a, b)`, computed by brute-force
/// quadrature over `(beta, ln sigma2)` with every normalizing constant kept.
pub fn brute_force_log_marginal(b: &DMatrix<f64>, s: &[f64], z: &[f64], alpha: f64, a: f64, bz: f64) -> f64 {
    let n = z.len();
    let m = b.ncols();
    assert!(m <= 2, "quadrature oracle supports m <= 2");
    // Quadrature window for beta: centre and spread of the conditional
    // Gaussian, computed directly from the normal equations.
    let mut prec = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for i in 0..n {
        for j in 0..m {
            rhs[j] += b[(i, j)] * z[i] / s[i];
            for k in 0..m {
                prec[(j, k)] += b[(i, j)] * b[(i, k)] / s[i];
            }
        }
    }
    for j in 0..m {
        prec[(j, j)] += 1.0 / alpha;
    }
    let cov = prec.clone().try_inverse().expect("invertible precision");
    let centre = &cov * &rhs;
    let log_det_s: f64 = s.iter().map(|v| v.ln()).sum();

    let log_joint = |beta: &[f64], sigma2: f64| -> f64 {
        let mut sq = 0.0;
        for i in 0..n {
            let mut fit = 0.0;
            for j in 0..m {
                fit += b[(i, j)] * beta[j];
            }
            sq += (z[i] - fit).powi(2) / s[i];
        }
        let bb: f64 = beta.iter().map(|v| v * v).sum();
        let lik = -0.5 * n as f64 * (2.0 * PI * sigma2).ln() - 0.5 * log_det_s - sq / (2.0 * sigma2);
        let prior_b = -0.5 * m as f64 * (2.0 * PI * alpha * sigma2).ln() - bb / (2.0 * alpha * sigma2);
        let prior_s = a * bz.ln() - ln_gamma(a) - (a + 1.0) * sigma2.ln() - bz / sigma2;
        lik + prior_b + prior_s
    };

    // Integrate over u = ln sigma2 (Jacobian sigma2) on a wide window.
    let s_rule = composite_rule(-30.0, 12.0, 60, 10);
    let beta_rule = composite_rule(-10.0, 10.0, 8, 8);
    let mut inner = Vec::with_capacity(s_rule.len());
    for &(u, wu) in &s_rule {
        let sigma2 = u.exp();
        let sd: Vec<f64> = (0..m).map(|j| (sigma2 * cov[(j, j)]).sqrt()).collect();
        let mut acc = Vec::new();
        match m {
            1 => {
                for &(t, wt) in &beta_rule {
                    let beta = [centre[0] + t * sd[0]];
                    acc.push(log_joint(&beta, sigma2) + (wt * sd[0]).ln());
                }
            }
            _ => {
                for &(t0, w0) in &beta_rule {
                    for &(t1, w1) in &beta_rule {
                        let beta = [centre[0] + t0 * sd[0], centre[1] + t1 * sd[1]];
                        acc.push(log_joint(&beta, sigma2) + (w0 * sd[0] * w1 * sd[1]).ln());
                    }
                }
            }
        }
        inner.push(log_sum_exp(&acc) + u + wu.ln());
    }
    log_sum_exp(&inner)
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Friedman's 10-dimensional benchmark (five active inputs).
pub fn friedman(n: usize, noise_sd: f64, rng: &mut impl Rng) -> (DMatrix<f64>, Vec<f64>) {
    let x = DMatrix::from_fn(n, 10, |_, _| rng.random::<f64>());
    let noise = Normal::new(0.0, noise_sd).unwrap();
    let y = (0..n)
        .map(|i| {
            10.0 * (PI * x[(i, 0)] * x[(i, 1)]).sin()
                + 20.0 * (x[(i, 2)] - 0.5).powi(2)
                + 10.0 * x[(i, 3)]
                + 5.0 * x[(i, 4)]
                + noise.sample(rng)
        })
        .collect();
    (x, y)
}

/// Desk-scale calibration problem: a 16x16 reference field in the span of
/// Triangle(4), its 4x4 coarse block averages, 4 fine observations, a
/// 20-field x 10-pvi simulator design through the toy model, and 20
/// observed outputs of the reference field.
pub struct CalibrationProblem {
    pub truth: CoeffVector,
    pub reference: SpatialField,
    pub theta_obs: CoeffVector,
    pub data: TrainingSet,
    pub obs: ObservationSet,
    pub hp: Hyperparams,
    pub chain: ChainConfig,
    pub init: ChainInit,
}

pub fn reference_field(dims: (usize, usize)) -> SpatialField {
    let (rows, cols) = dims;
    SpatialField::from_fn(rows, cols, |r, c| {
        let x = (c as f64 + 0.5) / cols as f64;
        let y = (r as f64 + 0.5) / rows as f64;
        0.9 * (-((x - 0.3).powi(2) + (y - 0.65).powi(2)) / 0.08).exp() - 0.6 * (y - 0.2) + 0.3 * (2.5 * x).cos()
    })
    .unwrap()
}

pub fn calibration_problem(seed: u64) -> CalibrationProblem {
    let dims = (16, 16);
    let sel = CoeffSelection::Triangle(4);
    let full = reference_field(dims);
    let truth = dctmars::dct::select_coeffs(&dctmars::dct::dct2_forward(&full), sel).unwrap();
    let reference = reconstruct(&truth).unwrap();
    let geometry = CoarseGeometry::over(dims, 4, 4).unwrap();
    let coarse = block_average(&reference, geometry.factor_r, geometry.factor_c).unwrap();
    let theta_obs = coarse_center(&coarse, dims, sel).unwrap();

    let spec = DesignSpec {
        n_candidates: 200,
        n_select: 20,
        gamma: None,
        pvi_grid: (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect(),
        seed,
    };
    let design = build_training_inputs(&spec, &coarse, dims, sel).unwrap();
    let model = ToyWatercut::default();
    let recon = Reconstructor::new(sel, dims).unwrap();
    let sims = simulate_dataset(&design.deck, &recon, &model, Transform::Logit, 0.0, seed).unwrap();
    let x_sim = DMatrix::from_fn(design.deck.len(), 1 + sel.len(), |i, c| {
        if c == 0 {
            design.deck[i].pvi
        } else {
            design.deck[i].theta[c - 1]
        }
    });
    let z_sim: Vec<f64> = sims.iter().map(|s| s.transformed).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let pvi_obs: Vec<f64> = (0..20).map(|i| (i as f64 + 0.5) / 20.0).collect();
    let z_r: Vec<f64> = pvi_obs
        .iter()
        .map(|&p| Transform::Logit.apply(model.run(&reference, &[p]).unwrap()).unwrap() + noise.sample(&mut rng))
        .collect();
    let x_r = DMatrix::from_column_slice(20, 1, &pvi_obs);
    let fine: Vec<FineObs> = [(2, 3), (5, 12), (10, 6), (13, 13)]
        .iter()
        .map(|&(row, col)| FineObs {
            row,
            col,
            value: reference.get(row, col),
        })
        .collect();
    let obs = ObservationSet {
        z_r: z_r.clone(),
        x_r: x_r.clone(),
        coarse: Some(CoarseData::new(geometry, coarse.values().to_vec()).unwrap()),
        fine,
    };
    let scaling = Scaling::fit(&x_sim);
    let data = TrainingSet::with_observed(x_sim, z_sim, x_r, z_r, Some(&theta_obs.theta), 1, scaling).unwrap();
    let hp = Hyperparams {
        m_max: 40,
        ..Hyperparams::default()
    };
    let chain = ChainConfig {
        n_iter: 30_000,
        burn_in: 5_000,
        thin: 10,
        h: vec![0.05],
        seed,
        ..ChainConfig::default()
    };
    let init = ChainInit {
        state: dctmars::emulator::BmarsState::initial(),
        theta: Some(theta_obs.clone()),
    };
    CalibrationProblem {
        truth,
        reference,
        theta_obs,
        data,
        obs,
        hp,
        chain,
        init,
    }
}

pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

pub fn intercept_only() -> Vec<BasisFunction> {
    vec![BasisFunction::Intercept]
}
