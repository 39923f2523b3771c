//! Log-density terms of the hierarchical posterior.
//!
//! Every function returns a log density up to an additive constant that is
//! fixed once the data and hyperparameters are fixed; only differences are
//! meaningful.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::dct::{reconstruct, CoeffVector, Reconstructor};
use crate::emulator::{count_basis_types, design_matrix_unchecked, BasisFunction, BmarsState, TrainingSet};
use crate::error::{Error, Result};
use crate::upscale::CoarseGeometry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    /// Inverse-gamma prior on the emulator error variance.
    pub a_z: f64,
    pub b_z: f64,
    /// Inverse-gamma prior on the observed-block variance multiplier.
    pub a_tau: f64,
    pub b_tau: f64,
    /// Coarse-data error variance prior (integrated out).
    pub a_c: f64,
    pub b_c: f64,
    /// Fine-scale observation error variance prior (integrated out).
    pub a_k: f64,
    pub b_k: f64,
    /// Prior on the DCT coefficient variance (integrated out).
    pub a_o: f64,
    pub b_o: f64,
    /// Coefficient prior `beta ~ N(0, alpha sigma_z2)`.
    pub alpha: f64,
    /// Truncated Poisson rate for the basis count.
    pub lambda: f64,
    pub m_max: usize,
    /// Maximum interaction order of a basis.
    pub max_degree: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            a_z: 0.1,
            b_z: 0.1,
            a_tau: 2.0,
            b_tau: 1.0,
            a_c: 0.01,
            b_c: 0.01,
            a_k: 0.01,
            b_k: 0.01,
            a_o: 0.01,
            b_o: 0.01,
            alpha: 1000.0,
            lambda: 10.0,
            m_max: 100,
            max_degree: 2,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("a_z", self.a_z),
            ("b_z", self.b_z),
            ("a_tau", self.a_tau),
            ("b_tau", self.b_tau),
            ("a_c", self.a_c),
            ("b_c", self.b_c),
            ("a_k", self.a_k),
            ("b_k", self.b_k),
            ("a_o", self.a_o),
            ("b_o", self.b_o),
            ("lambda", self.lambda),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "hyperparameter {name} must be > 0, got {v}"
                )));
            }
        }
        if !(self.alpha >= 1.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be >= 1, got {}", self.alpha)));
        }
        if self.m_max == 0 {
            return Err(Error::InvalidConfig("m_max must be >= 1".into()));
        }
        if self.max_degree == 0 {
            return Err(Error::InvalidConfig("max_degree must be >= 1".into()));
        }
        Ok(())
    }
}

/// Coarse-scale observations over a coarse grid, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseData {
    pub geometry: CoarseGeometry,
    pub values: Vec<f64>,
}

impl CoarseData {
    pub fn new(geometry: CoarseGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::InvalidGeometry(format!(
                "coarse grid has {} cells, got {} values",
                geometry.len(),
                values.len()
            )));
        }
        Ok(Self { geometry, values })
    }
}

/// A fine-scale field value observed at one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FineObs {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Field-side data: observed outputs plus coarse and fine field data.
#[derive(Debug, Clone, Default)]
pub struct ObservationSet {
    /// Observed outputs on the transformed scale.
    pub z_r: Vec<f64>,
    /// Known inputs for the observed outputs, `n_r x k1`, raw scale.
    pub x_r: DMatrix<f64>,
    pub coarse: Option<CoarseData>,
    pub fine: Vec<FineObs>,
}

impl ObservationSet {
    pub fn check(&self, field_dims: (usize, usize)) -> Result<()> {
        if self.x_r.nrows() != self.z_r.len() {
            return Err(Error::InvalidInput(
                "observed inputs and outputs differ in length".into(),
            ));
        }
        if let Some(c) = &self.coarse {
            c.geometry.check_fine(field_dims)?;
        }
        for o in &self.fine {
            if o.row >= field_dims.0 || o.col >= field_dims.1 {
                return Err(Error::InvalidInput(format!(
                    "fine observation at ({}, {}) outside {}x{} grid",
                    o.row, o.col, field_dims.0, field_dims.1
                )));
            }
        }
        Ok(())
    }
}

/// `-(a + N/2) ln(b + ||r||^2 / 2)`: the marginal of a Gaussian residual
/// vector of length `N` with its variance integrated against IG(a, b).
pub(crate) fn log_t_marginal(a: f64, b: f64, n: usize, sq_norm: f64) -> f64 {
    -(a + n as f64 / 2.0) * (b + 0.5 * sq_norm).ln()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

pub fn log_coarse(y_c: &CoarseData, theta: &CoeffVector, hp: &Hyperparams) -> Result<f64> {
    let lc = crate::upscale::upscale_from_theta(theta, &y_c.geometry)?;
    Ok(log_t_marginal(hp.a_c, hp.b_c, lc.len(), sq_dist(&y_c.values, &lc)))
}

pub fn log_fine(y_o: &[FineObs], theta: &CoeffVector, hp: &Hyperparams) -> Result<f64> {
    let (rows, cols) = theta.field_dims;
    if let Some(o) = y_o.iter().find(|o| o.row >= rows || o.col >= cols) {
        return Err(Error::InvalidInput(format!(
            "fine observation at ({}, {}) outside {rows}x{cols} grid",
            o.row, o.col
        )));
    }
    let field = reconstruct(theta)?;
    let sq: f64 = y_o.iter().map(|o| (o.value - field.get(o.row, o.col)).powi(2)).sum();
    Ok(log_t_marginal(hp.a_k, hp.b_k, y_o.len(), sq))
}

pub fn log_prior_theta(theta: &CoeffVector, hp: &Hyperparams) -> f64 {
    let sq: f64 = theta.theta.iter().map(|t| t * t).sum();
    log_t_marginal(hp.a_o, hp.b_o, theta.k2(), sq)
}

/// Pieces of the `(beta, sigma_z2)`-marginalized fit for one basis set.
pub struct MarginalFit {
    /// Cholesky factor of `A = B' S^-1 B + I / alpha`.
    pub chol: Cholesky<f64, Dyn>,
    /// Ridge solution `A^-1 B' S^-1 Z`.
    pub mean: DVector<f64>,
    /// `2 b_z + Z' S^-1 Z - (B' S^-1 Z)' A^-1 (B' S^-1 Z)`.
    pub d: f64,
    pub log_det_a: f64,
}

impl MarginalFit {
    pub fn new(b: &DMatrix<f64>, weights: &[f64], z: &DVector<f64>, alpha: f64, b_z: f64) -> Result<Self> {
        let m = b.ncols();
        let mut bw = b.clone();
        for (i, mut row) in bw.row_iter_mut().enumerate() {
            row *= weights[i];
        }
        let mut a = bw.transpose() * b;
        for j in 0..m {
            a[(j, j)] += 1.0 / alpha;
        }
        let r = bw.transpose() * z;
        let chol = Cholesky::new(a)
            .ok_or_else(|| Error::Degenerate("regularized Gram matrix is not positive definite".into()))?;
        let mean = chol.solve(&r);
        let log_det_a = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        // Residual form of Z'S^-1Z - r'A^-1 r; stays positive in floating point.
        let resid = z - b * &mean;
        let quad: f64 = resid.iter().zip(weights).map(|(e, w)| w * e * e).sum();
        let d = 2.0 * b_z + quad + mean.norm_squared() / alpha;
        if !(d > 0.0 && d.is_finite() && log_det_a.is_finite()) {
            return Err(Error::Degenerate(format!("marginal residual scale d = {d}")));
        }
        Ok(Self {
            chol,
            mean,
            d,
            log_det_a,
        })
    }
}

/// Log prior of the basis structure given `m`.
///
/// The count of non-intercept bases is scored as an unordered collection:
/// truncated Poisson `lambda^m / m!` on `m`, times `(m - 1)!` orderings, times
/// `1 / (N_I (2 n_knot)^J)` per basis for the type, knot and sign choices.
pub fn log_structure_prior(bases: &[BasisFunction], n_types: u64, n_knot: usize, hp: &Hyperparams) -> f64 {
    let m = bases.len() as f64;
    let per_type = (n_types as f64).ln();
    let per_factor = (2.0 * n_knot as f64).ln();
    let choices: f64 = bases[1..]
        .iter()
        .map(|b| per_type + b.degree() as f64 * per_factor)
        .sum();
    (m - 1.0) * hp.lambda.ln() - m.ln() - choices
}

/// Marginal log posterior of the basis structure with `beta` and `sigma_z2`
/// integrated out. The observed rows of `data` must already hold the
/// current theta.
pub fn log_pi1(bases: &[BasisFunction], tau_z: f64, data: &TrainingSet, hp: &Hyperparams) -> Result<f64> {
    let b = design_matrix_unchecked(bases, data.x());
    let n_types = count_basis_types(data.k1(), data.k2(), hp.max_degree)?;
    log_pi1_with(&b, bases, tau_z, data, n_types, hp).map(|(v, _)| v)
}

pub(crate) fn log_pi1_with(
    b: &DMatrix<f64>,
    bases: &[BasisFunction],
    tau_z: f64,
    data: &TrainingSet,
    n_types: u64,
    hp: &Hyperparams,
) -> Result<(f64, MarginalFit)> {
    let weights = data.inverse_scale_weights(tau_z);
    let fit = MarginalFit::new(b, &weights, data.z(), hp.alpha, hp.b_z)?;
    let m = bases.len() as f64;
    let n = data.n() as f64;
    let value = -0.5 * fit.log_det_a
        - (n / 2.0 + hp.a_z) * fit.d.ln()
        - 0.5 * data.n_r() as f64 * tau_z.ln()
        - 0.5 * m * hp.alpha.ln()
        + log_structure_prior(bases, n_types, data.knot_pool().nrows(), hp);
    Ok((value, fit))
}

/// Squared observed-block residual `||Z_r - B_r beta||^2` at a raw theta.
pub(crate) fn observed_rss(state: &BmarsState, data: &TrainingSet, theta: &[f64]) -> f64 {
    if data.n_r() == 0 {
        return 0.0;
    }
    let rows = data.obs_rows_with(theta);
    let mut buf = vec![0.0; rows.ncols()];
    data.z_obs()
        .iter()
        .enumerate()
        .map(|(i, z)| {
            for (c, v) in buf.iter_mut().enumerate() {
                *v = rows[(i, c)];
            }
            (z - state.eval(&buf)).powi(2)
        })
        .sum()
}

/// Full conditional log density of theta.
pub fn log_pi2(
    theta: &CoeffVector,
    state: &BmarsState,
    data: &TrainingSet,
    obs: &ObservationSet,
    hp: &Hyperparams,
) -> Result<f64> {
    if theta.k2() != data.k2() {
        return Err(Error::InvalidInput(
            "theta length differs from training DCT columns".into(),
        ));
    }
    let misfit = -observed_rss(state, data, &theta.theta) / (2.0 * state.sigma_z2 * state.tau_z);
    let coarse = match &obs.coarse {
        Some(c) => log_coarse(c, theta, hp)?,
        None => 0.0,
    };
    Ok(misfit + coarse + log_fine(&obs.fine, theta, hp)? + log_prior_theta(theta, hp))
}

/// Cached evaluator of [`log_pi2`] for a fixed grid and data set.
#[derive(Debug, Clone)]
pub struct ThetaTarget {
    reconstructor: Reconstructor,
    coarse: Option<CoarseData>,
    fine: Vec<FineObs>,
    hp: Hyperparams,
}

impl ThetaTarget {
    pub fn new(reconstructor: Reconstructor, obs: &ObservationSet, hp: &Hyperparams) -> Result<Self> {
        obs.check(reconstructor.dims())?;
        Ok(Self {
            reconstructor,
            coarse: obs.coarse.clone(),
            fine: obs.fine.clone(),
            hp: hp.clone(),
        })
    }

    pub fn reconstructor(&self) -> &Reconstructor {
        &self.reconstructor
    }

    /// Field-data terms only: coarse, fine and prior.
    pub fn log_field_terms(&self, theta: &[f64]) -> f64 {
        let hp = &self.hp;
        let coarse = match &self.coarse {
            Some(c) => {
                let field = self.reconstructor.field_values(theta);
                let lc = c.geometry.average_values(&field);
                log_t_marginal(hp.a_c, hp.b_c, lc.len(), sq_dist(&c.values, &lc))
            }
            None => 0.0,
        };
        let fine_sq: f64 = self
            .fine
            .iter()
            .map(|o| (o.value - self.reconstructor.value_at(theta, o.row, o.col)).powi(2))
            .sum();
        let prior_sq: f64 = theta.iter().map(|t| t * t).sum();
        coarse
            + log_t_marginal(hp.a_k, hp.b_k, self.fine.len(), fine_sq)
            + log_t_marginal(hp.a_o, hp.b_o, theta.len(), prior_sq)
    }

    pub fn log_density(&self, theta: &[f64], state: &BmarsState, data: &TrainingSet) -> f64 {
        let misfit = -observed_rss(state, data, theta) / (2.0 * state.sigma_z2 * state.tau_z);
        misfit + self.log_field_terms(theta)
    }
}
