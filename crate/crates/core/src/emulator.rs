//! BMARS emulator: hinge-product basis functions, the stacked training set,
//! design matrices, and posterior-predictive evaluation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

/// Raw outputs of exactly 0 or 1 are pulled this far into the open interval
/// before the logit transform.
pub const FRACTION_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(format!("sign must be +1 or -1, got {other}")),
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// One `[s (x_v - t)]_+` factor. `var` is a 0-based predictor index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HingeFactor {
    pub var: usize,
    pub knot: f64,
    pub sign: Sign,
}

impl HingeFactor {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.sign.value() * (x[self.var] - self.knot)).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BasisFunction {
    Intercept,
    Product { factors: Vec<HingeFactor> },
}

impl BasisFunction {
    pub fn product(factors: Vec<HingeFactor>) -> Result<Self> {
        let b = BasisFunction::Product { factors };
        b.check(usize::MAX, usize::MAX)?;
        Ok(b)
    }

    /// Interaction degree J (0 for the intercept).
    pub fn degree(&self) -> usize {
        match self {
            BasisFunction::Intercept => 0,
            BasisFunction::Product { factors } => factors.len(),
        }
    }

    pub fn factors(&self) -> &[HingeFactor] {
        match self {
            BasisFunction::Intercept => &[],
            BasisFunction::Product { factors } => factors,
        }
    }

    /// Sorted predictor subset the basis splits on.
    pub fn type_key(&self) -> Vec<usize> {
        let mut vars: Vec<usize> = self.factors().iter().map(|f| f.var).collect();
        vars.sort_unstable();
        vars
    }

    /// Structural identity: sorted `(var, knot, sign)` triples.
    pub fn canonical_key(&self) -> Vec<(usize, u64, i8)> {
        let mut key: Vec<_> = self
            .factors()
            .iter()
            .map(|f| (f.var, f.knot.to_bits(), i8::from(f.sign)))
            .collect();
        key.sort_unstable();
        key
    }

    /// Validates against `p` predictors and interaction limit `max_degree`.
    pub fn check(&self, p: usize, max_degree: usize) -> Result<()> {
        let BasisFunction::Product { factors } = self else {
            return Ok(());
        };
        if factors.is_empty() {
            return Err(Error::InvalidBasis("product basis without factors".into()));
        }
        if factors.len() > max_degree {
            return Err(Error::InvalidBasis(format!(
                "degree {} exceeds interaction limit {max_degree}",
                factors.len()
            )));
        }
        for (i, f) in factors.iter().enumerate() {
            if f.var >= p {
                return Err(Error::InvalidBasis(format!(
                    "predictor index {} out of range for {p} predictors",
                    f.var
                )));
            }
            if !f.knot.is_finite() {
                return Err(Error::InvalidBasis("non-finite knot".into()));
            }
            if factors[..i].iter().any(|g| g.var == f.var) {
                return Err(Error::InvalidBasis(format!("predictor {} repeated", f.var)));
            }
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            BasisFunction::Intercept => 1.0,
            BasisFunction::Product { factors } => {
                let mut acc = 1.0;
                for f in factors {
                    acc *= f.eval(x);
                    if acc == 0.0 {
                        break;
                    }
                }
                acc
            }
        }
    }
}

pub fn eval_basis(b: &BasisFunction, x: &[f64]) -> Result<f64> {
    b.check(x.len(), usize::MAX)?;
    Ok(b.eval_unchecked(x))
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// `N_I = sum_{i=1}^{I} C(k1 + k2, i)`, the number of admissible predictor
/// subsets for bases of degree at most `max_degree`.
pub fn count_basis_types(k1: usize, k2: usize, max_degree: usize) -> Result<u64> {
    let p = (k1 + k2) as u64;
    let i_max = max_degree as u64;
    if max_degree == 0 {
        return Err(Error::InvalidConfig("interaction order must be >= 1".into()));
    }
    if i_max > p {
        return Err(Error::InvalidConfig(format!(
            "interaction order {max_degree} exceeds predictor count {p}"
        )));
    }
    (1..=i_max).try_fold(0u64, |acc, i| {
        binomial(p, i)
            .and_then(|c| acc.checked_add(c))
            .ok_or_else(|| Error::InvalidConfig("basis type count overflows".into()))
    })
}

/// `n x m` matrix with entry `(i, j) = B_j(x_i)`.
pub fn build_design_matrix(bases: &[BasisFunction], x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    for b in bases {
        b.check(x.ncols(), usize::MAX)?;
    }
    Ok(design_matrix_unchecked(bases, x))
}

pub(crate) fn design_matrix_unchecked(bases: &[BasisFunction], x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut out = DMatrix::zeros(n, bases.len());
    let mut row = vec![0.0; x.ncols()];
    for i in 0..n {
        for (c, r) in row.iter_mut().enumerate() {
            *r = x[(i, c)];
        }
        for (j, b) in bases.iter().enumerate() {
            out[(i, j)] = b.eval_unchecked(&row);
        }
    }
    out
}

/// Full emulator state for one draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateRepr", into = "StateRepr")]
pub struct BmarsState {
    pub bases: Vec<BasisFunction>,
    pub beta: Vec<f64>,
    pub sigma_z2: f64,
    pub tau_z: f64,
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    m: usize,
    bases: Vec<BasisFunction>,
    beta: Vec<f64>,
    sigma_z2: f64,
    tau_z: f64,
}

impl TryFrom<StateRepr> for BmarsState {
    type Error = String;
    fn try_from(r: StateRepr) -> std::result::Result<Self, String> {
        if r.m != r.bases.len() || r.m != r.beta.len() {
            return Err(format!(
                "m = {} but {} bases and {} coefficients",
                r.m,
                r.bases.len(),
                r.beta.len()
            ));
        }
        let s = BmarsState {
            bases: r.bases,
            beta: r.beta,
            sigma_z2: r.sigma_z2,
            tau_z: r.tau_z,
        };
        s.check(usize::MAX, usize::MAX, usize::MAX).map_err(|e| e.to_string())?;
        Ok(s)
    }
}

impl From<BmarsState> for StateRepr {
    fn from(s: BmarsState) -> Self {
        StateRepr {
            m: s.bases.len(),
            bases: s.bases,
            beta: s.beta,
            sigma_z2: s.sigma_z2,
            tau_z: s.tau_z,
        }
    }
}

impl BmarsState {
    /// Intercept-only state: `beta = 0`, `sigma_z2 = tau_z = 1`.
    pub fn initial() -> Self {
        Self {
            bases: vec![BasisFunction::Intercept],
            beta: vec![0.0],
            sigma_z2: 1.0,
            tau_z: 1.0,
        }
    }

    pub fn m(&self) -> usize {
        self.bases.len()
    }

    pub fn check(&self, p: usize, m_max: usize, max_degree: usize) -> Result<()> {
        if self.bases.first() != Some(&BasisFunction::Intercept) {
            return Err(Error::InvalidBasis("first basis must be the intercept".into()));
        }
        if self.m() > m_max {
            return Err(Error::InvalidBasis(format!("m = {} exceeds m_max = {m_max}", self.m())));
        }
        if self.beta.len() != self.m() {
            return Err(Error::InvalidBasis("beta length differs from basis count".into()));
        }
        for b in &self.bases[1..] {
            if *b == BasisFunction::Intercept {
                return Err(Error::InvalidBasis("intercept may only appear first".into()));
            }
            b.check(p, max_degree)?;
        }
        if !(self.sigma_z2 > 0.0 && self.sigma_z2.is_finite()) || !(self.tau_z > 0.0 && self.tau_z.is_finite()) {
            return Err(Error::InvalidBasis("variances must be positive and finite".into()));
        }
        Ok(())
    }

    /// `sum_i beta_i B_i(x)` for an already-scaled predictor row.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.bases
            .iter()
            .zip(&self.beta)
            .map(|(b, beta)| beta * b.eval_unchecked(x))
            .sum()
    }
}

/// Per-column affine map of raw predictors onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaling {
    pub fn identity(p: usize) -> Self {
        Self {
            offset: vec![0.0; p],
            scale: vec![1.0; p],
        }
    }

    /// Min/max scaling from the rows of `x`. Constant columns get unit range.
    pub fn fit(x: &DMatrix<f64>) -> Self {
        let p = x.ncols();
        if x.nrows() == 0 {
            return Self::identity(p);
        }
        let mut offset = Vec::with_capacity(p);
        let mut scale = Vec::with_capacity(p);
        for col in x.column_iter() {
            let lo = col.min();
            let hi = col.max();
            let range = hi - lo;
            offset.push(lo);
            scale.push(if range > 0.0 && range.is_finite() { range } else { 1.0 });
        }
        Self { offset, scale }
    }

    pub fn p(&self) -> usize {
        self.offset.len()
    }

    #[inline]
    pub fn apply_one(&self, col: usize, v: f64) -> f64 {
        (v - self.offset[col]) / self.scale[col]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(c, &v)| self.apply_one(c, v)).collect()
    }

    pub fn apply_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| self.apply_one(c, x[(r, c)]))
    }
}

/// Stacked simulator and observed inputs/outputs.
///
/// Predictor columns are `[k1 known inputs | k2 DCT coefficients]`, stored
/// in scaled space. The observed block's DCT columns hold the current
/// calibration `theta` and are rewritten by [`TrainingSet::set_theta`].
#[derive(Debug, Clone)]
pub struct TrainingSet {
    x: DMatrix<f64>,
    z: DVector<f64>,
    n_s: usize,
    n_r: usize,
    k1: usize,
    k2: usize,
    scaling: Scaling,
    knot_pool: DMatrix<f64>,
}

impl TrainingSet {
    /// Simulator-only training set (no observed block). Predictor scaling
    /// is fitted to `x_sim`.
    pub fn simulator(x_sim: DMatrix<f64>, z_sim: Vec<f64>, k1: usize) -> Result<Self> {
        let scaling = Scaling::fit(&x_sim);
        Self::with_observed(x_sim, z_sim, DMatrix::zeros(0, k1), Vec::new(), None, k1, scaling)
    }

    /// Full stacked set. `x_obs_known` holds the observed rows' known inputs
    /// (`n_r x k1`, raw scale); their DCT columns are filled from `theta`.
    pub fn with_observed(
        x_sim: DMatrix<f64>,
        z_sim: Vec<f64>,
        x_obs_known: DMatrix<f64>,
        z_obs: Vec<f64>,
        theta: Option<&[f64]>,
        k1: usize,
        scaling: Scaling,
    ) -> Result<Self> {
        let p = x_sim.ncols();
        if k1 > p {
            return Err(Error::InvalidInput(format!("k1 = {k1} exceeds predictor count {p}")));
        }
        let k2 = p - k1;
        let n_s = x_sim.nrows();
        let n_r = x_obs_known.nrows();
        if z_sim.len() != n_s || z_obs.len() != n_r {
            return Err(Error::InvalidInput("response lengths differ from row counts".into()));
        }
        if x_obs_known.ncols() != k1 && n_r > 0 {
            return Err(Error::InvalidInput(format!(
                "observed known inputs need {k1} columns, got {}",
                x_obs_known.ncols()
            )));
        }
        if scaling.p() != p {
            return Err(Error::InvalidInput("scaling width differs from predictor count".into()));
        }
        let all_finite = x_sim
            .iter()
            .chain(x_obs_known.iter())
            .chain(&z_sim)
            .chain(&z_obs)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidInput("non-finite training value".into()));
        }
        let n = n_s + n_r;
        let mut x = DMatrix::zeros(n, p);
        x.rows_mut(0, n_s).copy_from(&scaling.apply_matrix(&x_sim));
        for r in 0..n_r {
            for c in 0..k1 {
                x[(n_s + r, c)] = scaling.apply_one(c, x_obs_known[(r, c)]);
            }
        }
        let knot_pool = if n_s > 0 {
            x.rows(0, n_s).into_owned()
        } else {
            x.clone()
        };
        let z = DVector::from_iterator(n, z_sim.into_iter().chain(z_obs));
        let mut set = Self {
            x,
            z,
            n_s,
            n_r,
            k1,
            k2,
            scaling,
            knot_pool,
        };
        if let Some(theta) = theta {
            set.set_theta(theta)?;
        } else if n_r > 0 && k2 > 0 {
            return Err(Error::InvalidInput("observed rows need an initial theta".into()));
        }
        Ok(set)
    }

    /// Replaces the candidate-knot pool (scaled space, `p` columns). Lets a
    /// prior-only chain run with `n = 0` data rows.
    pub fn with_knot_pool(mut self, pool: DMatrix<f64>) -> Result<Self> {
        if pool.ncols() != self.p() || pool.nrows() == 0 {
            return Err(Error::InvalidInput("knot pool must be non-empty with p columns".into()));
        }
        self.knot_pool = pool;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n_s + self.n_r
    }
    pub fn n_s(&self) -> usize {
        self.n_s
    }
    pub fn n_r(&self) -> usize {
        self.n_r
    }
    pub fn k1(&self) -> usize {
        self.k1
    }
    pub fn k2(&self) -> usize {
        self.k2
    }
    pub fn p(&self) -> usize {
        self.k1 + self.k2
    }
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }
    pub fn z(&self) -> &DVector<f64> {
        &self.z
    }
    pub fn scaling(&self) -> &Scaling {
        &self.scaling
    }
    pub fn knot_pool(&self) -> &DMatrix<f64> {
        &self.knot_pool
    }

    /// Diagonal of `S^{-1}`: 1 on simulator rows, `1/tau` on observed rows.
    pub fn inverse_scale_weights(&self, tau_z: f64) -> Vec<f64> {
        let mut w = vec![1.0; self.n()];
        w[self.n_s..].iter_mut().for_each(|v| *v = 1.0 / tau_z);
        w
    }

    pub fn z_obs(&self) -> &[f64] {
        &self.z.as_slice()[self.n_s..]
    }

    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.k2 {
            return Err(Error::InvalidInput(format!(
                "theta has {} entries, expected {}",
                theta.len(),
                self.k2
            )));
        }
        for r in self.n_s..self.n() {
            for (j, &t) in theta.iter().enumerate() {
                let c = self.k1 + j;
                self.x[(r, c)] = self.scaling.apply_one(c, t);
            }
        }
        Ok(())
    }

    /// Observed-block predictor rows with the given raw `theta` substituted.
    pub fn obs_rows_with(&self, theta: &[f64]) -> DMatrix<f64> {
        let mut rows = self.x.rows(self.n_s, self.n_r).into_owned();
        for r in 0..self.n_r {
            for (j, &t) in theta.iter().enumerate() {
                let c = self.k1 + j;
                rows[(r, c)] = self.scaling.apply_one(c, t);
            }
        }
        rows
    }
}

pub fn logit(z: f64) -> Result<f64> {
    if !(z > 0.0 && z < 1.0) {
        return Err(Error::InvalidInput(format!("logit needs a value in (0, 1), got {z}")));
    }
    Ok((z / (1.0 - z)).ln())
}

pub fn inv_logit(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// Clamps a fraction into `[FRACTION_CLAMP, 1 - FRACTION_CLAMP]` then takes
/// the logit. Values outside `[0, 1]` are rejected.
pub fn logit_clamped(z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::InvalidInput(format!("fraction {z} outside [0, 1]")));
    }
    logit(z.clamp(FRACTION_CLAMP, 1.0 - FRACTION_CLAMP))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub quantiles: Vec<f64>,
}

fn summarize(mut values: Vec<f64>, quantiles: &[f64]) -> Result<Prediction> {
    if values.is_empty() {
        return Err(Error::EmptyStore("no draws to predict from".into()));
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.sort_by(f64::total_cmp);
    let quantiles = quantiles.iter().map(|&q| quantile_sorted(&values, q)).collect();
    Ok(Prediction { mean, quantiles })
}

/// Across-draw mean and empirical quantiles of the emulator surface at a
/// scaled predictor row.
pub fn predict<'a>(
    draws: impl IntoIterator<Item = &'a BmarsState>,
    x: &[f64],
    quantiles: &[f64],
) -> Result<Prediction> {
    summarize(draws.into_iter().map(|s| s.eval(x)).collect(), quantiles)
}

/// As [`predict`], with `N(0, sigma_z2)` noise of each draw added.
pub fn predict_with_noise<'a, R: Rng + ?Sized>(
    draws: impl IntoIterator<Item = &'a BmarsState>,
    x: &[f64],
    quantiles: &[f64],
    rng: &mut R,
) -> Result<Prediction> {
    let values = draws
        .into_iter()
        .map(|s| {
            let eps: f64 = StandardNormal.sample(rng);
            s.eval(x) + s.sigma_z2.sqrt() * eps
        })
        .collect();
    summarize(values, quantiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hinge(var: usize, knot: f64, sign: Sign) -> HingeFactor {
        HingeFactor { var, knot, sign }
    }

    #[test]
    fn eval_examples() {
        let x = [0.1, 0.5];
        assert_eq!(eval_basis(&BasisFunction::Intercept, &x).unwrap(), 1.0);
        let b = BasisFunction::product(vec![hinge(1, 0.3, Sign::Plus)]).unwrap();
        assert!((eval_basis(&b, &x).unwrap() - 0.2).abs() < 1e-15);
        let b = BasisFunction::product(vec![hinge(1, 0.3, Sign::Minus)]).unwrap();
        assert_eq!(eval_basis(&b, &x).unwrap(), 0.0);
        let b = BasisFunction::product(vec![hinge(4, 0.3, Sign::Minus)]).unwrap();
        assert!(matches!(eval_basis(&b, &x), Err(Error::InvalidBasis(_))));
    }

    #[test]
    fn repeated_predictor_rejected() {
        let r = BasisFunction::product(vec![hinge(0, 0.1, Sign::Plus), hinge(0, 0.5, Sign::Minus)]);
        assert!(matches!(r, Err(Error::InvalidBasis(_))));
    }

    #[test]
    fn interaction_product() {
        let b = BasisFunction::product(vec![hinge(0, 0.2, Sign::Plus), hinge(2, 0.9, Sign::Minus)]).unwrap();
        let v = eval_basis(&b, &[0.5, 7.0, 0.4]).unwrap();
        assert!((v - 0.3 * 0.5).abs() < 1e-15);
        assert_eq!(b.type_key(), vec![0, 2]);
    }

    #[test]
    fn basis_type_counts() {
        assert_eq!(count_basis_types(1, 15, 1).unwrap(), 16);
        assert_eq!(count_basis_types(1, 15, 2).unwrap(), 136);
        assert_eq!(count_basis_types(0, 3, 3).unwrap(), 7);
        assert!(matches!(count_basis_types(1, 1, 3), Err(Error::InvalidConfig(_))));
        for i in 2..=6 {
            let a = count_basis_types(4, 6, i).unwrap();
            let b = count_basis_types(4, 6, i - 1).unwrap();
            assert_eq!(a - b, binomial(10, i as u64).unwrap());
        }
    }

    #[test]
    fn design_matrix_examples() {
        let x = DMatrix::from_row_slice(3, 2, &[0.1, 0.3, 0.7, 0.3, 0.2, 0.3]);
        let b = build_design_matrix(&[BasisFunction::Intercept], &x).unwrap();
        assert_eq!(b, DMatrix::from_element(3, 1, 1.0));
        let bases = vec![
            BasisFunction::Intercept,
            BasisFunction::product(vec![hinge(1, 0.3, Sign::Plus)]).unwrap(),
            BasisFunction::product(vec![hinge(1, 0.3, Sign::Minus)]).unwrap(),
        ];
        let b = build_design_matrix(&bases, &x).unwrap();
        assert!(b.column(1).iter().chain(b.column(2).iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn design_matrix_matches_per_entry_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DMatrix::from_fn(7, 3, |_, _| rng.random::<f64>());
        let bases = vec![
            BasisFunction::Intercept,
            BasisFunction::product(vec![hinge(0, 0.4, Sign::Plus), hinge(2, 0.6, Sign::Minus)]).unwrap(),
            BasisFunction::product(vec![hinge(1, 0.5, Sign::Minus)]).unwrap(),
        ];
        let b = build_design_matrix(&bases, &x).unwrap();
        for i in 0..7 {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            for (j, basis) in bases.iter().enumerate() {
                assert_eq!(b[(i, j)], eval_basis(basis, &row).unwrap());
            }
        }
    }

    #[test]
    fn logit_pair() {
        assert_eq!(logit(0.5).unwrap(), 0.0);
        assert_eq!(inv_logit(0.0), 0.5);
        assert!((logit(inv_logit(2.7)).unwrap() - 2.7).abs() < 1e-12);
        assert!(logit(0.0).is_err());
        assert!(logit(f64::NAN).is_err());
        assert!(logit_clamped(0.0).unwrap().is_finite());
        assert!(logit_clamped(1.0).unwrap().is_finite());
        assert!(logit_clamped(1.5).is_err());
        assert!(inv_logit(-800.0) >= 0.0 && inv_logit(800.0) <= 1.0);
    }

    #[test]
    fn predict_examples() {
        let s = BmarsState {
            beta: vec![1.5],
            ..BmarsState::initial()
        };
        let p = predict([&s], &[0.2], &[0.025, 0.5, 0.975]).unwrap();
        assert_eq!(p.mean, 1.5);
        assert!(p.quantiles.iter().all(|&q| q == 1.5));

        let a = BmarsState {
            beta: vec![1.0],
            ..BmarsState::initial()
        };
        let b = BmarsState {
            beta: vec![3.0],
            ..BmarsState::initial()
        };
        assert_eq!(predict([&a, &b], &[0.0], &[]).unwrap().mean, 2.0);

        let empty: Vec<BmarsState> = Vec::new();
        assert!(matches!(predict(&empty, &[0.0], &[0.5]), Err(Error::EmptyStore(_))));
    }

    #[test]
    fn predictive_noise_widens_interval() {
        let s = BmarsState {
            beta: vec![0.0],
            sigma_z2: 4.0,
            ..BmarsState::initial()
        };
        let draws = vec![s; 4000];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = predict_with_noise(&draws, &[0.0], &[0.025, 0.975], &mut rng).unwrap();
        assert!((p.quantiles[0] + 3.92).abs() < 0.3, "{:?}", p);
        assert!((p.quantiles[1] - 3.92).abs() < 0.3, "{:?}", p);
    }

    #[test]
    fn state_serde_checks_m() {
        let s = BmarsState {
            bases: vec![
                BasisFunction::Intercept,
                BasisFunction::product(vec![hinge(0, 0.25, Sign::Minus)]).unwrap(),
            ],
            beta: vec![0.5, -1.0],
            sigma_z2: 0.3,
            tau_z: 1.0,
        };
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"m\":2"));
        let back: BmarsState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
        let bad = json.replace("\"m\":2", "\"m\":3");
        assert!(serde_json::from_str::<BmarsState>(&bad).is_err());
    }

    #[test]
    fn training_set_theta_columns() {
        let x_sim = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 10.0, 0.5, 3.0, 20.0, 1.0, 2.0, 30.0]);
        let scaling = Scaling::fit(&x_sim);
        let known = DMatrix::from_row_slice(2, 1, &[0.25, 0.75]);
        let mut ts = TrainingSet::with_observed(
            x_sim,
            vec![0.0; 3],
            known,
            vec![1.0, 2.0],
            Some(&[2.0, 20.0]),
            1,
            scaling,
        )
        .unwrap();
        assert_eq!((ts.n(), ts.p(), ts.k2()), (5, 3, 2));
        assert_eq!(ts.x()[(3, 0)], 0.25);
        assert_eq!(ts.x()[(4, 1)], 0.5);
        assert_eq!(ts.x()[(4, 2)], 0.5);
        ts.set_theta(&[3.0, 30.0]).unwrap();
        assert_eq!(ts.x()[(3, 1)], 1.0);
        let rows = ts.obs_rows_with(&[1.0, 10.0]);
        assert_eq!(rows[(0, 1)], 0.0);
        assert_eq!(ts.inverse_scale_weights(2.0), vec![1.0, 1.0, 1.0, 0.5, 0.5]);
        assert_eq!(ts.knot_pool().nrows(), 3);
    }
}
