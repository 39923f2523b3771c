//! Hybrid sampler: reversible-jump moves over the basis structure, Gibbs
//! updates for `beta`, `sigma_z2` and `tau_z`, and random-walk Metropolis
//! for the DCT coefficients.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dct::{CoeffVector, Reconstructor};
use crate::emulator::{
    count_basis_types, design_matrix_unchecked, BasisFunction, BmarsState, HingeFactor, Sign, TrainingSet,
};
use crate::error::{Error, Result};
use crate::posterior::{log_pi1_with, Hyperparams, MarginalFit, ObservationSet, ThetaTarget};

/// Birth/death/change probabilities for interior `m`. The boundary rules
/// (`m = 1` always births, `m = m_max` always dies) are applied by
/// [`MoveProbs::at`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveProbs {
    pub birth: f64,
    pub death: f64,
    pub change: f64,
}

impl Default for MoveProbs {
    fn default() -> Self {
        Self {
            birth: 1.0 / 3.0,
            death: 1.0 / 3.0,
            change: 1.0 / 3.0,
        }
    }
}

impl MoveProbs {
    pub fn validate(&self) -> Result<()> {
        let all = [self.birth, self.death, self.change];
        if all.iter().any(|p| !(*p >= 0.0 && p.is_finite())) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "move probabilities must be >= 0 and sum to 1: {self:?}"
            )));
        }
        if self.birth == 0.0 || self.death == 0.0 {
            return Err(Error::InvalidConfig(
                "interior birth and death probabilities must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `(b_m, d_m, rho_m)`.
    pub fn at(&self, m: usize, m_max: usize) -> (f64, f64, f64) {
        if m_max <= 1 {
            (0.0, 0.0, 0.0)
        } else if m <= 1 {
            (1.0, 0.0, 0.0)
        } else if m >= m_max {
            (0.0, 1.0, 0.0)
        } else {
            (self.birth, self.death, self.change)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Per-coordinate random-walk scale for theta. A single entry is
    /// broadcast to every coordinate.
    pub h: Vec<f64>,
    pub seed: u64,
    pub move_probs: MoveProbs,
    /// Tune `h` during burn-in only.
    pub adapt_h: bool,
    /// Hold `tau_z` at its initial value instead of sampling it.
    pub fix_tau: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_iter: 20_000,
            burn_in: 5_000,
            thin: 10,
            h: vec![0.1],
            seed: 1,
            move_probs: MoveProbs::default(),
            adapt_h: true,
            fix_tau: false,
        }
    }
}

/// Iterations between step-size adjustments during burn-in.
pub const ADAPT_WINDOW: usize = 100;
const ADAPT_FACTOR: f64 = 1.1;
const ADAPT_TARGET: (f64, f64) = (0.2, 0.4);

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be >= 1".into()));
        }
        if self.burn_in >= self.n_iter {
            return Err(Error::EmptyStore(format!(
                "burn-in ({}) leaves no iterations out of {}",
                self.burn_in, self.n_iter
            )));
        }
        if self.h.is_empty() || self.h.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
            return Err(Error::InvalidConfig("theta jump scale h must be non-negative".into()));
        }
        self.move_probs.validate()
    }

    fn step_sizes(&self, k2: usize) -> Result<Vec<f64>> {
        match self.h.len() {
            1 => Ok(vec![self.h[0]; k2]),
            n if n == k2 => Ok(self.h.clone()),
            n => Err(Error::InvalidConfig(format!("h has {n} entries for {k2} coefficients"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Birth,
    Death,
    Change,
    /// No structure move is possible (`m_max = 1`, or a change with no
    /// non-intercept basis).
    Stay,
}

impl MoveKind {
    fn index(self) -> usize {
        match self {
            MoveKind::Birth => 0,
            MoveKind::Death => 1,
            MoveKind::Change => 2,
            MoveKind::Stay => 3,
        }
    }
}

/// Inputs a structure proposal needs besides the current bases.
#[derive(Debug, Clone, Copy)]
pub struct ProposalContext<'a> {
    pub knot_pool: &'a DMatrix<f64>,
    pub n_types: u64,
    pub max_degree: usize,
    pub m_max: usize,
    pub move_probs: MoveProbs,
}

impl<'a> ProposalContext<'a> {
    pub fn new(data: &'a TrainingSet, hp: &Hyperparams, move_probs: MoveProbs) -> Result<Self> {
        Ok(Self {
            knot_pool: data.knot_pool(),
            n_types: count_basis_types(data.k1(), data.k2(), hp.max_degree)?,
            max_degree: hp.max_degree,
            m_max: hp.m_max,
            move_probs,
        })
    }

    fn p(&self) -> usize {
        self.knot_pool.ncols()
    }

    /// `ln(N_I (2n)^J)`: log count of equally likely birth outcomes of degree J.
    fn log_birth_choices(&self, degree: usize) -> f64 {
        (self.n_types as f64).ln() + degree as f64 * (2.0 * self.knot_pool.nrows() as f64).ln()
    }

    fn draw_factor<R: Rng + ?Sized>(&self, var: usize, rng: &mut R) -> HingeFactor {
        let row = rng.random_range(0..self.knot_pool.nrows());
        let sign = if rng.random_bool(0.5) { Sign::Plus } else { Sign::Minus };
        HingeFactor {
            var,
            knot: self.knot_pool[(row, var)],
            sign,
        }
    }

    /// Uniform draw over the `N_I` predictor subsets of size `1..=I`.
    fn draw_type<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let p = self.p();
        let mut u = rng.random_range(0..self.n_types);
        let mut size = 1;
        let mut count = p as u64;
        while u >= count && size < self.max_degree {
            u -= count;
            count = count * (p - size) as u64 / (size + 1) as u64;
            size += 1;
        }
        index::sample(rng, p, size).into_vec()
    }
}

#[derive(Debug, Clone)]
pub struct StructureProposal {
    pub bases: Vec<BasisFunction>,
    pub kind: MoveKind,
    /// Log of the reverse-over-forward proposal probability ratio.
    pub log_ratio: f64,
    /// Index of the basis added, removed or changed.
    pub(crate) touched: usize,
}

pub fn propose_structure_move<R: Rng + ?Sized>(
    bases: &[BasisFunction],
    ctx: &ProposalContext<'_>,
    rng: &mut R,
) -> StructureProposal {
    let m = bases.len();
    let (b_m, d_m, _) = ctx.move_probs.at(m, ctx.m_max);
    let stay = StructureProposal {
        bases: bases.to_vec(),
        kind: MoveKind::Stay,
        log_ratio: 0.0,
        touched: 0,
    };
    if ctx.m_max <= 1 {
        return stay;
    }
    let u: f64 = rng.random();
    if u < b_m {
        let vars = ctx.draw_type(rng);
        let factors: Vec<HingeFactor> = vars.iter().map(|&v| ctx.draw_factor(v, rng)).collect();
        let degree = factors.len();
        let (_, d_next, _) = ctx.move_probs.at(m + 1, ctx.m_max);
        let mut out = bases.to_vec();
        out.push(BasisFunction::Product { factors });
        StructureProposal {
            bases: out,
            kind: MoveKind::Birth,
            log_ratio: d_next.ln() - (m as f64).ln() - b_m.ln() + ctx.log_birth_choices(degree),
            touched: m,
        }
    } else if u < b_m + d_m {
        let k = rng.random_range(1..m);
        let (b_prev, _, _) = ctx.move_probs.at(m - 1, ctx.m_max);
        let degree = bases[k].degree();
        let mut out = bases.to_vec();
        out.remove(k);
        StructureProposal {
            bases: out,
            kind: MoveKind::Death,
            log_ratio: b_prev.ln() - ctx.log_birth_choices(degree) - d_m.ln() + ((m - 1) as f64).ln(),
            touched: k,
        }
    } else {
        if m < 2 {
            return stay;
        }
        let k = rng.random_range(1..m);
        let mut out = bases.to_vec();
        if let BasisFunction::Product { factors } = &mut out[k] {
            let j = rng.random_range(0..factors.len());
            factors[j] = ctx.draw_factor(factors[j].var, rng);
        }
        StructureProposal {
            bases: out,
            kind: MoveKind::Change,
            log_ratio: 0.0,
            touched: k,
        }
    }
}

/// Reversible-jump acceptance probability.
pub fn rj_accept(logpi1_current: f64, logpi1_candidate: f64, log_proposal_ratio: f64) -> f64 {
    if logpi1_candidate == f64::NEG_INFINITY || logpi1_candidate.is_nan() {
        return 0.0;
    }
    if logpi1_current == f64::NEG_INFINITY {
        return 1.0;
    }
    let log_a = logpi1_candidate - logpi1_current + log_proposal_ratio;
    if log_a >= 0.0 {
        1.0
    } else {
        log_a.exp()
    }
}

/// Multivariate t conditional of `beta` with `sigma_z2` integrated out.
pub struct BetaConditional {
    pub location: DVector<f64>,
    pub dof: f64,
    /// `d / dof`; the scale matrix is this times `A^-1`.
    pub scale_factor: f64,
    pub fit: MarginalFit,
}

impl BetaConditional {
    pub fn new(state: &BmarsState, data: &TrainingSet, hp: &Hyperparams) -> Result<Self> {
        let b = design_matrix_unchecked(&state.bases, data.x());
        Self::from_design(&b, state.tau_z, data, hp)
    }

    fn from_design(b: &DMatrix<f64>, tau_z: f64, data: &TrainingSet, hp: &Hyperparams) -> Result<Self> {
        let fit = MarginalFit::new(b, &data.inverse_scale_weights(tau_z), data.z(), hp.alpha, hp.b_z)?;
        Ok(Self::from_fit(fit, data.n(), hp))
    }

    fn from_fit(fit: MarginalFit, n: usize, hp: &Hyperparams) -> Self {
        let dof = n as f64 + 2.0 * hp.a_z;
        Self {
            location: fit.mean.clone(),
            dof,
            scale_factor: fit.d / dof,
            fit,
        }
    }

    /// Scale matrix `(d / dof) A^-1`.
    pub fn scale_matrix(&self) -> DMatrix<f64> {
        self.fit.chol.inverse() * self.scale_factor
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let m = self.location.len();
        let z = DVector::from_fn(m, |_, _| StandardNormal.sample(rng));
        let w: f64 = ChiSquared::new(self.dof).expect("positive dof").sample(rng);
        let l = self.fit.chol.l();
        let y = l
            .transpose()
            .solve_upper_triangular(&z)
            .expect("Cholesky factor has a positive diagonal");
        let s = (self.fit.d / w).sqrt();
        self.location.iter().zip(y.iter()).map(|(mu, v)| mu + s * v).collect()
    }
}

pub fn gibbs_beta<R: Rng + ?Sized>(
    state: &BmarsState,
    data: &TrainingSet,
    hp: &Hyperparams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(BetaConditional::new(state, data, hp)?.sample(rng))
}

fn inverse_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0 / rate)
        .expect("positive shape and rate")
        .sample(rng);
    1.0 / g
}

/// Inverse-gamma `(shape, rate)` of `sigma_z2 | beta, ...`.
pub fn sigma_z_conditional(state: &BmarsState, data: &TrainingSet, hp: &Hyperparams) -> (f64, f64) {
    let b = design_matrix_unchecked(&state.bases, data.x());
    sigma_z_params(&b, state, data, hp)
}

fn sigma_z_params(b: &DMatrix<f64>, state: &BmarsState, data: &TrainingSet, hp: &Hyperparams) -> (f64, f64) {
    let beta = DVector::from_column_slice(&state.beta);
    let resid = data.z() - b * &beta;
    let w = data.inverse_scale_weights(state.tau_z);
    let quad: f64 = resid.iter().zip(&w).map(|(e, w)| w * e * e).sum();
    let shape = hp.a_z + (state.m() + data.n()) as f64 / 2.0;
    let rate = hp.b_z + 0.5 * quad + beta.norm_squared() / (2.0 * hp.alpha);
    (shape, rate)
}

pub fn gibbs_sigma_z<R: Rng + ?Sized>(state: &BmarsState, data: &TrainingSet, hp: &Hyperparams, rng: &mut R) -> f64 {
    let (shape, rate) = sigma_z_conditional(state, data, hp);
    inverse_gamma(shape, rate, rng)
}

/// Inverse-gamma `(shape, rate)` of `tau_z | beta, sigma_z2, ...`.
pub fn tau_z_conditional(state: &BmarsState, data: &TrainingSet, hp: &Hyperparams) -> (f64, f64) {
    let x = data.x();
    let mut row = vec![0.0; x.ncols()];
    let rss: f64 = (data.n_s()..data.n())
        .map(|i| {
            for (c, v) in row.iter_mut().enumerate() {
                *v = x[(i, c)];
            }
            (data.z()[i] - state.eval(&row)).powi(2)
        })
        .sum();
    (
        data.n_r() as f64 / 2.0 + hp.a_tau,
        rss / (2.0 * state.sigma_z2) + hp.b_tau,
    )
}

pub fn gibbs_tau_z<R: Rng + ?Sized>(state: &BmarsState, data: &TrainingSet, hp: &Hyperparams, rng: &mut R) -> f64 {
    let (shape, rate) = tau_z_conditional(state, data, hp);
    inverse_gamma(shape, rate, rng)
}

/// One random-walk Metropolis step `theta' = theta + h xi`. Returns the
/// new theta, whether it was accepted, and its log density.
pub fn mh_theta<R: Rng + ?Sized>(
    theta: &[f64],
    current_log: f64,
    state: &BmarsState,
    data: &TrainingSet,
    target: &ThetaTarget,
    h: &[f64],
    rng: &mut R,
) -> (Vec<f64>, bool, f64) {
    let proposal: Vec<f64> = theta
        .iter()
        .zip(h)
        .map(|(t, h)| {
            let xi: f64 = StandardNormal.sample(rng);
            t + h * xi
        })
        .collect();
    let cand_log = target.log_density(&proposal, state, data);
    let u: f64 = rng.random();
    // Symmetric proposal: the q-ratio cancels.
    if cand_log.is_finite() && u.ln() < cand_log - current_log {
        (proposal, true, cand_log)
    } else {
        (theta.to_vec(), false, current_log)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MoveCounters {
    /// Indexed birth, death, change, stay.
    pub proposed: [u64; 4],
    pub accepted: [u64; 4],
    pub theta_proposed: u64,
    pub theta_accepted: u64,
}

impl MoveCounters {
    pub fn theta_rate(&self) -> f64 {
        if self.theta_proposed == 0 {
            0.0
        } else {
            self.theta_accepted as f64 / self.theta_proposed as f64
        }
    }

    fn merge(&mut self, other: &MoveCounters) {
        for i in 0..4 {
            self.proposed[i] += other.proposed[i];
            self.accepted[i] += other.accepted[i];
        }
        self.theta_proposed += other.theta_proposed;
        self.theta_accepted += other.theta_accepted;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub chain: usize,
    pub iteration: usize,
    pub state: BmarsState,
    pub theta: Option<Vec<f64>>,
    pub log_pi1: f64,
    /// Conditional log density of theta; 0 when there is no theta.
    pub log_pi2: f64,
    pub last_move: MoveKind,
    pub move_accepted: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PosteriorStore {
    pub draws: Vec<Draw>,
    pub counters: MoveCounters,
    /// Theta step sizes in effect after burn-in, per chain.
    pub final_h: Vec<Vec<f64>>,
}

impl PosteriorStore {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &BmarsState> {
        self.draws.iter().map(|d| &d.state)
    }

    pub fn thetas(&self) -> impl Iterator<Item = &[f64]> {
        self.draws.iter().filter_map(|d| d.theta.as_deref())
    }

    /// Concatenates per-chain stores in chain order.
    pub fn merge(stores: Vec<PosteriorStore>) -> PosteriorStore {
        let mut out = PosteriorStore::default();
        for s in stores {
            out.counters.merge(&s.counters);
            out.final_h.extend(s.final_h);
            out.draws.extend(s.draws);
        }
        out
    }

    /// Trace CSV: `iteration,m,sigma_z2,tau_z,theta_1..theta_k2,log_pi1,log_pi2`
    /// (plus a leading `chain` column).
    pub fn trace_csv(&self) -> String {
        let k2 = self.draws.first().and_then(|d| d.theta.as_ref()).map_or(0, Vec::len);
        let mut out = String::from("chain,iteration,m,sigma_z2,tau_z");
        for j in 1..=k2 {
            let _ = write!(out, ",theta_{j}");
        }
        out.push_str(",log_pi1,log_pi2\n");
        for d in &self.draws {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                d.chain,
                d.iteration,
                d.state.m(),
                d.state.sigma_z2,
                d.state.tau_z
            );
            if let Some(t) = &d.theta {
                for v in t {
                    let _ = write!(out, ",{v}");
                }
            }
            let _ = writeln!(out, ",{},{}", d.log_pi1, d.log_pi2);
        }
        out
    }
}

/// Starting point of a chain.
#[derive(Debug, Clone)]
pub struct ChainInit {
    pub state: BmarsState,
    /// Calibration coefficients; `None` fits the emulator alone.
    pub theta: Option<CoeffVector>,
}

impl ChainInit {
    pub fn emulator_only() -> Self {
        Self {
            state: BmarsState::initial(),
            theta: None,
        }
    }
}

/// Design matrix kept in step with the current bases and theta.
struct DesignCache {
    b: DMatrix<f64>,
}

impl DesignCache {
    fn new(bases: &[BasisFunction], data: &TrainingSet) -> Self {
        Self {
            b: design_matrix_unchecked(bases, data.x()),
        }
    }

    fn column(basis: &BasisFunction, data: &TrainingSet) -> DVector<f64> {
        let x = data.x();
        let mut row = vec![0.0; x.ncols()];
        DVector::from_fn(x.nrows(), |i, _| {
            for (c, v) in row.iter_mut().enumerate() {
                *v = x[(i, c)];
            }
            basis.eval_unchecked(&row)
        })
    }

    fn candidate(&self, prop: &StructureProposal, data: &TrainingSet) -> DMatrix<f64> {
        match prop.kind {
            MoveKind::Birth => {
                let col = Self::column(&prop.bases[prop.touched], data);
                let m = self.b.ncols();
                self.b.clone().insert_column(m, 0.0).set_column_ret(m, &col)
            }
            MoveKind::Death => self.b.clone().remove_column(prop.touched),
            MoveKind::Change => {
                let mut b = self.b.clone();
                b.set_column(prop.touched, &Self::column(&prop.bases[prop.touched], data));
                b
            }
            MoveKind::Stay => self.b.clone(),
        }
    }

    fn refresh_observed(&mut self, bases: &[BasisFunction], data: &TrainingSet) {
        let x = data.x();
        let mut row = vec![0.0; x.ncols()];
        for i in data.n_s()..data.n() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = x[(i, c)];
            }
            for (j, b) in bases.iter().enumerate() {
                self.b[(i, j)] = b.eval_unchecked(&row);
            }
        }
    }
}

trait SetColumnRet {
    fn set_column_ret(self, j: usize, col: &DVector<f64>) -> Self;
}

impl SetColumnRet for DMatrix<f64> {
    fn set_column_ret(mut self, j: usize, col: &DVector<f64>) -> Self {
        self.set_column(j, col);
        self
    }
}

/// Runs one chain of the hybrid sampler.
///
/// Each iteration performs, in order: one structure move, a `beta` draw, a
/// `sigma_z2` draw, a `tau_z` draw, and a theta Metropolis step (skipped
/// when `init.theta` is `None`). Post-burn-in iterations `burn_in + thin,
/// burn_in + 2 thin, ...` are stored.
pub fn run_chain(
    cfg: &ChainConfig,
    data: &TrainingSet,
    obs: &ObservationSet,
    hp: &Hyperparams,
    init: ChainInit,
) -> Result<PosteriorStore> {
    run_chain_tagged(cfg, data, obs, hp, init, 0)
}

/// Runs `n_chains` chains with seeds `cfg.seed, cfg.seed + 1, ...` on
/// separate threads and merges their stores in chain order.
pub fn run_chains(
    cfg: &ChainConfig,
    n_chains: usize,
    data: &TrainingSet,
    obs: &ObservationSet,
    hp: &Hyperparams,
    init: &ChainInit,
) -> Result<PosteriorStore> {
    if n_chains <= 1 {
        return run_chain(cfg, data, obs, hp, init.clone());
    }
    let results: Vec<Result<PosteriorStore>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..n_chains)
            .map(|c| {
                let cfg = ChainConfig {
                    seed: cfg.seed.wrapping_add(c as u64),
                    ..cfg.clone()
                };
                let init = init.clone();
                s.spawn(move || run_chain_tagged(&cfg, data, obs, hp, init, c))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    });
    Ok(PosteriorStore::merge(results.into_iter().collect::<Result<Vec<_>>>()?))
}

fn run_chain_tagged(
    cfg: &ChainConfig,
    data: &TrainingSet,
    obs: &ObservationSet,
    hp: &Hyperparams,
    init: ChainInit,
    chain: usize,
) -> Result<PosteriorStore> {
    cfg.validate()?;
    hp.validate()?;
    init.state.check(data.p(), hp.m_max, hp.max_degree)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut data = data.clone();

    let mut theta = init.theta.as_ref().map(|t| t.theta.clone());
    let target = match &init.theta {
        Some(cv) => {
            if cv.k2() != data.k2() {
                return Err(Error::InvalidInput(format!(
                    "initial theta has {} coefficients, training set has {}",
                    cv.k2(),
                    data.k2()
                )));
            }
            data.set_theta(&cv.theta)?;
            Some(ThetaTarget::new(
                Reconstructor::new(cv.selection, cv.field_dims)?,
                obs,
                hp,
            )?)
        }
        None => None,
    };
    let mut h = cfg.step_sizes(theta.as_ref().map_or(1, Vec::len))?;

    let ctx_data = data.clone();
    let ctx = ProposalContext::new(&ctx_data, hp, cfg.move_probs)?;
    let n_types = ctx.n_types;

    let mut state = init.state;
    let mut design = DesignCache::new(&state.bases, &data);
    let mut store = PosteriorStore::default();
    let mut counters = MoveCounters::default();
    let mut window = (0u64, 0u64);

    let eval_pi1 = |b: &DMatrix<f64>, bases: &[BasisFunction], tau: f64, data: &TrainingSet| {
        log_pi1_with(b, bases, tau, data, n_types, hp).ok()
    };

    for iter in 1..=cfg.n_iter {
        // Step 1a: structure move on the (beta, sigma_z2)-marginal.
        let prop = propose_structure_move(&state.bases, &ctx, &mut rng);
        let kind = prop.kind;
        counters.proposed[kind.index()] += 1;
        let mut current = eval_pi1(&design.b, &state.bases, state.tau_z, &data);
        let mut accepted = false;
        if kind != MoveKind::Stay {
            let cand_b = design.candidate(&prop, &data);
            let cand = eval_pi1(&cand_b, &prop.bases, state.tau_z, &data);
            let cur_v = current.as_ref().map_or(f64::NEG_INFINITY, |c| c.0);
            let cand_v = cand.as_ref().map_or(f64::NEG_INFINITY, |c| c.0);
            let u: f64 = rng.random();
            if u < rj_accept(cur_v, cand_v, prop.log_ratio) {
                accepted = true;
                state.bases = prop.bases;
                design.b = cand_b;
                current = cand;
            }
        }
        if accepted || kind == MoveKind::Stay {
            counters.accepted[kind.index()] += 1;
        }

        // Step 1b, 1c: beta from its marginal t, then sigma_z2 | beta.
        let log_pi1_value = match current {
            Some((v, fit)) => {
                let cond = BetaConditional::from_fit(fit, data.n(), hp);
                state.beta = cond.sample(&mut rng);
                v
            }
            None => {
                if state.beta.len() != state.m() {
                    state.beta.resize(state.m(), 0.0);
                }
                f64::NEG_INFINITY
            }
        };
        let (shape, rate) = sigma_z_params(&design.b, &state, &data, hp);
        state.sigma_z2 = inverse_gamma(shape, rate, &mut rng);

        // Step 2: tau_z.
        if !cfg.fix_tau {
            state.tau_z = gibbs_tau_z(&state, &data, hp, &mut rng);
        }

        // Step 3: theta.
        let mut log_pi2_value = 0.0;
        if let (Some(t), Some(target)) = (theta.as_mut(), target.as_ref()) {
            let cur_log = target.log_density(t, &state, &data);
            let (next, ok, next_log) = mh_theta(t, cur_log, &state, &data, target, &h, &mut rng);
            counters.theta_proposed += 1;
            window.0 += 1;
            if ok {
                counters.theta_accepted += 1;
                window.1 += 1;
                *t = next;
                data.set_theta(t)?;
                design.refresh_observed(&state.bases, &data);
            }
            log_pi2_value = next_log;

            if cfg.adapt_h && iter <= cfg.burn_in && iter % ADAPT_WINDOW == 0 {
                let rate = window.1 as f64 / window.0 as f64;
                if rate > ADAPT_TARGET.1 {
                    h.iter_mut().for_each(|v| *v *= ADAPT_FACTOR);
                } else if rate < ADAPT_TARGET.0 {
                    h.iter_mut().for_each(|v| *v /= ADAPT_FACTOR);
                }
                window = (0, 0);
            }
        }

        if iter > cfg.burn_in && (iter - cfg.burn_in).is_multiple_of(cfg.thin) {
            store.draws.push(Draw {
                chain,
                iteration: iter,
                state: state.clone(),
                theta: theta.clone(),
                log_pi1: log_pi1_value,
                log_pi2: log_pi2_value,
                last_move: kind,
                move_accepted: accepted,
            });
        }
    }
    store.counters = counters;
    store.final_h = vec![h];
    Ok(store)
}
