//! Simulator experiment design: Latin hypercube draws of DCT coefficients
//! around the coarse-data centre, maximin subset selection, and the input
//! deck that crosses each selected field with a grid of known inputs.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dct::{dct2_forward, reconstruct, select_coeffs, CoeffSelection, CoeffVector, SpatialField};
use crate::error::{Error, Result};
use crate::stats::{std_normal_quantile, variance};
use crate::table::{numbered, Table};
use crate::upscale::CoarseGeometry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSpec {
    /// Number of LHS candidates drawn (`N_s`).
    pub n_candidates: usize,
    /// Number of candidates kept by the maximin step (`n_s`).
    pub n_select: usize,
    /// Isotropic variance of the sampling normal. `None` uses the sample
    /// variance of the coarse-data coefficients.
    pub gamma: Option<f64>,
    /// Known-input values crossed with every field.
    pub pvi_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for DesignSpec {
    fn default() -> Self {
        Self {
            n_candidates: 1000,
            n_select: 100,
            gamma: None,
            pvi_grid: uniform_grid(50),
            seed: 1,
        }
    }
}

/// `n` evenly spaced points `1/n, 2/n, ..., 1`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

impl DesignSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_select == 0 || self.n_select > self.n_candidates {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= n_select ({}) <= n_candidates ({})",
                self.n_select, self.n_candidates
            )));
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidConfig(format!("gamma must be positive, got {g}")));
            }
        }
        if self.pvi_grid.is_empty() {
            return Err(Error::InvalidConfig("pvi_grid is empty".into()));
        }
        if self.pvi_grid.iter().any(|v| !(0.0..=1.0).contains(v)) || self.pvi_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "pvi_grid must be strictly increasing within [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Piecewise-constant fine field: every fine cell takes its coarse block's value.
pub fn coarse_fill(coarse: &SpatialField, fine_dims: (usize, usize)) -> Result<SpatialField> {
    let geom = CoarseGeometry::over(fine_dims, coarse.rows(), coarse.cols())?;
    SpatialField::from_fn(fine_dims.0, fine_dims.1, |r, c| {
        coarse.get(r / geom.factor_r, c / geom.factor_c)
    })
}

/// `theta_obs`: the retained DCT coefficients of the coarse-filled field.
pub fn coarse_center(coarse: &SpatialField, fine_dims: (usize, usize), sel: CoeffSelection) -> Result<CoeffVector> {
    select_coeffs(&dct2_forward(&coarse_fill(coarse, fine_dims)?), sel)
}

/// Latin hypercube sample of `N(center, gamma I)`.
///
/// Per coordinate, `n` iid normal draws are ranked and each is replaced by
/// the normal quantile of a uniform point inside its rank's stratum, so
/// every one of the `n` equal-probability strata holds exactly one value.
pub fn lhs_mvn<R: Rng + ?Sized>(center: &CoeffVector, gamma: f64, n: usize, rng: &mut R) -> Result<Vec<CoeffVector>> {
    if n == 0 {
        return Err(Error::InvalidInput("LHS sample size must be >= 1".into()));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    let k2 = center.k2();
    let sd = gamma.sqrt();
    let mut samples = vec![vec![0.0; k2]; n];
    let mut order: Vec<usize> = (0..n).collect();
    for (j, &c) in center.theta.iter().enumerate() {
        let draws: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        order.sort_by(|&a, &b| draws[a].total_cmp(&draws[b]));
        for (rank, &i) in order.iter().enumerate() {
            let u: f64 = Open01.sample(rng);
            let z = std_normal_quantile((rank as f64 + u) / n as f64);
            samples[i][j] = c + sd * z;
        }
    }
    samples.into_iter().map(|t| center.with_theta(t)).collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Greedy maximin subset. Starts from the farthest pair, then repeatedly
/// adds the candidate whose nearest chosen point is farthest away. Ties go
/// to the lowest index. Returns candidate indices in the order chosen.
pub fn maximin_subset(candidates: &[Vec<f64>], n: usize) -> Result<Vec<usize>> {
    let total = candidates.len();
    if n > total {
        return Err(Error::InvalidInput(format!(
            "cannot select {n} points from {total} candidates"
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if total == 1 {
        return Ok(vec![0]);
    }
    let (mut best, mut pair) = (-1.0, (0, 1));
    for i in 0..total {
        for j in i + 1..total {
            let d = dist2(&candidates[i], &candidates[j]);
            if d > best {
                best = d;
                pair = (i, j);
            }
        }
    }
    let mut chosen = vec![pair.0];
    if n >= 2 {
        chosen.push(pair.1);
    }
    let mut taken = vec![false; total];
    let mut nearest = vec![f64::INFINITY; total];
    for &c in &chosen {
        taken[c] = true;
        for (i, cand) in candidates.iter().enumerate() {
            nearest[i] = nearest[i].min(dist2(cand, &candidates[c]));
        }
    }
    while chosen.len() < n {
        let mut pick = None;
        let mut far = -1.0;
        for i in (0..total).filter(|&i| !taken[i]) {
            if nearest[i] > far {
                far = nearest[i];
                pick = Some(i);
            }
        }
        let c = pick.expect("fewer chosen than candidates");
        taken[c] = true;
        chosen.push(c);
        for (i, cand) in candidates.iter().enumerate() {
            nearest[i] = nearest[i].min(dist2(cand, &candidates[c]));
        }
    }
    Ok(chosen)
}

/// Smallest pairwise Euclidean distance within a point set.
pub fn min_pairwise_distance(points: &[&[f64]]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min(dist2(points[i], points[j]));
        }
    }
    best.sqrt()
}

/// One simulator run: field `field_id` at known input `pvi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeckRow {
    pub run_id: usize,
    pub field_id: usize,
    pub theta: Vec<f64>,
    pub pvi: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingDesign {
    pub center: CoeffVector,
    pub gamma: f64,
    /// Selected coefficient vectors, indexed by field id.
    pub thetas: Vec<CoeffVector>,
    pub fields: Vec<SpatialField>,
    pub deck: Vec<DeckRow>,
}

/// Full design pipeline: centre from the coarse data, LHS candidates,
/// maximin selection, reconstruction, and the field-by-pvi deck.
pub fn build_training_inputs(
    spec: &DesignSpec,
    coarse: &SpatialField,
    fine_dims: (usize, usize),
    sel: CoeffSelection,
) -> Result<TrainingDesign> {
    spec.validate()?;
    let center = coarse_center(coarse, fine_dims, sel)?;
    let gamma = match spec.gamma {
        Some(g) => g,
        None => {
            let g = variance(&center.theta);
            if g.is_nan() || g <= 0.0 {
                return Err(Error::InvalidConfig(
                    "coarse coefficients have zero spread; set design.gamma explicitly".into(),
                ));
            }
            g
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let candidates = lhs_mvn(&center, gamma, spec.n_candidates, &mut rng)?;
    let raw: Vec<Vec<f64>> = candidates.iter().map(|c| c.theta.clone()).collect();
    let picked = maximin_subset(&raw, spec.n_select)?;
    let thetas: Vec<CoeffVector> = picked.into_iter().map(|i| candidates[i].clone()).collect();
    let fields = thetas.iter().map(reconstruct).collect::<Result<Vec<_>>>()?;
    let mut deck = Vec::with_capacity(thetas.len() * spec.pvi_grid.len());
    for (field_id, t) in thetas.iter().enumerate() {
        for &pvi in &spec.pvi_grid {
            deck.push(DeckRow {
                run_id: deck.len(),
                field_id,
                theta: t.theta.clone(),
                pvi,
            });
        }
    }
    Ok(TrainingDesign {
        center,
        gamma,
        thetas,
        fields,
        deck,
    })
}

fn deck_header(k2: usize) -> Vec<String> {
    let mut h = vec!["run_id".to_owned(), "field_id".to_owned()];
    h.extend(numbered("theta", k2));
    h.push("pvi".to_owned());
    h
}

/// Deck CSV: `run_id,field_id,theta_1..theta_k2,pvi`.
pub fn deck_to_table(deck: &[DeckRow]) -> Table {
    let k2 = deck.first().map_or(0, |r| r.theta.len());
    let mut t = Table::new(deck_header(k2));
    for r in deck {
        let mut row = vec![r.run_id as f64, r.field_id as f64];
        row.extend(&r.theta);
        row.push(r.pvi);
        t.rows.push(row);
    }
    t
}

fn as_index(v: f64, what: &str, origin: &Path, line: usize) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::parse(
            origin,
            line,
            format!("{what} must be a non-negative integer, got {v}"),
        ))
    }
}

pub fn deck_from_table(table: &Table, origin: &Path) -> Result<Vec<DeckRow>> {
    let k2 = table.header.len().saturating_sub(3);
    table.expect_header(&deck_header(k2), origin)?;
    let mut out = Vec::with_capacity(table.rows.len());
    for (i, row) in table.rows.iter().enumerate() {
        let line = i + 2;
        let pvi = row[k2 + 2];
        if !(0.0..=1.0).contains(&pvi) {
            return Err(Error::parse(origin, line, format!("pvi {pvi} outside [0, 1]")));
        }
        out.push(DeckRow {
            run_id: as_index(row[0], "run_id", origin, line)?,
            field_id: as_index(row[1], "field_id", origin, line)?,
            theta: row[2..k2 + 2].to_vec(),
            pvi,
        });
    }
    Ok(out)
}

pub fn read_deck(path: &Path) -> Result<Vec<DeckRow>> {
    deck_from_table(&Table::read(path)?, path)
}
