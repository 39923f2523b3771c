//! Forward-model interface and a synthetic water-cut model for end-to-end
//! runs without a reservoir simulator.
//!
//! [`ToyWatercut`] is an invented analytic stand-in, not a flow simulator.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dct::{Reconstructor, SpatialField};
use crate::design::DeckRow;
use crate::emulator::{inv_logit, logit_clamped};
use crate::error::{Error, Result};
use crate::table::Table;

/// Deterministic map from a field and known inputs to a raw output.
pub trait ForwardModel: Sync {
    /// Number of known inputs `run` expects.
    fn k1(&self) -> usize;

    fn run(&self, field: &SpatialField, known: &[f64]) -> Result<f64>;
}

/// Response transform applied before emulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    /// Clamped logit, for outputs that are fractions in `[0, 1]`.
    #[default]
    Logit,
    Identity,
}

impl Transform {
    pub fn apply(self, raw: f64) -> Result<f64> {
        match self {
            Transform::Logit => logit_clamped(raw),
            Transform::Identity => Ok(raw),
        }
    }

    pub fn invert(self, z: f64) -> f64 {
        match self {
            Transform::Logit => inv_logit(z),
            Transform::Identity => z,
        }
    }
}

/// Synthetic water cut `w = logistic(a (pvi - b))` with breakthrough time
/// `b = c0 + c1 * mean(exp(field))` over one grid row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyWatercut {
    pub a: f64,
    pub c0: f64,
    pub c1: f64,
    /// Row averaged by `b`; `None` is the middle row.
    pub band_row: Option<usize>,
}

impl Default for ToyWatercut {
    /// `c1` puts `b` in `[0.4, 0.8]` for fields in `[-2, 2]`.
    fn default() -> Self {
        Self {
            a: 12.0,
            c0: 0.4,
            c1: 0.4 / 2f64.exp(),
            band_row: None,
        }
    }
}

impl ToyWatercut {
    pub fn validate(&self) -> Result<()> {
        if ![self.a, self.c0, self.c1].iter().all(|v| v.is_finite()) || self.a <= 0.0 {
            return Err(Error::InvalidConfig(
                "toy model needs finite parameters with a > 0".into(),
            ));
        }
        Ok(())
    }

    fn band(&self, field: &SpatialField) -> Result<usize> {
        let row = self.band_row.unwrap_or(field.rows() / 2);
        if row >= field.rows() {
            return Err(Error::InvalidInput(format!(
                "band row {row} outside a {}-row field",
                field.rows()
            )));
        }
        Ok(row)
    }

    pub fn breakthrough(&self, field: &SpatialField) -> Result<f64> {
        let row = self.band(field)?;
        let n = field.cols();
        let m = field.values()[row * n..(row + 1) * n]
            .iter()
            .map(|v| v.exp())
            .sum::<f64>()
            / n as f64;
        Ok(self.c0 + self.c1 * m)
    }

    pub fn watercut(&self, field: &SpatialField, pvi: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&pvi) {
            return Err(Error::InvalidInput(format!("pvi {pvi} outside [0, 1]")));
        }
        Ok(inv_logit(self.a * (pvi - self.breakthrough(field)?)))
    }
}

impl ForwardModel for ToyWatercut {
    fn k1(&self) -> usize {
        1
    }

    fn run(&self, field: &SpatialField, known: &[f64]) -> Result<f64> {
        match known {
            [pvi] => self.watercut(field, *pvi),
            _ => Err(Error::InvalidInput(format!(
                "toy model takes 1 known input, got {}",
                known.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub run_id: usize,
    pub pvi: f64,
    pub raw: f64,
    pub transformed: f64,
}

/// Runs the model on every deck row. Row `i` adds `N(0, noise_sd^2)` noise
/// on the transformed scale from its own stream keyed by `run_id`, so the
/// result does not depend on evaluation order.
pub fn simulate_dataset(
    deck: &[DeckRow],
    recon: &Reconstructor,
    model: &dyn ForwardModel,
    transform: Transform,
    noise_sd: f64,
    seed: u64,
) -> Result<Vec<SimOutput>> {
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise_sd must be >= 0, got {noise_sd}")));
    }
    if model.k1() != 1 {
        return Err(Error::InvalidConfig(
            "deck rows carry exactly one known input (pvi)".into(),
        ));
    }
    let noise = Normal::new(0.0, noise_sd).expect("validated sd");
    deck.iter()
        .map(|row| {
            if row.theta.len() != recon.selection().len() {
                return Err(Error::InvalidInput(format!(
                    "deck run {} has {} coefficients, selection needs {}",
                    row.run_id,
                    row.theta.len(),
                    recon.selection().len()
                )));
            }
            let field = recon.field(&row.theta)?;
            let raw = model.run(&field, &[row.pvi])?;
            let mut transformed = transform.apply(raw)?;
            if noise_sd > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(row.run_id as u64);
                transformed += noise.sample(&mut rng);
            }
            Ok(SimOutput {
                run_id: row.run_id,
                pvi: row.pvi,
                raw,
                transformed,
            })
        })
        .collect()
}

const OUTPUT_HEADER: [&str; 4] = ["run_id", "pvi", "raw", "transformed"];

/// Output CSV: `run_id,pvi,raw,transformed`.
pub fn outputs_to_table(outputs: &[SimOutput]) -> Table {
    let mut t = Table::new(OUTPUT_HEADER.iter().map(|s| s.to_string()).collect());
    t.rows = outputs
        .iter()
        .map(|o| vec![o.run_id as f64, o.pvi, o.raw, o.transformed])
        .collect();
    t
}

pub fn outputs_from_table(table: &Table, origin: &Path) -> Result<Vec<SimOutput>> {
    table.expect_header(&OUTPUT_HEADER.map(String::from), origin)?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if !(r[0] >= 0.0 && r[0].fract() == 0.0) {
                return Err(Error::parse(origin, i + 2, "run_id must be a non-negative integer"));
            }
            Ok(SimOutput {
                run_id: r[0] as usize,
                pvi: r[1],
                raw: r[2],
                transformed: r[3],
            })
        })
        .collect()
}

pub fn read_outputs(path: &Path) -> Result<Vec<SimOutput>> {
    outputs_from_table(&Table::read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dct::CoeffSelection;

    #[test]
    fn toy_examples() {
        let m = ToyWatercut::default();
        for level in [-2.0, 0.0, 2.0] {
            let f = SpatialField::new(5, 5, vec![level; 25]).unwrap();
            let b = m.breakthrough(&f).unwrap();
            assert!((0.2..=0.8).contains(&b), "b = {b}");
            assert!(m.watercut(&f, 0.0).unwrap() < 0.1);
        }
        let f = SpatialField::from_fn(6, 6, |r, c| ((r * 6 + c) as f64 * 0.37).sin()).unwrap();
        let mut prev = 0.0;
        for i in 0..=20 {
            let w = m.watercut(&f, i as f64 / 20.0).unwrap();
            assert!(w > prev && w < 1.0);
            prev = w;
        }
    }

    #[test]
    fn only_band_matters() {
        let m = ToyWatercut::default();
        let a = SpatialField::from_fn(5, 4, |r, c| if r == 2 { c as f64 * 0.1 } else { 1.0 }).unwrap();
        let b = SpatialField::from_fn(5, 4, |r, c| if r == 2 { c as f64 * 0.1 } else { -3.0 }).unwrap();
        assert_eq!(m.run(&a, &[0.4]).unwrap(), m.run(&b, &[0.4]).unwrap());
        assert_eq!(m.run(&a, &[0.4]).unwrap(), m.run(&a, &[0.4]).unwrap());
        assert!(m.run(&a, &[1.5]).is_err());
    }

    #[test]
    fn dataset_noise_and_determinism() {
        let sel = CoeffSelection::Triangle(2);
        let recon = Reconstructor::new(sel, (8, 8)).unwrap();
        let deck: Vec<DeckRow> = (0..6)
            .map(|i| DeckRow {
                run_id: i,
                field_id: i / 3,
                theta: vec![0.1 * i as f64, 0.2, -0.1],
                pvi: 0.3,
            })
            .collect();
        let m = ToyWatercut::default();
        let clean = simulate_dataset(&deck, &recon, &m, Transform::Logit, 0.0, 1).unwrap();
        for (o, row) in clean.iter().zip(&deck) {
            let raw = m.run(&recon.field(&row.theta).unwrap(), &[row.pvi]).unwrap();
            assert_eq!(o.transformed, logit_clamped(raw).unwrap());
        }
        let a = simulate_dataset(&deck, &recon, &m, Transform::Logit, 0.1, 7).unwrap();
        let b = simulate_dataset(&deck, &recon, &m, Transform::Logit, 0.1, 7).unwrap();
        assert_eq!(a, b);
        let rev: Vec<DeckRow> = deck.iter().rev().cloned().collect();
        let c = simulate_dataset(&rev, &recon, &m, Transform::Logit, 0.1, 7).unwrap();
        assert_eq!(c.iter().rev().cloned().collect::<Vec<_>>(), a);
        assert!(a.iter().zip(&clean).any(|(x, y)| x.transformed != y.transformed));
    }

    #[test]
    fn output_table_round_trip() {
        let o = vec![SimOutput {
            run_id: 3,
            pvi: 0.5,
            raw: 0.25,
            transformed: -1.0986,
        }];
        let t = outputs_to_table(&o);
        let back = outputs_from_table(
            &Table::parse(&t.to_csv_string(), Path::new("o")).unwrap(),
            Path::new("o"),
        )
        .unwrap();
        assert_eq!(back, o);
    }
}
