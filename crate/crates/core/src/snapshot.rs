//! JSON model snapshot: predictor scaling, hyperparameters and the thinned
//! emulator draws, enough to predict without the training data.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dct::CoeffSelection;
use crate::emulator::{predict, BmarsState, Prediction, Scaling};
use crate::error::{Error, Result};
use crate::forward::Transform;
use crate::posterior::Hyperparams;
use crate::sampler::PosteriorStore;
use crate::table::write_text;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSnapshot {
    pub version: u32,
    pub k1: usize,
    pub k2: usize,
    pub selection: Option<CoeffSelection>,
    pub field_dims: Option<(usize, usize)>,
    pub transform: Transform,
    pub scaling: Scaling,
    pub hyperparams: Hyperparams,
    pub draws: Vec<BmarsState>,
    /// Calibration draws of theta, parallel to `draws`, when the model came
    /// from a calibration run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_draws: Option<Vec<Vec<f64>>>,
}

impl ModelSnapshot {
    pub fn from_store(
        store: &PosteriorStore,
        k1: usize,
        k2: usize,
        scaling: Scaling,
        hyperparams: Hyperparams,
        transform: Transform,
    ) -> Self {
        let thetas: Vec<Vec<f64>> = store.thetas().map(<[f64]>::to_vec).collect();
        Self {
            version: SNAPSHOT_VERSION,
            k1,
            k2,
            selection: None,
            field_dims: None,
            transform,
            scaling,
            hyperparams,
            draws: store.states().cloned().collect(),
            theta_draws: (!thetas.is_empty()).then_some(thetas),
        }
    }

    pub fn with_grid(mut self, selection: CoeffSelection, field_dims: (usize, usize)) -> Self {
        self.selection = Some(selection);
        self.field_dims = Some(field_dims);
        self
    }

    pub fn p(&self) -> usize {
        self.k1 + self.k2
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SNAPSHOT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported snapshot version {}",
                self.version
            )));
        }
        if self.scaling.p() != self.p() || self.scaling.scale.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(Error::InvalidInput("snapshot scaling does not match k1 + k2".into()));
        }
        if let Some(sel) = self.selection {
            if sel.len() != self.k2 {
                return Err(Error::InvalidInput("snapshot selection size differs from k2".into()));
            }
        }
        self.hyperparams.validate()?;
        for d in &self.draws {
            d.check(self.p(), self.hyperparams.m_max, self.hyperparams.max_degree)?;
        }
        if let Some(t) = &self.theta_draws {
            if t.len() != self.draws.len() || t.iter().any(|v| v.len() != self.k2) {
                return Err(Error::InvalidInput(
                    "theta draws do not line up with emulator draws".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::parse(path, j.line(), j.to_string()),
            other => other,
        })
    }

    /// Posterior predictive summary (transformed scale) at raw inputs.
    pub fn predict_raw(&self, x: &[f64], quantiles: &[f64]) -> Result<Prediction> {
        if x.len() != self.p() {
            return Err(Error::InvalidInput(format!(
                "expected {} inputs, got {}",
                self.p(),
                x.len()
            )));
        }
        predict(self.draws.iter(), &self.scaling.apply(x), quantiles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emulator::{BasisFunction, HingeFactor, Sign};

    fn snapshot() -> ModelSnapshot {
        let state = BmarsState {
            bases: vec![
                BasisFunction::Intercept,
                BasisFunction::product(vec![HingeFactor {
                    var: 1,
                    knot: 0.25,
                    sign: Sign::Minus,
                }])
                .unwrap(),
            ],
            beta: vec![1.0, 2.0],
            sigma_z2: 0.5,
            tau_z: 1.0,
        };
        ModelSnapshot {
            version: SNAPSHOT_VERSION,
            k1: 1,
            k2: 1,
            selection: None,
            field_dims: None,
            transform: Transform::Identity,
            scaling: Scaling {
                offset: vec![0.0, 1.0],
                scale: vec![1.0, 2.0],
            },
            hyperparams: Hyperparams::default(),
            draws: vec![state],
            theta_draws: None,
        }
    }

    #[test]
    fn json_round_trip() {
        let s = snapshot();
        let back = ModelSnapshot::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn predicts_on_raw_scale() {
        let s = snapshot();
        // x_2 = 1.0 -> scaled 0.0 -> hinge [-(0 - 0.25)]_+ = 0.25.
        let p = s.predict_raw(&[0.3, 1.0], &[0.5]).unwrap();
        assert!((p.mean - 1.5).abs() < 1e-12);
        assert!(s.predict_raw(&[0.3], &[0.5]).is_err());
    }

    #[test]
    fn rejects_inconsistent_snapshots() {
        let mut s = snapshot();
        s.k2 = 3;
        assert!(ModelSnapshot::from_json(&s.to_json().unwrap()).is_err());
        let text = snapshot()
            .to_json()
            .unwrap()
            .replace("\"version\": 1", "\"version\": 9");
        assert!(ModelSnapshot::from_json(&text).is_err());
    }
}
