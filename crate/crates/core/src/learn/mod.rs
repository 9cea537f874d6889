//! The four binary classifiers and a common scoring interface.

pub mod forest;
pub mod gnb;
pub mod logistic;
pub mod svm;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forest::{fit_random_forest, ForestConfig, RfModel};
pub use gnb::{fit_gnb, GnbModel};
pub use logistic::{fit_logistic, LogisticConfig, LrModel};
pub use svm::{fit_linear_svm, SvmConfig, SvmModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lr,
    Nb,
    Svm,
    Rf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Lr, ModelKind::Nb, ModelKind::Svm, ModelKind::Rf];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Nb => "nb",
            ModelKind::Svm => "svm",
            ModelKind::Rf => "rf",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown model kind {s:?} (expected lr, nb, svm or rf)")))
    }
}

/// Hyperparameters for every model kind.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub lr: LogisticConfig,
    pub svm: SvmConfig,
    pub rf: ForestConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Lr(LrModel),
    Nb(GnbModel),
    Svm(SvmModel),
    Rf(RfModel),
}

pub fn fit_model(
    kind: ModelKind,
    config: &ModelConfig,
    x: &DMatrix<f64>,
    y: &[bool],
    sample_weights: Option<&[f64]>,
    seed: u64,
) -> Result<Model> {
    Ok(match kind {
        ModelKind::Lr => Model::Lr(fit_logistic(x, y, sample_weights, &config.lr)?),
        ModelKind::Nb => Model::Nb(fit_gnb(x, y, sample_weights)?),
        ModelKind::Svm => Model::Svm(fit_linear_svm(x, y, sample_weights, &config.svm, seed)?),
        ModelKind::Rf => Model::Rf(fit_random_forest(x, y, sample_weights, &config.rf, seed)?),
    })
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Lr(_) => ModelKind::Lr,
            Model::Nb(_) => ModelKind::Nb,
            Model::Svm(_) => ModelKind::Svm,
            Model::Rf(_) => ModelKind::Rf,
        }
    }

    /// Number of input columns the model was trained on, when recorded.
    pub fn n_features(&self) -> Option<usize> {
        match self {
            Model::Lr(m) => Some(m.coefficients.len()),
            Model::Nb(m) => Some(m.means[0].len()),
            Model::Svm(m) => Some(m.weights.len()),
            Model::Rf(_) => None,
        }
    }

    pub fn score_row(&self, x: &[f64]) -> f64 {
        match self {
            Model::Lr(m) => m.score(x),
            Model::Nb(m) => m.score(x),
            Model::Svm(m) => m.margin(x),
            Model::Rf(m) => m.score(x),
        }
    }

    /// 0.5 for probabilistic scores, 0 for SVM margins.
    pub fn default_threshold(&self) -> f64 {
        match self {
            Model::Svm(_) => 0.0,
            _ => 0.5,
        }
    }

    pub fn predict_scores(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if let Some(m) = self.n_features() {
            if m != x.ncols() {
                return Err(Error::Shape(format!("model expects {m} columns, got {}", x.ncols())));
            }
        }
        let mut row = vec![0.0; x.ncols()];
        Ok((0..x.nrows())
            .map(|i| {
                row.iter_mut().zip(x.row(i).iter()).for_each(|(r, v)| *r = *v);
                self.score_row(&row)
            })
            .collect())
    }

    /// Labels by `score > threshold` (default threshold per kind).
    pub fn predict_labels(&self, x: &DMatrix<f64>, threshold: Option<f64>) -> Result<Vec<bool>> {
        let t = threshold.unwrap_or_else(|| self.default_threshold());
        Ok(self.predict_scores(x)?.into_iter().map(|s| s > t).collect())
    }
}

pub const MODEL_FORMAT: &str = "persona-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    model: Model,
}

/// Writes a versioned JSON document. Floats round-trip exactly.
pub fn save_model<W: Write>(model: &Model, w: W) -> Result<()> {
    let doc = ModelDocument {
        format: MODEL_FORMAT.into(),
        version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    serde_json::to_writer_pretty(w, &doc)?;
    Ok(())
}

pub fn load_model<R: Read>(r: R) -> Result<Model> {
    let doc: ModelDocument = serde_json::from_reader(r)?;
    if doc.format != MODEL_FORMAT || doc.version != MODEL_FORMAT_VERSION {
        return Err(Error::Parameter(format!(
            "unsupported model document {} v{}",
            doc.format, doc.version
        )));
    }
    Ok(doc.model)
}
