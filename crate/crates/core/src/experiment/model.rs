use std::path::Path;

use crate::coteach::{predict, predict_network, PredictionMode, TrainedPair};
use crate::error::{Error, Result};
use crate::neural::Network;
use crate::tabular::{Dataset, FeatureSchema};

const SEPARATOR: &str = "---";

/// A trained classifier as produced by any method.
#[derive(Debug, Clone)]
pub enum Model {
    Single(Network),
    Pair(TrainedPair, PredictionMode),
}

impl Model {
    /// N x K class probabilities.
    pub fn predict_proba(&self, x: &Dataset) -> Result<Vec<f64>> {
        match self {
            Model::Single(net) => predict_network(net, x),
            Model::Pair(pair, mode) => predict(pair, x, *mode),
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            Model::Single(net) => format!("single\n{}", net.to_text()),
            Model::Pair(pair, mode) => {
                let mode = match mode {
                    PredictionMode::AverageBoth => "average_both",
                    PredictionMode::TeacherOnly => "teacher_only",
                };
                format!(
                    "pair {mode}\n{}{SEPARATOR}\n{}",
                    pair.teacher.to_text(),
                    pair.student.to_text()
                )
            }
        }
    }

    pub fn from_text(text: &str, schema: &FeatureSchema) -> Result<Self> {
        let (head, body) = text
            .split_once('\n')
            .ok_or_else(|| Error::Serde("model file is empty".into()))?;
        match head.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["single"] => Ok(Model::Single(Network::from_text(body)?)),
            ["pair", mode] => {
                let mode = match *mode {
                    "average_both" => PredictionMode::AverageBoth,
                    "teacher_only" => PredictionMode::TeacherOnly,
                    other => return Err(Error::Serde(format!("unknown prediction mode `{other}`"))),
                };
                let (t, s) = body
                    .split_once(&format!("{SEPARATOR}\n"))
                    .ok_or_else(|| Error::Serde("pair model needs two networks".into()))?;
                let pair = TrainedPair::from_networks(Network::from_text(t)?, Network::from_text(s)?, schema)?;
                Ok(Model::Pair(pair, mode))
            }
            _ => Err(Error::Serde(format!("unknown model header `{head}`"))),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, schema)
    }
}
