//! File formats: model and ensemble JSON in, solution JSON and plot/scan
//! CSV out.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discrimination::{DiscriminationSolution, KktReport};
use crate::geometry::CongruenceReport;
use crate::model::{Ensemble, GptModel, Point};
use crate::oracle::OracleResult;
use crate::polygon::ThresholdScan;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub dim: usize,
    pub unit_effect: Vec<f64>,
    pub state_generators: Vec<Vec<f64>>,
    pub effect_generators: Vec<Vec<f64>>,
}

impl ModelFile {
    pub fn from_model(m: &GptModel) -> Self {
        ModelFile {
            dim: m.dim(),
            unit_effect: m.unit_effect().coords().to_vec(),
            state_generators: m.state_gens().iter().map(|p| p.coords().to_vec()).collect(),
            effect_generators: m.effect_gens().iter().map(|p| p.coords().to_vec()).collect(),
        }
    }

    pub fn into_model(self) -> Result<GptModel> {
        GptModel::new(
            self.dim,
            Point::new(self.unit_effect),
            self.state_generators.into_iter().map(Point::new).collect(),
            self.effect_generators.into_iter().map(Point::new).collect(),
        )
    }
}

/// A model given inline or as a path relative to the ensemble file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Inline(ModelFile),
    Path(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleFile {
    pub model: ModelRef,
    pub states: Vec<Vec<f64>>,
    pub priors: Vec<f64>,
}

impl EnsembleFile {
    pub fn from_ensemble(ens: &Ensemble) -> Self {
        EnsembleFile {
            model: ModelRef::Inline(ModelFile::from_model(ens.model())),
            states: ens.states().iter().map(|p| p.coords().to_vec()).collect(),
            priors: ens.priors().to_vec(),
        }
    }

    /// Resolves the model reference (relative paths against `base_dir`).
    pub fn into_ensemble(self, base_dir: Option<&Path>) -> Result<Ensemble> {
        let model = match self.model {
            ModelRef::Inline(m) => m.into_model()?,
            ModelRef::Path(p) => {
                let mut path = PathBuf::from(&p);
                if path.is_relative() {
                    if let Some(base) = base_dir {
                        path = base.join(path);
                    }
                }
                load_model(&path)?
            }
        };
        Ensemble::new(
            model,
            self.states.into_iter().map(Point::new).collect(),
            self.priors,
        )
    }
}

/// Solution JSON: the solution fields plus certificates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    #[serde(flatten)]
    pub solution: DiscriminationSolution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kkt: Option<KktReport>,
    #[serde(default)]
    pub gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<CongruenceReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleResult>,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("malformed {what}: {e}")))
}

pub fn parse_model(text: &str) -> Result<GptModel> {
    parse::<ModelFile>(text, "model")?.into_model()
}

pub fn load_model(path: &Path) -> Result<GptModel> {
    parse_model(&read_text(path)?)
}

pub fn parse_ensemble(text: &str, base_dir: Option<&Path>) -> Result<Ensemble> {
    parse::<EnsembleFile>(text, "ensemble")?.into_ensemble(base_dir)
}

pub fn load_ensemble(path: &Path) -> Result<Ensemble> {
    parse_ensemble(&read_text(path)?, path.parent())
}

pub fn parse_solution(text: &str) -> Result<SolutionDocument> {
    parse(text, "solution")
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

/// `kind,index,x,y,z` rows for every state and effect generator. Models of
/// other dimensions use `c0,c1,…` column names.
pub fn vertices_csv(m: &GptModel) -> String {
    let mut out = String::from("kind,index,");
    if m.dim() == 3 {
        out.push_str("x,y,z");
    } else {
        let cols: Vec<String> = (0..m.dim()).map(|i| format!("c{i}")).collect();
        out.push_str(&cols.join(","));
    }
    out.push('\n');
    for (kind, gens) in [("state", m.state_gens()), ("effect", m.effect_gens())] {
        for (i, p) in gens.iter().enumerate() {
            let coords: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
            let _ = writeln!(out, "{kind},{i},{}", coords.join(","));
        }
    }
    out
}

/// `p,p_guess,no_measurement_optimal` rows.
pub fn scan_csv(scan: &ThresholdScan) -> String {
    let mut out = String::from("p,p_guess,no_measurement_optimal\n");
    for row in &scan.rows {
        let _ = writeln!(out, "{},{},{}", row.p, row.p_guess, row.no_measurement_optimal);
    }
    out
}
