use std::fs;
use std::path::Path;

use minaffine::{build_measure, Measure1D, MeasureSpec, MinAffineCost};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub marginals: Vec<MeasureSpec>,
    pub cost: CostSpec,
    #[serde(default)]
    pub options: ProblemOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CostSpec {
    Pieces { pieces: Vec<[f64; 3]> },
    Named {
        #[serde(rename = "type")]
        kind: NamedCost,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedCost {
    MinCoordinates,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemOptions {
    pub max_order: Option<usize>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    /// Relative value tolerance of the local search.
    pub tolerance: Option<f64>,
    pub verify_tolerance: Option<f64>,
    pub oracle_atoms: Option<usize>,
}

/// A parsed problem with its marginals built.
#[derive(Debug, Clone)]
pub struct Problem {
    pub file: ProblemFile,
    pub marginals: Vec<Measure1D>,
}

impl Problem {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let file: ProblemFile =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::from_file(file, path.parent().unwrap_or(Path::new("")))
    }

    /// Relative empirical sample paths resolve against `base`.
    pub fn from_file(file: ProblemFile, base: &Path) -> Result<Self, CliError> {
        if file.marginals.is_empty() {
            return Err(CliError::Usage("problem has no marginals".into()));
        }
        let marginals = file
            .marginals
            .iter()
            .enumerate()
            .map(|(k, spec)| {
                let spec = match spec {
                    MeasureSpec::Empirical { path: Some(p), samples } if p.is_relative() => {
                        MeasureSpec::Empirical { path: Some(base.join(p)), samples: samples.clone() }
                    }
                    other => other.clone(),
                };
                build_measure(&spec).map_err(|e| match e {
                    minaffine::Error::Io(io) => CliError::Io(format!("marginal {}: {io}", k + 1)),
                    other => CliError::Invalid(format!("marginal {}: {other}", k + 1)),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Problem { file, marginals })
    }

    pub fn pieces(&self) -> Option<&[[f64; 3]]> {
        match &self.file.cost {
            CostSpec::Pieces { pieces } => Some(pieces),
            CostSpec::Named { .. } => None,
        }
    }

    /// The two-marginal affine cost, or a validation error explaining why there is none.
    pub fn affine_cost(&self) -> Result<MinAffineCost, CliError> {
        let Some(pieces) = self.pieces() else {
            return Err(CliError::Invalid("this command needs an affine cost given by pieces".into()));
        };
        if self.marginals.len() != 2 {
            return Err(CliError::Invalid(format!(
                "an affine cost needs exactly 2 marginals, got {}",
                self.marginals.len()
            )));
        }
        MinAffineCost::from_triples(pieces).map_err(CliError::from_core)
    }

    pub fn working_box(&self) -> minaffine::Rect {
        minaffine::working_box(&self.marginals[0], &self.marginals[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_cost_forms() {
        let f: ProblemFile = serde_json::from_str(
            r#"{"marginals":[{"family":"uniform","lo":0,"hi":1}],"cost":{"pieces":[[1,0,0],[0,1,0]]}}"#,
        )
        .unwrap();
        assert_eq!(f.cost, CostSpec::Pieces { pieces: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]] });
        let f: ProblemFile = serde_json::from_str(
            r#"{"marginals":[],"cost":{"type":"min-coordinates"},"options":{"seed":3}}"#,
        )
        .unwrap();
        assert_eq!(f.cost, CostSpec::Named { kind: NamedCost::MinCoordinates });
        assert_eq!(f.options.seed, Some(3));
    }

    #[test]
    fn rejects_unknown_option() {
        let r: Result<ProblemFile, _> = serde_json::from_str(
            r#"{"marginals":[],"cost":{"type":"min-coordinates"},"options":{"sed":3}}"#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn relative_sample_path() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("s.txt"), "0.1\n0.5\n0.9\n0.3\n").unwrap();
        let f: ProblemFile = serde_json::from_str(
            r#"{"marginals":[{"family":"empirical","path":"s.txt"}],"cost":{"type":"min-coordinates"}}"#,
        )
        .unwrap();
        let p = Problem::from_file(f, dir.path()).unwrap();
        assert_eq!(p.marginals[0].support(), (0.1, 0.9));
    }
}
