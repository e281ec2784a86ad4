//! JSON input formats for spaces, actions and couplings.

use std::fs;
use std::path::{Path, PathBuf};

use eqbox_core::group::validate_action;
use eqbox_core::mmspace::{validate_space, RawSpace};
use eqbox_core::{Action, GroupError, Plan, Space, SpaceError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gen::{gen_cycle, CycleMetric, GenError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON in {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Gen(#[from] GenError),
}

impl IoError {
    /// True for inputs that were read but rejected by validation.
    pub fn is_validation(&self) -> bool {
        matches!(self, IoError::Json { .. } | IoError::Space(_) | IoError::Group(_) | IoError::Gen(GenError::Space(_) | GenError::Group(_)))
    }
}

/// A space file; labels default to `0, 1, …`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceFile {
    #[serde(default)]
    pub labels: Vec<String>,
    pub dist: Vec<Vec<f64>>,
    pub mass: Vec<f64>,
}

impl SpaceFile {
    pub fn into_space(self) -> Result<Space, SpaceError> {
        let labels = if self.labels.is_empty() {
            (0..self.dist.len()).map(|i| i.to_string()).collect()
        } else {
            self.labels
        };
        validate_space(RawSpace { labels, dist: self.dist, mass: self.mass })
    }
}

/// The space of an action: inline, or a path relative to the action file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpaceRef {
    Path(PathBuf),
    Inline(SpaceFile),
}

/// `{"space": …, "generators": [[…], …]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionFile {
    pub space: SpaceRef,
    #[serde(default)]
    pub generators: Vec<Vec<usize>>,
}

/// An instance in an experiment config: a generated cycle or an action.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSpec {
    Cycle {
        cycle: usize,
        #[serde(default)]
        metric: CycleMetric,
        /// Generator power; `1` gives the full rotation group.
        #[serde(default = "one")]
        step: usize,
    },
    Action(ActionFile),
}

fn one() -> usize {
    1
}

impl InstanceSpec {
    pub fn build(&self, base: &Path) -> Result<Action, IoError> {
        match self {
            InstanceSpec::Cycle { cycle, metric, step } => {
                let full = gen_cycle(*cycle, *metric)?;
                if *step == 1 {
                    Ok(full)
                } else {
                    let gen = eqbox_core::Perm::rotation(*cycle, *step).as_slice().to_vec();
                    Ok(validate_action(full.space().clone(), &[gen])?)
                }
            }
            InstanceSpec::Action(file) => action_from_file(file.clone(), base),
        }
    }
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.into(), source })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    fs::write(path, contents).map_err(|source| IoError::Write { path: path.into(), source })
}

pub fn load_space(path: &Path) -> Result<Space, IoError> {
    Ok(read_json::<SpaceFile>(path)?.into_space()?)
}

fn action_from_file(file: ActionFile, base: &Path) -> Result<Action, IoError> {
    let space = match file.space {
        SpaceRef::Inline(s) => s.into_space()?,
        SpaceRef::Path(p) => load_space(&base.join(p))?,
    };
    Ok(validate_action(space, &file.generators)?)
}

/// Reads either an action file or a bare space file (trivial action).
pub fn load_action(path: &Path) -> Result<Action, IoError> {
    let value: serde_json::Value = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let json_err = |source| IoError::Json { path: path.into(), source };
    if value.get("space").is_some() {
        let file: ActionFile = serde_json::from_value(value).map_err(json_err)?;
        action_from_file(file, base)
    } else {
        let file: SpaceFile = serde_json::from_value(value).map_err(json_err)?;
        Ok(Action::trivial(file.into_space()?))
    }
}

pub fn load_coupling(path: &Path) -> Result<Plan, IoError> {
    read_json(path)
}

pub fn space_file(space: &Space) -> SpaceFile {
    SpaceFile { labels: space.labels().to_vec(), dist: space.dist_rows(), mass: space.mass().to_vec() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn action_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let space = dir.path().join("two.json");
        write_file(&space, r#"{"dist": [[0, 1], [1, 0]], "mass": [0.5, 0.5]}"#).unwrap();
        let act = dir.path().join("act.json");
        write_file(&act, r#"{"space": "two.json", "generators": [[1, 0]]}"#).unwrap();
        let a = load_action(&act).unwrap();
        assert_eq!(a.order(), 2);
        assert_eq!(a.space().labels(), &["0", "1"]);
        assert!(load_action(&space).unwrap().is_trivial());

        let inline = dir.path().join("inline.json");
        write_file(&inline, r#"{"space": {"dist": [[0, 1], [1, 0]], "mass": [0.3, 0.7]}, "generators": [[1, 0]]}"#).unwrap();
        let err = load_action(&inline).unwrap_err();
        assert!(err.is_validation(), "{err}");
    }

    #[test]
    fn instance_specs() {
        let spec: InstanceSpec = serde_json::from_str(r#"{"cycle": 6, "step": 3}"#).unwrap();
        let a = spec.build(Path::new(".")).unwrap();
        assert_eq!((a.space().len(), a.order()), (6, 2));
        let spec: InstanceSpec = serde_json::from_str(r#"{"cycle": 4, "metric": "chord"}"#).unwrap();
        assert_eq!(spec.build(Path::new(".")).unwrap().order(), 4);
    }
}
