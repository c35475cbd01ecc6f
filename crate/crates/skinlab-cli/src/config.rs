//! Run configuration: JSON file, then command-line overrides.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use skinlab::model::Boundary;
use skinlab::ModelSpec;

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SKINLAB_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Measurement followed by the unitary feedback.
    Feedback,
    /// Measurement only.
    Measure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BcKind {
    Obc,
    Pbc,
}

impl From<BcKind> for Boundary {
    fn from(b: BcKind) -> Self {
        match b {
            BcKind::Obc => Boundary::Obc,
            BcKind::Pbc => Boundary::Pbc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Dense,
    Krylov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Statevector,
    Gaussian,
}

/// A single number, an explicit list, or text such as `16:48:8,60`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumList {
    One(f64),
    Many(Vec<f64>),
    Text(String),
}

impl NumList {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match self {
            NumList::One(x) => Ok(vec![*x]),
            NumList::Many(v) => Ok(v.clone()),
            NumList::Text(s) => parse_list(s),
        }
    }

    pub fn single(&self, name: &str) -> Result<f64, CliError> {
        match self.values()?.as_slice() {
            [x] => Ok(*x),
            v => Err(CliError::Config(format!(
                "{name} needs a single value, got {}",
                v.len()
            ))),
        }
    }
}

/// Comma-separated items, each a number or an inclusive `start:stop[:step]`.
pub fn parse_list(s: &str) -> Result<Vec<f64>, CliError> {
    let bad = |item: &str| CliError::Config(format!("bad list item `{item}`"));
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad(item)))
            .collect::<Result<_, _>>()?;
        match nums.as_slice() {
            [x] => out.push(*x),
            [a, b] | [a, b, _] => {
                let step = if nums.len() == 3 { nums[2] } else { 1.0 };
                if step <= 0.0 || b < a {
                    return Err(bad(item));
                }
                let n = ((b - a) / step + 1e-9).floor() as usize;
                out.extend((0..=n).map(|k| a + step * k as f64));
            }
            _ => return Err(bad(item)),
        }
    }
    if out.is_empty() {
        return Err(CliError::Config(format!("empty list `{s}`")));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub bc: BcKind,
    #[serde(rename = "L")]
    pub l: NumList,
    pub gamma: NumList,
    pub t: f64,
    /// Particle number; many-body runs only.
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub precision: String,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Defaults per command when absent.
    pub format: Option<Format>,

    /// lastsite, uniform, file:PATH (single particle); domainwall,
    /// sites:1,3,5 (many body). Defaults per command when absent.
    pub init: Option<String>,
    pub threshold: f64,
    pub t_max: Option<f64>,
    pub grid_points: usize,

    /// Number of leading right eigenmodes to dump as |ρ| maps.
    pub modes: usize,
    pub solver: SolverKind,
    pub nev: usize,

    pub order: u8,
    pub compare: bool,

    pub ntraj: usize,
    pub dt: f64,
    pub sample_dt: f64,
    pub backend: BackendKind,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::Feedback,
            bc: BcKind::Obc,
            l: NumList::One(20.0),
            gamma: NumList::One(0.6),
            t: 1.0,
            n: None,
            precision: "double".into(),
            seed: 0,
            output: None,
            format: None,
            init: None,
            threshold: 0.01,
            t_max: None,
            grid_points: skinlab::dynamics::DEFAULT_GRID_POINTS,
            modes: 0,
            solver: SolverKind::Dense,
            nev: 4,
            order: 1,
            compare: false,
            ntraj: 100,
            dt: 0.01,
            sample_dt: 0.5,
            backend: BackendKind::Statevector,
        }
    }
}

fn as_size(x: f64, name: &str) -> Result<usize, CliError> {
    if x >= 0.0 && x.fract() == 0.0 {
        Ok(x as usize)
    } else {
        Err(CliError::Config(format!(
            "{name} must be a non-negative integer, got {x}"
        )))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn feedback(&self) -> bool {
        self.model == ModelKind::Feedback
    }

    pub fn sizes(&self) -> Result<Vec<usize>, CliError> {
        self.l
            .values()?
            .into_iter()
            .map(|x| as_size(x, "L"))
            .collect()
    }

    /// The single model of a non-scan command.
    pub fn spec(&self) -> Result<ModelSpec, CliError> {
        let l = as_size(self.l.single("L")?, "L")?;
        let g = self.gamma.single("gamma")?;
        Ok(ModelSpec::new(l, self.bc.into(), g, self.feedback())?.with_hopping(self.t)?)
    }

    /// Cartesian product L × γ in that order.
    pub fn specs(&self) -> Result<Vec<ModelSpec>, CliError> {
        let gs = self.gamma.values()?;
        let mut out = Vec::new();
        for l in self.sizes()? {
            for &g in &gs {
                out.push(
                    ModelSpec::new(l, self.bc.into(), g, self.feedback())?.with_hopping(self.t)?,
                );
            }
        }
        Ok(out)
    }

    /// Primary output path: the configured one, or a name derived from the
    /// command and model inside the output directory.
    pub fn output_path(&self, command: &str, format: Format) -> PathBuf {
        let stem = self.default_stem(command);
        match &self.output {
            Some(p) if p.is_dir() => p.join(format!("{stem}.{}", format.ext())),
            Some(p) => p.clone(),
            None => {
                let dir = std::env::var_os(OUT_DIR_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("."));
                dir.join(format!("{stem}.{}", format.ext()))
            }
        }
    }

    fn default_stem(&self, command: &str) -> String {
        let model = match self.model {
            ModelKind::Feedback => "feedback",
            ModelKind::Measure => "measure",
        };
        let bc = match self.bc {
            BcKind::Obc => "obc",
            BcKind::Pbc => "pbc",
        };
        let one = |v: &NumList| match v {
            NumList::One(x) => format!("{x}"),
            NumList::Many(xs) => xs
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join("-"),
            NumList::Text(s) => s.replace([':', ','], "-"),
        };
        let mut s = format!(
            "{command}_{model}_{bc}_L{}_g{}",
            one(&self.l),
            one(&self.gamma)
        );
        if let Some(n) = self.n {
            s.push_str(&format!("_N{n}"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(
            parse_list("16:48:8").unwrap(),
            vec![16.0, 24.0, 32.0, 40.0, 48.0]
        );
        assert_eq!(parse_list("0.5, 1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        assert_eq!(parse_list("3:5").unwrap(), vec![3.0, 4.0, 5.0]);
        assert_eq!(parse_list("0.1:0.3:0.1").unwrap().len(), 3);
        assert!(parse_list("5:3").is_err());
        assert!(parse_list("a").is_err());
    }

    #[test]
    fn config_json_accepts_numbers_lists_and_text() {
        let c: RunConfig =
            serde_json::from_str(r#"{"L": [8, 12], "gamma": "0.5,1", "bc": "pbc", "N": 3}"#)
                .unwrap();
        assert_eq!(c.sizes().unwrap(), vec![8, 12]);
        assert_eq!(c.specs().unwrap().len(), 4);
        assert_eq!(c.n, Some(3));
        assert!(serde_json::from_str::<RunConfig>(r#"{"Lsize": 3}"#).is_err());
    }

    #[test]
    fn non_integer_size_rejected() {
        let c = RunConfig {
            l: NumList::One(7.5),
            ..Default::default()
        };
        assert!(c.spec().is_err());
    }
}
