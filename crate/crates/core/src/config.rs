//! Run configuration: one `key = value` pair per line, `#` starts a comment.
//!
//! Model keys are those of [`ModelSpec`]; `model` and `n` are required.
//! Run keys select the output name, the oracle comparison, the integrator
//! tolerances and the reported observables. Keys under `report.` are written
//! by the manifest and skipped on input, so a manifest is itself a valid
//! config.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lindblad::EvolveOptions;
use crate::models::{ModelKind, ModelSpec};

pub const RUN_KEYS: [&str; 10] = [
    "output",
    "oracle",
    "observables",
    "rtol",
    "atol",
    "max_steps",
    "initial_step_fs",
    "positivity_samples",
    "leakage_threshold",
    "oracle_atol",
];

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub spec: ModelSpec,
    /// Base name of the output files.
    pub output: Option<String>,
    pub oracle: bool,
    /// Reported observables; all of the model's when `None`.
    pub observables: Option<Vec<String>>,
    pub evolve: EvolveOptions,
    /// Absolute tolerance of the oracle run when it differs from `atol`.
    pub oracle_atol: Option<f64>,
}

fn config_error(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

/// Split a config text into `(line, key, value)` entries.
pub fn parse_entries(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(config_error(line, format!("expected `key = value`, got {content:?}")));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(config_error(line, "missing key before `=`"));
        }
        if value.is_empty() {
            return Err(config_error(line, format!("missing value for key {key:?}")));
        }
        if let Some((first, _, _)) = out.iter().find(|(_, k, _)| k == key) {
            return Err(config_error(line, format!("key {key:?} already set on line {first}")));
        }
        out.push((line, key.to_string(), value.to_string()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn new(spec: ModelSpec) -> Self {
        RunConfig {
            spec,
            output: None,
            oracle: false,
            observables: None,
            evolve: EvolveOptions::default(),
            oracle_atol: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let entries = parse_entries(text)?;
        let find = |key: &str| entries.iter().find(|(_, k, _)| k == key);
        let Some((kind_line, _, kind)) = find("model") else {
            return Err(config_error(0, "missing required key \"model\""));
        };
        let kind: ModelKind = kind.parse().map_err(|e: Error| config_error(*kind_line, e.to_string()))?;
        let Some((n_line, _, n)) = find("n") else {
            return Err(config_error(0, "missing required key \"n\""));
        };
        let n: usize = n
            .parse()
            .map_err(|_| config_error(*n_line, format!("n: expected a positive integer, got {n:?}")))?;
        let mut cfg = RunConfig::new(ModelSpec::new(kind, n));
        for (line, key, value) in &entries {
            if key.starts_with("report.") {
                continue;
            }
            cfg.set(key, value).map_err(|e| match e {
                Error::Config { message, .. } => config_error(*line, message),
                other => config_error(*line, other.to_string()),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Set one key; model keys are forwarded to the [`ModelSpec`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let float = || {
            value
                .parse::<f64>()
                .map_err(|_| config_error(0, format!("{key}: expected a number, got {value:?}")))
        };
        let int = || {
            value.parse::<usize>().map_err(|_| {
                config_error(0, format!("{key}: expected a non-negative integer, got {value:?}"))
            })
        };
        match key {
            "output" => {
                if value.contains(['/', '\\']) || value.starts_with('.') {
                    return Err(config_error(0, format!("output: {value:?} must be a plain file name")));
                }
                self.output = Some(value.to_string());
            }
            "oracle" => {
                self.oracle = match value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(config_error(0, format!("oracle: expected true or false, got {value:?}"))),
                }
            }
            "observables" => {
                let names: Vec<String> = value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect();
                self.observables = if names.len() == 1 && names[0] == "all" {
                    None
                } else {
                    Some(names)
                };
            }
            "rtol" => self.evolve.rtol = float()?,
            "atol" => self.evolve.atol = float()?,
            "max_steps" => self.evolve.max_steps = int()?,
            "initial_step_fs" => {
                self.evolve.initial_step_fs = if value == "auto" { None } else { Some(float()?) }
            }
            "positivity_samples" => self.evolve.positivity_samples = int()?,
            "leakage_threshold" => self.evolve.leakage_threshold = float()?,
            "oracle_atol" => {
                self.oracle_atol = if value == "same" { None } else { Some(float()?) }
            }
            _ => self
                .spec
                .set(key, value)
                .map_err(|e| config_error(0, e.to_string()))?,
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate().map_err(|e| config_error(0, e.to_string()))?;
        let e = &self.evolve;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_error(0, format!("{name} must be positive, got {v}")))
            }
        };
        positive("rtol", e.rtol)?;
        positive("atol", e.atol)?;
        positive("leakage_threshold", e.leakage_threshold)?;
        if let Some(h) = e.initial_step_fs {
            positive("initial_step_fs", h)?;
        }
        if let Some(a) = self.oracle_atol {
            positive("oracle_atol", a)?;
        }
        if e.max_steps == 0 {
            return Err(config_error(0, "max_steps must be at least 1"));
        }
        Ok(())
    }

    pub fn output_name(&self) -> String {
        self.output.clone().unwrap_or_else(|| {
            format!("{}_n{}", self.spec.kind.as_str().to_ascii_lowercase(), self.spec.n)
        })
    }

    /// Options for the oracle run.
    pub fn oracle_options(&self) -> EvolveOptions {
        EvolveOptions {
            atol: self.oracle_atol.unwrap_or(self.evolve.atol),
            ..self.evolve.clone()
        }
    }

    /// Every key with its resolved value, model keys first.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = self
            .spec
            .entries()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let e = &self.evolve;
        out.push(("output".into(), self.output_name()));
        out.push(("oracle".into(), self.oracle.to_string()));
        out.push((
            "observables".into(),
            self.observables.as_ref().map_or_else(|| "all".into(), |o| o.join(",")),
        ));
        out.push(("rtol".into(), format!("{:?}", e.rtol)));
        out.push(("atol".into(), format!("{:?}", e.atol)));
        out.push(("max_steps".into(), e.max_steps.to_string()));
        out.push((
            "initial_step_fs".into(),
            e.initial_step_fs.map_or_else(|| "auto".into(), |h| format!("{h:?}")),
        ));
        out.push(("positivity_samples".into(), e.positivity_samples.to_string()));
        out.push(("leakage_threshold".into(), format!("{:?}", e.leakage_threshold)));
        out.push((
            "oracle_atol".into(),
            self.oracle_atol.map_or_else(|| "same".into(), |a| format!("{a:?}")),
        ));
        out
    }

    /// The resolved configuration in input syntax.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
