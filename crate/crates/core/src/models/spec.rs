use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    TavisCummings,
    HolsteinTavisCummings,
    /// Equally spaced `d`-level emitters with dipole-dipole coupling.
    ThreeLevel,
    Vsc,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::TavisCummings => "TC",
            ModelKind::HolsteinTavisCummings => "HTC",
            ModelKind::ThreeLevel => "THREE_LEVEL",
            ModelKind::Vsc => "VSC",
        }
    }

    /// Keys that apply to this kind, in manifest order.
    pub fn keys(&self) -> &'static [&'static str] {
        match self {
            ModelKind::TavisCummings => &[
                "model", "n", "omega_0", "omega_c", "g", "gamma_c", "cavity_dim", "t_max_fs",
                "samples", "energy_shift",
            ],
            ModelKind::HolsteinTavisCummings => &[
                "model", "n", "omega_e", "omega_v", "lambda_v", "omega_c", "g", "gamma_c",
                "vib_ground", "vib_excited", "cavity_dim", "t_max_fs", "samples", "energy_shift",
            ],
            ModelKind::ThreeLevel => &[
                "model", "n", "levels", "omega_e", "omega_c", "g", "dipole", "gamma_c",
                "gamma_down", "cavity_dim", "t_max_fs", "samples", "energy_shift",
            ],
            ModelKind::Vsc => &[
                "model", "n", "vib_levels", "omega_v", "omega_c", "g", "gamma_c", "cavity_dim",
                "max_excitation", "t_max_fs", "samples", "energy_shift",
            ],
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TC" => Ok(ModelKind::TavisCummings),
            "HTC" => Ok(ModelKind::HolsteinTavisCummings),
            "THREE_LEVEL" => Ok(ModelKind::ThreeLevel),
            "VSC" => Ok(ModelKind::Vsc),
            _ => Err(Error::InvalidModel(format!(
                "unknown model {s:?} (expected TC, HTC, THREE_LEVEL or VSC)"
            ))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Model parameters. Energies and rates are in eV, times in fs.
///
/// `omega_c`, `g` and `cavity_dim` default to values derived from the other
/// fields when left as `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n: usize,
    pub omega_0: f64,
    pub omega_c: Option<f64>,
    pub omega_e: f64,
    pub omega_v: f64,
    pub lambda_v: f64,
    pub g: Option<f64>,
    pub dipole: f64,
    pub gamma_c: f64,
    pub gamma_down: f64,
    pub vib_ground: usize,
    pub vib_excited: usize,
    pub levels: usize,
    pub vib_levels: usize,
    pub cavity_dim: Option<usize>,
    pub max_excitation: Option<u32>,
    pub t_max_fs: f64,
    pub samples: usize,
    pub energy_shift: f64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, n: usize) -> Self {
        let mut s = ModelSpec {
            kind,
            n,
            omega_0: 1.0,
            omega_c: None,
            omega_e: 1.0,
            omega_v: 0.2,
            lambda_v: 0.0,
            g: None,
            dipole: 0.0,
            gamma_c: 0.0,
            gamma_down: 0.0,
            vib_ground: 6,
            vib_excited: 4,
            levels: 3,
            vib_levels: 2,
            cavity_dim: None,
            max_excitation: None,
            t_max_fs: 200.0,
            samples: 401,
            energy_shift: 0.0,
        };
        match kind {
            ModelKind::TavisCummings => {
                s.gamma_c = 0.15;
            }
            ModelKind::HolsteinTavisCummings => {
                s.omega_e = 3.5;
                s.omega_v = 0.182;
                s.lambda_v = 0.096;
                s.gamma_c = 0.2;
                s.t_max_fs = 300.0;
                s.samples = 601;
            }
            ModelKind::ThreeLevel => {
                s.dipole = 0.1;
                s.gamma_c = 0.15;
                s.gamma_down = 0.05;
                s.t_max_fs = 100.0;
                s.samples = 201;
            }
            ModelKind::Vsc => {
                s.t_max_fs = 500.0;
                s.samples = 501;
            }
        }
        s
    }

    pub fn omega_c(&self) -> f64 {
        self.omega_c.unwrap_or(match self.kind {
            ModelKind::TavisCummings => self.omega_0,
            ModelKind::HolsteinTavisCummings => {
                self.omega_e - 2.0 * self.lambda_v * self.lambda_v / self.omega_v
            }
            ModelKind::ThreeLevel => self.omega_e,
            ModelKind::Vsc => self.omega_v,
        })
    }

    pub fn g(&self) -> f64 {
        self.g.unwrap_or(match self.kind {
            ModelKind::TavisCummings => 0.1,
            ModelKind::HolsteinTavisCummings => 0.035,
            ModelKind::ThreeLevel => 0.15 / (self.n.max(1) as f64).sqrt(),
            ModelKind::Vsc => 0.01,
        })
    }

    pub fn cavity_dim(&self) -> usize {
        self.cavity_dim.unwrap_or(match self.kind {
            ModelKind::Vsc => 2,
            _ => self.n + 1,
        })
    }

    /// Number of single-emitter levels.
    pub fn emitter_modes(&self) -> usize {
        match self.kind {
            ModelKind::TavisCummings => 2,
            ModelKind::HolsteinTavisCummings => self.vib_ground + self.vib_excited,
            ModelKind::ThreeLevel => self.levels,
            ModelKind::Vsc => self.vib_levels,
        }
    }

    /// `samples` evenly spaced times from 0 to `t_max_fs`.
    pub fn time_grid(&self) -> Vec<f64> {
        let last = (self.samples - 1) as f64;
        (0..self.samples)
            .map(|k| self.t_max_fs * k as f64 / last)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        for (name, v) in [
            ("gamma_c", self.gamma_c),
            ("gamma_down", self.gamma_down),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be a finite non-negative rate, got {v}"));
            }
        }
        for (name, v) in [
            ("omega_0", self.omega_0),
            ("omega_c", self.omega_c()),
            ("omega_e", self.omega_e),
            ("omega_v", self.omega_v),
            ("lambda_v", self.lambda_v),
            ("g", self.g()),
            ("dipole", self.dipole),
            ("energy_shift", self.energy_shift),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite, got {v}"));
            }
        }
        if self.cavity_dim() == 0 {
            return bad("cavity_dim must be at least 1".into());
        }
        match self.kind {
            ModelKind::HolsteinTavisCummings => {
                if self.vib_ground == 0 || self.vib_excited == 0 {
                    return bad("vib_ground and vib_excited must be at least 1".into());
                }
                if !(self.omega_v > 0.0) {
                    return bad("omega_v must be positive".into());
                }
            }
            ModelKind::ThreeLevel if self.levels < 2 => {
                return bad("levels must be at least 2".into());
            }
            ModelKind::Vsc => {
                if self.vib_levels == 0 {
                    return bad("vib_levels must be at least 1".into());
                }
                if self.cavity_dim() < 2 {
                    return bad("cavity_dim must be at least 2 (one initial photon)".into());
                }
            }
            _ => {}
        }
        if !(self.t_max_fs > 0.0) || !self.t_max_fs.is_finite() {
            return bad(format!("t_max_fs must be positive, got {}", self.t_max_fs));
        }
        if self.samples < 2 {
            return bad("samples must be at least 2".into());
        }
        Ok(())
    }

    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !self.kind.keys().contains(&key) {
            return Err(Error::InvalidModel(if ALL_KEYS.contains(&key) {
                format!("key {key:?} does not apply to model {}", self.kind)
            } else {
                format!("unknown key {key:?}")
            }));
        }
        let float = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::InvalidModel(format!("{key}: expected a number, got {value:?}")))
        };
        let int = || {
            value
                .parse::<usize>()
                .map_err(|_| Error::InvalidModel(format!("{key}: expected a non-negative integer, got {value:?}")))
        };
        match key {
            "model" => {
                let kind: ModelKind = value.parse()?;
                if kind != self.kind {
                    return Err(Error::InvalidModel(format!(
                        "model is {} and cannot be changed to {kind}",
                        self.kind
                    )));
                }
            }
            "n" => self.n = int()?,
            "omega_0" => self.omega_0 = float()?,
            "omega_c" => self.omega_c = Some(float()?),
            "omega_e" => self.omega_e = float()?,
            "omega_v" => self.omega_v = float()?,
            "lambda_v" => self.lambda_v = float()?,
            "g" => self.g = Some(float()?),
            "dipole" => self.dipole = float()?,
            "gamma_c" => self.gamma_c = float()?,
            "gamma_down" => self.gamma_down = float()?,
            "vib_ground" => self.vib_ground = int()?,
            "vib_excited" => self.vib_excited = int()?,
            "levels" => self.levels = int()?,
            "vib_levels" => self.vib_levels = int()?,
            "cavity_dim" => self.cavity_dim = Some(int()?),
            "max_excitation" => {
                self.max_excitation = if value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(u32::try_from(int()?).map_err(|_| {
                        Error::InvalidModel(format!("max_excitation: {value} is too large"))
                    })?)
                }
            }
            "t_max_fs" => self.t_max_fs = float()?,
            "samples" => self.samples = int()?,
            "energy_shift" => self.energy_shift = float()?,
            _ => unreachable!("key list and setter agree"),
        }
        Ok(())
    }

    /// Every applicable key with its resolved value.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        self.kind
            .keys()
            .iter()
            .map(|&k| {
                let v = match k {
                    "model" => self.kind.to_string(),
                    "n" => self.n.to_string(),
                    "omega_0" => format!("{:?}", self.omega_0),
                    "omega_c" => format!("{:?}", self.omega_c()),
                    "omega_e" => format!("{:?}", self.omega_e),
                    "omega_v" => format!("{:?}", self.omega_v),
                    "lambda_v" => format!("{:?}", self.lambda_v),
                    "g" => format!("{:?}", self.g()),
                    "dipole" => format!("{:?}", self.dipole),
                    "gamma_c" => format!("{:?}", self.gamma_c),
                    "gamma_down" => format!("{:?}", self.gamma_down),
                    "vib_ground" => self.vib_ground.to_string(),
                    "vib_excited" => self.vib_excited.to_string(),
                    "levels" => self.levels.to_string(),
                    "vib_levels" => self.vib_levels.to_string(),
                    "cavity_dim" => self.cavity_dim().to_string(),
                    "max_excitation" => self
                        .max_excitation
                        .map_or_else(|| "none".to_string(), |m| m.to_string()),
                    "t_max_fs" => format!("{:?}", self.t_max_fs),
                    "samples" => self.samples.to_string(),
                    "energy_shift" => format!("{:?}", self.energy_shift),
                    _ => unreachable!("key list and formatter agree"),
                };
                (k, v)
            })
            .collect()
    }
}

pub(crate) const ALL_KEYS: [&str; 20] = [
    "model", "n", "omega_0", "omega_c", "omega_e", "omega_v", "lambda_v", "g", "dipole", "gamma_c",
    "gamma_down", "vib_ground", "vib_excited", "levels", "vib_levels", "cavity_dim",
    "max_excitation", "t_max_fs", "samples", "energy_shift",
];
