//! Flat `key = value` study configuration.

use std::path::PathBuf;

use num_complex::Complex64 as c64;
use thiserror::Error;

use crate::coefficients::{Wavenumber, BUILTIN_PROBLEMS};
use crate::fem::basis::MAX_NEDELEC_ORDER;
use crate::fem::Family;
use crate::mesh::AxisBox;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid `{field}`: {msg}")]
    Invalid { field: &'static str, msg: String },
}

pub const DEFAULT_P_REF: usize = 4;
pub const DEFAULT_DOF_CAP: usize = 400_000;

/// A (k, p, h) sweep over one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub problem: String,
    pub k: Vec<Wavenumber>,
    pub p: Vec<usize>,
    pub family: Family,
    /// Subdivisions of the coarsest mesh.
    pub mesh_n: usize,
    /// Uniform refinements after the coarsest mesh; levels = refinements + 1.
    pub refinements: usize,
    pub p_ref: usize,
    pub output: PathBuf,
    pub threads: usize,
    pub quad_bump: usize,
    pub dof_cap: usize,
    pub inner_box: Option<AxisBox>,
    /// Write measured wall times; off by default so output is reproducible byte for byte.
    pub record_timings: bool,
}

const KEYS: [&str; 13] = [
    "problem",
    "k",
    "p",
    "family",
    "mesh_n",
    "refinements",
    "p_ref",
    "output",
    "threads",
    "quad_bump",
    "dof_cap",
    "inner_box",
    "record_timings",
];

fn invalid(field: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        msg: msg.into(),
    }
}

fn parse_list<T, F>(field: &'static str, raw: &str, mut f: F) -> Result<Vec<T>, ConfigError>
where
    F: FnMut(&str) -> Result<T, String>,
{
    raw.split(',')
        .map(str::trim)
        .map(|s| {
            if s.is_empty() {
                Err(invalid(field, "empty list entry"))
            } else {
                f(s).map_err(|m| invalid(field, m))
            }
        })
        .collect()
}

fn parse_usize(field: &'static str, raw: &str) -> Result<usize, ConfigError> {
    raw.trim().parse().map_err(|_| {
        invalid(
            field,
            format!("`{}` is not a non-negative integer", raw.trim()),
        )
    })
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{}` is not a number", s.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{}` is not finite", s.trim()))
    }
}

/// `re` or `re:im`.
fn parse_k(s: &str) -> Result<Wavenumber, String> {
    let (re, im) = match s.split_once(':') {
        Some((a, b)) => (parse_f64(a)?, parse_f64(b)?),
        None => (parse_f64(s)?, 0.0),
    };
    Wavenumber::new(c64::new(re, im)).map_err(|e| e.to_string())
}

fn parse_family(s: &str) -> Result<Family, ConfigError> {
    match s.trim() {
        "type1" | "nedelec1" => Ok(Family::NedelecI),
        "type2" | "nedelec2" => Ok(Family::NedelecII),
        other => Err(invalid(
            "family",
            format!("`{other}` is not one of type1, type2"),
        )),
    }
}

impl StudyConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut values: Vec<Option<(usize, String)>> = vec![None; KEYS.len()];
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                msg: format!("expected `key = value`, found `{content}`"),
            })?;
            let key = key.trim();
            let slot =
                KEYS.iter()
                    .position(|k| *k == key)
                    .ok_or_else(|| ConfigError::UnknownKey {
                        line,
                        key: key.into(),
                    })?;
            if values[slot].is_some() {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.into(),
                });
            }
            values[slot] = Some((line, value.trim().to_string()));
        }
        let get = |key: &str| -> Option<&str> {
            let slot = KEYS.iter().position(|k| *k == key).expect("known key");
            values[slot].as_ref().map(|(_, v)| v.as_str())
        };

        let problem = get("problem")
            .ok_or(ConfigError::Missing("problem"))?
            .to_string();
        let k = parse_list("k", get("k").ok_or(ConfigError::Missing("k"))?, parse_k)?;
        let p = parse_list("p", get("p").ok_or(ConfigError::Missing("p"))?, |s| {
            s.parse::<usize>()
                .map_err(|_| format!("`{s}` is not a non-negative integer"))
        })?;
        let family = get("family")
            .map(parse_family)
            .transpose()?
            .unwrap_or(Family::NedelecI);
        let mesh_n = parse_usize(
            "mesh_n",
            get("mesh_n").ok_or(ConfigError::Missing("mesh_n"))?,
        )?;
        let refinements = get("refinements")
            .map(|v| parse_usize("refinements", v))
            .transpose()?
            .unwrap_or(0);
        let p_ref = get("p_ref")
            .map(|v| parse_usize("p_ref", v))
            .transpose()?
            .unwrap_or(DEFAULT_P_REF);
        let output = PathBuf::from(get("output").unwrap_or("out"));
        let threads = get("threads")
            .map(|v| parse_usize("threads", v))
            .transpose()?
            .unwrap_or(1);
        let quad_bump = get("quad_bump")
            .map(|v| parse_usize("quad_bump", v))
            .transpose()?
            .unwrap_or(0);
        let dof_cap = get("dof_cap")
            .map(|v| parse_usize("dof_cap", v))
            .transpose()?
            .unwrap_or(DEFAULT_DOF_CAP);
        let inner_box = get("inner_box")
            .map(|v| {
                let c = parse_list("inner_box", v, parse_f64)?;
                if c.len() != 6 {
                    return Err(invalid(
                        "inner_box",
                        "expected xmin, ymin, zmin, xmax, ymax, zmax",
                    ));
                }
                Ok(AxisBox::new([c[0], c[1], c[2]], [c[3], c[4], c[5]]))
            })
            .transpose()?;
        let record_timings = match get("record_timings") {
            None | Some("false") => false,
            Some("true") => true,
            Some(other) => {
                return Err(invalid(
                    "record_timings",
                    format!("`{other}` is not true or false"),
                ))
            }
        };
        let cfg = StudyConfig {
            problem,
            k,
            p,
            family,
            mesh_n,
            refinements,
            p_ref,
            output,
            threads,
            quad_bump,
            dof_cap,
            inner_box,
            record_timings,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !BUILTIN_PROBLEMS.contains(&self.problem.as_str()) {
            return Err(invalid(
                "problem",
                format!(
                    "`{}` is not one of {}",
                    self.problem,
                    BUILTIN_PROBLEMS.join(", ")
                ),
            ));
        }
        if self.k.is_empty() {
            return Err(invalid("k", "at least one wavenumber is required"));
        }
        if self.p.is_empty() {
            return Err(invalid("p", "at least one order is required"));
        }
        let min_p = match self.family {
            Family::NedelecII => 1,
            _ => 0,
        };
        if let Some(&bad) = self.p.iter().find(|&&p| p < min_p || p > MAX_NEDELEC_ORDER) {
            return Err(invalid(
                "p",
                format!("order {bad} outside {min_p}..={MAX_NEDELEC_ORDER}"),
            ));
        }
        let max_p = *self.p.iter().max().expect("non-empty");
        if self.p_ref <= max_p {
            return Err(invalid(
                "p_ref",
                format!("{} must exceed every order in p (max {max_p})", self.p_ref),
            ));
        }
        if self.p_ref > MAX_NEDELEC_ORDER {
            return Err(invalid(
                "p_ref",
                format!(
                    "{} exceeds the supported maximum {MAX_NEDELEC_ORDER}",
                    self.p_ref
                ),
            ));
        }
        if self.mesh_n == 0 {
            return Err(invalid("mesh_n", "must be at least 1"));
        }
        if self.threads == 0 {
            return Err(invalid("threads", "must be at least 1"));
        }
        if self.problem == "exp1_interface" && self.inner_box.is_none() {
            return Err(invalid("inner_box", "required by exp1_interface"));
        }
        Ok(())
    }

    pub fn levels(&self) -> usize {
        self.refinements + 1
    }

    /// Subdivisions per axis at `level`.
    pub fn subdivisions(&self, level: usize) -> usize {
        self.mesh_n << level
    }

    /// `threads`, overridden by `MAXWELL_HP_THREADS` when set to a positive integer.
    pub fn effective_threads(&self) -> usize {
        std::env::var("MAXWELL_HP_THREADS")
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&t| t > 0)
            .unwrap_or(self.threads)
    }
}
