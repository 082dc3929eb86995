//! Scenario configuration: schema checks with JSON-pointer paths, then typed access.

use std::path::{Path, PathBuf};

use hadamard::modelspec::parse_expr;
use hadamard::MetricModel;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

/// Default bound on the estimated working set of one run, in MiB.
pub const DEFAULT_MEMORY_CAP_MB: f64 = 4096.0;

/// Matrices of size `dim²` alive at the peak of the projection pipeline, per time node.
const LIVE_MATRICES_PER_NODE: f64 = 14.0;

const REQUIRED: [&str; 13] = [
    "dimension",
    "cutoff_k",
    "time_steps",
    "space_points",
    "t_min",
    "t_max",
    "h_expr",
    "m_expr",
    "u_expr",
    "correction_order",
    "checks",
    "seed",
    "out_dir",
];
const OPTIONAL: [&str; 4] = ["memory_cap_mb", "max_step", "sobolev_bound", "description"];

/// Every check name known to some subcommand.
pub const KNOWN_CHECKS: [&str; 22] = [
    "clifford",
    "frames",
    "self_adjoint",
    "principal_symbol",
    "parallel_frame",
    "dirac_symmetry",
    "conformal_identity",
    "vacuum_identity",
    "flat_spectrum",
    "inverse_sqrt",
    "derivatives",
    "state",
    "projections",
    "adiabatic_gain",
    "unitarity",
    "richardson",
    "sobolev",
    "kernels_dump",
    "feynman",
    "leakage",
    "deformed_leakage",
    "intertwining",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub dimension: usize,
    pub cutoff_k: usize,
    /// Chebyshev nodes of the time grid.
    pub time_steps: usize,
    /// Collocation points on the circle.
    pub space_points: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub h_expr: String,
    pub m_expr: String,
    pub u_expr: String,
    pub correction_order: usize,
    pub checks: Vec<String>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub memory_cap_mb: f64,
    /// Largest evolution substep.
    pub max_step: f64,
    /// Bound on the Sobolev-weighted evolution norms.
    pub sobolev_bound: f64,
}

fn err(pointer: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Config { pointer: pointer.into(), message: message.into() }
}

fn uint(obj: &Map<String, Value>, key: &str) -> Result<u64, CliError> {
    obj[key].as_u64().ok_or_else(|| err(format!("/{key}"), "expected a non-negative integer"))
}

fn float(obj: &Map<String, Value>, key: &str) -> Result<f64, CliError> {
    match obj[key].as_f64() {
        Some(v) if v.is_finite() => Ok(v),
        _ => Err(err(format!("/{key}"), "expected a finite number")),
    }
}

fn string(obj: &Map<String, Value>, key: &str) -> Result<String, CliError> {
    obj[key].as_str().map(str::to_owned).ok_or_else(|| err(format!("/{key}"), "expected a string"))
}

fn expression(obj: &Map<String, Value>, key: &str) -> Result<String, CliError> {
    let s = string(obj, key)?;
    parse_expr(&s).map_err(|e| err(format!("/{key}"), e.to_string()))?;
    Ok(s)
}

impl ScenarioConfig {
    /// Checks `value` against the schema; relative `out_dir`s resolve against `base`.
    pub fn from_value(value: &Value, base: &Path) -> Result<Self, CliError> {
        let obj = value.as_object().ok_or_else(|| err("", "config must be a JSON object"))?;
        for key in obj.keys() {
            if !REQUIRED.contains(&key.as_str()) && !OPTIONAL.contains(&key.as_str()) {
                return Err(err(format!("/{}", escape(key)), "unknown field"));
            }
        }
        for key in REQUIRED {
            if !obj.contains_key(key) {
                return Err(err(format!("/{key}"), "missing required field"));
            }
        }
        let dimension = uint(obj, "dimension")? as usize;
        if dimension != 2 && dimension != 4 {
            return Err(err("/dimension", format!("must be 2 or 4, got {dimension}")));
        }
        let cutoff_k = uint(obj, "cutoff_k")? as usize;
        if cutoff_k < 2 {
            return Err(err("/cutoff_k", "must be at least 2"));
        }
        let time_steps = uint(obj, "time_steps")? as usize;
        if time_steps < 3 || time_steps % 2 == 0 {
            return Err(err("/time_steps", "must be odd and at least 3"));
        }
        let space_points = uint(obj, "space_points")? as usize;
        if space_points % 2 != 0 || space_points < 2 * cutoff_k + 2 {
            return Err(err("/space_points", format!("must be even and at least 2K+2 = {}", 2 * cutoff_k + 2)));
        }
        let (t_min, t_max) = (float(obj, "t_min")?, float(obj, "t_max")?);
        if !(t_min < t_max) {
            return Err(err("/t_max", "must exceed t_min"));
        }
        let h_expr = expression(obj, "h_expr")?;
        let m_expr = expression(obj, "m_expr")?;
        let u_expr = expression(obj, "u_expr")?;
        let correction_order = uint(obj, "correction_order")? as usize;
        if correction_order > 6 {
            return Err(err("/correction_order", "at most 6"));
        }
        let list = obj["checks"].as_array().ok_or_else(|| err("/checks", "expected an array of strings"))?;
        let mut checks = Vec::with_capacity(list.len());
        for (i, c) in list.iter().enumerate() {
            let name = c.as_str().ok_or_else(|| err(format!("/checks/{i}"), "expected a string"))?;
            if !KNOWN_CHECKS.contains(&name) {
                return Err(err(format!("/checks/{i}"), format!("unknown check `{name}`")));
            }
            checks.push(name.to_owned());
        }
        let seed = uint(obj, "seed")?;
        let out_dir = PathBuf::from(string(obj, "out_dir")?);
        let out_dir = if out_dir.is_absolute() { out_dir } else { base.join(out_dir) };
        let positive = |key: &str, default: f64| -> Result<f64, CliError> {
            if !obj.contains_key(key) {
                return Ok(default);
            }
            let v = float(obj, key)?;
            if v > 0.0 {
                Ok(v)
            } else {
                Err(err(format!("/{key}"), "must be positive"))
            }
        };
        if let Some(d) = obj.get("description") {
            if !d.is_string() {
                return Err(err("/description", "expected a string"));
            }
        }
        let cfg = Self {
            dimension,
            cutoff_k,
            time_steps,
            space_points,
            t_min,
            t_max,
            h_expr,
            m_expr,
            u_expr,
            correction_order,
            checks,
            seed,
            out_dir,
            memory_cap_mb: positive("memory_cap_mb", DEFAULT_MEMORY_CAP_MB)?,
            max_step: positive("max_step", 0.02)?,
            sobolev_bound: positive("sobolev_bound", 4.0)?,
        };
        let need = cfg.estimated_memory_mb();
        if need > cfg.memory_cap_mb {
            return Err(err("/cutoff_k", format!("estimated working set {need:.0} MiB exceeds memory_cap_mb = {}", cfg.memory_cap_mb)));
        }
        Ok(cfg)
    }

    pub fn from_json(text: &str, base: &Path) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| err("", format!("invalid JSON at line {} column {}: {e}", e.line(), e.column())))?;
        Self::from_value(&value, base)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base)
    }

    /// Rank of the spinor bundle.
    pub fn rank(&self) -> usize {
        1 << (self.dimension / 2)
    }

    /// `(2K+1)·N`.
    pub fn matrix_dim(&self) -> usize {
        (2 * self.cutoff_k + 1) * self.rank()
    }

    pub fn estimated_memory_mb(&self) -> f64 {
        let d = self.matrix_dim() as f64;
        LIVE_MATRICES_PER_NODE * self.time_steps as f64 * d * d * 16.0 / (1024.0 * 1024.0)
    }

    pub fn model(&self) -> Result<MetricModel, CliError> {
        MetricModel::parse(&self.h_expr, &self.m_expr, &self.u_expr, self.t_min, self.t_max, self.dimension)
            .map_err(|e| err("/h_expr", e.to_string()))
    }

    /// Whether `name` was requested (an empty list requests everything).
    pub fn wants(&self, name: &str) -> bool {
        self.checks.is_empty() || self.checks.iter().any(|c| c == name)
    }

    /// The config as JSON, with `out_dir` omitted so reports do not depend on where they land.
    pub fn to_report_value(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("out_dir");
        }
        v
    }
}

/// RFC 6901 escaping of one reference token.
pub fn escape(token: &str) -> String {
    token.replace('~', "~0").replace('/', "~1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> Value {
        json!({
            "dimension": 2, "cutoff_k": 8, "time_steps": 9, "space_points": 32,
            "t_min": -1.0, "t_max": 1.0, "h_expr": "1", "m_expr": "1", "u_expr": "0",
            "correction_order": 1, "checks": [], "seed": 7, "out_dir": "out"
        })
    }

    fn pointer_of(v: Value) -> String {
        match ScenarioConfig::from_value(&v, Path::new("/tmp")).unwrap_err() {
            CliError::Config { pointer, .. } => pointer,
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn accepts_minimal_config() {
        let c = ScenarioConfig::from_value(&base(), Path::new("/tmp")).unwrap();
        assert_eq!(c.out_dir, PathBuf::from("/tmp/out"));
        assert_eq!(c.matrix_dim(), 34);
        assert!(c.wants("state"));
    }

    #[test]
    fn errors_carry_pointers() {
        let mut v = base();
        v["checks"] = json!(["state", "bogus"]);
        assert_eq!(pointer_of(v), "/checks/1");
        let mut v = base();
        v["space_points"] = json!(10);
        assert_eq!(pointer_of(v), "/space_points");
        let mut v = base();
        v.as_object_mut().unwrap().remove("seed");
        assert_eq!(pointer_of(v), "/seed");
        let mut v = base();
        v["a/b"] = json!(1);
        assert_eq!(pointer_of(v), "/a~1b");
    }

    #[test]
    fn expression_errors_name_offset() {
        let mut v = base();
        v["h_expr"] = json!("1+*x");
        match ScenarioConfig::from_value(&v, Path::new("/tmp")).unwrap_err() {
            CliError::Config { pointer, message } => {
                assert_eq!(pointer, "/h_expr");
                assert!(message.contains("byte 2"), "{message}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn memory_cap_is_enforced() {
        let mut v = base();
        v["memory_cap_mb"] = json!(0.01);
        assert_eq!(pointer_of(v), "/cutoff_k");
    }
}
