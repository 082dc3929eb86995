//! Named scenarios shipped as JSON files under `presets/`.
//!
//! ```
//! use hadamard_cli::presets;
//!
//! for name in presets::NAMES {
//!     let cfg = presets::load(name, std::path::Path::new(".")).unwrap();
//!     assert_eq!(cfg.cutoff_k, 64);
//!     assert!(cfg.checks.is_empty());
//! }
//! assert_eq!(presets::load("breathing", std::path::Path::new(".")).unwrap().h_expr, "(1+0.2*tanh(t)*cos(x))^2");
//! assert!(presets::text("nope").is_none());
//! ```

use std::path::Path;

use serde_json::Value;

use crate::config::ScenarioConfig;
use crate::error::CliError;

pub const NAMES: [&str; 3] = ["flat-massive", "breathing", "conformal"];

pub fn text(name: &str) -> Option<&'static str> {
    match name {
        "flat-massive" => Some(include_str!("../presets/flat-massive.json")),
        "breathing" => Some(include_str!("../presets/breathing.json")),
        "conformal" => Some(include_str!("../presets/conformal.json")),
        _ => None,
    }
}

pub fn value(name: &str) -> Result<Value, CliError> {
    let t = text(name).ok_or_else(|| CliError::Usage(format!("unknown preset `{name}` (known: {})", NAMES.join(", "))))?;
    serde_json::from_str(t).map_err(|e| CliError::Config { pointer: String::new(), message: format!("preset `{name}`: {e}") })
}

/// The preset with relative `out_dir` resolved against `base`.
pub fn load(name: &str, base: &Path) -> Result<ScenarioConfig, CliError> {
    ScenarioConfig::from_value(&value(name)?, base)
}
