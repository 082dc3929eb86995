//! Report files: `report.json`, `profiles.csv` and the optional `kernels.bin`.

use std::io::Write;
use std::path::Path;

use hadamard::{CMat, DecayProfile};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::ScenarioConfig;

/// How a check value is compared against its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `value <= tolerance`
    AtMost,
    /// `value >= tolerance`
    AtLeast,
    /// `|value − target| <= tolerance`
    Within { target_bits: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckResult {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, comparison: Comparison::AtMost, passed: value <= tolerance, note: None }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, comparison: Comparison::AtLeast, passed: value >= tolerance, note: None }
    }

    pub fn within(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            comparison: Comparison::Within { target_bits: target.to_bits() },
            passed: (value - target).abs() <= tolerance,
            note: None,
        }
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn target(&self) -> Option<f64> {
        match self.comparison {
            Comparison::Within { target_bits } => Some(f64::from_bits(target_bits)),
            _ => None,
        }
    }

    fn to_value(&self) -> Value {
        let comparison = match self.comparison {
            Comparison::AtMost => json!("at_most"),
            Comparison::AtLeast => json!("at_least"),
            Comparison::Within { .. } => json!({ "within_of": num(self.target().unwrap_or(f64::NAN)) }),
        };
        let mut m = Map::new();
        m.insert("name".into(), json!(self.name));
        m.insert("value".into(), num(self.value));
        m.insert("tolerance".into(), num(self.tolerance));
        m.insert("comparison".into(), comparison);
        m.insert("passed".into(), json!(self.passed));
        if let Some(n) = &self.note {
            m.insert("note".into(), json!(n));
        }
        Value::Object(m)
    }
}

/// Finite floats as JSON numbers (shortest round-trip form); others as strings.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

/// One named decay profile for `profiles.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedProfile {
    pub name: String,
    pub profile: DecayProfile,
}

/// A rectangular complex block with its label, for `kernels.bin`.
#[derive(Debug, Clone)]
pub struct KernelBlock {
    pub label: String,
    pub mat: CMat,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub subcommand: String,
    pub checks: Vec<CheckResult>,
    /// Free-form numbers, keyed in insertion order.
    pub data: Map<String, Value>,
    pub profiles: Vec<NamedProfile>,
    pub kernels: Vec<KernelBlock>,
    pub skipped: Vec<(String, String)>,
}

impl Report {
    pub fn new(subcommand: &str) -> Self {
        Self { subcommand: subcommand.into(), ..Self::default() }
    }

    pub fn push(&mut self, c: CheckResult) {
        log::info!("{} {}: {:e} (tolerance {:e})", if c.passed { "pass" } else { "FAIL" }, c.name, c.value, c.tolerance);
        self.checks.push(c);
    }

    pub fn skip(&mut self, name: &str, why: impl Into<String>) {
        self.skipped.push((name.into(), why.into()));
    }

    pub fn insert(&mut self, key: &str, v: Value) {
        self.data.insert(key.into(), v);
    }

    pub fn profile(&mut self, name: impl Into<String>, profile: DecayProfile) {
        self.profiles.push(NamedProfile { name: name.into(), profile });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// The JSON document; `timestamp` is the only field that varies between identical runs.
    pub fn to_json(&self, config: &ScenarioConfig, timestamp: u64) -> Value {
        let profiles: Vec<Value> = self
            .profiles
            .iter()
            .map(|p| {
                json!({
                    "name": p.name,
                    "thresholds": p.profile.thresholds,
                    "norms": p.profile.norms.iter().map(|&v| num(v)).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "tool": "hadamard",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": self.subcommand,
            "timestamp": timestamp,
            "config": config.to_report_value(),
            "passed": self.passed(),
            "checks": self.checks.iter().map(CheckResult::to_value).collect::<Vec<_>>(),
            "skipped": self.skipped.iter().map(|(n, w)| json!({ "name": n, "reason": w })).collect::<Vec<_>>(),
            "data": Value::Object(self.data.clone()),
            "profiles": profiles,
        })
    }

    /// `name,K_prime,block_norm` rows; norms in shortest round-trip form.
    pub fn profiles_csv(&self) -> String {
        let mut s = String::from("name,K_prime,block_norm\n");
        for p in &self.profiles {
            for (k, v) in p.profile.thresholds.iter().zip(&p.profile.norms) {
                s.push_str(&format!("{},{k},{v:?}\n", csv_field(&p.name)));
            }
        }
        s
    }

    /// Writes all report files into `dir`.
    pub fn write(&self, dir: &Path, config: &ScenarioConfig, timestamp: u64) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(&self.to_json(config, timestamp)).expect("report serializes");
        text.push('\n');
        std::fs::write(dir.join("report.json"), text)?;
        std::fs::write(dir.join("profiles.csv"), self.profiles_csv())?;
        if !self.kernels.is_empty() {
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("kernels.bin"))?);
            write_kernels(&mut f, &self.kernels)?;
            f.flush()?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub const KERNELS_MAGIC: &[u8; 8] = b"HADKERN1";

/// Layout, all little-endian:
///
/// ```text
/// magic "HADKERN1" | u32 block count
/// per block: u32 label length | label bytes (UTF-8) | u32 rows | u32 cols
/// then, per block in the same order: rows·cols pairs (f32 re, f32 im), row-major
/// ```
pub fn write_kernels(w: &mut impl Write, blocks: &[KernelBlock]) -> std::io::Result<()> {
    w.write_all(KERNELS_MAGIC)?;
    w.write_all(&(blocks.len() as u32).to_le_bytes())?;
    for b in blocks {
        w.write_all(&(b.label.len() as u32).to_le_bytes())?;
        w.write_all(b.label.as_bytes())?;
        w.write_all(&(b.mat.nrows() as u32).to_le_bytes())?;
        w.write_all(&(b.mat.ncols() as u32).to_le_bytes())?;
    }
    for b in blocks {
        for r in 0..b.mat.nrows() {
            for c in 0..b.mat.ncols() {
                let z = b.mat[(r, c)];
                w.write_all(&(z.re as f32).to_le_bytes())?;
                w.write_all(&(z.im as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Inverse of [`write_kernels`], for tests and downstream readers.
pub fn read_kernels(bytes: &[u8]) -> Option<Vec<(String, usize, usize, Vec<(f32, f32)>)>> {
    let mut pos = 0;
    let mut take = |n: usize| {
        let s = bytes.get(pos..pos + n)?;
        pos += n;
        Some(s)
    };
    if take(8)? != KERNELS_MAGIC {
        return None;
    }
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().unwrap()) as usize;
    let count = u32_at(take(4)?);
    let mut heads = Vec::with_capacity(count);
    for _ in 0..count {
        let len = u32_at(take(4)?);
        let label = String::from_utf8(take(len)?.to_vec()).ok()?;
        let rows = u32_at(take(4)?);
        let cols = u32_at(take(4)?);
        heads.push((label, rows, cols));
    }
    let mut out = Vec::with_capacity(count);
    for (label, rows, cols) in heads {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            let s = take(8)?;
            data.push((f32::from_le_bytes(s[..4].try_into().unwrap()), f32::from_le_bytes(s[4..].try_into().unwrap())));
        }
        out.push((label, rows, cols, data));
    }
    (pos == bytes.len()).then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use hadamard::C64;

    #[test]
    fn kernels_round_trip() {
        let mat = CMat::from_fn(2, 3, |r, c| C64::new(r as f64 + 0.5, -(c as f64)));
        let blocks = vec![KernelBlock { label: "G(0,1)".into(), mat }];
        let mut buf = Vec::new();
        write_kernels(&mut buf, &blocks).unwrap();
        let back = read_kernels(&buf).unwrap();
        assert_eq!(back[0].0, "G(0,1)");
        assert_eq!((back[0].1, back[0].2), (2, 3));
        assert_eq!(back[0].3[4], (1.5, -1.0));
        assert!(read_kernels(&buf[..buf.len() - 1]).is_none());
    }

    #[test]
    fn check_comparisons() {
        assert!(CheckResult::at_most("a", 1e-13, 1e-12).passed);
        assert!(!CheckResult::at_least("b", 0.5, 0.7).passed);
        let w = CheckResult::within("c", 4.3, 4.0, 0.5);
        assert!(w.passed && w.target() == Some(4.0));
        assert!(!CheckResult::at_most("nan", f64::NAN, 1.0).passed);
    }

    #[test]
    fn csv_uses_round_trip_floats() {
        let mut r = Report::new("construct");
        r.profile("mu,r=0", DecayProfile::from_norms(vec![8, 16], vec![0.1, 1.0 / 3.0]));
        let csv = r.profiles_csv();
        assert!(csv.starts_with("name,K_prime,block_norm\n\"mu,r=0\",8,0.1\n"));
        let last: f64 = csv.lines().last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(last, 1.0 / 3.0);
    }
}
