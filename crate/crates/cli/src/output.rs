//! Deterministic table and report emission (CSV and JSON mirrors).

use std::io::Write;
use std::path::Path;

use fermigas_core::Result;
use serde_json::Value;

/// 17 significant digits: round-trip exact for f64, stable across platforms.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One observables row; optional cells are left empty in CSV and null in JSON.
pub struct ObsRow {
    pub shell_cap: i64,
    pub kf: f64,
    pub q: [i64; 3],
    pub norm_q: f64,
    pub e_q: f64,
    pub n_rpa_matrix: Option<f64>,
    pub n_rpa_integral: Option<f64>,
    pub n_ex: Option<f64>,
    pub n_total: Option<f64>,
}

pub const OBS_HEADER: &str =
    "shell_cap,kf,qx,qy,qz,norm_q,e_q,n_rpa_matrix,n_rpa_integral,n_ex,n_total";

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn opt_json(v: Option<f64>) -> Value {
    v.map_or(Value::Null, |x| x.into())
}

impl ObsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.shell_cap,
            fmt_f64(self.kf),
            self.q[0],
            self.q[1],
            self.q[2],
            fmt_f64(self.norm_q),
            fmt_f64(self.e_q),
            opt(self.n_rpa_matrix),
            opt(self.n_rpa_integral),
            opt(self.n_ex),
            opt(self.n_total),
        )
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "shell_cap": self.shell_cap,
            "kf": self.kf,
            "qx": self.q[0],
            "qy": self.q[1],
            "qz": self.q[2],
            "norm_q": self.norm_q,
            "e_q": self.e_q,
            "n_rpa_matrix": opt_json(self.n_rpa_matrix),
            "n_rpa_integral": opt_json(self.n_rpa_integral),
            "n_ex": opt_json(self.n_ex),
            "n_total": opt_json(self.n_total),
        })
    }
}

/// Best-effort `git describe` for the meta block; null when unavailable.
pub fn git_describe() -> Value {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| Value::String(s.trim().to_string()))
        .unwrap_or(Value::Null)
}

/// Write text to the output path, or stdout when none is configured.
pub fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => {
            std::fs::write(path, text)?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}
