//! Run configuration: JSON file + flag overrides, validated before compute.

use std::path::PathBuf;

use fermigas_core::{Error, Momentum, PotentialSpec, QuadratureConfig, Result};
use serde::{Deserialize, Serialize};

/// Output format selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// The full run configuration. Every field is optional so that a config file
/// and command-line flags can be merged (flags win); validation happens once,
/// after merging, before any computation starts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub shell_cap: Option<i64>,
    /// Potential descriptor: "coulomb:g=1", "yukawa:g=1,p=2" or "zero".
    pub potential: Option<String>,
    pub coupling_scale: Option<f64>,
    /// Explicit momentum list.
    pub q: Option<Vec<[i64; 3]>>,
    /// Range selector: every q outside the ball with |q|^2 <= this value.
    pub q_norm2_max: Option<i64>,
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub max_subdivisions: Option<usize>,
    /// Exact-solver options.
    pub oracle_cutoff: Option<i64>,
    pub particle_cap: Option<u32>,
    pub oracle_tol: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub basis_dim_limit: Option<usize>,
    /// |l|^2 cutoff for the inside-ball shift sum.
    pub inside_shift_cap: Option<i64>,
    pub route: Option<String>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("config file {}: {e}", path.display())))
    }

    /// Overlay `self` on top of `base`: fields set here win.
    pub fn merged_over(self, base: RunConfig) -> RunConfig {
        RunConfig {
            shell_cap: self.shell_cap.or(base.shell_cap),
            potential: self.potential.or(base.potential),
            coupling_scale: self.coupling_scale.or(base.coupling_scale),
            q: self.q.or(base.q),
            q_norm2_max: self.q_norm2_max.or(base.q_norm2_max),
            abs_tol: self.abs_tol.or(base.abs_tol),
            rel_tol: self.rel_tol.or(base.rel_tol),
            max_subdivisions: self.max_subdivisions.or(base.max_subdivisions),
            oracle_cutoff: self.oracle_cutoff.or(base.oracle_cutoff),
            particle_cap: self.particle_cap.or(base.particle_cap),
            oracle_tol: self.oracle_tol.or(base.oracle_tol),
            lambda_grid: self.lambda_grid.or(base.lambda_grid),
            basis_dim_limit: self.basis_dim_limit.or(base.basis_dim_limit),
            inside_shift_cap: self.inside_shift_cap.or(base.inside_shift_cap),
            route: self.route.or(base.route),
            output: self.output.or(base.output),
            format: self.format.or(base.format),
        }
    }

    pub fn shell_cap(&self) -> Result<i64> {
        let v = self
            .shell_cap
            .ok_or_else(|| Error::invalid("shell_cap is required"))?;
        if v < 0 {
            return Err(Error::invalid(format!("shell_cap must be >= 0, got {v}")));
        }
        Ok(v)
    }

    /// Parsed potential including the coupling scale.
    pub fn potential(&self) -> Result<PotentialSpec> {
        let desc = self.potential.as_deref().unwrap_or("coulomb:g=1");
        let spec = parse_potential(desc)?;
        Ok(match self.coupling_scale {
            Some(s) => {
                if !(s >= 0.0) || !s.is_finite() {
                    return Err(Error::invalid(format!(
                        "coupling_scale must be finite and >= 0, got {s}"
                    )));
                }
                spec.with_scale(s)
            }
            None => spec,
        })
    }

    pub fn quadrature(&self) -> Result<QuadratureConfig> {
        let cfg = QuadratureConfig {
            abs_tol: self.abs_tol.unwrap_or(1e-12),
            rel_tol: self.rel_tol.unwrap_or(1e-9),
            max_subdivisions: self.max_subdivisions.unwrap_or(2000),
        };
        if !(cfg.abs_tol > 0.0) {
            return Err(Error::invalid(format!(
                "abs_tol must be positive, got {}",
                cfg.abs_tol
            )));
        }
        if !(cfg.rel_tol > 0.0) {
            return Err(Error::invalid(format!(
                "rel_tol must be positive, got {}",
                cfg.rel_tol
            )));
        }
        if cfg.max_subdivisions == 0 {
            return Err(Error::invalid("max_subdivisions must be >= 1"));
        }
        Ok(cfg)
    }

    /// Momentum selector: explicit list (in given order) or the |q|^2 range,
    /// sorted by (norm^2, lexicographic) for determinism.
    pub fn momenta(&self, ball: &fermigas_core::FermiBall) -> Result<Vec<Momentum>> {
        if let Some(list) = &self.q {
            if list.is_empty() {
                return Err(Error::invalid("q selector is empty"));
            }
            return Ok(list.iter().map(|&[x, y, z]| Momentum::new(x, y, z)).collect());
        }
        let bound = match self.q_norm2_max {
            Some(b) => {
                if b < 0 {
                    return Err(Error::invalid(format!("q_norm2_max must be >= 0, got {b}")));
                }
                b
            }
            None => 4 * ball.shell_cap().max(1),
        };
        let r = (bound as f64).sqrt() as i64 + 1;
        let mut out = Vec::new();
        for x in -r..=r {
            for y in -r..=r {
                for z in -r..=r {
                    let q = Momentum::new(x, y, z);
                    if q.norm2() <= bound && !ball.contains(q) {
                        out.push(q);
                    }
                }
            }
        }
        out.sort_by_key(|q| (q.norm2(), q.x, q.y, q.z));
        if out.is_empty() {
            return Err(Error::invalid(format!(
                "q selector produced no momenta outside the ball (q_norm2_max = {bound})"
            )));
        }
        Ok(out)
    }

    pub fn lambda_grid(&self) -> Result<Vec<f64>> {
        let grid = self
            .lambda_grid
            .clone()
            .unwrap_or_else(|| (0..=10).map(|k| k as f64 / 10.0).collect());
        if grid.is_empty() {
            return Err(Error::invalid("lambda_grid is empty"));
        }
        for &l in &grid {
            if !(0.0..=1.0).contains(&l) {
                return Err(Error::invalid(format!(
                    "lambda_grid values must lie in [0, 1], got {l}"
                )));
            }
        }
        Ok(grid)
    }
}

/// Route selector for the rpa command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Matrix,
    Integral,
    Series(u32),
    All,
}

pub fn parse_route(s: &str) -> Result<Route> {
    match s {
        "matrix" => Ok(Route::Matrix),
        "integral" => Ok(Route::Integral),
        "all" => Ok(Route::All),
        _ => {
            if let Some(n) = s.strip_prefix("series:") {
                let n: u32 = n
                    .parse()
                    .map_err(|_| Error::invalid(format!("route: bad series order in '{s}'")))?;
                Ok(Route::Series(n))
            } else {
                Err(Error::invalid(format!(
                    "route must be matrix|integral|series:<n>|all, got '{s}'"
                )))
            }
        }
    }
}

/// Parse "coulomb:g=1", "yukawa:g=1,p=2", "zero". A zero coupling in any
/// family degrades gracefully to the free gas.
pub fn parse_potential(desc: &str) -> Result<PotentialSpec> {
    let desc = desc.trim();
    if desc == "zero" {
        return Ok(PotentialSpec::zero());
    }
    let (family, rest) = desc
        .split_once(':')
        .ok_or_else(|| Error::invalid(format!("potential: expected family:params, got '{desc}'")))?;
    let mut g: Option<f64> = None;
    let mut p: Option<f64> = None;
    for kv in rest.split(',') {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("potential: expected key=value, got '{kv}'")))?;
        let v: f64 = v
            .parse()
            .map_err(|_| Error::invalid(format!("potential: bad number '{v}' for '{k}'")))?;
        match k.trim() {
            "g" => g = Some(v),
            "p" => p = Some(v),
            other => {
                return Err(Error::invalid(format!(
                    "potential: unknown parameter '{other}'"
                )))
            }
        }
    }
    let g = g.ok_or_else(|| Error::invalid("potential: missing coupling g"))?;
    match family {
        "coulomb" => {
            if g == 0.0 {
                Ok(PotentialSpec::zero())
            } else {
                PotentialSpec::coulomb(g)
            }
        }
        "yukawa" => {
            let p = p.unwrap_or(2.0);
            if g == 0.0 {
                Ok(PotentialSpec::zero())
            } else {
                PotentialSpec::yukawa_like(g, p)
            }
        }
        other => Err(Error::invalid(format!(
            "potential: unknown family '{other}' (use coulomb, yukawa or zero)"
        ))),
    }
}
