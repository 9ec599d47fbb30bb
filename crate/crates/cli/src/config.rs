//! Run configuration: TOML or JSON file merged with command-line overrides.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tracehole::hole_optimizer::Strategy;
use tracehole::shape_derivative::FdTransport;
use tracehole::{Domain, ProblemConfig};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfgBlock {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub epsilon: Option<f64>,
    pub dof_tolerance: Option<f64>,
    pub rel_tolerance: Option<f64>,
    pub max_inner_iterations: Option<usize>,
}

impl CfgBlock {
    pub fn resolve(&self) -> ProblemConfig {
        let (p, q) = (self.p.unwrap_or(2.0), self.q.unwrap_or(2.0));
        let mut cfg = ProblemConfig::new(p, q);
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        if let Some(t) = self.dof_tolerance {
            cfg.dof_tolerance = t;
        }
        if let Some(t) = self.rel_tolerance {
            cfg.rel_tolerance = t;
        }
        if let Some(n) = self.max_inner_iterations {
            cfg.max_inner_iterations = n;
        }
        cfg
    }
}

/// Hole as arclength arcs `(start, length)` or explicit facet indices.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleBlock {
    #[serde(default)]
    pub arcs: Vec<(f64, f64)>,
    #[serde(default)]
    pub facets: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldBlock {
    /// `amplitude * cos^2(pi d / (2 half_width))` in arclength distance `d`
    /// from `center`; center and width default to the hole's first arc.
    Bump {
        center: Option<f64>,
        half_width: Option<f64>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Rigid rotation of a disk.
    Rotation {
        #[serde(default = "one")]
        speed: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerBlock {
    pub strategy: Option<Strategy>,
    pub n_starts: Option<usize>,
    pub max_iterations: Option<usize>,
    pub stationarity_tolerance: Option<f64>,
    pub saddle_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThinBlock {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub mu_values: Option<Vec<f64>>,
    pub resolution_fraction: Option<f64>,
    pub max_vertices: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneDimBlock {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub n_cells: Option<usize>,
    pub sweep_cells: Option<usize>,
}

/// Everything a run may need; each command reads the fields it uses.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub domain: Option<Domain>,
    pub resolution: Option<f64>,
    #[serde(default)]
    pub cfg: CfgBlock,
    pub hole: Option<HoleBlock>,
    pub alpha: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub optimizer: OptimizerBlock,
    pub field: Option<FieldBlock>,
    /// Finite-difference steps as fractions of the boundary length.
    pub steps: Option<Vec<f64>>,
    pub transport: Option<FdTransport>,
    pub restarts: Option<usize>,
    #[serde(default)]
    pub thin: ThinBlock,
    #[serde(default)]
    pub one_dim: OneDimBlock,
}

impl RunSpec {
    pub fn load(path: &Path) -> Result<RunSpec> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let spec = if is_json {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        Ok(spec)
    }

    pub fn domain(&self) -> Result<Domain> {
        self.domain
            .context("missing domain (set [domain] in the config or pass --domain)")
    }

    pub fn resolution(&self) -> Result<f64> {
        self.resolution
            .context("missing resolution (config `resolution` or --resolution)")
    }

    pub fn alpha(&self) -> Result<f64> {
        self.alpha.context("missing alpha (config `alpha` or --alpha)")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

/// Parse `kind:params`, e.g. `disk:1`, `rectangle:2,1`, `interval:0,1`, `thin:0,1,0.0625`.
pub fn parse_domain(s: &str) -> Result<Domain> {
    let (kind, params) = s.split_once(':').unwrap_or((s, ""));
    let nums: Vec<f64> = params
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number `{t}` in domain `{s}`"))
        })
        .collect::<Result<_>>()?;
    let d = match (kind, nums.as_slice()) {
        ("disk", [r]) => Domain::Disk { radius: *r },
        ("disk", []) => Domain::Disk { radius: 1.0 },
        ("rectangle", [w, h]) => Domain::Rectangle { width: *w, height: *h },
        ("interval", [a, b]) => Domain::Interval { a: *a, b: *b },
        ("thin" | "thin_rectangle", [a, b, mu]) => Domain::ThinRectangle { a: *a, b: *b, mu: *mu },
        _ => bail!("cannot parse domain `{s}`; expected disk:R, rectangle:W,H, interval:A,B or thin:A,B,MU"),
    };
    Ok(d)
}

/// Parse `start:length`.
pub fn parse_arc(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s.split_once(':').context("arc must be START:LENGTH")?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number `{t}`")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domains_parse() {
        assert_eq!(parse_domain("disk:1").unwrap(), Domain::Disk { radius: 1.0 });
        assert_eq!(
            parse_domain("rectangle:2,1").unwrap(),
            Domain::Rectangle {
                width: 2.0,
                height: 1.0
            }
        );
        assert!(parse_domain("torus:1").is_err());
        assert!(parse_domain("disk:x").is_err());
    }

    #[test]
    fn toml_spec_parses() {
        let spec: RunSpec = toml::from_str(
            r#"
            resolution = 0.1
            alpha = 0.25
            [domain]
            kind = "disk"
            params = { radius = 1.0 }
            [cfg]
            p = 2.0
            q = 3.0
            [hole]
            arcs = [[0.0, 1.0]]
            [field]
            kind = "bump"
            "#,
        )
        .unwrap();
        assert_eq!(spec.domain, Some(Domain::Disk { radius: 1.0 }));
        assert_eq!(spec.cfg.resolve().q, 3.0);
        assert_eq!(spec.hole.unwrap().arcs, vec![(0.0, 1.0)]);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = toml::from_str::<RunSpec>("resolutoin = 0.1").unwrap_err();
        assert!(err.to_string().contains("resolutoin"));
    }
}
