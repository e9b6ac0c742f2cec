//! Run configuration: a single TOML document describing the ambient space,
//! the surface(s), grids, tolerances, and per-command options.

use nalgebra::DVector;
use serde::Deserialize;

use darboux::catalog::catalog_surface;
use darboux::{AmbientSpace, Generator, Grid, Immersion, MobiusMap};

use crate::report::{Table, Value};

/// Raised for malformed or inconsistent configuration, with field context.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub space: SpaceConfig,
    pub surface: SurfaceConfig,
    pub surface_bar: Option<SurfaceConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub invariant: InvariantOptions,
    #[serde(default)]
    pub mobius_apply: MobiusApplyOptions,
    #[serde(default)]
    pub equivalence: EquivalenceOptions,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub p: usize,
    pub q: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    /// Catalog name, exclusive with `components`.
    pub catalog: Option<String>,
    /// Component expressions over u1..u{n-1}.
    pub components: Option<Vec<String>>,
    /// Parameter box; defaults to the catalog surface's documented domain.
    pub domain: Option<Vec<[f64; 2]>>,
    /// Grid resolution per axis (>= 2); defaults to 3.
    pub resolution: Option<Vec<usize>>,
    /// Transformation chain applied to the surface, first entry first.
    #[serde(default)]
    pub transform: Vec<TransformSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum TransformSpec {
    Translation {
        vector: Vec<f64>,
    },
    /// Rotation (or boost) in the plane of 1-based ambient axes.
    Rotation {
        i: usize,
        j: usize,
        angle: f64,
    },
    Dilation {
        factor: f64,
    },
    Inversion {
        radius_sq: f64,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_umbilic_tol")]
    pub umbilic_tol: f64,
    #[serde(default = "default_factor_tol")]
    pub factor_tol: f64,
    /// Absolute determinant threshold; when absent a scale-aware default
    /// applies.
    pub det_eps: Option<f64>,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
}

fn default_umbilic_tol() -> f64 {
    1e-8
}

fn default_factor_tol() -> f64 {
    1e-6
}

fn default_fd_step() -> f64 {
    1e-4
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            umbilic_tol: default_umbilic_tol(),
            factor_tol: default_factor_tol(),
            det_eps: None,
            fd_step: default_fd_step(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantOptions {
    /// Number of random tangent directions sampled per run.
    #[serde(default = "default_directions")]
    pub directions: usize,
}

fn default_directions() -> usize {
    4
}

impl Default for InvariantOptions {
    fn default() -> Self {
        InvariantOptions {
            directions: default_directions(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobiusApplyOptions {
    /// Transformation chain to apply, first entry first.
    #[serde(default)]
    pub transform: Vec<TransformSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceOptions {
    #[serde(default = "default_true")]
    pub reconstruct: bool,
}

fn default_true() -> bool {
    true
}

impl Default for EquivalenceOptions {
    fn default() -> Self {
        EquivalenceOptions { reconstruct: true }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.space.p < 1 {
            return Err(ConfigError("space.p must be at least 1".into()));
        }
        if self.space.p + self.space.q < 3 {
            return Err(ConfigError("space.p + space.q must be at least 3".into()));
        }
        let t = &self.tolerances;
        for (name, value) in [
            ("umbilic_tol", t.umbilic_tol),
            ("factor_tol", t.factor_tol),
            ("fd_step", t.fd_step),
        ] {
            if value.is_nan() || value <= 0.0 {
                return Err(ConfigError(format!(
                    "tolerances.{name} must be positive, got {value}"
                )));
            }
        }
        if let Some(det_eps) = t.det_eps {
            if det_eps.is_nan() || det_eps <= 0.0 {
                return Err(ConfigError(format!(
                    "tolerances.det_eps must be positive, got {det_eps}"
                )));
            }
        }
        if self.invariant.directions == 0 {
            return Err(ConfigError(
                "invariant.directions must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn space(&self) -> Result<AmbientSpace, ConfigError> {
        AmbientSpace::new(self.space.p, self.space.q)
            .map_err(|e| ConfigError(format!("space: {e}")))
    }

    /// Builds a surface plus its sample grid from a surface block.
    pub fn build_surface(
        &self,
        which: &SurfaceConfig,
        label: &str,
    ) -> Result<(Immersion, Grid), ConfigError> {
        let space = self.space()?;
        let d = space.dim() - 1;

        let base = match (&which.catalog, &which.components) {
            (Some(name), None) => {
                catalog_surface(name, &space).map_err(|e| ConfigError(format!("{label}: {e}")))?
            }
            (None, Some(components)) => {
                let domain = which.domain.as_ref().ok_or_else(|| {
                    ConfigError(format!("{label}: explicit components require a domain"))
                })?;
                let domain: Vec<(f64, f64)> = domain.iter().map(|[lo, hi]| (*lo, *hi)).collect();
                let texts: Vec<&str> = components.iter().map(String::as_str).collect();
                Immersion::parse(space, &texts, domain)
                    .map_err(|e| ConfigError(format!("{label}: {e}")))?
            }
            (Some(_), Some(_)) => {
                return Err(ConfigError(format!(
                    "{label}: give either catalog or components, not both"
                )))
            }
            (None, None) => {
                return Err(ConfigError(format!(
                    "{label}: a surface needs a catalog name or components"
                )))
            }
        };

        // An explicit domain overrides the catalog default.
        let base = match (&which.catalog, &which.domain) {
            (Some(_), Some(domain)) => {
                let domain: Vec<(f64, f64)> = domain.iter().map(|[lo, hi]| (*lo, *hi)).collect();
                Immersion::new(*base.space(), base.components().to_vec(), domain)
                    .map_err(|e| ConfigError(format!("{label}: {e}")))?
            }
            _ => base,
        };

        let surface = if which.transform.is_empty() {
            base
        } else {
            let map = build_transform_chain(&space, &which.transform)
                .map_err(|e| ConfigError(format!("{label}: {e}")))?;
            base.transformed(&map)
                .map_err(|e| ConfigError(format!("{label}: {e}")))?
        };

        let resolution = which.resolution.clone().unwrap_or_else(|| vec![3; d]);
        if resolution.len() != d {
            return Err(ConfigError(format!(
                "{label}: resolution needs {d} axes, got {}",
                resolution.len()
            )));
        }
        if resolution.iter().any(|&r| r < 2) {
            return Err(ConfigError(format!(
                "{label}: grid resolution must be at least 2 per axis"
            )));
        }
        let grid = Grid::new(surface.domain().to_vec(), resolution)
            .map_err(|e| ConfigError(format!("{label}: {e}")))?;
        Ok((surface, grid))
    }
}

/// Composes a transform chain, first entry applied first.
pub fn build_transform_chain(
    space: &AmbientSpace,
    chain: &[TransformSpec],
) -> Result<MobiusMap, darboux::GeometryError> {
    let mut map = MobiusMap::identity(space);
    for spec in chain {
        let kind = match spec {
            TransformSpec::Translation { vector } => {
                Generator::Translation(DVector::from_row_slice(vector))
            }
            TransformSpec::Rotation { i, j, angle } => {
                if *i == 0 || *j == 0 {
                    return Err(darboux::GeometryError::InvalidParameter(
                        "rotation axes are 1-based".into(),
                    ));
                }
                Generator::Rotation {
                    i: i - 1,
                    j: j - 1,
                    angle: *angle,
                }
            }
            TransformSpec::Dilation { factor } => Generator::Dilation(*factor),
            TransformSpec::Inversion { radius_sq } => Generator::Inversion {
                radius_sq: *radius_sq,
            },
        };
        map = MobiusMap::compose(&MobiusMap::generator(space, &kind)?, &map);
    }
    Ok(map)
}

/// Structured echo of the configuration for the result record.
pub fn config_echo_tables(config: &RunConfig) -> Vec<(String, Table)> {
    let mut tables = Vec::new();

    let mut space = Table::new();
    space.push("p", Value::Int(config.space.p as i64));
    space.push("q", Value::Int(config.space.q as i64));
    tables.push(("config.space".to_string(), space));

    tables.push(("config.surface".to_string(), surface_echo(&config.surface)));
    if let Some(bar) = &config.surface_bar {
        tables.push(("config.surface_bar".to_string(), surface_echo(bar)));
    }

    let mut tol = Table::new();
    tol.push("umbilic_tol", Value::Float(config.tolerances.umbilic_tol));
    tol.push("factor_tol", Value::Float(config.tolerances.factor_tol));
    if let Some(det_eps) = config.tolerances.det_eps {
        tol.push("det_eps", Value::Float(det_eps));
    }
    tol.push("fd_step", Value::Float(config.tolerances.fd_step));
    tables.push(("config.tolerances".to_string(), tol));
    tables
}

fn surface_echo(surface: &SurfaceConfig) -> Table {
    let mut t = Table::new();
    if let Some(catalog) = &surface.catalog {
        t.push("catalog", Value::Str(catalog.clone()));
    }
    if let Some(components) = &surface.components {
        t.push("components", Value::strings(components.iter().cloned()));
    }
    if let Some(domain) = &surface.domain {
        t.push(
            "domain",
            Value::Array(
                domain
                    .iter()
                    .map(|[lo, hi]| Value::floats([*lo, *hi]))
                    .collect(),
            ),
        );
    }
    if let Some(resolution) = &surface.resolution {
        t.push(
            "resolution",
            Value::Array(resolution.iter().map(|&r| Value::Int(r as i64)).collect()),
        );
    }
    if !surface.transform.is_empty() {
        t.push(
            "transform_chain",
            Value::strings(surface.transform.iter().map(transform_label)),
        );
    }
    t
}

pub fn transform_label(spec: &TransformSpec) -> String {
    match spec {
        TransformSpec::Translation { vector } => format!("translation {vector:?}"),
        TransformSpec::Rotation { i, j, angle } => {
            format!("rotation plane ({i}, {j}) angle {angle}")
        }
        TransformSpec::Dilation { factor } => format!("dilation {factor}"),
        TransformSpec::Inversion { radius_sq } => format!("inversion radius_sq {radius_sq}"),
    }
}
