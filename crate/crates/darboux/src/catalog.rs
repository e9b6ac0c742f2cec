//! Built-in surface catalog. Every entry has a documented closed form so
//! published numbers can be re-derived by hand.
//!
//! | name                 | signature | immersion                                          |
//! |----------------------|-----------|----------------------------------------------------|
//! | paraboloid           | (n, 0)    | x = (u, |u|^2 / 2), umbilical exactly at u = 0     |
//! | graph-cubic          | (n, 0)    | x = (u, sum_k (k u_k^2 / 2 + u_k^3 / 6))           |
//! | sphere-stereographic | (n, 0)    | x = (2u, |u|^2 - 1) / (|u|^2 + 1), the unit sphere |
//! | ellipsoid-graph      | (n, 0)    | x = (u, 0.8 sqrt(1 - sum (u_k / a_k)^2))           |
//! | pseudo-graph         | (n-1, 1)  | x = (u, sum_k k u_k^2 / 8), timelike normal        |
//!
//! The stereographic sphere satisfies |x|^2 = 1 identically, so it is
//! umbilical at every parameter point; the graph-cubic and ellipsoid
//! surfaces are umbilic-free on their default domains; pseudo-graph keeps
//! |grad f| < 1 on its domain so the induced metric stays definite and the
//! normal timelike (exercising the epsilon = -1 convention).

use crate::error::GeometryError;
use crate::hypersurface::Immersion;
use crate::mobius::AmbientSpace;

/// Names of all built-in surfaces.
pub const CATALOG_NAMES: &[&str] = &[
    "paraboloid",
    "graph-cubic",
    "sphere-stereographic",
    "ellipsoid-graph",
    "pseudo-graph",
];

/// Ellipsoid semi-axes cycle for `ellipsoid-graph`.
const ELLIPSOID_AXES: &[f64] = &[1.2, 1.0, 0.9, 1.1, 0.95];

/// Builds a catalog surface for the given ambient space. The space must be
/// Euclidean (q = 0) for all entries except `pseudo-graph`, which needs
/// q = 1.
pub fn catalog_surface(name: &str, space: &AmbientSpace) -> Result<Immersion, GeometryError> {
    let n = space.dim();
    let d = n - 1;
    let q = space.signature().q;

    let require_signature = |expected_q: usize| -> Result<(), GeometryError> {
        if q != expected_q {
            return Err(GeometryError::InvalidParameter(format!(
                "catalog surface `{name}` needs signature ({}, {expected_q}), got ({}, {q})",
                n - expected_q,
                n - q
            )));
        }
        Ok(())
    };

    let graph_components = |f: String| -> Vec<String> {
        let mut comps: Vec<String> = (1..=d).map(|k| format!("u{k}")).collect();
        comps.push(f);
        comps
    };

    let (components, domain): (Vec<String>, Vec<(f64, f64)>) = match name {
        "paraboloid" => {
            require_signature(0)?;
            let sum = (1..=d)
                .map(|k| format!("u{k}^2"))
                .collect::<Vec<_>>()
                .join(" + ");
            (graph_components(format!("({sum})/2")), vec![(-0.5, 0.5); d])
        }
        "graph-cubic" => {
            require_signature(0)?;
            let sum = (1..=d)
                .map(|k| format!("{k}*u{k}^2/2 + u{k}^3/6"))
                .collect::<Vec<_>>()
                .join(" + ");
            (graph_components(sum), vec![(-0.4, 0.4); d])
        }
        "sphere-stereographic" => {
            require_signature(0)?;
            let norm = (1..=d)
                .map(|k| format!("u{k}^2"))
                .collect::<Vec<_>>()
                .join(" + ");
            let denom = format!("(1 + {norm})");
            let mut comps: Vec<String> = (1..=d).map(|k| format!("2*u{k}/{denom}")).collect();
            comps.push(format!("(({norm}) - 1)/{denom}"));
            (comps, vec![(-0.6, 0.6); d])
        }
        "ellipsoid-graph" => {
            require_signature(0)?;
            let sum = (1..=d)
                .map(|k| {
                    format!(
                        "(u{k}/{})^2",
                        ELLIPSOID_AXES[(k - 1) % ELLIPSOID_AXES.len()]
                    )
                })
                .collect::<Vec<_>>()
                .join(" - ");
            (
                graph_components(format!("0.8*sqrt(1 - {sum})")),
                vec![(0.1, 0.35); d],
            )
        }
        "pseudo-graph" => {
            require_signature(1)?;
            let sum = (1..=d)
                .map(|k| format!("{k}*u{k}^2/8"))
                .collect::<Vec<_>>()
                .join(" + ");
            (graph_components(sum), vec![(-0.4, 0.4); d])
        }
        other => {
            return Err(GeometryError::InvalidParameter(format!(
                "unknown catalog surface `{other}` (known: {})",
                CATALOG_NAMES.join(", ")
            )))
        }
    };

    let refs: Vec<&str> = components.iter().map(String::as_str).collect();
    Immersion::parse(*space, &refs, domain).map_err(|e| {
        GeometryError::InvalidParameter(format!("catalog surface `{name}` failed to build: {e}"))
    })
}
