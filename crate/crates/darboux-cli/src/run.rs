//! The five subcommands: invariant, frame, mobius-apply, equivalence,
//! lemma-check. Each produces an ordered result document and an exit class.

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use darboux::equivalence::{test_equivalence, CorrespondencePair, EquivalenceConfig};
use darboux::frames::{
    build_frame, connection_at, frame_residuals, structure_residual, FrameOrder,
};
use darboux::hypersurface::{canonical_element, fundamental_forms, is_umbilical};
use darboux::{invariant_i, GeometryError};

use crate::config::{build_transform_chain, transform_label, RunConfig};
use crate::report::{Table, Value};

/// Process exit classes: 0 success, 1 error, 2 refusal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Ok,
    Error,
    Refusal,
}

impl ExitClass {
    pub fn code(self) -> i32 {
        match self {
            ExitClass::Ok => 0,
            ExitClass::Error => 1,
            ExitClass::Refusal => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ExitClass::Ok => "ok",
            ExitClass::Error => "error",
            ExitClass::Refusal => "refusal",
        }
    }
}

/// Ordered command output, assembled into the final document by main.
pub struct Outcome {
    pub tables: Vec<(String, Table)>,
    pub table_arrays: Vec<(String, Vec<Table>)>,
    pub errors: Vec<Table>,
    pub exit: ExitClass,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            tables: Vec::new(),
            table_arrays: Vec::new(),
            errors: Vec::new(),
            exit: ExitClass::Ok,
        }
    }

    fn record_error(&mut self, index: usize, u: &DVector<f64>, error: &GeometryError) {
        let mut t = Table::new();
        t.push("index", Value::Int(index as i64));
        t.push("u", Value::floats(u.iter().copied()));
        t.push("error", Value::Str(error.to_string()));
        self.errors.push(t);
        self.exit = ExitClass::Error;
    }
}

fn point_header(index: usize, u: &DVector<f64>) -> Table {
    let mut t = Table::new();
    t.push("index", Value::Int(index as i64));
    t.push("u", Value::floats(u.iter().copied()));
    t
}

/// Unit directions sampled once per run from the given seed; every point
/// reports the invariant on the same directions.
fn sample_directions(d: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0_f64));
        let norm = v.norm();
        if norm < 0.3 {
            continue;
        }
        out.push(v / norm);
    }
    out
}

pub fn run_invariant(config: &RunConfig, seed: u64) -> Result<Outcome, String> {
    let (surface, grid) = config
        .build_surface(&config.surface, "surface")
        .map_err(|e| e.to_string())?;
    let directions = sample_directions(surface.param_dim(), config.invariant.directions, seed);
    let tol = &config.tolerances;

    let mut outcome = Outcome::new();
    let mut points = Vec::with_capacity(grid.len());
    let mut max_apolarity = 0.0_f64;
    let mut umbilic_count = 0usize;

    for (index, u) in grid.points().enumerate() {
        let data = match surface
            .jet_at(&u)
            .and_then(|jet| fundamental_forms(surface.space(), &jet, tol.det_eps))
        {
            Ok(data) => data,
            Err(e) => {
                outcome.record_error(index, &u, &e);
                continue;
            }
        };
        let apolarity = data
            .g_inv
            .contract(&data.h)
            .map_err(|e| e.to_string())?
            .abs();
        max_apolarity = max_apolarity.max(apolarity);
        let umbilic = is_umbilical(&data, tol.umbilic_tol);
        umbilic_count += usize::from(umbilic);

        let mut t = point_header(index, &u);
        t.push("x", {
            let x = surface.value_at(&u).map_err(|e| e.to_string())?;
            Value::floats(x.iter().copied())
        });
        t.push("g", Value::matrix(data.g.matrix()));
        t.push("lambda", Value::matrix(data.lambda.matrix()));
        t.push("lambda_mean", Value::Float(data.lambda_mean));
        t.push("h", Value::matrix(data.h.matrix()));
        t.push("epsilon", Value::Float(data.epsilon));
        t.push("apolarity_residual", Value::Float(apolarity));
        t.push("umbilic", Value::Bool(umbilic));
        match canonical_element(&data) {
            Ok(element) => {
                t.push("g_hat", Value::matrix(element.g_hat.matrix()));
                t.push("h_hat", Value::matrix(element.h_hat.matrix()));
                t.push("gauge_sign", Value::Float(element.gauge_sign));
            }
            Err(e) => outcome.record_error(index, &u, &e),
        }
        let mut samples = Vec::new();
        for w in &directions {
            match invariant_i(&data, w) {
                Ok(value) => samples.push(Value::Float(value)),
                Err(e) => {
                    outcome.record_error(index, &u, &e);
                    samples.push(Value::Str("isotropic-direction".into()));
                }
            }
        }
        t.push("invariant", Value::Array(samples));
        points.push(t);
    }

    let mut summary = Table::new();
    summary.push("points", Value::Int(grid.len() as i64));
    summary.push("umbilic_points", Value::Int(umbilic_count as i64));
    summary.push("max_apolarity_residual", Value::Float(max_apolarity));
    summary.push("point_errors", Value::Int(outcome.errors.len() as i64));

    let mut dirs = Table::new();
    dirs.push(
        "directions",
        Value::Array(
            directions
                .iter()
                .map(|w| Value::floats(w.iter().copied()))
                .collect(),
        ),
    );
    outcome.tables.push(("sampling".into(), dirs));
    outcome.tables.push(("summary".into(), summary));
    outcome.table_arrays.push(("points".into(), points));
    Ok(outcome)
}

pub fn run_frame(config: &RunConfig) -> Result<Outcome, String> {
    let (surface, grid) = config
        .build_surface(&config.surface, "surface")
        .map_err(|e| e.to_string())?;
    let tol = &config.tolerances;
    let step = tol.fd_step;

    let mut outcome = Outcome::new();
    let mut points = Vec::with_capacity(grid.len());
    let mut max_frame_residual = 0.0_f64;
    let mut max_omega_0n = 0.0_f64;
    let mut max_relation = 0.0_f64;
    let mut max_lambda_error = 0.0_f64;
    let mut max_h_error = 0.0_f64;
    let mut max_structure = 0.0_f64;
    let mut connection_points = 0usize;
    let mut structure_points = 0usize;

    for (index, u) in grid.points().enumerate() {
        let (jet, data) = match surface
            .jet_at(&u)
            .and_then(|jet| fundamental_forms(surface.space(), &jet, tol.det_eps).map(|d| (jet, d)))
        {
            Ok(pair) => pair,
            Err(e) => {
                outcome.record_error(index, &u, &e);
                continue;
            }
        };

        let mut t = point_header(index, &u);
        let first = build_frame(surface.space(), &jet, &data, FrameOrder::First);
        let second = build_frame(surface.space(), &jet, &data, FrameOrder::Second);
        let r1 = frame_residuals(&first, &data.g).max_violation();
        let r2 = frame_residuals(&second, &data.g).max_violation();
        max_frame_residual = max_frame_residual.max(r1).max(r2);
        t.push("frame_residual_first", Value::Float(r1));
        t.push("frame_residual_second", Value::Float(r2));

        if surface.contains_with_margin(&u, step) {
            match connection_at(&surface, &u, step, FrameOrder::First) {
                Ok(slice) => {
                    connection_points += 1;
                    let lambda_error = slice
                        .extract_tangency_form()
                        .map(|m| (m - slice.lambda.matrix()).norm())
                        .unwrap_or(f64::NAN);
                    let relation = slice
                        .omega_0np1_max()
                        .max(slice.omega_nn_max())
                        .max(slice.first_order_relation_max());
                    max_omega_0n = max_omega_0n.max(slice.omega_0n_max());
                    max_relation = max_relation.max(relation);
                    if lambda_error.is_finite() {
                        max_lambda_error = max_lambda_error.max(lambda_error);
                    }
                    t.push("omega_0n", Value::Float(slice.omega_0n_max()));
                    t.push("connection_relations", Value::Float(relation));
                    if lambda_error.is_finite() {
                        t.push("lambda_recovery_error", Value::Float(lambda_error));
                    }
                }
                Err(e) => outcome.record_error(index, &u, &e),
            }
            match connection_at(&surface, &u, step, FrameOrder::Second) {
                Ok(slice) => {
                    let h_error = slice
                        .extract_tangency_form()
                        .map(|m| (m - slice.h.matrix()).norm())
                        .unwrap_or(f64::NAN);
                    if h_error.is_finite() {
                        max_h_error = max_h_error.max(h_error);
                        t.push("h_recovery_error", Value::Float(h_error));
                    }
                }
                Err(e) => outcome.record_error(index, &u, &e),
            }
        }
        if surface.contains_with_margin(&u, 2.0 * step) {
            match structure_residual(&surface, &u, step) {
                Ok(residual) => {
                    structure_points += 1;
                    max_structure = max_structure.max(residual);
                    t.push("structure_residual", Value::Float(residual));
                }
                Err(e) => outcome.record_error(index, &u, &e),
            }
        }
        points.push(t);
    }

    let mut summary = Table::new();
    summary.push("points", Value::Int(grid.len() as i64));
    summary.push("connection_points", Value::Int(connection_points as i64));
    summary.push("structure_points", Value::Int(structure_points as i64));
    summary.push("fd_step", Value::Float(step));
    summary.push("max_frame_residual", Value::Float(max_frame_residual));
    summary.push("max_omega_0n", Value::Float(max_omega_0n));
    summary.push("max_connection_relation", Value::Float(max_relation));
    summary.push("max_lambda_recovery_error", Value::Float(max_lambda_error));
    summary.push("max_h_recovery_error", Value::Float(max_h_error));
    summary.push("max_structure_residual", Value::Float(max_structure));
    summary.push("point_errors", Value::Int(outcome.errors.len() as i64));
    outcome.tables.push(("summary".into(), summary));
    outcome.table_arrays.push(("points".into(), points));
    Ok(outcome)
}

pub fn run_mobius_apply(config: &RunConfig) -> Result<Outcome, String> {
    let (surface, grid) = config
        .build_surface(&config.surface, "surface")
        .map_err(|e| e.to_string())?;
    let space = surface.space();
    let map =
        build_transform_chain(space, &config.mobius_apply.transform).map_err(|e| e.to_string())?;
    let moved = surface.transformed(&map).map_err(|e| e.to_string())?;

    let mut outcome = Outcome::new();

    let mut map_table = Table::new();
    map_table.push(
        "chain",
        Value::strings(config.mobius_apply.transform.iter().map(transform_label)),
    );
    map_table.push("matrix", Value::matrix(map.matrix()));
    map_table.push(
        "orthogonality_residual",
        Value::Float(map.orthogonality_residual(space)),
    );
    outcome.tables.push(("map".into(), map_table));

    let mut transformed = Table::new();
    transformed.push("p", Value::Int(space.signature().p as i64));
    transformed.push("q", Value::Int(space.signature().q as i64));
    transformed.push(
        "components",
        Value::strings(moved.components().iter().map(|c| c.unparse())),
    );
    transformed.push(
        "domain",
        Value::Array(
            moved
                .domain()
                .iter()
                .map(|(lo, hi)| Value::floats([*lo, *hi]))
                .collect(),
        ),
    );
    transformed.push(
        "resolution",
        Value::Array(
            grid.resolution()
                .iter()
                .map(|&r| Value::Int(r as i64))
                .collect(),
        ),
    );
    outcome
        .tables
        .push(("transformed_surface".into(), transformed));

    let mut points = Vec::with_capacity(grid.len());
    for (index, u) in grid.points().enumerate() {
        let mut t = point_header(index, &u);
        match surface.value_at(&u) {
            Ok(x) => {
                t.push("x", Value::floats(x.iter().copied()));
            }
            Err(e) => {
                outcome.record_error(index, &u, &e);
                continue;
            }
        }
        match moved.value_at(&u) {
            Ok(y) => {
                if y.iter().all(|v| v.is_finite()) {
                    t.push("image", Value::floats(y.iter().copied()));
                } else {
                    outcome.record_error(index, &u, &GeometryError::PointAtInfinity { minus: 0.0 });
                    continue;
                }
            }
            Err(e) => {
                outcome.record_error(index, &u, &e);
                continue;
            }
        }
        points.push(t);
    }

    let mut summary = Table::new();
    summary.push("points", Value::Int(grid.len() as i64));
    summary.push("point_errors", Value::Int(outcome.errors.len() as i64));
    outcome.tables.push(("summary".into(), summary));
    outcome.table_arrays.push(("points".into(), points));
    Ok(outcome)
}

pub fn run_equivalence(config: &RunConfig) -> Result<Outcome, String> {
    let (surface, grid) = config
        .build_surface(&config.surface, "surface")
        .map_err(|e| e.to_string())?;
    let bar_config = config
        .surface_bar
        .as_ref()
        .ok_or_else(|| "equivalence needs a [surface_bar] block".to_string())?;
    let (surface_bar, _) = config
        .build_surface(bar_config, "surface_bar")
        .map_err(|e| e.to_string())?;

    let pair = CorrespondencePair::new(surface, surface_bar, grid).map_err(|e| e.to_string())?;
    let eq_config = EquivalenceConfig {
        factor_tol: config.tolerances.factor_tol,
        umbilic_tol: config.tolerances.umbilic_tol,
        det_eps: config.tolerances.det_eps,
        reconstruct: config.equivalence.reconstruct,
    };
    let verdict = test_equivalence(&pair, &eq_config).map_err(|e| e.to_string())?;

    let mut outcome = Outcome::new();
    let mut v = Table::new();
    v.push("equivalent", Value::Bool(verdict.equivalent));
    if let Some(reason) = &verdict.refusal_reason {
        v.push("refusal_reason", Value::Str(reason.clone()));
        outcome.exit = ExitClass::Refusal;
    } else {
        v.push("max_g_residual", Value::Float(verdict.max_g_residual));
        v.push("max_h_residual", Value::Float(verdict.max_h_residual));
        v.push(
            "sigma_sign_consistent",
            Value::Bool(verdict.sigma_sign_consistent),
        );
        v.push("sigma", Value::floats(verdict.sigmas.iter().copied()));
    }
    if let Some(map) = &verdict.reconstructed {
        v.push("map_matrix", Value::matrix(map.matrix()));
        v.push(
            "map_orthogonality_residual",
            Value::Float(map.orthogonality_residual(pair.v().space())),
        );
    }
    if let Some(residual) = verdict.map_residual {
        v.push("map_residual", Value::Float(residual));
    }
    outcome.tables.push(("verdict".into(), v));
    Ok(outcome)
}

pub fn run_lemma_check(config: &RunConfig) -> Result<Outcome, String> {
    let (surface, grid) = config
        .build_surface(&config.surface, "surface")
        .map_err(|e| e.to_string())?;
    let tol = &config.tolerances;

    let mut outcome = Outcome::new();
    let mut points = Vec::with_capacity(grid.len());
    let mut min_nonumbilic = f64::INFINITY;
    let mut max_umbilic = 0.0_f64;
    let mut umbilic_count = 0usize;

    for (index, u) in grid.points().enumerate() {
        let data = match surface
            .jet_at(&u)
            .and_then(|jet| fundamental_forms(surface.space(), &jet, tol.det_eps))
        {
            Ok(data) => data,
            Err(e) => {
                outcome.record_error(index, &u, &e);
                continue;
            }
        };
        let residual = darboux::equivalence::lemma_residual(&data);
        let umbilic = is_umbilical(&data, tol.umbilic_tol);
        if umbilic {
            umbilic_count += 1;
            max_umbilic = max_umbilic.max(residual);
        } else {
            min_nonumbilic = min_nonumbilic.min(residual);
        }
        let mut t = point_header(index, &u);
        t.push("lemma_residual", Value::Float(residual));
        t.push("umbilic", Value::Bool(umbilic));
        points.push(t);
    }

    let mut summary = Table::new();
    summary.push("points", Value::Int(grid.len() as i64));
    summary.push("umbilic_points", Value::Int(umbilic_count as i64));
    if min_nonumbilic.is_finite() {
        summary.push("min_nonumbilic_residual", Value::Float(min_nonumbilic));
    }
    summary.push("max_umbilic_residual", Value::Float(max_umbilic));
    summary.push("point_errors", Value::Int(outcome.errors.len() as i64));
    outcome.tables.push(("summary".into(), summary));
    outcome.table_arrays.push(("points".into(), points));
    Ok(outcome)
}
