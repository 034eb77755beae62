//! Scenario JSON: parsing with exhaustive error collection, command-line
//! overrides, and the canonical echo embedded in reports.
//!
//! The loader walks the document by hand instead of deriving `Deserialize`
//! so that one pass reports every problem, each tagged with a JSON pointer
//! to the offending field. Optional fields fall back to the documented
//! defaults; `adjacency`, `x0` and `bounds` are required.

use std::fs;
use std::path::Path;

use rendezvous_core::control::{Bounds, RobotModel};
use rendezvous_core::matops::Matrix;
use rendezvous_core::sim::{LawVariant, LinkSetting, NetworkModel, Scenario, ValidationIssue};
use rendezvous_core::topology::Topology;
use rendezvous_core::{Matrix64, Scenario64, Topology64};
use serde_json::{json, Map, Value};

use crate::error::CliError;

const DEFAULT_CONTROL_PERIOD: f64 = 0.1;
const DEFAULT_DT: f64 = 0.01;
const DEFAULT_T_END: f64 = 20.0;
const DEFAULT_CONSENSUS_TOL: f64 = 1e-3;

/// Command-line overrides applied on top of the file's values.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub law: Option<LawVariant>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
}

/// Reads, parses and fully validates a scenario file.
pub fn load(path: &Path) -> Result<Scenario64, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| {
        CliError::validation(format!("{}: JSON parse error: {e}", path.display()))
    })?;
    parse_scenario(&doc).map_err(CliError::issues)
}

/// Applies flag overrides and re-validates the result.
pub fn apply_overrides(scenario: &mut Scenario64, ov: &Overrides) -> Result<(), CliError> {
    if let Some(seed) = ov.seed {
        scenario.seed = seed;
    }
    if let Some(law) = ov.law {
        scenario.law_variant = law;
    }
    if let Some(t_end) = ov.t_end {
        scenario.t_end = t_end;
    }
    if let Some(dt) = ov.dt {
        scenario.dt = dt;
    }
    let issues = scenario.validate();
    if issues.is_empty() {
        Ok(())
    } else {
        Err(CliError::issues(issues))
    }
}

/// The effective configuration a run used, in canonical (fully expanded)
/// form, plus which flags overrode the file.
pub fn echo_scenario(s: &Scenario64, ov: &Overrides) -> Value {
    let mut overrides = Map::new();
    if let Some(seed) = ov.seed {
        overrides.insert("seed".into(), json!(seed));
    }
    if let Some(law) = ov.law {
        overrides.insert("law".into(), json!(law));
    }
    if let Some(t_end) = ov.t_end {
        overrides.insert("t_end".into(), json!(t_end));
    }
    if let Some(dt) = ov.dt {
        overrides.insert("dt".into(), json!(dt));
    }
    let n = s.n();
    json!({
        "n": n,
        "model": {"a": rows_of(s.model.a()), "b": rows_of(s.model.b())},
        "adjacency": rows_of(s.topology.adjacency()),
        "x0": s.x0,
        "q": rows_of(&s.q),
        "r": rows_of(&s.r),
        "bounds": {
            "u_min": (0..n).map(|i| s.bounds.lower(i).to_vec()).collect::<Vec<_>>(),
            "u_max": (0..n).map(|i| s.bounds.upper(i).to_vec()).collect::<Vec<_>>(),
        },
        "control_period": s.control_period,
        "dt": s.dt,
        "t_end": s.t_end,
        "consensus_tol": s.consensus_tol,
        "network": {
            "delay_periods": link_json(&s.network.delay_periods),
            "drop_probability": link_json(&s.network.drop_probability),
            "sensor_noise_std": s.network.sensor_noise_std,
        },
        "seed": s.seed,
        "law_variant": s.law_variant,
        "overrides": Value::Object(overrides),
    })
}

pub fn rows_of(m: &Matrix64) -> Vec<Vec<f64>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn link_json<V: serde::Serialize>(l: &LinkSetting<V>) -> Value {
    match l {
        LinkSetting::Uniform(v) => json!(v),
        LinkSetting::PerLink(t) => json!(t),
    }
}

fn push(issues: &mut Vec<ValidationIssue>, path: impl Into<String>, message: impl Into<String>) {
    issues.push(ValidationIssue {
        path: path.into(),
        message: message.into(),
    });
}

fn finite(v: &Value) -> Option<f64> {
    v.as_f64().filter(|x| x.is_finite())
}

fn number_field(
    root: &Map<String, Value>,
    key: &str,
    default: f64,
    issues: &mut Vec<ValidationIssue>,
) -> f64 {
    match root.get(key) {
        None => default,
        Some(v) => match finite(v) {
            Some(x) => x,
            None => {
                push(issues, format!("/{key}"), "must be a finite number");
                default
            }
        },
    }
}

/// Nested array of finite numbers with rectangular rows.
fn parse_matrix(v: &Value, path: &str, issues: &mut Vec<ValidationIssue>) -> Option<Matrix64> {
    let rows = match v.as_array() {
        Some(r) => r,
        None => {
            push(issues, path, "must be an array of rows");
            return None;
        }
    };
    if rows.is_empty() {
        push(issues, path, "must have at least one row");
        return None;
    }
    let mut data: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    let mut ok = true;
    let mut width: Option<usize> = None;
    for (i, row) in rows.iter().enumerate() {
        let cells = match row.as_array() {
            Some(c) => c,
            None => {
                push(issues, format!("{path}/{i}"), "must be an array of numbers");
                ok = false;
                continue;
            }
        };
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                push(
                    issues,
                    format!("{path}/{i}"),
                    format!("expected {w} entries to match the first row, got {}", cells.len()),
                );
                ok = false;
            }
            _ => {}
        }
        let mut out = Vec::with_capacity(cells.len());
        for (j, cell) in cells.iter().enumerate() {
            match finite(cell) {
                Some(x) => out.push(x),
                None => {
                    push(issues, format!("{path}/{i}/{j}"), "must be a finite number");
                    ok = false;
                }
            }
        }
        data.push(out);
    }
    if !ok {
        return None;
    }
    Matrix::from_rows(&data).ok()
}

/// Rows where each entry is either a bare number (one axis) or an array of
/// numbers; used for `x0` and per-robot bounds. Row widths are checked
/// against the model later.
fn parse_rows(v: &Value, path: &str, issues: &mut Vec<ValidationIssue>) -> Option<Vec<Vec<f64>>> {
    let rows = match v.as_array() {
        Some(r) => r,
        None => {
            push(issues, path, "must be an array with one entry per robot");
            return None;
        }
    };
    let mut out = Vec::with_capacity(rows.len());
    let mut ok = true;
    for (i, row) in rows.iter().enumerate() {
        match row {
            Value::Number(_) => match finite(row) {
                Some(x) => out.push(vec![x]),
                None => {
                    push(issues, format!("{path}/{i}"), "must be a finite number");
                    ok = false;
                }
            },
            Value::Array(cells) => {
                let mut r = Vec::with_capacity(cells.len());
                for (j, cell) in cells.iter().enumerate() {
                    match finite(cell) {
                        Some(x) => r.push(x),
                        None => {
                            push(issues, format!("{path}/{i}/{j}"), "must be a finite number");
                            ok = false;
                        }
                    }
                }
                out.push(r);
            }
            _ => {
                push(
                    issues,
                    format!("{path}/{i}"),
                    "must be a number or an array of numbers",
                );
                ok = false;
            }
        }
    }
    ok.then_some(out)
}

fn parse_topology(
    root: &Map<String, Value>,
    issues: &mut Vec<ValidationIssue>,
) -> Option<Topology64> {
    let v = match root.get("adjacency") {
        Some(v) => v,
        None => {
            push(issues, "/adjacency", "required field is missing");
            return None;
        }
    };
    let mat = parse_matrix(v, "/adjacency", issues)?;
    if mat.rows() != mat.cols() {
        push(
            issues,
            "/adjacency",
            format!("must be square, got {}x{}", mat.rows(), mat.cols()),
        );
        return None;
    }
    let mut ok = true;
    for i in 0..mat.rows() {
        for j in 0..mat.cols() {
            let w = mat[(i, j)];
            if i == j && w != 0.0 {
                push(
                    issues,
                    format!("/adjacency/{i}/{j}"),
                    "diagonal entries must be zero (no self-loops)",
                );
                ok = false;
            } else if w < 0.0 {
                push(
                    issues,
                    format!("/adjacency/{i}/{j}"),
                    "link weights must be nonnegative",
                );
                ok = false;
            }
        }
    }
    if !ok {
        return None;
    }
    match Topology::new(mat) {
        Ok(t) => Some(t),
        Err(e) => {
            push(issues, "/adjacency", e.to_string());
            None
        }
    }
}

fn parse_model(
    root: &Map<String, Value>,
    m_fallback: Option<usize>,
    issues: &mut Vec<ValidationIssue>,
) -> Option<RobotModel<f64>> {
    let v = match root.get("model") {
        None => return m_fallback.map(RobotModel::single_integrator),
        Some(v) => v,
    };
    let obj = match v.as_object() {
        Some(o) => o,
        None => {
            push(issues, "/model", "must be an object with fields \"a\" and \"b\"");
            return None;
        }
    };
    for key in obj.keys() {
        if key != "a" && key != "b" {
            push(issues, format!("/model/{key}"), "unknown field");
        }
    }
    let a = match obj.get("a") {
        Some(a) => parse_matrix(a, "/model/a", issues),
        None => {
            push(issues, "/model/a", "required field is missing");
            None
        }
    };
    let b = match obj.get("b") {
        Some(b) => parse_matrix(b, "/model/b", issues),
        None => {
            push(issues, "/model/b", "required field is missing");
            None
        }
    };
    match (a, b) {
        (Some(a), Some(b)) => match RobotModel::new(a, b) {
            Ok(model) => Some(model),
            Err(e) => {
                push(issues, "/model", e.to_string());
                None
            }
        },
        _ => None,
    }
}

/// `q`/`r`: a bare number scales the identity of the matching dimension; a
/// nested array is taken verbatim.
fn parse_weight(
    root: &Map<String, Value>,
    key: &str,
    dim: Option<usize>,
    issues: &mut Vec<ValidationIssue>,
) -> Option<Matrix64> {
    let path = format!("/{key}");
    match root.get(key) {
        None => dim.map(Matrix::identity),
        Some(v) => match v {
            Value::Number(_) => match finite(v) {
                Some(x) => dim.map(|d| Matrix::identity(d).scale(x)),
                None => {
                    push(issues, path, "must be a finite number");
                    None
                }
            },
            Value::Array(_) => parse_matrix(v, &path, issues),
            _ => {
                push(issues, path, "must be a number or a nested array");
                None
            }
        },
    }
}

enum BoundSideValue {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

fn parse_bound_side(
    obj: &Map<String, Value>,
    key: &str,
    issues: &mut Vec<ValidationIssue>,
) -> Option<BoundSideValue> {
    let path = format!("/bounds/{key}");
    match obj.get(key) {
        None => {
            push(issues, path, "required field is missing");
            None
        }
        Some(v) => match v {
            Value::Number(_) => match finite(v) {
                Some(x) => Some(BoundSideValue::Scalar(x)),
                None => {
                    push(issues, path, "must be a finite number");
                    None
                }
            },
            Value::Array(_) => parse_rows(v, &path, issues).map(BoundSideValue::Rows),
            _ => {
                push(issues, path, "must be a number or per-robot rows");
                None
            }
        },
    }
}

fn parse_bounds(
    root: &Map<String, Value>,
    n: Option<usize>,
    r_dim: Option<usize>,
    issues: &mut Vec<ValidationIssue>,
) -> Option<Bounds<f64>> {
    let v = match root.get("bounds") {
        Some(v) => v,
        None => {
            push(issues, "/bounds", "required field is missing");
            return None;
        }
    };
    let obj = match v.as_object() {
        Some(o) => o,
        None => {
            push(
                issues,
                "/bounds",
                "must be an object with fields \"u_min\" and \"u_max\"",
            );
            return None;
        }
    };
    for key in obj.keys() {
        if key != "u_min" && key != "u_max" {
            push(issues, format!("/bounds/{key}"), "unknown field");
        }
    }
    let lo = parse_bound_side(obj, "u_min", issues);
    let hi = parse_bound_side(obj, "u_max", issues);
    let (n, r_dim) = (n?, r_dim?);
    let expand = |side: BoundSideValue| match side {
        BoundSideValue::Scalar(x) => vec![vec![x; r_dim]; n],
        BoundSideValue::Rows(rows) => rows,
    };
    match Bounds::per_robot(expand(lo?), expand(hi?)) {
        Ok(b) => Some(b),
        Err(e) => {
            push(issues, "/bounds", e.to_string());
            None
        }
    }
}

fn parse_delay(v: &Value, issues: &mut Vec<ValidationIssue>) -> LinkSetting<u32> {
    const PATH: &str = "/network/delay_periods";
    match v {
        Value::Number(_) => match v.as_u64().filter(|&d| d <= u32::MAX as u64) {
            Some(d) => LinkSetting::Uniform(d as u32),
            None => {
                push(issues, PATH, "must be a nonnegative integer (whole control ticks)");
                LinkSetting::Uniform(0)
            }
        },
        Value::Array(rows) => {
            let mut table = Vec::with_capacity(rows.len());
            let mut ok = true;
            for (i, row) in rows.iter().enumerate() {
                let cells = match row.as_array() {
                    Some(c) => c,
                    None => {
                        push(issues, format!("{PATH}/{i}"), "must be an array of integers");
                        ok = false;
                        continue;
                    }
                };
                let mut r = Vec::with_capacity(cells.len());
                for (j, cell) in cells.iter().enumerate() {
                    match cell.as_u64().filter(|&d| d <= u32::MAX as u64) {
                        Some(d) => r.push(d as u32),
                        None => {
                            push(
                                issues,
                                format!("{PATH}/{i}/{j}"),
                                "must be a nonnegative integer",
                            );
                            ok = false;
                        }
                    }
                }
                table.push(r);
            }
            if ok {
                LinkSetting::PerLink(table)
            } else {
                LinkSetting::Uniform(0)
            }
        }
        _ => {
            push(issues, PATH, "must be an integer or an n x n table");
            LinkSetting::Uniform(0)
        }
    }
}

fn parse_drop(v: &Value, issues: &mut Vec<ValidationIssue>) -> LinkSetting<f64> {
    const PATH: &str = "/network/drop_probability";
    match v {
        Value::Number(_) => match finite(v) {
            Some(p) => LinkSetting::Uniform(p),
            None => {
                push(issues, PATH, "must be a finite number");
                LinkSetting::Uniform(0.0)
            }
        },
        Value::Array(rows) => {
            let mut table = Vec::with_capacity(rows.len());
            let mut ok = true;
            for (i, row) in rows.iter().enumerate() {
                let cells = match row.as_array() {
                    Some(c) => c,
                    None => {
                        push(issues, format!("{PATH}/{i}"), "must be an array of numbers");
                        ok = false;
                        continue;
                    }
                };
                let mut r = Vec::with_capacity(cells.len());
                for (j, cell) in cells.iter().enumerate() {
                    match finite(cell) {
                        Some(p) => r.push(p),
                        None => {
                            push(issues, format!("{PATH}/{i}/{j}"), "must be a finite number");
                            ok = false;
                        }
                    }
                }
                table.push(r);
            }
            if ok {
                LinkSetting::PerLink(table)
            } else {
                LinkSetting::Uniform(0.0)
            }
        }
        _ => {
            push(issues, PATH, "must be a number or an n x n table");
            LinkSetting::Uniform(0.0)
        }
    }
}

fn parse_network(
    root: &Map<String, Value>,
    issues: &mut Vec<ValidationIssue>,
) -> NetworkModel<f64> {
    let v = match root.get("network") {
        None => return NetworkModel::perfect(),
        Some(v) => v,
    };
    let obj = match v.as_object() {
        Some(o) => o,
        None => {
            push(issues, "/network", "must be an object");
            return NetworkModel::perfect();
        }
    };
    for key in obj.keys() {
        if !matches!(
            key.as_str(),
            "delay_periods" | "drop_probability" | "sensor_noise_std"
        ) {
            push(issues, format!("/network/{key}"), "unknown field");
        }
    }
    let delay_periods = obj
        .get("delay_periods")
        .map_or(LinkSetting::Uniform(0), |v| parse_delay(v, issues));
    let drop_probability = obj
        .get("drop_probability")
        .map_or(LinkSetting::Uniform(0.0), |v| parse_drop(v, issues));
    let sensor_noise_std = match obj.get("sensor_noise_std") {
        None => 0.0,
        Some(v) => match finite(v) {
            Some(x) => x,
            None => {
                push(issues, "/network/sensor_noise_std", "must be a finite number");
                0.0
            }
        },
    };
    NetworkModel {
        delay_periods,
        drop_probability,
        sensor_noise_std,
    }
}

/// Parses a scenario document, returning either a fully validated scenario
/// or every problem found, never just the first.
pub fn parse_scenario(doc: &Value) -> Result<Scenario64, Vec<ValidationIssue>> {
    let mut issues = Vec::new();
    let root = match doc.as_object() {
        Some(o) => o,
        None => {
            push(&mut issues, "", "document must be a JSON object");
            return Err(issues);
        }
    };

    const KNOWN: [&str; 14] = [
        "n",
        "model",
        "adjacency",
        "x0",
        "q",
        "r",
        "bounds",
        "control_period",
        "dt",
        "t_end",
        "consensus_tol",
        "network",
        "seed",
        "law_variant",
    ];
    for key in root.keys() {
        if !KNOWN.contains(&key.as_str()) {
            push(&mut issues, format!("/{key}"), "unknown field");
        }
    }

    let topology = parse_topology(root, &mut issues);

    if let Some(nv) = root.get("n") {
        match (nv.as_u64(), topology.as_ref()) {
            (Some(k), Some(t)) if k as usize != t.n() => push(
                &mut issues,
                "/n",
                format!("does not match the {}-robot adjacency (got {k})", t.n()),
            ),
            (Some(_), _) => {}
            (None, _) => push(&mut issues, "/n", "must be a positive integer"),
        }
    }

    let x0 = match root.get("x0") {
        Some(v) => parse_rows(v, "/x0", &mut issues),
        None => {
            push(&mut issues, "/x0", "required field is missing");
            None
        }
    };

    let m_hint = x0.as_ref().and_then(|rows| rows.first().map(Vec::len));
    let model = parse_model(root, m_hint, &mut issues);
    let m = model.as_ref().map(RobotModel::state_dim);
    let r_dim = model.as_ref().map(RobotModel::input_dim);

    let q = parse_weight(root, "q", m, &mut issues);
    let r = parse_weight(root, "r", r_dim, &mut issues);

    let n = topology.as_ref().map(Topology::n);
    let bounds = parse_bounds(root, n, r_dim, &mut issues);

    let network = parse_network(root, &mut issues);
    let control_period = number_field(root, "control_period", DEFAULT_CONTROL_PERIOD, &mut issues);
    let dt = number_field(root, "dt", DEFAULT_DT, &mut issues);
    let t_end = number_field(root, "t_end", DEFAULT_T_END, &mut issues);
    let consensus_tol = number_field(root, "consensus_tol", DEFAULT_CONSENSUS_TOL, &mut issues);

    let seed = match root.get("seed") {
        None => 0,
        Some(v) => match v.as_u64() {
            Some(s) => s,
            None => {
                push(&mut issues, "/seed", "must be a nonnegative integer");
                0
            }
        },
    };

    let law_variant = match root.get("law_variant") {
        None => LawVariant::PerRobot,
        Some(Value::String(s)) => match s.as_str() {
            "per_robot" => LawVariant::PerRobot,
            "laplacian_weighted" => LawVariant::LaplacianWeighted,
            _ => {
                push(
                    &mut issues,
                    "/law_variant",
                    "must be \"per_robot\" or \"laplacian_weighted\"",
                );
                LawVariant::PerRobot
            }
        },
        Some(_) => {
            push(
                &mut issues,
                "/law_variant",
                "must be \"per_robot\" or \"laplacian_weighted\"",
            );
            LawVariant::PerRobot
        }
    };

    if let (Some(model), Some(topology), Some(x0), Some(q), Some(r), Some(bounds)) =
        (model, topology, x0, q, r, bounds)
    {
        let scenario = Scenario {
            model,
            topology,
            x0,
            q,
            r,
            bounds,
            control_period,
            dt,
            t_end,
            consensus_tol,
            network,
            seed,
            law_variant,
        };
        issues.extend(scenario.validate());
        if issues.is_empty() {
            return Ok(scenario);
        }
    }
    Err(issues)
}
