//! Experiment configuration: JSON in, validated [`Config`] out.
//!
//! Validation never stops at the first problem; every error is collected with
//! the path of the offending field.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use dnlab_core::asymptotics::default_lambdas;
use dnlab_core::linearization::DEFAULT_TAUS;
use dnlab_core::{make_unit_square_mesh, SolverSettings, TriangleMesh};
use serde_json::{json, Map, Value};

use crate::expr::Expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    EllipticSolve,
    DtnSweep,
    Asymptotics,
    LinearizeCheck,
    CgoCheck,
    ParabolicRun,
    ComparisonCheck,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::EllipticSolve,
        Kind::DtnSweep,
        Kind::Asymptotics,
        Kind::LinearizeCheck,
        Kind::CgoCheck,
        Kind::ParabolicRun,
        Kind::ComparisonCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::EllipticSolve => "elliptic_solve",
            Kind::DtnSweep => "dtn_sweep",
            Kind::Asymptotics => "asymptotics",
            Kind::LinearizeCheck => "linearize_check",
            Kind::CgoCheck => "cgo_check",
            Kind::ParabolicRun => "parabolic_run",
            Kind::ComparisonCheck => "comparison_check",
        }
    }

    /// The statement of the underlying theory each experiment exercises.
    pub fn anchor(self) -> &'static str {
        match self {
            Kind::EllipticSolve => "elliptic problem: unique energy minimizer, maximum principle",
            Kind::DtnSweep => "weak Dirichlet-to-Neumann pairing: extension independence, (p-1)-homogeneity",
            Kind::Asymptotics => "small/large-data expansion of the Dirichlet-to-Neumann map and its correction term",
            Kind::LinearizeCheck => "linearization at a noncritical solution: first-order expansion of the Dirichlet-to-Neumann map",
            Kind::CgoCheck => "complex geometrical optics vectors for the anisotropy I + (p-2) e_n e_n^T",
            Kind::ParabolicRun => "separated solutions u = t^alpha w of the doubly nonlinear parabolic problem",
            Kind::ComparisonCheck => "comparison principle for the doubly nonlinear parabolic problem",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    fn uses_mesh(self) -> bool {
        self != Kind::CgoCheck
    }

    fn is_parabolic(self) -> bool {
        matches!(self, Kind::ParabolicRun | Kind::ComparisonCheck)
    }

    fn is_elliptic(self) -> bool {
        matches!(self, Kind::EllipticSolve | Kind::DtnSweep | Kind::Asymptotics | Kind::LinearizeCheck)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub sanity_p2: bool,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgoSpec {
    pub n: usize,
    pub xi: Vec<f64>,
    pub t: f64,
    pub random_frames: usize,
}

#[derive(Debug)]
pub struct Config {
    pub kind: Kind,
    pub mesh: Option<Arc<TriangleMesh>>,
    pub p: f64,
    pub m: f64,
    pub gamma: Expr,
    pub potential: Expr,
    pub epsilon: Expr,
    pub boundary: Option<Expr>,
    pub base: Option<Expr>,
    pub test: Option<Expr>,
    pub tests: Vec<Expr>,
    pub direction: Option<Expr>,
    pub lambdas: Vec<f64>,
    pub taus: Vec<f64>,
    pub t_final: f64,
    pub step_counts: Vec<usize>,
    pub steps: usize,
    pub scale: f64,
    pub cgo: Option<CgoSpec>,
    pub settings: SolverSettings,
    pub seed: u64,
    pub output: PathBuf,
    /// Every field after defaults and overrides, as written to the manifest.
    pub resolved: Value,
}

struct Reader<'a> {
    root: &'a Map<String, Value>,
    seen: BTreeSet<&'static str>,
    errors: Vec<ConfigError>,
    resolved: Map<String, Value>,
}

impl<'a> Reader<'a> {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(ConfigError { path: path.into(), message: message.into() });
    }

    fn take(&mut self, key: &'static str) -> Option<&'a Value> {
        self.seen.insert(key);
        self.root.get(key)
    }

    fn missing(&mut self, key: &'static str, what: &str) {
        self.error(key, format!("missing required field ({what})"));
    }

    fn number(&mut self, key: &'static str, default: Option<f64>) -> Option<f64> {
        let value = match self.take(key) {
            None => match default {
                Some(d) => d,
                None => {
                    self.missing(key, "number");
                    return None;
                }
            },
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => x,
                _ => {
                    self.error(key, format!("expected a finite number, found {v}"));
                    return None;
                }
            },
        };
        self.resolved.insert(key.into(), json!(value));
        Some(value)
    }

    fn integer_at(&mut self, path: &str, v: &Value) -> Option<u64> {
        match v.as_u64() {
            Some(x) => Some(x),
            None => {
                self.error(path, format!("expected a nonnegative integer, found {v}"));
                None
            }
        }
    }

    fn integer(&mut self, key: &'static str, default: Option<u64>) -> Option<u64> {
        let value = match self.take(key) {
            None => match default {
                Some(d) => d,
                None => {
                    self.missing(key, "integer");
                    return None;
                }
            },
            Some(v) => self.integer_at(key, v)?,
        };
        self.resolved.insert(key.into(), json!(value));
        Some(value)
    }

    fn boolean(&mut self, key: &'static str) -> bool {
        let value = match self.take(key) {
            None => false,
            Some(Value::Bool(b)) => *b,
            Some(v) => {
                self.error(key, format!("expected true or false, found {v}"));
                false
            }
        };
        self.resolved.insert(key.into(), json!(value));
        value
    }

    fn expr_at(&mut self, path: &str, v: &Value) -> Option<Expr> {
        let text = match v {
            Value::String(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            _ => {
                self.error(path, format!("expected an expression string in x1, x2, found {v}"));
                return None;
            }
        };
        match Expr::parse(&text) {
            Ok(e) => Some(e),
            Err(message) => {
                self.error(path, message);
                None
            }
        }
    }

    fn expr(&mut self, key: &'static str, default: Option<&str>) -> Option<Expr> {
        let e = match self.take(key) {
            None => match default {
                Some(d) => Expr::parse(d).expect("default expressions parse"),
                None => {
                    self.missing(key, "expression in x1, x2");
                    return None;
                }
            },
            Some(v) => self.expr_at(key, v)?,
        };
        self.resolved.insert(key.into(), json!(e.text()));
        Some(e)
    }

    fn array(&mut self, key: &'static str) -> Option<Option<&'a Vec<Value>>> {
        match self.take(key) {
            None => Some(None),
            Some(Value::Array(a)) => Some(Some(a)),
            Some(v) => {
                self.error(key, format!("expected an array, found {v}"));
                None
            }
        }
    }

    fn numbers(&mut self, key: &'static str, default: Option<Vec<f64>>) -> Option<Vec<f64>> {
        let values = match self.array(key)? {
            None => match default {
                Some(d) => d,
                None => {
                    self.missing(key, "array of numbers");
                    return None;
                }
            },
            Some(items) => {
                let mut out = Vec::with_capacity(items.len());
                let mut ok = true;
                for (i, v) in items.iter().enumerate() {
                    match v.as_f64() {
                        Some(x) if x.is_finite() => out.push(x),
                        _ => {
                            self.error(format!("{key}[{i}]"), format!("expected a finite number, found {v}"));
                            ok = false;
                        }
                    }
                }
                if !ok {
                    return None;
                }
                out
            }
        };
        self.resolved.insert(key.into(), json!(values));
        Some(values)
    }

    fn exprs(&mut self, key: &'static str) -> Option<Vec<Expr>> {
        let Some(items) = self.array(key)? else {
            self.missing(key, "array of expressions in x1, x2");
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, v) in items.iter().enumerate() {
            match self.expr_at(&format!("{key}[{i}]"), v) {
                Some(e) => out.push(e),
                None => ok = false,
            }
        }
        if !ok {
            return None;
        }
        self.resolved.insert(key.into(), json!(out.iter().map(|e| e.text()).collect::<Vec<_>>()));
        Some(out)
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

/// Parses and validates a configuration. `base_dir` resolves relative mesh paths.
pub fn parse_config(text: &str, base_dir: &Path, overrides: &Overrides) -> Result<Config, Vec<ConfigError>> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        vec![ConfigError { path: "<root>".into(), message: format!("invalid JSON: {e}") }]
    })?;
    let Value::Object(root) = &value else {
        return Err(vec![ConfigError { path: "<root>".into(), message: "expected a JSON object".into() }]);
    };
    let mut r = Reader { root, seen: BTreeSet::new(), errors: Vec::new(), resolved: Map::new() };

    let kind = match r.take("kind") {
        None => {
            r.missing("kind", "one of the experiment kinds");
            None
        }
        Some(Value::String(s)) => match Kind::parse(s) {
            Some(k) => Some(k),
            None => {
                let names: Vec<&str> = Kind::ALL.iter().map(|k| k.name()).collect();
                r.error("kind", format!("unknown experiment kind `{s}`; expected one of {}", names.join(", ")));
                None
            }
        },
        Some(v) => {
            r.error("kind", format!("expected a string, found {v}"));
            None
        }
    };
    let Some(kind) = kind else {
        return Err(r.errors);
    };
    r.resolved.insert("kind".into(), json!(kind.name()));

    // common fields
    let sanity_p2 = r.boolean("sanity_p2") || overrides.sanity_p2;
    r.resolved.insert("sanity_p2".into(), json!(sanity_p2));
    let p = r.number("p", None);
    if let Some(p) = p {
        if !(p > 1.0) {
            r.error("p", format!("p = {p} is outside p ∈ (1,∞)\\{{2}}"));
        } else if p == 2.0 && !sanity_p2 {
            r.error(
                "p",
                "p = 2 is outside p ∈ (1,∞)\\{2}; the linear case is only run as a sanity check (--sanity-p2)",
            );
        }
    }
    let config_seed = r.integer("seed", Some(0));
    let seed = overrides.seed.or(config_seed).unwrap_or(0);
    r.resolved.insert("seed".into(), json!(seed));
    let output = match r.take("output") {
        None => PathBuf::from("out"),
        Some(Value::String(s)) => PathBuf::from(s),
        Some(v) => {
            r.error("output", format!("expected a path string, found {v}"));
            PathBuf::from("out")
        }
    };
    let output = overrides.out.clone().unwrap_or(output);
    r.resolved.insert("output".into(), json!(output.to_string_lossy()));
    let settings = read_solver(&mut r);

    let mut m = None;
    let mut mesh = None;
    let mut gamma = Expr::constant(1.0);
    if kind.uses_mesh() {
        mesh = read_mesh(&mut r, base_dir);
        m = r.number("m", None);
        if let Some(mv) = m {
            if !(mv > 0.0) {
                r.error("m", format!("m = {mv} must be positive"));
            }
        }
        gamma = r.expr("gamma", Some("1")).unwrap_or_else(|| Expr::constant(1.0));
    }
    if let (Some(p), Some(mv)) = (p, m) {
        if kind.is_parabolic() && !(mv > p - 1.0) {
            r.error(
                "m",
                format!("parabolic runs need the hypothesis m > p − 1 (separated solutions t^alpha w), got m = {mv}, p = {p}"),
            );
        }
        if kind == Kind::Asymptotics && mv == p - 1.0 {
            r.error("m", format!("m = p − 1 = {mv} is the borderline case; the expansions need m ≠ p − 1"));
        }
    }

    let mut potential = Expr::constant(0.0);
    if kind.is_elliptic() {
        potential = r.expr("potential", Some("0")).unwrap_or_else(|| Expr::constant(0.0));
    }
    let mut epsilon = Expr::constant(1.0);
    let mut t_final = 1.0;
    if kind.is_parabolic() {
        epsilon = r.expr("epsilon", Some("1")).unwrap_or_else(|| Expr::constant(1.0));
        if let Some(t) = r.number("t_final", Some(1.0)) {
            if t > 0.0 {
                t_final = t;
            } else {
                r.error("t_final", format!("t_final = {t} must be positive"));
            }
        }
    }

    let boundary = match kind {
        Kind::EllipticSolve | Kind::DtnSweep | Kind::LinearizeCheck | Kind::ParabolicRun | Kind::ComparisonCheck => {
            r.expr("boundary", None)
        }
        _ => None,
    };

    let mut tests = Vec::new();
    let mut lambdas = Vec::new();
    let mut base = None;
    let mut test = None;
    let mut direction = None;
    let mut taus = Vec::new();
    let mut step_counts = Vec::new();
    let mut steps = 0;
    let mut scale = 0.5;
    let mut cgo = None;
    match kind {
        Kind::DtnSweep => {
            tests = r.exprs("tests").unwrap_or_default();
            if r.root.contains_key("tests") && tests.is_empty() && !r.errors.iter().any(|e| e.path.starts_with("tests")) {
                r.error("tests", "at least one test expression is required");
            }
            if let Some(list) = r.numbers("lambdas", Some(vec![0.5, 2.0, 10.0])) {
                for (i, l) in list.iter().enumerate() {
                    if !(*l > 0.0) {
                        r.error(format!("lambdas[{i}]"), format!("scale {l} must be positive"));
                    }
                }
                if list.is_empty() {
                    r.error("lambdas", "at least one scale is required");
                }
                lambdas = list;
            }
        }
        Kind::Asymptotics => {
            base = r.expr("base", None);
            test = r.expr("test", None);
            if let Some(list) = r.numbers("lambdas", Some(default_lambdas())) {
                for (i, l) in list.iter().enumerate() {
                    if !(*l > 0.0 && *l < 1.0) {
                        r.error(format!("lambdas[{i}]"), format!("lambda = {l} must lie in (0, 1)"));
                    }
                }
                if !strictly_decreasing(&list) {
                    r.error("lambdas", "lambdas must be strictly decreasing");
                }
                if list.len() < 4 {
                    r.error("lambdas", format!("the fits need at least 4 lambdas, got {}", list.len()));
                }
                lambdas = list;
            }
        }
        Kind::LinearizeCheck => {
            direction = r.expr("direction", None);
            test = r.expr("test", None);
            if let Some(list) = r.numbers("taus", Some(DEFAULT_TAUS.to_vec())) {
                for (i, t) in list.iter().enumerate() {
                    if !(*t > 0.0) {
                        r.error(format!("taus[{i}]"), format!("tau = {t} must be positive"));
                    }
                }
                if !strictly_decreasing(&list) {
                    r.error("taus", "taus must be strictly decreasing");
                }
                if list.len() < 2 {
                    r.error("taus", "at least two taus are needed for a ratio");
                }
                taus = list;
            }
        }
        Kind::ParabolicRun => {
            match r.array("step_counts") {
                Some(None) => step_counts = vec![8, 16, 32, 64],
                Some(Some(items)) => {
                    for (i, v) in items.iter().enumerate() {
                        let path = format!("step_counts[{i}]");
                        if let Some(k) = r.integer_at(&path, v) {
                            if k == 0 {
                                r.error(path, "step counts must be at least 1");
                            }
                            step_counts.push(k as usize);
                        }
                    }
                    if items.is_empty() {
                        r.error("step_counts", "at least one step count is required");
                    }
                }
                None => {}
            }
            if step_counts.windows(2).any(|w| w[1] <= w[0]) {
                r.error("step_counts", "step counts must be strictly increasing");
            }
            r.resolved.insert("step_counts".into(), json!(step_counts));
        }
        Kind::ComparisonCheck => {
            if let Some(k) = r.integer("steps", Some(16)) {
                if k == 0 {
                    r.error("steps", "steps must be at least 1");
                }
                steps = k as usize;
            }
            if let Some(s) = r.number("scale", Some(0.5)) {
                if s > 0.0 && s < 1.0 {
                    scale = s;
                } else {
                    r.error("scale", format!("scale = {s} must lie in (0, 1) so the first run's data is smaller"));
                }
            }
        }
        Kind::CgoCheck => cgo = read_cgo(&mut r),
        Kind::EllipticSolve => {}
    }

    let unknown: Vec<String> = root.keys().filter(|k| !r.seen.contains(k.as_str())).cloned().collect();
    for key in unknown {
        r.error(key, format!("unknown field for kind {}", kind.name()));
    }

    if !r.errors.is_empty() {
        return Err(r.errors);
    }
    Ok(Config {
        kind,
        mesh,
        p: p.expect("checked"),
        m: m.unwrap_or(0.0),
        gamma,
        potential,
        epsilon,
        boundary,
        base,
        test,
        tests,
        direction,
        lambdas,
        taus,
        t_final,
        step_counts,
        steps,
        scale,
        cgo,
        settings,
        seed,
        output,
        resolved: Value::Object(r.resolved),
    })
}

fn read_solver(r: &mut Reader<'_>) -> SolverSettings {
    let mut settings = SolverSettings::default();
    let object = match r.take("solver") {
        None => None,
        Some(Value::Object(o)) => Some(o),
        Some(v) => {
            r.error("solver", format!("expected an object, found {v}"));
            None
        }
    };
    if let Some(o) = object {
        for (key, v) in o {
            let path = format!("solver.{key}");
            match key.as_str() {
                "grad_tol" => match v.as_f64() {
                    Some(x) if x > 0.0 && x < 1.0 => settings.grad_tol = x,
                    _ => r.error(path, format!("grad_tol must be a number in (0, 1), found {v}")),
                },
                "max_newton" => match v.as_u64() {
                    Some(x) if x >= 1 => settings.max_newton = x as usize,
                    _ => r.error(path, format!("max_newton must be a positive integer, found {v}")),
                },
                _ => r.error(path, "unknown solver field (expected grad_tol, max_newton)"),
            }
        }
    }
    r.resolved.insert(
        "solver".into(),
        json!({ "grad_tol": settings.grad_tol, "max_newton": settings.max_newton }),
    );
    settings
}

fn read_mesh(r: &mut Reader<'_>, base_dir: &Path) -> Option<Arc<TriangleMesh>> {
    let object = match r.take("mesh") {
        None => {
            r.missing("mesh", r#"{"subdivisions": n} or {"file": path}"#);
            return None;
        }
        Some(Value::Object(o)) => o,
        Some(v) => {
            r.error("mesh", format!("expected an object, found {v}"));
            return None;
        }
    };
    for key in object.keys() {
        if key != "subdivisions" && key != "file" {
            r.error(format!("mesh.{key}"), "unknown mesh field (expected subdivisions or file)");
        }
    }
    match (object.get("subdivisions"), object.get("file")) {
        (Some(_), Some(_)) => {
            r.error("mesh", "give either subdivisions or file, not both");
            None
        }
        (Some(v), None) => {
            let n = r.integer_at("mesh.subdivisions", v)?;
            if !(1..=512).contains(&n) {
                r.error("mesh.subdivisions", format!("subdivisions = {n} must lie in 1..=512"));
                return None;
            }
            r.resolved.insert("mesh".into(), json!({ "subdivisions": n }));
            Some(Arc::new(make_unit_square_mesh(n as usize).expect("valid subdivisions")))
        }
        (None, Some(Value::String(file))) => {
            let path = base_dir.join(file);
            let text = match std::fs::read_to_string(&path) {
                Ok(t) => t,
                Err(e) => {
                    r.error("mesh.file", format!("cannot read {}: {e}", path.display()));
                    return None;
                }
            };
            match TriangleMesh::from_text(&text) {
                Ok(mesh) => {
                    r.resolved.insert("mesh".into(), json!({ "file": file }));
                    Some(Arc::new(mesh))
                }
                Err(e) => {
                    r.error("mesh.file", format!("{}: {e}", path.display()));
                    None
                }
            }
        }
        (None, Some(v)) => {
            r.error("mesh.file", format!("expected a path string, found {v}"));
            None
        }
        (None, None) => {
            r.error("mesh", "missing subdivisions or file");
            None
        }
    }
}

fn read_cgo(r: &mut Reader<'_>) -> Option<CgoSpec> {
    let n = r.integer("n", Some(3));
    if let Some(n) = n {
        if n < 3 {
            r.error("n", format!("dimension n = {n} must be at least 3"));
        }
    }
    let xi = r.numbers("xi", None);
    if let (Some(n), Some(xi)) = (n, &xi) {
        if xi.len() as u64 != n {
            r.error("xi", format!("xi has {} components, expected n = {n}", xi.len()));
        } else if xi[..xi.len().saturating_sub(1)].iter().all(|&v| v == 0.0) {
            r.error("xi", "xi must not be parallel to e_n");
        }
    }
    let t = r.number("t", None);
    if let Some(t) = t {
        if !(t > 0.0) {
            r.error("t", format!("t = {t} must be positive"));
        }
    }
    let random_frames = r.integer("random_frames", Some(0));
    Some(CgoSpec { n: n? as usize, xi: xi?, t: t?, random_frames: random_frames? as usize })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Config, Vec<ConfigError>> {
        parse_config(text, Path::new("."), &Overrides::default())
    }

    fn paths(errors: &[ConfigError]) -> Vec<&str> {
        errors.iter().map(|e| e.path.as_str()).collect()
    }

    #[test]
    fn minimal_elliptic_config_resolves_defaults() {
        let c = parse(r#"{"kind": "elliptic_solve", "mesh": {"subdivisions": 4}, "p": 3, "m": 2, "boundary": "1 + x1"}"#)
            .unwrap();
        assert_eq!(c.kind, Kind::EllipticSolve);
        assert_eq!(c.resolved["gamma"], "1");
        assert_eq!(c.resolved["potential"], "0");
        assert_eq!(c.resolved["seed"], 0);
        assert_eq!(c.mesh.unwrap().node_count(), 25);
    }

    #[test]
    fn every_error_is_reported() {
        let errors = parse(r#"{"kind": "elliptic_solve", "mesh": {"subdivisions": 0}, "m": -1, "boundary": "x3", "bogus": 1}"#)
            .unwrap_err();
        let p = paths(&errors);
        for want in ["p", "mesh.subdivisions", "m", "boundary", "bogus"] {
            assert!(p.contains(&want), "{want} missing from {p:?}");
        }
    }

    #[test]
    fn p_equal_two_needs_the_sanity_flag() {
        let text = r#"{"kind": "elliptic_solve", "mesh": {"subdivisions": 2}, "p": 2, "m": 1, "boundary": "x1"}"#;
        let errors = parse(text).unwrap_err();
        assert!(errors[0].message.contains("p ∈ (1,∞)\\{2}"));
        let ok = parse_config(text, Path::new("."), &Overrides { sanity_p2: true, ..Default::default() });
        assert!(ok.is_ok());
    }

    #[test]
    fn parabolic_kinds_need_m_above_p_minus_one() {
        let errors = parse(r#"{"kind": "parabolic_run", "mesh": {"subdivisions": 2}, "p": 3, "m": 2, "boundary": "1"}"#)
            .unwrap_err();
        assert_eq!(paths(&errors), vec!["m"]);
        assert!(errors[0].message.contains("m > p − 1"));
    }

    #[test]
    fn cgo_config_needs_no_mesh() {
        let c = parse(r#"{"kind": "cgo_check", "p": 3, "n": 3, "xi": [1, 0, 0], "t": 2}"#).unwrap();
        assert_eq!(c.cgo.unwrap().xi, vec![1.0, 0.0, 0.0]);
        let errors = parse(r#"{"kind": "cgo_check", "p": 3, "n": 3, "xi": [0, 0, 1], "t": 2, "mesh": {}}"#).unwrap_err();
        assert_eq!(paths(&errors), vec!["xi", "mesh"]);
    }

    #[test]
    fn overrides_win() {
        let c = parse_config(
            r#"{"kind": "cgo_check", "p": 3, "xi": [1, 0, 0], "t": 2, "seed": 4, "output": "a"}"#,
            Path::new("."),
            &Overrides { seed: Some(9), out: Some(PathBuf::from("b")), sanity_p2: false },
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.output, PathBuf::from("b"));
        assert_eq!(c.resolved["seed"], 9);
    }

    #[test]
    fn malformed_inputs() {
        assert_eq!(paths(&parse("[1, 2]").unwrap_err()), vec!["<root>"]);
        assert_eq!(paths(&parse("{").unwrap_err()), vec!["<root>"]);
        assert_eq!(paths(&parse(r#"{"kind": "nope"}"#).unwrap_err()), vec!["kind"]);
        let errors = parse(r#"{"kind": "asymptotics", "mesh": {"subdivisions": 4}, "p": 3, "m": 4, "base": "1+x1", "test": "x2", "lambdas": [0.5, 0.6, 2, "a"]}"#)
            .unwrap_err();
        assert_eq!(paths(&errors), vec!["lambdas[3]"]);
    }
}
