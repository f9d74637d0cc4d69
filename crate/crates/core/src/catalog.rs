//! Built-in scenarios and the JSON scenario file format.
//!
//! A scenario bundles a manifold, its fields, default initial data, default
//! integration settings and the outcome the test harness expects.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::Prediction;
use crate::dynamics::{IntegrationConfig, TrajectoryState};
use crate::exprlang::{CoordinateFrame, Expression, FrameError, ParseError};
use crate::fields::{FieldPack, FieldsError};
use crate::geometry::{packed, ChartDomain, GeometryError, ManifoldSpec, QuotientSpec, Signature};
use crate::sampling::{domain_samples, random_unit_vector, SamplingConfig};

/// Relative tolerance of the deck-isometry check run on every loaded quotient.
pub const DECK_ISOMETRY_TOLERANCE: f64 = 1e-10;

const BUILTIN_NAMES: [&str; 6] = [
    "clifton-pohl",
    "null-plane-cubic",
    "flat-lorentz-torus",
    "t3-magnetic",
    "riemann-flat-torus",
    "riemann-superlinear",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}` (known: {known})", known = BUILTIN_NAMES.join(", "))]
    UnknownScenario(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("scenario file line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("expression `{key}`: {error}")]
    Expression { key: String, error: ParseError },
    #[error("coordinates: {0}")]
    Frame(#[from] FrameError),
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Fields(#[from] FieldsError),
}

/// Per-scenario defaults layered over [`IntegrationConfig::default`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_max: Option<f64>,
}

impl ConfigOverrides {
    pub fn apply(&self, mut cfg: IntegrationConfig) -> IntegrationConfig {
        if let Some(t) = self.t_max {
            cfg.horizon = t;
        }
        if let Some(x) = self.rtol {
            cfg.rtol = x;
        }
        if let Some(x) = self.atol {
            cfg.atol = x;
        }
        if let Some(x) = self.v_max {
            cfg.v_max = x;
        }
        if let Some(x) = self.h_max {
            cfg.h_max = x;
        }
        cfg
    }
}

/// What the harness expects from the default run and from the checker.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expected {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checker: Option<Prediction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub manifold: ManifoldSpec,
    pub fields: FieldPack,
    pub initial: TrajectoryState<f64>,
    pub config: ConfigOverrides,
    pub expected: Expected,
    pub provenance: String,
}

impl Scenario {
    pub fn integration_config(&self) -> IntegrationConfig {
        self.config.apply(IntegrationConfig::default())
    }

    pub fn dim(&self) -> usize {
        self.manifold.dim()
    }

    /// Serialized scenario document (pretty JSON with a trailing newline).
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&ScenarioFile::from_scenario(self)).expect("scenario serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        file.into_scenario()
    }
}

pub fn builtin_names() -> &'static [&'static str] {
    &BUILTIN_NAMES
}

pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
    match name {
        "clifton-pohl" => clifton_pohl(),
        "null-plane-cubic" => null_plane_cubic(),
        "flat-lorentz-torus" => flat_lorentz_torus(),
        "t3-magnetic" => t3_magnetic(1.0, 0.1),
        "riemann-flat-torus" => riemann_flat_torus(),
        "riemann-superlinear" => riemann_superlinear(),
        other => Err(ScenarioError::UnknownScenario(other.to_string())),
    }
}

pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })?;
    Scenario::from_json(&text)
}

pub fn save(s: &Scenario, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    std::fs::write(path, s.to_json())
        .map_err(|e| ScenarioError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn frame(names: &[&str]) -> Result<CoordinateFrame, ScenarioError> {
    Ok(CoordinateFrame::new(names.iter().copied(), false)?)
}

fn manifold(f: &CoordinateFrame, rows: &[&[&str]], sig: Signature) -> Result<ManifoldSpec, ScenarioError> {
    ManifoldSpec::from_strings(f.clone(), rows, sig).map_err(|e| match e {
        crate::Error::Geometry(g) => ScenarioError::Geometry(g),
        crate::Error::Parse(p) => ScenarioError::Expression { key: "metric".into(), error: p },
        other => ScenarioError::Validation(other.to_string()),
    })
}

fn state(q: &[f64], v: &[f64]) -> TrajectoryState<f64> {
    TrajectoryState::new(0.0, q.to_vec(), v.to_vec())
}

fn expected(classification: &str, t_star: Option<f64>, checker: Prediction) -> Expected {
    Expected { classification: Some(classification.into()), t_star, checker: Some(checker) }
}

fn horizon(t: f64) -> ConfigOverrides {
    ConfigOverrides { t_max: Some(t), ..Default::default() }
}

/// Compact Lorentzian torus with incomplete geodesics: the plane minus the
/// origin with `2 du dv / (u² + v²)`, modulo `p ↦ 2p`. The geodesic from
/// `(1, 0)` with velocity `(1, 0)` is `u = 1/(1 − t)`, `v = 0`.
pub fn clifton_pohl() -> Result<Scenario, ScenarioError> {
    let f = frame(&["u", "v"])?;
    let m = manifold(&f, &[&["0", "1/(u^2+v^2)"], &["1/(u^2+v^2)", "0"]], Signature::Lorentzian)?
        .with_domain(ChartDomain::excluding_origin(2, 1e-8))?
        .with_quotient(Some(QuotientSpec::Scaling(2.0)))?;
    let fp = FieldPack::from_strings(&f, None, None, None, Some(&["u", "v"]))?;
    Ok(Scenario {
        name: "clifton-pohl".into(),
        manifold: m,
        fields: fp,
        initial: state(&[1.0, 0.0], &[1.0, 0.0]),
        config: horizon(2.0),
        expected: expected("BlowupAt", Some(1.0), Prediction::NoPrediction),
        provenance: "Clifton-Pohl torus: compact Lorentzian surface with an incomplete null geodesic u = 1/(1-t)"
            .into(),
    })
}

/// `ℝ²` with the flat null metric `dx dy + dy dx` and `X = 2x³ ∂_x`, which
/// is null everywhere; `x = 1/(1 − t)` leaves every compact set in finite time.
pub fn null_plane_cubic() -> Result<Scenario, ScenarioError> {
    let f = frame(&["x", "y"])?;
    let m = manifold(&f, &[&["0", "1"], &["1", "0"]], Signature::Lorentzian)?;
    let fp = FieldPack::from_strings(&f, None, Some(&["2*x^3", "0"]), None, None)?;
    Ok(Scenario {
        name: "null-plane-cubic".into(),
        manifold: m,
        fields: fp,
        initial: state(&[1.0, 0.0], &[1.0, 0.0]),
        config: horizon(2.0),
        expected: expected("BlowupAt", Some(1.0), Prediction::NoPrediction),
        provenance: "geodesically complete flat plane with a null force field 2x^3 d/dx; x = 1/(1-t)".into(),
    })
}

pub fn flat_lorentz_torus() -> Result<Scenario, ScenarioError> {
    let f = frame(&["t", "x"])?;
    let m = manifold(&f, &[&["-1", "0"], &["0", "1"]], Signature::Lorentzian)?
        .with_quotient(Some(QuotientSpec::Lattice(vec![Some(1.0), Some(1.0)])))?;
    let fp = FieldPack::from_strings(&f, None, None, None, Some(&["1", "0"]))?;
    Ok(Scenario {
        name: "flat-lorentz-torus".into(),
        manifold: m,
        fields: fp,
        initial: state(&[0.0, 0.0], &[1.0, 0.3]),
        config: horizon(100.0),
        expected: expected("CompleteToHorizon", None, Prediction::Complete),
        provenance: "flat Lorentzian 2-torus with the parallel timelike Killing field d/dt".into(),
    })
}

/// Flat Lorentzian 3-torus with a constant magnetic field of strength `b`
/// in the `(x, y)` plane and a periodic potential of the given amplitude.
pub fn t3_magnetic(b: f64, amplitude: f64) -> Result<Scenario, ScenarioError> {
    let f = frame(&["t", "x", "y"])?;
    let m = manifold(&f, &[&["-1", "0", "0"], &["0", "1", "0"], &["0", "0", "1"]], Signature::Lorentzian)?
        .with_quotient(Some(QuotientSpec::Lattice(vec![Some(1.0), Some(1.0), Some(1.0)])))?;
    let (bp, bn) = (format!("{b:?}"), format!("{:?}", -b));
    let force: [&[&str]; 3] = [&["0", "0", "0"], &["0", "0", &bp], &["0", &bn, "0"]];
    let potential = if amplitude == 0.0 {
        None
    } else {
        Some(format!("{amplitude:?}*(cos(2*pi*x)+cos(2*pi*y))"))
    };
    let fp = FieldPack::from_strings(&f, Some(&force), None, potential.as_deref(), Some(&["1", "0", "0"]))?;
    Ok(Scenario {
        name: "t3-magnetic".into(),
        manifold: m,
        fields: fp,
        initial: state(&[0.0, 0.1, 0.2], &[1.2, 0.3, -0.4]),
        config: horizon(100.0),
        expected: expected("CompleteToHorizon", None, Prediction::Complete),
        provenance: format!(
            "compact conformastationary 3-torus: Killing d/dt, magnetic field B = {b} annihilating it, \
             potential amplitude {amplitude}"
        ),
    })
}

pub fn riemann_flat_torus() -> Result<Scenario, ScenarioError> {
    let f = frame(&["x", "y"])?;
    let m = manifold(&f, &[&["1", "0"], &["0", "1"]], Signature::Riemannian)?
        .with_quotient(Some(QuotientSpec::Lattice(vec![Some(1.0), Some(1.0)])))?;
    let force: [&[&str]; 2] = [&["0.1*cos(2*pi*x)", "sin(2*pi*y)"], &["-sin(2*pi*y)", "0"]];
    let fp = FieldPack::from_strings(&f, Some(&force), None, Some("0.5*sin(2*pi*x)*cos(2*pi*y)"), None)?;
    Ok(Scenario {
        name: "riemann-flat-torus".into(),
        manifold: m,
        fields: fp,
        initial: state(&[0.1, 0.2], &[1.0, 0.5]),
        config: horizon(100.0),
        expected: expected("CompleteToHorizon", None, Prediction::Complete),
        provenance: "compact flat Riemannian torus with bounded, non-skew F and a periodic potential".into(),
    })
}

/// Euclidean line with `X = x² ∂_x`. From `x = 1`, `ẋ = √(2/3)` the
/// solution is `x = (1 − t/√6)⁻²`.
pub fn riemann_superlinear() -> Result<Scenario, ScenarioError> {
    let f = frame(&["x"])?;
    let m = manifold(&f, &[&["1"]], Signature::Riemannian)?.with_declared_completeness(true);
    let fp = FieldPack::from_strings(&f, None, Some(&["x^2"]), None, None)?;
    Ok(Scenario {
        name: "riemann-superlinear".into(),
        manifold: m,
        fields: fp,
        initial: state(&[1.0], &[(2.0f64 / 3.0).sqrt()]),
        config: horizon(5.0),
        expected: expected("BlowupAt", Some(6.0f64.sqrt()), Prediction::NoPrediction),
        provenance: "complete Euclidean line with a quadratically growing force; x = (1 - t/sqrt(6))^-2".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldsFile {
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    force: Option<Vec<Vec<String>>>,
    #[serde(rename = "X", default, skip_serializing_if = "Option::is_none")]
    vector: Option<Vec<String>>,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    potential: Option<String>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    killing: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InitialFile {
    q: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    dimension: usize,
    coordinates: Vec<String>,
    signature: Signature,
    #[serde(default)]
    time_dependent: bool,
    metric: BTreeMap<String, String>,
    #[serde(default)]
    quotient: Option<QuotientSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain: Option<ChartDomain>,
    #[serde(default)]
    metric_complete: bool,
    #[serde(default)]
    fields: Option<FieldsFile>,
    initial: InitialFile,
    #[serde(default)]
    config: ConfigOverrides,
    #[serde(default)]
    expected: Expected,
    #[serde(default)]
    provenance: String,
}

impl ScenarioFile {
    fn from_scenario(s: &Scenario) -> Self {
        let m = &s.manifold;
        let n = m.dim();
        let frame = m.frame();
        let mut metric = BTreeMap::new();
        for i in 0..n {
            for j in i..n {
                metric.insert(format!("g_{i}_{j}"), m.metric_entry(i, j).source().to_string());
            }
        }
        let src = |e: &Expression| e.source().to_string();
        let fp = &s.fields;
        let fields = FieldsFile {
            force: fp.force().map(|rows| rows.iter().map(|r| r.iter().map(src).collect()).collect()),
            vector: fp.vector().map(|x| x.iter().map(src).collect()),
            potential: fp.potential().map(src),
            killing: fp.killing().map(|k| k.iter().map(src).collect()),
        };
        let domain = m.domain();
        Self {
            name: s.name.clone(),
            dimension: n,
            coordinates: frame.names().to_vec(),
            signature: m.signature(),
            time_dependent: frame.is_time_dependent(),
            metric,
            quotient: m.quotient().cloned(),
            domain: (*domain != ChartDomain::unbounded(n)).then(|| domain.clone()),
            metric_complete: m.declared_complete(),
            fields: Some(fields),
            initial: InitialFile { q: s.initial.q.clone(), v: s.initial.v.clone() },
            config: s.config.clone(),
            expected: s.expected.clone(),
            provenance: s.provenance.clone(),
        }
    }

    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let n = self.dimension;
        if self.coordinates.len() != n {
            return Err(ScenarioError::Validation(format!(
                "dimension is {n} but {} coordinates are listed",
                self.coordinates.len()
            )));
        }
        let frame = CoordinateFrame::new(self.coordinates.iter().map(String::as_str), self.time_dependent)?;
        let parse = |key: &str, text: &str| {
            Expression::parse(text, &frame).map_err(|error| ScenarioError::Expression { key: key.to_string(), error })
        };

        let mut entries: BTreeMap<(usize, usize), (String, Expression)> = BTreeMap::new();
        for (key, text) in &self.metric {
            let (i, j) = metric_index(key, n)?;
            let e = parse(&format!("metric.{key}"), text)?;
            let slot = (i.min(j), i.max(j));
            if let Some((other, prev)) = entries.get(&slot) {
                if prev.tree() != e.tree() {
                    return Err(ScenarioError::Validation(format!("metric is not symmetric: {other} differs from {key}")));
                }
                continue;
            }
            entries.insert(slot, (key.clone(), e));
        }
        let mut upper = Vec::new();
        for i in 0..n {
            for j in i..n {
                match entries.remove(&(i, j)) {
                    Some((_, e)) => upper.push(e),
                    None => upper.push(Expression::constant(0.0)),
                }
            }
        }
        debug_assert_eq!(upper.len(), packed(n, n - 1, n - 1) + 1);
        let mut m = ManifoldSpec::new(frame.clone(), upper, self.signature)?.with_declared_completeness(self.metric_complete);
        if let Some(d) = self.domain {
            m = m.with_domain(d)?;
        }
        m = m.with_quotient(self.quotient)?;
        check_deck_isometries(&m)?;

        let mut fp = FieldPack::new(frame.clone());
        if let Some(f) = self.fields {
            if let Some(rows) = f.force {
                let rows = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| r.iter().enumerate().map(|(j, s)| parse(&format!("fields.F[{i}][{j}]"), s)).collect())
                    .collect::<Result<Vec<Vec<_>>, _>>()?;
                fp = fp.with_force(rows)?;
            }
            if let Some(x) = f.vector {
                let x = x.iter().enumerate().map(|(i, s)| parse(&format!("fields.X[{i}]"), s)).collect::<Result<_, _>>()?;
                fp = fp.with_vector(x)?;
            }
            if let Some(v) = f.potential {
                fp = fp.with_potential(parse("fields.V", &v)?);
            }
            if let Some(k) = f.killing {
                let k = k.iter().enumerate().map(|(i, s)| parse(&format!("fields.K[{i}]"), s)).collect::<Result<_, _>>()?;
                fp = fp.with_killing(k)?;
            }
        }
        if self.initial.q.len() != n || self.initial.v.len() != n {
            return Err(ScenarioError::Validation(format!("initial q and v must have {n} components")));
        }
        Ok(Scenario {
            name: self.name,
            manifold: m,
            fields: fp,
            initial: TrajectoryState::new(0.0, self.initial.q, self.initial.v),
            config: self.config,
            expected: self.expected,
            provenance: self.provenance,
        })
    }
}

fn metric_index(key: &str, n: usize) -> Result<(usize, usize), ScenarioError> {
    let bad = || ScenarioError::Validation(format!("metric key `{key}` is not of the form g_i_j with i, j < {n}"));
    let rest = key.strip_prefix("g_").ok_or_else(bad)?;
    let (i, j) = rest.split_once('_').ok_or_else(bad)?;
    let (i, j): (usize, usize) = (i.parse().map_err(|_| bad())?, j.parse().map_err(|_| bad())?);
    if i >= n || j >= n {
        return Err(bad());
    }
    Ok((i, j))
}

/// Deck transformations must be isometries for the quotient to make sense.
fn check_deck_isometries(m: &ManifoldSpec) -> Result<(), ScenarioError> {
    if m.quotient().is_none() {
        return Ok(());
    }
    let cfg = SamplingConfig { points: 100, directions: 0, ..Default::default() };
    let points = domain_samples(m, &cfg).points;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples: Vec<_> = points
        .into_iter()
        .map(|p| {
            let u = random_unit_vector(&mut rng, m.dim());
            let v = random_unit_vector(&mut rng, m.dim());
            (p, u, v)
        })
        .collect();
    let worst = m.deck_isometry_violation(&samples)?;
    if worst > DECK_ISOMETRY_TOLERANCE {
        return Err(ScenarioError::Validation(format!(
            "deck transformations are not isometries of the metric (relative violation {worst:e})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_builds_and_round_trips() {
        for name in builtin_names() {
            let s = builtin(name).unwrap();
            assert_eq!(s.name, *name);
            let text = s.to_json();
            let back = Scenario::from_json(&text).unwrap();
            assert_eq!(back, s, "{name}");
            assert_eq!(back.to_json(), text, "{name}");
        }
        assert!(matches!(builtin("nope"), Err(ScenarioError::UnknownScenario(_))));
    }

    #[test]
    fn asymmetric_metric_keys_are_rejected() {
        let mut text = builtin("flat-lorentz-torus").unwrap().to_json();
        text = text.replace("\"g_0_1\": \"0\"", "\"g_0_1\": \"0\", \"g_1_0\": \"x\"");
        assert!(matches!(Scenario::from_json(&text), Err(ScenarioError::Validation(_))));
    }

    #[test]
    fn lower_triangle_keys_are_accepted() {
        let text = builtin("null-plane-cubic").unwrap().to_json().replace("g_0_1", "g_1_0");
        let s = Scenario::from_json(&text).unwrap();
        assert_eq!(s.manifold.metric_entry(0, 1).source(), "1");
    }

    #[test]
    fn unknown_coordinates_are_located() {
        let text = builtin("null-plane-cubic").unwrap().to_json().replace("2*x^3", "2*z^3");
        match Scenario::from_json(&text) {
            Err(ScenarioError::Expression { key, error: ParseError::UnknownIdentifier { name, .. } }) => {
                assert_eq!(key, "fields.X[0]");
                assert_eq!(name, "z");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_isometric_deck_group_is_rejected() {
        let text = builtin("riemann-flat-torus").unwrap().to_json().replace("\"g_0_0\": \"1\"", "\"g_0_0\": \"1+x^2\"");
        assert!(matches!(Scenario::from_json(&text), Err(ScenarioError::Validation(_))));
    }

    #[test]
    fn json_syntax_errors_carry_a_location() {
        match Scenario::from_json("{\n  \"name\": }") {
            Err(ScenarioError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
