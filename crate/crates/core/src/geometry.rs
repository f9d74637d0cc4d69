//! Pointwise pseudo-Riemannian geometry on a single chart with an optional
//! quotient by a group of deck isometries.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::TrajectoryState;
use crate::exprlang::{CoordinateFrame, EvalError, Expr, Expression, Variable};
use crate::linalg::{Lu, Matrix};
use crate::scalar::{lit, norm, to_f64, Real};

pub const DEGENERACY_TOLERANCE: f64 = 1e-12;
pub const NULL_BAND: f64 = 1e-12;
pub const UNIT_TIMELIKE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("metric is degenerate (|det g| = {det:e})")]
    Degenerate { det: f64 },
    #[error("point lies outside the chart domain")]
    OutsideDomain,
    #[error("metric has {negatives} negative eigenvalues, expected {expected}")]
    Signature { expected: usize, negatives: usize },
    #[error("vector is not unit timelike (g(Z,Z) = {0})")]
    NotUnitTimelike(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid manifold: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signature {
    Riemannian,
    Lorentzian,
}

impl Signature {
    pub fn negative_count(self) -> usize {
        match self {
            Signature::Riemannian => 0,
            Signature::Lorentzian => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CausalCharacter {
    Timelike,
    Null,
    Spacelike,
    Zero,
}

impl fmt::Display for CausalCharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CausalCharacter::Timelike => "timelike",
            CausalCharacter::Null => "null",
            CausalCharacter::Spacelike => "spacelike",
            CausalCharacter::Zero => "zero",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Box bounds (`None` = unbounded) minus a finite set of excluded balls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartDomain {
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    #[serde(default)]
    pub excluded: Vec<ExcludedBall>,
}

impl ChartDomain {
    pub fn unbounded(n: usize) -> Self {
        Self { lower: vec![None; n], upper: vec![None; n], excluded: Vec::new() }
    }

    pub fn excluding_origin(n: usize, radius: f64) -> Self {
        Self {
            excluded: vec![ExcludedBall { center: vec![0.0; n], radius }],
            ..Self::unbounded(n)
        }
    }

    pub fn contains<T: Real>(&self, p: &[T]) -> bool {
        if p.iter().any(|x| !x.is_finite()) {
            return false;
        }
        for (i, &x) in p.iter().enumerate() {
            if self.lower[i].is_some_and(|lo| x < lit(lo)) || self.upper[i].is_some_and(|hi| x > lit(hi)) {
                return false;
            }
        }
        self.excluded.iter().all(|ball| {
            let d2 = p
                .iter()
                .zip(&ball.center)
                .fold(T::zero(), |acc, (&x, &c)| acc + (x - lit(c)) * (x - lit(c)));
            d2 > lit::<T>(ball.radius) * lit(ball.radius)
        })
    }

    fn validate(&self, n: usize) -> Result<(), GeometryError> {
        if self.lower.len() != n || self.upper.len() != n {
            return Err(GeometryError::Dimension { expected: n, found: self.lower.len().min(self.upper.len()) });
        }
        for i in 0..n {
            if let (Some(lo), Some(hi)) = (self.lower[i], self.upper[i]) {
                if lo >= hi {
                    return Err(GeometryError::Invalid(format!("empty domain interval on axis {i}")));
                }
            }
        }
        for ball in &self.excluded {
            if ball.center.len() != n || !(ball.radius >= 0.0) {
                return Err(GeometryError::Invalid("malformed excluded ball".into()));
            }
        }
        Ok(())
    }
}

/// Deck group generating the compact quotient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuotientSpec {
    /// Translation by `L_i` along each periodic axis (`None` = not periodic).
    Lattice(Vec<Option<f64>>),
    /// Dilation `p ↦ λ p` with fundamental annulus `1 ≤ |p| < λ`.
    Scaling(f64),
}

impl QuotientSpec {
    fn validate(&self, n: usize) -> Result<(), GeometryError> {
        match self {
            QuotientSpec::Lattice(periods) => {
                if periods.len() != n {
                    return Err(GeometryError::Dimension { expected: n, found: periods.len() });
                }
                if periods.iter().flatten().any(|&l| !(l > 0.0 && l.is_finite())) {
                    return Err(GeometryError::Invalid("lattice periods must be positive".into()));
                }
                if periods.iter().all(Option::is_none) {
                    return Err(GeometryError::Invalid("lattice has no periodic axis".into()));
                }
            }
            QuotientSpec::Scaling(lambda) => {
                if !(*lambda > 1.0 && lambda.is_finite()) {
                    return Err(GeometryError::Invalid("scaling factor must exceed 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Whether the fundamental domain is bounded.
    pub fn is_bounded(&self) -> bool {
        match self {
            QuotientSpec::Lattice(periods) => periods.iter().all(Option::is_some),
            QuotientSpec::Scaling(_) => true,
        }
    }
}

/// Connection coefficients `Γ^k_{ij}` at a point, stored once per unordered `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Christoffel<T> {
    fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * packed_len(n)] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> T {
        self.data[k * packed_len(self.n) + packed(self.n, i, j)]
    }

    fn set(&mut self, k: usize, i: usize, j: usize, value: T) {
        let n = self.n;
        self.data[k * packed_len(n) + packed(n, i, j)] = value;
    }

    /// `Γ^k_{ij} v^i v^j` for each `k`.
    pub fn contract(&self, v: &[T]) -> Vec<T> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let mut acc = T::zero();
                for i in 0..n {
                    for j in 0..n {
                        acc = acc + self.get(k, i, j) * v[i] * v[j];
                    }
                }
                acc
            })
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }
}

/// A tangent vector together with its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent<T> {
    pub base: Vec<T>,
    pub vector: Vec<T>,
}

#[inline]
pub(crate) fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

#[inline]
pub(crate) fn packed(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * i.saturating_sub(1) / 2 + j - i
}

/// Manifold data: a chart, its metric, and the compactness structure.
#[derive(Debug, Clone)]
pub struct ManifoldSpec {
    frame: CoordinateFrame,
    metric: Vec<Expression>,
    signature: Signature,
    domain: ChartDomain,
    quotient: Option<QuotientSpec>,
    declared_complete: bool,
    // ∂_l g_ij, indexed [packed(i, j)][l]
    metric_derivatives: Vec<Vec<Expr>>,
    constant_metric: Option<Matrix<f64>>,
}

impl PartialEq for ManifoldSpec {
    fn eq(&self, other: &Self) -> bool {
        self.frame == other.frame
            && self.metric == other.metric
            && self.signature == other.signature
            && self.domain == other.domain
            && self.quotient == other.quotient
            && self.declared_complete == other.declared_complete
    }
}

impl ManifoldSpec {
    /// Builds a manifold from the upper triangle of the metric, given row by
    /// row as `g_ij` for `j ≥ i`.
    pub fn new(
        frame: CoordinateFrame,
        upper_triangle: Vec<Expression>,
        signature: Signature,
    ) -> Result<Self, GeometryError> {
        let n = frame.dim();
        if upper_triangle.len() != packed_len(n) {
            return Err(GeometryError::Dimension { expected: packed_len(n), found: upper_triangle.len() });
        }
        for g in &upper_triangle {
            if g.tree().depends_on(Variable::Time) {
                return Err(GeometryError::Invalid(format!("metric component `{g}` depends on t")));
            }
            if g.tree().max_var().is_some_and(|i| i >= n) {
                return Err(GeometryError::Dimension { expected: n, found: g.tree().max_var().unwrap() + 1 });
            }
        }
        let metric_derivatives = upper_triangle
            .iter()
            .map(|g| (0..n).map(|l| g.tree().derive(Variable::Coord(l))).collect())
            .collect();
        let constants: Option<Vec<f64>> = upper_triangle.iter().map(|g| g.tree().constant_value()).collect();
        let constant_metric = constants.map(|c| Matrix::from_fn(n, |i, j| c[packed(n, i, j)]));
        Ok(Self {
            domain: ChartDomain::unbounded(n),
            frame,
            metric: upper_triangle,
            signature,
            quotient: None,
            declared_complete: false,
            metric_derivatives,
            constant_metric,
        })
    }

    /// Builds from a full matrix of expression strings; both triangles must agree.
    pub fn from_strings(
        frame: CoordinateFrame,
        rows: &[&[&str]],
        signature: Signature,
    ) -> Result<Self, crate::Error> {
        let n = frame.dim();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(GeometryError::Dimension { expected: n, found: rows.len() }.into());
        }
        let mut upper = Vec::with_capacity(packed_len(n));
        for i in 0..n {
            for j in i..n {
                if rows[i][j].trim() != rows[j][i].trim() {
                    return Err(GeometryError::Invalid(format!("metric entry ({i},{j}) differs from ({j},{i})")).into());
                }
                upper.push(Expression::parse(rows[i][j], &frame)?);
            }
        }
        Ok(Self::new(frame, upper, signature)?)
    }

    pub fn with_domain(mut self, domain: ChartDomain) -> Result<Self, GeometryError> {
        domain.validate(self.dim())?;
        self.domain = domain;
        Ok(self)
    }

    pub fn with_quotient(mut self, quotient: Option<QuotientSpec>) -> Result<Self, GeometryError> {
        if let Some(q) = &quotient {
            q.validate(self.dim())?;
        }
        self.quotient = quotient;
        Ok(self)
    }

    /// Marks the metric as complete by the author's declaration (non-compact
    /// Riemannian scenarios only; compact quotients are complete anyway).
    pub fn with_declared_completeness(mut self, complete: bool) -> Self {
        self.declared_complete = complete;
        self
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    pub fn frame(&self) -> &CoordinateFrame {
        &self.frame
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.domain
    }

    pub fn quotient(&self) -> Option<&QuotientSpec> {
        self.quotient.as_ref()
    }

    pub fn declared_complete(&self) -> bool {
        self.declared_complete
    }

    /// Metric expression `g_ij` (either order).
    pub fn metric_entry(&self, i: usize, j: usize) -> &Expression {
        &self.metric[packed(self.dim(), i, j)]
    }

    pub fn metric_upper_triangle(&self) -> &[Expression] {
        &self.metric
    }

    /// Compactness is structural: a quotient with a bounded fundamental domain.
    pub fn is_compact(&self) -> bool {
        self.quotient.as_ref().is_some_and(QuotientSpec::is_bounded)
    }

    /// Metric with constant coefficients on an unrestricted chart without
    /// quotient: a flat, geodesically complete model space.
    pub fn is_flat_complete_chart(&self) -> bool {
        self.constant_metric.is_some()
            && self.quotient.is_none()
            && self.domain.excluded.is_empty()
            && self.domain.lower.iter().chain(&self.domain.upper).all(Option::is_none)
    }

    pub fn has_constant_metric(&self) -> bool {
        self.constant_metric.is_some()
    }

    fn check_dim<T>(&self, p: &[T]) -> Result<(), GeometryError> {
        if p.len() == self.dim() {
            Ok(())
        } else {
            Err(GeometryError::Dimension { expected: self.dim(), found: p.len() })
        }
    }

    /// Metric matrix without the domain/signature checks of [`Self::metric_at`].
    pub(crate) fn eval_metric<T: Real>(&self, p: &[T]) -> Result<Matrix<T>, EvalError> {
        let n = self.dim();
        if let Some(c) = &self.constant_metric {
            return Ok(Matrix::from_fn(n, |i, j| lit(c[(i, j)])));
        }
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = self.metric[packed(n, i, j)].eval(p, None)?;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    /// `∂_l g` for each coordinate `l`; `None` when the metric is constant.
    pub(crate) fn eval_metric_derivatives<T: Real>(&self, p: &[T]) -> Result<Option<Vec<Matrix<T>>>, EvalError> {
        if self.constant_metric.is_some() {
            return Ok(None);
        }
        let n = self.dim();
        let mut out = vec![Matrix::zeros(n); n];
        for i in 0..n {
            for j in i..n {
                for (l, d) in self.metric_derivatives[packed(n, i, j)].iter().enumerate() {
                    let v = d.eval(p, None)?;
                    out[l][(i, j)] = v;
                    out[l][(j, i)] = v;
                }
            }
        }
        Ok(Some(out))
    }

    pub(crate) fn factor<T: Real>(&self, g: &Matrix<T>) -> Result<Lu<T>, GeometryError> {
        let lu = g.lu().ok_or(GeometryError::Degenerate { det: 0.0 })?;
        let det = lu.det();
        if det.abs() < lit(DEGENERACY_TOLERANCE) {
            return Err(GeometryError::Degenerate { det: to_f64(det) });
        }
        Ok(lu)
    }

    /// Evaluated metric at `p`, checked for domain membership, degeneracy and signature.
    pub fn metric_at<T: Real>(&self, p: &[T]) -> Result<Matrix<T>, GeometryError> {
        self.check_dim(p)?;
        if !self.domain.contains(p) {
            return Err(GeometryError::OutsideDomain);
        }
        let g = self.eval_metric(p)?;
        self.factor(&g)?;
        let negatives = g.symmetric_eigenvalues().iter().filter(|&&e| e < T::zero()).count();
        let expected = self.signature.negative_count();
        if negatives != expected {
            return Err(GeometryError::Signature { expected, negatives });
        }
        Ok(g)
    }

    pub fn inverse_metric_at<T: Real>(&self, p: &[T]) -> Result<Matrix<T>, GeometryError> {
        let g = self.metric_at(p)?;
        Ok(self.factor(&g)?.inverse())
    }

    pub fn inner<T: Real>(&self, p: &[T], u: &[T], v: &[T]) -> Result<T, GeometryError> {
        self.check_dim(u)?;
        self.check_dim(v)?;
        Ok(self.metric_at(p)?.bilinear(u, v))
    }

    pub fn causal_character<T: Real>(&self, p: &[T], v: &[T]) -> Result<CausalCharacter, GeometryError> {
        let q = self.inner(p, v, v)?;
        let e2 = v.iter().fold(T::zero(), |acc, &x| acc + x * x);
        Ok(classify_causal(q, e2))
    }

    /// Levi-Civita connection coefficients from the symbolic metric derivatives.
    pub fn christoffel_at<T: Real>(&self, p: &[T]) -> Result<Christoffel<T>, GeometryError> {
        self.check_dim(p)?;
        if !self.domain.contains(p) {
            return Err(GeometryError::OutsideDomain);
        }
        let n = self.dim();
        let g = self.eval_metric(p)?;
        let ginv = self.factor(&g)?.inverse();
        let mut gamma = Christoffel::zeros(n);
        let Some(dg) = self.eval_metric_derivatives(p)? else {
            return Ok(gamma);
        };
        let half = lit::<T>(0.5);
        for i in 0..n {
            for j in i..n {
                // lowered: Γ_{l ij} = ½(∂_i g_jl + ∂_j g_il − ∂_l g_ij)
                let lowered: Vec<T> =
                    (0..n).map(|l| half * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)])).collect();
                for k in 0..n {
                    let value = (0..n).fold(T::zero(), |acc, l| acc + ginv[(k, l)] * lowered[l]);
                    gamma.set(k, i, j, value);
                }
            }
        }
        Ok(gamma)
    }

    /// `g(v,v) + 2 g(Z,v)²` for a unit timelike `Z`.
    pub fn auxiliary_riemannian<T: Real>(&self, p: &[T], z: &[T], v: &[T]) -> Result<T, GeometryError> {
        let g = self.metric_at(p)?;
        self.check_dim(z)?;
        self.check_dim(v)?;
        let zz = g.bilinear(z, z);
        if (zz + T::one()).abs() > lit(UNIT_TIMELIKE_TOLERANCE) {
            return Err(GeometryError::NotUnitTimelike(to_f64(zz)));
        }
        let zv = g.bilinear(z, v);
        Ok(g.bilinear(v, v) + lit::<T>(2.0) * zv * zv)
    }

    /// Maps a state into the fundamental domain with the matching velocity pushforward.
    pub fn normalize<T: Real>(&self, s: &TrajectoryState<T>) -> TrajectoryState<T> {
        let mut out = s.clone();
        self.normalize_in_place(&mut out.q, &mut out.v);
        out
    }

    /// Returns whether a deck transformation was applied.
    pub(crate) fn normalize_in_place<T: Real>(&self, q: &mut [T], v: &mut [T]) -> bool {
        match &self.quotient {
            None => false,
            Some(QuotientSpec::Lattice(periods)) => {
                let mut moved = false;
                for (x, period) in q.iter_mut().zip(periods) {
                    let Some(l) = period else { continue };
                    let l: T = lit(*l);
                    if *x >= T::zero() && *x < l {
                        continue;
                    }
                    let mut r = *x - l * (*x / l).floor();
                    if r >= l || r < T::zero() {
                        r = T::zero();
                    }
                    *x = r;
                    moved = true;
                }
                moved
            }
            Some(QuotientSpec::Scaling(lambda)) => {
                let lambda: T = lit(*lambda);
                let r = norm(q);
                if !(r > T::zero()) || !r.is_finite() || (r >= T::one() && r < lambda) {
                    return false;
                }
                let mut k = (r.ln() / lambda.ln()).floor().to_i32().unwrap_or(0);
                let mut scale = lambda.powi(k);
                // the logarithm can be off by one near the annulus boundary
                for _ in 0..4 {
                    let rs = r / scale;
                    if rs >= lambda {
                        k += 1;
                    } else if rs < T::one() {
                        k -= 1;
                    } else {
                        break;
                    }
                    scale = lambda.powi(k);
                }
                q.iter_mut().for_each(|x| *x = *x / scale);
                v.iter_mut().for_each(|x| *x = *x / scale);
                true
            }
        }
    }

    /// Largest relative violation of `g_p(u,v) = g_{T p}(dT u, dT v)` over the
    /// given samples, for every generator `T` of the deck group.
    pub fn deck_isometry_violation(&self, samples: &[(Vec<f64>, Vec<f64>, Vec<f64>)]) -> Result<f64, GeometryError> {
        let Some(quotient) = &self.quotient else { return Ok(0.0) };
        let mut worst = 0.0f64;
        for (p, u, v) in samples {
            let base = self.eval_metric(p)?.bilinear(u, v);
            let images: Vec<(Vec<f64>, f64)> = match quotient {
                QuotientSpec::Lattice(periods) => periods
                    .iter()
                    .enumerate()
                    .filter_map(|(i, l)| {
                        l.map(|l| {
                            let mut tp = p.clone();
                            tp[i] += l;
                            (tp, 1.0)
                        })
                    })
                    .collect(),
                QuotientSpec::Scaling(lambda) => vec![(p.iter().map(|x| x * lambda).collect(), *lambda)],
            };
            for (tp, stretch) in images {
                let pushed = self.eval_metric(&tp)?.bilinear(u, v) * stretch * stretch;
                worst = worst.max((pushed - base).abs() / (1.0 + base.abs()));
            }
        }
        Ok(worst)
    }
}

pub(crate) fn classify_causal<T: Real>(q: T, euclid2: T) -> CausalCharacter {
    if euclid2 == T::zero() {
        CausalCharacter::Zero
    } else if q.abs() <= lit::<T>(NULL_BAND) * euclid2 {
        CausalCharacter::Null
    } else if q < T::zero() {
        CausalCharacter::Timelike
    } else {
        CausalCharacter::Spacelike
    }
}
