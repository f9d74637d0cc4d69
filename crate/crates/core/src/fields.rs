//! Force data of the equation of motion: the (1,1) tensor `F`, the vector
//! field `X` or potential `V`, and a candidate conformal field `K`.

use serde::Serialize;
use thiserror::Error;

use crate::exprlang::{CoordinateFrame, EvalError, Expr, Expression, ParseError, Variable};
use crate::geometry::{GeometryError, ManifoldSpec};
use crate::linalg::Matrix;
use crate::sampling::SampleSet;
use crate::scalar::{dot, lit, norm, Real};

pub const SKEW_TOLERANCE: f64 = 1e-10;
pub const ANNIHILATION_TOLERANCE: f64 = 1e-10;
pub const CONFORMAL_TOLERANCE: f64 = 1e-9;
pub const TIMELIKE_MARGIN: f64 = 1e-10;
pub const GRADIENT_CONSISTENCY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldsError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{what} has {found} components, expected {expected}")]
    Arity { what: &'static str, expected: usize, found: usize },
    #[error("the conformal candidate K must not depend on t")]
    TimeDependentKilling,
    #[error("field {0} is not present")]
    Missing(&'static str),
    #[error("X and -grad V disagree by {0:e} at a sample point")]
    Inconsistent(f64),
}

impl From<EvalError> for FieldsError {
    fn from(e: EvalError) -> Self {
        FieldsError::Geometry(GeometryError::Eval(e))
    }
}

/// `F`, `X`, `V` and `K` as component expressions on one chart.
#[derive(Debug, Clone)]
pub struct FieldPack {
    frame: CoordinateFrame,
    force: Option<Vec<Vec<Expression>>>,
    vector: Option<Vec<Expression>>,
    potential: Option<Expression>,
    killing: Option<Vec<Expression>>,
    potential_gradient: Vec<Expr>,
    potential_rate: Option<Expr>,
    // ∂_i K^l stored as [l][i]
    killing_jacobian: Vec<Vec<Expr>>,
    constant_force: Option<Matrix<f64>>,
}

impl PartialEq for FieldPack {
    fn eq(&self, other: &Self) -> bool {
        self.frame == other.frame
            && self.force == other.force
            && self.vector == other.vector
            && self.potential == other.potential
            && self.killing == other.killing
    }
}

/// Self-adjoint and skew-adjoint parts of `F` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionAt<T> {
    pub self_adjoint: Matrix<T>,
    pub skew_adjoint: Matrix<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampledCheck {
    pub holds: bool,
    /// Worst measured value of the checked quantity.
    pub measured: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConformalAt<T> {
    pub sigma: T,
    pub residual: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConformalCheck {
    pub conformal: bool,
    pub killing: bool,
    pub max_residual: f64,
    pub max_abs_sigma: f64,
    pub samples: usize,
}

/// Field strength diagnostics reported side by side, since `g(X,X)` and the
/// full contraction of `F` can vanish on null fields that are far from zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldNorms {
    pub max_abs_g_xx: f64,
    pub max_euclid_x: f64,
    pub max_abs_ff_contraction: f64,
    pub max_euclid_f: f64,
    pub samples: usize,
}

impl FieldPack {
    pub fn new(frame: CoordinateFrame) -> Self {
        Self {
            frame,
            force: None,
            vector: None,
            potential: None,
            killing: None,
            potential_gradient: Vec::new(),
            potential_rate: None,
            killing_jacobian: Vec::new(),
            constant_force: None,
        }
    }

    fn n(&self) -> usize {
        self.frame.dim()
    }

    /// `F^i_j`, row `i` column `j`.
    pub fn with_force(mut self, rows: Vec<Vec<Expression>>) -> Result<Self, FieldsError> {
        let n = self.n();
        if rows.len() != n {
            return Err(FieldsError::Arity { what: "F", expected: n, found: rows.len() });
        }
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(FieldsError::Arity { what: "F row", expected: n, found: r.len() });
        }
        let constants: Option<Vec<f64>> = rows.iter().flatten().map(|e| e.tree().constant_value()).collect();
        self.constant_force = constants.map(|c| Matrix::from_fn(n, |i, j| c[i * n + j]));
        self.force = Some(rows);
        Ok(self)
    }

    pub fn with_vector(mut self, components: Vec<Expression>) -> Result<Self, FieldsError> {
        if components.len() != self.n() {
            return Err(FieldsError::Arity { what: "X", expected: self.n(), found: components.len() });
        }
        self.vector = Some(components);
        Ok(self)
    }

    pub fn with_potential(mut self, potential: Expression) -> Self {
        let n = self.n();
        self.potential_gradient = (0..n).map(|j| potential.tree().derive(Variable::Coord(j))).collect();
        self.potential_rate = Some(potential.tree().derive(Variable::Time));
        self.potential = Some(potential);
        self
    }

    pub fn with_killing(mut self, components: Vec<Expression>) -> Result<Self, FieldsError> {
        let n = self.n();
        if components.len() != n {
            return Err(FieldsError::Arity { what: "K", expected: n, found: components.len() });
        }
        if components.iter().any(|k| k.tree().depends_on(Variable::Time)) {
            return Err(FieldsError::TimeDependentKilling);
        }
        self.killing_jacobian = components
            .iter()
            .map(|k| (0..n).map(|i| k.tree().derive(Variable::Coord(i))).collect())
            .collect();
        self.killing = Some(components);
        Ok(self)
    }

    /// Convenience constructor from expression strings.
    pub fn from_strings(
        frame: &CoordinateFrame,
        force: Option<&[&[&str]]>,
        vector: Option<&[&str]>,
        potential: Option<&str>,
        killing: Option<&[&str]>,
    ) -> Result<Self, FieldsError> {
        let parse = |s: &str| Expression::parse(s, frame);
        let mut fp = FieldPack::new(frame.clone());
        if let Some(rows) = force {
            let rows = rows
                .iter()
                .map(|r| r.iter().map(|s| parse(s)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()?;
            fp = fp.with_force(rows)?;
        }
        if let Some(x) = vector {
            fp = fp.with_vector(x.iter().map(|s| parse(s)).collect::<Result<_, _>>()?)?;
        }
        if let Some(v) = potential {
            fp = fp.with_potential(parse(v)?);
        }
        if let Some(k) = killing {
            fp = fp.with_killing(k.iter().map(|s| parse(s)).collect::<Result<_, _>>()?)?;
        }
        Ok(fp)
    }

    pub fn frame(&self) -> &CoordinateFrame {
        &self.frame
    }

    pub fn force(&self) -> Option<&[Vec<Expression>]> {
        self.force.as_deref()
    }

    pub fn vector(&self) -> Option<&[Expression]> {
        self.vector.as_deref()
    }

    pub fn potential(&self) -> Option<&Expression> {
        self.potential.as_ref()
    }

    pub fn killing(&self) -> Option<&[Expression]> {
        self.killing.as_deref()
    }

    fn expressions(&self) -> impl Iterator<Item = &Expression> {
        self.force
            .iter()
            .flatten()
            .flatten()
            .chain(self.vector.iter().flatten())
            .chain(self.potential.iter())
            .chain(self.killing.iter().flatten())
    }

    /// Whether any expression references the evolution parameter `t`.
    pub fn is_time_dependent(&self) -> bool {
        self.expressions().any(|e| e.tree().depends_on(Variable::Time))
    }

    /// Whether the drive is conservative: no free vector field `X`.
    pub fn is_potential_driven(&self) -> bool {
        self.vector.is_none()
    }

    pub fn has_force(&self) -> bool {
        self.force.is_some()
    }

    /// `F^i_j` at `(p, t)`; zero when `F` is absent.
    pub fn force_at<T: Real>(&self, p: &[T], t: Option<T>) -> Result<Matrix<T>, EvalError> {
        let n = self.n();
        if let Some(c) = &self.constant_force {
            return Ok(Matrix::from_fn(n, |i, j| lit(c[(i, j)])));
        }
        let mut m = Matrix::zeros(n);
        if let Some(rows) = &self.force {
            for (i, row) in rows.iter().enumerate() {
                for (j, e) in row.iter().enumerate() {
                    m[(i, j)] = e.eval(p, t)?;
                }
            }
        }
        Ok(m)
    }

    /// `F(v)`, skipping the work when `F` is absent.
    pub(crate) fn apply_force<T: Real>(&self, p: &[T], t: Option<T>, v: &[T]) -> Result<Option<Vec<T>>, EvalError> {
        if self.force.is_none() {
            return Ok(None);
        }
        Ok(Some(self.force_at(p, t)?.mul_vec(v)))
    }

    pub fn vector_at<T: Real>(&self, p: &[T], t: Option<T>) -> Result<Option<Vec<T>>, EvalError> {
        self.vector.as_ref().map(|x| x.iter().map(|e| e.eval(p, t)).collect()).transpose()
    }

    pub fn potential_at<T: Real>(&self, p: &[T], t: Option<T>) -> Result<T, EvalError> {
        self.potential.as_ref().map_or(Ok(T::zero()), |v| v.eval(p, t))
    }

    /// `∂_j V` (the differential, not the gradient).
    pub fn potential_differential<T: Real>(&self, p: &[T], t: Option<T>) -> Result<Option<Vec<T>>, EvalError> {
        if self.potential.is_none() {
            return Ok(None);
        }
        self.potential_gradient.iter().map(|e| e.eval(p, t)).collect::<Result<Vec<_>, _>>().map(Some)
    }

    /// `∂V/∂t`.
    pub fn potential_rate<T: Real>(&self, p: &[T], t: Option<T>) -> Result<T, EvalError> {
        self.potential_rate.as_ref().map_or(Ok(T::zero()), |e| e.eval(p, t))
    }

    pub fn killing_at<T: Real>(&self, p: &[T]) -> Result<Option<Vec<T>>, EvalError> {
        self.killing.as_ref().map(|k| k.iter().map(|e| e.eval(p, None)).collect()).transpose()
    }

    /// Metric gradient `(∇V)^i = g^{ij} ∂_j V`; zero when `V` is absent.
    pub fn gradient<T: Real>(&self, m: &ManifoldSpec, p: &[T], t: Option<T>) -> Result<Vec<T>, FieldsError> {
        let n = self.n();
        let Some(dv) = self.potential_differential(p, t)? else {
            return Ok(vec![T::zero(); n]);
        };
        let g = m.metric_at(p)?;
        Ok(m.factor(&g)?.solve(&dv))
    }

    /// `S = ½(F + F*)`, `H = ½(F − F*)` with `F* = g⁻¹ Fᵀ g`.
    pub fn decompose<T: Real>(&self, m: &ManifoldSpec, p: &[T], t: Option<T>) -> Result<DecompositionAt<T>, FieldsError> {
        let f = self.force_at(p, t)?;
        let g = m.metric_at(p)?;
        let ginv = m.factor(&g)?.inverse();
        let adjoint = ginv.mul(&f.transpose()).mul(&g);
        let half = lit::<T>(0.5);
        Ok(DecompositionAt {
            self_adjoint: f.add(&adjoint).scale(half),
            skew_adjoint: f.sub(&adjoint).scale(half),
        })
    }

    /// Sampled check of `g(v, F v) = 0`, normalised by `1 + |v|²`.
    pub fn is_skew_adjoint(&self, m: &ManifoldSpec, samples: &SampleSet, t: f64) -> Result<SampledCheck, FieldsError> {
        let mut worst = 0.0f64;
        let mut count = 0;
        if self.force.is_some() {
            for (p, v) in samples.pairs() {
                let g = m.metric_at(p)?;
                let fv = self.force_at(p, Some(t))?.mul_vec(v);
                let violation = g.bilinear(v, &fv).abs() / (1.0 + dot(v, v));
                worst = worst.max(violation);
                count += 1;
            }
        } else {
            count = samples.pairs().count();
        }
        Ok(SampledCheck { holds: worst <= SKEW_TOLERANCE, measured: worst, samples: count })
    }

    /// Largest max-abs entry of the self-adjoint part over the sample points.
    pub fn max_self_adjoint_part(&self, m: &ManifoldSpec, samples: &SampleSet, t: f64) -> Result<f64, FieldsError> {
        let mut worst = 0.0f64;
        for p in &samples.points {
            worst = worst.max(self.decompose(m, p, Some(t))?.self_adjoint.max_abs());
        }
        Ok(worst)
    }

    /// Sampled check of `F(K) = 0` by the Euclidean norm of `F(K)`.
    pub fn annihilates(&self, samples: &SampleSet, t: f64) -> Result<SampledCheck, FieldsError> {
        if self.killing.is_none() {
            return Err(FieldsError::Missing("K"));
        }
        let mut worst = 0.0f64;
        for p in &samples.points {
            let kv = self.killing_at(p)?.expect("K present");
            if let Some(fk) = self.apply_force(p, Some(t), &kv)? {
                worst = worst.max(norm(&fk));
            }
        }
        Ok(SampledCheck { holds: worst <= ANNIHILATION_TOLERANCE, measured: worst, samples: samples.len() })
    }

    /// Lie derivative `(L_K g)_ij = K^l ∂_l g_ij + g_lj ∂_i K^l + g_il ∂_j K^l`.
    pub fn lie_derivative_of_metric<T: Real>(&self, m: &ManifoldSpec, p: &[T]) -> Result<Matrix<T>, FieldsError> {
        let n = self.n();
        let k = self.killing_at(p)?.ok_or(FieldsError::Missing("K"))?;
        let g = m.eval_metric(p)?;
        let dg = m.eval_metric_derivatives(p)?;
        let mut jac = Matrix::zeros(n);
        for l in 0..n {
            for i in 0..n {
                jac[(l, i)] = self.killing_jacobian[l][i].eval(p, None)?;
            }
        }
        Ok(Matrix::from_fn(n, |i, j| {
            let transport = dg
                .as_ref()
                .map_or(T::zero(), |dg| (0..n).fold(T::zero(), |acc, l| acc + k[l] * dg[l][(i, j)]));
            let stretch = (0..n).fold(T::zero(), |acc, l| acc + g[(l, j)] * jac[(l, i)] + g[(i, l)] * jac[(l, j)]);
            transport + stretch
        }))
    }

    /// Conformal factor `σ = tr(g⁻¹ L_K g) / 2n` and the residual
    /// `max |L_K g − 2σ g|`.
    pub fn conformal_factor<T: Real>(&self, m: &ManifoldSpec, p: &[T]) -> Result<ConformalAt<T>, FieldsError> {
        let n = self.n();
        let lie = self.lie_derivative_of_metric(m, p)?;
        let g = m.eval_metric(p)?;
        let ginv = m.factor(&g)?.inverse();
        let sigma = ginv.mul(&lie).trace() / lit(2.0 * n as f64);
        let residual = lie.sub(&g.scale(lit::<T>(2.0) * sigma)).max_abs();
        Ok(ConformalAt { sigma, residual })
    }

    pub fn conformal_check(&self, m: &ManifoldSpec, samples: &SampleSet) -> Result<ConformalCheck, FieldsError> {
        let mut max_residual = 0.0f64;
        let mut max_abs_sigma = 0.0f64;
        for p in &samples.points {
            let c = self.conformal_factor(m, p)?;
            max_residual = max_residual.max(c.residual);
            max_abs_sigma = max_abs_sigma.max(c.sigma.abs());
        }
        let conformal = max_residual <= CONFORMAL_TOLERANCE;
        Ok(ConformalCheck {
            conformal,
            killing: conformal && max_abs_sigma <= CONFORMAL_TOLERANCE,
            max_residual,
            max_abs_sigma,
            samples: samples.len(),
        })
    }

    /// `g(K,K) < −margin` at every sample; `measured` is the largest `g(K,K)` seen.
    pub fn timelike_check(&self, m: &ManifoldSpec, samples: &SampleSet) -> Result<SampledCheck, FieldsError> {
        let mut worst = f64::NEG_INFINITY;
        for p in &samples.points {
            let k = self.killing_at(p)?.ok_or(FieldsError::Missing("K"))?;
            worst = worst.max(m.inner(p, &k, &k)?);
        }
        Ok(SampledCheck { holds: worst < -TIMELIKE_MARGIN, measured: worst, samples: samples.len() })
    }

    /// When both `X` and `V` are given, checks `X = −∇V` at the samples.
    pub fn check_potential_consistency(&self, m: &ManifoldSpec, samples: &SampleSet, t: f64) -> Result<(), FieldsError> {
        if self.vector.is_none() || self.potential.is_none() {
            return Ok(());
        }
        for p in &samples.points {
            let x = self.vector_at(p, Some(t))?.expect("X present");
            let grad = self.gradient(m, p, Some(t))?;
            let gap = x.iter().zip(&grad).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
            let scale = 1.0 + norm(&grad);
            if gap > GRADIENT_CONSISTENCY_TOLERANCE * scale {
                return Err(FieldsError::Inconsistent(gap));
            }
        }
        Ok(())
    }

    /// Total drive `X − ∇V` (the non-velocity part of the acceleration).
    pub fn drive_at<T: Real>(&self, m: &ManifoldSpec, p: &[T], t: Option<T>) -> Result<Vec<T>, FieldsError> {
        if let Some(x) = self.vector_at(p, t)? {
            return Ok(x);
        }
        Ok(self.gradient(m, p, t)?.into_iter().map(|x| -x).collect())
    }

    /// `max |g(X,X)|` and `max |F^{μν}F_{μν}| = max |tr(F* F)|` over the samples.
    pub fn field_norms(&self, m: &ManifoldSpec, samples: &SampleSet, t: f64) -> Result<FieldNorms, FieldsError> {
        let mut out = FieldNorms {
            max_abs_g_xx: 0.0,
            max_euclid_x: 0.0,
            max_abs_ff_contraction: 0.0,
            max_euclid_f: 0.0,
            samples: samples.len(),
        };
        for p in &samples.points {
            let g = m.metric_at(p)?;
            let x = self.drive_at(m, p, Some(t))?;
            out.max_abs_g_xx = out.max_abs_g_xx.max(g.bilinear(&x, &x).abs());
            out.max_euclid_x = out.max_euclid_x.max(norm(&x));
            if self.force.is_some() {
                let f = self.force_at(p, Some(t))?;
                let adjoint = m.factor(&g)?.inverse().mul(&f.transpose()).mul(&g);
                out.max_abs_ff_contraction = out.max_abs_ff_contraction.max(adjoint.mul(&f).trace().abs());
                out.max_euclid_f = out.max_euclid_f.max(f.max_abs());
            }
        }
        Ok(out)
    }
}

/// `Z = K / ‖K‖` when `K` is timelike at `p`.
pub fn unit_timelike<T: Real>(g: &Matrix<T>, k: &[T]) -> Option<Vec<T>> {
    let kk = g.bilinear(k, k);
    if kk < -lit::<T>(TIMELIKE_MARGIN) {
        let len = (-kk).sqrt();
        Some(k.iter().map(|&x| x / len).collect())
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::CoordinateFrame;
    use crate::geometry::Signature;
    use crate::sampling::{domain_samples, SamplingConfig};
    use approx::assert_relative_eq;

    fn frame(names: &[&str]) -> CoordinateFrame {
        CoordinateFrame::new(names.iter().copied(), false).unwrap()
    }

    fn minkowski() -> ManifoldSpec {
        ManifoldSpec::from_strings(frame(&["t", "x"]), &[&["-1", "0"], &["0", "1"]], Signature::Lorentzian).unwrap()
    }

    fn null_plane() -> ManifoldSpec {
        ManifoldSpec::from_strings(frame(&["x", "y"]), &[&["0", "1"], &["1", "0"]], Signature::Lorentzian).unwrap()
    }

    fn euclid(names: &[&str]) -> ManifoldSpec {
        let n = names.len();
        let rows: Vec<Vec<&str>> = (0..n).map(|i| (0..n).map(|j| if i == j { "1" } else { "0" }).collect()).collect();
        let rows: Vec<&[&str]> = rows.iter().map(|r| r.as_slice()).collect();
        ManifoldSpec::from_strings(frame(names), &rows, Signature::Riemannian).unwrap()
    }

    fn small_samples(m: &ManifoldSpec) -> SampleSet {
        domain_samples(m, &SamplingConfig { points: 50, region_radius: 3.0, ..Default::default() })
    }

    #[test]
    fn decomposition_examples() {
        let e = euclid(&["x", "y"]);
        let fp = FieldPack::from_strings(e.frame(), Some(&[&["1", "0"], &["0", "1"]]), None, None, None).unwrap();
        let d = fp.decompose(&e, &[0.3, 0.1], None).unwrap();
        assert_eq!(d.self_adjoint, Matrix::identity(2));
        assert_eq!(d.skew_adjoint.max_abs(), 0.0);

        let m = minkowski();
        let fp = FieldPack::from_strings(m.frame(), Some(&[&["0", "1"], &["1", "0"]]), None, None, None).unwrap();
        let d = fp.decompose(&m, &[0.0, 0.0], None).unwrap();
        assert_eq!(d.self_adjoint.max_abs(), 0.0);
        assert_eq!(d.skew_adjoint.rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);

        let fp = FieldPack::from_strings(m.frame(), Some(&[&["0", "1"], &["0", "0"]]), None, None, None).unwrap();
        let d = fp.decompose(&m, &[0.0, 0.0], None).unwrap();
        assert_eq!(d.self_adjoint.rows(), vec![vec![0.0, 0.5], vec![-0.5, 0.0]]);
        assert_eq!(d.skew_adjoint.rows(), vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
        // adjointness identities
        let g = m.metric_at(&[0.0, 0.0]).unwrap();
        let (u, v) = ([0.3, -1.2], [0.7, 0.4]);
        let s = &d.self_adjoint;
        let h = &d.skew_adjoint;
        assert_relative_eq!(g.bilinear(&u, &s.mul_vec(&v)), g.bilinear(&s.mul_vec(&u), &v), epsilon = 1e-14);
        assert_relative_eq!(g.bilinear(&u, &h.mul_vec(&v)), -g.bilinear(&h.mul_vec(&u), &v), epsilon = 1e-14);
    }

    #[test]
    fn skewness_examples() {
        let e = euclid(&["x", "y"]);
        let s = small_samples(&e);
        let zero = FieldPack::new(e.frame().clone());
        let c = zero.is_skew_adjoint(&e, &s, 0.0).unwrap();
        assert!(c.holds);
        assert_eq!(c.measured, 0.0);

        let m = null_plane();
        let fp = FieldPack::from_strings(m.frame(), Some(&[&["1", "0"], &["0", "-1"]]), None, None, None).unwrap();
        assert!(fp.is_skew_adjoint(&m, &small_samples(&m), 0.0).unwrap().holds);

        let id = FieldPack::from_strings(e.frame(), Some(&[&["1", "0"], &["0", "1"]]), None, None, None).unwrap();
        let c = id.is_skew_adjoint(&e, &s, 0.0).unwrap();
        assert!(!c.holds);
        // unit directions: |g(v,v)| / (1 + 1)
        assert_relative_eq!(c.measured, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn gradient_examples() {
        let e = euclid(&["x", "y"]);
        let c = FieldPack::from_strings(e.frame(), None, None, Some("3.5"), None).unwrap();
        assert_eq!(c.gradient(&e, &[1.0, 2.0], None).unwrap(), vec![0.0, 0.0]);
        let x = FieldPack::from_strings(e.frame(), None, None, Some("x"), None).unwrap();
        assert_eq!(x.gradient(&e, &[1.0, 2.0], None).unwrap(), vec![1.0, 0.0]);
        let m = null_plane();
        let x = FieldPack::from_strings(m.frame(), None, None, Some("x"), None).unwrap();
        assert_eq!(x.gradient(&m, &[1.0, 2.0], None).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn annihilation_examples() {
        let m = minkowski();
        let s = small_samples(&m);
        let zero = FieldPack::from_strings(m.frame(), None, None, None, Some(&["1", "x"])).unwrap();
        assert!(zero.annihilates(&s, 0.0).unwrap().holds);
        let id = FieldPack::from_strings(m.frame(), Some(&[&["1", "0"], &["0", "1"]]), None, None, Some(&["1", "0"]))
            .unwrap();
        let c = id.annihilates(&s, 0.0).unwrap();
        assert!(!c.holds);
        assert_relative_eq!(c.measured, 1.0);
        let none = FieldPack::new(m.frame().clone());
        assert!(matches!(none.annihilates(&s, 0.0), Err(FieldsError::Missing("K"))));
    }

    #[test]
    fn conformal_examples() {
        let m = minkowski();
        let k = FieldPack::from_strings(m.frame(), None, None, None, Some(&["2", "-1"])).unwrap();
        let c = k.conformal_factor(&m, &[0.4, 0.2]).unwrap();
        assert_eq!((c.sigma, c.residual), (0.0, 0.0));

        let line = euclid(&["x"]);
        let k = FieldPack::from_strings(line.frame(), None, None, None, Some(&["x"])).unwrap();
        let c = k.conformal_factor(&line, &[1.7]).unwrap();
        assert_relative_eq!(c.sigma, 1.0);
        assert_eq!(c.residual, 0.0);

        let not_conformal = FieldPack::from_strings(m.frame(), None, None, None, Some(&["x^2", "0"])).unwrap();
        let check = not_conformal.conformal_check(&m, &small_samples(&m)).unwrap();
        assert!(!check.conformal);
    }

    #[test]
    fn timelike_examples() {
        let m = minkowski();
        let s = small_samples(&m);
        let k = FieldPack::from_strings(m.frame(), None, None, None, Some(&["1", "0"])).unwrap();
        let c = k.timelike_check(&m, &s).unwrap();
        assert!(c.holds);
        assert_relative_eq!(c.measured, -1.0);
        let k = FieldPack::from_strings(m.frame(), None, None, None, Some(&["1", "1"])).unwrap();
        assert!(!k.timelike_check(&m, &s).unwrap().holds);
    }

    #[test]
    fn consistency_of_x_and_v() {
        let e = euclid(&["x", "y"]);
        let s = small_samples(&e);
        let ok = FieldPack::from_strings(e.frame(), None, Some(&["-2*x", "0"]), Some("x^2"), None).unwrap();
        assert!(ok.check_potential_consistency(&e, &s, 0.0).is_ok());
        let bad = FieldPack::from_strings(e.frame(), None, Some(&["2*x", "0"]), Some("x^2"), None).unwrap();
        assert!(matches!(bad.check_potential_consistency(&e, &s, 0.0), Err(FieldsError::Inconsistent(_))));
    }

    #[test]
    fn arity_and_time_errors() {
        let e = euclid(&["x", "y"]);
        let r = FieldPack::from_strings(e.frame(), None, Some(&["1"]), None, None);
        assert!(matches!(r, Err(FieldsError::Arity { what: "X", .. })));
        let ft = CoordinateFrame::new(["x"], true).unwrap();
        let r = FieldPack::from_strings(&ft, None, None, None, Some(&["t"]));
        assert!(matches!(r, Err(FieldsError::TimeDependentKilling)));
        let v = FieldPack::from_strings(&ft, None, None, Some("t*x"), None).unwrap();
        assert!(v.is_time_dependent());
        assert_eq!(v.potential_rate(&[2.0], Some(1.0)), Ok(2.0));
    }

    #[test]
    fn null_field_norms() {
        let m = null_plane();
        let fp = FieldPack::from_strings(m.frame(), None, Some(&["2*x^3", "0"]), None, None).unwrap();
        let norms = fp.field_norms(&m, &small_samples(&m), 0.0).unwrap();
        assert_eq!(norms.max_abs_g_xx, 0.0);
        assert!(norms.max_euclid_x > 1.0);
    }
}
