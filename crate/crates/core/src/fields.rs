//! Scalar and vector fields on a box in R^n.
//!
//! Fields are immutable DAGs of nodes. Every node evaluates over any
//! [`FieldScalar`], so derived fields (brackets, derivatives of pseudoconnection
//! outputs, pullbacks) can be differentiated again.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exprlang::{self, Expr};
use crate::jets::{Elementary, Jet, Scalar, J1, J2, J3, J4};
use crate::metric::TwoMetric;
use crate::quadrature::adaptive_simpson;

/// Deepest supported jet tower.
pub const MAX_NESTING: usize = 4;

/// Scalars that fields can be evaluated over. Each level knows how to take
/// one more derivative by evaluating at the next jet level.
pub trait FieldScalar: Scalar {
    /// `X(f)` at `p`, where `dir = X(p)`.
    fn directional(f: &ScalarField, p: &[Self], dir: &[Self]) -> Result<Self>;

    fn axis_integral(spec: &AxisIntegral, p: &[Self]) -> Result<Self>;
}

fn seeded<S: Scalar>(p: &[S], dir: &[S]) -> Vec<Jet<S>> {
    p.iter().zip(dir).map(|(&a, &d)| Jet::new(a, d)).collect()
}

impl FieldScalar for f64 {
    fn directional(f: &ScalarField, p: &[Self], dir: &[Self]) -> Result<Self> {
        Ok(f.eval::<J1>(&seeded(p, dir))?.deriv)
    }

    fn axis_integral(spec: &AxisIntegral, p: &[Self]) -> Result<Self> {
        let mut q = p.to_vec();
        let upper = p[spec.axis];
        adaptive_simpson(
            |t| {
                q[spec.axis] = t;
                spec.integrand.eval::<f64>(&q)
            },
            spec.lower,
            upper,
            spec.tol,
        )
    }
}

macro_rules! jet_level {
    ($t:ty, $inner:ty, $next:ty) => {
        impl FieldScalar for $t {
            fn directional(f: &ScalarField, p: &[Self], dir: &[Self]) -> Result<Self> {
                Ok(f.eval::<$next>(&seeded(p, dir))?.deriv)
            }

            fn axis_integral(spec: &AxisIntegral, p: &[Self]) -> Result<Self> {
                jet_axis_integral::<$inner>(spec, p)
            }
        }
    };
}

jet_level!(J1, f64, J2);
jet_level!(J2, J1, J3);
jet_level!(J3, J2, J4);

impl FieldScalar for J4 {
    fn directional(_: &ScalarField, _: &[Self], _: &[Self]) -> Result<Self> {
        Err(Error::NestingTooDeep { max: MAX_NESTING })
    }

    fn axis_integral(spec: &AxisIntegral, p: &[Self]) -> Result<Self> {
        jet_axis_integral::<J3>(spec, p)
    }
}

// d/de ∫_{c}^{y(e)} F(x(e), t) dt = y'·F(x, y) + Σ x_i'·∫ ∂_i F dt
fn jet_axis_integral<T: FieldScalar>(spec: &AxisIntegral, p: &[Jet<T>]) -> Result<Jet<T>> {
    let base: Vec<T> = p.iter().map(|j| j.value).collect();
    let value = T::axis_integral(spec, &base)?;
    let mut deriv = p[spec.axis].deriv * spec.integrand.eval::<T>(&base)?;
    for (i, pi) in p.iter().enumerate() {
        if i == spec.axis {
            continue;
        }
        let partial = AxisIntegral {
            integrand: VectorField::basis(p.len(), i).apply(&spec.integrand),
            ..spec.clone()
        };
        deriv = deriv + pi.deriv * T::axis_integral(&partial, &base)?;
    }
    Ok(Jet::new(value, deriv))
}

/// `p ↦ ∫_{lower}^{p[axis]} integrand(p with p[axis] = t) dt`.
#[derive(Clone, Debug)]
pub struct AxisIntegral {
    pub integrand: ScalarField,
    pub axis: usize,
    pub lower: f64,
    pub tol: f64,
}

#[derive(Debug)]
enum Node {
    Const(f64),
    Coord(usize),
    Expr { expr: Expr, arity: usize },
    Add(ScalarField, ScalarField),
    Sub(ScalarField, ScalarField),
    Mul(ScalarField, ScalarField),
    Div(ScalarField, ScalarField),
    Neg(ScalarField),
    Apply(Elementary, ScalarField),
    Derivative(VectorField, ScalarField),
    Compose(ScalarField, Arc<[ScalarField]>),
    Metric {
        metric: TwoMetric,
        at: Option<Arc<[ScalarField]>>,
        u: VectorField,
        v: VectorField,
        w: VectorField,
    },
    Integral(AxisIntegral),
}

/// A smooth function on the box.
#[derive(Clone)]
pub struct ScalarField(Arc<Node>);

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(c) => write!(f, "{c}"),
            Node::Coord(i) => write!(f, "x[{i}]"),
            Node::Expr { expr, .. } => write!(f, "{expr}"),
            _ => write!(f, "<derived field>"),
        }
    }
}

impl ScalarField {
    fn node(n: Node) -> Self {
        ScalarField(Arc::new(n))
    }

    pub fn constant(c: f64) -> Self {
        Self::node(Node::Const(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn coord(i: usize) -> Self {
        Self::node(Node::Coord(i))
    }

    pub fn from_expr(expr: Expr) -> Self {
        if let Expr::Constant(c) = expr {
            return Self::constant(c);
        }
        let arity = expr.arity();
        Self::node(Node::Expr { expr, arity })
    }

    pub fn parse<S: AsRef<str>>(text: &str, coords: &[S]) -> Result<Self> {
        Ok(Self::from_expr(exprlang::parse(text, coords)?))
    }

    pub fn as_constant(&self) -> Option<f64> {
        match &*self.0 {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    pub fn apply(&self, op: Elementary) -> Self {
        if let Some(c) = self.as_constant() {
            if let Ok(v) = op.apply(c) {
                return Self::constant(v);
            }
        }
        Self::node(Node::Apply(op, self.clone()))
    }

    pub fn div(&self, other: &ScalarField) -> Self {
        match (self.as_constant(), other.as_constant()) {
            (Some(0.0), _) => Self::zero(),
            (_, Some(1.0)) => self.clone(),
            (Some(a), Some(b)) if b != 0.0 => Self::constant(a / b),
            _ => Self::node(Node::Div(self.clone(), other.clone())),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self * &Self::constant(c)
    }

    pub fn sqrt(&self) -> Self {
        self.apply(Elementary::Sqrt)
    }

    pub fn ln(&self) -> Self {
        self.apply(Elementary::Ln)
    }

    pub fn powf(&self, e: f64) -> Self {
        self.apply(Elementary::Pow(e))
    }

    /// `self ∘ map`.
    pub fn compose(&self, map: &[ScalarField]) -> Self {
        if self.as_constant().is_some() {
            return self.clone();
        }
        Self::node(Node::Compose(self.clone(), map.to_vec().into()))
    }

    /// `p ↦ metric_{at(p)}(u(p), v(p) / w(p))`; `at = None` means the identity.
    pub fn metric(
        metric: &TwoMetric,
        at: Option<&[ScalarField]>,
        u: &VectorField,
        v: &VectorField,
        w: &VectorField,
    ) -> Self {
        if u.is_zero() || v.is_zero() || w.is_zero() {
            return Self::zero();
        }
        Self::node(Node::Metric {
            metric: metric.clone(),
            at: at.map(|a| a.to_vec().into()),
            u: u.clone(),
            v: v.clone(),
            w: w.clone(),
        })
    }

    pub fn axis_integral(spec: AxisIntegral) -> Self {
        Self::node(Node::Integral(spec))
    }

    pub fn eval<S: FieldScalar>(&self, p: &[S]) -> Result<S> {
        match &*self.0 {
            Node::Const(c) => Ok(S::from_f64(*c)),
            Node::Coord(i) => p
                .get(*i)
                .copied()
                .ok_or(Error::DimensionMismatch { expected: i + 1, found: p.len() }),
            Node::Expr { expr, arity } => {
                if *arity > p.len() {
                    return Err(Error::DimensionMismatch { expected: *arity, found: p.len() });
                }
                Ok(expr.eval(p)?)
            }
            Node::Add(a, b) => Ok(a.eval(p)? + b.eval(p)?),
            Node::Sub(a, b) => Ok(a.eval(p)? - b.eval(p)?),
            Node::Mul(a, b) => Ok(a.eval(p)? * b.eval(p)?),
            Node::Div(a, b) => Ok(a.eval(p)?.checked_div(b.eval(p)?)?),
            Node::Neg(a) => Ok(-a.eval(p)?),
            Node::Apply(op, a) => Ok(op.apply(a.eval(p)?)?),
            Node::Derivative(x, f) => {
                let dir = x.eval(p)?;
                S::directional(f, p, &dir)
            }
            Node::Compose(f, map) => {
                let q = map.iter().map(|m| m.eval(p)).collect::<Result<Vec<S>>>()?;
                f.eval(&q)
            }
            Node::Metric { metric, at, u, v, w } => {
                let q = match at {
                    Some(m) => m.iter().map(|c| c.eval(p)).collect::<Result<Vec<S>>>()?,
                    None => p.to_vec(),
                };
                metric.eval_at(&q, &u.eval(p)?, &v.eval(p)?, &w.eval(p)?)
            }
            Node::Integral(spec) => {
                if spec.axis >= p.len() {
                    return Err(Error::DimensionMismatch { expected: spec.axis + 1, found: p.len() });
                }
                S::axis_integral(spec, p)
            }
        }
    }

    /// Real value at `p`.
    pub fn value(&self, p: &[f64]) -> Result<f64> {
        self.eval::<f64>(p)
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, o: &ScalarField) -> ScalarField {
        match (self.as_constant(), o.as_constant()) {
            (Some(0.0), _) => o.clone(),
            (_, Some(0.0)) => self.clone(),
            (Some(a), Some(b)) => ScalarField::constant(a + b),
            _ => ScalarField::node(Node::Add(self.clone(), o.clone())),
        }
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, o: &ScalarField) -> ScalarField {
        match (self.as_constant(), o.as_constant()) {
            (_, Some(0.0)) => self.clone(),
            (Some(0.0), _) => -o,
            (Some(a), Some(b)) => ScalarField::constant(a - b),
            _ => ScalarField::node(Node::Sub(self.clone(), o.clone())),
        }
    }
}

impl Mul for &ScalarField {
    type Output = ScalarField;
    fn mul(self, o: &ScalarField) -> ScalarField {
        match (self.as_constant(), o.as_constant()) {
            (Some(0.0), _) | (_, Some(0.0)) => ScalarField::zero(),
            (Some(1.0), _) => o.clone(),
            (_, Some(1.0)) => self.clone(),
            (Some(a), Some(b)) => ScalarField::constant(a * b),
            _ => ScalarField::node(Node::Mul(self.clone(), o.clone())),
        }
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        match self.as_constant() {
            Some(c) => ScalarField::constant(-c),
            None => ScalarField::node(Node::Neg(self.clone())),
        }
    }
}

macro_rules! owned_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for ScalarField {
            type Output = ScalarField;
            fn $m(self, o: ScalarField) -> ScalarField {
                (&self).$m(&o)
            }
        }
        impl $tr<&ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $m(self, o: &ScalarField) -> ScalarField {
                (&self).$m(o)
            }
        }
    )*};
}

owned_ops!(Add add, Sub sub, Mul mul);

impl Neg for ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        -&self
    }
}

impl From<f64> for ScalarField {
    fn from(c: f64) -> Self {
        ScalarField::constant(c)
    }
}

/// A vector field: one scalar field per coordinate.
#[derive(Clone, Debug)]
pub struct VectorField(Arc<[ScalarField]>);

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Self {
        VectorField(components.into())
    }

    pub fn constant(c: &[f64]) -> Self {
        Self::new(c.iter().map(|&v| ScalarField::constant(v)).collect())
    }

    pub fn zero(n: usize) -> Self {
        Self::constant(&vec![0.0; n])
    }

    /// The coordinate field `e_i`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        Self::constant(&c)
    }

    pub fn parse<S: AsRef<str>, T: AsRef<str>>(components: &[S], coords: &[T]) -> Result<Self> {
        if components.len() != coords.len() {
            return Err(Error::DimensionMismatch { expected: coords.len(), found: components.len() });
        }
        let c = components
            .iter()
            .map(|s| ScalarField::parse(s.as_ref(), coords))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(c))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.0
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.0[i]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(ScalarField::is_zero)
    }

    pub fn eval<S: FieldScalar>(&self, p: &[S]) -> Result<Vec<S>> {
        self.0.iter().map(|c| c.eval(p)).collect()
    }

    pub fn value(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.eval::<f64>(p)
    }

    fn zip(&self, o: &VectorField, f: impl Fn(&ScalarField, &ScalarField) -> ScalarField) -> Self {
        assert_eq!(self.dim(), o.dim(), "vector fields of different dimension");
        Self::new(self.0.iter().zip(o.0.iter()).map(|(a, b)| f(a, b)).collect())
    }

    pub fn add(&self, o: &VectorField) -> Self {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &VectorField) -> Self {
        self.zip(o, |a, b| a - b)
    }

    pub fn neg(&self) -> Self {
        Self::new(self.0.iter().map(|a| -a).collect())
    }

    /// `φ·X`.
    pub fn scale(&self, phi: &ScalarField) -> Self {
        Self::new(self.0.iter().map(|a| phi * a).collect())
    }

    pub fn scale_const(&self, c: f64) -> Self {
        self.scale(&ScalarField::constant(c))
    }

    /// `X(f)`.
    pub fn apply(&self, f: &ScalarField) -> ScalarField {
        directional_derivative(self, f)
    }

    /// Componentwise `X(Y_i)`.
    pub fn apply_vector(&self, y: &VectorField) -> VectorField {
        VectorField::new(y.0.iter().map(|c| self.apply(c)).collect())
    }

    /// Componentwise composition `X ∘ map`.
    pub fn compose(&self, map: &[ScalarField]) -> Self {
        Self::new(self.0.iter().map(|c| c.compose(map)).collect())
    }
}

/// `X(f) = Σ X_i ∂f/∂x_i`, with the partials taken through a seeded jet.
pub fn directional_derivative(x: &VectorField, f: &ScalarField) -> ScalarField {
    if x.is_zero() {
        return ScalarField::zero();
    }
    match &*f.0 {
        Node::Const(_) => ScalarField::zero(),
        Node::Coord(i) if *i < x.dim() => x.component(*i).clone(),
        _ => ScalarField::node(Node::Derivative(x.clone(), f.clone())),
    }
}

/// `[X,Y]_i = X(Y_i) − Y(X_i)`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> VectorField {
    x.apply_vector(y).sub(&y.apply_vector(x))
}

/// `Σ ∂X_i/∂x_i`.
pub fn divergence(x: &VectorField) -> ScalarField {
    let n = x.dim();
    (0..n).fold(ScalarField::zero(), |acc, i| acc + VectorField::basis(n, i).apply(x.component(i)))
}

/// `df(X,Y) = Y(f)·X − X(f)·Y`.
pub fn df_two_form(f: &ScalarField, x: &VectorField, y: &VectorField) -> VectorField {
    x.scale(&y.apply(f)).sub(&y.scale(&x.apply(f)))
}

/// Axis-aligned open box.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.len() > 3 {
            return Err(Error::Invalid(format!("box bounds {lo:?} / {hi:?}")));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::Invalid(format!("empty box {lo:?} / {hi:?}")));
        }
        Ok(BoxDomain { lo, hi })
    }

    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        BoxDomain { lo: vec![lo; n], hi: vec![hi; n] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| a < x && x < b)
    }

    pub fn contains_closed(&self, p: &[f64]) -> bool {
        p.len() == self.dim() && p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (a, b))| a <= x && x <= b)
    }

    /// Uniform samples from the box shrunk by 5% of each side.
    pub fn random_points(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                self.lo
                    .iter()
                    .zip(&self.hi)
                    .map(|(a, b)| {
                        let m = 0.05 * (b - a);
                        rng.gen_range(a + m..b - m)
                    })
                    .collect()
            })
            .collect()
    }

    /// Tensor grid with `k` interior nodes per axis, at cell midpoints.
    pub fn grid(&self, k: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (0..k).map(|i| a + (b - a) * (i as f64 + 0.5) / k as f64).collect())
            .collect();
        let mut out = vec![vec![]];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        out
    }
}

/// Largest `|f|` over a point set and where it occurs.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Peak {
    pub value: f64,
    pub point: Vec<f64>,
}

impl Peak {
    pub fn none() -> Self {
        Peak { value: 0.0, point: vec![] }
    }

    /// Keep the larger; ties keep `self` so merging in order is deterministic.
    pub fn max(self, o: Peak) -> Peak {
        if o.value > self.value || (self.point.is_empty() && !o.point.is_empty()) {
            o
        } else {
            self
        }
    }
}

/// Sup norm of `f` over `points`. Points are evaluated in parallel and
/// merged in order.
pub fn sup_norm(f: &ScalarField, points: &[Vec<f64>]) -> Result<Peak> {
    let vals: Vec<Result<f64>> = points.par_iter().map(|p| f.value(p)).collect();
    let mut best = Peak::none();
    for (p, v) in points.iter().zip(vals) {
        let v = v?;
        if v.is_nan() {
            return Err(Error::Invalid(format!("NaN at {p:?}")));
        }
        best = best.max(Peak { value: v.abs(), point: p.clone() });
    }
    Ok(best)
}

/// Sup norm of `|a − b|`.
pub fn sup_diff(a: &ScalarField, b: &ScalarField, points: &[Vec<f64>]) -> Result<Peak> {
    sup_norm(&(a - b), points)
}
