//! 2-Riemannian metrics on a box, the homomorphism P^g, and pullbacks.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::connection::DkElement;
use crate::error::{Error, Result};
use crate::fields::{FieldScalar, ScalarField, VectorField};
use crate::jets::Scalar;
use crate::twoinner::{check_spd, expand_dim2, expand_dim3, simple_value, BasisTable3, TwoInner};

/// Tables with a diagonal value below `-TABLE_TOL` are rejected during evaluation.
pub const TABLE_TOL: f64 = 1e-12;

#[derive(Debug)]
pub enum MetricKind {
    Standard { dim: usize },
    /// Row-major `h` entries.
    Simple { dim: usize, h: Vec<ScalarField> },
    Conformal { lambda: ScalarField, base: TwoMetric },
    Table2 { g112: ScalarField },
    /// Order: g112, g113, g221, g223, g331, g332, g123, g132, g231.
    Table3 { entries: Box<[ScalarField; 9]> },
}

/// A smooth assignment of 2-inner products.
#[derive(Clone, Debug)]
pub struct TwoMetric(Arc<MetricKind>);

impl TwoMetric {
    pub fn standard(dim: usize) -> Self {
        TwoMetric(Arc::new(MetricKind::Standard { dim }))
    }

    pub fn simple(h: Vec<Vec<ScalarField>>) -> Result<Self> {
        let dim = h.len();
        if !(2..=3).contains(&dim) || h.iter().any(|r| r.len() != dim) {
            return Err(Error::NotSpd(format!("h must be square of size 2 or 3, got {dim} rows")));
        }
        Ok(TwoMetric(Arc::new(MetricKind::Simple { dim, h: h.into_iter().flatten().collect() })))
    }

    pub fn conformal(lambda: ScalarField, base: TwoMetric) -> Self {
        TwoMetric(Arc::new(MetricKind::Conformal { lambda, base }))
    }

    pub fn table2(g112: ScalarField) -> Self {
        TwoMetric(Arc::new(MetricKind::Table2 { g112 }))
    }

    pub fn table3(entries: [ScalarField; 9]) -> Self {
        TwoMetric(Arc::new(MetricKind::Table3 { entries: Box::new(entries) }))
    }

    pub fn kind(&self) -> &MetricKind {
        &self.0
    }

    pub fn dim(&self) -> usize {
        match &*self.0 {
            MetricKind::Standard { dim } | MetricKind::Simple { dim, .. } => *dim,
            MetricKind::Conformal { base, .. } => base.dim(),
            MetricKind::Table2 { .. } => 2,
            MetricKind::Table3 { .. } => 3,
        }
    }

    /// The generating inner product when the metric is simple (standard and
    /// conformal-over-simple included).
    pub fn generating_h(&self) -> Option<Vec<Vec<ScalarField>>> {
        match &*self.0 {
            MetricKind::Standard { dim } => Some(
                (0..*dim)
                    .map(|i| (0..*dim).map(|j| ScalarField::constant(if i == j { 1.0 } else { 0.0 })).collect())
                    .collect(),
            ),
            MetricKind::Simple { dim, h } => Some(h.chunks(*dim).map(|r| r.to_vec()).collect()),
            // λ·g_h is generated by √λ·h
            MetricKind::Conformal { lambda, base } => {
                let s = lambda.sqrt();
                base.generating_h().map(|h| h.into_iter().map(|r| r.iter().map(|e| &s * e).collect()).collect())
            }
            _ => None,
        }
    }

    /// `g_p(u, v / w)`.
    pub fn eval_at<S: FieldScalar>(&self, p: &[S], u: &[S], v: &[S], w: &[S]) -> Result<S> {
        let n = self.dim();
        for len in [p.len(), u.len(), v.len(), w.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        match &*self.0 {
            MetricKind::Standard { dim } => {
                let id: Vec<S> =
                    (0..dim * dim).map(|k| S::from_f64(if k / dim == k % dim { 1.0 } else { 0.0 })).collect();
                Ok(simple_value(&id, u, v, w))
            }
            MetricKind::Simple { h, .. } => {
                let hv = h.iter().map(|e| e.eval(p)).collect::<Result<Vec<S>>>()?;
                Ok(simple_value(&hv, u, v, w))
            }
            MetricKind::Conformal { lambda, base } => Ok(lambda.eval(p)? * base.eval_at(p, u, v, w)?),
            MetricKind::Table2 { g112 } => {
                let b = g112.eval(p)?;
                check_diag(b)?;
                Ok(expand_dim2(u, v, w, b))
            }
            MetricKind::Table3 { entries } => {
                let vals = entries.iter().map(|e| e.eval(p)).collect::<Result<Vec<S>>>()?;
                for &d in &vals[..6] {
                    check_diag(d)?;
                }
                let arr: [S; 9] = vals.try_into().expect("nine entries");
                Ok(expand_dim3(u, v, w, &BasisTable3::from_array(arr)))
            }
        }
    }

    /// The scalar field `g(X, Y / Z)`.
    pub fn g(&self, x: &VectorField, y: &VectorField, z: &VectorField) -> ScalarField {
        ScalarField::metric(self, None, x, y, z)
    }

    /// `g(e_i, e_j / e_k)`, zero-based indices.
    pub fn basis_entry(&self, i: usize, j: usize, k: usize) -> ScalarField {
        let n = self.dim();
        self.g(&VectorField::basis(n, i), &VectorField::basis(n, j), &VectorField::basis(n, k))
    }

    /// The pointwise 2-inner product at `p`.
    pub fn at(&self, p: &[f64]) -> PointInner<'_> {
        PointInner { metric: self, p: p.to_vec() }
    }

    /// Sample-based invariants: SPD `h`, positive λ, consistent nonnegative tables.
    pub fn validate(&self, points: &[Vec<f64>]) -> Result<()> {
        for p in points {
            if p.len() != self.dim() {
                return Err(Error::DimensionMismatch { expected: self.dim(), found: p.len() });
            }
            match &*self.0 {
                MetricKind::Standard { .. } => {}
                MetricKind::Simple { dim, h } => {
                    let vals = h.iter().map(|e| e.value(p)).collect::<Result<Vec<f64>>>()?;
                    check_spd(&DMatrix::from_row_slice(*dim, *dim, &vals))
                        .map_err(|e| Error::NotSpd(format!("{e} at {p:?}")))?;
                }
                MetricKind::Conformal { lambda, base } => {
                    let l = lambda.value(p)?;
                    if !(l > 0.0) {
                        return Err(Error::NonPositiveLambda { value: l, point: p.clone() });
                    }
                    base.validate(std::slice::from_ref(p))?;
                }
                MetricKind::Table2 { g112 } => {
                    let b = g112.value(p)?;
                    if !(b > 0.0) {
                        return Err(Error::AxiomViolation { value: b });
                    }
                }
                MetricKind::Table3 { entries } => {
                    let v = entries.iter().map(|e| e.value(p)).collect::<Result<Vec<f64>>>()?;
                    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
                    // g(e_i,e_i/e_j) = g(e_j,e_j/e_i)
                    for (a, b) in [(0, 2), (1, 4), (3, 5)] {
                        if (v[a] - v[b]).abs() > 1e-9 * scale {
                            return Err(Error::Invalid(format!(
                                "table entries {} and {} disagree at {p:?}",
                                TABLE3_NAMES[a], TABLE3_NAMES[b]
                            )));
                        }
                    }
                    // nonnegativity on random directions
                    let t = BasisTable3::from_array(v.try_into().expect("nine entries"));
                    let r = crate::twoinner::check_axioms(&t, 50, 0);
                    if r.nonnegativity > 1e-9 * scale || r.independent_nonpositive > 0 {
                        return Err(Error::AxiomViolation { value: -r.nonnegativity });
                    }
                }
            }
        }
        Ok(())
    }
}

pub const TABLE3_NAMES: [&str; 9] = ["g112", "g113", "g221", "g223", "g331", "g332", "g123", "g132", "g231"];

fn check_diag<S: Scalar>(d: S) -> Result<()> {
    let v = d.real();
    if v < -TABLE_TOL {
        return Err(Error::AxiomViolation { value: v });
    }
    Ok(())
}

/// A metric frozen at one point.
pub struct PointInner<'a> {
    metric: &'a TwoMetric,
    p: Vec<f64>,
}

impl TwoInner for PointInner<'_> {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn eval(&self, u: &[f64], v: &[f64], w: &[f64]) -> f64 {
        self.metric.eval_at(&self.p, u, v, w).unwrap_or(f64::NAN)
    }
}

/// `P^g(A) = (Y,Z) ↦ g(A, Y / Z)`.
pub fn p_g(g: &TwoMetric, a: &VectorField) -> DkElement {
    let (g, a) = (g.clone(), a.clone());
    DkElement::new(2, move |args| g.g(&a, &args[0], &args[1]))
}

/// `δ_ij − δ_ik δ_jk`, one-based indices.
pub fn delta_ijk(i: usize, j: usize, k: usize) -> Result<f64> {
    if ![i, j, k].iter().all(|x| (1..=3).contains(x)) {
        return Err(Error::IndexOutOfRange(format!("({i},{j},{k})")));
    }
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    Ok(d(i, j) - d(i, k) * d(j, k))
}

/// A diffeomorphism with a closed-form inverse.
#[derive(Clone, Debug)]
pub struct Diffeo {
    forward: Vec<ScalarField>,
    inverse: Vec<ScalarField>,
    samples: Vec<Vec<f64>>,
}

/// Tolerance for `inverse ∘ forward = id` at construction.
pub const INVERSE_TOL: f64 = 1e-8;

impl Diffeo {
    /// Checks `inverse(forward(p)) = p` and `forward(inverse(q)) = q` for
    /// `q = forward(p)` at every sample.
    pub fn new(forward: Vec<ScalarField>, inverse: Vec<ScalarField>, samples: Vec<Vec<f64>>) -> Result<Self> {
        let n = forward.len();
        if inverse.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: inverse.len() });
        }
        let d = Diffeo { forward, inverse, samples };
        for p in &d.samples {
            let q = d.map(p)?;
            let back = d.map_inverse(&q)?;
            let again = d.map(&back)?;
            let r1 = back.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let r2 = again.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let residual = r1.max(r2);
            if !(residual <= INVERSE_TOL) {
                return Err(Error::BadInverse { residual, point: p.clone() });
            }
        }
        Ok(d)
    }

    pub fn identity(n: usize, samples: Vec<Vec<f64>>) -> Self {
        let id: Vec<ScalarField> = (0..n).map(ScalarField::coord).collect();
        Diffeo { forward: id.clone(), inverse: id, samples }
    }

    pub fn dim(&self) -> usize {
        self.forward.len()
    }

    pub fn forward(&self) -> &[ScalarField] {
        &self.forward
    }

    pub fn inverse_components(&self) -> &[ScalarField] {
        &self.inverse
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn map(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.forward.iter().map(|c| c.value(p)).collect()
    }

    pub fn map_inverse(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.inverse.iter().map(|c| c.value(q)).collect()
    }

    /// The inverse diffeomorphism, sampled at the images of the samples.
    pub fn inverse(&self) -> Result<Diffeo> {
        let samples = self.samples.iter().map(|p| self.map(p)).collect::<Result<Vec<_>>>()?;
        Ok(Diffeo { forward: self.inverse.clone(), inverse: self.forward.clone(), samples })
    }

    /// `Dφ e_i` as a vector field on the domain.
    pub fn jacobian_column(&self, i: usize) -> VectorField {
        let e = VectorField::basis(self.dim(), i);
        VectorField::new(self.forward.iter().map(|c| e.apply(c)).collect())
    }

    /// `Dφ_p` as a matrix, via jets.
    pub fn jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let col = self.jacobian_column(i).value(p)?;
            for (a, v) in col.into_iter().enumerate() {
                m[(a, i)] = v;
            }
        }
        Ok(m)
    }

    /// `f_*X = (Dφ X) ∘ φ⁻¹`, a field on the codomain.
    pub fn pushforward(&self, x: &VectorField) -> VectorField {
        VectorField::new(self.forward.iter().map(|c| x.apply(c).compose(&self.inverse)).collect())
    }
}

/// The table metric `g_ijk(p) = ḡ_{φ(p)}(Dφ e_i, Dφ e_j / Dφ e_k)`.
pub fn pullback_metric(phi: &Diffeo, gbar: &TwoMetric) -> Result<TwoMetric> {
    let n = phi.dim();
    if gbar.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: gbar.dim() });
    }
    for p in phi.samples() {
        let det = phi.jacobian(p)?.determinant();
        if !(det.abs() >= 1e-10) {
            return Err(Error::DegenerateJacobian { det, point: p.clone() });
        }
    }
    let cols: Vec<VectorField> = (0..n).map(|i| phi.jacobian_column(i)).collect();
    let entry = |i: usize, j: usize, k: usize| {
        ScalarField::metric(gbar, Some(phi.forward()), &cols[i], &cols[j], &cols[k])
    };
    match n {
        2 => Ok(TwoMetric::table2(entry(0, 0, 1))),
        3 => Ok(TwoMetric::table3(table3_order().map(|(i, j, k)| entry(i, j, k)))),
        _ => Err(Error::Invalid(format!("pullback in dimension {n}"))),
    }
}

/// Zero-based index triples in table order.
pub fn table3_order() -> [(usize, usize, usize); 9] {
    [(0, 0, 1), (0, 0, 2), (1, 1, 0), (1, 1, 2), (2, 2, 0), (2, 2, 1), (0, 1, 2), (0, 2, 1), (1, 2, 0)]
}
