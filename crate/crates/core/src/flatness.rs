//! Flatness: explicit flattening in dimension 2, the first-order system and
//! its Beltrami form in dimension 3, and a classifier for conformal metrics.

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{AxisIntegral, BoxDomain, Peak, ScalarField, VectorField};
use crate::jets::{Jet, J1};
use crate::metric::TwoMetric;

pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// `(u, v) = (x, ∫_{y*}^{y} √G(x,t) dt)`.
#[derive(Clone, Debug)]
pub struct FlatteningMap2D {
    pub u: ScalarField,
    pub v: ScalarField,
    pub anchor: f64,
    pub quad_tol: f64,
}

impl FlatteningMap2D {
    pub fn map(&self, p: &[f64]) -> Result<[f64; 2]> {
        Ok([self.u.value(p)?, self.v.value(p)?])
    }

    /// `∂(u,v)/∂(x,y)` at `p`.
    pub fn jacobian(&self, p: &[f64]) -> Result<f64> {
        let d = |f: &ScalarField, i: usize| -> Result<f64> {
            let q: Vec<J1> = p.iter().enumerate().map(|(k, &c)| Jet::new(c, if k == i { 1.0 } else { 0.0 })).collect();
            Ok(f.eval(&q)?.deriv)
        };
        Ok(d(&self.u, 0)? * d(&self.v, 1)? - d(&self.u, 1)? * d(&self.v, 0)?)
    }
}

/// Anchor of the integral: 0 when the closed y-range contains it, else the lower bound.
pub fn anchor_for(domain: &BoxDomain) -> f64 {
    if domain.lo[1] <= 0.0 && 0.0 <= domain.hi[1] {
        0.0
    } else {
        domain.lo[1]
    }
}

/// Flatten `g` with `g(e1,e1/e2) = G`; `G > 0` is checked at `samples`.
pub fn flatten_2d(g: &ScalarField, domain: &BoxDomain, samples: &[Vec<f64>], quad_tol: f64) -> Result<FlatteningMap2D> {
    if domain.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: domain.dim() });
    }
    for p in samples {
        let v = g.value(p)?;
        if !(v > 0.0) {
            return Err(Error::NonPositiveG { value: v, point: p.clone() });
        }
    }
    let anchor = anchor_for(domain);
    let v = ScalarField::axis_integral(AxisIntegral { integrand: g.sqrt(), axis: 1, lower: anchor, tol: quad_tol });
    Ok(FlatteningMap2D { u: ScalarField::coord(0), v, anchor, quad_tol })
}

/// `max |(∂(u,v)/∂(x,y))² − G|`.
pub fn flatten_residual(map: &FlatteningMap2D, g: &ScalarField, points: &[Vec<f64>]) -> Result<Peak> {
    let mut best = Peak::none();
    for p in points {
        let j = map.jacobian(p)?;
        best = best.max(Peak { value: (j * j - g.value(p)?).abs(), point: p.clone() });
    }
    Ok(best)
}

/// `Df_p` with `Df[(α, i)] = ∂f^α/∂x^i`.
pub fn jacobian_matrix(f: &[ScalarField], p: &[f64]) -> Result<DMatrix<f64>> {
    let n = p.len();
    let mut m = DMatrix::zeros(f.len(), n);
    for i in 0..n {
        let e = VectorField::basis(n, i);
        for (a, fa) in f.iter().enumerate() {
            m[(a, i)] = e.apply(fa).value(p)?;
        }
    }
    Ok(m)
}

/// `Σ_{α<β} ∂(f^α,f^β)/∂(x^i,x^k) · ∂(f^α,f^β)/∂(x^j,x^k)`, zero-based indices.
pub fn minor_sum(df: &DMatrix<f64>, i: usize, j: usize, k: usize) -> f64 {
    let m = |a: usize, b: usize, c: usize, d: usize| df[(a, c)] * df[(b, d)] - df[(a, d)] * df[(b, c)];
    let mut s = 0.0;
    for a in 0..3 {
        for b in a + 1..3 {
            s += m(a, b, i, k) * m(a, b, j, k);
        }
    }
    s
}

/// Max over points and `(i,j,k)` of `|g_ijk − Σ minors|`.
pub fn system_residual_3d(f: &[ScalarField; 3], g: &TwoMetric, points: &[Vec<f64>]) -> Result<Peak> {
    if g.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: g.dim() });
    }
    let mut best = Peak::none();
    for p in points {
        let df = jacobian_matrix(f, p)?;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let r = (g.basis_entry(i, j, k).value(p)? - minor_sum(&df, i, j, k)).abs();
                    best = best.max(Peak { value: r, point: p.clone() });
                }
            }
        }
    }
    Ok(best)
}

/// The matrix whose inverse is `G(x)`.
pub fn g_matrix_inverse(g: &TwoMetric, p: &[f64]) -> Result<Matrix3<f64>> {
    let e = |i: usize, j: usize, k: usize| g.basis_entry(i, j, k).value(p);
    let (g112, g113, g223) = (e(0, 0, 1)?, e(0, 0, 2)?, e(1, 1, 2)?);
    let (g123, g132, g231) = (e(0, 1, 2)?, e(0, 2, 1)?, e(1, 2, 0)?);
    Ok(Matrix3::new(g223, -g123, -g132, -g123, g113, -g231, -g132, -g231, g112))
}

/// Largest 2-norm condition number above which `G` is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

pub fn g_matrix(g: &TwoMetric, p: &[f64]) -> Result<(Matrix3<f64>, f64)> {
    let m = g_matrix_inverse(g, p)?;
    let sv = m.singular_values();
    let cond = sv.max() / sv.min();
    if !(cond < MAX_CONDITION) {
        return Err(Error::SingularGMatrix { point: p.to_vec() });
    }
    let inv = m.try_inverse().ok_or_else(|| Error::SingularGMatrix { point: p.to_vec() })?;
    Ok((inv, cond))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BeltramiReport {
    pub residual: Peak,
    pub max_condition: f64,
}

/// Max entry of `|Dᵗf·Df − J²·G|` over the points.
pub fn beltrami_residual(f: &[ScalarField; 3], g: &TwoMetric, points: &[Vec<f64>]) -> Result<BeltramiReport> {
    if g.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: g.dim() });
    }
    let mut best = Peak::none();
    let mut max_condition = 0.0f64;
    for p in points {
        let (gm, cond) = g_matrix(g, p)?;
        max_condition = max_condition.max(cond);
        let df = jacobian_matrix(f, p)?;
        let j = df.determinant();
        let lhs = df.transpose() * &df;
        let diff = lhs - DMatrix::from_iterator(3, 3, gm.iter().copied()) * (j * j);
        best = best.max(Peak { value: diff.amax(), point: p.clone() });
    }
    Ok(BeltramiReport { residual: best, max_condition })
}

/// The table metric `g_ijk = g^st(Df e_i, Df e_j / Df e_k)`, for which `f`
/// solves the first-order system exactly.
pub fn flat_table(f: &[ScalarField; 3]) -> TwoMetric {
    let cols: Vec<VectorField> = (0..3)
        .map(|i| {
            let e = VectorField::basis(3, i);
            VectorField::new(f.iter().map(|c| e.apply(c)).collect())
        })
        .collect();
    let gst = TwoMetric::standard(3);
    TwoMetric::table3(crate::metric::table3_order().map(|(i, j, k)| gst.g(&cols[i], &cols[j], &cols[k])))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum ConformalVerdict {
    #[serde(rename = "FLAT-constant")]
    FlatConstant { value: f64 },
    #[serde(rename = "FLAT-inversion")]
    FlatInversion { a: [f64; 3], r: f64, fit_residual: f64 },
    #[serde(rename = "NON-FLAT")]
    NonFlat { fit_residual: f64, center_inside_box: bool, detail: String },
}

impl ConformalVerdict {
    pub fn is_flat(&self) -> bool {
        !matches!(self, ConformalVerdict::NonFlat { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    #[serde(flatten)]
    pub verdict: ConformalVerdict,
    pub samples: usize,
    pub seed: u64,
}

/// Spread below which `λ` counts as constant.
pub const CONSTANT_SPREAD: f64 = 1e-12;

/// Linear fit of `|x|² = 2a·x − q + s·λ^{-1/4}`.
#[derive(Clone, Debug, PartialEq)]
pub struct InversionFit {
    pub a: [f64; 3],
    pub q: f64,
    pub s: f64,
}

pub fn fit_inversion(points: &[Vec<f64>], lambda: &[f64]) -> Result<InversionFit> {
    let m = points.len();
    if m < 5 {
        return Err(Error::Invalid(format!("need at least 5 samples, got {m}")));
    }
    let mut a = DMatrix::zeros(m, 5);
    let mut b = DVector::zeros(m);
    for (r, (p, l)) in points.iter().zip(lambda).enumerate() {
        for i in 0..3 {
            a[(r, i)] = 2.0 * p[i];
        }
        a[(r, 3)] = -1.0;
        a[(r, 4)] = l.powf(-0.25);
        b[r] = p.iter().map(|c| c * c).sum::<f64>();
    }
    // unit-norm columns, then SVD least squares
    let scales: Vec<f64> = (0..5).map(|j| a.column(j).norm().max(f64::MIN_POSITIVE)).collect();
    for (j, s) in scales.iter().enumerate() {
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let x = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Invalid(format!("least squares failed: {e}")))?;
    let sol: Vec<f64> = (0..5).map(|j| x[j] / scales[j]).collect();
    Ok(InversionFit { a: [sol[0], sol[1], sol[2]], q: sol[3], s: sol[4] })
}

/// Classify `λ·g^st` on a box in ℝ³.
pub fn classify_conformal_3d(
    lambda: &ScalarField,
    domain: &BoxDomain,
    samples: usize,
    seed: u64,
    fit_tol: f64,
) -> Result<Classification> {
    if domain.dim() != 3 {
        return Err(Error::DimensionMismatch { expected: 3, found: domain.dim() });
    }
    let points = domain.random_points(samples, seed);
    let mut vals = Vec::with_capacity(points.len());
    for p in &points {
        let v = lambda.value(p)?;
        if !(v > 0.0) {
            return Err(Error::NonPositiveLambda { value: v, point: p.clone() });
        }
        vals.push(v);
    }
    let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let done = |verdict| Ok(Classification { verdict, samples: points.len(), seed });
    if hi - lo < CONSTANT_SPREAD {
        return done(ConformalVerdict::FlatConstant { value: vals[0] });
    }
    let fit = fit_inversion(&points, &vals)?;
    let a2: f64 = fit.a.iter().map(|c| c * c).sum();
    if !(fit.s > 0.0) {
        // no positive radius: report the linear misfit relative to |x|²
        let res = points
            .iter()
            .zip(&vals)
            .map(|(p, l)| {
                let lhs: f64 = p.iter().map(|c| c * c).sum();
                let rhs: f64 = 2.0 * (0..3).map(|i| fit.a[i] * p[i]).sum::<f64>() - fit.q + fit.s * l.powf(-0.25);
                (lhs - rhs).abs() / lhs.max(1.0)
            })
            .fold(0.0, f64::max);
        return done(ConformalVerdict::NonFlat {
            fit_residual: res.max(1.0),
            center_inside_box: false,
            detail: format!("fitted s = {:e} is not positive", fit.s),
        });
    }
    // relative misfit of λ against (s/|x−a|²)⁴
    let fit_residual = points
        .iter()
        .zip(&vals)
        .map(|(p, l)| {
            let d2: f64 = (0..3).map(|i| (p[i] - fit.a[i]).powi(2)).sum();
            ((fit.s / d2).powi(4) / l - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let constraint = (fit.q - a2).abs() / a2.max(1.0);
    let inside = domain.contains_closed(&fit.a);
    if fit_residual < fit_tol && constraint < fit_tol {
        if inside {
            return done(ConformalVerdict::NonFlat {
                fit_residual,
                center_inside_box: true,
                detail: "fitted centre lies in the box".into(),
            });
        }
        return done(ConformalVerdict::FlatInversion { a: fit.a, r: fit.s.sqrt(), fit_residual });
    }
    done(ConformalVerdict::NonFlat {
        fit_residual: fit_residual.max(constraint),
        center_inside_box: inside,
        detail: format!("inversion model misfit {:e}, |q − |a|²| = {:e}", fit_residual, constraint),
    })
}
