//! Pointwise 2-inner products.
//!
//! Formulas are generic over [`Scalar`] so the metric layer can evaluate them
//! on jets; the `f64` instances are the pointwise API.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jets::Scalar;

pub const DEFAULT_SEED: u64 = 42;

fn dot<S: Scalar>(h: &[S], n: usize, a: &[S], b: &[S]) -> S {
    let mut acc = S::zero();
    for i in 0..n {
        for j in 0..n {
            acc = acc + h[i * n + j] * a[i] * b[j];
        }
    }
    acc
}

/// `h(u,v)h(w,w) − h(u,w)h(v,w)` with `h` row-major `n×n`. No validation.
pub fn simple_value<S: Scalar>(h: &[S], u: &[S], v: &[S], w: &[S]) -> S {
    let n = u.len();
    dot(h, n, u, v) * dot(h, n, w, w) - dot(h, n, u, w) * dot(h, n, v, w)
}

/// Symmetric (to 1e-12) and Cholesky-factorizable.
pub fn check_spd(h: &DMatrix<f64>) -> Result<()> {
    if !h.is_square() {
        return Err(Error::NotSpd(format!("{}x{} matrix", h.nrows(), h.ncols())));
    }
    let scale = h.amax().max(1.0);
    for i in 0..h.nrows() {
        for j in 0..i {
            if (h[(i, j)] - h[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::NotSpd(format!("asymmetric at ({i},{j})")));
            }
        }
    }
    if h.iter().any(|x| !x.is_finite()) || h.clone().cholesky().is_none() {
        return Err(Error::NotSpd("not positive definite".into()));
    }
    Ok(())
}

/// The simple 2-inner product generated by `h`.
pub fn simple_from_inner(h: &DMatrix<f64>, u: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
    check_spd(h)?;
    let n = h.nrows();
    if [u.len(), v.len(), w.len()].iter().any(|&k| k != n) {
        return Err(Error::DimensionMismatch { expected: n, found: u.len() });
    }
    let flat: Vec<f64> = (0..n * n).map(|k| h[(k / n, k % n)]).collect();
    Ok(simple_value(&flat, u, v, w))
}

/// `det [[a_i, b_i], [a_j, b_j]]`.
pub fn minor<S: Scalar>(a: &[S], b: &[S], i: usize, j: usize) -> S {
    a[i] * b[j] - b[i] * a[j]
}

/// Dimension 2: `det(α|γ)·det(β|γ)·g(e1,e1/e2)`.
pub fn expand_dim2<S: Scalar>(alpha: &[S], beta: &[S], gamma: &[S], base: S) -> S {
    minor(alpha, gamma, 0, 1) * minor(beta, gamma, 0, 1) * base
}

/// The nine basis values of a 3-dimensional 2-inner product.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisTable3<S> {
    /// `diag[i][j] = g(e_i,e_i/e_j)`, `i ≠ j`; the diagonal is unused.
    pub diag: [[S; 3]; 3],
    /// `mixed[k] = g(e_i,e_j/e_k)` for `{i,j,k} = {1,2,3}`.
    pub mixed: [S; 3],
}

impl<S: Scalar> BasisTable3<S> {
    /// Order: g112, g113, g221, g223, g331, g332, g123, g132, g231.
    pub fn from_array(a: [S; 9]) -> Self {
        let z = S::zero();
        BasisTable3 {
            diag: [[z, a[0], a[1]], [a[2], z, a[3]], [a[4], a[5], z]],
            mixed: [a[8], a[7], a[6]],
        }
    }

    pub fn to_array(&self) -> [S; 9] {
        let d = &self.diag;
        [d[0][1], d[0][2], d[1][0], d[1][2], d[2][0], d[2][1], self.mixed[2], self.mixed[1], self.mixed[0]]
    }

    /// `g(e_i, e_j / e_k)` for any indices.
    pub fn entry(&self, i: usize, j: usize, k: usize) -> S {
        if i == k || j == k {
            S::zero()
        } else if i == j {
            self.diag[i][k]
        } else {
            self.mixed[3 - i - j]
        }
    }
}

impl BasisTable3<f64> {
    /// `δ_ijk` table of the standard metric.
    pub fn standard() -> Self {
        Self::from_array([1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    }
}

/// Dimension 3 expansion over the basis table.
pub fn expand_dim3<S: Scalar>(alpha: &[S], beta: &[S], gamma: &[S], t: &BasisTable3<S>) -> S {
    let mut diag = S::zero();
    let mut mixed = S::zero();
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                continue;
            }
            diag = diag + minor(alpha, gamma, i, j) * minor(beta, gamma, i, j) * t.diag[i][j];
            let k = 3 - i - j;
            mixed = mixed + minor(alpha, gamma, i, k) * minor(beta, gamma, j, k) * t.mixed[k];
        }
    }
    diag.scale(0.5) + mixed
}

/// A 2-inner product on a fixed vector space.
pub trait TwoInner: Sync {
    fn dim(&self) -> usize;
    /// `g(u,v/w)`; NaN signals an evaluation failure.
    fn eval(&self, u: &[f64], v: &[f64], w: &[f64]) -> f64;
}

/// Simple product with a validated `h`.
#[derive(Clone, Debug)]
pub struct SimpleInner {
    h: DMatrix<f64>,
}

impl SimpleInner {
    pub fn new(h: DMatrix<f64>) -> Result<Self> {
        check_spd(&h)?;
        Ok(SimpleInner { h })
    }

    pub fn identity(n: usize) -> Self {
        SimpleInner { h: DMatrix::identity(n, n) }
    }
}

impl TwoInner for SimpleInner {
    fn dim(&self) -> usize {
        self.h.nrows()
    }

    fn eval(&self, u: &[f64], v: &[f64], w: &[f64]) -> f64 {
        let n = self.dim();
        let flat: Vec<f64> = (0..n * n).map(|k| self.h[(k / n, k % n)]).collect();
        simple_value(&flat, u, v, w)
    }
}

/// Dimension-2 product determined by `g(e1,e1/e2)`.
#[derive(Clone, Copy, Debug)]
pub struct Table2(pub f64);

impl TwoInner for Table2 {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, u: &[f64], v: &[f64], w: &[f64]) -> f64 {
        expand_dim2(u, v, w, self.0)
    }
}

impl TwoInner for BasisTable3<f64> {
    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, u: &[f64], v: &[f64], w: &[f64]) -> f64 {
        expand_dim3(u, v, w, self)
    }
}

/// Maximum residual per axiom, from randomized trials.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AxiomReport {
    pub trials: usize,
    pub seed: u64,
    /// `max(0, −g(u,u/v))`.
    pub nonnegativity: f64,
    /// `|g(u,u/cu)|` on dependent pairs.
    pub degeneracy: f64,
    /// Independent pairs with `g(u,u/v) ≤ 0`.
    pub independent_nonpositive: usize,
    /// `|g(u,u/v) − g(v,v/u)|`.
    pub swap: f64,
    /// `|g(u,v/w) − g(v,u/w)|`.
    pub symmetry: f64,
    /// `|g(au+bu',v/w) − a g(u,v/w) − b g(u',v/w)|`.
    pub linearity: f64,
    /// `|g(u,v/u)|`.
    pub third_slot_zero: f64,
    /// `|g(u,u/v) + g(u,v/u+v)|`.
    pub polarization: f64,
    /// `|g(u,v/αw) − α² g(u,v/w)|`.
    pub homogeneity: f64,
}

impl AxiomReport {
    pub fn max_residual(&self) -> f64 {
        let r = [
            self.nonnegativity,
            self.degeneracy,
            self.swap,
            self.symmetry,
            self.linearity,
            self.third_slot_zero,
            self.polarization,
            self.homogeneity,
        ];
        if r.iter().any(|x| x.is_nan()) {
            return f64::INFINITY;
        }
        r.into_iter().fold(0.0, f64::max)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_residual() < tol && self.independent_nonpositive == 0
    }
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// Randomized check of the 2-inner product axioms.
pub fn check_axioms(g: &dyn TwoInner, trials: usize, seed: u64) -> AxiomReport {
    let n = g.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vec = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    let mut r = AxiomReport { trials, seed, ..Default::default() };
    for _ in 0..trials.max(1) {
        let u = vec(&mut rng);
        let u2 = vec(&mut rng);
        let v = vec(&mut rng);
        let w = vec(&mut rng);
        let (a, b): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let c: f64 = rng.gen_range(-3.0..3.0);

        let guv = g.eval(&u, &u, &v);
        r.nonnegativity = nan_max(r.nonnegativity, (-guv).max(0.0));
        let cu: Vec<f64> = u.iter().map(|x| c * x).collect();
        r.degeneracy = nan_max(r.degeneracy, g.eval(&u, &u, &cu).abs());
        let wedge: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i < j)
            .map(|(i, j)| minor(&u, &v, i, j).powi(2))
            .sum();
        if wedge > 1e-2 && !(guv > 0.0) {
            r.independent_nonpositive += 1;
        }
        r.swap = nan_max(r.swap, (guv - g.eval(&v, &v, &u)).abs());
        r.symmetry = nan_max(r.symmetry, (g.eval(&u, &v, &w) - g.eval(&v, &u, &w)).abs());
        let comb: Vec<f64> = u.iter().zip(&u2).map(|(x, y)| a * x + b * y).collect();
        let lin = g.eval(&comb, &v, &w) - a * g.eval(&u, &v, &w) - b * g.eval(&u2, &v, &w);
        r.linearity = nan_max(r.linearity, lin.abs());
        r.third_slot_zero = nan_max(r.third_slot_zero, g.eval(&u, &v, &u).abs());
        let upv: Vec<f64> = u.iter().zip(&v).map(|(x, y)| x + y).collect();
        r.polarization = nan_max(r.polarization, (guv + g.eval(&u, &v, &upv)).abs());
        for alpha in [-2.0, 0.5, 3.0] {
            let aw: Vec<f64> = w.iter().map(|x| alpha * x).collect();
            let h = g.eval(&u, &v, &aw) - alpha * alpha * g.eval(&u, &v, &w);
            r.homogeneity = nan_max(r.homogeneity, h.abs());
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn simple_examples() {
        let i3 = DMatrix::identity(3, 3);
        assert_eq!(simple_from_inner(&i3, &e(3, 0), &e(3, 0), &e(3, 1)).unwrap(), 1.0);
        assert_eq!(simple_from_inner(&i3, &e(3, 0), &e(3, 1), &e(3, 2)).unwrap(), 0.0);
        let i2 = DMatrix::identity(2, 2);
        assert_eq!(simple_from_inner(&i2, &[1.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn not_spd() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(check_spd(&asym), Err(Error::NotSpd(_))));
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(check_spd(&indef), Err(Error::NotSpd(_))));
    }

    #[test]
    fn expansion_examples() {
        assert_eq!(expand_dim2(&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], 1.0), 1.0);
        assert_eq!(expand_dim2(&[2.0, 1.0], &[1.0, 3.0], &[2.0, 1.0], 1.0), 0.0);
        let i2 = DMatrix::identity(2, 2);
        let (a, b, c) = ([2.0, 1.0], [1.0, 3.0], [0.0, 1.0]);
        assert_eq!(expand_dim2(&a, &b, &c, 1.0), 2.0);
        assert_eq!(simple_from_inner(&i2, &a, &b, &c).unwrap(), 2.0);

        let t = BasisTable3::standard();
        assert_eq!(expand_dim3(&e(3, 0), &e(3, 1), &e(3, 2), &t), 0.0);
        let raw = [2.0, 3.0, 2.0, 7.0, 3.0, 7.0, 0.1, 0.2, 0.3];
        let t = BasisTable3::from_array(raw);
        assert_eq!(t.to_array(), raw);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let v = expand_dim3(&e(3, i), &e(3, j), &e(3, k), &t);
                    assert!((v - t.entry(i, j, k)).abs() < 1e-14, "{i}{j}{k}");
                }
            }
        }
    }

    #[test]
    fn axioms_for_identity_and_corrupted_table() {
        let r = check_axioms(&SimpleInner::identity(2), 200, DEFAULT_SEED);
        assert!(r.passed(1e-10), "{r:?}");
        let mut t = BasisTable3::standard();
        t.diag[0][1] = -1.0;
        t.diag[1][0] = -1.0;
        let r = check_axioms(&t, 200, DEFAULT_SEED);
        assert!(r.nonnegativity > 0.0);
        assert!(!r.passed(1e-10));
    }

    #[test]
    fn third_slot_scaling() {
        let g = SimpleInner::identity(3);
        let (u, v, w) = ([0.3, -1.0, 2.0], [1.0, 0.5, 0.0], [0.2, 0.1, -0.7]);
        let w2: Vec<f64> = w.iter().map(|x| 2.0 * x).collect();
        assert!((g.eval(&u, &v, &w2) - 4.0 * g.eval(&u, &v, &w)).abs() < 1e-14);
    }
}
