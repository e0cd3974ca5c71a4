//! D^k-valued pseudoconnections and ordinary pseudoconnections.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{lie_bracket, sup_norm, Peak, ScalarField, VectorField};
use crate::metric::{p_g, TwoMetric};
use crate::twoinner::minor;

type DkFn = dyn Fn(&[VectorField]) -> ScalarField + Send + Sync;

/// A map from `k` vector fields to a scalar field, evaluated lazily.
#[derive(Clone)]
pub struct DkElement {
    arity: usize,
    f: Arc<DkFn>,
}

impl fmt::Debug for DkElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DkElement(k={})", self.arity)
    }
}

impl DkElement {
    pub fn new(arity: usize, f: impl Fn(&[VectorField]) -> ScalarField + Send + Sync + 'static) -> Self {
        DkElement { arity, f: Arc::new(f) }
    }

    pub fn zero(arity: usize) -> Self {
        DkElement::new(arity, |_| ScalarField::zero())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn at(&self, args: &[VectorField]) -> ScalarField {
        assert_eq!(args.len(), self.arity, "DkElement arity");
        (self.f)(args)
    }

    pub fn at1(&self, z: &VectorField) -> ScalarField {
        self.at(std::slice::from_ref(z))
    }

    pub fn at2(&self, z: &VectorField, w: &VectorField) -> ScalarField {
        self.at(&[z.clone(), w.clone()])
    }

    /// `X(d)(X_1,…) = X(d(X_1,…))`.
    pub fn derive(&self, x: &VectorField) -> DkElement {
        let (d, x) = (self.clone(), x.clone());
        DkElement::new(self.arity, move |a| x.apply(&d.at(a)))
    }

    pub fn add(&self, o: &DkElement) -> DkElement {
        let (a, b) = (self.clone(), o.clone());
        DkElement::new(self.arity, move |s| a.at(s) + b.at(s))
    }

    pub fn sub(&self, o: &DkElement) -> DkElement {
        let (a, b) = (self.clone(), o.clone());
        DkElement::new(self.arity, move |s| a.at(s) - b.at(s))
    }

    pub fn scale(&self, phi: &ScalarField) -> DkElement {
        let (a, phi) = (self.clone(), phi.clone());
        DkElement::new(self.arity, move |s| &phi * &a.at(s))
    }

    pub fn scale_const(&self, c: f64) -> DkElement {
        self.scale(&ScalarField::constant(c))
    }
}

/// Sections a pseudoconnection acts on.
pub trait Section: Clone + Send + Sync + 'static {
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn scale(&self, phi: &ScalarField) -> Self;
}

impl Section for VectorField {
    fn add(&self, o: &Self) -> Self {
        VectorField::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        VectorField::sub(self, o)
    }
    fn scale(&self, phi: &ScalarField) -> Self {
        VectorField::scale(self, phi)
    }
}

impl Section for ScalarField {
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn scale(&self, phi: &ScalarField) -> Self {
        phi * self
    }
}

/// A C^∞-linear map from sections to D^k.
pub trait Homomorphism: Send + Sync {
    type Section: Section;
    fn arity(&self) -> usize;
    fn apply(&self, s: &Self::Section) -> DkElement;
}

pub type Hom<S> = Arc<dyn Homomorphism<Section = S>>;

/// `P^g`.
#[derive(Clone, Debug)]
pub struct MetricHom(pub TwoMetric);

impl Homomorphism for MetricHom {
    type Section = VectorField;
    fn arity(&self) -> usize {
        2
    }
    fn apply(&self, a: &VectorField) -> DkElement {
        p_g(&self.0, a)
    }
}

/// `P^h(X)(Y) = h(X,Y)` for a Riemannian `h`.
#[derive(Clone, Debug)]
pub struct InnerHom {
    h: Vec<Vec<ScalarField>>,
}

impl InnerHom {
    pub fn new(h: Vec<Vec<ScalarField>>) -> Self {
        InnerHom { h }
    }
}

/// `h(X,Y)` as a scalar field.
pub fn inner(h: &[Vec<ScalarField>], x: &VectorField, y: &VectorField) -> ScalarField {
    let mut acc = ScalarField::zero();
    for (i, row) in h.iter().enumerate() {
        for (j, hij) in row.iter().enumerate() {
            acc = acc + hij * &(x.component(i) * y.component(j));
        }
    }
    acc
}

impl Homomorphism for InnerHom {
    type Section = VectorField;
    fn arity(&self) -> usize {
        1
    }
    fn apply(&self, a: &VectorField) -> DkElement {
        let (h, a) = (self.h.clone(), a.clone());
        DkElement::new(1, move |s| inner(&h, &a, &s[0]))
    }
}

/// Line-bundle homomorphism `f ↦ f·d`.
#[derive(Clone, Debug)]
pub struct LineHom(pub DkElement);

impl Homomorphism for LineHom {
    type Section = ScalarField;
    fn arity(&self) -> usize {
        self.0.arity()
    }
    fn apply(&self, f: &ScalarField) -> DkElement {
        self.0.scale(f)
    }
}

/// Homomorphism given by a closure.
pub struct FnHom<S> {
    arity: usize,
    f: Arc<dyn Fn(&S) -> DkElement + Send + Sync>,
}

impl<S> FnHom<S> {
    pub fn new(arity: usize, f: impl Fn(&S) -> DkElement + Send + Sync + 'static) -> Self {
        FnHom { arity, f: Arc::new(f) }
    }
}

impl<S: Section> Homomorphism for FnHom<S> {
    type Section = S;
    fn arity(&self) -> usize {
        self.arity
    }
    fn apply(&self, s: &S) -> DkElement {
        (self.f)(s)
    }
}

/// `(X, s) ↦ ∇_X s ∈ D^k` with principal homomorphism `P`.
pub trait Pseudoconnection: Send + Sync {
    type Section: Section;
    fn arity(&self) -> usize;
    fn apply(&self, x: &VectorField, s: &Self::Section) -> DkElement;
    fn principal(&self, s: &Self::Section) -> DkElement;
}

pub type Conn<S> = Arc<dyn Pseudoconnection<Section = S>>;

/// The torsion-free compatible pseudoconnection of a symmetric homomorphism
/// on `TM`:
///
/// `∇_X Y(Z,…) = ½{X P(Y)(Z,…) + Y P(Z)(X,…) − Z P(X)(Y,…)
///               + P([X,Y])(Z,…) + P([Z,X])(Y,…) − P([Y,Z])(X,…)}`.
#[derive(Clone)]
pub struct LeviCivita {
    p: Hom<VectorField>,
}

impl LeviCivita {
    pub fn new(p: Hom<VectorField>) -> Self {
        LeviCivita { p }
    }
}

impl Pseudoconnection for LeviCivita {
    type Section = VectorField;

    fn arity(&self) -> usize {
        self.p.arity()
    }

    fn apply(&self, x: &VectorField, y: &VectorField) -> DkElement {
        let (p, x, y) = (self.p.clone(), x.clone(), y.clone());
        DkElement::new(self.p.arity(), move |args| {
            let z = &args[0];
            let rest = &args[1..];
            let with = |first: &VectorField| -> Vec<VectorField> {
                std::iter::once(first.clone()).chain(rest.iter().cloned()).collect()
            };
            let t1 = x.apply(&p.apply(&y).at(&with(z)));
            let t2 = y.apply(&p.apply(z).at(&with(&x)));
            let t3 = z.apply(&p.apply(&x).at(&with(&y)));
            let t4 = p.apply(&lie_bracket(&x, &y)).at(&with(z));
            let t5 = p.apply(&lie_bracket(z, &x)).at(&with(&y));
            let t6 = p.apply(&lie_bracket(&y, z)).at(&with(&x));
            (t1 + t2 - t3 + t4 + t5 - t6).scale(0.5)
        })
    }

    fn principal(&self, s: &VectorField) -> DkElement {
        self.p.apply(s)
    }
}

/// `∇^g`.
pub fn nabla_g(g: &TwoMetric) -> LeviCivita {
    LeviCivita::new(Arc::new(MetricHom(g.clone())))
}

/// The k=1 pseudoconnection of a Riemannian `h`, principal `P^h`.
pub fn nabla_h(h: Vec<Vec<ScalarField>>) -> LeviCivita {
    LeviCivita::new(Arc::new(InnerHom::new(h)))
}

/// `∂P_X s = X(P(s))`.
pub struct PartialP<S> {
    p: Hom<S>,
}

pub fn partial_p<S: Section>(p: Hom<S>) -> PartialP<S> {
    PartialP { p }
}

impl<S: Section> Pseudoconnection for PartialP<S> {
    type Section = S;
    fn arity(&self) -> usize {
        self.p.arity()
    }
    fn apply(&self, x: &VectorField, s: &S) -> DkElement {
        self.p.apply(s).derive(x)
    }
    fn principal(&self, s: &S) -> DkElement {
        self.p.apply(s)
    }
}

type ApplyFn<S> = dyn Fn(&VectorField, &S) -> DkElement + Send + Sync;

/// Pseudoconnection given by closures.
pub struct FnPseudoconnection<S> {
    arity: usize,
    apply: Arc<ApplyFn<S>>,
    principal: Hom<S>,
}

impl<S: Section> FnPseudoconnection<S> {
    pub fn new(
        principal: Hom<S>,
        apply: impl Fn(&VectorField, &S) -> DkElement + Send + Sync + 'static,
    ) -> Self {
        FnPseudoconnection { arity: principal.arity(), apply: Arc::new(apply), principal }
    }

    /// `∇ + T` for a bilinear `T`; the principal homomorphism is unchanged.
    pub fn perturbed(
        base: Conn<S>,
        t: impl Fn(&VectorField, &S) -> DkElement + Send + Sync + 'static,
    ) -> Self {
        let principal: Hom<S> = Arc::new(PrincipalOf(base.clone()));
        FnPseudoconnection::new(principal, move |x, s| base.apply(x, s).add(&t(x, s)))
    }
}

struct PrincipalOf<S>(Conn<S>);

impl<S: Section> Homomorphism for PrincipalOf<S> {
    type Section = S;
    fn arity(&self) -> usize {
        self.0.arity()
    }
    fn apply(&self, s: &S) -> DkElement {
        self.0.principal(s)
    }
}

/// The principal homomorphism of `nabla` as a standalone homomorphism.
pub fn principal_of<S: Section>(nabla: Conn<S>) -> Hom<S> {
    Arc::new(PrincipalOf(nabla))
}

impl<S: Section> Pseudoconnection for FnPseudoconnection<S> {
    type Section = S;
    fn arity(&self) -> usize {
        self.arity
    }
    fn apply(&self, x: &VectorField, s: &S) -> DkElement {
        (self.apply)(x, s)
    }
    fn principal(&self, s: &S) -> DkElement {
        self.principal.apply(s)
    }
}

type OmegaFn = dyn Fn(&VectorField) -> DkElement + Send + Sync;

/// Fundamental pseudoconnection on the trivial line bundle:
/// `∇_X f = X(f)·d + f·ω(X)`.
#[derive(Clone)]
pub struct FundamentalLine {
    dval: DkElement,
    omega: Arc<OmegaFn>,
}

impl FundamentalLine {
    pub fn new(dval: DkElement, omega: impl Fn(&VectorField) -> DkElement + Send + Sync + 'static) -> Self {
        FundamentalLine { dval, omega: Arc::new(omega) }
    }

    /// `ω = 0`.
    pub fn trivial(dval: DkElement) -> Self {
        let k = dval.arity();
        Self::new(dval, move |_| DkElement::zero(k))
    }

    /// `ω_d(X) = X(d)`.
    pub fn exact(dval: DkElement) -> Self {
        let d = dval.clone();
        Self::new(dval, move |x| d.derive(x))
    }
}

/// `X(f)·dval + f·ω(X)`.
pub fn fundamental_line(dval: &DkElement, omega: &OmegaFn, x: &VectorField, f: &ScalarField) -> DkElement {
    dval.scale(&x.apply(f)).add(&omega(x).scale(f))
}

impl Pseudoconnection for FundamentalLine {
    type Section = ScalarField;
    fn arity(&self) -> usize {
        self.dval.arity()
    }
    fn apply(&self, x: &VectorField, f: &ScalarField) -> DkElement {
        fundamental_line(&self.dval, &*self.omega, x, f)
    }
    fn principal(&self, f: &ScalarField) -> DkElement {
        self.dval.scale(f)
    }
}

fn with_first(first: &VectorField, rest: &[VectorField]) -> Vec<VectorField> {
    std::iter::once(first.clone()).chain(rest.iter().cloned()).collect()
}

/// `max |(∇_X Y − ∇_Y X − P([X,Y]))(slots)|`.
pub fn torsion_residual(
    nabla: &dyn Pseudoconnection<Section = VectorField>,
    x: &VectorField,
    y: &VectorField,
    slots: &[VectorField],
    points: &[Vec<f64>],
) -> Result<Peak> {
    let f = nabla.apply(x, y).at(slots) - nabla.apply(y, x).at(slots) - nabla.principal(&lie_bracket(x, y)).at(slots);
    sup_norm(&f, points)
}

/// `max |X(P(Y)(X₁,…)) − ∇_X Y(X₁,…) − ∇_X X₁(Y,…)|`.
pub fn compatibility_residual(
    nabla: &dyn Pseudoconnection<Section = VectorField>,
    x: &VectorField,
    y: &VectorField,
    x1: &VectorField,
    rest: &[VectorField],
    points: &[Vec<f64>],
) -> Result<Peak> {
    let a = with_first(x1, rest);
    let b = with_first(y, rest);
    let f = x.apply(&nabla.principal(y).at(&a)) - nabla.apply(x, y).at(&a) - nabla.apply(x, x1).at(&b);
    sup_norm(&f, points)
}

/// `max |P(X)(X₁,…) − P(X₁)(X,…)|`.
pub fn symmetry_residual(
    p: &dyn Homomorphism<Section = VectorField>,
    x: &VectorField,
    x1: &VectorField,
    rest: &[VectorField],
    points: &[Vec<f64>],
) -> Result<Peak> {
    let f = p.apply(x).at(&with_first(x1, rest)) - p.apply(x1).at(&with_first(x, rest));
    sup_norm(&f, points)
}

/// Module rules: `∇_{φX}s − φ∇_X s` and `∇_X(φs) − X(φ)P(s) − φ∇_X s`.
pub fn module_rule_residuals<S: Section>(
    nabla: &dyn Pseudoconnection<Section = S>,
    x: &VectorField,
    s: &S,
    phi: &ScalarField,
    slots: &[VectorField],
    points: &[Vec<f64>],
) -> Result<(Peak, Peak)> {
    let base = nabla.apply(x, s).at(slots);
    let first = nabla.apply(&x.scale(phi), s).at(slots) - phi * &base;
    let second = nabla.apply(x, &s.scale(phi)).at(slots)
        - &x.apply(phi) * &nabla.principal(s).at(slots)
        - phi * &base;
    Ok((sup_norm(&first, points)?, sup_norm(&second, points)?))
}

/// ℝ-bilinearity: `∇_{X+X'}s − ∇_X s − ∇_{X'}s` and `∇_X(s+s') − ∇_X s − ∇_X s'`.
pub fn bilinearity_residuals<S: Section>(
    nabla: &dyn Pseudoconnection<Section = S>,
    x: &VectorField,
    x2: &VectorField,
    s: &S,
    s2: &S,
    slots: &[VectorField],
    points: &[Vec<f64>],
) -> Result<(Peak, Peak)> {
    let a = nabla.apply(&x.add(x2), s).at(slots) - nabla.apply(x, s).at(slots) - nabla.apply(x2, s).at(slots);
    let b = nabla.apply(x, &s.add(s2)).at(slots) - nabla.apply(x, s).at(slots) - nabla.apply(x, s2).at(slots);
    Ok((sup_norm(&a, points)?, sup_norm(&b, points)?))
}

/// D^k_0 membership: `d(φZ, …) − φ d(Z, …)`.
pub fn first_slot_linearity(d: &DkElement, phi: &ScalarField, slots: &[VectorField], points: &[Vec<f64>]) -> Result<Peak> {
    let scaled = with_first(&slots[0].scale(phi), &slots[1..]);
    sup_norm(&(d.at(&scaled) - phi * &d.at(slots)), points)
}

/// Vector-valued `(X, Y) ↦ θ_X Y`.
pub trait OrdinaryPseudoconnection: Send + Sync {
    fn apply(&self, x: &VectorField, y: &VectorField) -> VectorField;
}

pub type Ordinary = Arc<dyn OrdinaryPseudoconnection>;

/// `θ_X Y = (X(Y_1), …, X(Y_n))`.
#[derive(Clone, Copy, Debug, Default)]
pub struct FlatConnection;

impl OrdinaryPseudoconnection for FlatConnection {
    fn apply(&self, x: &VectorField, y: &VectorField) -> VectorField {
        x.apply_vector(y)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroConnection;

impl OrdinaryPseudoconnection for ZeroConnection {
    fn apply(&self, x: &VectorField, _: &VectorField) -> VectorField {
        VectorField::zero(x.dim())
    }
}

/// Ordinary pseudoconnection given by a closure.
pub struct FnOrdinary(pub Arc<dyn Fn(&VectorField, &VectorField) -> VectorField + Send + Sync>);

impl OrdinaryPseudoconnection for FnOrdinary {
    fn apply(&self, x: &VectorField, y: &VectorField) -> VectorField {
        (self.0)(x, y)
    }
}

/// Symbolic inverse of a 2×2 or 3×3 matrix of fields.
pub fn inverse_matrix(h: &[Vec<ScalarField>]) -> Result<Vec<Vec<ScalarField>>> {
    let n = h.len();
    let m = |i: usize, j: usize| h[i][j].clone();
    match n {
        2 => {
            let det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
            let adj = [[m(1, 1), -m(0, 1)], [-m(1, 0), m(0, 0)]];
            Ok(adj.iter().map(|r| r.iter().map(|e| e.div(&det)).collect()).collect())
        }
        3 => {
            let cof = |i: usize, j: usize| {
                let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
                let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
                m(r0, c0) * m(r1, c1) - m(r0, c1) * m(r1, c0)
            };
            let det = (0..3).fold(ScalarField::zero(), |acc, j| acc + m(0, j) * cof(0, j));
            // inverse = adjugate / det, adj[i][j] = cof(j, i)
            Ok((0..3).map(|i| (0..3).map(|j| cof(j, i).div(&det)).collect()).collect())
        }
        _ => Err(Error::Invalid(format!("matrix inverse in dimension {n}"))),
    }
}

/// Riemannian (Levi-Civita) connection of `h`, via Christoffel symbols.
#[derive(Clone, Debug)]
pub struct RiemannianConnection {
    /// `gamma[k][i][j] = Γ^k_ij`.
    gamma: Vec<Vec<Vec<ScalarField>>>,
}

impl RiemannianConnection {
    pub fn new(h: &[Vec<ScalarField>]) -> Result<Self> {
        let n = h.len();
        let hinv = inverse_matrix(h)?;
        let d = |l: usize, f: &ScalarField| VectorField::basis(n, l).apply(f);
        let mut gamma = vec![vec![vec![ScalarField::zero(); n]; n]; n];
        for (k, gk) in gamma.iter_mut().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    let mut acc = ScalarField::zero();
                    for l in 0..n {
                        let t = d(i, &h[j][l]) + d(j, &h[i][l]) - d(l, &h[i][j]);
                        acc = acc + &hinv[k][l] * &t;
                    }
                    gk[i][j] = acc.scale(0.5);
                }
            }
        }
        Ok(RiemannianConnection { gamma })
    }

    pub fn christoffel(&self, k: usize, i: usize, j: usize) -> &ScalarField {
        &self.gamma[k][i][j]
    }
}

impl OrdinaryPseudoconnection for RiemannianConnection {
    fn apply(&self, x: &VectorField, y: &VectorField) -> VectorField {
        let n = x.dim();
        let base = x.apply_vector(y);
        VectorField::new(
            (0..n)
                .map(|k| {
                    let mut acc = base.component(k).clone();
                    for i in 0..n {
                        for j in 0..n {
                            acc = acc + &self.gamma[k][i][j] * &(x.component(i) * y.component(j));
                        }
                    }
                    acc
                })
                .collect(),
        )
    }
}

/// `θ̄_X Y = θ_X Y + (X(λ)/(4λ))·Y`.
#[derive(Clone)]
pub struct ConformalShift {
    theta: Ordinary,
    lambda: ScalarField,
}

pub fn conformal_shift(theta: Ordinary, lambda: ScalarField) -> ConformalShift {
    ConformalShift { theta, lambda }
}

impl OrdinaryPseudoconnection for ConformalShift {
    fn apply(&self, x: &VectorField, y: &VectorField) -> VectorField {
        let c = x.apply(&self.lambda).div(&self.lambda.scale(4.0));
        self.theta.apply(x, y).add(&y.scale(&c))
    }
}

/// `θ_{e_1}(x_1·Y) − x_1·θ_{e_1}Y`, which equals `P(Y)` for the principal
/// homomorphism `P` of `θ`.
pub fn principal_probe(theta: &dyn OrdinaryPseudoconnection, y: &VectorField) -> VectorField {
    let n = y.dim();
    let e1 = VectorField::basis(n, 0);
    let x1 = ScalarField::coord(0);
    theta.apply(&e1, &y.scale(&x1)).sub(&theta.apply(&e1, y).scale(&x1))
}

/// `X g(Y,Y/Z) − 2g(θ_X Y, Y/Z) − 2g(θ_X Z, Z/Y)`.
pub fn adapted_field(
    theta: &dyn OrdinaryPseudoconnection,
    g: &TwoMetric,
    x: &VectorField,
    y: &VectorField,
    z: &VectorField,
) -> ScalarField {
    x.apply(&g.g(y, y, z)) - g.g(&theta.apply(x, y), y, z).scale(2.0) - g.g(&theta.apply(x, z), z, y).scale(2.0)
}

pub fn adapted_residual(
    theta: &dyn OrdinaryPseudoconnection,
    g: &TwoMetric,
    x: &VectorField,
    y: &VectorField,
    z: &VectorField,
    points: &[Vec<f64>],
) -> Result<Peak> {
    sup_norm(&adapted_field(theta, g, x, y, z), points)
}

/// Four-slot identity:
/// `X g(Y,Z/W) = g(θ_X Y,Z/W) + g(Y,θ_X Z/W) + g(θ_X W,W/Y+Z) − g(θ_X W,W/Y) − g(θ_X W,W/Z)`.
pub fn adapted_four_slot_residual(
    theta: &dyn OrdinaryPseudoconnection,
    g: &TwoMetric,
    x: &VectorField,
    y: &VectorField,
    z: &VectorField,
    w: &VectorField,
    points: &[Vec<f64>],
) -> Result<Peak> {
    let tw = theta.apply(x, w);
    let f = x.apply(&g.g(y, z, w))
        - g.g(&theta.apply(x, y), z, w)
        - g.g(y, &theta.apply(x, z), w)
        - g.g(&tw, w, &y.add(z))
        + g.g(&tw, w, y)
        + g.g(&tw, w, z);
    sup_norm(&f, points)
}

/// Pointwise series of the split `∇^g = g*θ + Ω^{g,θ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComputaSplit {
    pub g_star_theta: Vec<f64>,
    pub omega_part: Vec<f64>,
    pub direct: Vec<f64>,
}

impl ComputaSplit {
    pub fn max_mismatch(&self) -> f64 {
        self.g_star_theta
            .iter()
            .zip(&self.omega_part)
            .zip(&self.direct)
            .map(|((a, b), d)| (a + b - d).abs())
            .fold(0.0, f64::max)
    }
}

/// Tolerance for the torsion-free and adapted preconditions.
pub const PRECONDITION_TOL: f64 = 1e-8;

/// `Ω^{g,θ}_X Y(Z,W)`.
pub fn omega_field(
    g: &TwoMetric,
    theta: &dyn OrdinaryPseudoconnection,
    x: &VectorField,
    y: &VectorField,
    z: &VectorField,
    w: &VectorField,
) -> ScalarField {
    let t = |a: &VectorField| theta.apply(a, w);
    let terms = g.g(&t(&z.sub(x)), w, y) - g.g(&t(&x.add(y)), w, z)
        + g.g(&t(&z.sub(y)), w, x)
        + g.g(&t(x), w, &y.add(z))
        + g.g(&t(y), w, &x.add(z))
        - g.g(&t(z), w, &x.add(y));
    terms.scale(0.5)
}

pub fn computa_split(
    g: &TwoMetric,
    theta: &dyn OrdinaryPseudoconnection,
    x: &VectorField,
    y: &VectorField,
    z: &VectorField,
    w: &VectorField,
    points: &[Vec<f64>],
) -> Result<ComputaSplit> {
    let fields = [x, y, z, w];
    for (i, a) in fields.iter().enumerate() {
        for b in &fields[i + 1..] {
            let tor = theta.apply(a, b).sub(&theta.apply(b, a)).sub(&lie_bracket(a, b));
            for c in tor.components() {
                let r = sup_norm(c, points)?;
                if r.value > PRECONDITION_TOL {
                    return Err(Error::PreconditionFailed(format!("θ has torsion {:e}", r.value)));
                }
            }
        }
    }
    for a in fields {
        for b in fields {
            for c in fields {
                let r = adapted_residual(theta, g, a, b, c, points)?;
                if r.value > PRECONDITION_TOL {
                    return Err(Error::PreconditionFailed(format!("θ is not adapted ({:e})", r.value)));
                }
            }
        }
    }
    let gs = g.g(&theta.apply(x, y), z, w);
    let om = omega_field(g, theta, x, y, z, w);
    let direct = nabla_g(g).apply(x, y).at2(z, w);
    let series = |f: &ScalarField| points.iter().map(|p| f.value(p)).collect::<Result<Vec<f64>>>();
    Ok(ComputaSplit { g_star_theta: series(&gs)?, omega_part: series(&om)?, direct: series(&direct)? })
}

/// Closed-form `∇^{g^st}_X Y(Z,W)` in ℝ² as a sum of 2×2 determinants.
pub fn nabla_gst_r2(x: &VectorField, y: &VectorField, z: &VectorField, w: &VectorField, p: &[f64]) -> Result<f64> {
    if x.dim() != 2 || p.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: p.len() });
    }
    let v = |f: &VectorField| f.value(p);
    let d = |a: &[f64], b: &[f64]| minor(a, b, 0, 1);
    let th = |a: &VectorField, b: &VectorField| v(&a.apply_vector(b));
    let (xv, yv, zv, wv) = (v(x)?, v(y)?, v(z)?, v(w)?);
    let sum = |a: &[f64], b: &[f64]| [a[0] + b[0], a[1] + b[1]];
    let (ypz, xpz, xpy) = (sum(&yv, &zv), sum(&xv, &zv), sum(&xv, &yv));
    let main = d(&zv, &wv) * d(&th(x, y)?, &wv);
    let half = d(&wv, &ypz) * d(&th(x, w)?, &ypz) + d(&wv, &xpz) * d(&th(y, w)?, &xpz)
        - d(&wv, &xpy) * d(&th(z, w)?, &xpy)
        + d(&wv, &yv) * d(&th(&z.sub(x), w)?, &yv)
        - d(&wv, &zv) * d(&th(&x.add(y), w)?, &zv)
        + d(&wv, &xv) * d(&th(&z.sub(y), w)?, &xv);
    Ok(main + 0.5 * half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::BoxDomain;

    const XY: [&str; 2] = ["x", "y"];

    fn vf(a: &str, b: &str) -> VectorField {
        VectorField::parse(&[a, b], &XY).unwrap()
    }

    fn pts() -> Vec<Vec<f64>> {
        BoxDomain::cube(2, -1.0, 1.0).random_points(10, 5)
    }

    #[test]
    fn nabla_g_examples() {
        let g = TwoMetric::standard(2);
        let n = nabla_g(&g);
        let (e1, e2) = (vf("1", "0"), vf("0", "1"));
        let c = n.apply(&vf("2", "3"), &vf("-1", "0.5")).at2(&vf("1", "1"), &e1);
        assert_eq!(c.value(&[0.2, 0.3]).unwrap(), 0.0);
        let v = n.apply(&e1, &vf("0", "x")).at2(&e2, &e1);
        for p in pts() {
            assert!((v.value(&p).unwrap() - 1.0).abs() < 1e-14);
            assert!((nabla_gst_r2(&e1, &vf("0", "x"), &e2, &e1, &p).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn partial_p_is_not_torsion_free() {
        let g = TwoMetric::standard(2);
        let dp = partial_p::<VectorField>(Arc::new(MetricHom(g)));
        let (e1, e2) = (vf("1", "0"), vf("0", "1"));
        let r = torsion_residual(&dp, &vf("2", "1"), &vf("0", "3"), &[e1.clone(), e2.clone()], &pts()).unwrap();
        assert_eq!(r.value, 0.0);
        // with constant slots g(·,Z/W) is closed and the torsion vanishes
        let r = torsion_residual(&dp, &e1, &vf("0", "x"), &[vf("0", "y"), vf("1", "1")], &pts()).unwrap();
        assert!(r.value > 0.1, "{r:?}");
    }

    #[test]
    fn fundamental_line_example() {
        let g = TwoMetric::standard(2);
        let (e1, e2) = (vf("1", "0"), vf("0", "1"));
        let d = p_g(&g, &e1);
        let l = FundamentalLine::trivial(d.clone());
        let out = l.apply(&e1, &ScalarField::coord(0)).at2(&e1, &e2);
        let want = d.at2(&e1, &e2);
        for p in pts() {
            assert_eq!(out.value(&p).unwrap(), want.value(&p).unwrap());
        }
        let c = l.apply(&vf("x", "y^2"), &ScalarField::constant(3.0)).at2(&e1, &e2);
        assert_eq!(c.value(&[0.4, 0.1]).unwrap(), 0.0);
    }

    #[test]
    fn adapted_examples() {
        let g = TwoMetric::standard(2);
        let (e1, y) = (vf("1", "0"), vf("0", "x"));
        let r = adapted_residual(&FlatConnection, &g, &vf("x*y", "1"), &vf("y^2", "x"), &vf("1", "x - y"), &pts())
            .unwrap();
        assert!(r.value < 1e-9);
        let r = adapted_residual(&ZeroConnection, &g, &e1, &y, &e1, &pts()).unwrap();
        assert!(r.value > 0.1);
    }

    #[test]
    fn conformal_shift_example() {
        let lambda = ScalarField::parse("exp(x)", &XY).unwrap();
        let t = conformal_shift(Arc::new(FlatConnection), lambda);
        let v = t.apply(&vf("1", "0"), &vf("0", "1")).value(&[0.3, -0.2]).unwrap();
        assert!(v[0].abs() < 1e-15 && (v[1] - 0.25).abs() < 1e-15);
        let same = conformal_shift(Arc::new(FlatConnection), ScalarField::constant(2.0));
        let (x, y) = (vf("x", "y^2"), vf("sin(y)", "x"));
        let d = same.apply(&x, &y).sub(&FlatConnection.apply(&x, &y));
        assert!(d.value(&[0.1, 0.2]).unwrap().iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn computa_example() {
        let g = TwoMetric::standard(2);
        let (e1, e2) = (vf("1", "0"), vf("0", "1"));
        let s = computa_split(&g, &FlatConnection, &e1, &vf("0", "x"), &e2, &e1, &pts()).unwrap();
        for ((a, b), d) in s.g_star_theta.iter().zip(&s.omega_part).zip(&s.direct) {
            assert!((a + b - 1.0).abs() < 1e-14 && (d - 1.0).abs() < 1e-14);
        }
        let c = computa_split(&g, &FlatConnection, &e1, &e2, &vf("1", "1"), &e1, &pts()).unwrap();
        assert!(c.g_star_theta.iter().chain(&c.omega_part).chain(&c.direct).all(|v| *v == 0.0));
        let bad = computa_split(&g, &ZeroConnection, &e1, &vf("0", "x"), &e2, &e1, &pts());
        assert!(matches!(bad, Err(Error::PreconditionFailed(_))));
    }
}
