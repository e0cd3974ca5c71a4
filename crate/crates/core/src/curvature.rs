//! Curvature of pseudoconnections, its properties, Koszul comparison and
//! obstruction diagnostics, and invariance under 2-isometries.

use serde::Serialize;

use crate::connection::{
    inner, nabla_g, nabla_h, partial_p, Conn, DkElement, Hom, MetricHom, OrdinaryPseudoconnection, Pseudoconnection,
    RiemannianConnection, Section,
};
use crate::error::{Error, Result};
use crate::fields::{df_two_form, lie_bracket, sup_norm, Peak, ScalarField, VectorField};
use crate::metric::{p_g, pullback_metric, table3_order, Diffeo, TwoMetric};

/// `R(X,Y)s = X(∇_Y s) − Y(∇_X s) − ∇_{[X,Y]}s`.
pub fn curvature<S: Section>(
    nabla: &dyn Pseudoconnection<Section = S>,
    x: &VectorField,
    y: &VectorField,
    s: &S,
) -> DkElement {
    let a = nabla.apply(y, s).derive(x);
    let b = nabla.apply(x, s).derive(y);
    let c = nabla.apply(&lie_bracket(x, y), s);
    a.sub(&b).sub(&c)
}

/// `∂∇(X, s) = X(P(s)) − ∇_X s`.
pub fn partial_nabla<S: Section>(nabla: &dyn Pseudoconnection<Section = S>, x: &VectorField, s: &S) -> DkElement {
    nabla.principal(s).derive(x).sub(&nabla.apply(x, s))
}

/// Max residuals of the curvature properties. `trilinearity` covers (1).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyReport {
    pub trilinearity: f64,
    pub antisymmetry: f64,
    pub function_linearity: f64,
    pub leibniz: f64,
    pub bianchi: f64,
}

impl PropertyReport {
    pub fn zero() -> Self {
        PropertyReport { trilinearity: 0.0, antisymmetry: 0.0, function_linearity: 0.0, leibniz: 0.0, bianchi: 0.0 }
    }

    pub fn merge(&self, o: &PropertyReport) -> PropertyReport {
        PropertyReport {
            trilinearity: self.trilinearity.max(o.trilinearity),
            antisymmetry: self.antisymmetry.max(o.antisymmetry),
            function_linearity: self.function_linearity.max(o.function_linearity),
            leibniz: self.leibniz.max(o.leibniz),
            bianchi: self.bianchi.max(o.bianchi),
        }
    }

    /// Largest residual among properties (2)–(5).
    pub fn max_structural(&self) -> f64 {
        self.antisymmetry.max(self.function_linearity).max(self.leibniz).max(self.bianchi)
    }
}

/// Inputs for one property sweep on the tangent bundle.
#[derive(Clone, Debug)]
pub struct PropertyInputs {
    pub x: VectorField,
    pub y: VectorField,
    pub z: VectorField,
    /// Second field for the additivity checks.
    pub x2: VectorField,
    pub f: ScalarField,
    pub slots: Vec<VectorField>,
}

/// Residuals of (1)–(5) for a torsion-free pseudoconnection of `TM`.
pub fn property_suite(
    nabla: &dyn Pseudoconnection<Section = VectorField>,
    inp: &PropertyInputs,
    points: &[Vec<f64>],
) -> Result<PropertyReport> {
    let PropertyInputs { x, y, z, x2, f, slots } = inp;
    let r = |a: &VectorField, b: &VectorField, s: &VectorField| curvature(nabla, a, b, s).at(slots);
    let pn = |a: &VectorField, s: &VectorField| partial_nabla(nabla, a, s).at(slots);
    let rxy = r(x, y, z);
    let sup = |g: ScalarField| sup_norm(&g, points).map(|p| p.value);

    // (1): additivity in each slot and real homogeneity
    let tri = [
        r(&x.add(x2), y, z) - &rxy - r(x2, y, z),
        r(x, &y.add(x2), z) - &rxy - r(x, x2, z),
        r(x, y, &z.add(x2)) - &rxy - r(x, y, x2),
        r(&x.scale_const(2.5), y, z) - rxy.scale(2.5),
        r(x, y, &z.scale_const(-1.5)) - rxy.scale(-1.5),
    ];
    let mut trilinearity = 0.0f64;
    for t in tri {
        trilinearity = trilinearity.max(sup(t)?);
    }
    let antisymmetry = sup(&rxy + &r(y, x, z))?;
    let function_linearity = sup(r(&x.scale(f), y, z) - f * &rxy)?;
    let leibniz = sup(r(x, y, &z.scale(f)) - pn(&df_two_form(f, x, y), z) - f * &rxy)?;
    let cyclic = r(x, y, z) + r(y, z, x) + r(z, x, y);
    let rhs = pn(x, &lie_bracket(y, z)) + pn(y, &lie_bracket(z, x)) + pn(z, &lie_bracket(x, y));
    let bianchi = sup(cyclic - rhs)?;
    Ok(PropertyReport { trilinearity, antisymmetry, function_linearity, leibniz, bianchi })
}

/// `θ_X θ_Y Z − θ_Y θ_X Z − θ_{[X,Y]} Z`.
pub fn ordinary_curvature(
    theta: &dyn OrdinaryPseudoconnection,
    x: &VectorField,
    y: &VectorField,
    z: &VectorField,
) -> VectorField {
    let a = theta.apply(x, &theta.apply(y, z));
    let b = theta.apply(y, &theta.apply(x, z));
    a.sub(&b).sub(&theta.apply(&lie_bracket(x, y), z))
}

/// `R^{∇^h}(X,Y)Z(W) − h(R^h(X,Y)Z,W) − h(θ_X W,θ_Y Z) + h(θ_Y W,θ_X Z)` for the
/// k=1 pseudoconnection `∇^h` and the Riemannian connection `θ` of `h`.
pub fn koszul_comparison_field(
    h: &[Vec<ScalarField>],
    x: &VectorField,
    y: &VectorField,
    z: &VectorField,
    w: &VectorField,
) -> Result<ScalarField> {
    let nh = nabla_h(h.to_vec());
    let theta = RiemannianConnection::new(h)?;
    let lhs = curvature(&nh, x, y, z).at1(w);
    let rh = ordinary_curvature(&theta, x, y, z);
    let rhs = inner(h, &rh, w) + inner(h, &theta.apply(x, w), &theta.apply(y, z))
        - inner(h, &theta.apply(y, w), &theta.apply(x, z));
    Ok(lhs - rhs)
}

pub fn koszul_comparison_residual(
    h: &[Vec<ScalarField>],
    fields: &[VectorField; 4],
    points: &[Vec<f64>],
) -> Result<Peak> {
    let [x, y, z, w] = fields;
    sup_norm(&koszul_comparison_field(h, x, y, z, w)?, points)
}

/// A named vector field from a catalog.
#[derive(Clone, Debug)]
pub struct Named {
    pub name: String,
    pub field: VectorField,
}

impl Named {
    pub fn new(name: impl Into<String>, field: VectorField) -> Self {
        Named { name: name.into(), field }
    }
}

/// A located value together with the catalog fields that produced it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub fields: Vec<String>,
    pub point: Vec<f64>,
    pub value: f64,
}

/// Diagonal diagnostics separating `Im(∇^g)` from `Im(P^g)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObstructionReport {
    /// `max |P^g(A)(Z,Z)|` over the catalog.
    pub image_p_diagonal: f64,
    /// Largest `|∇^g_X Y(Z,Z)|` found.
    pub nabla_diagonal: Witness,
}

pub fn koszul_obstruction(
    g: &TwoMetric,
    xs: &[Named],
    ys: &[Named],
    zs: &[Named],
    points: &[Vec<f64>],
) -> Result<ObstructionReport> {
    let mut image = 0.0f64;
    for a in xs.iter().chain(ys) {
        for z in zs {
            image = image.max(sup_norm(&p_g(g, &a.field).at2(&z.field, &z.field), points)?.value);
        }
    }
    let nabla = nabla_g(g);
    let mut best = Witness { fields: vec![], point: vec![], value: 0.0 };
    for x in xs {
        for y in ys {
            let d = nabla.apply(&x.field, &y.field);
            for z in zs {
                let p = sup_norm(&d.at2(&z.field, &z.field), points)?;
                if p.value > best.value {
                    best = Witness {
                        fields: vec![x.name.clone(), y.name.clone(), z.name.clone()],
                        point: p.point,
                        value: p.value,
                    };
                }
            }
        }
    }
    Ok(ObstructionReport { image_p_diagonal: image, nabla_diagonal: best })
}

/// Result of a curvature witness search.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvatureWitness {
    pub witness: Witness,
    /// `|R(X,Y)Z(W,T)|` before normalization.
    pub raw: f64,
    pub tuples_tried: usize,
}

/// Deterministic 5-tuples `(X, Y, Z, W, T)` of catalog indices, `X ≠ Y`, `W ≠ T`.
pub fn witness_tuples(n: usize, max: usize) -> Vec<[usize; 5]> {
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    let mut k = 0usize;
    while out.len() < max && k < n.pow(5) {
        let t = [k % n, (k / n + 1) % n, (k / (n * n) + 2) % n, (3 * k + 1) % n, (5 * k + 2) % n];
        if t[0] != t[1] && t[3] != t[4] {
            out.push(t);
        }
        k += 1;
    }
    out
}

/// Search for `(X,Y,Z,W,T)` and a point with `|R(X,Y)Z(W,T)| / Π max(1, |F(p)|)`
/// above `threshold`, stopping at the first success.
pub fn never_vanish_search(
    g: &TwoMetric,
    catalog: &[Named],
    points: &[Vec<f64>],
    max_tuples: usize,
    threshold: f64,
) -> Result<CurvatureWitness> {
    let nabla = nabla_g(g);
    let mut best = CurvatureWitness { witness: Witness { fields: vec![], point: vec![], value: 0.0 }, raw: 0.0, tuples_tried: 0 };
    for (tried, t) in witness_tuples(catalog.len(), max_tuples).into_iter().enumerate() {
        let [x, y, z, w, s] = t.map(|i| &catalog[i]);
        let r = curvature(&nabla, &x.field, &y.field, &z.field).at2(&w.field, &s.field);
        for p in points {
            let raw = r.value(p)?.abs();
            let mut norm = 1.0;
            for f in [x, y, z, w, s] {
                let v = f.field.value(p)?;
                norm *= v.iter().map(|c| c * c).sum::<f64>().sqrt().max(1.0);
            }
            let value = raw / norm;
            if value > best.witness.value {
                best.witness = Witness {
                    fields: [x, y, z, w, s].iter().map(|f| f.name.clone()).collect(),
                    point: p.clone(),
                    value,
                };
                best.raw = raw;
            }
        }
        best.tuples_tried = tried + 1;
        if best.witness.value > threshold {
            break;
        }
    }
    Ok(best)
}

/// Flatness and uniqueness of `∂P` among candidates with the same principal part.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlatCandidate {
    pub name: String,
    pub curvature: f64,
    pub distance_to_partial_p: f64,
}

/// For each candidate, the sup of its curvature and of its difference from
/// `∂P` over the given field triples and slots.
pub fn flat_candidates<S: Section>(
    candidates: &[(String, Conn<S>)],
    principal: Hom<S>,
    triples: &[(VectorField, VectorField, S)],
    slots: &[Vec<VectorField>],
    points: &[Vec<f64>],
) -> Result<Vec<FlatCandidate>> {
    let dp = partial_p(principal);
    let mut out = Vec::new();
    for (name, c) in candidates {
        let mut curv = 0.0f64;
        let mut dist = 0.0f64;
        for (x, y, s) in triples {
            for sl in slots {
                curv = curv.max(sup_norm(&curvature(&**c, x, y, s).at(sl), points)?.value);
                let d = c.apply(x, s).at(sl) - dp.apply(x, s).at(sl);
                dist = dist.max(sup_norm(&d, points)?.value);
            }
        }
        out.push(FlatCandidate { name: name.clone(), curvature: curv, distance_to_partial_p: dist });
    }
    Ok(out)
}

/// Residuals of `∇^g = f^*∇^ḡ` and of the curvature identity under `φ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub precondition: f64,
    pub connection: f64,
    pub curvature: f64,
}

/// Tolerance on `|φ^*ḡ − g|` before invariance is tested.
pub const ISOMETRY_TOL: f64 = 1e-8;

/// Max basis-entry difference between `φ^*ḡ` and `g` at the samples of `φ`.
pub fn isometry_defect(phi: &Diffeo, g: &TwoMetric, gbar: &TwoMetric) -> Result<f64> {
    let pb = pullback_metric(phi, gbar)?;
    let triples: Vec<(usize, usize, usize)> = match g.dim() {
        2 => vec![(0, 0, 1)],
        3 => table3_order().to_vec(),
        n => return Err(Error::Invalid(format!("isometry check in dimension {n}"))),
    };
    let mut worst = 0.0f64;
    for (i, j, k) in triples {
        let d = pb.basis_entry(i, j, k) - g.basis_entry(i, j, k);
        worst = worst.max(sup_norm(&d, phi.samples())?.value);
    }
    Ok(worst)
}

/// `fields = [X, Y, Z, W, T]`: checks `∇^g_X Y(Z,W) = ∇^ḡ_{f_*X} f_*Y(f_*Z, f_*W) ∘ f`
/// and `R^g(X,Y)Z(W,T) = R^ḡ(f_*X,f_*Y)f_*Z(f_*W,f_*T) ∘ f` at the samples of `φ`.
pub fn isometry_invariance_residual(
    phi: &Diffeo,
    g: &TwoMetric,
    gbar: &TwoMetric,
    fields: &[VectorField; 5],
) -> Result<InvarianceReport> {
    let precondition = isometry_defect(phi, g, gbar)?;
    if !(precondition < ISOMETRY_TOL) {
        return Err(Error::PreconditionFailed(format!("φ is not a 2-isometry (defect {precondition:e})")));
    }
    let points = phi.samples();
    let [x, y, z, w, t] = fields;
    let push: Vec<VectorField> = fields.iter().map(|f| phi.pushforward(f)).collect();
    let (n, nb) = (nabla_g(g), nabla_g(gbar));
    let conn = n.apply(x, y).at2(z, w) - nb.apply(&push[0], &push[1]).at2(&push[2], &push[3]).compose(phi.forward());
    let curv = curvature(&n, x, y, z).at2(w, t)
        - curvature(&nb, &push[0], &push[1], &push[2]).at2(&push[3], &push[4]).compose(phi.forward());
    Ok(InvarianceReport {
        precondition,
        connection: sup_norm(&conn, points)?.value,
        curvature: sup_norm(&curv, points)?.value,
    })
}

/// `P^g` as a shared homomorphism.
pub fn metric_hom(g: &TwoMetric) -> Hom<VectorField> {
    std::sync::Arc::new(MetricHom(g.clone()))
}
