//! Executes scenario checks through the library and collects report entries.

use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::report::{Entry, Report, Status};
use super::scenario::{CheckSpec, Context, MetricSpec};
use crate::catalog;
use crate::connection::{
    adapted_four_slot_residual, adapted_residual, bilinearity_residuals, compatibility_residual, computa_split,
    conformal_shift, first_slot_linearity, module_rule_residuals, nabla_g, nabla_gst_r2, partial_p, principal_probe,
    symmetry_residual, torsion_residual, Conn, FnPseudoconnection, MetricHom, Ordinary, Pseudoconnection,
    RiemannianConnection,
};
use crate::curvature::{
    flat_candidates, isometry_invariance_residual, koszul_comparison_residual, koszul_obstruction, metric_hom,
    never_vanish_search, partial_nabla, property_suite, Named, PropertyInputs, PropertyReport, Witness,
};
use crate::error::{Error, Result};
use crate::fields::{sup_norm, Peak, ScalarField, VectorField};
use crate::flatness::{classify_conformal_3d, flatten_2d, flatten_residual, DEFAULT_QUAD_TOL};
use crate::metric::{pullback_metric, Diffeo, MetricKind, TwoMetric};
use crate::stationary::{equivalence_sweep, s2_residual, stationarity_residual, stream_generator, Stationarity, STATIONARY_TOL};
use crate::twoinner::check_axioms;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides the default absolute tolerance of every check without its own `tol`.
    pub tol_abs: Option<f64>,
}

/// Result of one check before timing and status are attached.
pub struct Outcome {
    pub passed: bool,
    pub max_residual: f64,
    pub tolerance: f64,
    pub witness: Option<Witness>,
    pub details: Value,
}

impl Outcome {
    fn below(w: Witness, tolerance: f64) -> Self {
        Outcome { passed: w.value < tolerance, max_residual: w.value, tolerance, witness: Some(w), details: Value::Null }
    }
}

struct Args<'a> {
    ctx: &'a Context,
    spec: &'a CheckSpec,
    opts: &'a RunOptions,
    fields: Vec<Named>,
    scalars: Vec<(String, ScalarField)>,
}

impl Args<'_> {
    fn tol(&self, default: f64) -> f64 {
        self.spec.tol.or(self.opts.tol_abs).or(self.ctx.tolerances.abs).unwrap_or(default)
    }

    fn n(&self) -> usize {
        self.fields.len()
    }

    /// Field `k` taken cyclically.
    fn f(&self, k: usize) -> &Named {
        &self.fields[k % self.fields.len()]
    }

    fn s(&self, k: usize) -> &(String, ScalarField) {
        &self.scalars[k % self.scalars.len()]
    }

    fn pts(&self) -> &[Vec<f64>] {
        &self.ctx.points
    }

    fn param(&self, key: &str) -> Option<&Value> {
        self.spec.params.get(key)
    }

    fn param_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.param(key) {
            None => Ok(default),
            Some(v) => v.as_u64().map(|x| x as usize).ok_or_else(|| bad_param(key, "an unsigned integer")),
        }
    }

    fn param_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.param(key) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| bad_param(key, "a number")),
        }
    }

    fn param_str(&self, key: &str) -> Result<Option<&str>> {
        match self.param(key) {
            None => Ok(None),
            Some(v) => v.as_str().map(Some).ok_or_else(|| bad_param(key, "a string")),
        }
    }

    fn scalar_param(&self, key: &str) -> Result<ScalarField> {
        let name = self.param_str(key)?.ok_or_else(|| Error::Invalid(format!("check needs params.{key}")))?;
        self.ctx.scalar(name).cloned().ok_or_else(|| Error::Invalid(format!("unknown scalar {name:?}")))
    }

    fn generating_h(&self) -> Result<Vec<Vec<ScalarField>>> {
        self.ctx
            .metric
            .generating_h()
            .ok_or_else(|| Error::Invalid(format!("{} needs a simple (or conformally simple) metric", self.spec.check)))
    }

    /// Stationarity witnesses: the built-in catalog unless `params.witnesses = "scenario"`.
    fn witnesses(&self) -> Result<Vec<Named>> {
        match self.param_str("witnesses")? {
            Some("scenario") => Ok(self.ctx.fields.clone()),
            None | Some("catalog") if self.ctx.dim == 2 => Ok(catalog::stationarity_witnesses(self.ctx.seed)),
            None | Some("catalog") => {
                let mut w = catalog::fields(self.ctx.dim);
                w.extend(catalog::random_fields(self.ctx.dim, 8, self.ctx.seed));
                Ok(w)
            }
            Some(o) => Err(Error::Invalid(format!("unknown witness set {o:?}"))),
        }
    }
}

fn bad_param(key: &str, what: &str) -> Error {
    Error::Invalid(format!("params.{key} must be {what}"))
}

/// Running maximum with the names of the fields that produced it.
struct Track(Witness);

impl Track {
    fn new() -> Self {
        Track(Witness { fields: vec![], point: vec![], value: 0.0 })
    }

    fn push(&mut self, names: &[&Named], p: Peak) {
        if p.value > self.0.value || self.0.fields.is_empty() {
            self.0 = Witness { fields: names.iter().map(|f| f.name.clone()).collect(), point: p.point, value: p.value };
        }
    }

    fn push_tagged(&mut self, tag: &str, names: &[&Named], p: Peak) {
        if p.value > self.0.value || self.0.fields.is_empty() {
            let mut fields = vec![tag.to_string()];
            fields.extend(names.iter().map(|f| f.name.clone()));
            self.0 = Witness { fields, point: p.point, value: p.value };
        }
    }
}

fn torsion_free(a: &Args) -> Result<Outcome> {
    let nabla = nabla_g(&a.ctx.metric);
    let mut t = Track::new();
    for i in 0..a.n() {
        for j in i + 1..a.n().max(i + 2) {
            for k in 0..a.n() {
                let [x, y, z, w] = [a.f(i), a.f(j), a.f(k), a.f(k + 1)];
                let slots = [z.field.clone(), w.field.clone()];
                t.push(&[x, y, z, w], torsion_residual(&nabla, &x.field, &y.field, &slots, a.pts())?);
            }
        }
    }
    Ok(Outcome::below(t.0, a.tol(1e-8)))
}

fn compatibility(a: &Args) -> Result<Outcome> {
    let nabla = nabla_g(&a.ctx.metric);
    let mut t = Track::new();
    for i in 0..a.n() {
        for j in 0..a.n() {
            let [x, y, x1, w] = [a.f(i), a.f(j), a.f(i + j + 1), a.f(i + 2 * j + 2)];
            let p = compatibility_residual(&nabla, &x.field, &y.field, &x1.field, &[w.field.clone()], a.pts())?;
            t.push(&[x, y, x1, w], p);
        }
    }
    Ok(Outcome::below(t.0, a.tol(1e-8)))
}

fn symmetry(a: &Args) -> Result<Outcome> {
    let p = MetricHom(a.ctx.metric.clone());
    let mut t = Track::new();
    for i in 0..a.n() {
        for j in 0..a.n() {
            let [x, x1, w] = [a.f(i), a.f(j), a.f(i + j + 1)];
            t.push(&[x, x1, w], symmetry_residual(&p, &x.field, &x1.field, &[w.field.clone()], a.pts())?);
        }
    }
    Ok(Outcome::below(t.0, a.tol(1e-8)))
}

fn module_rules(a: &Args) -> Result<Outcome> {
    let nabla = nabla_g(&a.ctx.metric);
    let mut t = Track::new();
    for i in 0..a.n() {
        for j in 0..a.n() {
            let [x, s, x2, s2, z] = [a.f(i), a.f(j), a.f(i + 1), a.f(j + 1), a.f(i + j + 2)];
            let slots = [z.field.clone(), x2.field.clone()];
            let (b1, b2) = bilinearity_residuals(&nabla, &x.field, &x2.field, &s.field, &s2.field, &slots, a.pts())?;
            t.push_tagged("additive-X", &[x, x2, s], b1);
            t.push_tagged("additive-s", &[x, s, s2], b2);
            let d = nabla.apply(&x.field, &s.field);
            for (name, phi) in &a.scalars {
                let (m1, m2) = module_rule_residuals(&nabla, &x.field, &s.field, phi, &slots, a.pts())?;
                t.push_tagged(&format!("phi-X:{name}"), &[x, s], m1);
                t.push_tagged(&format!("phi-s:{name}"), &[x, s], m2);
                t.push_tagged(&format!("first-slot:{name}"), &[x, s, z], first_slot_linearity(&d, phi, &slots, a.pts())?);
            }
        }
    }
    Ok(Outcome::below(t.0, a.tol(1e-8)))
}

fn adapted(a: &Args) -> Result<Outcome> {
    let g = &a.ctx.metric;
    let theta = Arc::new(RiemannianConnection::new(&a.generating_h()?)?);
    let shifted = match a.param("shift") {
        None => None,
        Some(_) => {
            let lambda = a.scalar_param("shift")?;
            let tb = conformal_shift(theta.clone() as Ordinary, lambda.clone());
            Some((tb, TwoMetric::conformal(lambda, g.clone())))
        }
    };
    let mut t = Track::new();
    let mut principal = 0.0f64;
    for i in 0..a.n() {
        for j in 0..a.n() {
            for k in 0..a.n() {
                let [x, y, z, w] = [a.f(i), a.f(j), a.f(k), a.f(i + j + k + 1)];
                t.push(&[x, y, z], adapted_residual(&*theta, g, &x.field, &y.field, &z.field, a.pts())?);
                let four = adapted_four_slot_residual(&*theta, g, &x.field, &y.field, &z.field, &w.field, a.pts())?;
                t.push_tagged("four-slot", &[x, y, z, w], four);
                if let Some((tb, gb)) = &shifted {
                    t.push_tagged("shift", &[x, y, z], adapted_residual(tb, gb, &x.field, &y.field, &z.field, a.pts())?);
                }
            }
        }
        if let Some((tb, _)) = &shifted {
            let d = principal_probe(tb, &a.f(i).field).sub(&principal_probe(&*theta, &a.f(i).field));
            for c in d.components() {
                principal = principal.max(sup_norm(c, a.pts())?.value);
            }
        }
    }
    let mut out = Outcome::below(t.0, a.tol(1e-8));
    let ptol = a.param_f64("principal_tol", 1e-10)?;
    out.passed &= principal < ptol;
    out.details = json!({ "principal_part_change": principal, "principal_tol": ptol });
    Ok(out)
}

/// Index and value of the largest entry.
fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values.enumerate().fold((0, 0.0), |b, (i, v)| if v > b.1 { (i, v) } else { b })
}

fn computa(a: &Args) -> Result<Outcome> {
    let theta = RiemannianConnection::new(&a.generating_h()?)?;
    let mut t = Track::new();
    for k in 0..a.n() {
        let q = [a.f(k), a.f(k + 1), a.f(k + 2), a.f(k + 3)];
        let s = computa_split(&a.ctx.metric, &theta, &q[0].field, &q[1].field, &q[2].field, &q[3].field, a.pts())?;
        let (i, v) = argmax(s.g_star_theta.iter().zip(&s.omega_part).zip(&s.direct).map(|((x, y), d)| (x + y - d).abs()));
        t.push(&q, Peak { value: v, point: a.pts()[i].clone() });
    }
    Ok(Outcome::below(t.0, a.tol(1e-8)))
}

fn r2_explicit(a: &Args) -> Result<Outcome> {
    if !matches!(a.ctx.metric.kind(), MetricKind::Standard { dim: 2 }) {
        return Err(Error::Invalid("r2-explicit needs the standard metric on R^2".into()));
    }
    let nabla = nabla_g(&a.ctx.metric);
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1.0);
    let mut t = Track::new();
    for k in 0..a.n() {
        let q = [a.f(k), a.f(k + 1), a.f(k + 2), a.f(k + 3)];
        let d = nabla.apply(&q[0].field, &q[1].field).at2(&q[2].field, &q[3].field);
        for p in a.pts() {
            let v = rel(nabla_gst_r2(&q[0].field, &q[1].field, &q[2].field, &q[3].field, p)?, d.value(p)?);
            t.push(&q, Peak { value: v, point: p.clone() });
        }
    }
    let draws = a.param_usize("draws", 200)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.ctx.seed);
    let points = a.ctx.domain.random_points(draws, a.ctx.seed.wrapping_add(1));
    for (i, p) in points.iter().enumerate() {
        let q: Vec<Named> = (0..4).map(|j| Named::new(format!("draw{i}.{j}"), catalog::random_field(2, &mut rng))).collect();
        let d = nabla.apply(&q[0].field, &q[1].field).at2(&q[2].field, &q[3].field);
        let v = rel(nabla_gst_r2(&q[0].field, &q[1].field, &q[2].field, &q[3].field, p)?, d.value(p)?);
        t.push(&[&q[0], &q[1], &q[2], &q[3]], Peak { value: v, point: p.clone() });
    }
    let tol = a.spec.tol.or(a.ctx.tolerances.rel).unwrap_or(1e-9);
    let mut out = Outcome::below(t.0, tol);
    out.details = json!({ "random_draws": draws, "measure": "|explicit - nabla_g| / max(1, |nabla_g|)" });
    Ok(out)
}

fn curvature_props(a: &Args) -> Result<Outcome> {
    let nabla = nabla_g(&a.ctx.metric);
    let mut rep = PropertyReport::zero();
    for k in 0..a.n() {
        let inp = PropertyInputs {
            x: a.f(k).field.clone(),
            y: a.f(k + 1).field.clone(),
            z: a.f(k + 2).field.clone(),
            x2: a.f(k + 3).field.clone(),
            f: a.s(k).1.clone(),
            slots: vec![a.f(k + 4).field.clone(), a.f(k + 1).field.clone()],
        };
        rep = rep.merge(&property_suite(&nabla, &inp, a.pts())?);
    }
    let tol = a.tol(1e-7);
    let tri_tol = a.param_f64("trilinear_tol", 1e-9)?;
    Ok(Outcome {
        passed: rep.max_structural() < tol && rep.trilinearity < tri_tol,
        max_residual: rep.max_structural().max(rep.trilinearity),
        tolerance: tol,
        witness: None,
        details: json!({ "properties": rep, "trilinear_tol": tri_tol }),
    })
}

fn ch_flat(a: &Args) -> Result<Outcome> {
    let p = metric_hom(&a.ctx.metric);
    let dp: Conn<VectorField> = Arc::new(partial_p(p.clone()));
    let lc: Conn<VectorField> = Arc::new(nabla_g(&a.ctx.metric));
    let lc2 = lc.clone();
    let rebuilt: Conn<VectorField> = Arc::new(FnPseudoconnection::perturbed(lc, move |x, s| partial_nabla(&*lc2, x, s)));
    let cands = vec![("partial-P".to_string(), dp), ("perturbed-nabla".to_string(), rebuilt)];
    let triples: Vec<_> =
        (0..a.n()).map(|k| (a.f(k).field.clone(), a.f(k + 1).field.clone(), a.f(k + 2).field.clone())).collect();
    let slots: Vec<Vec<VectorField>> =
        (0..a.n().min(2)).map(|k| vec![a.f(k + 3).field.clone(), a.f(k + 4).field.clone()]).collect();
    let r = flat_candidates(&cands, p, &triples, &slots, a.pts())?;
    let tol = a.tol(1e-8);
    let worst = r.iter().map(|c| c.curvature.max(c.distance_to_partial_p)).fold(0.0, f64::max);
    Ok(Outcome { passed: worst < tol, max_residual: worst, tolerance: tol, witness: None, details: json!({ "candidates": r }) })
}

fn never_vanish(a: &Args) -> Result<Outcome> {
    let cat = match a.param_str("catalog")? {
        Some("builtin") => catalog::fields(a.ctx.dim),
        _ => a.fields.clone(),
    };
    if cat.len() < 2 {
        return Err(Error::Invalid("never-vanish needs at least two fields".into()));
    }
    let threshold = a.param_f64("threshold", 0.1)?;
    let max_tuples = a.param_usize("max_tuples", 64)?;
    let points = catalog::witness_grid(&a.ctx.domain);
    let w = never_vanish_search(&a.ctx.metric, &cat, &points, max_tuples, threshold)?;
    Ok(Outcome {
        passed: w.witness.value > threshold,
        max_residual: w.witness.value,
        tolerance: threshold,
        details: json!({ "raw": w.raw, "tuples_tried": w.tuples_tried, "grid_points": points.len(), "lower_bound": true }),
        witness: Some(w.witness),
    })
}

fn obstruction(a: &Args) -> Result<Outcome> {
    let r = koszul_obstruction(&a.ctx.metric, &a.fields, &a.fields, &a.fields, a.pts())?;
    let tol = a.tol(1e-10);
    let threshold = a.param_f64("threshold", 0.1)?;
    Ok(Outcome {
        passed: r.image_p_diagonal < tol && r.nabla_diagonal.value > threshold,
        max_residual: r.image_p_diagonal,
        tolerance: tol,
        details: json!({ "nabla_diagonal_threshold": threshold, "nabla_diagonal": r.nabla_diagonal.value }),
        witness: Some(r.nabla_diagonal),
    })
}

fn string_list(v: &Value, key: &str) -> Result<Vec<String>> {
    v.get(key)
        .and_then(Value::as_array)
        .and_then(|a| a.iter().map(|x| x.as_str().map(String::from)).collect::<Option<Vec<_>>>())
        .ok_or_else(|| bad_param(&format!("map.{key}"), "an array of expressions"))
}

fn invariance(a: &Args) -> Result<Outcome> {
    let map = a.param("map").ok_or_else(|| Error::Invalid("invariance needs params.map".into()))?;
    let parse = |list: Vec<String>| -> Result<Vec<ScalarField>> {
        list.iter().map(|e| ScalarField::parse(e, &a.ctx.coords)).collect()
    };
    let samples: Vec<Vec<f64>> = a.pts().iter().take(a.param_usize("samples", 8)?).cloned().collect();
    let phi = Diffeo::new(parse(string_list(map, "forward")?)?, parse(string_list(map, "inverse")?)?, samples)?;
    let target = match a.param("target") {
        None => a.ctx.metric.clone(),
        Some(v) => {
            let spec: MetricSpec = serde_json::from_value(v.clone()).map_err(|e| Error::Invalid(format!("params.target: {e}")))?;
            a.ctx.build_metric(&spec).map_err(|e| Error::Invalid(e.to_string()))?
        }
    };
    let source = match a.param_str("source")? {
        None | Some("scenario") => a.ctx.metric.clone(),
        Some("pullback") => pullback_metric(&phi, &target)?,
        Some(o) => return Err(Error::Invalid(format!("unknown source {o:?}"))),
    };
    let five: [VectorField; 5] = std::array::from_fn(|k| a.f(k).field.clone());
    let r = isometry_invariance_residual(&phi, &source, &target, &five)?;
    let worst = r.connection.max(r.curvature);
    let tol = a.tol(1e-7);
    let names: Vec<&Named> = (0..5).map(|k| a.f(k)).collect();
    let mut t = Track::new();
    t.push(&names, Peak { value: worst, point: vec![] });
    Ok(Outcome { passed: worst < tol, max_residual: worst, tolerance: tol, witness: Some(t.0), details: json!({ "invariance": r }) })
}

fn koszul_comparison(a: &Args) -> Result<Outcome> {
    let h = a.generating_h()?;
    let mut t = Track::new();
    for k in 0..a.n() {
        let q = [a.f(k), a.f(k + 1), a.f(k + 2), a.f(k + 3)];
        let fs = [q[0].field.clone(), q[1].field.clone(), q[2].field.clone(), q[3].field.clone()];
        t.push(&q, koszul_comparison_residual(&h, &fs, a.pts())?);
    }
    Ok(Outcome::below(t.0, a.tol(1e-8)))
}

fn stationary(a: &Args) -> Result<Outcome> {
    let name = a.param_str("field")?.ok_or_else(|| Error::Invalid("stationary needs params.field".into()))?;
    let x = a.ctx.field(name).ok_or_else(|| Error::Invalid(format!("unknown field {name:?}")))?;
    let expect = match a.param_str("expect")? {
        None | Some("stationary") => true,
        Some("non-stationary") => false,
        Some(o) => return Err(Error::Invalid(format!("unknown expectation {o:?}"))),
    };
    let r = stationarity_residual(&a.ctx.metric, x, &a.witnesses()?, a.pts())?;
    let witness = match &r.verdict {
        Stationarity::NonStationary { witness } => Some(witness.clone()),
        Stationarity::Stationary => None,
    };
    Ok(Outcome {
        passed: r.is_stationary() == expect,
        max_residual: r.max_residual,
        tolerance: STATIONARY_TOL,
        witness,
        details: json!({ "expected_stationary": expect, "report": r }),
    })
}

fn conformal_lambda(m: &TwoMetric) -> Option<ScalarField> {
    match m.kind() {
        MetricKind::Conformal { lambda, base } if matches!(base.kind(), MetricKind::Standard { dim: 2 }) => {
            Some(lambda.clone())
        }
        MetricKind::Standard { dim: 2 } => Some(ScalarField::constant(1.0)),
        _ => None,
    }
}

fn thcc(a: &Args) -> Result<Outcome> {
    let lambda = conformal_lambda(&a.ctx.metric)
        .ok_or_else(|| Error::Invalid("thCC-equivalence needs a conformal metric over the standard one on R^2".into()))?;
    let mut fields = a.fields.clone();
    let mut t = Track::new();
    if let Some(v) = a.param("generators") {
        let names = v.as_array().ok_or_else(|| bad_param("generators", "an array of scalar names"))?;
        for n in names {
            let n = n.as_str().ok_or_else(|| bad_param("generators", "an array of scalar names"))?;
            let psi = a.ctx.scalar(n).ok_or_else(|| Error::Invalid(format!("unknown scalar {n:?}")))?;
            let g = Named::new(format!("gen({n})"), stream_generator(psi, &lambda)?);
            t.push(&[&g], sup_norm(&crate::stationary::div_residual(&g.field, &lambda), a.pts())?);
            fields.push(g);
        }
    }
    let r = equivalence_sweep(&lambda, &fields, &a.witnesses()?, a.pts())?;
    let tol = a.param_f64("generator_tol", 1e-10)?;
    let gen_ok = t.0.value < tol;
    Ok(Outcome {
        passed: r.all_agree() && gen_ok,
        max_residual: t.0.value,
        tolerance: tol,
        witness: if t.0.fields.is_empty() { None } else { Some(t.0) },
        details: json!({ "agreements": r.agreements, "rows": r.rows }),
    })
}

fn s2(a: &Args) -> Result<Outcome> {
    if a.ctx.dim != 2 {
        return Err(Error::Invalid("s2 is defined on R^2".into()));
    }
    let mut t = Track::new();
    for i in 0..a.n() {
        for j in 0..a.n() {
            let (x, y) = (a.f(i), a.f(j));
            t.push(&[x, y], sup_norm(&crate::stationary::s2_field(&x.field, &y.field)?, a.pts())?);
        }
    }
    let pairs = a.param_usize("random_pairs", 100)?;
    let rnd = catalog::random_fields(2, 2 * pairs, a.ctx.seed);
    for c in rnd.chunks(2) {
        let v = s2_residual(&c[0].field, &c[1].field, a.pts())?;
        t.push(&[&c[0], &c[1]], Peak { value: v, point: vec![] });
    }
    let mut out = Outcome::below(t.0, a.tol(1e-8));
    out.details = json!({ "random_pairs": pairs });
    Ok(out)
}

fn axioms(a: &Args) -> Result<Outcome> {
    let trials = a.param_usize("trials", 100)?;
    let mut worst = Peak::none();
    let mut nonpositive = 0;
    for p in a.pts() {
        let r = check_axioms(&a.ctx.metric.at(p), trials, a.ctx.seed);
        nonpositive += r.independent_nonpositive;
        worst = worst.max(Peak { value: r.max_residual(), point: p.clone() });
    }
    let tol = a.tol(1e-9);
    Ok(Outcome {
        passed: worst.value < tol && nonpositive == 0,
        max_residual: worst.value,
        tolerance: tol,
        witness: Some(Witness { fields: vec![], point: worst.point, value: worst.value }),
        details: json!({ "trials_per_point": trials, "independent_nonpositive": nonpositive }),
    })
}

fn flatten(a: &Args) -> Result<Outcome> {
    let g = a.scalar_param("G")?;
    let quad_tol = a.ctx.tolerances.quad_tol.unwrap_or(DEFAULT_QUAD_TOL);
    let grid = a.ctx.domain.grid(5);
    let map = flatten_2d(&g, &a.ctx.domain, &grid, quad_tol)?;
    let r = flatten_residual(&map, &g, &grid)?;
    let tol = a.spec.tol.unwrap_or(100.0 * quad_tol);
    Ok(Outcome {
        passed: r.value < tol,
        max_residual: r.value,
        tolerance: tol,
        witness: Some(Witness { fields: vec![], point: r.point, value: r.value }),
        details: json!({ "anchor": map.anchor, "quad_tol": quad_tol }),
    })
}

fn conformal3d(a: &Args) -> Result<Outcome> {
    let lambda = a.scalar_param("lambda")?;
    let fit_tol = a.ctx.tolerances.fit_tol.unwrap_or(1e-6);
    let expect_flat = match a.param_str("expect")? {
        None | Some("flat") => true,
        Some("non-flat") => false,
        Some(o) => return Err(Error::Invalid(format!("unknown expectation {o:?}"))),
    };
    let c = classify_conformal_3d(&lambda, &a.ctx.domain, a.param_usize("samples", 200)?, a.ctx.seed, fit_tol)?;
    let res = match &c.verdict {
        crate::flatness::ConformalVerdict::FlatConstant { .. } => 0.0,
        crate::flatness::ConformalVerdict::FlatInversion { fit_residual, .. }
        | crate::flatness::ConformalVerdict::NonFlat { fit_residual, .. } => *fit_residual,
    };
    Ok(Outcome {
        passed: c.verdict.is_flat() == expect_flat,
        max_residual: res,
        tolerance: fit_tol,
        witness: None,
        details: serde_json::to_value(&c).expect("classification serializes"),
    })
}

fn dispatch(a: &Args) -> Result<Outcome> {
    match a.spec.check.as_str() {
        "torsion-free" => torsion_free(a),
        "compatibility" => compatibility(a),
        "symmetry" => symmetry(a),
        "adapted" => adapted(a),
        "computa-split" => computa(a),
        "r2-explicit" => r2_explicit(a),
        "module-rules" => module_rules(a),
        "curvature-props" => curvature_props(a),
        "ch-flat" => ch_flat(a),
        "never-vanish" => never_vanish(a),
        "koszul-obstruction" => obstruction(a),
        "invariance" => invariance(a),
        "koszul-comparison" => koszul_comparison(a),
        "stationary" => stationary(a),
        "thCC-equivalence" => thcc(a),
        "s2" => s2(a),
        "axioms" => axioms(a),
        "flatten-2d" => flatten(a),
        "conformal-3d" => conformal3d(a),
        other => Err(Error::Invalid(format!("unknown check {other:?}"))),
    }
}

fn select(ctx: &Context, spec: &CheckSpec) -> (Vec<Named>, Vec<(String, ScalarField)>) {
    let fields = if spec.fields.is_empty() {
        ctx.fields.clone()
    } else {
        spec.fields.iter().filter_map(|n| ctx.field(n).cloned()).collect()
    };
    let mut scalars: Vec<(String, ScalarField)> = if spec.scalars.is_empty() {
        ctx.scalars.clone()
    } else {
        spec.scalars.iter().filter_map(|n| ctx.scalar(n).map(|s| (n.clone(), s.clone()))).collect()
    };
    if scalars.is_empty() {
        // coordinate functions
        scalars = ctx.coords.iter().enumerate().map(|(i, c)| (c.clone(), ScalarField::coord(i))).collect();
    }
    (fields, scalars)
}

/// Run one check; evaluation failures become `error` entries.
pub fn run_check(ctx: &Context, spec: &CheckSpec, opts: &RunOptions) -> Entry {
    let start = Instant::now();
    let (fields, scalars) = select(ctx, spec);
    let needs_fields = !matches!(spec.check.as_str(), "axioms" | "flatten-2d" | "conformal-3d" | "never-vanish");
    let result = if needs_fields && fields.is_empty() {
        Err(Error::Invalid(format!("{} needs at least one field", spec.check)))
    } else {
        dispatch(&Args { ctx, spec, opts, fields, scalars })
    };
    let wall_time = start.elapsed().as_secs_f64();
    let (name, check) = (spec.name().to_string(), spec.check.clone());
    match result {
        Ok(o) => Entry {
            name,
            check,
            status: if o.passed { Status::Pass } else { Status::Fail },
            max_residual: Some(o.max_residual),
            tolerance: Some(o.tolerance),
            witness: o.witness,
            details: o.details,
            error: None,
            wall_time,
        },
        Err(e) => Entry {
            name,
            check,
            status: Status::Error,
            max_residual: None,
            tolerance: None,
            witness: None,
            details: Value::Null,
            error: Some(e.to_string()),
            wall_time,
        },
    }
}

/// Run every check concurrently; entries keep declaration order.
pub fn run(ctx: &Context, hash: String, opts: &RunOptions) -> Report {
    let entries: Vec<Entry> = ctx.checks.par_iter().map(|c| run_check(ctx, c, opts)).collect();
    Report::new(ctx.name.clone(), hash, ctx.seed, ctx.points.len(), entries)
}

