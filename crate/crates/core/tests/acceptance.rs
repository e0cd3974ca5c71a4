//! Acceptance suite: one line per criterion, tolerances pinned below.
//! Exit status is non-zero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tworiem::catalog::{self, CatalogMetric};
use tworiem::cli::report::strip_wall_time;
use tworiem::connection::{
    adapted_residual, compatibility_residual, computa_split, conformal_shift, first_slot_linearity,
    module_rule_residuals, nabla_g, nabla_gst_r2, partial_p, principal_probe, symmetry_residual, torsion_residual,
    Conn, FnPseudoconnection, MetricHom, Ordinary, Pseudoconnection, RiemannianConnection,
};
use tworiem::curvature::{
    flat_candidates, isometry_invariance_residual, koszul_obstruction, metric_hom, never_vanish_search,
    partial_nabla, property_suite, Named, PropertyInputs,
};
use tworiem::exprlang::parse;
use tworiem::fields::{sup_norm, BoxDomain, ScalarField, VectorField};
use tworiem::flatness::{
    beltrami_residual, classify_conformal_3d, flat_table, flatten_2d, flatten_residual, system_residual_3d,
    ConformalVerdict,
};
use tworiem::jets::{Jet, J1};
use tworiem::metric::{pullback_metric, Diffeo, TwoMetric};
use tworiem::stationary::{div_residual, equivalence_sweep, s2_residual, stationarity_residual, stream_generator};
use tworiem::twoinner::{check_axioms, expand_dim2, expand_dim3, BasisTable3};

// tolerances
const AXIOM_TOL: f64 = 1e-9;
const EXPANSION_REL_TOL: f64 = 1e-9;
const LEVI_CIVITA_TOL: f64 = 1e-8;
const CURVATURE_TOL: f64 = 1e-7;
const TRILINEAR_TOL: f64 = 1e-9;
const FLAT_TOL: f64 = 1e-8;
const NEVER_VANISH_THRESHOLD: f64 = 0.1;
const IMAGE_P_TOL: f64 = 1e-10;
const OBSTRUCTION_THRESHOLD: f64 = 0.1;
const INVARIANCE_TOL: f64 = 1e-7;
const ADAPTED_TOL: f64 = 1e-8;
const PRINCIPAL_TOL: f64 = 1e-10;
const COMPUTA_TOL: f64 = 1e-8;
const R2_FORMULA_TOL: f64 = 1e-9;
const STATIONARY_S2_TOL: f64 = 1e-8;
const GENERATOR_DIV_TOL: f64 = 1e-10;
const QUAD_TOL: f64 = 1e-10;
const SYSTEM_TOL: f64 = 1e-12;
const SOLVES_TOL: f64 = 1e-8;
const INVERSION_TOL: f64 = 1e-6;
const NON_FLAT_MIN_RESIDUAL: f64 = 1e-2;
const FD_REL_TOL: f64 = 1e-6;

type Verdict = Result<String, String>;

fn check(ok: bool, msg: String) -> Verdict {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn points(m: &CatalogMetric, n: usize) -> Vec<Vec<f64>> {
    m.domain().random_points(n, 42)
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

fn c1_axioms() -> Verdict {
    let mut worst = 0.0f64;
    let mut nonpositive = 0;
    for m in catalog::metrics() {
        let g = m.metric().map_err(e)?;
        for p in points(&m, 20) {
            let r = check_axioms(&g.at(&p), 100, 42);
            worst = worst.max(r.max_residual());
            nonpositive += r.independent_nonpositive;
        }
    }
    check(
        worst < AXIOM_TOL && nonpositive == 0,
        format!("5 metrics x 20 points: max residual {worst:.2e} (< {AXIOM_TOL:e}), {nonpositive} non-positive independent pairs"),
    )
}

/// `h(u,v)h(w,w) − h(u,w)h(v,w)` and the magnitude of its two terms.
fn simple_direct(h: &[Vec<f64>], u: &[f64], v: &[f64], w: &[f64]) -> (f64, f64) {
    let ip = |a: &[f64], b: &[f64]| -> f64 {
        (0..a.len()).map(|i| (0..b.len()).map(|j| a[i] * h[i][j] * b[j]).sum::<f64>()).sum()
    };
    let (t1, t2) = (ip(u, v) * ip(w, w), ip(u, w) * ip(v, w));
    (t1 - t2, t1.abs() + t2.abs())
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * a[j][k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 }).collect())
        .collect()
}

fn c2_expansion() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = 0.0f64;
    for draw in 0..500 {
        let n = 2 + draw % 2;
        let h = random_spd(n, &mut rng);
        let mut vec = || -> Vec<f64> { (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect() };
        let (u, v, w) = (vec(), vec(), vec());
        let basis = |i: usize| -> Vec<f64> { (0..n).map(|k| if k == i { 1.0 } else { 0.0 }).collect() };
        let entry = |i, j, k| simple_direct(&h, &basis(i), &basis(j), &basis(k)).0;
        let got = if n == 2 {
            expand_dim2(&u, &v, &w, entry(0, 0, 1))
        } else {
            let order = [(0, 0, 1), (0, 0, 2), (1, 1, 0), (1, 1, 2), (2, 2, 0), (2, 2, 1), (0, 1, 2), (0, 2, 1), (1, 2, 0)];
            expand_dim3(&u, &v, &w, &BasisTable3::from_array(order.map(|(i, j, k)| entry(i, j, k))))
        };
        let (want, scale) = simple_direct(&h, &u, &v, &w);
        worst = worst.max((got - want).abs() / scale.max(f64::MIN_POSITIVE));
    }
    check(worst < EXPANSION_REL_TOL, format!("500 draws: max relative error {worst:.2e} (< {EXPANSION_REL_TOL:e})"))
}

fn c3_levi_civita() -> Verdict {
    let mut worst = [0.0f64; 6];
    for m in catalog::metrics() {
        let g = m.metric().map_err(e)?;
        let nabla = nabla_g(&g);
        let p = MetricHom(g.clone());
        let pts = points(&m, 10);
        let phis = catalog::multipliers(m.dim());
        for (k, [x, y, z, w]) in catalog::field_tuples(m.dim()).into_iter().enumerate() {
            let slots = [z.clone(), w.clone()];
            let phi = &phis[k % phis.len()].1;
            worst[0] = worst[0].max(torsion_residual(&nabla, &x, &y, &slots, &pts).map_err(e)?.value);
            worst[1] = worst[1].max(compatibility_residual(&nabla, &x, &y, &z, &[w.clone()], &pts).map_err(e)?.value);
            worst[2] = worst[2].max(symmetry_residual(&p, &x, &z, &[w.clone()], &pts).map_err(e)?.value);
            let (a, b) = module_rule_residuals(&nabla, &x, &y, phi, &slots, &pts).map_err(e)?;
            worst[3] = worst[3].max(a.value);
            worst[4] = worst[4].max(b.value);
            worst[5] = worst[5].max(first_slot_linearity(&nabla.apply(&x, &y), phi, &slots, &pts).map_err(e)?.value);
        }
    }
    let max = worst.iter().copied().fold(0.0, f64::max);
    check(
        max < LEVI_CIVITA_TOL,
        format!(
            "torsion {:.1e}, compatibility {:.1e}, symmetry {:.1e}, module rules {:.1e}/{:.1e}, first-slot linearity {:.1e} (< {LEVI_CIVITA_TOL:e})",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
        ),
    )
}

fn c4_curvature() -> Verdict {
    let mut structural = 0.0f64;
    let mut tri = 0.0f64;
    for m in catalog::metrics() {
        let g = m.metric().map_err(e)?;
        let nabla = nabla_g(&g);
        let pts = points(&m, 10);
        let phis = catalog::multipliers(m.dim());
        for (k, [x, y, z, w]) in catalog::field_tuples(m.dim()).into_iter().enumerate() {
            let inp = PropertyInputs {
                x: x.clone(),
                y: y.clone(),
                z: z.clone(),
                x2: w.clone(),
                f: phis[k % phis.len()].1.clone(),
                slots: vec![w, x],
            };
            let r = property_suite(&nabla, &inp, &pts).map_err(e)?;
            structural = structural.max(r.max_structural());
            tri = tri.max(r.trilinearity);
        }
    }
    check(
        structural < CURVATURE_TOL && tri < TRILINEAR_TOL,
        format!("structural identities max {structural:.2e} (< {CURVATURE_TOL:e}); trilinearity {tri:.2e} (< {TRILINEAR_TOL:e})"),
    )
}

fn c5_flat() -> Verdict {
    let (mut curv, mut dist) = (0.0f64, 0.0f64);
    for m in catalog::metrics() {
        let g = m.metric().map_err(e)?;
        let p = metric_hom(&g);
        let dp: Conn<VectorField> = Arc::new(partial_p(p.clone()));
        let lc: Conn<VectorField> = Arc::new(nabla_g(&g));
        let lc2 = lc.clone();
        let rebuilt: Conn<VectorField> =
            Arc::new(FnPseudoconnection::perturbed(lc, move |x, s| partial_nabla(&*lc2, x, s)));
        let tuples = catalog::field_tuples(m.dim());
        let triples: Vec<_> = tuples.iter().map(|t| (t[0].clone(), t[1].clone(), t[2].clone())).collect();
        let slots: Vec<Vec<VectorField>> = tuples.iter().take(2).map(|t| vec![t[3].clone(), t[0].clone()]).collect();
        let cands = vec![("dP".to_string(), dp), ("perturbed".to_string(), rebuilt)];
        for c in flat_candidates(&cands, p, &triples, &slots, &points(&m, 10)).map_err(e)? {
            curv = curv.max(c.curvature);
            dist = dist.max(c.distance_to_partial_p);
        }
    }
    check(
        curv < FLAT_TOL && dist < FLAT_TOL,
        format!("curvature of dP and of the perturbed candidate {curv:.2e}; candidate vs dP {dist:.2e} (< {FLAT_TOL:e})"),
    )
}

fn c6_never_vanish() -> Verdict {
    let mut parts = Vec::new();
    let mut ok = true;
    for m in catalog::metrics() {
        let g = m.metric().map_err(e)?;
        let w = never_vanish_search(&g, &catalog::fields(m.dim()), &catalog::witness_grid(&m.domain()), 64, NEVER_VANISH_THRESHOLD)
            .map_err(e)?;
        ok &= w.witness.value > NEVER_VANISH_THRESHOLD;
        parts.push(format!("{} {:.3} via {}", m.name, w.witness.value, w.witness.fields.join(",")));
    }
    check(ok, format!("normalized |R| > {NEVER_VANISH_THRESHOLD}: {}", parts.join("; ")))
}

fn c7_obstruction() -> Verdict {
    let mut image = 0.0f64;
    let mut weakest = f64::INFINITY;
    for m in catalog::metrics() {
        let g = m.metric().map_err(e)?;
        let f = catalog::fields(m.dim());
        let r = koszul_obstruction(&g, &f[..6], &f[..6], &f, &points(&m, 10)).map_err(e)?;
        image = image.max(r.image_p_diagonal);
        weakest = weakest.min(r.nabla_diagonal.value);
    }
    // hand-derived value for the standard plane: ∇_{(x,0)} e2 (R,R) = 2x²y at (0.5, 0.5)
    let g = TwoMetric::standard(2);
    let f = catalog::fields(2);
    let xe1 = catalog::parse_field(&["x", "0"]).map_err(e)?;
    let v = nabla_g(&g).apply(&xe1, &f[1].field).at2(&f[4].field, &f[4].field).value(&[0.5, 0.5]).map_err(e)?;
    let oracle = (v - 0.25).abs() < 1e-12;
    check(
        image < IMAGE_P_TOL && weakest > OBSTRUCTION_THRESHOLD && oracle,
        format!(
            "max |P(A)(Z,Z)| {image:.2e} (< {IMAGE_P_TOL:e}); weakest per-metric |nabla_X Y(Z,Z)| witness {weakest:.3} (> {OBSTRUCTION_THRESHOLD}); closed-form value {v}"
        ),
    )
}

fn c8_invariance() -> Verdict {
    let sf = |s: &str, dim: usize| catalog::parse_scalar(s, dim).map_err(e);
    let mut worst = 0.0f64;
    let mut cases = 0;
    // rotations of the standard metric
    for dim in [2usize, 3] {
        let samples = BoxDomain::cube(dim, -1.0, 1.0).random_points(6, 42);
        let (fw, inv): (Vec<&str>, Vec<&str>) = if dim == 2 {
            (vec!["0.6*x - 0.8*y", "0.8*x + 0.6*y"], vec!["0.6*x + 0.8*y", "-0.8*x + 0.6*y"])
        } else {
            (vec!["0.6*x - 0.8*y", "0.8*x + 0.6*y", "z"], vec!["0.6*x + 0.8*y", "-0.8*x + 0.6*y", "z"])
        };
        let phi = Diffeo::new(
            fw.iter().map(|s| sf(s, dim)).collect::<Result<_, _>>()?,
            inv.iter().map(|s| sf(s, dim)).collect::<Result<_, _>>()?,
            samples,
        )
        .map_err(e)?;
        let g = TwoMetric::standard(dim);
        let f = catalog::fields(dim);
        let five: [VectorField; 5] = std::array::from_fn(|k| f[k + 3].field.clone());
        let r = isometry_invariance_residual(&phi, &g, &g, &five).map_err(e)?;
        worst = worst.max(r.connection).max(r.curvature);
        cases += 1;
    }
    // scaling pull-backs of catalog metrics
    for m in catalog::metrics() {
        let dim = m.dim();
        let c = catalog::coords(dim);
        let samples = BoxDomain::cube(dim, -0.45, 0.45).random_points(6, 42);
        let phi = Diffeo::new(
            c.iter().map(|v| sf(&format!("2*{v}"), dim)).collect::<Result<_, _>>()?,
            c.iter().map(|v| sf(&format!("{v}/2"), dim)).collect::<Result<_, _>>()?,
            samples,
        )
        .map_err(e)?;
        let gbar = m.metric().map_err(e)?;
        let g = pullback_metric(&phi, &gbar).map_err(e)?;
        let f = catalog::fields(dim);
        let five: [VectorField; 5] = std::array::from_fn(|k| f[k + 3].field.clone());
        let r = isometry_invariance_residual(&phi, &g, &gbar, &five).map_err(e)?;
        worst = worst.max(r.connection).max(r.curvature);
        cases += 1;
    }
    check(worst < INVARIANCE_TOL, format!("{cases} isometries: connection/curvature residual {worst:.2e} (< {INVARIANCE_TOL:e})"))
}

fn c9_adapted() -> Verdict {
    let (mut adapted, mut shifted, mut principal, mut split) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for m in catalog::metrics() {
        let g = m.metric().map_err(e)?;
        let h = m.h_fields().map_err(e)?;
        let theta = Arc::new(RiemannianConnection::new(&h).map_err(e)?);
        let lambda = catalog::parse_scalar("exp(x)", m.dim()).map_err(e)?;
        let tb = conformal_shift(theta.clone() as Ordinary, lambda.clone());
        let gb = TwoMetric::conformal(lambda, g.clone());
        let pts = points(&m, 10);
        for [x, y, z, w] in catalog::field_tuples(m.dim()) {
            adapted = adapted.max(adapted_residual(&*theta, &g, &x, &y, &z, &pts).map_err(e)?.value);
            shifted = shifted.max(adapted_residual(&tb, &gb, &x, &y, &z, &pts).map_err(e)?.value);
            let d = principal_probe(&tb, &y).sub(&principal_probe(&*theta, &y));
            for c in d.components() {
                principal = principal.max(sup_norm(c, &pts).map_err(e)?.value);
            }
            split = split.max(computa_split(&g, &*theta, &x, &y, &z, &w, &pts).map_err(e)?.max_mismatch());
        }
    }
    let g = TwoMetric::standard(2);
    let nabla = nabla_g(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let pts = BoxDomain::cube(2, -1.0, 1.0).random_points(200, 43);
    let mut r2 = 0.0f64;
    for p in &pts {
        let q: Vec<VectorField> = (0..4).map(|_| catalog::random_field(2, &mut rng)).collect();
        let direct = nabla.apply(&q[0], &q[1]).at2(&q[2], &q[3]).value(p).map_err(e)?;
        let explicit = nabla_gst_r2(&q[0], &q[1], &q[2], &q[3], p).map_err(e)?;
        r2 = r2.max((explicit - direct).abs() / direct.abs().max(1.0));
    }
    check(
        adapted < ADAPTED_TOL && shifted < ADAPTED_TOL && principal < PRINCIPAL_TOL && split < COMPUTA_TOL && r2 < R2_FORMULA_TOL,
        format!(
            "adapted {adapted:.1e}, shifted {shifted:.1e} (< {ADAPTED_TOL:e}); principal part change {principal:.1e} (< {PRINCIPAL_TOL:e}); split {split:.1e} (< {COMPUTA_TOL:e}); R2 formula {r2:.1e} on 200 draws (< {R2_FORMULA_TOL:e})"
        ),
    )
}

fn c10_stationary() -> Verdict {
    let dom = BoxDomain::cube(2, -1.0, 1.0);
    let mut pts = dom.grid(5);
    pts.extend(dom.random_points(20, 42));
    let witnesses = catalog::stationarity_witnesses(42);
    // λ = 1: verdict must equal the divergence-free flag fixed by hand
    let g = TwoMetric::standard(2);
    let mut agree = 0;
    let cat = catalog::divergence_catalog();
    for (f, div_free) in &cat {
        let r = stationarity_residual(&g, f, &witnesses, &pts).map_err(e)?;
        agree += usize::from(r.is_stationary() == *div_free);
    }
    // λ = exp(x): generator outputs and counterexamples
    let lambda = catalog::parse_scalar("exp(x)", 2).map_err(e)?;
    let mut fields = Vec::new();
    let mut gen_div = 0.0f64;
    for psi in ["x*y", "x^2 + y^3", "sin(x)*cos(y)", "exp(y) - x"] {
        let x = stream_generator(&catalog::parse_scalar(psi, 2).map_err(e)?, &lambda).map_err(e)?;
        gen_div = gen_div.max(sup_norm(&div_residual(&x, &lambda), &pts).map_err(e)?.value);
        fields.push(Named::new(format!("gen({psi})"), x));
    }
    let generators = fields.len();
    for (name, comps) in [("e1", ["1", "0"]), ("rad", ["x", "y"]), ("rot", ["-y", "x"]), ("e2", ["0", "1"])] {
        fields.push(Named::new(name, catalog::parse_field(&comps).map_err(e)?));
    }
    let eq = equivalence_sweep(&lambda, &fields, &witnesses, &pts).map_err(e)?;
    let gens_stationary = eq.rows[..generators].iter().all(|r| r.stationary);
    let counter_rejected = eq.rows[generators..generators + 2].iter().all(|r| !r.stationary);
    // s2 on 100 random pairs
    let rnd = catalog::random_fields(2, 200, 42);
    let mut s2 = 0.0f64;
    for c in rnd.chunks(2) {
        s2 = s2.max(s2_residual(&c[0].field, &c[1].field, &pts).map_err(e)?);
    }
    check(
        agree == cat.len() && eq.all_agree() && gens_stationary && counter_rejected && gen_div < GENERATOR_DIV_TOL && s2 < STATIONARY_S2_TOL,
        format!(
            "lambda=1 agreement {agree}/{}; exp(x) agreement {}/{} (generators stationary: {gens_stationary}, counterexamples rejected: {counter_rejected}); generator div {gen_div:.1e} (< {GENERATOR_DIV_TOL:e}); s2 {s2:.1e} on 100 pairs (< {STATIONARY_S2_TOL:e})",
            cat.len(),
            eq.agreements,
            eq.rows.len()
        ),
    )
}

fn c11_flatten() -> Verdict {
    let dom = BoxDomain::cube(2, -1.0, 1.0);
    let grid = dom.grid(5);
    let mut worst = 0.0f64;
    for gtext in ["1", "3", "exp(2*y)", "1 + x^2"] {
        let g = catalog::parse_scalar(gtext, 2).map_err(e)?;
        let map = flatten_2d(&g, &dom, &grid, QUAD_TOL).map_err(e)?;
        worst = worst.max(flatten_residual(&map, &g, &grid).map_err(e)?.value);
    }
    check(
        worst < 100.0 * QUAD_TOL,
        format!("4 choices of G at 25 grid points: |J^2 - G| max {worst:.2e} (< {:e})", 100.0 * QUAD_TOL),
    )
}

fn c12_flat3d() -> Verdict {
    let dom = BoxDomain::cube(3, 0.0, 1.0);
    let pts = dom.random_points(10, 42);
    let id: [ScalarField; 3] = std::array::from_fn(ScalarField::coord);
    let sys = system_residual_3d(&id, &TwoMetric::standard(3), &pts).map_err(e)?.value;

    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut agree = 0;
    let mut solved = 0;
    for k in 0..50 {
        let fa = catalog::random_map3(&mut rng);
        let g = if k % 2 == 0 { flat_table(&fa) } else { flat_table(&catalog::random_map3(&mut rng)) };
        let b = beltrami_residual(&fa, &g, &pts).map_err(e)?.residual.value;
        let s = system_residual_3d(&fa, &g, &pts).map_err(e)?.value;
        agree += usize::from((b < SOLVES_TOL) == (s < SOLVES_TOL));
        solved += usize::from(s < SOLVES_TOL);
    }

    let mut inv_err = 0.0f64;
    for (a, r) in [([10.0, 0.0, 0.0], 2.0), ([-3.0, 4.0, 0.5], 1.5), ([2.0, 2.0, 2.0], 0.7)] {
        let text = format!("({r}^2 / ((x - {})^2 + (y - {})^2 + (z - {})^2))^4", a[0], a[1], a[2]);
        let lam = catalog::parse_scalar(&text, 3).map_err(e)?;
        match classify_conformal_3d(&lam, &dom, 200, 42, INVERSION_TOL).map_err(e)?.verdict {
            ConformalVerdict::FlatInversion { a: fa, r: fr, .. } => {
                let da = (0..3).map(|i| (fa[i] - a[i]).abs()).fold(0.0, f64::max);
                inv_err = inv_err.max(da).max((fr - r).abs());
            }
            v => return Err(format!("inversion family a={a:?} r={r}: {v:?}")),
        }
    }
    let expx = catalog::parse_scalar("exp(x)", 3).map_err(e)?;
    let nonflat = match classify_conformal_3d(&expx, &dom, 200, 42, INVERSION_TOL).map_err(e)?.verdict {
        ConformalVerdict::NonFlat { fit_residual, .. } => fit_residual,
        v => return Err(format!("exp(x1) classified {v:?}")),
    };
    check(
        sys < SYSTEM_TOL && agree == 50 && solved == 25 && inv_err < INVERSION_TOL && nonflat > NON_FLAT_MIN_RESIDUAL,
        format!(
            "identity system residual {sys:.1e} (< {SYSTEM_TOL:e}); Beltrami/system agreement {agree}/50 ({solved} solvable); inversion (a, r) error {inv_err:.1e} (< {INVERSION_TOL:e}); exp(x1) NON-FLAT residual {nonflat:.3} (> {NON_FLAT_MIN_RESIDUAL:e})"
        ),
    )
}

/// Smooth random expression in x, y.
fn random_smooth(rng: &mut ChaCha8Rng, depth: usize) -> String {
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..3) {
            0 => "x".into(),
            1 => "y".into(),
            _ => format!("{}", rng.gen_range(1..300) as f64 / 100.0),
        };
    }
    let a = random_smooth(rng, depth - 1);
    match rng.gen_range(0..9) {
        0 => format!("({a} + {})", random_smooth(rng, depth - 1)),
        1 => format!("({a} * {})", random_smooth(rng, depth - 1)),
        2 => format!("({a} / (2 + cos({})))", random_smooth(rng, depth - 1)),
        3 => format!("sin({a})"),
        4 => format!("cos({a})"),
        5 => format!("exp(sin({a}))"),
        6 => format!("ln(1 + ({a})^2)"),
        7 => format!("sqrt(2 + sin({a}))"),
        _ => format!("({a})^3"),
    }
}

fn c13_infrastructure() -> Verdict {
    let xy = ["x", "y"];
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut fd_worst = 0.0f64;
    for _ in 0..200 {
        let text = random_smooth(&mut rng, 4);
        let ex = parse(&text, &xy).map_err(e)?;
        let (p, d): ([f64; 2], [f64; 2]) =
            ([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)], [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let jet: J1 = ex.eval(&[Jet::new(p[0], d[0]), Jet::new(p[1], d[1])]).map_err(e)?;
        let h = 1e-5;
        let f = |s: f64| ex.eval(&[p[0] + s * d[0], p[1] + s * d[1]]);
        let fd = (f(h).map_err(e)? - f(-h).map_err(e)?) / (2.0 * h);
        fd_worst = fd_worst.max((jet.deriv - fd).abs() / jet.deriv.abs().max(1.0));
    }

    let alphabet = ["x", "y", "q", "(", ")", "+", "-", "*", "/", "^", "sin", "ln(", "sqrt", ".", "e", "1e", " ", "2", "0.5", "é", "\u{0}", ","];
    let mut panics = 0;
    let mut unbalanced_accepted = 0;
    for _ in 0..500 {
        let len = rng.gen_range(0..20);
        let text: String = (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
        let r = catch_unwind(AssertUnwindSafe(|| match parse(&text, &xy) {
            Ok(ex) => {
                let _ = ex.eval(&[0.3, -0.7]);
                true
            }
            Err(_) => false,
        }));
        match r {
            Err(_) => panics += 1,
            Ok(accepted) => {
                if accepted && text.matches('(').count() != text.matches(')').count() {
                    unbalanced_accepted += 1;
                }
            }
        }
    }

    let scenario = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/gst_r2_full.json");
    let dir = std::env::temp_dir().join(format!("tworiem-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(e)?;
    let mut reports = Vec::new();
    for (i, jobs) in ["1", "3"].iter().enumerate() {
        let out = dir.join(format!("r{i}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_tworiem"))
            .env_remove("TWORIEM_SEED")
            .args(["verify", "--seed", "42", "--jobs", jobs, "--report"])
            .arg(&out)
            .arg(scenario)
            .status()
            .map_err(e)?;
        if !status.success() {
            return Err(format!("bundled scenario exited with {status}"));
        }
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).map_err(e)?).map_err(e)?;
        strip_wall_time(&mut v);
        reports.push(serde_json::to_string_pretty(&v).map_err(e)?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    let same = reports[0] == reports[1];
    check(
        fd_worst < FD_REL_TOL && panics == 0 && unbalanced_accepted == 0 && same,
        format!(
            "jet vs central difference on 200 expressions {fd_worst:.1e} (< {FD_REL_TOL:e}); fuzz 500 cases: {panics} panics, {unbalanced_accepted} unbalanced accepted; reports identical modulo wall_time: {same}"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 13] = [
        ("axioms", c1_axioms),
        ("expansion equivalence", c2_expansion),
        ("Levi-Civita analogue", c3_levi_civita),
        ("curvature properties", c4_curvature),
        ("flat differential", c5_flat),
        ("curvature never vanishes", c6_never_vanish),
        ("Koszul obstruction", c7_obstruction),
        ("isometry invariance", c8_invariance),
        ("adapted machinery", c9_adapted),
        ("stationarity", c10_stationary),
        ("flatness, dim 2", c11_flatten),
        ("flatness, dim 3", c12_flat3d),
        ("infrastructure", c13_infrastructure),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match v {
            Ok(msg) => println!("[{:>2}] PASS {name}: {msg} [{secs:.2}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("[{:>2}] FAIL {name}: {msg} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} of 13 passed in {:.1}s", 13 - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
