//! Stationary vector fields.

use serde::Serialize;

use crate::curvature::{Named, Witness};
use crate::error::{Error, Result};
use crate::fields::{divergence, lie_bracket, sup_norm, ScalarField, VectorField};
use crate::metric::TwoMetric;

/// Residual threshold for the stationarity and divergence verdicts.
pub const STATIONARY_TOL: f64 = 1e-8;

/// `𝔚(X,Y,Z) = g([Z,X],Y/Z) + g(X,[Z,Y]/Z) − Z g(X,Y/Z)`.
pub fn w_map(g: &TwoMetric, x: &VectorField, y: &VectorField, z: &VectorField) -> ScalarField {
    g.g(&lie_bracket(z, x), y, z) + g.g(x, &lie_bracket(z, y), z) - z.apply(&g.g(x, y, z))
}

/// `X g(Y,Y/X) − 2g([X,Y],Y/X)`.
pub fn stationarity_field(g: &TwoMetric, x: &VectorField, y: &VectorField) -> ScalarField {
    x.apply(&g.g(y, y, x)) - g.g(&lie_bracket(x, y), y, x).scale(2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum Stationarity {
    #[serde(rename = "stationary-on-catalog")]
    Stationary,
    #[serde(rename = "non-stationary")]
    NonStationary { witness: Witness },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StationarityReport {
    pub field: String,
    /// Sup residual per witness, in catalog order.
    pub residuals: Vec<(String, f64)>,
    pub max_residual: f64,
    #[serde(flatten)]
    pub verdict: Stationarity,
}

impl StationarityReport {
    pub fn is_stationary(&self) -> bool {
        self.verdict == Stationarity::Stationary
    }
}

pub fn stationarity_residual(
    g: &TwoMetric,
    x: &Named,
    witnesses: &[Named],
    points: &[Vec<f64>],
) -> Result<StationarityReport> {
    let mut residuals = Vec::with_capacity(witnesses.len());
    let mut best = Witness { fields: vec![], point: vec![], value: 0.0 };
    for y in witnesses {
        let p = sup_norm(&stationarity_field(g, &x.field, &y.field), points)?;
        residuals.push((y.name.clone(), p.value));
        if p.value > best.value {
            best = Witness { fields: vec![x.name.clone(), y.name.clone()], point: p.point, value: p.value };
        }
    }
    let max_residual = best.value;
    let verdict = if max_residual < STATIONARY_TOL {
        Stationarity::Stationary
    } else {
        Stationarity::NonStationary { witness: best }
    };
    Ok(StationarityReport { field: x.name.clone(), residuals, max_residual, verdict })
}

/// `2·div(X) + X(ln λ)`.
pub fn div_residual(x: &VectorField, lambda: &ScalarField) -> ScalarField {
    divergence(x).scale(2.0) + x.apply(&lambda.ln())
}

/// `λ^{-1/2}·(∂ψ/∂y, −∂ψ/∂x)`.
pub fn stream_generator(psi: &ScalarField, lambda: &ScalarField) -> Result<VectorField> {
    let n = 2;
    let (ex, ey) = (VectorField::basis(n, 0), VectorField::basis(n, 1));
    let c = lambda.powf(-0.5);
    Ok(VectorField::new(vec![&c * &ey.apply(psi), -(&c * &ex.apply(psi))]))
}

/// `X g^st(Y,Y/X) − 2g^st([X,Y],Y/X) − 2div(X)·g^st(Y,Y/X)` in ℝ².
pub fn s2_field(x: &VectorField, y: &VectorField) -> Result<ScalarField> {
    if x.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: x.dim() });
    }
    let g = TwoMetric::standard(2);
    Ok(stationarity_field(&g, x, y) - (divergence(x) * g.g(y, y, x)).scale(2.0))
}

pub fn s2_residual(x: &VectorField, y: &VectorField, points: &[Vec<f64>]) -> Result<f64> {
    Ok(sup_norm(&s2_field(x, y)?, points)?.value)
}

/// One row of the conformal ℝ² biconditional.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceRow {
    pub field: String,
    pub stationarity_residual: f64,
    pub div_residual: f64,
    pub stationary: bool,
    pub solves_div: bool,
    pub agree: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub rows: Vec<EquivalenceRow>,
    pub agreements: usize,
}

impl EquivalenceReport {
    pub fn all_agree(&self) -> bool {
        self.agreements == self.rows.len()
    }
}

/// For `g = λ·g^st` on ℝ², compare the stationarity verdict with `2div(X) + X(ln λ) = 0`.
pub fn equivalence_sweep(
    lambda: &ScalarField,
    fields: &[Named],
    witnesses: &[Named],
    points: &[Vec<f64>],
) -> Result<EquivalenceReport> {
    for p in points {
        let l = lambda.value(p)?;
        if !(l > 0.0) {
            return Err(Error::NonPositiveLambda { value: l, point: p.clone() });
        }
    }
    let g = TwoMetric::conformal(lambda.clone(), TwoMetric::standard(2));
    let mut rows = Vec::with_capacity(fields.len());
    for x in fields {
        let st = stationarity_residual(&g, x, witnesses, points)?;
        let d = sup_norm(&div_residual(&x.field, lambda), points)?.value;
        let (stationary, solves_div) = (st.is_stationary(), d < STATIONARY_TOL);
        rows.push(EquivalenceRow {
            field: x.name.clone(),
            stationarity_residual: st.max_residual,
            div_residual: d,
            stationary,
            solves_div,
            agree: stationary == solves_div,
        });
    }
    let agreements = rows.iter().filter(|r| r.agree).count();
    Ok(EquivalenceReport { rows, agreements })
}

/// `Y g(Z,Z/X) − 2g([Y,Z],Z/X)` for `Y = f·X`.
pub fn kernel_residual(g: &TwoMetric, x: &VectorField, f: &ScalarField, z: &VectorField, points: &[Vec<f64>]) -> Result<f64> {
    let y = x.scale(f);
    let r = y.apply(&g.g(z, z, x)) - g.g(&lie_bracket(&y, z), z, x).scale(2.0);
    Ok(sup_norm(&r, points)?.value)
}

/// First multiplier `φ` for which `φ·X` is not stationary, with its report.
pub fn orbit_witness(
    g: &TwoMetric,
    x: &Named,
    multipliers: &[(String, ScalarField)],
    witnesses: &[Named],
    points: &[Vec<f64>],
) -> Result<Option<(String, StationarityReport)>> {
    for (name, phi) in multipliers {
        let fx = Named::new(format!("{name}*{}", x.name), x.field.scale(phi));
        let r = stationarity_residual(g, &fx, witnesses, points)?;
        if !r.is_stationary() {
            return Ok(Some((name.clone(), r)));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::BoxDomain;

    const XY: [&str; 2] = ["x", "y"];

    fn vf(a: &str, b: &str) -> VectorField {
        VectorField::parse(&[a, b], &XY).unwrap()
    }

    fn sf(s: &str) -> ScalarField {
        ScalarField::parse(s, &XY).unwrap()
    }

    fn pts() -> Vec<Vec<f64>> {
        BoxDomain::cube(2, -1.0, 1.0).random_points(8, 3)
    }

    fn witnesses() -> Vec<Named> {
        [("e1", "1", "0"), ("e2", "0", "1"), ("a", "x", "y^2"), ("b", "x*y", "1"), ("c", "y", "x^2")]
            .iter()
            .map(|(n, a, b)| Named::new(*n, vf(a, b)))
            .collect()
    }

    #[test]
    fn w_map_examples() {
        let g = TwoMetric::standard(2);
        let (e2, x) = (vf("0", "1"), vf("x", "0"));
        let c = w_map(&g, &vf("1", "2"), &vf("3", "1"), &vf("1", "1"));
        assert_eq!(c.value(&[0.2, 0.1]).unwrap(), 0.0);
        for p in pts() {
            let v = w_map(&g, &e2, &e2, &x).value(&p).unwrap();
            assert!((v + 2.0 * p[0] * p[0]).abs() < 1e-12);
            assert_eq!(w_map(&g, &x, &e2, &e2).value(&p).unwrap(), 0.0);
        }
        // scaling law with φ = x
        let phi = sf("x");
        let (a, b, z) = (vf("x*y", "1"), vf("y^2", "x"), vf("1", "x - y"));
        let lhs = w_map(&g, &a, &b, &z.scale(&phi));
        let rhs = &(&phi * &(&phi * &phi)) * &w_map(&g, &a, &b, &z) - &phi * &(z.apply(&(&phi * &phi)) * g.g(&a, &b, &z));
        assert!(sup_norm(&(lhs - rhs), &pts()).unwrap().value < 1e-9);
    }

    #[test]
    fn stationarity_examples() {
        let g = TwoMetric::standard(2);
        let rot = stationarity_residual(&g, &Named::new("rot", vf("-y", "x")), &witnesses(), &pts()).unwrap();
        assert!(rot.is_stationary(), "{rot:?}");
        let rad = stationarity_residual(&g, &Named::new("rad", vf("x", "y")), &witnesses(), &pts()).unwrap();
        match &rad.verdict {
            Stationarity::NonStationary { witness } => assert!(witness.value > 0.1),
            v => panic!("{v:?}"),
        }
        let zero = stationarity_residual(&g, &Named::new("0", VectorField::zero(2)), &witnesses(), &pts()).unwrap();
        assert!(zero.is_stationary() && zero.max_residual == 0.0);
    }

    #[test]
    fn div_examples() {
        let one = ScalarField::constant(1.0);
        assert!(sup_norm(&div_residual(&vf("-y", "x"), &one), &pts()).unwrap().value == 0.0);
        for p in pts() {
            assert_eq!(div_residual(&vf("x", "y"), &one).value(&p).unwrap(), 4.0);
            assert!((div_residual(&vf("1", "0"), &sf("exp(x)")).value(&p).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn generator_examples() {
        let one = ScalarField::constant(1.0);
        let x = stream_generator(&sf("(x^2 + y^2)/2"), &one).unwrap();
        let lam = sf("exp(x)");
        let e = stream_generator(&sf("y"), &lam).unwrap();
        for p in pts() {
            let v = x.value(&p).unwrap();
            assert!((v[0] - p[1]).abs() < 1e-15 && (v[1] + p[0]).abs() < 1e-15);
            let w = e.value(&p).unwrap();
            assert!((w[0] - (-p[0] / 2.0).exp()).abs() < 1e-14 && w[1] == 0.0);
        }
        assert!(sup_norm(&div_residual(&e, &lam), &pts()).unwrap().value < 1e-10);
        assert!(stream_generator(&ScalarField::constant(3.0), &lam).unwrap().is_zero());
    }

    #[test]
    fn s2_examples() {
        assert_eq!(s2_residual(&vf("1", "2"), &vf("x*y", "y^2"), &pts()).unwrap(), 0.0);
        let (x, e2) = (vf("x", "0"), vf("0", "1"));
        let g = TwoMetric::standard(2);
        for p in pts() {
            // both sides equal 2x²
            assert!((x.apply(&g.g(&e2, &e2, &x)).value(&p).unwrap() - 2.0 * p[0] * p[0]).abs() < 1e-12);
        }
        assert!(s2_residual(&x, &e2, &pts()).unwrap() < 1e-9);
        assert!(s2_residual(&vf("x^2*y", "sin(x)"), &vf("y - x", "x*y^2"), &pts()).unwrap() < 1e-8);
    }

    #[test]
    fn equivalence_examples() {
        let lam = sf("exp(x)");
        let gen = stream_generator(&sf("x*y + y^2"), &lam).unwrap();
        let fields = [Named::new("gen", gen), Named::new("e1", vf("1", "0"))];
        let r = equivalence_sweep(&lam, &fields, &witnesses(), &pts()).unwrap();
        assert!(r.all_agree(), "{r:?}");
        assert!(r.rows[0].stationary && r.rows[0].solves_div);
        assert!(!r.rows[1].stationary && !r.rows[1].solves_div);
        assert!((r.rows[1].div_residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_and_orbit() {
        let g = TwoMetric::standard(2);
        let rot = vf("-y", "x");
        for f in ["x", "x*y + 1", "sin(y)"] {
            assert!(kernel_residual(&g, &rot, &sf(f), &vf("x", "y^2"), &pts()).unwrap() < 1e-8);
        }
        let mults: Vec<(String, ScalarField)> = ["x", "y", "x + y", "x*y"].iter().map(|m| (m.to_string(), sf(m))).collect();
        let w = orbit_witness(&g, &Named::new("rot", rot), &mults, &witnesses(), &pts()).unwrap();
        assert!(w.is_some());
    }
}
