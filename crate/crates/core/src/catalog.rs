//! Fixed catalogs of metrics and polynomial fields used by sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curvature::Named;
use crate::error::Result;
use crate::fields::{BoxDomain, ScalarField, VectorField};
use crate::metric::TwoMetric;

pub fn coords(dim: usize) -> Vec<String> {
    match dim {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        _ => vec!["x".into(), "y".into(), "z".into()],
    }
}

pub fn parse_field(components: &[&str]) -> Result<VectorField> {
    VectorField::parse(components, &coords(components.len()))
}

pub fn parse_scalar(text: &str, dim: usize) -> Result<ScalarField> {
    ScalarField::parse(text, &coords(dim))
}

/// A catalog metric: the generating `h` as expression strings.
#[derive(Clone, Debug)]
pub struct CatalogMetric {
    pub name: &'static str,
    pub h: Vec<Vec<&'static str>>,
}

impl CatalogMetric {
    pub fn dim(&self) -> usize {
        self.h.len()
    }

    pub fn h_fields(&self) -> Result<Vec<Vec<ScalarField>>> {
        let n = self.dim();
        self.h.iter().map(|r| r.iter().map(|e| parse_scalar(e, n)).collect()).collect()
    }

    pub fn metric(&self) -> Result<TwoMetric> {
        TwoMetric::simple(self.h_fields()?)
    }

    /// Box on which `h` is positive definite.
    pub fn domain(&self) -> BoxDomain {
        BoxDomain::cube(self.dim(), -1.0, 1.0)
    }
}

pub fn metrics() -> Vec<CatalogMetric> {
    vec![
        CatalogMetric { name: "identity2", h: vec![vec!["1", "0"], vec!["0", "1"]] },
        CatalogMetric { name: "graph2", h: vec![vec!["1 + x^2", "x*y"], vec!["x*y", "1 + y^2"]] },
        CatalogMetric { name: "warped2", h: vec![vec!["exp(x)", "0"], vec!["0", "1 + y^2"]] },
        CatalogMetric { name: "identity3", h: vec![vec!["1", "0", "0"], vec!["0", "1", "0"], vec!["0", "0", "1"]] },
        CatalogMetric { name: "band3", h: vec![vec!["2", "x", "0"], vec!["x", "2", "y"], vec!["0", "y", "2"]] },
    ]
}

fn named(list: &[(&str, &[&str])]) -> Vec<Named> {
    list.iter().map(|(n, c)| Named::new(*n, parse_field(c).expect("catalog field parses"))).collect()
}

/// Polynomial vector fields.
pub fn fields(dim: usize) -> Vec<Named> {
    if dim == 2 {
        named(&[
            ("e1", &["1", "0"]),
            ("e2", &["0", "1"]),
            ("x_e2", &["0", "x"]),
            ("y_e1", &["y", "0"]),
            ("rad", &["x", "y"]),
            ("rot", &["-y", "x"]),
            ("p1", &["x*y", "1"]),
            ("p2", &["y^2", "x^2"]),
            ("p3", &["1", "x^2 - y"]),
            ("p4", &["x^2 - y", "x*y"]),
        ])
    } else {
        named(&[
            ("e1", &["1", "0", "0"]),
            ("e2", &["0", "1", "0"]),
            ("e3", &["0", "0", "1"]),
            ("x_e2", &["0", "x", "0"]),
            ("cyc", &["y", "z", "x"]),
            ("rad", &["x", "y", "z"]),
            ("rot", &["-y", "x", "0"]),
            ("p1", &["x*y", "1", "z"]),
            ("p2", &["z^2", "x", "y*z"]),
            ("p3", &["1", "x*z", "y^2"]),
        ])
    }
}

/// Six 4-tuples of catalog fields.
pub fn field_tuples(dim: usize) -> Vec<[VectorField; 4]> {
    let f = fields(dim);
    let pick = |i: [usize; 4]| i.map(|k| f[k % f.len()].field.clone());
    vec![pick([0, 2, 1, 0]), pick([4, 5, 6, 1]), pick([6, 7, 8, 3]), pick([2, 9, 4, 7]), pick([8, 3, 9, 5]), pick([7, 6, 2, 9])]
}

/// Scalar multipliers used for function-linearity checks.
pub fn multipliers(dim: usize) -> Vec<(String, ScalarField)> {
    let list: &[&str] = if dim == 2 { &["x", "y", "x + y", "x*y"] } else { &["x", "y", "x + z", "x*y*z"] };
    list.iter().map(|m| (m.to_string(), parse_scalar(m, dim).expect("multiplier parses"))).collect()
}

fn coef(rng: &mut ChaCha8Rng) -> f64 {
    (rng.gen_range(-1.0f64..1.0) * 1000.0).round() / 1000.0
}

/// Quadratic polynomial with seeded coefficients in [-1, 1].
pub fn random_polynomial(dim: usize, rng: &mut ChaCha8Rng, scale: f64) -> String {
    let c = coords(dim);
    let mut monomials = vec!["1".to_string()];
    for i in 0..dim {
        monomials.push(c[i].clone());
    }
    for i in 0..dim {
        for j in i..dim {
            monomials.push(format!("{}*{}", c[i], c[j]));
        }
    }
    let terms: Vec<String> = monomials.iter().map(|m| format!("({} * {m})", coef(rng) * scale)).collect();
    terms.join(" + ")
}

pub fn random_field(dim: usize, rng: &mut ChaCha8Rng) -> VectorField {
    let comps: Vec<String> = (0..dim).map(|_| random_polynomial(dim, rng, 1.0)).collect();
    VectorField::parse(&comps, &coords(dim)).expect("generated field parses")
}

/// `count` seeded random polynomial fields named `r0, r1, …`.
pub fn random_fields(dim: usize, count: usize, seed: u64) -> Vec<Named> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|i| Named::new(format!("r{i}"), random_field(dim, &mut rng))).collect()
}

/// Twelve fixed polynomial witnesses in ℝ² plus eight seeded random ones.
pub fn stationarity_witnesses(seed: u64) -> Vec<Named> {
    let mut w = named(&[
        ("e1", &["1", "0"]),
        ("e2", &["0", "1"]),
        ("e1+e2", &["1", "1"]),
        ("x_e1", &["x", "0"]),
        ("x_e2", &["0", "x"]),
        ("y_e1", &["y", "0"]),
        ("y_e2", &["0", "y"]),
        ("rad", &["x", "y"]),
        ("rot", &["-y", "x"]),
        ("p1", &["x*y", "1"]),
        ("p2", &["1", "x^2"]),
        ("p3", &["y^2", "x"]),
    ]);
    w.extend(random_fields(2, 8, seed));
    w
}

/// Evaluation grid for witness searches: 5×5 in the plane, 3×3×3 in space.
pub fn witness_grid(domain: &BoxDomain) -> Vec<Vec<f64>> {
    domain.grid(if domain.dim() == 2 { 5 } else { 3 })
}

/// Four divergence-free fields followed by four that are not.
pub fn divergence_catalog() -> Vec<(Named, bool)> {
    let free = named(&[("rot", &["-y", "x"]), ("const", &["1", "2"]), ("swap", &["y^2", "x^2"]), ("hyp", &["x", "-y"])]);
    let not = named(&[("rad", &["x", "y"]), ("x_e1", &["x", "0"]), ("sq", &["x^2", "y"]), ("xy", &["x*y", "x*y"])]);
    free.into_iter().map(|f| (f, true)).chain(not.into_iter().map(|f| (f, false))).collect()
}

/// `x + 0.1·(quadratic)` per component, a small perturbation of the identity.
pub fn random_map3(rng: &mut ChaCha8Rng) -> [ScalarField; 3] {
    let c = coords(3);
    std::array::from_fn(|i| {
        let text = format!("{} + {}", c[i], random_polynomial(3, rng, 0.1));
        ScalarField::parse(&text, &c).expect("generated map parses")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_metrics_are_valid() {
        for m in metrics() {
            let g = m.metric().unwrap();
            g.validate(&m.domain().random_points(20, 42)).unwrap();
        }
    }

    #[test]
    fn random_fields_are_reproducible() {
        let a = random_fields(2, 3, 7);
        let b = random_fields(2, 3, 7);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.field.value(&[0.3, 0.4]).unwrap(), y.field.value(&[0.3, 0.4]).unwrap());
        }
        assert_eq!(stationarity_witnesses(42).len(), 20);
        assert_eq!(field_tuples(3).len(), 6);
    }
}
