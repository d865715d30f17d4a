//! Seeded random metric families on the chart `(t, x)`, for checks that
//! quantify over families.

use crate::geroch::{geometric_values, MetricFamily};
use lorentz_topology::expr::{parse_scalar_expr, ScalarExpr};
use lorentz_topology::geometry::{Chart, MetricField, Signature, TensorField};
use lorentz_topology::topology::Family;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    /// `A m^-p / (1 + (t-a)^2 + (x-b)^2)`.
    Decaying,
    /// `A m^q / (1 + (x - s m)^2)` with a probe at the maximiser.
    Travelling,
    /// `A max(0, c - m) / (1 + x^2)`: identically zero once `m ≥ c`.
    EventuallyZero,
    /// `A / (1 + (t-a)^2 + (x-b)^2)`, independent of `m`.
    Constant,
}

/// A random family converging (or not) to a constant Lorentz metric.
#[derive(Debug, Clone)]
pub struct RandomCase {
    pub template: Template,
    pub family: MetricFamily,
    pub limit: MetricField,
}

pub fn random_chart() -> Chart {
    Chart::new(&["t", "x"]).expect("static chart")
}

fn e(s: &str) -> ScalarExpr {
    parse_scalar_expr(s).expect("generated expression")
}

/// `count` families from `seed`, cycling through the templates. Each adds
/// a positive perturbation to the `tt` entry of `diag(a, -b)`, which is the
/// limit.
pub fn random_families(count: usize, seed: u64) -> Vec<RandomCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let a: f64 = rng.gen_range(0.5..2.0);
            let b: f64 = rng.gen_range(0.5..2.0);
            let amp: f64 = rng.gen_range(0.2..2.0);
            let (ct, cx): (f64, f64) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let template = [
                Template::Decaying,
                Template::Travelling,
                Template::EventuallyZero,
                Template::Constant,
            ][i % 4];
            let mut probes = Vec::new();
            let bump = match template {
                Template::Decaying => {
                    let p = rng.gen_range(1..=2);
                    format!("({amp})*m^(-{p})/(1 + (t - ({ct}))^2 + (x - ({cx}))^2)")
                }
                Template::Travelling => {
                    let q = rng.gen_range(0..=1);
                    let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    probes.push(vec![e("0"), e(&format!("({s})*m"))]);
                    format!("({amp})*m^{q}/(1 + (x - ({s})*m)^2)")
                }
                Template::EventuallyZero => {
                    let c = rng.gen_range(2..=4);
                    format!("({amp})*(({c} - m) + abs({c} - m))/2/(1 + x^2)")
                }
                Template::Constant => format!("({amp})/(1 + (t - ({ct}))^2 + (x - ({cx}))^2)"),
            };
            let field = TensorField::diagonal_covariant(vec![e(&format!("{a} + {bump}")), e(&format!("-({b})"))]);
            let family = Family::new(&format!("random_{i}"), "m", field, geometric_values()).with_probes(probes);
            let limit = MetricField::from_covariant(
                TensorField::diagonal_covariant(vec![ScalarExpr::constant(a), ScalarExpr::constant(-b)]),
                Signature::Lorentzian,
            )
            .expect("constant metric");
            RandomCase {
                template,
                family: MetricFamily {
                    family,
                    signature: Signature::Lorentzian,
                },
                limit,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use lorentz_topology::expr::ParamBinding;

    #[test]
    fn families_are_reproducible_and_lorentzian() {
        let a = random_families(8, 5);
        let b = random_families(8, 5);
        let chart = random_chart();
        let points = lorentz_topology::sampling::random_points(2, 10.0, 20, 1);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.family.family.field, y.family.family.field);
            for &m in &x.family.family.values {
                let g = x.family.member_metric(m).unwrap();
                g.verify(&chart, &ParamBinding::new(), &points).unwrap();
            }
        }
        assert_ne!(random_families(1, 6)[0].family.family.field, a[0].family.family.field);
    }
}
