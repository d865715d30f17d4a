//! Built-in metrics and families on the spacetime chart `(t, x, y, z)`.
//!
//! Family names take an optional argument: `bump` is the family in `m`,
//! `bump(3)` its member at `m = 3`.

use lorentz_topology::expr::{parse_scalar_expr, ParamBinding, ScalarExpr};
use lorentz_topology::geometry::{MetricField, Signature, TensorField};
use lorentz_topology::topology::Family;
use thiserror::Error;

pub const METRIC_NAMES: [&str; 4] = ["eta", "eta_prime", "h_euclid", "h_prime"];
pub const FAMILY_NAMES: [&str; 4] = ["bump", "origin_bump", "exp_bump", "scaled"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GerochError {
    #[error("unknown built-in '{0}' (metrics: eta, eta_prime, h_euclid, h_prime; families: bump, origin_bump, exp_bump, scaled)")]
    Unknown(String),
    #[error("malformed argument in '{0}'")]
    BadArgument(String),
    #[error("'{0}' is a metric and takes no argument")]
    UnexpectedArgument(String),
}

/// A one-parameter family of metrics with the signature of its members.
#[derive(Debug, Clone)]
pub struct MetricFamily {
    pub family: Family,
    pub signature: Signature,
}

impl MetricFamily {
    pub fn member_metric(&self, value: f64) -> Result<MetricField, lorentz_topology::geometry::GeometryError> {
        MetricField::from_covariant(self.family.member(value), self.signature)
    }
}

#[derive(Debug, Clone)]
pub enum Builtin {
    Metric(MetricField),
    Family(MetricFamily),
}

fn e(s: &str) -> ScalarExpr {
    parse_scalar_expr(s).expect("static expression")
}

fn lorentz_tt(tt: &str) -> TensorField {
    TensorField::diagonal_covariant(vec![e(tt), e("-1"), e("-1"), e("-1")])
}

/// `m = 2^j` for `j = 0..=12`.
pub fn geometric_values() -> Vec<f64> {
    (0..=12).map(|j| 2f64.powi(j)).collect()
}

/// `count` evenly spaced values on `[lo, hi]`.
pub fn linear_values(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * (i as f64 / (count - 1) as f64))
            .collect(),
    }
}

pub fn eta() -> MetricField {
    MetricField::minkowski(4)
}

/// `diag(e^t, -1, -1, -1)`.
pub fn eta_prime() -> MetricField {
    MetricField::from_covariant(lorentz_tt("exp(t)"), Signature::Lorentzian).expect("static metric")
}

pub fn h_euclid() -> MetricField {
    MetricField::euclidean(4)
}

/// Contravariant `diag(e^{-t}, 1, 1, 1)`.
pub fn h_prime() -> MetricField {
    let contra = TensorField::diagonal_contravariant(vec![e("exp(-t)"), e("1"), e("1"), e("1")]);
    MetricField::from_contravariant(contra, Signature::Riemannian).expect("static metric")
}

/// `tt = 1 + m/(1+(x-m)^2)`: a bump of height `m` travelling out along
/// `x`. The maximiser `(0, m, 0, 0)` is a family probe.
pub fn bump() -> MetricFamily {
    let family = Family::new("bump", "m", lorentz_tt("1 + m/(1+(x-m)^2)"), geometric_values())
        .with_probes(vec![vec![e("0"), e("m"), e("0"), e("0")]]);
    MetricFamily {
        family,
        signature: Signature::Lorentzian,
    }
}

/// `tt = 1 + 1/(m^2+x^2+y^2+z^2)`: a bump at the origin of height `m^-2`.
pub fn origin_bump() -> MetricFamily {
    MetricFamily {
        family: Family::new("origin_bump", "m", lorentz_tt("1 + 1/(m^2+x^2+y^2+z^2)"), geometric_values()),
        signature: Signature::Lorentzian,
    }
}

/// `tt = exp(t) + 1/(m^2+x^2+y^2+z^2)`, the origin bump on top of `eta_prime`.
pub fn exp_bump() -> MetricFamily {
    MetricFamily {
        family: Family::new("exp_bump", "m", lorentz_tt("exp(t) + 1/(m^2+x^2+y^2+z^2)"), geometric_values()),
        signature: Signature::Lorentzian,
    }
}

/// `lambda * eta`.
pub fn scaled() -> MetricFamily {
    let field = eta().covariant().scale(&e("lambda"));
    MetricFamily {
        family: Family::new("scaled", "lambda", field, linear_values(0.5, 2.0, 11)),
        signature: Signature::Lorentzian,
    }
}

fn family(name: &str) -> Option<MetricFamily> {
    match name {
        "bump" => Some(bump()),
        "origin_bump" => Some(origin_bump()),
        "exp_bump" => Some(exp_bump()),
        "scaled" => Some(scaled()),
        _ => None,
    }
}

fn metric(name: &str) -> Option<MetricField> {
    match name {
        "eta" => Some(eta()),
        "eta_prime" => Some(eta_prime()),
        "h_euclid" => Some(h_euclid()),
        "h_prime" => Some(h_prime()),
        _ => None,
    }
}

/// Looks up `name`, which is a metric, a family, or a family with its
/// parameter bound (`origin_bump(2)`, `scaled(0.5)`).
pub fn builtin_geroch(name: &str) -> Result<Builtin, GerochError> {
    let name = name.trim();
    let (base, arg) = match name.split_once('(') {
        Some((base, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| GerochError::BadArgument(name.into()))?;
            let value: f64 = inner
                .trim()
                .parse()
                .map_err(|_| GerochError::BadArgument(name.into()))?;
            if !value.is_finite() {
                return Err(GerochError::BadArgument(name.into()));
            }
            (base.trim(), Some(value))
        }
        None => (name, None),
    };
    if let Some(m) = metric(base) {
        return match arg {
            None => Ok(Builtin::Metric(m)),
            Some(_) => Err(GerochError::UnexpectedArgument(base.into())),
        };
    }
    let f = family(base).ok_or_else(|| GerochError::Unknown(name.into()))?;
    match arg {
        None => Ok(Builtin::Family(f)),
        Some(v) => {
            let binding = ParamBinding::new().with(&f.family.param, v);
            let cov = f.family.field.bind_params(&binding);
            MetricField::from_covariant(cov, f.signature)
                .map(Builtin::Metric)
                .map_err(|_| GerochError::BadArgument(name.into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lorentz_topology::geometry::Chart;

    fn tt_at(m: &MetricField, p: &[f64]) -> f64 {
        m.covariant().eval_at(&Chart::spacetime(), p, &ParamBinding::new()).unwrap()[0]
    }

    #[test]
    fn bound_members_have_the_transcribed_components() {
        let Builtin::Metric(b) = builtin_geroch("bump(3)").unwrap() else {
            panic!("expected a metric")
        };
        assert_eq!(tt_at(&b, &[0.0, 3.0, 0.0, 0.0]), 4.0);
        assert_eq!(tt_at(&b, &[0.0, 4.0, 0.0, 0.0]), 2.5);
        let Builtin::Metric(o) = builtin_geroch("origin_bump(2)").unwrap() else {
            panic!("expected a metric")
        };
        assert_eq!(tt_at(&o, &[0.0; 4]), 1.25);
        assert!((tt_at(&o, &[5.0, 1.0, 1.0, 2.0]) - (1.0 + 1.0 / 10.0)).abs() < 1e-15);
        let Builtin::Metric(x) = builtin_geroch(" exp_bump( 1 ) ").unwrap() else {
            panic!("expected a metric")
        };
        assert!((tt_at(&x, &[1.0, 0.0, 0.0, 0.0]) - (1f64.exp() + 1.0)).abs() < 1e-14);
        let Builtin::Metric(s) = builtin_geroch("scaled(2)").unwrap() else {
            panic!("expected a metric")
        };
        let v = s.covariant().eval_at(&Chart::spacetime(), &[0.0; 4], &ParamBinding::new()).unwrap();
        assert_eq!((v[0], v[5], v[15]), (2.0, -2.0, -2.0));
    }

    #[test]
    fn references_have_the_stated_contravariant_forms() {
        let chart = Chart::spacetime();
        let hp = h_prime().contravariant().eval_at(&chart, &[1.5, 0.0, 0.0, 0.0], &ParamBinding::new()).unwrap();
        assert!((hp[0] - (-1.5f64).exp()).abs() < 1e-15);
        assert_eq!(hp[5], 1.0);
        let ep = eta_prime().contravariant().eval_at(&chart, &[2.0, 0.0, 0.0, 0.0], &ParamBinding::new()).unwrap();
        assert!((ep[0] - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(ep[15], -1.0);
        let points = lorentz_topology::sampling::random_points(4, 3.0, 20, 4);
        for m in [eta(), eta_prime(), h_euclid(), h_prime()] {
            m.verify(&chart, &ParamBinding::new(), &points).unwrap();
        }
    }

    #[test]
    fn names_are_validated() {
        assert!(matches!(builtin_geroch("bump"), Ok(Builtin::Family(_))));
        assert!(matches!(builtin_geroch("eta"), Ok(Builtin::Metric(_))));
        assert_eq!(builtin_geroch("bmup").unwrap_err(), GerochError::Unknown("bmup".into()));
        assert_eq!(builtin_geroch("eta(2)").unwrap_err(), GerochError::UnexpectedArgument("eta".into()));
        assert!(matches!(builtin_geroch("bump(x)"), Err(GerochError::BadArgument(_))));
        assert!(matches!(builtin_geroch("bump(2"), Err(GerochError::BadArgument(_))));
        for name in METRIC_NAMES.iter().chain(&FAMILY_NAMES) {
            builtin_geroch(name).unwrap();
        }
    }

    #[test]
    fn family_probe_follows_the_bump() {
        let f = bump().family;
        let d = lorentz_topology::norms::Domain::new(
            Chart::spacetime(),
            lorentz_topology::norms::CompactExhaustion::new(4, 1.0, 1, 3).unwrap(),
            0,
        );
        assert_eq!(f.member_probes(7.0, &d).unwrap(), vec![vec![0.0, 7.0, 0.0, 0.0]]);
    }
}
