//! Scalar fields on S = N × (0, ∞).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::group::Point;

/// A point (n, a) of S.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpacePoint {
    pub n: Point,
    pub a: f64,
}

impl SpacePoint {
    pub fn new(n: Point, a: f64) -> Self {
        Self { n, a }
    }
}

/// Where a field's values come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Kernel,
    Transform,
    ClosedForm,
}

type FieldFn = dyn Fn(&Point, f64) -> Result<f64> + Send + Sync;

/// A real function of (n, a). Evaluation may fail when it involves quadrature.
#[derive(Clone)]
pub struct FieldOnS {
    f: Arc<FieldFn>,
    pub provenance: Provenance,
    pub label: String,
}

impl fmt::Debug for FieldOnS {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldOnS")
            .field("label", &self.label)
            .field("provenance", &self.provenance)
            .finish()
    }
}

impl FieldOnS {
    pub fn new<F>(label: impl Into<String>, provenance: Provenance, f: F) -> Self
    where
        F: Fn(&Point, f64) -> Result<f64> + Send + Sync + 'static,
    {
        Self { f: Arc::new(f), provenance, label: label.into() }
    }

    /// Wraps an infallible closed-form expression.
    pub fn closed_form<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&Point, f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(label, Provenance::ClosedForm, move |n, a| Ok(f(n, a)))
    }

    /// a^s.
    pub fn power_of_a(s: f64) -> Self {
        Self::closed_form(format!("a^{s}"), move |_, a| a.powf(s))
    }

    pub fn constant(c: f64) -> Self {
        Self::closed_form(format!("{c}"), move |_, _| c)
    }

    pub fn eval(&self, n: &Point, a: f64) -> Result<f64> {
        (self.f)(n, a)
    }

    pub fn at(&self, x: &SpacePoint) -> Result<f64> {
        (self.f)(&x.n, x.a)
    }

    /// (n, a) ↦ a^s · self(n, a).
    pub fn times_power_of_a(&self, s: f64) -> Self {
        let inner = self.clone();
        Self::new(format!("a^{s}*{}", self.label), self.provenance, move |n, a| {
            Ok(a.powf(s) * inner.eval(n, a)?)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powers_compose() {
        let f = FieldOnS::power_of_a(1.5).times_power_of_a(0.5);
        let n = Point::new(&[0.0, 0.0], &[0.0]);
        assert!((f.eval(&n, 3.0).unwrap() - 9.0).abs() < 1e-12);
        assert_eq!(FieldOnS::constant(2.0).eval(&n, 0.1).unwrap(), 2.0);
    }
}
