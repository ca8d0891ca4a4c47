//! Nonnegative densities on N and the wrappers produced by translating,
//! dilating, scaling and truncating the measures they define.

use std::fmt;
use std::sync::Arc;

use crate::group::{dilate_unchecked, norm_d, BallSpec, HTypeGroup, Point};
use crate::quadrature::{integrate_1d, QuadOptions};

/// Pointwise envelope f(n) ≤ sup · (1 + d(center⁻¹ n))^exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct Bound {
    pub center: Point,
    pub sup: f64,
    pub exponent: f64,
}

/// A nonnegative density with respect to Haar measure on N.
pub trait Density: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn eval(&self, g: &HTypeGroup, n: &Point) -> f64;

    fn bound(&self, g: &HTypeGroup) -> Bound;

    /// A ball outside of which the density vanishes identically.
    fn support(&self, _g: &HTypeGroup) -> Option<BallSpec> {
        None
    }

    /// `Some(c)` when the density is the constant c.
    fn constant(&self) -> Option<f64> {
        None
    }

    /// Upper bound for the mass outside B(bound.center, radius), if known.
    fn tail_mass(&self, g: &HTypeGroup, radius: f64) -> Option<f64> {
        let s = self.support(g)?;
        let b = self.bound(g);
        let reach = g.tau() * (g.quasi_distance(&b.center, &s.center) + s.radius);
        (reach <= radius).then_some(0.0)
    }
}

pub type DensityRef = Arc<dyn Density>;

/// f ≡ c. With c = 1 this is Haar measure itself.
#[derive(Debug, Clone)]
pub struct Constant(pub f64);

impl Density for Constant {
    fn name(&self) -> String {
        format!("constant({})", self.0)
    }
    fn eval(&self, _g: &HTypeGroup, _n: &Point) -> f64 {
        self.0
    }
    fn bound(&self, g: &HTypeGroup) -> Bound {
        Bound { center: g.identity(), sup: self.0, exponent: 0.0 }
    }
    fn constant(&self) -> Option<f64> {
        Some(self.0)
    }
}

/// amp · exp(−‖X‖² − ‖Z‖²) evaluated at center⁻¹ n.
#[derive(Debug, Clone)]
pub struct GaussianBump {
    pub center: Point,
    pub amplitude: f64,
}

impl GaussianBump {
    pub fn at_identity(g: &HTypeGroup) -> Self {
        Self { center: g.identity(), amplitude: 1.0 }
    }

    // exp(−‖X‖² − ‖Z‖²) ≤ exp(−min(d/√2, d²/32))
    fn radial_envelope(d: f64) -> f64 {
        (-(d / std::f64::consts::SQRT_2).min(d * d / 32.0)).exp()
    }
}

impl Density for GaussianBump {
    fn name(&self) -> String {
        "gaussian-bump".into()
    }
    fn eval(&self, g: &HTypeGroup, n: &Point) -> f64 {
        let m = g.left_divide(&self.center, n);
        self.amplitude * (-m.norm_x_sq() - m.norm_z_sq()).exp()
    }
    fn bound(&self, _g: &HTypeGroup) -> Bound {
        Bound { center: self.center.clone(), sup: self.amplitude, exponent: 0.0 }
    }
    fn tail_mass(&self, g: &HTypeGroup, radius: f64) -> Option<f64> {
        let q = g.q() as f64;
        let shell = q * g.unit_ball_volume();
        let top = radius.max(40.0) + 400.0;
        let e = integrate_1d(
            |r| Self::radial_envelope(r) * shell * r.powf(q - 1.0),
            radius,
            top,
            &QuadOptions::rel(1e-8).with_initial_divisions(8),
        );
        Some(self.amplitude * (e.value + e.error))
    }
}

/// amp · (1 − d(center⁻¹ n)²/R²)³ inside B(center, R), zero outside.
/// Since d² is a polynomial in the coordinates this is C² on N.
#[derive(Debug, Clone)]
pub struct CompactBump {
    pub center: Point,
    pub radius: f64,
    pub amplitude: f64,
}

impl Density for CompactBump {
    fn name(&self) -> String {
        "compact-bump".into()
    }
    fn eval(&self, g: &HTypeGroup, n: &Point) -> f64 {
        let d = g.quasi_distance(&self.center, n) / self.radius;
        if d >= 1.0 {
            0.0
        } else {
            self.amplitude * (1.0 - d * d).powi(3)
        }
    }
    fn bound(&self, _g: &HTypeGroup) -> Bound {
        Bound { center: self.center.clone(), sup: self.amplitude, exponent: 0.0 }
    }
    fn support(&self, _g: &HTypeGroup) -> Option<BallSpec> {
        Some(BallSpec { center: self.center.clone(), radius: self.radius })
    }
}

/// Indicator of a ball.
#[derive(Debug, Clone)]
pub struct BallIndicator(pub BallSpec);

impl Density for BallIndicator {
    fn name(&self) -> String {
        "ball-indicator".into()
    }
    fn eval(&self, g: &HTypeGroup, n: &Point) -> f64 {
        if g.in_ball(&self.0, n) {
            1.0
        } else {
            0.0
        }
    }
    fn bound(&self, _g: &HTypeGroup) -> Bound {
        Bound { center: self.0.center.clone(), sup: 1.0, exponent: 0.0 }
    }
    fn support(&self, _g: &HTypeGroup) -> Option<BallSpec> {
        Some(self.0.clone())
    }
}

/// (1 + d(n))^γ, an unbounded weight when γ > 0.
#[derive(Debug, Clone)]
pub struct PowerWeight(pub f64);

impl Density for PowerWeight {
    fn name(&self) -> String {
        format!("power-weight({})", self.0)
    }
    fn eval(&self, _g: &HTypeGroup, n: &Point) -> f64 {
        (1.0 + norm_d(n)).powf(self.0)
    }
    fn bound(&self, g: &HTypeGroup) -> Bound {
        Bound { center: g.identity(), sup: 1.0, exponent: self.0.max(0.0) }
    }
}

/// n ↦ f(n0 n): the density of the measure E ↦ μ(n0 E).
#[derive(Debug, Clone)]
pub struct Translated {
    pub inner: DensityRef,
    pub by: Point,
}

impl Density for Translated {
    fn name(&self) -> String {
        format!("translated({})", self.inner.name())
    }
    fn eval(&self, g: &HTypeGroup, n: &Point) -> f64 {
        self.inner.eval(g, &g.mul(&self.by, n))
    }
    fn bound(&self, g: &HTypeGroup) -> Bound {
        let b = self.inner.bound(g);
        Bound { center: g.left_divide(&self.by, &b.center), ..b }
    }
    fn support(&self, g: &HTypeGroup) -> Option<BallSpec> {
        self.inner
            .support(g)
            .map(|s| BallSpec { center: g.left_divide(&self.by, &s.center), radius: s.radius })
    }
    fn constant(&self) -> Option<f64> {
        self.inner.constant()
    }
    fn tail_mass(&self, g: &HTypeGroup, radius: f64) -> Option<f64> {
        self.inner.tail_mass(g, radius)
    }
}

/// n ↦ f(δ_r n): the density of ν_r(E) = r^{-Q} ν(δ_r E).
#[derive(Debug, Clone)]
pub struct Dilated {
    pub inner: DensityRef,
    pub r: f64,
}

impl Density for Dilated {
    fn name(&self) -> String {
        format!("dilated({})", self.inner.name())
    }
    fn eval(&self, g: &HTypeGroup, n: &Point) -> f64 {
        self.inner.eval(g, &dilate_unchecked(self.r, n))
    }
    fn bound(&self, g: &HTypeGroup) -> Bound {
        let b = self.inner.bound(g);
        Bound {
            center: dilate_unchecked(1.0 / self.r, &b.center),
            sup: b.sup * self.r.max(1.0).powf(b.exponent),
            exponent: b.exponent,
        }
    }
    fn support(&self, g: &HTypeGroup) -> Option<BallSpec> {
        self.inner.support(g).map(|s| BallSpec {
            center: dilate_unchecked(1.0 / self.r, &s.center),
            radius: s.radius / self.r,
        })
    }
    fn constant(&self) -> Option<f64> {
        self.inner.constant()
    }
    fn tail_mass(&self, g: &HTypeGroup, radius: f64) -> Option<f64> {
        self.inner
            .tail_mass(g, radius * self.r)
            .map(|m| m * self.r.powi(-(g.q() as i32)))
    }
}

/// c · f.
#[derive(Debug, Clone)]
pub struct Scaled {
    pub inner: DensityRef,
    pub factor: f64,
}

impl Density for Scaled {
    fn name(&self) -> String {
        format!("{}*{}", self.factor, self.inner.name())
    }
    fn eval(&self, g: &HTypeGroup, n: &Point) -> f64 {
        self.factor * self.inner.eval(g, n)
    }
    fn bound(&self, g: &HTypeGroup) -> Bound {
        let b = self.inner.bound(g);
        Bound { sup: b.sup * self.factor, ..b }
    }
    fn support(&self, g: &HTypeGroup) -> Option<BallSpec> {
        self.inner.support(g)
    }
    fn constant(&self) -> Option<f64> {
        self.inner.constant().map(|c| c * self.factor)
    }
    fn tail_mass(&self, g: &HTypeGroup, radius: f64) -> Option<f64> {
        self.inner.tail_mass(g, radius).map(|m| m * self.factor)
    }
}

/// f · 1_B.
#[derive(Debug, Clone)]
pub struct Truncated {
    pub inner: DensityRef,
    pub ball: BallSpec,
}

impl Density for Truncated {
    fn name(&self) -> String {
        format!("truncated({})", self.inner.name())
    }
    fn eval(&self, g: &HTypeGroup, n: &Point) -> f64 {
        if g.in_ball(&self.ball, n) {
            self.inner.eval(g, n)
        } else {
            0.0
        }
    }
    fn bound(&self, g: &HTypeGroup) -> Bound {
        let b = self.inner.bound(g);
        // the envelope is only needed on the ball; recentre there
        let far = g.quasi_distance(&b.center, &self.ball.center) + self.ball.radius;
        Bound {
            center: self.ball.center.clone(),
            sup: b.sup * (1.0 + g.tau() * far).powf(b.exponent),
            exponent: 0.0,
        }
    }
    fn support(&self, _g: &HTypeGroup) -> Option<BallSpec> {
        Some(self.ball.clone())
    }
}
