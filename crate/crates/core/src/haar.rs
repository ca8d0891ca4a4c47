//! Haar measure integration on N in homogeneous polar coordinates.
//!
//! The unit sphere {d = 1} is charted by X = s ξ, Z = t ζ with
//! s = cosψ, t = sinψ (1 + cos²ψ)^{1/2} / 4, which satisfies
//! s⁴ + 16 t² = 1 identically. Writing n = δ_r(ω), so that s scales by √r
//! and t by r, gives
//! dm = r^{Q-1} Φ(ψ) dr dψ dξ dζ with
//! Φ(ψ) = cos^{2p-1}ψ (sinψ g(ψ)/4)^{k-1} / (4 g(ψ)), g = (1 + cos²ψ)^{1/2},
//! and the usual hyperspherical Jacobians for ξ ∈ S^{2p-1}, ζ ∈ S^{k-1}.
//! For k = 1 the angle ψ runs over [-π/2, π/2] and t carries the sign of Z.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::group::{HTypeGroup, Point};
use crate::quadrature::{integrate, integrate_1d, Estimate, QuadOptions};
use crate::special::sphere_area;

/// How the radial coordinate is parametrised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Radial {
    /// r itself on [0, R].
    Linear,
    /// v = ln(1 + r) on [0, ln(1 + R)], for integrands spread over many scales.
    Log,
}

fn phi(p: usize, k: usize, psi: f64) -> f64 {
    let c = psi.cos();
    let g = (1.0 + c * c).sqrt();
    let mut w = c.abs().powi(2 * p as i32 - 1) / (4.0 * g);
    if k > 1 {
        w *= (psi.sin() * g / 4.0).powi(k as i32 - 1);
    }
    w
}

pub(crate) fn sphere_angles_bounds(m: usize, lo: &mut Vec<f64>, hi: &mut Vec<f64>) {
    if m < 2 {
        return;
    }
    for _ in 0..m - 2 {
        lo.push(0.0);
        hi.push(PI);
    }
    lo.push(0.0);
    hi.push(2.0 * PI);
}

/// Writes the unit vector with the given hyperspherical angles into `out`
/// (length angles.len() + 1) and returns the angular Jacobian.
pub(crate) fn sphere_point(angles: &[f64], out: &mut [f64]) -> f64 {
    let m = angles.len() + 1;
    let mut prod = 1.0;
    let mut jac = 1.0;
    for (j, &th) in angles.iter().enumerate() {
        let (s, c) = th.sin_cos();
        out[j] = prod * c;
        prod *= s;
        if j + 2 < m {
            jac *= s.powi((m - 2 - j) as i32);
        }
    }
    out[m - 1] = prod;
    jac
}

/// Polar chart of N.
#[derive(Debug, Clone)]
pub struct Chart {
    p: usize,
    k: usize,
}

impl Chart {
    pub fn new(g: &HTypeGroup) -> Self {
        Self { p: g.p(), k: g.k() }
    }

    /// Number of chart coordinates (radius, ψ, sphere angles) = dim N.
    pub fn dim(&self) -> usize {
        2 * self.p + self.k
    }

    /// Bounds for (ψ, angles of ξ, angles of ζ).
    pub fn angle_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = Vec::new();
        let mut hi = Vec::new();
        if self.k == 1 {
            lo.push(-FRAC_PI_2);
        } else {
            lo.push(0.0);
        }
        hi.push(FRAC_PI_2);
        sphere_angles_bounds(2 * self.p, &mut lo, &mut hi);
        sphere_angles_bounds(self.k, &mut lo, &mut hi);
        (lo, hi)
    }

    /// Sets `out` = δ_r(ω(angles)) and returns the angular weight W, so that
    /// dm = r^{Q-1} W dr d(angles).
    pub fn point(&self, r: f64, angles: &[f64], out: &mut Point) -> f64 {
        let m = 2 * self.p;
        let psi = angles[0];
        let (sp, cp) = psi.sin_cos();
        let g = (1.0 + cp * cp).sqrt();
        let s = r.sqrt() * cp.max(0.0);
        let t = r * sp * g / 4.0;
        let mut w = phi(self.p, self.k, psi);
        w *= sphere_point(&angles[1..m], &mut out.x);
        for v in out.x.iter_mut() {
            *v *= s;
        }
        if self.k == 1 {
            out.z[0] = t;
        } else {
            w *= sphere_point(&angles[m..], &mut out.z);
            for v in out.z.iter_mut() {
                *v *= t;
            }
        }
        w
    }
}

/// ∫_{B(center, radius)} f dm by adaptive cubature in the polar chart
/// centred at `center`: n = center · δ_r(ω).
pub fn integrate_ball<F>(
    g: &HTypeGroup,
    center: &Point,
    radius: f64,
    radial: Radial,
    mut f: F,
    opts: &QuadOptions,
) -> Estimate
where
    F: FnMut(&Point) -> f64,
{
    let chart = Chart::new(g);
    let q = g.q() as i32;
    let (alo, ahi) = chart.angle_box();
    let mut lo = vec![0.0];
    let mut hi = vec![match radial {
        Radial::Linear => radius,
        Radial::Log => radius.ln_1p(),
    }];
    lo.extend(alo);
    hi.extend(ahi);
    let mut w = g.identity();
    let centered = !center.is_identity();
    integrate(
        |u: &[f64]| {
            let (r, dr) = match radial {
                Radial::Linear => (u[0], 1.0),
                Radial::Log => (u[0].exp_m1(), u[0].exp()),
            };
            if r <= 0.0 {
                return 0.0;
            }
            let weight = chart.point(r, &u[1..], &mut w);
            if weight == 0.0 {
                return 0.0;
            }
            let val = if centered { f(&g.mul(center, &w)) } else { f(&w) };
            val * weight * r.powi(q - 1) * dr
        },
        &lo,
        &hi,
        opts,
    )
}

/// ∫_{d(n) < radius} f(‖X‖, ‖Z‖) dm(n) for integrands depending only on the
/// norms of the two components; reduces to a 2-D integral over (r, ψ).
pub fn integrate_radial<F>(g: &HTypeGroup, radius: f64, radial: Radial, mut f: F, opts: &QuadOptions) -> Estimate
where
    F: FnMut(f64, f64) -> f64,
{
    let (p, k) = (g.p(), g.k());
    let q = g.q() as i32;
    let area = sphere_area(2 * p) * sphere_area(k);
    let top = match radial {
        Radial::Linear => radius,
        Radial::Log => radius.ln_1p(),
    };
    integrate(
        |u: &[f64]| {
            let (r, dr) = match radial {
                Radial::Linear => (u[0], 1.0),
                Radial::Log => (u[0].exp_m1(), u[0].exp()),
            };
            if r <= 0.0 {
                return 0.0;
            }
            let psi = u[1];
            let (sp, cp) = psi.sin_cos();
            let gg = (1.0 + cp * cp).sqrt();
            let s = r.sqrt() * cp.max(0.0);
            let t = r * sp * gg / 4.0;
            f(s, t) * phi(p, k, psi) * r.powi(q - 1) * dr
        },
        &[0.0, 0.0],
        &[top, FRAC_PI_2],
        opts,
    )
    .scale(area)
}

/// m(B(0̲, 1)) = |S^{2p-1}| |S^{k-1}| / Q · ∫_0^{π/2} Φ(ψ) dψ.
pub fn unit_ball_volume(g: &HTypeGroup) -> f64 {
    let (p, k) = (g.p(), g.k());
    let e = integrate_1d(|psi| phi(p, k, psi), 0.0, FRAC_PI_2, &QuadOptions::rel(1e-13));
    sphere_area(2 * p) * sphere_area(k) / g.q() as f64 * e.value
}

/// ∫_{d(n) > r} d(n)^{-e} dm(n) = Q v₁ r^{Q-e} / (e - Q), for e > Q.
pub fn power_tail(g: &HTypeGroup, exponent: f64, r: f64) -> f64 {
    let q = g.q() as f64;
    debug_assert!(exponent > q);
    q * g.unit_ball_volume() * r.powf(q - exponent) / (exponent - q)
}

/// Smallest R with `power_tail(g, exponent, R) * coeff <= budget`.
pub fn power_tail_radius(g: &HTypeGroup, exponent: f64, coeff: f64, budget: f64) -> f64 {
    let q = g.q() as f64;
    let c = coeff * q * g.unit_ball_volume() / (exponent - q);
    (c / budget).powf(1.0 / (exponent - q)).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::norm_d;

    #[test]
    fn heisenberg_unit_ball_volume() {
        let g = HTypeGroup::heisenberg(1).unwrap();
        assert!((g.unit_ball_volume() - PI * PI / 8.0).abs() < 1e-12);
    }

    #[test]
    fn chart_lands_on_sphere() {
        for g in [HTypeGroup::heisenberg(1).unwrap(), HTypeGroup::heisenberg(2).unwrap()] {
            let chart = Chart::new(&g);
            let (lo, hi) = chart.angle_box();
            let mut out = g.identity();
            for i in 0..50 {
                let a: Vec<f64> = lo
                    .iter()
                    .zip(&hi)
                    .enumerate()
                    .map(|(j, (l, h))| l + (h - l) * (((i * 7 + j * 3) % 50) as f64 + 0.5) / 50.0)
                    .collect();
                chart.point(2.5, &a, &mut out);
                assert!((norm_d(&out) - 2.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ball_integral_of_one_is_volume() {
        let g = HTypeGroup::heisenberg(1).unwrap();
        let c = Point::new(&[0.7, -0.2], &[0.4]);
        let e = integrate_ball(&g, &c, 1.5, Radial::Linear, |_| 1.0, &QuadOptions::rel(1e-9));
        let v = g.ball_volume(1.5).unwrap();
        assert!((e.value / v - 1.0).abs() < 1e-9, "{e:?} vs {v}");
    }

    #[test]
    fn higher_dimensional_volume_matches_cartesian() {
        // H²: v₁ = |S³| ∫_0^1 s³ (1 - s⁴)^{1/2} / 2 ds = 2π² · 1/12
        let g = HTypeGroup::heisenberg(2).unwrap();
        let v1 = 2.0 * PI * PI / 12.0;
        assert!((g.unit_ball_volume() - v1).abs() < 1e-12);
        let e = integrate_ball(&g, &g.identity(), 1.0, Radial::Linear, |_| 1.0, &QuadOptions::rel(1e-8));
        assert!((e.value / v1 - 1.0).abs() < 1e-7, "{e:?}");
    }

    #[test]
    fn gaussian_integral_in_log_chart() {
        let g = HTypeGroup::heisenberg(1).unwrap();
        // ∫ exp(-‖X‖² - Z²) = π · √π
        let exact = PI * PI.sqrt();
        let e = integrate_radial(&g, 400.0, Radial::Log, |s, t| (-s * s - t * t).exp(), &QuadOptions::rel(1e-10));
        assert!((e.value / exact - 1.0).abs() < 1e-9, "{e:?}");
        let e = integrate_ball(
            &g,
            &g.identity(),
            400.0,
            Radial::Log,
            |n| (-n.norm_x_sq() - n.norm_z_sq()).exp(),
            &QuadOptions::rel(1e-8),
        );
        assert!((e.value / exact - 1.0).abs() < 1e-7, "{e:?}");
    }

    #[test]
    fn power_tail_matches_quadrature() {
        let g = HTypeGroup::heisenberg(1).unwrap();
        let inner = integrate_radial(
            &g,
            1e6,
            Radial::Log,
            |s, t| {
                let d = (s.powi(4) + 16.0 * t * t).sqrt();
                if d > 3.0 {
                    d.powi(-5)
                } else {
                    0.0
                }
            },
            &QuadOptions::rel(1e-9).with_initial_divisions(4),
        );
        let exact = power_tail(&g, 5.0, 3.0) - power_tail(&g, 5.0, 1e6);
        // the jump at d = 3 limits what bisection can resolve
        assert!((inner.value / exact - 1.0).abs() < 1e-3, "{} {}", inner.value, exact);
    }
}
