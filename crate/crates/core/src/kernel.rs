//! Poisson kernels, λ-Poisson kernels for λ = iβ, the generalized c-function
//! and the transforms 𝒬_{iβ}[μ], 𝒫_{iβ}[μ].

use serde::Serialize;

use crate::density::Density;
use crate::error::{Error, Result};
use crate::field::{FieldOnS, Provenance};
use crate::group::{dilate_unchecked, norm_d, HTypeGroup, Point};
use crate::haar::{integrate_ball, integrate_radial, power_tail, power_tail_radius, Radial};
use crate::measure::{BoundaryMeasure, MeasureKind};
use crate::quadrature::{Estimate, QuadOptions};
use crate::special::ln_gamma;

/// Largest β accepted; beyond this the Gamma factors overflow.
pub const MAX_BETA: f64 = 50.0;

/// 16a² + 8a‖X‖² + d(n)², the common denominator of all kernels.
#[inline]
pub fn kernel_base(n: &Point, a: f64) -> f64 {
    let x2 = n.norm_x_sq();
    16.0 * a * a + 8.0 * a * x2 + x2 * x2 + 16.0 * n.norm_z_sq()
}

/// 𝐜(−iβ) = 2^{Q−2β} Γ(2β) Γ((2p+k+1)/2) / [Γ(ρ+β) Γ((p+1)/2+β)].
pub fn c_function(g: &HTypeGroup, beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    if beta > MAX_BETA {
        return Err(Error::Range(format!("beta = {beta} exceeds {MAX_BETA}; Gamma factors overflow")));
    }
    let (p, k) = (g.p() as f64, g.k() as f64);
    let q = g.q() as f64;
    let rho = q / 2.0;
    let ln = (q - 2.0 * beta) * std::f64::consts::LN_2 + ln_gamma(2.0 * beta) + ln_gamma((2.0 * p + k + 1.0) / 2.0)
        - ln_gamma(rho + beta)
        - ln_gamma((p + 1.0) / 2.0 + beta);
    Ok(ln.exp())
}

/// Quadrature value of ∫_N ((1 + ‖X‖²/4)² + ‖Z‖²)^{-e} dm with a certified
/// tail bound; e must exceed Q/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelIntegral {
    pub value: f64,
    pub quad_error: f64,
    pub tail_bound: f64,
    pub radius: f64,
    pub evals: usize,
}

impl KernelIntegral {
    pub fn total_error(&self) -> f64 {
        self.quad_error + self.tail_bound
    }
}

/// ∫ ((1 + s²/4)² + t²)^{-e} over N, truncated at d = R with the tail bounded
/// through ((1 + s²/4)² + t²) ≥ d²/16.
pub fn base_power_integral(g: &HTypeGroup, e: f64, rel_tol: f64) -> KernelIntegral {
    let q = g.q() as f64;
    // crude lower bound for the value: the integrand is ≥ 4^{-e} on the unit ball
    let floor = 4f64.powf(-e) * g.unit_ball_volume();
    let coeff = 16f64.powf(e);
    let radius = power_tail_radius(g, 2.0 * e, coeff, 0.05 * rel_tol * floor);
    let est = integrate_radial(
        g,
        radius,
        Radial::Log,
        |s, t| {
            let u = 1.0 + s * s / 4.0;
            (u * u + t * t).powf(-e)
        },
        &QuadOptions::rel(0.5 * rel_tol).with_max_evals(5_000_000).with_initial_divisions(4),
    );
    debug_assert!(2.0 * e > q);
    KernelIntegral {
        value: est.value,
        quad_error: est.error,
        tail_bound: coeff * power_tail(g, 2.0 * e, radius),
        radius,
        evals: est.evals,
    }
}

/// c_{p,k} = 1 / ∫((1 + ‖X‖²/4)² + ‖Z‖²)^{-Q}.
pub(crate) fn compute_poisson_normalizer(g: &HTypeGroup) -> f64 {
    let i = base_power_integral(g, g.q() as f64, 1e-10);
    1.0 / i.value
}

/// P_a(n) = c_{p,k} a^Q / ((a + ‖X‖²/4)² + ‖Z‖²)^Q.
pub fn poisson_kernel(g: &HTypeGroup, n: &Point, a: f64) -> f64 {
    let q = g.q() as i32;
    let u = a + n.norm_x_sq() / 4.0;
    g.poisson_normalizer() * a.powi(q) / (u * u + n.norm_z_sq()).powi(q)
}

/// The same kernel written through the homogeneous norm:
/// P_a(n) = 16^Q c_{p,k} a^Q / (16a² + 8a‖X‖² + d(n)²)^Q.
pub fn poisson_kernel_d_form(g: &HTypeGroup, n: &Point, a: f64) -> f64 {
    let q = g.q() as i32;
    let x2 = n.norm_x_sq();
    let d = norm_d(n);
    16f64.powi(q) * g.poisson_normalizer() * a.powi(q) / (16.0 * a * a + 8.0 * a * x2 + d * d).powi(q)
}

/// The spectral parameter λ = iβ together with its normalizing constants.
#[derive(Debug, Clone)]
pub struct SpectralParam {
    group: HTypeGroup,
    beta: f64,
    c_pk: f64,
    c_fn: f64,
    c_i_beta: f64,
    c_beta: f64,
}

/// Constants reported alongside every experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralConstants {
    pub beta: f64,
    pub rho: f64,
    pub c_pk: f64,
    pub c_function: f64,
    pub c_i_beta: f64,
    pub c_beta: f64,
    pub tau: f64,
    pub unit_ball_volume: f64,
}

impl SpectralParam {
    pub fn new(group: &HTypeGroup, beta: f64) -> Result<Self> {
        let c_fn = c_function(group, beta)?;
        let anchor = c_function(group, group.rho())?;
        if (anchor - 1.0).abs() > 1e-12 {
            return Err(Error::Range(format!("c(-i rho) = {anchor} differs from 1")));
        }
        let c_pk = group.poisson_normalizer();
        let c_i_beta = c_pk / c_fn;
        let c_beta = 16f64.powf(group.rho() + beta) * c_i_beta;
        if !(c_beta > 0.0 && c_beta.is_finite()) {
            return Err(Error::Range(format!("c_beta = {c_beta} is not a positive finite number")));
        }
        Ok(Self { group: group.clone(), beta, c_pk, c_fn, c_i_beta, c_beta })
    }

    pub fn group(&self) -> &HTypeGroup {
        &self.group
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn rho(&self) -> f64 {
        self.group.rho()
    }
    /// β² − ρ², the eigenvalue of 𝓛 on 𝒫_{iβ}[μ].
    pub fn eigenvalue(&self) -> f64 {
        self.beta * self.beta - self.rho() * self.rho()
    }
    pub fn c_pk(&self) -> f64 {
        self.c_pk
    }
    /// 𝐜(−iβ).
    pub fn c_function(&self) -> f64 {
        self.c_fn
    }
    /// C_{iβ} = c_{p,k} / 𝐜(−iβ) = q^{iβ}(0̲).
    pub fn c_i_beta(&self) -> f64 {
        self.c_i_beta
    }
    /// c_β = 16^{ρ+β} C_{iβ}.
    pub fn c_beta(&self) -> f64 {
        self.c_beta
    }

    pub fn constants(&self) -> SpectralConstants {
        SpectralConstants {
            beta: self.beta,
            rho: self.rho(),
            c_pk: self.c_pk,
            c_function: self.c_fn,
            c_i_beta: self.c_i_beta,
            c_beta: self.c_beta,
            tau: self.group.tau(),
            unit_ball_volume: self.group.unit_ball_volume(),
        }
    }

    /// q^{iβ}_a(n) = c_β a^{2β} / (16a² + 8a‖X‖² + d(n)²)^{ρ+β}.
    pub fn q_kernel(&self, n: &Point, a: f64) -> f64 {
        self.c_beta * a.powf(2.0 * self.beta) / kernel_base(n, a).powf(self.rho() + self.beta)
    }

    /// Bound ∫_{d(n) > R} q^{iβ}_a(n) dm(n) ≤ c_β Q v₁ (R/a)^{-2β} / (2β).
    pub fn q_tail(&self, a: f64, radius: f64) -> f64 {
        let e = self.group.q() as f64 + 2.0 * self.beta;
        self.c_beta * power_tail(&self.group, e, radius / a)
    }

    /// ∫ q^{iβ}_a dm by quadrature over d < R, R chosen so that the certified
    /// tail is below a tenth of `rel_tol`.
    pub fn q_mass(&self, a: f64, rel_tol: f64) -> KernelIntegral {
        let g = &self.group;
        let e = g.q() as f64 + 2.0 * self.beta;
        let radius = a * power_tail_radius(g, e, self.c_beta, 0.1 * rel_tol);
        let est = integrate_radial(
            g,
            radius,
            Radial::Log,
            |s, t| {
                let n2 = s * s;
                let base = 16.0 * a * a + 8.0 * a * n2 + n2 * n2 + 16.0 * t * t;
                self.c_beta * a.powf(2.0 * self.beta) / base.powf(self.rho() + self.beta)
            },
            &QuadOptions::rel(0.1 * rel_tol).with_max_evals(5_000_000).with_initial_divisions(4),
        );
        KernelIntegral {
            value: est.value,
            quad_error: est.error,
            tail_bound: self.q_tail(a, radius),
            radius,
            evals: est.evals,
        }
    }

    /// 𝒬_{iβ}[μ](n, a) = ∫ q^{iβ}_a(n₁⁻¹ n) dμ(n₁).
    pub fn q_transform(&self, mu: &BoundaryMeasure, n: &Point, a: f64) -> Result<f64> {
        self.q_transform_estimate(mu, n, a).map(|e| e.value)
    }

    pub fn q_transform_estimate(&self, mu: &BoundaryMeasure, n: &Point, a: f64) -> Result<Estimate> {
        let g = &self.group;
        if *mu.group() != *g {
            return Err(Error::Structure("measure and spectral parameter live on different groups".into()));
        }
        g.check_point(n)?;
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("a must be positive, got {a}")));
        }
        mu.check_admissible(self.beta)?;
        match mu.kind() {
            MeasureKind::Atomic(atoms) => Ok(Estimate::exact(
                atoms
                    .iter()
                    .map(|at| at.weight * self.q_kernel(&g.left_divide(&at.at, n), a))
                    .sum(),
            )),
            MeasureKind::Density { f, quad } => self.density_transform(f.as_ref(), n, a, quad),
            MeasureKind::Mixture(parts) => {
                let mut acc = Estimate::exact(0.0);
                for p in parts {
                    acc = acc.add(self.q_transform_estimate(p, n, a)?);
                }
                Ok(acc)
            }
        }
    }

    fn density_transform(&self, f: &dyn Density, n: &Point, a: f64, quad: &QuadOptions) -> Result<Estimate> {
        let g = &self.group;
        if let Some(c) = f.constant() {
            // ∫ q^{iβ}_a = 1
            return Ok(Estimate::exact(c));
        }
        let tau = g.tau();
        if let Some(s) = f.support(g) {
            // Substituting around the probe only pays off when the kernel peak
            // sits inside the support and is narrow; otherwise the support is a
            // small corner of the w-ball and cubature can miss it.
            let dist = g.quasi_distance(&s.center, n);
            if dist >= s.radius || a >= s.radius / 4.0 {
                return self.transform_over_support(f, n, a, &s.center, s.radius, quad);
            }
            let reach = 1.01 * tau * (dist + s.radius) / a;
            let sup = f.bound(g).sup;
            return self.transform_by_substitution(f, n, a, reach, 0.0, sup, quad);
        }
        let b = f.bound(g);
        let gamma = b.exponent;
        let two_beta = 2.0 * self.beta;
        let dist = g.quasi_distance(&b.center, n);
        let scale = b.sup * (1.0 + tau * (dist + a)).powf(gamma);
        // ∫_{d(w)>R} q(w) f(n δ_a(w)⁻¹) ≤ scale · c_β Q v₁ R^{γ−2β} / (2β − γ)
        let qv = g.q() as f64 * g.unit_ball_volume();
        let coeff = scale * self.c_beta * qv / (two_beta - gamma);
        let budget = 0.1 * quad.rel_tol * scale;
        let reach = (coeff / budget).powf(1.0 / (two_beta - gamma)).max(1.0);
        let tail = coeff * reach.powf(gamma - two_beta);
        self.transform_by_substitution(f, n, a, reach, tail, scale, quad)
    }

    /// 𝒬f(n, a) = ∫ q^{iβ}(w) f(n δ_a(w)⁻¹) dm(w) over d(w) < reach.
    #[allow(clippy::too_many_arguments)]
    fn transform_by_substitution(
        &self,
        f: &dyn Density,
        n: &Point,
        a: f64,
        reach: f64,
        tail: f64,
        scale: f64,
        quad: &QuadOptions,
    ) -> Result<Estimate> {
        let g = &self.group;
        let opts = quad.with_abs(quad.abs_tol.max(1e-3 * quad.rel_tol * scale));
        let e = integrate_ball(
            g,
            &g.identity(),
            reach,
            Radial::Log,
            |w| {
                let qw = self.q_kernel(w, 1.0);
                let m = g.mul(n, &g.inverse(&dilate_unchecked(a, w)));
                qw * f.eval(g, &m)
            },
            &opts,
        )
        .require()?;
        Ok(Estimate { error: e.error + tail, ..e })
    }

    /// 𝒬f(n, a) = ∫_{B(c, R)} q^{iβ}_a(n₁⁻¹ n) f(n₁) dm(n₁) for f supported in B(c, R).
    fn transform_over_support(
        &self,
        f: &dyn Density,
        n: &Point,
        a: f64,
        center: &Point,
        radius: f64,
        quad: &QuadOptions,
    ) -> Result<Estimate> {
        let g = &self.group;
        let e = integrate_ball(
            g,
            center,
            radius,
            Radial::Linear,
            |n1| self.q_kernel(&g.left_divide(n1, n), a) * f.eval(g, n1),
            quad,
        );
        e.require()
    }

    /// 𝒫_{iβ}[μ](n, a) = a^{ρ−β} 𝒬_{iβ}[μ](n, a).
    pub fn p_transform(&self, mu: &BoundaryMeasure, n: &Point, a: f64) -> Result<f64> {
        Ok(a.powf(self.rho() - self.beta) * self.q_transform(mu, n, a)?)
    }
}

/// u(n, a) = C a^{β+ρ} + 𝒫_{iβ}[μ](n, a) and its normalization
/// F(n, a) = a^{β−ρ} u(n, a) = C a^{2β} + 𝒬_{iβ}[μ](n, a).
#[derive(Debug, Clone)]
pub struct Eigenfunction {
    pub u: FieldOnS,
    pub normalized: FieldOnS,
    pub c: f64,
}

pub fn eigenfunction_from_boundary(sp: &SpectralParam, c: f64, mu: &BoundaryMeasure) -> Result<Eigenfunction> {
    if !(c >= 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("C must be nonnegative, got {c}")));
    }
    mu.check_admissible(sp.beta())?;
    let (beta, rho) = (sp.beta(), sp.rho());
    let label = format!("C={c}, mu={}", mu.describe());
    let (sp_u, mu_u) = (sp.clone(), mu.clone());
    let u = FieldOnS::new(format!("u[{label}]"), Provenance::Transform, move |n, a| {
        Ok(c * a.powf(beta + rho) + sp_u.p_transform(&mu_u, n, a)?)
    });
    let (sp_f, mu_f) = (sp.clone(), mu.clone());
    let normalized = FieldOnS::new(format!("F[{label}]"), Provenance::Transform, move |n, a| {
        Ok(c * a.powf(2.0 * beta) + sp_f.q_transform(&mu_f, n, a)?)
    });
    Ok(Eigenfunction { u, normalized, c })
}

/// n ↦ 𝒫_{iβ}(n, a; n₁) = a^{ρ−β} q^{iβ}_a(n₁⁻¹ n), the kernel field of δ_{n₁}.
pub fn poisson_field(sp: &SpectralParam, n1: Point) -> FieldOnS {
    let sp = sp.clone();
    let g = sp.group().clone();
    let shift = sp.rho() - sp.beta();
    FieldOnS::new(format!("P_ib(., {n1})"), Provenance::Kernel, move |n, a| {
        Ok(a.powf(shift) * sp.q_kernel(&g.left_divide(&n1, n), a))
    })
}

/// Both sides of ∫ 𝒬_{iβ}f(n, a) dν(n) = ∫ 𝒬_{iβ}[ν](n, a) f(n) dm(n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityReport {
    pub lhs: f64,
    pub rhs: f64,
    /// |lhs − rhs| / max(|lhs|, |rhs|).
    pub gap: f64,
}

/// Evaluates the two sides of the Fubini identity along separate paths.
///
/// The left side sums or integrates the transform of `f` against ν; the right
/// side integrates f against the transform of ν over the support of f (or, for
/// rapidly decaying f, over a ball carrying all but a certified tail).
pub fn duality_pairing_check(
    sp: &SpectralParam,
    nu: &BoundaryMeasure,
    f: &BoundaryMeasure,
    a: f64,
) -> Result<DualityReport> {
    let g = sp.group();
    let MeasureKind::Density { f: dens, quad } = f.kind() else {
        return Err(Error::Domain("the test function must be given as a density".into()));
    };
    let lhs = pair_transform_with(sp, nu, f, a, quad)?;
    let rhs = match dens.support(g) {
        Some(s) => integrate_ball(
            g,
            &s.center,
            s.radius,
            Radial::Linear,
            |n| match sp.q_transform(nu, n, a) {
                Ok(v) => v * dens.eval(g, n),
                Err(_) => f64::NAN,
            },
            quad,
        )
        .require()?
        .value,
        None => {
            let b = dens.bound(g);
            // total mass of ν-transform is bounded by sup 𝒬[ν] ≤ C_{iβ} a^{-Q} ν(N)
            let nu_mass: f64 = nu.all_atoms().iter().map(|x| x.weight).sum();
            let sup_q = if nu_mass > 0.0 { sp.c_i_beta() * a.powi(-(g.q() as i32)) * nu_mass } else { 1.0 };
            let mut radius = 8.0;
            while dens.tail_mass(g, radius).is_none_or(|m| m * sup_q > 1e-2 * quad.rel_tol) && radius < 1e4 {
                radius *= 1.5;
            }
            integrate_ball(
                g,
                &b.center,
                radius,
                Radial::Log,
                |n| match sp.q_transform(nu, n, a) {
                    Ok(v) => v * dens.eval(g, n),
                    Err(_) => f64::NAN,
                },
                quad,
            )
            .require()?
            .value
        }
    };
    let gap = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    Ok(DualityReport { lhs, rhs, gap })
}

/// ∫ 𝒬_{iβ}f(n, a) dν(n).
fn pair_transform_with(
    sp: &SpectralParam,
    nu: &BoundaryMeasure,
    f: &BoundaryMeasure,
    a: f64,
    quad: &QuadOptions,
) -> Result<f64> {
    let g = sp.group();
    match nu.kind() {
        MeasureKind::Atomic(atoms) => atoms
            .iter()
            .map(|x| Ok(x.weight * sp.q_transform(f, &x.at, a)?))
            .sum(),
        MeasureKind::Mixture(parts) => parts.iter().map(|p| pair_transform_with(sp, p, f, a, quad)).sum(),
        MeasureKind::Density { f: nu_dens, .. } => {
            let MeasureKind::Density { f: dens, .. } = f.kind() else { unreachable!() };
            let Some(s) = dens.support(g) else {
                return Err(Error::Domain(
                    "pairing against a density needs a compactly supported test function".into(),
                ));
            };
            // 𝒬f(n, a) ≤ ‖f‖₁ c_β a^{2β} (d(c⁻¹n)/(2τ))^{-Q-2β} once d(c⁻¹n) > 2τR
            let tau = g.tau();
            let sup_f = dens.bound(g).sup;
            let l1 = sup_f * g.ball_volume(s.radius)?;
            let nu_sup = nu_dens.bound(g).sup;
            let e = g.q() as f64 + 2.0 * sp.beta();
            let coeff = nu_sup * l1 * sp.c_beta() * a.powf(2.0 * sp.beta()) * (2.0 * tau).powf(e);
            let floor = 1e-3 * l1 * nu_sup;
            let radius = power_tail_radius(g, e, coeff, 0.05 * quad.rel_tol * floor).max(4.0 * tau * s.radius);
            let tail = coeff * power_tail(g, e, radius);
            let inner = quad.with_max_evals(quad.max_evals.min(400_000));
            let est = integrate_ball(
                g,
                &s.center,
                radius,
                Radial::Log,
                |n| {
                    let w = nu_dens.eval(g, n);
                    if w == 0.0 {
                        return 0.0;
                    }
                    match sp.density_transform(dens.as_ref(), n, a, &inner) {
                        Ok(v) => w * v.value,
                        Err(_) => f64::NAN,
                    }
                },
                &quad.with_abs(tail),
            )
            .require()?;
            Ok(est.value)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn h1() -> HTypeGroup {
        HTypeGroup::heisenberg(1).unwrap()
    }

    #[test]
    fn normalizer_for_h1() {
        let g = h1();
        assert!((g.poisson_normalizer() * PI * PI - 1.0).abs() < 1e-9);
    }

    #[test]
    fn normalizer_beta_function_oracle() {
        // ∫ = |S^{2p-1}||S^{k-1}| · B(k/2, Q−k/2)/2 · 2^{2p-1} B(p, p+k)
        let beta_fn = |x: f64, y: f64| (ln_gamma(x) + ln_gamma(y) - ln_gamma(x + y)).exp();
        let g = HTypeGroup::heisenberg(2).unwrap();
        let (p, k, q) = (g.p() as f64, g.k() as f64, g.q() as f64);
        let exact = crate::special::sphere_area(g.dim_x())
            * crate::special::sphere_area(g.k())
            * beta_fn(k / 2.0, q - k / 2.0)
            / 2.0
            * 2f64.powf(2.0 * p - 1.0)
            * beta_fn(p, p + k);
        assert!((g.poisson_normalizer() * exact - 1.0).abs() < 1e-8);
    }

    #[test]
    fn c_function_anchor_and_errors() {
        let g = h1();
        assert!((c_function(&g, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(c_function(&g, 60.0), Err(Error::Range(_))));
        assert!(matches!(c_function(&g, 0.0), Err(Error::Domain(_))));
        // 𝐜(−i/2) on H¹ = 2 Γ(1)Γ(2)/Γ(3/2)² = 8/π
        assert!((c_function(&g, 0.5).unwrap() - 8.0 / PI).abs() < 1e-13);
    }

    #[test]
    fn two_forms_of_poisson_kernel_agree() {
        let g = h1();
        let n = Point::new(&[0.3, -1.2], &[0.7]);
        for a in [0.01, 0.5, 3.0] {
            let p1 = poisson_kernel(&g, &n, a);
            let p2 = poisson_kernel_d_form(&g, &n, a);
            assert!((p1 - p2).abs() < 1e-12 * p1);
        }
        assert!((poisson_kernel(&g, &g.identity(), 1.0) - g.poisson_normalizer()).abs() < 1e-15);
    }

    #[test]
    fn q_kernel_at_origin_and_dilation() {
        let g = h1();
        let sp = SpectralParam::new(&g, 0.5).unwrap();
        assert!((sp.q_kernel(&g.identity(), 1.0) - sp.c_i_beta()).abs() < 1e-15);
        let n = Point::new(&[0.4, 0.1], &[-0.3]);
        let a: f64 = 0.37;
        let lhs = sp.q_kernel(&n, a);
        let rhs = a.powi(-2) * sp.q_kernel(&dilate_unchecked(1.0 / a, &n), 1.0);
        assert!((lhs - rhs).abs() < 1e-13 * lhs);
    }

    #[test]
    fn poisson_kernel_is_q_kernel_at_rho() {
        let g = h1();
        let sp = SpectralParam::new(&g, g.rho()).unwrap();
        let n = Point::new(&[1.5, 0.2], &[0.9]);
        assert!((sp.q_kernel(&n, 0.8) / poisson_kernel(&g, &n, 0.8) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn transforms_of_simple_measures() {
        let g = h1();
        let sp = SpectralParam::new(&g, 1.0).unwrap();
        let m = BoundaryMeasure::lebesgue(&g, 1.0).unwrap();
        let n = Point::new(&[0.2, 0.0], &[1.0]);
        assert_eq!(sp.q_transform(&m, &n, 0.3).unwrap(), 1.0);
        let n1 = Point::new(&[1.0, -1.0], &[0.0]);
        let d = BoundaryMeasure::dirac(&g, n1.clone(), 1.0).unwrap();
        assert_eq!(sp.q_transform(&d, &n, 0.3).unwrap(), sp.q_kernel(&g.left_divide(&n1, &n), 0.3));
        let sp2 = SpectralParam::new(&g, 0.5).unwrap();
        let p = sp2.p_transform(&m, &n, 4.0).unwrap();
        assert!((p - 4f64.powf(0.5)).abs() < 1e-15);
    }

    #[test]
    fn inadmissible_growth_is_rejected() {
        let g = h1();
        let sp = SpectralParam::new(&g, 0.5).unwrap();
        let mu = BoundaryMeasure::density(&g, std::sync::Arc::new(crate::density::PowerWeight(1.5)));
        assert!(matches!(sp.q_transform(&mu, &g.identity(), 1.0), Err(Error::Admissibility { .. })));
        let sp2 = SpectralParam::new(&g, 1.0).unwrap();
        assert!(sp2.q_transform(&mu, &g.identity(), 1.0).is_ok());
    }
}
