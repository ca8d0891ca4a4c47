//! Left-invariant vector fields on S and the operators 𝓛, 𝓛^β as finite
//! difference stencils.
//!
//! In coordinates (X, Z, a) the fields are E₀ = a∂_a,
//! E_i = √a ∂_i + (√a/2) Σ_r (J_r X)_i ∂_r and E_r = a ∂_r, and
//! 𝓛 = Σ E² − Q E₀ expands to
//! a²∂_a² + (1−Q)a∂_a + aΣ∂_i² + a(a + ‖X‖²/4)Σ∂_r² + aΣ_{r,i}(J_r X)_i ∂_r∂_i.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{FieldOnS, SpacePoint};
use crate::group::{HTypeGroup, Point};

/// Accuracy of the difference formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StencilOrder {
    /// Three-point central differences; exact on quadratics.
    Second,
    /// Five-point central differences; exact on polynomials of degree ≤ 4
    /// (≤ 5 for the second derivative).
    Fourth,
}

/// Step sizes h_a = h₀ a, h_X = h₀ max(1, √a), h_Z = h₀ max(1, a).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StencilConfig {
    pub h0: f64,
    pub order: StencilOrder,
}

impl Default for StencilConfig {
    fn default() -> Self {
        Self { h0: 1e-3, order: StencilOrder::Second }
    }
}

impl StencilConfig {
    pub fn new(h0: f64, order: StencilOrder) -> Result<Self> {
        if !(1e-6..=1e-2).contains(&h0) {
            return Err(Error::Domain(format!("h0 must lie in [1e-6, 1e-2], got {h0}")));
        }
        Ok(Self { h0, order })
    }

    pub fn halved(self) -> Self {
        Self { h0: self.h0 / 2.0, ..self }
    }

    fn steps(&self, a: f64) -> (f64, f64, f64) {
        (self.h0 * a, self.h0 * a.sqrt().max(1.0), self.h0 * a.max(1.0))
    }

    fn reach(&self) -> f64 {
        match self.order {
            StencilOrder::Second => 1.0,
            StencilOrder::Fourth => 2.0,
        }
    }
}

/// One of the left-invariant vector fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorField {
    E0,
    /// E_i for the i-th 𝔳 coordinate (0-based).
    Ei(usize),
    /// E_r for the r-th 𝔷 coordinate (0-based).
    Er(usize),
}

/// Coordinates of S flattened as (X, Z, a).
struct Probe<'a> {
    g: &'a HTypeGroup,
    u: &'a FieldOnS,
    base: Vec<f64>,
    cfg: StencilConfig,
    steps: Vec<f64>,
}

impl<'a> Probe<'a> {
    fn new(g: &'a HTypeGroup, u: &'a FieldOnS, x: &SpacePoint, cfg: StencilConfig) -> Result<Self> {
        g.check_point(&x.n)?;
        let (ha, hx, hz) = cfg.steps(x.a);
        if !(x.a - cfg.reach() * ha > 0.0) {
            return Err(Error::Stencil { a: x.a, step: ha });
        }
        let mut base = x.n.coords();
        base.push(x.a);
        let mut steps = vec![hx; g.dim_x()];
        steps.extend(std::iter::repeat_n(hz, g.k()));
        steps.push(ha);
        Ok(Self { g, u, base, cfg, steps })
    }

    fn a_index(&self) -> usize {
        self.base.len() - 1
    }

    fn z_index(&self, r: usize) -> usize {
        self.g.dim_x() + r
    }

    fn eval_offset(&self, offsets: &[(usize, f64)]) -> Result<f64> {
        let mut c = self.base.clone();
        for &(i, m) in offsets {
            c[i] += m * self.steps[i];
        }
        let m = self.g.dim_x();
        let k = self.g.k();
        let n = Point::new(&c[..m], &c[m..m + k]);
        self.u.eval(&n, c[m + k])
    }

    fn first(&self, i: usize) -> Result<f64> {
        let h = self.steps[i];
        match self.cfg.order {
            StencilOrder::Second => Ok((self.eval_offset(&[(i, 1.0)])? - self.eval_offset(&[(i, -1.0)])?) / (2.0 * h)),
            StencilOrder::Fourth => Ok((-self.eval_offset(&[(i, 2.0)])? + 8.0 * self.eval_offset(&[(i, 1.0)])?
                - 8.0 * self.eval_offset(&[(i, -1.0)])?
                + self.eval_offset(&[(i, -2.0)])?)
                / (12.0 * h)),
        }
    }

    fn second(&self, i: usize, center: f64) -> Result<f64> {
        let h = self.steps[i];
        match self.cfg.order {
            StencilOrder::Second => {
                Ok((self.eval_offset(&[(i, 1.0)])? - 2.0 * center + self.eval_offset(&[(i, -1.0)])?) / (h * h))
            }
            StencilOrder::Fourth => Ok((-self.eval_offset(&[(i, 2.0)])? + 16.0 * self.eval_offset(&[(i, 1.0)])?
                - 30.0 * center
                + 16.0 * self.eval_offset(&[(i, -1.0)])?
                - self.eval_offset(&[(i, -2.0)])?)
                / (12.0 * h * h)),
        }
    }

    /// Centred cross difference for ∂_i∂_j, i ≠ j.
    fn mixed(&self, i: usize, j: usize) -> Result<f64> {
        let (hi, hj) = (self.steps[i], self.steps[j]);
        let (nodes, weights): (&[f64], &[f64]) = match self.cfg.order {
            StencilOrder::Second => (&[1.0, -1.0], &[0.5, -0.5]),
            StencilOrder::Fourth => (&[2.0, 1.0, -1.0, -2.0], &[-1.0 / 12.0, 8.0 / 12.0, -8.0 / 12.0, 1.0 / 12.0]),
        };
        let mut acc = 0.0;
        for (&si, &wi) in nodes.iter().zip(weights) {
            for (&sj, &wj) in nodes.iter().zip(weights) {
                acc += wi * wj * self.eval_offset(&[(i, si), (j, sj)])?;
            }
        }
        Ok(acc / (hi * hj))
    }
}

/// Applies E₀, E_i or E_r to u at x.
pub fn apply_vector_field(
    g: &HTypeGroup,
    which: VectorField,
    u: &FieldOnS,
    x: &SpacePoint,
    cfg: &StencilConfig,
) -> Result<f64> {
    let probe = Probe::new(g, u, x, *cfg)?;
    let a = x.a;
    match which {
        VectorField::E0 => Ok(a * probe.first(probe.a_index())?),
        VectorField::Er(r) => {
            check_index(r, g.k(), "Z index")?;
            Ok(a * probe.first(probe.z_index(r))?)
        }
        VectorField::Ei(i) => {
            check_index(i, g.dim_x(), "X index")?;
            let sa = a.sqrt();
            let mut v = sa * probe.first(i)?;
            for r in 0..g.k() {
                let c = g.j_apply(r, &x.n.x)[i];
                if c != 0.0 {
                    v += 0.5 * sa * c * probe.first(probe.z_index(r))?;
                }
            }
            Ok(v)
        }
    }
}

fn check_index(i: usize, len: usize, what: &'static str) -> Result<()> {
    if i >= len {
        Err(Error::Dimension { what, expected: len, got: i + 1 })
    } else {
        Ok(())
    }
}

/// The pieces of 𝓛u that share the second-order part.
struct Parts {
    second_order: f64,
    a_du_da: f64,
}

fn operator_parts(g: &HTypeGroup, u: &FieldOnS, x: &SpacePoint, cfg: &StencilConfig) -> Result<Parts> {
    let probe = Probe::new(g, u, x, *cfg)?;
    let a = x.a;
    let ia = probe.a_index();
    let center = u.at(x)?;
    let mut second = a * a * probe.second(ia, center)?;
    let x2 = x.n.norm_x_sq();
    for i in 0..g.dim_x() {
        second += a * probe.second(i, center)?;
    }
    for r in 0..g.k() {
        second += a * (a + x2 / 4.0) * probe.second(probe.z_index(r), center)?;
    }
    for r in 0..g.k() {
        let jx = g.j_apply(r, &x.n.x);
        for (i, &c) in jx.iter().enumerate() {
            if c != 0.0 {
                second += a * c * probe.mixed(i, probe.z_index(r))?;
            }
        }
    }
    Ok(Parts { second_order: second, a_du_da: a * probe.first(ia)? })
}

/// 𝓛u(x).
pub fn apply_l(g: &HTypeGroup, u: &FieldOnS, x: &SpacePoint, cfg: &StencilConfig) -> Result<f64> {
    let p = operator_parts(g, u, x, cfg)?;
    Ok(p.second_order + (1.0 - g.q() as f64) * p.a_du_da)
}

/// 𝓛^β u(x), with drift (1 − 2β) a∂_a in place of (1 − Q) a∂_a.
pub fn apply_l_beta(g: &HTypeGroup, beta: f64, u: &FieldOnS, x: &SpacePoint, cfg: &StencilConfig) -> Result<f64> {
    let p = operator_parts(g, u, x, cfg)?;
    Ok(p.second_order + (1.0 - 2.0 * beta) * p.a_du_da)
}

/// |𝓛u − λu| / max(|u|, floor) at x.
pub fn eigen_residual(
    g: &HTypeGroup,
    u: &FieldOnS,
    eigenvalue: f64,
    x: &SpacePoint,
    cfg: &StencilConfig,
) -> Result<f64> {
    let lu = apply_l(g, u, x, cfg)?;
    let v = u.at(x)?;
    Ok((lu - eigenvalue * v).abs() / v.abs().max(1e-300))
}

/// Maximal residuals of the two equivalent equations on a sample set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrespondenceReport {
    pub beta: f64,
    pub points: usize,
    /// max |𝓛u − (β² − ρ²)u| / |u|
    pub eigen_residual: f64,
    /// max |𝓛^β F| / |F| with F = a^{β−ρ} u
    pub harmonic_residual: f64,
    pub worst_eigen: Option<SpacePoint>,
    pub worst_harmonic: Option<SpacePoint>,
}

impl CorrespondenceReport {
    /// Both residuals small or both large, relative to `tol`.
    pub fn consistent(&self, tol: f64) -> bool {
        (self.eigen_residual <= tol) == (self.harmonic_residual <= tol)
    }
}

/// Checks that u solves 𝓛u = (β² − ρ²)u exactly where a^{β−ρ}u is
/// 𝓛^β-harmonic, reporting both residuals over `region`.
pub fn lbeta_correspondence_check(
    g: &HTypeGroup,
    beta: f64,
    u: &FieldOnS,
    region: &[SpacePoint],
    cfg: &StencilConfig,
) -> Result<CorrespondenceReport> {
    let rho = g.rho();
    let lambda = beta * beta - rho * rho;
    let f = u.times_power_of_a(beta - rho);
    let rows: Vec<(f64, f64)> = region
        .par_iter()
        .map(|x| {
            let e = eigen_residual(g, u, lambda, x, cfg)?;
            let h = apply_l_beta(g, beta, &f, x, cfg)?.abs() / f.at(x)?.abs().max(1e-300);
            Ok((e, h))
        })
        .collect::<Result<_>>()?;
    let mut report = CorrespondenceReport {
        beta,
        points: region.len(),
        eigen_residual: 0.0,
        harmonic_residual: 0.0,
        worst_eigen: None,
        worst_harmonic: None,
    };
    for (x, (e, h)) in region.iter().zip(rows) {
        if e >= report.eigen_residual {
            report.eigen_residual = e;
            report.worst_eigen = Some(x.clone());
        }
        if h >= report.harmonic_residual {
            report.harmonic_residual = h;
            report.worst_harmonic = Some(x.clone());
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h1() -> HTypeGroup {
        HTypeGroup::heisenberg(1).unwrap()
    }

    fn at(x: &[f64], z: &[f64], a: f64) -> SpacePoint {
        SpacePoint::new(Point::new(x, z), a)
    }

    #[test]
    fn vector_field_examples() {
        let g = h1();
        let cfg = StencilConfig::new(1e-2, StencilOrder::Fourth).unwrap();
        let s = 2.5;
        let e0 = apply_vector_field(&g, VectorField::E0, &FieldOnS::power_of_a(s), &at(&[0.0, 0.0], &[0.0], 1.0), &cfg)
            .unwrap();
        assert!((e0 - s).abs() < 1e-9);
        let z = FieldOnS::closed_form("Z", |n, _| n.z[0]);
        let er = apply_vector_field(&g, VectorField::Er(0), &z, &at(&[0.0, 0.0], &[0.0], 1.0), &cfg).unwrap();
        assert!((er - 1.0).abs() < 1e-12);
        // E_i Z = (√a/2)(J X)_i: (J X) = (−y, x)
        let p = at(&[0.7, -0.4], &[0.3], 2.0);
        let e1 = apply_vector_field(&g, VectorField::Ei(0), &z, &p, &cfg).unwrap();
        let e2 = apply_vector_field(&g, VectorField::Ei(1), &z, &p, &cfg).unwrap();
        assert!((e1 - 0.5 * 2f64.sqrt() * 0.4).abs() < 1e-10);
        assert!((e2 - 0.5 * 2f64.sqrt() * 0.7).abs() < 1e-10);
    }

    #[test]
    fn operator_on_powers_of_a() {
        let g = h1();
        let cfg = StencilConfig::new(1e-3, StencilOrder::Second).unwrap();
        let rho = g.rho();
        for s in [-1.0, 0.5, rho, 1.0 + rho] {
            let x = at(&[0.3, 0.1], &[-0.2], 1.0);
            let lu = apply_l(&g, &FieldOnS::power_of_a(s), &x, &cfg).unwrap();
            let want = s * (s - 2.0 * rho);
            assert!((lu - want).abs() < 1e-5 * want.abs().max(1.0), "s = {s}: {lu} vs {want}");
        }
        let c = apply_l(&g, &FieldOnS::constant(3.0), &at(&[1.0, 2.0], &[3.0], 0.5), &cfg).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn l_beta_differs_by_drift() {
        let g = h1();
        let cfg = StencilConfig::default();
        let u = FieldOnS::closed_form("poly", |n, a| n.x[0] * n.z[0] + a * a * n.x[1] + a.ln());
        let x = at(&[0.4, -0.9], &[0.25], 0.7);
        let beta = 0.3;
        let diff = apply_l_beta(&g, beta, &u, &x, &cfg).unwrap() - apply_l(&g, &u, &x, &cfg).unwrap();
        let e0 = apply_vector_field(&g, VectorField::E0, &u, &x, &cfg).unwrap();
        assert!((diff - 2.0 * (g.rho() - beta) * e0).abs() < 1e-9);
        let same = apply_l_beta(&g, g.rho(), &u, &x, &cfg).unwrap() - apply_l(&g, &u, &x, &cfg).unwrap();
        assert_eq!(same, 0.0);
    }

    #[test]
    fn stencil_leaving_half_space() {
        let g = h1();
        assert!(StencilConfig::new(0.5, StencilOrder::Second).is_err());
        let cfg = StencilConfig::new(1e-2, StencilOrder::Second).unwrap();
        let bad = at(&[0.0, 0.0], &[0.0], 0.0);
        assert!(matches!(apply_l(&g, &FieldOnS::constant(1.0), &bad, &cfg), Err(Error::Stencil { .. })));
    }

    #[test]
    fn mixed_term_matches_symbolic_value() {
        // u = x·Z: 𝓛u = a (J X)_x ∂_Z∂_x u = a · (−y) · 1
        let g = h1();
        let cfg = StencilConfig::default();
        let u = FieldOnS::closed_form("xZ", |n, _| n.x[0] * n.z[0]);
        let x = at(&[0.5, 1.5], &[0.2], 0.8);
        let lu = apply_l(&g, &u, &x, &cfg).unwrap();
        assert!((lu - 0.8 * (-1.5)).abs() < 1e-8, "{lu}");
    }
}
