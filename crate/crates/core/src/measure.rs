//! Positive boundary measures on N and their differentiation theory.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{Constant, Density, DensityRef, Dilated, Scaled, Translated, Truncated};
use crate::error::{domain, Error, Result};
use crate::group::{dilate_unchecked, BallSpec, HTypeGroup, Point};
use crate::haar::{integrate_ball, Radial};
use crate::quadrature::{Estimate, QuadOptions};

/// A point mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub at: Point,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub enum MeasureKind {
    Atomic(Vec<Atom>),
    Density { f: DensityRef, quad: QuadOptions },
    Mixture(Vec<BoundaryMeasure>),
}

/// A positive measure on N.
#[derive(Debug, Clone)]
pub struct BoundaryMeasure {
    group: HTypeGroup,
    kind: MeasureKind,
}

/// Default quadrature for density ball masses.
pub fn default_density_quad() -> QuadOptions {
    QuadOptions::rel(1e-6).with_max_evals(4_000_000)
}

impl BoundaryMeasure {
    pub fn atomic(group: &HTypeGroup, atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            group.check_point(&a.at)?;
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                return Err(domain(format!("atom weights must be positive and finite, got {}", a.weight)));
            }
        }
        Ok(Self { group: group.clone(), kind: MeasureKind::Atomic(atoms) })
    }

    pub fn dirac(group: &HTypeGroup, at: Point, weight: f64) -> Result<Self> {
        Self::atomic(group, vec![Atom { at, weight }])
    }

    /// The zero measure.
    pub fn zero(group: &HTypeGroup) -> Self {
        Self { group: group.clone(), kind: MeasureKind::Atomic(Vec::new()) }
    }

    pub fn density(group: &HTypeGroup, f: DensityRef) -> Self {
        Self::density_with(group, f, default_density_quad())
    }

    pub fn density_with(group: &HTypeGroup, f: DensityRef, quad: QuadOptions) -> Self {
        Self { group: group.clone(), kind: MeasureKind::Density { f, quad } }
    }

    /// c · m.
    pub fn lebesgue(group: &HTypeGroup, c: f64) -> Result<Self> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(domain(format!("density must be nonnegative, got {c}")));
        }
        Ok(Self::density(group, Arc::new(Constant(c))))
    }

    pub fn mixture(group: &HTypeGroup, parts: Vec<BoundaryMeasure>) -> Result<Self> {
        for p in &parts {
            if p.group != *group {
                return Err(Error::Structure("mixture components live on different groups".into()));
            }
        }
        Ok(Self { group: group.clone(), kind: MeasureKind::Mixture(parts) })
    }

    pub fn group(&self) -> &HTypeGroup {
        &self.group
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    /// Short human-readable description.
    pub fn describe(&self) -> String {
        match &self.kind {
            MeasureKind::Atomic(a) => format!("atomic({} atoms)", a.len()),
            MeasureKind::Density { f, .. } => f.name(),
            MeasureKind::Mixture(parts) => {
                format!("mixture[{}]", parts.iter().map(|p| p.describe()).collect::<Vec<_>>().join(", "))
            }
        }
    }

    /// Every atom of the measure, including those inside mixtures.
    pub fn all_atoms(&self) -> Vec<Atom> {
        match &self.kind {
            MeasureKind::Atomic(a) => a.clone(),
            MeasureKind::Density { .. } => Vec::new(),
            MeasureKind::Mixture(parts) => parts.iter().flat_map(|p| p.all_atoms()).collect(),
        }
    }

    /// Checks the finiteness criterion ∫(16a² + d(n)²/(4τ²))^{-β-ρ} dμ < ∞.
    /// Atoms always pass; a density passes when its envelope grows slower than
    /// d^{2β}.
    pub fn check_admissible(&self, beta: f64) -> Result<()> {
        match &self.kind {
            MeasureKind::Atomic(_) => Ok(()),
            MeasureKind::Density { f, .. } => {
                if f.support(&self.group).is_some() {
                    return Ok(());
                }
                let b = f.bound(&self.group);
                if b.exponent >= 2.0 * beta {
                    Err(Error::Admissibility {
                        beta,
                        reason: format!(
                            "density {} grows like d^{} and the kernel only decays like d^-(Q+{})",
                            f.name(),
                            b.exponent,
                            2.0 * beta
                        ),
                    })
                } else {
                    Ok(())
                }
            }
            MeasureKind::Mixture(parts) => parts.iter().try_for_each(|p| p.check_admissible(beta)),
        }
    }

    /// μ(B).
    pub fn ball_mass(&self, ball: &BallSpec) -> Result<f64> {
        self.ball_mass_estimate(ball).map(|e| e.value)
    }

    pub fn ball_mass_estimate(&self, ball: &BallSpec) -> Result<Estimate> {
        let g = &self.group;
        g.check_point(&ball.center)?;
        match &self.kind {
            MeasureKind::Atomic(atoms) => Ok(Estimate::exact(
                atoms
                    .iter()
                    .filter(|a| g.in_ball(ball, &a.at))
                    .map(|a| a.weight)
                    .sum(),
            )),
            MeasureKind::Density { f, quad } => density_ball_mass(g, f.as_ref(), ball, quad),
            MeasureKind::Mixture(parts) => {
                let mut acc = Estimate::exact(0.0);
                for p in parts {
                    acc = acc.add(p.ball_mass_estimate(ball)?);
                }
                Ok(acc)
            }
        }
    }

    /// τ_{n0}μ(E) = μ(n0 E): atoms move n1 ↦ n0⁻¹ n1, densities become f(n0 ·).
    pub fn translate(&self, n0: &Point) -> Result<Self> {
        let g = &self.group;
        g.check_point(n0)?;
        let kind = match &self.kind {
            MeasureKind::Atomic(atoms) => MeasureKind::Atomic(
                atoms
                    .iter()
                    .map(|a| Atom { at: g.left_divide(n0, &a.at), weight: a.weight })
                    .collect(),
            ),
            MeasureKind::Density { f, quad } => MeasureKind::Density {
                f: if f.constant().is_some() || n0.is_identity() {
                    f.clone()
                } else {
                    Arc::new(Translated { inner: f.clone(), by: n0.clone() })
                },
                quad: *quad,
            },
            MeasureKind::Mixture(parts) => {
                MeasureKind::Mixture(parts.iter().map(|p| p.translate(n0)).collect::<Result<_>>()?)
            }
        };
        Ok(Self { group: g.clone(), kind })
    }

    /// ν_r(E) = r^{-Q} ν(δ_r E).
    pub fn dilate(&self, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(domain(format!("dilation parameter must be positive, got {r}")));
        }
        let g = &self.group;
        let scale = r.powi(-(g.q() as i32));
        let kind = match &self.kind {
            MeasureKind::Atomic(atoms) => MeasureKind::Atomic(
                atoms
                    .iter()
                    .map(|a| Atom { at: dilate_unchecked(1.0 / r, &a.at), weight: a.weight * scale })
                    .collect(),
            ),
            MeasureKind::Density { f, quad } => MeasureKind::Density {
                f: if f.constant().is_some() || r == 1.0 {
                    f.clone()
                } else {
                    Arc::new(Dilated { inner: f.clone(), r })
                },
                quad: *quad,
            },
            MeasureKind::Mixture(parts) => {
                MeasureKind::Mixture(parts.iter().map(|p| p.dilate(r)).collect::<Result<_>>()?)
            }
        };
        Ok(Self { group: g.clone(), kind })
    }

    /// c · μ.
    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(domain(format!("scale factor must be positive, got {c}")));
        }
        let kind = match &self.kind {
            MeasureKind::Atomic(atoms) => MeasureKind::Atomic(
                atoms.iter().map(|a| Atom { at: a.at.clone(), weight: a.weight * c }).collect(),
            ),
            MeasureKind::Density { f, quad } => MeasureKind::Density {
                f: match f.constant() {
                    Some(v) => Arc::new(Constant(v * c)),
                    None => Arc::new(Scaled { inner: f.clone(), factor: c }),
                },
                quad: *quad,
            },
            MeasureKind::Mixture(parts) => {
                MeasureKind::Mixture(parts.iter().map(|p| p.scale(c)).collect::<Result<_>>()?)
            }
        };
        Ok(Self { group: self.group.clone(), kind })
    }

    /// The same measure with a different density quadrature request.
    pub fn with_quad(&self, quad: QuadOptions) -> Self {
        let kind = match &self.kind {
            MeasureKind::Density { f, .. } => MeasureKind::Density { f: f.clone(), quad },
            MeasureKind::Mixture(parts) => MeasureKind::Mixture(parts.iter().map(|p| p.with_quad(quad)).collect()),
            atoms => atoms.clone(),
        };
        Self { group: self.group.clone(), kind }
    }

    /// μ restricted to a ball.
    pub fn truncate(&self, ball: &BallSpec) -> Self {
        let g = &self.group;
        let kind = match &self.kind {
            MeasureKind::Atomic(atoms) => {
                MeasureKind::Atomic(atoms.iter().filter(|a| g.in_ball(ball, &a.at)).cloned().collect())
            }
            MeasureKind::Density { f, quad } => MeasureKind::Density {
                f: Arc::new(Truncated { inner: f.clone(), ball: ball.clone() }),
                quad: *quad,
            },
            MeasureKind::Mixture(parts) => MeasureKind::Mixture(parts.iter().map(|p| p.truncate(ball)).collect()),
        };
        Self { group: g.clone(), kind }
    }
}

fn density_ball_mass(g: &HTypeGroup, f: &dyn Density, ball: &BallSpec, quad: &QuadOptions) -> Result<Estimate> {
    let vol = g.ball_volume(ball.radius)?;
    if let Some(c) = f.constant() {
        return Ok(Estimate::exact(c * vol));
    }
    let sup = f.bound(g).sup;
    // (domain ball, whether the query ball indicator must be applied)
    let (domain_ball, clip) = match f.support(g) {
        Some(s) => {
            let gap = g.quasi_distance(&ball.center, &s.center);
            let tau = g.tau();
            if gap >= tau * (ball.radius + s.radius) {
                return Ok(Estimate::exact(0.0));
            }
            if tau * (gap + s.radius) <= ball.radius {
                (s, false)
            } else if s.radius < ball.radius {
                (s, true)
            } else {
                (ball.clone(), false)
            }
        }
        None => (ball.clone(), false),
    };
    let radial = if domain_ball.radius > 4.0 { Radial::Log } else { Radial::Linear };
    let dom_vol = g.ball_volume(domain_ball.radius)?;
    let opts = quad.with_abs(quad.abs_tol.max(1e-3 * quad.rel_tol * sup * dom_vol));
    let e = integrate_ball(
        g,
        &domain_ball.center,
        domain_ball.radius,
        radial,
        |n| {
            if clip && !g.in_ball(ball, n) {
                0.0
            } else {
                f.eval(g, n)
            }
        },
        &opts,
    );
    e.require()
}

/// Value of a limit that may be +∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum LimitValue {
    Finite(f64),
    Infinite,
}

impl LimitValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            LimitValue::Finite(v) => Some(v),
            LimitValue::Infinite => None,
        }
    }
}

/// One entry of the derivative table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioEntry {
    pub ball: usize,
    pub radius: f64,
    pub ratio: f64,
}

/// Result of [`strong_derivative`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeEstimate {
    pub value: LimitValue,
    pub table: Vec<RatioEntry>,
    pub converged: bool,
    /// Largest deviation between ball families at the smallest radius.
    pub spread: f64,
    pub tolerance: f64,
}

/// The canonical ball family: B(c, s) for c ∈ {0̲, ±e₁, ±e₂, ±f₁, ±(e₁ + f₁)}
/// and s ∈ {½, 1, 2}, where e_i are the first two 𝔳 directions and f₁ the
/// first 𝔷 direction. The centred unit ball comes first.
pub fn default_ball_family(g: &HTypeGroup) -> Vec<BallSpec> {
    let mut centers = vec![g.identity()];
    let mut e1 = g.identity();
    e1.x[0] = 1.0;
    let mut e2 = g.identity();
    e2.x[1] = 1.0;
    let mut f1 = g.identity();
    f1.z[0] = 1.0;
    let mut e1f1 = e1.clone();
    e1f1.z[0] = 1.0;
    for c in [e1, e2, f1, e1f1] {
        centers.push(c.clone());
        centers.push(g.inverse(&c));
    }
    let mut out = Vec::new();
    for s in [1.0, 0.5, 2.0] {
        for c in &centers {
            out.push(BallSpec { center: c.clone(), radius: s });
        }
    }
    out
}

/// r_j = 2^{-j}, j = 0..=10.
pub fn default_radii() -> Vec<f64> {
    (0..=10).map(|j| 2f64.powi(-j)).collect()
}

/// Strong derivative of μ at n0 along the ball family: the ratios
/// μ(n0 δ_r(B)) / m(n0 δ_r(B)) as r decreases through `radii`.
///
/// The estimate is the value at the smallest radius for the first ball.
/// Convergence requires each family's last three ratios to agree within
/// `tol` (relative, with `abs_tol` as a floor) and all families to agree at
/// the smallest radius. Ratios growing at least like r^{-Q/2} over the last
/// three radii in some family are reported as +∞.
pub fn strong_derivative(
    mu: &BoundaryMeasure,
    n0: &Point,
    balls: &[BallSpec],
    radii: &[f64],
    tol: f64,
    abs_tol: f64,
) -> Result<DerivativeEstimate> {
    let g = mu.group();
    g.check_point(n0)?;
    if balls.is_empty() {
        return Err(domain("strong derivative needs at least one ball"));
    }
    if radii.len() < 3 || radii.windows(2).any(|w| !(w[1] < w[0])) || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(domain("radii must be at least three strictly decreasing positive values"));
    }
    let jobs: Vec<(usize, usize)> = (0..balls.len()).flat_map(|b| (0..radii.len()).map(move |j| (b, j))).collect();
    let ratios: Vec<f64> = jobs
        .par_iter()
        .map(|&(b, j)| {
            let r = radii[j];
            let ball = &balls[b];
            let scaled = BallSpec {
                center: g.mul(n0, &dilate_unchecked(r, &ball.center)),
                radius: r * ball.radius,
            };
            let mass = mu.ball_mass(&scaled)?;
            Ok(mass / g.ball_volume(scaled.radius)?)
        })
        .collect::<Result<_>>()?;
    Ok(assess_ratios(&ratios, balls.len(), radii, g.q() as f64 / 2.0, tol, abs_tol))
}

/// Applies the convergence and blow-up rules of [`strong_derivative`] to a
/// table of ratios laid out family by family (`families` × `radii.len()`).
pub(crate) fn assess_ratios(
    ratios: &[f64],
    families: usize,
    radii: &[f64],
    growth_exponent: f64,
    tol: f64,
    abs_tol: f64,
) -> DerivativeEstimate {
    let nr = radii.len();
    let table = ratios
        .iter()
        .enumerate()
        .map(|(i, &ratio)| RatioEntry { ball: i / nr, radius: radii[i % nr], ratio })
        .collect();
    let family = |b: usize| &ratios[b * nr..(b + 1) * nr];

    let blowing_up = (0..families).any(|b| {
        let f = family(b);
        (nr - 2..nr).all(|i| f[i] > 0.0 && f[i] >= f[i - 1] * (radii[i - 1] / radii[i]).powf(growth_exponent))
    });
    if blowing_up {
        return DerivativeEstimate {
            value: LimitValue::Infinite,
            table,
            converged: true,
            spread: f64::INFINITY,
            tolerance: tol,
        };
    }

    let value = family(0)[nr - 1];
    let allowed = |v: f64| (tol * v.abs()).max(abs_tol);
    let mut converged = true;
    let mut spread = 0.0f64;
    for b in 0..families {
        let f = family(b);
        let last = &f[nr - 3..];
        let hi = last.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = last.iter().cloned().fold(f64::INFINITY, f64::min);
        if hi - lo > allowed(f[nr - 1]) {
            converged = false;
        }
        spread = spread.max((f[nr - 1] - value).abs());
    }
    if spread > allowed(value) {
        converged = false;
    }
    DerivativeEstimate { value: LimitValue::Finite(value), table, converged, spread, tolerance: tol }
}

/// Log-spaced grid with `per_octave` points per factor of two, covering [lo, hi].
pub fn log_grid(lo: f64, hi: f64, per_octave: usize) -> Vec<f64> {
    let steps = ((hi / lo).log2() * per_octave as f64).ceil() as usize;
    (0..=steps)
        .map(|i| lo * 2f64.powf(i as f64 / per_octave as f64))
        .collect()
}

/// The radius grid used by default for the maximal function: [1e-3, 1e3]
/// with four points per octave.
pub fn default_radius_grid() -> Vec<f64> {
    log_grid(1e-3, 1e3, 4)
}

/// Grid lower bound for M_HL(μ)(n) = sup_r μ(B(n, r)) / m(B(n, r)).
pub fn hl_maximal(mu: &BoundaryMeasure, n: &Point, radius_grid: &[f64]) -> Result<f64> {
    let g = mu.group();
    let vals: Vec<f64> = radius_grid
        .par_iter()
        .map(|&r| {
            let ball = BallSpec::new(n.clone(), r)?;
            Ok(mu.ball_mass(&ball)? / g.ball_volume(r)?)
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}
