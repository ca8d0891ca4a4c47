//! Abelian half-space model ℝ^m × (0, ∞) run through the same admissible-limit
//! and derivative machinery. The kernel is
//! q_y(x) = C y^{2β} / (y² + |x|²)^{m/2+β}, C = Γ(m/2+β) / (π^{m/2} Γ(β)),
//! the Euclidean norm plays the homogeneous norm and δ_y(x) = yx.
//! With β = ½ this is the classical Poisson kernel of the upper half-space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fatou::{
    apertures_consistent, evaluate_nested, fatou_verdict, summarize_levels, ConvergenceReport, FatouConfig, Verdict,
    SHELL_FRACTION,
};
use crate::haar::{sphere_angles_bounds, sphere_point};
use crate::measure::{assess_ratios, DerivativeEstimate};
use crate::quadrature::{integrate, integrate_1d, QuadOptions};
use crate::special::{euclidean_ball_volume, ln_gamma, sphere_area};

/// Tail budget for kernel masses.
const TAIL_BUDGET: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "l", rename_all = "snake_case")]
pub enum HalfSpaceModel {
    /// Upper half-space of ℝ^{l+1}: boundary ℝ^l, β = ½.
    Euclidean(usize),
    /// Real hyperbolic space of dimension l: boundary ℝ^{l−1}.
    Hyperbolic(usize),
}

/// Measures on the boundary ℝ^m.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HalfSpaceMeasure {
    Atoms { atoms: Vec<(Vec<f64>, f64)> },
    Constant { c: f64 },
    /// amplitude · exp(−|x − center|²)
    Gaussian { center: Vec<f64>, amplitude: f64 },
}

impl HalfSpaceMeasure {
    pub fn describe(&self) -> String {
        match self {
            Self::Atoms { atoms } => format!("atoms({})", atoms.len()),
            Self::Constant { c } => format!("{c}*lebesgue"),
            Self::Gaussian { amplitude, .. } => format!("{amplitude}*gaussian"),
        }
    }

    fn gaussian_at(center: &[f64], amplitude: f64, x: &[f64]) -> f64 {
        amplitude * (-dist_sq(center, x)).exp()
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// ∫q_y over ℝ^m split into a quadrature part and a tail bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelMass {
    pub value: f64,
    pub quad_error: f64,
    pub tail_bound: f64,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct HalfSpace {
    model: HalfSpaceModel,
    m: usize,
    beta: f64,
    c: f64,
}

impl HalfSpace {
    /// `beta` is ignored for the Euclidean model.
    pub fn new(model: HalfSpaceModel, beta: f64) -> Result<Self> {
        let (m, beta) = match model {
            HalfSpaceModel::Euclidean(l) if l >= 1 => (l, 0.5),
            HalfSpaceModel::Hyperbolic(l) if l >= 2 => (l - 1, beta),
            _ => return Err(Error::Domain(format!("unsupported model {model:?}"))),
        };
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Domain(format!("beta must be positive, got {beta}")));
        }
        let h = m as f64 / 2.0;
        let c = (ln_gamma(h + beta) - h * std::f64::consts::PI.ln() - ln_gamma(beta)).exp();
        Ok(Self { model, m, beta, c })
    }

    pub fn model(&self) -> HalfSpaceModel {
        self.model
    }
    pub fn boundary_dim(&self) -> usize {
        self.m
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn rho(&self) -> f64 {
        self.m as f64 / 2.0
    }
    pub fn normalizer(&self) -> f64 {
        self.c
    }

    pub fn kernel(&self, x: &[f64], y: f64) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.c * y.powf(2.0 * self.beta) / (y * y + r2).powf(self.rho() + self.beta)
    }

    /// Radial quadrature of q_y on |x| < R with v = ln(1 + r/y), and the tail
    /// ∫_{|x|>R} q_y ≤ C|S^{m−1}| y^{2β} R^{−2β} / (2β), R chosen to make it ≤ 1e-10.
    pub fn kernel_mass(&self, y: f64, rel_tol: f64) -> KernelMass {
        let (m, b) = (self.m as f64, self.beta);
        let area = sphere_area(self.m);
        let coeff = self.c * area * y.powf(2.0 * b) / (2.0 * b);
        let radius = 1.01 * (coeff / TAIL_BUDGET).powf(1.0 / (2.0 * b));
        let tail_bound = coeff * radius.powf(-2.0 * b);
        let e = integrate_1d(
            |v| {
                let r = y * v.exp_m1();
                let dr = y * v.exp();
                self.c * area * y.powf(2.0 * b) * r.powf(m - 1.0) / (y * y + r * r).powf(m / 2.0 + b) * dr
            },
            0.0,
            (radius / y).ln_1p(),
            &QuadOptions::rel(rel_tol).with_initial_divisions(16),
        );
        KernelMass { value: e.value, quad_error: e.error, tail_bound, radius }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.m {
            return Err(Error::Dimension { what: "boundary point", expected: self.m, got: x.len() });
        }
        Ok(())
    }

    fn check_measure(&self, mu: &HalfSpaceMeasure) -> Result<()> {
        match mu {
            HalfSpaceMeasure::Atoms { atoms } => {
                for (p, w) in atoms {
                    self.check_point(p)?;
                    if !(*w >= 0.0 && w.is_finite()) {
                        return Err(Error::Domain(format!("atom weight must be nonnegative, got {w}")));
                    }
                }
            }
            HalfSpaceMeasure::Constant { c } if !(*c >= 0.0 && c.is_finite()) => {
                return Err(Error::Domain(format!("constant must be nonnegative, got {c}")));
            }
            HalfSpaceMeasure::Gaussian { center, amplitude } => {
                self.check_point(center)?;
                if !(*amplitude >= 0.0 && amplitude.is_finite()) {
                    return Err(Error::Domain(format!("amplitude must be nonnegative, got {amplitude}")));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// ∫ q_y(x − t) dμ(t).
    pub fn transform(&self, mu: &HalfSpaceMeasure, x: &[f64], y: f64) -> Result<f64> {
        self.check_point(x)?;
        match mu {
            HalfSpaceMeasure::Atoms { atoms } => Ok(atoms
                .iter()
                .map(|(p, w)| {
                    let d: Vec<f64> = x.iter().zip(p).map(|(a, b)| a - b).collect();
                    w * self.kernel(&d, y)
                })
                .sum()),
            HalfSpaceMeasure::Constant { c } => {
                let k = self.kernel_mass(y, 1e-10);
                Ok(c * k.value)
            }
            HalfSpaceMeasure::Gaussian { center, amplitude } => self.gaussian_transform(center, *amplitude, x, y),
        }
    }

    /// With t = x + y tanθ ω the integral becomes
    /// C ∫₀^{π/2} sin^{m−1}θ cos^{2β−1}θ ∫_{S^{m−1}} f(x + y tanθ ω) dω dθ.
    fn gaussian_transform(&self, center: &[f64], amplitude: f64, x: &[f64], y: f64) -> Result<f64> {
        let (m, b) = (self.m, self.beta);
        let opts = QuadOptions::rel(1e-9).with_abs(1e-13 * amplitude.max(1e-300));
        let weight = |th: f64| th.sin().powi(m as i32 - 1) * th.cos().powf(2.0 * b - 1.0);
        let half = std::f64::consts::FRAC_PI_2;
        let e = if m == 1 {
            integrate_1d(
                |th| {
                    let s = y * th.tan();
                    weight(th)
                        * (HalfSpaceMeasure::gaussian_at(center, amplitude, &[x[0] + s])
                            + HalfSpaceMeasure::gaussian_at(center, amplitude, &[x[0] - s]))
                },
                0.0,
                half,
                &opts,
            )
        } else {
            let (mut lo, mut hi) = (vec![0.0], vec![half]);
            sphere_angles_bounds(m, &mut lo, &mut hi);
            let mut omega = vec![0.0; m];
            let mut t = vec![0.0; m];
            integrate(
                |v| {
                    let jac = sphere_point(&v[1..], &mut omega);
                    let s = y * v[0].tan();
                    for i in 0..m {
                        t[i] = x[i] + s * omega[i];
                    }
                    weight(v[0]) * jac * HalfSpaceMeasure::gaussian_at(center, amplitude, &t)
                },
                &lo,
                &hi,
                &opts,
            )
        };
        Ok(self.c * e.require()?.value)
    }

    /// μ(B(center, radius)).
    pub fn ball_mass(&self, mu: &HalfSpaceMeasure, center: &[f64], radius: f64) -> Result<f64> {
        self.check_point(center)?;
        let m = self.m;
        match mu {
            HalfSpaceMeasure::Atoms { atoms } => Ok(atoms
                .iter()
                .filter(|(p, _)| dist_sq(p, center) < radius * radius)
                .map(|(_, w)| w)
                .sum()),
            HalfSpaceMeasure::Constant { c } => Ok(c * euclidean_ball_volume(m) * radius.powi(m as i32)),
            HalfSpaceMeasure::Gaussian { center: gc, amplitude } => {
                let opts = QuadOptions::rel(1e-10).with_abs(1e-14 * amplitude * radius.powi(m as i32));
                let e = if m == 1 {
                    integrate_1d(
                        |t| HalfSpaceMeasure::gaussian_at(gc, *amplitude, &[t]),
                        center[0] - radius,
                        center[0] + radius,
                        &opts,
                    )
                } else {
                    let (mut lo, mut hi) = (vec![0.0], vec![radius]);
                    sphere_angles_bounds(m, &mut lo, &mut hi);
                    let mut omega = vec![0.0; m];
                    let mut t = vec![0.0; m];
                    integrate(
                        |v| {
                            let jac = sphere_point(&v[1..], &mut omega);
                            for i in 0..m {
                                t[i] = center[i] + v[0] * omega[i];
                            }
                            v[0].powi(m as i32 - 1) * jac * HalfSpaceMeasure::gaussian_at(gc, *amplitude, &t)
                        },
                        &lo,
                        &hi,
                        &opts,
                    )
                };
                Ok(e.require()?.value)
            }
        }
    }

    /// Ratios μ(B(x₀ + r c, r s)) / |B| over centres {0, ±e_i} and scales
    /// s ∈ {1, ½, 2}, with the same convergence rules as on N.
    pub fn strong_derivative(
        &self,
        mu: &HalfSpaceMeasure,
        x0: &[f64],
        radii: &[f64],
        tol: f64,
        abs_tol: f64,
    ) -> Result<DerivativeEstimate> {
        self.check_point(x0)?;
        self.check_measure(mu)?;
        if radii.len() < 3 || radii.windows(2).any(|w| !(w[1] < w[0])) || radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Domain("radii must be at least three strictly decreasing positive values".into()));
        }
        let m = self.m;
        let mut centers = vec![vec![0.0; m]];
        for i in 0..m {
            for sign in [1.0, -1.0] {
                let mut c = vec![0.0; m];
                c[i] = sign;
                centers.push(c);
            }
        }
        let mut families = Vec::new();
        for s in [1.0, 0.5, 2.0] {
            for c in &centers {
                families.push((c.clone(), s));
            }
        }
        let mut ratios = Vec::with_capacity(families.len() * radii.len());
        for (c, s) in &families {
            for &r in radii {
                let center: Vec<f64> = x0.iter().zip(c).map(|(a, b)| a + r * b).collect();
                let rad = r * s;
                ratios.push(self.ball_mass(mu, &center, rad)? / (euclidean_ball_volume(m) * rad.powi(m as i32)));
            }
        }
        Ok(assess_ratios(&ratios, families.len(), radii, m as f64 / 2.0, tol, abs_tol))
    }

    fn unit_offsets(&self, rng: &mut ChaCha8Rng, count: usize) -> Vec<(Vec<f64>, f64)> {
        let m = self.m;
        let shell = count.saturating_sub(1).div_ceil(3);
        let mut out = vec![(vec![0.0; m], 0.0)];
        for i in 1..count {
            let mut w: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            w.iter_mut().for_each(|v| *v /= norm);
            let t = if i <= shell { SHELL_FRACTION } else { SHELL_FRACTION * rng.gen::<f64>().powf(1.0 / m as f64) };
            out.push((w, t));
        }
        out
    }

    /// Samples of {(x, y) : |x − x₀| < αy} per aperture (ascending) and level.
    fn own_samples(&self, x0: &[f64], apertures: &[f64], cfg: &FatouConfig) -> Vec<Vec<Vec<(Vec<f64>, f64)>>> {
        apertures
            .iter()
            .enumerate()
            .map(|(j, &alpha)| {
                cfg.levels
                    .iter()
                    .enumerate()
                    .map(|(l, &y)| {
                        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((l as u64) << 32) ^ (j as u64 + 1));
                        self.unit_offsets(&mut rng, cfg.per_level)
                            .into_iter()
                            .map(|(w, t)| (x0.iter().zip(&w).map(|(a, b)| a + t * alpha * y * b).collect(), y))
                            .filter(|(x, y): &(Vec<f64>, f64)| dist_sq(x, x0).sqrt() < alpha * y)
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// Strong derivative against admissible limits of 𝒬[μ] at x₀.
    pub fn verify(&self, mu: &HalfSpaceMeasure, x0: &[f64], cfg: &FatouConfig) -> Result<BaselineReport> {
        self.check_point(x0)?;
        self.check_measure(mu)?;
        if cfg.per_level == 0 || cfg.levels.len() < 3 || cfg.levels.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Domain("levels must be at least three strictly decreasing values".into()));
        }
        let mut apertures = cfg.apertures.clone();
        if apertures.is_empty() || apertures.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::Domain("apertures must be positive".into()));
        }
        apertures.sort_by(f64::total_cmp);
        apertures.dedup();
        let derivative = self.strong_derivative(mu, x0, &cfg.radii, cfg.tolerance, cfg.abs_tolerance)?;
        let own = self.own_samples(x0, &apertures, cfg);
        let values = evaluate_nested(&own, |(x, y)| self.transform(mu, x, *y))?;
        let levels = cfg.levels.len();
        let limits: Vec<ConvergenceReport> = apertures
            .iter()
            .enumerate()
            .map(|(j, &alpha)| {
                let union: Vec<Vec<f64>> =
                    (0..levels).map(|l| values[..=j].iter().flat_map(|v| v[l].iter().cloned()).collect()).collect();
                summarize_levels(alpha, &cfg.levels, &union, self.m as f64 / 2.0, cfg.tolerance, cfg.abs_tolerance)
            })
            .collect();
        let verdict = fatou_verdict(&derivative, &limits, cfg.tolerance, cfg.abs_tolerance);
        Ok(BaselineReport {
            model: self.model,
            boundary_dim: self.m,
            beta: self.beta,
            vertex: x0.to_vec(),
            measure: mu.describe(),
            derivative,
            apertures_consistent: apertures_consistent(&limits, cfg.tolerance, cfg.abs_tolerance),
            limits,
            verdict,
            tolerance: cfg.tolerance,
            abs_tolerance: cfg.abs_tolerance,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineReport {
    pub model: HalfSpaceModel,
    pub boundary_dim: usize,
    pub beta: f64,
    pub vertex: Vec<f64>,
    pub measure: String,
    pub derivative: DerivativeEstimate,
    pub limits: Vec<ConvergenceReport>,
    pub verdict: Verdict,
    pub apertures_consistent: bool,
    pub tolerance: f64,
    pub abs_tolerance: f64,
}

impl BaselineReport {
    pub fn passed(&self) -> bool {
        self.verdict.passed() && self.apertures_consistent
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn normalizers() {
        // Poisson kernel of the upper half-plane: y / (π(y² + x²))
        let h = HalfSpace::new(HalfSpaceModel::Euclidean(1), 0.0).unwrap();
        assert!((h.normalizer() - 1.0 / PI).abs() < 1e-14);
        assert!((h.kernel(&[0.5], 2.0) - 2.0 / (PI * 4.25)).abs() < 1e-15);
        // ℝ³₊: Γ(3/2)/π^{3/2} = 1/(2π)
        let h = HalfSpace::new(HalfSpaceModel::Euclidean(2), 0.0).unwrap();
        assert!((h.normalizer() - 0.5 / PI).abs() < 1e-14);
        assert!(HalfSpace::new(HalfSpaceModel::Hyperbolic(1), 0.5).is_err());
    }

    #[test]
    fn kernel_masses() {
        for model in [HalfSpaceModel::Euclidean(1), HalfSpaceModel::Euclidean(2), HalfSpaceModel::Hyperbolic(3)] {
            let h = HalfSpace::new(model, 1.5).unwrap();
            for y in [0.1, 1.0] {
                let k = h.kernel_mass(y, 1e-10);
                assert!((k.value - 1.0).abs() < 1e-8, "{model:?} y={y}: {k:?}");
                assert!(k.tail_bound <= 1e-10);
            }
        }
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        // oracle: trapezoid rule on a wide, fine grid
        let h = HalfSpace::new(HalfSpaceModel::Euclidean(1), 0.0).unwrap();
        let mu = HalfSpaceMeasure::Gaussian { center: vec![0.2], amplitude: 1.0 };
        let (x, y) = (0.7, 0.3);
        let got = h.transform(&mu, &[x], y).unwrap();
        let (lo, hi, n) = (-40.0f64, 40.0f64, 400_000);
        let dt = (hi - lo) / n as f64;
        let mut want = 0.0;
        for i in 0..=n {
            let t = lo + i as f64 * dt;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            want += w * h.kernel(&[x - t], y) * (-(t - 0.2) * (t - 0.2)).exp();
        }
        want *= dt;
        assert!((got - want).abs() < 1e-8, "{got} vs {want}");
    }

    #[test]
    fn lebesgue_limit_in_both_models() {
        let cfg = FatouConfig { per_level: 4, ..Default::default() };
        let e = HalfSpace::new(HalfSpaceModel::Euclidean(1), 0.0).unwrap();
        let r = e.verify(&HalfSpaceMeasure::Constant { c: 1.0 }, &[0.0], &cfg).unwrap();
        assert!(r.passed());
        let hyp = HalfSpace::new(HalfSpaceModel::Hyperbolic(2), 0.5).unwrap();
        let r = hyp.verify(&HalfSpaceMeasure::Constant { c: 3.0 }, &[1.0], &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Agree);
        assert!((r.limits[0].finite_limit().unwrap() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn atoms_and_gaussian_in_plane() {
        let cfg = FatouConfig { per_level: 4, ..Default::default() };
        let h = HalfSpace::new(HalfSpaceModel::Euclidean(2), 0.0).unwrap();
        let at = HalfSpaceMeasure::Atoms { atoms: vec![(vec![0.0, 0.0], 1.0)] };
        assert_eq!(h.verify(&at, &[0.0, 0.0], &cfg).unwrap().verdict, Verdict::DivergentConsistent);
        let g = HalfSpaceMeasure::Gaussian { center: vec![0.0, 0.0], amplitude: 1.0 };
        let r = h.verify(&g, &[0.1, 0.0], &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Agree, "{:?}", r.limits.iter().map(|l| l.limit).collect::<Vec<_>>());
    }
}
