//! Admissible regions Γ_α(n₀) = {(n, a) : d(n₀⁻¹n) < αa}, admissible-limit
//! estimation, the comparison of strong derivatives with admissible limits,
//! and the inequality checks that go into it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::density::CompactBump;
use crate::error::{Error, Result};
use crate::field::{FieldOnS, SpacePoint};
use crate::group::{dilate_unchecked, BallSpec, HTypeGroup, Point};
use crate::kernel::{eigenfunction_from_boundary, SpectralParam};
use crate::quadrature::QuadOptions;
use crate::measure::{
    default_ball_family, default_radii, hl_maximal, log_grid, strong_derivative, BoundaryMeasure, DerivativeEstimate,
    LimitValue, MeasureKind,
};

/// Shell points sit at this fraction of the aperture.
pub const SHELL_FRACTION: f64 = 0.9;
pub const DEFAULT_PER_LEVEL: usize = 16;
pub const DEFAULT_TOLERANCE: f64 = 0.02;
pub const DEFAULT_ABS_TOLERANCE: f64 = 1e-3;

/// a_j = 2^{-j}, j = 0..=10.
pub fn default_levels() -> Vec<f64> {
    (0..=10).map(|j| 2f64.powi(-j)).collect()
}

/// Γ_α(n₀).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibleRegion {
    pub vertex: Point,
    pub aperture: f64,
}

impl AdmissibleRegion {
    pub fn new(vertex: Point, aperture: f64) -> Result<Self> {
        if !(aperture > 0.0 && aperture.is_finite()) {
            return Err(Error::Domain(format!("aperture must be positive, got {aperture}")));
        }
        Ok(Self { vertex, aperture })
    }

    pub fn contains(&self, g: &HTypeGroup, x: &SpacePoint) -> bool {
        x.a > 0.0 && g.quasi_distance(&self.vertex, &x.n) < self.aperture * x.a
    }
}

fn check_levels(a_values: &[f64], per_level: usize) -> Result<()> {
    if per_level == 0 {
        return Err(Error::Domain("per_level must be at least 1".into()));
    }
    if a_values.is_empty() || a_values.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::Domain("levels must be positive".into()));
    }
    if a_values.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Domain("levels must be strictly decreasing".into()));
    }
    Ok(())
}

fn level_rng(seed: u64, level: usize, stream: usize) -> ChaCha8Rng {
    let mix = (level as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (stream as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03);
    ChaCha8Rng::seed_from_u64(seed ^ mix)
}

/// `count` offsets (ω, t) with d(ω) = 1, t ∈ [0, 0.9]: first t = 0, then about
/// a third on the shell t = 0.9, the rest uniform by volume inside it.
fn unit_offsets<R: Rng>(g: &HTypeGroup, rng: &mut R, count: usize) -> Vec<(Point, f64)> {
    let q = g.q() as f64;
    let shell = count.saturating_sub(1).div_ceil(3);
    let mut out = Vec::with_capacity(count);
    out.push((g.identity(), 0.0));
    for i in 1..count {
        let w = g.random_unit(rng);
        let t = if i <= shell { SHELL_FRACTION } else { SHELL_FRACTION * rng.gen::<f64>().powf(1.0 / q) };
        out.push((w, t));
    }
    out
}

fn region_level(g: &HTypeGroup, region: &AdmissibleRegion, a: f64, offsets: &[(Point, f64)]) -> Vec<SpacePoint> {
    offsets
        .iter()
        .map(|(w, t)| {
            let n = if *t == 0.0 {
                region.vertex.clone()
            } else {
                g.mul(&region.vertex, &dilate_unchecked(t * region.aperture * a, w))
            };
            SpacePoint::new(n, a)
        })
        .filter(|x| region.contains(g, x))
        .collect()
}

/// Samples of Γ_α(n₀) level by level: the vertical point (n₀, a), shell points
/// at d ≈ 0.9αa and random interior points, all from a fixed seed.
pub fn sample_admissible(
    g: &HTypeGroup,
    region: &AdmissibleRegion,
    a_values: &[f64],
    per_level: usize,
    seed: u64,
) -> Result<Vec<Vec<SpacePoint>>> {
    g.check_point(&region.vertex)?;
    check_levels(a_values, per_level)?;
    Ok(a_values
        .iter()
        .enumerate()
        .map(|(l, &a)| {
            let offsets = unit_offsets(g, &mut level_rng(seed, l, 0), per_level);
            region_level(g, region, a, &offsets)
        })
        .collect())
}

/// Own samples per aperture (ascending): `own[j][level]`.
struct Nested<T> {
    apertures: Vec<f64>,
    own: Vec<Vec<Vec<T>>>,
}

fn sorted_apertures(apertures: &[f64]) -> Result<Vec<f64>> {
    if apertures.is_empty() {
        return Err(Error::Domain("at least one aperture is required".into()));
    }
    let mut a = apertures.to_vec();
    if a.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::Domain(format!("apertures must be positive, got {apertures:?}")));
    }
    a.sort_by(f64::total_cmp);
    a.dedup();
    Ok(a)
}

fn nested_own(
    g: &HTypeGroup,
    vertex: &Point,
    apertures: &[f64],
    a_values: &[f64],
    per_level: usize,
    seed: u64,
) -> Result<Nested<SpacePoint>> {
    g.check_point(vertex)?;
    check_levels(a_values, per_level)?;
    let apertures = sorted_apertures(apertures)?;
    let own = apertures
        .iter()
        .enumerate()
        .map(|(j, &alpha)| {
            let region = AdmissibleRegion { vertex: vertex.clone(), aperture: alpha };
            a_values
                .iter()
                .enumerate()
                .map(|(l, &a)| {
                    let offsets = unit_offsets(g, &mut level_rng(seed, l, j), per_level);
                    region_level(g, &region, a, &offsets)
                })
                .collect()
        })
        .collect();
    Ok(Nested { apertures, own })
}

/// Samples for several apertures such that the set for a larger aperture
/// contains the sets of all smaller ones. Returned in ascending aperture order.
pub fn nested_samples(
    g: &HTypeGroup,
    vertex: &Point,
    apertures: &[f64],
    a_values: &[f64],
    per_level: usize,
    seed: u64,
) -> Result<Vec<(f64, Vec<Vec<SpacePoint>>)>> {
    let nested = nested_own(g, vertex, apertures, a_values, per_level, seed)?;
    Ok(union_levels(&nested.own)
        .into_iter()
        .zip(nested.apertures)
        .map(|(levels, alpha)| (alpha, levels))
        .collect())
}

fn union_levels<T: Clone>(own: &[Vec<Vec<T>>]) -> Vec<Vec<Vec<T>>> {
    let levels = own.first().map_or(0, Vec::len);
    (0..own.len())
        .map(|j| (0..levels).map(|l| own[..=j].iter().flat_map(|o| o[l].iter().cloned()).collect()).collect())
        .collect()
}

pub(crate) fn evaluate_nested<T, F>(own: &[Vec<Vec<T>>], f: F) -> Result<Vec<Vec<Vec<f64>>>>
where
    T: Sync,
    F: Fn(&T) -> Result<f64> + Sync,
{
    let flat: Vec<&T> = own.iter().flatten().flatten().collect();
    let values: Vec<f64> = flat.par_iter().map(|x| f(x)).collect::<Result<_>>()?;
    let mut it = values.into_iter();
    Ok(own
        .iter()
        .map(|levels| levels.iter().map(|pts| it.by_ref().take(pts.len()).collect()).collect())
        .collect())
}

/// Min/max/mean of F over one level of samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub a: f64,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// F at the vertical point (n₀, a).
    pub vertex: f64,
}

/// Admissible-limit estimate for one aperture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub aperture: f64,
    pub levels: Vec<LevelSummary>,
    /// None when the last three levels do not settle.
    pub limit: Option<LimitValue>,
    /// Largest max − min over the last three levels.
    pub oscillation: f64,
    /// Spread of the level means over the last three levels.
    pub drift: f64,
    pub tolerance: f64,
    pub abs_tolerance: f64,
}

impl ConvergenceReport {
    pub fn conclusive(&self) -> bool {
        self.limit.is_some()
    }

    pub fn finite_limit(&self) -> Option<f64> {
        self.limit.and_then(LimitValue::finite)
    }
}

/// Builds a report from values per level; `values[l][0]` must be the vertex.
///
/// The limit is the last level's mean when, over the last three levels, both
/// the oscillation and the drift of the means are within tolerance. Minima
/// growing at least like a^{-growth} over the last three levels give +∞.
pub(crate) fn summarize_levels(
    aperture: f64,
    a_values: &[f64],
    values: &[Vec<f64>],
    growth: f64,
    tol: f64,
    abs_tol: f64,
) -> ConvergenceReport {
    let levels: Vec<LevelSummary> = a_values
        .iter()
        .zip(values)
        .map(|(&a, v)| {
            let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            LevelSummary {
                a,
                count: v.len(),
                min,
                max,
                mean: v.iter().sum::<f64>() / v.len() as f64,
                vertex: v.first().copied().unwrap_or(f64::NAN),
            }
        })
        .collect();
    let mut report = ConvergenceReport {
        aperture,
        levels,
        limit: None,
        oscillation: f64::NAN,
        drift: f64::NAN,
        tolerance: tol,
        abs_tolerance: abs_tol,
    };
    let n = report.levels.len();
    if n < 3 || values.iter().flatten().any(|v| !v.is_finite()) {
        return report;
    }
    let last = &report.levels[n - 3..];
    let oscillation = last.iter().map(|l| l.max - l.min).fold(0.0, f64::max);
    let hi = last.iter().map(|l| l.mean).fold(f64::NEG_INFINITY, f64::max);
    let lo = last.iter().map(|l| l.mean).fold(f64::INFINITY, f64::min);
    report.oscillation = oscillation;
    report.drift = hi - lo;

    let growing = last
        .windows(2)
        .all(|w| w[0].min > 0.0 && w[1].min >= w[0].min * (w[0].a / w[1].a).powf(growth));
    if growing {
        report.limit = Some(LimitValue::Infinite);
        return report;
    }
    let value = last[2].mean;
    let allowed = (tol * value.abs()).max(abs_tol);
    if oscillation <= allowed && report.drift <= allowed {
        report.limit = Some(LimitValue::Finite(value));
    }
    report
}

/// Estimates the admissible limit of F at the vertex of `region`.
#[allow(clippy::too_many_arguments)]
pub fn admissible_limit(
    g: &HTypeGroup,
    f: &FieldOnS,
    region: &AdmissibleRegion,
    a_values: &[f64],
    per_level: usize,
    seed: u64,
    tol: f64,
    abs_tol: f64,
) -> Result<ConvergenceReport> {
    let samples = sample_admissible(g, region, a_values, per_level, seed)?;
    let values = evaluate_nested(std::slice::from_ref(&samples), |x| f.at(x))?;
    Ok(summarize_levels(region.aperture, a_values, &values[0], g.q() as f64 / 2.0, tol, abs_tol))
}

fn limits_over_apertures(
    g: &HTypeGroup,
    f: &FieldOnS,
    vertex: &Point,
    cfg: &FatouConfig,
) -> Result<Vec<ConvergenceReport>> {
    let nested = nested_own(g, vertex, &cfg.apertures, &cfg.levels, cfg.per_level, cfg.seed)?;
    let own_values = evaluate_nested(&nested.own, |x| f.at(x))?;
    Ok(union_levels(&own_values)
        .iter()
        .zip(&nested.apertures)
        .map(|(vals, &alpha)| {
            summarize_levels(alpha, &cfg.levels, vals, g.q() as f64 / 2.0, cfg.tolerance, cfg.abs_tolerance)
        })
        .collect())
}

/// Outcome of comparing the strong derivative with the admissible limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Agree,
    Disagree,
    Inconclusive,
    /// Derivative and every limit are +∞.
    DivergentConsistent,
}

impl Verdict {
    pub fn passed(self) -> bool {
        matches!(self, Verdict::Agree | Verdict::DivergentConsistent)
    }
}

/// Agree when the derivative and every aperture's limit lie within tolerance
/// of the derivative's value.
pub fn fatou_verdict(derivative: &DerivativeEstimate, limits: &[ConvergenceReport], tol: f64, abs_tol: f64) -> Verdict {
    let any_infinite =
        matches!(derivative.value, LimitValue::Infinite) || limits.iter().any(|l| l.limit == Some(LimitValue::Infinite));
    if any_infinite {
        let all_infinite = matches!(derivative.value, LimitValue::Infinite)
            && limits.iter().all(|l| l.limit == Some(LimitValue::Infinite));
        if all_infinite {
            return Verdict::DivergentConsistent;
        }
        let someone_finite = (derivative.converged && derivative.value.finite().is_some())
            || limits.iter().any(|l| l.finite_limit().is_some());
        return if someone_finite { Verdict::Disagree } else { Verdict::Inconclusive };
    }
    let Some(d) = derivative.value.finite().filter(|_| derivative.converged) else {
        return Verdict::Inconclusive;
    };
    let mut values = Vec::with_capacity(limits.len());
    for l in limits {
        match l.finite_limit() {
            Some(v) => values.push(v),
            None => return Verdict::Inconclusive,
        }
    }
    let allowed = (tol * d.abs()).max(abs_tol);
    if values.iter().all(|v| (v - d).abs() <= allowed) {
        Verdict::Agree
    } else {
        Verdict::Disagree
    }
}

/// If one aperture has a conclusive limit, all do and they coincide.
pub fn apertures_consistent(limits: &[ConvergenceReport], tol: f64, abs_tol: f64) -> bool {
    if !limits.iter().any(ConvergenceReport::conclusive) {
        return true;
    }
    if !limits.iter().all(ConvergenceReport::conclusive) {
        return false;
    }
    if limits.iter().all(|l| l.limit == Some(LimitValue::Infinite)) {
        return true;
    }
    let finite: Vec<f64> = limits.iter().filter_map(ConvergenceReport::finite_limit).collect();
    if finite.len() != limits.len() {
        return false;
    }
    let hi = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo <= (tol * hi.abs()).max(abs_tol)
}

/// Sampling, schedule and tolerance settings of a Fatou run.
#[derive(Debug, Clone, Serialize)]
pub struct FatouConfig {
    pub apertures: Vec<f64>,
    pub levels: Vec<f64>,
    pub per_level: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub abs_tolerance: f64,
    /// Radii of the strong-derivative schedule.
    pub radii: Vec<f64>,
    /// Ball family for the strong derivative; the canonical family if None.
    #[serde(skip)]
    pub balls: Option<Vec<BallSpec>>,
}

impl Default for FatouConfig {
    fn default() -> Self {
        Self {
            apertures: vec![0.5, 1.0, 2.0],
            levels: default_levels(),
            per_level: DEFAULT_PER_LEVEL,
            seed: 7,
            tolerance: DEFAULT_TOLERANCE,
            abs_tolerance: DEFAULT_ABS_TOLERANCE,
            radii: default_radii(),
            balls: None,
        }
    }
}

impl FatouConfig {
    fn balls(&self, g: &HTypeGroup) -> Vec<BallSpec> {
        self.balls.clone().unwrap_or_else(|| default_ball_family(g))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FatouReport {
    pub vertex: Point,
    pub beta: f64,
    pub c: f64,
    pub measure: String,
    pub derivative: DerivativeEstimate,
    pub limits: Vec<ConvergenceReport>,
    pub verdict: Verdict,
    pub apertures_consistent: bool,
    pub tolerance: f64,
    pub abs_tolerance: f64,
}

impl FatouReport {
    pub fn passed(&self) -> bool {
        self.verdict.passed() && self.apertures_consistent
    }
}

/// Compares Dμ(n₀) with the admissible limits at n₀ of
/// F = a^{β−ρ}u = C a^{2β} + 𝒬_{iβ}[μ] for each aperture.
///
/// The derivative comes from ball masses of μ, the limits from the transform,
/// so the two sides share no quadrature.
pub fn verify_fatou(
    sp: &SpectralParam,
    c: f64,
    mu: &BoundaryMeasure,
    n0: &Point,
    cfg: &FatouConfig,
) -> Result<FatouReport> {
    let g = sp.group();
    let eig = eigenfunction_from_boundary(sp, c, mu)?;
    let derivative = strong_derivative(mu, n0, &cfg.balls(g), &cfg.radii, cfg.tolerance, cfg.abs_tolerance)?;
    let limits = limits_over_apertures(g, &eig.normalized, n0, cfg)?;
    let verdict = fatou_verdict(&derivative, &limits, cfg.tolerance, cfg.abs_tolerance);
    Ok(FatouReport {
        vertex: n0.clone(),
        beta: sp.beta(),
        c,
        measure: mu.describe(),
        derivative,
        apertures_consistent: apertures_consistent(&limits, cfg.tolerance, cfg.abs_tolerance),
        limits,
        verdict,
        tolerance: cfg.tolerance,
        abs_tolerance: cfg.abs_tolerance,
    })
}

/// Limits of one stage of the reduction to n₀ = 0̲ and a truncated measure.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionStage {
    pub name: String,
    pub vertex: Point,
    pub measure: String,
    pub limits: Vec<ConvergenceReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionReport {
    pub stages: Vec<ReductionStage>,
    /// Largest |L_stage − L_original| over stages and apertures.
    pub max_gap: f64,
    /// Half the tolerance allowed for the original limit.
    pub budget: f64,
    pub passed: bool,
}

/// Runs the admissible limits three times: for μ at n₀, for τ_{n₀}μ at 0̲,
/// and for τ_{n₀}μ restricted to B(0̲, 1/τ) at 0̲. The limits must not move
/// by more than half the tolerance.
pub fn reduction_check(sp: &SpectralParam, mu: &BoundaryMeasure, n0: &Point, cfg: &FatouConfig) -> Result<ReductionReport> {
    let g = sp.group();
    mu.check_admissible(sp.beta())?;
    let stage = |name: &str, vertex: Point, m: &BoundaryMeasure| -> Result<ReductionStage> {
        let f = eigenfunction_from_boundary(sp, 0.0, m)?.normalized;
        Ok(ReductionStage {
            name: name.into(),
            measure: m.describe(),
            limits: limits_over_apertures(g, &f, &vertex, cfg)?,
            vertex,
        })
    };
    let original = stage("original", n0.clone(), mu)?;
    let translated = mu.translate(n0)?;
    let shifted = stage("translated", g.identity(), &translated)?;
    // The jump at the ball edge stalls cubature well short of 1e-6 once the
    // probe is off centre, so the truncated stage asks for an absolute floor
    // of a tenth of the smallest comparison budget instead.
    let floor = original
        .limits
        .iter()
        .filter_map(|r| r.finite_limit())
        .map(|l| 0.05 * (cfg.tolerance * l.abs()).max(cfg.abs_tolerance))
        .fold(f64::INFINITY, f64::min);
    let ball = BallSpec::new(g.identity(), 1.0 / g.tau())?;
    let mut truncated = translated.truncate(&ball);
    if floor.is_finite() {
        truncated = truncated.with_quad(QuadOptions::rel(1e-5).with_abs(floor).with_max_evals(4_000_000));
    }
    let cut = stage("truncated", g.identity(), &truncated)?;
    let stages = vec![original, shifted, cut];
    let mut max_gap = 0.0f64;
    let mut budget = f64::INFINITY;
    let mut passed = true;
    for (i, base) in stages[0].limits.iter().enumerate() {
        let Some(l0) = base.finite_limit() else {
            passed = false;
            continue;
        };
        let b = 0.5 * (cfg.tolerance * l0.abs()).max(cfg.abs_tolerance);
        budget = budget.min(b);
        for stage in &stages[1..] {
            match stage.limits[i].finite_limit() {
                Some(l) => {
                    let gap = (l - l0).abs();
                    max_gap = max_gap.max(gap);
                    passed &= gap <= b;
                }
                None => passed = false,
            }
        }
    }
    Ok(ReductionReport { stages, max_gap, budget, passed })
}

/// Largest value of T(n) = (16a² + d² + 8a‖X‖²) / (16a² + d²/(4τ²)) relative
/// to its bound 4τ²(4a² + 1 + 8a) outside B(0̲, 2).
#[derive(Debug, Clone, Serialize)]
pub struct RatioBoundReport {
    pub points: usize,
    pub violations: usize,
    /// max T / bound
    pub worst_fraction: f64,
    pub witness: Option<SpacePoint>,
}

pub fn ratio_bound(g: &HTypeGroup, n: &Point, a: f64) -> (f64, f64) {
    let tau = g.tau();
    let d = g.norm_d(n);
    let t = (16.0 * a * a + d * d + 8.0 * a * n.norm_x_sq()) / (16.0 * a * a + d * d / (4.0 * tau * tau));
    (t, 4.0 * tau * tau * (4.0 * a * a + 1.0 + 8.0 * a))
}

/// Scans `directions` × `radii` points with 2 < d ≤ 10⁴ for each a.
pub fn ratio_estimate_check(
    g: &HTypeGroup,
    a_values: &[f64],
    directions: usize,
    radii: usize,
    seed: u64,
) -> RatioBoundReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Point> = (0..directions).map(|_| g.random_unit(&mut rng)).collect();
    let (lo, hi) = (2.0f64 * (1.0 + 1e-9), 1e4f64);
    let ds: Vec<f64> = (0..radii)
        .map(|i| lo * (hi / lo).powf(i as f64 / (radii.max(2) - 1) as f64))
        .collect();
    let mut report = RatioBoundReport { points: 0, violations: 0, worst_fraction: 0.0, witness: None };
    for &a in a_values {
        for w in &dirs {
            for &d in &ds {
                let n = dilate_unchecked(d, w);
                let (t, bound) = ratio_bound(g, &n, a);
                report.points += 1;
                let frac = t / bound;
                if !(frac <= 1.0) {
                    report.violations += 1;
                }
                if !(frac <= report.worst_fraction) {
                    report.worst_fraction = frac;
                    report.witness = Some(SpacePoint::new(n, a));
                }
            }
        }
    }
    report
}

/// Constants of the maximal-function sandwich
/// C_β M_HL(μ)(n₀) ≤ sup_a 𝒬[μ](n₀, a) ≤ sup_{Γ_α(n₀)} 𝒬[μ] ≤ C_{α,β} M_HL(μ)(n₀).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichConstants {
    pub alpha: f64,
    /// c_β v₁ / 25^{ρ+β}
    pub lower: f64,
    /// c_β v₁ [(2τα)^Q + τ^Q α^{−2β} 2^{2Q+2β} / (2^{2β} − 1)]
    pub upper: f64,
}

pub fn sandwich_constants(sp: &SpectralParam, alpha: f64) -> SandwichConstants {
    let g = sp.group();
    let (beta, rho) = (sp.beta(), sp.rho());
    let q = g.q() as f64;
    let tau = g.tau();
    let base = sp.c_beta() * g.unit_ball_volume();
    let lower = base / 25f64.powf(rho + beta);
    let series = tau.powf(q) * alpha.powf(-2.0 * beta) * 2f64.powf(2.0 * q + 2.0 * beta) / (4f64.powf(beta) - 1.0);
    let upper = base * ((2.0 * tau * alpha).powf(q) + series);
    SandwichConstants { alpha, lower, upper }
}

/// Grids for the sandwich: `radii` doubles as the a-grid of the vertical
/// supremum and the levels of the admissible supremum.
#[derive(Debug, Clone, Serialize)]
pub struct SandwichGrid {
    pub radii: Vec<f64>,
    pub per_level: usize,
    pub seed: u64,
}

impl Default for SandwichGrid {
    fn default() -> Self {
        Self { radii: log_grid(1e-3, 1e3, 1), per_level: 8, seed: 11 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichRow {
    pub probe: Point,
    pub maximal: f64,
    pub vertical_sup: f64,
    pub admissible_sup: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub measure: String,
    pub constants: SandwichConstants,
    pub rows: Vec<SandwichRow>,
    pub violations: usize,
}

/// Evaluates the three suprema at each probe on a shared grid.
pub fn maximal_sandwich_check(
    sp: &SpectralParam,
    mu: &BoundaryMeasure,
    probes: &[Point],
    alpha: f64,
    grid: &SandwichGrid,
) -> Result<SandwichReport> {
    let g = sp.group();
    mu.check_admissible(sp.beta())?;
    let constants = sandwich_constants(sp, alpha);
    let mut radii = grid.radii.clone();
    radii.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::with_capacity(probes.len());
    for probe in probes {
        let maximal = hl_maximal(mu, probe, &radii)?;
        let region = AdmissibleRegion::new(probe.clone(), alpha)?;
        let samples = sample_admissible(g, &region, &radii, grid.per_level, grid.seed)?;
        let values = evaluate_nested(std::slice::from_ref(&samples), |x| sp.q_transform(mu, &x.n, x.a))?;
        let vertical_sup = values[0].iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
        let admissible_sup = values[0].iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
        let holds = constants.lower * maximal <= vertical_sup
            && vertical_sup <= admissible_sup
            && admissible_sup <= constants.upper * maximal;
        rows.push(SandwichRow { probe: probe.clone(), maximal, vertical_sup, admissible_sup, holds });
    }
    let violations = rows.iter().filter(|r| !r.holds).count();
    Ok(SandwichReport { measure: mu.describe(), constants, rows, violations })
}

/// sup over probes of |𝒬f(n, a) − f(n)| / q_1(n), per a.
#[derive(Debug, Clone, Serialize)]
pub struct UniformConvergenceReport {
    pub a_values: Vec<f64>,
    pub sup_ratio: Vec<f64>,
    pub witnesses: Vec<Point>,
    /// sup at the first a over sup at the last.
    pub reduction: f64,
}

pub fn uniform_convergence_check(
    sp: &SpectralParam,
    f: &BoundaryMeasure,
    a_values: &[f64],
    probes: &[Point],
) -> Result<UniformConvergenceReport> {
    let g = sp.group();
    let MeasureKind::Density { f: dens, .. } = f.kind() else {
        return Err(Error::Domain("uniform convergence needs a density".into()));
    };
    if a_values.is_empty() || probes.is_empty() {
        return Err(Error::Domain("need at least one a value and one probe".into()));
    }
    let mut sup_ratio = Vec::new();
    let mut witnesses = Vec::new();
    for &a in a_values {
        let ratios: Vec<f64> = probes
            .par_iter()
            .map(|n| Ok((sp.q_transform(f, n, a)? - dens.eval(g, n)).abs() / sp.q_kernel(n, 1.0)))
            .collect::<Result<_>>()?;
        let (i, &m) = ratios
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .expect("probes are nonempty");
        sup_ratio.push(m);
        witnesses.push(probes[i].clone());
    }
    let reduction = sup_ratio[0] / sup_ratio[sup_ratio.len() - 1];
    Ok(UniformConvergenceReport { a_values: a_values.to_vec(), sup_ratio, witnesses, reduction })
}

/// The compact bump (1 − d²)³ on B(0̲, 1) used by the uniform convergence check.
pub fn unit_bump(g: &HTypeGroup) -> BoundaryMeasure {
    BoundaryMeasure::density(
        g,
        std::sync::Arc::new(CompactBump { center: g.identity(), radius: 1.0, amplitude: 1.0 }),
    )
}

/// Probe points for the uniform convergence check: the identity plus random
/// points with d spread over [0, max_radius].
pub fn spread_probes(g: &HTypeGroup, count: usize, max_radius: f64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![g.identity()];
    for i in 1..count {
        let w = g.random_unit(&mut rng);
        let r = max_radius * i as f64 / count as f64;
        out.push(dilate_unchecked(r, &w));
    }
    out
}

/// max relative gap between 𝒬[μ_r](n, a) and 𝒬[μ](δ_r n, ra), where μ_r is
/// the dilated measure.
#[derive(Debug, Clone, Serialize)]
pub struct DilationReport {
    pub r_values: Vec<f64>,
    pub probes: usize,
    pub max_gap: f64,
    pub witness: Option<SpacePoint>,
}

pub fn dilation_commutation_check(
    sp: &SpectralParam,
    mu: &BoundaryMeasure,
    r_values: &[f64],
    probes: usize,
    seed: u64,
) -> Result<DilationReport> {
    let g = sp.group();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<SpacePoint> = (0..probes)
        .map(|_| {
            let n = g.random_in_ball(&mut rng, 3.0);
            let a = 10f64.powf(rng.gen_range(-1.0..1.0));
            SpacePoint::new(n, a)
        })
        .collect();
    let mut report = DilationReport { r_values: r_values.to_vec(), probes: 0, max_gap: 0.0, witness: None };
    for &r in r_values {
        let dilated = mu.dilate(r)?;
        for x in &points {
            let lhs = sp.q_transform(&dilated, &x.n, x.a)?;
            let rhs = sp.q_transform(mu, &g.dilate(r, &x.n)?, r * x.a)?;
            let gap = (lhs - rhs).abs() / rhs.abs().max(1e-300);
            report.probes += 1;
            if !(gap <= report.max_gap) {
                report.max_gap = gap;
                report.witness = Some(x.clone());
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;

    fn h1() -> HTypeGroup {
        HTypeGroup::heisenberg(1).unwrap()
    }

    #[test]
    fn membership_predicate() {
        let g = h1();
        let n0 = Point::new(&[0.2, -0.1], &[0.3]);
        let region = AdmissibleRegion::new(n0.clone(), 1.5).unwrap();
        assert!(region.contains(&g, &SpacePoint::new(n0.clone(), 1e-9)));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = g.random_unit(&mut rng);
        for (frac, inside) in [(0.9, true), (1.1, false)] {
            let n = g.mul(&n0, &dilate_unchecked(frac * 1.5 * 0.25, &w));
            assert_eq!(region.contains(&g, &SpacePoint::new(n, 0.25)), inside);
        }
    }

    #[test]
    fn samples_are_members_and_nested() {
        let g = h1();
        let n0 = Point::new(&[0.5, 0.0], &[-0.2]);
        let levels = default_levels();
        let region = AdmissibleRegion::new(n0.clone(), 2.0).unwrap();
        let s = sample_admissible(&g, &region, &levels, 16, 1).unwrap();
        for (level, a) in s.iter().zip(&levels) {
            assert_eq!(level.len(), 16);
            assert_eq!(level[0].n, n0);
            assert!(level.iter().all(|x| x.a == *a && region.contains(&g, x)));
        }
        let nested = nested_samples(&g, &n0, &[2.0, 0.5, 1.0], &levels, 8, 5).unwrap();
        assert_eq!(nested.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0.5, 1.0, 2.0]);
        for w in nested.windows(2) {
            for (small, big) in w[0].1.iter().zip(&w[1].1) {
                assert!(small.iter().all(|x| big.contains(x)));
            }
        }
        assert!(sample_admissible(&g, &region, &[0.5, 1.0], 4, 1).is_err());
    }

    #[test]
    fn dilation_keeps_cone_at_identity() {
        let g = h1();
        let region = AdmissibleRegion::new(g.identity(), 1.0).unwrap();
        let s = sample_admissible(&g, &region, &[0.7], 16, 2).unwrap();
        for x in &s[0] {
            for r in [0.1, 3.0] {
                let y = SpacePoint::new(g.dilate(r, &x.n).unwrap(), r * x.a);
                assert!(region.contains(&g, &y));
            }
        }
    }

    #[test]
    fn limits_of_closed_forms() {
        let g = h1();
        let region = AdmissibleRegion::new(g.identity(), 1.0).unwrap();
        let levels = default_levels();
        let c = admissible_limit(&g, &FieldOnS::constant(3.0), &region, &levels[..3], 4, 1, 0.02, 1e-3).unwrap();
        assert_eq!(c.limit, Some(LimitValue::Finite(3.0)));
        let p = admissible_limit(&g, &FieldOnS::power_of_a(2.0), &region, &levels, 4, 1, 0.02, 1e-3).unwrap();
        assert!(p.finite_limit().unwrap().abs() < 1e-3);
        let blow = admissible_limit(&g, &FieldOnS::power_of_a(-2.0), &region, &levels, 4, 1, 0.02, 1e-3).unwrap();
        assert_eq!(blow.limit, Some(LimitValue::Infinite));
        let osc = FieldOnS::closed_form("osc", |_, a| (1.0 / a).sin());
        let o = admissible_limit(&g, &osc, &region, &levels, 4, 1, 0.02, 1e-3).unwrap();
        assert!(!o.conclusive());
    }

    #[test]
    fn constant_measure_agrees() {
        let g = h1();
        let sp = SpectralParam::new(&g, 1.0).unwrap();
        let mu = BoundaryMeasure::lebesgue(&g, 2.0).unwrap();
        let cfg = FatouConfig { per_level: 4, ..Default::default() };
        let r = verify_fatou(&sp, 0.0, &mu, &g.identity(), &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Agree);
        assert!(r.passed());
        for l in &r.limits {
            assert!((l.finite_limit().unwrap() - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn atom_at_vertex_diverges_consistently() {
        let g = h1();
        let sp = SpectralParam::new(&g, 1.0).unwrap();
        let mu = BoundaryMeasure::dirac(&g, g.identity(), 1.0).unwrap();
        let cfg = FatouConfig { per_level: 4, ..Default::default() };
        let r = verify_fatou(&sp, 1.0, &mu, &g.identity(), &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::DivergentConsistent);
    }

    #[test]
    fn verdict_ignores_order() {
        let g = h1();
        let sp = SpectralParam::new(&g, 1.0).unwrap();
        let mu = BoundaryMeasure::atomic(&g, vec![Atom { at: Point::new(&[1.0, 0.0], &[0.0]), weight: 1.0 }]).unwrap();
        let cfg = FatouConfig { per_level: 4, ..Default::default() };
        let r = verify_fatou(&sp, 0.0, &mu, &g.identity(), &cfg).unwrap();
        assert_eq!(r.verdict, Verdict::Agree);
        let mut rev = r.limits.clone();
        rev.reverse();
        assert_eq!(fatou_verdict(&r.derivative, &rev, r.tolerance, r.abs_tolerance), r.verdict);
    }

    #[test]
    fn sandwich_for_lebesgue() {
        let g = h1();
        let sp = SpectralParam::new(&g, 1.0).unwrap();
        let k = sandwich_constants(&sp, 1.0);
        assert!(k.lower <= 1.0 && 1.0 <= k.upper);
        let mu = BoundaryMeasure::lebesgue(&g, 1.0).unwrap();
        let grid = SandwichGrid { per_level: 3, ..Default::default() };
        let r = maximal_sandwich_check(&sp, &mu, &[g.identity()], 1.0, &grid).unwrap();
        assert_eq!(r.violations, 0);
        assert!((r.rows[0].maximal - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_bound_small_grid() {
        let g = h1();
        let r = ratio_estimate_check(&g, &[0.1, 1.0, 10.0], 10, 10, 1);
        assert_eq!(r.points, 300);
        assert_eq!(r.violations, 0);
    }
}
