//! The five verification suites. Each returns its checks together with the
//! constants it used, the raw core reports and, where there is a level
//! schedule, the per-level table behind the CSV and the plot.

use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use fatou_core::baseline::{HalfSpace, HalfSpaceMeasure, HalfSpaceModel};
use fatou_core::fatou::{
    dilation_commutation_check, maximal_sandwich_check, ratio_estimate_check, reduction_check, spread_probes,
    uniform_convergence_check, unit_bump, ConvergenceReport, SandwichGrid,
};
use fatou_core::haar::{integrate_ball, power_tail, power_tail_radius, Radial};
use fatou_core::kernel::{base_power_integral, c_function, poisson_field, poisson_kernel};
use fatou_core::measure::MeasureKind;
use fatou_core::operator::{apply_l_beta, lbeta_correspondence_check, StencilConfig, StencilOrder};
use fatou_core::{
    verify_fatou, FieldOnS, HTypeGroup, LimitValue, QuadOptions, SpacePoint, SpectralParam,
};

use crate::config::{ExperimentConfig, HalfSpaceKind, HalfSpaceMeasureSpec, Suite};
use crate::svg::Plot;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub detail: String,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, upper: f64) -> Self {
        Self { name: name.into(), passed: value <= upper, value: Some(value), lower: None, upper: Some(upper), detail: String::new() }
    }

    fn at_least(name: impl Into<String>, value: f64, lower: f64) -> Self {
        Self { name: name.into(), passed: value >= lower, value: Some(value), lower: Some(lower), upper: None, detail: String::new() }
    }

    fn within(name: impl Into<String>, value: f64, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            passed: (lower..=upper).contains(&value),
            value: Some(value),
            lower: Some(lower),
            upper: Some(upper),
            detail: String::new(),
        }
    }

    fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, value: None, lower: None, upper: None, detail: detail.into() }
    }

    fn note(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// One row of the level table: an aperture, a level of the a-schedule and
/// the summary of F over the samples there.
#[derive(Debug, Clone, Serialize)]
pub struct LevelRow {
    pub source: String,
    pub aperture: f64,
    pub level: usize,
    pub a: f64,
    pub count: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub vertex: f64,
}

pub struct Outcome {
    pub checks: Vec<Check>,
    pub constants: Value,
    pub details: Value,
    pub levels: Vec<LevelRow>,
    pub plot: Option<Plot>,
}

pub fn run(cfg: &ExperimentConfig, tolerance_scale: f64) -> Result<Outcome> {
    match cfg.suite {
        Suite::Kernels => kernels(cfg, tolerance_scale),
        Suite::Operators => operators(cfg, tolerance_scale),
        Suite::Lemmas => lemmas(cfg, tolerance_scale),
        Suite::Fatou => fatou(cfg, tolerance_scale),
        Suite::Baseline => baseline(cfg, tolerance_scale),
    }
}

fn group_constants(g: &HTypeGroup, sp: &SpectralParam) -> Value {
    json!({
        "group": { "name": g.name(), "p": g.p(), "k": g.k(), "q": g.q() },
        "spectral": sp.constants(),
    })
}

fn kernels(cfg: &ExperimentConfig, scale: f64) -> Result<Outcome> {
    let g = cfg.build_group()?;
    let sp = SpectralParam::new(&g, cfg.spectral.beta)?;
    let beta = sp.beta();
    let mut checks = vec![Check::at_most("c(-i rho) = 1", (c_function(&g, g.rho())? - 1.0).abs(), 1e-12 * scale)];

    let identity = base_power_integral(&g, g.rho() + beta, 1e-7);
    let expected = sp.c_function() / sp.c_pk();
    checks.push(
        Check::at_most("integral identity", (identity.value - expected).abs() / expected, 1e-3 * scale)
            .note(format!("quadrature {:.6e} against c(-i beta)/c_pk = {expected:.6e}", identity.value)),
    );

    let q = g.q() as f64;
    let c_pk = g.poisson_normalizer();
    let quad = QuadOptions::rel(cfg.kernels.rel_tol).with_max_evals(4_000_000);
    let mut masses = Vec::new();
    for &a in &cfg.kernels.a_values {
        // P_a ≤ c_pk 16^Q a^Q d^{-2Q} gives a power tail
        let coeff = c_pk * 16f64.powf(q) * a.powf(q);
        let radius = power_tail_radius(&g, 2.0 * q, coeff, 1e-5);
        let tail = coeff * power_tail(&g, 2.0 * q, radius);
        let p = integrate_ball(&g, &g.identity(), radius, Radial::Log, |n| poisson_kernel(&g, n, a), &quad);
        checks.push(
            Check::at_most(format!("P_a mass, a = {a}"), (p.value - 1.0).abs() + p.error + tail, 1e-3 * scale)
                .note(format!("mass {:.8}, quadrature error {:.1e}, tail {tail:.1e}", p.value, p.error)),
        );
        let m = sp.q_mass(a, cfg.kernels.rel_tol);
        checks.push(
            Check::at_most(format!("q mass, a = {a}"), (m.value - 1.0).abs() + m.tail_bound, 1e-3 * scale)
                .note(format!("mass {:.8}, tail {:.1e}", m.value, m.tail_bound)),
        );
        masses.push(json!({ "a": a, "poisson": p.value, "poisson_tail": tail, "q": m }));
    }
    Ok(Outcome {
        checks,
        constants: group_constants(&g, &sp),
        details: json!({ "integral_identity": identity, "masses": masses }),
        levels: Vec::new(),
        plot: None,
    })
}

fn sample_space(g: &HTypeGroup, count: usize, radius: f64, seed: u64) -> Vec<SpacePoint> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = g.random_in_ball(&mut rng, radius);
            let a = 10f64.powf(rng.gen_range(-1.0..1.0));
            SpacePoint::new(n, a)
        })
        .collect()
}

fn operators(cfg: &ExperimentConfig, scale: f64) -> Result<Outcome> {
    let g = cfg.build_group()?;
    let sp = SpectralParam::new(&g, cfg.spectral.beta)?;
    let (beta, rho) = (sp.beta(), g.rho());
    let o = &cfg.operators;
    let region = sample_space(&g, o.points, o.radius, cfg.seed);
    let stencil = StencilConfig::new(o.h0, StencilOrder::Second)?;
    let pole = o.pole.clone().unwrap_or_else(|| g.identity());

    let u = poisson_field(&sp, pole);
    let coarse = lbeta_correspondence_check(&g, beta, &u, &region, &stencil)?;
    let fine = lbeta_correspondence_check(&g, beta, &u, &region, &stencil.halved())?;
    let ratio = coarse.eigen_residual / fine.eigen_residual;
    let mut checks = vec![
        Check::at_most("eigen residual of the Poisson kernel", coarse.eigen_residual, 1e-4 * scale),
        Check::within("residual ratio under h halving", ratio, 3.5, 4.5),
        Check::at_most("L-beta residual of a^{beta-rho} P", coarse.harmonic_residual, 1e-4 * scale),
    ];
    let mut powers = Vec::new();
    for (label, s) in [("a^{beta+rho}", beta + rho), ("a^{rho-beta}", rho - beta)] {
        let r = lbeta_correspondence_check(&g, beta, &FieldOnS::power_of_a(s), &region, &stencil)?;
        checks.push(Check::at_most(
            format!("correspondence for {label}"),
            r.eigen_residual.max(r.harmonic_residual),
            1e-4 * scale,
        ));
        powers.push(r);
    }
    // a^{2β} and constants are annihilated exactly; a fourth-order stencil
    // is exact on them up to rounding
    let exact = StencilConfig::new(1e-2, StencilOrder::Fourth)?;
    let mut worst_zero = 0.0f64;
    for f in [FieldOnS::power_of_a(2.0 * beta), FieldOnS::constant(1.0)] {
        for x in &region {
            let v = apply_l_beta(&g, beta, &f, x, &exact)?;
            worst_zero = worst_zero.max(v.abs() / f.at(x)?.abs());
        }
    }
    checks.push(Check::at_most("L-beta on a^{2 beta} and constants", worst_zero, 1e-10 * scale));
    Ok(Outcome {
        checks,
        constants: group_constants(&g, &sp),
        details: json!({ "poisson": coarse, "poisson_halved": fine, "powers": powers }),
        levels: Vec::new(),
        plot: None,
    })
}

fn lemmas(cfg: &ExperimentConfig, scale: f64) -> Result<Outcome> {
    let g = cfg.build_group()?;
    let sp = SpectralParam::new(&g, cfg.spectral.beta)?;
    let mu = cfg.build_measure(&g)?;
    let l = &cfg.lemmas;

    let ratio = ratio_estimate_check(&g, &l.ratio_a_values, l.ratio_directions, l.ratio_radii, cfg.seed);
    let mut checks = vec![Check::at_most("ratio bound violations", ratio.violations as f64, 0.0)
        .note(format!("{} points, max T/bound {:.4}", ratio.points, ratio.worst_fraction))];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut probes = vec![g.identity()];
    while probes.len() < l.sandwich_probes {
        probes.push(g.random_in_ball(&mut rng, 2.0));
    }
    let sandwich = maximal_sandwich_check(&sp, &mu, &probes, l.sandwich_alpha, &SandwichGrid::default())?;
    checks.push(
        Check::at_most("maximal sandwich violations", sandwich.violations as f64, 0.0)
            .note(format!("{} probe rows", sandwich.rows.len())),
    );

    let uniform = uniform_convergence_check(
        &sp,
        &unit_bump(&g),
        &l.uniform_a_values,
        &spread_probes(&g, l.uniform_probes, l.uniform_radius, cfg.seed),
    )?;
    checks.push(
        Check::at_least("uniform convergence reduction", uniform.reduction, l.uniform_min_reduction / scale)
            .note(format!("sup ratio by a: {:?}", uniform.sup_ratio)),
    );

    let dilation = if matches!(mu.kind(), MeasureKind::Atomic(_)) {
        let r = dilation_commutation_check(&sp, &mu, &l.dilation_r_values, l.dilation_probes, cfg.seed)?;
        checks.push(Check::at_most("dilation commutation gap", r.max_gap, 1e-12 * scale));
        Some(r)
    } else {
        checks.push(Check::flag("dilation commutation gap", true, "skipped: measure is not atomic"));
        None
    };
    Ok(Outcome {
        checks,
        constants: group_constants(&g, &sp),
        details: json!({ "ratio": ratio, "sandwich": sandwich, "uniform": uniform, "dilation": dilation }),
        levels: Vec::new(),
        plot: None,
    })
}

fn level_rows(source: &str, limits: &[ConvergenceReport]) -> Vec<LevelRow> {
    limits
        .iter()
        .flat_map(|r| {
            r.levels.iter().enumerate().map(move |(i, s)| LevelRow {
                source: source.into(),
                aperture: r.aperture,
                level: i,
                a: s.a,
                count: s.count,
                min: s.min,
                mean: s.mean,
                max: s.max,
                vertex: s.vertex,
            })
        })
        .collect()
}

fn convergence_plot(title: String, limits: &[ConvergenceReport], derivative: &LimitValue) -> Plot {
    Plot {
        title,
        x_label: "a".into(),
        y_label: "mean of F over the level".into(),
        series: limits
            .iter()
            .map(|r| (format!("aperture {}", r.aperture), r.levels.iter().map(|s| (s.a, s.mean)).collect()))
            .collect(),
        reference: match derivative {
            LimitValue::Finite(v) => Some(("strong derivative".into(), *v)),
            LimitValue::Infinite => None,
        },
    }
}

fn describe_limits(limits: &[ConvergenceReport]) -> String {
    limits
        .iter()
        .map(|r| match r.limit {
            Some(LimitValue::Finite(v)) => format!("{}: {v:.6}", r.aperture),
            Some(LimitValue::Infinite) => format!("{}: inf", r.aperture),
            None => format!("{}: unsettled", r.aperture),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn fatou(cfg: &ExperimentConfig, scale: f64) -> Result<Outcome> {
    let g = cfg.build_group()?;
    let sp = SpectralParam::new(&g, cfg.spectral.beta)?;
    let mu = cfg.build_measure(&g)?;
    let vertex = cfg.vertex(&g);
    let fc = cfg.fatou_config(scale);
    let report = verify_fatou(&sp, cfg.spectral.c, &mu, &vertex, &fc)?;
    let mut checks = vec![
        Check::flag("verdict", report.verdict.passed(), "").note(format!(
            "{:?}; derivative {:?}; limits by aperture {}",
            report.verdict,
            report.derivative.value,
            describe_limits(&report.limits)
        )),
        Check::flag("apertures consistent", report.apertures_consistent, ""),
    ];
    let mut levels = level_rows("fatou", &report.limits);
    let reduction = if cfg.fatou.reduction {
        let r = reduction_check(&sp, &mu, &vertex, &fc)?;
        checks.push(Check::at_most("reduction steps gap", r.max_gap, r.budget));
        for s in &r.stages {
            levels.extend(level_rows(&format!("reduction-{}", s.name), &s.limits));
        }
        Some(r)
    } else {
        None
    };
    let plot = convergence_plot(format!("F along admissible regions, {}", report.measure), &report.limits, &report.derivative.value);
    Ok(Outcome {
        checks,
        constants: group_constants(&g, &sp),
        details: json!({ "fatou": report, "reduction": reduction }),
        levels,
        plot: Some(plot),
    })
}

fn baseline(cfg: &ExperimentConfig, scale: f64) -> Result<Outcome> {
    let b = cfg.baseline.as_ref().expect("validated");
    let model = match b.model {
        HalfSpaceKind::Euclidean => HalfSpaceModel::Euclidean(b.l),
        HalfSpaceKind::Hyperbolic => HalfSpaceModel::Hyperbolic(b.l),
    };
    let h = HalfSpace::new(model, b.beta)?;
    let mu = match &b.measure {
        HalfSpaceMeasureSpec::Constant { c } => HalfSpaceMeasure::Constant { c: *c },
        HalfSpaceMeasureSpec::Atoms { atoms } => {
            HalfSpaceMeasure::Atoms { atoms: atoms.iter().map(|a| (a.at.clone(), a.weight)).collect() }
        }
        HalfSpaceMeasureSpec::Gaussian { center, amplitude } => {
            HalfSpaceMeasure::Gaussian { center: center.clone(), amplitude: *amplitude }
        }
    };
    let mut checks = Vec::new();
    let mut masses = Vec::new();
    for y in [0.1, 1.0] {
        let k = h.kernel_mass(y, 1e-10);
        checks.push(
            Check::at_most(format!("kernel mass, y = {y}"), (k.value - 1.0).abs() + k.tail_bound, 1e-6 * scale)
                .note(format!("mass {:.12}, tail {:.1e}", k.value, k.tail_bound)),
        );
        masses.push(json!({ "y": y, "mass": k }));
    }
    let fc = cfg.fatou_config(scale);
    let report = h.verify(&mu, &b.vertex, &fc)?;
    checks.push(Check::flag("verdict", report.verdict.passed(), "").note(format!(
        "{:?}; derivative {:?}; limits by aperture {}",
        report.verdict,
        report.derivative.value,
        describe_limits(&report.limits)
    )));
    checks.push(Check::flag("apertures consistent", report.apertures_consistent, ""));
    let levels = level_rows("baseline", &report.limits);
    let plot = convergence_plot(format!("F along cones, {}", report.measure), &report.limits, &report.derivative.value);
    Ok(Outcome {
        checks,
        constants: json!({
            "model": model,
            "boundary_dim": h.boundary_dim(),
            "beta": b.beta,
            "rho": h.rho(),
            "normalizer": h.normalizer(),
        }),
        details: json!({ "masses": masses, "baseline": report }),
        levels,
        plot: Some(plot),
    })
}
