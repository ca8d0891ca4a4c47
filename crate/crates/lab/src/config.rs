//! Experiment configuration: the TOML schema, validation with field paths,
//! and construction of the core objects it describes.

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use fatou_core::density::{BallIndicator, CompactBump, GaussianBump, PowerWeight};
use fatou_core::fatou::{default_levels, FatouConfig};
use fatou_core::measure::default_radii;
use fatou_core::{Atom, BallSpec, BoundaryMeasure, HTypeGroup, Point};

use crate::registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Kernels,
    Operators,
    Lemmas,
    Fatou,
    Baseline,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Kernels => "kernels",
            Suite::Operators => "operators",
            Suite::Lemmas => "lemmas",
            Suite::Fatou => "fatou",
            Suite::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: Suite,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub group: GroupSpec,
    #[serde(default)]
    pub spectral: SpectralSpec,
    #[serde(default)]
    pub measure: Option<MeasureSpec>,
    #[serde(default)]
    pub tolerance: ToleranceSpec,
    #[serde(default)]
    pub fatou: FatouSpec,
    #[serde(default)]
    pub kernels: KernelsSpec,
    #[serde(default)]
    pub operators: OperatorsSpec,
    #[serde(default)]
    pub lemmas: LemmasSpec,
    #[serde(default)]
    pub baseline: Option<BaselineSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_seed() -> u64 {
    7
}

/// Either a registry name or an explicit J-map table.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub name: Option<String>,
    pub p: Option<usize>,
    pub k: Option<usize>,
    pub j_maps: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralSpec {
    pub beta: f64,
    /// Coefficient C of the a^{β+ρ} term in the fatou suite.
    pub c: f64,
}

impl Default for SpectralSpec {
    fn default() -> Self {
        Self { beta: 1.0, c: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeasureSpec {
    Lebesgue {
        c: f64,
    },
    Atoms {
        atoms: Vec<Atom>,
    },
    Density {
        name: String,
        center: Option<Point>,
        amplitude: Option<f64>,
        radius: Option<f64>,
        exponent: Option<f64>,
    },
    Mixture {
        parts: Vec<MeasureSpec>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSpec {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self { relative: 0.02, absolute: 1e-3 }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FatouSpec {
    pub vertex: Option<Point>,
    pub apertures: Option<Vec<f64>>,
    pub levels: Option<Vec<f64>>,
    pub per_level: Option<usize>,
    pub radii: Option<Vec<f64>>,
    /// Also run the translation and truncation reduction check.
    pub reduction: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelsSpec {
    pub a_values: Vec<f64>,
    pub rel_tol: f64,
}

impl Default for KernelsSpec {
    fn default() -> Self {
        Self { a_values: vec![0.1, 1.0, 10.0], rel_tol: 1e-5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatorsSpec {
    pub points: usize,
    /// Sample points have d(n) < radius and a log-uniform in [0.1, 10].
    pub radius: f64,
    pub h0: f64,
    /// Pole n₁ of the Poisson kernel under test; the identity if absent.
    pub pole: Option<Point>,
}

impl Default for OperatorsSpec {
    fn default() -> Self {
        Self { points: 200, radius: 2.0, h0: 2.5e-4, pole: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmasSpec {
    pub ratio_a_values: Vec<f64>,
    pub ratio_directions: usize,
    pub ratio_radii: usize,
    pub sandwich_probes: usize,
    pub sandwich_alpha: f64,
    pub uniform_probes: usize,
    pub uniform_radius: f64,
    pub uniform_a_values: Vec<f64>,
    pub uniform_min_reduction: f64,
    pub dilation_r_values: Vec<f64>,
    pub dilation_probes: usize,
}

impl Default for LemmasSpec {
    fn default() -> Self {
        Self {
            ratio_a_values: vec![0.1, 1.0, 10.0],
            ratio_directions: 100,
            ratio_radii: 100,
            sandwich_probes: 10,
            sandwich_alpha: 1.0,
            uniform_probes: 2000,
            uniform_radius: 6.0,
            uniform_a_values: vec![1.0, 1e-2],
            uniform_min_reduction: 10.0,
            dilation_r_values: vec![0.5, 2.0],
            dilation_probes: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HalfSpaceKind {
    Euclidean,
    Hyperbolic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSpec {
    pub model: HalfSpaceKind,
    pub l: usize,
    #[serde(default = "half")]
    pub beta: f64,
    pub vertex: Vec<f64>,
    pub measure: HalfSpaceMeasureSpec,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EuclideanAtom {
    pub at: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum HalfSpaceMeasureSpec {
    Constant { c: f64 },
    Atoms { atoms: Vec<EuclideanAtom> },
    Gaussian { center: Vec<f64>, amplitude: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// File stem of the JSON, CSV and SVG outputs.
    pub name: String,
    pub plots: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { name: "report".into(), plots: true }
    }
}

/// Parse errors from the toml crate already carry the line, column and key.
pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    parse(&text).with_context(|| format!("invalid config {}", path.display()))
}

pub fn parse(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| anyhow!("{e}"))?;
    cfg.validate()?;
    Ok(cfg)
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> anyhow::Error {
    anyhow!("field `{field}`: {msg}")
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field_err(field, format!("must be positive and finite, got {v}")))
    }
}

fn positive_list(field: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(field_err(field, "must not be empty"));
    }
    for (i, &v) in values.iter().enumerate() {
        positive(&format!("{field}[{i}]"), v)?;
    }
    Ok(())
}

fn nonzero(field: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(field_err(field, "must be at least 1"))
    } else {
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let g = self.build_group()?;
        positive("spectral.beta", self.spectral.beta)?;
        if !(self.spectral.c >= 0.0 && self.spectral.c.is_finite()) {
            return Err(field_err("spectral.c", format!("must be nonnegative, got {}", self.spectral.c)));
        }
        positive("tolerance.relative", self.tolerance.relative)?;
        positive("tolerance.absolute", self.tolerance.absolute)?;
        if let Some(m) = &self.measure {
            validate_measure("measure", m, &g)?;
        }
        let f = &self.fatou;
        if let Some(v) = &f.vertex {
            check_point("fatou.vertex", v, &g)?;
        }
        if let Some(a) = &f.apertures {
            positive_list("fatou.apertures", a)?;
        }
        if let Some(l) = &f.levels {
            positive_list("fatou.levels", l)?;
            if l.len() < 3 {
                return Err(field_err("fatou.levels", "needs at least 3 levels for the limit rule"));
            }
            if l.windows(2).any(|w| w[1] >= w[0]) {
                return Err(field_err("fatou.levels", "must be strictly decreasing"));
            }
        }
        if let Some(n) = f.per_level {
            nonzero("fatou.per_level", n)?;
        }
        if let Some(r) = &f.radii {
            positive_list("fatou.radii", r)?;
        }
        positive_list("kernels.a_values", &self.kernels.a_values)?;
        positive("kernels.rel_tol", self.kernels.rel_tol)?;
        let o = &self.operators;
        nonzero("operators.points", o.points)?;
        positive("operators.radius", o.radius)?;
        if !(1e-6..=1e-2).contains(&o.h0) {
            return Err(field_err("operators.h0", format!("must lie in [1e-6, 1e-2], got {}", o.h0)));
        }
        if let Some(p) = &o.pole {
            check_point("operators.pole", p, &g)?;
        }
        let l = &self.lemmas;
        positive_list("lemmas.ratio_a_values", &l.ratio_a_values)?;
        nonzero("lemmas.ratio_directions", l.ratio_directions)?;
        nonzero("lemmas.ratio_radii", l.ratio_radii)?;
        nonzero("lemmas.sandwich_probes", l.sandwich_probes)?;
        positive("lemmas.sandwich_alpha", l.sandwich_alpha)?;
        nonzero("lemmas.uniform_probes", l.uniform_probes)?;
        positive("lemmas.uniform_radius", l.uniform_radius)?;
        positive_list("lemmas.uniform_a_values", &l.uniform_a_values)?;
        positive("lemmas.uniform_min_reduction", l.uniform_min_reduction)?;
        positive_list("lemmas.dilation_r_values", &l.dilation_r_values)?;
        nonzero("lemmas.dilation_probes", l.dilation_probes)?;
        if let Some(b) = &self.baseline {
            validate_baseline(b)?;
        }
        if self.output.name.is_empty() || self.output.name.contains(['/', '\\']) {
            return Err(field_err("output.name", "must be a plain, nonempty file stem"));
        }
        match self.suite {
            Suite::Fatou | Suite::Lemmas if self.measure.is_none() => {
                Err(field_err("measure", format!("the {} suite needs a measure", self.suite.name())))
            }
            Suite::Baseline if self.baseline.is_none() => Err(field_err("baseline", "the baseline suite needs this section")),
            _ => Ok(()),
        }
    }

    pub fn build_group(&self) -> Result<HTypeGroup> {
        let s = &self.group;
        match (&s.name, &s.j_maps) {
            (Some(_), Some(_)) => Err(field_err("group", "give either `name` or `j_maps`, not both")),
            (Some(name), None) => registry::group(name).map_err(|e| field_err("group.name", e)),
            (None, None) => registry::group("heisenberg-1"),
            (None, Some(j)) => {
                let p = s.p.ok_or_else(|| field_err("group.p", "required with `j_maps`"))?;
                let k = s.k.ok_or_else(|| field_err("group.k", "required with `j_maps`"))?;
                HTypeGroup::new(format!("custom-p{p}-k{k}"), p, k, j).map_err(|e| field_err("group.j_maps", e))
            }
        }
    }

    pub fn build_measure(&self, g: &HTypeGroup) -> Result<BoundaryMeasure> {
        match &self.measure {
            Some(m) => build_measure(m, g),
            None => bail!("field `measure`: missing"),
        }
    }

    /// Core Fatou settings with the tolerance scale applied.
    pub fn fatou_config(&self, tolerance_scale: f64) -> FatouConfig {
        let f = &self.fatou;
        FatouConfig {
            apertures: f.apertures.clone().unwrap_or_else(|| vec![0.5, 1.0, 2.0]),
            levels: f.levels.clone().unwrap_or_else(default_levels),
            per_level: f.per_level.unwrap_or(16),
            seed: self.seed,
            tolerance: self.tolerance.relative * tolerance_scale,
            abs_tolerance: self.tolerance.absolute * tolerance_scale,
            radii: f.radii.clone().unwrap_or_else(default_radii),
            balls: None,
        }
    }

    pub fn vertex(&self, g: &HTypeGroup) -> Point {
        self.fatou.vertex.clone().unwrap_or_else(|| g.identity())
    }
}

fn check_point(field: &str, p: &Point, g: &HTypeGroup) -> Result<()> {
    g.check_point(p).map_err(|e| field_err(field, e))
}

fn validate_measure(field: &str, m: &MeasureSpec, g: &HTypeGroup) -> Result<()> {
    match m {
        MeasureSpec::Lebesgue { c } => positive(&format!("{field}.c"), *c),
        MeasureSpec::Atoms { atoms } => {
            if atoms.is_empty() {
                return Err(field_err(&format!("{field}.atoms"), "must not be empty"));
            }
            for (i, a) in atoms.iter().enumerate() {
                check_point(&format!("{field}.atoms[{i}].at"), &a.at, g)?;
                positive(&format!("{field}.atoms[{i}].weight"), a.weight)?;
            }
            Ok(())
        }
        MeasureSpec::Density { name, center, amplitude, radius, exponent } => {
            if !registry::has_density(name) {
                return Err(field_err(&format!("{field}.name"), format!("unknown density `{name}` (see `fatou-lab list`)")));
            }
            if let Some(c) = center {
                check_point(&format!("{field}.center"), c, g)?;
            }
            if let Some(a) = amplitude {
                positive(&format!("{field}.amplitude"), *a)?;
            }
            if let Some(r) = radius {
                positive(&format!("{field}.radius"), *r)?;
            }
            let uses = |key: &str| match name.as_str() {
                "gaussian-bump" => matches!(key, "center" | "amplitude"),
                "compact-bump" => matches!(key, "center" | "amplitude" | "radius"),
                "ball-indicator" => matches!(key, "center" | "radius"),
                "power-weight" => key == "exponent",
                _ => false,
            };
            for (key, present) in [
                ("center", center.is_some()),
                ("amplitude", amplitude.is_some()),
                ("radius", radius.is_some()),
                ("exponent", exponent.is_some()),
            ] {
                if present && !uses(key) {
                    return Err(field_err(&format!("{field}.{key}"), format!("not a parameter of `{name}`")));
                }
            }
            if name == "power-weight" {
                let e = exponent.ok_or_else(|| field_err(&format!("{field}.exponent"), "required by `power-weight`"))?;
                if !e.is_finite() {
                    return Err(field_err(&format!("{field}.exponent"), "must be finite"));
                }
            }
            Ok(())
        }
        MeasureSpec::Mixture { parts } => {
            if parts.is_empty() {
                return Err(field_err(&format!("{field}.parts"), "must not be empty"));
            }
            for (i, p) in parts.iter().enumerate() {
                validate_measure(&format!("{field}.parts[{i}]"), p, g)?;
            }
            Ok(())
        }
    }
}

fn build_measure(m: &MeasureSpec, g: &HTypeGroup) -> Result<BoundaryMeasure> {
    Ok(match m {
        MeasureSpec::Lebesgue { c } => BoundaryMeasure::lebesgue(g, *c)?,
        MeasureSpec::Atoms { atoms } => BoundaryMeasure::atomic(g, atoms.clone())?,
        MeasureSpec::Density { name, center, amplitude, radius, exponent } => {
            let center = center.clone().unwrap_or_else(|| g.identity());
            let amplitude = amplitude.unwrap_or(1.0);
            let radius = radius.unwrap_or(1.0);
            let f: fatou_core::density::DensityRef = match name.as_str() {
                "gaussian-bump" => Arc::new(GaussianBump { center, amplitude }),
                "compact-bump" => Arc::new(CompactBump { center, radius, amplitude }),
                "ball-indicator" => Arc::new(BallIndicator(BallSpec::new(center, radius)?)),
                "power-weight" => Arc::new(PowerWeight(exponent.unwrap_or(0.0))),
                other => bail!("unknown density `{other}`"),
            };
            BoundaryMeasure::density(g, f)
        }
        MeasureSpec::Mixture { parts } => {
            BoundaryMeasure::mixture(g, parts.iter().map(|p| build_measure(p, g)).collect::<Result<_>>()?)?
        }
    })
}

fn validate_baseline(b: &BaselineSpec) -> Result<()> {
    let dim = match b.model {
        HalfSpaceKind::Euclidean => b.l,
        HalfSpaceKind::Hyperbolic => b.l.saturating_sub(1),
    };
    if dim == 0 {
        return Err(field_err("baseline.l", format!("gives an empty boundary for the {:?} model", b.model)));
    }
    positive("baseline.beta", b.beta)?;
    if b.vertex.len() != dim {
        return Err(field_err("baseline.vertex", format!("needs {dim} coordinates, got {}", b.vertex.len())));
    }
    match &b.measure {
        HalfSpaceMeasureSpec::Constant { c } => positive("baseline.measure.c", *c),
        HalfSpaceMeasureSpec::Atoms { atoms } => {
            if atoms.is_empty() {
                return Err(field_err("baseline.measure.atoms", "must not be empty"));
            }
            for (i, a) in atoms.iter().enumerate() {
                if a.at.len() != dim {
                    return Err(field_err(
                        &format!("baseline.measure.atoms[{i}].at"),
                        format!("needs {dim} coordinates, got {}", a.at.len()),
                    ));
                }
                positive(&format!("baseline.measure.atoms[{i}].weight"), a.weight)?;
            }
            Ok(())
        }
        HalfSpaceMeasureSpec::Gaussian { center, amplitude } => {
            if center.len() != dim {
                return Err(field_err(
                    "baseline.measure.center",
                    format!("needs {dim} coordinates, got {}", center.len()),
                ));
            }
            positive("baseline.measure.amplitude", *amplitude)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FATOU: &str = r#"
suite = "fatou"

[measure]
kind = "lebesgue"
c = 2.0

[fatou]
apertures = [0.5, 1.0, 2.0]
"#;

    #[test]
    fn minimal_fatou_config_parses() {
        let cfg = parse(FATOU).unwrap();
        assert_eq!(cfg.suite, Suite::Fatou);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.build_group().unwrap().name(), "heisenberg-1");
        let fc = cfg.fatou_config(2.0);
        assert_eq!(fc.tolerance, 0.04);
        assert_eq!(fc.apertures, vec![0.5, 1.0, 2.0]);
    }

    #[test]
    fn errors_name_the_field() {
        let bad = FATOU.replace("[0.5, 1.0, 2.0]", "[0.5, -1.0]");
        let msg = format!("{:#}", parse(&bad).unwrap_err());
        assert!(msg.contains("fatou.apertures[1]"), "{msg}");

        let bad = FATOU.replace("[0.5, 1.0, 2.0]", "[0.5, \"wide\"]");
        let msg = format!("{:#}", parse(&bad).unwrap_err());
        assert!(msg.contains("line 9"), "{msg}");

        let bad = FATOU.replace("c = 2.0", "c = 2.0\nradius = 1.0");
        assert!(parse(&bad).is_err());

        let bad = FATOU.replace("kind = \"lebesgue\"\nc = 2.0", "kind = \"density\"\nname = \"nope\"");
        let msg = format!("{:#}", parse(&bad).unwrap_err());
        assert!(msg.contains("measure.name"), "{msg}");
    }

    #[test]
    fn atoms_and_points_check_dimensions() {
        let text = r#"
suite = "fatou"
[group]
name = "heisenberg-2"
[measure]
kind = "atoms"
atoms = [{ at = { x = [1.0, 0.0], z = [0.0] }, weight = 1.0 }]
"#;
        let msg = format!("{:#}", parse(text).unwrap_err());
        assert!(msg.contains("measure.atoms[0].at"), "{msg}");
    }

    #[test]
    fn explicit_j_maps_build_a_group() {
        // left multiplication by i, j, k on the quaternions
        let text = r#"
suite = "kernels"
[group]
p = 2
k = 3
j_maps = [
  [[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]],
  [[0, 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]],
  [[0, 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]],
]
"#;
        let g = parse(text).unwrap().build_group().unwrap();
        assert_eq!((g.p(), g.k()), (2, 3));
        let broken = text.replace("[[0, 0, 0, -1], [0, 0, -1, 0]", "[[0, 0, 0, 1], [0, 0, -1, 0]");
        assert!(parse(&broken).is_err());
    }

    #[test]
    fn suites_require_their_sections() {
        assert!(parse("suite = \"fatou\"").is_err());
        assert!(parse("suite = \"baseline\"").is_err());
        assert!(parse("suite = \"kernels\"").is_ok());
    }
}
