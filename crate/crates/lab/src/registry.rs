//! Built-in groups, densities and suites, in the order `list` prints them.

use anyhow::{bail, Result};
use fatou_core::HTypeGroup;

pub const GROUPS: &[(&str, &str)] = &[
    ("heisenberg-1", "H^1: X in R^2, Z in R"),
    ("heisenberg-2", "H^2: X in R^4, Z in R"),
    ("heisenberg-3", "H^3: X in R^6, Z in R"),
];

pub const DENSITIES: &[(&str, &str)] = &[
    ("ball-indicator", "indicator of B(center, radius)"),
    ("compact-bump", "amplitude * (1 - d(center^-1 n)^2 / radius^2)^3 on B(center, radius)"),
    ("gaussian-bump", "amplitude * exp(-|X|^2 - |Z|^2) at center^-1 n"),
    ("power-weight", "(1 + d(n))^exponent"),
];

pub const SUITES: &[(&str, &str)] = &[
    ("kernels", "c-function anchor and integral identity, Poisson and q-kernel masses"),
    ("operators", "eigen-equation residuals and the L-beta correspondence by finite differences"),
    ("lemmas", "ratio bound, maximal sandwich, uniform convergence, dilation commutation"),
    ("fatou", "strong derivative against admissible limits, optional reduction steps"),
    ("baseline", "the same comparison on Euclidean and real hyperbolic half-spaces"),
];

pub fn group(name: &str) -> Result<HTypeGroup> {
    let Some(l) = name.strip_prefix("heisenberg-").and_then(|s| s.parse::<usize>().ok()) else {
        bail!("unknown group `{name}` (see `fatou-lab list`)");
    };
    if !GROUPS.iter().any(|(g, _)| *g == name) {
        bail!("unknown group `{name}` (see `fatou-lab list`)");
    }
    Ok(HTypeGroup::heisenberg(l)?)
}

pub fn has_density(name: &str) -> bool {
    DENSITIES.iter().any(|(d, _)| *d == name)
}

pub fn listing() -> String {
    let mut out = String::new();
    for (title, rows) in [("groups", GROUPS), ("densities", DENSITIES), ("suites", SUITES)] {
        out.push_str(title);
        out.push_str(":\n");
        for (name, what) in rows {
            out.push_str(&format!("  {name:<16} {what}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_resolve() {
        for (name, _) in GROUPS {
            assert_eq!(group(name).unwrap().name(), *name);
        }
        assert!(group("heisenberg-9").is_err());
        assert!(group("nilpotent").is_err());
    }

    #[test]
    fn sections_are_sorted_within_kind() {
        let sorted = |rows: &[(&str, &str)]| rows.windows(2).all(|w| w[0].0 < w[1].0);
        assert!(sorted(GROUPS));
        assert!(sorted(DENSITIES));
    }
}
