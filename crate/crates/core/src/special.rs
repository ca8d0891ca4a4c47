//! Geometric constants built on the Gamma function.

use std::f64::consts::PI;

pub use statrs::function::gamma::{gamma, ln_gamma};

/// Surface area of the unit sphere S^{m-1} in R^m. For m = 1 this is 2 (the two points ±1).
pub fn sphere_area(m: usize) -> f64 {
    let h = m as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Volume of the Euclidean unit ball in R^m.
pub fn euclidean_ball_volume(m: usize) -> f64 {
    sphere_area(m) / m as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((euclidean_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-13);
    }
}
