//! H-type groups N = 𝔳 ⊕ 𝔷 with the nonisotropic dilations, the canonical
//! homogeneous norm and the associated quasi-metric balls.

use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{domain, Error, Result};

/// Safety factor applied to the sampled quasi-triangle constant.
pub const TAU_MARGIN: f64 = 1.05;

/// Sample count used for the cached τ estimate.
pub const TAU_SAMPLES: usize = 20_000;

const TAU_SEED: u64 = 0x7a75_5f64;

pub type VecX = SmallVec<[f64; 4]>;
pub type VecZ = SmallVec<[f64; 2]>;

/// An element n = (X, Z) of N.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: VecX,
    pub z: VecZ,
}

impl Point {
    pub fn new(x: &[f64], z: &[f64]) -> Self {
        Self {
            x: SmallVec::from_slice(x),
            z: SmallVec::from_slice(z),
        }
    }

    pub fn zeros(dim_x: usize, dim_z: usize) -> Self {
        Self {
            x: SmallVec::from_elem(0.0, dim_x),
            z: SmallVec::from_elem(0.0, dim_z),
        }
    }

    pub fn norm_x_sq(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum()
    }

    pub fn norm_z_sq(&self) -> f64 {
        self.z.iter().map(|v| v * v).sum()
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(self.z.iter()).all(|&v| v == 0.0)
    }

    /// Coordinates flattened as (X, Z).
    pub fn coords(&self) -> Vec<f64> {
        self.x.iter().chain(self.z.iter()).copied().collect()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(", ");
        write!(f, "(({}), ({}))", join(&self.x), join(&self.z))
    }
}

/// A quasi-metric ball B(center, radius) = {n : d(center⁻¹ n) < radius}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Point,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(domain(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }
}

struct Inner {
    name: String,
    p: usize,
    k: usize,
    // k matrices of size 2p × 2p, row-major
    j: Vec<f64>,
    unit_ball_volume: OnceLock<f64>,
    tau: OnceLock<f64>,
    poisson_normalizer: OnceLock<f64>,
}

/// An H-type group given by its J-maps J_1, …, J_k on 𝔳 = ℝ^{2p}.
///
/// The bracket is [X, Y]_r = ⟨J_r X, Y⟩, so that ⟨J_Z X, Y⟩ = ⟨[X, Y], Z⟩
/// with J_Z = Σ Z_r J_r. Cloning is cheap; derived constants are computed
/// on first use and shared between clones.
#[derive(Clone)]
pub struct HTypeGroup {
    inner: Arc<Inner>,
}

impl fmt::Debug for HTypeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HTypeGroup")
            .field("name", &self.inner.name)
            .field("p", &self.inner.p)
            .field("k", &self.inner.k)
            .finish()
    }
}

impl PartialEq for HTypeGroup {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.p == other.inner.p && self.inner.k == other.inner.k && self.inner.j == other.inner.j)
    }
}

impl HTypeGroup {
    /// Build a group from explicit J-maps (`j_maps[r][row][col]`), validating
    /// J_r antisymmetric and J_r J_s + J_s J_r = −2δ_{rs} Id, which is
    /// equivalent to J_Z² = −‖Z‖² Id for all Z.
    pub fn new(name: impl Into<String>, p: usize, k: usize, j_maps: &[Vec<Vec<f64>>]) -> Result<Self> {
        if p == 0 || k == 0 {
            return Err(Error::Structure(format!("p and k must be positive, got p = {p}, k = {k}")));
        }
        if j_maps.len() != k {
            return Err(Error::Dimension { what: "J-map count", expected: k, got: j_maps.len() });
        }
        let m = 2 * p;
        let mut j = Vec::with_capacity(k * m * m);
        for jr in j_maps {
            if jr.len() != m {
                return Err(Error::Dimension { what: "J-map rows", expected: m, got: jr.len() });
            }
            for row in jr {
                if row.len() != m {
                    return Err(Error::Dimension { what: "J-map columns", expected: m, got: row.len() });
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Structure("J-map entries must be finite".into()));
                }
                j.extend_from_slice(row);
            }
        }
        let g = Self::from_parts(name.into(), p, k, j);
        g.validate_structure()?;
        Ok(g)
    }

    fn from_parts(name: String, p: usize, k: usize, j: Vec<f64>) -> Self {
        Self {
            inner: Arc::new(Inner {
                name,
                p,
                k,
                j,
                unit_ball_volume: OnceLock::new(),
                tau: OnceLock::new(),
                poisson_normalizer: OnceLock::new(),
            }),
        }
    }

    /// The Heisenberg group H^l: 𝔳 = ℝ^{2l}, 𝔷 = ℝ, J_s(x, y) = (−sy, sx).
    pub fn heisenberg(l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::Structure("Heisenberg group needs l >= 1".into()));
        }
        let m = 2 * l;
        let mut j = vec![0.0; m * m];
        for i in 0..l {
            // (J X)_i = -y_i, (J X)_{l+i} = x_i
            j[i * m + (l + i)] = -1.0;
            j[(l + i) * m + i] = 1.0;
        }
        Ok(Self::from_parts(format!("heisenberg-{l}"), l, 1, j))
    }

    fn validate_structure(&self) -> Result<()> {
        let m = self.dim_x();
        let k = self.k();
        let tol = 1e-12;
        for r in 0..k {
            let jr = self.j_matrix(r);
            for a in 0..m {
                for b in 0..m {
                    if (jr[a * m + b] + jr[b * m + a]).abs() > tol {
                        return Err(Error::Structure(format!("J_{} is not antisymmetric at ({a}, {b})", r + 1)));
                    }
                }
            }
            for s in r..k {
                let js = self.j_matrix(s);
                for a in 0..m {
                    for b in 0..m {
                        let mut acc = 0.0;
                        for c in 0..m {
                            acc += jr[a * m + c] * js[c * m + b] + js[a * m + c] * jr[c * m + b];
                        }
                        let want = if r == s && a == b { -2.0 } else { 0.0 };
                        if (acc - want).abs() > tol {
                            return Err(Error::Structure(format!(
                                "J_{}J_{} + J_{}J_{} differs from -2δ Id at ({a}, {b})",
                                r + 1,
                                s + 1,
                                s + 1,
                                r + 1
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.inner.name
    }
    pub fn p(&self) -> usize {
        self.inner.p
    }
    pub fn k(&self) -> usize {
        self.inner.k
    }
    pub fn dim_x(&self) -> usize {
        2 * self.inner.p
    }
    /// Topological dimension 2p + k.
    pub fn dim(&self) -> usize {
        2 * self.inner.p + self.inner.k
    }
    /// Homogeneous dimension Q = p + k.
    pub fn q(&self) -> usize {
        self.inner.p + self.inner.k
    }
    pub fn rho(&self) -> f64 {
        self.q() as f64 / 2.0
    }

    fn j_matrix(&self, r: usize) -> &[f64] {
        let m = self.dim_x();
        &self.inner.j[r * m * m..(r + 1) * m * m]
    }

    /// J_r X.
    pub fn j_apply(&self, r: usize, x: &[f64]) -> VecX {
        let m = self.dim_x();
        let jr = self.j_matrix(r);
        (0..m).map(|a| (0..m).map(|b| jr[a * m + b] * x[b]).sum()).collect()
    }

    /// J_Z X = Σ Z_r J_r X.
    pub fn j_z_apply(&self, z: &[f64], x: &[f64]) -> VecX {
        let m = self.dim_x();
        let mut out: VecX = SmallVec::from_elem(0.0, m);
        for (r, &zr) in z.iter().enumerate() {
            if zr == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.j_apply(r, x)) {
                *o += zr * v;
            }
        }
        out
    }

    /// The bracket [X, Y] ∈ 𝔷.
    pub fn bracket(&self, x: &[f64], y: &[f64]) -> VecZ {
        let m = self.dim_x();
        (0..self.k())
            .map(|r| {
                let jr = self.j_matrix(r);
                let mut acc = 0.0;
                for a in 0..m {
                    let ya = y[a];
                    if ya == 0.0 {
                        continue;
                    }
                    for b in 0..m {
                        acc += jr[a * m + b] * x[b] * ya;
                    }
                }
                acc
            })
            .collect()
    }

    /// Largest entry of |J_Z² X + ‖Z‖² X| over `samples` random unit and
    /// non-unit Z and random X.
    pub fn j_identity_defect(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for i in 0..samples {
            let mut z: VecZ = (0..self.k()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let zn: f64 = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = if i % 2 == 0 { 1.0 / zn } else { rng.gen_range(0.1..5.0) };
            z.iter_mut().for_each(|v| *v *= scale);
            let x: VecX = (0..self.dim_x()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let jjx = self.j_z_apply(&z, &self.j_z_apply(&z, &x));
            let z2: f64 = z.iter().map(|v| v * v).sum();
            for (a, b) in jjx.iter().zip(&x) {
                worst = worst.max((a + z2 * b).abs());
            }
        }
        worst
    }

    pub fn identity(&self) -> Point {
        Point::zeros(self.dim_x(), self.k())
    }

    pub fn check_point(&self, n: &Point) -> Result<()> {
        if n.x.len() != self.dim_x() {
            return Err(Error::Dimension { what: "point X", expected: self.dim_x(), got: n.x.len() });
        }
        if n.z.len() != self.k() {
            return Err(Error::Dimension { what: "point Z", expected: self.k(), got: n.z.len() });
        }
        Ok(())
    }

    pub fn point(&self, x: &[f64], z: &[f64]) -> Result<Point> {
        let n = Point::new(x, z);
        self.check_point(&n)?;
        Ok(n)
    }

    /// (X, Z)(X', Z') = (X + X', Z + Z' + ½[X, X']).
    pub fn multiply(&self, n1: &Point, n2: &Point) -> Result<Point> {
        self.check_point(n1)?;
        self.check_point(n2)?;
        Ok(self.mul(n1, n2))
    }

    /// Unchecked product for hot loops; dimensions must already match.
    pub fn mul(&self, n1: &Point, n2: &Point) -> Point {
        let br = self.bracket(&n1.x, &n2.x);
        Point {
            x: n1.x.iter().zip(&n2.x).map(|(a, b)| a + b).collect(),
            z: n1.z.iter().zip(&n2.z).zip(&br).map(|((a, b), c)| a + b + 0.5 * c).collect(),
        }
    }

    pub fn inverse(&self, n: &Point) -> Point {
        Point {
            x: n.x.iter().map(|v| -v).collect(),
            z: n.z.iter().map(|v| -v).collect(),
        }
    }

    /// n1⁻¹ n2.
    pub fn left_divide(&self, n1: &Point, n2: &Point) -> Point {
        self.mul(&self.inverse(n1), n2)
    }

    /// δ_a(X, Z) = (√a X, a Z).
    pub fn dilate(&self, a: f64, n: &Point) -> Result<Point> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(domain(format!("dilation parameter must be positive, got {a}")));
        }
        Ok(dilate_unchecked(a, n))
    }

    /// d(X, Z) = (‖X‖⁴ + 16‖Z‖²)^{1/2}.
    pub fn norm_d(&self, n: &Point) -> f64 {
        norm_d(n)
    }

    /// 𝐝(n1, n2) = d(n1⁻¹ n2).
    pub fn quasi_distance(&self, n1: &Point, n2: &Point) -> f64 {
        norm_d(&self.left_divide(n1, n2))
    }

    pub fn in_ball(&self, ball: &BallSpec, n: &Point) -> bool {
        self.quasi_distance(&ball.center, n) < ball.radius
    }

    /// Empirical sup of d(n n1) / (d(n) + d(n1)) over a deterministic sample
    /// set, times [`TAU_MARGIN`]. Always at least 1.
    pub fn estimate_tau(&self, samples: usize) -> f64 {
        estimate_tau_raw(self, samples.max(1), TAU_SEED) * TAU_MARGIN
    }

    /// Cached τ estimate with [`TAU_SAMPLES`] samples.
    pub fn tau(&self) -> f64 {
        *self.inner.tau.get_or_init(|| self.estimate_tau(TAU_SAMPLES))
    }

    /// v₁ = m(B(0̲, 1)), cached.
    pub fn unit_ball_volume(&self) -> f64 {
        *self.inner.unit_ball_volume.get_or_init(|| crate::haar::unit_ball_volume(self))
    }

    /// m(B(n, r)) = v₁ r^Q.
    pub fn ball_volume(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(domain(format!("ball radius must be positive, got {r}")));
        }
        Ok(self.unit_ball_volume() * r.powi(self.q() as i32))
    }

    /// n = δ_r(ω) with r = d(n), d(ω) = 1.
    pub fn polar_decompose(&self, n: &Point) -> Result<(f64, Point)> {
        let r = norm_d(n);
        if r == 0.0 {
            return Err(domain("the identity has no polar decomposition"));
        }
        Ok((r, dilate_unchecked(1.0 / r, n)))
    }

    /// Normalizer c_{p,k} with ‖P‖₁ = 1, cached.
    pub fn poisson_normalizer(&self) -> f64 {
        *self.inner.poisson_normalizer.get_or_init(|| crate::kernel::compute_poisson_normalizer(self))
    }

    /// Uniform random point with d(n) < radius (rejection from a bounding box).
    pub fn random_in_ball<R: Rng>(&self, rng: &mut R, radius: f64) -> Point {
        let sx = radius.sqrt();
        let sz = radius / 4.0;
        loop {
            let x: VecX = (0..self.dim_x()).map(|_| rng.gen_range(-sx..sx)).collect();
            let z: VecZ = (0..self.k()).map(|_| rng.gen_range(-sz..sz)).collect();
            let n = Point { x, z };
            if norm_d(&n) < radius {
                return n;
            }
        }
    }

    /// Random point on the unit sphere {d = 1} (not uniformly distributed).
    pub fn random_unit<R: Rng>(&self, rng: &mut R) -> Point {
        loop {
            let x: VecX = (0..self.dim_x()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let z: VecZ = (0..self.k()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = Point { x, z };
            let d = norm_d(&n);
            if d > 1e-3 {
                return dilate_unchecked(1.0 / d, &n);
            }
        }
    }
}

pub fn norm_d(n: &Point) -> f64 {
    let x2 = n.norm_x_sq();
    (x2 * x2 + 16.0 * n.norm_z_sq()).sqrt()
}

pub(crate) fn dilate_unchecked(a: f64, n: &Point) -> Point {
    let s = a.sqrt();
    Point {
        x: n.x.iter().map(|v| s * v).collect(),
        z: n.z.iter().map(|v| a * v).collect(),
    }
}

fn estimate_tau_raw(g: &HTypeGroup, samples: usize, seed: u64) -> f64 {
    let ratio = |n: &Point, n1: &Point| {
        let den = norm_d(n) + norm_d(n1);
        if den == 0.0 {
            1.0
        } else {
            norm_d(&g.mul(n, n1)) / den
        }
    };
    let mut e1 = g.identity();
    e1.x[0] = 1.0;
    // n1 = 0̲ pins the ratio at 1; equal horizontal points realise 2
    let mut best = ratio(&e1, &g.identity()).max(ratio(&e1, &e1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..samples {
        let n = g.random_unit(&mut rng);
        let t = 10f64.powf(rng.gen_range(-2.0..2.0));
        let n1 = if i % 4 == 0 {
            // a pure Z perturbation of a horizontal direction probes the bracket term
            let mut m = dilate_unchecked(t, &n);
            m.z.iter_mut().for_each(|v| *v = -*v);
            m
        } else {
            dilate_unchecked(t, &g.random_unit(&mut rng))
        };
        best = best.max(ratio(&n, &n1));
    }
    best.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h1() -> HTypeGroup {
        HTypeGroup::heisenberg(1).unwrap()
    }

    #[test]
    fn heisenberg_product_example() {
        let g = h1();
        let a = g.point(&[1.0, 0.0], &[0.0]).unwrap();
        let b = g.point(&[0.0, 1.0], &[0.0]).unwrap();
        assert_eq!(g.multiply(&a, &b).unwrap(), Point::new(&[1.0, 1.0], &[0.5]));
        let n = Point::new(&[0.3, -2.0], &[1.25]);
        assert_eq!(g.mul(&g.identity(), &n), n);
        assert!(g.mul(&n, &g.inverse(&n)).is_identity());
    }

    #[test]
    fn dimension_mismatch_is_structural() {
        let g = h1();
        let bad = Point::new(&[1.0], &[0.0]);
        assert!(matches!(g.multiply(&bad, &g.identity()), Err(Error::Dimension { .. })));
    }

    #[test]
    fn dilation_and_norm_examples() {
        let g = h1();
        let n = Point::new(&[1.0, 0.0], &[1.0]);
        assert_eq!(g.dilate(4.0, &n).unwrap(), Point::new(&[2.0, 0.0], &[4.0]));
        assert_eq!(g.dilate(1.0, &n).unwrap(), n);
        assert!(g.dilate(0.0, &n).is_err());
        assert_eq!(g.norm_d(&g.identity()), 0.0);
        assert_eq!(g.norm_d(&Point::new(&[3.0, 4.0], &[0.0])), 25.0);
        assert_eq!(g.norm_d(&Point::new(&[0.0, 0.0], &[-2.0])), 8.0);
    }

    #[test]
    fn polar_example() {
        let g = h1();
        let (r, w) = g.polar_decompose(&Point::new(&[2.0, 0.0], &[0.0])).unwrap();
        assert_eq!(r, 4.0);
        assert_eq!(w, Point::new(&[1.0, 0.0], &[0.0]));
        assert!(g.polar_decompose(&g.identity()).is_err());
    }

    #[test]
    fn invalid_j_maps_rejected() {
        let not_complex = vec![vec![vec![0.0, -2.0], vec![2.0, 0.0]]];
        assert!(matches!(HTypeGroup::new("bad", 1, 1, &not_complex), Err(Error::Structure(_))));
        let ok = vec![vec![vec![0.0, -1.0], vec![1.0, 0.0]]];
        let g = HTypeGroup::new("custom", 1, 1, &ok).unwrap();
        assert_eq!(g, h1());
    }

    #[test]
    fn quaternionic_j_maps_validate() {
        // ℝ^4 with three anticommuting complex structures (k = 3)
        let i = vec![
            vec![0.0, -1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, -1.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ];
        let j = vec![
            vec![0.0, 0.0, -1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0, 0.0],
        ];
        let k = vec![
            vec![0.0, 0.0, 0.0, -1.0],
            vec![0.0, 0.0, -1.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
        ];
        let g = HTypeGroup::new("quaternionic", 2, 3, &[i, j, k]).unwrap();
        assert_eq!(g.q(), 5);
        assert!(g.j_identity_defect(100, 3) < 1e-12);
    }

    #[test]
    fn tau_lower_bounds() {
        let g = h1();
        let t = g.estimate_tau(500);
        assert!(t >= 2.0, "{t}");
        let t2 = g.estimate_tau(1000);
        assert!((t2 / t - 1.0).abs() < 0.05);
    }
}
