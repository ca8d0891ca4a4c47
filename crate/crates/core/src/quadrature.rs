//! Adaptive quadrature: a global Gauss–Kronrod (7/15) integrator in one
//! dimension and the Genz–Malik degree-7/5 cubature rule on hyper-rectangles.
//!
//! Both integrators subdivide the region with the largest error estimate until
//! the summed error falls below `max(abs_tol, rel_tol * |I|)` or the evaluation
//! budget is spent. The budget case is not an error here; callers decide via
//! [`Estimate::require`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerances and evaluation budget for a single integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: usize,
    /// Number of equal parts each axis is cut into before adaptation starts.
    pub initial_divisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 0.0,
            max_evals: 2_000_000,
            initial_divisions: 1,
        }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    pub fn with_abs(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_max_evals(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }

    pub fn with_initial_divisions(mut self, k: usize) -> Self {
        self.initial_divisions = k.max(1);
        self
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
    /// The tolerance the estimate was asked to meet.
    pub requested: f64,
}

impl Estimate {
    /// Turn a non-converged estimate into a [`Error::Quadrature`].
    pub fn require(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::Quadrature {
                achieved: self.error,
                requested: self.requested,
                evals: self.evals,
            })
        }
    }

    pub fn add(self, other: Estimate) -> Estimate {
        Estimate {
            value: self.value + other.value,
            error: self.error + other.error,
            evals: self.evals + other.evals,
            converged: self.converged && other.converged,
            requested: self.requested + other.requested,
        }
    }

    pub fn scale(self, s: f64) -> Estimate {
        Estimate {
            value: self.value * s,
            error: self.error * s.abs(),
            requested: self.requested * s.abs(),
            ..self
        }
    }

    pub fn exact(value: f64) -> Estimate {
        Estimate {
            value,
            error: 0.0,
            evals: 0,
            converged: true,
            requested: 0.0,
        }
    }
}

struct Region<T> {
    error: f64,
    value: f64,
    data: T,
}

impl<T> PartialEq for Region<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Region<T> {}
impl<T> PartialOrd for Region<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Region<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

// ---------------------------------------------------------------------------
// 1-D Gauss–Kronrod

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639,
    0.949_107_912_342_758_525,
    0.864_864_423_359_769_073,
    0.741_531_185_599_394_440,
    0.586_087_235_467_691_130,
    0.405_845_151_377_397_167,
    0.207_784_955_007_898_468,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_553,
    0.104_790_010_322_250_184,
    0.140_653_259_715_525_919,
    0.169_004_726_639_267_903,
    0.190_350_578_064_785_410,
    0.204_432_940_075_298_892,
    0.209_482_141_084_727_828,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693,
    0.279_705_391_489_276_668,
    0.381_830_050_505_118_945,
    0.417_959_183_673_469_388,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * h;
    let err = ((kronrod - gauss) * h).abs();
    (value, err)
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate_1d<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Estimate {
    if a == b {
        return Estimate::exact(0.0);
    }
    let parts = opts.initial_divisions.max(1);
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evals = 0usize;
    let w = (b - a) / parts as f64;
    for i in 0..parts {
        let lo = a + w * i as f64;
        let hi = if i + 1 == parts { b } else { lo + w };
        let (v, e) = gk15(&mut f, lo, hi);
        evals += 15;
        total += v;
        total_err += e;
        heap.push(Region {
            error: e,
            value: v,
            data: (lo, hi),
        });
    }
    while total_err > opts.target(total) && evals + 30 <= opts.max_evals {
        let Some(worst) = heap.pop() else { break };
        let (lo, hi) = worst.data;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval exhausted at machine precision
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        evals += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Region { error: e1, value: v1, data: (lo, mid) });
        heap.push(Region { error: e2, value: v2, data: (mid, hi) });
    }
    // resum to shed accumulated cancellation
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), r| (v + r.value, e + r.error));
    let requested = opts.target(value);
    Estimate {
        value,
        error,
        evals,
        converged: error <= requested,
        requested,
    }
}

// ---------------------------------------------------------------------------
// Genz–Malik cubature

struct GenzMalik {
    dim: usize,
    l2: f64,
    l3: f64,
    l4: f64,
    l5: f64,
    w: [f64; 5],
    wp: [f64; 4],
}

impl GenzMalik {
    fn new(dim: usize) -> Self {
        let n = dim as f64;
        Self {
            dim,
            l2: (9.0f64 / 70.0).sqrt(),
            l3: (9.0f64 / 10.0).sqrt(),
            l4: (9.0f64 / 10.0).sqrt(),
            l5: (9.0f64 / 19.0).sqrt(),
            w: [
                (12824.0 - 9120.0 * n + 400.0 * n * n) / 19683.0,
                980.0 / 6561.0,
                (1820.0 - 400.0 * n) / 19683.0,
                200.0 / 19683.0,
                6859.0 / 19683.0 / 2f64.powi(dim as i32),
            ],
            wp: [
                (729.0 - 950.0 * n + 50.0 * n * n) / 729.0,
                245.0 / 486.0,
                (265.0 - 100.0 * n) / 1458.0,
                25.0 / 729.0,
            ],
        }
    }

    fn evals_per_box(&self) -> usize {
        let n = self.dim;
        1 + 4 * n + 2 * n * (n - 1) + (1 << n)
    }

    /// Returns (value, error, split axis).
    fn apply<F: FnMut(&[f64]) -> f64>(
        &self,
        f: &mut F,
        center: &[f64],
        half: &[f64],
        buf: &mut Vec<f64>,
    ) -> (f64, f64, usize) {
        let n = self.dim;
        buf.clear();
        buf.extend_from_slice(center);
        let f0 = f(buf);
        let mut sum2 = 0.0;
        let mut sum3 = 0.0;
        let mut best_axis = 0;
        let mut best_diff = -1.0;
        for i in 0..n {
            let c = center[i];
            buf[i] = c + self.l2 * half[i];
            let a2 = f(buf);
            buf[i] = c - self.l2 * half[i];
            let b2 = f(buf);
            buf[i] = c + self.l3 * half[i];
            let a3 = f(buf);
            buf[i] = c - self.l3 * half[i];
            let b3 = f(buf);
            buf[i] = c;
            sum2 += a2 + b2;
            sum3 += a3 + b3;
            let diff = (a2 + b2 - 2.0 * f0 - (self.l2 * self.l2 / (self.l3 * self.l3)) * (a3 + b3 - 2.0 * f0)).abs();
            // ties go to the wider axis
            if diff > best_diff * (1.0 + 1e-12) || (diff >= best_diff * (1.0 - 1e-12) && half[i] > half[best_axis]) {
                best_diff = diff;
                best_axis = i;
            }
        }
        let mut sum4 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    buf[i] = center[i] + si * self.l4 * half[i];
                    buf[j] = center[j] + sj * self.l4 * half[j];
                    sum4 += f(buf);
                }
                buf[i] = center[i];
                buf[j] = center[j];
            }
        }
        let mut sum5 = 0.0;
        for mask in 0..(1usize << n) {
            for i in 0..n {
                let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                buf[i] = center[i] + s * self.l5 * half[i];
            }
            sum5 += f(buf);
        }
        let vol: f64 = half.iter().map(|h| 2.0 * h).product();
        let i7 = vol * (self.w[0] * f0 + self.w[1] * sum2 + self.w[2] * sum3 + self.w[3] * sum4 + self.w[4] * sum5);
        let i5 = vol * (self.wp[0] * f0 + self.wp[1] * sum2 + self.wp[2] * sum3 + self.wp[3] * sum4);
        (i7, (i7 - i5).abs(), best_axis)
    }
}

struct BoxData {
    center: Vec<f64>,
    half: Vec<f64>,
    axis: usize,
}

/// Adaptive cubature of `f` over the box `[lower, upper]`.
///
/// One-dimensional boxes are delegated to [`integrate_1d`].
pub fn integrate<F: FnMut(&[f64]) -> f64>(mut f: F, lower: &[f64], upper: &[f64], opts: &QuadOptions) -> Estimate {
    assert_eq!(lower.len(), upper.len(), "box bounds must have equal length");
    let dim = lower.len();
    if dim == 0 {
        return Estimate { value: f(&[]), error: 0.0, evals: 1, converged: true, requested: 0.0 };
    }
    if dim == 1 {
        let mut x = [0.0];
        return integrate_1d(
            |t| {
                x[0] = t;
                f(&x)
            },
            lower[0],
            upper[0],
            opts,
        );
    }
    let rule = GenzMalik::new(dim);
    let per_box = rule.evals_per_box();
    let mut buf = Vec::with_capacity(dim);
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evals = 0usize;

    let k = opts.initial_divisions.max(1);
    let cells = k.pow(dim as u32);
    let mut idx = vec![0usize; dim];
    for _ in 0..cells {
        let mut center = vec![0.0; dim];
        let mut half = vec![0.0; dim];
        for d in 0..dim {
            let w = (upper[d] - lower[d]) / k as f64;
            half[d] = 0.5 * w;
            center[d] = lower[d] + w * (idx[d] as f64 + 0.5);
        }
        let (v, e, axis) = rule.apply(&mut f, &center, &half, &mut buf);
        evals += per_box;
        total += v;
        total_err += e;
        heap.push(Region { error: e, value: v, data: BoxData { center, half, axis } });
        for d in 0..dim {
            idx[d] += 1;
            if idx[d] < k {
                break;
            }
            idx[d] = 0;
        }
    }

    while total_err > opts.target(total) && evals + 2 * per_box <= opts.max_evals {
        let Some(worst) = heap.pop() else { break };
        let BoxData { center, half, axis } = worst.data;
        let mut h = half.clone();
        h[axis] *= 0.5;
        let mut c1 = center.clone();
        c1[axis] -= h[axis];
        let mut c2 = center;
        c2[axis] += h[axis];
        let (v1, e1, a1) = rule.apply(&mut f, &c1, &h, &mut buf);
        let (v2, e2, a2) = rule.apply(&mut f, &c2, &h, &mut buf);
        evals += 2 * per_box;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Region { error: e1, value: v1, data: BoxData { center: c1, half: h.clone(), axis: a1 } });
        heap.push(Region { error: e2, value: v2, data: BoxData { center: c2, half: h, axis: a2 } });
    }
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), r| (v + r.value, e + r.error));
    let requested = opts.target(value);
    Estimate {
        value,
        error,
        evals,
        converged: error <= requested,
        requested,
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Fixed tensor-product Gauss–Legendre rule with `n` nodes per axis.
pub fn integrate_tensor<F: FnMut(&[f64]) -> f64>(mut f: F, lower: &[f64], upper: &[f64], n: usize) -> f64 {
    let dim = lower.len();
    let (x, w) = gauss_legendre(n);
    let mut idx = vec![0usize; dim];
    let mut pt = vec![0.0; dim];
    let total = n.pow(dim as u32);
    let mut acc = 0.0;
    for _ in 0..total {
        let mut weight = 1.0;
        for d in 0..dim {
            let h = 0.5 * (upper[d] - lower[d]);
            pt[d] = lower[d] + h * (x[idx[d]] + 1.0);
            weight *= h * w[idx[d]];
        }
        acc += weight * f(&pt);
        for d in 0..dim {
            idx[d] += 1;
            if idx[d] < n {
                break;
            }
            idx[d] = 0;
        }
    }
    acc
}
