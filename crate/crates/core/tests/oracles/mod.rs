//! Independent reference computations used by the test suites.
//!
//! Nothing here calls into the crate's geometry or dynamics code; every value
//! is recomputed from first principles (RK4 integration, golden-section
//! search, bisection).

#![allow(dead_code)]

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P {
    pub x: f64,
    pub y: f64,
}

pub fn p(x: f64, y: f64) -> P {
    P { x, y }
}

impl P {
    pub fn add(self, o: P) -> P {
        p(self.x + o.x, self.y + o.y)
    }
    pub fn sub(self, o: P) -> P {
        p(self.x - o.x, self.y - o.y)
    }
    pub fn scale(self, k: f64) -> P {
        p(self.x * k, self.y * k)
    }
    pub fn dist(self, o: P) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
    pub fn lerp(self, o: P, t: f64) -> P {
        self.add(o.sub(self).scale(t))
    }
}

/// Golden-section minimum of a unimodal function on `[lo, hi]`.
pub fn golden_min(mut lo: f64, mut hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iters {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    let x = 0.5 * (lo + hi);
    let candidates = [(lo, f(lo)), (x, f(x)), (hi, f(hi))];
    candidates.into_iter().fold((x, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
}

/// Distance between segments by nested search over both parameters.
pub fn segment_distance(a0: P, a1: P, b0: P, b1: P) -> f64 {
    let inner = |s: f64| {
        let q = a0.lerp(a1, s);
        golden_min(0.0, 1.0, 80, |t| q.dist(b0.lerp(b1, t))).1
    };
    golden_min(0.0, 1.0, 80, inner).1
}

pub fn point_segment_distance(q: P, a: P, b: P) -> f64 {
    golden_min(0.0, 1.0, 100, |t| q.dist(a.lerp(b, t))).1
}

/// Closed disc or capsule: core segment and radius.
#[derive(Debug, Clone, Copy)]
pub struct Prim {
    pub a: P,
    pub b: P,
    pub r: f64,
}

impl Prim {
    pub fn signed(&self, q: P) -> f64 {
        point_segment_distance(q, self.a, self.b) - self.r
    }
}

/// First α ≥ 0 at which `origin + α·dir` enters a convex set whose signed
/// distance (or any convex function that is ≤ 0 exactly on the set) is `f`,
/// searched up to `alpha_max`. Returns `None` if the ray misses.
pub fn first_entry(alpha_max: f64, f: impl Fn(f64) -> f64) -> Option<f64> {
    if f(0.0) <= 0.0 {
        return Some(0.0);
    }
    let (am, fm) = golden_min(0.0, alpha_max, 200, &f);
    if fm > 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (0.0, am);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Robot state `[px, py, vx, vy, φ]`.
pub type X = [f64; 5];

fn deriv(x: &X, u1: f64, u2: f64) -> X {
    [x[2], x[3], u1 * x[4].cos(), u1 * x[4].sin(), u2]
}

/// RK4 integration of the point dynamics over `tau` in `n` substeps.
pub fn rk4(x0: X, u1: f64, u2: f64, tau: f64, n: usize) -> X {
    let h = tau / n as f64;
    let mut x = x0;
    let axpy = |x: &X, k: &X, s: f64| -> X {
        let mut o = *x;
        for i in 0..5 {
            o[i] += s * k[i];
        }
        o
    };
    for _ in 0..n {
        let k1 = deriv(&x, u1, u2);
        let k2 = deriv(&axpy(&x, &k1, h / 2.0), u1, u2);
        let k3 = deriv(&axpy(&x, &k2, h / 2.0), u1, u2);
        let k4 = deriv(&axpy(&x, &k3, h), u1, u2);
        for i in 0..5 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

/// Positions at `n` equal substeps of `[0, tau]`, inclusive of both ends.
pub fn rk4_path(x0: X, u1: f64, u2: f64, tau: f64, n: usize) -> Vec<P> {
    let mut out = Vec::with_capacity(n + 1);
    let mut x = x0;
    out.push(p(x[0], x[1]));
    for _ in 0..n {
        x = rk4(x, u1, u2, tau / n as f64, 4);
        out.push(p(x[0], x[1]));
    }
    out
}
