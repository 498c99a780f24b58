//! Eigenvalues of 3×3 matrices from the characteristic cubic.

use nalgebra::{Complex, Matrix3};

const BISECTION_STEPS: usize = 200;

/// Coefficients `(c2, c1, c0)` of `det(λI − A) = λ³ + c2 λ² + c1 λ + c0`.
fn characteristic(a: &Matrix3<f64>) -> (f64, f64, f64) {
    let tr = a.trace();
    let minors = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)]
        + a[(0, 0)] * a[(2, 2)] - a[(0, 2)] * a[(2, 0)]
        + a[(1, 1)] * a[(2, 2)] - a[(1, 2)] * a[(2, 1)];
    (-tr, minors, -a.determinant())
}

fn cubic(c: (f64, f64, f64), x: f64) -> f64 {
    ((x + c.0) * x + c.1) * x + c.2
}

fn cubic_slope(c: (f64, f64, f64), x: f64) -> f64 {
    (3.0 * x + 2.0 * c.0) * x + c.1
}

fn real_root(c: (f64, f64, f64)) -> f64 {
    // Cauchy bound on the root moduli.
    let bound = 1.0 + c.0.abs().max(c.1.abs()).max(c.2.abs());
    let (mut lo, mut hi) = (-bound, bound);
    let mut mid = 0.0;
    for _ in 0..BISECTION_STEPS {
        mid = 0.5 * (lo + hi);
        let p = cubic(c, mid);
        if p == 0.0 || mid == lo || mid == hi {
            return mid;
        }
        if p < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}

fn polish(c: (f64, f64, f64), mut x: f64) -> f64 {
    for _ in 0..3 {
        let d = cubic_slope(c, x);
        if d == 0.0 {
            break;
        }
        let next = x - cubic(c, x) / d;
        if !next.is_finite() || cubic(c, next).abs() >= cubic(c, x).abs() {
            break;
        }
        x = next;
    }
    x
}

/// All three eigenvalues, real ones first.
pub fn eigenvalues_3x3(a: &Matrix3<f64>) -> [Complex<f64>; 3] {
    let c = characteristic(a);
    let r = real_root(c);
    // λ³ + c2 λ² + c1 λ + c0 = (λ − r)(λ² + q1 λ + q0)
    let q1 = c.0 + r;
    let q0 = c.1 + r * q1;
    let disc = q1 * q1 - 4.0 * q0;
    if disc >= 0.0 {
        let s = -0.5 * (q1 + q1.signum() * disc.sqrt());
        let (x1, x2) = if s == 0.0 { (0.0, 0.0) } else { (s, q0 / s) };
        [
            Complex::new(r, 0.0),
            Complex::new(polish(c, x1), 0.0),
            Complex::new(polish(c, x2), 0.0),
        ]
    } else {
        let re = -0.5 * q1;
        let im = 0.5 * (-disc).sqrt();
        [Complex::new(r, 0.0), Complex::new(re, im), Complex::new(re, -im)]
    }
}

/// Largest eigenvalue modulus.
pub fn spectral_radius_3x3(a: &Matrix3<f64>) -> f64 {
    eigenvalues_3x3(a)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}
