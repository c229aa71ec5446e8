#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use waveguide_imaging::{ComplexVec3, DyadicField, Point3, WaveguideSpec, Wavenumber};

pub fn guide() -> WaveguideSpec {
    WaveguideSpec::new(10.0, 10.0).unwrap()
}

pub fn wavenumber(k: f64) -> Wavenumber {
    Wavenumber::new(k).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point with transverse coordinates inside the cross-section and
/// `x3` in `[z_lo, z_hi)`.
pub fn interior_point(rng: &mut ChaCha8Rng, spec: &WaveguideSpec, z_lo: f64, z_hi: f64) -> Point3 {
    Point3::new(
        rng.random_range(0.02..0.98) * spec.a(),
        rng.random_range(0.02..0.98) * spec.b(),
        rng.random_range(z_lo..z_hi),
    )
}

pub fn random_cvec(rng: &mut ChaCha8Rng) -> ComplexVec3 {
    let mut c = || Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    ComplexVec3::new(c(), c(), c())
}

pub fn random_tangential(rng: &mut ChaCha8Rng) -> ComplexVec3 {
    let mut v = random_cvec(rng);
    v[2] = Complex64::new(0.0, 0.0);
    v
}

pub fn dyad_rel(a: &DyadicField, b: &DyadicField) -> f64 {
    let n = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let d = (a - b).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    d / n
}

pub fn vec_norm(v: &[ComplexVec3]) -> f64 {
    v.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

pub fn vec_rel(a: &[ComplexVec3], b: &[ComplexVec3]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum::<f64>().sqrt();
    d / vec_norm(b)
}

/// `curl curl E = ∇(∇·E) − ΔE` from central second differences with step `h`.
#[allow(clippy::needless_range_loop)]
pub fn curl_curl_fd(f: &dyn Fn(Point3) -> ComplexVec3, x: Point3, h: f64) -> ComplexVec3 {
    let shift = |p: Point3, i: usize, d: f64| p.with_axis(i, p.to_array()[i] + d);
    let f0 = f(x);
    // d2[i][j] = ∂i∂j E (vector)
    let mut d2 = [[ComplexVec3::zeros(); 3]; 3];
    for i in 0..3 {
        let fp = f(shift(x, i, h));
        let fm = f(shift(x, i, -h));
        d2[i][i] = (fp - f0 * Complex64::from(2.0) + fm) / Complex64::from(h * h);
        for j in (i + 1)..3 {
            let pp = f(shift(shift(x, i, h), j, h));
            let pm = f(shift(shift(x, i, h), j, -h));
            let mp = f(shift(shift(x, i, -h), j, h));
            let mm = f(shift(shift(x, i, -h), j, -h));
            let v = (pp - pm - mp + mm) / Complex64::from(4.0 * h * h);
            d2[i][j] = v;
            d2[j][i] = v;
        }
    }
    let mut out = ComplexVec3::zeros();
    for c in 0..3 {
        let grad_div: Complex64 = (0..3).map(|j| d2[c][j][j]).sum();
        let lap: Complex64 = (0..3).map(|j| d2[j][j][c]).sum();
        out[c] = grad_div - lap;
    }
    out
}
