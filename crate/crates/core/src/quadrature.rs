//! Gauss–Legendre rules and a few special values used by the spectral constants.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Composite Gauss–Legendre integral of `f` over `[a, b]` with `panels` panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * f(mid + 0.5 * h * xi);
        }
        acc += 0.5 * h * s;
    }
    acc
}

/// `Γ(k/2)` for a positive integer `k`.
pub fn gamma_half_integer(k: usize) -> f64 {
    assert!(k > 0);
    if k % 2 == 0 {
        (1..k / 2).map(|i| i as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < k as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Surface measure of the unit sphere `S^k ⊂ R^{k+1}`.
pub fn sphere_area(k: usize) -> f64 {
    2.0 * PI.powf((k + 1) as f64 / 2.0) / gamma_half_integer(k + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn composite_rule_on_sine() {
        let v = integrate(f64::sin, 0.0, PI, 4, 16);
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(0) - 2.0).abs() < 1e-14);
        assert!((sphere_area(1) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-13);
    }
}
