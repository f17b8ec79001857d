//! Gauss-Legendre quadrature: fixed-order rules and a simple adaptive driver.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::scalar::Scalar;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// computed in double precision and cached per order.
pub fn gauss_legendre_rule(n: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(compute_rule(n)))
        .clone()
}

fn compute_rule(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "quadrature order must be positive");
    let mut rule = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        // Newton iteration on P_n from the Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule[i] = (-x, w);
        rule[n - 1 - i] = (x, w);
    }
    rule
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `n`-point Gauss-Legendre approximation of `∫_a^b f`.
pub fn integrate<T: Scalar, F: FnMut(T) -> T>(mut f: F, a: T, b: T, n: usize) -> T {
    let rule = gauss_legendre_rule(n);
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    let mut acc = T::zero();
    for &(x, w) in rule.iter() {
        acc = acc + T::lit(w) * f(mid + half * T::lit(x));
    }
    acc * half
}

/// Adaptive bisection with a 15-point rule: a panel is accepted once it agrees
/// with the sum over its two halves to within `tol` (scaled by panel width).
/// Bisection depth and the total number of panels are capped.
pub fn integrate_adaptive<T: Scalar, F: FnMut(T) -> T>(mut f: F, a: T, b: T, tol: T) -> T {
    const ORDER: usize = 15;
    const MAX_DEPTH: usize = 30;
    const MAX_PANELS: usize = 50_000;
    let width = (b - a).abs();
    if width == T::zero() {
        return T::zero();
    }
    let whole = integrate(&mut f, a, b, ORDER);
    let mut stack = vec![(a, b, whole, 0usize)];
    let mut total = T::zero();
    let mut panels = 0usize;
    while let Some((lo, hi, estimate, depth)) = stack.pop() {
        panels += 1;
        let mid = (lo + hi) * T::lit(0.5);
        let left = integrate(&mut f, lo, mid, ORDER);
        let right = integrate(&mut f, mid, hi, ORDER);
        let refined = left + right;
        // Floored at rounding level so unreachable tolerances still terminate.
        let local_tol = (tol * ((hi - lo).abs() / width))
            .max(T::lit(64.0) * T::epsilon() * refined.abs())
            .max(T::min_positive_value());
        let done = !refined.is_finite()
            || (refined - estimate).abs() <= local_tol
            || depth >= MAX_DEPTH
            || panels >= MAX_PANELS;
        if done {
            total = total + refined;
        } else {
            stack.push((mid, hi, right, depth + 1));
            stack.push((lo, mid, left, depth + 1));
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two_and_nodes_symmetric() {
        for n in [1usize, 2, 5, 50, 64, 200] {
            let rule = gauss_legendre_rule(n);
            let s: f64 = rule.iter().map(|r| r.1).sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
            for i in 0..n {
                assert!((rule[i].0 + rule[n - 1 - i].0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        // ∫_0^1 x^9 = 0.1, needs n >= 5.
        let v: f64 = integrate(|x: f64| x.powi(9), 0.0, 1.0, 5);
        assert!((v - 0.1).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        // ∫_0^1 ln(x) dx = -1
        let v: f64 = integrate_adaptive(|x: f64| x.ln(), 0.0, 1.0, 1e-12);
        assert!((v + 1.0).abs() < 1e-9, "{v}");
        let g: f64 = integrate_adaptive(|x: f64| (-x * x).exp(), -8.0, 8.0, 1e-14);
        assert!((g - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }
}
