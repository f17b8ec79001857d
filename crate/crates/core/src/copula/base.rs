//! Unrotated, exchangeable pair-copula families.
//!
//! All functions take arguments already clamped to the open unit square and a
//! parameter already validated for the family. `h` is `∂C(u, v)/∂v`, the
//! distribution of the first argument given the second.

use super::family::FamilyKind;
use crate::error::{Error, Result};
use crate::quadrature::integrate_adaptive;
use crate::scalar::{ln_add_exp, Scalar};
use crate::special::{digamma, norm_cdf, norm_quantile, trigamma};

pub(crate) fn cdf<T: Scalar>(kind: FamilyKind, theta: T, u: T, v: T) -> T {
    match kind {
        FamilyKind::Independence => u * v,
        FamilyKind::Gaussian => gaussian_cdf(theta, u, v),
        FamilyKind::Clayton => (-clayton_ln_s(theta, u.ln(), v.ln()) / theta).exp(),
        FamilyKind::Gumbel => {
            let (x, y) = (-u.ln(), -v.ln());
            let ln_s = ln_add_exp(theta * x.ln(), theta * y.ln());
            (-(ln_s / theta).exp()).exp()
        }
        FamilyKind::Frank => {
            let em = (-theta).exp_m1();
            let eu = (-theta * u).exp_m1();
            let ev = (-theta * v).exp_m1();
            -(eu * ev / em).ln_1p() / theta
        }
        FamilyKind::Joe => T::one() - joe_s(theta, u, v).powf(theta.recip()),
    }
}

pub(crate) fn log_pdf<T: Scalar>(kind: FamilyKind, theta: T, u: T, v: T) -> T {
    match kind {
        FamilyKind::Independence => T::zero(),
        FamilyKind::Gaussian => {
            let x = norm_quantile(u);
            let y = norm_quantile(v);
            gaussian_log_pdf_scores(theta, x, y)
        }
        FamilyKind::Clayton => {
            let (lu, lv) = (u.ln(), v.ln());
            let ln_s = clayton_ln_s(theta, lu, lv);
            theta.ln_1p() - (T::one() + theta) * (lu + lv) - (theta.recip() + T::lit(2.0)) * ln_s
        }
        FamilyKind::Gumbel => {
            let (x, y) = (-u.ln(), -v.ln());
            let (lx, ly) = (x.ln(), y.ln());
            let ln_s = ln_add_exp(theta * lx, theta * ly);
            let a = (ln_s / theta).exp();
            -a + x + y + (theta - T::one()) * (lx + ly) + (theta.recip() - T::lit(2.0)) * ln_s
                + (a + theta - T::one()).ln()
        }
        FamilyKind::Frank => {
            let em = (-theta).exp_m1();
            let eu = (-theta * u).exp_m1();
            let ev = (-theta * v).exp_m1();
            let denom = em + eu * ev;
            (-theta * em).ln() - theta * (u + v) - T::lit(2.0) * denom.abs().ln()
        }
        FamilyKind::Joe => {
            let (ub, vb) = (T::one() - u, T::one() - v);
            let s = joe_s(theta, u, v);
            (theta.recip() - T::lit(2.0)) * s.ln()
                + (theta - T::one()) * (ub.ln() + vb.ln())
                + (theta - T::one() + s).ln()
        }
    }
}

/// Gaussian copula log-density in terms of the normal scores.
#[inline]
pub(crate) fn gaussian_log_pdf_scores<T: Scalar>(rho: T, x: T, y: T) -> T {
    let r2 = T::one() - rho * rho;
    -T::lit(0.5) * r2.ln() - (rho * rho * (x * x + y * y) - T::lit(2.0) * rho * x * y) / (T::lit(2.0) * r2)
}

pub(crate) fn h<T: Scalar>(kind: FamilyKind, theta: T, u: T, v: T) -> T {
    match kind {
        FamilyKind::Independence => u,
        FamilyKind::Gaussian => {
            let x = norm_quantile(u);
            let y = norm_quantile(v);
            norm_cdf((x - theta * y) / (T::one() - theta * theta).sqrt())
        }
        FamilyKind::Clayton => {
            // h = (1 + (v/u)^θ - v^θ)^(-(1+θ)/θ)
            let (lu, lv) = (u.ln(), v.ln());
            let z = theta * (lv - lu);
            let vt = (theta * lv).exp();
            let l = if z > T::zero() {
                z + ((-z).exp() * (T::one() - vt)).ln_1p()
            } else {
                (z.exp() - vt).ln_1p()
            };
            (-(T::one() + theta.recip()) * l).exp()
        }
        FamilyKind::Gumbel => gumbel_h(theta, u, v),
        FamilyKind::Frank => {
            let em = (-theta).exp_m1();
            let eu = (-theta * u).exp_m1();
            let ev = (-theta * v).exp_m1();
            (-theta * v).exp() * eu / (em + eu * ev)
        }
        FamilyKind::Joe => {
            let a = (T::one() - u).powf(theta);
            let vb = T::one() - v;
            let s = joe_s(theta, u, v);
            s.powf(theta.recip() - T::one()) * vb.powf(theta - T::one()) * (T::one() - a)
        }
    }
    .max(T::zero())
    .min(T::one())
}

fn gumbel_h<T: Scalar>(theta: T, u: T, v: T) -> T {
    let (x, y) = (-u.ln(), -v.ln());
    let ly = y.ln();
    let ln_s = ln_add_exp(theta * x.ln(), theta * ly);
    let a = (ln_s / theta).exp();
    (-a + (theta.recip() - T::one()) * ln_s + (theta - T::one()) * ly + y).exp()
}

/// Solves `h(u | v) = w` for `u`.
pub(crate) fn h_inverse<T: Scalar>(kind: FamilyKind, theta: T, w: T, v: T) -> Result<T> {
    match kind {
        FamilyKind::Independence => Ok(w),
        FamilyKind::Gaussian => {
            let y = norm_quantile(v);
            let z = norm_quantile(w);
            Ok(norm_cdf(z * (T::one() - theta * theta).sqrt() + theta * y))
        }
        FamilyKind::Clayton => {
            let lv = v.ln();
            let inner = (-(theta / (T::one() + theta)) * w.ln()).exp_m1() + (theta * lv).exp();
            Ok((lv - inner.ln() / theta).exp())
        }
        FamilyKind::Frank => {
            let em = (-theta).exp_m1();
            let ev = (-theta * v).exp_m1();
            let a = w * em / ((-theta * v).exp() - w * ev);
            Ok(-a.ln_1p() / theta)
        }
        FamilyKind::Gumbel | FamilyKind::Joe => h_inverse_numeric(kind, theta, w, v),
    }
}

fn h_inverse_numeric<T: Scalar>(kind: FamilyKind, theta: T, w: T, v: T) -> Result<T> {
    const MAX_ITER: usize = 300;
    let ftol = T::tol(1e-14);
    let mut lo = T::zero();
    let mut hi = T::one();
    let mut u = w;
    let mut residual = T::infinity();
    for _ in 0..MAX_ITER {
        let f = h(kind, theta, u, v) - w;
        residual = f.abs();
        if residual <= ftol {
            return Ok(u);
        }
        if f > T::zero() {
            hi = u;
        } else {
            lo = u;
        }
        if hi - lo <= T::epsilon() * hi.max(T::min_positive_value()) {
            return Ok(u);
        }
        let dens = log_pdf(kind, theta, u, v).exp();
        let newton = u - f / dens;
        u = if dens.is_finite() && dens > T::zero() && newton > lo && newton < hi {
            newton
        } else if lo > T::zero() && hi / lo > T::lit(16.0) {
            (lo * hi).sqrt()
        } else if lo == T::zero() && hi > T::lit(1e-3) {
            hi * T::lit(0.5)
        } else if lo == T::zero() {
            hi * T::lit(1e-3)
        } else {
            (lo + hi) * T::lit(0.5)
        };
    }
    if residual <= T::tol(1e-10) {
        return Ok(u);
    }
    Err(Error::NonConvergence {
        what: "h-function inversion",
        iterations: MAX_ITER,
        residual: residual.as_f64(),
    })
}

pub(crate) fn tau<T: Scalar>(kind: FamilyKind, theta: T) -> T {
    let two = T::lit(2.0);
    match kind {
        FamilyKind::Independence => T::zero(),
        FamilyKind::Gaussian => two / T::PI() * theta.asin(),
        FamilyKind::Clayton => theta / (theta + two),
        FamilyKind::Gumbel => T::one() - theta.recip(),
        FamilyKind::Frank => {
            let a = theta.abs();
            // 1 - D1(a) = (1/a) ∫_0^a (1 - t/(e^t - 1)) dt
            let g = |t: T| {
                if t == T::zero() {
                    T::zero()
                } else {
                    T::one() - t / t.exp_m1()
                }
            };
            let one_minus_d1 = integrate_adaptive(g, T::zero(), a, T::tol(1e-15) * a) / a;
            let t = T::one() - T::lit(4.0) / a * one_minus_d1;
            if theta < T::zero() {
                -t
            } else {
                t
            }
        }
        FamilyKind::Joe => {
            // τ = 1 - (2/θ) (ψ(1 + 2/θ) - ψ(2)) / (2/θ - 1)
            let x = T::one() + two / theta;
            let dx = x - two;
            let slope = if dx.abs() < T::lit(1e-4) {
                trigamma((x + two) * T::lit(0.5))
            } else {
                (digamma(x) - digamma(two)) / dx
            };
            T::one() - two / theta * slope
        }
    }
}

// ln(u^-θ + v^-θ - 1) from ln u, ln v.
fn clayton_ln_s<T: Scalar>(theta: T, lu: T, lv: T) -> T {
    let a = -theta * lu;
    let b = -theta * lv;
    let (m, n) = if a > b { (a, b) } else { (b, a) };
    m + ((n - m).exp() - (-m).exp()).ln_1p()
}

fn joe_s<T: Scalar>(theta: T, u: T, v: T) -> T {
    let a = (T::one() - u).powf(theta);
    let b = (T::one() - v).powf(theta);
    a + b * (T::one() - a)
}

fn gaussian_cdf<T: Scalar>(rho: T, u: T, v: T) -> T {
    if rho == T::zero() {
        return u * v;
    }
    let x = norm_quantile(u);
    let y = norm_quantile(v);
    // Φ2(x, y; ρ) = Φ(x)Φ(y) + (1/2π) ∫_0^{asin ρ} exp(-(x² + y² - 2xy sin t) / (2 cos² t)) dt
    let integrand = |t: T| {
        let (s, c) = t.sin_cos();
        let c2 = c * c;
        if c2 <= T::zero() {
            return T::zero();
        }
        (-(x * x + y * y - T::lit(2.0) * x * y * s) / (T::lit(2.0) * c2)).exp()
    };
    let upper = rho.asin();
    let integral = integrate_adaptive(integrand, T::zero(), upper, T::tol(1e-15));
    let value = u * v + integral / (T::lit(2.0) * T::PI());
    value.max(T::zero()).min(u.min(v))
}
