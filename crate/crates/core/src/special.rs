//! Normal distribution, polygamma and related special functions.

use crate::scalar::Scalar;

/// Complementary error function.
///
/// Series with positive terms below 1.5, continued fraction above; relative
/// accuracy close to machine precision on the whole line.
pub fn erfc<T: Scalar>(x: T) -> T {
    let two = T::lit(2.0);
    if x.is_nan() {
        return x;
    }
    if x < T::zero() {
        return two - erfc(-x);
    }
    if x < T::lit(1.5) {
        T::one() - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

pub fn erf<T: Scalar>(x: T) -> T {
    if x.abs() < T::lit(2.5) {
        if x < T::zero() {
            -erf_series(-x)
        } else {
            erf_series(x)
        }
    } else {
        T::one() - erfc(x)
    }
}

// erf(x) = 2/sqrt(pi) e^{-x^2} sum_n 2^n x^{2n+1} / (1*3*...*(2n+1)), x >= 0
fn erf_series<T: Scalar>(x: T) -> T {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = T::one();
    for _ in 0..500 {
        term = term * T::lit(2.0) * x2 / (T::lit(2.0) * k + T::one());
        sum = sum + term;
        if term <= sum * T::epsilon() {
            break;
        }
        k = k + T::one();
    }
    T::FRAC_2_SQRT_PI() * (-x2).exp() * sum
}

// erfc(x) = e^{-x^2}/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), modified Lentz.
fn erfc_continued_fraction<T: Scalar>(x: T) -> T {
    let tiny = T::min_positive_value() * T::lit(1e10);
    let mut f = x;
    if f == T::zero() {
        f = tiny;
    }
    let mut c = f;
    let mut d = T::zero();
    let half = T::lit(0.5);
    let mut n = T::one();
    for _ in 0..2000 {
        let a = n * half;
        d = x + a * d;
        if d == T::zero() {
            d = tiny;
        }
        c = x + a / c;
        if c == T::zero() {
            c = tiny;
        }
        d = d.recip();
        let delta = c * d;
        f = f * delta;
        if (delta - T::one()).abs() <= T::epsilon() {
            break;
        }
        n = n + T::one();
    }
    (-x * x).exp() * T::FRAC_2_SQRT_PI() * T::lit(0.5) / f
}

/// Standard normal density.
#[inline]
pub fn norm_pdf<T: Scalar>(x: T) -> T {
    let inv_sqrt_2pi = T::FRAC_1_SQRT_2() * T::FRAC_2_SQRT_PI() * T::lit(0.5);
    inv_sqrt_2pi * (-(x * x) * T::lit(0.5)).exp()
}

/// Standard normal distribution function.
#[inline]
pub fn norm_cdf<T: Scalar>(x: T) -> T {
    T::lit(0.5) * erfc(-x * T::FRAC_1_SQRT_2())
}

/// Standard normal quantile. Returns ±∞ at 0 and 1, NaN outside `[0, 1]`.
pub fn norm_quantile<T: Scalar>(p: T) -> T {
    if p.is_nan() || p < T::zero() || p > T::one() {
        return T::nan();
    }
    if p == T::zero() {
        return T::neg_infinity();
    }
    if p == T::one() {
        return T::infinity();
    }
    if p > T::lit(0.5) {
        // 1 - p is exact here.
        return -norm_quantile_lower(T::one() - p);
    }
    norm_quantile_lower(p)
}

fn norm_quantile_lower<T: Scalar>(p: T) -> T {
    // Rational initial guess (Acklam), then Halley refinement on the lower tail
    // where norm_cdf is accurate in relative terms.
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let pf = p.as_f64();
    let x0 = if pf < 0.02425 {
        let q = (-2.0 * pf.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = pf - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    let mut x = T::lit(x0);
    let sqrt_2pi = (T::lit(2.0) * T::PI()).sqrt();
    for _ in 0..3 {
        let e = norm_cdf(x) - p;
        let u = e * sqrt_2pi * (x * x * T::lit(0.5)).exp();
        let step = u / (T::one() + x * u * T::lit(0.5));
        x = x - step;
        if step.abs() <= T::epsilon() * x.abs().max(T::one()) {
            break;
        }
    }
    x
}

/// Digamma function for `x > 0`.
pub fn digamma<T: Scalar>(x: T) -> T {
    let mut x = x;
    let mut acc = T::zero();
    while x < T::lit(10.0) {
        acc = acc - x.recip();
        x = x + T::one();
    }
    let inv2 = (x * x).recip();
    // Bernoulli-number asymptotic series.
    let series = inv2
        * (T::lit(1.0 / 12.0)
            - inv2
                * (T::lit(1.0 / 120.0)
                    - inv2
                        * (T::lit(1.0 / 252.0)
                            - inv2
                                * (T::lit(1.0 / 240.0)
                                    - inv2
                                        * (T::lit(1.0 / 132.0)
                                            - inv2 * (T::lit(691.0 / 32760.0) - inv2 * T::lit(1.0 / 12.0)))))));
    acc + x.ln() - T::lit(0.5) / x - series
}

/// Trigamma function for `x > 0`.
pub fn trigamma<T: Scalar>(x: T) -> T {
    let mut x = x;
    let mut acc = T::zero();
    while x < T::lit(10.0) {
        acc = acc + (x * x).recip();
        x = x + T::one();
    }
    let inv = x.recip();
    let inv2 = inv * inv;
    let series = inv
        + inv2 * T::lit(0.5)
        + inv * inv2
            * (T::lit(1.0 / 6.0)
                - inv2
                    * (T::lit(1.0 / 30.0)
                        - inv2
                            * (T::lit(1.0 / 42.0)
                                - inv2
                                    * (T::lit(1.0 / 30.0)
                                        - inv2 * (T::lit(5.0 / 66.0) - inv2 * (T::lit(691.0 / 2730.0) - inv2 * T::lit(7.0 / 6.0)))))));
    acc + series
}
