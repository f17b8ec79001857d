//! Gaussian kernel density marginals on a fixed grid.
//!
//! The bandwidth follows the normal-reference rule
//! `h = 1.06 · min(sd, IQR/1.34) · n^(-1/5)` (plain `sd` when the IQR is 0).
//! Density, CDF and quantile are linear interpolations on 512 equally spaced
//! points spanning `[min - 3h, max + 3h]`; no boundary correction is applied.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::norm_pdf;

pub const GRID_POINTS: usize = 512;
const MIN_SAMPLE: usize = 10;
// Kernel contributions beyond 9 bandwidths are below 1e-17 and skipped.
const KERNEL_CUTOFF: f64 = 9.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelMarginalRepr<T>", into = "KernelMarginalRepr<T>")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct KernelMarginal<T> {
    sample_size: usize,
    bandwidth: T,
    support: (T, T),
    grid: Vec<[T; 3]>,
}

#[derive(Serialize, Deserialize)]
struct KernelMarginalRepr<T> {
    sample_size: usize,
    bandwidth: T,
    support: (T, T),
    grid: Vec<[T; 3]>,
}

impl<T: Scalar> From<KernelMarginal<T>> for KernelMarginalRepr<T> {
    fn from(m: KernelMarginal<T>) -> Self {
        KernelMarginalRepr {
            sample_size: m.sample_size,
            bandwidth: m.bandwidth,
            support: m.support,
            grid: m.grid,
        }
    }
}

impl<T: Scalar> TryFrom<KernelMarginalRepr<T>> for KernelMarginal<T> {
    type Error = Error;

    fn try_from(r: KernelMarginalRepr<T>) -> Result<Self> {
        let ok = r.grid.len() >= 2
            && r.bandwidth > T::zero()
            && r.grid.windows(2).all(|w| w[1][0] > w[0][0] && w[1][2] >= w[0][2])
            && r.grid.iter().all(|g| g[1] >= T::zero());
        if !ok {
            return Err(Error::InvalidInput("malformed kernel marginal".into()));
        }
        Ok(KernelMarginal {
            sample_size: r.sample_size,
            bandwidth: r.bandwidth,
            support: r.support,
            grid: r.grid,
        })
    }
}

/// Sample quantile with linear interpolation between order statistics (type 7).
pub fn quantile_type7<T: Scalar>(sorted: &[T], p: T) -> T {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = T::lit((n - 1) as f64) * p;
    let lo = h.floor().to_usize().unwrap_or(0).min(n - 1);
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - T::lit(lo as f64)) * (sorted[hi] - sorted[lo])
}

/// Normal-reference bandwidth of a sorted sample.
fn bandwidth<T: Scalar>(sorted: &[T]) -> Result<T> {
    let n = T::lit(sorted.len() as f64);
    let mean = sorted.iter().copied().sum::<T>() / n;
    let var = sorted.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (n - T::one());
    let sd = var.sqrt();
    if !(sd > T::zero()) {
        return Err(Error::Degenerate("kernel density of a constant sample".into()));
    }
    let iqr = quantile_type7(sorted, T::lit(0.75)) - quantile_type7(sorted, T::lit(0.25));
    let spread = if iqr > T::zero() { sd.min(iqr / T::lit(1.34)) } else { sd };
    Ok(T::lit(1.06) * spread * n.powf(T::lit(-0.2)))
}

/// Fits the kernel marginal of `sample`.
pub fn fit_kde<T: Scalar>(sample: &[T]) -> Result<KernelMarginal<T>> {
    if sample.len() < MIN_SAMPLE {
        return Err(Error::InvalidInput(format!(
            "kernel density needs at least {MIN_SAMPLE} observations, got {}",
            sample.len()
        )));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in kernel density sample".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let h = bandwidth(&sorted)?;
    let lo = sorted[0] - T::lit(3.0) * h;
    let hi = sorted[sorted.len() - 1] + T::lit(3.0) * h;
    let step = (hi - lo) / T::lit((GRID_POINTS - 1) as f64);
    let cutoff = T::lit(KERNEL_CUTOFF) * h;
    let norm = T::one() / (T::lit(sorted.len() as f64) * h);

    let xs: Vec<T> = (0..GRID_POINTS)
        .map(|i| if i == GRID_POINTS - 1 { hi } else { lo + step * T::lit(i as f64) })
        .collect();
    let pdf: Vec<T> = xs
        .iter()
        .map(|&x| {
            let a = sorted.partition_point(|&s| s < x - cutoff);
            let b = sorted.partition_point(|&s| s <= x + cutoff);
            sorted[a..b].iter().map(|&s| norm_pdf((x - s) / h)).sum::<T>() * norm
        })
        .collect();
    let mut cdf = vec![T::zero(); GRID_POINTS];
    for i in 1..GRID_POINTS {
        cdf[i] = cdf[i - 1] + (pdf[i] + pdf[i - 1]) * (xs[i] - xs[i - 1]) * T::lit(0.5);
    }
    let total = cdf[GRID_POINTS - 1];
    let grid = (0..GRID_POINTS)
        .map(|i| [xs[i], pdf[i], cdf[i] / total])
        .collect();
    Ok(KernelMarginal {
        sample_size: sample.len(),
        bandwidth: h,
        support: (lo, hi),
        grid,
    })
}

impl<T: Scalar> KernelMarginal<T> {
    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    pub fn support(&self) -> (T, T) {
        self.support
    }

    /// Grid rows `[x, pdf, cdf]`.
    pub fn grid(&self) -> &[[T; 3]] {
        &self.grid
    }

    // Index `i` with grid[i].x <= x < grid[i+1].x, for x inside the support.
    fn segment(&self, x: T) -> usize {
        let i = self.grid.partition_point(|g| g[0] <= x);
        i.saturating_sub(1).min(self.grid.len() - 2)
    }

    fn interp(&self, x: T, col: usize) -> T {
        let i = self.segment(x);
        let (a, b) = (&self.grid[i], &self.grid[i + 1]);
        let t = (x - a[0]) / (b[0] - a[0]);
        a[col] + t * (b[col] - a[col])
    }

    /// Distribution function, clamped to `[1e-10, 1 - 1e-10]`.
    pub fn cdf_eval(&self, x: T) -> T {
        let (lo, hi) = self.support;
        if x.is_nan() {
            return x;
        }
        if x <= lo {
            return T::unit_eps();
        }
        if x >= hi {
            return T::one() - T::unit_eps();
        }
        self.interp(x, 2).clamp_unit()
    }

    /// Density; zero outside the support.
    pub fn pdf_eval(&self, x: T) -> T {
        let (lo, hi) = self.support;
        if !(x >= lo && x <= hi) {
            return T::zero();
        }
        self.interp(x, 1)
    }

    /// Inverse of [`cdf_eval`](Self::cdf_eval); errors unless `0 < alpha < 1`.
    pub fn quantile_eval(&self, alpha: T) -> Result<T> {
        if !(alpha > T::zero() && alpha < T::one()) {
            return Err(Error::InvalidInput(format!(
                "quantile level {} outside (0, 1)",
                alpha.as_f64()
            )));
        }
        let n = self.grid.len();
        let j = self.grid.partition_point(|g| g[2] < alpha);
        if j == 0 {
            return Ok(self.grid[0][0]);
        }
        if j >= n {
            return Ok(self.grid[n - 1][0]);
        }
        let (a, b) = (&self.grid[j - 1], &self.grid[j]);
        let dc = b[2] - a[2];
        if dc <= T::zero() {
            return Ok(a[0]);
        }
        Ok(a[0] + (alpha - a[2]) / dc * (b[0] - a[0]))
    }

    /// `cdf_eval` applied elementwise.
    pub fn pit(&self, xs: &[T]) -> Vec<T> {
        xs.iter().map(|&x| self.cdf_eval(x)).collect()
    }
}

/// Fits the marginal and returns the sample on the probability scale.
pub fn pit_transform<T: Scalar>(sample: &[T]) -> Result<(KernelMarginal<T>, Vec<T>)> {
    let m = fit_kde(sample)?;
    let u = m.pit(sample);
    Ok((m, u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::special::norm_quantile;
    use proptest::prelude::*;
    use rand::distributions::Open01;
    use rand::Rng;

    fn normal_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut r = stream_rng(seed, 0);
        (0..n).map(|_| norm_quantile(r.sample::<f64, _>(Open01))).collect()
    }

    fn bin_deviation(u: &[f64]) -> f64 {
        let mut bins = [0usize; 10];
        for &x in u {
            bins[((x * 10.0) as usize).min(9)] += 1;
        }
        bins.iter()
            .map(|&c| (c as f64 / u.len() as f64 - 0.1).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn normal_sample_median() {
        let m = fit_kde(&normal_sample(10_000, 1)).unwrap();
        assert!((m.cdf_eval(0.0) - 0.5).abs() < 0.02);
    }

    #[test]
    fn degenerate_and_short_samples() {
        assert!(matches!(fit_kde(&[3.0; 20]), Err(Error::Degenerate(_))));
        assert!(fit_kde(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn integer_sample_median() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        let q = fit_kde(&s).unwrap().quantile_eval(0.5).unwrap();
        assert!((45.0..=56.0).contains(&q), "{q}");
    }

    #[test]
    fn clamps_outside_support() {
        let m = fit_kde(&normal_sample(500, 2)).unwrap();
        assert_eq!(m.cdf_eval(-1e6), 1e-10);
        assert_eq!(m.cdf_eval(1e6), 1.0 - 1e-10);
        assert!(m.quantile_eval(0.0).is_err() && m.quantile_eval(1.0).is_err());
    }

    #[test]
    fn grid_invariants() {
        let m = fit_kde(&normal_sample(2000, 3)).unwrap();
        let g = m.grid();
        assert_eq!(g.len(), GRID_POINTS);
        assert!(g[0][2] < 1e-6 && g[GRID_POINTS - 1][2] > 1.0 - 1e-6);
        assert!(g.windows(2).all(|w| w[1][2] > w[0][2]));
        let mass: f64 = g.windows(2).map(|w| (w[0][1] + w[1][1]) * (w[1][0] - w[0][0]) / 2.0).sum();
        assert!((mass - 1.0).abs() < 1e-3, "{mass}");
    }

    #[test]
    fn cdf_quantile_roundtrip() {
        let m = fit_kde(&normal_sample(3000, 4)).unwrap();
        for a in [0.05, 0.5, 0.95] {
            assert!((m.cdf_eval(m.quantile_eval(a).unwrap()) - a).abs() < 1e-6);
        }
        let step = (m.support().1 - m.support().0) / (GRID_POINTS - 1) as f64;
        for x in [-1.5, -0.2, 0.7, 2.0] {
            assert!((m.quantile_eval(m.cdf_eval(x)).unwrap() - x).abs() < step);
        }
    }

    #[test]
    fn symmetric_sample_has_central_median() {
        let mut s = normal_sample(2000, 5);
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        s.extend(neg);
        assert!(fit_kde(&s).unwrap().quantile_eval(0.5).unwrap().abs() < 0.05);
    }

    #[test]
    fn quantile_is_monotone() {
        let m = fit_kde(&normal_sample(1000, 6)).unwrap();
        let q: Vec<f64> = (1..100).map(|i| m.quantile_eval(i as f64 / 100.0).unwrap()).collect();
        assert!(q.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn pit_of_uniform_sample() {
        let mut r = stream_rng(7, 0);
        let s: Vec<f64> = (0..10_000).map(|_| r.gen()).collect();
        let (_, u) = pit_transform(&s).unwrap();
        assert!(u.iter().all(|&x| x > 0.0 && x < 1.0));
        let mut sorted = u.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len() as f64;
        let ks = sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| (x - i as f64 / n).abs().max((x - (i + 1) as f64 / n).abs()))
            .fold(0.0, f64::max);
        assert!(ks < 0.03, "{ks}");
    }

    #[test]
    fn pit_histograms_are_flat() {
        let n = 10_000;
        let normal = normal_sample(n, 8);
        let bimodal: Vec<f64> = normal_sample(n, 10)
            .iter()
            .enumerate()
            .map(|(i, z)| if i % 2 == 0 { z - 2.0 } else { z + 2.0 })
            .collect();
        for (name, s) in [("normal", normal), ("bimodal", bimodal)] {
            let (_, u) = pit_transform(&s).unwrap();
            let d = bin_deviation(&u);
            assert!(d < 0.02, "{name}: {d}");
        }
    }

    // Without boundary correction the kernel leaks mass below 0, so the
    // lowest PIT bins are under-filled (measured deviation 0.026).
    #[test]
    #[ignore = "no boundary correction by design; exponential PIT deviation exceeds 0.02"]
    fn pit_histogram_exponential() {
        let mut r = stream_rng(9, 0);
        let expo: Vec<f64> = (0..10_000).map(|_| -r.sample::<f64, _>(Open01).ln()).collect();
        let (_, u) = pit_transform(&expo).unwrap();
        let d = bin_deviation(&u);
        assert!(d < 0.02, "exponential: {d}");
    }

    #[test]
    fn json_roundtrip() {
        let m = fit_kde(&normal_sample(100, 11)).unwrap();
        let j = serde_json::to_value(&m).unwrap();
        for key in ["sample_size", "bandwidth", "support", "grid"] {
            assert!(j.get(key).is_some());
        }
        let back: KernelMarginal<f64> = serde_json::from_value(j).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn single_precision() {
        let s: Vec<f32> = normal_sample(500, 12).iter().map(|&x| x as f32).collect();
        let m = fit_kde(&s).unwrap();
        let q = m.quantile_eval(0.3).unwrap();
        assert!((m.cdf_eval(q) - 0.3).abs() < 1e-5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn scale_equivariance(seed in 0u64..1000, c in 0.01f64..100.0) {
            let s = normal_sample(200, seed);
            let scaled: Vec<f64> = s.iter().map(|x| x * c).collect();
            let (m, mc) = (fit_kde(&s).unwrap(), fit_kde(&scaled).unwrap());
            prop_assert!((mc.bandwidth() - c * m.bandwidth()).abs() <= 1e-12 * c * m.bandwidth());
            prop_assert!((mc.support().0 - c * m.support().0).abs() <= 1e-12 * c * m.support().0.abs());
            for x in [-2.0, -0.3, 0.0, 0.4, 1.7] {
                prop_assert!((mc.cdf_eval(c * x) - m.cdf_eval(x)).abs() < 1e-9);
            }
            let (q, qc) = (m.quantile_eval(0.3).unwrap(), mc.quantile_eval(0.3).unwrap());
            prop_assert!((qc - c * q).abs() <= 1e-9 * c * (1.0 + q.abs()));
        }

        #[test]
        fn pit_preserves_order(v in prop::collection::vec(-50.0f64..50.0, 10..200)) {
            if let Ok((_, u)) = pit_transform(&v) {
                for i in 0..v.len() {
                    for j in 0..v.len() {
                        if v[i] < v[j] {
                            prop_assert!(u[i] <= u[j]);
                        }
                    }
                }
            }
        }
    }
}
