use rand::distributions::Open01;
use rand::Rng;

use super::{base, FamilyId, FamilyKind, PairCopula, UPair};
use crate::dependence::kendall_tau;
use crate::error::{Error, Result};
use crate::optimize::brent_minimize;
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::special::norm_quantile;

const MIN_OBS: usize = 10;

fn check_data<T: Scalar>(data: &[UPair<T>]) -> Result<()> {
    if data.len() < MIN_OBS {
        return Err(Error::InvalidInput(format!(
            "copula fit needs at least {MIN_OBS} observations, got {}",
            data.len()
        )));
    }
    let constant = |f: fn(&UPair<T>) -> T| {
        let first = f(&data[0]);
        data.iter().all(|p| f(p) == first)
    };
    if constant(|p| p.u) || constant(|p| p.v) {
        return Err(Error::Degenerate("constant column in copula data".into()));
    }
    if data.iter().any(|p| !(p.u.is_finite() && p.v.is_finite())) {
        return Err(Error::InvalidInput("non-finite copula data".into()));
    }
    Ok(())
}

fn empirical_tau<T: Scalar>(data: &[UPair<T>]) -> Result<T> {
    let u: Vec<T> = data.iter().map(|p| p.u).collect();
    let v: Vec<T> = data.iter().map(|p| p.v).collect();
    kendall_tau(&u, &v)
}

/// Clamped copy of the data, plus normal scores when the Gaussian family is fitted.
struct Prepared<T> {
    data: Vec<UPair<T>>,
    scores: Option<Vec<(T, T)>>,
}

impl<T: Scalar> Prepared<T> {
    fn new(data: &[UPair<T>], with_scores: bool) -> Self {
        let data: Vec<UPair<T>> = data.iter().map(|p| UPair::new(p.u, p.v)).collect();
        let scores = with_scores.then(|| {
            data.iter()
                .map(|p| (norm_quantile(p.u), norm_quantile(p.v)))
                .collect()
        });
        Prepared { data, scores }
    }

    fn loglik(&self, family: FamilyId, theta: T) -> T {
        match (family.kind(), &self.scores) {
            (FamilyKind::Independence, _) => T::zero(),
            (FamilyKind::Gaussian, Some(s)) => s
                .iter()
                .map(|&(x, y)| base::gaussian_log_pdf_scores(theta, x, y))
                .sum(),
            _ => self
                .data
                .iter()
                .map(|p| super::log_pdf_unchecked(family, theta, p.u, p.v))
                .sum(),
        }
    }
}

fn fit_prepared<T: Scalar>(prep: &Prepared<T>, family: FamilyId, tau: T) -> Result<PairCopula<T>> {
    let n = prep.data.len();
    if family.kind() == FamilyKind::Independence {
        return PairCopula::with_fit(family, T::zero(), n, T::zero());
    }
    let start = super::tau_to_param(family, tau).ok();
    let nll = |theta: T| -prep.loglik(family, theta);
    let mut best: Option<(T, T)> = None;
    for (lo, hi) in family.fit_bounds() {
        let (lo, hi) = (T::lit(lo), T::lit(hi));
        let seed = start
            .filter(|s| *s > lo && *s < hi)
            .unwrap_or_else(|| (lo + hi) * T::lit(0.5));
        let m = brent_minimize(nll, lo, hi, Some(seed), T::tol(1e-8), 500);
        if m.value.is_finite() && best.map_or(true, |(_, v)| m.value < v) {
            best = Some((m.x, m.value));
        }
        let flat = [lo, seed, hi]
            .iter()
            .all(|&x| (nll(x) - m.value).abs() <= T::tol(1e-12) * (T::one() + m.value.abs()));
        if flat && family.fit_bounds().len() == 1 {
            return Err(Error::Optimization {
                family,
                reason: "flat likelihood".into(),
            });
        }
    }
    let (theta, value) = best.ok_or_else(|| Error::Optimization {
        family,
        reason: "no finite likelihood inside the parameter bounds".into(),
    })?;
    PairCopula::with_fit(family, theta, n, -value)
}

/// Maximum-likelihood fit of a single family.
///
/// Optima on the boundary of the numerical parameter interval are accepted.
pub fn fit_mle<T: Scalar>(data: &[UPair<T>], family: FamilyId) -> Result<PairCopula<T>> {
    check_data(data)?;
    let tau = empirical_tau(data)?;
    let prep = Prepared::new(data, family.kind() == FamilyKind::Gaussian);
    fit_prepared(&prep, family, tau)
}

/// Fits every candidate and keeps the smallest AIC. Ties go to the candidate
/// earliest in enumeration order.
pub fn select_family<T: Scalar>(data: &[UPair<T>], candidates: &[FamilyId]) -> Result<PairCopula<T>> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("empty candidate family set".into()));
    }
    check_data(data)?;
    let tau = empirical_tau(data)?;
    let mut sorted = candidates.to_vec();
    sorted.sort();
    sorted.dedup();
    let with_scores = sorted.iter().any(|f| f.kind() == FamilyKind::Gaussian);
    let prep = Prepared::new(data, with_scores);
    let mut best: Option<PairCopula<T>> = None;
    let mut last_err = None;
    for family in sorted {
        match fit_prepared(&prep, family, tau) {
            Ok(fit) => {
                if best.as_ref().map_or(true, |b| fit.aic() < b.aic()) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| {
        last_err
            .expect("at least one candidate was tried")
            .context("every candidate family failed")
    })
}

/// Draws `n` pairs as `(u, h⁻¹(w | u))` with `u, w` uniform.
pub fn simulate_pair<T: Scalar>(model: &PairCopula<T>, n: usize, seed: u64) -> Result<Vec<UPair<T>>> {
    let mut rng = stream_rng(seed, 0);
    (0..n)
        .map(|_| {
            let u = T::lit(rng.sample::<f64, _>(Open01));
            let w = T::lit(rng.sample::<f64, _>(Open01));
            let v = model.hinv_v_given_u(w, u)?;
            Ok(UPair::new(u, v))
        })
        .collect()
}
