//! Bivariate one-parameter copulas: evaluation, h-functions and their
//! inverses, Kendall's tau mapping, maximum-likelihood fitting with AIC family
//! selection, and simulation.

mod base;
mod family;
mod fit;

use serde::{Deserialize, Serialize};

pub use family::{parse_family_list, FamilyId, FamilyKind, Rotation, FRANK_MIN_ABS};
pub use fit::{fit_mle, select_family, simulate_pair};

use crate::error::{Error, Result};
use crate::optimize::brent_root;
use crate::scalar::Scalar;

/// A point of the unit square, clamped to its interior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UPair<T> {
    pub u: T,
    pub v: T,
}

impl<T: Scalar> UPair<T> {
    /// Clamps both coordinates to `[ε, 1 - ε]` with `ε = 1e-10`.
    pub fn new(u: T, v: T) -> Self {
        UPair {
            u: u.clamp_unit(),
            v: v.clamp_unit(),
        }
    }
}

/// Which conditional distribution an h-function returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HFunc {
    /// `h(u | v) = ∂C(u, v)/∂v`: the first argument given the second.
    UGivenV,
    /// `h(v | u) = ∂C(u, v)/∂u`: the second argument given the first.
    VGivenU,
}

fn check<T: Scalar>(family: FamilyId, theta: T) -> Result<()> {
    family.check_param(theta.as_f64())
}

// Rotation-aware kernels; arguments interior, parameter validated.

pub(crate) fn cdf_unchecked<T: Scalar>(family: FamilyId, theta: T, u: T, v: T) -> T {
    let kind = family.kind();
    let one = T::one();
    match family.rotation() {
        Rotation::R0 => base::cdf(kind, theta, u, v),
        Rotation::R90 => v - base::cdf(kind, theta, one - u, v),
        Rotation::R180 => u + v - one + base::cdf(kind, theta, one - u, one - v),
        Rotation::R270 => u - base::cdf(kind, theta, u, one - v),
    }
    .max(T::zero())
    .min(one)
}

pub(crate) fn log_pdf_unchecked<T: Scalar>(family: FamilyId, theta: T, u: T, v: T) -> T {
    let (fu, fv) = family.rotation().flips();
    let bu = if fu { T::one() - u } else { u };
    let bv = if fv { T::one() - v } else { v };
    base::log_pdf(family.kind(), theta, bu, bv)
}

pub(crate) fn h_unchecked<T: Scalar>(family: FamilyId, theta: T, u: T, v: T, which: HFunc) -> T {
    let (fu, fv) = family.rotation().flips();
    let bu = if fu { T::one() - u } else { u };
    let bv = if fv { T::one() - v } else { v };
    // Base families are exchangeable, so ∂C0(u,v)/∂u = h0(v | u).
    let (value, flipped) = match which {
        HFunc::UGivenV => (base::h(family.kind(), theta, bu, bv), fu),
        HFunc::VGivenU => (base::h(family.kind(), theta, bv, bu), fv),
    };
    if flipped {
        T::one() - value
    } else {
        value
    }
}

pub(crate) fn hinv_unchecked<T: Scalar>(
    family: FamilyId,
    theta: T,
    w: T,
    given: T,
    which: HFunc,
) -> Result<T> {
    let (fu, fv) = family.rotation().flips();
    let (flip_free, flip_given) = match which {
        HFunc::UGivenV => (fu, fv),
        HFunc::VGivenU => (fv, fu),
    };
    let g = if flip_given { T::one() - given } else { given };
    let target = if flip_free { T::one() - w } else { w };
    let x = base::h_inverse(family.kind(), theta, target.clamp_unit(), g)?;
    Ok(if flip_free { T::one() - x } else { x })
}

pub(crate) fn tau_unchecked<T: Scalar>(family: FamilyId, theta: T) -> T {
    let t = base::tau(family.kind(), theta);
    if family.rotation().is_negative() {
        -t
    } else {
        t
    }
}

/// Copula distribution function `C(u, v)`.
pub fn cop_cdf<T: Scalar>(family: FamilyId, theta: T, p: UPair<T>) -> Result<T> {
    check(family, theta)?;
    Ok(cdf_unchecked(family, theta, p.u, p.v))
}

/// Copula density `c(u, v)`.
pub fn cop_pdf<T: Scalar>(family: FamilyId, theta: T, p: UPair<T>) -> Result<T> {
    check(family, theta)?;
    Ok(log_pdf_unchecked(family, theta, p.u, p.v).exp())
}

/// Conditional distribution function of one argument given the other.
pub fn hfunc<T: Scalar>(family: FamilyId, theta: T, p: UPair<T>, which: HFunc) -> Result<T> {
    check(family, theta)?;
    Ok(h_unchecked(family, theta, p.u, p.v, which))
}

/// Inverse of [`hfunc`] in its free argument: for `UGivenV` returns `u` with
/// `h(u | given) = w`; for `VGivenU` returns `v` with `h(v | given) = w`.
pub fn hinv<T: Scalar>(family: FamilyId, theta: T, w: T, given: T, which: HFunc) -> Result<T> {
    check(family, theta)?;
    hinv_unchecked(family, theta, w.clamp_unit(), given.clamp_unit(), which)
}

/// Population Kendall's tau of the family at `theta`.
pub fn param_to_tau<T: Scalar>(family: FamilyId, theta: T) -> Result<T> {
    check(family, theta)?;
    Ok(tau_unchecked(family, theta))
}

/// Parameter whose Kendall's tau equals `tau`.
///
/// Attainable values are those reached by parameters inside the fitting
/// bounds of [`FamilyId::fit_bounds`], extended to the independence end point
/// for Gaussian, Gumbel and Joe.
pub fn tau_to_param<T: Scalar>(family: FamilyId, tau: T) -> Result<T> {
    let (lo, hi) = tau_range::<T>(family);
    let unattainable = || Error::UnattainableTau {
        family,
        tau: tau.as_f64(),
        lo: lo.as_f64(),
        hi: hi.as_f64(),
    };
    if !tau.is_finite() || tau < lo || tau > hi {
        return Err(unattainable());
    }
    let base_tau = if family.rotation().is_negative() { -tau } else { tau };
    let two = T::lit(2.0);
    let theta = match family.kind() {
        FamilyKind::Independence => T::zero(),
        FamilyKind::Gaussian => (T::PI() * base_tau / two).sin(),
        FamilyKind::Clayton => two * base_tau / (T::one() - base_tau),
        FamilyKind::Gumbel => (T::one() - base_tau).recip(),
        FamilyKind::Joe if base_tau == T::zero() => T::one(),
        FamilyKind::Frank | FamilyKind::Joe => {
            let (blo, bhi) = if family.kind() == FamilyKind::Joe {
                (T::one(), T::lit(50.0))
            } else if base_tau < T::zero() {
                (T::lit(-35.0), T::lit(-FRANK_MIN_ABS))
            } else {
                (T::lit(FRANK_MIN_ABS), T::lit(35.0))
            };
            let f = |th: T| base::tau(family.kind(), th) - base_tau;
            brent_root(f, blo, bhi, T::tol(1e-13), 200).ok_or_else(unattainable)?
        }
    };
    check(family, theta).map_err(|_| unattainable())?;
    Ok(theta)
}

/// Closed range of Kendall's tau accepted by [`tau_to_param`].
pub fn tau_range<T: Scalar>(family: FamilyId) -> (T, T) {
    let (lo, hi) = match family.kind() {
        FamilyKind::Independence => (T::zero(), T::zero()),
        FamilyKind::Gaussian => {
            let t = base::tau(FamilyKind::Gaussian, T::lit(0.9999));
            (-t, t)
        }
        FamilyKind::Clayton => (
            base::tau(FamilyKind::Clayton, T::lit(1e-4)),
            base::tau(FamilyKind::Clayton, T::lit(50.0)),
        ),
        FamilyKind::Gumbel | FamilyKind::Joe => (T::zero(), base::tau(family.kind(), T::lit(50.0))),
        FamilyKind::Frank => {
            let t = base::tau(FamilyKind::Frank, T::lit(35.0));
            (-t, t)
        }
    };
    if family.rotation().is_negative() {
        (-hi, -lo)
    } else {
        (lo, hi)
    }
}

/// A fitted (or explicitly specified) pair copula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PairCopulaRepr<T>", into = "PairCopulaRepr<T>")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct PairCopula<T> {
    family: FamilyId,
    theta: T,
    n_obs: usize,
    loglik: T,
    aic: T,
    tau: T,
}

#[derive(Serialize, Deserialize)]
struct PairCopulaRepr<T> {
    family: FamilyId,
    theta: T,
    loglik: T,
    aic: T,
    tau: T,
    n_obs: usize,
}

impl<T: Scalar> From<PairCopula<T>> for PairCopulaRepr<T> {
    fn from(p: PairCopula<T>) -> Self {
        PairCopulaRepr {
            family: p.family,
            theta: p.theta,
            loglik: p.loglik,
            aic: p.aic,
            tau: p.tau,
            n_obs: p.n_obs,
        }
    }
}

impl<T: Scalar> TryFrom<PairCopulaRepr<T>> for PairCopula<T> {
    type Error = Error;

    fn try_from(r: PairCopulaRepr<T>) -> Result<Self> {
        let mut p = PairCopula::new(r.family, r.theta)?;
        p.n_obs = r.n_obs;
        p.loglik = r.loglik;
        p.aic = r.aic;
        Ok(p)
    }
}

impl<T: Scalar> PairCopula<T> {
    /// A copula with the given parameter and no fit statistics.
    pub fn new(family: FamilyId, theta: T) -> Result<Self> {
        let theta = if family.kind() == FamilyKind::Independence {
            T::zero()
        } else {
            theta
        };
        check(family, theta)?;
        Ok(PairCopula {
            family,
            theta,
            n_obs: 0,
            loglik: T::zero(),
            aic: T::lit(2.0 * family.n_params() as f64),
            tau: tau_unchecked(family, theta),
        })
    }

    pub fn independence() -> Self {
        PairCopula::new(FamilyId::INDEPENDENCE, T::zero()).expect("independence is always valid")
    }

    pub(crate) fn with_fit(family: FamilyId, theta: T, n_obs: usize, loglik: T) -> Result<Self> {
        let mut p = PairCopula::new(family, theta)?;
        p.n_obs = n_obs;
        p.loglik = loglik;
        p.aic = -T::lit(2.0) * loglik + T::lit(2.0 * family.n_params() as f64);
        Ok(p)
    }

    pub fn family(&self) -> FamilyId {
        self.family
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn loglik(&self) -> T {
        self.loglik
    }

    pub fn aic(&self) -> T {
        self.aic
    }

    pub fn tau(&self) -> T {
        self.tau
    }

    pub fn is_independence(&self) -> bool {
        self.family.kind() == FamilyKind::Independence
    }

    pub fn cdf(&self, u: T, v: T) -> T {
        cdf_unchecked(self.family, self.theta, u.clamp_unit(), v.clamp_unit())
    }

    pub fn log_pdf(&self, u: T, v: T) -> T {
        if self.is_independence() {
            return T::zero();
        }
        log_pdf_unchecked(self.family, self.theta, u.clamp_unit(), v.clamp_unit())
    }

    pub fn pdf(&self, u: T, v: T) -> T {
        self.log_pdf(u, v).exp()
    }

    /// `h(u | v)`.
    pub fn h_u_given_v(&self, u: T, v: T) -> T {
        if self.is_independence() {
            return u.clamp_unit();
        }
        h_unchecked(self.family, self.theta, u.clamp_unit(), v.clamp_unit(), HFunc::UGivenV)
    }

    /// `h(v | u)`.
    pub fn h_v_given_u(&self, u: T, v: T) -> T {
        if self.is_independence() {
            return v.clamp_unit();
        }
        h_unchecked(self.family, self.theta, u.clamp_unit(), v.clamp_unit(), HFunc::VGivenU)
    }

    /// `u` such that `h(u | v) = w`.
    pub fn hinv_u_given_v(&self, w: T, v: T) -> Result<T> {
        if self.is_independence() {
            return Ok(w.clamp_unit());
        }
        hinv_unchecked(self.family, self.theta, w.clamp_unit(), v.clamp_unit(), HFunc::UGivenV)
    }

    /// `v` such that `h(v | u) = w`.
    pub fn hinv_v_given_u(&self, w: T, u: T) -> Result<T> {
        if self.is_independence() {
            return Ok(w.clamp_unit());
        }
        hinv_unchecked(self.family, self.theta, w.clamp_unit(), u.clamp_unit(), HFunc::VGivenU)
    }

    /// Sum of log-densities over `data`.
    pub fn loglik_of(&self, data: &[UPair<T>]) -> T {
        data.iter().map(|p| self.log_pdf(p.u, p.v)).sum()
    }
}
