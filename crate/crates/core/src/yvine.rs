//! Bivariate-response Y-vine regression.
//!
//! Both responses hang off the predictor path as leaves: `V1` and `V2` each
//! get a chain of copulas with the ordered predictors, and a final copula
//! joins `F(V1 | U)` and `F(V2 | U)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{select_family, FamilyId, PairCopula, UPair};
use crate::dvine::{ConditioningVector, DVineModel};
use crate::error::{Error, Result, ResultExt};
use crate::quadrature::gauss_legendre_rule;
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::vine::{
    name_order, uniforms, validate_inputs, PredictorPath, ResponseChain, SelectionState,
};

/// Default node count for the bivariate conditional CDF.
pub const DEFAULT_NODES: usize = 50;

/// Which response a D-vine submodel keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Response {
    V1,
    V2,
}

/// Evaluation point for the joint conditional CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateEval<T> {
    pub v1: T,
    pub v2: T,
    pub u: ConditioningVector<T>,
}

impl<T: Scalar> BivariateEval<T> {
    pub fn new(v1: T, v2: T, u: ConditioningVector<T>) -> Result<Self> {
        for v in [v1, v2] {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::InvalidInput(format!("response value {v} outside [0, 1]")));
            }
        }
        Ok(BivariateEval {
            v1: v1.clamp_unit(),
            v2: v2.clamp_unit(),
            u,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "YVineRepr<T>", into = "YVineRepr<T>")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct YVineModel<T: Scalar> {
    order: Vec<String>,
    path: PredictorPath<T>,
    v1: ResponseChain<T>,
    v2: ResponseChain<T>,
    top: PairCopula<T>,
    cll_trace: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
struct YVineRepr<T> {
    order: Vec<String>,
    trees: Vec<Vec<PairCopula<T>>>,
    edges_v1: Vec<PairCopula<T>>,
    edges_v2: Vec<PairCopula<T>>,
    top_copula: PairCopula<T>,
    cll_trace: Vec<T>,
}

impl<T: Scalar> From<YVineModel<T>> for YVineRepr<T> {
    fn from(m: YVineModel<T>) -> Self {
        YVineRepr {
            trees: m.path.levels().to_vec(),
            edges_v1: m.v1.edges().to_vec(),
            edges_v2: m.v2.edges().to_vec(),
            top_copula: m.top,
            order: m.order,
            cll_trace: m.cll_trace,
        }
    }
}

impl<T: Scalar> TryFrom<YVineRepr<T>> for YVineModel<T> {
    type Error = Error;

    fn try_from(r: YVineRepr<T>) -> Result<Self> {
        let mut m = YVineModel::new(r.order, r.trees, r.edges_v1, r.edges_v2, r.top_copula)?;
        m.cll_trace = r.cll_trace;
        Ok(m)
    }
}

impl<T: Scalar> YVineModel<T> {
    /// `predictor_trees[k-1]` holds the edges `(U_i, U_{i+k})`;
    /// `edges_v*[k-1]` links a response to `U_k` given `U_{1..k-1}`.
    pub fn new(
        order: Vec<String>,
        predictor_trees: Vec<Vec<PairCopula<T>>>,
        edges_v1: Vec<PairCopula<T>>,
        edges_v2: Vec<PairCopula<T>>,
        top_copula: PairCopula<T>,
    ) -> Result<Self> {
        let q = order.len();
        for (what, e) in [("edges_v1", &edges_v1), ("edges_v2", &edges_v2)] {
            if e.len() != q {
                return Err(Error::LengthMismatch {
                    what: what.into(),
                    expected: q,
                    got: e.len(),
                });
            }
        }
        Ok(YVineModel {
            path: PredictorPath::from_levels(q, predictor_trees)?,
            order,
            v1: ResponseChain::new(edges_v1),
            v2: ResponseChain::new(edges_v2),
            top: top_copula,
            cll_trace: Vec::new(),
        })
    }

    pub fn order(&self) -> &[String] {
        &self.order
    }

    pub fn q(&self) -> usize {
        self.order.len()
    }

    pub fn cll_trace(&self) -> &[T] {
        &self.cll_trace
    }

    pub fn edges_v1(&self) -> &[PairCopula<T>] {
        self.v1.edges()
    }

    pub fn edges_v2(&self) -> &[PairCopula<T>] {
        self.v2.edges()
    }

    pub fn predictor_trees(&self) -> &[Vec<PairCopula<T>>] {
        self.path.levels()
    }

    pub fn top_copula(&self) -> &PairCopula<T> {
        &self.top
    }

    pub fn n_copulas(&self) -> usize {
        self.path.n_copulas() + self.v1.edges().len() + self.v2.edges().len() + 1
    }

    fn transforms(&self, u: &ConditioningVector<T>) -> Result<Vec<T>> {
        u.check_len(self.q())?;
        Ok(self.path.transforms(u.values()))
    }

    /// `C_{V1|U}(v1 | u)`.
    pub fn cond_cdf_v1(&self, v1: T, u: &ConditioningVector<T>) -> Result<T> {
        let r = self.transforms(u)?;
        Ok(self.v1.cdf(v1, &r))
    }

    /// `C_{V2|U}(v2 | u)`.
    pub fn cond_cdf_v2(&self, v2: T, u: &ConditioningVector<T>) -> Result<T> {
        let r = self.transforms(u)?;
        Ok(self.v2.cdf(v2, &r))
    }

    /// `c_{V2|U}(v2 | u)`: product of the `V2` edge densities.
    pub fn cond_density_v2(&self, v2: T, u: &ConditioningVector<T>) -> Result<T> {
        let r = self.transforms(u)?;
        Ok(self.v2.log_density_and_cdf(v2, &r).0.exp())
    }

    /// `c_{V1|V2,U}(v1 | v2, u)`: `V1` edge densities times the top copula
    /// density at the two conditional CDFs.
    pub fn cond_density_v1_given_v2(&self, v1: T, v2: T, u: &ConditioningVector<T>) -> Result<T> {
        let r = self.transforms(u)?;
        let (ld1, w1) = self.v1.log_density_and_cdf(v1, &r);
        let w2 = self.v2.cdf(v2, &r);
        Ok((ld1 + self.top.log_pdf(w1, w2)).exp())
    }

    /// `C_{V1|V2,U}(v1 | v2, u)`.
    ///
    /// The integral of [`cond_density_v1_given_v2`](Self::cond_density_v1_given_v2)
    /// over `(0, v1)` reduces, after substituting `a = C_{V1|U}`, to the top
    /// copula's h-function, which is evaluated directly.
    pub fn cond_cdf_v1_given_v2(&self, v1: T, v2: T, u: &ConditioningVector<T>) -> Result<T> {
        let r = self.transforms(u)?;
        let w1 = self.v1.cdf(v1, &r);
        let w2 = self.v2.cdf(v2, &r);
        Ok(self.top.h_u_given_v(w1, w2))
    }

    /// `P(V1 <= v1, V2 <= v2 | u)` with the default node count.
    pub fn bivariate_cond_cdf(&self, e: &BivariateEval<T>) -> Result<T> {
        self.bivariate_cond_cdf_with_nodes(e, DEFAULT_NODES)
    }

    /// `∫_0^{v2} c_{V2|U}(s) C_{V1|V2,U}(v1 | s) ds` by Gauss-Legendre
    /// quadrature on the probability scale `z = C_{V2|U}(s)`, clamped to the
    /// Fréchet bounds of the two conditional margins.
    pub fn bivariate_cond_cdf_with_nodes(&self, e: &BivariateEval<T>, nodes: usize) -> Result<T> {
        let r = self.transforms(&e.u)?;
        let w1 = self.v1.cdf(e.v1, &r);
        let w2 = self.v2.cdf(e.v2, &r);
        let half = w2 * T::lit(0.5);
        let mut acc = T::zero();
        for &(x, w) in gauss_legendre_rule(nodes).iter() {
            let z = half * (T::one() + T::lit(x));
            acc = acc + T::lit(w) * self.top.h_u_given_v(w1, z);
        }
        let lower = (w1 + w2 - T::one()).max(T::zero());
        Ok((acc * half).max(lower).min(w1.min(w2)))
    }

    /// Family, parameter and Kendall's tau of the top copula.
    pub fn conditional_tau(&self) -> (FamilyId, T, T) {
        (self.top.family(), self.top.theta(), self.top.tau())
    }

    /// Draws rows `(v1, v2, u_1, ..., u_q)` by inverse Rosenblatt transform.
    pub fn simulate(&self, n: usize, seed: u64) -> Result<Vec<Vec<T>>> {
        let mut rng = stream_rng(seed, 0);
        let q = self.q();
        (0..n)
            .map(|_| {
                let w: Vec<T> = uniforms(&mut rng, q + 2);
                let (u, r) = self.path.sample(&w[2..])?;
                let (v1, v2) = self.sample_from_transforms(w[0], w[1], &r)?;
                let mut row = Vec::with_capacity(q + 2);
                row.push(v1);
                row.push(v2);
                row.extend(u);
                Ok(row)
            })
            .collect()
    }

    /// Responses given `u`, from independent uniforms `w1`, `w2`.
    pub fn sample_given(&self, w1: T, w2: T, u: &ConditioningVector<T>) -> Result<(T, T)> {
        let r = self.transforms(u)?;
        self.sample_from_transforms(w1, w2, &r)
    }

    fn sample_from_transforms(&self, w1: T, w2: T, r: &[T]) -> Result<(T, T)> {
        let a = self.top.hinv_u_given_v(w1, w2)?;
        Ok((self.v1.quantile(a, r)?, self.v2.quantile(w2, r)?))
    }

    /// The D-vine regression of one response obtained by deleting the other.
    pub fn dvine_submodel(&self, keep: Response) -> DVineModel<T> {
        let chain = match keep {
            Response::V1 => self.v1.clone(),
            Response::V2 => self.v2.clone(),
        };
        DVineModel::from_parts(self.order.clone(), self.path.clone(), chain, Vec::new())
    }
}

/// Forward selection of `max_p` predictors maximising the bivariate
/// conditional log-likelihood `Σ log c_{V2|U} + log c_{V1|V2,U}`.
pub fn fit_yvine<T: Scalar>(
    v1_u: &[T],
    v2_u: &[T],
    predictors_u: &[(String, Vec<T>)],
    max_p: usize,
    candidates: &[FamilyId],
) -> Result<YVineModel<T>> {
    validate_inputs(&[("v1", v1_u), ("v2", v2_u)], predictors_u, max_p)?;
    let fit_top = |a: &[T], b: &[T]| -> Result<PairCopula<T>> {
        let data: Vec<UPair<T>> = a.iter().zip(b).map(|(&x, &y)| UPair::new(x, y)).collect();
        select_family(&data, candidates)
    };
    let mut state = SelectionState::new(vec![v1_u.to_vec(), v2_u.to_vec()]);
    let mut top = fit_top(&state.responses[0], &state.responses[1])
        .context_with(|| "top copula".into())?;
    let mut remaining = name_order(predictors_u);
    let mut order = Vec::with_capacity(max_p);
    let mut trace = Vec::with_capacity(max_p);
    let mut edges_ll = T::zero();
    for step in 1..=max_p {
        let results: Vec<_> = remaining
            .par_iter()
            .map(|&j| {
                let ext = state.extend(&predictors_u[j].1, candidates)?;
                let top = fit_top(&ext.responses[0], &ext.responses[1])
                    .context_with(|| "top copula".into())?;
                Ok((ext, top))
            })
            .collect::<Vec<Result<_>>>();
        let mut best: Option<(usize, T)> = None;
        let mut fits = Vec::with_capacity(results.len());
        for (pos, res) in results.into_iter().enumerate() {
            let name = &predictors_u[remaining[pos]].0;
            let (ext, top) =
                res.context_with(|| format!("selection step {step}, candidate `{name}`"))?;
            let gain = ext.response_edges[0].loglik() + ext.response_edges[1].loglik();
            let crit = gain + top.loglik();
            if best.map_or(true, |(_, c)| crit > c) {
                best = Some((pos, crit));
            }
            fits.push((ext, top, gain));
        }
        let (pos, _) = best.expect("max_p <= number of predictors");
        let (ext, new_top, gain) = fits.swap_remove(pos);
        state.accept(ext);
        top = new_top;
        order.push(predictors_u[remaining.remove(pos)].0.clone());
        edges_ll = edges_ll + gain;
        trace.push(edges_ll + top.loglik());
    }
    let SelectionState { path, mut chains, .. } = state;
    let v2 = chains.pop().expect("two responses");
    let v1 = chains.pop().expect("two responses");
    Ok(YVineModel {
        order,
        path,
        v1,
        v2,
        top,
        cll_trace: trace,
    })
}
