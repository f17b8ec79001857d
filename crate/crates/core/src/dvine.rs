//! Single-response D-vine regression.
//!
//! The response `V` is node 0 of a path `V - U_1 - ... - U_q`, so it is a leaf
//! in every tree and `F(V | U)` follows from h-function recursion alone.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{FamilyId, PairCopula};
use crate::error::{Error, Result, ResultExt};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::vine::{
    name_order, uniforms, validate_inputs, PredictorPath, ResponseChain, SelectionState,
};

/// Conditioning values on the probability scale, aligned with a model's order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> ConditioningVector<T> {
    /// Values must lie in `[0, 1]`; they are clamped to the open interval.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(x) = values.iter().find(|x| !(**x >= T::zero() && **x <= T::one())) {
            return Err(Error::InvalidInput(format!(
                "conditioning value {x} outside [0, 1]"
            )));
        }
        Ok(ConditioningVector {
            values: values.into_iter().map(Scalar::clamp_unit).collect(),
        })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn check_len(&self, q: usize) -> Result<()> {
        if self.values.len() != q {
            return Err(Error::LengthMismatch {
                what: "conditioning vector".into(),
                expected: q,
                got: self.values.len(),
            });
        }
        Ok(())
    }
}

/// A fitted D-vine with the response as leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DVineRepr<T>", into = "DVineRepr<T>")]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub struct DVineModel<T: Scalar> {
    order: Vec<String>,
    path: PredictorPath<T>,
    chain: ResponseChain<T>,
    cll_trace: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
struct DVineRepr<T> {
    order: Vec<String>,
    trees: Vec<Vec<PairCopula<T>>>,
    cll_trace: Vec<T>,
}

impl<T: Scalar> From<DVineModel<T>> for DVineRepr<T> {
    fn from(m: DVineModel<T>) -> Self {
        DVineRepr {
            trees: m.trees(),
            order: m.order,
            cll_trace: m.cll_trace,
        }
    }
}

impl<T: Scalar> TryFrom<DVineRepr<T>> for DVineModel<T> {
    type Error = Error;

    fn try_from(r: DVineRepr<T>) -> Result<Self> {
        let mut m = DVineModel::new(r.order, r.trees)?;
        m.cll_trace = r.cll_trace;
        Ok(m)
    }
}

impl<T: Scalar> DVineModel<T> {
    /// Assembles a model from its trees. Tree `k` (from 1) lists the copula
    /// of `(V, U_k)` first, then the predictor edges `(U_i, U_{i+k})`.
    pub fn new(order: Vec<String>, trees: Vec<Vec<PairCopula<T>>>) -> Result<Self> {
        let q = order.len();
        if trees.len() != q {
            return Err(Error::LengthMismatch {
                what: "D-vine trees".into(),
                expected: q,
                got: trees.len(),
            });
        }
        let mut response = Vec::with_capacity(q);
        let mut levels = Vec::with_capacity(q);
        for (k, mut tree) in trees.into_iter().enumerate() {
            if tree.len() != q - k {
                return Err(Error::InvalidInput(format!(
                    "tree {} holds {} copulas, expected {}",
                    k + 1,
                    tree.len(),
                    q - k
                )));
            }
            let rest = tree.split_off(1);
            response.push(tree.pop().expect("tree is non-empty"));
            if k + 1 < q {
                levels.push(rest);
            }
        }
        Ok(DVineModel {
            order,
            path: PredictorPath::from_levels(q, levels)?,
            chain: ResponseChain::new(response),
            cll_trace: Vec::new(),
        })
    }

    pub(crate) fn from_parts(
        order: Vec<String>,
        path: PredictorPath<T>,
        chain: ResponseChain<T>,
        cll_trace: Vec<T>,
    ) -> Self {
        DVineModel {
            order,
            path,
            chain,
            cll_trace,
        }
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

    /// Copulas of `(V, U_k)` given `U_{1..k-1}`, for `k = 1..q`.
    pub fn response_edges(&self) -> &[PairCopula<T>] {
        self.chain.edges()
    }

    /// Tree-by-tree view, response edge first in each tree.
    pub fn trees(&self) -> Vec<Vec<PairCopula<T>>> {
        (0..self.q())
            .map(|k| {
                let mut tree = vec![self.chain.edges()[k].clone()];
                if let Some(level) = self.path.levels().get(k) {
                    tree.extend(level.iter().cloned());
                }
                tree
            })
            .collect()
    }

    pub fn n_copulas(&self) -> usize {
        self.chain.edges().len() + self.path.n_copulas()
    }

    /// `C_{V|U}(v | u)` by h-function recursion.
    pub fn cond_cdf(&self, v: T, u: &ConditioningVector<T>) -> Result<T> {
        u.check_len(self.q())?;
        let r = self.path.transforms(u.values());
        Ok(self.chain.cdf(v, &r))
    }

    /// Conditional density `c_{V|U}(v | u)`.
    pub fn cond_density(&self, v: T, u: &ConditioningVector<T>) -> Result<T> {
        u.check_len(self.q())?;
        let r = self.path.transforms(u.values());
        Ok(self.chain.log_density_and_cdf(v, &r).0.exp())
    }

    /// Inverse of [`cond_cdf`](Self::cond_cdf) in `v`.
    pub fn cond_quantile(&self, alpha: T, u: &ConditioningVector<T>) -> Result<T> {
        if !(alpha > T::zero() && alpha < T::one()) {
            return Err(Error::InvalidInput(format!("alpha = {alpha} not in (0, 1)")));
        }
        u.check_len(self.q())?;
        let r = self.path.transforms(u.values());
        self.chain.quantile(alpha, &r)
    }

    /// `Σ log c_{V|U}(v_i | u_i)`; `predictors_u` is one column per ordered
    /// predictor.
    pub fn cond_loglik(&self, response_u: &[T], predictors_u: &[Vec<T>]) -> Result<T> {
        if predictors_u.len() != self.q() {
            return Err(Error::LengthMismatch {
                what: "predictor columns".into(),
                expected: self.q(),
                got: predictors_u.len(),
            });
        }
        let n = response_u.len();
        if let Some(c) = predictors_u.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch {
                what: "predictor column".into(),
                expected: n,
                got: c.len(),
            });
        }
        let mut u = vec![T::zero(); self.q()];
        let mut total = T::zero();
        for (i, &v) in response_u.iter().enumerate() {
            for (slot, col) in u.iter_mut().zip(predictors_u) {
                *slot = col[i];
            }
            let r = self.path.transforms(&u);
            total = total + self.chain.log_density_and_cdf(v, &r).0;
        }
        Ok(total)
    }

    /// Draws rows `(v, u_1, ..., u_q)` by inverse Rosenblatt transform.
    pub fn simulate(&self, n: usize, seed: u64) -> Result<Vec<Vec<T>>> {
        let mut rng = stream_rng(seed, 0);
        let q = self.q();
        (0..n)
            .map(|_| {
                let w: Vec<T> = uniforms(&mut rng, q + 1);
                let (u, r) = self.path.sample(&w[1..])?;
                let mut row = Vec::with_capacity(q + 1);
                row.push(self.chain.quantile(w[0], &r)?);
                row.extend(u);
                Ok(row)
            })
            .collect()
    }
}

/// Forward selection of `max_p` predictors maximising the conditional
/// log-likelihood of the response.
pub fn fit_dvine<T: Scalar>(
    response_u: &[T],
    predictors_u: &[(String, Vec<T>)],
    max_p: usize,
    candidates: &[FamilyId],
) -> Result<DVineModel<T>> {
    validate_inputs(&[("response", response_u)], predictors_u, max_p)?;
    let mut state = SelectionState::new(vec![response_u.to_vec()]);
    let mut remaining = name_order(predictors_u);
    let mut order = Vec::with_capacity(max_p);
    let mut trace = Vec::with_capacity(max_p);
    let mut cll = T::zero();
    for step in 1..=max_p {
        let results: Vec<_> = remaining
            .par_iter()
            .map(|&j| {
                let (name, col) = &predictors_u[j];
                state
                    .extend(col, candidates)
                    .context_with(|| format!("selection step {step}, candidate `{name}`"))
            })
            .collect();
        let mut best: Option<(usize, T)> = None;
        let mut exts = Vec::with_capacity(results.len());
        for (pos, res) in results.into_iter().enumerate() {
            let ext = res?;
            let gain = ext.response_edges[0].loglik();
            if best.map_or(true, |(_, g)| gain > g) {
                best = Some((pos, gain));
            }
            exts.push(ext);
        }
        let (pos, gain) = best.expect("max_p <= number of predictors");
        let ext = exts.swap_remove(pos);
        state.accept(ext);
        order.push(predictors_u[remaining.remove(pos)].0.clone());
        cll = cll + gain;
        trace.push(cll);
    }
    let SelectionState { path, mut chains, .. } = state;
    Ok(DVineModel::from_parts(order, path, chains.remove(0), trace))
}
