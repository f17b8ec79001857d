//! Building blocks shared by the D-vine and Y-vine regressions.
//!
//! Predictors `U_1..U_q` (in selection order) form a D-vine path whose edge
//! `(i, j)` joins `U_i` and `U_j` given `U_{i+1..j-1}`. Writing
//! `L[i][j] = F(U_i | U_{i+1..j})` and `R[i][j] = F(U_j | U_{i..j-1})`, edge
//! `(i, j)` is evaluated at `(L[i][j-1], R[i+1][j])` and yields
//! `L[i][j] = h(u|v)`, `R[i][j] = h(v|u)`. The transforms
//! `r_t = R[1][t] = F(U_t | U_{1..t-1})` feed each response chain, a sequence
//! of copulas `C_{V,U_t; U_{1..t-1}}` evaluated at `(F(V | U_{1..t-1}), r_t)`.

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::copula::{select_family, FamilyId, PairCopula, UPair};
use crate::error::{Error, Result, ResultExt};
use crate::scalar::Scalar;

/// Pair copulas among the ordered predictors.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PredictorPath<T> {
    q: usize,
    // levels[k-1][i-1] is edge (i, i+k), predictors numbered from 1.
    levels: Vec<Vec<PairCopula<T>>>,
}

impl<T: Scalar> PredictorPath<T> {
    pub fn empty() -> Self {
        PredictorPath { q: 0, levels: Vec::new() }
    }

    /// Rebuilds from per-tree levels; level `k` must hold `q - k` copulas.
    pub fn from_levels(q: usize, levels: Vec<Vec<PairCopula<T>>>) -> Result<Self> {
        let mut levels = levels;
        while levels.len() < q.saturating_sub(1) {
            levels.push(Vec::new());
        }
        let ok = levels.len() == q.saturating_sub(1)
            && levels.iter().enumerate().all(|(k, l)| l.len() == q - (k + 1));
        if !ok {
            return Err(Error::InvalidInput(format!(
                "predictor trees do not form a path on {q} nodes"
            )));
        }
        Ok(PredictorPath { q, levels })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn levels(&self) -> &[Vec<PairCopula<T>>] {
        &self.levels
    }

    pub fn n_copulas(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    fn edge(&self, i: usize, j: usize) -> &PairCopula<T> {
        &self.levels[j - i - 1][i - 1]
    }

    fn push_node(&mut self, new_edges: Vec<PairCopula<T>>) {
        // new_edges[i-1] is edge (i, q+1).
        debug_assert_eq!(new_edges.len(), self.q);
        let q1 = self.q + 1;
        for (idx, e) in new_edges.into_iter().enumerate() {
            let k = q1 - (idx + 1);
            if self.levels.len() < k {
                self.levels.resize_with(k, Vec::new);
            }
            self.levels[k - 1].push(e);
        }
        self.q = q1;
    }

    /// `r_t = F(U_t | U_{1..t-1})` for `t = 1..q`.
    pub fn transforms(&self, u: &[T]) -> Vec<T> {
        debug_assert_eq!(u.len(), self.q);
        let mut r = Vec::with_capacity(self.q);
        let mut prev: Vec<T> = Vec::with_capacity(self.q);
        for j in 1..=self.q {
            let uj = u[j - 1].clamp_unit();
            let mut cur = vec![T::zero(); j];
            cur[j - 1] = uj;
            let mut right = uj;
            for i in (1..j).rev() {
                let e = self.edge(i, j);
                let a = prev[i - 1];
                cur[i - 1] = e.h_u_given_v(a, right);
                right = e.h_v_given_u(a, right);
            }
            r.push(right);
            prev = cur;
        }
        r
    }

    /// Inverse Rosenblatt transform: maps independent uniforms `w` to
    /// predictor values, returning `(u, r)`.
    pub fn sample(&self, w: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        let mut u = Vec::with_capacity(self.q);
        let mut r = Vec::with_capacity(self.q);
        let mut prev: Vec<T> = Vec::with_capacity(self.q);
        for j in 1..=self.q {
            // right[i] holds R[i][j] for i = 1..=j.
            let mut right = vec![T::zero(); j + 1];
            right[1] = w[j - 1].clamp_unit();
            for i in 1..j {
                right[i + 1] = self.edge(i, j).hinv_v_given_u(right[i], prev[i - 1])?;
            }
            let uj = right[j];
            let mut cur = vec![T::zero(); j];
            cur[j - 1] = uj;
            for i in 1..j {
                cur[i - 1] = self.edge(i, j).h_u_given_v(prev[i - 1], right[i + 1]);
            }
            u.push(uj);
            r.push(right[1]);
            prev = cur;
        }
        Ok((u, r))
    }
}

/// Copulas linking one response to each ordered predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
#[serde(bound(serialize = "T: Scalar", deserialize = "T: Scalar"))]
pub(crate) struct ResponseChain<T> {
    edges: Vec<PairCopula<T>>,
}

impl<T: Scalar> ResponseChain<T> {
    pub fn new(edges: Vec<PairCopula<T>>) -> Self {
        ResponseChain { edges }
    }

    pub fn edges(&self) -> &[PairCopula<T>] {
        &self.edges
    }

    /// `F(V | U_{1..q})` at `v`.
    pub fn cdf(&self, v: T, r: &[T]) -> T {
        let mut a = v.clamp_unit();
        for (e, &rt) in self.edges.iter().zip(r) {
            a = e.h_u_given_v(a, rt);
        }
        a
    }

    /// `(log c_{V|U}(v), F(V | U)(v))`.
    pub fn log_density_and_cdf(&self, v: T, r: &[T]) -> (T, T) {
        let mut a = v.clamp_unit();
        let mut ld = T::zero();
        for (e, &rt) in self.edges.iter().zip(r) {
            ld = ld + e.log_pdf(a, rt);
            a = e.h_u_given_v(a, rt);
        }
        (ld, a)
    }

    /// `v` with `F(V | U)(v) = alpha`, by inverting the chain.
    pub fn quantile(&self, alpha: T, r: &[T]) -> Result<T> {
        let mut w = alpha.clamp_unit();
        for (e, &rt) in self.edges.iter().zip(r).rev() {
            w = e.hinv_u_given_v(w, rt)?;
        }
        Ok(w)
    }

    fn push(&mut self, e: PairCopula<T>) {
        self.edges.push(e);
    }
}

/// Column-wise state of forward selection: `L[i][q]` for every predictor node
/// and the current `F(V | U_{1..q})` of each response.
#[derive(Debug, Clone)]
pub(crate) struct SelectionState<T> {
    pub path: PredictorPath<T>,
    left: Vec<Vec<T>>,
    pub chains: Vec<ResponseChain<T>>,
    pub responses: Vec<Vec<T>>,
}

/// Result of tentatively adding one predictor.
#[derive(Debug, Clone)]
pub(crate) struct Extension<T> {
    path_edges: Vec<PairCopula<T>>,
    left: Vec<Vec<T>>,
    pub response_edges: Vec<PairCopula<T>>,
    pub responses: Vec<Vec<T>>,
}

fn pairs<T: Scalar>(a: &[T], b: &[T]) -> Vec<UPair<T>> {
    a.iter().zip(b).map(|(&x, &y)| UPair::new(x, y)).collect()
}

impl<T: Scalar> SelectionState<T> {
    pub fn new(responses: Vec<Vec<T>>) -> Self {
        let k = responses.len();
        SelectionState {
            path: PredictorPath::empty(),
            left: Vec::new(),
            chains: vec![ResponseChain::new(Vec::new()); k],
            responses: responses
                .into_iter()
                .map(|c| c.into_iter().map(|x| x.clamp_unit()).collect())
                .collect(),
        }
    }

    /// Fits the copulas that attach predictor column `x` as node `q + 1`.
    pub fn extend(&self, x: &[T], candidates: &[FamilyId]) -> Result<Extension<T>> {
        let q = self.path.q();
        let x: Vec<T> = x.iter().map(|v| v.clamp_unit()).collect();
        let mut right = x.clone();
        let mut new_left = vec![Vec::new(); q + 1];
        let mut path_edges = vec![PairCopula::independence(); q];
        for i in (1..=q).rev() {
            let a = &self.left[i - 1];
            let e = select_family(&pairs(a, &right), candidates)
                .context_with(|| format!("predictor edge ({i}, {})", q + 1))?;
            new_left[i - 1] = a.iter().zip(&right).map(|(&p, &b)| e.h_u_given_v(p, b)).collect();
            right = a.iter().zip(&right).map(|(&p, &b)| e.h_v_given_u(p, b)).collect();
            path_edges[i - 1] = e;
        }
        new_left[q] = x;
        let mut response_edges = Vec::with_capacity(self.responses.len());
        let mut responses = Vec::with_capacity(self.responses.len());
        for (k, v) in self.responses.iter().enumerate() {
            let e = select_family(&pairs(v, &right), candidates)
                .context_with(|| format!("response {} edge {}", k + 1, q + 1))?;
            responses.push(v.iter().zip(&right).map(|(&a, &b)| e.h_u_given_v(a, b)).collect());
            response_edges.push(e);
        }
        Ok(Extension {
            path_edges,
            left: new_left,
            response_edges,
            responses,
        })
    }

    pub fn accept(&mut self, ext: Extension<T>) {
        self.path.push_node(ext.path_edges);
        self.left = ext.left;
        for (chain, e) in self.chains.iter_mut().zip(ext.response_edges) {
            chain.push(e);
        }
        self.responses = ext.responses;
    }
}

/// Checks the shared preconditions of forward selection.
pub(crate) fn validate_inputs<T: Scalar>(
    responses: &[(&str, &[T])],
    predictors: &[(String, Vec<T>)],
    max_p: usize,
) -> Result<usize> {
    const MIN_OBS: usize = 50;
    let n = responses[0].1.len();
    if n < MIN_OBS {
        return Err(Error::InvalidInput(format!(
            "vine regression needs at least {MIN_OBS} observations, got {n}"
        )));
    }
    if max_p > predictors.len() {
        return Err(Error::InvalidInput(format!(
            "max_p = {max_p} exceeds the {} available predictors",
            predictors.len()
        )));
    }
    let mut names: Vec<&str> = predictors.iter().map(|p| p.0.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput("duplicate predictor names".into()));
    }
    let cols = responses
        .iter()
        .map(|(name, c)| (*name, *c))
        .chain(predictors.iter().map(|(name, c)| (name.as_str(), c.as_slice())));
    for (name, col) in cols {
        if col.len() != n {
            return Err(Error::LengthMismatch {
                what: format!("column `{name}`"),
                expected: n,
                got: col.len(),
            });
        }
        if col.iter().any(|x| !(*x >= T::zero() && *x <= T::one())) {
            return Err(Error::InvalidInput(format!(
                "column `{name}` is not on the probability scale"
            )));
        }
        if col.iter().all(|&x| x == col[0]) {
            return Err(Error::Degenerate(format!("column `{name}` is constant")));
        }
    }
    Ok(n)
}

/// Predictor indices sorted by name: the order in which candidates are
/// scanned, so that ties go to the lexicographically smallest name.
pub(crate) fn name_order<T>(predictors: &[(String, Vec<T>)]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..predictors.len()).collect();
    idx.sort_by(|&a, &b| predictors[a].0.cmp(&predictors[b].0));
    idx
}

/// Independent uniforms from an open interval, as `T`.
pub(crate) fn uniforms<T: Scalar, R: Rng>(rng: &mut R, n: usize) -> Vec<T> {
    (0..n).map(|_| T::lit(rng.sample::<f64, _>(Open01))).collect()
}
