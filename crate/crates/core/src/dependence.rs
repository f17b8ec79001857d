//! Rank-based dependence: Kendall's tau-b and tau matrices.

use std::cmp::Ordering;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};
use crate::format::float17;
use crate::scalar::Scalar;

/// Kendall's tau-b in `O(n log n)` (Knight's algorithm).
///
/// Ties in either variable are corrected for. Errors on a length mismatch,
/// fewer than two observations, NaN input, or a variable that is constant.
pub fn kendall_tau<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            what: "kendall_tau input".into(),
            expected: x.len(),
            got: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidInput("Kendall's tau needs at least 2 observations".into()));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN in Kendall's tau input".into()));
    }
    let cmp = |a: &T, b: &T| a.partial_cmp(b).unwrap_or(Ordering::Equal);

    let mut pairs: Vec<(T, T)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| cmp(&a.0, &b.0).then_with(|| cmp(&a.1, &b.1)));

    let tot = (n as u64) * (n as u64 - 1) / 2;
    let (mut x_ties, mut joint_ties) = (0u64, 0u64);
    let (mut run_x, mut run_xy) = (1u64, 1u64);
    for i in 1..n {
        if pairs[i].0 == pairs[i - 1].0 {
            run_x += 1;
            if pairs[i].1 == pairs[i - 1].1 {
                run_xy += 1;
            } else {
                joint_ties += run_xy * (run_xy - 1) / 2;
                run_xy = 1;
            }
        } else {
            x_ties += run_x * (run_x - 1) / 2;
            joint_ties += run_xy * (run_xy - 1) / 2;
            run_x = 1;
            run_xy = 1;
        }
    }
    x_ties += run_x * (run_x - 1) / 2;
    joint_ties += run_xy * (run_xy - 1) / 2;

    let mut ys: Vec<T> = pairs.iter().map(|p| p.1).collect();
    let mut buf = ys.clone();
    let swaps = merge_count(&mut ys, &mut buf, &cmp);

    let mut y_ties = 0u64;
    let mut run = 1u64;
    for i in 1..n {
        if ys[i] == ys[i - 1] {
            run += 1;
        } else {
            y_ties += run * (run - 1) / 2;
            run = 1;
        }
    }
    y_ties += run * (run - 1) / 2;

    if x_ties == tot || y_ties == tot {
        return Err(Error::Degenerate("Kendall's tau of a constant variable".into()));
    }
    let num = tot as f64 - x_ties as f64 - y_ties as f64 + joint_ties as f64 - 2.0 * swaps as f64;
    let den = ((tot - x_ties) as f64).sqrt() * ((tot - y_ties) as f64).sqrt();
    Ok(T::lit((num / den).clamp(-1.0, 1.0)))
}

// Bottom-up merge sort returning the number of strict inversions.
fn merge_count<T: Copy, F: Fn(&T, &T) -> Ordering>(a: &mut Vec<T>, buf: &mut Vec<T>, cmp: &F) -> u64 {
    let n = a.len();
    let mut swaps = 0u64;
    let mut width = 1;
    while width < n {
        let mut start = 0;
        while start < n {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            let (mut i, mut j, mut k) = (start, mid, start);
            while i < mid && j < end {
                if cmp(&a[j], &a[i]) == Ordering::Less {
                    swaps += (mid - i) as u64;
                    buf[k] = a[j];
                    j += 1;
                } else {
                    buf[k] = a[i];
                    i += 1;
                }
                k += 1;
            }
            buf[k..k + mid - i].copy_from_slice(&a[i..mid]);
            k += mid - i;
            buf[k..k + end - j].copy_from_slice(&a[j..end]);
            start = end;
        }
        std::mem::swap(a, buf);
        width *= 2;
    }
    swaps
}

/// Symmetric matrix of pairwise Kendall's tau with a unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauMatrix<T> {
    pub names: Vec<String>,
    pub values: Vec<Vec<T>>,
}

impl<T: Scalar> TauMatrix<T> {
    pub fn get(&self, a: &str, b: &str) -> Option<T> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.values[i][j])
    }

    /// CSV with a header row and a leading name column.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec![String::new()];
        header.extend(self.names.iter().cloned());
        wtr.write_record(&header)?;
        for (name, row) in self.names.iter().zip(&self.values) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(|v| float17(v.as_f64())));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Pairwise Kendall's tau of named columns, computed in parallel.
pub fn tau_matrix<T: Scalar>(columns: &[(String, Vec<T>)]) -> Result<TauMatrix<T>> {
    let k = columns.len();
    if k < 2 {
        return Err(Error::InvalidInput("tau matrix needs at least 2 columns".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
    let taus = pairs
        .par_iter()
        .map(|&(i, j)| {
            kendall_tau(&columns[i].1, &columns[j].1)
                .context_with(|| format!("tau({}, {})", columns[i].0, columns[j].0))
        })
        .collect::<Result<Vec<T>>>()?;
    let mut values = vec![vec![T::one(); k]; k];
    for (&(i, j), t) in pairs.iter().zip(taus) {
        values[i][j] = t;
        values[j][i] = t;
    }
    Ok(TauMatrix {
        names: columns.iter().map(|c| c.0.clone()).collect(),
        values,
    })
}

/// Per-year Kendall's tau values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TauSeries {
    entries: Vec<(i32, f64)>,
}

impl TauSeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a year; years must be strictly increasing.
    pub fn push(&mut self, year: i32, tau: f64) -> Result<()> {
        if let Some(&(last, _)) = self.entries.last() {
            if year <= last {
                return Err(Error::InvalidInput(format!(
                    "tau series years must increase ({year} after {last})"
                )));
            }
        }
        if !(-1.0..=1.0).contains(&tau) {
            return Err(Error::InvalidInput(format!("tau {tau} outside [-1, 1]")));
        }
        self.entries.push((year, tau));
        Ok(())
    }

    pub fn entries(&self) -> &[(i32, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
