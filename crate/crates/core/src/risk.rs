//! Conditional exceedance risk, extreme-year flags, survival probabilities
//! and return periods.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dvine::{ConditioningVector, DVineModel};
use crate::error::{Error, Result, ResultExt};
use crate::format::float17;
use crate::marginals::{quantile_type7, KernelMarginal};
use crate::yvine::{BivariateEval, YVineModel};

pub const DEFAULT_Y_F: f64 = -2.0;
pub const DEFAULT_Y_D: f64 = -1.5;
pub const DEFAULT_FLAG_QUANTILE: f64 = 0.95;
pub const DEFAULT_FLAG_CUTOFF: f64 = 0.2;
pub const DEFAULT_RP_THRESHOLD: f64 = 0.5;

/// Frost and drought thresholds in index units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPair {
    pub y_f: f64,
    pub y_d: f64,
}

impl ThresholdPair {
    pub fn new(y_f: f64, y_d: f64) -> Result<Self> {
        if !(y_f.is_finite() && y_d.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "thresholds must be finite, got ({y_f}, {y_d})"
            )));
        }
        Ok(ThresholdPair { y_f, y_d })
    }
}

impl Default for ThresholdPair {
    fn default() -> Self {
        ThresholdPair {
            y_f: DEFAULT_Y_F,
            y_d: DEFAULT_Y_D,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskKind {
    Frost,
    Drought,
    Joint,
}

impl RiskKind {
    pub const ALL: [RiskKind; 3] = [RiskKind::Frost, RiskKind::Drought, RiskKind::Joint];

    pub fn as_str(self) -> &'static str {
        match self {
            RiskKind::Frost => "frost",
            RiskKind::Drought => "drought",
            RiskKind::Joint => "joint",
        }
    }
}

impl fmt::Display for RiskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RiskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RiskKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown risk kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellInfo {
    pub cell_id: u64,
    pub lat: f64,
    pub lon: f64,
}

/// Per-cell observations on the data scale, one column per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTable {
    pub cells: Vec<CellInfo>,
    pub columns: BTreeMap<String, Vec<f64>>,
}

impl CellTable {
    pub fn new(cells: Vec<CellInfo>, columns: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        for (name, col) in &columns {
            if col.len() != cells.len() {
                return Err(Error::LengthMismatch {
                    what: format!("column `{name}`"),
                    expected: cells.len(),
                    got: col.len(),
                });
            }
        }
        Ok(CellTable { cells, columns })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }
}

/// One risk probability per cell for a year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSurface {
    pub year: i32,
    pub kind: RiskKind,
    pub cells: Vec<CellInfo>,
    pub probs: Vec<f64>,
}

impl RiskSurface {
    pub fn new(year: i32, kind: RiskKind, cells: Vec<CellInfo>, probs: Vec<f64>) -> Result<Self> {
        if cells.len() != probs.len() {
            return Err(Error::LengthMismatch {
                what: "risk probabilities".into(),
                expected: cells.len(),
                got: probs.len(),
            });
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0 && **p <= 1.0)) {
            return Err(Error::InvalidInput(format!("risk probability {p} outside [0, 1]")));
        }
        Ok(RiskSurface {
            year,
            kind,
            cells,
            probs,
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

const SURFACE_HEADER: [&str; 6] = ["year", "cell_id", "lat", "lon", "prob", "kind"];

/// Writes surfaces as `year,cell_id,lat,lon,prob,kind`.
pub fn write_surfaces_csv<W: Write>(w: W, surfaces: &[RiskSurface]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SURFACE_HEADER)?;
    for s in surfaces {
        for (c, p) in s.cells.iter().zip(&s.probs) {
            wtr.write_record([
                s.year.to_string(),
                c.cell_id.to_string(),
                float17(c.lat),
                float17(c.lon),
                float17(*p),
                s.kind.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads surfaces written by [`write_surfaces_csv`], grouped by
/// `(year, kind)` in order of first appearance.
pub fn read_surfaces_csv<R: Read>(r: R) -> Result<Vec<RiskSurface>> {
    let mut rdr = csv::Reader::from_reader(r);
    let headers = rdr.headers()?.clone();
    let idx = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let cols: Vec<usize> = SURFACE_HEADER.iter().map(|h| idx(h)).collect::<Result<_>>()?;
    let mut groups: Vec<RiskSurface> = Vec::new();
    let mut index: HashMap<(i32, RiskKind), usize> = HashMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| rec.get(cols[k]).unwrap_or("").trim();
        fn parse<T: FromStr>(row: usize, column: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| Error::Parse {
                row: row + 1,
                column: column.to_string(),
                value: value.to_string(),
            })
        }
        let year: i32 = parse(row, "year", field(0))?;
        let cell = CellInfo {
            cell_id: parse(row, "cell_id", field(1))?,
            lat: parse(row, "lat", field(2))?,
            lon: parse(row, "lon", field(3))?,
        };
        let prob: f64 = parse(row, "prob", field(4))?;
        if !(0.0..=1.0).contains(&prob) {
            return Err(Error::Parse {
                row: row + 1,
                column: "prob".into(),
                value: field(4).to_string(),
            });
        }
        let kind: RiskKind = field(5).parse()?;
        let g = *index.entry((year, kind)).or_insert_with(|| {
            groups.push(RiskSurface {
                year,
                kind,
                cells: Vec::new(),
                probs: Vec::new(),
            });
            groups.len() - 1
        });
        groups[g].cells.push(cell);
        groups[g].probs.push(prob);
    }
    Ok(groups)
}

/// Conditioning vectors per cell: each ordered predictor mapped through its
/// marginal CDF.
fn conditioning(
    order: &[String],
    x: &CellTable,
    marginals: &BTreeMap<String, KernelMarginal<f64>>,
) -> Result<Vec<ConditioningVector<f64>>> {
    let pits: Vec<Vec<f64>> = order
        .iter()
        .map(|name| {
            let m = marginals
                .get(name)
                .ok_or_else(|| Error::MissingColumn(format!("{name} (marginal)")))?;
            Ok(m.pit(x.column(name)?))
        })
        .collect::<Result<_>>()?;
    (0..x.len())
        .map(|i| ConditioningVector::new(pits.iter().map(|c| c[i]).collect()))
        .collect()
}

/// `P(Y <= threshold | X = x_l)` at every cell through a D-vine.
pub fn univariate_risk(
    model: &DVineModel<f64>,
    marginal: &KernelMarginal<f64>,
    threshold: f64,
    x: &CellTable,
    predictor_marginals: &BTreeMap<String, KernelMarginal<f64>>,
    year: i32,
    kind: RiskKind,
) -> Result<RiskSurface> {
    let v = marginal.cdf_eval(threshold);
    let us = conditioning(model.order(), x, predictor_marginals)?;
    let probs = us
        .par_iter()
        .map(|u| model.cond_cdf(v, u))
        .collect::<Result<Vec<f64>>>()
        .context_with(|| format!("{kind} risk, year {year}"))?;
    RiskSurface::new(year, kind, x.cells.clone(), probs)
}

/// `P(Y_f <= y_f, Y_d <= y_d | X = x_l)` at every cell through a Y-vine.
pub fn joint_risk(
    model: &YVineModel<f64>,
    marginals: (&KernelMarginal<f64>, &KernelMarginal<f64>),
    thresholds: ThresholdPair,
    x: &CellTable,
    predictor_marginals: &BTreeMap<String, KernelMarginal<f64>>,
    year: i32,
) -> Result<RiskSurface> {
    let v1 = marginals.0.cdf_eval(thresholds.y_f);
    let v2 = marginals.1.cdf_eval(thresholds.y_d);
    let us = conditioning(model.order(), x, predictor_marginals)?;
    let probs = us
        .into_par_iter()
        .map(|u| model.bivariate_cond_cdf(&BivariateEval::new(v1, v2, u)?))
        .collect::<Result<Vec<f64>>>()
        .context_with(|| format!("joint risk, year {year}"))?;
    RiskSurface::new(year, RiskKind::Joint, x.cells.clone(), probs)
}

/// True when the `quantile` (type 7) of the cell probabilities exceeds
/// `cutoff`.
pub fn flag_extreme_year(surface: &RiskSurface, quantile: f64, cutoff: f64) -> Result<bool> {
    if surface.is_empty() {
        return Err(Error::NoRecords);
    }
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::InvalidInput(format!("flag quantile {quantile} not in [0, 1]")));
    }
    let mut sorted = surface.probs.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_type7(&sorted, quantile) > cutoff)
}

/// Survival probability after clamping, with the unclamped value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalPoint {
    pub value: f64,
    pub raw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalSeries {
    pub cell_id: u64,
    pub start_year: i32,
    /// `(T, S(s, T), unclamped S(s, T))` for consecutive `T`.
    pub values: Vec<(i32, f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReturnPeriod {
    Years(f64),
    NotReached,
}

impl fmt::Display for ReturnPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReturnPeriod::Years(y) => f.write_str(&float17(*y)),
            ReturnPeriod::NotReached => f.write_str("NA"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPeriodMap {
    pub kind: RiskKind,
    pub start_year: i32,
    pub threshold: f64,
    pub entries: Vec<(u64, ReturnPeriod)>,
}

impl ReturnPeriodMap {
    /// Writes `cell_id,years` with `NA` for cells that never cross.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["cell_id", "years"])?;
        for (cell, rp) in &self.entries {
            wtr.write_record([cell.to_string(), rp.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Writes `cell_id,s,T,survival`.
pub fn write_survival_csv<W: Write>(w: W, series: &[SurvivalSeries]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["cell_id", "s", "T", "survival"])?;
    for s in series {
        for (t, value, _) in &s.values {
            wtr.write_record([
                s.cell_id.to_string(),
                s.start_year.to_string(),
                t.to_string(),
                float17(*value),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Yearly surfaces of one kind, indexed by year and cell.
#[derive(Debug, Clone)]
pub struct SurfaceSeries {
    kind: RiskKind,
    cells: Vec<CellInfo>,
    years: BTreeMap<i32, HashMap<u64, f64>>,
}

impl SurfaceSeries {
    pub fn new(surfaces: &[RiskSurface]) -> Result<Self> {
        let first = surfaces.first().ok_or(Error::NoRecords)?;
        let mut years = BTreeMap::new();
        for s in surfaces {
            if s.kind != first.kind {
                return Err(Error::InvalidInput(format!(
                    "mixed risk kinds {} and {}",
                    first.kind, s.kind
                )));
            }
            let probs: HashMap<u64, f64> =
                s.cells.iter().map(|c| c.cell_id).zip(s.probs.iter().copied()).collect();
            if years.insert(s.year, probs).is_some() {
                return Err(Error::InvalidInput(format!(
                    "year {} appears twice for {}",
                    s.year, s.kind
                )));
            }
        }
        Ok(SurfaceSeries {
            kind: first.kind,
            cells: first.cells.clone(),
            years,
        })
    }

    pub fn kind(&self) -> RiskKind {
        self.kind
    }

    pub fn cells(&self) -> &[CellInfo] {
        &self.cells
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.years.keys().copied()
    }

    pub fn last_year(&self) -> i32 {
        *self.years.keys().next_back().expect("series is non-empty")
    }

    pub fn prob(&self, year: i32, cell_id: u64) -> Result<f64> {
        let year_map = self.years.get(&year).ok_or(Error::MissingYear(year))?;
        year_map
            .get(&cell_id)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("cell {cell_id} missing in year {year}")))
    }

    /// `1 - Σ_{t=s}^{T} P_t`, clamped at 0; `T = s - 1` gives 1.
    pub fn survival(&self, cell_id: u64, s: i32, t: i32) -> Result<SurvivalPoint> {
        if t < s - 1 {
            return Err(Error::InvalidInput(format!("survival window ({s}, {t}) is reversed")));
        }
        let mut sum = 0.0;
        for year in s..=t {
            sum += self.prob(year, cell_id)?;
        }
        let raw = 1.0 - sum;
        Ok(SurvivalPoint {
            value: raw.max(0.0),
            raw,
        })
    }

    /// Survival from `s` for every `T` in `s..=t_end`.
    pub fn survival_series(&self, cell_id: u64, s: i32, t_end: i32) -> Result<SurvivalSeries> {
        if t_end < s {
            return Err(Error::InvalidInput(format!("survival window ({s}, {t_end}) is empty")));
        }
        let mut sum = 0.0;
        let mut values = Vec::with_capacity((t_end - s + 1) as usize);
        for year in s..=t_end {
            sum += self.prob(year, cell_id)?;
            let raw = 1.0 - sum;
            values.push((year, raw.max(0.0), raw));
        }
        Ok(SurvivalSeries {
            cell_id,
            start_year: s,
            values,
        })
    }

    /// Years from `start` until survival first drops to `threshold`, with
    /// linear interpolation inside the crossing year.
    pub fn return_period(&self, cell_id: u64, start: i32, threshold: f64) -> Result<ReturnPeriod> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidInput(format!(
                "return-period threshold {threshold} not in (0, 1)"
            )));
        }
        let end = self.last_year();
        if start > end {
            return Err(Error::MissingYear(start));
        }
        let mut sum = 0.0;
        let mut prev = 1.0;
        for (k, year) in (start..=end).enumerate() {
            sum += self.prob(year, cell_id)?;
            let cur = (1.0 - sum).max(0.0);
            if cur <= threshold {
                let frac = (prev - threshold) / (prev - cur);
                return Ok(ReturnPeriod::Years(k as f64 + frac));
            }
            prev = cur;
        }
        Ok(ReturnPeriod::NotReached)
    }

    pub fn return_period_map(&self, start: i32, threshold: f64) -> Result<ReturnPeriodMap> {
        let entries = self
            .cells
            .iter()
            .map(|c| Ok((c.cell_id, self.return_period(c.cell_id, start, threshold)?)))
            .collect::<Result<_>>()?;
        Ok(ReturnPeriodMap {
            kind: self.kind,
            start_year: start,
            threshold,
            entries,
        })
    }
}

/// Survival probability `S(s, T)` of one cell.
pub fn survival(series: &SurfaceSeries, cell_id: u64, s: i32, t: i32) -> Result<f64> {
    Ok(series.survival(cell_id, s, t)?.value)
}

/// Return period of one cell from `start`.
pub fn return_period(
    series: &SurfaceSeries,
    cell_id: u64,
    start: i32,
    threshold: f64,
) -> Result<ReturnPeriod> {
    series.return_period(cell_id, start, threshold)
}

#[cfg(test)]
mod tests;
