use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::copula::FamilyId;
use crate::dependence::kendall_tau;
use crate::dvine::{fit_dvine, DVineModel};
use crate::error::{Error, Result, ResultExt};
use crate::marginals::{pit_transform, KernelMarginal};
use crate::yvine::{fit_yvine, YVineModel};

use super::dataset::{GridDataset, YearSlice};

pub const DEFAULT_MAX_P: usize = 5;
const MIN_CELLS: usize = 50;

/// The three regressions fitted per year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    DvineFrost,
    DvineDrought,
    Yvine,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::DvineFrost, ModelKind::DvineDrought, ModelKind::Yvine];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::DvineFrost => "dvine_frost",
            ModelKind::DvineDrought => "dvine_drought",
            ModelKind::Yvine => "yvine",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualConfig {
    pub max_p: usize,
    pub families: Vec<FamilyId>,
}

impl Default for AnnualConfig {
    fn default() -> Self {
        AnnualConfig {
            max_p: DEFAULT_MAX_P,
            families: FamilyId::all(),
        }
    }
}

/// Models and marginals fitted on one year of data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualModelSet {
    pub year: i32,
    pub dvine_frost: DVineModel<f64>,
    pub dvine_drought: DVineModel<f64>,
    pub yvine: YVineModel<f64>,
    /// Keyed by variable name: `frost`, `drought`, `lat`, `lon` and the
    /// predictors.
    pub marginals: BTreeMap<String, KernelMarginal<f64>>,
}

impl AnnualModelSet {
    pub fn orders(&self, kind: ModelKind) -> &[String] {
        match kind {
            ModelKind::DvineFrost => self.dvine_frost.order(),
            ModelKind::DvineDrought => self.dvine_drought.order(),
            ModelKind::Yvine => self.yvine.order(),
        }
    }
}

/// Unconditional and conditional tau between the two responses in a year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauPair {
    pub year: i32,
    pub unconditional: f64,
    pub conditional_family: FamilyId,
    pub conditional_theta: f64,
    pub conditional: f64,
}

/// Fits marginals and the three regressions on `slice`.
pub fn fit_slice(slice: &YearSlice, config: &AnnualConfig) -> Result<AnnualModelSet> {
    let year = slice.year;
    if slice.len() < MIN_CELLS {
        return Err(Error::InvalidInput(format!(
            "year {year} has {} cells, at least {MIN_CELLS} needed",
            slice.len()
        )));
    }
    let mut marginals = BTreeMap::new();
    let mut pit = |name: &str, xs: &[f64]| -> Result<Vec<f64>> {
        let (m, u) = pit_transform(xs).context_with(|| format!("year {year}, marginal `{name}`"))?;
        marginals.insert(name.to_string(), m);
        Ok(u)
    };
    let frost = pit("frost", &slice.frost)?;
    let drought = pit("drought", &slice.drought)?;
    let predictors: Vec<(String, Vec<f64>)> = slice
        .predictors
        .iter()
        .map(|(n, xs)| Ok((n.clone(), pit(n, xs)?)))
        .collect::<Result<_>>()?;
    let max_p = config.max_p.min(predictors.len());
    let ctx = |kind: ModelKind| move || format!("year {year}, {kind}");
    let dvine_frost = fit_dvine(&frost, &predictors, max_p, &config.families).context_with(ctx(ModelKind::DvineFrost))?;
    let dvine_drought =
        fit_dvine(&drought, &predictors, max_p, &config.families).context_with(ctx(ModelKind::DvineDrought))?;
    let yvine =
        fit_yvine(&frost, &drought, &predictors, max_p, &config.families).context_with(ctx(ModelKind::Yvine))?;
    Ok(AnnualModelSet {
        year,
        dvine_frost,
        dvine_drought,
        yvine,
        marginals,
    })
}

/// Fits the models of one year of `ds`.
pub fn fit_annual_models(ds: &GridDataset, year: i32, config: &AnnualConfig) -> Result<AnnualModelSet> {
    fit_slice(&ds.year_slice(year)?, config)
}

/// Tau between frost and drought in `slice`, alongside the fitted
/// conditional tau.
pub fn tau_pair(slice: &YearSlice, set: &AnnualModelSet) -> Result<TauPair> {
    let unconditional = kendall_tau(&slice.frost, &slice.drought).context_with(|| format!("year {}", slice.year))?;
    let (family, theta, tau) = set.yvine.conditional_tau();
    Ok(TauPair {
        year: slice.year,
        unconditional,
        conditional_family: family,
        conditional_theta: theta,
        conditional: tau,
    })
}
