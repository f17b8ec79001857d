use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use vinerisk_core::dependence::{tau_matrix, TauSeries};
use vinerisk_core::format::float17;
use vinerisk_core::pipeline::analytics::{
    write_family_counts_csv, write_optimal_order_csv, write_orders_csv, write_ranks_csv,
    write_tau_series_csv, MAX_ORDER_LEN,
};
use vinerisk_core::pipeline::{
    fit_slice, generate_synthetic, load_grid_csv, tau_pair, AnnualConfig, AnnualModelSet, GridDataset,
    ModelKind, OrderAnalytics, SyntheticConfig, TauPair,
};
use vinerisk_core::risk::{
    flag_extreme_year, joint_risk, read_surfaces_csv, univariate_risk, write_survival_csv,
    write_surfaces_csv, RiskKind, RiskSurface, SurfaceSeries, ThresholdPair,
};
use vinerisk_core::Error;

use crate::config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(Error::Json(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> CliResult<()>,
) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

/// Writes the resolved configuration next to the outputs.
pub fn echo_config(cfg: &RunConfig) -> CliResult<()> {
    write_json(&cfg.out.join("run_config.json"), cfg)
}

fn load_dataset(cfg: &RunConfig) -> CliResult<GridDataset> {
    let input = cfg.input().map_err(CliError::Usage)?;
    let ds = load_grid_csv(input, &cfg.schema)?;
    if ds.dropped() > 0 {
        warn!("dropped {} incomplete rows", ds.dropped());
    }
    if ds.is_empty() {
        return Err(Error::NoRecords.into());
    }
    info!("loaded {} records from {}", ds.len(), input.display());
    Ok(ds)
}

fn selected_years(ds: &GridDataset, cfg: &RunConfig) -> CliResult<Vec<i32>> {
    let years: Vec<i32> = ds
        .years()
        .into_iter()
        .filter(|y| cfg.years.map_or(true, |r| r.contains(*y)))
        .collect();
    if years.is_empty() {
        let range = cfg.years.map(|r| r.to_string()).unwrap_or_default();
        return Err(CliError::Data(format!("no records in years {range}")));
    }
    Ok(years)
}

pub fn model_path(dir: &Path, year: i32) -> PathBuf {
    dir.join(format!("modelset_{year}.json"))
}

pub fn surface_path(dir: &Path, year: i32) -> PathBuf {
    dir.join(format!("risk_{year}.csv"))
}

#[derive(Serialize)]
struct Skipped {
    year: i32,
    error: String,
}

#[derive(Serialize)]
struct FitReport {
    records: usize,
    dropped_rows: usize,
    predictors: Vec<String>,
    max_p: usize,
    years_fitted: Vec<i32>,
    skipped: Vec<Skipped>,
    n_skipped: usize,
    copulas: BTreeMap<ModelKind, usize>,
}

pub fn cmd_fit(cfg: &RunConfig) -> CliResult<()> {
    let ds = load_dataset(cfg)?;
    let years = selected_years(&ds, cfg)?;
    let acfg = AnnualConfig {
        max_p: cfg.max_p,
        families: cfg.families.clone(),
    };
    let results: Vec<(i32, vinerisk_core::Result<(AnnualModelSet, TauPair)>)> = years
        .par_iter()
        .map(|&year| {
            let res = ds.year_slice(year).and_then(|slice| {
                let set = fit_slice(&slice, &acfg)?;
                let tau = tau_pair(&slice, &set)?;
                Ok((set, tau))
            });
            (year, res)
        })
        .collect();

    let mut sets = Vec::new();
    let mut taus = Vec::new();
    let mut skipped = Vec::new();
    let mut first_err = None;
    for (year, res) in results {
        match res {
            Ok((set, tau)) => {
                info!("fitted year {year}");
                sets.push(set);
                taus.push(tau);
            }
            Err(e) => {
                warn!("skipping year {year}: {e}");
                skipped.push(Skipped {
                    year,
                    error: e.to_string(),
                });
                first_err.get_or_insert(e);
            }
        }
    }
    if sets.is_empty() {
        return Err(first_err.expect("at least one year was attempted").into());
    }

    for set in &sets {
        write_json(&model_path(&cfg.models, set.year), set)?;
    }
    let dir = cfg.out.join("analytics");
    write_file(&dir.join("orders.csv"), |w| Ok(write_orders_csv(w, &sets)?))?;
    write_file(&dir.join("tau_series.csv"), |w| Ok(write_tau_series_csv(w, &taus)?))?;
    let predictors = candidate_predictors(&sets[0]);
    if cfg.max_p <= MAX_ORDER_LEN {
        let analytics = ModelKind::ALL
            .iter()
            .map(|&k| OrderAnalytics::compute(&sets, k, &predictors))
            .collect::<vinerisk_core::Result<Vec<_>>>()?;
        write_file(&dir.join("ranks.csv"), |w| Ok(write_ranks_csv(w, &analytics)?))?;
        write_file(&dir.join("optimal_order.csv"), |w| {
            Ok(write_optimal_order_csv(w, &analytics)?)
        })?;
        write_file(&dir.join("family_counts.csv"), |w| {
            Ok(write_family_counts_csv(w, &analytics)?)
        })?;
    } else {
        warn!("order analytics need max_p <= {MAX_ORDER_LEN}; skipped");
    }

    let copulas = ModelKind::ALL
        .iter()
        .map(|&k| {
            let n = match k {
                ModelKind::DvineFrost => sets[0].dvine_frost.n_copulas(),
                ModelKind::DvineDrought => sets[0].dvine_drought.n_copulas(),
                ModelKind::Yvine => sets[0].yvine.n_copulas(),
            };
            (k, n)
        })
        .collect();
    let report = FitReport {
        records: ds.len(),
        dropped_rows: ds.dropped(),
        predictors,
        max_p: cfg.max_p,
        years_fitted: sets.iter().map(|s| s.year).collect(),
        n_skipped: skipped.len(),
        skipped,
        copulas,
    };
    write_json(&cfg.out.join("fit_report.json"), &report)?;
    println!(
        "fitted {} year(s), skipped {}; models in {}",
        report.years_fitted.len(),
        report.n_skipped,
        cfg.models.display()
    );
    Ok(())
}

/// Every marginal of a fitted set except the two responses.
fn candidate_predictors(set: &AnnualModelSet) -> Vec<String> {
    set.marginals
        .keys()
        .filter(|k| *k != "frost" && *k != "drought")
        .cloned()
        .collect()
}

fn load_model_set(cfg: &RunConfig, year: i32) -> CliResult<AnnualModelSet> {
    let path = model_path(&cfg.models, year);
    if !path.exists() {
        let kinds: Vec<&str> = ModelKind::ALL.iter().map(|k| k.as_str()).collect();
        return Err(CliError::Data(format!(
            "missing model file {} for year {year} (kinds {})",
            path.display(),
            kinds.join(", ")
        )));
    }
    let set: AnnualModelSet = serde_json::from_reader(BufReader::new(File::open(&path)?))?;
    if set.year != year {
        return Err(CliError::Data(format!(
            "model file {} holds year {}, expected {year}",
            path.display(),
            set.year
        )));
    }
    Ok(set)
}

fn marginal<'a>(
    set: &'a AnnualModelSet,
    name: &str,
) -> CliResult<&'a vinerisk_core::marginals::KernelMarginal<f64>> {
    set.marginals
        .get(name)
        .ok_or_else(|| CliError::Data(format!("model set for year {} lacks the `{name}` marginal", set.year)))
}

pub fn cmd_risk(cfg: &RunConfig) -> CliResult<()> {
    let ds = load_dataset(cfg)?;
    let years = selected_years(&ds, cfg)?;
    let thresholds = ThresholdPair::new(cfg.y_f, cfg.y_d)?;
    let mut flags = Vec::new();
    for &year in &years {
        let set = load_model_set(cfg, year)?;
        let table = ds.year_slice(year)?.cell_table();
        let (mf, md) = (marginal(&set, "frost")?, marginal(&set, "drought")?);
        let surfaces = [
            univariate_risk(&set.dvine_frost, mf, cfg.y_f, &table, &set.marginals, year, RiskKind::Frost)?,
            univariate_risk(&set.dvine_drought, md, cfg.y_d, &table, &set.marginals, year, RiskKind::Drought)?,
            joint_risk(&set.yvine, (mf, md), thresholds, &table, &set.marginals, year)?,
        ];
        for s in &surfaces {
            flags.push((year, s.kind, flag_extreme_year(s, cfg.flag_quantile, cfg.flag_cutoff)?));
        }
        write_file(&surface_path(&cfg.surfaces, year), |w| {
            Ok(write_surfaces_csv(w, &surfaces)?)
        })?;
        info!("risk surfaces for year {year} written");
    }
    write_file(&cfg.out.join("extreme_years.csv"), |w| {
        writeln!(w, "year,kind,flagged")?;
        for (year, kind, flagged) in &flags {
            writeln!(w, "{year},{kind},{flagged}")?;
        }
        Ok(())
    })?;
    let n_flagged = flags.iter().filter(|f| f.2).count();
    println!(
        "risk surfaces for {} year(s) in {}; {n_flagged} extreme (year, kind) flag(s)",
        years.len(),
        cfg.surfaces.display()
    );
    Ok(())
}

fn read_surface_dir(dir: &Path) -> CliResult<Vec<RiskSurface>> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::Data(format!("cannot read surfaces directory {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "csv")
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("risk_"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Data(format!("no risk surfaces in {}", dir.display())));
    }
    let mut out = Vec::new();
    for p in paths {
        let surfaces = read_surfaces_csv(BufReader::new(File::open(&p)?))
            .map_err(|e| e.context(format!("reading {}", p.display())))?;
        out.extend(surfaces);
    }
    Ok(out)
}

pub fn cmd_survival(cfg: &RunConfig) -> CliResult<()> {
    let surfaces = read_surface_dir(&cfg.surfaces)?;
    let dir = cfg.out.join("survival");
    for kind in RiskKind::ALL {
        let mut of_kind: Vec<RiskSurface> = surfaces.iter().filter(|s| s.kind == kind).cloned().collect();
        if of_kind.is_empty() {
            continue;
        }
        of_kind.sort_by_key(|s| s.year);
        let series = SurfaceSeries::new(&of_kind)?;
        let first = series.years().next().expect("series is non-empty");
        let (s, t) = match cfg.years {
            Some(r) => (r.start, r.end),
            None => (first, series.last_year()),
        };
        let curves = series
            .cells()
            .iter()
            .map(|c| series.survival_series(c.cell_id, s, t))
            .collect::<vinerisk_core::Result<Vec<_>>>()
            .map_err(|e| e.context(format!("{kind} survival over {s}:{t}")))?;
        let rp = series.return_period_map(s, cfg.rp_threshold)?;
        write_file(&dir.join(format!("survival_{kind}.csv")), |w| Ok(write_survival_csv(w, &curves)?))?;
        write_file(&dir.join(format!("return_period_{kind}.csv")), |w| Ok(rp.write_csv(w)?))?;
        info!("{kind}: survival over {s}:{t} for {} cells", curves.len());
    }
    println!("survival and return periods written to {}", dir.display());
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<()> {
    let mut sc = SyntheticConfig::demo(cfg.seed);
    if let Some(g) = cfg.grid {
        sc.nx = g.nx;
        sc.ny = g.ny;
    }
    if let Some(r) = cfg.years {
        sc.start_year = r.start;
        sc.n_years = r.len();
    }
    let (ds, truth) = generate_synthetic(&sc)?;
    let path = cfg.out.join("synthetic.csv");
    write_file(&path, |w| Ok(ds.write_csv(w)?))?;
    write_json(&cfg.out.join("generating_model.json"), &truth)?;
    println!("{} synthetic records written to {}", ds.len(), path.display());
    Ok(())
}

pub fn cmd_eda(cfg: &RunConfig) -> CliResult<()> {
    let ds = load_dataset(cfg)?;
    let years = selected_years(&ds, cfg)?;
    let dir = cfg.out.join("eda");
    let mut series = TauSeries::new();
    for &year in &years {
        let slice = ds.year_slice(year)?;
        let mut columns = vec![
            ("frost".to_string(), slice.frost.clone()),
            ("drought".to_string(), slice.drought.clone()),
        ];
        columns.extend(slice.predictors.iter().cloned());
        let m = tau_matrix(&columns).map_err(|e| e.context(format!("year {year}")))?;
        write_file(&dir.join(format!("tau_matrix_{year}.csv")), |w| Ok(m.write_csv(w)?))?;
        series.push(year, m.values[0][1])?;
    }
    write_file(&dir.join("tau_series.csv"), |w| {
        writeln!(w, "year,tau")?;
        for (year, tau) in series.entries() {
            writeln!(w, "{year},{}", float17(*tau))?;
        }
        Ok(())
    })?;
    println!("tau matrices for {} year(s) written to {}", years.len(), dir.display());
    Ok(())
}
