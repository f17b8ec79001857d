use std::f64::consts::PI;

use rand::distributions::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::copula::{FamilyId, PairCopula, Rotation};
use crate::dvine::ConditioningVector;
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::special::norm_quantile;
use crate::yvine::YVineModel;

use super::dataset::{GridDataset, Record};

/// Layout and generating model of a synthetic panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub nx: usize,
    pub ny: usize,
    pub start_year: i32,
    pub n_years: usize,
    /// Predictor columns to simulate (besides `lat`/`lon`).
    pub predictors: Vec<String>,
    /// Generating Y-vine; its order must name simulated predictors.
    pub model: YVineModel<f64>,
    /// Share of predictor variance carried by the smooth spatial component.
    pub smooth_share: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    /// 10 x 10 grid, 5 years, four predictors of which `x1` and `x2` drive
    /// both responses, and a top copula with tau 0.2.
    pub fn demo(seed: u64) -> Self {
        let c = |f: FamilyId, t: f64| PairCopula::new(f, t).expect("valid demo parameter");
        let model = YVineModel::new(
            vec!["x1".into(), "x2".into()],
            vec![vec![PairCopula::independence()]],
            vec![c(FamilyId::gumbel(Rotation::R0), 2.0), c(FamilyId::FRANK, 3.0)],
            vec![c(FamilyId::clayton(Rotation::R0), 2.0), c(FamilyId::GAUSSIAN, 0.4)],
            c(FamilyId::gumbel(Rotation::R0), 1.25),
        )
        .expect("demo model is well formed");
        SyntheticConfig {
            nx: 10,
            ny: 10,
            start_year: 2000,
            n_years: 5,
            predictors: (1..=4).map(|i| format!("x{i}")).collect(),
            model,
            smooth_share: 0.3,
            seed,
        }
    }

    /// The demo layout with every copula set to independence.
    pub fn independent(seed: u64) -> Self {
        let mut cfg = SyntheticConfig::demo(seed);
        let ind = PairCopula::independence();
        cfg.model = YVineModel::new(
            cfg.model.order().to_vec(),
            vec![vec![ind.clone()]],
            vec![ind.clone(); 2],
            vec![ind.clone(); 2],
            ind,
        )
        .expect("independent model is well formed");
        cfg
    }
}

/// Generating model returned with the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub config: SyntheticConfig,
}

fn rank_pit(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut u = vec![0.0; x.len()];
    let n = x.len() as f64 + 1.0;
    for (r, &i) in idx.iter().enumerate() {
        u[i] = (r as f64 + 1.0) / n;
    }
    u
}

/// Simulates a panel: each predictor field is a random low-frequency
/// Fourier surface plus white noise; responses are drawn from the Y-vine
/// given the predictors' within-year ranks and mapped to the normal scale.
///
/// Every (year, field) pair draws from its own random stream, so output is
/// fixed by the seed alone.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<(GridDataset, SyntheticTruth)> {
    let cfg = config;
    if cfg.nx == 0 || cfg.ny == 0 || cfg.n_years == 0 {
        return Err(Error::InvalidInput("synthetic grid must be non-empty".into()));
    }
    if !(0.0..=1.0).contains(&cfg.smooth_share) {
        return Err(Error::InvalidInput("smooth_share must lie in [0, 1]".into()));
    }
    let model_cols: Vec<usize> = cfg
        .model
        .order()
        .iter()
        .map(|name| {
            cfg.predictors
                .iter()
                .position(|p| p == name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))
        })
        .collect::<Result<_>>()?;
    let n = cfg.nx * cfg.ny;
    let coords: Vec<(f64, f64)> = (0..n)
        .map(|c| {
            let (ix, iy) = (c % cfg.nx, c / cfg.nx);
            let fx = if cfg.nx > 1 { ix as f64 / (cfg.nx - 1) as f64 } else { 0.5 };
            let fy = if cfg.ny > 1 { iy as f64 / (cfg.ny - 1) as f64 } else { 0.5 };
            (fx, fy)
        })
        .collect();
    let p = cfg.predictors.len();
    let mut records = Vec::with_capacity(n * cfg.n_years);
    for y in 0..cfg.n_years {
        let year = cfg.start_year + y as i32;
        let stream = |field: usize| stream_rng(cfg.seed, (y * (p + 1) + field) as u64);
        let fields: Vec<Vec<f64>> = (0..p)
            .map(|j| {
                let mut rng = stream(j);
                let coef: Vec<(f64, f64, f64, f64)> = (0..3)
                    .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.0), rng.gen_range(0.0..2.0 * PI)))
                    .collect();
                let smooth: Vec<f64> = coords
                    .iter()
                    .map(|&(fx, fy)| coef.iter().map(|&(a, b, k, ph)| a * (PI * k * fx + ph).cos() + b * (PI * k * fy + ph).sin()).sum())
                    .collect();
                let mean = smooth.iter().sum::<f64>() / n as f64;
                let sd = (smooth.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n as f64).sqrt().max(1e-12);
                let (ws, wn) = (cfg.smooth_share.sqrt(), (1.0 - cfg.smooth_share).sqrt());
                smooth
                    .iter()
                    .map(|s| ws * (s - mean) / sd + wn * norm_quantile(rng.sample::<f64, _>(Open01)))
                    .collect()
            })
            .collect();
        let pits: Vec<Vec<f64>> = model_cols.iter().map(|&j| rank_pit(&fields[j])).collect();
        let mut rng = stream(p);
        for c in 0..n {
            let u = ConditioningVector::new(pits.iter().map(|col| col[c]).collect())?;
            let (w1, w2): (f64, f64) = (rng.sample(Open01), rng.sample(Open01));
            let (v1, v2) = cfg.model.sample_given(w1, w2, &u)?;
            let (fx, fy) = coords[c];
            records.push(Record {
                year,
                cell_id: c as u64 + 1,
                lat: 47.3 + 3.2 * fy,
                lon: 9.0 + 4.8 * fx,
                frost: norm_quantile(v1),
                drought: norm_quantile(v2),
                predictors: fields.iter().map(|f| f[c]).collect(),
            });
        }
    }
    let ds = GridDataset::new(cfg.predictors.clone(), records)?;
    Ok((ds, SyntheticTruth { config: cfg.clone() }))
}
