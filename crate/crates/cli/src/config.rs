//! Run configuration: command-line flags layered over an optional TOML file
//! layered over built-in defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};
use vinerisk_core::copula::parse_family_list;
use vinerisk_core::pipeline::annual::DEFAULT_MAX_P;
use vinerisk_core::pipeline::Schema;
use vinerisk_core::risk::{
    DEFAULT_FLAG_CUTOFF, DEFAULT_FLAG_QUANTILE, DEFAULT_RP_THRESHOLD, DEFAULT_Y_D, DEFAULT_Y_F,
};
use vinerisk_core::FamilyId;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUT: &str = "out";

/// Inclusive year range written `A:B`, or a single year `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YearRange {
    pub start: i32,
    pub end: i32,
}

impl YearRange {
    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }

    pub fn len(&self) -> usize {
        (self.end - self.start + 1) as usize
    }
}

impl FromStr for YearRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| {
            t.trim()
                .parse::<i32>()
                .map_err(|_| format!("invalid year `{t}` in range `{s}`"))
        };
        let (start, end) = match s.split_once(':') {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let y = parse(s)?;
                (y, y)
            }
        };
        if end < start {
            return Err(format!("year range `{s}` is reversed"));
        }
        Ok(YearRange { start, end })
    }
}

impl TryFrom<String> for YearRange {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<YearRange> for String {
    fn from(r: YearRange) -> String {
        r.to_string()
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

/// Synthetic grid size written `NXxNY`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GridSize {
    pub nx: usize,
    pub ny: usize,
}

impl FromStr for GridSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("invalid grid size `{s}`, expected NXxNY");
        let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let nx: usize = a.trim().parse().map_err(|_| bad())?;
        let ny: usize = b.trim().parse().map_err(|_| bad())?;
        if nx == 0 || ny == 0 {
            return Err(bad());
        }
        Ok(GridSize { nx, ny })
    }
}

impl TryFrom<String> for GridSize {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<GridSize> for String {
    fn from(g: GridSize) -> String {
        format!("{}x{}", g.nx, g.ny)
    }
}

fn parse_families(s: &str) -> Result<Vec<FamilyId>, String> {
    parse_family_list(s).map_err(|e| e.to_string())
}

/// Flags shared by every subcommand. Unset flags fall through to the config
/// file, then to the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Input panel CSV.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Inclusive year range, `A:B` or a single year.
    #[arg(long, value_name = "A:B")]
    pub years: Option<YearRange>,
    /// Maximum number of predictors per model.
    #[arg(long, value_name = "N")]
    pub max_p: Option<usize>,
    /// Frost threshold.
    #[arg(long, value_name = "Y", allow_negative_numbers = true)]
    pub yf: Option<f64>,
    /// Drought threshold.
    #[arg(long, value_name = "Y", allow_negative_numbers = true)]
    pub yd: Option<f64>,
    /// Cell quantile used to flag extreme years.
    #[arg(long, value_name = "Q")]
    pub flag_quantile: Option<f64>,
    /// Probability the flag quantile must exceed.
    #[arg(long, value_name = "P")]
    pub flag_cutoff: Option<f64>,
    /// Survival level defining the return period.
    #[arg(long, value_name = "S")]
    pub rp_threshold: Option<f64>,
    /// Comma-separated candidate families, e.g. `gaussian,clayton90` or `all`.
    #[arg(long, value_name = "LIST", value_parser = parse_families)]
    pub families: Option<Vec<FamilyId>>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long, value_name = "N", env = "VINERISK_THREADS")]
    pub threads: Option<usize>,
    /// TOML file with any of the settings above.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub years: Option<YearRange>,
    pub max_p: Option<usize>,
    pub y_f: Option<f64>,
    pub y_d: Option<f64>,
    pub flag_quantile: Option<f64>,
    pub flag_cutoff: Option<f64>,
    pub rp_threshold: Option<f64>,
    pub families: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub models: Option<PathBuf>,
    pub surfaces: Option<PathBuf>,
    pub grid: Option<GridSize>,
    pub schema: Option<Schema>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }
}

/// Fully resolved settings, echoed to `run_config.json` by every command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub years: Option<YearRange>,
    pub max_p: usize,
    pub y_f: f64,
    pub y_d: f64,
    pub flag_quantile: f64,
    pub flag_cutoff: f64,
    pub rp_threshold: f64,
    pub families: Vec<FamilyId>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub models: PathBuf,
    pub surfaces: PathBuf,
    pub grid: Option<GridSize>,
    pub schema: Schema,
}

impl RunConfig {
    pub fn resolve(
        command: &str,
        args: &CommonArgs,
        models: Option<PathBuf>,
        surfaces: Option<PathBuf>,
        grid: Option<GridSize>,
    ) -> Result<Self, String> {
        let file = match &args.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let families = match (&args.families, &file.families) {
            (Some(f), _) => f.clone(),
            (None, Some(s)) => parse_families(s)?,
            (None, None) => FamilyId::all(),
        };
        let out = args
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        let cfg = RunConfig {
            command: command.to_string(),
            input: args.input.clone().or(file.input),
            models: models.or(file.models).unwrap_or_else(|| out.join("models")),
            surfaces: surfaces
                .or(file.surfaces)
                .unwrap_or_else(|| out.join("surfaces")),
            out,
            years: args.years.or(file.years),
            max_p: args.max_p.or(file.max_p).unwrap_or(DEFAULT_MAX_P),
            y_f: args.yf.or(file.y_f).unwrap_or(DEFAULT_Y_F),
            y_d: args.yd.or(file.y_d).unwrap_or(DEFAULT_Y_D),
            flag_quantile: args
                .flag_quantile
                .or(file.flag_quantile)
                .unwrap_or(DEFAULT_FLAG_QUANTILE),
            flag_cutoff: args
                .flag_cutoff
                .or(file.flag_cutoff)
                .unwrap_or(DEFAULT_FLAG_CUTOFF),
            rp_threshold: args
                .rp_threshold
                .or(file.rp_threshold)
                .unwrap_or(DEFAULT_RP_THRESHOLD),
            families,
            seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            threads: args.threads.or(file.threads),
            grid: grid.or(file.grid),
            schema: file.schema.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if !self.y_f.is_finite() || !self.y_d.is_finite() {
            return Err("thresholds must be finite".into());
        }
        if !(0.0..=1.0).contains(&self.flag_quantile) {
            return Err(format!("flag quantile {} not in [0, 1]", self.flag_quantile));
        }
        if !(0.0..=1.0).contains(&self.flag_cutoff) {
            return Err(format!("flag cutoff {} not in [0, 1]", self.flag_cutoff));
        }
        if !(self.rp_threshold > 0.0 && self.rp_threshold < 1.0) {
            return Err(format!("return-period threshold {} not in (0, 1)", self.rp_threshold));
        }
        if self.threads == Some(0) {
            return Err("thread count must be positive".into());
        }
        Ok(())
    }

    pub fn input(&self) -> Result<&Path, String> {
        self.input
            .as_deref()
            .ok_or_else(|| "no input file given (use --input or `input` in the config)".into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn resolve(args: &CommonArgs) -> RunConfig {
        RunConfig::resolve("fit", args, None, None, None).unwrap()
    }

    #[test]
    fn defaults() {
        let cfg = resolve(&CommonArgs::default());
        assert_eq!(cfg.max_p, 5);
        assert_eq!((cfg.y_f, cfg.y_d), (-2.0, -1.5));
        assert_eq!((cfg.flag_quantile, cfg.flag_cutoff), (0.95, 0.2));
        assert_eq!(cfg.rp_threshold, 0.5);
        assert_eq!(cfg.families, FamilyId::all());
        assert_eq!(cfg.out, PathBuf::from("out"));
        assert_eq!(cfg.models, PathBuf::from("out/models"));
        assert_eq!(cfg.years, None);
    }

    #[test]
    fn year_ranges() {
        assert_eq!("1952:2020".parse(), Ok(YearRange { start: 1952, end: 2020 }));
        assert_eq!("2003".parse(), Ok(YearRange { start: 2003, end: 2003 }));
        assert!("2020:1952".parse::<YearRange>().is_err());
        assert!("x:1".parse::<YearRange>().is_err());
        assert_eq!(YearRange { start: 1, end: 3 }.len(), 3);
    }

    #[test]
    fn grid_sizes() {
        assert_eq!("10x12".parse(), Ok(GridSize { nx: 10, ny: 12 }));
        assert!("0x3".parse::<GridSize>().is_err());
        assert!("10".parse::<GridSize>().is_err());
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            "max_p = 3\ny_f = -1.0\nyears = \"2000:2002\"\nfamilies = \"gaussian\"\n[schema]\nfrost = \"filo\""
        )
        .unwrap();
        let args = CommonArgs {
            config: Some(f.path().to_path_buf()),
            max_p: Some(2),
            ..CommonArgs::default()
        };
        let cfg = resolve(&args);
        assert_eq!(cfg.max_p, 2);
        assert_eq!(cfg.y_f, -1.0);
        assert_eq!(cfg.y_d, -1.5);
        assert_eq!(cfg.years, Some(YearRange { start: 2000, end: 2002 }));
        assert_eq!(cfg.families, vec![FamilyId::GAUSSIAN]);
        assert_eq!(cfg.schema.frost, "filo");
        assert_eq!(cfg.schema.drought, "drought");
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "maxp = 3").unwrap();
        let args = CommonArgs {
            config: Some(f.path().to_path_buf()),
            ..CommonArgs::default()
        };
        assert!(RunConfig::resolve("fit", &args, None, None, None).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        let bad = [
            CommonArgs { flag_quantile: Some(1.5), ..CommonArgs::default() },
            CommonArgs { rp_threshold: Some(1.0), ..CommonArgs::default() },
            CommonArgs { yf: Some(f64::NAN), ..CommonArgs::default() },
            CommonArgs { threads: Some(0), ..CommonArgs::default() },
        ];
        for args in &bad {
            assert!(RunConfig::resolve("fit", args, None, None, None).is_err());
        }
    }
}
