use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ResultExt};
use crate::format::float17;
use crate::risk::{CellInfo, CellTable};

/// Column names of the input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub year: String,
    pub cell_id: String,
    pub lat: String,
    pub lon: String,
    pub frost: String,
    pub drought: String,
    /// Predictor columns; `None` takes every remaining column.
    pub predictors: Option<Vec<String>>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            year: "year".into(),
            cell_id: "cell_id".into(),
            lat: "lat".into(),
            lon: "lon".into(),
            frost: "frost".into(),
            drought: "drought".into(),
            predictors: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub year: i32,
    pub cell_id: u64,
    pub lat: f64,
    pub lon: f64,
    pub frost: f64,
    pub drought: f64,
    /// Aligned with [`GridDataset::predictor_names`].
    pub predictors: Vec<f64>,
}

/// Validated panel of grid-cell records.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDataset {
    predictor_names: Vec<String>,
    records: Vec<Record>,
    dropped: usize,
}

/// One year of the panel, ready for fitting and risk evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct YearSlice {
    pub year: i32,
    pub cells: Vec<CellInfo>,
    pub frost: Vec<f64>,
    pub drought: Vec<f64>,
    /// `lat`, `lon` and the dataset predictors, in that order.
    pub predictors: Vec<(String, Vec<f64>)>,
}

impl YearSlice {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_table(&self) -> CellTable {
        CellTable {
            cells: self.cells.clone(),
            columns: self.predictors.iter().cloned().collect(),
        }
    }
}

impl GridDataset {
    pub fn new(predictor_names: Vec<String>, records: Vec<Record>) -> Result<Self> {
        let mut names = HashSet::new();
        for n in &predictor_names {
            if ["lat", "lon", "frost", "drought"].contains(&n.as_str()) || !names.insert(n) {
                return Err(Error::InvalidInput(format!("predictor name `{n}` is reserved or repeated")));
            }
        }
        let mut seen = HashSet::new();
        for r in &records {
            if r.predictors.len() != predictor_names.len() {
                return Err(Error::LengthMismatch {
                    what: format!("predictors of (year {}, cell {})", r.year, r.cell_id),
                    expected: predictor_names.len(),
                    got: r.predictors.len(),
                });
            }
            if !seen.insert((r.year, r.cell_id)) {
                return Err(Error::DuplicateRecord {
                    year: r.year,
                    cell_id: r.cell_id,
                });
            }
        }
        Ok(GridDataset {
            predictor_names,
            records,
            dropped: 0,
        })
    }

    pub fn predictor_names(&self) -> &[String] {
        &self.predictor_names
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Rows dropped during ingestion because of missing values.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn years(&self) -> Vec<i32> {
        self.records
            .iter()
            .map(|r| r.year)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Records of `year`, ordered by cell id.
    pub fn year_slice(&self, year: i32) -> Result<YearSlice> {
        let mut rows: Vec<&Record> = self.records.iter().filter(|r| r.year == year).collect();
        if rows.is_empty() {
            return Err(Error::MissingYear(year));
        }
        rows.sort_by_key(|r| r.cell_id);
        let col = |f: &dyn Fn(&Record) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<f64>>();
        let mut predictors = vec![
            ("lat".to_string(), col(&|r| r.lat)),
            ("lon".to_string(), col(&|r| r.lon)),
        ];
        for (k, name) in self.predictor_names.iter().enumerate() {
            predictors.push((name.clone(), col(&|r| r.predictors[k])));
        }
        Ok(YearSlice {
            year,
            cells: rows
                .iter()
                .map(|r| CellInfo {
                    cell_id: r.cell_id,
                    lat: r.lat,
                    lon: r.lon,
                })
                .collect(),
            frost: col(&|r| r.frost),
            drought: col(&|r| r.drought),
            predictors,
        })
    }

    /// Writes the default-schema CSV.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["year", "cell_id", "lat", "lon", "frost", "drought"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(self.predictor_names.iter().cloned());
        wtr.write_record(&header)?;
        for r in &self.records {
            let mut rec = vec![r.year.to_string(), r.cell_id.to_string()];
            rec.extend([r.lat, r.lon, r.frost, r.drought].into_iter().map(float17));
            rec.extend(r.predictors.iter().copied().map(float17));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn is_missing(s: &str) -> bool {
    matches!(s, "" | "NA" | "NaN" | "nan" | "null")
}

/// Reads a panel CSV; rows with a missing value are dropped and counted.
pub fn read_grid_csv<R: Read>(r: R, schema: &Schema) -> Result<GridDataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let fixed = [
        &schema.year,
        &schema.cell_id,
        &schema.lat,
        &schema.lon,
        &schema.frost,
        &schema.drought,
    ];
    let fixed_idx: Vec<usize> = fixed.iter().map(|n| find(n)).collect::<Result<_>>()?;
    let predictor_names: Vec<String> = match &schema.predictors {
        Some(p) => p.clone(),
        None => headers
            .iter()
            .filter(|h| !fixed.iter().any(|f| f.as_str() == *h))
            .map(str::to_string)
            .collect(),
    };
    let pred_idx: Vec<usize> = predictor_names.iter().map(|n| find(n)).collect::<Result<_>>()?;

    let mut records = Vec::new();
    let mut dropped = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let all_idx = || fixed_idx.iter().chain(&pred_idx);
        if all_idx().any(|&i| is_missing(field(i))) {
            dropped += 1;
            continue;
        }
        let bad = |i: usize| Error::Parse {
            row: row + 1,
            column: headers.get(i).unwrap_or("?").to_string(),
            value: field(i).to_string(),
        };
        let real = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| bad(i))
        };
        records.push(Record {
            year: field(fixed_idx[0]).parse().map_err(|_| bad(fixed_idx[0]))?,
            cell_id: field(fixed_idx[1]).parse().map_err(|_| bad(fixed_idx[1]))?,
            lat: real(fixed_idx[2])?,
            lon: real(fixed_idx[3])?,
            frost: real(fixed_idx[4])?,
            drought: real(fixed_idx[5])?,
            predictors: pred_idx.iter().map(|&i| real(i)).collect::<Result<_>>()?,
        });
    }
    let mut ds = GridDataset::new(predictor_names, records)?;
    ds.dropped = dropped;
    Ok(ds)
}

/// Reads a panel CSV from disk.
pub fn load_grid_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<GridDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(Error::from).context_with(|| path.display().to_string())?;
    read_grid_csv(file, schema).context_with(|| path.display().to_string())
}
