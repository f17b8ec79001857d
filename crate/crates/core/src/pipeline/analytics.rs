use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::copula::{FamilyKind, PairCopula};
use crate::error::{Error, Result};
use crate::format::float17;

use super::annual::{AnnualModelSet, ModelKind, TauPair};

/// Longest order the rank formula supports.
pub const MAX_ORDER_LEN: usize = 5;

/// `n[name][k]`: how often `name` sits at position `k` (from 0).
pub fn position_counts(orders: &[Vec<String>]) -> BTreeMap<String, Vec<usize>> {
    let len = orders.iter().map(Vec::len).max().unwrap_or(0);
    let mut counts: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for order in orders {
        for (k, name) in order.iter().enumerate() {
            counts.entry(name.clone()).or_insert_with(|| vec![0; len])[k] += 1;
        }
    }
    counts
}

/// `rank(X) = Σ_k n_k(X) (6 - k) / N` with positions `k` from 1 and `N` the
/// number of orders. Every name in `predictors` gets an entry.
pub fn predictor_ranks(orders: &[Vec<String>], predictors: &[String]) -> Result<BTreeMap<String, f64>> {
    if let Some(o) = orders.iter().find(|o| o.len() > MAX_ORDER_LEN) {
        return Err(Error::InvalidInput(format!(
            "order of length {} exceeds {MAX_ORDER_LEN}",
            o.len()
        )));
    }
    let mut ranks: BTreeMap<String, f64> = predictors.iter().map(|p| (p.clone(), 0.0)).collect();
    if orders.is_empty() {
        return Ok(ranks);
    }
    let n = orders.len() as f64;
    for (name, counts) in position_counts(orders) {
        let score: usize = counts.iter().enumerate().map(|(k, c)| c * (MAX_ORDER_LEN - k)).sum();
        ranks.insert(name, score as f64 / n);
    }
    Ok(ranks)
}

/// A position where several predictors shared the highest count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tie {
    /// From 1.
    pub position: usize,
    pub count: usize,
    /// Tied names in lexicographic order; the first one was chosen.
    pub names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalOrder {
    pub order: Vec<String>,
    /// Count of the chosen predictor at each position.
    pub counts: Vec<usize>,
    pub ties: Vec<Tie>,
}

/// Position `k` takes the predictor most often seen at `k` among those not
/// yet chosen; ties go to the lexicographically smallest name.
pub fn optimal_order(orders: &[Vec<String>]) -> Result<OptimalOrder> {
    if orders.is_empty() {
        return Err(Error::NoRecords);
    }
    let len = orders.iter().map(Vec::len).max().unwrap_or(0);
    let counts = position_counts(orders);
    let mut remaining: BTreeSet<&String> = counts.keys().collect();
    let mut out = OptimalOrder {
        order: Vec::with_capacity(len),
        counts: Vec::with_capacity(len),
        ties: Vec::new(),
    };
    for k in 0..len {
        let best = remaining.iter().map(|n| counts[*n][k]).max();
        let Some(best) = best else { break };
        let tied: Vec<String> = remaining
            .iter()
            .filter(|n| counts[**n][k] == best)
            .map(|n| n.to_string())
            .collect();
        if tied.len() > 1 {
            out.ties.push(Tie {
                position: k + 1,
                count: best,
                names: tied.clone(),
            });
        }
        remaining.remove(&tied[0]);
        out.order.push(tied[0].clone());
        out.counts.push(best);
    }
    Ok(out)
}

/// Pair-copula counts of one model.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyCounts {
    pub gaussian: usize,
    pub nongaussian: usize,
    pub independence: usize,
}

impl FamilyCounts {
    pub fn total(&self) -> usize {
        self.gaussian + self.nongaussian + self.independence
    }

    fn add(&mut self, c: &PairCopula<f64>) {
        match c.family().kind() {
            FamilyKind::Gaussian => self.gaussian += 1,
            FamilyKind::Independence => self.independence += 1,
            _ => self.nongaussian += 1,
        }
    }
}

fn count<'a>(copulas: impl IntoIterator<Item = &'a PairCopula<f64>>) -> FamilyCounts {
    let mut c = FamilyCounts::default();
    for p in copulas {
        c.add(p);
    }
    c
}

/// Gaussian / non-Gaussian / independence counts for each model of a year.
pub fn family_counts(set: &AnnualModelSet) -> BTreeMap<ModelKind, FamilyCounts> {
    let y = &set.yvine;
    let yvine = count(
        y.predictor_trees()
            .iter()
            .flatten()
            .chain(y.edges_v1())
            .chain(y.edges_v2())
            .chain(std::iter::once(y.top_copula())),
    );
    [
        (ModelKind::DvineFrost, count(set.dvine_frost.trees().iter().flatten())),
        (ModelKind::DvineDrought, count(set.dvine_drought.trees().iter().flatten())),
        (ModelKind::Yvine, yvine),
    ]
    .into()
}

/// Order statistics of one model kind across years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderAnalytics {
    pub kind: ModelKind,
    pub position_counts: BTreeMap<String, Vec<usize>>,
    pub ranks: BTreeMap<String, f64>,
    pub optimal_order: OptimalOrder,
    pub family_counts: Vec<(i32, FamilyCounts)>,
}

impl OrderAnalytics {
    pub fn compute(sets: &[AnnualModelSet], kind: ModelKind, predictors: &[String]) -> Result<Self> {
        let orders: Vec<Vec<String>> = sets.iter().map(|s| s.orders(kind).to_vec()).collect();
        Ok(OrderAnalytics {
            kind,
            position_counts: position_counts(&orders),
            ranks: predictor_ranks(&orders, predictors)?,
            optimal_order: optimal_order(&orders)?,
            family_counts: sets.iter().map(|s| (s.year, family_counts(s)[&kind])).collect(),
        })
    }
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(header)?;
    Ok(wtr)
}

/// `year,model,position,predictor`.
pub fn write_orders_csv<W: Write>(w: W, sets: &[AnnualModelSet]) -> Result<()> {
    let mut wtr = writer(w, &["year", "model", "position", "predictor"])?;
    for s in sets {
        for kind in ModelKind::ALL {
            for (k, name) in s.orders(kind).iter().enumerate() {
                wtr.write_record([s.year.to_string(), kind.to_string(), (k + 1).to_string(), name.clone()])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `model,predictor,rank,n_1..n_5`.
pub fn write_ranks_csv<W: Write>(w: W, analytics: &[OrderAnalytics]) -> Result<()> {
    let mut header = vec!["model".to_string(), "predictor".into(), "rank".into()];
    header.extend((1..=MAX_ORDER_LEN).map(|k| format!("n_{k}")));
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(&header)?;
    for a in analytics {
        for (name, rank) in &a.ranks {
            let mut rec = vec![a.kind.to_string(), name.clone(), float17(*rank)];
            let counts = a.position_counts.get(name);
            rec.extend((0..MAX_ORDER_LEN).map(|k| {
                counts.and_then(|c| c.get(k)).copied().unwrap_or(0).to_string()
            }));
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `model,position,predictor,count,tied_with`.
pub fn write_optimal_order_csv<W: Write>(w: W, analytics: &[OrderAnalytics]) -> Result<()> {
    let mut wtr = writer(w, &["model", "position", "predictor", "count", "tied_with"])?;
    for a in analytics {
        let o = &a.optimal_order;
        for (k, (name, count)) in o.order.iter().zip(&o.counts).enumerate() {
            let tied = o
                .ties
                .iter()
                .find(|t| t.position == k + 1)
                .map(|t| t.names[1..].join(";"))
                .unwrap_or_default();
            wtr.write_record([a.kind.to_string(), (k + 1).to_string(), name.clone(), count.to_string(), tied])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `year,model,gaussian,nongaussian,independence`.
pub fn write_family_counts_csv<W: Write>(w: W, analytics: &[OrderAnalytics]) -> Result<()> {
    let mut wtr = writer(w, &["year", "model", "gaussian", "nongaussian", "independence"])?;
    for a in analytics {
        for (year, c) in &a.family_counts {
            wtr.write_record([
                year.to_string(),
                a.kind.to_string(),
                c.gaussian.to_string(),
                c.nongaussian.to_string(),
                c.independence.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `year,unconditional_tau,conditional_family,conditional_theta,conditional_tau`.
pub fn write_tau_series_csv<W: Write>(w: W, taus: &[TauPair]) -> Result<()> {
    let mut wtr = writer(
        w,
        &["year", "unconditional_tau", "conditional_family", "conditional_theta", "conditional_tau"],
    )?;
    for t in taus {
        wtr.write_record([
            t.year.to_string(),
            float17(t.unconditional),
            t.conditional_family.to_string(),
            float17(t.conditional_theta),
            float17(t.conditional),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::{FamilyId, Rotation};
    use crate::dvine::DVineModel;
    use crate::yvine::YVineModel;

    fn o(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn rank_formula() {
        let orders = vec![o(&["a", "b"]); 7];
        let r = predictor_ranks(&orders, &o(&["a", "b", "c"])).unwrap();
        assert_eq!(r["a"], 5.0);
        assert_eq!(r["b"], 4.0);
        assert_eq!(r["c"], 0.0);

        let mut orders = Vec::new();
        orders.extend(std::iter::repeat(o(&["x", "p", "q", "r", "s"])).take(10));
        orders.extend(std::iter::repeat(o(&["p", "q", "r", "s", "x"])).take(20));
        orders.extend(std::iter::repeat(o(&["p", "q", "r", "s", "t"])).take(39));
        let r = predictor_ranks(&orders, &[]).unwrap();
        assert!((r["x"] - 70.0 / 69.0).abs() < 1e-12);
        assert!((r["x"] - 1.0145).abs() < 1e-4);
        assert!(r.values().all(|&v| (0.0..=5.0).contains(&v)));

        assert!(predictor_ranks(&[o(&["a", "b", "c", "d", "e", "f"])], &[]).is_err());
    }

    #[test]
    fn identical_orders_are_optimal() {
        let orders = vec![o(&["lat", "bio1", "lon"]); 4];
        let r = optimal_order(&orders).unwrap();
        assert_eq!(r.order, o(&["lat", "bio1", "lon"]));
        assert_eq!(r.counts, [4, 4, 4]);
        assert!(r.ties.is_empty());
        assert!(optimal_order(&[]).is_err());
    }

    #[test]
    fn reconstructed_table_row() {
        // 14 of 20 years start with lat, 11 have lon second; two predictors
        // share position 4 seven times each.
        let mut orders = Vec::new();
        for i in 0..20 {
            let first = if i < 14 { "lat" } else { "elev" };
            let second = if i < 11 { "lon" } else if first == "lat" { "elev" } else { "lat" };
            let third = "bio12";
            let fourth = if i < 7 { "bio4" } else if i < 14 { "bio1" } else { "bio15" };
            let remaining: Vec<&str> = ["lat", "lon", "elev", "bio7"]
                .into_iter()
                .filter(|p| ![first, second, fourth].contains(p))
                .collect();
            orders.push(o(&[first, second, third, fourth, remaining[0]]));
        }
        let r = optimal_order(&orders).unwrap();
        assert_eq!(&r.order[..4], o(&["lat", "lon", "bio12", "bio1"]));
        assert_eq!(r.counts[..2], [14, 11]);
        let tie = r.ties.iter().find(|t| t.position == 4).unwrap();
        assert_eq!(tie.count, 7);
        assert_eq!(tie.names, o(&["bio1", "bio4"]));
    }

    fn set_with(f: FamilyId, theta: f64) -> AnnualModelSet {
        let c = PairCopula::new(f, theta).unwrap();
        let trees = (0..5).map(|k| vec![c.clone(); 5 - k]).collect();
        let names = o(&["a", "b", "c", "d", "e"]);
        let d = DVineModel::new(names.clone(), trees).unwrap();
        let y = YVineModel::new(
            names,
            (1..5).map(|k| vec![c.clone(); 5 - k]).collect(),
            vec![c.clone(); 5],
            vec![c.clone(); 5],
            PairCopula::independence(),
        )
        .unwrap();
        AnnualModelSet {
            year: 2000,
            dvine_frost: d.clone(),
            dvine_drought: d,
            yvine: y,
            marginals: BTreeMap::new(),
        }
    }

    #[test]
    fn family_counts_split() {
        let g = family_counts(&set_with(FamilyId::GAUSSIAN, 0.3));
        assert_eq!(g[&ModelKind::DvineFrost], FamilyCounts { gaussian: 15, nongaussian: 0, independence: 0 });
        assert_eq!(g[&ModelKind::Yvine], FamilyCounts { gaussian: 20, nongaussian: 0, independence: 1 });
        let c = family_counts(&set_with(FamilyId::clayton(Rotation::R0), 1.0));
        assert_eq!(c[&ModelKind::DvineDrought], FamilyCounts { gaussian: 0, nongaussian: 15, independence: 0 });
        assert_eq!(c[&ModelKind::Yvine].total(), 21);
    }

    #[test]
    fn analytics_csvs() {
        let sets = vec![set_with(FamilyId::GAUSSIAN, 0.3)];
        let a: Vec<OrderAnalytics> = ModelKind::ALL
            .iter()
            .map(|&k| OrderAnalytics::compute(&sets, k, &o(&["a", "b", "c", "d", "e", "z"])).unwrap())
            .collect();
        let total: usize = a[0].position_counts.values().flatten().sum();
        assert_eq!(total, 5 * sets.len());
        let mut buf = Vec::new();
        write_ranks_csv(&mut buf, &a).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("model,predictor,rank,n_1,n_2,n_3,n_4,n_5\n"));
        assert!(text.contains("dvine_frost,a,5.0000000000000000e0,1,0,0,0,0"));
        assert!(text.contains("yvine,z,0.0000000000000000e0,0,0,0,0,0"));
        let mut buf = Vec::new();
        write_orders_csv(&mut buf, &sets).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 15);
    }
}
