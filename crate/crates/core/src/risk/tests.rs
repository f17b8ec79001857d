use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::copula::{FamilyId, PairCopula, Rotation};
use crate::marginals::fit_kde;
use crate::rng::stream_rng;
use crate::special::{norm_cdf, norm_quantile};

fn cells(n: usize) -> Vec<CellInfo> {
    (0..n)
        .map(|i| CellInfo {
            cell_id: i as u64 + 1,
            lat: 47.0 + i as f64 * 0.1,
            lon: 10.0 + i as f64 * 0.05,
        })
        .collect()
}

fn surface(year: i32, probs: Vec<f64>) -> RiskSurface {
    RiskSurface::new(year, RiskKind::Frost, cells(probs.len()), probs).unwrap()
}

fn series_of(cell_probs: &[f64], start: i32) -> SurfaceSeries {
    let s: Vec<RiskSurface> = cell_probs
        .iter()
        .enumerate()
        .map(|(k, &p)| surface(start + k as i32, vec![p]))
        .collect();
    SurfaceSeries::new(&s).unwrap()
}

/// Data-scale world: every variable is standard normal on the x-scale.
struct World {
    marginals: BTreeMap<String, KernelMarginal<f64>>,
}

impl World {
    fn new(names: &[&str], seed: u64) -> Self {
        let mut rng = stream_rng(seed, 0);
        let marginals = names
            .iter()
            .map(|n| {
                let s: Vec<f64> = (0..5000).map(|_| norm_quantile(rng.gen_range(1e-9..1.0))).collect();
                (n.to_string(), fit_kde(&s).unwrap())
            })
            .collect();
        World { marginals }
    }

    fn table(&self, names: &[&str], rows: &[Vec<f64>]) -> CellTable {
        let columns = names
            .iter()
            .enumerate()
            .map(|(k, n)| (n.to_string(), rows.iter().map(|r| r[k]).collect()))
            .collect();
        CellTable::new(cells(rows.len()), columns).unwrap()
    }
}

fn dvine2() -> DVineModel<f64> {
    DVineModel::new(
        vec!["a".into(), "b".into()],
        vec![
            vec![
                PairCopula::new(FamilyId::gumbel(Rotation::R0), 1.8).unwrap(),
                PairCopula::new(FamilyId::FRANK, -2.5).unwrap(),
            ],
            vec![PairCopula::new(FamilyId::clayton(Rotation::R270), 0.9).unwrap()],
        ],
    )
    .unwrap()
}

fn yvine1() -> YVineModel<f64> {
    let g = |r| PairCopula::new(FamilyId::GAUSSIAN, r).unwrap();
    YVineModel::new(vec!["a".into()], vec![], vec![g(0.6)], vec![g(0.5)], g(0.4)).unwrap()
}

#[test]
fn threshold_pair_defaults_and_validation() {
    let d = ThresholdPair::default();
    assert_eq!((d.y_f, d.y_d), (-2.0, -1.5));
    assert!(ThresholdPair::new(f64::NAN, 0.0).is_err());
    assert!(ThresholdPair::new(-1.0, f64::INFINITY).is_err());
}

#[test]
fn risk_kind_strings() {
    for k in RiskKind::ALL {
        assert_eq!(k.to_string().parse::<RiskKind>().unwrap(), k);
    }
    assert!("hail".parse::<RiskKind>().is_err());
}

#[test]
fn surface_validation() {
    assert!(RiskSurface::new(2000, RiskKind::Joint, cells(2), vec![0.1]).is_err());
    assert!(RiskSurface::new(2000, RiskKind::Joint, cells(1), vec![1.5]).is_err());
    assert!(CellTable::new(cells(2), [("a".to_string(), vec![1.0])].into()).is_err());
}

#[test]
fn far_threshold_gives_tiny_risk() {
    let names = ["v", "a", "b"];
    let w = World::new(&names, 1);
    let x = w.table(&["a", "b"], &[vec![-1.0, 0.5], vec![2.0, -2.0], vec![0.0, 0.0]]);
    let s = univariate_risk(&dvine2(), &w.marginals["v"], -1e6, &x, &w.marginals, 2001, RiskKind::Frost).unwrap();
    assert!(s.probs.iter().all(|&p| p <= 1e-6), "{:?}", s.probs);
}

#[test]
fn independence_model_gives_flat_surface() {
    let names = ["v", "a"];
    let w = World::new(&names, 2);
    let m = DVineModel::new(vec!["a".into()], vec![vec![PairCopula::independence()]]).unwrap();
    let x = w.table(&["a"], &[vec![-1.0], vec![0.3], vec![2.2]]);
    let s = univariate_risk(&m, &w.marginals["v"], -0.5, &x, &w.marginals, 2001, RiskKind::Drought).unwrap();
    let want = w.marginals["v"].cdf_eval(-0.5);
    assert!(s.probs.iter().all(|&p| (p - want).abs() < 1e-15));
    assert_eq!(s.kind, RiskKind::Drought);
}

#[test]
fn missing_predictor_is_reported() {
    let w = World::new(&["v", "a", "b"], 3);
    let x = w.table(&["a"], &[vec![0.0]]);
    let err = univariate_risk(&dvine2(), &w.marginals["v"], 0.0, &x, &w.marginals, 2001, RiskKind::Frost).unwrap_err();
    assert!(matches!(err, Error::MissingColumn(ref c) if c == "b"), "{err}");
}

#[test]
fn univariate_risk_matches_monte_carlo() {
    let model = dvine2();
    let w = World::new(&["v", "a", "b"], 4);
    let draws = model.simulate(1_000_000, 5).unwrap();
    let centres = [vec![-0.8, 0.4], vec![0.6, -1.1], vec![0.0, 0.0], vec![1.2, 1.0], vec![-1.5, -0.2]];
    let x = w.table(&["a", "b"], &centres);
    let y = -0.3;
    let s = univariate_risk(&model, &w.marginals["v"], y, &x, &w.marginals, 2001, RiskKind::Frost).unwrap();
    let v = w.marginals["v"].cdf_eval(y);
    for (l, c) in centres.iter().enumerate() {
        let u = [w.marginals["a"].cdf_eval(c[0]), w.marginals["b"].cdf_eval(c[1])];
        let direct = model.cond_cdf(v, &ConditioningVector::new(u.to_vec()).unwrap()).unwrap();
        assert_eq!(s.probs[l], direct);
        // Rejection in a u-ball; the model side is averaged over the same
        // accepted draws so the ball width adds no bias.
        let (mut hits, mut avg, mut n) = (0.0, 0.0, 0.0);
        for r in draws.iter().filter(|r| (r[1] - u[0]).abs() < 0.1 && (r[2] - u[1]).abs() < 0.1) {
            hits += f64::from(r[0] <= v);
            avg += model.cond_cdf(v, &ConditioningVector::new(r[1..].to_vec()).unwrap()).unwrap();
            n += 1.0;
        }
        assert!(n > 10_000.0);
        assert!((hits / n - avg / n).abs() < 0.01, "cell {l}: {} vs {}", hits / n, avg / n);
        assert!((direct - avg / n).abs() < 0.05);
    }
}

#[test]
fn joint_risk_independence_is_product() {
    let w = World::new(&["f", "d", "a"], 6);
    let ind = PairCopula::independence();
    let m = YVineModel::new(vec!["a".into()], vec![], vec![ind.clone()], vec![ind.clone()], ind).unwrap();
    let x = w.table(&["a"], &[vec![-1.0], vec![0.5]]);
    let t = ThresholdPair::default();
    let s = joint_risk(&m, (&w.marginals["f"], &w.marginals["d"]), t, &x, &w.marginals, 1999).unwrap();
    let want = w.marginals["f"].cdf_eval(t.y_f) * w.marginals["d"].cdf_eval(t.y_d);
    assert!(s.probs.iter().all(|&p| (p - want).abs() < 1e-12));
    assert_eq!(s.kind, RiskKind::Joint);
}

#[test]
fn joint_risk_bounded_by_margins_and_monotone() {
    let m = yvine1();
    let w = World::new(&["f", "d", "a"], 7);
    let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![-2.5 + i as f64 / 6.0]).collect();
    let x = w.table(&["a"], &rows);
    let mf = (&w.marginals["f"], &w.marginals["d"]);
    let mut prev: Option<Vec<f64>> = None;
    for yf in [-2.5, -2.0, -1.0, 0.0, 1.5] {
        let t = ThresholdPair::new(yf, -1.5).unwrap();
        let s = joint_risk(&m, mf, t, &x, &w.marginals, 2000).unwrap();
        for (l, p) in s.probs.iter().enumerate() {
            let u = ConditioningVector::new(vec![w.marginals["a"].cdf_eval(rows[l][0])]).unwrap();
            let c1 = m.cond_cdf_v1(mf.0.cdf_eval(yf), &u).unwrap();
            let c2 = m.cond_cdf_v2(mf.1.cdf_eval(-1.5), &u).unwrap();
            assert!(*p <= c1.min(c2) + 1e-15);
        }
        if let Some(prev) = &prev {
            assert!(s.probs.iter().zip(prev).all(|(a, b)| a >= b));
        }
        prev = Some(s.probs);
    }
}

#[test]
fn joint_risk_matches_monte_carlo() {
    let m = yvine1();
    let w = World::new(&["f", "d", "a"], 8);
    let draws = m.simulate(1_000_000, 9).unwrap();
    let centres = [vec![-1.0], vec![0.0], vec![0.9]];
    let x = w.table(&["a"], &centres);
    let t = ThresholdPair::new(-0.5, 0.2).unwrap();
    let s = joint_risk(&m, (&w.marginals["f"], &w.marginals["d"]), t, &x, &w.marginals, 2000).unwrap();
    let (v1, v2) = (w.marginals["f"].cdf_eval(t.y_f), w.marginals["d"].cdf_eval(t.y_d));
    for (l, c) in centres.iter().enumerate() {
        let u = w.marginals["a"].cdf_eval(c[0]);
        let (mut hits, mut avg, mut n) = (0.0, 0.0, 0.0);
        for r in draws.iter().filter(|r| (r[2] - u).abs() < 0.025) {
            hits += f64::from(r[0] <= v1 && r[1] <= v2);
            let e = BivariateEval::new(v1, v2, ConditioningVector::new(vec![r[2]]).unwrap()).unwrap();
            avg += m.bivariate_cond_cdf(&e).unwrap();
            n += 1.0;
        }
        assert!((hits / n - avg / n).abs() < 0.01, "{} vs {}", hits / n, avg / n);
        assert!((s.probs[l] - avg / n).abs() < 0.02);
    }
}

#[test]
fn flag_rule_arithmetic() {
    assert!(!flag_extreme_year(&surface(2000, vec![0.0; 1000]), 0.95, 0.2).unwrap());
    let mut six = vec![0.0; 1000];
    six[..60].fill(0.25);
    assert!(flag_extreme_year(&surface(2000, six), 0.95, 0.2).unwrap());
    let mut four = vec![0.0; 1000];
    four[..40].fill(0.9);
    assert!(!flag_extreme_year(&surface(2000, four), 0.95, 0.2).unwrap());
    assert!(flag_extreme_year(&surface(2000, vec![]), 0.95, 0.2).is_err());
}

#[test]
fn survival_arithmetic() {
    let zero = series_of(&[0.0; 6], 1952);
    assert_eq!(survival(&zero, 1, 1952, 1957).unwrap(), 1.0);
    let tenth = series_of(&[0.1; 12], 1952);
    assert_eq!(survival(&tenth, 1, 1952, 1956).unwrap(), 0.5);
    let p = tenth.survival(1, 1952, 1963).unwrap();
    assert_eq!(p.value, 0.0);
    assert!((p.raw + 0.2).abs() < 1e-12);
    assert_eq!(survival(&tenth, 1, 1952, 1951).unwrap(), 1.0);
    assert!(tenth.survival(1, 1952, 1950).is_err());
    assert!(matches!(tenth.survival(1, 1950, 1952), Err(Error::MissingYear(1950))));
}

#[test]
fn return_period_arithmetic() {
    let tenth = series_of(&[0.1; 12], 1952);
    assert_eq!(return_period(&tenth, 1, 1952, 0.5).unwrap(), ReturnPeriod::Years(5.0));
    let zero = series_of(&[0.0; 12], 1952);
    assert_eq!(return_period(&zero, 1, 1952, 0.5).unwrap(), ReturnPeriod::NotReached);
    let ramp = series_of(&[0.0, 0.0, 0.3, 0.4], 2000);
    assert_eq!(return_period(&ramp, 1, 2000, 0.5).unwrap(), ReturnPeriod::Years(3.5));
    assert!(return_period(&ramp, 1, 2010, 0.5).is_err());
}

#[test]
fn surface_csv_roundtrip() {
    let a = surface(2001, vec![0.1, 0.25, 1.0 / 3.0]);
    let mut b = surface(2002, vec![0.0, 1.0, 0.5]);
    b.kind = RiskKind::Joint;
    let mut buf = Vec::new();
    write_surfaces_csv(&mut buf, &[a.clone(), b.clone()]).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("year,cell_id,lat,lon,prob,kind\n"));
    assert_eq!(read_surfaces_csv(buf.as_slice()).unwrap(), vec![a, b]);
}

#[test]
fn return_period_csv_uses_na() {
    let s = vec![surface(2000, vec![0.3, 0.0]), surface(2001, vec![0.3, 0.0])];
    let series = SurfaceSeries::new(&s).unwrap();
    let map = series.return_period_map(2000, 0.5).unwrap();
    let mut buf = Vec::new();
    map.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "cell_id,years");
    assert!(lines[1].starts_with("1,1.6666666666666"));
    assert_eq!(lines[2], "2,NA");
}

#[test]
fn survival_csv_layout() {
    let series = series_of(&[0.1, 0.2], 2000);
    let s = series.survival_series(1, 2000, 2001).unwrap();
    let mut buf = Vec::new();
    write_survival_csv(&mut buf, &[s]).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines, ["cell_id,s,T,survival", "1,2000,2000,9.0000000000000002e-1", "1,2000,2001,6.9999999999999996e-1"]);
}

#[test]
fn series_rejects_mixed_input() {
    let mut j = surface(2001, vec![0.1]);
    j.kind = RiskKind::Joint;
    assert!(SurfaceSeries::new(&[surface(2000, vec![0.1]), j]).is_err());
    assert!(SurfaceSeries::new(&[surface(2000, vec![0.1]), surface(2000, vec![0.2])]).is_err());
    assert!(SurfaceSeries::new(&[]).is_err());
}

proptest! {
    #[test]
    fn flag_ignores_cell_order(mut probs in prop::collection::vec(0.0f64..1.0, 1..200), seed in 0u64..100) {
        let a = flag_extreme_year(&surface(2000, probs.clone()), 0.95, 0.2).unwrap();
        let mut rng = stream_rng(seed, 0);
        for i in (1..probs.len()).rev() {
            probs.swap(i, rng.gen_range(0..=i));
        }
        prop_assert_eq!(a, flag_extreme_year(&surface(2000, probs), 0.95, 0.2).unwrap());
    }

    #[test]
    fn survival_and_return_period_agree(probs in prop::collection::vec(0.0f64..0.4, 1..30)) {
        let series = series_of(&probs, 1990);
        let s = series.survival_series(1, 1990, 1989 + probs.len() as i32).unwrap();
        prop_assert!(s.values.windows(2).all(|w| w[1].1 <= w[0].1));
        // S(start, start + k - 1) after k years; S after 0 years is 1.
        let surv = |k: i64| if k == 0 { 1.0 } else { s.values[k as usize - 1].1 };
        match series.return_period(1, 1990, 0.5).unwrap() {
            ReturnPeriod::Years(r) => {
                prop_assert!(r > 0.0 && r <= probs.len() as f64);
                prop_assert!(surv(r.ceil() as i64) <= 0.5);
                prop_assert!(surv(r.floor() as i64) >= 0.5 - 1e-12);
            }
            ReturnPeriod::NotReached => prop_assert!(s.values.last().unwrap().1 > 0.5),
        }
    }

    #[test]
    fn univariate_risk_monotone_in_threshold(a in -3.0f64..3.0, b in -3.0f64..3.0, y in -3.0f64..3.0, dy in 0.0f64..2.0) {
        let m = dvine2();
        let u = ConditioningVector::new(vec![norm_cdf(a), norm_cdf(b)]).unwrap();
        let lo = m.cond_cdf(norm_cdf(y), &u).unwrap();
        let hi = m.cond_cdf(norm_cdf(y + dy), &u).unwrap();
        prop_assert!(hi >= lo);
    }
}
