//! Single-feature linear models mapping an uncertainty measure to a
//! predicted metric, evaluated with case-grouped k-fold cross validation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::SliceRecord;
use crate::uncertainty::{MeasureKind, TargetKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainedOn {
    pub cases: usize,
    pub slices: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub measure_kind: MeasureKind,
    pub target: TargetKind,
    pub slope: f64,
    pub intercept: f64,
    pub trained_on: TrainedOn,
}

/// A prediction keeps the raw regression value alongside the clamped one;
/// the post-processing threshold uses the raw HD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub raw: f64,
    pub clamped: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVReport {
    pub folds: usize,
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: f64,
    pub grouping: String,
}

fn xy_pairs(records: &[SliceRecord], measure: MeasureKind, target: TargetKind) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter_map(|r| Some((measure.of(r)?, target.of(r)?)))
        .collect()
}

/// Ordinary least squares of `target` on `measure`.
pub fn fit(records: &[SliceRecord], measure: MeasureKind, target: TargetKind) -> Result<LinearModel> {
    let pairs = xy_pairs(records, measure, target);
    if pairs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need >= 2 defined rows, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit);
    }
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let cases: BTreeSet<&str> = records
        .iter()
        .filter(|r| measure.of(r).is_some() && target.of(r).is_some())
        .map(|r| r.case_id.as_str())
        .collect();
    Ok(LinearModel {
        measure_kind: measure,
        target,
        slope,
        intercept: my - slope * mx,
        trained_on: TrainedOn { cases: cases.len(), slices: pairs.len() },
    })
}

pub fn predict(model: &LinearModel, measure_value: f64) -> Prediction {
    let raw = model.slope * measure_value + model.intercept;
    let clamped = match model.target {
        TargetKind::Dsc => raw.clamp(0.0, 1.0),
        TargetKind::HdMm => raw.max(0.0),
    };
    Prediction { raw, clamped }
}

/// Deterministic case-to-fold assignment: sorted case ids, round-robin.
pub fn fold_assignment(case_ids: &BTreeSet<String>, folds: usize) -> Vec<(String, usize)> {
    case_ids
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), i % folds))
        .collect()
}

/// k-fold CV grouped by case: every slice of a case stays in one fold.
pub fn cross_validate(
    records: &[SliceRecord],
    measure: MeasureKind,
    target: TargetKind,
    folds: usize,
) -> Result<CVReport> {
    if folds < 2 {
        return Err(Error::InvalidArgument("need >= 2 folds".into()));
    }
    let case_ids: BTreeSet<String> = records.iter().map(|r| r.case_id.clone()).collect();
    if case_ids.len() < folds {
        return Err(Error::InsufficientData(format!(
            "need >= {} distinct cases, got {}",
            folds,
            case_ids.len()
        )));
    }
    let assignment = fold_assignment(&case_ids, folds);
    let fold_of = |case: &str| {
        assignment
            .iter()
            .find(|(c, _)| c == case)
            .map(|(_, f)| *f)
            .unwrap()
    };

    let mut fold_rmse = Vec::with_capacity(folds);
    for k in 0..folds {
        let train: Vec<SliceRecord> = records
            .iter()
            .filter(|r| fold_of(&r.case_id) != k)
            .cloned()
            .collect();
        let model = fit(&train, measure, target)?;
        let held: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| fold_of(&r.case_id) == k)
            .filter_map(|r| Some((measure.of(r)?, target.of(r)?)))
            .collect();
        if held.is_empty() {
            return Err(Error::InsufficientData(format!("fold {k} has no evaluable slices")));
        }
        let sse: f64 = held
            .iter()
            .map(|&(x, y)| {
                let e = predict(&model, x).raw - y;
                e * e
            })
            .sum();
        fold_rmse.push((sse / held.len() as f64).sqrt());
    }
    let mean_rmse = fold_rmse.iter().sum::<f64>() / folds as f64;
    Ok(CVReport { folds, fold_rmse, mean_rmse, grouping: "by_case".into() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec(case: &str, i: usize, x: f64, y: f64) -> SliceRecord {
        SliceRecord {
            case_id: case.into(),
            slice_index: i,
            n_fg: 1,
            type1: Some(x),
            dsc: Some(y),
            ..Default::default()
        }
    }

    #[test]
    fn fit_exact_line() {
        let records: Vec<SliceRecord> = (0..5)
            .map(|i| rec("c0", i, i as f64 * 0.1, 2.0 * (i as f64 * 0.1) + 1.0))
            .collect();
        let m = fit(&records, MeasureKind::Type1, TargetKind::Dsc).unwrap();
        assert!((m.slope - 2.0).abs() < 1e-9);
        assert!((m.intercept - 1.0).abs() < 1e-9);
        assert_eq!(m.trained_on, TrainedOn { cases: 1, slices: 5 });
    }

    #[test]
    fn two_points_interpolate_exactly() {
        let records = vec![rec("a", 0, 1.0, 3.0), rec("b", 1, 3.0, 7.0)];
        let m = fit(&records, MeasureKind::Type1, TargetKind::Dsc).unwrap();
        assert!((predict(&m, 1.0).raw - 3.0).abs() < 1e-12);
        assert!((predict(&m, 3.0).raw - 7.0).abs() < 1e-12);
    }

    #[test]
    fn constant_feature_is_degenerate() {
        let records = vec![rec("a", 0, 1.0, 3.0), rec("a", 1, 1.0, 7.0)];
        assert!(matches!(fit(&records, MeasureKind::Type1, TargetKind::Dsc), Err(Error::DegenerateFit)));
    }

    #[test]
    fn residuals_orthogonal_to_feature() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let records: Vec<SliceRecord> = (0..50)
            .map(|i| rec("c", i, rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)))
            .collect();
        let m = fit(&records, MeasureKind::Type1, TargetKind::Dsc).unwrap();
        let dot: f64 = records
            .iter()
            .map(|r| {
                let x = r.type1.unwrap();
                (r.dsc.unwrap() - predict(&m, x).raw) * x
            })
            .sum();
        let scale: f64 = records.iter().map(|r| r.type1.unwrap().abs()).sum();
        assert!(dot.abs() / scale < 1e-6);
    }

    #[test]
    fn fit_is_scale_equivariant() {
        let records: Vec<SliceRecord> = (0..8)
            .map(|i| rec("c", i, i as f64, 0.1 * i as f64 + 0.3 + if i % 2 == 0 { 0.05 } else { 0.0 }))
            .collect();
        let m1 = fit(&records, MeasureKind::Type1, TargetKind::Dsc).unwrap();
        let scaled: Vec<SliceRecord> = records
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.type1 = Some(r.type1.unwrap() * 4.0);
                r
            })
            .collect();
        let m2 = fit(&scaled, MeasureKind::Type1, TargetKind::Dsc).unwrap();
        assert!((m2.slope - m1.slope / 4.0).abs() < 1e-12);
        for r in &records {
            let x = r.type1.unwrap();
            assert!((predict(&m1, x).raw - predict(&m2, 4.0 * x).raw).abs() < 1e-9);
        }
    }

    #[test]
    fn predict_clamps_but_keeps_raw() {
        let m = LinearModel {
            measure_kind: MeasureKind::Type1,
            target: TargetKind::Dsc,
            slope: 2.0,
            intercept: 1.0,
            trained_on: TrainedOn { cases: 1, slices: 2 },
        };
        let p = predict(&m, 3.0);
        assert_eq!(p.raw, 7.0);
        assert_eq!(p.clamped, 1.0);

        let hd = LinearModel { target: TargetKind::HdMm, slope: -2.0, intercept: 1.0, ..m };
        let p = predict(&hd, 3.0);
        assert_eq!(p.raw, -5.0);
        assert_eq!(p.clamped, 0.0);
    }

    fn linear_records(cases: usize, per_case: usize) -> Vec<SliceRecord> {
        let mut out = Vec::new();
        for c in 0..cases {
            for i in 0..per_case {
                let x = 0.4 + 0.05 * c as f64 + 0.01 * i as f64;
                out.push(rec(&format!("case_{c:02}"), i, x, 0.8 * x + 0.1));
            }
        }
        out
    }

    #[test]
    fn cv_on_collinear_data_is_exact() {
        let records = linear_records(10, 4);
        let report = cross_validate(&records, MeasureKind::Type1, TargetKind::Dsc, 10).unwrap();
        assert_eq!(report.folds, 10);
        assert_eq!(report.grouping, "by_case");
        for r in &report.fold_rmse {
            assert!(*r < 1e-9);
        }
        assert!(report.mean_rmse < 1e-9);
    }

    #[test]
    fn cv_is_deterministic() {
        let records = linear_records(12, 3);
        let a = cross_validate(&records, MeasureKind::Type1, TargetKind::Dsc, 10).unwrap();
        let b = cross_validate(&records, MeasureKind::Type1, TargetKind::Dsc, 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cv_needs_enough_cases() {
        let records = linear_records(5, 3);
        assert!(matches!(
            cross_validate(&records, MeasureKind::Type1, TargetKind::Dsc, 10),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn folds_never_split_a_case() {
        let case_ids: BTreeSet<String> = (0..23).map(|i| format!("case_{i:02}")).collect();
        let assignment = fold_assignment(&case_ids, 10);
        // each case appears exactly once
        assert_eq!(assignment.len(), 23);
        let folds: BTreeSet<usize> = assignment.iter().map(|(_, f)| *f).collect();
        assert!(folds.iter().all(|&f| f < 10));
    }

    #[test]
    fn model_json_round_trip() {
        let records = linear_records(3, 4);
        let m = fit(&records, MeasureKind::Type1, TargetKind::Dsc).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"measure_kind\":\"type1\""));
        assert!(json.contains("\"target\":\"dsc\""));
        let back: LinearModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
