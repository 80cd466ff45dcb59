//! Detection scoring: ROC sweep with trapezoidal AUC, trimmed per-class
//! summaries and the paired t-test.

use std::cmp::Ordering;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{shape_err, Error, Result};
use crate::hsi::{DegreeMap, Mask};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct RocResult {
    /// Ascending, starting at `-inf` and ending at `+inf`.
    pub thresholds: Vec<f64>,
    pub pd: Vec<f64>,
    pub pf: Vec<f64>,
    pub auc: f64,
}

fn class_counts(reference: &[bool]) -> Result<(usize, usize)> {
    let pos = reference.iter().filter(|&&r| r).count();
    let neg = reference.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Argument(format!(
            "reference needs both classes, found {pos} anomaly and {neg} background pixels"
        )));
    }
    Ok((pos, neg))
}

/// ROC over slices; a pixel is declared anomalous when its score is at or
/// above the threshold.
pub fn roc_auc_values<T: Scalar>(scores: &[T], reference: &[bool]) -> Result<RocResult> {
    if scores.len() != reference.len() {
        return Err(shape_err(format!("{} scores", reference.len()), scores.len()));
    }
    let (pos, neg) = class_counts(reference)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    let mut thresholds = vec![f64::NEG_INFINITY];
    let mut pd = vec![1.0];
    let mut pf = vec![1.0];
    // detections remaining at or above the current threshold
    let (mut tp, mut fp) = (pos, neg);
    let mut i = 0;
    while i < order.len() {
        let level = scores[order[i]];
        thresholds.push(level.as_f64());
        pd.push(tp as f64 / pos as f64);
        pf.push(fp as f64 / neg as f64);
        while i < order.len() && scores[order[i]] == level {
            if reference[order[i]] {
                tp -= 1;
            } else {
                fp -= 1;
            }
            i += 1;
        }
    }
    thresholds.push(f64::INFINITY);
    pd.push(0.0);
    pf.push(0.0);
    let auc = pd
        .windows(2)
        .zip(pf.windows(2))
        .map(|(d, f)| (f[0] - f[1]) * (d[0] + d[1]) * 0.5)
        .sum::<f64>()
        .clamp(0.0, 1.0);
    Ok(RocResult { thresholds, pd, pf, auc })
}

pub fn roc_auc<T: Scalar>(scores: &DegreeMap<T>, reference: &Mask) -> Result<RocResult> {
    if (scores.height(), scores.width()) != (reference.height(), reference.width()) {
        return Err(shape_err(
            format!("{}x{}", reference.height(), reference.width()),
            format!("{}x{}", scores.height(), scores.width()),
        ));
    }
    roc_auc_values(scores.values(), reference.values())
}

/// Pairwise rank statistic with ties counted as one half.
pub fn pairwise_auc<T: Scalar>(scores: &[T], reference: &[bool]) -> Result<f64> {
    let (pos, neg) = class_counts(reference)?;
    let mut wins = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !reference[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if reference[j] {
                continue;
            }
            wins += match si.partial_cmp(&sj) {
                Some(Ordering::Greater) => 1.0,
                Some(Ordering::Equal) => 0.5,
                _ => 0.0,
            };
        }
    }
    Ok(wins / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassSummary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    pub kept: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxWhisker {
    pub anomaly: ClassSummary,
    pub background: ClassSummary,
}

/// Drops the top and bottom quarter (`floor(n / 4)` values each side) and
/// summarises what remains.
pub fn trimmed_summary(values: &mut [f64]) -> ClassSummary {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let cut = values.len() / 4;
    let kept = &values[cut..values.len() - cut];
    let n = kept.len();
    let median = if n % 2 == 1 { kept[n / 2] } else { 0.5 * (kept[n / 2 - 1] + kept[n / 2]) };
    ClassSummary {
        min: kept[0],
        median,
        max: kept[n - 1],
        kept: n,
    }
}

pub fn box_whisker<T: Scalar>(scores: &DegreeMap<T>, reference: &Mask) -> Result<BoxWhisker> {
    if (scores.height(), scores.width()) != (reference.height(), reference.width()) {
        return Err(shape_err(
            format!("{}x{}", reference.height(), reference.width()),
            format!("{}x{}", scores.height(), scores.width()),
        ));
    }
    class_counts(reference.values())?;
    let split = |want: bool| -> Vec<f64> {
        scores
            .values()
            .iter()
            .zip(reference.values())
            .filter(|(_, &r)| r == want)
            .map(|(s, _)| s.as_f64())
            .collect()
    };
    Ok(BoxWhisker {
        anomaly: trimmed_summary(&mut split(true)),
        background: trimmed_summary(&mut split(false)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub dof: usize,
    /// Two-sided 5% critical value.
    pub critical: f64,
    pub reject: bool,
}

/// Paired two-sided t-test at the 5% level on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(shape_err(format!("{} paired values", a.len()), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Argument(format!("paired t-test needs at least 2 pairs, got {n}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sd <= 16.0 * f64::EPSILON * scale {
        return Err(Error::Degenerate("paired differences have zero variance".into()));
    }
    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::Argument(e.to_string()))?;
    let critical = dist.inverse_cdf(0.975);
    Ok(TTest {
        t,
        dof: n - 1,
        critical,
        reject: t.abs() > critical,
    })
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// `threshold,pf,pd` rows, ascending threshold.
pub fn roc_csv(roc: &RocResult) -> Result<String> {
    csv_string(|w| {
        w.write_record(["threshold", "pf", "pd"])?;
        for i in 0..roc.thresholds.len() {
            w.write_record([roc.thresholds[i].to_string(), roc.pf[i].to_string(), roc.pd[i].to_string()])?;
        }
        Ok(())
    })
}

/// `metric,value` rows; values keep a decimal point (`1.0`, not `1`).
pub fn metrics_csv<S: AsRef<str>>(rows: &[(S, f64)]) -> Result<String> {
    csv_string(|w| {
        w.write_record(["metric", "value"])?;
        for (name, v) in rows {
            w.write_record([name.as_ref(), &format!("{v:?}")])?;
        }
        Ok(())
    })
}

/// `dataset,auc` rows.
pub fn summary_csv<S: AsRef<str>>(rows: &[(S, f64)]) -> Result<String> {
    csv_string(|w| {
        w.write_record(["dataset", "auc"])?;
        for (name, auc) in rows {
            w.write_record([name.as_ref(), &auc.to_string()])?;
        }
        Ok(())
    })
}
