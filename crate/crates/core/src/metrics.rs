//! Point-level static, dynamic, and associated accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{LabeledSequence, PointLabel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub static_correct: u64,
    pub static_total: u64,
    pub dynamic_correct: u64,
    pub dynamic_total: u64,
}

impl Confusion {
    pub fn add(&mut self, predicted: PointLabel, truth: PointLabel) {
        match truth {
            PointLabel::Static => {
                self.static_total += 1;
                self.static_correct += (predicted == PointLabel::Static) as u64;
            }
            PointLabel::Dynamic => {
                self.dynamic_total += 1;
                self.dynamic_correct += (predicted == PointLabel::Dynamic) as u64;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.static_total + self.dynamic_total
    }
}

impl std::ops::AddAssign for Confusion {
    fn add_assign(&mut self, rhs: Confusion) {
        self.static_correct += rhs.static_correct;
        self.static_total += rhs.static_total;
        self.dynamic_correct += rhs.dynamic_correct;
        self.dynamic_total += rhs.dynamic_total;
    }
}

/// Accuracies in percent. A class with no ground-truth points has no accuracy,
/// and then AA is absent too.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(rename = "SA")]
    pub static_accuracy: Option<f64>,
    #[serde(rename = "DA")]
    pub dynamic_accuracy: Option<f64>,
    #[serde(rename = "AA")]
    pub associated_accuracy: Option<f64>,
}

impl Metrics {
    /// `SA  DA  AA` to two decimals, `-` for absent values.
    pub fn table_row(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"));
        format!(
            "{:>7} {:>7} {:>7}",
            cell(self.static_accuracy),
            cell(self.dynamic_accuracy),
            cell(self.associated_accuracy)
        )
    }
}

/// Geometric mean of two percentages.
pub fn associated_accuracy(sa: f64, da: f64) -> f64 {
    (sa * da).sqrt()
}

pub fn confusion(pred: &LabeledSequence, gt: &LabeledSequence) -> Result<Confusion> {
    if pred.scans.len() != gt.scans.len() {
        let first = pred
            .scans
            .iter()
            .zip(&gt.scans)
            .find(|(p, g)| p.scan_id != g.scan_id || p.labels.len() != g.labels.len())
            .map(|(p, _)| p.scan_id)
            .or_else(|| {
                let n = pred.scans.len().min(gt.scans.len());
                pred.scans.get(n).or(gt.scans.get(n)).map(|s| s.scan_id)
            });
        return Err(Error::invalid(format!(
            "prediction has {} scans, ground truth has {} (first mismatch at scan {})",
            pred.scans.len(),
            gt.scans.len(),
            first.map_or_else(|| "?".into(), |id| id.to_string())
        )));
    }
    let mut c = Confusion::default();
    for (p, g) in pred.scans.iter().zip(&gt.scans) {
        if p.scan_id != g.scan_id || p.labels.len() != g.labels.len() || p.indices != g.indices {
            return Err(Error::invalid(format!(
                "labels misaligned at scan {} ({} predicted vs {} ground truth)",
                p.scan_id,
                p.labels.len(),
                g.labels.len()
            )));
        }
        for (pl, gl) in p.labels.iter().zip(&g.labels) {
            c.add(*pl, *gl);
        }
    }
    Ok(c)
}

pub fn compute_metrics(c: &Confusion) -> Metrics {
    let pct = |correct: u64, total: u64| (total > 0).then(|| 100.0 * correct as f64 / total as f64);
    let sa = pct(c.static_correct, c.static_total);
    let da = pct(c.dynamic_correct, c.dynamic_total);
    let aa = match (sa, da) {
        (Some(s), Some(d)) => Some(associated_accuracy(s, d)),
        _ => None,
    };
    Metrics {
        static_accuracy: sa,
        dynamic_accuracy: da,
        associated_accuracy: aa,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::ScanLabels;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(labels: Vec<PointLabel>) -> LabeledSequence {
        LabeledSequence {
            scans: vec![ScanLabels {
                scan_id: 0,
                indices: (0..labels.len()).collect(),
                labels,
            }],
        }
    }

    #[test]
    fn perfect_prediction() {
        let mut gt = vec![PointLabel::Static; 100];
        gt.extend(vec![PointLabel::Dynamic; 50]);
        let c = confusion(&seq(gt.clone()), &seq(gt)).unwrap();
        assert_eq!(
            c,
            Confusion {
                static_correct: 100,
                static_total: 100,
                dynamic_correct: 50,
                dynamic_total: 50
            }
        );
        let m = compute_metrics(&c);
        assert_eq!(m.static_accuracy, Some(100.0));
        assert_eq!(m.dynamic_accuracy, Some(100.0));
        assert_eq!(m.associated_accuracy, Some(100.0));
    }

    #[test]
    fn all_static_prediction() {
        let mut gt = vec![PointLabel::Static; 100];
        gt.extend(vec![PointLabel::Dynamic; 100]);
        let c = confusion(&seq(vec![PointLabel::Static; 200]), &seq(gt)).unwrap();
        assert_eq!(
            (c.static_correct, c.static_total, c.dynamic_correct, c.dynamic_total),
            (100, 100, 0, 100)
        );
        let m = compute_metrics(&c);
        assert_eq!(m.dynamic_accuracy, Some(0.0));
        assert_eq!(m.associated_accuracy, Some(0.0));
    }

    #[test]
    fn randomized_counts_match_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pick = |r: bool| if r { PointLabel::Dynamic } else { PointLabel::Static };
        let pred: Vec<_> = (0..10_000).map(|_| pick(rng.random_bool(0.3))).collect();
        let gt: Vec<_> = (0..10_000).map(|_| pick(rng.random_bool(0.4))).collect();
        let (mut sc, mut st, mut dc, mut dt) = (0, 0, 0, 0);
        for i in 0..pred.len() {
            if gt[i] == PointLabel::Static {
                st += 1;
                if pred[i] == PointLabel::Static {
                    sc += 1;
                }
            } else {
                dt += 1;
                if pred[i] == PointLabel::Dynamic {
                    dc += 1;
                }
            }
        }
        let c = confusion(&seq(pred), &seq(gt)).unwrap();
        assert_eq!(
            (c.static_correct, c.static_total, c.dynamic_correct, c.dynamic_total),
            (sc, st, dc, dt)
        );
    }

    #[test]
    fn mismatch_names_scan() {
        let a = seq(vec![PointLabel::Static; 3]);
        let mut b = seq(vec![PointLabel::Static; 4]);
        b.scans[0].scan_id = 0;
        let err = confusion(&a, &b).unwrap_err().to_string();
        assert!(err.contains("scan 0"), "{err}");
    }

    #[test]
    fn absent_class_gives_absent_aa() {
        let c = Confusion {
            static_correct: 5,
            static_total: 10,
            dynamic_correct: 0,
            dynamic_total: 0,
        };
        let m = compute_metrics(&c);
        assert_eq!(m.static_accuracy, Some(50.0));
        assert_eq!(m.dynamic_accuracy, None);
        assert_eq!(m.associated_accuracy, None);
        assert_eq!(m.table_row(), "  50.00       -       -");
    }

    #[test]
    fn table_values() {
        assert!((associated_accuracy(97.96, 98.72) - 98.34).abs() <= 0.01);
        assert!((associated_accuracy(99.44, 41.53) - 64.26).abs() <= 0.01);
        assert!((associated_accuracy(100.0, 100.0) - 100.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn geometric_mean_bounds(sc in 0u64..1000, st in 1u64..1000, dc in 0u64..1000, dt in 1u64..1000) {
            let c = Confusion { static_correct: sc.min(st), static_total: st, dynamic_correct: dc.min(dt), dynamic_total: dt };
            let m = compute_metrics(&c);
            let (s, d, a) = (m.static_accuracy.unwrap(), m.dynamic_accuracy.unwrap(), m.associated_accuracy.unwrap());
            prop_assert!(a <= s.max(d) + 1e-9 && a >= s.min(d) - 1e-9);
            if s * d > 0.0 {
                prop_assert!(((a * a) - s * d).abs() <= 1e-9 * s * d);
            }
            let doubled = Confusion {
                static_correct: 2 * c.static_correct,
                static_total: 2 * c.static_total,
                dynamic_correct: 2 * c.dynamic_correct,
                dynamic_total: 2 * c.dynamic_total,
            };
            prop_assert_eq!(compute_metrics(&doubled), m);
        }
    }
}
