//! Confusion matrices and their CSV form.

use super::{EvalError, Result};
use crate::capsnet::ModelState;
use crate::modsig::{ComplexSignal, ModulationScheme};
use crate::trainer::evaluate_split;

/// Square count matrix: rows are true labels, columns predicted labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> ConfusionMatrix {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn record(&mut self, true_label: usize, predicted: usize) {
        assert!(true_label < self.classes && predicted < self.classes);
        self.counts[true_label * self.classes + predicted] += 1;
    }

    pub fn count(&self, true_label: usize, predicted: usize) -> u64 {
        self.counts[true_label * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.count(c, c)).sum()
    }

    pub fn row_sum(&self, true_label: usize) -> u64 {
        (0..self.classes).map(|p| self.count(true_label, p)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    /// Diagonal over row sum per class; NaN for empty rows.
    pub fn per_class_recall(&self) -> Vec<f64> {
        (0..self.classes)
            .map(|c| self.count(c, c) as f64 / self.row_sum(c) as f64)
            .collect()
    }

    /// CSV with a header row and column of scheme names: `classes + 1`
    /// lines of `classes + 1` fields each. Labels index the canonical
    /// scheme order.
    pub fn to_csv(&self) -> String {
        let names: Vec<&str> = ModulationScheme::ALL[..self.classes]
            .iter()
            .map(|s| s.name())
            .collect();
        self.to_csv_named(&names)
    }

    /// Same layout with caller-supplied class names, for datasets whose
    /// labels index a scheme subset.
    pub fn to_csv_named(&self, names: &[&str]) -> String {
        assert_eq!(names.len(), self.classes);
        let mut out = String::from("true\\pred");
        for name in names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for t in 0..self.classes {
            out.push_str(names[t]);
            for p in 0..self.classes {
                out.push_str(&format!(",{}", self.count(t, p)));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<ConfusionMatrix> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| EvalError::Invalid("empty confusion CSV".into()))?;
        let classes = header.split(',').count() - 1;
        let mut m = ConfusionMatrix::new(classes);
        for (t, line) in lines.enumerate() {
            let mut fields = line.split(',');
            let _row_name = fields.next();
            for (p, field) in fields.enumerate() {
                let n: u64 = field.trim().parse().map_err(|_| {
                    EvalError::Invalid(format!("bad count {field:?} at row {t}"))
                })?;
                m.counts[t * classes + p] = n;
            }
        }
        Ok(m)
    }
}

/// Tallies a model's predictions over `indices` into a confusion matrix.
pub fn confusion(
    model: &ModelState,
    frames: &[ComplexSignal],
    indices: &[usize],
    normalize: bool,
) -> Result<ConfusionMatrix> {
    let eval = evaluate_split(model, frames, indices, normalize)?;
    let mut m = ConfusionMatrix::new(model.config.branch_count);
    for (&i, &pred) in indices.iter().zip(&eval.predictions) {
        m.record(frames[i].meta.label, pred);
    }
    debug_assert_eq!(m.trace() as usize, eval.correct);
    Ok(m)
}
