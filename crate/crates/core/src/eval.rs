//! Classification metrics: confusion matrix, per-class precision and recall,
//! accuracy.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_labels(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::LengthMismatch {
                left: y_true.len(),
                right: y_pred.len(),
            });
        }
        if y_true.is_empty() {
            return Err(Error::TooFewSamples("nothing to score".into()));
        }
        let mut counts = vec![vec![0u64; n_classes]; n_classes];
        for (&t, &p) in y_true.iter().zip(y_pred) {
            if t >= n_classes || p >= n_classes {
                return Err(Error::InvalidValue(format!(
                    "label pair ({t}, {p}) outside {n_classes} classes"
                )));
            }
            counts[t][p] += 1;
        }
        Ok(Self { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn column_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|c| self.counts[c][c]).sum()
    }

    /// Share of all samples confused between classes `a` and `b` in either
    /// direction.
    pub fn corner_mass(&self, a: usize, b: usize) -> f64 {
        (self.counts[a][b] + self.counts[b][a]) as f64 / self.total() as f64
    }

    pub fn to_csv(&self, names: &[&str]) -> String {
        let mut out = String::from("true\\pred");
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (name, row) in names.iter().zip(&self.counts) {
            out.push_str(name);
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Metric bundle. `None` marks a ratio whose denominator is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub confusion: ConfusionMatrix,
    pub precision: Vec<Option<f64>>,
    pub recall: Vec<Option<f64>>,
    pub accuracy: f64,
}

pub fn score(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<Scores> {
    let confusion = ConfusionMatrix::from_labels(y_true, y_pred, n_classes)?;
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let precision = (0..n_classes)
        .map(|c| ratio(confusion.counts[c][c], confusion.column_sum(c)))
        .collect();
    let recall = (0..n_classes)
        .map(|c| ratio(confusion.counts[c][c], confusion.row_sum(c)))
        .collect();
    let accuracy = confusion.trace() as f64 / confusion.total() as f64;
    Ok(Scores {
        confusion,
        precision,
        recall,
        accuracy,
    })
}

fn round4(v: f64) -> f64 {
    (v * 1e4).round() / 1e4
}

impl Scores {
    /// Copy with every metric rounded to four decimals, for machine output.
    pub fn rounded(&self) -> Scores {
        Scores {
            confusion: self.confusion.clone(),
            precision: self.precision.iter().map(|v| v.map(round4)).collect(),
            recall: self.recall.iter().map(|v| v.map(round4)).collect(),
            accuracy: round4(self.accuracy),
        }
    }

    /// Plain-text table with precision and recall per class and accuracy,
    /// two decimals, `n/a` for undefined ratios.
    pub fn table(&self, names: &[&str], label: &str) -> String {
        results_table(names, &[(label, self)])
    }
}

/// One row per labelled setup, columns aligned across rows.
pub fn results_table(names: &[&str], rows: &[(&str, &Scores)]) -> String {
    let fmt = |v: Option<f64>| v.map_or("n/a".to_owned(), |x| format!("{x:.2}"));
    let mut head = vec!["Setup".to_owned()];
    head.extend(names.iter().map(|n| format!("Prec. {n}")));
    head.extend(names.iter().map(|n| format!("Rec. {n}")));
    head.push("Acc.".into());
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(label, s)| {
            let mut row = vec![label.to_string()];
            row.extend(s.precision.iter().map(|p| fmt(*p)));
            row.extend(s.recall.iter().map(|r| fmt(*r)));
            row.push(format!("{:.2}", s.accuracy));
            row
        })
        .collect();
    let widths: Vec<usize> = (0..head.len())
        .map(|c| body.iter().map(|r| r[c].len()).fold(head[c].len(), usize::max))
        .collect();
    let line = |cells: &[String]| {
        let mut l = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join(" | ");
        l.push('\n');
        l
    };
    let mut out = line(&head);
    for r in &body {
        out.push_str(&line(r));
    }
    out
}

/// Mean silhouette coefficient with Euclidean distance. Points in singleton
/// clusters contribute 0.
pub fn silhouette_score(x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    if x.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: labels.len(),
        });
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    if k < 2 {
        return Err(Error::DegenerateLabels("silhouette needs two clusters".into()));
    }
    let n = x.nrows();
    let mut dist = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let d = (&x.row(i) - &x.row(j)).mapv(|v| v * v).sum().sqrt();
            dist[[i, j]] = d;
            dist[[j, i]] = d;
        }
    }
    let sizes: Vec<usize> = (0..k).map(|c| labels.iter().filter(|&&l| l == c).count()).collect();
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; k];
        for j in 0..n {
            sums[labels[j]] += dist[[i, j]];
        }
        let own = labels[i];
        if sizes[own] <= 1 {
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn perfect_prediction() {
        let y = [0, 1, 1, 0, 1];
        let s = score(&y, &y, 2).unwrap();
        assert_eq!(s.accuracy, 1.0);
        assert!(s.precision.iter().chain(&s.recall).all(|v| *v == Some(1.0)));
    }

    #[test]
    fn four_sample_example() {
        let s = score(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        assert_eq!(s.confusion.counts, vec![vec![1, 1], vec![0, 2]]);
        assert_eq!(s.precision, vec![Some(1.0), Some(2.0 / 3.0)]);
        assert_eq!(s.recall, vec![Some(0.5), Some(1.0)]);
        assert_eq!(s.accuracy, 0.75);
        let r = s.rounded();
        assert_eq!(r.precision[1], Some(0.6667));
    }

    #[test]
    fn undefined_precision_is_flagged() {
        let s = score(&[0, 1], &[0, 0], 2).unwrap();
        assert_eq!(s.precision[1], None);
        assert_eq!(s.recall[1], Some(0.0));
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("null"));
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            score(&[0, 1], &[0], 2),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn table_layout() {
        let s = score(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        let t = s.table(&["NF", "F"], "demo");
        assert!(t.contains("Prec. NF"));
        assert!(t.contains("0.67"));
        assert!(t.contains("0.75"));
    }

    #[test]
    fn silhouette_of_separated_pairs() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        let s = silhouette_score(x.view(), &[0, 0, 1, 1]).unwrap();
        // a = 1, b = (10 + sqrt(101)) / 2 for every point
        let b = (10.0 + 101f64.sqrt()) / 2.0;
        assert!((s - (b - 1.0) / b).abs() < 1e-12);
    }
}
