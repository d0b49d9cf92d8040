//! Confusion matrices, the three classification KPIs, experiment reports and
//! embedding export.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::DecimationMode;
use crate::engine::{Mode, Scalar};
use crate::model::MbedAtn;
use crate::seed;
use crate::sim::{Example, Scenario};
use crate::{Error, Result};

/// `counts[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let l = counts.len();
        if l == 0 || counts.iter().any(|r| r.len() != l) {
            return Err(Error::Argument("confusion matrix must be square and nonempty".into()));
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn tp(&self, i: usize) -> u64 {
        self.counts[i][i]
    }

    fn row(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    fn col(&self, i: usize) -> u64 {
        self.counts.iter().map(|r| r[i]).sum()
    }

    /// Header row of predicted classes, then one row per true class.
    pub fn to_csv(&self) -> String {
        let l = self.num_classes();
        let mut s = String::from("true\\pred");
        for p in 0..l {
            let _ = write!(s, ",{p}");
        }
        s.push('\n');
        for (t, row) in self.counts.iter().enumerate() {
            let _ = write!(s, "{t}");
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if num_classes == 0 {
        return Err(Error::Argument("need at least one class".into()));
    }
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for (i, (&p, &t)) in preds.iter().zip(labels).enumerate() {
        if p >= num_classes || t >= num_classes {
            return Err(Error::Argument(format!(
                "example {i}: class (true {t}, predicted {p}) outside 0..{num_classes}"
            )));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Micro-averaged true positive rate: `sum TP / sum (TP + FN)`.
pub fn tpr(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Argument("TPR of an empty confusion matrix".into()));
    }
    let tp: u64 = (0..cm.num_classes()).map(|i| cm.tp(i)).sum();
    Ok(tp as f64 / total as f64)
}

/// Macro-averaged false positive rate: mean over classes of `FP / (FP + TN)`.
pub fn fpr(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    let l = cm.num_classes();
    let mut sum = 0.0;
    for i in 0..l {
        let fp = cm.col(i) - cm.tp(i);
        let tn = total - cm.row(i) - fp;
        if fp + tn == 0 {
            return Err(Error::Argument(format!("class {i} has no negative examples; FPR undefined")));
        }
        sum += fp as f64 / (fp + tn) as f64;
    }
    Ok(sum / l as f64)
}

/// Balanced top-1 accuracy: mean per-class recall.
pub fn top1(cm: &ConfusionMatrix) -> Result<f64> {
    let l = cm.num_classes();
    let mut sum = 0.0;
    for i in 0..l {
        let n = cm.row(i);
        if n == 0 {
            return Err(Error::Argument(format!("class {i} has no examples; recall undefined")));
        }
        sum += cm.tp(i) as f64 / n as f64;
    }
    Ok(sum / l as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kpis {
    pub tpr: f64,
    pub fpr: f64,
    pub top1: f64,
}

impl Kpis {
    pub fn of(cm: &ConfusionMatrix) -> Result<Self> {
        Ok(Kpis { tpr: tpr(cm)?, fpr: fpr(cm)?, top1: top1(cm)? })
    }

    /// `TPR / FPR / top-1` at three decimals.
    pub fn render(&self) -> String {
        format!("{:.3} / {:.3} / {:.3}", self.tpr, self.fpr, self.top1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: Scenario,
    pub model: String,
    #[serde(rename = "M")]
    pub m: usize,
    pub mode: DecimationMode,
    pub tpr: f64,
    pub fpr: f64,
    pub top1: f64,
    pub confusion: Vec<Vec<u64>>,
}

impl EvalReport {
    pub fn new(scenario: Scenario, model: &str, m: usize, mode: DecimationMode, cm: &ConfusionMatrix) -> Result<Self> {
        let k = Kpis::of(cm)?;
        Ok(EvalReport {
            scenario,
            model: model.to_string(),
            m,
            mode,
            tpr: k.tpr,
            fpr: k.fpr,
            top1: k.top1,
            confusion: cm.counts.clone(),
        })
    }

    pub fn kpis(&self) -> Kpis {
        Kpis { tpr: self.tpr, fpr: self.fpr, top1: self.top1 }
    }

    /// One line in the form `Mbed-ATN/TTS  0.905 / 0.011 / 0.905`.
    pub fn line(&self) -> String {
        format!("{}/{}  {}", self.model, self.scenario.as_str().to_uppercase(), self.kpis().render())
    }

    /// Writes the JSON report to `path` and the confusion matrix next to it as CSV.
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))?;
        let csv = path.with_extension("confusion.csv");
        let cm = ConfusionMatrix { counts: self.confusion.clone() };
        fs::write(&csv, cm.to_csv()).map_err(|e| Error::io(&csv, e))
    }
}

fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Eval-mode argmax predictions of the full network, in example order.
pub fn predict<T: Scalar>(net: &MbedAtn<T>, examples: &[&Example]) -> Result<Vec<usize>> {
    examples
        .par_iter()
        .map(|e| {
            let x = net.input(&e.features)?;
            let mut unused = seed::rng(&[0]);
            Ok(argmax(net.logits(&x, Mode::Eval, &mut unused)?.data()))
        })
        .collect()
}

pub fn evaluate<T: Scalar>(
    net: &MbedAtn<T>,
    examples: &[&Example],
    scenario: Scenario,
    mode: DecimationMode,
) -> Result<EvalReport> {
    let preds = predict(net, examples)?;
    let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let cm = confusion(&preds, &labels, net.graph.num_classes())?;
    EvalReport::new(scenario, "Mbed-ATN", net.graph.mbed.m, mode, &cm)
}

/// One Mbed embedding per example.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExport {
    pub ids: Vec<String>,
    pub labels: Vec<usize>,
    pub rows: Vec<Vec<f32>>,
}

impl FeatureExport {
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    /// Columns `id,label,f0,...,f{W-1}`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,label");
        for j in 0..self.width() {
            let _ = write!(s, ",f{j}");
        }
        s.push('\n');
        for ((id, label), row) in self.ids.iter().zip(&self.labels).zip(&self.rows) {
            let _ = write!(s, "{id},{label}");
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

/// Eval-mode embeddings `f` for every example.
pub fn export_features<T: Scalar>(net: &MbedAtn<T>, examples: &[&Example]) -> Result<FeatureExport> {
    let rows = examples
        .par_iter()
        .map(|e| {
            let x = net.input(&e.features)?;
            let f = net.embed(&x, Mode::Eval, &mut seed::rng(&[0]))?;
            Ok(f.data().iter().map(|v| v.as_f64() as f32).collect())
        })
        .collect::<Result<Vec<Vec<f32>>>>()?;
    Ok(FeatureExport {
        ids: examples.iter().map(|e| e.id.clone()).collect(),
        labels: examples.iter().map(|e| e.label).collect(),
        rows,
    })
}
