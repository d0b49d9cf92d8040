//! Brute-force KPI counting straight from the per-class definitions.

/// Per-example counting straight from the KPI definitions.
pub fn brute_force(preds: &[usize], labels: &[usize], l: usize) -> (f64, f64, f64) {
    let mut tp = vec![0u64; l];
    let mut fn_ = vec![0u64; l];
    let mut fp = vec![0u64; l];
    let mut tn = vec![0u64; l];
    for (&p, &t) in preds.iter().zip(labels) {
        for c in 0..l {
            match (t == c, p == c) {
                (true, true) => tp[c] += 1,
                (true, false) => fn_[c] += 1,
                (false, true) => fp[c] += 1,
                (false, false) => tn[c] += 1,
            }
        }
    }
    let tpr = tp.iter().sum::<u64>() as f64 / (tp.iter().sum::<u64>() + fn_.iter().sum::<u64>()) as f64;
    let fpr = (0..l).map(|c| fp[c] as f64 / (fp[c] + tn[c]) as f64).sum::<f64>() / l as f64;
    let top1 = (0..l).map(|c| tp[c] as f64 / (tp[c] + fn_[c]) as f64).sum::<f64>() / l as f64;
    (tpr, fpr, top1)
}
