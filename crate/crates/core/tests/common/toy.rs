//! Small linearly separable feature sets for training tests.

use rand::Rng;
use rflab_core::dsp::{FeatureKind, FeatureTensor};
use rflab_core::sim::{Example, Split};

use super::rng;

/// `n` examples per class; class `c` has mean level `c - (classes-1)/2` on
/// every sample plus uniform noise, so the classes are linearly separable.
pub fn toy_examples(classes: usize, n: usize, m: usize, split: Split, seed: u64) -> Vec<Example> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for c in 0..classes {
        let level = c as f64 - (classes - 1) as f64 / 2.0;
        for i in 0..n {
            let data = (0..3 * m).map(|_| (level + r.gen_range(-0.5..0.5)) as f32).collect();
            out.push(Example {
                id: format!("toy-{c}-{i}-{seed}"),
                label: c,
                split,
                hop_seed: 0,
                noise_seed: 0,
                features: FeatureTensor { kind: FeatureKind::MagPhasePsd, m, data },
            });
        }
    }
    out
}
