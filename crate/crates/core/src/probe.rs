//! A metadata-only shortcut classifier. If boosted decision stumps over
//! quality factor and image dimensions can tell natural from generated
//! images, a pixel-based detector can too, without learning anything about
//! generation artifacts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{Format, ImageMeta};
use crate::sampling;

/// Quality value used for images without quantization tables.
pub const NO_TABLE_SENTINEL: f64 = 101.0;
/// Ensemble size.
pub const MAX_STUMPS: usize = 32;

pub const FEATURE_NAMES: [&str; 6] = [
    "qf_or_sentinel",
    "width",
    "height",
    "min_side",
    "max_side",
    "aspect",
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeFeatures {
    pub qf_or_sentinel: f64,
    pub width: f64,
    pub height: f64,
    pub min_side: f64,
    pub max_side: f64,
    /// Long side over short side, so always at least 1.
    pub aspect: f64,
}

impl ProbeFeatures {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.qf_or_sentinel,
            self.width,
            self.height,
            self.min_side,
            self.max_side,
            self.aspect,
        ]
    }
}

pub fn extract_features(meta: &ImageMeta) -> ProbeFeatures {
    let qf = match (meta.format, meta.qf) {
        (Format::Jpeg, Some(q)) => f64::from(q),
        _ => NO_TABLE_SENTINEL,
    };
    let (w, h) = (f64::from(meta.width), f64::from(meta.height));
    let (lo, hi) = (w.min(h), w.max(h));
    ProbeFeatures {
        qf_or_sentinel: qf,
        width: w,
        height: h,
        min_side: lo,
        max_side: hi,
        aspect: if lo > 0.0 { hi / lo } else { 1.0 },
    }
}

/// Features with labels; `true` means generated.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub features: Vec<ProbeFeatures>,
    pub labels: Vec<bool>,
}

impl Dataset {
    pub fn from_metas(metas: &[ImageMeta]) -> Self {
        Dataset {
            features: metas.iter().map(extract_features).collect(),
            labels: metas.iter().map(|m| m.origin.is_generated()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: idx.iter().map(|&i| self.features[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Stratified split: from each class, `round(n_class * holdout)` records
    /// drawn with the seed go to the second set. Order within each set
    /// follows the input.
    pub fn split(&self, holdout: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&holdout) {
            return Err(Error::Domain(format!("holdout fraction {holdout} outside [0, 1)")));
        }
        let mut rng = sampling::rng(seed);
        let mut test = vec![false; self.len()];
        for class in [false, true] {
            let members: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == class).collect();
            let k = (members.len() as f64 * holdout).round() as usize;
            for j in sampling::sample_indices(&mut rng, members.len(), k) {
                test[members[j]] = true;
            }
        }
        let (a, b): (Vec<usize>, Vec<usize>) = (0..self.len()).partition(|&i| !test[i]);
        Ok((self.subset(&a), self.subset(&b)))
    }
}

/// Votes generated when `polarity * (x - threshold) > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub feature_name: String,
    pub threshold: f64,
    pub polarity: i8,
    pub weight: f64,
}

impl Stump {
    fn vote(&self, x: &[f64; 6]) -> f64 {
        let above = x[self.feature] > self.threshold;
        if above == (self.polarity > 0) {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub seed: u64,
    pub stumps: Vec<Stump>,
}

impl ProbeModel {
    /// Weighted vote; positive means generated.
    pub fn margin(&self, f: &ProbeFeatures) -> f64 {
        let x = f.as_array();
        self.stumps.iter().map(|s| s.weight * s.vote(&x)).sum()
    }

    pub fn predict(&self, f: &ProbeFeatures) -> bool {
        self.margin(f) > 0.0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: ProbeModel = serde_json::from_str(s)?;
        if m.stumps.iter().any(|s| s.feature >= FEATURE_NAMES.len()) {
            return Err(Error::Domain("stump feature index out of range".into()));
        }
        Ok(m)
    }
}

/// Lowest weighted error over every feature, midpoint threshold and
/// polarity. Ties keep the first candidate in (feature, threshold,
/// polarity) order.
fn best_stump(xs: &[[f64; 6]], labels: &[bool], w: &[f64]) -> Option<(Stump, f64)> {
    let total_pos: f64 = (0..xs.len()).filter(|&i| labels[i]).map(|i| w[i]).sum();
    let total: f64 = w.iter().sum();
    let mut best: Option<(Stump, f64)> = None;
    for feature in 0..6 {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&a, &b| xs[a][feature].total_cmp(&xs[b][feature]));
        // Weight at or below the current threshold, by label.
        let (mut pos_below, mut below) = (0.0, 0.0);
        for k in 0..order.len().saturating_sub(1) {
            let i = order[k];
            below += w[i];
            if labels[i] {
                pos_below += w[i];
            }
            let (lo, hi) = (xs[i][feature], xs[order[k + 1]][feature]);
            if lo == hi {
                continue;
            }
            let neg_below = below - pos_below;
            let pos_above = total_pos - pos_below;
            let neg_above = (total - total_pos) - neg_below;
            // Polarity +1 predicts generated above the threshold.
            for (polarity, err) in [(1i8, pos_below + neg_above), (-1, neg_below + pos_above)] {
                if best.as_ref().is_none_or(|(_, e)| err < *e) {
                    best = Some((
                        Stump {
                            feature,
                            feature_name: FEATURE_NAMES[feature].into(),
                            threshold: lo + (hi - lo) / 2.0,
                            polarity,
                            weight: 0.0,
                        },
                        err,
                    ));
                }
            }
        }
    }
    best.map(|(s, e)| (s, e / total))
}

/// Discrete AdaBoost over decision stumps, at most [`MAX_STUMPS`] rounds.
/// Stops early once a stump is perfect or no stump beats chance. The fit is
/// fully determined by the data; `seed` is recorded with the model.
pub fn train_probe(data: &Dataset, seed: u64) -> Result<ProbeModel> {
    let n_pos = data.labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == data.len() {
        return Err(Error::DegenerateData(
            "probe training needs both natural and generated examples".into(),
        ));
    }
    let xs: Vec<[f64; 6]> = data.features.iter().map(ProbeFeatures::as_array).collect();
    let mut w = vec![1.0 / data.len() as f64; data.len()];
    let mut stumps = Vec::new();
    while stumps.len() < MAX_STUMPS {
        let Some((mut stump, err)) = best_stump(&xs, &data.labels, &w) else {
            break;
        };
        if err >= 0.5 {
            break;
        }
        let e = err.max(1e-10);
        stump.weight = 0.5 * ((1.0 - e) / e).ln();
        let perfect = err < 1e-12;
        for (i, x) in xs.iter().enumerate() {
            let y = if data.labels[i] { 1.0 } else { -1.0 };
            w[i] *= (-stump.weight * y * stump.vote(x)).exp();
        }
        let z: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= z);
        stumps.push(stump);
        if perfect {
            break;
        }
    }
    Ok(ProbeModel { seed, stumps })
}

/// Binary metrics with generated as the positive class. Precision is absent
/// when nothing was predicted generated, recall when no generated example
/// was present.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeMetrics {
    pub n: u64,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

pub fn eval_probe(model: &ProbeModel, data: &Dataset) -> Result<ProbeMetrics> {
    if data.is_empty() {
        return Err(Error::EmptyEval);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for (f, &y) in data.features.iter().zip(&data.labels) {
        match (model.predict(f), y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let ratio = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
    Ok(ProbeMetrics {
        n: data.len() as u64,
        accuracy: (tp + tn) as f64 / data.len() as f64,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
    })
}

/// Everything a probe run produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub seed: u64,
    pub holdout: f64,
    pub train: ProbeMetrics,
    pub heldout: ProbeMetrics,
    pub model: ProbeModel,
}

/// Stratified split, fit on the first part, score both parts.
pub fn probe_corpus(metas: &[ImageMeta], holdout: f64, seed: u64) -> Result<ProbeReport> {
    let (train, test) = Dataset::from_metas(metas).split(holdout, seed)?;
    let model = train_probe(&train, seed)?;
    Ok(ProbeReport {
        seed,
        holdout,
        train: eval_probe(&model, &train)?,
        heldout: eval_probe(&model, &test)?,
        model,
    })
}
