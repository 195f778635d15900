//! One-vs-one multiclass linear max-margin classifier: one hinge-loss
//! separator per class pair, vote-based prediction, and distance-sum
//! confidence.

use crate::corpus::{RelationLabel, Scheme};
use crate::features::SparseVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("class {0} has no training examples")]
    EmptyClass(String),
    #[error("model file error: {0}")]
    BadModel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Training settings for the stochastic subgradient optimizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 50, lambda: 1e-4, seed: 0 }
    }
}

/// A linear decision function separating one class pair. Positive
/// score votes for the first class of the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionHyperplane {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub class_pair: (RelationLabel, RelationLabel),
}

impl DecisionHyperplane {
    /// Score w.x + b0 of a sparse input.
    pub fn distance(&self, x: &SparseVector) -> f64 {
        let mut score = self.bias;
        for (dim, value) in x {
            if let Some(w) = self.weights.get(*dim) {
                score += w * value;
            }
        }
        score
    }
}

/// One full set of pairwise separators over a label scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneBank {
    pub hyperplanes: Vec<DecisionHyperplane>,
}

/// Model bank routing: one bank for everything, or separate banks for
/// intra- and inter-sentential pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Routing {
    #[serde(rename = "single")]
    Single,
    #[serde(rename = "intra_inter_split")]
    IntraInterSplit,
}

/// One-vs-one multiclass linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct OvoLinearModel {
    pub scheme: Scheme,
    pub dims: usize,
    pub routing: Routing,
    /// The single bank, or the intra-sentential bank under split routing.
    pub primary: HyperplaneBank,
    /// The inter-sentential bank under split routing.
    pub secondary: Option<HyperplaneBank>,
}

/// Per-label vote counts from one classification.
#[derive(Debug, Clone, PartialEq)]
pub struct Votes {
    pub counts: BTreeMap<RelationLabel, usize>,
}

impl Votes {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

fn class_pairs(scheme: Scheme) -> Vec<(RelationLabel, RelationLabel)> {
    let labels = scheme.labels();
    let mut out = Vec::new();
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            out.push((labels[i], labels[j]));
        }
    }
    out
}

fn train_pair_separator(
    examples: &[(&SparseVector, f64)],
    dims: usize,
    config: &TrainConfig,
    seed: u64,
) -> (Vec<f64>, f64) {
    // Pegasos-style updates with the bias kept as an augmented
    // always-one dimension so every parameter shrinks together.
    let mut w = vec![0.0f64; dims + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = config.epochs * examples.len();
    for t in 1..=steps {
        let (x, y) = examples[rng.gen_range(0..examples.len())];
        let eta = 1.0 / (config.lambda * t as f64);
        let mut score = w[dims];
        for (dim, value) in x.iter() {
            score += w[*dim] * value;
        }
        let shrink = 1.0 - 1.0 / t as f64;
        for wi in w.iter_mut() {
            *wi *= shrink;
        }
        if y * score < 1.0 {
            for (dim, value) in x.iter() {
                w[*dim] += eta * y * value;
            }
            w[dims] += eta * y;
        }
    }
    let bias = w[dims];
    w.truncate(dims);
    (w, bias)
}

fn train_bank(
    data: &[(SparseVector, RelationLabel)],
    scheme: Scheme,
    dims: usize,
    config: &TrainConfig,
) -> Result<HyperplaneBank, ClassifierError> {
    for label in scheme.labels() {
        if !data.iter().any(|(_, l)| *l == label) {
            return Err(ClassifierError::EmptyClass(label.name().to_string()));
        }
    }
    let mut hyperplanes = Vec::new();
    for (pair_idx, (ci, cj)) in class_pairs(scheme).into_iter().enumerate() {
        let subset: Vec<(&SparseVector, f64)> = data
            .iter()
            .filter_map(|(x, l)| {
                if *l == ci {
                    Some((x, 1.0))
                } else if *l == cj {
                    Some((x, -1.0))
                } else {
                    None
                }
            })
            .collect();
        let seed = config.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(pair_idx as u64);
        let (weights, bias) = train_pair_separator(&subset, dims, config, seed);
        hyperplanes.push(DecisionHyperplane { weights, bias, class_pair: (ci, cj) });
    }
    Ok(HyperplaneBank { hyperplanes })
}

/// Trains a single-bank one-vs-one model. Every scheme label must
/// appear at least once in the data.
pub fn train(
    data: &[(SparseVector, RelationLabel)],
    scheme: Scheme,
    dims: usize,
    config: &TrainConfig,
) -> Result<OvoLinearModel, ClassifierError> {
    Ok(OvoLinearModel {
        scheme,
        dims,
        routing: Routing::Single,
        primary: train_bank(data, scheme, dims, config)?,
        secondary: None,
    })
}

/// Trains an intra/inter split model: the primary bank on
/// intra-sentential pairs, the secondary on inter-sentential ones.
pub fn train_split(
    intra: &[(SparseVector, RelationLabel)],
    inter: &[(SparseVector, RelationLabel)],
    scheme: Scheme,
    dims: usize,
    config: &TrainConfig,
) -> Result<OvoLinearModel, ClassifierError> {
    Ok(OvoLinearModel {
        scheme,
        dims,
        routing: Routing::IntraInterSplit,
        primary: train_bank(intra, scheme, dims, config)?,
        secondary: Some(train_bank(inter, scheme, dims, config)?),
    })
}

impl OvoLinearModel {
    pub fn bank(&self, intra_sentential: bool) -> &HyperplaneBank {
        match (self.routing, intra_sentential) {
            (Routing::Single, _) | (Routing::IntraInterSplit, true) => &self.primary,
            (Routing::IntraInterSplit, false) => self.secondary.as_ref().unwrap_or(&self.primary),
        }
    }
}

impl HyperplaneBank {
    /// Vote-based prediction; ties break toward the earlier label in
    /// scheme order.
    pub fn classify(&self, scheme: Scheme, x: &SparseVector) -> (RelationLabel, Votes) {
        let mut counts: BTreeMap<RelationLabel, usize> =
            scheme.labels().into_iter().map(|l| (l, 0)).collect();
        for h in &self.hyperplanes {
            let d = h.distance(x);
            let winner = if d >= 0.0 { h.class_pair.0 } else { h.class_pair.1 };
            *counts.get_mut(&winner).unwrap() += 1;
        }
        let mut best = scheme.labels()[0];
        let mut best_votes = 0usize;
        for label in scheme.labels() {
            let v = counts[&label];
            if v > best_votes {
                best = label;
                best_votes = v;
            }
        }
        (best, Votes { counts })
    }

    /// Confidence of the winning class: absolute sum of the distances
    /// to all hyperplanes separating it from the other classes, each
    /// signed toward the winner.
    pub fn confidence(&self, scheme: Scheme, x: &SparseVector) -> f64 {
        let (winner, _) = self.classify(scheme, x);
        let mut sum = 0.0;
        for h in &self.hyperplanes {
            if h.class_pair.0 == winner {
                sum += h.distance(x);
            } else if h.class_pair.1 == winner {
                sum -= h.distance(x);
            }
        }
        sum.abs()
    }

    /// Confidence scaled by the number of separating hyperplanes.
    pub fn normalized_confidence(&self, scheme: Scheme, x: &SparseVector) -> f64 {
        self.confidence(scheme, x) / (scheme.label_count() as f64 - 1.0)
    }
}

#[derive(Serialize, Deserialize)]
struct HyperplaneDump {
    class_pair: (RelationLabel, RelationLabel),
    bias: f64,
    /// Non-zero weights as (dimension, value) pairs.
    weights: Vec<(usize, f64)>,
}

#[derive(Serialize, Deserialize)]
struct ModelDump {
    version: u32,
    scheme: Scheme,
    dims: usize,
    routing: Routing,
    primary: Vec<HyperplaneDump>,
    secondary: Option<Vec<HyperplaneDump>>,
}

const MODEL_VERSION: u32 = 1;

fn dump_bank(bank: &HyperplaneBank) -> Vec<HyperplaneDump> {
    bank.hyperplanes
        .iter()
        .map(|h| HyperplaneDump {
            class_pair: h.class_pair,
            bias: h.bias,
            weights: h
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(d, w)| (d, *w))
                .collect(),
        })
        .collect()
}

fn load_bank(dump: Vec<HyperplaneDump>, dims: usize) -> HyperplaneBank {
    let hyperplanes = dump
        .into_iter()
        .map(|h| {
            let mut weights = vec![0.0; dims];
            for (d, w) in h.weights {
                if d < dims {
                    weights[d] = w;
                }
            }
            DecisionHyperplane { weights, bias: h.bias, class_pair: h.class_pair }
        })
        .collect();
    HyperplaneBank { hyperplanes }
}

impl OvoLinearModel {
    /// Versioned text dump that round-trips exactly.
    pub fn to_model_string(&self) -> String {
        let dump = ModelDump {
            version: MODEL_VERSION,
            scheme: self.scheme,
            dims: self.dims,
            routing: self.routing,
            primary: dump_bank(&self.primary),
            secondary: self.secondary.as_ref().map(dump_bank),
        };
        serde_json::to_string_pretty(&dump).expect("model serialization cannot fail")
    }

    pub fn from_model_string(s: &str) -> Result<OvoLinearModel, ClassifierError> {
        let dump: ModelDump =
            serde_json::from_str(s).map_err(|e| ClassifierError::BadModel(e.to_string()))?;
        if dump.version != MODEL_VERSION {
            return Err(ClassifierError::BadModel(format!(
                "unsupported model version {}",
                dump.version
            )));
        }
        Ok(OvoLinearModel {
            scheme: dump.scheme,
            dims: dump.dims,
            routing: dump.routing,
            primary: load_bank(dump.primary, dump.dims),
            secondary: dump.secondary.map(|b| load_bank(b, dump.dims)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CoarseRelation as C;

    fn dense(values: &[f64]) -> SparseVector {
        values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(d, v)| (d, *v))
            .collect()
    }

    fn label(c: C) -> RelationLabel {
        RelationLabel::Coarse(c)
    }

    /// Three well-separated clusters in the plane.
    fn separable_three_class(per_class: usize) -> Vec<(SparseVector, RelationLabel)> {
        let mut data = Vec::new();
        let centers = [(10.0, 0.0, C::Before), (0.0, 10.0, C::After), (-10.0, -10.0, C::Overlap)];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (cx, cy, class) in centers {
            for _ in 0..per_class {
                let x = cx + rng.gen_range(-1.0..1.0);
                let y = cy + rng.gen_range(-1.0..1.0);
                data.push((dense(&[x, y]), label(class)));
            }
        }
        data
    }

    #[test]
    fn separable_data_trains_to_perfect_accuracy() {
        let data = separable_three_class(40);
        let model = train(&data, Scheme::Coarse3, 2, &TrainConfig::default()).unwrap();
        let correct = data
            .iter()
            .filter(|(x, l)| model.primary.classify(Scheme::Coarse3, x).0 == *l)
            .count();
        assert_eq!(correct, data.len());
    }

    #[test]
    fn three_classes_have_three_hyperplanes() {
        let data = separable_three_class(5);
        let model = train(&data, Scheme::Coarse3, 2, &TrainConfig::default()).unwrap();
        assert_eq!(model.primary.hyperplanes.len(), 3);
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let data = separable_three_class(10);
        let a = train(&data, Scheme::Coarse3, 2, &TrainConfig::default()).unwrap();
        let b = train(&data, Scheme::Coarse3, 2, &TrainConfig::default()).unwrap();
        assert_eq!(a, b);
        let other =
            train(&data, Scheme::Coarse3, 2, &TrainConfig { seed: 9, ..Default::default() })
                .unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn missing_class_is_named_in_the_error() {
        let data = vec![(dense(&[1.0]), label(C::Before)), (dense(&[-1.0]), label(C::After))];
        match train(&data, Scheme::Coarse3, 1, &TrainConfig::default()) {
            Err(ClassifierError::EmptyClass(name)) => assert_eq!(name, "OVERLAP"),
            other => panic!("expected EmptyClass, got {other:?}"),
        }
    }

    #[test]
    fn distance_is_plain_dot_product_arithmetic() {
        let h = DecisionHyperplane {
            weights: vec![1.0, 0.0],
            bias: 0.0,
            class_pair: (label(C::Before), label(C::After)),
        };
        assert_eq!(h.distance(&dense(&[2.0, 5.0])), 2.0);
        let h = DecisionHyperplane { bias: 0.75, ..h };
        assert_eq!(h.distance(&Vec::new()), 0.75);
    }

    fn hand_model() -> OvoLinearModel {
        // three fixed separators over (before, after, overlap)
        let hyperplanes = vec![
            DecisionHyperplane {
                weights: vec![1.0, -1.0],
                bias: 0.5,
                class_pair: (label(C::Before), label(C::After)),
            },
            DecisionHyperplane {
                weights: vec![2.0, 0.0],
                bias: -1.0,
                class_pair: (label(C::Before), label(C::Overlap)),
            },
            DecisionHyperplane {
                weights: vec![0.0, 1.0],
                bias: 0.0,
                class_pair: (label(C::After), label(C::Overlap)),
            },
        ];
        OvoLinearModel {
            scheme: Scheme::Coarse3,
            dims: 2,
            routing: Routing::Single,
            primary: HyperplaneBank { hyperplanes },
            secondary: None,
        }
    }

    #[test]
    fn hand_computed_distances_votes_and_confidence() {
        let model = hand_model();
        let x = dense(&[2.0, 1.0]);
        let d: Vec<f64> = model.primary.hyperplanes.iter().map(|h| h.distance(&x)).collect();
        assert_eq!(d, vec![1.5, 3.0, 1.0]);
        // votes: before (d0>0), before (d1>0), after (d2>0)
        let (winner, votes) = model.primary.classify(Scheme::Coarse3, &x);
        assert_eq!(winner, label(C::Before));
        assert_eq!(votes.counts[&label(C::Before)], 2);
        assert_eq!(votes.counts[&label(C::After)], 1);
        assert_eq!(votes.total(), 3);
        // confidence sums the two hyperplanes separating BEFORE
        let phi = model.primary.confidence(Scheme::Coarse3, &x);
        assert!((phi - (1.5 + 3.0)).abs() < 1e-12);
        assert!(
            (model.primary.normalized_confidence(Scheme::Coarse3, &x) - phi / 2.0).abs() < 1e-12
        );
    }

    #[test]
    fn two_class_confidence_is_absolute_distance() {
        let h = DecisionHyperplane {
            weights: vec![1.0],
            bias: -0.25,
            class_pair: (label(C::Before), label(C::After)),
        };
        let bank = HyperplaneBank { hyperplanes: vec![h] };
        let x = dense(&[-3.0]);
        let (winner, votes) = bank.classify(Scheme::Coarse3, &x);
        assert_eq!(winner, label(C::After));
        assert_eq!(votes.total(), 1);
        let phi = bank.confidence(Scheme::Coarse3, &x);
        assert!((phi - 3.25).abs() < 1e-12);
    }

    #[test]
    fn cyclic_tie_breaks_by_scheme_order() {
        // before beats after, overlap beats before, after beats overlap
        let hyperplanes = vec![
            DecisionHyperplane {
                weights: vec![0.0],
                bias: 1.0,
                class_pair: (label(C::Before), label(C::After)),
            },
            DecisionHyperplane {
                weights: vec![0.0],
                bias: -1.0,
                class_pair: (label(C::Before), label(C::Overlap)),
            },
            DecisionHyperplane {
                weights: vec![0.0],
                bias: 1.0,
                class_pair: (label(C::After), label(C::Overlap)),
            },
        ];
        let bank = HyperplaneBank { hyperplanes };
        let (winner, votes) = bank.classify(Scheme::Coarse3, &Vec::new());
        assert!(votes.counts.values().all(|v| *v == 1));
        assert_eq!(winner, label(C::Before));
    }

    #[test]
    fn classification_is_invariant_under_joint_positive_scaling() {
        let model = hand_model();
        let mut scaled = model.clone();
        for h in &mut scaled.primary.hyperplanes {
            for w in &mut h.weights {
                *w *= 7.5;
            }
            h.bias *= 7.5;
        }
        for point in [[2.0, 1.0], [-1.0, 4.0], [0.0, -2.0], [3.0, 3.0]] {
            let x = dense(&point);
            assert_eq!(
                model.primary.classify(Scheme::Coarse3, &x).0,
                scaled.primary.classify(Scheme::Coarse3, &x).0
            );
        }
    }

    #[test]
    fn moving_away_from_all_separating_hyperplanes_raises_confidence() {
        let model = hand_model();
        let x = dense(&[2.0, 1.0]);
        let phi = model.primary.confidence(Scheme::Coarse3, &x);
        // both separating hyperplanes of BEFORE have positive weight on
        // dimension 0, so growing it moves away from both
        let further = dense(&[4.0, 1.0]);
        let phi2 = model.primary.confidence(Scheme::Coarse3, &further);
        assert!(phi2 > phi);
    }

    #[test]
    fn model_file_round_trips_exactly() {
        let data = separable_three_class(10);
        let model = train(&data, Scheme::Coarse3, 2, &TrainConfig::default()).unwrap();
        let text = model.to_model_string();
        let loaded = OvoLinearModel::from_model_string(&text).unwrap();
        assert_eq!(model, loaded);
        assert_eq!(text, loaded.to_model_string());
    }
}
