use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::net::{train, Activation, MlpConfig, MlpModel, Solver};
use super::LabeledView;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationReport {
    /// Indexed by label: `[off route, on route]`.
    pub classes: [ClassMetrics; 2],
    pub accuracy: f64,
}

impl ClassificationReport {
    pub fn support_total(&self) -> usize {
        self.classes.iter().map(|c| c.support).sum()
    }
}

/// Per-class precision/recall/F1 with predictions thresholded at 0.5.
pub fn classify_report(model: &MlpModel, views: &[LabeledView]) -> Result<ClassificationReport> {
    if views.is_empty() {
        return Err(Error::Empty("test set is empty".into()));
    }
    // confusion[truth][predicted]
    let mut confusion = [[0usize; 2]; 2];
    for v in views {
        let predicted = (model.predict(&v.features)? >= 0.5) as usize;
        confusion[v.label as usize][predicted] += 1;
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let metrics = |c: usize| {
        let tp = confusion[c][c];
        let predicted = confusion[0][c] + confusion[1][c];
        let support = confusion[c][0] + confusion[c][1];
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassMetrics {
            precision,
            recall,
            f1,
            support,
        }
    };
    Ok(ClassificationReport {
        classes: [metrics(0), metrics(1)],
        accuracy: ratio(confusion[0][0] + confusion[1][1], views.len()),
    })
}

fn accuracy(model: &MlpModel, views: &[&LabeledView]) -> Result<f64> {
    let mut correct = 0;
    for v in views {
        if (model.predict(&v.features)? >= 0.5) == v.is_positive() {
            correct += 1;
        }
    }
    Ok(correct as f64 / views.len() as f64)
}

/// Fold id for every view: each class is shuffled with `seed`, then dealt
/// round-robin over `k` folds.
pub fn stratified_folds(views: &[LabeledView], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid("cross validation needs at least 2 folds"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; views.len()];
    for label in [0u8, 1] {
        let mut members: Vec<usize> = (0..views.len())
            .filter(|&i| views[i].label == label)
            .collect();
        if members.len() < k {
            return Err(Error::invalid(format!(
                "class {label} has {} views, too few for {k} stratified folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (j, i) in members.into_iter().enumerate() {
            fold[i] = j % k;
        }
    }
    Ok(fold)
}

/// Mean (validation, training) accuracy over the folds.
pub fn cross_validate(
    views: &[LabeledView],
    folds: &[usize],
    k: usize,
    config: &MlpConfig,
) -> Result<(f64, f64)> {
    let (mut test_sum, mut train_sum) = (0.0, 0.0);
    for f in 0..k {
        let train_set: Vec<LabeledView> = views
            .iter()
            .zip(folds)
            .filter(|(_, &g)| g != f)
            .map(|(v, _)| v.clone())
            .collect();
        let held: Vec<&LabeledView> = views
            .iter()
            .zip(folds)
            .filter(|(_, &g)| g == f)
            .map(|(v, _)| v)
            .collect();
        let model = train(&train_set, config)?;
        let train_refs: Vec<&LabeledView> = train_set.iter().collect();
        test_sum += accuracy(&model, &held)?;
        train_sum += accuracy(&model, &train_refs)?;
    }
    Ok((test_sum / k as f64, train_sum / k as f64))
}

/// Hyperparameter lists; every other field comes from `base`.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace {
    pub hidden_layers: Vec<Vec<usize>>,
    pub activation: Vec<Activation>,
    pub solver: Vec<Solver>,
    pub tol: Vec<f64>,
    pub learning_rate: Vec<f64>,
    pub base: MlpConfig,
}

impl SearchSpace {
    /// Cartesian product in enumeration order; config `i` is seeded with
    /// `base.seed + i`.
    pub fn configs(&self) -> Vec<MlpConfig> {
        let mut out = Vec::new();
        for hidden in &self.hidden_layers {
            for &activation in &self.activation {
                for &solver in &self.solver {
                    for &tol in &self.tol {
                        for &learning_rate in &self.learning_rate {
                            out.push(MlpConfig {
                                hidden_layers: hidden.clone(),
                                activation,
                                solver,
                                tol,
                                learning_rate,
                                seed: self.base.seed.wrapping_add(out.len() as u64),
                                ..self.base.clone()
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    /// Position in enumeration order.
    pub config_index: usize,
    pub config: MlpConfig,
    pub mean_test_score: f64,
    pub mean_train_score: f64,
    pub parameters: usize,
}

/// Exhaustive stratified k-fold search. Every config sees the same folds.
/// Ranked by validation accuracy, then fewer parameters, then enumeration
/// order.
pub fn grid_search(
    views: &[LabeledView],
    space: &SearchSpace,
    k: usize,
) -> Result<Vec<SearchResult>> {
    let configs = space.configs();
    if configs.is_empty() {
        return Err(Error::Empty("search space is empty".into()));
    }
    if views.is_empty() {
        return Err(Error::Empty("no views to search over".into()));
    }
    let folds = stratified_folds(views, k, space.base.seed)?;
    let inputs = views[0].features.len();
    let mut rows = configs
        .into_par_iter()
        .enumerate()
        .map(|(i, config)| {
            let (test, train) = cross_validate(views, &folds, k, &config)?;
            Ok(SearchResult {
                config_index: i,
                parameters: config.parameter_count(inputs),
                config,
                mean_test_score: test,
                mean_train_score: train,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| {
        b.mean_test_score
            .total_cmp(&a.mean_test_score)
            .then(a.parameters.cmp(&b.parameters))
            .then(a.config_index.cmp(&b.config_index))
    });
    Ok(rows)
}
