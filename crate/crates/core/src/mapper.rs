//! Building-height estimators.
//!
//! [`run_4plb`] is the bootstrapped co-training estimator: signals are
//! labelled by a C/N0 classifier, a 4PL map classifier is fitted against
//! intersection height, signals are relabelled by whether they pass above the
//! map classifier's inflection point, and the signal classifier is refitted
//! on those labels. The loop repeats until the map labelling settles.
//!
//! [`run_4pl`], [`run_hinge`] and [`run_bayes`] are single-pass baselines
//! driven by the same initial signal classifier.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::BuildingDataset;
use crate::signal_model::{
    fit_4pl_mle, label_by_height, label_by_signal, signal_classifier, FitError, FitOptions, FourPLParams,
    LabeledTuple, P_CLAMP,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapperError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("no estimates to evaluate")]
    NoEstimates,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub max_iterations: usize,
    /// Stop when fewer than this fraction of map labels change.
    pub label_change_fraction: f64,
    /// Stop when no map parameter moves by more than this relative amount.
    pub param_rel_tol: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig { max_iterations: 10, label_change_fraction: 0.01, param_rel_tol: 1e-4 }
    }
}

impl ConvergenceConfig {
    pub fn validate(&self) -> Result<(), MapperError> {
        if self.max_iterations < 1 {
            return Err(MapperError::Config("max_iterations must be at least 1".into()));
        }
        if !(self.label_change_fraction > 0.0 && self.label_change_fraction < 1.0) {
            return Err(MapperError::Config(format!(
                "label_change_fraction must lie in (0, 1), got {}",
                self.label_change_fraction
            )));
        }
        if !(self.param_rel_tol >= 0.0) {
            return Err(MapperError::Config("param_rel_tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Point estimate and range read off a fitted map classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeightRange {
    /// `c + 1.5 / b`.
    pub point: f64,
    /// `c`.
    pub range_low: f64,
    /// `c + 3 / b`.
    pub range_high: f64,
}

impl HeightRange {
    pub fn from_map_params(p: &FourPLParams) -> Self {
        HeightRange { point: p.c + 1.5 / p.b, range_low: p.c, range_high: p.c + 3.0 / p.b }
    }

    pub fn width(&self) -> f64 {
        self.range_high - self.range_low
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationSnapshot {
    pub iteration: usize,
    pub map_params: FourPLParams,
    pub signal_params: FourPLParams,
    /// Map labels that differ from the previous iteration's map labels
    /// (all of them on the first iteration).
    pub labels_changed: usize,
    pub open_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    LabelsSettled,
    ParametersSettled,
    IterationCap,
    SinglePass,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightEstimate {
    /// Absent when no map fit succeeded.
    #[serde(flatten)]
    pub height: Option<HeightRange>,
    pub map_params: Option<FourPLParams>,
    pub signal_params: FourPLParams,
    pub converged: bool,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub failure: Option<String>,
    pub trace: Vec<IterationSnapshot>,
}

impl HeightEstimate {
    pub fn point(&self) -> Option<f64> {
        self.height.map(|h| h.point)
    }
}

/// Initial map classifier: `a = 0.9, b = 1 /m, c = median height, d = 0.1`.
pub fn initial_map_params(heights: &[f64]) -> FourPLParams {
    FourPLParams { a: 0.9, b: 1.0, c: median(heights), d: 0.1 }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn labeled(labels: &[bool], xs: &[f64]) -> Vec<LabeledTuple> {
    labels.iter().zip(xs).map(|(&y, &x)| LabeledTuple { y, x }).collect()
}

fn max_relative_change(prev: &FourPLParams, next: &FourPLParams) -> f64 {
    [(prev.a, next.a), (prev.b, next.b), (prev.c, next.c), (prev.d, next.d)]
        .iter()
        .map(|(p, n)| (n - p).abs() / p.abs().max(1e-12))
        .fold(0.0, f64::max)
}

/// Bootstrapped 4PL estimator.
///
/// Stops at the first of: fewer than `label_change_fraction` of the map
/// labels changed since the previous iteration; no map parameter moved by
/// more than `param_rel_tol`; `max_iterations` reached (not converged). A
/// single-class labelling ends the run as not converged with a failure
/// reason instead of an error.
pub fn run_4plb(
    ds: &BuildingDataset,
    init_signal: &FourPLParams,
    cfg: &ConvergenceConfig,
) -> Result<HeightEstimate, MapperError> {
    run_4plb_with(ds, init_signal, cfg, &FitOptions::default())
}

pub fn run_4plb_with(
    ds: &BuildingDataset,
    init_signal: &FourPLParams,
    cfg: &ConvergenceConfig,
    fit_opts: &FitOptions,
) -> Result<HeightEstimate, MapperError> {
    if ds.is_empty() {
        return Err(MapperError::EmptyDataset);
    }
    init_signal.validate()?;
    cfg.validate()?;

    let heights: Vec<f64> = ds.heights().collect();
    let cn0: Vec<Option<f64>> = ds.tuples.iter().map(|t| t.cn0).collect();
    let received: Vec<(usize, f64)> = cn0.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))).collect();
    let n = heights.len();

    let mut signal = *init_signal;
    let mut map_init = initial_map_params(&heights);
    let mut prev_map: Option<(FourPLParams, Vec<bool>)> = None;
    let mut trace = Vec::new();

    let finish = |prev_map: Option<(FourPLParams, Vec<bool>)>,
                  signal: FourPLParams,
                  trace: Vec<IterationSnapshot>,
                  iterations: usize,
                  converged: bool,
                  stop_reason: StopReason,
                  failure: Option<String>| {
        let map_params = prev_map.map(|(p, _)| p);
        HeightEstimate {
            height: map_params.as_ref().map(HeightRange::from_map_params),
            map_params,
            signal_params: signal,
            converged,
            iterations,
            stop_reason,
            failure,
            trace,
        }
    };

    for iteration in 1..=cfg.max_iterations {
        let signal_labels = label_by_signal(&signal, &cn0);
        let map_fit = match fit_4pl_mle(&labeled(&signal_labels, &heights), &map_init, fit_opts) {
            Ok(fit) => fit,
            Err(e @ (FitError::Degenerate(_) | FitError::InsufficientData { .. })) => {
                let reason = format!("iteration {iteration}: signal labelling unusable for the map fit: {e}");
                return Ok(finish(prev_map, signal, trace, iteration, false, StopReason::Degenerate, Some(reason)));
            }
            Err(e) => return Err(e.into()),
        };
        let map = map_fit.params;
        map_init = map;
        let map_labels = label_by_height(map.c, &heights);
        let changed = match &prev_map {
            Some((_, prev)) => prev.iter().zip(&map_labels).filter(|(a, b)| a != b).count(),
            None => n,
        };
        let open_count = map_labels.iter().filter(|y| **y).count();
        trace.push(IterationSnapshot { iteration, map_params: map, signal_params: signal, labels_changed: changed, open_count });

        let stop = prev_map.as_ref().and_then(|(prev_params, _)| {
            if (changed as f64) < cfg.label_change_fraction * n as f64 {
                Some(StopReason::LabelsSettled)
            } else if max_relative_change(prev_params, &map) < cfg.param_rel_tol {
                Some(StopReason::ParametersSettled)
            } else {
                None
            }
        });
        prev_map = Some((map, map_labels));
        if let Some(reason) = stop {
            return Ok(finish(prev_map, signal, trace, iteration, true, reason, None));
        }
        if iteration == cfg.max_iterations {
            break;
        }

        let labels = &prev_map.as_ref().expect("set above").1;
        let signal_tuples: Vec<LabeledTuple> =
            received.iter().map(|&(i, x)| LabeledTuple { y: labels[i], x }).collect();
        match fit_4pl_mle(&signal_tuples, &signal, fit_opts) {
            Ok(fit) => signal = fit.params,
            Err(e @ (FitError::Degenerate(_) | FitError::InsufficientData { .. })) => {
                let reason = format!("iteration {iteration}: height labelling unusable for the signal fit: {e}");
                return Ok(finish(prev_map, signal, trace, iteration, false, StopReason::Degenerate, Some(reason)));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(finish(prev_map, signal, trace, cfg.max_iterations, false, StopReason::IterationCap, None))
}

/// Non-bootstrapped 4PL: one signal labelling, one map fit.
pub fn run_4pl(ds: &BuildingDataset, init_signal: &FourPLParams) -> Result<HeightEstimate, MapperError> {
    let cfg = ConvergenceConfig { max_iterations: 1, ..Default::default() };
    let mut est = run_4plb(ds, init_signal, &cfg)?;
    if est.failure.is_none() {
        est.converged = true;
        est.stop_reason = StopReason::SinglePass;
    }
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HingeEstimate {
    pub height: f64,
    pub loss: f64,
    /// Set when one label class is empty and the boundary was returned.
    pub one_class: bool,
}

/// Misclassification hinge loss of a candidate height.
pub fn hinge_loss(height: f64, heights: &[f64], open: &[bool]) -> f64 {
    heights
        .iter()
        .zip(open)
        .map(|(&h, &y)| if y { (height - h).max(0.0) } else { (h - height).max(0.0) })
        .sum()
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimisation of a unimodal function on `[lo, hi]`
/// down to an interval of width `tol`.
pub(crate) fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Hinge-loss baseline over signal labels from `init_signal`.
///
/// The loss is convex and piecewise linear in the candidate height. The
/// golden-section minimiser is widened to the full set of minimising
/// heights, whose midpoint is returned.
pub fn run_hinge(ds: &BuildingDataset, init_signal: &FourPLParams) -> Result<HingeEstimate, MapperError> {
    if ds.is_empty() {
        return Err(MapperError::EmptyDataset);
    }
    init_signal.validate()?;
    let heights: Vec<f64> = ds.heights().collect();
    let cn0: Vec<Option<f64>> = ds.tuples.iter().map(|t| t.cn0).collect();
    let open = label_by_signal(init_signal, &cn0);
    Ok(hinge_from_labels(&heights, &open))
}

pub fn hinge_from_labels(heights: &[f64], open: &[bool]) -> HingeEstimate {
    let loss = |h: f64| hinge_loss(h, heights, open);
    let lo = heights.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = heights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let opens = open.iter().filter(|y| **y).count();
    if opens == 0 || opens == open.len() {
        let height = if opens == 0 { hi } else { lo };
        return HingeEstimate { height, loss: loss(height), one_class: true };
    }

    let guess = golden_section_min(loss, lo, hi, 0.01);
    let mut breaks: Vec<f64> = heights.to_vec();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let pos = breaks.partition_point(|b| *b < guess);
    let mut best = loss(guess);
    let mut left = pos;
    let mut right = pos;
    if pos > 0 {
        best = best.min(loss(breaks[pos - 1]));
    }
    if pos < breaks.len() {
        best = best.min(loss(breaks[pos]));
    }
    let tol = 1e-9 * (1.0 + best.abs());
    // widen to the extreme breakpoints attaining the minimum
    while left > 0 && loss(breaks[left - 1]) <= best + tol {
        left -= 1;
    }
    while right < breaks.len() && loss(breaks[right]) <= best + tol {
        right += 1;
    }
    let height = if right > left {
        0.5 * (breaks[left] + breaks[right - 1])
    } else {
        // the minimum lies strictly between two breakpoints only on a plateau,
        // which the widening above already covers; keep the search result
        guess
    };
    HingeEstimate { height, loss: loss(height), one_class: false }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesEstimate {
    pub height: f64,
    pub log_likelihood: f64,
}

/// Candidate spacing of the Bayes grid, metres.
pub const BAYES_GRID_STEP: f64 = 0.01;

/// Whole-dataset likelihood baseline: a candidate height implies each
/// signal is open iff it passes above it; the signal classifier supplies
/// the label probabilities. Returns the first grid argmax.
pub fn run_bayes(ds: &BuildingDataset, signal_params: &FourPLParams) -> Result<BayesEstimate, MapperError> {
    run_bayes_on_grid(ds, signal_params, BAYES_GRID_STEP)
}

pub fn run_bayes_on_grid(
    ds: &BuildingDataset,
    signal_params: &FourPLParams,
    step: f64,
) -> Result<BayesEstimate, MapperError> {
    if ds.is_empty() {
        return Err(MapperError::EmptyDataset);
    }
    signal_params.validate()?;
    if !(step > 0.0) {
        return Err(MapperError::Config(format!("grid step must be positive, got {step}")));
    }
    // (height, ln P, ln (1 - P)) sorted by height
    let mut rows: Vec<(f64, f64, f64)> = ds
        .tuples
        .iter()
        .map(|t| {
            let p = signal_classifier(signal_params, t.cn0).clamp(P_CLAMP, 1.0 - P_CLAMP);
            (t.height, p.ln(), (1.0 - p).ln())
        })
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    // prefix[k] = sum of ln(1-P) over the k lowest; suffix[k] = sum of ln P over the rest
    let n = rows.len();
    let mut closed_prefix = vec![0.0; n + 1];
    for (k, r) in rows.iter().enumerate() {
        closed_prefix[k + 1] = closed_prefix[k] + r.2;
    }
    let mut open_suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        open_suffix[k] = open_suffix[k + 1] + rows[k].1;
    }
    let lo = rows[0].0;
    let hi = rows[n - 1].0;
    // the last candidate is pinned to the top height so it is never lost to rounding
    let steps = ((hi - lo) / step - 1e-9).ceil().max(0.0) as usize;
    let mut best = (lo, f64::NEG_INFINITY);
    let mut k = 0;
    for i in 0..=steps {
        let h = if i == steps { hi } else { lo + i as f64 * step };
        while k < n && rows[k].0 <= h {
            k += 1;
        }
        let ll = closed_prefix[k] + open_suffix[k];
        if ll > best.1 {
            best = (h, ll);
        }
    }
    Ok(BayesEstimate { height: best.0, log_likelihood: best.1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "4plb")]
    FourPlB,
    #[serde(rename = "4pl")]
    FourPl,
    #[serde(rename = "hinge")]
    Hinge,
    #[serde(rename = "bayes")]
    Bayes,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::FourPlB, Algorithm::FourPl, Algorithm::Hinge, Algorithm::Bayes];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::FourPlB => "4plb",
            Algorithm::FourPl => "4pl",
            Algorithm::Hinge => "hinge",
            Algorithm::Bayes => "bayes",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected 4plb, 4pl, hinge or bayes)"))
    }
}

/// Outcome of any estimator in a common shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmResult {
    pub algorithm: Algorithm,
    pub converged: bool,
    pub point: Option<f64>,
    pub range: Option<(f64, f64)>,
    pub iterations: usize,
}

impl AlgorithmResult {
    pub fn from_estimate(algorithm: Algorithm, est: &HeightEstimate) -> Self {
        AlgorithmResult {
            algorithm,
            converged: est.converged,
            point: est.point(),
            range: est.height.map(|h| (h.range_low, h.range_high)),
            iterations: est.iterations,
        }
    }

    pub fn from_height(algorithm: Algorithm, height: f64) -> Self {
        AlgorithmResult { algorithm, converged: true, point: Some(height), range: None, iterations: 1 }
    }
}

/// Runs one algorithm with the initial signal classifier `init_signal`.
pub fn run_algorithm(
    algorithm: Algorithm,
    ds: &BuildingDataset,
    init_signal: &FourPLParams,
    cfg: &ConvergenceConfig,
) -> Result<AlgorithmResult, MapperError> {
    Ok(match algorithm {
        Algorithm::FourPlB => AlgorithmResult::from_estimate(algorithm, &run_4plb(ds, init_signal, cfg)?),
        Algorithm::FourPl => AlgorithmResult::from_estimate(algorithm, &run_4pl(ds, init_signal)?),
        Algorithm::Hinge => AlgorithmResult::from_height(algorithm, run_hinge(ds, init_signal)?.height),
        Algorithm::Bayes => AlgorithmResult::from_height(algorithm, run_bayes(ds, init_signal)?.height),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub estimates: usize,
    pub converged: usize,
    /// `None` when nothing converged.
    pub rmse: Option<f64>,
    pub min_point: Option<f64>,
    pub max_point: Option<f64>,
    /// Mean width of the reported uncertainty ranges, when any were given.
    pub mean_range_width: Option<f64>,
    pub no_result: bool,
}

/// RMSE and spread of the converged estimates against `truth`.
pub fn evaluate(results: &[AlgorithmResult], truth: f64) -> Result<EvaluationReport, MapperError> {
    if results.is_empty() {
        return Err(MapperError::NoEstimates);
    }
    let points: Vec<f64> = results.iter().filter(|r| r.converged).filter_map(|r| r.point).collect();
    let widths: Vec<f64> =
        results.iter().filter(|r| r.converged).filter_map(|r| r.range.map(|(lo, hi)| hi - lo)).collect();
    let rmse = (!points.is_empty())
        .then(|| (points.iter().map(|p| (p - truth).powi(2)).sum::<f64>() / points.len() as f64).sqrt());
    Ok(EvaluationReport {
        estimates: results.len(),
        converged: points.len(),
        rmse,
        min_point: points.iter().copied().reduce(f64::min),
        max_point: points.iter().copied().reduce(f64::max),
        mean_range_width: (!widths.is_empty()).then(|| widths.iter().sum::<f64>() / widths.len() as f64),
        no_result: points.is_empty(),
    })
}

/// Initial signal classifiers of a threshold sweep: fixed `a, b, d` and the
/// inflection point stepped over `[c_min, c_max]` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub c_step: f64,
    pub convergence: ConvergenceConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            a: 0.9,
            b: 0.2,
            d: 0.1,
            c_min: 20.0,
            c_max: 40.0,
            c_step: 1.0,
            convergence: ConvergenceConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn thresholds(&self) -> Result<Vec<f64>, MapperError> {
        if !(self.c_step > 0.0) || !(self.c_max >= self.c_min) || !self.c_min.is_finite() || !self.c_max.is_finite() {
            return Err(MapperError::Config(format!(
                "sweep needs c_min <= c_max and c_step > 0 (got {}, {}, {})",
                self.c_min, self.c_max, self.c_step
            )));
        }
        let count = ((self.c_max - self.c_min) / self.c_step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|k| self.c_min + k as f64 * self.c_step).collect())
    }

    pub fn init_for(&self, c: f64) -> Result<FourPLParams, MapperError> {
        Ok(FourPLParams::new(self.a, self.b, c, self.d)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub init_c_dbhz: f64,
    #[serde(flatten)]
    pub result: AlgorithmResult,
}

/// Runs every algorithm for every threshold. Rows are ordered by threshold,
/// then by algorithm in [`Algorithm::ALL`] order.
pub fn run_sweep(ds: &BuildingDataset, cfg: &SweepConfig) -> Result<Vec<SweepRow>, MapperError> {
    let jobs: Vec<(f64, Algorithm)> = cfg
        .thresholds()?
        .into_iter()
        .flat_map(|c| Algorithm::ALL.into_iter().map(move |a| (c, a)))
        .collect();
    log::info!("sweep: {} runs over {} tuples", jobs.len(), ds.len());
    jobs.par_iter()
        .map(|&(c, algorithm)| {
            let init = cfg.init_for(c)?;
            let result = run_algorithm(algorithm, ds, &init, &cfg.convergence)?;
            Ok(SweepRow { init_c_dbhz: c, result })
        })
        .collect()
}

/// Per-algorithm evaluation of sweep rows.
pub fn summarize_sweep(rows: &[SweepRow], truth: f64) -> Vec<(Algorithm, EvaluationReport)> {
    Algorithm::ALL
        .into_iter()
        .filter_map(|alg| {
            let results: Vec<AlgorithmResult> =
                rows.iter().filter(|r| r.result.algorithm == alg).map(|r| r.result.clone()).collect();
            evaluate(&results, truth).ok().map(|rep| (alg, rep))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{ObservationTuple, Provenance};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(rows: &[(Option<f64>, f64)]) -> BuildingDataset {
        BuildingDataset {
            building_id: "t".into(),
            tuples: rows
                .iter()
                .enumerate()
                .map(|(i, &(cn0, height))| ObservationTuple { label: None, cn0, height, truth: None, source_index: i })
                .collect(),
            provenance: Provenance::default(),
        }
    }

    #[test]
    fn height_range_identities() {
        let p = FourPLParams::new(0.9, 0.5, 20.0, 0.1).unwrap();
        let r = HeightRange::from_map_params(&p);
        assert_eq!(r.range_low, 20.0);
        assert_eq!(r.point, 23.0);
        assert_eq!(r.range_high, 26.0);
        assert!(r.range_low < r.point && r.point < r.range_high);
    }

    #[test]
    fn all_blocked_is_a_degenerate_result() {
        let ds = dataset(&(0..30).map(|i| (None, i as f64)).collect::<Vec<_>>());
        let init = FourPLParams::new(0.9, 0.2, 30.0, 0.1).unwrap();
        let est = run_4plb(&ds, &init, &ConvergenceConfig::default()).unwrap();
        assert!(!est.converged);
        assert_eq!(est.stop_reason, StopReason::Degenerate);
        assert!(est.failure.as_deref().unwrap().contains("same label"));
        assert!(est.height.is_none());
        assert_eq!(est.iterations, 1);
    }

    #[test]
    fn convergence_config_validation() {
        let bad = ConvergenceConfig { max_iterations: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = ConvergenceConfig { label_change_fraction: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn fixed_point_converges_quickly() {
        // C/N0 and height agree on a boundary at 15 m / 30 dB-Hz
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<_> = (0..400)
            .map(|_| {
                let h: f64 = rng.random_range(0.0..30.0);
                let cn0 = if h > 15.0 { rng.random_range(36.0..50.0) } else { rng.random_range(12.0..24.0) };
                (Some(cn0), h)
            })
            .collect();
        let ds = dataset(&rows);
        let est = run_4plb(&ds, &FourPLParams::new(0.9, 0.2, 30.0, 0.1).unwrap(), &ConvergenceConfig::default()).unwrap();
        assert!(est.converged, "{est:?}");
        assert!(est.iterations <= 2);
        let h = est.height.unwrap();
        assert!(h.range_low > 14.0 && h.range_low < 16.0, "{h:?}");
    }

    #[test]
    fn single_pass_matches_first_bootstrap_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<_> = (0..300)
            .map(|_| {
                let h: f64 = rng.random_range(0.0..40.0);
                let open = h > 20.0;
                let cn0 = if open { 40.0 } else { 25.0 } + rng.random_range(-8.0..8.0);
                (Some(cn0), h)
            })
            .collect();
        let ds = dataset(&rows);
        let init = FourPLParams::new(0.9, 0.2, 32.0, 0.1).unwrap();
        let single = run_4pl(&ds, &init).unwrap();
        let boot = run_4plb(&ds, &init, &ConvergenceConfig::default()).unwrap();
        assert_eq!(single.map_params.unwrap(), boot.trace[0].map_params);
        assert_eq!(single.iterations, 1);
        assert!(single.converged);
    }

    #[test]
    fn hinge_plateau_midpoint() {
        let heights = [1.0, 2.0, 3.0, 7.0, 8.0, 9.0];
        let open = [false, false, false, true, true, true];
        let est = hinge_from_labels(&heights, &open);
        assert_eq!(est.loss, 0.0);
        assert_eq!(est.height, 5.0);
    }

    fn brute_force_hinge(heights: &[f64], open: &[bool], step: f64) -> (f64, f64) {
        let lo = heights.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = heights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let steps = ((hi - lo) / step).round() as usize;
        (0..=steps)
            .map(|i| lo + i as f64 * step)
            .map(|h| (h, hinge_loss(h, heights, open)))
            .fold((lo, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    #[test]
    fn hinge_matches_grid_oracle() {
        let mut heights = vec![10.0];
        let mut open = vec![true];
        heights.extend([20.0; 9]);
        open.extend([false; 9]);
        let est = hinge_from_labels(&heights, &open);
        let (grid_h, grid_loss) = brute_force_hinge(&heights, &open, 0.01);
        assert!((est.height - grid_h).abs() <= 0.01, "{est:?} vs {grid_h}");
        assert!((est.loss - grid_loss).abs() < 1e-9);
    }

    #[test]
    fn hinge_random_cases_match_oracle_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let n = rng.random_range(5..40);
            let heights: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..30.0)).collect();
            let open: Vec<bool> = heights.iter().map(|h| rng.random_bool(if *h > 15.0 { 0.8 } else { 0.2 })).collect();
            let est = hinge_from_labels(&heights, &open);
            let (_, grid_loss) = brute_force_hinge(&heights, &open, 0.01);
            // the search result is a true minimiser, so never worse than the grid
            assert!(est.loss <= grid_loss + 1e-9, "{} > {}", est.loss, grid_loss);
        }
    }

    #[test]
    fn hinge_one_class_returns_boundary() {
        let est = hinge_from_labels(&[1.0, 5.0, 9.0], &[false, false, false]);
        assert!(est.one_class);
        assert_eq!(est.height, 9.0);
        let est = hinge_from_labels(&[1.0, 5.0, 9.0], &[true, true, true]);
        assert_eq!(est.height, 1.0);
    }

    #[test]
    fn bayes_step_data() {
        let calibrated = FourPLParams::new(0.95, 1.0, 30.0, 0.05).unwrap();
        let mut rows: Vec<_> = (0..=20).map(|i| (Some(15.0), 5.0 + 0.25 * i as f64)).collect();
        rows.extend((1..=20).map(|i| (Some(45.0), 10.0 + 0.25 * i as f64 - 0.2)));
        let est = run_bayes(&dataset(&rows), &calibrated).unwrap();
        // closed up to 10.0, open from 10.05
        assert!((est.height - 10.0).abs() <= 0.01 + 1e-9, "{est:?}");
    }

    #[test]
    fn bayes_grid_matches_finer_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = FourPLParams::new(0.9, 0.3, 30.0, 0.1).unwrap();
        for _ in 0..30 {
            // heights on a 0.05 m lattice so no optimal interval is narrower than the coarse grid
            let n = rng.random_range(5..25);
            let mut rows = Vec::new();
            for _ in 0..n {
                let h = f64::from(rng.random_range(0..400u32)) * 0.05;
                let cn0 = if rng.random_bool(0.1) { None } else { Some(rng.random_range(10.0..55.0)) };
                rows.push((cn0, h));
            }
            let ds = dataset(&rows);
            let coarse = run_bayes(&ds, &params).unwrap();
            let fine = run_bayes_on_grid(&ds, &params, 0.001).unwrap();
            assert!((coarse.height - fine.height).abs() <= 0.01 + 1e-9, "{coarse:?} vs {fine:?}");
            assert!((coarse.log_likelihood - fine.log_likelihood).abs() < 1e-9);
        }
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let x = golden_section_min(|x| (x - 3.3).powi(2), 0.0, 10.0, 1e-6);
        assert!((x - 3.3).abs() < 1e-6);
    }

    #[test]
    fn evaluate_examples() {
        let r = evaluate(&[AlgorithmResult::from_height(Algorithm::FourPlB, 45.6)], 47.0).unwrap();
        assert!((r.rmse.unwrap() - 1.4).abs() < 1e-12);
        let r = evaluate(&[AlgorithmResult::from_height(Algorithm::Hinge, 20.0)], 20.0).unwrap();
        assert_eq!(r.rmse, Some(0.0));
        let failed = AlgorithmResult { converged: false, ..AlgorithmResult::from_height(Algorithm::FourPlB, 1.0) };
        let r = evaluate(&[failed], 20.0).unwrap();
        assert!(r.no_result);
        assert_eq!(r.rmse, None);
        assert!(evaluate(&[], 1.0).is_err());
    }

    #[test]
    fn rmse_matches_direct_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let pts: Vec<f64> = (0..rng.random_range(1..30)).map(|_| rng.random_range(0.0..60.0)).collect();
            let truth = rng.random_range(10.0..50.0);
            let results: Vec<_> = pts.iter().map(|p| AlgorithmResult::from_height(Algorithm::Bayes, *p)).collect();
            let mut sum = 0.0;
            for p in &pts {
                sum += (p - truth) * (p - truth);
            }
            let direct = (sum / pts.len() as f64).sqrt();
            let r = evaluate(&results, truth).unwrap();
            assert!((r.rmse.unwrap() - direct).abs() <= 1e-12 * direct.max(1.0));
        }
    }

    #[test]
    fn sweep_thresholds() {
        let cfg = SweepConfig::default();
        let t = cfg.thresholds().unwrap();
        assert_eq!(t.len(), 21);
        assert_eq!((t[0], t[20]), (20.0, 40.0));
        let cfg = SweepConfig { c_max: 39.0, ..Default::default() };
        assert_eq!(cfg.thresholds().unwrap().len(), 20);
        assert!(SweepConfig { c_step: 0.0, ..Default::default() }.thresholds().is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("svm".parse::<Algorithm>().is_err());
    }
}
