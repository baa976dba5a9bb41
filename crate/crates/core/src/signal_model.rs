//! Four-parameter logistic (4PL) classifier: evaluation, Bernoulli
//! log-likelihood with its analytic gradient, and maximum-likelihood fitting.
//!
//! The same machinery backs both classifiers of the bootstrap estimator: the
//! signal classifier (feature = C/N0 in dB-Hz) and the map classifier
//! (feature = intersection height in metres). Both are oriented so the open
//! probability increases with the feature (`b > 0`, `a > d`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probabilities are clamped to `[P_CLAMP, 1 - P_CLAMP]` inside logarithms.
pub const P_CLAMP: f64 = 1e-12;

/// Beyond this `|b (x - c)|` the logistic is taken as saturated.
const SATURATION: f64 = 700.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("invalid 4PL parameters: {0}")]
    InvalidParams(String),
    #[error("need at least {min} tuples to fit, got {got}")]
    InsufficientData { min: usize, got: usize },
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("non-finite objective: {0}")]
    Numerical(String),
}

/// `(a, b, c, d)` of `d + (a - d) / (1 + exp(-b (x - c)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourPLParams {
    /// Upper asymptote.
    pub a: f64,
    /// Slope, in 1/feature units.
    pub b: f64,
    /// Inflection point, in feature units.
    pub c: f64,
    /// Lower asymptote.
    pub d: f64,
}

impl FourPLParams {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, FitError> {
        let p = FourPLParams { a, b, c, d };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let FourPLParams { a, b, c, d } = *self;
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(FitError::InvalidParams(format!("non-finite value in {self:?}")));
        }
        if !(0.0 <= d && d < a && a <= 1.0) {
            return Err(FitError::InvalidParams(format!("need 0 <= d < a <= 1, got a={a}, d={d}")));
        }
        if b <= 0.0 {
            return Err(FitError::InvalidParams(format!("need b > 0, got {b}")));
        }
        Ok(())
    }

    /// Feature value at which the probability crosses 0.5, if it does.
    pub fn half_probability_point(&self) -> Option<f64> {
        if self.a <= 0.5 || self.d >= 0.5 {
            return None;
        }
        Some(self.c + ((0.5 - self.d) / (self.a - 0.5)).ln() / self.b)
    }
}

/// The standard logistic, saturating for large `|z|`.
pub(crate) fn logistic(z: f64) -> f64 {
    if z > SATURATION {
        1.0
    } else if z < -SATURATION {
        0.0
    } else if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn fourpl_eval(p: &FourPLParams, x: f64) -> f64 {
    p.d + (p.a - p.d) * logistic(p.b * (x - p.c))
}

/// Open probability of a signal; blocked signals (`None`) are closed with
/// certainty.
pub fn signal_classifier(p: &FourPLParams, cn0: Option<f64>) -> f64 {
    match cn0 {
        None => 0.0,
        Some(v) => fourpl_eval(p, v),
    }
}

/// One labelled observation for a 4PL fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledTuple {
    /// `true` = open.
    pub y: bool,
    pub x: f64,
}

/// Labels each C/N0 value open when its classifier probability is strictly
/// above one half.
pub fn label_by_signal(p: &FourPLParams, cn0: &[Option<f64>]) -> Vec<bool> {
    cn0.iter().map(|v| signal_classifier(p, *v) > 0.5).collect()
}

/// Labels each height open when it lies strictly above `c`.
pub fn label_by_height(c: f64, heights: &[f64]) -> Vec<bool> {
    heights.iter().map(|h| *h > c).collect()
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(P_CLAMP, 1.0 - P_CLAMP)
}

/// Bernoulli log-likelihood, probabilities clamped away from 0 and 1.
pub fn log_likelihood(p: &FourPLParams, tuples: &[LabeledTuple]) -> f64 {
    log_likelihood_with_clamps(p, tuples).0
}

/// Log-likelihood plus the number of tuples whose probability was clamped.
pub fn log_likelihood_with_clamps(p: &FourPLParams, tuples: &[LabeledTuple]) -> (f64, usize) {
    let mut ll = 0.0;
    let mut clamped = 0;
    for t in tuples {
        let raw = fourpl_eval(p, t.x);
        let pr = clamp_prob(raw);
        if pr != raw {
            clamped += 1;
        }
        ll += if t.y { pr.ln() } else { (1.0 - pr).ln() };
    }
    (ll, clamped)
}

/// Gradient of [`log_likelihood`] with respect to `(a, b, c, d)`. Tuples in
/// the clamped region contribute zero.
pub fn log_likelihood_grad(p: &FourPLParams, tuples: &[LabeledTuple]) -> [f64; 4] {
    let mut g = [0.0; 4];
    let span = p.a - p.d;
    for t in tuples {
        let dx = t.x - p.c;
        let s = logistic(p.b * dx);
        let pr = p.d + span * s;
        if !(P_CLAMP..=1.0 - P_CLAMP).contains(&pr) {
            continue;
        }
        let w = if t.y { 1.0 / pr } else { -1.0 / (1.0 - pr) };
        let k = span * s * (1.0 - s);
        g[0] += w * s;
        g[1] += w * k * dx;
        g[2] -= w * k * p.b;
        g[3] += w * (1.0 - s);
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the gradient norm in the unconstrained space.
    pub gradient_tolerance: f64,
    pub min_tuples: usize,
    /// Also start from a guess read off the data and keep the better fit.
    pub data_driven_start: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iterations: 500, gradient_tolerance: 1e-8, min_tuples: 8, data_driven_start: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    #[serde(flatten)]
    pub params: FourPLParams,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub clamp_activations: usize,
    #[serde(skip)]
    pub gradient_norm: f64,
}

/// Unconstrained coordinates: `(logit a, ln b, c, logit(d / a))`.
///
/// Every finite point maps to `0 < d < a < 1`, `b > 0`.
#[derive(Debug, Clone, Copy)]
struct Unconstrained([f64; 4]);

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Keeps an initial guess strictly inside the open box so its
/// unconstrained image is finite.
const INTERIOR_MARGIN: f64 = 1e-6;

impl Unconstrained {
    fn from_params(p: &FourPLParams) -> Self {
        let a = p.a.clamp(2.0 * INTERIOR_MARGIN, 1.0 - INTERIOR_MARGIN);
        let ratio = (p.d / a).clamp(INTERIOR_MARGIN, 1.0 - INTERIOR_MARGIN);
        Unconstrained([logit(a), p.b.ln(), p.c, logit(ratio)])
    }

    fn to_params(self) -> FourPLParams {
        let [ta, tb, tc, tr] = self.0;
        let a = logistic(ta);
        FourPLParams { a, b: tb.exp(), c: tc, d: a * logistic(tr) }
    }

    /// Chain rule from a natural-space gradient.
    fn pull_back(self, g: [f64; 4]) -> [f64; 4] {
        let p = self.to_params();
        let r = logistic(self.0[3]);
        let da = p.a * (1.0 - p.a);
        [
            g[0] * da + g[3] * r * da,
            g[1] * p.b,
            g[2],
            g[3] * p.a * r * (1.0 - r),
        ]
    }
}

fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64; 4]) -> f64 {
    dot(a, a).sqrt()
}

/// Negated objective and its gradient in unconstrained coordinates.
fn objective(theta: Unconstrained, tuples: &[LabeledTuple]) -> (f64, [f64; 4]) {
    let p = theta.to_params();
    let ll = log_likelihood(&p, tuples);
    let g = theta.pull_back(log_likelihood_grad(&p, tuples));
    (-ll, [-g[0], -g[1], -g[2], -g[3]])
}

/// Largest per-coordinate move of one line-search trial.
const MAX_STEP: f64 = 5.0;

/// Starting guess from the data: asymptotes from the label rates in the
/// lowest and highest fifths of `x`, inflection at the best single split
/// between those rates, slope from the spread of the middle three fifths.
pub fn data_driven_start(tuples: &[LabeledTuple]) -> FourPLParams {
    let mut sorted: Vec<(f64, bool)> = tuples.iter().map(|t| (t.x, t.y)).collect();
    sorted.sort_by(|l, r| l.0.total_cmp(&r.0));
    let n = sorted.len();
    let q = (n / 5).max(1);
    let rate = |s: &[(f64, bool)]| s.iter().filter(|t| t.1).count() as f64 / s.len() as f64;
    let mut lo = rate(&sorted[..q]);
    let mut hi = rate(&sorted[n - q..]);
    if hi - lo < 0.1 {
        let mean = rate(&sorted);
        lo = mean - 0.25;
        hi = mean + 0.25;
    }
    let a = hi.clamp(0.05, 0.99);
    let d = lo.clamp(0.01, a - 0.02);
    // split k puts sorted[..k] on the lower level; pick the least squared error
    let gain = |y: bool| {
        let y = if y { 1.0 } else { 0.0 };
        (y - d) * (y - d) - (y - a) * (y - a)
    };
    let (mut best_k, mut best, mut acc) = (n / 2, f64::INFINITY, 0.0);
    for k in 1..n {
        acc += gain(sorted[k - 1].1);
        if acc < best && sorted[k].0 > sorted[k - 1].0 {
            best = acc;
            best_k = k;
        }
    }
    let c = 0.5 * (sorted[best_k - 1].0 + sorted[best_k.min(n - 1)].0);
    let spread = sorted[n - q.min(n - 1) - 1].0 - sorted[q.min(n - 1)].0;
    let b = if spread > 0.0 { 4.0 / spread } else { 1.0 };
    FourPLParams { a, b, c, d }
}

/// Maximum-likelihood 4PL fit by BFGS with backtracking in the
/// unconstrained coordinates. Deterministic for given inputs.
///
/// With `opts.data_driven_start` a second ascent starts from
/// [`data_driven_start`] and the higher-likelihood result is kept, the
/// caller's start winning ties.
pub fn fit_4pl_mle(tuples: &[LabeledTuple], init: &FourPLParams, opts: &FitOptions) -> Result<FitResult, FitError> {
    init.validate()?;
    if tuples.len() < opts.min_tuples {
        return Err(FitError::InsufficientData { min: opts.min_tuples, got: tuples.len() });
    }
    let opens = tuples.iter().filter(|t| t.y).count();
    if opens == 0 || opens == tuples.len() {
        return Err(FitError::Degenerate(format!(
            "all {} tuples carry the same label ({})",
            tuples.len(),
            if opens == 0 { "closed" } else { "open" }
        )));
    }
    if let Some(t) = tuples.iter().find(|t| !t.x.is_finite()) {
        return Err(FitError::Numerical(format!("non-finite feature value {}", t.x)));
    }

    let primary = ascend(tuples, init, opts)?;
    if !opts.data_driven_start {
        return Ok(primary);
    }
    match ascend(tuples, &data_driven_start(tuples), opts) {
        Ok(alt) if alt.log_likelihood > primary.log_likelihood => Ok(alt),
        _ => Ok(primary),
    }
}

fn ascend(tuples: &[LabeledTuple], init: &FourPLParams, opts: &FitOptions) -> Result<FitResult, FitError> {
    let mut theta = Unconstrained::from_params(init);
    let (mut f, mut g) = objective(theta, tuples);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(FitError::Numerical(format!(
            "objective {f} / gradient {g:?} at init {init:?}"
        )));
    }
    // inverse Hessian approximation, row-major
    let identity = {
        let mut m = [[0.0; 4]; 4];
        (0..4).for_each(|i| m[i][i] = 1.0);
        m
    };
    let mut h = identity;
    let mut fresh = true;
    let mut iterations = 0;
    let mut converged = norm(&g) < opts.gradient_tolerance;

    while !converged && iterations < opts.max_iterations {
        let mut dir = [0.0; 4];
        for i in 0..4 {
            dir[i] = -(0..4).map(|j| h[i][j] * g[j]).sum::<f64>();
        }
        if dot(&dir, &g) >= 0.0 {
            h = identity;
            fresh = true;
            dir = [-g[0], -g[1], -g[2], -g[3]];
        }
        let biggest = dir.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if biggest > MAX_STEP {
            dir.iter_mut().for_each(|v| *v *= MAX_STEP / biggest);
        }
        let slope = dot(&dir, &g);

        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-16 {
            let trial = Unconstrained(std::array::from_fn(|i| theta.0[i] + alpha * dir[i]));
            let (ft, gt) = objective(trial, tuples);
            if ft.is_finite() && gt.iter().all(|v| v.is_finite()) {
                let armijo = ft <= f + 1e-4 * alpha * slope;
                // near the optimum objective differences drown in rounding;
                // accept steps that do not raise f beyond that noise and shrink the gradient
                let noise_level = (ft - f).abs() <= 1e-12 * (1.0 + f.abs()) && norm(&gt) < norm(&g);
                if armijo || noise_level {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((next, f_next, g_next)) = accepted else {
            if fresh {
                break;
            }
            h = identity;
            fresh = true;
            continue;
        };

        let s: [f64; 4] = std::array::from_fn(|i| next.0[i] - theta.0[i]);
        let y: [f64; 4] = std::array::from_fn(|i| g_next[i] - g[i]);
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if fresh {
                let scale = sy / dot(&y, &y);
                h = identity.map(|row| row.map(|v| v * scale));
            }
            let rho = 1.0 / sy;
            let hy: [f64; 4] = std::array::from_fn(|i| (0..4).map(|j| h[i][j] * y[j]).sum());
            let yhy = dot(&y, &hy);
            let mut updated = h;
            for i in 0..4 {
                for j in 0..4 {
                    updated[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
            h = updated;
            fresh = false;
        }
        theta = next;
        f = f_next;
        g = g_next;
        iterations += 1;
        converged = norm(&g) < opts.gradient_tolerance;
    }

    let params = theta.to_params();
    let (ll, clamp_activations) = log_likelihood_with_clamps(&params, tuples);
    if !ll.is_finite() {
        return Err(FitError::Numerical(format!("log-likelihood {ll} at {params:?}")));
    }
    Ok(FitResult {
        params,
        log_likelihood: ll,
        converged,
        iterations,
        clamp_activations,
        gradient_norm: norm(&g),
    })
}

/// Log-likelihood of the intercept-only Bernoulli model.
pub fn null_log_likelihood(tuples: &[LabeledTuple]) -> f64 {
    let n = tuples.len() as f64;
    let k = tuples.iter().filter(|t| t.y).count() as f64;
    if k == 0.0 || k == n {
        return 0.0;
    }
    let p = k / n;
    k * p.ln() + (n - k) * (1.0 - p).ln()
}

/// McFadden's pseudo-R²: `1 - LL_model / LL_null`.
pub fn mcfadden_r2(ll_model: f64, ll_null: f64) -> f64 {
    if ll_null == 0.0 {
        return 0.0;
    }
    1.0 - ll_model / ll_null
}

/// Cross-tabulation of predicted (signal) class against true class.
/// Columns are open, closed, not-intersecting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub predicted_open: [usize; 3],
    pub predicted_closed: [usize; 3],
}

/// Actual class column of a [`ConfusionMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActualClass {
    Open = 0,
    Closed = 1,
    NotIntersecting = 2,
}

impl ConfusionMatrix {
    pub fn add(&mut self, predicted_open: bool, actual: ActualClass) {
        let row = if predicted_open { &mut self.predicted_open } else { &mut self.predicted_closed };
        row[actual as usize] += 1;
    }

    pub fn column_totals(&self) -> [usize; 3] {
        std::array::from_fn(|i| self.predicted_open[i] + self.predicted_closed[i])
    }

    pub fn row_totals(&self) -> [usize; 2] {
        [self.predicted_open.iter().sum(), self.predicted_closed.iter().sum()]
    }

    pub fn total(&self) -> usize {
        self.row_totals().iter().sum()
    }
}
