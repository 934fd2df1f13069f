//! Forward Kalman filtering with gating, and backward fixed-interval
//! smoothing.
//!
//! The forward pass alternates prediction and measurement update; candidate
//! measurements are pruned by a rectangular bound around the predicted
//! measurement followed by a Mahalanobis (ellipsoidal) bound. The backward
//! pass re-estimates every state conditioned on the whole measurement
//! sequence and can only shrink the covariance trace.

use nalgebra::{Cholesky, Matrix4, Vector4};

use crate::blobs::Measurement;
use crate::error::{Error, Result};
use crate::statespace::{measurement_vector, GaussianState, ModelMatrices, StateConstraints};

/// One step of the forward pass: the predicted and posterior estimates, and
/// the pool index of the measurement used for the update (`None` for a coast
/// step, where the posterior is the prediction).
#[derive(Debug, Clone)]
pub struct FilterStep {
    pub predicted: GaussianState,
    pub posterior: GaussianState,
    pub measurement_index: Option<usize>,
}

/// One smoothed state estimate.
#[derive(Debug, Clone)]
pub struct SmoothedStep {
    pub state: GaussianState,
}

/// Measurement gate parameters.
///
/// `g` is tied to the gate probability by `g = -2 ln(1 - p_g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateParams {
    /// Rectangular gate coefficient (conventionally >= 3).
    pub kappa: f64,
    /// Ellipsoidal gate threshold on the squared Mahalanobis distance.
    pub g: f64,
    /// Gate probability in (0, 1).
    pub p_g: f64,
    /// Bound the rectangular gate by `kappa * sqrt(diag(S))` instead of the
    /// printed `kappa * diag(S)`.
    pub use_stddev_rect_gate: bool,
}

impl GateParams {
    pub fn from_probability(p_g: f64, kappa: f64) -> Result<Self> {
        let g = gate_threshold(p_g)?;
        Ok(GateParams { kappa, g, p_g, use_stddev_rect_gate: false })
    }
}

/// Ellipsoidal gate threshold from the gate probability: `-2 ln(1 - p_g)`.
pub fn gate_threshold(p_g: f64) -> Result<f64> {
    if !(p_g > 0.0 && p_g < 1.0) {
        return Err(Error::InvalidArgument(format!("gate probability must be in (0,1), got {p_g}")));
    }
    Ok(-2.0 * (1.0 - p_g).ln())
}

/// Prediction step: mean through the transition, covariance inflated by the
/// process noise, then symmetrized.
pub fn predict(s: &GaussianState, mm: &ModelMatrices) -> GaussianState {
    let mut out = GaussianState {
        mean: mm.f * s.mean,
        cov: mm.f * s.cov * mm.f.transpose() + mm.q,
    };
    out.symmetrize();
    out
}

/// Innovation covariance `S = H P H^T + R`.
fn innovation_covariance(pred: &GaussianState, mm: &ModelMatrices) -> Matrix4<f64> {
    let s = mm.h * pred.cov * mm.h.transpose() + mm.r;
    (s + s.transpose()) * 0.5
}

/// Cholesky with a single jitter retry, then a hard error.
fn cholesky_with_jitter(m: &Matrix4<f64>, what: &str) -> Result<Cholesky<f64, nalgebra::Const<4>>> {
    if let Some(c) = Cholesky::new(*m) {
        return Ok(c);
    }
    let jittered = m + Matrix4::identity() * 1e-9;
    Cholesky::new(jittered).ok_or_else(|| Error::IllConditioned(what.to_string()))
}

/// Gates the measurement pool against a prediction.
///
/// Computes `S` once, keeps unconsumed measurements passing the rectangular
/// test `|y - H x| <= kappa * diag(S)` component-wise (the variance-units
/// bound as printed; `use_stddev_rect_gate` switches to standard deviations),
/// then applies the Mahalanobis test with threshold `g`. Returned indices are
/// sorted by ascending Mahalanobis distance (ties by index).
pub fn gate(
    pred: &GaussianState,
    pool: &[Measurement],
    mm: &ModelMatrices,
    gp: &GateParams,
) -> Result<Vec<usize>> {
    if pool.is_empty() {
        return Ok(Vec::new());
    }
    let s = innovation_covariance(pred, mm);
    let chol = cholesky_with_jitter(&s, "singular innovation covariance in gate")?;
    let predicted_meas = mm.h * pred.mean;

    let bounds: Vector4<f64> = if gp.use_stddev_rect_gate {
        s.diagonal().map(|v| gp.kappa * v.max(0.0).sqrt())
    } else {
        s.diagonal().map(|v| gp.kappa * v)
    };

    let mut hits: Vec<(f64, usize)> = Vec::new();
    'pool: for (idx, m) in pool.iter().enumerate() {
        if m.consumed {
            continue;
        }
        let v = measurement_vector(m) - predicted_meas;
        for c in 0..4 {
            if v[c].abs() > bounds[c] {
                continue 'pool;
            }
        }
        let w = chol.solve(&v);
        let d2 = v.dot(&w);
        if d2 <= gp.g {
            hits.push((d2, idx));
        }
    }
    hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    Ok(hits.into_iter().map(|(_, idx)| idx).collect())
}

/// Measurement update with the given measurement, then the configured state
/// constraints on the mean.
///
/// The gain solve goes through the Cholesky factor of `S`; the posterior
/// covariance is `P - K S K^T`, symmetrized.
pub fn update(
    pred: &GaussianState,
    y: &Measurement,
    mm: &ModelMatrices,
    constraints: &StateConstraints,
) -> Result<GaussianState> {
    let s = innovation_covariance(pred, mm);
    let chol = cholesky_with_jitter(&s, "singular innovation covariance in update")?;
    let innovation = measurement_vector(y) - mm.h * pred.mean;

    // K = P H^T S^{-1}; with symmetric P, K^T = S^{-1} (H P)
    let hp = mm.h * pred.cov;
    let k = chol.solve(&hp).transpose();

    let mut out = GaussianState {
        mean: pred.mean + k * innovation,
        cov: pred.cov - k * s * k.transpose(),
    };
    out.symmetrize();
    constraints.apply(&mut out);
    Ok(out)
}

/// Backward smoothing pass over a forward-filtered sequence.
///
/// The recursion starts from the last filtered state (smoothed equals
/// filtered there, exactly) and runs backward; each predicted covariance is
/// inverted through its Cholesky factor with a single jitter retry.
pub fn rts_smooth(steps: &[FilterStep], mm: &ModelMatrices) -> Result<Vec<SmoothedStep>> {
    if steps.is_empty() {
        return Err(Error::InvalidArgument("cannot smooth an empty sequence".into()));
    }
    let n = steps.len();
    let mut smoothed: Vec<SmoothedStep> = Vec::with_capacity(n);
    smoothed.resize(n, SmoothedStep { state: steps[n - 1].posterior.clone() });

    for k in (0..n - 1).rev() {
        let pred_next = &steps[k + 1].predicted;
        let chol = {
            let p = pred_next.cov;
            if let Some(c) = nalgebra::Cholesky::new(p) {
                c
            } else {
                let jittered = p + crate::statespace::StateMatrix::identity() * 1e-9;
                nalgebra::Cholesky::new(jittered).ok_or_else(|| {
                    Error::IllConditioned("singular predicted covariance in smoother".into())
                })?
            }
        };
        // G = P_post F^T P_pred^{-1}; computed as (P_pred^{-1} F P_post)^T
        let a = mm.f * steps[k].posterior.cov;
        let gain = chol.solve(&a).transpose();

        let mean = steps[k].posterior.mean
            + gain * (smoothed[k + 1].state.mean - pred_next.mean);
        let cov = steps[k].posterior.cov
            - gain * (pred_next.cov - smoothed[k + 1].state.cov) * gain.transpose();
        let mut state = GaussianState { mean, cov };
        state.symmetrize();
        smoothed[k] = SmoothedStep { state };
    }
    Ok(smoothed)
}
