//! Linear process and measurement models for tube-segment states.
//!
//! A state is a 7-vector `[x, y, z, r, vx, vy, vz]`: a tubular segment
//! centered at `(x, y, z)` mm with radius `r` mm, advancing along the
//! direction `(vx, vy, vz)`. The process model is a constant-direction step of
//! size `delta` mm with process noise on the radius and direction components;
//! the measurement model observes position and radius directly.

use nalgebra::{Matrix4, SMatrix, SVector, Vector3, Vector4};

use crate::blobs::Measurement;
use crate::error::{Error, Result};

pub type StateVector = SVector<f64, 7>;
pub type StateMatrix = SMatrix<f64, 7, 7>;
pub type MeasMatrix = SMatrix<f64, 4, 7>;

/// Gaussian state estimate: 7-D mean and 7x7 covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: StateVector,
    pub cov: StateMatrix,
}

impl GaussianState {
    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.mean[0], self.mean[1], self.mean[2])
    }

    pub fn radius(&self) -> f64 {
        self.mean[3]
    }

    pub fn direction(&self) -> Vector3<f64> {
        Vector3::new(self.mean[4], self.mean[5], self.mean[6])
    }

    /// Trace of the covariance (total variance).
    pub fn trace(&self) -> f64 {
        self.cov.trace()
    }

    /// Forces exact symmetry after algebraic updates.
    pub fn symmetrize(&mut self) {
        let sym = (self.cov + self.cov.transpose()) * 0.5;
        self.cov = sym;
    }
}

/// Fixed model matrices for one tracking configuration.
///
/// `f` is identity plus a `delta` coupling from direction to position rows,
/// `q` carries process noise `sigma_q^2 * delta` on the trailing four
/// components, `h` selects position and radius, and `r` is the diagonal
/// measurement noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrices {
    pub f: StateMatrix,
    pub q: StateMatrix,
    pub h: MeasMatrix,
    pub r: Matrix4<f64>,
    pub delta: f64,
}

/// Builds the model matrices from step size and noise standard deviations.
pub fn make_models(delta: f64, sigma_q: f64, sigma_m_pos: f64, sigma_m_r: f64) -> Result<ModelMatrices> {
    for (name, v) in [
        ("delta", delta),
        ("sigma_q", sigma_q),
        ("sigma_m_pos", sigma_m_pos),
        ("sigma_m_r", sigma_m_r),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }

    let mut f = StateMatrix::identity();
    f[(0, 4)] = delta;
    f[(1, 5)] = delta;
    f[(2, 6)] = delta;

    let mut q = StateMatrix::zeros();
    for i in 3..7 {
        q[(i, i)] = sigma_q * sigma_q * delta;
    }

    let mut h = MeasMatrix::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }

    let r = Matrix4::from_diagonal(&Vector4::new(
        sigma_m_pos * sigma_m_pos,
        sigma_m_pos * sigma_m_pos,
        sigma_m_pos * sigma_m_pos,
        sigma_m_r * sigma_m_r,
    ));

    Ok(ModelMatrices { f, q, h, r, delta })
}

/// Post-update state constraints.
///
/// The linear model neither preserves unit direction norm nor keeps the
/// radius positive; these corrections are applied to the mean after each
/// measurement update. [`StateConstraints::none`] disables both, which keeps
/// the filter exactly linear-Gaussian (used by the equivalence tests).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateConstraints {
    /// Rescale the direction sub-vector of the mean to unit norm.
    pub renormalize_direction: bool,
    /// Clamp the mean radius to at least this value (mm).
    pub min_radius: f64,
}

impl StateConstraints {
    pub fn none() -> Self {
        StateConstraints { renormalize_direction: false, min_radius: f64::NEG_INFINITY }
    }

    /// Applies the configured corrections to the mean; covariance untouched.
    pub fn apply(&self, state: &mut GaussianState) {
        if self.renormalize_direction {
            let d = state.direction();
            let n = d.norm();
            if n > 1e-12 {
                state.mean[4] /= n;
                state.mean[5] /= n;
                state.mean[6] /= n;
            }
        }
        if state.mean[3] < self.min_radius {
            state.mean[3] = self.min_radius;
        }
    }
}

impl Default for StateConstraints {
    fn default() -> Self {
        StateConstraints { renormalize_direction: false, min_radius: 0.1 }
    }
}

/// Initial Gaussian state from a seed measurement and a tube axis.
///
/// Mean is `[position, radius, axis]`; covariance is `p0_scale * I`.
pub fn initial_state(m: &Measurement, axis: &Vector3<f64>, p0_scale: f64) -> Result<GaussianState> {
    let n = axis.norm();
    if (n - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!("axis must be unit length, norm {n}")));
    }
    if !(p0_scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "p0_scale must be positive, got {p0_scale} (degenerate prior)"
        )));
    }
    let mean = StateVector::from_column_slice(&[
        m.position.x,
        m.position.y,
        m.position.z,
        m.radius,
        axis.x,
        axis.y,
        axis.z,
    ]);
    Ok(GaussianState { mean, cov: StateMatrix::identity() * p0_scale })
}

/// Stacks a measurement into the 4-vector `[x, y, z, r]`.
pub fn measurement_vector(m: &Measurement) -> Vector4<f64> {
    Vector4::new(m.position.x, m.position.y, m.position.z, m.radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn meas(p: [f64; 3], r: f64) -> Measurement {
        Measurement {
            position: Vector3::new(p[0], p[1], p[2]),
            radius: r,
            scale: 1.0,
            response: -0.1,
            consumed: false,
        }
    }

    #[test]
    fn process_noise_diagonal_matches_definition() {
        let mm = make_models(1.0, 0.3, 2.0, 1.0).unwrap();
        let want = [0.0, 0.0, 0.0, 0.09, 0.09, 0.09, 0.09];
        for i in 0..7 {
            assert_relative_eq!(mm.q[(i, i)], want[i], epsilon = 1e-15);
        }
        for i in 0..7 {
            for j in 0..7 {
                if i != j {
                    assert_eq!(mm.q[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn measurement_noise_is_diagonal_of_squared_sigmas() {
        let mm = make_models(1.0, 0.3, 2.0, 1.0).unwrap();
        let d = mm.r.diagonal();
        assert_eq!([d[0], d[1], d[2], d[3]], [4.0, 4.0, 4.0, 1.0]);
    }

    #[test]
    fn transition_moves_position_along_direction() {
        let mm = make_models(1.0, 0.3, 2.0, 1.0).unwrap();
        let x = StateVector::from_column_slice(&[0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let y = mm.f * x;
        assert_eq!(
            y.as_slice(),
            &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]
        );
    }

    #[test]
    fn make_models_rejects_nonpositive_parameters() {
        assert!(make_models(0.0, 0.3, 2.0, 1.0).is_err());
        assert!(make_models(1.0, -0.1, 2.0, 1.0).is_err());
        assert!(make_models(1.0, 0.3, 0.0, 1.0).is_err());
    }

    #[test]
    fn initial_state_from_seed() {
        let m = meas([0.0, 0.0, 0.0], 2.0);
        let s = initial_state(&m, &Vector3::z(), 1.0).unwrap();
        assert_eq!(s.mean.as_slice(), &[0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.cov, StateMatrix::identity());
    }

    #[test]
    fn initial_state_rejects_degenerate_prior_and_zero_axis() {
        let m = meas([0.0, 0.0, 0.0], 2.0);
        assert!(initial_state(&m, &Vector3::z(), 0.0).is_err());
        assert!(initial_state(&m, &Vector3::zeros(), 1.0).is_err());
    }

    #[test]
    fn initial_state_reversed_axis_is_mirrored() {
        let m = meas([0.0, 0.0, 0.0], 2.0);
        let s = initial_state(&m, &(-Vector3::z()), 1.0).unwrap();
        assert_eq!(s.mean.as_slice(), &[0.0, 0.0, 0.0, 2.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn double_step_composes_on_positions() {
        let mm1 = make_models(1.0, 0.3, 2.0, 1.0).unwrap();
        let mm2 = make_models(2.0, 0.3, 2.0, 1.0).unwrap();
        let x = StateVector::from_column_slice(&[1.0, -2.0, 0.5, 1.5, 0.3, -0.4, 0.86]);
        let twice = mm1.f * (mm1.f * x);
        let once = mm2.f * x;
        for i in 0..7 {
            assert_relative_eq!(twice[i], once[i], epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn h_extracts_first_four_components(vals in proptest::array::uniform7(-100.0f64..100.0)) {
            let mm = make_models(0.7, 0.3, 2.0, 1.0).unwrap();
            let x = StateVector::from_column_slice(&vals);
            let y = mm.h * x;
            prop_assert_eq!(y[0], vals[0]);
            prop_assert_eq!(y[1], vals[1]);
            prop_assert_eq!(y[2], vals[2]);
            prop_assert_eq!(y[3], vals[3]);
        }

        #[test]
        fn q_and_r_are_psd(delta in 0.01f64..5.0, sq in 0.01f64..5.0,
                           smp in 0.01f64..5.0, smr in 0.01f64..5.0) {
            let mm = make_models(delta, sq, smp, smr).unwrap();
            prop_assert!(mm.q.symmetric_eigen().eigenvalues.iter().all(|&l| l >= -1e-12));
            prop_assert!(mm.r.symmetric_eigen().eigenvalues.iter().all(|&l| l >= -1e-12));
        }
    }
}
