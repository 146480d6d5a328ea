//! Energy gap between the prescribed profile and the resolved state.
//!
//! The gap fixes how much kinetic energy the next perturbation must
//! inject: at each sample the prescribed profile, discounted by the
//! share reserved for later levels, is compared with the expected energy
//! of the resolved field plus noise. Negative brackets are clamped to
//! zero and counted rather than rejected, since a transient surplus is a
//! diagnostic condition, not a structural error. The lagged gap feeding
//! the amplitudes is the same one-sided time average used everywhere
//! else, so it inherits causality.

use super::mollify::Mollifier;
use crate::{Error, Result};

/// Prescribed energy as a function of time.
#[derive(Clone, Copy, Debug)]
pub enum EnergyProfile {
    Constant { level: f64 },
    /// `level * (1 + swing cos(rate t))`.
    Cosine { level: f64, swing: f64, rate: f64 },
}

impl EnergyProfile {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            EnergyProfile::Constant { level } => level,
            EnergyProfile::Cosine { level, swing, rate } => level * (1.0 + swing * (rate * t).cos()),
        }
    }

    /// Lower and upper bounds over all time.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            EnergyProfile::Constant { level } => (level, level),
            EnergyProfile::Cosine { level, swing, .. } => {
                let s = swing.abs();
                (level * (1.0 - s), level * (1.0 + s))
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::EnergyProfileError(format!(
                "profile must stay strictly positive and finite; bounds are [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

/// Gap trajectory and its lagged average.
#[derive(Clone, Debug)]
pub struct EnergyGap {
    /// Instantaneous gap at every sample of the window lattice.
    pub gamma: Vec<f64>,
    /// One-sided time average; meaningful from `first_valid` onward.
    pub gamma_ell: Vec<f64>,
    pub first_valid: usize,
    /// Samples where the bracket went negative and was clamped.
    pub clamp_count: usize,
    /// Half-width of the ensemble confidence interval on the energy
    /// estimate (zero for a deterministic or single-path estimate).
    pub ci_half_width: f64,
    /// The energy estimate that entered the bracket, kept for reports.
    pub mean_sq: Vec<f64>,
}

/// Build the gap from per-sample energy estimates.
///
/// `times[j]` and `mean_sq[j]` run over the full padded sample lattice;
/// `delta_next2` is the fraction of the profile reserved beyond the next
/// level. The bracket at each sample is
/// `(e(t)(1 - delta_next2) - mean_sq) / (3 vol)`, clamped at zero.
pub fn energy_gap(
    profile: &EnergyProfile,
    delta_next2: f64,
    times: &[f64],
    mean_sq: &[f64],
    ci_half_width: f64,
    moll: &Mollifier,
) -> Result<EnergyGap> {
    profile.validate()?;
    if !(0.0..1.0).contains(&delta_next2) {
        return Err(Error::EnergyProfileError(format!(
            "reserved fraction {delta_next2} must lie in [0, 1)"
        )));
    }
    if times.len() != mean_sq.len() || times.is_empty() {
        return Err(Error::EnergyProfileError(
            "times and energy estimates must align and be nonempty".into(),
        ));
    }

    let scale = 1.0 / (3.0 * crate::BOX_VOLUME);
    let mut clamp_count = 0usize;
    let gamma: Vec<f64> = times
        .iter()
        .zip(mean_sq)
        .map(|(&t, &ms)| {
            let bracket = profile.value(t) * (1.0 - delta_next2) - ms;
            if bracket < 0.0 {
                clamp_count += 1;
                0.0
            } else {
                bracket * scale
            }
        })
        .collect();

    let first_valid = moll.max_lag();
    if first_valid >= gamma.len() {
        return Err(Error::WindowError(format!(
            "window of {} samples cannot host {} mollifier lags",
            gamma.len(),
            first_valid
        )));
    }
    let mut gamma_ell = vec![0.0; gamma.len()];
    for j in first_valid..gamma.len() {
        gamma_ell[j] = moll.time_scalar(j, |i| gamma[i])?;
    }

    Ok(EnergyGap {
        gamma,
        gamma_ell,
        first_valid,
        clamp_count,
        ci_half_width,
        mean_sq: mean_sq.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid3;

    fn test_moll() -> Mollifier {
        Mollifier::new(Grid3::new(32).unwrap(), 0.4, 0.1).unwrap()
    }

    #[test]
    fn resting_state_gets_the_discounted_profile() {
        let moll = test_moll();
        let profile = EnergyProfile::Constant { level: 7.0 };
        let times: Vec<f64> = (0..20).map(|j| j as f64 * 0.1).collect();
        let mean_sq = vec![0.0; times.len()];
        let gap = energy_gap(&profile, 0.5, &times, &mean_sq, 0.0, &moll).unwrap();
        let want = 7.0 * 0.5 / (3.0 * crate::BOX_VOLUME);
        for j in gap.first_valid..gap.gamma.len() {
            assert!((gap.gamma[j] - want).abs() < 1e-15);
            assert!((gap.gamma_ell[j] - want).abs() < 1e-13);
        }
        assert_eq!(gap.clamp_count, 0);
    }

    #[test]
    fn surplus_energy_clamps_and_counts() {
        let moll = test_moll();
        let profile = EnergyProfile::Constant { level: 1.0 };
        let times: Vec<f64> = (0..10).map(|j| j as f64 * 0.1).collect();
        // Resolved energy exceeds the discounted profile at two samples.
        let mut mean_sq = vec![0.1; times.len()];
        mean_sq[4] = 2.0;
        mean_sq[5] = 3.0;
        let gap = energy_gap(&profile, 0.5, &times, &mean_sq, 0.0, &moll).unwrap();
        assert_eq!(gap.clamp_count, 2);
        assert_eq!(gap.gamma[4], 0.0);
        assert_eq!(gap.gamma[5], 0.0);
        assert!(gap.gamma[3] > 0.0);
    }

    #[test]
    fn rejects_vanishing_profiles() {
        let profile = EnergyProfile::Cosine {
            level: 1.0,
            swing: 1.0,
            rate: 1.0,
        };
        assert!(matches!(
            profile.validate(),
            Err(Error::EnergyProfileError(_))
        ));
    }

    #[test]
    fn lagged_gap_is_causal() {
        let moll = test_moll();
        let profile = EnergyProfile::Constant { level: 10.0 };
        let times: Vec<f64> = (0..30).map(|j| j as f64 * 0.1).collect();
        let a = vec![0.5; times.len()];
        let mut b = a.clone();
        b[20] = 4.0; // later disturbance
        let ga = energy_gap(&profile, 0.25, &times, &a, 0.0, &moll).unwrap();
        let gb = energy_gap(&profile, 0.25, &times, &b, 0.0, &moll).unwrap();
        for j in ga.first_valid..=20 {
            assert_eq!(ga.gamma_ell[j], gb.gamma_ell[j]);
        }
        assert!(ga.gamma_ell[21] != gb.gamma_ell[21]);
    }
}
