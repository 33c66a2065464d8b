//! Transfer-matrix propagation of the two-mode conversion equations.
//!
//! The signal/idler pair obeys `-i d|phi>/dz = H(z) |phi>` with
//! `H = [[dbeta/2, g*], [g, -dbeta/2]]` in the local rotating frame, so the
//! propagator solves `dM/dz = i H(z) M` from the identity. Everything is a
//! fixed-step classic Runge-Kutta integration; the conversion efficiency for
//! a `{1, 0}` input is `|M21|^2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dispersion::DispersionModel;
use crate::profile::TaperProfile;
use crate::{Error, Result};

/// Hard ceiling on integration steps before a resource error is returned.
pub const MAX_STEPS: usize = 10_000_000;

/// Complex signal/idler amplitude pair, photon-flux normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    pub a1: Complex64,
    pub a3: Complex64,
}

impl StateVector {
    pub fn signal_input() -> Self {
        Self {
            a1: Complex64::new(1.0, 0.0),
            a3: Complex64::new(0.0, 0.0),
        }
    }

    /// Photon number `|a1|^2 + |a3|^2`.
    pub fn norm_sqr(&self) -> f64 {
        self.a1.norm_sqr() + self.a3.norm_sqr()
    }
}

/// 2x2 complex propagator mapping input `(a1, a3)` to output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub m11: Complex64,
    pub m12: Complex64,
    pub m21: Complex64,
    pub m22: Complex64,
}

impl TransferMatrix {
    pub fn identity() -> Self {
        Self {
            m11: Complex64::new(1.0, 0.0),
            m12: Complex64::new(0.0, 0.0),
            m21: Complex64::new(0.0, 0.0),
            m22: Complex64::new(1.0, 0.0),
        }
    }

    pub fn compose(&self, rhs: &TransferMatrix) -> TransferMatrix {
        TransferMatrix {
            m11: self.m11 * rhs.m11 + self.m12 * rhs.m21,
            m12: self.m11 * rhs.m12 + self.m12 * rhs.m22,
            m21: self.m21 * rhs.m11 + self.m22 * rhs.m21,
            m22: self.m21 * rhs.m12 + self.m22 * rhs.m22,
        }
    }

    /// `self` composed with itself `n` times.
    pub fn powi(&self, n: usize) -> TransferMatrix {
        let mut acc = TransferMatrix::identity();
        for _ in 0..n {
            acc = self.compose(&acc);
        }
        acc
    }

    /// Conversion efficiency `|m21|^2` clamped to [0, 1]; integrator noise can
    /// push the raw value a few ulps past 1.
    pub fn efficiency(&self) -> f64 {
        self.efficiency_raw().clamp(0.0, 1.0)
    }

    /// Unclamped `|m21|^2` for diagnostics.
    pub fn efficiency_raw(&self) -> f64 {
        self.m21.norm_sqr()
    }

    /// Largest entry of `|M Mdagger - I|`; zero for unitary (lossless) matrices.
    pub fn unitarity_deviation(&self) -> f64 {
        let d11 = self.m11 * self.m11.conj() + self.m12 * self.m12.conj() - 1.0;
        let d12 = self.m11 * self.m21.conj() + self.m12 * self.m22.conj();
        let d21 = self.m21 * self.m11.conj() + self.m22 * self.m12.conj();
        let d22 = self.m21 * self.m21.conj() + self.m22 * self.m22.conj() - 1.0;
        d11.norm()
            .max(d12.norm())
            .max(d21.norm())
            .max(d22.norm())
    }

    pub fn det(&self) -> Complex64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn apply(&self, input: &StateVector) -> StateVector {
        StateVector {
            a1: self.m11 * input.a1 + self.m12 * input.a3,
            a3: self.m21 * input.a1 + self.m22 * input.a3,
        }
    }
}

/// `|phi(out)> = M |phi(in)>`.
pub fn propagate_state(m: &TransferMatrix, input: &StateVector) -> StateVector {
    m.apply(input)
}

/// Two-mode Hamiltonian in the local rotating frame, rad/um.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hamiltonian {
    pub h11: Complex64,
    pub h12: Complex64,
    pub h21: Complex64,
    pub h22: Complex64,
}

impl Hamiltonian {
    /// `i H m`, the right-hand side of the propagator ODE.
    fn rhs(&self, m: &TransferMatrix) -> TransferMatrix {
        let i = Complex64::new(0.0, 1.0);
        TransferMatrix {
            m11: i * (self.h11 * m.m11 + self.h12 * m.m21),
            m12: i * (self.h11 * m.m12 + self.h12 * m.m22),
            m21: i * (self.h21 * m.m11 + self.h22 * m.m21),
            m22: i * (self.h21 * m.m12 + self.h22 * m.m22),
        }
    }
}

/// Builds `H = [[dbeta/2, g*], [g, -dbeta/2]]` plus the loss diagonal.
///
/// Loss rates are in 1/um on the photon flux. Under `dM/dz = i H M` a uniform
/// rate `alpha` multiplies the propagator by `exp(-alpha L / 2)`, so photon
/// numbers decay as `exp(-alpha L)`; the loss terms enter as `+i alpha/2`
/// (an identity shift of `i alpha/2` when both rates are equal).
pub fn hamiltonian(
    delta_beta: f64,
    g: Complex64,
    alpha1_per_um: f64,
    alpha3_per_um: f64,
) -> Hamiltonian {
    Hamiltonian {
        h11: Complex64::new(delta_beta / 2.0, alpha1_per_um / 2.0),
        h12: g.conj(),
        h21: g,
        h22: Complex64::new(-delta_beta / 2.0, alpha3_per_um / 2.0),
    }
}

/// How the integration step count is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepPolicy {
    Auto(AutoTag),
    Fixed(usize),
}

/// Serde helper so `"auto"` round-trips as a JSON string.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl StepPolicy {
    pub const AUTO: StepPolicy = StepPolicy::Auto(AutoTag::Auto);
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy::AUTO
    }
}

/// Integration settings; losses default to zero (the lossless core model).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationSettings {
    pub steps: StepPolicy,
    /// Signal photon-flux loss, 1/m.
    pub loss_alpha1_per_m: f64,
    /// Idler photon-flux loss, 1/m.
    pub loss_alpha3_per_m: f64,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        Self {
            steps: StepPolicy::AUTO,
            loss_alpha1_per_m: 0.0,
            loss_alpha3_per_m: 0.0,
        }
    }
}

impl PropagationSettings {
    pub fn with_steps(n: usize) -> Self {
        Self {
            steps: StepPolicy::Fixed(n),
            ..Self::default()
        }
    }

    pub fn lossless(&self) -> bool {
        self.loss_alpha1_per_m == 0.0 && self.loss_alpha3_per_m == 0.0
    }
}

/// Largest local phase advance per auto-sized step, rad. RK4 loses unitarity
/// by about `phi^6/72` per step, so 0.01 rad keeps the accumulated deviation
/// below 1e-9 out to some 10^5 steps.
pub const MAX_PHASE_PER_STEP: f64 = 0.01;

/// Auto step rule: bounds the step to `L/2000`, one 64th of the modulation
/// period for periodic profiles, and a [`MAX_PHASE_PER_STEP`] local phase
/// advance estimated by sampling the Hamiltonian magnitude at 256 intervals.
fn auto_step_count(
    model: &DispersionModel,
    profile: &TaperProfile,
    length_um: f64,
    pump_power_w: f64,
    lambda3_nm: f64,
) -> Result<usize> {
    let mut h = length_um / 2000.0;
    if let Some(period) = profile.period_um() {
        h = h.min(period / 64.0);
    }
    let mut max_mag: f64 = 0.0;
    for k in 0..=256 {
        let z = length_um * k as f64 / 256.0;
        let w = profile.width_at(z)?;
        let db = model.delta_beta(w, lambda3_nm)?;
        let g = model.coupling_g(w, pump_power_w)?;
        max_mag = max_mag.max((db * db / 4.0 + g * g).sqrt());
    }
    if max_mag > 0.0 {
        h = h.min(MAX_PHASE_PER_STEP / max_mag);
    }
    let n = (length_um / h).ceil() as usize;
    Ok(n.max(16))
}

/// Integrates `dM/dz = i H(z) M` with classic fixed-step RK4 and returns
/// `M(L)`; `H(z)` is built from the mismatch and coupling at `w(z)`.
pub fn propagate(
    model: &DispersionModel,
    profile: &TaperProfile,
    length_um: f64,
    pump_power_w: f64,
    lambda3_nm: f64,
    settings: &PropagationSettings,
) -> Result<TransferMatrix> {
    if length_um <= 0.0 {
        return Err(Error::domain("propagation length must be positive"));
    }
    if let Some(end) = profile.domain_end_um() {
        if matches!(profile, TaperProfile::Linear { .. }) && length_um > end * (1.0 + 1e-9) {
            return Err(Error::domain(format!(
                "profile is defined on [0, {end}] um but propagation length is {length_um} um"
            )));
        }
    }

    let n = match settings.steps {
        StepPolicy::Fixed(n) => {
            if n < 16 {
                return Err(Error::domain("explicit step count must be at least 16"));
            }
            n
        }
        StepPolicy::Auto(_) => {
            auto_step_count(model, profile, length_um, pump_power_w, lambda3_nm)?
        }
    };
    if n > MAX_STEPS {
        return Err(Error::Resource(format!(
            "step rule requires {n} steps (> {MAX_STEPS}); coarsen the request \
             (shorter length or larger modulation period)"
        )));
    }

    let alpha1 = settings.loss_alpha1_per_m * 1e-6;
    let alpha3 = settings.loss_alpha3_per_m * 1e-6;
    let step = length_um / n as f64;

    let ham_at = |z: f64| -> Result<Hamiltonian> {
        let w = profile.width_at(z.min(length_um))?;
        let db = model.delta_beta(w, lambda3_nm)?;
        let g = model.coupling_g(w, pump_power_w)?;
        Ok(hamiltonian(db, Complex64::new(g, 0.0), alpha1, alpha3))
    };

    let mut m = TransferMatrix::identity();
    for k in 0..n {
        let z = k as f64 * step;
        let h0 = ham_at(z)?;
        let h_mid = ham_at(z + step / 2.0)?;
        let h1 = ham_at(z + step)?;

        let k1 = h0.rhs(&m);
        let k2 = h_mid.rhs(&axpy(&m, step / 2.0, &k1));
        let k3 = h_mid.rhs(&axpy(&m, step / 2.0, &k2));
        let k4 = h1.rhs(&axpy(&m, step, &k3));

        m = TransferMatrix {
            m11: m.m11 + step / 6.0 * (k1.m11 + 2.0 * k2.m11 + 2.0 * k3.m11 + k4.m11),
            m12: m.m12 + step / 6.0 * (k1.m12 + 2.0 * k2.m12 + 2.0 * k3.m12 + k4.m12),
            m21: m.m21 + step / 6.0 * (k1.m21 + 2.0 * k2.m21 + 2.0 * k3.m21 + k4.m21),
            m22: m.m22 + step / 6.0 * (k1.m22 + 2.0 * k2.m22 + 2.0 * k3.m22 + k4.m22),
        };
    }
    Ok(m)
}

fn axpy(m: &TransferMatrix, a: f64, k: &TransferMatrix) -> TransferMatrix {
    TransferMatrix {
        m11: m.m11 + a * k.m11,
        m12: m.m12 + a * k.m12,
        m21: m.m21 + a * k.m21,
        m22: m.m22 + a * k.m22,
    }
}

/// Conversion efficiency of a propagated matrix; the `{1,0}` input convention.
pub fn efficiency(m: &TransferMatrix) -> f64 {
    m.efficiency()
}
