//! Closed-form limits used as oracles for the numeric propagation: uniform
//! sinc^2 efficiency, Landau-Zener transition probability, first-order
//! bandwidth, and the spectral area law.

use serde::Serialize;

use crate::{Error, Result};

/// `sin(x)/x` with the unnormalized convention `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Uniform-waveguide conversion efficiency
/// `|g|^2 L^2 sinc^2( sqrt(dbeta^2/4 + |g|^2) L )`.
pub fn eta_uniform(delta_beta: f64, g: f64, length_um: f64) -> Result<f64> {
    if length_um < 0.0 {
        return Err(Error::domain("length must be >= 0"));
    }
    let omega = (delta_beta * delta_beta / 4.0 + g * g).sqrt();
    let s = sinc(omega * length_um);
    Ok(g * g * length_um * length_um * s * s)
}

/// Landau-Zener transition probability `1 - exp(-2 pi |g|^2 / |d(dbeta)/dz|)`.
pub fn eta_landau_zener(g: f64, dbeta_dz_mag: f64) -> Result<f64> {
    if dbeta_dz_mag <= 0.0 {
        return Err(Error::domain(
            "|d(dbeta)/dz| must be > 0; the uniform limit has no Landau-Zener form",
        ));
    }
    Ok(1.0 - (-landau_zener_exponent(g, dbeta_dz_mag)).exp())
}

/// The adiabaticity exponent `2 pi |g|^2 / |d(dbeta)/dz|`.
pub fn landau_zener_exponent(g: f64, dbeta_dz_mag: f64) -> f64 {
    std::f64::consts::TAU * g * g / dbeta_dz_mag
}

/// First-order conversion bandwidth `delta_w * kappa_w / dbeta_dlambda`, nm.
pub fn bandwidth_estimate(delta_w_nm: f64, kappa_w: f64, dbeta_dlambda: f64) -> Result<f64> {
    if dbeta_dlambda <= 0.0 {
        return Err(Error::domain("dbeta_dlambda must be > 0"));
    }
    Ok(delta_w_nm * kappa_w / dbeta_dlambda)
}

/// Spectral area with its weak-coupling validity flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreaEstimate {
    /// `2 pi |g|^2 L / dbeta_dlambda`, nm.
    pub area_nm: f64,
    /// False once `gL >= 1`, where the weak-coupling derivation breaks down.
    pub weak_coupling_valid: bool,
}

/// Integrated conversion over the whole spectrum, `2 pi |g|^2 L / dbeta_dlambda`.
///
/// The same asymptotic form holds for the uniform and the adiabatically
/// tapered waveguide, which is the area law. Saturated inputs (`gL >= 1`)
/// return a value flagged invalid rather than an error so the saturation
/// studies can probe that regime.
pub fn area_uniform(g: f64, length_um: f64, dbeta_dlambda: f64) -> Result<AreaEstimate> {
    if dbeta_dlambda <= 0.0 {
        return Err(Error::domain("dbeta_dlambda must be > 0"));
    }
    Ok(AreaEstimate {
        area_nm: std::f64::consts::TAU * g * g * length_um / dbeta_dlambda,
        weak_coupling_valid: g * length_um < 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{
        default_g_ref, DEFAULT_DBETA_DLAMBDA, DEFAULT_KAPPA_W,
    };

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn eta_uniform_complete_conversion() {
        let g = 1e-3;
        let l = PI / 2.0 / g;
        assert!((eta_uniform(0.0, g, l).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eta_uniform_null_at_sinc_zero() {
        // choose dbeta so sqrt(dbeta^2/4 + g^2) L = pi
        let g = 2e-4;
        let l = 1000.0;
        let db = 2.0 * ((PI / l).powi(2) - g * g).sqrt();
        assert!(eta_uniform(db, g, l).unwrap() < 1e-25);
    }

    #[test]
    fn eta_uniform_reduces_to_sine_squared_at_zero_mismatch() {
        for gl in [0.01, 0.3, 1.0, 2.2, 3.0] {
            let l = 1500.0;
            let g = gl / l;
            let eta = eta_uniform(0.0, g, l).unwrap();
            assert!((eta - (gl).sin().powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn eta_uniform_default_calibration_point() {
        // g_ref at the anchor length; frozen from the closed form and
        // cross-checked against RK4 in the propagation tests
        let eta = eta_uniform(0.0, default_g_ref(), 1000.0).unwrap();
        assert!((eta - 0.060542).abs() < 1e-5, "eta = {eta}");
    }

    #[test]
    fn eta_uniform_stays_in_unit_interval() {
        for &(db, gl) in &[(0.0, 0.5), (0.05, 2.0), (0.3, 3.0), (1.0, 0.01)] {
            let l = 800.0;
            let eta = eta_uniform(db, gl / l, l).unwrap();
            assert!((0.0..=1.0).contains(&eta), "eta = {eta}");
        }
    }

    #[test]
    fn landau_zener_trivials() {
        assert_eq!(eta_landau_zener(0.0, 1e-5).unwrap(), 0.0);
        // exponent ln 2 gives exactly one half
        let dbdz = 4e-5;
        let g = (2.0_f64.ln() * dbdz / std::f64::consts::TAU).sqrt();
        assert!((eta_landau_zener(g, dbdz).unwrap() - 0.5).abs() < 1e-14);
        assert!(eta_landau_zener(1e-4, 0.0).is_err());
    }

    #[test]
    fn landau_zener_default_taper_point() {
        // delta_w = 4 nm, L = 1000 um at the default calibration
        let g = default_g_ref();
        let dbdz = DEFAULT_KAPPA_W * 4.0 / 1000.0;
        let eta = eta_landau_zener(g, dbdz).unwrap();
        assert!((eta - 0.009662).abs() < 2e-6, "eta = {eta}");
    }

    #[test]
    fn landau_zener_small_argument_limit() {
        for x in [1e-6, 1e-5, 1e-4, 9e-4] {
            let dbdz = 4e-5;
            let g = (x * dbdz / std::f64::consts::TAU).sqrt();
            let eta = eta_landau_zener(g, dbdz).unwrap();
            let ratio = eta / x;
            assert!(ratio <= 1.0 + 1e-12 && ratio >= 1.0 - x, "x={x} ratio={ratio}");
        }
    }

    #[test]
    fn bandwidth_linearity() {
        let bw = bandwidth_estimate(4.0, DEFAULT_KAPPA_W, DEFAULT_DBETA_DLAMBDA).unwrap();
        assert!((bw - 11.4745).abs() < 1e-3, "bw = {bw}");
        assert_eq!(bandwidth_estimate(0.0, 0.01, 3.486e-3).unwrap(), 0.0);
        let doubled = bandwidth_estimate(8.0, DEFAULT_KAPPA_W, DEFAULT_DBETA_DLAMBDA).unwrap();
        assert_eq!(doubled, 2.0 * bw);
        assert!(bandwidth_estimate(4.0, 0.01, 0.0).is_err());
    }

    #[test]
    fn area_trivials_and_anchor() {
        assert_eq!(area_uniform(0.0, 1000.0, 3.486e-3).unwrap().area_nm, 0.0);
        // the default calibration reproduces the anchor area by construction
        let a = area_uniform(default_g_ref(), 1000.0, DEFAULT_DBETA_DLAMBDA).unwrap();
        assert!((a.area_nm - 0.1114).abs() < 1e-12, "area = {}", a.area_nm);
        assert!(a.weak_coupling_valid);
        // quadrupling pump power quadruples g^2 and the area
        let a4 = area_uniform(2.0 * default_g_ref(), 1000.0, DEFAULT_DBETA_DLAMBDA).unwrap();
        assert!((a4.area_nm - 4.0 * a.area_nm).abs() < 1e-15);
    }

    #[test]
    fn area_flags_saturated_inputs() {
        let a = area_uniform(2e-3, 1000.0, 3.486e-3).unwrap();
        assert!(!a.weak_coupling_valid);
    }

    #[test]
    fn area_consistency_chain() {
        // eta_LZ(g, kappa dw / L) * bandwidth(dw) -> area_uniform(g, L) as the
        // exponent vanishes, with first-order error bounds
        let l = 1000.0;
        for dw in [2.0, 4.0, 8.0, 16.0] {
            let g = default_g_ref();
            let dbdz = DEFAULT_KAPPA_W * dw / l;
            let x = landau_zener_exponent(g, dbdz);
            let lhs = eta_landau_zener(g, dbdz).unwrap()
                * bandwidth_estimate(dw, DEFAULT_KAPPA_W, DEFAULT_DBETA_DLAMBDA).unwrap();
            let rhs = area_uniform(g, l, DEFAULT_DBETA_DLAMBDA).unwrap().area_nm;
            let ratio = lhs / rhs;
            assert!(ratio <= 1.0 + 1e-12 && ratio >= 1.0 - x / 2.0 - 1e-12,
                "dw={dw} ratio={ratio} x={x}");
        }
    }
}
