//! Parameter-sweep drivers: efficiency versus length, taper strength, pump
//! power and modulation period, spectral-area sweeps, and the saturation
//! threshold extracted from area-versus-power records.

use rayon::prelude::*;
use serde::Serialize;

use crate::dispersion::DispersionModel;
use crate::profile::TaperProfile;
use crate::propagation::{propagate, PropagationSettings};
use crate::spectrum::{area_window, compute_spectrum, default_window, fwhm, integrate_area};
use crate::{Error, Result};

/// Profile family that rebuilds a concrete `TaperProfile` per swept length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ProfileTemplate {
    Uniform { w0_um: f64 },
    Linear { w0_um: f64, delta_w_nm: f64 },
    Cosine { w0_um: f64, delta_w_nm: f64, period_um: f64 },
}

impl ProfileTemplate {
    pub fn instantiate(&self, length_um: f64) -> Result<TaperProfile> {
        match *self {
            ProfileTemplate::Uniform { w0_um } => TaperProfile::uniform(w0_um),
            ProfileTemplate::Linear { w0_um, delta_w_nm } => {
                TaperProfile::linear(w0_um, delta_w_nm, length_um)
            }
            ProfileTemplate::Cosine {
                w0_um,
                delta_w_nm,
                period_um,
            } => TaperProfile::cosine(w0_um, delta_w_nm, period_um),
        }
    }

    pub fn from_profile(profile: &TaperProfile) -> Result<Self> {
        Ok(match profile {
            TaperProfile::Uniform { w0_um } => ProfileTemplate::Uniform { w0_um: *w0_um },
            TaperProfile::Linear {
                w0_um, delta_w_nm, ..
            } => ProfileTemplate::Linear {
                w0_um: *w0_um,
                delta_w_nm: *delta_w_nm,
            },
            TaperProfile::Cosine {
                w0_um,
                delta_w_nm,
                period_um,
            } => ProfileTemplate::Cosine {
                w0_um: *w0_um,
                delta_w_nm: *delta_w_nm,
                period_um: *period_um,
            },
            TaperProfile::Piecewise { .. } => {
                return Err(Error::domain(
                    "piecewise profiles cannot be rebuilt per swept length",
                ))
            }
        })
    }
}

/// What a sweep records per point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    EtaAtCenter,
    EtaPeak,
    Area,
    Fwhm,
}

impl Observable {
    pub fn as_str(&self) -> &'static str {
        match self {
            Observable::EtaAtCenter => "eta_at_center",
            Observable::EtaPeak => "eta_peak",
            Observable::Area => "area",
            Observable::Fwhm => "fwhm",
        }
    }
}

/// Snapshot of everything held fixed during a sweep; the swept slot is `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedParams {
    pub model: DispersionModel,
    pub profile: ProfileTemplate,
    pub length_um: Option<f64>,
    pub pump_power_w: Option<f64>,
    pub lambda3_nm: f64,
    pub settings: PropagationSettings,
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    /// Name of the swept parameter.
    pub parameter: &'static str,
    /// Swept value.
    pub value: f64,
    pub fixed: FixedParams,
    pub observable: Observable,
    pub observable_value: f64,
    pub warnings: Vec<String>,
}

impl SweepRecord {
    /// Recomputes the observable from the embedded snapshot; used to prove
    /// records are reproducible bit for bit.
    pub fn recompute(&self) -> Result<f64> {
        let f = &self.fixed;
        let (length, pump, delta_w, period) = match self.parameter {
            "length_um" => (Some(self.value), f.pump_power_w, None, None),
            "pump_power_w" => (f.length_um, Some(self.value), None, None),
            "delta_w_nm" => (f.length_um, f.pump_power_w, Some(self.value), None),
            "period_um" => (f.length_um, f.pump_power_w, None, Some(self.value)),
            other => return Err(Error::domain(format!("unknown sweep parameter `{other}`"))),
        };
        let length = length.ok_or_else(|| Error::domain("snapshot is missing the length"))?;
        let pump = pump.ok_or_else(|| Error::domain("snapshot is missing the pump power"))?;
        let template = match (delta_w, period) {
            (Some(dw), None) => override_delta_w(&f.profile, dw)?,
            (None, Some(t)) => override_period(&f.profile, t)?,
            _ => f.profile,
        };
        let profile = template.instantiate(length)?;
        evaluate_observable(
            &f.model,
            &profile,
            length,
            pump,
            f.lambda3_nm,
            &f.settings,
            self.observable,
        )
        .map(|(v, _)| v)
    }
}

fn override_delta_w(template: &ProfileTemplate, delta_w_nm: f64) -> Result<ProfileTemplate> {
    Ok(match *template {
        ProfileTemplate::Uniform { w0_um } | ProfileTemplate::Linear { w0_um, .. } => {
            ProfileTemplate::Linear { w0_um, delta_w_nm }
        }
        ProfileTemplate::Cosine { w0_um, period_um, .. } => ProfileTemplate::Cosine {
            w0_um,
            delta_w_nm,
            period_um,
        },
    })
}

fn override_period(template: &ProfileTemplate, period_um: f64) -> Result<ProfileTemplate> {
    match *template {
        ProfileTemplate::Cosine { w0_um, delta_w_nm, .. } => Ok(ProfileTemplate::Cosine {
            w0_um,
            delta_w_nm,
            period_um,
        }),
        _ => Err(Error::domain("period sweeps need a cosine profile")),
    }
}

#[allow(clippy::too_many_arguments)]
fn evaluate_observable(
    model: &DispersionModel,
    profile: &TaperProfile,
    length_um: f64,
    pump_power_w: f64,
    lambda3_nm: f64,
    settings: &PropagationSettings,
    observable: Observable,
) -> Result<(f64, Vec<String>)> {
    match observable {
        Observable::EtaAtCenter => {
            let m = propagate(model, profile, length_um, pump_power_w, lambda3_nm, settings)?;
            Ok((m.efficiency(), Vec::new()))
        }
        Observable::Area => {
            let (lo, hi, points) = area_window(model, profile, length_um)?;
            let s = compute_spectrum(
                model, profile, length_um, pump_power_w, lo, hi, points, settings,
            )?;
            let a = integrate_area(&s);
            Ok((a.area_nm, a.warnings))
        }
        Observable::EtaPeak | Observable::Fwhm => {
            let (lo, hi, points) = default_window(model, profile)?;
            let s = compute_spectrum(
                model, profile, length_um, pump_power_w, lo, hi, points, settings,
            )?;
            match observable {
                Observable::Fwhm => Ok((fwhm(&s)?, Vec::new())),
                _ => {
                    let peak = s.etas().iter().cloned().fold(0.0_f64, f64::max);
                    Ok((peak, Vec::new()))
                }
            }
        }
    }
}

fn check_values(name: &str, values: &[f64], must_be_positive: bool) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::domain(format!("{name} sweep list is empty")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!("{name} sweep contains non-finite values")));
    }
    if must_be_positive && values.iter().any(|&v| v <= 0.0) {
        return Err(Error::domain(format!("{name} sweep values must be positive")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(sorted)
}

/// Fans one record computation per swept value; values are sorted first so
/// the output ordering is independent of the input and of the thread count.
fn run_sweep<F>(parameter: &'static str, values: Vec<f64>, f: F) -> Result<Vec<SweepRecord>>
where
    F: Fn(f64) -> Result<(FixedParams, Observable, f64, Vec<String>)> + Sync,
{
    values
        .par_iter()
        .map(|&value| {
            let (fixed, observable, observable_value, warnings) = f(value)?;
            if !observable_value.is_finite() || observable_value < 0.0 {
                return Err(Error::domain(format!(
                    "observable {} at {parameter} = {value} is not finite and non-negative",
                    observable.as_str()
                )));
            }
            Ok(SweepRecord {
                parameter,
                value,
                fixed,
                observable,
                observable_value,
                warnings,
            })
        })
        .collect()
}

/// Efficiency at the center wavelength versus interaction length.
pub fn sweep_length(
    model: &DispersionModel,
    template: &ProfileTemplate,
    lengths_um: &[f64],
    pump_power_w: f64,
    lambda3_nm: f64,
    settings: &PropagationSettings,
) -> Result<Vec<SweepRecord>> {
    let values = check_values("length", lengths_um, true)?;
    run_sweep("length_um", values, |length| {
        let profile = template.instantiate(length)?;
        let (v, w) = evaluate_observable(
            model,
            &profile,
            length,
            pump_power_w,
            lambda3_nm,
            settings,
            Observable::EtaAtCenter,
        )?;
        Ok((
            FixedParams {
                model: model.clone(),
                profile: *template,
                length_um: None,
                pump_power_w: Some(pump_power_w),
                lambda3_nm,
                settings: *settings,
            },
            Observable::EtaAtCenter,
            v,
            w,
        ))
    })
}

/// Efficiency at the center wavelength versus end-to-end width change of a
/// linear taper.
pub fn sweep_delta_w(
    model: &DispersionModel,
    w0_um: f64,
    length_um: f64,
    pump_power_w: f64,
    delta_w_list_nm: &[f64],
    lambda3_nm: f64,
    settings: &PropagationSettings,
) -> Result<Vec<SweepRecord>> {
    let values = check_values("delta_w", delta_w_list_nm, false)?;
    run_sweep("delta_w_nm", values, |delta_w| {
        let profile = TaperProfile::linear(w0_um, delta_w, length_um)?;
        let (v, w) = evaluate_observable(
            model,
            &profile,
            length_um,
            pump_power_w,
            lambda3_nm,
            settings,
            Observable::EtaAtCenter,
        )?;
        Ok((
            FixedParams {
                model: model.clone(),
                profile: ProfileTemplate::Linear {
                    w0_um,
                    delta_w_nm: delta_w,
                },
                length_um: Some(length_um),
                pump_power_w: Some(pump_power_w),
                lambda3_nm,
                settings: *settings,
            },
            Observable::EtaAtCenter,
            v,
            w,
        ))
    })
}

/// Efficiency at the center wavelength versus pump power.
pub fn sweep_pump(
    model: &DispersionModel,
    profile: &TaperProfile,
    length_um: f64,
    pump_powers_w: &[f64],
    lambda3_nm: f64,
    settings: &PropagationSettings,
) -> Result<Vec<SweepRecord>> {
    let values = check_values("pump power", pump_powers_w, false)?;
    let template = ProfileTemplate::from_profile(profile)?;
    run_sweep("pump_power_w", values, |pump| {
        let (v, w) = evaluate_observable(
            model,
            profile,
            length_um,
            pump,
            lambda3_nm,
            settings,
            Observable::EtaAtCenter,
        )?;
        Ok((
            FixedParams {
                model: model.clone(),
                profile: template,
                length_um: Some(length_um),
                pump_power_w: None,
                lambda3_nm,
                settings: *settings,
            },
            Observable::EtaAtCenter,
            v,
            w,
        ))
    })
}

/// Integrated spectral area versus linear-taper width change.
pub fn area_sweep_delta_w(
    model: &DispersionModel,
    w0_um: f64,
    length_um: f64,
    pump_power_w: f64,
    delta_w_list_nm: &[f64],
    settings: &PropagationSettings,
) -> Result<Vec<SweepRecord>> {
    let values = check_values("delta_w", delta_w_list_nm, false)?;
    let lambda3 = model.design().lambda3_center_nm;
    run_sweep("delta_w_nm", values, |delta_w| {
        let profile = TaperProfile::linear(w0_um, delta_w, length_um)?;
        let (v, w) = evaluate_observable(
            model,
            &profile,
            length_um,
            pump_power_w,
            lambda3,
            settings,
            Observable::Area,
        )?;
        Ok((
            FixedParams {
                model: model.clone(),
                profile: ProfileTemplate::Linear {
                    w0_um,
                    delta_w_nm: delta_w,
                },
                length_um: Some(length_um),
                pump_power_w: Some(pump_power_w),
                lambda3_nm: lambda3,
                settings: *settings,
            },
            Observable::Area,
            v,
            w,
        ))
    })
}

/// Integrated spectral area versus pump power at fixed taper.
pub fn area_sweep_pump(
    model: &DispersionModel,
    profile: &TaperProfile,
    length_um: f64,
    pump_powers_w: &[f64],
    settings: &PropagationSettings,
) -> Result<Vec<SweepRecord>> {
    let values = check_values("pump power", pump_powers_w, false)?;
    let template = ProfileTemplate::from_profile(profile)?;
    let lambda3 = model.design().lambda3_center_nm;
    run_sweep("pump_power_w", values, |pump| {
        let (v, w) = evaluate_observable(
            model,
            profile,
            length_um,
            pump,
            lambda3,
            settings,
            Observable::Area,
        )?;
        Ok((
            FixedParams {
                model: model.clone(),
                profile: template,
                length_um: Some(length_um),
                pump_power_w: None,
                lambda3_nm: lambda3,
                settings: *settings,
            },
            Observable::Area,
            v,
            w,
        ))
    })
}

/// FWHM bandwidth versus linear-taper width change.
pub fn sweep_bandwidth(
    model: &DispersionModel,
    w0_um: f64,
    length_um: f64,
    pump_power_w: f64,
    delta_w_list_nm: &[f64],
    settings: &PropagationSettings,
) -> Result<Vec<SweepRecord>> {
    let values = check_values("delta_w", delta_w_list_nm, false)?;
    let lambda3 = model.design().lambda3_center_nm;
    run_sweep("delta_w_nm", values, |delta_w| {
        let profile = TaperProfile::linear(w0_um, delta_w, length_um)?;
        let (v, w) = evaluate_observable(
            model,
            &profile,
            length_um,
            pump_power_w,
            lambda3,
            settings,
            Observable::Fwhm,
        )?;
        Ok((
            FixedParams {
                model: model.clone(),
                profile: ProfileTemplate::Linear {
                    w0_um,
                    delta_w_nm: delta_w,
                },
                length_um: Some(length_um),
                pump_power_w: Some(pump_power_w),
                lambda3_nm: lambda3,
                settings: *settings,
            },
            Observable::Fwhm,
            v,
            w,
        ))
    })
}

/// Integrated spectral area versus modulation period of a cosine profile.
pub fn sweep_period(
    model: &DispersionModel,
    w0_um: f64,
    length_um: f64,
    pump_power_w: f64,
    delta_w_nm: f64,
    periods_um: &[f64],
    settings: &PropagationSettings,
) -> Result<Vec<SweepRecord>> {
    let values = check_values("period", periods_um, true)?;
    let lambda3 = model.design().lambda3_center_nm;
    run_sweep("period_um", values, |period| {
        let profile = TaperProfile::cosine(w0_um, delta_w_nm, period)?;
        let (v, w) = evaluate_observable(
            model,
            &profile,
            length_um,
            pump_power_w,
            lambda3,
            settings,
            Observable::Area,
        )?;
        Ok((
            FixedParams {
                model: model.clone(),
                profile: ProfileTemplate::Cosine {
                    w0_um,
                    delta_w_nm,
                    period_um: period,
                },
                length_um: Some(length_um),
                pump_power_w: Some(pump_power_w),
                lambda3_nm: lambda3,
                settings: *settings,
            },
            Observable::Area,
            v,
            w,
        ))
    })
}

/// Smallest pump power whose area deviates more than 10% from a line through
/// the origin fitted to the lowest-quartile powers; `+inf` when nothing
/// deviates. Needs at least 8 records spanning both regimes.
pub fn saturation_threshold(records: &[SweepRecord]) -> Result<f64> {
    if records.len() < 8 {
        return Err(Error::domain(format!(
            "saturation threshold needs at least 8 area-versus-power records, got {}",
            records.len()
        )));
    }
    if records
        .iter()
        .any(|r| r.parameter != "pump_power_w" || r.observable != Observable::Area)
    {
        return Err(Error::domain(
            "saturation threshold expects area-versus-pump-power records",
        ));
    }
    let mut sorted: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.value, r.observable_value))
        .collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let quartile = (sorted.len() / 4).max(2);
    let (num, den) = sorted[..quartile]
        .iter()
        .fold((0.0, 0.0), |(n, d), &(p, a)| (n + p * a, d + p * p));
    if den == 0.0 {
        return Err(Error::domain("cannot fit through origin: all powers are zero"));
    }
    let slope = num / den;
    if slope <= 0.0 {
        return Err(Error::domain("origin fit produced a non-positive slope"));
    }

    for &(p, a) in &sorted {
        if p == 0.0 {
            continue;
        }
        if (a - slope * p).abs() > 0.10 * slope * p {
            return Ok(p);
        }
    }
    Ok(f64::INFINITY)
}

/// Parameter values at which the Landau-Zener weak-conversion assumption
/// `2 pi g^2 << |d(dbeta)/dz|` stops holding, using exponent 0.5 as the cut.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdiabaticThresholds {
    /// Pump power where the exponent reaches 0.5 at fixed length, W.
    pub pump_threshold_w: f64,
    /// Length where the exponent reaches 0.5 at fixed pump, um.
    pub length_threshold_um: f64,
}

pub fn adiabatic_thresholds(
    model: &DispersionModel,
    delta_w_nm: f64,
    length_um: f64,
    pump_power_w: f64,
) -> Result<AdiabaticThresholds> {
    if delta_w_nm <= 0.0 {
        return Err(Error::domain("adiabatic thresholds need delta_w > 0"));
    }
    let w0 = model
        .w0_um()
        .ok_or_else(|| Error::Solve("model has no phase-matching width".into()))?;
    let g_unit = model.coupling_g(w0, 1.0)?;
    let kappa = -model.ddelta_beta_dw(w0, model.design().lambda3_center_nm)? * 1e-3;
    // exponent(P, L) = 2 pi g_unit^2 P L / (kappa delta_w)
    let coeff = std::f64::consts::TAU * g_unit * g_unit / (kappa * delta_w_nm);
    Ok(AdiabaticThresholds {
        pump_threshold_w: 0.5 / (coeff * length_um),
        length_threshold_um: 0.5 / (coeff * pump_power_w),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{
        area_uniform, eta_landau_zener, eta_uniform, landau_zener_exponent,
    };
    use crate::dispersion::{
        default_g_ref, DesignWavelengths, DispersionModel, DEFAULT_DBETA_DLAMBDA, DEFAULT_KAPPA_W,
    };

    fn model() -> DispersionModel {
        DispersionModel::default_calibration()
    }

    fn center() -> f64 {
        DesignWavelengths::default().lambda3_center_nm
    }

    fn settings() -> PropagationSettings {
        PropagationSettings::default()
    }

    #[test]
    fn length_sweep_of_uniform_follows_sine_squared() {
        let m = model();
        let template = ProfileTemplate::Uniform { w0_um: 0.773 };
        let g = default_g_ref();
        let half_period = std::f64::consts::PI / g;
        let lengths: Vec<f64> = (1..=8).map(|k| half_period * k as f64 / 8.0).collect();
        let records =
            sweep_length(&m, &template, &lengths, 1.0, center(), &settings()).unwrap();
        for r in &records {
            let exact = eta_uniform(0.0, g, r.value).unwrap();
            assert!(
                (r.observable_value - exact).abs() < 1e-6,
                "L={}: {} vs {exact}",
                r.value,
                r.observable_value
            );
        }
        // oscillates between 0 and 1: the grid hits both extremes
        let max = records.iter().map(|r| r.observable_value).fold(0.0, f64::max);
        let min = records.iter().map(|r| r.observable_value).fold(1.0, f64::min);
        assert!(max > 0.99 && min < 0.15, "max {max} min {min}");
    }

    #[test]
    fn length_sweep_of_taper_approaches_lz_plateau() {
        let m = model();
        let template = ProfileTemplate::Linear {
            w0_um: 0.773,
            delta_w_nm: 10.0,
        };
        let lengths = [15_000.0, 20_000.0];
        let records =
            sweep_length(&m, &template, &lengths, 1.0, center(), &settings()).unwrap();
        for r in &records {
            let lz = eta_landau_zener(default_g_ref(), DEFAULT_KAPPA_W * 10.0 / r.value).unwrap();
            let rel = (r.observable_value - lz).abs() / lz;
            assert!(rel < 0.15, "L={}: rel dev from plateau {rel}", r.value);
        }
    }

    #[test]
    fn zero_pump_sweeps_are_zero() {
        let m = model();
        let template = ProfileTemplate::Linear {
            w0_um: 0.773,
            delta_w_nm: 4.0,
        };
        let records =
            sweep_length(&m, &template, &[500.0, 1000.0], 0.0, center(), &settings()).unwrap();
        assert!(records.iter().all(|r| r.observable_value == 0.0));
    }

    #[test]
    fn delta_w_sweep_trivials_and_envelope() {
        let m = model();
        // dw = 0 reproduces the closed form
        let records =
            sweep_delta_w(&m, 0.773, 1000.0, 1.0, &[0.0], center(), &settings()).unwrap();
        let exact = eta_uniform(0.0, default_g_ref(), 1000.0).unwrap();
        assert!((records[0].observable_value - exact).abs() < 1e-6);

        // far into the adiabatic side the envelope decreases with dw
        let records = sweep_delta_w(
            &m,
            0.773,
            10_000.0,
            1.0,
            &[10.0, 20.0, 40.0],
            center(),
            &settings(),
        )
        .unwrap();
        let etas: Vec<f64> = records.iter().map(|r| r.observable_value).collect();
        assert!(etas[0] > etas[1] && etas[1] > etas[2], "{etas:?}");

        assert!(sweep_delta_w(&m, 0.773, 1000.0, 1.0, &[], center(), &settings()).is_err());
    }

    #[test]
    fn pump_sweep_linear_then_sublinear() {
        let m = model();
        let profile = TaperProfile::linear(0.773, 4.0, 1000.0).unwrap();
        let records = sweep_pump(
            &m,
            &profile,
            1000.0,
            &[0.0, 0.01, 0.02, 4.0, 40.0],
            center(),
            &settings(),
        )
        .unwrap();
        let eta: Vec<f64> = records.iter().map(|r| r.observable_value).collect();
        assert_eq!(eta[0], 0.0);
        // Born regime: doubling pump doubles the efficiency
        assert!((eta[2] / eta[1] - 2.0).abs() < 0.02, "{:?}", &eta[1..3]);
        // saturated regime is sublinear
        assert!(eta[4] < 10.0 * eta[3] * 0.9, "eta(40)={} eta(4)={}", eta[4], eta[3]);
    }

    #[test]
    fn area_sweep_delta_w_obeys_area_law() {
        let m = model();
        let records =
            area_sweep_delta_w(&m, 0.773, 1000.0, 1.0, &[0.0, 8.0], &settings()).unwrap();
        let analytic = area_uniform(default_g_ref(), 1000.0, DEFAULT_DBETA_DLAMBDA)
            .unwrap()
            .area_nm;
        for r in &records {
            let rel = (r.observable_value - analytic).abs() / analytic;
            assert!(rel < 0.03, "dw={}: rel {rel}", r.value);
        }
        let spread = (records[1].observable_value - records[0].observable_value).abs()
            / records[0].observable_value.min(records[1].observable_value);
        assert!(spread < 0.02, "spread {spread}");
    }

    #[test]
    fn area_sweep_pump_is_linear_before_saturation() {
        let m = model();
        let profile = TaperProfile::linear(0.773, 4.0, 1000.0).unwrap();
        let records =
            area_sweep_pump(&m, &profile, 1000.0, &[0.5, 1.0], &settings()).unwrap();
        let ratio = records[1].observable_value / records[0].observable_value;
        assert!((ratio - 2.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn saturation_threshold_of_linear_records_is_infinite() {
        let m = model();
        let fixed = FixedParams {
            model: m,
            profile: ProfileTemplate::Uniform { w0_um: 0.773 },
            length_um: Some(1000.0),
            pump_power_w: None,
            lambda3_nm: center(),
            settings: settings(),
        };
        let records: Vec<SweepRecord> = (1..=10)
            .map(|k| SweepRecord {
                parameter: "pump_power_w",
                value: k as f64,
                fixed: fixed.clone(),
                observable: Observable::Area,
                observable_value: 0.11 * k as f64,
                warnings: Vec::new(),
            })
            .collect();
        assert_eq!(saturation_threshold(&records).unwrap(), f64::INFINITY);
        assert!(saturation_threshold(&records[..6]).is_err());
    }

    #[test]
    fn saturation_threshold_recovers_exponential_knee() {
        // records shaped 1 - exp(-c P): the rule flags the first power whose
        // area sags 10% below the low-power fit
        let m = model();
        let fixed = FixedParams {
            model: m,
            profile: ProfileTemplate::Uniform { w0_um: 0.773 },
            length_um: Some(1000.0),
            pump_power_w: None,
            lambda3_nm: center(),
            settings: settings(),
        };
        let c = 0.05;
        let powers: Vec<f64> = (1..=40).map(|k| 0.25 * k as f64).collect();
        let records: Vec<SweepRecord> = powers
            .iter()
            .map(|&p| SweepRecord {
                parameter: "pump_power_w",
                value: p,
                fixed: fixed.clone(),
                observable: Observable::Area,
                observable_value: 1.0 - (-c * p).exp(),
                warnings: Vec::new(),
            })
            .collect();
        let threshold = saturation_threshold(&records).unwrap();

        // oracle: same origin-anchored fit over the lowest quartile, then the
        // exact crossing of |1 - exp(-cP) - sP| = 0.1 sP
        let q = powers.len() / 4;
        let (num, den) = powers[..q]
            .iter()
            .fold((0.0, 0.0), |(n, d), &p| {
                (n + p * (1.0 - (-c * p).exp()), d + p * p)
            });
        let slope = num / den;
        let mut x = 0.0;
        for k in 1..100_000 {
            let p = 1e-3 * k as f64;
            if (1.0 - (-c * p).exp() - slope * p).abs() > 0.1 * slope * p {
                x = p;
                break;
            }
        }
        // recovered within one grid step of the continuous crossing
        assert!(
            (threshold - x).abs() <= 0.25 + 1e-12,
            "threshold {threshold} vs oracle {x}"
        );
    }

    #[test]
    fn period_sweep_single_element() {
        let m = model();
        let records =
            sweep_period(&m, 0.773, 2000.0, 1.0, 4.0, &[500.0], &settings()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].parameter, "period_um");
        assert!(records[0].observable_value > 0.0);
    }

    #[test]
    fn records_are_reproducible_and_order_independent() {
        let m = model();
        let template = ProfileTemplate::Linear {
            w0_um: 0.773,
            delta_w_nm: 4.0,
        };
        let sorted =
            sweep_length(&m, &template, &[400.0, 900.0, 1600.0], 1.0, center(), &settings())
                .unwrap();
        let shuffled =
            sweep_length(&m, &template, &[1600.0, 400.0, 900.0], 1.0, center(), &settings())
                .unwrap();
        assert_eq!(sorted, shuffled);
        for r in &sorted {
            assert_eq!(
                r.recompute().unwrap().to_bits(),
                r.observable_value.to_bits()
            );
        }
    }

    #[test]
    fn adiabatic_thresholds_sit_at_exponent_half() {
        let m = model();
        let t = adiabatic_thresholds(&m, 4.0, 1000.0, 1.0).unwrap();
        let g_at = |p: f64| default_g_ref() * p.sqrt();
        let x_pump = landau_zener_exponent(g_at(t.pump_threshold_w), DEFAULT_KAPPA_W * 4.0 / 1000.0);
        assert!((x_pump - 0.5).abs() < 1e-12, "{x_pump}");
        let x_len = landau_zener_exponent(g_at(1.0), DEFAULT_KAPPA_W * 4.0 / t.length_threshold_um);
        assert!((x_len - 0.5).abs() < 1e-12, "{x_len}");
    }
}
