//! Conversion spectra over the idler wavelength, and the quantities derived
//! from them: FWHM bandwidth, integrated area, and resonance peaks.

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic;
use crate::dispersion::DispersionModel;
use crate::profile::TaperProfile;
use crate::propagation::{propagate, PropagationSettings};
use crate::{Error, Result};

/// Everything needed to reproduce a spectrum bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumMeta {
    pub model: DispersionModel,
    pub profile: TaperProfile,
    pub length_um: f64,
    pub pump_power_w: f64,
    pub lambda_min_nm: f64,
    pub lambda_max_nm: f64,
    pub points: usize,
    pub settings: PropagationSettings,
}

/// Sampled `eta(lambda3)` on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    lambdas_nm: Vec<f64>,
    etas: Vec<f64>,
    pub meta: SpectrumMeta,
}

impl Spectrum {
    /// Test- and tooling-facing constructor for synthetic spectra; the grid
    /// must be strictly increasing with at least 21 points.
    pub fn from_samples(lambdas_nm: Vec<f64>, etas: Vec<f64>, meta: SpectrumMeta) -> Result<Self> {
        if lambdas_nm.len() != etas.len() {
            return Err(Error::domain("wavelength and efficiency arrays differ in length"));
        }
        if lambdas_nm.len() < 21 {
            return Err(Error::domain("spectrum needs at least 21 points"));
        }
        if lambdas_nm.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("wavelength grid must be strictly increasing"));
        }
        Ok(Self {
            lambdas_nm,
            etas,
            meta,
        })
    }

    pub fn lambdas_nm(&self) -> &[f64] {
        &self.lambdas_nm
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn grid_spacing_nm(&self) -> f64 {
        (self.lambdas_nm[self.lambdas_nm.len() - 1] - self.lambdas_nm[0])
            / (self.lambdas_nm.len() - 1) as f64
    }
}

/// One propagation per grid point on a uniform wavelength grid; evaluations
/// are independent, run in parallel, and the result does not depend on the
/// execution order.
#[allow(clippy::too_many_arguments)]
pub fn compute_spectrum(
    model: &DispersionModel,
    profile: &TaperProfile,
    length_um: f64,
    pump_power_w: f64,
    lambda_min_nm: f64,
    lambda_max_nm: f64,
    points: usize,
    settings: &PropagationSettings,
) -> Result<Spectrum> {
    if lambda_min_nm >= lambda_max_nm {
        return Err(Error::domain("lambda_min must be below lambda_max"));
    }
    if points < 21 {
        return Err(Error::domain("spectrum needs at least 21 points"));
    }
    let lambdas: Vec<f64> = (0..points)
        .map(|i| {
            lambda_min_nm + (lambda_max_nm - lambda_min_nm) * i as f64 / (points - 1) as f64
        })
        .collect();

    let etas: Vec<f64> = lambdas
        .par_iter()
        .map(|&lambda| {
            propagate(model, profile, length_um, pump_power_w, lambda, settings)
                .map(|m| m.efficiency())
                .map_err(|e| e.at_wavelength(lambda))
        })
        .collect::<Result<_>>()?;

    Ok(Spectrum {
        lambdas_nm: lambdas,
        etas,
        meta: SpectrumMeta {
            model: model.clone(),
            profile: profile.clone(),
            length_um,
            pump_power_w,
            lambda_min_nm,
            lambda_max_nm,
            points,
            settings: *settings,
        },
    })
}

/// Default spectral window: center +- 3x the bandwidth estimate with a +-2 nm
/// floor, 801 points.
pub fn default_window(
    model: &DispersionModel,
    profile: &TaperProfile,
) -> Result<(f64, f64, usize)> {
    let center = model.design().lambda3_center_nm;
    let half = window_half_width(model, profile)?;
    Ok((center - half, center + half, 801))
}

/// Window for area integration. The sinc^2 tails of a near-uniform spectrum
/// carry `~1/(pi X)` of the integral beyond `|dbeta| L/2 = X`, so the window
/// spans out to `X = 224` (0.15% tails) and the grid keeps at least 16
/// samples per sinc lobe.
pub fn area_window(
    model: &DispersionModel,
    profile: &TaperProfile,
    length_um: f64,
) -> Result<(f64, f64, usize)> {
    let center = model.design().lambda3_center_nm;
    let dbdl = model.dbeta_dlambda(reference_width(model))?;
    let half = window_half_width(model, profile)?.max(448.0 / (dbdl * length_um));
    let lobe_nm = std::f64::consts::TAU / (dbdl * length_um);
    let mut points = ((2.0 * half * 16.0 / lobe_nm).ceil() as usize).max(1201);
    if points.is_multiple_of(2) {
        points += 1;
    }
    Ok((center - half, center + half, points))
}

fn reference_width(model: &DispersionModel) -> f64 {
    model
        .w0_um()
        .or_else(|| model.width_domain_um().map(|(lo, hi)| 0.5 * (lo + hi)))
        .expect("model has a reference width")
}

fn window_half_width(model: &DispersionModel, profile: &TaperProfile) -> Result<f64> {
    let w_ref = reference_width(model);
    let kappa = -model.ddelta_beta_dw(w_ref, model.design().lambda3_center_nm)? * 1e-3;
    let dbdl = model.dbeta_dlambda(w_ref)?;
    let bw = analytic::bandwidth_estimate(profile.width_span_nm(), kappa, dbdl)?;
    Ok((3.0 * bw.abs()).max(2.0))
}

/// Full width at half maximum, nm; crossings located by linear interpolation
/// and taken at the outermost pair.
pub fn fwhm(s: &Spectrum) -> Result<f64> {
    let etas = s.etas();
    let lambdas = s.lambdas_nm();
    let (imax, &peak) = etas
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    if peak <= 0.0 {
        return Err(Error::UnresolvedBandwidth(
            "spectrum has no positive maximum".into(),
        ));
    }
    if imax == 0 || imax == etas.len() - 1 {
        return Err(Error::UnresolvedBandwidth(format!(
            "maximum sits on the grid boundary at {} nm; widen the wavelength grid",
            lambdas[imax]
        )));
    }
    let half = peak / 2.0;

    let cross = |i: usize| -> f64 {
        let (x0, x1) = (lambdas[i], lambdas[i + 1]);
        let (y0, y1) = (etas[i], etas[i + 1]);
        x0 + (half - y0) * (x1 - x0) / (y1 - y0)
    };

    let mut left = None;
    for i in 0..imax {
        if (etas[i] < half) && (etas[i + 1] >= half) {
            left = Some(cross(i));
            break;
        }
    }
    let mut right = None;
    for i in (imax..etas.len() - 1).rev() {
        if (etas[i] >= half) && (etas[i + 1] < half) {
            right = Some(cross(i));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::UnresolvedBandwidth(
            "half-maximum crossing not bracketed by the grid; widen the wavelength grid".into(),
        )),
    }
}

/// Trapezoid-rule integral of the spectrum with tail-leakage warnings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaIntegral {
    pub area_nm: f64,
    /// Non-empty when the grid ends carry more than 1% of the peak, i.e. the
    /// conversion band is not fully resolved.
    pub warnings: Vec<String>,
}

pub fn integrate_area(s: &Spectrum) -> AreaIntegral {
    let etas = s.etas();
    let lambdas = s.lambdas_nm();
    let mut area = 0.0;
    for i in 0..etas.len() - 1 {
        area += 0.5 * (etas[i] + etas[i + 1]) * (lambdas[i + 1] - lambdas[i]);
    }
    let peak = etas.iter().cloned().fold(0.0_f64, f64::max);
    let mut warnings = Vec::new();
    if peak > 0.0 {
        let edge = etas[0].max(etas[etas.len() - 1]);
        if edge >= 0.01 * peak {
            warnings.push(format!(
                "tail leakage: edge efficiency is {:.2}% of the peak; widen the grid",
                100.0 * edge / peak
            ));
        }
    }
    AreaIntegral {
        area_nm: area,
        warnings,
    }
}

/// A resonance in the spectrum; position refined by a quadratic fit through
/// the three samples around the grid maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub lambda_nm: f64,
    pub eta: f64,
}

/// Local maxima with prominence above `min_prominence` times the global
/// maximum, sorted by descending efficiency.
pub fn find_peaks(s: &Spectrum, min_prominence: f64) -> Result<Vec<Peak>> {
    if !(0.0..1.0).contains(&min_prominence) || min_prominence == 0.0 {
        return Err(Error::domain("min_prominence must be in (0, 1)"));
    }
    let etas = s.etas();
    let lambdas = s.lambdas_nm();
    let global_max = etas.iter().cloned().fold(0.0_f64, f64::max);
    if global_max <= 0.0 {
        return Ok(Vec::new());
    }
    let threshold = min_prominence * global_max;

    let mut peaks = Vec::new();
    for i in 1..etas.len() - 1 {
        if !(etas[i] > etas[i - 1] && etas[i] >= etas[i + 1]) {
            continue;
        }
        if prominence(etas, i) < threshold {
            continue;
        }
        // quadratic fit through the three points around the maximum
        let (ym, y0, yp) = (etas[i - 1], etas[i], etas[i + 1]);
        let denom = ym - 2.0 * y0 + yp;
        let (lambda, eta) = if denom.abs() < f64::EPSILON * y0.abs().max(1.0) {
            (lambdas[i], y0)
        } else {
            let shift = 0.5 * (ym - yp) / denom;
            let h = lambdas[i + 1] - lambdas[i];
            (lambdas[i] + shift * h, y0 - 0.25 * (ym - yp) * shift)
        };
        peaks.push(Peak { lambda_nm: lambda, eta });
    }
    peaks.sort_by(|a, b| b.eta.partial_cmp(&a.eta).unwrap());
    Ok(peaks)
}

/// Height of the local maximum at `i` above the higher of the two valley
/// floors separating it from taller terrain (or from the grid edge).
fn prominence(etas: &[f64], i: usize) -> f64 {
    let peak = etas[i];
    let mut left_floor = peak;
    for j in (0..i).rev() {
        left_floor = left_floor.min(etas[j]);
        if etas[j] > peak {
            break;
        }
    }
    let mut right_floor = peak;
    for &e in &etas[i + 1..] {
        right_floor = right_floor.min(e);
        if e > peak {
            break;
        }
    }
    peak - left_floor.max(right_floor)
}
