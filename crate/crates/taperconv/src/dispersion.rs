//! Phase mismatch, its derivatives, and the pump-scaled coupling strength.
//!
//! Two interchangeable model backends: a synthetic linearized model pinned by
//! four calibration numbers, and a tabulated model built from effective-index
//! samples `n_m(w)` at the three design wavelengths.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::pchip::MonotoneCubic;
use crate::{Error, Result};

pub const TWO_PI: f64 = std::f64::consts::TAU;

/// Default phase-matching width, um.
pub const DEFAULT_W0_UM: f64 = 0.773;
/// Default mismatch-versus-width slope, rad/um per nm of width.
pub const DEFAULT_KAPPA_W: f64 = 0.01;
/// Default mismatch-versus-wavelength slope, rad/um per nm.
pub const DEFAULT_DBETA_DLAMBDA: f64 = 3.486e-3;
/// Default reference pump power, W.
pub const DEFAULT_P_REF_W: f64 = 1.0;
/// Spectral area that anchors the default coupling strength, nm.
pub const AREA_ANCHOR_NM: f64 = 0.1114;
/// Waveguide length at which the anchor area applies, um.
pub const AREA_ANCHOR_LENGTH_UM: f64 = 1000.0;

/// Default signal wavelength, nm.
pub const DEFAULT_LAMBDA1_NM: f64 = 1550.0;
/// Default pump wavelength, nm.
pub const DEFAULT_LAMBDA2_NM: f64 = 980.0;

/// Coupling strength at the reference pump power, chosen so the analytic
/// spectral area `2 pi g^2 L / dbeta_dlambda` at the anchor length equals
/// [`AREA_ANCHOR_NM`]. Recomputed from the other defaults, never hard-coded.
pub fn default_g_ref() -> f64 {
    (AREA_ANCHOR_NM * DEFAULT_DBETA_DLAMBDA / (TWO_PI * AREA_ANCHOR_LENGTH_UM)).sqrt()
}

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

fn warn_coupling_clamped(w_um: f64) {
    if !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
        eprintln!(
            "warning: coupling width factor went negative at w = {w_um} um; clamping g to 0"
        );
    }
}

/// The three design wavelengths tied by energy conservation
/// `1/lambda3 = 1/lambda1 + 1/lambda2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignWavelengths {
    pub lambda1_nm: f64,
    pub lambda2_nm: f64,
    pub lambda3_center_nm: f64,
}

impl DesignWavelengths {
    /// Checks positivity and energy conservation to 1e-9 1/nm.
    pub fn new(lambda1_nm: f64, lambda2_nm: f64, lambda3_center_nm: f64) -> Result<Self> {
        if lambda1_nm <= 0.0 || lambda2_nm <= 0.0 || lambda3_center_nm <= 0.0 {
            return Err(Error::domain("wavelengths must be positive"));
        }
        let residual = (1.0 / lambda3_center_nm - 1.0 / lambda1_nm - 1.0 / lambda2_nm).abs();
        if residual > 1e-9 {
            let derived = 1.0 / (1.0 / lambda1_nm + 1.0 / lambda2_nm);
            return Err(Error::domain(format!(
                "energy conservation violated by {residual:.3e} 1/nm; \
                 for lambda1 = {lambda1_nm} nm and lambda2 = {lambda2_nm} nm the idler \
                 center must be {derived:.9} nm"
            )));
        }
        Ok(Self {
            lambda1_nm,
            lambda2_nm,
            lambda3_center_nm,
        })
    }

    /// Derives the idler center wavelength exactly from signal and pump.
    pub fn from_signal_pump(lambda1_nm: f64, lambda2_nm: f64) -> Result<Self> {
        if lambda1_nm <= 0.0 || lambda2_nm <= 0.0 {
            return Err(Error::domain("wavelengths must be positive"));
        }
        Ok(Self {
            lambda1_nm,
            lambda2_nm,
            lambda3_center_nm: 1.0 / (1.0 / lambda1_nm + 1.0 / lambda2_nm),
        })
    }
}

impl Default for DesignWavelengths {
    fn default() -> Self {
        Self::from_signal_pump(DEFAULT_LAMBDA1_NM, DEFAULT_LAMBDA2_NM).unwrap()
    }
}

/// Pump scaling of the coupling strength: `g = g_ref sqrt(P/p_ref) (1 + g_slope dw)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    /// Coupling strength at the reference pump power, rad/um.
    pub g_ref: f64,
    /// Reference pump power, W.
    pub p_ref_w: f64,
    /// Relative change of g per nm of width offset from w0, 1/nm.
    pub g_slope_per_nm: f64,
}

impl CouplingSpec {
    pub fn new(g_ref: f64, p_ref_w: f64, g_slope_per_nm: f64) -> Result<Self> {
        if g_ref < 0.0 {
            return Err(Error::domain("g_ref must be >= 0"));
        }
        if p_ref_w <= 0.0 {
            return Err(Error::domain("p_ref must be > 0"));
        }
        Ok(Self {
            g_ref,
            p_ref_w,
            g_slope_per_nm,
        })
    }

    fn evaluate(&self, w_offset_nm: f64, pump_power_w: f64) -> Result<f64> {
        if pump_power_w < 0.0 {
            return Err(Error::domain(format!(
                "pump power must be >= 0, got {pump_power_w} W"
            )));
        }
        let factor = 1.0 + self.g_slope_per_nm * w_offset_nm;
        let factor = if factor < 0.0 {
            warn_coupling_clamped(w_offset_nm);
            0.0
        } else {
            factor
        };
        Ok(self.g_ref * (pump_power_w / self.p_ref_w).sqrt() * factor)
    }
}

impl Default for CouplingSpec {
    fn default() -> Self {
        Self {
            g_ref: default_g_ref(),
            p_ref_w: DEFAULT_P_REF_W,
            g_slope_per_nm: 0.0,
        }
    }
}

/// Linearized mismatch model:
/// `dbeta(w, l3) = -kappa_w (w - w0)[nm] + dbeta_dlambda (l3 - l3_center)[nm]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDispersion {
    pub w0_um: f64,
    pub kappa_w: f64,
    pub dbeta_dlambda: f64,
    pub coupling: CouplingSpec,
    pub design: DesignWavelengths,
}

impl SyntheticDispersion {
    pub fn new(
        w0_um: f64,
        kappa_w: f64,
        dbeta_dlambda: f64,
        coupling: CouplingSpec,
        design: DesignWavelengths,
    ) -> Result<Self> {
        if w0_um <= 0.0 {
            return Err(Error::domain("w0 must be positive"));
        }
        if kappa_w <= 0.0 {
            return Err(Error::domain("kappa_w must be positive"));
        }
        if dbeta_dlambda <= 0.0 {
            return Err(Error::domain("dbeta_dlambda must be positive"));
        }
        Ok(Self {
            w0_um,
            kappa_w,
            dbeta_dlambda,
            coupling,
            design,
        })
    }

    /// The documented default calibration.
    pub fn default_calibration() -> Self {
        Self {
            w0_um: DEFAULT_W0_UM,
            kappa_w: DEFAULT_KAPPA_W,
            dbeta_dlambda: DEFAULT_DBETA_DLAMBDA,
            coupling: CouplingSpec::default(),
            design: DesignWavelengths::default(),
        }
    }

    fn delta_beta(&self, w_um: f64, lambda3_nm: f64) -> f64 {
        -self.kappa_w * (w_um - self.w0_um) * 1e3
            + self.dbeta_dlambda * (lambda3_nm - self.design.lambda3_center_nm)
    }
}

/// One row of effective-index data at the three design wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexSample {
    pub w_um: f64,
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TabulatedRaw {
    samples: Vec<IndexSample>,
    design: DesignWavelengths,
    coupling: CouplingSpec,
}

/// Mismatch model interpolated from index samples; strictly increasing in `w`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "TabulatedRaw", into = "TabulatedRaw")]
pub struct TabulatedDispersion {
    samples: Vec<IndexSample>,
    design: DesignWavelengths,
    coupling: CouplingSpec,
    n1_of_w: MonotoneCubic,
    n2_of_w: MonotoneCubic,
    n3_of_w: MonotoneCubic,
    /// Phase-matched width at the center wavelength if the mismatch changes
    /// sign inside the tabulated range; reference point for `g_slope`.
    w_center_um: Option<f64>,
}

impl PartialEq for TabulatedDispersion {
    fn eq(&self, other: &Self) -> bool {
        self.samples == other.samples
            && self.design == other.design
            && self.coupling == other.coupling
    }
}

impl TryFrom<TabulatedRaw> for TabulatedDispersion {
    type Error = Error;

    fn try_from(raw: TabulatedRaw) -> Result<Self> {
        Self::from_samples(raw.samples, raw.design, raw.coupling)
    }
}

impl From<TabulatedDispersion> for TabulatedRaw {
    fn from(t: TabulatedDispersion) -> Self {
        TabulatedRaw {
            samples: t.samples,
            design: t.design,
            coupling: t.coupling,
        }
    }
}

impl TabulatedDispersion {
    pub fn from_samples(
        samples: Vec<IndexSample>,
        design: DesignWavelengths,
        coupling: CouplingSpec,
    ) -> Result<Self> {
        if samples.len() < 4 {
            return Err(Error::domain(format!(
                "tabulated dispersion needs at least 4 samples, got {}",
                samples.len()
            )));
        }
        for pair in samples.windows(2) {
            if pair[1].w_um == pair[0].w_um {
                return Err(Error::domain(format!(
                    "duplicate width {} um in index table",
                    pair[0].w_um
                )));
            }
            if pair[1].w_um < pair[0].w_um {
                return Err(Error::domain(format!(
                    "widths must be strictly increasing; {} um follows {} um",
                    pair[1].w_um, pair[0].w_um
                )));
            }
        }
        let w: Vec<f64> = samples.iter().map(|s| s.w_um).collect();
        let n1: Vec<f64> = samples.iter().map(|s| s.n1).collect();
        let n2: Vec<f64> = samples.iter().map(|s| s.n2).collect();
        let n3: Vec<f64> = samples.iter().map(|s| s.n3).collect();
        let mut model = Self {
            samples,
            design,
            coupling,
            n1_of_w: MonotoneCubic::new(&w, &n1)?,
            n2_of_w: MonotoneCubic::new(&w, &n2)?,
            n3_of_w: MonotoneCubic::new(&w, &n3)?,
            w_center_um: None,
        };
        model.w_center_um = model
            .solve_phase_match(design.lambda3_center_nm)
            .ok();
        Ok(model)
    }

    pub fn samples(&self) -> &[IndexSample] {
        &self.samples
    }

    pub fn width_range_um(&self) -> (f64, f64) {
        (self.n1_of_w.min_x(), self.n1_of_w.max_x())
    }

    fn check_range(&self, w_um: f64) -> Result<()> {
        let (min, max) = self.width_range_um();
        if w_um < min || w_um > max {
            return Err(Error::WidthOutOfRange {
                width_um: w_um,
                min_um: min,
                max_um: max,
            });
        }
        Ok(())
    }

    /// Mismatch at the center wavelength: `2 pi (n1/l1 + n2/l2 - n3/l3)`,
    /// wavelengths in um so the result is rad/um.
    fn delta_beta_center(&self, w_um: f64) -> f64 {
        let l1 = self.design.lambda1_nm * 1e-3;
        let l2 = self.design.lambda2_nm * 1e-3;
        let l3 = self.design.lambda3_center_nm * 1e-3;
        TWO_PI
            * (self.n1_of_w.eval(w_um) / l1 + self.n2_of_w.eval(w_um) / l2
                - self.n3_of_w.eval(w_um) / l3)
    }

    /// `d(dbeta)/dlambda = 2 pi (n3 - n1) / lambda3^2`, in rad/um per nm.
    pub fn dbeta_dlambda_from_indices(&self, w_um: f64) -> Result<f64> {
        self.check_range(w_um)?;
        let l3 = self.design.lambda3_center_nm;
        let dn = self.n3_of_w.eval(w_um) - self.n1_of_w.eval(w_um);
        Ok(TWO_PI * dn / (l3 * l3) * 1e3)
    }

    fn delta_beta(&self, w_um: f64, lambda3_nm: f64) -> Result<f64> {
        self.check_range(w_um)?;
        let detune = lambda3_nm - self.design.lambda3_center_nm;
        Ok(self.delta_beta_center(w_um) + self.dbeta_dlambda_from_indices(w_um)? * detune)
    }

    fn ddelta_beta_dw(&self, w_um: f64, lambda3_nm: f64) -> Result<f64> {
        self.check_range(w_um)?;
        let l1 = self.design.lambda1_nm * 1e-3;
        let l2 = self.design.lambda2_nm * 1e-3;
        let l3c = self.design.lambda3_center_nm * 1e-3;
        let center = TWO_PI
            * (self.n1_of_w.deriv(w_um) / l1 + self.n2_of_w.deriv(w_um) / l2
                - self.n3_of_w.deriv(w_um) / l3c);
        let detune = lambda3_nm - self.design.lambda3_center_nm;
        let ddetune = TWO_PI * (self.n3_of_w.deriv(w_um) - self.n1_of_w.deriv(w_um))
            / (self.design.lambda3_center_nm * self.design.lambda3_center_nm)
            * 1e3;
        Ok(center + ddetune * detune)
    }

    fn solve_phase_match(&self, lambda3_nm: f64) -> Result<f64> {
        let (lo, hi) = self.width_range_um();
        let f = |w: f64| self.delta_beta(w, lambda3_nm);
        bisect(f, lo, hi)
    }
}

/// Either backend behind one mismatch/coupling interface. The tabulated
/// variant is boxed: it carries the sample table and three interpolants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DispersionModel {
    Synthetic(SyntheticDispersion),
    Tabulated(Box<TabulatedDispersion>),
}

impl DispersionModel {
    pub fn default_calibration() -> Self {
        DispersionModel::Synthetic(SyntheticDispersion::default_calibration())
    }

    pub fn design(&self) -> &DesignWavelengths {
        match self {
            DispersionModel::Synthetic(m) => &m.design,
            DispersionModel::Tabulated(m) => &m.design,
        }
    }

    pub fn coupling(&self) -> &CouplingSpec {
        match self {
            DispersionModel::Synthetic(m) => &m.coupling,
            DispersionModel::Tabulated(m) => &m.coupling,
        }
    }

    /// Phase-matching width at the center wavelength, when one is known.
    pub fn w0_um(&self) -> Option<f64> {
        match self {
            DispersionModel::Synthetic(m) => Some(m.w0_um),
            DispersionModel::Tabulated(m) => m.w_center_um,
        }
    }

    /// Valid width interval for tabulated models; synthetic models accept any
    /// positive width.
    pub fn width_domain_um(&self) -> Option<(f64, f64)> {
        match self {
            DispersionModel::Synthetic(_) => None,
            DispersionModel::Tabulated(m) => Some(m.width_range_um()),
        }
    }

    /// Phase mismatch, rad/um.
    pub fn delta_beta(&self, w_um: f64, lambda3_nm: f64) -> Result<f64> {
        if lambda3_nm <= 0.0 {
            return Err(Error::domain("lambda3 must be positive"));
        }
        match self {
            DispersionModel::Synthetic(m) => Ok(m.delta_beta(w_um, lambda3_nm)),
            DispersionModel::Tabulated(m) => m.delta_beta(w_um, lambda3_nm),
        }
    }

    /// Partial derivative of the mismatch with respect to width, rad/um per um.
    pub fn ddelta_beta_dw(&self, w_um: f64, lambda3_nm: f64) -> Result<f64> {
        match self {
            DispersionModel::Synthetic(m) => Ok(-m.kappa_w * 1e3),
            DispersionModel::Tabulated(m) => m.ddelta_beta_dw(w_um, lambda3_nm),
        }
    }

    /// Mismatch-versus-wavelength slope at width `w`, rad/um per nm.
    pub fn dbeta_dlambda(&self, w_um: f64) -> Result<f64> {
        match self {
            DispersionModel::Synthetic(m) => Ok(m.dbeta_dlambda),
            DispersionModel::Tabulated(m) => m.dbeta_dlambda_from_indices(w_um),
        }
    }

    /// Pump-scaled coupling strength, rad/um; clamped at zero if the width
    /// factor goes negative.
    pub fn coupling_g(&self, w_um: f64, pump_power_w: f64) -> Result<f64> {
        let w_ref = match self {
            DispersionModel::Synthetic(m) => m.w0_um,
            DispersionModel::Tabulated(m) => {
                m.check_range(w_um)?;
                m.w_center_um.unwrap_or(m.width_range_um().0)
            }
        };
        self.coupling().evaluate((w_um - w_ref) * 1e3, pump_power_w)
    }

    /// Width with `|dbeta(w, lambda3)| < 1e-10`, found by bisection.
    pub fn phase_matched_width(&self, lambda3_nm: f64) -> Result<f64> {
        match self {
            DispersionModel::Tabulated(m) => m.solve_phase_match(lambda3_nm),
            DispersionModel::Synthetic(m) => {
                // expand a bracket around w0 until the sign changes
                let f = |w: f64| Ok(m.delta_beta(w, lambda3_nm));
                let mut half = 1e-3;
                for _ in 0..64 {
                    let lo = (m.w0_um - half).max(1e-9);
                    let hi = m.w0_um + half;
                    if m.delta_beta(lo, lambda3_nm) * m.delta_beta(hi, lambda3_nm) <= 0.0 {
                        return bisect(f, lo, hi);
                    }
                    half *= 2.0;
                }
                Err(Error::Solve(format!(
                    "no phase-matching width found near w0 for lambda3 = {lambda3_nm} nm"
                )))
            }
        }
    }
}

/// Bisection for the mismatch zero; the final residual is below 1e-10 rad/um.
fn bisect<F>(f: F, mut lo: f64, mut hi: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo * fhi > 0.0 {
        return Err(Error::Solve(format!(
            "mismatch does not change sign over [{lo}, {hi}] um"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid)?;
        if fmid.abs() < 1e-10 * 0.5 || (hi - lo) < f64::EPSILON * mid.abs() {
            return Ok(mid);
        }
        if flo * fmid <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Generates an index table that reproduces a synthetic model exactly:
/// `n1` linear in `w`, `n3 = n1 + C` with `C` pinned by `dbeta_dlambda`, and
/// `n2` solved per sample so the tabulated mismatch equals the synthetic one.
pub fn synthetic_index_samples(
    model: &SyntheticDispersion,
    w_min_um: f64,
    w_max_um: f64,
    count: usize,
) -> Result<Vec<IndexSample>> {
    if count < 4 {
        return Err(Error::domain("index table needs at least 4 samples"));
    }
    if w_min_um >= w_max_um || w_min_um <= 0.0 {
        return Err(Error::domain("invalid width range for index table"));
    }
    let l1 = model.design.lambda1_nm * 1e-3;
    let l2 = model.design.lambda2_nm * 1e-3;
    let l3 = model.design.lambda3_center_nm * 1e-3;
    let contrast = model.dbeta_dlambda * model.design.lambda3_center_nm.powi(2) / (TWO_PI * 1e3);
    let n1_slope = model.kappa_w * 1e3 * l2 / TWO_PI;
    let n1_at = |w: f64| 2.0 + n1_slope * (w - model.w0_um);

    let samples = (0..count)
        .map(|i| {
            let w = w_min_um + (w_max_um - w_min_um) * i as f64 / (count - 1) as f64;
            let n1 = n1_at(w);
            let n3 = n1 + contrast;
            let n2 = l2 * (model.delta_beta(w, model.design.lambda3_center_nm) / TWO_PI
                + n3 / l3
                - n1 / l1);
            IndexSample { w_um: w, n1, n2, n3 }
        })
        .collect();
    Ok(samples)
}

/// Writes the `w_um,n1,n2,n3` CSV consumed by [`load_tabulated`].
pub fn write_index_csv<W: Write>(mut out: W, samples: &[IndexSample]) -> Result<()> {
    writeln!(out, "w_um,n1,n2,n3")?;
    for s in samples {
        writeln!(out, "{:.17e},{:.17e},{:.17e},{:.17e}", s.w_um, s.n1, s.n2, s.n3)?;
    }
    Ok(())
}

/// Loads a tabulated model from the `w_um,n1,n2,n3` CSV schema with the
/// default design wavelengths and coupling.
pub fn load_tabulated(path: &Path) -> Result<TabulatedDispersion> {
    load_tabulated_with(path, DesignWavelengths::default(), CouplingSpec::default())
}

pub fn load_tabulated_with(
    path: &Path,
    design: DesignWavelengths,
    coupling: CouplingSpec,
) -> Result<TabulatedDispersion> {
    let file = std::fs::File::open(path)?;
    let samples = parse_index_csv(std::io::BufReader::new(file))?;
    TabulatedDispersion::from_samples(samples, design, coupling)
}

pub fn parse_index_csv<R: BufRead>(reader: R) -> Result<Vec<IndexSample>> {
    let mut samples = Vec::new();
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "empty file; expected header `w_um,n1,n2,n3`".into(),
        })?;
    let header = header?;
    let normalized: Vec<&str> = header.split(',').map(str::trim).collect();
    if normalized != ["w_um", "n1", "n2", "n3"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `w_um,n1,n2,n3`, got `{header}`"),
        });
    }

    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 4 comma-separated fields, got {}", fields.len()),
            });
        }
        let mut values = [0.0; 4];
        for (slot, field) in values.iter_mut().zip(&fields) {
            *slot = field.parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                message: format!("bad number `{field}`: {e}"),
            })?;
        }
        samples.push(IndexSample {
            w_um: values[0],
            n1: values[1],
            n2: values[2],
            n3: values[3],
        });
    }

    // re-check ordering here so the error carries a line number
    for (i, pair) in samples.windows(2).enumerate() {
        if pair[1].w_um <= pair[0].w_um {
            let message = if pair[1].w_um == pair[0].w_um {
                format!("duplicate width {} um", pair[0].w_um)
            } else {
                format!(
                    "widths must be strictly increasing; {} um follows {} um",
                    pair[1].w_um, pair[0].w_um
                )
            };
            return Err(Error::Parse {
                line: i + 3,
                message,
            });
        }
    }
    if samples.len() < 4 {
        return Err(Error::Parse {
            line: samples.len() + 1,
            message: format!("need at least 4 data rows, got {}", samples.len()),
        });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic() -> SyntheticDispersion {
        SyntheticDispersion::default_calibration()
    }

    fn model() -> DispersionModel {
        DispersionModel::Synthetic(synthetic())
    }

    fn center() -> f64 {
        DesignWavelengths::default().lambda3_center_nm
    }

    #[test]
    fn design_energy_conservation() {
        let d = DesignWavelengths::default();
        assert!((1.0 / d.lambda3_center_nm - 1.0 / d.lambda1_nm - 1.0 / d.lambda2_nm).abs() < 1e-15);
        // the rounded display value 600.4 nm misses the 1e-9 1/nm gate
        assert!(DesignWavelengths::new(1550.0, 980.0, 600.4).is_err());
        assert!(DesignWavelengths::new(1550.0, 980.0, d.lambda3_center_nm).is_ok());
        assert!(DesignWavelengths::new(-1550.0, 980.0, 600.0).is_err());
    }

    #[test]
    fn delta_beta_matches_linear_form() {
        let m = model();
        // phase-matching point by construction
        assert_eq!(m.delta_beta(0.773, center()).unwrap(), 0.0);
        // dw = 4 nm at kappa_w = 0.01 -> -0.04 rad/um
        let db = m.delta_beta(0.777, center()).unwrap();
        assert!((db + 0.04).abs() < 1e-12, "db = {db}");
        // one nm of idler detuning adds dbeta_dlambda
        let db = m.delta_beta(0.773, center() + 1.0).unwrap();
        assert!((db - DEFAULT_DBETA_DLAMBDA).abs() < 1e-15);
        assert!(m.delta_beta(0.773, -5.0).is_err());
    }

    #[test]
    fn finite_differences_recover_slopes() {
        let m = model();
        let h = 2e-4;
        let dw = (m.delta_beta(0.78 + h, center()).unwrap()
            - m.delta_beta(0.78 - h, center()).unwrap())
            / (2.0 * h);
        assert!(((-dw * 1e-3) - DEFAULT_KAPPA_W).abs() / DEFAULT_KAPPA_W < 1e-9);
        let hl = 1e-2;
        let dl = (m.delta_beta(0.78, center() + hl).unwrap()
            - m.delta_beta(0.78, center() - hl).unwrap())
            / (2.0 * hl);
        assert!((dl - DEFAULT_DBETA_DLAMBDA).abs() / DEFAULT_DBETA_DLAMBDA < 1e-9);
    }

    #[test]
    fn coupling_g_pump_scaling() {
        let m = model();
        assert_eq!(m.coupling_g(0.773, 0.0).unwrap(), 0.0);
        let g1 = m.coupling_g(0.773, 1.0).unwrap();
        assert_eq!(g1, default_g_ref());
        assert_eq!(m.coupling_g(0.773, 4.0).unwrap(), 2.0 * g1);
        assert!(m.coupling_g(0.773, -1.0).is_err());
    }

    #[test]
    fn coupling_g_width_slope_clamps_at_zero() {
        let mut syn = synthetic();
        syn.coupling.g_slope_per_nm = -0.1;
        let m = DispersionModel::Synthetic(syn);
        // 20 nm above w0 the factor 1 - 0.1*20 = -1 clamps to 0
        assert_eq!(m.coupling_g(0.793, 1.0).unwrap(), 0.0);
        // 5 nm above w0 the factor is 0.5
        let g = m.coupling_g(0.778, 1.0).unwrap();
        assert!((g - 0.5 * default_g_ref()).abs() < 1e-18);
    }

    #[test]
    fn default_g_ref_reproduces_area_anchor() {
        let g = default_g_ref();
        let area = TWO_PI * g * g * AREA_ANCHOR_LENGTH_UM / DEFAULT_DBETA_DLAMBDA;
        assert!((area - AREA_ANCHOR_NM).abs() < 1e-15);
    }

    #[test]
    fn phase_matched_width_synthetic() {
        let m = model();
        assert_eq!(m.phase_matched_width(center()).unwrap(), 0.773);
        // linear-model algebra: w = w0 + dbeta_dlambda * detune / kappa_w (nm)
        let detune = 3.0;
        let w = m.phase_matched_width(center() + detune).unwrap();
        let expect = 0.773 + DEFAULT_DBETA_DLAMBDA * detune / DEFAULT_KAPPA_W * 1e-3;
        assert!((w - expect).abs() < 1e-9, "w = {w}, expect = {expect}");
        assert!(m.delta_beta(w, center() + detune).unwrap().abs() < 1e-10);
    }

    fn roundtrip_table() -> Vec<IndexSample> {
        synthetic_index_samples(&synthetic(), 0.723, 0.823, 11).unwrap()
    }

    #[test]
    fn tabulated_roundtrip_delta_beta() {
        let syn = model();
        let tab = DispersionModel::Tabulated(Box::new(
            TabulatedDispersion::from_samples(
                roundtrip_table(),
                DesignWavelengths::default(),
                CouplingSpec::default(),
            )
            .unwrap(),
        ));
        for i in 0..=40 {
            let w = 0.723 + 0.1 * i as f64 / 40.0;
            for detune in [-10.0, -2.0, 0.0, 5.0] {
                let a = tab.delta_beta(w, center() + detune).unwrap();
                let b = syn.delta_beta(w, center() + detune).unwrap();
                assert!((a - b).abs() < 1e-6, "w={w} detune={detune}: {a} vs {b}");
            }
            let slope = tab.dbeta_dlambda(w).unwrap();
            assert!((slope - DEFAULT_DBETA_DLAMBDA).abs() < 1e-9);
        }
    }

    #[test]
    fn tabulated_phase_match_residual() {
        let tab = DispersionModel::Tabulated(Box::new(
            TabulatedDispersion::from_samples(
                roundtrip_table(),
                DesignWavelengths::default(),
                CouplingSpec::default(),
            )
            .unwrap(),
        ));
        let w = tab.phase_matched_width(center() + 2.0).unwrap();
        assert!(tab.delta_beta(w, center() + 2.0).unwrap().abs() < 1e-10);
        // no sign change far outside the detuning the table can reach
        assert!(tab.phase_matched_width(center() + 500.0).is_err());
    }

    #[test]
    fn tabulated_rejects_out_of_range_width() {
        let tab = DispersionModel::Tabulated(Box::new(
            TabulatedDispersion::from_samples(
                roundtrip_table(),
                DesignWavelengths::default(),
                CouplingSpec::default(),
            )
            .unwrap(),
        ));
        let err = tab.delta_beta(0.9, center()).unwrap_err();
        match err {
            Error::WidthOutOfRange { min_um, max_um, .. } => {
                assert_eq!(min_um, 0.723);
                assert_eq!(max_um, 0.823);
            }
            other => panic!("expected range error, got {other}"),
        }
    }

    #[test]
    fn csv_roundtrip_through_writer_and_parser() {
        let samples = roundtrip_table();
        let mut buf = Vec::new();
        write_index_csv(&mut buf, &samples).unwrap();
        let parsed = parse_index_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(parsed.len(), samples.len());
        for (a, b) in parsed.iter().zip(&samples) {
            assert_eq!(a.w_um, b.w_um);
            assert_eq!(a.n1, b.n1);
            assert_eq!(a.n2, b.n2);
            assert_eq!(a.n3, b.n3);
        }
    }

    #[test]
    fn csv_parse_errors_carry_line_numbers() {
        let bad_header = "width,n1,n2,n3\n0.7,2,2,2\n";
        match parse_index_csv(std::io::Cursor::new(bad_header)).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("{other}"),
        }

        let bad_number = "w_um,n1,n2,n3\n0.70,2.0,2.1,2.2\n0.71,2.0,oops,2.2\n0.72,2.0,2.1,2.2\n0.73,2.0,2.1,2.2\n";
        match parse_index_csv(std::io::Cursor::new(bad_number)).unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("oops"));
            }
            other => panic!("{other}"),
        }

        let dup = "w_um,n1,n2,n3\n0.70,2.0,2.1,2.2\n0.70,2.0,2.1,2.2\n0.72,2.0,2.1,2.2\n0.73,2.0,2.1,2.2\n";
        match parse_index_csv(std::io::Cursor::new(dup)).unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("duplicate width 0.7"));
            }
            other => panic!("{other}"),
        }

        let short = "w_um,n1,n2,n3\n0.70,2.0,2.1,2.2\n0.71,2.0,2.1,2.2\n0.72,2.0,2.1,2.2\n";
        assert!(matches!(
            parse_index_csv(std::io::Cursor::new(short)).unwrap_err(),
            Error::Parse { .. }
        ));

        let missing_field = "w_um,n1,n2,n3\n0.70,2.0,2.1\n";
        match parse_index_csv(std::io::Cursor::new(missing_field)).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn tabulated_needs_four_samples() {
        let samples = roundtrip_table().into_iter().take(3).collect::<Vec<_>>();
        assert!(TabulatedDispersion::from_samples(
            samples,
            DesignWavelengths::default(),
            CouplingSpec::default()
        )
        .is_err());
    }

    #[test]
    fn serde_roundtrip_of_models() {
        let m = model();
        let text = serde_json::to_string(&m).unwrap();
        let back: DispersionModel = serde_json::from_str(&text).unwrap();
        assert_eq!(m, back);

        let tab = DispersionModel::Tabulated(Box::new(
            TabulatedDispersion::from_samples(
                roundtrip_table(),
                DesignWavelengths::default(),
                CouplingSpec::default(),
            )
            .unwrap(),
        ));
        let text = serde_json::to_string(&tab).unwrap();
        let back: DispersionModel = serde_json::from_str(&text).unwrap();
        assert_eq!(tab, back);
        // the rebuilt interpolant evaluates identically
        assert_eq!(
            tab.delta_beta(0.75, center()).unwrap(),
            back.delta_beta(0.75, center()).unwrap()
        );
    }
}
