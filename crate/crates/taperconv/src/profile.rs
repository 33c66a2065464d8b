//! Width-versus-position functions for each waveguide geometry.

use std::io::BufRead;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::dispersion::DispersionModel;
use crate::{Error, Result};

static PIECEWISE_CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

/// Waveguide width as a function of the propagation coordinate.
///
/// `Linear` pins the center width at mid-length, `w(L/2) = w0`, and changes by
/// `delta_w` end to end. `Cosine` starts at its minimum width,
/// `w(0) = w0 - delta_w/2`, and repeats every `period_um`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TaperProfile {
    Uniform {
        w0_um: f64,
    },
    Linear {
        w0_um: f64,
        delta_w_nm: f64,
        length_um: f64,
    },
    Cosine {
        w0_um: f64,
        delta_w_nm: f64,
        period_um: f64,
    },
    Piecewise {
        points: Vec<(f64, f64)>,
    },
}

impl TaperProfile {
    pub fn uniform(w0_um: f64) -> Result<Self> {
        if w0_um <= 0.0 {
            return Err(Error::domain("width must be positive"));
        }
        Ok(TaperProfile::Uniform { w0_um })
    }

    pub fn linear(w0_um: f64, delta_w_nm: f64, length_um: f64) -> Result<Self> {
        if length_um <= 0.0 {
            return Err(Error::domain("taper length must be positive"));
        }
        if w0_um - delta_w_nm.abs() * 1e-3 / 2.0 <= 0.0 {
            return Err(Error::domain("taper width reaches zero inside the device"));
        }
        Ok(TaperProfile::Linear {
            w0_um,
            delta_w_nm,
            length_um,
        })
    }

    pub fn cosine(w0_um: f64, delta_w_nm: f64, period_um: f64) -> Result<Self> {
        if period_um <= 0.0 {
            return Err(Error::domain("modulation period must be positive"));
        }
        if w0_um - delta_w_nm.abs() * 1e-3 / 2.0 <= 0.0 {
            return Err(Error::domain("modulated width reaches zero"));
        }
        Ok(TaperProfile::Cosine {
            w0_um,
            delta_w_nm,
            period_um,
        })
    }

    pub fn piecewise(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain("piecewise profile needs at least 2 points"));
        }
        for pair in points.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::domain(format!(
                    "piecewise z must be strictly increasing; {} follows {}",
                    pair[1].0, pair[0].0
                )));
            }
        }
        if points.iter().any(|&(_, w)| w <= 0.0) {
            return Err(Error::domain("piecewise widths must be positive"));
        }
        Ok(TaperProfile::Piecewise { points })
    }

    /// Width at position `z`, um.
    pub fn width_at(&self, z_um: f64) -> Result<f64> {
        if z_um < 0.0 {
            return Err(Error::domain(format!("z must be >= 0, got {z_um} um")));
        }
        match self {
            TaperProfile::Uniform { w0_um } => Ok(*w0_um),
            TaperProfile::Linear {
                w0_um,
                delta_w_nm,
                length_um,
            } => {
                // tolerate end-of-interval rounding from stepped integrators
                if z_um > length_um * (1.0 + 1e-9) {
                    return Err(Error::domain(format!(
                        "z = {z_um} um beyond taper length {length_um} um"
                    )));
                }
                let z = z_um.min(*length_um);
                Ok(w0_um + delta_w_nm * 1e-3 / length_um * (z - length_um / 2.0))
            }
            TaperProfile::Cosine {
                w0_um,
                delta_w_nm,
                period_um,
            } => Ok(w0_um
                - delta_w_nm * 1e-3 / 2.0 * (std::f64::consts::TAU * z_um / period_um).cos()),
            TaperProfile::Piecewise { points } => {
                let first = points.first().unwrap();
                let last = points.last().unwrap();
                if z_um < first.0 || z_um > last.0 {
                    if !PIECEWISE_CLAMP_WARNED.swap(true, Ordering::Relaxed) {
                        eprintln!(
                            "warning: z = {z_um} um outside piecewise profile range \
                             [{}, {}] um; clamping to the end width",
                            first.0, last.0
                        );
                    }
                    return Ok(if z_um < first.0 { first.1 } else { last.1 });
                }
                let i = match points
                    .binary_search_by(|p| p.0.partial_cmp(&z_um).unwrap())
                {
                    Ok(i) => return Ok(points[i].1),
                    Err(i) => i - 1,
                };
                let (z0, w0) = points[i];
                let (z1, w1) = points[i + 1];
                Ok(w0 + (w1 - w0) * (z_um - z0) / (z1 - z0))
            }
        }
    }

    /// `dw/dz` at position `z`, um per um.
    pub fn slope_at(&self, z_um: f64) -> Result<f64> {
        if z_um < 0.0 {
            return Err(Error::domain(format!("z must be >= 0, got {z_um} um")));
        }
        match self {
            TaperProfile::Uniform { .. } => Ok(0.0),
            TaperProfile::Linear {
                delta_w_nm,
                length_um,
                ..
            } => {
                if z_um > length_um * (1.0 + 1e-9) {
                    return Err(Error::domain(format!(
                        "z = {z_um} um beyond taper length {length_um} um"
                    )));
                }
                Ok(delta_w_nm * 1e-3 / length_um)
            }
            TaperProfile::Cosine {
                delta_w_nm,
                period_um,
                ..
            } => {
                let phase = std::f64::consts::TAU * z_um / period_um;
                Ok(delta_w_nm * 1e-3 / 2.0 * std::f64::consts::TAU / period_um * phase.sin())
            }
            TaperProfile::Piecewise { points } => {
                let first = points.first().unwrap();
                let last = points.last().unwrap();
                if z_um < first.0 || z_um >= last.0 {
                    // clamped regions are flat; the final knot takes the last
                    // segment's slope only at exactly z = z_last
                    if z_um == last.0 {
                        let (z0, w0) = points[points.len() - 2];
                        return Ok((last.1 - w0) / (last.0 - z0));
                    }
                    return Ok(0.0);
                }
                let i = match points
                    .binary_search_by(|p| p.0.partial_cmp(&z_um).unwrap())
                {
                    Ok(i) => i.min(points.len() - 2),
                    Err(i) => i - 1,
                };
                let (z0, w0) = points[i];
                let (z1, w1) = points[i + 1];
                Ok((w1 - w0) / (z1 - z0))
            }
        }
    }

    /// End of the z-range on which the profile is defined without clamping.
    pub fn domain_end_um(&self) -> Option<f64> {
        match self {
            TaperProfile::Uniform { .. } | TaperProfile::Cosine { .. } => None,
            TaperProfile::Linear { length_um, .. } => Some(*length_um),
            TaperProfile::Piecewise { points } => Some(points.last().unwrap().0),
        }
    }

    /// Modulation period for periodic profiles.
    pub fn period_um(&self) -> Option<f64> {
        match self {
            TaperProfile::Cosine { period_um, .. } => Some(*period_um),
            _ => None,
        }
    }

    /// Full width excursion over the device, nm; drives spectral-window sizing.
    pub fn width_span_nm(&self) -> f64 {
        match self {
            TaperProfile::Uniform { .. } => 0.0,
            TaperProfile::Linear { delta_w_nm, .. }
            | TaperProfile::Cosine { delta_w_nm, .. } => delta_w_nm.abs(),
            TaperProfile::Piecewise { points } => {
                let min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
                let max = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
                (max - min) * 1e3
            }
        }
    }
}

/// Chain rule `d(dbeta)/dz = d(dbeta)/dw * dw/dz`, rad/um^2.
pub fn dbeta_dz(
    profile: &TaperProfile,
    model: &DispersionModel,
    z_um: f64,
    lambda3_nm: f64,
) -> Result<f64> {
    let w = profile.width_at(z_um)?;
    Ok(model.ddelta_beta_dw(w, lambda3_nm)? * profile.slope_at(z_um)?)
}

/// Loads a piecewise profile from the `z_um,w_um` CSV schema.
pub fn load_piecewise(path: &Path) -> Result<TaperProfile> {
    let file = std::fs::File::open(path)?;
    parse_piecewise_csv(std::io::BufReader::new(file))
}

pub fn parse_piecewise_csv<R: BufRead>(reader: R) -> Result<TaperProfile> {
    let mut points = Vec::new();
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty file; expected header `z_um,w_um`".into(),
    })?;
    let header = header?;
    if header.split(',').map(str::trim).collect::<Vec<_>>() != ["z_um", "w_um"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `z_um,w_um`, got `{header}`"),
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
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 2 comma-separated fields, got {}", fields.len()),
            });
        }
        let z = fields[0].parse::<f64>().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad number `{}`: {e}", fields[0]),
        })?;
        let w = fields[1].parse::<f64>().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad number `{}`: {e}", fields[1]),
        })?;
        points.push((z, w));
    }
    TaperProfile::piecewise(points)
}
