//! Config parsing, subcommand dispatch, and CSV/JSON emission.
//!
//! Configs are strict JSON: unknown keys are rejected, constraint violations
//! name the offending JSON path, and the fully resolved config (all defaults
//! materialized) is echoed into every output file. Numeric results are
//! printed with 12 significant digits.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::analytic;
use crate::dispersion::{
    load_tabulated_with, CouplingSpec, DesignWavelengths, DispersionModel, SyntheticDispersion,
    AREA_ANCHOR_LENGTH_UM, AREA_ANCHOR_NM, DEFAULT_DBETA_DLAMBDA, DEFAULT_KAPPA_W,
    DEFAULT_LAMBDA1_NM, DEFAULT_LAMBDA2_NM, DEFAULT_P_REF_W, DEFAULT_W0_UM, TWO_PI,
};
use crate::experiments::{
    adiabatic_thresholds, area_sweep_delta_w, area_sweep_pump, sweep_bandwidth, sweep_delta_w,
    sweep_length, sweep_period, sweep_pump, ProfileTemplate, SweepRecord,
};
use crate::profile::{load_piecewise, TaperProfile};
use crate::propagation::{propagate, PropagationSettings, StepPolicy};
use crate::selfcheck;
use crate::spectrum::{compute_spectrum, default_window};
use crate::{Error, Result, VERSION};

/// Formats a number with 12 significant digits; stable across platforms so
/// golden files can be compared at 1e-9 relative tolerance.
pub fn sig12(x: f64) -> String {
    format!("{x:.11e}")
}

/// Rounds to 12 significant digits for JSON payload numbers, so JSON and CSV
/// outputs carry the same values.
pub fn round_sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    sig12(x).parse().expect("formatted float reparses")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Propagate,
    Spectrum,
    Sweep,
    AreaLaw,
    PhaseMatch,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Clean,
    ValidationFailed,
}

// ---------------------------------------------------------------------------
// config schema

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dispersion: DispersionConfig,
    pub profile: ProfileConfig,
    pub simulation: SimulationConfig,
    pub spectrum: SpectrumConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum DispersionConfig {
    Synthetic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w0_um: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        kappa_w: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dbeta_dlambda: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g_ref: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p_ref_w: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g_slope_per_nm: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda1_nm: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda2_nm: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda3_center_nm: Option<f64>,
    },
    Tabulated {
        path: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g_ref: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p_ref_w: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g_slope_per_nm: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda1_nm: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda2_nm: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda3_center_nm: Option<f64>,
    },
}

impl Default for DispersionConfig {
    fn default() -> Self {
        DispersionConfig::Synthetic {
            w0_um: None,
            kappa_w: None,
            dbeta_dlambda: None,
            g_ref: None,
            p_ref_w: None,
            g_slope_per_nm: None,
            lambda1_nm: None,
            lambda2_nm: None,
            lambda3_center_nm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileConfig {
    Uniform {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w0_um: Option<f64>,
    },
    Linear {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w0_um: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta_w_nm: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        length_um: Option<f64>,
    },
    Cosine {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        w0_um: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta_w_nm: Option<f64>,
        period_um: f64,
    },
    Piecewise {
        path: String,
    },
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig::Uniform { w0_um: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length_um: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pump_power_w: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda3_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<StepPolicy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_alpha1_per_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_alpha3_per_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_min_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_max_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<SweepObservable>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Length,
    DeltaW,
    PumpPower,
    Period,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepObservable {
    EtaAtCenter,
    Area,
    Fwhm,
}

// ---------------------------------------------------------------------------
// parsing and resolution

/// Parses strict JSON from a string; error messages carry the JSON path.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config {
            path: if path.is_empty() || path == "." {
                "<root>".into()
            } else {
                path
            },
            message: e.inner().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads the config from a file, or from stdin when the path is `-`.
pub fn parse_config(path: &str) -> Result<RunConfig> {
    let text = if path == "-" {
        std::io::read_to_string(std::io::stdin())?
    } else {
        std::fs::read_to_string(path)?
    };
    parse_config_str(&text)
}

/// Fully resolved scenario plus the config echo with every default filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: DispersionModel,
    pub profile: TaperProfile,
    pub length_um: f64,
    pub pump_power_w: f64,
    pub lambda3_nm: f64,
    pub settings: PropagationSettings,
    pub lambda_min_nm: f64,
    pub lambda_max_nm: f64,
    pub points: usize,
    pub sweep: Option<SweepConfig>,
    pub echo: RunConfig,
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        fn positive(path: &str, v: Option<f64>) -> Result<()> {
            if let Some(x) = v {
                if x.is_nan() || x <= 0.0 {
                    return Err(Error::config(path, format!("must be positive, got {x}")));
                }
            }
            Ok(())
        }
        fn non_negative(path: &str, v: Option<f64>) -> Result<()> {
            if let Some(x) = v {
                if x.is_nan() || x < 0.0 {
                    return Err(Error::config(path, format!("must be >= 0, got {x}")));
                }
            }
            Ok(())
        }

        match &self.dispersion {
            DispersionConfig::Synthetic {
                w0_um,
                kappa_w,
                dbeta_dlambda,
                g_ref,
                p_ref_w,
                lambda1_nm,
                lambda2_nm,
                lambda3_center_nm,
                ..
            } => {
                positive("dispersion.w0_um", *w0_um)?;
                positive("dispersion.kappa_w", *kappa_w)?;
                positive("dispersion.dbeta_dlambda", *dbeta_dlambda)?;
                non_negative("dispersion.g_ref", *g_ref)?;
                positive("dispersion.p_ref_w", *p_ref_w)?;
                positive("dispersion.lambda1_nm", *lambda1_nm)?;
                positive("dispersion.lambda2_nm", *lambda2_nm)?;
                positive("dispersion.lambda3_center_nm", *lambda3_center_nm)?;
            }
            DispersionConfig::Tabulated {
                g_ref,
                p_ref_w,
                lambda1_nm,
                lambda2_nm,
                lambda3_center_nm,
                ..
            } => {
                non_negative("dispersion.g_ref", *g_ref)?;
                positive("dispersion.p_ref_w", *p_ref_w)?;
                positive("dispersion.lambda1_nm", *lambda1_nm)?;
                positive("dispersion.lambda2_nm", *lambda2_nm)?;
                positive("dispersion.lambda3_center_nm", *lambda3_center_nm)?;
            }
        }
        // idler center, if given, must satisfy energy conservation
        let (l1, l2, l3) = match &self.dispersion {
            DispersionConfig::Synthetic {
                lambda1_nm,
                lambda2_nm,
                lambda3_center_nm,
                ..
            }
            | DispersionConfig::Tabulated {
                lambda1_nm,
                lambda2_nm,
                lambda3_center_nm,
                ..
            } => (*lambda1_nm, *lambda2_nm, *lambda3_center_nm),
        };
        if let Some(l3) = l3 {
            DesignWavelengths::new(
                l1.unwrap_or(DEFAULT_LAMBDA1_NM),
                l2.unwrap_or(DEFAULT_LAMBDA2_NM),
                l3,
            )
            .map_err(|e| Error::config("dispersion.lambda3_center_nm", e.to_string()))?;
        }

        match &self.profile {
            ProfileConfig::Uniform { w0_um } => positive("profile.w0_um", *w0_um)?,
            ProfileConfig::Linear { w0_um, length_um, .. } => {
                positive("profile.w0_um", *w0_um)?;
                positive("profile.length_um", *length_um)?;
            }
            ProfileConfig::Cosine { w0_um, period_um, .. } => {
                positive("profile.w0_um", *w0_um)?;
                positive("profile.period_um", Some(*period_um))?;
            }
            ProfileConfig::Piecewise { .. } => {}
        }

        positive("simulation.length_um", self.simulation.length_um)?;
        non_negative("simulation.pump_power_w", self.simulation.pump_power_w)?;
        positive("simulation.lambda3_nm", self.simulation.lambda3_nm)?;
        non_negative("simulation.loss_alpha1_per_m", self.simulation.loss_alpha1_per_m)?;
        non_negative("simulation.loss_alpha3_per_m", self.simulation.loss_alpha3_per_m)?;
        if let Some(StepPolicy::Fixed(n)) = self.simulation.steps {
            if n < 16 {
                return Err(Error::config(
                    "simulation.steps",
                    format!("explicit step count must be at least 16, got {n}"),
                ));
            }
        }

        positive("spectrum.lambda_min_nm", self.spectrum.lambda_min_nm)?;
        positive("spectrum.lambda_max_nm", self.spectrum.lambda_max_nm)?;
        if self.spectrum.lambda_min_nm.is_some() != self.spectrum.lambda_max_nm.is_some() {
            return Err(Error::config(
                "spectrum.lambda_min_nm",
                "lambda_min_nm and lambda_max_nm must be given together",
            ));
        }
        if let (Some(lo), Some(hi)) = (self.spectrum.lambda_min_nm, self.spectrum.lambda_max_nm) {
            if lo >= hi {
                return Err(Error::config(
                    "spectrum.lambda_min_nm",
                    format!("lambda_min_nm ({lo}) must be below lambda_max_nm ({hi})"),
                ));
            }
        }
        if let Some(points) = self.spectrum.points {
            if points < 21 {
                return Err(Error::config(
                    "spectrum.points",
                    format!("need at least 21 points, got {points}"),
                ));
            }
        }

        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::config("sweep.values", "sweep list is empty"));
            }
            if sweep.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("sweep.values", "values must be finite"));
            }
            let must_be_positive = matches!(
                sweep.parameter,
                SweepParameter::Length | SweepParameter::Period
            );
            if must_be_positive && sweep.values.iter().any(|&v| v <= 0.0) {
                return Err(Error::config("sweep.values", "values must be positive"));
            }
            if sweep.parameter == SweepParameter::PumpPower
                && sweep.values.iter().any(|&v| v < 0.0)
            {
                return Err(Error::config("sweep.values", "pump powers must be >= 0"));
            }
        }
        Ok(())
    }

    /// Applies defaults, builds the scenario, and returns it with the echo.
    pub fn resolve(&self) -> Result<Resolved> {
        let (model, dispersion_echo) = self.resolve_dispersion()?;

        let length_um = self.simulation.length_um.unwrap_or(1000.0);
        let pump_power_w = self.simulation.pump_power_w.unwrap_or(1.0);
        let lambda3_nm = self
            .simulation
            .lambda3_nm
            .unwrap_or(model.design().lambda3_center_nm);
        let settings = PropagationSettings {
            steps: self.simulation.steps.unwrap_or_default(),
            loss_alpha1_per_m: self.simulation.loss_alpha1_per_m.unwrap_or(0.0),
            loss_alpha3_per_m: self.simulation.loss_alpha3_per_m.unwrap_or(0.0),
        };

        let (profile, profile_echo) = self.resolve_profile(&model, length_um)?;

        let (lambda_min_nm, lambda_max_nm, points) = match (
            self.spectrum.lambda_min_nm,
            self.spectrum.lambda_max_nm,
        ) {
            (Some(lo), Some(hi)) => (lo, hi, self.spectrum.points.unwrap_or(801)),
            _ => {
                let (lo, hi, points) = default_window(&model, &profile)
                    .map_err(|e| Error::config("spectrum", e.to_string()))?;
                (lo, hi, self.spectrum.points.unwrap_or(points))
            }
        };

        let echo = RunConfig {
            dispersion: dispersion_echo,
            profile: profile_echo,
            simulation: SimulationConfig {
                length_um: Some(length_um),
                pump_power_w: Some(pump_power_w),
                lambda3_nm: Some(lambda3_nm),
                steps: Some(settings.steps),
                loss_alpha1_per_m: Some(settings.loss_alpha1_per_m),
                loss_alpha3_per_m: Some(settings.loss_alpha3_per_m),
            },
            spectrum: SpectrumConfig {
                lambda_min_nm: Some(lambda_min_nm),
                lambda_max_nm: Some(lambda_max_nm),
                points: Some(points),
            },
            sweep: self.sweep.clone().map(|mut s| {
                s.observable = Some(s.observable.unwrap_or(match s.parameter {
                    SweepParameter::Period => SweepObservable::Area,
                    _ => SweepObservable::EtaAtCenter,
                }));
                s
            }),
        };

        Ok(Resolved {
            model,
            profile,
            length_um,
            pump_power_w,
            lambda3_nm,
            settings,
            lambda_min_nm,
            lambda_max_nm,
            points,
            sweep: echo.sweep.clone(),
            echo,
        })
    }

    fn resolve_dispersion(&self) -> Result<(DispersionModel, DispersionConfig)> {
        let map_err = |e: Error| match e {
            Error::Config { .. } => e,
            other => Error::config("dispersion", other.to_string()),
        };
        match &self.dispersion {
            DispersionConfig::Synthetic {
                w0_um,
                kappa_w,
                dbeta_dlambda,
                g_ref,
                p_ref_w,
                g_slope_per_nm,
                lambda1_nm,
                lambda2_nm,
                lambda3_center_nm,
            } => {
                let w0 = w0_um.unwrap_or(DEFAULT_W0_UM);
                let kappa = kappa_w.unwrap_or(DEFAULT_KAPPA_W);
                let dbdl = dbeta_dlambda.unwrap_or(DEFAULT_DBETA_DLAMBDA);
                // the default coupling reproduces the anchor area at the
                // anchor length for whatever dbeta_dlambda is configured
                let g = g_ref.unwrap_or_else(|| {
                    (AREA_ANCHOR_NM * dbdl / (TWO_PI * AREA_ANCHOR_LENGTH_UM)).sqrt()
                });
                let p_ref = p_ref_w.unwrap_or(DEFAULT_P_REF_W);
                let slope = g_slope_per_nm.unwrap_or(0.0);
                let l1 = lambda1_nm.unwrap_or(DEFAULT_LAMBDA1_NM);
                let l2 = lambda2_nm.unwrap_or(DEFAULT_LAMBDA2_NM);
                let design = match lambda3_center_nm {
                    Some(l3) => DesignWavelengths::new(l1, l2, *l3)
                        .map_err(|e| Error::config("dispersion.lambda3_center_nm", e.to_string()))?,
                    None => DesignWavelengths::from_signal_pump(l1, l2)
                        .map_err(|e| Error::config("dispersion.lambda1_nm", e.to_string()))?,
                };
                let coupling = CouplingSpec::new(g, p_ref, slope).map_err(map_err)?;
                let model = SyntheticDispersion::new(w0, kappa, dbdl, coupling, design)
                    .map_err(map_err)?;
                let echo = DispersionConfig::Synthetic {
                    w0_um: Some(w0),
                    kappa_w: Some(kappa),
                    dbeta_dlambda: Some(dbdl),
                    g_ref: Some(g),
                    p_ref_w: Some(p_ref),
                    g_slope_per_nm: Some(slope),
                    lambda1_nm: Some(l1),
                    lambda2_nm: Some(l2),
                    lambda3_center_nm: Some(design.lambda3_center_nm),
                };
                Ok((DispersionModel::Synthetic(model), echo))
            }
            DispersionConfig::Tabulated {
                path,
                g_ref,
                p_ref_w,
                g_slope_per_nm,
                lambda1_nm,
                lambda2_nm,
                lambda3_center_nm,
            } => {
                let l1 = lambda1_nm.unwrap_or(DEFAULT_LAMBDA1_NM);
                let l2 = lambda2_nm.unwrap_or(DEFAULT_LAMBDA2_NM);
                let design = match lambda3_center_nm {
                    Some(l3) => DesignWavelengths::new(l1, l2, *l3)
                        .map_err(|e| Error::config("dispersion.lambda3_center_nm", e.to_string()))?,
                    None => DesignWavelengths::from_signal_pump(l1, l2)
                        .map_err(|e| Error::config("dispersion.lambda1_nm", e.to_string()))?,
                };
                let dbdl_for_default = DEFAULT_DBETA_DLAMBDA;
                let g = g_ref.unwrap_or_else(|| {
                    (AREA_ANCHOR_NM * dbdl_for_default / (TWO_PI * AREA_ANCHOR_LENGTH_UM)).sqrt()
                });
                let p_ref = p_ref_w.unwrap_or(DEFAULT_P_REF_W);
                let slope = g_slope_per_nm.unwrap_or(0.0);
                let coupling = CouplingSpec::new(g, p_ref, slope).map_err(map_err)?;
                let model = load_tabulated_with(Path::new(path), design, coupling)
                    .map_err(|e| Error::config("dispersion.path", e.to_string()))?;
                let echo = DispersionConfig::Tabulated {
                    path: path.clone(),
                    g_ref: Some(g),
                    p_ref_w: Some(p_ref),
                    g_slope_per_nm: Some(slope),
                    lambda1_nm: Some(l1),
                    lambda2_nm: Some(l2),
                    lambda3_center_nm: Some(design.lambda3_center_nm),
                };
                Ok((DispersionModel::Tabulated(Box::new(model)), echo))
            }
        }
    }

    fn resolve_profile(
        &self,
        model: &DispersionModel,
        length_um: f64,
    ) -> Result<(TaperProfile, ProfileConfig)> {
        let model_w0 = || -> Result<f64> {
            model.w0_um().ok_or_else(|| {
                Error::config(
                    "profile.w0_um",
                    "no default width: the tabulated mismatch never crosses zero, \
                     so w0_um must be given explicitly",
                )
            })
        };
        let map_err = |e: Error| Error::config("profile", e.to_string());
        match &self.profile {
            ProfileConfig::Uniform { w0_um } => {
                let w0 = match w0_um {
                    Some(w) => *w,
                    None => model_w0()?,
                };
                Ok((
                    TaperProfile::uniform(w0).map_err(map_err)?,
                    ProfileConfig::Uniform { w0_um: Some(w0) },
                ))
            }
            ProfileConfig::Linear {
                w0_um,
                delta_w_nm,
                length_um: profile_len,
            } => {
                let w0 = match w0_um {
                    Some(w) => *w,
                    None => model_w0()?,
                };
                let dw = delta_w_nm.unwrap_or(0.0);
                let len = profile_len.unwrap_or(length_um);
                Ok((
                    TaperProfile::linear(w0, dw, len).map_err(map_err)?,
                    ProfileConfig::Linear {
                        w0_um: Some(w0),
                        delta_w_nm: Some(dw),
                        length_um: Some(len),
                    },
                ))
            }
            ProfileConfig::Cosine {
                w0_um,
                delta_w_nm,
                period_um,
            } => {
                let w0 = match w0_um {
                    Some(w) => *w,
                    None => model_w0()?,
                };
                let dw = delta_w_nm.unwrap_or(0.0);
                Ok((
                    TaperProfile::cosine(w0, dw, *period_um).map_err(map_err)?,
                    ProfileConfig::Cosine {
                        w0_um: Some(w0),
                        delta_w_nm: Some(dw),
                        period_um: *period_um,
                    },
                ))
            }
            ProfileConfig::Piecewise { path } => Ok((
                load_piecewise(Path::new(path))
                    .map_err(|e| Error::config("profile.path", e.to_string()))?,
                ProfileConfig::Piecewise { path: path.clone() },
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// execution

fn config_echo_line(echo: &RunConfig) -> String {
    serde_json::to_string(echo).expect("config serializes")
}

fn csv_header(out: &mut dyn Write, echo: &RunConfig) -> Result<()> {
    writeln!(out, "# taperconv {VERSION}")?;
    writeln!(out, "# config {}", config_echo_line(echo))?;
    Ok(())
}

fn json_doc(echo: &RunConfig, key: &str, payload: serde_json::Value) -> serde_json::Value {
    json!({
        "taperconv_version": VERSION,
        "config": serde_json::to_value(echo).expect("config serializes"),
        key: payload,
    })
}

fn write_json(out: &mut dyn Write, value: &serde_json::Value) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)
        .map_err(|e| Error::Domain(format!("json serialization failed: {e}")))?;
    writeln!(out)?;
    Ok(())
}

/// Runs one subcommand against a parsed config, writing CSV or JSON.
pub fn run(
    cmd: Subcommand,
    config: &RunConfig,
    out: &mut dyn Write,
    format: OutputFormat,
) -> Result<RunOutcome> {
    let resolved = config.resolve()?;
    match cmd {
        Subcommand::Propagate => run_propagate(&resolved, out, format)?,
        Subcommand::Spectrum => run_spectrum(&resolved, out, format)?,
        Subcommand::Sweep => run_sweep_cmd(&resolved, out, format)?,
        Subcommand::AreaLaw => run_area_law(&resolved, out, format)?,
        Subcommand::PhaseMatch => run_phase_match(&resolved, out, format)?,
        Subcommand::Validate => return run_validate(&resolved, out, format),
    }
    Ok(RunOutcome::Clean)
}

fn run_propagate(r: &Resolved, out: &mut dyn Write, format: OutputFormat) -> Result<()> {
    let m = propagate(
        &r.model,
        &r.profile,
        r.length_um,
        r.pump_power_w,
        r.lambda3_nm,
        &r.settings,
    )?;
    let entries = [
        ("eta", m.efficiency()),
        ("eta_raw", m.efficiency_raw()),
        ("m11_re", m.m11.re),
        ("m11_im", m.m11.im),
        ("m12_re", m.m12.re),
        ("m12_im", m.m12.im),
        ("m21_re", m.m21.re),
        ("m21_im", m.m21.im),
        ("m22_re", m.m22.re),
        ("m22_im", m.m22.im),
        ("unitarity_deviation", m.unitarity_deviation()),
    ];
    match format {
        OutputFormat::Csv => {
            csv_header(out, &r.echo)?;
            writeln!(out, "quantity,value")?;
            for (name, value) in entries {
                writeln!(out, "{name},{}", sig12(value))?;
            }
        }
        OutputFormat::Json => {
            let payload = serde_json::Value::Object(
                entries
                    .iter()
                    .map(|(k, v)| ((*k).to_string(), json!(round_sig12(*v))))
                    .collect(),
            );
            write_json(out, &json_doc(&r.echo, "result", payload))?;
        }
    }
    Ok(())
}

fn run_spectrum(r: &Resolved, out: &mut dyn Write, format: OutputFormat) -> Result<()> {
    let s = compute_spectrum(
        &r.model,
        &r.profile,
        r.length_um,
        r.pump_power_w,
        r.lambda_min_nm,
        r.lambda_max_nm,
        r.points,
        &r.settings,
    )?;
    match format {
        OutputFormat::Csv => {
            csv_header(out, &r.echo)?;
            writeln!(out, "lambda_nm,eta")?;
            for (lambda, eta) in s.lambdas_nm().iter().zip(s.etas()) {
                writeln!(out, "{},{}", sig12(*lambda), sig12(*eta))?;
            }
        }
        OutputFormat::Json => {
            let payload = json!({
                "lambda_nm": s.lambdas_nm().iter().map(|x| round_sig12(*x)).collect::<Vec<_>>(),
                "eta": s.etas().iter().map(|x| round_sig12(*x)).collect::<Vec<_>>(),
            });
            write_json(out, &json_doc(&r.echo, "spectrum", payload))?;
        }
    }
    Ok(())
}

fn sweep_records(r: &Resolved) -> Result<Vec<SweepRecord>> {
    let sweep = r.sweep.as_ref().ok_or_else(|| {
        Error::config("sweep", "the sweep subcommand needs a sweep section")
    })?;
    let observable = sweep.observable.unwrap_or(SweepObservable::EtaAtCenter);
    let profile_w0 = match &r.profile {
        TaperProfile::Uniform { w0_um }
        | TaperProfile::Linear { w0_um, .. }
        | TaperProfile::Cosine { w0_um, .. } => *w0_um,
        TaperProfile::Piecewise { .. } => {
            return Err(Error::config(
                "sweep.parameter",
                "sweeps need a uniform, linear, or cosine profile",
            ))
        }
    };
    match (sweep.parameter, observable) {
        (SweepParameter::Length, SweepObservable::EtaAtCenter) => {
            let template = ProfileTemplate::from_profile(&r.profile)
                .map_err(|e| Error::config("sweep.parameter", e.to_string()))?;
            sweep_length(
                &r.model,
                &template,
                &sweep.values,
                r.pump_power_w,
                r.lambda3_nm,
                &r.settings,
            )
        }
        (SweepParameter::DeltaW, SweepObservable::EtaAtCenter) => sweep_delta_w(
            &r.model,
            profile_w0,
            r.length_um,
            r.pump_power_w,
            &sweep.values,
            r.lambda3_nm,
            &r.settings,
        ),
        (SweepParameter::DeltaW, SweepObservable::Area) => area_sweep_delta_w(
            &r.model,
            profile_w0,
            r.length_um,
            r.pump_power_w,
            &sweep.values,
            &r.settings,
        ),
        (SweepParameter::DeltaW, SweepObservable::Fwhm) => sweep_bandwidth(
            &r.model,
            profile_w0,
            r.length_um,
            r.pump_power_w,
            &sweep.values,
            &r.settings,
        ),
        (SweepParameter::PumpPower, SweepObservable::EtaAtCenter) => sweep_pump(
            &r.model,
            &r.profile,
            r.length_um,
            &sweep.values,
            r.lambda3_nm,
            &r.settings,
        ),
        (SweepParameter::PumpPower, SweepObservable::Area) => area_sweep_pump(
            &r.model,
            &r.profile,
            r.length_um,
            &sweep.values,
            &r.settings,
        ),
        (SweepParameter::Period, SweepObservable::Area) => {
            let delta_w = match &r.profile {
                TaperProfile::Cosine { delta_w_nm, .. } => *delta_w_nm,
                _ => {
                    return Err(Error::config(
                        "sweep.parameter",
                        "period sweeps need a cosine profile",
                    ))
                }
            };
            sweep_period(
                &r.model,
                profile_w0,
                r.length_um,
                r.pump_power_w,
                delta_w,
                &sweep.values,
                &r.settings,
            )
        }
        (parameter, observable) => Err(Error::config(
            "sweep.observable",
            format!("observable {observable:?} is not available for {parameter:?} sweeps"),
        )),
    }
}

/// Snapshot columns shared by every sweep row.
const SWEEP_COLUMNS: &str = "parameter,value,observable,observable_value,dispersion_type,w0_um,\
kappa_w,dbeta_dlambda,g_ref,p_ref_w,g_slope_per_nm,lambda1_nm,lambda2_nm,lambda3_center_nm,\
profile_type,profile_delta_w_nm,profile_period_um,length_um,pump_power_w,lambda3_nm,steps,\
loss_alpha1_per_m,loss_alpha3_per_m,warnings";

fn sweep_row(record: &SweepRecord) -> String {
    let f = &record.fixed;
    let design = f.model.design();
    let (dispersion_type, w0, kappa, dbdl) = match &f.model {
        DispersionModel::Synthetic(m) => {
            ("synthetic", m.w0_um, m.kappa_w, m.dbeta_dlambda)
        }
        DispersionModel::Tabulated(_) => {
            let w0 = f.model.w0_um().unwrap_or(f64::NAN);
            let kappa = f
                .model
                .ddelta_beta_dw(w0, design.lambda3_center_nm)
                .map(|v| -v * 1e-3)
                .unwrap_or(f64::NAN);
            let dbdl = f.model.dbeta_dlambda(w0).unwrap_or(f64::NAN);
            ("tabulated", w0, kappa, dbdl)
        }
    };
    let coupling = f.model.coupling();
    let (profile_type, delta_w, period): (&str, Option<f64>, Option<f64>) = match f.profile {
        ProfileTemplate::Uniform { .. } => ("uniform", None, None),
        ProfileTemplate::Linear { delta_w_nm, .. } => ("linear", Some(delta_w_nm), None),
        ProfileTemplate::Cosine {
            delta_w_nm,
            period_um,
            ..
        } => ("cosine", Some(delta_w_nm), Some(period_um)),
    };
    let opt = |v: Option<f64>| v.map(sig12).unwrap_or_default();
    let steps = match f.settings.steps {
        StepPolicy::Fixed(n) => n.to_string(),
        StepPolicy::Auto(_) => "auto".to_string(),
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        record.parameter,
        sig12(record.value),
        record.observable.as_str(),
        sig12(record.observable_value),
        dispersion_type,
        sig12(w0),
        sig12(kappa),
        sig12(dbdl),
        sig12(coupling.g_ref),
        sig12(coupling.p_ref_w),
        sig12(coupling.g_slope_per_nm),
        sig12(design.lambda1_nm),
        sig12(design.lambda2_nm),
        sig12(design.lambda3_center_nm),
        profile_type,
        opt(delta_w),
        opt(period),
        opt(f.length_um),
        opt(f.pump_power_w),
        sig12(f.lambda3_nm),
        steps,
        sig12(f.settings.loss_alpha1_per_m),
        sig12(f.settings.loss_alpha3_per_m),
        record.warnings.join("; ").replace(',', ";"),
    )
}

fn run_sweep_cmd(r: &Resolved, out: &mut dyn Write, format: OutputFormat) -> Result<()> {
    let records = sweep_records(r)?;
    match format {
        OutputFormat::Csv => {
            csv_header(out, &r.echo)?;
            writeln!(out, "{SWEEP_COLUMNS}")?;
            for record in &records {
                writeln!(out, "{}", sweep_row(record))?;
            }
        }
        OutputFormat::Json => {
            // JSON lines: one meta object, then one record per line
            writeln!(
                out,
                "{}",
                json!({"taperconv_version": VERSION, "config": &r.echo})
            )?;
            for record in &records {
                let mut value = serde_json::to_value(record)
                    .map_err(|e| Error::Domain(format!("record serialization failed: {e}")))?;
                if let Some(v) = value.get_mut("observable_value") {
                    *v = json!(round_sig12(record.observable_value));
                }
                writeln!(out, "{value}")?;
            }
        }
    }
    Ok(())
}

fn run_area_law(r: &Resolved, out: &mut dyn Write, format: OutputFormat) -> Result<()> {
    let delta_ws: Vec<f64> = match r.sweep.as_ref() {
        Some(s) if s.parameter == SweepParameter::DeltaW => s.values.clone(),
        _ => vec![0.0, 2.0, 4.0, 8.0],
    };
    let w0 = r.model.w0_um().ok_or_else(|| {
        Error::Solve("area-law table needs a phase-matched width; none exists".into())
    })?;
    let records = area_sweep_delta_w(
        &r.model,
        w0,
        r.length_um,
        r.pump_power_w,
        &delta_ws,
        &r.settings,
    )?;
    let g = r.model.coupling_g(w0, r.pump_power_w)?;
    let dbdl = r.model.dbeta_dlambda(w0)?;
    let kappa = -r.model.ddelta_beta_dw(w0, r.model.design().lambda3_center_nm)? * 1e-3;
    let analytic_area = analytic::area_uniform(g, r.length_um, dbdl)?;

    struct Row {
        delta_w_nm: f64,
        area_nm: f64,
        ratio: f64,
        lz_exponent: Option<f64>,
        pump_threshold_w: Option<f64>,
        length_threshold_um: Option<f64>,
        warnings: String,
    }
    let rows: Vec<Row> = records
        .iter()
        .map(|record| {
            let dw = record.value;
            let lz_exponent = (dw > 0.0)
                .then(|| analytic::landau_zener_exponent(g, kappa * dw / r.length_um));
            let thresholds = (dw > 0.0)
                .then(|| adiabatic_thresholds(&r.model, dw, r.length_um, r.pump_power_w))
                .transpose()?;
            Ok(Row {
                delta_w_nm: dw,
                area_nm: record.observable_value,
                ratio: record.observable_value / analytic_area.area_nm,
                lz_exponent,
                pump_threshold_w: thresholds.map(|t| t.pump_threshold_w),
                length_threshold_um: thresholds.map(|t| t.length_threshold_um),
                warnings: record.warnings.join("; ").replace(',', ";"),
            })
        })
        .collect::<Result<_>>()?;

    match format {
        OutputFormat::Csv => {
            csv_header(out, &r.echo)?;
            writeln!(
                out,
                "# analytic_area_nm {} weak_coupling_valid {}",
                sig12(analytic_area.area_nm),
                analytic_area.weak_coupling_valid
            )?;
            writeln!(
                out,
                "delta_w_nm,area_nm,area_analytic_nm,ratio,lz_exponent,adiabatic_pump_threshold_w,\
                 adiabatic_length_threshold_um,warnings"
            )?;
            let opt = |v: Option<f64>| v.map(sig12).unwrap_or_default();
            for row in &rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    sig12(row.delta_w_nm),
                    sig12(row.area_nm),
                    sig12(analytic_area.area_nm),
                    sig12(row.ratio),
                    opt(row.lz_exponent),
                    opt(row.pump_threshold_w),
                    opt(row.length_threshold_um),
                    row.warnings,
                )?;
            }
        }
        OutputFormat::Json => {
            let payload = json!({
                "area_analytic_nm": round_sig12(analytic_area.area_nm),
                "weak_coupling_valid": analytic_area.weak_coupling_valid,
                "rows": rows.iter().map(|row| json!({
                    "delta_w_nm": round_sig12(row.delta_w_nm),
                    "area_nm": round_sig12(row.area_nm),
                    "ratio": round_sig12(row.ratio),
                    "lz_exponent": row.lz_exponent.map(round_sig12),
                    "adiabatic_pump_threshold_w": row.pump_threshold_w.map(round_sig12),
                    "adiabatic_length_threshold_um": row.length_threshold_um.map(round_sig12),
                    "warnings": row.warnings,
                })).collect::<Vec<_>>(),
            });
            write_json(out, &json_doc(&r.echo, "area_law", payload))?;
        }
    }
    Ok(())
}

fn run_phase_match(r: &Resolved, out: &mut dyn Write, format: OutputFormat) -> Result<()> {
    let w = r.model.phase_matched_width(r.lambda3_nm)?;
    let residual = r.model.delta_beta(w, r.lambda3_nm)?;
    match format {
        OutputFormat::Csv => {
            csv_header(out, &r.echo)?;
            writeln!(out, "quantity,value")?;
            writeln!(out, "lambda3_nm,{}", sig12(r.lambda3_nm))?;
            writeln!(out, "w_um,{}", sig12(w))?;
            writeln!(out, "residual_rad_per_um,{}", sig12(residual))?;
        }
        OutputFormat::Json => {
            let payload = json!({
                "lambda3_nm": round_sig12(r.lambda3_nm),
                "w_um": round_sig12(w),
                "residual_rad_per_um": residual,
            });
            write_json(out, &json_doc(&r.echo, "phase_match", payload))?;
        }
    }
    Ok(())
}

fn run_validate(r: &Resolved, out: &mut dyn Write, format: OutputFormat) -> Result<RunOutcome> {
    let checks = selfcheck::run_all();
    let all_passed = checks.iter().all(|c| c.passed);
    match format {
        OutputFormat::Csv => {
            csv_header(out, &r.echo)?;
            writeln!(out, "check,passed,detail")?;
            for c in &checks {
                writeln!(
                    out,
                    "{},{},{}",
                    c.name,
                    if c.passed { "pass" } else { "FAIL" },
                    c.detail.replace(',', ";"),
                )?;
            }
        }
        OutputFormat::Json => {
            let payload = json!(checks
                .iter()
                .map(|c| json!({"check": c.name, "passed": c.passed, "detail": c.detail}))
                .collect::<Vec<_>>());
            write_json(out, &json_doc(&r.echo, "checks", payload))?;
        }
    }
    Ok(if all_passed {
        RunOutcome::Clean
    } else {
        RunOutcome::ValidationFailed
    })
}
