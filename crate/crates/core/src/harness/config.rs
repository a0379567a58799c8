//! Experiment configuration: a sectioned `key = value` TOML document.
//!
//! Every section rejects unknown keys, and [`ExperimentConfig::parse`] runs
//! all validity checks of the numerical modules before any simulation
//! starts. Optional keys are filled in during validation, so the serialized
//! form of a parsed config is explicit and canonical.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decay::EnvelopeParams;
use crate::ensemble::{one_dim_scan, ModeWeight};
use crate::error::{Error, Result};
use crate::spectral::{ModalField, PhaseState, SpectralBasis};
use crate::wave::{Kernel, Nonlinearity, WaveParams};

fn config_error(key: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config { key: key.into(), reason: reason.into() }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportConfig>,
    /// Entries of the kernel matrix file, loaded during validation.
    #[serde(skip)]
    kernel_matrix: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    Zero,
    Cubic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Zero,
    RankOne,
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    Zero,
    SingleMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// `a_j = b_j = amplitude / j` for `j ≤ initial_modes`, zero above.
    LowModes,
    /// One random state from the phase-space ball of radius `amplitude`,
    /// modes weighted `1/j`.
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    Abstract,
    Wave,
    WavePeriodic,
}

/// The truncated wave system and its time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default = "defaults::modes")]
    pub modes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default = "defaults::one")]
    pub damping: f64,
    #[serde(default = "defaults::one")]
    pub exponent: f64,
    #[serde(default = "defaults::nonlinearity")]
    pub nonlinearity: NonlinearityKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cubic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<f64>,
    #[serde(default = "defaults::kernel")]
    pub kernel: KernelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_mode: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_file: Option<PathBuf>,
    #[serde(default = "defaults::forcing")]
    pub forcing: ForcingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing_mode: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forcing_amplitude: Option<f64>,
    #[serde(default = "defaults::initial")]
    pub initial: InitialKind,
    #[serde(default = "defaults::one")]
    pub initial_amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_modes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_seed: Option<u64>,
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    #[serde(default = "defaults::t_end")]
    pub t_end: f64,
    #[serde(default = "defaults::sample_dt")]
    pub sample_dt: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        toml::from_str("").expect("all system keys have defaults")
    }
}

/// Random initial data drawn from a phase-space ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub seed: u64,
    #[serde(default = "defaults::count")]
    pub count: usize,
    #[serde(default = "defaults::one")]
    pub radius: f64,
    #[serde(default = "defaults::weight")]
    pub weight: ModeWeight,
}

/// Regression windows and proxy parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Power in the affine law for `proxy^{−p}`; defaults to `system.exponent`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default = "defaults::t_min")]
    pub t_min: f64,
    #[serde(default = "defaults::t_max")]
    pub t_max: f64,
    #[serde(default = "defaults::cutoffs")]
    pub cutoffs: Vec<usize>,
    #[serde(default = "defaults::ks")]
    pub ks: Vec<usize>,
}

/// Envelope variant, its constants and the table range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsConfig {
    pub variant: EnvelopeKind,
    pub alpha_b0: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default)]
    pub t_star: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// Defaults to `system.exponent`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Defaults to `system.damping`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    /// Defaults to the one-dimensional monotonicity constant at `r = p + 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_p: Option<f64>,
    /// Last tabulated time; the first is the envelope onset.
    pub t_end: f64,
    #[serde(default = "defaults::points")]
    pub points: usize,
}

/// Sample sizes of the checks run by the `report` and `cp` subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default = "defaults::balance_t_end")]
    pub balance_t_end: f64,
    #[serde(default = "defaults::balance_dts")]
    pub balance_dts: Vec<f64>,
    #[serde(default = "defaults::conservation_t_end")]
    pub conservation_t_end: f64,
    #[serde(default = "defaults::recurrence_draws")]
    pub recurrence_draws: usize,
    #[serde(default = "defaults::tabulated_cases")]
    pub tabulated_cases: usize,
    #[serde(default = "defaults::cp_dims")]
    pub cp_dims: usize,
    #[serde(default = "defaults::cp_samples")]
    pub cp_samples: usize,
    #[serde(default = "defaults::exponents")]
    pub exponents: Vec<f64>,
    #[serde(default = "defaults::pairs")]
    pub pairs: usize,
    #[serde(default = "defaults::pair_t_end")]
    pub pair_t_end: f64,
    #[serde(default = "defaults::covering_trials")]
    pub covering_trials: usize,
    #[serde(default = "defaults::envelope_sets")]
    pub envelope_sets: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        toml::from_str("").expect("all report keys have defaults")
    }
}

mod defaults {
    use crate::ensemble::ModeWeight;

    use super::{ForcingKind, InitialKind, KernelKind, NonlinearityKind};

    pub fn modes() -> usize {
        32
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn nonlinearity() -> NonlinearityKind {
        NonlinearityKind::Zero
    }
    pub fn kernel() -> KernelKind {
        KernelKind::Zero
    }
    pub fn forcing() -> ForcingKind {
        ForcingKind::Zero
    }
    pub fn initial() -> InitialKind {
        InitialKind::LowModes
    }
    pub fn dt() -> f64 {
        1e-3
    }
    pub fn t_end() -> f64 {
        10.0
    }
    pub fn sample_dt() -> f64 {
        0.1
    }
    pub fn count() -> usize {
        64
    }
    pub fn weight() -> ModeWeight {
        ModeWeight::Inverse
    }
    pub fn t_min() -> f64 {
        1e2
    }
    pub fn t_max() -> f64 {
        1e4
    }
    pub fn cutoffs() -> Vec<usize> {
        vec![8, 16]
    }
    pub fn ks() -> Vec<usize> {
        vec![2, 4]
    }
    pub fn points() -> usize {
        200
    }
    pub fn balance_t_end() -> f64 {
        10.0
    }
    pub fn balance_dts() -> Vec<f64> {
        vec![1e-2, 5e-3, 2.5e-3]
    }
    pub fn conservation_t_end() -> f64 {
        100.0
    }
    pub fn recurrence_draws() -> usize {
        1000
    }
    pub fn tabulated_cases() -> usize {
        100
    }
    pub fn cp_dims() -> usize {
        16
    }
    pub fn cp_samples() -> usize {
        1_000_000
    }
    pub fn exponents() -> Vec<f64> {
        vec![0.5, 1.0, 2.0]
    }
    pub fn pairs() -> usize {
        50
    }
    pub fn pair_t_end() -> f64 {
        20.0
    }
    pub fn covering_trials() -> usize {
        200
    }
    pub fn envelope_sets() -> usize {
        20
    }
}

/// Default number of low modes carrying initial data.
pub const DEFAULT_INITIAL_MODES: usize = 3;

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(key, format!("must be positive and finite, got {v}")))
    }
}

fn nonnegative(key: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config_error(key, format!("must be nonnegative and finite, got {v}")))
    }
}

fn mode_in_range(key: &str, j: usize, modes: usize) -> Result<()> {
    if (1..=modes).contains(&j) {
        Ok(())
    } else {
        Err(config_error(key, format!("mode {j} outside 1..={modes}")))
    }
}

fn forbid<T>(key: &str, value: &Option<T>, context: &str) -> Result<()> {
    match value {
        Some(_) => Err(config_error(key, format!("only allowed when {context}"))),
        None => Ok(()),
    }
}

fn require<T: Copy>(key: &str, value: Option<T>, context: &str) -> Result<T> {
    value.ok_or_else(|| config_error(key, format!("required when {context}")))
}

/// Multiple of `dt` within the tolerance used by the time stepper.
fn is_step_multiple(interval: f64, dt: f64) -> bool {
    let ratio = interval / dt;
    ratio >= 1.0 - 1e-6 && (ratio - ratio.round()).abs() <= 1e-6 * ratio.max(1.0)
}

/// Reads a kernel matrix file: a header line with `N`, then `N` rows of `N`
/// comma-separated reals.
pub fn read_kernel_matrix(path: &Path) -> Result<(usize, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    parse_kernel_matrix(&text)
        .map_err(|reason| config_error("system.kernel_file", format!("{}: {reason}", path.display())))
}

/// Parses the kernel matrix file format; the error names the offending line.
pub fn parse_kernel_matrix(text: &str) -> std::result::Result<(usize, Vec<f64>), String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or("empty file")?;
    let n: usize =
        header.trim().parse().map_err(|_| format!("line 1: header `{}` is not a mode count", header.trim()))?;
    if n == 0 {
        return Err("line 1: mode count must be positive".into());
    }
    let mut matrix = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (idx, line) in lines {
        rows += 1;
        if rows > n {
            return Err(format!("line {}: more than {n} rows", idx + 1));
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", idx + 1))?;
        if row.len() != n {
            return Err(format!("line {}: expected {n} entries, got {}", idx + 1, row.len()));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(format!("line {}: non-finite entry", idx + 1));
        }
        matrix.extend(row);
    }
    if rows != n {
        return Err(format!("expected {n} rows, got {rows}"));
    }
    Ok((n, matrix))
}

impl ExperimentConfig {
    /// Reads and validates a config file; relative kernel files resolve
    /// against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses and validates config text.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| config_error("<document>", e.message().to_string()))?;
        let mut config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let mut key = e.path().to_string();
            let message = e.inner().message().to_string();
            // serde names the enclosing table for a missing field; point at the field itself
            if let Some(field) = message.strip_prefix("missing field `").and_then(|m| m.strip_suffix('`')) {
                key = if key == "." { field.to_string() } else { format!("{key}.{field}") };
            }
            let key = if key == "." { "<document>".to_string() } else { key };
            config_error(key, message)
        })?;
        config.validate(base_dir)?;
        Ok(config)
    }

    /// Canonical serialized form (validated, defaults made explicit).
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 over the canonical text and the kernel matrix entries.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        if let Some(m) = &self.kernel_matrix {
            for x in m {
                hasher.update(x.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    fn validate(&mut self, base_dir: &Path) -> Result<()> {
        self.validate_system(base_dir)?;
        let sys = &self.system;
        if let Some(e) = &self.ensemble {
            if e.count == 0 {
                return Err(config_error("ensemble.count", "must be at least 1"));
            }
            positive("ensemble.radius", e.radius)?;
        }
        if let Some(f) = &mut self.fit {
            let p = *f.p.get_or_insert(sys.exponent);
            positive("fit.p", p)?;
            positive("fit.t_min", f.t_min)?;
            if !(f.t_max > f.t_min) || !f.t_max.is_finite() {
                return Err(config_error("fit.t_max", "must be finite and exceed fit.t_min"));
            }
            if f.ks.is_empty() && f.cutoffs.is_empty() {
                return Err(config_error("fit.ks", "need at least one k or one cutoff"));
            }
            if let Some(&k) = f.ks.iter().find(|&&k| k == 0) {
                return Err(config_error("fit.ks", format!("k = {k} needs at least one center")));
            }
            if let Some(&c) = f.cutoffs.iter().find(|&&c| c > sys.modes) {
                return Err(config_error("fit.cutoffs", format!("cutoff {c} outside 0..={}", sys.modes)));
            }
        }
        if let Some(b) = &mut self.bounds {
            validate_bounds(b, sys)?;
        }
        if let Some(r) = &self.report {
            validate_report(r, sys)?;
        }
        Ok(())
    }

    fn validate_system(&mut self, base_dir: &Path) -> Result<()> {
        let s = &mut self.system;
        if s.modes == 0 {
            return Err(config_error("system.modes", "must be at least 1"));
        }
        let grid = *s.grid.get_or_insert(2 * s.modes);
        if grid < 2 * s.modes {
            return Err(config_error("system.grid", format!("must be at least 2 * modes = {}", 2 * s.modes)));
        }
        nonnegative("system.damping", s.damping)?;
        positive("system.exponent", s.exponent)?;

        match s.nonlinearity {
            NonlinearityKind::Zero => {
                forbid("system.cubic", &s.cubic, "nonlinearity = \"cubic\"")?;
                forbid("system.linear", &s.linear, "nonlinearity = \"cubic\"")?;
            }
            NonlinearityKind::Cubic => {
                let cubic = require("system.cubic", s.cubic, "nonlinearity = \"cubic\"")?;
                let linear = *s.linear.get_or_insert(0.0);
                Nonlinearity::Cubic { cubic, linear }
                    .validate()
                    .map_err(|e| config_error("system.cubic", e.to_string()))?;
            }
        }

        self.kernel_matrix = None;
        match s.kernel {
            KernelKind::Zero => {
                forbid("system.kernel_kappa", &s.kernel_kappa, "kernel = \"rank_one\"")?;
                forbid("system.kernel_mode", &s.kernel_mode, "kernel = \"rank_one\"")?;
                forbid("system.kernel_file", &s.kernel_file, "kernel = \"matrix\"")?;
            }
            KernelKind::RankOne => {
                forbid("system.kernel_file", &s.kernel_file, "kernel = \"matrix\"")?;
                let kappa = require("system.kernel_kappa", s.kernel_kappa, "kernel = \"rank_one\"")?;
                if !kappa.is_finite() {
                    return Err(config_error("system.kernel_kappa", "must be finite"));
                }
                let mode = *s.kernel_mode.get_or_insert(1);
                mode_in_range("system.kernel_mode", mode, s.modes)?;
            }
            KernelKind::Matrix => {
                forbid("system.kernel_kappa", &s.kernel_kappa, "kernel = \"rank_one\"")?;
                forbid("system.kernel_mode", &s.kernel_mode, "kernel = \"rank_one\"")?;
                let file = s
                    .kernel_file
                    .as_ref()
                    .ok_or_else(|| config_error("system.kernel_file", "required when kernel = \"matrix\""))?;
                let (n, matrix) = read_kernel_matrix(&base_dir.join(file))?;
                if n != s.modes {
                    return Err(config_error(
                        "system.kernel_file",
                        format!("matrix has {n} modes, system has {}", s.modes),
                    ));
                }
                self.kernel_matrix = Some(matrix);
            }
        }

        match s.forcing {
            ForcingKind::Zero => {
                forbid("system.forcing_mode", &s.forcing_mode, "forcing = \"single_mode\"")?;
                forbid("system.forcing_amplitude", &s.forcing_amplitude, "forcing = \"single_mode\"")?;
            }
            ForcingKind::SingleMode => {
                let mode = require("system.forcing_mode", s.forcing_mode, "forcing = \"single_mode\"")?;
                mode_in_range("system.forcing_mode", mode, s.modes)?;
                let amp = require("system.forcing_amplitude", s.forcing_amplitude, "forcing = \"single_mode\"")?;
                if !amp.is_finite() {
                    return Err(config_error("system.forcing_amplitude", "must be finite"));
                }
            }
        }

        if !s.initial_amplitude.is_finite() {
            return Err(config_error("system.initial_amplitude", "must be finite"));
        }
        match s.initial {
            InitialKind::LowModes => {
                forbid("system.initial_seed", &s.initial_seed, "initial = \"ball\"")?;
                let m = *s.initial_modes.get_or_insert(DEFAULT_INITIAL_MODES.min(s.modes));
                mode_in_range("system.initial_modes", m, s.modes)?;
            }
            InitialKind::Ball => {
                forbid("system.initial_modes", &s.initial_modes, "initial = \"low_modes\"")?;
                require("system.initial_seed", s.initial_seed, "initial = \"ball\"")?;
                positive("system.initial_amplitude", s.initial_amplitude)?;
            }
        }

        positive("system.dt", s.dt)?;
        let max_dt = 0.5 / s.modes as f64;
        if s.dt > max_dt {
            return Err(config_error("system.dt", format!("exceeds the stable bound 0.5 / modes = {max_dt}")));
        }
        positive("system.t_end", s.t_end)?;
        positive("system.sample_dt", s.sample_dt)?;
        if !is_step_multiple(s.sample_dt, s.dt) {
            return Err(config_error(
                "system.sample_dt",
                format!("must be an integer multiple of system.dt = {}", s.dt),
            ));
        }
        if s.sample_dt > s.t_end {
            return Err(config_error("system.sample_dt", "exceeds system.t_end"));
        }
        self.wave_params().map_err(|e| config_error("system", e.to_string()))?;
        Ok(())
    }

    /// Ensemble section, or a config error naming it.
    pub fn require_ensemble(&self, subcommand: &str) -> Result<&EnsembleConfig> {
        self.ensemble.as_ref().ok_or_else(|| {
            config_error("ensemble", format!("section required by `{subcommand}` (it carries the seed)"))
        })
    }

    pub fn require_fit(&self, subcommand: &str) -> Result<&FitConfig> {
        self.fit.as_ref().ok_or_else(|| config_error("fit", format!("section required by `{subcommand}`")))
    }

    pub fn require_bounds(&self, subcommand: &str) -> Result<&BoundsConfig> {
        self.bounds.as_ref().ok_or_else(|| config_error("bounds", format!("section required by `{subcommand}`")))
    }

    /// Report sizes, with validated defaults when the section is absent.
    pub fn report_settings(&self) -> Result<ReportConfig> {
        let r = self.report.clone().unwrap_or_default();
        validate_report(&r, &self.system)?;
        Ok(r)
    }

    pub fn basis(&self) -> Result<SpectralBasis<f64>> {
        SpectralBasis::new(self.system.modes, self.system.grid.unwrap_or(2 * self.system.modes))
    }

    /// Wave parameters exactly as configured.
    pub fn wave_params(&self) -> Result<WaveParams<f64>> {
        let s = &self.system;
        let basis = self.basis()?;
        let n = s.modes;
        let nonlinearity = match s.nonlinearity {
            NonlinearityKind::Zero => Nonlinearity::Zero,
            NonlinearityKind::Cubic => {
                Nonlinearity::Cubic { cubic: s.cubic.unwrap_or(0.0), linear: s.linear.unwrap_or(0.0) }
            }
        };
        let kernel = match s.kernel {
            KernelKind::Zero => Kernel::zero(n),
            KernelKind::RankOne => Kernel::rank_one(n, s.kernel_mode.unwrap_or(1), s.kernel_kappa.unwrap_or(0.0))?,
            KernelKind::Matrix => match &self.kernel_matrix {
                Some(m) => Kernel::from_matrix(n, m.clone())?,
                None => return Err(config_error("system.kernel_file", "matrix not loaded")),
            },
        };
        let forcing = match s.forcing {
            ForcingKind::Zero => ModalField::zeros(n),
            ForcingKind::SingleMode => {
                ModalField::single_mode(n, s.forcing_mode.unwrap_or(1), s.forcing_amplitude.unwrap_or(0.0))
            }
        };
        WaveParams::builder(basis)
            .damping(s.damping)
            .exponent(s.exponent)
            .nonlinearity(nonlinearity)
            .kernel(kernel)
            .forcing(forcing)
            .dt(s.dt)
            .build()
    }

    /// Configured damping law with `f = 0`, `K = 0`, `h = 0`.
    pub fn pure_damping_params(&self, exponent: f64) -> Result<WaveParams<f64>> {
        WaveParams::builder(self.basis()?).damping(self.system.damping).exponent(exponent).dt(self.system.dt).build()
    }

    /// Configured system with damping and kernel removed, so the full
    /// energy is conserved.
    pub fn conservative_params(&self) -> Result<WaveParams<f64>> {
        let p = self.wave_params()?;
        WaveParams::builder(self.basis()?)
            .damping(0.0)
            .exponent(self.system.exponent)
            .nonlinearity(*p.nonlinearity())
            .forcing(p.forcing().clone())
            .dt(self.system.dt)
            .build()
    }

    /// Initial state described by the system section.
    pub fn initial_state(&self) -> Result<PhaseState<f64>> {
        let s = &self.system;
        let n = s.modes;
        match s.initial {
            InitialKind::LowModes => {
                let m = s.initial_modes.unwrap_or(DEFAULT_INITIAL_MODES.min(n));
                let coeffs: Vec<f64> =
                    (1..=n).map(|j| if j <= m { s.initial_amplitude / j as f64 } else { 0.0 }).collect();
                PhaseState::new(ModalField::new(coeffs.clone())?, ModalField::new(coeffs)?)
            }
            InitialKind::Ball => {
                let seed = s.initial_seed.unwrap_or(0);
                Ok(crate::ensemble::random_ball_state(
                    n,
                    s.initial_amplitude,
                    ModeWeight::Inverse,
                    &mut crate::ensemble::member_rng(seed, 0),
                ))
            }
        }
    }

    /// Envelope constants of the bounds section.
    pub fn envelope_params(&self) -> Result<EnvelopeParams<f64>> {
        let b = self.require_bounds("bounds")?;
        envelope_from(b)
    }
}

fn validate_report(r: &ReportConfig, sys: &SystemConfig) -> Result<()> {
    positive("report.balance_t_end", r.balance_t_end)?;
    if r.balance_dts.len() < 2 {
        return Err(config_error("report.balance_dts", "need at least two step sizes"));
    }
    let halved = r.balance_dts.last().map(|dt| dt / 2.0);
    for &dt in r.balance_dts.iter().chain(&halved) {
        positive("report.balance_dts", dt)?;
        let max = 0.5 / sys.modes as f64;
        if dt > max {
            return Err(config_error("report.balance_dts", format!("dt = {dt} exceeds the stable bound {max}")));
        }
        if !is_step_multiple(r.balance_t_end, dt) {
            return Err(config_error(
                "report.balance_dts",
                format!("report.balance_t_end must be an integer multiple of dt = {dt}"),
            ));
        }
    }
    if r.balance_dts.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(config_error("report.balance_dts", "must be strictly decreasing"));
    }
    positive("report.conservation_t_end", r.conservation_t_end)?;
    positive("report.pair_t_end", r.pair_t_end)?;
    if r.cp_dims == 0 {
        return Err(config_error("report.cp_dims", "must be at least 1"));
    }
    if r.cp_samples == 0 {
        return Err(config_error("report.cp_samples", "must be at least 1"));
    }
    if r.exponents.len() < 2 {
        return Err(config_error("report.exponents", "need at least two exponents to compare"));
    }
    for &p in &r.exponents {
        positive("report.exponents", p)?;
    }
    if r.exponents.windows(2).any(|w| w[1] <= w[0]) {
        return Err(config_error("report.exponents", "must be strictly increasing"));
    }
    if r.pairs == 0 {
        return Err(config_error("report.pairs", "must be at least 1"));
    }
    Ok(())
}

fn envelope_from(b: &BoundsConfig) -> Result<EnvelopeParams<f64>> {
    let get = |key: &str, v: Option<f64>| v.ok_or_else(|| config_error(format!("bounds.{key}"), "missing"));
    Ok(match b.variant {
        EnvelopeKind::Abstract => EnvelopeParams::Abstract {
            alpha_b0: b.alpha_b0,
            beta: get("beta", b.beta)?,
            c: get("c", b.c)?,
            period: get("period", b.period)?,
            t0: b.t0,
            t_star: b.t_star,
        },
        EnvelopeKind::Wave => EnvelopeParams::Wave {
            alpha_b0: b.alpha_b0,
            p: get("p", b.p)?,
            k: get("k", b.k)?,
            c_p: get("c_p", b.c_p)?,
            t0: b.t0,
            t_star: b.t_star,
        },
        EnvelopeKind::WavePeriodic => EnvelopeParams::WavePeriodic {
            alpha_b0: b.alpha_b0,
            p: get("p", b.p)?,
            k: get("k", b.k)?,
            c_p: get("c_p", b.c_p)?,
            period: get("period", b.period)?,
            t0: b.t0,
            t_star: b.t_star,
        },
    })
}

fn validate_bounds(b: &mut BoundsConfig, sys: &SystemConfig) -> Result<()> {
    let ctx_abstract = "variant = \"abstract\"";
    let ctx_wave = "variant = \"wave\" or \"wave_periodic\"";
    match b.variant {
        EnvelopeKind::Abstract => {
            forbid("bounds.p", &b.p, ctx_wave)?;
            forbid("bounds.k", &b.k, ctx_wave)?;
            forbid("bounds.c_p", &b.c_p, ctx_wave)?;
            require("bounds.beta", b.beta, ctx_abstract)?;
            require("bounds.c", b.c, ctx_abstract)?;
            require("bounds.period", b.period, ctx_abstract)?;
        }
        EnvelopeKind::Wave | EnvelopeKind::WavePeriodic => {
            forbid("bounds.beta", &b.beta, ctx_abstract)?;
            forbid("bounds.c", &b.c, ctx_abstract)?;
            let p = *b.p.get_or_insert(sys.exponent);
            b.k.get_or_insert(sys.damping);
            b.c_p.get_or_insert_with(|| one_dim_scan(p + 2.0));
            if b.variant == EnvelopeKind::Wave {
                forbid("bounds.period", &b.period, "variant = \"abstract\" or \"wave_periodic\"")?;
            } else {
                require("bounds.period", b.period, "variant = \"wave_periodic\"")?;
            }
        }
    }
    let params = envelope_from(b)?;
    params.validate().map_err(|e| match e {
        Error::InvalidParameter { name, reason } => config_error(format!("bounds.{}", bounds_key(name)), reason),
        other => config_error("bounds", other.to_string()),
    })?;
    let onset = params.onset();
    if !(b.t_end > onset) || !b.t_end.is_finite() {
        return Err(config_error("bounds.t_end", format!("must be finite and exceed the envelope onset {onset}")));
    }
    if b.points < 2 {
        return Err(config_error("bounds.points", "need at least two points"));
    }
    Ok(())
}

/// Maps the parameter names used by the envelope validator to config keys.
fn bounds_key(name: &str) -> &str {
    match name {
        "C" => "c",
        "T" => "period",
        "C_p" => "c_p",
        other => other,
    }
}
