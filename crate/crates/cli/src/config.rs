//! Config files and the resolved run configuration.
//!
//! A config file is INI-style `key = value` text. Keys are long flag names
//! (`omega-drive = 10`, underscores allowed). Keys outside any section apply
//! to every subcommand that accepts them; a `[landscape]`-style section
//! applies to one subcommand only. Flags given on the command line win.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::Command;
use freqcorr::montecarlo::CoincidenceWindow;
use freqcorr::scan::{Line, Quantity};
use freqcorr::sensors::{DriveConfig, MomentOptions};
use serde::Serialize;

use crate::CliError;

/// Flat `key → value` pairs read from a config file, per section.
#[derive(Debug, Default)]
pub struct ConfigFile {
    pub path: PathBuf,
    general: BTreeMap<String, String>,
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

fn normalize(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('_', "-").to_ascii_lowercase()
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let ini = ini::Ini::load_from_file(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut out = ConfigFile { path: path.to_path_buf(), ..Default::default() };
        for (section, props) in ini.iter() {
            let map: BTreeMap<String, String> = props.iter().map(|(k, v)| (normalize(k), v.trim().to_string())).collect();
            match section {
                None => out.general.extend(map),
                Some(name) => out.sections.entry(name.trim().to_ascii_lowercase()).or_default().extend(map),
            }
        }
        Ok(out)
    }

    /// Flags for subcommand `name`, to be placed before the user's flags.
    pub fn args_for(&self, root: &Command, name: &str) -> Result<Vec<OsString>, CliError> {
        let sub = root
            .find_subcommand(name)
            .ok_or_else(|| CliError::Config(format!("unknown subcommand {name:?}")))?;
        let accepts = |cmd: &Command, key: &str| cmd.get_arguments().any(|a| a.get_long() == Some(key));

        for section in self.sections.keys() {
            if root.find_subcommand(section).is_none() {
                return Err(CliError::Config(format!(
                    "{}: section [{section}] does not name a subcommand",
                    self.path.display()
                )));
            }
        }
        let mut pairs: BTreeMap<&str, &str> = BTreeMap::new();
        for (k, v) in &self.general {
            if k == "config" {
                return Err(CliError::Config(format!("{}: config files cannot include others", self.path.display())));
            }
            if accepts(sub, k) {
                pairs.insert(k, v);
            } else if !root.get_subcommands().any(|c| accepts(c, k)) {
                return Err(CliError::Config(format!("{}: unknown key {k:?}", self.path.display())));
            }
        }
        if let Some(own) = self.sections.get(name) {
            for (k, v) in own {
                if !accepts(sub, k) {
                    return Err(CliError::Config(format!("{}: [{name}] has no key {k:?}", self.path.display())));
                }
                pairs.insert(k, v);
            }
        }
        Ok(pairs.into_iter().map(|(k, v)| OsString::from(format!("--{k}={v}"))).collect())
    }
}

/// Inserts `extra` right after the subcommand token of `argv`.
pub fn splice_args(argv: &[OsString], subcommand: &str, extra: Vec<OsString>) -> Vec<OsString> {
    let at = argv.iter().skip(1).position(|a| a == subcommand).map_or(argv.len(), |p| p + 2);
    let mut out = argv[..at].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[at..]);
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SensorSettings {
    /// Filter linewidth Γ; absent for Γ scans.
    pub gamma: Option<f64>,
    /// Resolved sensor coupling; per-Γ default for Γ scans.
    pub epsilon: Option<f64>,
    pub epsilon_defaulted: bool,
    pub n_max: usize,
    pub moments: MomentOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanSpec {
    pub quantity: Option<Quantity>,
    pub omega1: Option<f64>,
    pub omega2: Option<f64>,
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub points: Option<usize>,
    pub line: Option<Line>,
    pub omegas: Option<Vec<f64>>,
    pub gammas: Option<Vec<f64>>,
    pub use_symmetry: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct McSpec {
    pub model: String,
    pub duration: f64,
    pub dt: f64,
    pub trajectories: usize,
    pub burn_in: f64,
    pub refinements: u32,
    pub bin_width: f64,
    pub window: CoincidenceWindow,
    pub correlate: Option<(String, String)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: String,
    pub plot: Option<PathBuf>,
}

/// Everything a run depends on, with defaults filled in. Echoed verbatim
/// into JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub config_file: Option<PathBuf>,
    pub drive: Option<DriveConfig>,
    pub sensor: Option<SensorSettings>,
    pub scan: Option<ScanSpec>,
    pub mc: Option<McSpec>,
    pub output: OutputSpec,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}
