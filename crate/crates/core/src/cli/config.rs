//! TOML run configuration: one optional section per subcommand plus a shared
//! `[model]` section.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::algebra::OperatorSum;
use crate::downfold::SweepMode;
use crate::dynamics::TermOrdering;
use crate::error::{Error, Result};
use crate::models::{hubbard_chain, load_fcidump, synthetic_integrals, HubbardSpec};
use crate::rotations::RotationKind;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelConfig>,
    pub transform: Option<TransformSection>,
    pub downfold: Option<DownfoldSection>,
    pub dynamics: Option<DynamicsSection>,
    pub inspect: Option<InspectSection>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    /// Open Hubbard chain with spinorbital `2i + s`.
    Hubbard {
        sites: usize,
        #[serde(default = "one")]
        hopping: f64,
        #[serde(default = "one")]
        onsite: f64,
    },
    /// Spatial-orbital integrals in FCIDUMP format.
    Fcidump { path: PathBuf },
    /// Seeded random molecular-style integrals.
    Synthetic {
        orbitals: usize,
        electrons: usize,
        seed: Option<u64>,
    },
    /// An operator sum in JSON term-record form.
    Operator { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

/// A Hamiltonian plus the spin sector it naturally lives in, when known.
pub struct Model {
    pub hamiltonian: OperatorSum,
    pub n_orbitals: usize,
    pub default_sector: Option<(u32, u32)>,
    pub seed: Option<u64>,
}

impl ModelConfig {
    pub fn build(&self, base: &Path, seed_override: Option<u64>) -> Result<Model> {
        match self {
            ModelConfig::Hubbard { sites, hopping, onsite } => {
                let spec = HubbardSpec::new(*sites, *hopping, *onsite)?;
                Ok(Model { hamiltonian: hubbard_chain(&spec), n_orbitals: spec.n_orbitals(), default_sector: None, seed: None })
            }
            ModelConfig::Fcidump { path } => {
                let (ints, h) = load_fcidump(base.join(path))?;
                for w in &ints.warnings {
                    eprintln!("warning: {w}");
                }
                Ok(Model { hamiltonian: h, n_orbitals: 2 * ints.norb, default_sector: electron_sector(ints.nelec, ints.ms2), seed: None })
            }
            ModelConfig::Synthetic { orbitals, electrons, seed } => {
                if *orbitals == 0 || 2 * orbitals > crate::algebra::MAX_ORBITALS || *electrons > 2 * orbitals {
                    return Err(Error::InvalidConfig(format!("synthetic model needs 1..=32 orbitals and at most 2n electrons, got {orbitals}/{electrons}")));
                }
                let seed = seed_override.or(*seed).unwrap_or(0);
                let ints = synthetic_integrals(*orbitals, *electrons, seed);
                Ok(Model { hamiltonian: ints.hamiltonian()?, n_orbitals: 2 * orbitals, default_sector: electron_sector(*electrons, 0), seed: Some(seed) })
            }
            ModelConfig::Operator { path } => {
                let h = read_operator_json(&base.join(path))?;
                let n_orbitals = h.max_index().map_or(0, |m| m + 1);
                Ok(Model { hamiltonian: h, n_orbitals, default_sector: None, seed: None })
            }
        }
    }
}

fn electron_sector(nelec: usize, ms2: i64) -> Option<(u32, u32)> {
    let n = nelec as i64;
    if (n + ms2) % 2 != 0 || ms2.abs() > n {
        return None;
    }
    Some((((n + ms2) / 2) as u32, ((n - ms2) / 2) as u32))
}

pub fn read_operator_json(path: &Path) -> Result<OperatorSum> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), line: e.line(), message: e.to_string() })
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSection {
    /// Inline product `CREATORS:ANNIHILATORS`, e.g. `"0,1:0,2"`.
    pub operator: Option<String>,
    /// Operator sum JSON, used when `operator` is absent.
    pub operator_file: Option<PathBuf>,
    pub generator: Option<String>,
    pub kind: Option<RotationKind>,
    pub theta: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DownfoldSection {
    pub active: Vec<usize>,
    pub external: Vec<usize>,
    /// Explicit reference determinants (occupied active spinorbitals).
    pub active_dets: Option<Vec<Vec<usize>>>,
    /// All active-space determinants with `(n_up, n_dn)` electrons.
    pub active_sector: Option<[u32; 2]>,
    pub grad_tol: Option<f64>,
    pub energy_tol: Option<f64>,
    pub max_operators: Option<usize>,
    #[serde(default)]
    pub sweep: SweepSetting,
    #[serde(default)]
    pub sweep_to_convergence: bool,
    pub optimizer_tol: Option<f64>,
    /// Diagonalize the full problem for the error column (default true).
    pub exact: Option<bool>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepSetting {
    #[default]
    None,
    OnePass,
}

impl From<SweepSetting> for SweepMode {
    fn from(s: SweepSetting) -> Self {
        match s {
            SweepSetting::None => SweepMode::None,
            SweepSetting::OnePass => SweepMode::OnePass,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    /// `(n_up, n_dn)` of the ground state; defaults to the model's sector.
    pub sector: Option<[u32; 2]>,
    /// Spinorbital emptied from the ground state before propagation.
    pub ionize: Option<usize>,
    /// The observable is `n_p` on this spinorbital (default: `ionize`, else 0).
    pub observable: Option<usize>,
    pub total_time: f64,
    pub steps: usize,
    #[serde(default)]
    pub trunc: f64,
    #[serde(default)]
    pub ordering: TermOrdering,
    /// Compare against exact diagonalization (default true).
    pub exact: Option<bool>,
    #[serde(default)]
    pub svg: bool,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InspectSection {
    pub path: Option<PathBuf>,
}

/// Reads and parses a TOML config; parse errors carry the line number.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, path)
}

pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        Error::Parse { path: path.to_path_buf(), line, message: e.message().to_string() }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let text = r#"
[model]
kind = "hubbard"
sites = 2

[downfold]
active = [0, 1]
external = [2, 3]
active_dets = [[0, 1]]
sweep = "one-pass"

[dynamics]
total_time = 1.0
steps = 4
ordering = "canonical"
"#;
        let cfg = parse_config(text, Path::new("x.toml")).unwrap();
        assert!(matches!(cfg.model, Some(ModelConfig::Hubbard { sites: 2, .. })));
        assert_eq!(cfg.downfold.unwrap().sweep, SweepSetting::OnePass);
        assert_eq!(cfg.dynamics.unwrap().ordering, TermOrdering::Canonical);
    }

    #[test]
    fn errors_carry_lines() {
        let err = parse_config("[model]\nkind = \"hubbard\"\nsites = \"two\"\n", Path::new("c.toml")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1..=3, .. }), "{err}");
        let err = parse_config("[downfold]\nactive = [0]\nexternal = [1]\nbogus = 1\n", Path::new("c.toml")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn electron_sectors() {
        assert_eq!(electron_sector(2, 0), Some((1, 1)));
        assert_eq!(electron_sector(3, 1), Some((2, 1)));
        assert_eq!(electron_sector(3, 0), None);
    }
}
