//! Run configuration: a TOML file, then command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use semdiff_core::fuzz::{FuzzPlan, DEFAULT_CORPUS_FRACTION, DEFAULT_MAX_LEN, DEFAULT_MIN_LEN};
use semdiff_core::harness::HarnessConfig;
use semdiff_core::mutation::{parse_operator_list, MutationLimits, OperatorCode};
use semdiff_core::optimizer::ProviderConfig;
use semdiff_core::regions::{threshold_grid, ErrorFlavor, DEFAULT_DELTA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuzzSettings {
    pub min_len: usize,
    pub max_len: usize,
    pub corpus_fraction: f64,
}

impl Default for FuzzSettings {
    fn default() -> Self {
        FuzzSettings {
            min_len: DEFAULT_MIN_LEN,
            max_len: DEFAULT_MAX_LEN,
            corpus_fraction: DEFAULT_CORPUS_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationSettings {
    pub max_mutants: usize,
    /// Comma-separated operator codes; all operators when unset.
    pub operators: Option<String>,
}

impl Default for MutationSettings {
    fn default() -> Self {
        MutationSettings {
            max_mutants: MutationLimits::default().max_mutants,
            operators: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionSettings {
    pub delta: f64,
    pub error_flavor: ErrorFlavor,
}

impl Default for RegionSettings {
    fn default() -> Self {
        RegionSettings {
            delta: DEFAULT_DELTA,
            error_flavor: ErrorFlavor::Absolute,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads. Never affects outputs, so it is left out of the digest.
    #[serde(skip_serializing)]
    pub jobs: usize,
    /// Runner executable, or `toy` for the in-process toy runner.
    pub runner: Option<String>,
    pub runner_args: Vec<String>,
    pub harness: HarnessConfig,
    pub fuzz: FuzzSettings,
    pub mutation: MutationSettings,
    pub optimizer: ProviderConfig,
    /// Answers optimization requests from this fixture instead of the network.
    pub stub_fixture: Option<PathBuf>,
    pub regions: RegionSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            runner: None,
            runner_args: Vec::new(),
            harness: HarnessConfig::default(),
            fuzz: FuzzSettings::default(),
            mutation: MutationSettings::default(),
            optimizer: ProviderConfig::default(),
            stub_fixture: None,
            regions: RegionSettings::default(),
        }
    }
}

/// Flags that override file settings.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub operators: Option<String>,
    pub delta: Option<f64>,
    pub error_flavor: Option<ErrorFlavor>,
    pub stub_fixture: Option<PathBuf>,
    pub runner: Option<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, o: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("invalid configuration in {}", p.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = o.seed {
            cfg.seed = v;
        }
        if let Some(v) = o.jobs {
            cfg.jobs = v;
        }
        if let Some(v) = &o.operators {
            cfg.mutation.operators = Some(v.clone());
        }
        if let Some(v) = o.delta {
            cfg.regions.delta = v;
        }
        if let Some(v) = o.error_flavor {
            cfg.regions.error_flavor = v;
        }
        if let Some(v) = &o.stub_fixture {
            cfg.stub_fixture = Some(v.clone());
        }
        if let Some(v) = &o.runner {
            cfg.runner = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.jobs == 0 {
            bail!("jobs must be at least 1");
        }
        self.harness.validate().map_err(anyhow::Error::msg)?;
        self.plan().validate().map_err(anyhow::Error::msg)?;
        self.mutation_limits()?;
        threshold_grid(self.regions.delta).map_err(|e| anyhow::anyhow!("{e}"))?;
        if self.mutation.max_mutants == 0 {
            bail!("mutation.max_mutants must be at least 1");
        }
        Ok(())
    }

    /// The run-level fuzz plan; each pair derives its own from it.
    pub fn plan(&self) -> FuzzPlan {
        FuzzPlan {
            seed: self.seed,
            n_inputs: self.harness.inputs_for(semdiff_core::Level::Function),
            min_len: self.fuzz.min_len,
            max_len: self.fuzz.max_len,
            corpus_fraction: self.fuzz.corpus_fraction,
        }
    }

    pub fn mutation_limits(&self) -> anyhow::Result<MutationLimits> {
        let operators = match &self.mutation.operators {
            Some(list) => parse_operator_list(list)?,
            None => OperatorCode::ALL.into_iter().collect(),
        };
        Ok(MutationLimits {
            max_mutants: self.mutation.max_mutants,
            operators,
        })
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_string(&value).expect("json value serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_ignores_jobs_but_not_seed() {
        let a = RunConfig::default();
        let b = RunConfig { jobs: a.jobs + 3, ..a.clone() };
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), RunConfig { seed: 1, ..a.clone() }.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn overrides_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 5\n[harness]\nrepetitions = 2\n[regions]\ndelta = 0.1\n").unwrap();
        let cfg = RunConfig::load(Some(&path), &Overrides { seed: Some(9), ..Default::default() }).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.harness.repetitions, 2);
        assert_eq!(cfg.regions.delta, 0.1);
        std::fs::write(&path, "sede = 5\n").unwrap();
        assert!(RunConfig::load(Some(&path), &Overrides::default()).is_err());
    }
}
