use std::path::{Path, PathBuf};

use ndsentropy::catalog::{catalog_entry, CatalogEntry, Expectation};
use ndsentropy::partition::{Partition, PartitionSequence};
use ndsentropy::rational::{parse_rational, Rational};
use ndsentropy::system::NdSystem;
use ndsentropy::{PwConstMeasure, Error};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    MeasEntropy,
    TopoSpanning,
    TopoCover,
    LipschitzBound,
    Rokhlin,
    Certify,
    PowerRule,
    WeakStar,
    EmaxDemo,
    CircleFormulas,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::MeasEntropy => "meas-entropy",
            Kind::TopoSpanning => "topo-spanning",
            Kind::TopoCover => "topo-cover",
            Kind::LipschitzBound => "lipschitz-bound",
            Kind::Rokhlin => "rokhlin",
            Kind::Certify => "certify",
            Kind::PowerRule => "power-rule",
            Kind::WeakStar => "weak-star",
            Kind::EmaxDemo => "emax-demo",
            Kind::CircleFormulas => "circle-formulas",
        }
    }
}

/// One rational or a list of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn strings(&self) -> Vec<&str> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v.iter().map(String::as_str).collect(),
        }
    }
}

/// An experiment. Rationals are strings `"p/q"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Catalog id, or a path to a system JSON file (relative to the config).
    pub system: String,
    pub kind: Kind,
    /// Horizons to evaluate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<u64>>,
    /// Single horizon, used when `horizons` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<OneOrMany>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    /// Selects the `1/(3k)` partition of the `bo` entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_cert: Option<String>,
    /// Partition: a catalog partition id, `uniform-<k>`, `digits`, or a path
    /// to a partition JSON file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<String>,
    /// Second partition, for `rokhlin`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition2: Option<String>,
    /// Path to a measure JSON file; defaults to the entry's measure or Lebesgue.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<String>,
    /// Cover enlargement `δ` for `topo-cover`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<String>,
    /// Target `[0, a)` and level for `weak-star`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<String>,
    /// File stem for the outputs; defaults to the kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let c: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<(), Error> {
        for s in [&self.grid_step, &self.eps_cert, &self.delta, &self.target, &self.level].into_iter().flatten() {
            parse_rational(s)?;
        }
        if let Some(e) = &self.eps {
            for s in e.strings() {
                parse_rational(s)?;
            }
        }
        if let Some(h) = &self.horizons {
            if h.is_empty() || h.windows(2).any(|w| w[0] >= w[1]) || h[0] == 0 {
                return Err(Error::Usage("horizons must be positive and strictly increasing".into()));
            }
        }
        if self.n == Some(0) || self.m == Some(0) || self.k == Some(0) {
            return Err(Error::Usage("n, m and k must be at least 1".into()));
        }
        Ok(())
    }

    /// Canonical JSON used for the config hash.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn horizons_or(&self, default: &[u64]) -> Vec<u64> {
        match (&self.horizons, self.n) {
            (Some(h), _) => h.clone(),
            (None, Some(n)) => vec![n],
            (None, None) => default.to_vec(),
        }
    }

    pub fn max_horizon(&self, default: u64) -> u64 {
        self.horizons_or(&[default]).last().copied().unwrap_or(default)
    }

    pub fn eps_list(&self, default: &str) -> Vec<Rational> {
        match &self.eps {
            Some(e) => e.strings().into_iter().map(|s| parse_rational(s).expect("validated")).collect(),
            None => vec![parse_rational(default).expect("default parses")],
        }
    }

    pub fn rational_or(&self, field: &Option<String>, default: &str) -> Rational {
        parse_rational(field.as_deref().unwrap_or(default)).expect("validated")
    }
}

/// The system, measure and partitions an experiment runs on.
pub struct Resolved {
    pub system: NdSystem,
    pub measure: PwConstMeasure,
    pub measure_id: String,
    pub entry: Option<CatalogEntry>,
    base: PathBuf,
}

impl Resolved {
    pub fn load(config: &ExperimentConfig, config_dir: &Path) -> Result<Self, Error> {
        let entry = catalog_entry(&config.system);
        let system = match &entry {
            Some(e) => e.system.clone(),
            None => {
                let text = read(&config_dir.join(&config.system))?;
                NdSystem::from_json(&text)?
            }
        };
        let (measure, measure_id) = match (&config.measure, &entry) {
            (Some(path), _) => {
                let text = read(&config_dir.join(path))?;
                let doc = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
                (PwConstMeasure::from_doc(&doc)?, path.clone())
            }
            (None, Some(e)) => (e.initial.clone(), e.measure_id.clone()),
            (None, None) => (PwConstMeasure::lebesgue(), "lebesgue".to_string()),
        };
        Ok(Resolved { system, measure, measure_id, entry, base: config_dir.to_path_buf() })
    }

    pub fn expectations(&self) -> &[Expectation] {
        self.entry.as_ref().map_or(&[], |e| &e.expectations)
    }

    /// The partition sequence selected by `spec`, `k`, or the entry default.
    pub fn partition(&self, spec: Option<&str>, k: Option<u32>) -> Result<PartitionSequence, Error> {
        if let Some(k) = k {
            let id = format!("thirds-k{k}");
            return self
                .entry
                .as_ref()
                .and_then(|e| e.partition(&id).cloned())
                .ok_or_else(|| Error::Usage(format!("system {} has no partition {id}", self.system.id())));
        }
        let Some(spec) = spec else {
            return match &self.entry {
                Some(e) => Ok(e.default_sequence().clone()),
                None => Ok(PartitionSequence::constant("uniform-2", Partition::uniform(2))),
            };
        };
        if let Some(p) = self.entry.as_ref().and_then(|e| e.partition(spec)) {
            return Ok(p.clone());
        }
        if spec == "digits" {
            return Ok(PartitionSequence::binary_digits());
        }
        if let Some(k) = spec.strip_prefix("uniform-") {
            let k: u32 = k.parse().map_err(|_| Error::Parse(format!("bad partition {spec:?}")))?;
            if k == 0 {
                return Err(Error::Usage("uniform partition needs k >= 1".into()));
            }
            return Ok(PartitionSequence::constant(spec, Partition::uniform(k)));
        }
        let text = read(&self.base.join(spec))?;
        let p: Partition = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(PartitionSequence::constant(spec, p))
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))
}
