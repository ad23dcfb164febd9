//! Flat `key = value` configuration files and parameter-group resolution.

use std::collections::BTreeMap;
use std::path::Path;

use divreins_core::model::{derive_params, params_from_cramer_lundberg};
use divreins_core::{CramerLundbergInputs, ModelParams, RawModelInputs};

use crate::CliError;

/// Keys that describe the model, in any one of the three groups.
pub const PARAM_KEYS: &[&str] = &[
    "mu", "a", "delta", "sigma2", "l", "c", "mu1", "p", "lambda", "loading", "m1", "m2",
];

/// Numeric controls that may also be set from a file; flags take precedence.
pub const CONTROL_KEYS: &[&str] = &[
    "epsilon", "horizon", "grid_ny", "grid_nt", "paths", "dt", "seed", "b_max", "psi_tol", "x_grid",
    "barrier", "x0",
];

const NORMAL: &[&str] = &["mu", "a", "delta", "sigma2", "l", "c"];
const PREFERRED: &[&str] = &["mu1", "p", "a", "sigma2", "l", "c"];
const CRAMER_LUNDBERG: &[&str] = &["lambda", "loading", "m1", "m2", "p", "a", "l", "c"];

/// The ways a model can be specified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    /// `mu, a, delta, sigma2, l, c`.
    Normal,
    /// `mu1, p, a, sigma2, l, c` with `mu = mu1 + 2ap`, `delta = ap^2`.
    PreferredLevel,
    /// `lambda, loading, m1, m2, p, a, l, c` via the diffusion approximation.
    CramerLundberg,
}

impl ParamGroup {
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            ParamGroup::Normal => NORMAL,
            ParamGroup::PreferredLevel => PREFERRED,
            ParamGroup::CramerLundberg => CRAMER_LUNDBERG,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Normal => "normal",
            ParamGroup::PreferredLevel => "preferred-level",
            ParamGroup::CramerLundberg => "cramer-lundberg",
        }
    }
}

/// Ordered key/value pairs collected from a file and `--param` flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    map: BTreeMap<String, f64>,
}

impl KeyValues {
    /// Parses the file format: one `key = value` per line, `#` starts a comment.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut kv = KeyValues::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{origin}:{}: expected `key = value`, got `{line}`", n + 1))
            })?;
            kv.insert(key.trim(), value.trim(), &format!("{origin}:{}", n + 1))?;
        }
        Ok(kv)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Inserts or overrides one entry after checking the key is known.
    pub fn insert(&mut self, key: &str, value: &str, origin: &str) -> Result<(), CliError> {
        if !PARAM_KEYS.contains(&key) && !CONTROL_KEYS.contains(&key) {
            return Err(CliError::Config(format!("{origin}: unknown key `{key}`")));
        }
        let v: f64 = value
            .parse()
            .map_err(|_| CliError::Config(format!("{origin}: `{key}` has non-numeric value `{value}`")))?;
        if !v.is_finite() {
            return Err(CliError::Config(format!("{origin}: `{key}` must be finite")));
        }
        self.map.insert(key.to_string(), v);
        Ok(())
    }

    /// Parses a `key=value` flag argument.
    pub fn insert_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--param expects key=value, got `{pair}`")))?;
        self.insert(k.trim(), v.trim(), "--param")
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.map.get(key).copied()
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.map.insert(key.to_string(), value);
    }

    fn param_keys(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str).filter(|k| PARAM_KEYS.contains(k))
    }

    pub fn has_params(&self) -> bool {
        self.param_keys().next().is_some()
    }

    /// Decides which group the model keys belong to. Keys from two groups, or
    /// keys a group does not use, are errors.
    pub fn group(&self) -> Result<ParamGroup, CliError> {
        let mut found = Vec::new();
        for (marker, group) in [
            ("mu", ParamGroup::Normal),
            ("delta", ParamGroup::Normal),
            ("mu1", ParamGroup::PreferredLevel),
            ("lambda", ParamGroup::CramerLundberg),
            ("loading", ParamGroup::CramerLundberg),
            ("m1", ParamGroup::CramerLundberg),
            ("m2", ParamGroup::CramerLundberg),
        ] {
            if self.map.contains_key(marker) && !found.contains(&group) {
                found.push(group);
            }
        }
        let group = match found.as_slice() {
            [] if self.map.contains_key("p") => ParamGroup::PreferredLevel,
            [] => ParamGroup::Normal,
            [g] => *g,
            _ => {
                let names: Vec<_> = found.iter().map(|g| g.name()).collect();
                return Err(CliError::Config(format!(
                    "parameter keys mix groups: {}",
                    names.join(", ")
                )));
            }
        };
        if let Some(stray) = self.param_keys().find(|k| !group.keys().contains(k)) {
            return Err(CliError::Config(format!(
                "key `{stray}` is not part of the {} parameter group ({})",
                group.name(),
                group.keys().join(", ")
            )));
        }
        Ok(group)
    }

    fn require(&self, key: &str) -> Result<f64, CliError> {
        self.get(key)
            .ok_or_else(|| CliError::Config(format!("missing parameter `{key}`")))
    }

    /// Builds the model. With no model keys at all the baseline set is used.
    pub fn params(&self) -> Result<ModelParams, CliError> {
        if !self.has_params() {
            return Ok(ModelParams::baseline());
        }
        let group = self.group()?;
        for key in group.keys() {
            self.require(key)?;
        }
        let r = |k: &str| self.require(k).expect("checked above");
        let built = match group {
            ParamGroup::Normal => {
                ModelParams::with_sigma2(r("mu"), r("a"), r("delta"), r("sigma2"), r("l"), r("c"))
            }
            ParamGroup::PreferredLevel => {
                if !(r("sigma2") > 0.0) {
                    return Err(CliError::Config("`sigma2` must be positive".into()));
                }
                derive_params(
                    RawModelInputs {
                        mu1: r("mu1"),
                        p: r("p"),
                        a: r("a"),
                    },
                    r("sigma2").sqrt(),
                    r("l"),
                    r("c"),
                )
            }
            ParamGroup::CramerLundberg => params_from_cramer_lundberg(
                CramerLundbergInputs {
                    lambda: r("lambda"),
                    loading: r("loading"),
                    m1: r("m1"),
                    m2: r("m2"),
                },
                r("p"),
                r("a"),
                r("l"),
                r("c"),
            ),
        };
        built.map_err(|e| CliError::Config(e.to_string()))
    }
}
