//! Run configuration: a flat `key = value` text format with dotted section
//! prefixes (`sampler.warmup = 5000`), plus typed accessors with defaults.

use crate::data::NetworkFormat;
use crate::error::{GlnemError, Result};
use crate::families::{Family, FamilyKind, Link};
use crate::sampler::SamplerConfig;
use crate::ssibp::HyperParams;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (key, value) = t.split_once('=').ok_or_else(|| {
                GlnemError::Config(format!("config line {}: expected key = value", idx + 1))
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(RunConfig { values })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GlnemError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<f64>().map(Some).map_err(|_| {
                GlnemError::Config(format!("{key}: cannot parse '{v}' as a number"))
            }),
        }
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<usize>().map(Some).map_err(|_| {
                GlnemError::Config(format!("{key}: cannot parse '{v}' as an integer"))
            }),
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<u64>().map(Some).map_err(|_| {
                GlnemError::Config(format!("{key}: cannot parse '{v}' as an integer"))
            }),
        }
    }

    pub fn family(&self) -> Result<Family> {
        let kind = match self.get("family").unwrap_or("bernoulli") {
            "bernoulli" => FamilyKind::Bernoulli,
            "gaussian" => FamilyKind::Gaussian,
            "poisson" => FamilyKind::Poisson,
            "negative_binomial" | "negbin" => FamilyKind::NegativeBinomial,
            "tweedie" => FamilyKind::Tweedie,
            other => {
                return Err(GlnemError::Config(format!("unknown family '{other}'")));
            }
        };
        // A fixed dispersion value switches the family to known-dispersion.
        if self.get("dispersion").is_some() {
            Ok(Family::with_known_dispersion(kind))
        } else {
            Ok(Family::new(kind))
        }
    }

    pub fn link(&self, family: Family) -> Result<Link> {
        let default = match family.kind {
            FamilyKind::Bernoulli => "logit",
            FamilyKind::Gaussian => "identity",
            _ => "log",
        };
        let link = match self.get("link").unwrap_or(default) {
            "identity" => Link::Identity,
            "log" => Link::Log,
            "logit" => Link::Logit,
            "probit" => Link::Probit,
            "cloglog" => Link::CLogLog,
            other => return Err(GlnemError::Config(format!("unknown link '{other}'"))),
        };
        if !link.compatible_with(family.kind) {
            return Err(GlnemError::Config(format!(
                "link {} is not compatible with family {}",
                link.name(),
                family.kind.name()
            )));
        }
        Ok(link)
    }

    /// Hyperparameters; data-dependent defaults need the node count.
    pub fn hyper(&self, n: usize) -> Result<HyperParams> {
        let d = self.get_usize("hyper.d")?.unwrap_or(8);
        let mut hyper = HyperParams::defaults(d, n);
        hyper.d = d;
        if let Some(a) = self.get_f64("hyper.a")? {
            hyper.a = a;
        }
        if let Some(k) = self.get_f64("hyper.kappa")? {
            hyper.kappa = k;
        }
        if let Some(b) = self.get_f64("hyper.b")? {
            hyper.b_slab = b;
        }
        if let Some(s) = self.get_f64("hyper.sigma_beta")? {
            hyper.sigma_beta = s;
        }
        if let Some(v) = self.get_f64("hyper.v0")? {
            hyper.v0 = v;
        }
        hyper.validate()?;
        Ok(hyper)
    }

    pub fn sampler(&self) -> Result<SamplerConfig> {
        let mut cfg = SamplerConfig::default();
        if let Some(v) = self.get_usize("sampler.warmup")? {
            cfg.warmup = v;
        }
        if let Some(v) = self.get_usize("sampler.draws")? {
            cfg.draws = v;
        }
        if let Some(v) = self.get_usize("sampler.chains")? {
            cfg.chains = v;
        }
        if let Some(v) = self.get_u64("sampler.seed")? {
            cfg.seed = v;
        }
        if let Some(v) = self.get_f64("sampler.target_accept")? {
            cfg.target_accept = v;
        }
        if let Some(v) = self.get_usize("sampler.max_depth")? {
            cfg.max_depth = v;
        }
        if let Some(v) = self.get_usize("sampler.init_iters")? {
            cfg.init_iters = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn fixed_phi(&self) -> Result<f64> {
        Ok(self.get_f64("dispersion")?.unwrap_or(1.0))
    }

    pub fn fixed_power(&self) -> Result<f64> {
        Ok(self.get_f64("power")?.unwrap_or(1.5))
    }

    pub fn data_path(&self) -> Result<PathBuf> {
        self.get("data")
            .map(PathBuf::from)
            .ok_or_else(|| GlnemError::Config("missing 'data' (network file path)".into()))
    }

    pub fn format(&self) -> Result<NetworkFormat> {
        match self.get("format").unwrap_or("edge") {
            "edge" | "edge-csv" => Ok(NetworkFormat::EdgeCsv),
            "dense" | "dense-csv" => Ok(NetworkFormat::DenseCsv),
            other => Err(GlnemError::Config(format!("unknown format '{other}'"))),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.get("out").unwrap_or("glnem_out"))
    }

    /// All key-value pairs, for provenance headers.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}
