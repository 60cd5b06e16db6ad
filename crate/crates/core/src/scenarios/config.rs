//! Flat key-value run configuration.
//!
//! A configuration is built in layers: the scenario's defaults, then an
//! optional TOML file of flat `key = value` pairs, then command-line
//! overrides. Keys that were not set explicitly but depend on others (the end
//! time of an extension run depends on its rate and mode, the cavity mesh on
//! its height) are filled in after all layers are applied.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coupling::{MicroModel, Physics};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::micro::{MicroStepConfig, OptimizerConfig};
use crate::potentials::{BandwidthPolicy, Potential, PotentialKind, FEASIBILITY_MARGIN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    CouetteHookean,
    FeneExtension,
    FeneShear,
    Cavity,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::CouetteHookean,
        ScenarioKind::FeneExtension,
        ScenarioKind::FeneShear,
        ScenarioKind::Cavity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::CouetteHookean => "couette-hookean",
            ScenarioKind::FeneExtension => "fene-extension",
            ScenarioKind::FeneShear => "fene-shear",
            ScenarioKind::Cavity => "cavity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtensionMode {
    /// `ε(t) = r` for `t <= 9/r`, zero afterwards.
    Startup,
    /// `ε(t) = r` throughout.
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthKind {
    Median,
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: ScenarioKind,
    pub re: f64,
    pub wi: f64,
    pub eta_s: f64,
    pub eps_p: f64,
    pub potential: PotentialKind,
    pub b: f64,
    pub n_particles: usize,
    pub dt: f64,
    pub t_end: f64,
    pub bandwidth: BandwidthKind,
    pub bandwidth_h: f64,
    pub seed: u64,
    /// Steps between recorded rows.
    pub output_every: usize,
    /// Elements of the shear reduction.
    pub elements: usize,
    pub rate: f64,
    pub mode: ExtensionMode,
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    /// Plane or lid speed `U`.
    pub lid: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_init: f64,
    pub parallel: bool,
}

/// Cavity mesh heights used for the benchmark heights 0.2, 0.5 and 1.
pub fn cavity_ny(ly: f64) -> usize {
    const TABLE: [(f64, usize); 3] = [(0.2, 20), (0.5, 25), (1.0, 50)];
    TABLE
        .iter()
        .find(|(h, _)| (h - ly).abs() < 1e-12)
        .map_or_else(|| ((50.0 * ly).ceil() as usize).max(2), |t| t.1)
}

impl SimConfig {
    pub fn defaults(kind: ScenarioKind) -> Self {
        let b = 50f64.sqrt();
        let base = SimConfig {
            scenario: kind,
            re: 0.11,
            wi: 0.1,
            eta_s: 0.11,
            eps_p: 0.89,
            potential: PotentialKind::Hookean,
            b,
            n_particles: 200,
            dt: 1e-3,
            t_end: 1.0,
            bandwidth: BandwidthKind::Median,
            bandwidth_h: 0.01,
            seed: 0,
            output_every: 10,
            elements: 40,
            rate: 4.0,
            mode: ExtensionMode::Startup,
            lx: 1.0,
            ly: 1.0,
            nx: 50,
            ny: 50,
            lid: 1.0,
            max_iters: 500,
            grad_tol: 1e-8,
            step_init: 1.0,
            parallel: true,
        };
        let fene = SimConfig {
            potential: PotentialKind::Fene,
            bandwidth: BandwidthKind::Fixed,
            ..base.clone()
        };
        match kind {
            ScenarioKind::CouetteHookean => base,
            ScenarioKind::FeneExtension => {
                let mut c = SimConfig {
                    wi: 1.0,
                    eps_p: 1.0,
                    re: 1.0,
                    eta_s: 0.0,
                    ..fene
                };
                c.t_end = c.default_t_end();
                c
            }
            ScenarioKind::FeneShear => SimConfig {
                re: 1.2757,
                eta_s: 0.0521,
                wi: 49.62,
                eps_p: 0.9479,
                elements: 20,
                t_end: 50.0,
                ..fene
            },
            ScenarioKind::Cavity => SimConfig {
                re: 1.0,
                eta_s: 0.11,
                eps_p: 0.889,
                wi: 0.1,
                ..fene
            },
        }
    }

    /// End time implied by the scenario when none is given explicitly.
    pub fn default_t_end(&self) -> f64 {
        match (self.scenario, self.mode) {
            (ScenarioKind::FeneExtension, ExtensionMode::Startup) => 9.0 / self.rate + 5.0,
            (ScenarioKind::FeneExtension, ExtensionMode::Constant) => 8.0,
            (ScenarioKind::FeneShear, _) => 50.0,
            _ => 1.0,
        }
    }

    /// Applies layers of flat key-value tables on top of the scenario
    /// defaults. The scenario is taken from the last layer that names one,
    /// else from `kind`.
    pub fn build(kind: Option<ScenarioKind>, layers: &[toml::Table]) -> Result<Self> {
        let mut kind = kind;
        for layer in layers {
            if let Some(v) = layer.get("scenario") {
                let s = v
                    .as_str()
                    .ok_or_else(|| Error::Config("`scenario` must be a string".into()))?;
                kind = Some(ScenarioKind::parse(s)?);
            }
        }
        let kind = kind.ok_or_else(|| Error::Config("no scenario given".into()))?;
        let defaults = Self::defaults(kind);
        let mut table = toml::Table::try_from(&defaults).map_err(|e| Error::Config(e.to_string()))?;
        let explicit = |key: &str| layers.iter().any(|l| l.contains_key(key));
        for layer in layers {
            for (k, v) in layer {
                if !table.contains_key(k) {
                    return Err(Error::Config(format!("unknown key `{k}`")));
                }
                let v = match (&table[k], v) {
                    // integers are accepted where reals are expected
                    (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
                    _ => v.clone(),
                };
                table.insert(k.clone(), v);
            }
        }
        table.insert("scenario".into(), toml::Value::String(kind.name().into()));
        let mut cfg: SimConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        if !explicit("t_end") {
            cfg.t_end = cfg.default_t_end();
        }
        if kind == ScenarioKind::Cavity && !explicit("ny") {
            cfg.ny = cavity_ny(cfg.ly);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let table: toml::Table = s.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        Self::build(None, &[table])
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml_string().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !(pos(self.re) && pos(self.wi) && pos(self.dt) && pos(self.t_end)) {
            return bad("re, wi, dt and t_end must be positive");
        }
        if !(self.eta_s >= 0.0 && self.eps_p >= 0.0) {
            return bad("eta_s and eps_p must be nonnegative");
        }
        if self.n_particles == 0 {
            return bad("n_particles must be at least 1");
        }
        if self.bandwidth == BandwidthKind::Median && self.n_particles < 2 {
            return bad("the median bandwidth rule needs n_particles >= 2");
        }
        if self.bandwidth == BandwidthKind::Fixed && !pos(self.bandwidth_h) {
            return bad("bandwidth_h must be positive");
        }
        if self.potential == PotentialKind::Fene && !pos(self.b) {
            return bad("FENE extensibility b must be positive");
        }
        if self.output_every == 0 || self.max_iters == 0 {
            return bad("output_every and max_iters must be at least 1");
        }
        if !(pos(self.grad_tol) && pos(self.step_init)) {
            return bad("grad_tol and step_init must be positive");
        }
        if self.elements < 2 || self.nx < 2 || self.ny < 2 {
            return bad("meshes need at least two cells per direction");
        }
        if !(pos(self.lx) && pos(self.ly) && pos(self.rate) && self.lid.is_finite()) {
            return bad("lx, ly and rate must be positive");
        }
        Ok(())
    }

    pub fn physics(&self) -> Physics {
        Physics {
            re: self.re,
            wi: self.wi,
            eta_s: self.eta_s,
            eps_p: self.eps_p,
        }
    }

    pub fn potential(&self) -> Potential {
        match self.potential {
            PotentialKind::Hookean => Potential::hookean(),
            PotentialKind::Fene => Potential::fene(self.b),
        }
    }

    pub fn bandwidth_policy(&self) -> BandwidthPolicy {
        match self.bandwidth {
            BandwidthKind::Median => BandwidthPolicy::MedianRule,
            BandwidthKind::Fixed => BandwidthPolicy::Fixed(self.bandwidth_h),
        }
    }

    pub fn exec(&self) -> Exec {
        if self.parallel {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }

    pub fn micro_model(&self) -> MicroModel {
        MicroModel {
            potential: self.potential(),
            bandwidth: self.bandwidth_policy(),
            step: MicroStepConfig {
                dt: self.dt,
                wi: self.wi,
                optimizer: OptimizerConfig {
                    max_iters: self.max_iters,
                    grad_tol: self.grad_tol,
                    step_init: self.step_init,
                },
                feasibility_margin: FEASIBILITY_MARGIN,
            },
            eps_p: self.eps_p,
            exec: self.exec(),
        }
    }

    /// Number of steps to reach `t_end`.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil() as usize
    }
}
