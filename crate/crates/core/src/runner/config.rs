//! Experiment configuration files (TOML).
//!
//! ```toml
//! name = "stirap_terms"
//!
//! [model.stirap]            # exactly one model table
//! detuning = 1.0
//! peak = 4.0
//! t_final = 100.0
//!
//! [points]                  # fractions of t_final
//! count = 101
//!
//! [lanczos]
//! tol = 1e-9
//!
//! [agp]
//! terms = true
//! ```
//!
//! Unknown keys are rejected. Random couplings need a seed, given either on the couplings
//! table, as the top-level `seed`, or on the command line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::EvolveOptions;
use crate::error::{CdError, Result};
use crate::lanczos::LanczosOptions;
use crate::measure::Measure;
use crate::models::ising_longitudinal::IsingLongitudinal;
use crate::models::oscillator::Oscillator;
use crate::models::profiles::Profile;
use crate::models::stirap::Stirap;
use crate::models::tfim::{Tfim, TfimRamp};
use crate::models::toda::TodaFlow;
use crate::models::two_level::TwoLevelSweep;
use crate::models::xx::{Couplings, XxAnneal};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub name: String,
    #[serde(default)]
    pub seed: Option<u64>,
    pub model: ModelSpec,
    /// Overrides the model's own measure.
    #[serde(default)]
    pub measure: Option<Measure>,
    #[serde(default)]
    pub points: Option<PointsSpec>,
    #[serde(default)]
    pub lanczos: LanczosOptions,
    #[serde(default)]
    pub agp: AgpSpec,
    #[serde(default)]
    pub evolve: Option<EvolveSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    TwoLevel(TwoLevelSweep),
    Oscillator(Oscillator),
    Stirap(Stirap),
    Tfim(TfimSpec),
    TfimRamp(TfimRamp),
    IsingLongitudinal(IsingLongitudinal),
    XxAnneal(XxSpec),
    Toda(TodaFlow),
    Profiles(ProfilesSpec),
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::TwoLevel(_) => "two_level",
            ModelSpec::Oscillator(_) => "oscillator",
            ModelSpec::Stirap(_) => "stirap",
            ModelSpec::Tfim(_) => "tfim",
            ModelSpec::TfimRamp(_) => "tfim_ramp",
            ModelSpec::IsingLongitudinal(_) => "ising_longitudinal",
            ModelSpec::XxAnneal(_) => "xx_anneal",
            ModelSpec::Toda(_) => "toda",
            ModelSpec::Profiles(_) => "profiles",
        }
    }

    /// Parameter checks that the deserializer cannot express.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(CdError::Config(format!("{name} must be positive, got {x}")))
            }
        };
        match self {
            ModelSpec::TwoLevel(m) => {
                positive("t_final", m.t_final)?;
                positive("h0", m.h0)
            }
            ModelSpec::Oscillator(m) => m.validate(),
            ModelSpec::Stirap(m) => {
                positive("t_final", m.t_final)?;
                positive("width", m.width)
            }
            ModelSpec::Tfim(spec) => {
                if spec.g.is_empty() {
                    return Err(CdError::Config("tfim needs at least one field value in `g`".into()));
                }
                spec.g.iter().try_for_each(|&g| Tfim::new(spec.n_sites, spec.v, g, spec.g_dot).map(|_| ()))
            }
            ModelSpec::TfimRamp(m) => {
                positive("t_final", m.t_final)?;
                m.at(0.0).map(|_| ())
            }
            ModelSpec::IsingLongitudinal(m) => {
                IsingLongitudinal::new(m.n_sites, m.v, m.h, m.gamma, m.t_final).map(|_| ())
            }
            ModelSpec::XxAnneal(spec) => {
                positive("t_final", spec.t_final)?;
                if spec.n_sites < 2 {
                    return Err(CdError::Config("the XX chain needs at least two sites".into()));
                }
                Ok(())
            }
            ModelSpec::Toda(m) => {
                positive("t_final", m.t_final)?;
                TodaFlow::new(m.n_sites, m.h1, m.theta0, m.t_final).map(|_| ())
            }
            ModelSpec::Profiles(spec) => {
                if spec.d == 0 || spec.profiles.is_empty() {
                    return Err(CdError::Config("profiles need d >= 1 and at least one profile".into()));
                }
                Ok(())
            }
        }
    }

    /// Whether the model is a protocol in time (so `[points]` applies).
    pub fn is_protocol(&self) -> bool {
        !matches!(self, ModelSpec::Oscillator(_) | ModelSpec::Tfim(_) | ModelSpec::Profiles(_))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TfimMethod {
    /// Lanczos on Pauli strings.
    #[default]
    Pauli,
    /// The closed-form recursion for the coefficients.
    Analytic,
}

/// Static transverse-field Ising ring, scanned over field values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfimSpec {
    pub n_sites: usize,
    pub v: f64,
    pub g: Vec<f64>,
    #[serde(default = "unit")]
    pub g_dot: f64,
    #[serde(default)]
    pub method: TfimMethod,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingsSpec {
    Uniform,
    Random {
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XxSpec {
    pub n_sites: usize,
    pub v0: f64,
    pub h0: f64,
    #[serde(default = "default_offset")]
    pub x0: f64,
    pub t_final: f64,
    pub couplings: CouplingsSpec,
}

fn default_offset() -> f64 {
    4.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilesSpec {
    /// Krylov dimension of each stylized chain.
    pub d: usize,
    #[serde(default = "all_profiles")]
    pub profiles: Vec<Profile>,
}

fn all_profiles() -> Vec<Profile> {
    Profile::all().to_vec()
}

/// Evaluation times as fractions of `t_final`: an explicit list or `count` evenly spaced
/// points on `[start, end]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsSpec {
    #[serde(default)]
    pub fractions: Option<Vec<f64>>,
    #[serde(default)]
    pub count: Option<usize>,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub end: Option<f64>,
}

impl PointsSpec {
    pub fn fractions(&self) -> Result<Vec<f64>> {
        let out = match (&self.fractions, self.count) {
            (Some(list), None) => list.clone(),
            (None, Some(count)) => {
                let start = self.start.unwrap_or(0.0);
                let end = self.end.unwrap_or(1.0);
                match count {
                    0 => Vec::new(),
                    1 => vec![start],
                    _ => (0..count).map(|j| start + (end - start) * j as f64 / (count - 1) as f64).collect(),
                }
            }
            _ => return Err(CdError::Config("[points] needs exactly one of `fractions` or `count`".into())),
        };
        if out.is_empty() {
            return Err(CdError::Config("[points] selects no time points".into()));
        }
        if let Some(bad) = out.iter().find(|f| !(0.0..=1.0).contains(*f)) {
            return Err(CdError::Config(format!("time fraction {bad} outside [0, 1]")));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgpSpec {
    /// Per-element contributions to each CD coefficient (three-level model).
    #[serde(default)]
    pub terms: bool,
    /// Body-count fractions of the CD norm (XX chains).
    #[serde(default)]
    pub norm_fractions: bool,
    /// Norm of the CD term next to its two-body part, first Krylov term and first-order
    /// nested-commutator approximation (XX chains).
    #[serde(default)]
    pub norm_traces: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdChoice {
    None,
    Exact,
    Krylov,
    Truncated,
    FirstOrderNc,
}

/// Final times: an explicit list or a log grid with `per_decade` points per decade.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FinalTimes {
    List(Vec<f64>),
    Log { from: f64, to: f64, per_decade: usize },
}

impl FinalTimes {
    pub fn values(&self) -> Result<Vec<f64>> {
        let out = match self {
            FinalTimes::List(list) => list.clone(),
            FinalTimes::Log { from, to, per_decade } => log_grid(*from, *to, *per_decade)?,
        };
        if out.is_empty() || out.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(CdError::Config("final times must be a non-empty list of positive numbers".into()));
        }
        Ok(out)
    }
}

/// `from * 10^(j / per_decade)` up to and including `to` when it lies on the grid.
pub fn log_grid(from: f64, to: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(from > 0.0 && to >= from && per_decade > 0) {
        return Err(CdError::Config(format!("bad log grid from {from} to {to} with {per_decade} per decade")));
    }
    let steps = ((to / from).log10() * per_decade as f64 + 1e-9).floor() as usize;
    Ok((0..=steps).map(|j| from * 10f64.powf(j as f64 / per_decade as f64)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSpec {
    pub t_final: FinalTimes,
    pub cd: Vec<CdChoice>,
    /// Level prepared at `t = 0` and used as the fidelity target.
    #[serde(default)]
    pub level: usize,
    /// Snapshot intervals along each run.
    #[serde(default = "one")]
    pub intervals: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn one() -> usize {
    1
}

fn default_tolerance() -> f64 {
    EvolveOptions::default().tolerance
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CdError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CdError::Io(format!("reading {}: {e}", path.display())))?;
        let config = Config::parse(&text).map_err(|e| match e {
            CdError::Config(msg) => CdError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        Ok((config, text))
    }

    /// Replaces the seed of random couplings by `seed`, or fills it in from the top-level
    /// key, and rejects random couplings left without one. Returns the seed in use.
    pub fn resolve_seed(&mut self, cli_seed: Option<u64>) -> Result<Option<u64>> {
        let top = self.seed;
        if let ModelSpec::XxAnneal(XxSpec { couplings: CouplingsSpec::Random { seed }, .. }) = &mut self.model {
            let chosen = cli_seed.or(*seed).or(top);
            match chosen {
                Some(s) => {
                    *seed = Some(s);
                    self.seed = Some(s);
                    Ok(Some(s))
                }
                None => Err(CdError::Config(
                    "random couplings need a seed: set `seed` on the couplings table, at the top level, or pass --seed"
                        .into(),
                )),
            }
        } else {
            if cli_seed.is_some() {
                self.seed = cli_seed;
            }
            Ok(self.seed)
        }
    }

    pub fn time_fractions(&self) -> Result<Vec<f64>> {
        match &self.points {
            Some(p) => p.fractions(),
            None => Ok(vec![0.5]),
        }
    }
}

impl XxSpec {
    /// The protocol, once the seed has been resolved.
    pub fn protocol(&self) -> Result<XxAnneal> {
        let couplings = match self.couplings {
            CouplingsSpec::Uniform => Couplings::Uniform,
            CouplingsSpec::Random { seed: Some(seed) } => Couplings::Random { seed },
            CouplingsSpec::Random { seed: None } => {
                return Err(CdError::Config("random couplings need a seed".into()));
            }
        };
        Ok(XxAnneal { n_sites: self.n_sites, v0: self.v0, h0: self.h0, x0: self.x0, t_final: self.t_final, couplings })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_model_table() {
        let c = Config::parse(
            r#"
            name = "s"
            [model.stirap]
            detuning = 1.0
            peak = 4.0
            t_final = 100.0
            [points]
            count = 3
            "#,
        )
        .unwrap();
        assert_eq!(c.model.kind(), "stirap");
        assert_eq!(c.time_fractions().unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(c.lanczos, LanczosOptions::default());
    }

    #[test]
    fn unknown_keys_are_reported_with_location() {
        let err =
            Config::parse("name = \"x\"\n[model.stirap]\ndetuning = 1.0\npeak = 4.0\nt_final = 1.0\nwidht = 0.2\n")
                .unwrap_err()
                .to_string();
        assert!(err.contains("widht"), "{err}");
        assert!(err.contains("line 6"), "{err}");
    }

    #[test]
    fn random_couplings_require_a_seed() {
        let text = r#"
            name = "xx"
            [model.xx_anneal]
            n_sites = 6
            v0 = 1.0
            h0 = 2.0
            t_final = 100.0
            couplings = { kind = "random" }
        "#;
        let mut c = Config::parse(text).unwrap();
        assert!(matches!(c.clone().resolve_seed(None), Err(CdError::Config(_))));
        assert_eq!(c.resolve_seed(Some(9)).unwrap(), Some(9));
        match &c.model {
            ModelSpec::XxAnneal(x) => assert_eq!(x.protocol().unwrap().couplings, Couplings::Random { seed: 9 }),
            _ => unreachable!(),
        }
    }

    #[test]
    fn log_grid_has_ten_points_per_decade() {
        let g = log_grid(1.0, 100.0, 10).unwrap();
        assert_eq!(g.len(), 21);
        assert!((g[10] - 10.0).abs() < 1e-12);
        assert!((g[20] - 100.0).abs() < 1e-10);
    }

    #[test]
    fn final_times_accept_both_forms() {
        let e: EvolveSpec = toml::from_str("t_final = [1.0, 2.0]\ncd = [\"none\"]").unwrap();
        assert_eq!(e.t_final.values().unwrap(), vec![1.0, 2.0]);
        let e: EvolveSpec =
            toml::from_str("t_final = { from = 1.0, to = 10.0, per_decade = 2 }\ncd = [\"exact\"]").unwrap();
        assert_eq!(e.t_final.values().unwrap().len(), 3);
    }
}
