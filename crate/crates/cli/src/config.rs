//! Configuration surfaces: the TOML design file for Monte Carlo runs and the
//! fully-resolved per-command configs that get echoed into manifests.
//!
//! Resolved configs are self-contained: re-running a command from its
//! manifest alone must reproduce every output file byte for byte, so the
//! estimate manifest embeds the graph itself rather than a path.

use serde::{Deserialize, Serialize};

use ergm_core::baselines::{FixedPointStop, McmcMleConfig, MpleConfig, MzConfig};
use ergm_core::bilevel::{BarrierForm, MuUpdate, XiSchedule};
use ergm_core::montecarlo::{
    EstimatorKind, InitMode, McDesign, SamplerSettings, VrbeaSettings,
};
use ergm_core::stats::{ModelSpec, StatKind, Theta};
use ergm_core::{Error, Result};

pub fn parse_theta_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad theta value `{tok}`: {e}")))
        })
        .collect()
}

pub fn parse_stats_list(s: &str) -> Result<Vec<StatKind>> {
    s.split(',').map(|tok| StatKind::parse(tok.trim())).collect()
}

pub fn build_theta(values: &[f64], kinds: &[StatKind]) -> Result<Theta> {
    let spec = ModelSpec::new(kinds.to_vec())?;
    Theta::new(values.to_vec(), spec)
}

/// Design file, TOML. Unknown keys are rejected everywhere.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignFile {
    pub design: DesignSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub vrbea: VrbeaSection,
    #[serde(default)]
    pub mz: MzSection,
    #[serde(default)]
    pub mple: MpleSection,
    #[serde(default)]
    pub mcmc_mle: McmcSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub n: usize,
    pub truth: Vec<f64>,
    #[serde(default = "default_stats")]
    pub stats: Vec<String>,
    pub replications: usize,
    pub estimators: Vec<String>,
    #[serde(default = "default_init")]
    pub init: String,
    #[serde(default)]
    pub perturbation: f64,
    pub master_seed: u64,
}

fn default_stats() -> Vec<String> {
    vec!["edges".into(), "triangles".into()]
}

fn default_init() -> String {
    "truth".into()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub burn_in: Option<u64>,
    pub thinning: Option<u64>,
    pub init_p: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VrbeaSection {
    #[serde(default = "d_xi")]
    pub xi: f64,
    #[serde(default = "d_eta")]
    pub eta: f64,
    #[serde(rename = "T", default = "d_t_outer")]
    pub t_outer: usize,
    #[serde(rename = "K", default = "d_k_inner")]
    pub k_inner: usize,
    #[serde(default = "d_epsilon")]
    pub epsilon: f64,
    /// Raw inner step; omit for the 0.002·n² convention.
    pub alpha: Option<f64>,
    #[serde(default = "d_zeta")]
    pub zeta: f64,
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    #[serde(default = "d_schedule")]
    pub xi_schedule: String,
    /// value | gradient
    #[serde(default = "d_barrier")]
    pub barrier: String,
    /// feed_forward | joint_step
    #[serde(default = "d_mu_update")]
    pub mu_update: String,
}

fn d_xi() -> f64 {
    0.03
}
fn d_eta() -> f64 {
    0.8
}
fn d_t_outer() -> usize {
    20_000
}
fn d_k_inner() -> usize {
    10
}
fn d_epsilon() -> f64 {
    1e-2
}
fn d_zeta() -> f64 {
    1e-6
}
fn d_gamma() -> f64 {
    1.0
}
fn d_schedule() -> String {
    "constant".into()
}
fn d_barrier() -> String {
    "gradient".into()
}
fn d_mu_update() -> String {
    "feed_forward".into()
}

impl Default for VrbeaSection {
    fn default() -> Self {
        Self {
            xi: d_xi(),
            eta: d_eta(),
            t_outer: d_t_outer(),
            k_inner: d_k_inner(),
            epsilon: d_epsilon(),
            alpha: None,
            zeta: d_zeta(),
            gamma: d_gamma(),
            xi_schedule: d_schedule(),
            barrier: d_barrier(),
            mu_update: d_mu_update(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MzSection {
    #[serde(default = "d_eps_tol")]
    pub eps_tol: f64,
    #[serde(default = "d_k_starts")]
    pub k_starts: usize,
    #[serde(default = "d_inner_max")]
    pub inner_max_iter: usize,
    #[serde(default = "d_outer_max")]
    pub outer_max_iter: usize,
    #[serde(default = "d_outer_tol")]
    pub outer_tol: f64,
    #[serde(default = "d_stop_rule")]
    pub stop_rule: String,
}

fn d_eps_tol() -> f64 {
    1e-8
}
fn d_k_starts() -> usize {
    5
}
fn d_inner_max() -> usize {
    500
}
fn d_outer_max() -> usize {
    200
}
fn d_outer_tol() -> f64 {
    1e-6
}
fn d_stop_rule() -> String {
    "signed".into()
}

impl Default for MzSection {
    fn default() -> Self {
        Self {
            eps_tol: d_eps_tol(),
            k_starts: d_k_starts(),
            inner_max_iter: d_inner_max(),
            outer_max_iter: d_outer_max(),
            outer_tol: d_outer_tol(),
            stop_rule: d_stop_rule(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpleSection {
    #[serde(default = "d_mple_iter")]
    pub newton_max_iter: usize,
    #[serde(default = "d_mple_tol")]
    pub newton_tol: f64,
    #[serde(default = "d_mple_ridge")]
    pub ridge: f64,
}

fn d_mple_iter() -> usize {
    100
}
fn d_mple_tol() -> f64 {
    1e-10
}
fn d_mple_ridge() -> f64 {
    1e-10
}

impl Default for MpleSection {
    fn default() -> Self {
        Self { newton_max_iter: d_mple_iter(), newton_tol: d_mple_tol(), ridge: d_mple_ridge() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McmcSection {
    #[serde(default = "d_mc_burn")]
    pub burn_in: u64,
    #[serde(default = "d_mc_thin")]
    pub thinning: u64,
    #[serde(default = "d_mc_m")]
    pub samples_m: usize,
    #[serde(default = "d_mc_step")]
    pub step_a: f64,
    #[serde(default = "d_mc_tol")]
    pub tol: f64,
    #[serde(default = "d_mc_iter")]
    pub max_iter: usize,
    #[serde(default = "d_mc_ridge")]
    pub ridge: f64,
}

fn d_mc_burn() -> u64 {
    50_000
}
fn d_mc_thin() -> u64 {
    1_000
}
fn d_mc_m() -> usize {
    300
}
fn d_mc_step() -> f64 {
    0.5
}
fn d_mc_tol() -> f64 {
    1e-4
}
fn d_mc_iter() -> usize {
    30
}
fn d_mc_ridge() -> f64 {
    1e-8
}

impl Default for McmcSection {
    fn default() -> Self {
        Self {
            burn_in: d_mc_burn(),
            thinning: d_mc_thin(),
            samples_m: d_mc_m(),
            step_a: d_mc_step(),
            tol: d_mc_tol(),
            max_iter: d_mc_iter(),
            ridge: d_mc_ridge(),
        }
    }
}

pub fn parse_schedule(s: &str) -> Result<XiSchedule> {
    match s {
        "constant" => Ok(XiSchedule::Constant),
        "inv_sqrt_t" => Ok(XiSchedule::InvSqrtT),
        other => Err(Error::Config(format!("unknown xi schedule `{other}`"))),
    }
}

pub fn parse_barrier(s: &str) -> Result<BarrierForm> {
    match s {
        "value" => Ok(BarrierForm::ValueNorm),
        "gradient" => Ok(BarrierForm::GradientNorm),
        other => Err(Error::Config(format!("unknown barrier form `{other}`"))),
    }
}

pub fn parse_mu_update(s: &str) -> Result<MuUpdate> {
    match s {
        "feed_forward" => Ok(MuUpdate::FeedForward),
        "joint_step" => Ok(MuUpdate::JointStep),
        other => Err(Error::Config(format!("unknown mu update `{other}`"))),
    }
}

pub fn parse_stop_rule(s: &str) -> Result<FixedPointStop> {
    match s {
        "signed" => Ok(FixedPointStop::SignedDiff),
        "absolute" => Ok(FixedPointStop::AbsoluteDiff),
        "printed_frozen" => Ok(FixedPointStop::PrintedFrozen),
        other => Err(Error::Config(format!("unknown stop rule `{other}`"))),
    }
}

impl DesignFile {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("design file: {e}")))
    }

    pub fn to_design(&self) -> Result<McDesign> {
        let kinds: Vec<StatKind> = self
            .design
            .stats
            .iter()
            .map(|s| StatKind::parse(s))
            .collect::<Result<_>>()?;
        let truth = build_theta(&self.design.truth, &kinds)?;
        let estimators: Vec<EstimatorKind> = self
            .design
            .estimators
            .iter()
            .map(|s| EstimatorKind::parse(s))
            .collect::<Result<_>>()?;
        let init_mode = match self.design.init.as_str() {
            "truth" => InitMode::Truth,
            "truth_plus_uniform" => InitMode::TruthPerturbed(self.design.perturbation),
            other => return Err(Error::Config(format!("unknown init mode `{other}`"))),
        };
        Ok(McDesign {
            n: self.design.n,
            truth,
            replications: self.design.replications,
            estimators,
            init_mode,
            sampler: SamplerSettings {
                burn_in: self.sampler.burn_in,
                thinning: self.sampler.thinning,
                init_p: self.sampler.init_p,
            },
            vrbea: VrbeaSettings {
                xi: self.vrbea.xi,
                eta: self.vrbea.eta,
                t_outer: self.vrbea.t_outer,
                k_inner: self.vrbea.k_inner,
                epsilon: self.vrbea.epsilon,
                alpha: self.vrbea.alpha,
                zeta: self.vrbea.zeta,
                gamma: self.vrbea.gamma,
                xi_schedule: parse_schedule(&self.vrbea.xi_schedule)?,
                barrier: parse_barrier(&self.vrbea.barrier)?,
                mu_update: parse_mu_update(&self.vrbea.mu_update)?,
            },
            mz: MzConfig {
                eps_tol: self.mz.eps_tol,
                k_starts: self.mz.k_starts,
                inner_max_iter: self.mz.inner_max_iter,
                outer_max_iter: self.mz.outer_max_iter,
                outer_tol: self.mz.outer_tol,
                stop_rule: parse_stop_rule(&self.mz.stop_rule)?,
                ..MzConfig::default()
            },
            mple: MpleConfig {
                newton_max_iter: self.mple.newton_max_iter,
                newton_tol: self.mple.newton_tol,
                ridge: self.mple.ridge,
            },
            mcmc: McmcMleConfig {
                burn_in: self.mcmc_mle.burn_in,
                thinning: self.mcmc_mle.thinning,
                samples_m: self.mcmc_mle.samples_m,
                step_a: self.mcmc_mle.step_a,
                tol: self.mcmc_mle.tol,
                max_iter: self.mcmc_mle.max_iter,
                ridge: self.mcmc_mle.ridge,
                seed: 0,
            },
            master_seed: self.design.master_seed,
        })
    }

    /// Echo with every default materialized, for the manifest.
    pub fn resolved(&self) -> DesignFile {
        self.clone()
    }
}

/// Fully resolved `sample` invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleResolved {
    pub n: usize,
    pub theta: Vec<f64>,
    pub stats: Vec<String>,
    pub count: usize,
    pub seed: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub init_p: f64,
    pub gibbs: bool,
    pub packed: bool,
}

/// Fully resolved `estimate` invocation; the graph rides along as edge list
/// text so the manifest alone reproduces the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateResolved {
    pub method: String,
    pub n: usize,
    pub graph_edges: Vec<(usize, usize)>,
    pub theta0: Vec<f64>,
    pub stats: Vec<String>,
    pub vrbea: VrbeaSection,
    pub mz: MzSection,
    pub mple: MpleSection,
    pub mcmc_mle: McmcSection,
    pub seed: u64,
}

/// Fully resolved `exact` invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactResolved {
    pub n: usize,
    pub theta: Vec<f64>,
    pub stats: Vec<String>,
}

/// Fully resolved `mc` / `sweep` invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McResolved {
    pub design: DesignFile,
    /// "none" for plain mc, else "eps" or "eta".
    pub sweep: String,
    pub grid: Vec<f64>,
    pub jobs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Manifest {
    Sample(SampleResolved),
    Estimate(EstimateResolved),
    Exact(ExactResolved),
    Mc(McResolved),
    Sweep(McResolved),
}

impl Manifest {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("manifest: {e}")))
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("manifest: {e}")))?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}
