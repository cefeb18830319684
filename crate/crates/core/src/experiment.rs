//! Scenario presets, replicate scheduling and result files.
//!
//! A [`Scenario`] is a flat set of `key = value` parameters. One scenario run
//! builds a network (optionally rewired to several assortativity targets,
//! one sweep point each), runs `replicates` seeded simulations per point and
//! writes:
//!
//! ```text
//! <out>/meta.txt          resolved parameters plus `stat.*` measurements
//! <out>/network.edges     base network
//! <out>/networks/*.edges  rewired networks, sweeps only
//! <out>/runs/*.csv        one fraction series per replicate
//! <out>/aggregate.csv     per-point summary, recomputed from runs/
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::engine::{EngineError, Population};
use crate::evolve::{self, AdoptionConfig, EvolveError, MoranConfig, Process, RunConfig, RunRecord};
use crate::graph::{self, GraphError, Network};
use crate::strategy::{named_strategy_for, MemoryOneStrategy, PayoffMatrix, StrategyError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("scenario '{scenario}': {source}")]
    Strategy {
        scenario: String,
        #[source]
        source: StrategyError,
    },
    #[error("scenario '{scenario}', {stage}: {source}")]
    Network {
        scenario: String,
        stage: String,
        #[source]
        source: GraphError,
    },
    #[error("scenario '{scenario}', point {point}, replicate {replicate}: {source}")]
    Engine {
        scenario: String,
        point: usize,
        replicate: usize,
        #[source]
        source: EngineError,
    },
    #[error("scenario '{scenario}', point {point}, replicate {replicate}: {source}")]
    Evolve {
        scenario: String,
        point: usize,
        replicate: usize,
        #[source]
        source: EvolveError,
    },
    #[error("correlation needs at least two points with variance in both coordinates")]
    DegenerateInput,
    #[error("malformed run file {path}: {msg}")]
    RunFile { path: PathBuf, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ExperimentError {
    /// Short stable identifier for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentError::UnknownPreset(_) => "unknown_preset",
            ExperimentError::Config { .. } => "config",
            ExperimentError::Strategy { .. } => "strategy",
            ExperimentError::Network { .. } => "network",
            ExperimentError::Engine { .. } => "engine",
            ExperimentError::Evolve { .. } => "evolve",
            ExperimentError::DegenerateInput => "degenerate_input",
            ExperimentError::RunFile { .. } => "run_file",
            ExperimentError::Io(_) => "io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Random `degree`-regular graph.
    WellMixed { degree: usize },
    /// Barabási–Albert growth with `attach` edges per new node.
    ScaleFree { attach: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub family: Family,
    pub nodes: usize,
    pub seed: u64,
    /// Assortativity targets; each becomes one sweep point. Empty means a
    /// single point on the unrewired network.
    pub rho_targets: Vec<f64>,
    pub rewire_tol: f64,
    pub rewire_max_steps: usize,
}

impl NetworkSpec {
    pub fn build(&self) -> Result<Network, GraphError> {
        match self.family {
            Family::WellMixed { degree } => graph::regular_random(self.nodes, degree, self.seed),
            Family::ScaleFree { attach } => graph::barabasi_albert(self.nodes, attach, self.seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Random,
    /// Strategy A on the highest-degree nodes.
    HubsA,
    /// Strategy B on the highest-degree nodes.
    HubsB,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessSpec {
    Moran { replacement_rate: f64 },
    Adoption { reset: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub network: NetworkSpec,
    pub strategy_a: String,
    pub strategy_b: String,
    pub init: Init,
    /// Initial fraction of strategy A.
    pub fraction_a: f64,
    pub process: ProcessSpec,
    pub steps: u64,
    pub replicates: usize,
    pub base_seed: u64,
    pub sample_interval: u64,
    pub payoffs: PayoffMatrix,
}

pub const PRESETS: &[&str] = &[
    "fig1_wellmixed_moran",
    "fig1_wellmixed_moran_f04",
    "fig2_sf_moran",
    "fig2_sf_moran_hubs",
    "fig3_wellmixed_adoption",
    "fig3_wellmixed_adoption_f04",
    "fig4a_sf_adoption_random",
    "fig4b_sf_adoption_hubs",
    "fig4b_sf_adoption_pavlov_hubs",
    "fig5_gc",
    "fig5_gc_hubs",
    "fig5_coop",
    "fig5_coop_hubs",
    "fig6_defector",
    "fig6_defector_hubs",
    "fig6_tft",
    "fig6_tft_hubs",
    "fig7_assortativity_sweep",
];

/// Assortativity grid of the sweep preset.
pub const SWEEP_TARGETS: [f64; 8] = [-0.35, -0.3, -0.25, -0.2, -0.15, -0.1, -0.05, 0.0];

fn base(name: &str, family: Family, init: Init, process: ProcessSpec) -> Scenario {
    Scenario {
        name: name.to_string(),
        network: NetworkSpec {
            family,
            nodes: 1000,
            seed: 1,
            rho_targets: Vec::new(),
            rewire_tol: 0.01,
            rewire_max_steps: 200_000,
        },
        strategy_a: "zd_default".into(),
        strategy_b: "pavlov".into(),
        init,
        fraction_a: 0.6,
        process,
        steps: 150_000,
        replicates: 20,
        base_seed: 1,
        sample_interval: 100,
        payoffs: PayoffMatrix::default(),
    }
}

pub fn preset(name: &str) -> Result<Scenario, ExperimentError> {
    const WELL_MIXED: Family = Family::WellMixed { degree: 8 };
    const SCALE_FREE: Family = Family::ScaleFree { attach: 1 };
    const MORAN: ProcessSpec = ProcessSpec::Moran {
        replacement_rate: 0.001,
    };
    const ADOPTION: ProcessSpec = ProcessSpec::Adoption { reset: false };
    let mut s = match name {
        "fig1_wellmixed_moran" => base(name, WELL_MIXED, Init::Random, MORAN),
        "fig1_wellmixed_moran_f04" => Scenario {
            fraction_a: 0.4,
            ..base(name, WELL_MIXED, Init::Random, MORAN)
        },
        "fig2_sf_moran" => base(name, SCALE_FREE, Init::Random, MORAN),
        "fig2_sf_moran_hubs" => base(name, SCALE_FREE, Init::HubsA, MORAN),
        "fig3_wellmixed_adoption" => base(name, WELL_MIXED, Init::Random, ADOPTION),
        "fig3_wellmixed_adoption_f04" => Scenario {
            fraction_a: 0.4,
            ..base(name, WELL_MIXED, Init::Random, ADOPTION)
        },
        "fig4a_sf_adoption_random" => base(name, SCALE_FREE, Init::Random, ADOPTION),
        "fig4b_sf_adoption_hubs" => base(name, SCALE_FREE, Init::HubsA, ADOPTION),
        "fig4b_sf_adoption_pavlov_hubs" => Scenario {
            fraction_a: 0.4,
            ..base(name, SCALE_FREE, Init::HubsB, ADOPTION)
        },
        "fig7_assortativity_sweep" => {
            let mut s = base(name, SCALE_FREE, Init::Random, ADOPTION);
            s.network.rho_targets = SWEEP_TARGETS.to_vec();
            s.replicates = 40;
            s
        }
        other => {
            let (competitor, hubs) = match other {
                "fig5_gc" => ("general_cooperator", false),
                "fig5_gc_hubs" => ("general_cooperator", true),
                "fig5_coop" => ("cooperator", false),
                "fig5_coop_hubs" => ("cooperator", true),
                "fig6_defector" => ("defector", false),
                "fig6_defector_hubs" => ("defector", true),
                "fig6_tft" => ("tit_for_tat", false),
                "fig6_tft_hubs" => ("tit_for_tat", true),
                _ => return Err(ExperimentError::UnknownPreset(other.to_string())),
            };
            let init = if hubs { Init::HubsA } else { Init::Random };
            let mut s = base(name, SCALE_FREE, init, ADOPTION);
            s.strategy_a = competitor.into();
            s
        }
    };
    s.name = name.to_string();
    Ok(s)
}

impl Scenario {
    /// Smaller, faster variant: 200 nodes, 30 000 steps. The event rate
    /// per node and per step is unchanged.
    pub fn reduced(mut self) -> Self {
        self.network.nodes = 200;
        self.steps = 30_000;
        self
    }

    pub fn strategies(&self) -> Result<(MemoryOneStrategy, MemoryOneStrategy), ExperimentError> {
        let get = |name: &str| {
            named_strategy_for(name, &self.payoffs).map_err(|source| ExperimentError::Strategy {
                scenario: self.name.clone(),
                source,
            })
        };
        Ok((get(&self.strategy_a)?, get(&self.strategy_b)?))
    }

    pub fn run_config(&self) -> Result<RunConfig, ExperimentError> {
        let (a, b) = self.strategies()?;
        let process = match self.process {
            ProcessSpec::Moran { replacement_rate } => {
                Process::Moran(MoranConfig::new(replacement_rate).map_err(|source| self.config_error(source))?)
            }
            ProcessSpec::Adoption { reset } => {
                Process::Adoption(AdoptionConfig::for_pair(&a, &b, &self.payoffs).reset_on_adopt(reset))
            }
        };
        Ok(RunConfig::new(self.steps, self.payoffs, process).sample_every(self.sample_interval))
    }

    fn config_error(&self, e: impl fmt::Display) -> ExperimentError {
        ExperimentError::Config {
            line: 0,
            msg: format!("scenario '{}': {e}", self.name),
        }
    }

    pub fn seed_of(&self, replicate: usize) -> u64 {
        self.base_seed.wrapping_add(replicate as u64)
    }

    /// The scenario as `key = value` lines, parseable by [`Scenario::parse`].
    pub fn to_config(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("name", self.name.clone());
        match self.network.family {
            Family::WellMixed { degree } => {
                put("network", "well_mixed".into());
                put("degree", degree.to_string());
            }
            Family::ScaleFree { attach } => {
                put("network", "scale_free".into());
                put("attach", attach.to_string());
            }
        }
        put("nodes", self.network.nodes.to_string());
        put("network_seed", self.network.seed.to_string());
        put("rho_targets", join(&self.network.rho_targets));
        put("rewire_tol", self.network.rewire_tol.to_string());
        put("rewire_max_steps", self.network.rewire_max_steps.to_string());
        put("strategy_a", self.strategy_a.clone());
        put("strategy_b", self.strategy_b.clone());
        let init = match self.init {
            Init::Random => "random",
            Init::HubsA => "hubs_a",
            Init::HubsB => "hubs_b",
        };
        put("init", init.into());
        put("fraction_a", self.fraction_a.to_string());
        match self.process {
            ProcessSpec::Moran { replacement_rate } => {
                put("process", "moran".into());
                put("replacement_rate", replacement_rate.to_string());
            }
            ProcessSpec::Adoption { reset } => {
                put("process", "adoption".into());
                put("adoption_reset", reset.to_string());
            }
        }
        put("steps", self.steps.to_string());
        put("replicates", self.replicates.to_string());
        put("base_seed", self.base_seed.to_string());
        put("sample_interval", self.sample_interval.to_string());
        let m = &self.payoffs;
        put("payoffs", join(&[m.t(), m.r(), m.p(), m.s()]));
        out
    }

    /// Parses `key = value` lines. `#` starts a comment; keys under `stat.`
    /// are measurements and are skipped. Keys not given keep the values of
    /// `defaults`.
    pub fn parse_with(text: &str, defaults: Scenario) -> Result<Self, ExperimentError> {
        let mut s = defaults;
        let mut family_name: Option<(usize, String)> = None;
        let (mut degree, mut attach) = (None, None);
        let mut process_name: Option<(usize, String)> = None;
        let (mut rate, mut reset) = (None, None);
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ExperimentError::Config {
                line: line_no,
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.starts_with("stat.") {
                continue;
            }
            let bad = |msg: String| ExperimentError::Config { line: line_no, msg };
            fn num<T: FromStr>(key: &str, v: &str, line: usize) -> Result<T, ExperimentError>
            where
                T::Err: fmt::Display,
            {
                v.parse().map_err(|e: T::Err| ExperimentError::Config {
                    line,
                    msg: format!("{key}: {e}"),
                })
            }
            match key {
                "name" => s.name = value.to_string(),
                "network" => family_name = Some((line_no, value.to_string())),
                "degree" => degree = Some(num(key, value, line_no)?),
                "attach" => attach = Some(num(key, value, line_no)?),
                "nodes" => s.network.nodes = num(key, value, line_no)?,
                "network_seed" => s.network.seed = num(key, value, line_no)?,
                "rho_targets" => s.network.rho_targets = parse_list(key, value, line_no)?,
                "rewire_tol" => s.network.rewire_tol = num(key, value, line_no)?,
                "rewire_max_steps" => s.network.rewire_max_steps = num(key, value, line_no)?,
                "strategy_a" => s.strategy_a = value.to_string(),
                "strategy_b" => s.strategy_b = value.to_string(),
                "init" => {
                    s.init = match value {
                        "random" => Init::Random,
                        "hubs" | "hubs_a" => Init::HubsA,
                        "hubs_b" => Init::HubsB,
                        other => return Err(bad(format!("unknown init '{other}'"))),
                    }
                }
                "fraction_a" => s.fraction_a = num(key, value, line_no)?,
                "process" => process_name = Some((line_no, value.to_string())),
                "replacement_rate" => rate = Some(num(key, value, line_no)?),
                "adoption_reset" => reset = Some(num(key, value, line_no)?),
                "steps" => s.steps = num(key, value, line_no)?,
                "replicates" => s.replicates = num(key, value, line_no)?,
                "base_seed" => s.base_seed = num(key, value, line_no)?,
                "sample_interval" => s.sample_interval = num(key, value, line_no)?,
                "payoffs" => {
                    let v: Vec<f64> = parse_list(key, value, line_no)?;
                    let [t, r, p, sk] = v[..] else {
                        return Err(bad("payoffs needs four values T,R,P,S".into()));
                    };
                    s.payoffs = PayoffMatrix::new(t, r, p, sk).map_err(|e| bad(e.to_string()))?;
                }
                other => return Err(bad(format!("unknown key '{other}'"))),
            }
        }

        let family = match family_name {
            Some((_, f)) if f == "well_mixed" => Family::WellMixed {
                degree: degree.unwrap_or(match s.network.family {
                    Family::WellMixed { degree } => degree,
                    Family::ScaleFree { .. } => 8,
                }),
            },
            Some((_, f)) if f == "scale_free" => Family::ScaleFree {
                attach: attach.unwrap_or(match s.network.family {
                    Family::ScaleFree { attach } => attach,
                    Family::WellMixed { .. } => 1,
                }),
            },
            Some((line, f)) => {
                return Err(ExperimentError::Config {
                    line,
                    msg: format!("unknown network '{f}'"),
                })
            }
            None => match s.network.family {
                Family::WellMixed { degree: d } => Family::WellMixed {
                    degree: degree.unwrap_or(d),
                },
                Family::ScaleFree { attach: a } => Family::ScaleFree {
                    attach: attach.unwrap_or(a),
                },
            },
        };
        s.network.family = family;

        let process_kind = match &process_name {
            Some((_, p)) if p == "moran" => "moran",
            Some((_, p)) if p == "adoption" => "adoption",
            Some((line, p)) => {
                return Err(ExperimentError::Config {
                    line: *line,
                    msg: format!("unknown process '{p}'"),
                })
            }
            None => match s.process {
                ProcessSpec::Moran { .. } => "moran",
                ProcessSpec::Adoption { .. } => "adoption",
            },
        };
        s.process = match (process_kind, s.process) {
            ("moran", ProcessSpec::Moran { replacement_rate }) => ProcessSpec::Moran {
                replacement_rate: rate.unwrap_or(replacement_rate),
            },
            ("moran", _) => ProcessSpec::Moran {
                replacement_rate: rate.unwrap_or(0.001),
            },
            (_, ProcessSpec::Adoption { reset: r }) => ProcessSpec::Adoption {
                reset: reset.unwrap_or(r),
            },
            _ => ProcessSpec::Adoption {
                reset: reset.unwrap_or(false),
            },
        };
        Ok(s)
    }

    /// Parses a config on top of a well-mixed Moran base scenario. Use
    /// [`Scenario::parse_with`] to start from a preset instead.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        Self::parse_with(
            text,
            base(
                "custom",
                Family::WellMixed { degree: 8 },
                Init::Random,
                ProcessSpec::Moran {
                    replacement_rate: 0.001,
                },
            ),
        )
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn parse_list(key: &str, value: &str, line: usize) -> Result<Vec<f64>, ExperimentError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<f64>().map_err(|e| ExperimentError::Config {
                line,
                msg: format!("{key}: {e}"),
            })
        })
        .collect()
}

/// How replicates are scheduled. Results do not depend on the choice:
/// every replicate owns its seed and its population.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Executor {
    Sequential,
    /// Worker pool of the given size (0 picks the machine default). Runs
    /// sequentially when built without the `parallel` feature.
    Parallel(usize),
}

impl Executor {
    pub fn map<T, F>(self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Executor::Parallel(threads) => {
                use rayon::prelude::*;
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .expect("worker pool");
                pool.install(|| (0..count).into_par_iter().map(f).collect())
            }
            _ => (0..count).map(f).collect(),
        }
    }
}

/// One sweep point: a network and the replicates run on it.
#[derive(Debug, Clone)]
pub struct PointNetwork {
    pub target_rho: Option<f64>,
    pub achieved_rho: f64,
    pub accepted_swaps: usize,
    pub network: Arc<Network>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub point: usize,
    pub replicate: usize,
    pub seed: u64,
    pub record: RunRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub target_rho: Option<f64>,
    pub achieved_rho: f64,
    /// Final fraction of strategy A per replicate, in replicate order.
    pub finals: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
    /// Replicates that ended with A extinct / with B extinct.
    pub extinct_a: usize,
    pub extinct_b: usize,
}

impl PointSummary {
    pub fn from_finals(target_rho: Option<f64>, achieved_rho: f64, finals: Vec<f64>) -> Self {
        let (mean, std_dev) = mean_std(&finals);
        Self {
            target_rho,
            achieved_rho,
            mean,
            std_dev,
            extinct_a: finals.iter().filter(|&&f| f == 0.0).count(),
            extinct_b: finals.iter().filter(|&&f| f == 1.0).count(),
            finals,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<PointSummary>,
    /// Pearson correlation of (achieved ρ, mean final fraction) across
    /// points, when there are at least two distinct ρ values.
    pub correlation: Option<f64>,
}

impl SweepResult {
    pub fn from_points(points: Vec<PointSummary>) -> Self {
        let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.achieved_rho, p.mean)).collect();
        let correlation = correlate(&pairs).ok();
        Self { points, correlation }
    }

    pub fn finals(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| p.finals.iter().copied()).collect()
    }

    pub fn write_aggregate_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "point,target_rho,achieved_rho,replicates,mean_final_fraction_a,std_final_fraction_a,extinct_a,extinct_b"
        )?;
        for (i, p) in self.points.iter().enumerate() {
            writeln!(
                w,
                "{i},{},{},{},{},{},{},{}",
                p.target_rho.map(|t| t.to_string()).unwrap_or_default(),
                p.achieved_rho,
                p.finals.len(),
                p.mean,
                p.std_dev,
                p.extinct_a,
                p.extinct_b
            )?;
        }
        Ok(())
    }
}

/// Sample mean and standard deviation (zero spread for fewer than two
/// values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Pearson correlation coefficient.
pub fn correlate(points: &[(f64, f64)]) -> Result<f64, ExperimentError> {
    if points.len() < 2 {
        return Err(ExperimentError::DegenerateInput);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(ExperimentError::DegenerateInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub scenario: Scenario,
    pub base: Arc<Network>,
    pub points: Vec<PointNetwork>,
    pub runs: Vec<RunOutput>,
    pub result: SweepResult,
    pub adoption_normalizer: Option<f64>,
}

/// Builds the sweep points' networks.
pub fn build_points(s: &Scenario) -> Result<(Arc<Network>, Vec<PointNetwork>), ExperimentError> {
    let net_err = |stage: String, source| ExperimentError::Network {
        scenario: s.name.clone(),
        stage,
        source,
    };
    let base = Arc::new(s.network.build().map_err(|e| net_err("network generation".into(), e))?);
    let base_rho = graph::assortativity(&base)
        .map_err(|e| net_err("assortativity".into(), e))?
        .rho;
    if s.network.rho_targets.is_empty() {
        return Ok((
            Arc::clone(&base),
            vec![PointNetwork {
                target_rho: None,
                achieved_rho: base_rho,
                accepted_swaps: 0,
                network: base,
            }],
        ));
    }
    let mut points = Vec::with_capacity(s.network.rho_targets.len());
    for (i, &target) in s.network.rho_targets.iter().enumerate() {
        let rewired = graph::rewire_to_assortativity(
            &base,
            target,
            s.network.rewire_tol,
            s.network.rewire_max_steps,
            s.network.seed.wrapping_add(i as u64),
        )
        .map_err(|e| net_err(format!("rewiring point {i} (target {target})"), e))?;
        points.push(PointNetwork {
            target_rho: Some(target),
            achieved_rho: rewired.rho,
            accepted_swaps: rewired.accepted_swaps,
            network: Arc::new(rewired.network),
        });
    }
    Ok((base, points))
}

fn run_one(
    s: &Scenario,
    cfg: &RunConfig,
    strategies: &(MemoryOneStrategy, MemoryOneStrategy),
    point: usize,
    net: Arc<Network>,
    replicate: usize,
) -> Result<RunOutput, ExperimentError> {
    let seed = s.seed_of(replicate);
    let (a, b) = strategies.clone();
    let engine_err = |source| ExperimentError::Engine {
        scenario: s.name.clone(),
        point,
        replicate,
        source,
    };
    let mut pop = match s.init {
        Init::Random => Population::init_random(net, a, b, s.fraction_a, seed),
        Init::HubsA => Population::init_hubs(net, a, b, s.fraction_a, seed),
        Init::HubsB => Population::init_hubs_b(net, a, b, 1.0 - s.fraction_a, seed),
    }
    .map_err(engine_err)?;
    let record = evolve::run(&mut pop, cfg, seed).map_err(|source| ExperimentError::Evolve {
        scenario: s.name.clone(),
        point,
        replicate,
        source,
    })?;
    Ok(RunOutput {
        point,
        replicate,
        seed,
        record,
    })
}

/// Runs every replicate of every point in memory.
pub fn simulate(s: &Scenario, exec: Executor) -> Result<ScenarioOutput, ExperimentError> {
    let cfg = s.run_config()?;
    let strategies = s.strategies()?;
    let (base, points) = build_points(s)?;
    let reps = s.replicates;
    let tasks = points.len() * reps;
    let runs = exec
        .map(tasks, |task| {
            let (point, replicate) = (task / reps, task % reps);
            run_one(
                s,
                &cfg,
                &strategies,
                point,
                Arc::clone(&points[point].network),
                replicate,
            )
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let summaries = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let finals = runs
                .iter()
                .filter(|r| r.point == i)
                .map(|r| r.record.final_fraction_a())
                .collect();
            PointSummary::from_finals(p.target_rho, p.achieved_rho, finals)
        })
        .collect();
    let adoption_normalizer = match cfg.process {
        Process::Adoption(a) => Some(a.normalizer()),
        Process::Moran(_) => None,
    };
    Ok(ScenarioOutput {
        scenario: s.clone(),
        base,
        points,
        runs,
        result: SweepResult::from_points(summaries),
        adoption_normalizer,
    })
}

fn run_file_name(point: usize, replicate: usize) -> String {
    format!("point{point:03}_run{replicate:04}.csv")
}

/// Runs a scenario and, when `out` is given, writes its output directory.
/// The returned aggregate is then recomputed from the written run files.
pub fn run_scenario(s: &Scenario, exec: Executor, out: Option<&Path>) -> Result<ScenarioOutput, ExperimentError> {
    let mut output = simulate(s, exec)?;
    if let Some(dir) = out {
        write_outputs(&output, dir)?;
        output.result = aggregate_dir(dir)?;
        fs::write(dir.join("meta.txt"), meta_text(&output))?;
        let mut agg = BufWriter::new(fs::File::create(dir.join("aggregate.csv"))?);
        output.result.write_aggregate_csv(&mut agg)?;
    }
    Ok(output)
}

fn write_outputs(o: &ScenarioOutput, dir: &Path) -> Result<(), ExperimentError> {
    let runs_dir = dir.join("runs");
    if runs_dir.exists() {
        fs::remove_dir_all(&runs_dir)?;
    }
    fs::create_dir_all(&runs_dir)?;
    o.base
        .write_edge_list(BufWriter::new(fs::File::create(dir.join("network.edges"))?))?;
    if !o.scenario.network.rho_targets.is_empty() {
        let nets = dir.join("networks");
        fs::create_dir_all(&nets)?;
        for (i, p) in o.points.iter().enumerate() {
            p.network.write_edge_list(BufWriter::new(fs::File::create(
                nets.join(format!("point{i:03}.edges")),
            )?))?;
        }
    }
    for r in &o.runs {
        let f = BufWriter::new(fs::File::create(runs_dir.join(run_file_name(r.point, r.replicate)))?);
        r.record.write_csv(r.replicate, f)?;
    }
    // Points are needed by `aggregate_dir`; the final meta.txt adds the
    // correlation once the aggregate exists.
    fs::write(dir.join("meta.txt"), meta_text(o))?;
    Ok(())
}

fn meta_text(o: &ScenarioOutput) -> String {
    let mut t = String::from("# resolved scenario; re-run with `netgame run <this file>`\n");
    t.push_str(&o.scenario.to_config());
    let stats = degree_stats_block(o);
    t.push_str(&stats);
    t
}

fn degree_stats_block(o: &ScenarioOutput) -> String {
    let mut t = String::new();
    let mut put = |k: String, v: String| {
        let _ = writeln!(t, "stat.{k} = {v}");
    };
    let base_stats = graph::degree_stats(&o.base);
    put("network.nodes".into(), o.base.node_count().to_string());
    put("network.edges".into(), o.base.edge_count().to_string());
    put("network.mean_degree".into(), base_stats.mean_degree.to_string());
    if let Ok(mix) = graph::assortativity(&o.base) {
        put("network.rho".into(), mix.rho.to_string());
    }
    if let Some(d) = o.adoption_normalizer {
        put("adoption_normalizer".into(), d.to_string());
    }
    for (i, p) in o.points.iter().enumerate() {
        put(format!("point.{i}.achieved_rho"), p.achieved_rho.to_string());
        put(format!("point.{i}.accepted_swaps"), p.accepted_swaps.to_string());
        let runs: Vec<&RunOutput> = o.runs.iter().filter(|r| r.point == i).collect();
        let mean_of = |f: &dyn Fn(&RunRecord) -> Option<f64>| {
            let xs: Vec<f64> = runs.iter().filter_map(|r| f(&r.record)).collect();
            mean_std(&xs).0
        };
        put(
            format!("point.{i}.initial_mean_degree_a"),
            mean_of(&|r| r.initial_mean_degree_a).to_string(),
        );
        put(
            format!("point.{i}.initial_mean_degree_b"),
            mean_of(&|r| r.initial_mean_degree_b).to_string(),
        );
    }
    if let Some(c) = o.result.correlation {
        put("correlation".into(), c.to_string());
    }
    t
}

/// Reads `meta.txt` and `runs/*.csv` from a scenario directory and
/// recomputes the per-point summaries from the last row of each run.
pub fn aggregate_dir(dir: &Path) -> Result<SweepResult, ExperimentError> {
    let meta = fs::read_to_string(dir.join("meta.txt"))?;
    let scenario = Scenario::parse(&meta)?;
    let stats = read_stats(&meta);
    let point_count = scenario.network.rho_targets.len().max(1);
    let mut finals: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); point_count];
    let mut entries: Vec<PathBuf> = fs::read_dir(dir.join("runs"))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    entries.sort();
    for path in entries {
        let bad = |msg: &str| ExperimentError::RunFile {
            path: path.clone(),
            msg: msg.to_string(),
        };
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let (point, replicate) = stem
            .strip_prefix("point")
            .and_then(|s| s.split_once("_run"))
            .and_then(|(p, r)| Some((p.parse::<usize>().ok()?, r.parse::<usize>().ok()?)))
            .ok_or_else(|| bad("unexpected file name"))?;
        let text = fs::read_to_string(&path)?;
        let last = text
            .lines()
            .rfind(|l| !l.trim().is_empty())
            .ok_or_else(|| bad("empty"))?;
        let fraction_a: f64 = last
            .split(',')
            .nth(2)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("no fraction_a in last row"))?;
        finals
            .get_mut(point)
            .ok_or_else(|| bad("point index out of range"))?
            .insert(replicate, fraction_a);
    }
    let points = finals
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            let achieved = stats
                .get(&format!("point.{i}.achieved_rho"))
                .and_then(|v| v.parse().ok())
                .unwrap_or(f64::NAN);
            let target = scenario.network.rho_targets.get(i).copied();
            PointSummary::from_finals(target, achieved, f.into_values().collect())
        })
        .collect();
    Ok(SweepResult::from_points(points))
}

fn read_stats(meta: &str) -> BTreeMap<String, String> {
    meta.lines()
        .filter_map(|l| l.trim().strip_prefix("stat."))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}
