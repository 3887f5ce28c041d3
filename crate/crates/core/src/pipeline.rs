//! End-to-end runs: QASM in, resized QASM and a JSON report out.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::circuit::{metrics, Circuit, CircuitStats};
use crate::dependency::{find_resizable_pairs, resize_pipeline_detailed, CostMode, CostSpec, ResizePair};
use crate::error::{ResizeError, Result};
use crate::instantiate::InstantiationConfig;
use crate::qasm::{emit_qasm, parse_qasm};
use crate::synthesis::CouplingGraph;
use crate::unitary_resize::{resize_via_synthesis_with, UnitaryResizeConfig};

pub const SCHEMA_VERSION: &str = "1";

/// Widest input the auto flow hands to the unitary resizer.
pub const AUTO_UNITARY_LIMIT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flow {
    Dependency,
    Unitary,
    Auto,
}

impl FromStr for Flow {
    type Err = ResizeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dependency" => Ok(Flow::Dependency),
            "unitary" => Ok(Flow::Unitary),
            "auto" => Ok(Flow::Auto),
            other => Err(ResizeError::InvalidArgument(format!("unknown flow {other:?}"))),
        }
    }
}

impl fmt::Display for Flow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Flow::Dependency => "dependency",
            Flow::Unitary => "unitary",
            Flow::Auto => "auto",
        })
    }
}

/// The flow that actually produced the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowUsed {
    Dependency,
    Unitary,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingSpec {
    All,
    Linear,
    T,
    /// Edges loaded from a JSON file.
    File(String),
}

impl FromStr for CouplingSpec {
    type Err = ResizeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(CouplingSpec::All),
            "linear" => Ok(CouplingSpec::Linear),
            "t" => Ok(CouplingSpec::T),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(CouplingSpec::File(path.to_string())),
                _ => Err(ResizeError::InvalidCoupling(format!("unknown coupling {s:?}"))),
            },
        }
    }
}

impl fmt::Display for CouplingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingSpec::All => f.write_str("all"),
            CouplingSpec::Linear => f.write_str("linear"),
            CouplingSpec::T => f.write_str("t"),
            CouplingSpec::File(p) => write!(f, "file:{p}"),
        }
    }
}

impl CouplingSpec {
    /// Builds the graph for `n` wires. A file graph is used as given.
    pub fn resolve(&self, n: usize) -> Result<CouplingGraph> {
        match self {
            CouplingSpec::All => Ok(CouplingGraph::all_to_all(n)),
            CouplingSpec::Linear => Ok(CouplingGraph::linear(n)),
            CouplingSpec::T => Ok(CouplingGraph::t_shape(n)),
            CouplingSpec::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| ResizeError::Io(format!("{path}: {e}")))?;
                CouplingGraph::from_json(&text)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub flow: Flow,
    pub cost: CostSpec,
    pub coupling: CouplingSpec,
    pub epsilon: f64,
    pub synth_epsilon: f64,
    pub resets: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            flow: Flow::Dependency,
            cost: CostSpec::max_reuse(),
            coupling: CouplingSpec::All,
            epsilon: 1e-10,
            synth_epsilon: 1e-8,
            resets: 1,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.cost.validate()?;
        if !(1..=3).contains(&self.resets) {
            return Err(ResizeError::InvalidArgument(format!("resets must be 1..=3, got {}", self.resets)));
        }
        if !(self.epsilon > 0.0) || !(self.synth_epsilon > 0.0) {
            return Err(ResizeError::InvalidArgument("epsilons must be positive".into()));
        }
        Ok(())
    }

    fn instantiation(&self, epsilon: f64) -> InstantiationConfig {
        InstantiationConfig { epsilon, seed: self.seed, ..InstantiationConfig::default() }
    }

    fn echo(&self) -> Value {
        json!({
            "flow": self.flow.to_string(),
            "cost": match self.cost.mode {
                CostMode::MaximalReuse => "max-reuse",
                CostMode::MinimalDepth => "min-depth",
            },
            "coupling": self.coupling.to_string(),
            "epsilon": self.epsilon,
            "synth_epsilon": self.synth_epsilon,
            "mmr_weight": self.cost.mmr_weight,
            "depth_slack": self.cost.depth_slack,
            "resets": self.resets,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub parse: f64,
    pub resize: f64,
    pub emit: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub input: CircuitStats,
    pub output: CircuitStats,
    pub flow_requested: Flow,
    pub flow_used: FlowUsed,
    pub pairs: Vec<ResizePair>,
    /// Distances of every synthesized piece to what it replaced.
    pub distances: Vec<f64>,
    pub config: Value,
    pub seed: u64,
    pub timings: Timings,
}

/// Resizes a QASM program. Returns the output QASM and the report.
pub fn run_pipeline(qasm: &str, cfg: &PipelineConfig) -> Result<(String, RunReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let parsed = parse_qasm(qasm)?;
    let parse_time = start.elapsed().as_secs_f64();
    let t = Instant::now();
    let (out, report) = resize_circuit(&parsed, cfg)?;
    let resize_time = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let text = emit_qasm(&out, cfg.resets);
    let emit_time = t.elapsed().as_secs_f64();
    let report = RunReport {
        timings: Timings {
            parse: parse_time,
            resize: resize_time,
            emit: emit_time,
            total: start.elapsed().as_secs_f64(),
        },
        ..report
    };
    Ok((text, report))
}

/// The flow dispatch of [`run_pipeline`] on an already parsed circuit.
/// Terminal measurements are dropped first; timings are left at zero.
pub fn resize_circuit(circuit: &Circuit, cfg: &PipelineConfig) -> Result<(Circuit, RunReport)> {
    cfg.validate()?;
    let input = circuit.strip_terminal();
    let w = cfg.cost.mmr_weight;
    let mut report = RunReport {
        input: metrics(&input, w),
        output: metrics(&input, w),
        flow_requested: cfg.flow,
        flow_used: FlowUsed::None,
        pairs: vec![],
        distances: vec![],
        config: cfg.echo(),
        seed: cfg.seed,
        timings: Timings::default(),
    };
    if input.is_empty() || input.width() < 2 {
        return Ok((input, report));
    }
    let use_unitary = match cfg.flow {
        Flow::Dependency => false,
        Flow::Unitary => true,
        Flow::Auto => {
            if find_resizable_pairs(&input).is_empty() {
                if input.width() > AUTO_UNITARY_LIMIT {
                    return Err(ResizeError::NotResizable);
                }
                true
            } else {
                false
            }
        }
    };
    let out = if use_unitary {
        let coupling = cfg.coupling.resolve(input.width() - 1)?;
        let rc = UnitaryResizeConfig {
            check: cfg.instantiation(cfg.epsilon),
            synth_epsilon: cfg.synth_epsilon,
            ..UnitaryResizeConfig::default()
        };
        let o = resize_via_synthesis_with(&input, &coupling, &rc)?;
        report.flow_used = FlowUsed::Unitary;
        report.pairs = vec![o.chosen.pair];
        report.distances = vec![o.distance];
        o.circuit
    } else {
        let coupling = match cfg.coupling {
            CouplingSpec::All => None,
            ref spec => Some(spec.resolve(input.width())?),
        };
        let o = resize_pipeline_detailed(&input, &cfg.cost, coupling.as_ref(), &cfg.instantiation(cfg.epsilon))?;
        if !o.plan.is_empty() || !o.resynthesized.is_empty() {
            report.flow_used = FlowUsed::Dependency;
        }
        report.pairs = o.plan.pairs.clone();
        report.distances = o.resynthesized.iter().map(|&(_, d)| d).collect();
        o.circuit
    };
    report.output = metrics(&out, w);
    Ok((out, report))
}

fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *v = json!(round_sig(x));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

fn render(mut v: Value) -> String {
    round_floats(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("json values serialize");
    s.push('\n');
    s
}

/// Report JSON with sorted keys and floats rounded to 12 significant digits.
pub fn report_json(report: &RunReport) -> String {
    let mut v = serde_json::to_value(report).expect("report serializes");
    v["schema_version"] = json!(SCHEMA_VERSION);
    render(v)
}

pub fn error_json(err: &ResizeError) -> String {
    render(json!({
        "schema_version": SCHEMA_VERSION,
        "error": { "kind": err.kind(), "message": err.to_string() },
    }))
}

pub fn write_report(report: &RunReport, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, report_json(report)).map_err(|e| ResizeError::Io(format!("{}: {e}", path.display())))
}

/// Process exit status for a failed run.
pub fn exit_code(err: &ResizeError) -> i32 {
    match err {
        ResizeError::NotResizable => 2,
        _ => 1,
    }
}
