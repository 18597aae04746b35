//! CSV and JSON emission of experiment results.
//!
//! Every output carries a metadata block with the artifact version, the
//! command, the seed and the full effective configuration. CSV writes
//! metadata as `# key=value` lines before the header and floats with 17
//! significant digits. JSON writes `{"metadata": ..., "records": [...]}`
//! with shortest round-trip floats, so parsing it back reproduces every
//! record bit for bit.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::ThinningStats;
use crate::experiments::{AcceptanceReport, KsComparison, SpikingReport};
use crate::model::{PdmpModel, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub artifact: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl Metadata {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            artifact: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config,
        }
    }
}

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    Float(f64),
    Bool(bool),
    Missing,
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Text(s) => {
                if s.contains([',', '"', '\n']) {
                    let _ = write!(out, "\"{}\"", s.replace('"', "\"\""));
                } else {
                    out.push_str(s);
                }
            }
            Cell::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Cell::Float(x) => {
                let _ = write!(out, "{x:.16e}");
            }
            Cell::Bool(b) => {
                let _ = write!(out, "{b}");
            }
            Cell::Missing => {}
        }
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Float)
    }
}

/// A record with a fixed column layout.
pub trait Tabular {
    fn columns() -> Vec<&'static str>;
    fn row(&self) -> Vec<Cell>;
}

#[derive(Serialize)]
struct JsonDocument<'a, T> {
    metadata: &'a Metadata,
    records: &'a [T],
}

#[derive(Deserialize)]
pub struct ParsedDocument<T> {
    pub metadata: Metadata,
    pub records: Vec<T>,
}

/// Render `records` in `format`.
pub fn render_report<T: Tabular + Serialize>(meta: &Metadata, records: &[T], format: OutputFormat) -> serde_json::Result<String> {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&JsonDocument { metadata: meta, records })?;
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => {
            let mut out = String::new();
            let _ = writeln!(out, "# artifact={}", meta.artifact);
            let _ = writeln!(out, "# version={}", meta.version);
            let _ = writeln!(out, "# command={}", meta.command);
            let _ = writeln!(out, "# seed={}", meta.seed);
            let _ = writeln!(out, "# config={}", serde_json::to_string(&meta.config)?);
            out.push_str(&T::columns().join(","));
            out.push('\n');
            for r in records {
                for (i, c) in r.row().iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    c.render(&mut out);
                }
                out.push('\n');
            }
            Ok(out)
        }
    }
}

/// Write a report to `path`, or to stdout when `path` is `None`.
pub fn emit_report<T: Tabular + Serialize>(
    meta: &Metadata,
    records: &[T],
    format: OutputFormat,
    path: Option<&Path>,
) -> std::io::Result<()> {
    let text = render_report(meta, records, format).map_err(std::io::Error::other)?;
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

/// Parse a JSON report produced by [`render_report`].
pub fn parse_json_report<T: for<'de> Deserialize<'de>>(text: &str) -> serde_json::Result<ParsedDocument<T>> {
    serde_json::from_str(text)
}

fn strategy_cells(s: &crate::bounds::BoundStrategy) -> [Cell; 2] {
    use crate::bounds::BoundStrategy::*;
    let (kind, eps) = match *s {
        Global => ("global", None),
        Local => ("local", None),
        OptimalP { epsilon } => ("optimal-p", Some(epsilon)),
        OptimalQ { epsilon } => ("optimal-q", Some(epsilon)),
        OptimalQAdaptive => ("optimal-q-adaptive", None),
    };
    [Cell::Text(kind.into()), eps.into()]
}

const ACCEPTANCE_COLUMNS: [&str; 12] = [
    "strategy",
    "epsilon",
    "trials",
    "mean_acceptance",
    "std_error",
    "mean_tau",
    "mean_tau_se",
    "empty_trials",
    "total_proposed",
    "total_accepted",
    "max_interjump",
    "label",
];

fn acceptance_cells(r: &AcceptanceReport) -> Vec<Cell> {
    let [kind, eps] = strategy_cells(&r.strategy);
    vec![
        kind,
        eps,
        Cell::Int(r.trials),
        Cell::Float(r.mean_acceptance),
        Cell::Float(r.std_error),
        r.mean_tau.into(),
        r.mean_tau_se.into(),
        Cell::Int(r.empty_trials),
        Cell::Int(r.total_proposed),
        Cell::Int(r.total_accepted),
        Cell::Float(r.max_interjump),
        Cell::Text(r.strategy.label()),
    ]
}

impl Tabular for AcceptanceReport {
    fn columns() -> Vec<&'static str> {
        ACCEPTANCE_COLUMNS.to_vec()
    }

    fn row(&self) -> Vec<Cell> {
        acceptance_cells(self)
    }
}

/// Acceptance report tagged with the model it was measured on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledAcceptance {
    pub model: String,
    pub n_chan: Option<u32>,
    pub report: AcceptanceReport,
}

impl Tabular for LabeledAcceptance {
    fn columns() -> Vec<&'static str> {
        let mut c = vec!["model", "n_chan"];
        c.extend(ACCEPTANCE_COLUMNS);
        c
    }

    fn row(&self) -> Vec<Cell> {
        let mut r = vec![
            Cell::Text(self.model.clone()),
            self.n_chan.map_or(Cell::Missing, |n| Cell::Int(n.into())),
        ];
        r.extend(acceptance_cells(&self.report));
        r
    }
}

impl Tabular for SpikingReport {
    fn columns() -> Vec<&'static str> {
        vec![
            "model",
            "n_chan",
            "trials",
            "spikes",
            "spike_fraction",
            "mean_spike_time",
            "std_spike_time",
            "threshold",
            "horizon",
        ]
    }

    fn row(&self) -> Vec<Cell> {
        let model = serde_json::to_value(self.model)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        vec![
            Cell::Text(model),
            Cell::Int(self.n_chan.into()),
            Cell::Int(self.trials),
            Cell::Int(self.spikes),
            Cell::Float(self.spike_fraction),
            self.mean_spike_time.into(),
            self.std_spike_time.into(),
            Cell::Float(self.threshold),
            Cell::Float(self.horizon),
        ]
    }
}

/// Outcome of one statistical check of the `validate` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub name: String,
    pub statistic: f64,
    /// The check passes when `statistic` is on the correct side of this.
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

impl ValidationCheck {
    pub fn p_value(name: impl Into<String>, p: f64, alpha: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            statistic: p,
            threshold: alpha,
            passed: p > alpha,
            detail: detail.into(),
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, limit: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            statistic: value,
            threshold: limit,
            passed: value <= limit,
            detail: detail.into(),
        }
    }

    pub fn from_ks(ks: &KsComparison, alpha: f64) -> Self {
        Self::p_value(
            ks.label.clone(),
            ks.p_value,
            alpha,
            format!("D = {:.6}, n = {} / {}", ks.statistic, ks.n_a, ks.n_b),
        )
    }
}

impl Tabular for ValidationCheck {
    fn columns() -> Vec<&'static str> {
        vec!["name", "statistic", "threshold", "passed", "detail"]
    }

    fn row(&self) -> Vec<Cell> {
        vec![
            Cell::Text(self.name.clone()),
            Cell::Float(self.statistic),
            Cell::Float(self.threshold),
            Cell::Bool(self.passed),
            Cell::Text(self.detail.clone()),
        ]
    }
}

/// One row per path segment: the post-jump state and the flow coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub index: u64,
    pub t: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub mode: serde_json::Value,
    pub a: f64,
    pub b: f64,
    pub segment_end: f64,
    /// Voltage at `segment_end`, just before the next jump.
    pub v_end: f64,
}

impl TrajectoryRow {
    pub fn from_trajectory<P: PdmpModel>(model: &P, traj: &Trajectory<P::Mode>) -> Vec<Self> {
        traj.segments
            .iter()
            .enumerate()
            .map(|(i, seg)| {
                let end = traj.segment_end(i);
                Self {
                    index: i as u64,
                    t: seg.start.time,
                    v: seg.start.voltage,
                    mode: serde_json::to_value(seg.start.mode).unwrap_or(serde_json::Value::Null),
                    a: seg.a,
                    b: seg.b,
                    segment_end: end,
                    v_end: model.flow(seg, end - seg.start.time).unwrap_or(f64::NAN),
                }
            })
            .collect()
    }
}

impl Tabular for TrajectoryRow {
    fn columns() -> Vec<&'static str> {
        vec!["index", "t", "V", "mode", "a", "b", "segment_end", "v_end"]
    }

    fn row(&self) -> Vec<Cell> {
        vec![
            Cell::Int(self.index),
            Cell::Float(self.t),
            Cell::Float(self.v),
            Cell::Text(self.mode.to_string()),
            Cell::Float(self.a),
            Cell::Float(self.b),
            Cell::Float(self.segment_end),
            Cell::Float(self.v_end),
        ]
    }
}

/// Thinning counters of a single path, for the `simulate` metadata.
pub fn stats_summary(stats: &ThinningStats) -> serde_json::Value {
    serde_json::json!({
        "total_proposed": stats.total_proposed,
        "total_accepted": stats.total_accepted,
        "residual_proposals": stats.residual_proposals,
        "acceptance_ratio": stats.acceptance_ratio(),
        "mean_tau": stats.mean_tau(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::BoundStrategy;
    use crate::experiments::HhKind;

    fn sample_report() -> AcceptanceReport {
        AcceptanceReport {
            strategy: BoundStrategy::OptimalP { epsilon: 0.1 },
            trials: 1000,
            mean_acceptance: 0.1 + 0.2,
            std_error: 1.0 / 3.0,
            mean_tau: Some(std::f64::consts::PI),
            mean_tau_se: None,
            empty_trials: 0,
            total_proposed: 12,
            total_accepted: 5,
            max_interjump: 1e-300,
        }
    }

    fn meta() -> Metadata {
        Metadata::new("compare-bounds", 7, serde_json::json!({"horizon": 10.0}))
    }

    #[test]
    fn acceptance_csv_schema() {
        let text = render_report(&meta(), &[sample_report()], OutputFormat::Csv).unwrap();
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let header = lines.next().unwrap();
        assert!(header.starts_with("strategy,epsilon,trials,mean_acceptance,std_error,mean_tau"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), header.split(',').count());
        assert_eq!(row[0], "optimal-p");
        assert_eq!(row[3].parse::<f64>().unwrap(), 0.1 + 0.2);
        assert_eq!(row[4].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(row[6], "");
        assert!(text.contains("# seed=7\n"));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let reports = vec![sample_report()];
        let text = render_report(&meta(), &reports, OutputFormat::Json).unwrap();
        let back: ParsedDocument<AcceptanceReport> = parse_json_report(&text).unwrap();
        assert_eq!(back.records, reports);
        assert_eq!(back.records[0].mean_acceptance.to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(back.metadata, meta());
    }

    #[test]
    fn spiking_rows_per_n_chan() {
        let reports: Vec<SpikingReport> = [30, 300]
            .iter()
            .map(|&n| SpikingReport::from_times(HhKind::Channel, n, 60.0, 10.0, &[Some(2.4), None, Some(2.5)]))
            .collect();
        let text = render_report(&meta(), &reports, OutputFormat::Csv).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 3);
        assert!(rows[1].starts_with("channel,30,3,2,"));
        let back: ParsedDocument<SpikingReport> =
            parse_json_report(&render_report(&meta(), &reports, OutputFormat::Json).unwrap()).unwrap();
        assert_eq!(back.records, reports);
    }

    #[test]
    fn csv_quotes_text_with_commas() {
        let c = ValidationCheck::p_value("a, b", 0.5, 0.01, "x \"y\"");
        let text = render_report(&meta(), &[c], OutputFormat::Csv).unwrap();
        assert!(text.contains("\"a, b\","));
        assert!(text.contains("\"x \"\"y\"\"\""));
    }

    #[test]
    fn rendering_is_deterministic() {
        let a = render_report(&meta(), &[sample_report()], OutputFormat::Csv).unwrap();
        let b = render_report(&meta(), &[sample_report()], OutputFormat::Csv).unwrap();
        assert_eq!(a, b);
    }
}
