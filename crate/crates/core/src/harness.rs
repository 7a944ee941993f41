//! Experiment presets, the Monte Carlo driver and result files.
//!
//! `rows.csv` has one row per (grid point, trial, scheme, arch) with the
//! columns of [`Row`]. `summary.csv` has one row per (grid point, scheme,
//! arch) with the columns of [`SummaryRow`]. `trace.jsonl` has one JSON
//! object per cell holding its outer, compute and communication traces.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::orchestrator::{run_schemes, ArchTag, BcdTrace, Scenario, Scheme, Site};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Convergence,
    RateVsK,
    LatencyVsN,
    LatencyVsCycles,
    HoverVsBits,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Convergence,
        Preset::RateVsK,
        Preset::LatencyVsN,
        Preset::LatencyVsCycles,
        Preset::HoverVsBits,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Preset::Convergence => "convergence",
            Preset::RateVsK => "rate-vs-K",
            Preset::LatencyVsN => "latency-vs-N",
            Preset::LatencyVsCycles => "latency-vs-cycles",
            Preset::HoverVsBits => "hover-vs-bits",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown preset '{s}'"))
    }
}

/// Configuration field a preset sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVar {
    Users,
    /// Keeps the configured group size where it divides the new K.
    Elements,
    /// Sets both cycles-per-bit bounds.
    CyclesPerBit,
    /// Sets both task-size bounds.
    TaskBits,
}

impl SweepVar {
    pub fn apply(&self, base: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut cfg = base.clone();
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::ConfigParse(format!("sweep value {value} is not a positive count")))
            }
        };
        match self {
            SweepVar::Users => cfg.network.n_users = count()?,
            SweepVar::Elements => {
                let k = count()?;
                let kb = base.group_size().min(k);
                cfg.network.n_elements = k;
                cfg.network.n_groups = if k % kb == 0 { k / kb } else { k };
            }
            SweepVar::CyclesPerBit => {
                cfg.tasks.cycles_per_bit_min = value;
                cfg.tasks.cycles_per_bit_max = value;
            }
            SweepVar::TaskBits => {
                cfg.tasks.bits_min = value;
                cfg.tasks.bits_max = value;
            }
        }
        cfg.validated()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub preset: Preset,
    pub sweep: SweepVar,
    pub grid: Vec<f64>,
    pub n_trials: usize,
    pub base_seed: u64,
    pub schemes: Vec<Scheme>,
    pub archs: Vec<ArchTag>,
    pub base: SystemConfig,
}

pub const DEFAULT_TRIALS: usize = 50;

impl ExperimentSpec {
    pub fn preset(preset: Preset, base: SystemConfig) -> ExperimentSpec {
        use ArchTag as A;
        use Scheme as S;
        let latency_schemes = vec![S::Proposed, S::Binary, S::Edge, S::Local, S::FixedCompute];
        let (sweep, grid, schemes, archs) = match preset {
            Preset::Convergence => (
                SweepVar::Elements,
                vec![base.network.n_elements as f64],
                vec![S::Proposed],
                vec![A::Sc, A::Gc, A::Fc],
            ),
            Preset::RateVsK => (
                SweepVar::Elements,
                vec![4.0, 8.0, 16.0],
                vec![S::Proposed],
                vec![A::Sc, A::Gc, A::Fc, A::RandomPhase, A::NoIrs, A::FixedBuilding],
            ),
            Preset::LatencyVsN => (SweepVar::Users, vec![2.0, 4.0, 6.0, 8.0], latency_schemes, vec![A::Gc]),
            Preset::LatencyVsCycles => (
                SweepVar::CyclesPerBit,
                vec![1e3, 5e3, 1e4, 5e4],
                latency_schemes,
                vec![A::Gc],
            ),
            Preset::HoverVsBits => (
                SweepVar::TaskBits,
                vec![50e3, 100e3, 200e3, 400e3],
                vec![S::Proposed, S::Binary, S::Edge, S::RandomPower],
                vec![A::Gc],
            ),
        };
        ExperimentSpec {
            preset,
            sweep,
            grid,
            n_trials: DEFAULT_TRIALS,
            base_seed: 0,
            schemes,
            archs,
            base,
        }
    }

    /// Configuration of every grid point, or the first error.
    pub fn grid_configs(&self) -> Result<Vec<SystemConfig>> {
        if self.grid.is_empty() {
            return Err(Error::ConfigParse("sweep grid is empty".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::ConfigParse("n_trials must be at least 1".into()));
        }
        if self.schemes.is_empty() || self.archs.is_empty() {
            return Err(Error::ConfigParse("no scheme or no architecture selected".into()));
        }
        self.grid.iter().map(|v| self.sweep.apply(&self.base, *v)).collect()
    }
}

/// One cell of an experiment. Metric columns are empty when the cell failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub grid_index: usize,
    pub grid_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub arch: ArchTag,
    pub solved: bool,
    pub feasible: bool,
    pub qos_met: bool,
    pub energy_ok: bool,
    pub placement_ok: bool,
    pub min_rate_bps: Option<f64>,
    pub max_latency_s: Option<f64>,
    pub t_hover_s: Option<f64>,
    pub objective: Option<f64>,
    pub mean_beta: Option<f64>,
    pub outer_rounds: Option<usize>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub grid_value: f64,
    pub trial: usize,
    pub scheme: Scheme,
    pub arch: ArchTag,
    pub trace: BcdTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub grid_value: f64,
    pub scheme: Scheme,
    pub arch: ArchTag,
    pub n_solved: usize,
    pub n_feasible: usize,
    pub min_rate_mean: f64,
    pub min_rate_std: f64,
    pub max_latency_mean: f64,
    pub max_latency_std: f64,
    pub t_hover_mean: f64,
    pub t_hover_std: f64,
    pub objective_mean: f64,
    pub objective_std: f64,
    /// Min-rate mean relative to the `sc` row of the same grid point and
    /// scheme, in percent.
    pub rate_gain_vs_sc_pct: Option<f64>,
    /// Worst-latency reduction relative to the `binary` row of the same grid
    /// point and arch, in percent.
    pub latency_gain_vs_binary_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<Row>,
    pub traces: Vec<TraceLine>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentOutput {
    /// True when no cell produced a feasible allocation.
    pub fn all_infeasible(&self) -> bool {
        !self.rows.iter().any(|r| r.feasible)
    }
}

fn run_trial(spec: &ExperimentSpec, cfg: &SystemConfig, gi: usize, trial: usize) -> Vec<(Row, Option<TraceLine>)> {
    let seed = spec.base_seed.wrapping_add(trial as u64);
    let grid_value = spec.grid[gi];
    let blank = |scheme, arch, error: String| Row {
        grid_index: gi,
        grid_value,
        trial,
        seed,
        scheme,
        arch,
        solved: false,
        feasible: false,
        qos_met: false,
        energy_ok: false,
        placement_ok: false,
        min_rate_bps: None,
        max_latency_s: None,
        t_hover_s: None,
        objective: None,
        mean_beta: None,
        outer_rounds: None,
        error,
    };
    let sc = match Scenario::generate(cfg, seed, Site::Optimized) {
        Ok(sc) => sc,
        Err(e) => {
            let msg = e.to_string();
            return spec
                .archs
                .iter()
                .flat_map(|a| spec.schemes.iter().map(move |s| (*s, *a)))
                .map(|(s, a)| (blank(s, a, msg.clone()), None))
                .collect();
        }
    };
    let mut out = Vec::new();
    for arch in &spec.archs {
        for (scheme, res) in run_schemes(&sc, *arch, &spec.schemes) {
            match res {
                Ok(r) => {
                    let m = r.metrics;
                    let n = m.beta.len() as f64;
                    let row = Row {
                        solved: true,
                        feasible: m.feasible(),
                        qos_met: m.qos_met,
                        energy_ok: m.energy_ok,
                        placement_ok: m.placement_ok,
                        min_rate_bps: Some(m.min_rate_bps),
                        max_latency_s: Some(m.max_latency_s),
                        t_hover_s: Some(m.t_hover_s),
                        objective: Some(m.objective),
                        mean_beta: Some(m.beta.iter().sum::<f64>() / n),
                        outer_rounds: Some(m.trace.outer.len() - 1),
                        ..blank(scheme, *arch, String::new())
                    };
                    let trace = TraceLine {
                        grid_value,
                        trial,
                        scheme,
                        arch: *arch,
                        trace: m.trace,
                    };
                    out.push((row, Some(trace)));
                }
                Err(e) => out.push((blank(scheme, *arch, e.to_string()), None)),
            }
        }
    }
    out
}

/// Runs every (grid point, trial) pair, in parallel, and sorts the cells by
/// (grid point, trial, scheme, arch).
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let cfgs = spec.grid_configs()?;
    let jobs: Vec<(usize, usize)> = (0..cfgs.len())
        .flat_map(|g| (0..spec.n_trials).map(move |t| (g, t)))
        .collect();
    let mut cells: Vec<(Row, Option<TraceLine>)> = jobs
        .par_iter()
        .flat_map_iter(|(g, t)| run_trial(spec, &cfgs[*g], *g, *t))
        .collect();
    cells.sort_by(|(a, _), (b, _)| {
        (a.grid_index, a.trial, a.scheme, a.arch).cmp(&(b.grid_index, b.trial, b.scheme, b.arch))
    });
    let (rows, traces): (Vec<Row>, Vec<Option<TraceLine>>) = cells.into_iter().unzip();
    let summary = emit_summary(&rows)?;
    Ok(ExperimentOutput {
        rows,
        traces: traces.into_iter().flatten().collect(),
        summary,
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-(grid point, scheme, arch) means and sample standard deviations over
/// solved cells, with percentage-gap columns.
pub fn emit_summary(rows: &[Row]) -> Result<Vec<SummaryRow>> {
    if rows.is_empty() {
        return Err(Error::ConfigParse("no rows to summarize".into()));
    }
    let mut groups: BTreeMap<(usize, Scheme, ArchTag), Vec<&Row>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.grid_index, r.scheme, r.arch)).or_default().push(r);
    }
    let mut out: Vec<(usize, SummaryRow)> = groups
        .iter()
        .map(|((gi, scheme, arch), rs)| {
            let solved: Vec<&&Row> = rs.iter().filter(|r| r.solved).collect();
            let col = |f: fn(&Row) -> Option<f64>| -> Vec<f64> { solved.iter().filter_map(|r| f(r)).collect() };
            let (min_rate_mean, min_rate_std) = mean_std(&col(|r| r.min_rate_bps));
            let (max_latency_mean, max_latency_std) = mean_std(&col(|r| r.max_latency_s));
            let (t_hover_mean, t_hover_std) = mean_std(&col(|r| r.t_hover_s));
            let (objective_mean, objective_std) = mean_std(&col(|r| r.objective));
            (
                *gi,
                SummaryRow {
                    grid_value: rs[0].grid_value,
                    scheme: *scheme,
                    arch: *arch,
                    n_solved: solved.len(),
                    n_feasible: rs.iter().filter(|r| r.feasible).count(),
                    min_rate_mean,
                    min_rate_std,
                    max_latency_mean,
                    max_latency_std,
                    t_hover_mean,
                    t_hover_std,
                    objective_mean,
                    objective_std,
                    rate_gain_vs_sc_pct: None,
                    latency_gain_vs_binary_pct: None,
                },
            )
        })
        .collect();
    let lookup: BTreeMap<(usize, Scheme, ArchTag), (f64, f64)> = out
        .iter()
        .map(|(gi, s)| ((*gi, s.scheme, s.arch), (s.min_rate_mean, s.max_latency_mean)))
        .collect();
    let pct = |x: f64, base: f64| (base.is_finite() && base > 0.0 && x.is_finite()).then(|| 100.0 * x / base);
    for (gi, s) in out.iter_mut() {
        if s.arch != ArchTag::Sc {
            if let Some((sc_rate, _)) = lookup.get(&(*gi, s.scheme, ArchTag::Sc)) {
                s.rate_gain_vs_sc_pct = pct(s.min_rate_mean - sc_rate, *sc_rate);
            }
        }
        if s.scheme != Scheme::Binary {
            if let Some((_, bin_lat)) = lookup.get(&(*gi, Scheme::Binary, s.arch)) {
                s.latency_gain_vs_binary_pct = pct(bin_lat - s.max_latency_mean, *bin_lat);
            }
        }
    }
    Ok(out.into_iter().map(|(_, s)| s).collect())
}

pub fn rows_csv(rows: &[Row]) -> Result<Vec<u8>> {
    to_csv(rows)
}

pub fn summary_csv(summary: &[SummaryRow]) -> Result<Vec<u8>> {
    to_csv(summary)
}

fn to_csv<T: Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for it in items {
        w.serialize(it)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn traces_jsonl(traces: &[TraceLine]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for t in traces {
        serde_json::to_writer(&mut out, t)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Paths of the files written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub rows: PathBuf,
    pub summary: PathBuf,
    pub trace: PathBuf,
}

pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<OutputFiles> {
    std::fs::create_dir_all(dir)?;
    let files = OutputFiles {
        rows: dir.join("rows.csv"),
        summary: dir.join("summary.csv"),
        trace: dir.join("trace.jsonl"),
    };
    std::fs::write(&files.rows, rows_csv(&out.rows)?)?;
    std::fs::write(&files.summary, summary_csv(&out.summary)?)?;
    std::fs::write(&files.trace, traces_jsonl(&out.traces)?)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(preset: Preset) -> ExperimentSpec {
        let mut base = SystemConfig::default();
        base.network.n_users = 2;
        base.network.n_antennas = 2;
        base.network.n_elements = 4;
        base.network.n_groups = 2;
        let mut spec = ExperimentSpec::preset(preset, base);
        spec.n_trials = 2;
        spec
    }

    #[test]
    fn presets_parse_and_validate() {
        for p in Preset::ALL {
            assert_eq!(p.tag().parse::<Preset>().unwrap(), p);
            let spec = ExperimentSpec::preset(p, SystemConfig::default());
            assert!(spec.grid_configs().is_ok(), "{p}");
        }
    }

    #[test]
    fn bad_specs_are_rejected() {
        let mut spec = tiny(Preset::LatencyVsN);
        spec.grid.clear();
        assert!(spec.grid_configs().is_err());
        let mut spec = tiny(Preset::LatencyVsN);
        spec.n_trials = 0;
        assert!(spec.grid_configs().is_err());
        let mut spec = tiny(Preset::LatencyVsN);
        spec.grid = vec![2.5];
        assert!(spec.grid_configs().is_err());
    }

    #[test]
    fn element_sweep_keeps_group_size() {
        let base = SystemConfig::default();
        let kb = base.group_size();
        for k in [4usize, 8, 16] {
            let cfg = SweepVar::Elements.apply(&base, k as f64).unwrap();
            assert_eq!(cfg.network.n_elements, k);
            assert_eq!(cfg.group_size(), kb.min(k));
        }
    }

    #[test]
    fn rows_are_deterministic_and_sorted() {
        let spec = tiny(Preset::LatencyVsN);
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&spec).unwrap();
        assert_eq!(rows_csv(&a.rows).unwrap(), rows_csv(&b.rows).unwrap());
        assert_eq!(traces_jsonl(&a.traces).unwrap(), traces_jsonl(&b.traces).unwrap());
        let keys: Vec<_> = a.rows.iter().map(|r| (r.grid_index, r.trial, r.scheme, r.arch)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(a.rows.len(), spec.grid.len() * spec.n_trials * spec.schemes.len());
    }

    #[test]
    fn summary_means_match_rows() {
        let spec = tiny(Preset::LatencyVsN);
        let out = run_experiment(&spec).unwrap();
        for s in &out.summary {
            let xs: Vec<f64> = out
                .rows
                .iter()
                .filter(|r| r.grid_value == s.grid_value && r.scheme == s.scheme && r.arch == s.arch)
                .filter_map(|r| r.max_latency_s)
                .collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            assert!((mean - s.max_latency_mean).abs() <= 1e-12 * mean.abs().max(1.0));
        }
        let gap = out
            .summary
            .iter()
            .find(|s| s.scheme == Scheme::Proposed)
            .unwrap()
            .latency_gain_vs_binary_pct;
        assert!(gap.is_some());
    }

    #[test]
    fn seed_changes_draws_not_schema() {
        let spec = tiny(Preset::LatencyVsN);
        let mut other = spec.clone();
        other.base_seed = 1000;
        let a = run_experiment(&spec).unwrap();
        let b = run_experiment(&other).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        assert_ne!(a.rows, b.rows);
        let header = |rows: &[Row]| {
            let bytes = rows_csv(rows).unwrap();
            String::from_utf8(bytes).unwrap().lines().next().unwrap().to_string()
        };
        assert_eq!(header(&a.rows), header(&b.rows));
    }

    #[test]
    fn files_are_written() {
        let spec = tiny(Preset::Convergence);
        let out = run_experiment(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_outputs(&out, dir.path()).unwrap();
        let rows = std::fs::read_to_string(&files.rows).unwrap();
        assert_eq!(rows.lines().count(), out.rows.len() + 1);
        assert!(rows.starts_with("grid_index,grid_value,trial,seed,scheme,arch,"));
        let trace = std::fs::read_to_string(&files.trace).unwrap();
        assert_eq!(trace.lines().count(), out.traces.len());
        for line in trace.lines() {
            let t: TraceLine = serde_json::from_str(line).unwrap();
            assert!(!t.trace.outer.is_empty());
        }
    }

    #[test]
    fn empty_rows_cannot_be_summarized() {
        assert!(emit_summary(&[]).is_err());
    }
}
