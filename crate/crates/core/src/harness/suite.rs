use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate, GeneratorSpec};
use super::io::read_instance;
use super::measure::{aggregate, BenchRecord, MethodSummary};
use crate::energy::EnergyFunction;
use crate::error::{Error, Result};
use crate::inference::{solve, InferenceReport, SolveConfig, TracePoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSource {
    /// A JSON instance file; relative paths resolve against the manifest's directory.
    File { path: PathBuf },
    Generated { generator: GeneratorSpec, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceEntry {
    pub id: String,
    #[serde(flatten)]
    pub source: InstanceSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodEntry {
    pub id: String,
    #[serde(flatten)]
    pub config: SolveConfig,
}

/// Instances × methods, each cell timed `repeats` times (the minimum is kept).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub instances: Vec<InstanceEntry>,
    pub methods: Vec<MethodEntry>,
    #[serde(default = "one")]
    pub repeats: usize,
    #[serde(default)]
    pub parallel: bool,
    /// Method id the speedup and energy change are measured against.
    #[serde(default = "default_baseline")]
    pub baseline: String,
}

fn one() -> usize {
    1
}

fn default_baseline() -> String {
    "expansion".into()
}

impl Manifest {
    pub fn from_path(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        for (k, m) in self.methods.iter().enumerate() {
            if self.methods[..k].iter().any(|o| o.id == m.id) {
                return Err(Error::Config(format!("duplicate method id '{}'", m.id)));
            }
        }
        for (k, i) in self.instances.iter().enumerate() {
            if self.instances[..k].iter().any(|o| o.id == i.id) {
                return Err(Error::Config(format!("duplicate instance id '{}'", i.id)));
            }
        }
        Ok(())
    }
}

pub fn load_instance(entry: &InstanceEntry, base_dir: &Path) -> Result<EnergyFunction> {
    match &entry.source {
        InstanceSource::File { path } => read_instance(&base_dir.join(path)),
        InstanceSource::Generated { generator, seed } => generate(generator, *seed),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub instance_id: String,
    pub method_id: String,
    pub points: Vec<TracePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub records: Vec<BenchRecord>,
    pub summaries: Vec<MethodSummary>,
    pub traces: Vec<TraceRecord>,
}

fn run_cell(e: &EnergyFunction, config: &SolveConfig, repeats: usize) -> Result<InferenceReport> {
    let mut best = solve(e, config)?;
    for _ in 1..repeats {
        let r = solve(e, config)?;
        best.wall_time_s = best.wall_time_s.min(r.wall_time_s);
    }
    Ok(best)
}

/// Runs every cell. A failing cell becomes a record with `error` set.
/// Records are ordered by `(instance_id, method_id)`.
pub fn run_suite(manifest: &Manifest, base_dir: &Path, out_dir: Option<&Path>) -> Result<SuiteReport> {
    manifest.validate()?;
    let cells: Vec<(usize, usize)> = (0..manifest.instances.len())
        .flat_map(|i| (0..manifest.methods.len()).map(move |m| (i, m)))
        .collect();
    let instances: Vec<std::result::Result<EnergyFunction, String>> = manifest
        .instances
        .iter()
        .map(|entry| load_instance(entry, base_dir).map_err(|err| err.to_string()))
        .collect();
    let run = |&(i, m): &(usize, usize)| -> (BenchRecord, Option<TraceRecord>) {
        let iid = &manifest.instances[i].id;
        let method = &manifest.methods[m];
        let outcome = instances[i].clone().and_then(|e| run_cell(&e, &method.config, manifest.repeats).map_err(|err| err.to_string()));
        match outcome {
            Ok(r) => {
                let trace = TraceRecord { instance_id: iid.clone(), method_id: method.id.clone(), points: r.trace.clone() };
                (BenchRecord::from_report(iid, &method.id, &r), Some(trace))
            }
            Err(msg) => (BenchRecord::failed(iid, &method.id, msg), None),
        }
    };
    let mut results: Vec<(BenchRecord, Option<TraceRecord>)> =
        if manifest.parallel { cells.par_iter().map(run).collect() } else { cells.iter().map(run).collect() };
    results.sort_by(|a, b| (&a.0.instance_id, &a.0.method_id).cmp(&(&b.0.instance_id, &b.0.method_id)));
    let (records, traces): (Vec<BenchRecord>, Vec<Option<TraceRecord>>) = results.into_iter().unzip();
    let traces: Vec<TraceRecord> = traces.into_iter().flatten().collect();
    let summaries = aggregate(&records, &manifest.baseline);
    let report = SuiteReport { records, summaries, traces };
    if let Some(dir) = out_dir {
        write_report(&report, dir)?;
    }
    Ok(report)
}

fn file_stem(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

pub fn write_trace_csv(path: &Path, points: &[TracePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time_seconds", "energy"])?;
    for p in points {
        w.write_record([p.time_s.to_string(), p.energy.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `records.csv`, `records.json`, `summary.json` and
/// `traces/<instance>__<method>.csv`.
pub fn write_report(report: &SuiteReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("traces"))?;
    let mut w = csv::Writer::from_path(dir.join("records.csv"))?;
    for r in &report.records {
        w.serialize(r)?;
    }
    w.flush()?;
    fs::write(dir.join("records.json"), serde_json::to_string_pretty(&report.records)?)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&report.summaries)?)?;
    for t in &report.traces {
        let name = format!("{}__{}.csv", file_stem(&t.instance_id), file_stem(&t.method_id));
        write_trace_csv(&dir.join("traces").join(name), &t.points)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::Method;

    fn manifest() -> Manifest {
        serde_json::from_str(
            r#"{
                "instances": [{"id": "g1", "generator": {"kind": "grid-potts", "width": 6, "height": 6,
                               "labels": 3, "lambda": 0.8, "noise": 0.2}, "seed": 7}],
                "methods": [{"id": "expansion", "method": "expansion"},
                            {"id": "expansion-pre", "method": "expansion-pre", "pre": {"kappa": 0.8}}]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn smallest_suite_writes_two_records_and_two_traces() {
        let m = manifest();
        assert_eq!(m.methods[1].config.method, Method::ExpansionPre);
        assert_eq!(m.methods[1].config.pre.tau, 3);
        let dir = tempfile::tempdir().unwrap();
        let r = run_suite(&m, Path::new("."), Some(dir.path())).unwrap();
        assert_eq!(r.records.len(), 2);
        assert!(r.records.iter().all(|x| x.is_ok() && x.wall_time_s > 0.0));
        let traces: Vec<_> = fs::read_dir(dir.path().join("traces")).unwrap().collect();
        assert_eq!(traces.len(), 2);
        let csv = fs::read_to_string(dir.path().join("traces/g1__expansion.csv")).unwrap();
        assert!(csv.starts_with("time_seconds,energy\n"));
        let head = fs::read_to_string(dir.path().join("records.csv")).unwrap();
        assert!(head.starts_with(
            "instance_id,method_id,wall_time_s,final_energy,labeled_fraction,precision,recall,epochs,certificate,error\n"
        ));
    }

    #[test]
    fn failing_cells_are_recorded() {
        let mut m = manifest();
        m.instances.push(InstanceEntry { id: "missing".into(), source: InstanceSource::File { path: "/nonexistent/x.json".into() } });
        m.methods.push(MethodEntry { id: "bf".into(), config: SolveConfig { method: Method::Bruteforce, oracle_cap: 10, ..SolveConfig::default() } });
        let r = run_suite(&m, Path::new("."), None).unwrap();
        assert_eq!(r.records.len(), 6);
        assert_eq!(r.records.iter().filter(|x| !x.is_ok()).count(), 4);
        assert_eq!(r.traces.len(), 2);
    }

    #[test]
    fn parallel_and_serial_agree_except_time() {
        let mut m = manifest();
        let a = run_suite(&m, Path::new("."), None).unwrap();
        m.parallel = true;
        let b = run_suite(&m, Path::new("."), None).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!((&x.instance_id, &x.method_id, x.final_energy), (&y.instance_id, &y.method_id, y.final_energy));
        }
    }

    #[test]
    fn duplicate_ids_are_refused() {
        let mut m = manifest();
        m.methods.push(m.methods[0].clone());
        assert!(matches!(run_suite(&m, Path::new("."), None), Err(Error::Config(_))));
    }
}
