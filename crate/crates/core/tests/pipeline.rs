use std::fs;

use mrfprep::harness::{
    energy_to_json, generate, read_instance, run_suite, write_instance, GeneratorSpec, InstanceEntry, InstanceSource,
    Manifest,
};
use mrfprep::inference::{solve, Method, SolveConfig};
use mrfprep::oracle::Oracle;
use mrfprep::preprocess::{run_preprocess, CheckMode, PreprocessConfig};

fn grid() -> GeneratorSpec {
    GeneratorSpec::GridPotts { width: 6, height: 5, labels: 3, lambda: 0.5, noise: 0.2, jitter: 0.05 }
}

#[test]
fn instance_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let e = generate(&grid(), 4).unwrap();
    write_instance(&path, &e).unwrap();
    assert_eq!(read_instance(&path).unwrap(), e);
    assert_eq!(energy_to_json(&generate(&grid(), 4).unwrap()), fs::read_to_string(&path).unwrap().trim_end());
}

#[test]
fn suite_writes_records_summaries_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let e = generate(&grid(), 1).unwrap();
    write_instance(&dir.path().join("grid.json"), &e).unwrap();
    let manifest: Manifest = serde_json::from_str(
        r#"{
            "instances": [
                {"id": "from-file", "path": "grid.json"},
                {"id": "generated", "generator": {"kind": "random-multilabel", "nodes": 30, "labels": 3, "edge_prob": 0.1}, "seed": 2}
            ],
            "methods": [
                {"id": "expansion", "method": "expansion"},
                {"id": "expansion-pre", "method": "expansion-pre", "audit": true},
                {"id": "tiny-bruteforce", "method": "bruteforce", "oracle_cap": 100}
            ]
        }"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let report = run_suite(&manifest, dir.path(), Some(&out)).unwrap();

    assert_eq!(report.records.len(), 6);
    let failed: Vec<_> = report.records.iter().filter(|r| !r.is_ok()).map(|r| r.method_id.as_str()).collect();
    assert_eq!(failed, vec!["tiny-bruteforce", "tiny-bruteforce"]);
    assert_eq!(report.traces.len(), 4);
    let ids: Vec<_> = report.records.iter().map(|r| (r.instance_id.as_str(), r.method_id.as_str())).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);

    let csv = fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.starts_with("instance_id,method_id,wall_time_s,final_energy"));
    let trace = fs::read_to_string(out.join("traces").join("from-file__expansion-pre.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("time_seconds,energy"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 3);

    let pre = report.records.iter().find(|r| r.instance_id == "from-file" && r.method_id == "expansion-pre").unwrap();
    assert!(pre.precision.is_some());
    assert_eq!(pre.recall, pre.labeled_fraction);
}

#[test]
fn missing_instance_file_fails_only_its_cells() {
    let manifest = Manifest {
        instances: vec![
            InstanceEntry { id: "absent".into(), source: InstanceSource::File { path: "nope.json".into() } },
            InstanceEntry { id: "grid".into(), source: InstanceSource::Generated { generator: grid(), seed: 0 } },
        ],
        methods: serde_json::from_str(r#"[{"id": "expansion", "method": "expansion"}]"#).unwrap(),
        repeats: 2,
        parallel: false,
        baseline: "expansion".into(),
    };
    let dir = tempfile::tempdir().unwrap();
    let report = run_suite(&manifest, dir.path(), None).unwrap();
    assert!(!report.records[0].is_ok());
    assert!(report.records[1].is_ok());
    assert!(report.records[1].wall_time_s > 0.0);
}

#[test]
fn exact_remainder_meets_its_certificates() {
    let spec = GeneratorSpec::RandomMultilabel { nodes: 7, labels: 3, edge_prob: 0.4 };
    let oracle = Oracle::default();
    for seed in 0..20 {
        let e = generate(&spec, seed).unwrap();
        let config = SolveConfig {
            method: Method::PreExact,
            pre: PreprocessConfig { kappa: 0.6, epsilon: 1.0, ..Default::default() },
            ..Default::default()
        };
        let r = solve(&e, &config).unwrap();
        let optimum = oracle.brute_force_minimize(&e).unwrap().min_energy;
        assert_eq!(r.certificates.len(), 2);
        for c in &r.certificates {
            assert!(c.check(r.energy, optimum, 1e-9), "{c} violated: {} vs {optimum}", r.energy);
        }
    }
}

#[test]
fn sound_settings_fix_only_persistent_labels_on_grids() {
    let oracle = Oracle::default();
    let spec = GeneratorSpec::GridPotts { width: 3, height: 3, labels: 3, lambda: 0.3, noise: 0.3, jitter: 0.1 };
    let config = PreprocessConfig { kappa: 1.0, check_mode: CheckMode::Exact, ..Default::default() };
    let mut fixed = 0;
    for seed in 0..10 {
        let e = generate(&spec, seed).unwrap();
        let r = run_preprocess(&e, &config).unwrap();
        fixed += r.num_fixed();
        assert!(oracle.is_persistent(&e, &r.fixed).unwrap());
        assert!(oracle.is_autarky(&e, &r.fixed).unwrap());
    }
    assert!(fixed > 0);
}
