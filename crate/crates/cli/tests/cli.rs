use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
sigma = 0.5
iterations = 600
burn_in = 100
chains = 2

[model]
kind = "univ_conj_i"
mu0 = "auto"
tau0 = 0.01
tau_common = 1.0

[tilt]
kind = "ngg"
tau = 1.0
"#;

fn spkmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spkmix")).args(args).output().expect("binary runs")
}

fn setup(dir: &Path) -> (String, String) {
    let data = dir.join("data.csv");
    fs::write(&data, "x\n-2\n-1.9\n0\n1.9\n2\n").unwrap();
    let cfg = dir.join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    (cfg.display().to_string(), data.display().to_string())
}

#[test]
fn fit_is_deterministic_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, data) = setup(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = spkmix(&["fit", "--config", &cfg, "--data", &data, "--out", out.to_str().unwrap(), "--seed", "11"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["trace_chain0.ndjson", "trace_chain1.ndjson", "coclustering.csv", "k_posterior.tsv", "density.tsv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs between runs");
    }
    assert_ne!(fs::read(a.join("trace_chain0.ndjson")).unwrap(), fs::read(a.join("trace_chain1.ndjson")).unwrap());

    let (header, trace) = spkmix::trace::load_trace(a.join("trace_chain0.ndjson")).unwrap();
    assert_eq!(trace.records.len(), 500);
    assert_eq!(header.n, 5);
    // "auto" is resolved to the data mean in the recorded model.
    match header.model {
        spkmix::LikelihoodModel::UnivConjI { mu0, .. } => assert!(mu0.abs() < 1e-12),
        other => panic!("unexpected model {other:?}"),
    }

    let k: Vec<f64> = fs::read_to_string(a.join("k_posterior.tsv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-5);
}

#[test]
fn eppf_normalization_check() {
    let o = spkmix(&[
        "eppf",
        "--n",
        "5",
        "--sigma",
        "0.3",
        "--tilt",
        "gt",
        "--theta",
        "1",
        "--eta",
        "1",
        "--check-normalization",
    ]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8(o.stdout).unwrap().trim(), "Σ = 1.000000");
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let (_, data) = setup(dir.path());
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, CONFIG.replace("sigma = 0.5", "sigma = 1.5")).unwrap();
    let out = dir.path().join("o");
    let o = spkmix(&[
        "fit",
        "--config",
        bad.to_str().unwrap(),
        "--data",
        &data,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());

    assert_eq!(spkmix(&["fit"]).status.code(), Some(1));
    assert_eq!(spkmix(&["eppf", "--n", "3", "--sigma", "0", "--tilt", "ns"]).status.code(), Some(1));
    assert_eq!(spkmix(&["--help"]).status.code(), Some(0));
}

#[test]
fn dendro_reads_the_fit_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    fs::write(&m, "1,0.9,0.1\n0.9,1,0.2\n0.1,0.2,1\n").unwrap();
    let o = spkmix(&["dendro", "--coclustering", m.to_str().unwrap(), "--k", "2", "--drop-singletons"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let labels: Vec<&str> = text.lines().skip_while(|l| !l.starts_with("# labels")).skip(1).collect();
    assert_eq!(labels, vec!["0\t0", "1\t0", "2\tNA"]);
}

#[test]
fn predict_kfold_writes_every_point() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, data) = setup(dir.path());
    let out = dir.path().join("p");
    let o = spkmix(&[
        "predict",
        "--config",
        &cfg,
        "--data",
        &data,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "2",
        "--kfold",
        "2",
        "--iterations",
        "300",
        "--burn-in",
        "50",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("predictive.tsv")).unwrap();
    let mut idx: Vec<usize> = text.lines().skip(1).map(|l| l.split('\t').next().unwrap().parse().unwrap()).collect();
    idx.sort();
    assert_eq!(idx, vec![0, 1, 2, 3, 4]);
}
