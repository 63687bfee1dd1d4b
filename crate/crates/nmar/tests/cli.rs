use std::path::Path;
use std::process::Command;

use nmar::config::ExperimentConfig;
use nmar::core::data::{DataSplit, Observation};
use nmar::core::plugin::{EstimatorKind, Regressor};
use nmar::core::synth::{generate, sample_covariates};
use nmar::experiment::{fit_estimator, run_experiment};
use nmar::io::{read_csv, read_dataset, write_csv, write_dataset};

const CONFIG: &str = r#"
seed = 7
estimators = ["select_phi", "ht_breve", "complete_case"]
n_grid = [200, 400, 800]
replications = 3
n_eval = 2000

[model]
noise = 0.6
m.kind = "sine"
m.amp = 0.3

[bandwidth]
h0 = 0.5
"#;

fn nmar() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nmar"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

#[test]
fn csv_round_trip_is_exact() {
    let cfg = ExperimentConfig::from_toml_str(CONFIG).unwrap();
    let (ds, _) = generate(&cfg.model().unwrap(), 100, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    write_csv(&ds, &path).unwrap();
    assert_eq!(read_csv(&path, &[0], 1.0).unwrap(), ds);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", CONFIG);
    let bad = write(dir.path(), "bad.toml", &format!("replications = 0\n{CONFIG}"));
    let data = dir.path().join("data.csv");
    assert_eq!(code(nmar().args(["simulate", "--n", "300", "--config"]).arg(&good).arg("--out").arg(&data)), 0);
    assert_eq!(code(nmar().args(["simulate", "--n", "300", "--config"]).arg(&bad)), 1);
    assert_eq!(code(nmar().args(["simulate", "--config"]).arg(dir.path().join("absent.toml")).args(["--n", "3"])), 1);
    assert_eq!(code(nmar().arg("no-such-command")), 1);
    assert_eq!(code(nmar().args(["fit", "--estimator", "magic", "--config"]).arg(&good).arg("--data").arg(&data)), 1);
    assert_eq!(code(nmar().args(["fit", "--config"]).arg(&good).arg("--data").arg(dir.path().join("absent.csv"))), 2);
    let broken = write(dir.path(), "broken.csv", "x1,y,delta\n0.5,,1\n");
    let out = nmar().args(["fit", "--config"]).arg(&good).arg("--data").arg(&broken).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1"));

    let preds = dir.path().join("pred.csv");
    assert_eq!(code(nmar().args(["fit", "--estimator", "ht_tilde", "--config"]).arg(&good).arg("--data").arg(&data).arg("--out").arg(&preds)), 0);
    let text = std::fs::read_to_string(&preds).unwrap();
    assert!(text.starts_with("x1,m_hat\n"));
    assert_eq!(text.lines().count(), 301);

    let risks = nmar().args(["select-phi", "--criterion", "breve", "--config"]).arg(&good).arg("--data").arg(&data).output().unwrap();
    assert_eq!(risks.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&risks.stdout).starts_with("phi_index,gamma_or_tag,risk,variant\n"));
}

#[test]
fn cover_check_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.toml", &format!("cover.M = 1.0\n{CONFIG}"));
    assert_eq!(code(nmar().args(["cover-check", "--n", "400", "--config"]).arg(&ok)), 0);
    // 5 gamma steps on [-1, 1] cannot be within 0.05 of every exp(gamma y)
    let coarse = write(dir.path(), "coarse.toml", &format!("cover.kind = \"tabulated\"\ncover.epsilon = 0.05\ncover.steps = [5, 1]\n{CONFIG}"));
    assert_eq!(code(nmar().args(["cover-check", "--config"]).arg(&coarse)), 2);
}

#[test]
fn classify_reports_excess() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "n_eval = 5000\n[model]\ntask = \"classification\"\nm.kind = \"linear\"\nm.weights = [1.0]\n[bandwidth]\nh0 = 0.5\n",
    );
    let out = nmar().args(["classify", "--n", "1000", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let line = text.lines().nth(1).unwrap();
    assert!(line.starts_with("select_phi,1000,"));
    let bayes: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
    assert_eq!(bayes, 0.25);
    let reg = write(dir.path(), "r.toml", CONFIG);
    assert_eq!(code(nmar().args(["classify", "--n", "100", "--config"]).arg(&reg)), 1);
}

#[test]
fn rates_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", CONFIG);
    let (a, b, svg) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("r.svg"));
    assert_eq!(code(nmar().arg("rates").arg("--config").arg(&cfg).arg("--out").arg(&a).arg("--plot").arg(&svg)), 0);
    let threaded = write(dir.path(), "t.toml", &format!("threads = 2\n{CONFIG}"));
    assert_eq!(code(nmar().arg("rates").arg("--config").arg(&threaded).arg("--out").arg(&b)), 0);
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("estimator,n,rep,lp_error,phi_index,runtime_ms,"));
    assert_eq!(text.lines().filter(|l| l.contains(",-1,")).count(), 9);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));
}

#[test]
fn estimators_only_see_the_dataset() {
    // The dataset carries no hidden responses; a copy rebuilt from its CSV,
    // where they cannot exist, gives bit-identical predictions.
    let cfg = ExperimentConfig::from_toml_str(CONFIG).unwrap();
    let model = cfg.model().unwrap();
    let (ds, truth) = generate(&model, 400, 11).unwrap();
    for (o, &y) in ds.observations().iter().zip(truth.y()) {
        match o.y {
            Some(v) => assert_eq!(v, y),
            None => assert_eq!(o, &Observation::missing(o.x.clone())),
        }
    }
    let mut buf = Vec::new();
    write_dataset(&mut buf, &ds).unwrap();
    let rebuilt = read_dataset(buf.as_slice(), &[0], 1.0).unwrap();
    let split = DataSplit::random(400, 0.5, 2).unwrap();
    let xs = sample_covariates(&model, 500, 5);
    for kind in [EstimatorKind::SelectPhi, EstimatorKind::HtTilde, EstimatorKind::HtBreve, EstimatorKind::CompleteCase] {
        let a = fit_estimator(&cfg, kind, &ds, &split).unwrap().predict_batch(&xs, 1);
        let b = fit_estimator(&cfg, kind, &rebuilt, &split).unwrap().predict_batch(&xs, 1);
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn library_and_cli_agree() {
    let cfg = ExperimentConfig::from_toml_str(CONFIG).unwrap();
    let lib = run_experiment(&cfg).unwrap().to_csv_string().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "c.toml", CONFIG);
    let out = nmar().arg("rates").arg("--config").arg(&path).output().unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), lib);
}
