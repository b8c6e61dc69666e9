use std::path::Path;

use mdiqkd::cli::main_with;
use mdiqkd::error::exit;
use mdiqkd::report::Table;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["mdiqkd"];
    full.extend_from_slice(args);
    let code = main_with(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn figure1_single_point_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        "[channel]\ntotal_loss_db = 20.0\nbackground_error = 0.0\n[figure1]\npoints = 1\nc0_sq_min = 0.3\nc0_sq_max = 0.3\n",
    );
    let out = dir.path().to_string_lossy().into_owned();
    let (code, _, err) = run(&["--config", &cfg, "--out", &out, "figure1"]);
    assert_eq!(code, exit::OK, "{err}");
    let t = Table::read(&dir.path().join("figure1.csv")).unwrap();
    assert_eq!(t.rows.len(), 1);

    let mut scenario = mdiqkd::config::ScenarioConfig::load(Path::new(&cfg)).unwrap();
    scenario.output.dir = dir.path().into();
    let rows = mdiqkd::commands::figure1(&scenario).unwrap();
    assert_eq!(t.column("c0_sq").unwrap(), vec![rows[0].c0_sq]);
    assert_eq!(t.column("e_p").unwrap(), vec![rows[0].e_p]);
    assert_eq!(t.column("e_p_baseline").unwrap(), vec![rows[0].e_p_baseline]);
}

#[test]
fn config_errors_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[channel]\ndark_cuont = 1e-6\n");
    let (code, _, err) = run(&["--config", &cfg, "show-config"]);
    assert_eq!(code, exit::CONFIG);
    assert!(err.contains("dark_cuont"), "{err}");

    let (code, _, _) = run(&["--epsilon", "2", "show-config"]);
    assert_eq!(code, exit::CONFIG);
    let (code, _, _) = run(&["--no-such-flag", "show-config"]);
    assert_eq!(code, exit::CONFIG);
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", "seed = 3\n[finite]\ntotal_pairs = 1000\n");
    let (code, out, _) = run(&["--config", &cfg, "--seed", "9", "--pairs", "77", "--epsilon", "1e-9", "show-config"]);
    assert_eq!(code, exit::OK);
    let back = mdiqkd::config::ScenarioConfig::from_toml(&out).unwrap();
    assert_eq!(back.seed, 9);
    assert_eq!(back.finite.total_pairs, 77);
    assert_eq!(back.finite.epsilon_total, 1e-9);
}

#[test]
fn malformed_counts_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let counts = write(
        dir.path(),
        "c.csv",
        "l_index,r_index,n,m,N_sent,n_success\n0,0,0,0,10,1\n0,0,0,one,10,1\n",
    );
    let out = dir.path().to_string_lossy().into_owned();
    let (code, _, err) = run(&["--out", &out, "estimate", "--counts", &counts]);
    assert_eq!(code, exit::DATA);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    let (code, _, err) = run(&["--out", &out, "--seed", "21", "simulate"]);
    assert_eq!(code, exit::OK, "{err}");
    let counts = dir.path().join("counts.csv");
    let counts_arg = counts.to_string_lossy().into_owned();

    let (code, report, err) = run(&["--out", &out, "estimate", "--counts", &counts_arg]);
    assert_eq!(code, exit::OK, "{err}");
    assert!(report.contains("key rate"));
    let summary = Table::read(&dir.path().join("estimate_summary.csv")).unwrap();
    let i = summary.rows.iter().position(|r| r[0] == "key_rate").unwrap();
    assert!(summary.rows[i][1].parse::<f64>().unwrap() > 0.0);
    let bounds = Table::read(&dir.path().join("estimate_bounds.csv")).unwrap();
    assert_eq!(bounds.rows.len(), 11);
    assert!(bounds.column("applications").unwrap().iter().all(|a| *a == 32.0));

    // drop the (nu, nu) pair
    let text = std::fs::read_to_string(&counts).unwrap();
    let kept: Vec<&str> = text.lines().filter(|l| !l.starts_with("1,1,")).collect();
    let partial = write(dir.path(), "partial.csv", &(kept.join("\n") + "\n"));
    let (code, _, err) = run(&["--out", &out, "estimate", "--counts", &partial]);
    assert_eq!(code, exit::DATA);
    assert!(err.contains("(nu, nu)"), "{err}");
}

#[test]
fn too_little_data_is_no_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_string_lossy().into_owned();
    let (code, _, err) = run(&["--out", &out, "--pairs", "1000000000", "simulate"]);
    assert_eq!(code, exit::OK, "{err}");
    let counts = dir.path().join("counts.csv").to_string_lossy().into_owned();
    let (code, _, err) = run(&["--out", &out, "estimate", "--counts", &counts]);
    assert_eq!(code, exit::NO_KEY, "{err}");
}

#[test]
fn asymptotic_scenario_cannot_be_sampled() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", "[finite]\ntotal_pairs = 0\n");
    let out = dir.path().to_string_lossy().into_owned();
    let (code, _, err) = run(&["--config", &cfg, "--out", &out, "simulate"]);
    assert_eq!(code, exit::CONFIG);
    assert!(err.contains("total_pairs"), "{err}");
}

#[test]
fn shipped_scenarios_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let c = mdiqkd::config::ScenarioConfig::load(&p).unwrap();
            c.validate().unwrap();
            seen += 1;
        }
    }
    assert_eq!(seen, 3);
}
