use std::path::Path;
use std::process::{Command, Output};

use oam_memsim::analysis::{expected_chsh_counts, expected_counts, ChshAngles, CountTable16, TomographyResult};
use oam_memsim::config::RunConfig;
use oam_memsim::hilbert::{bell_state, werner_state, BellKind};
use oam_memsim::memory::EfficiencyFit;
use oam_memsim::oam_optics::ArmPaths;
use oam_memsim::report::{analyze_tomo, AnalysisOptions};

fn oamsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oamsim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_RUN: &str = "seed = 21\n[source]\nwindow_count = 20000\n[plan]\ncounts_per_setting = 50000.0\n";

#[test]
fn simulate_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SMALL_RUN).unwrap();
    for out in ["a", "b"] {
        let o = oamsim(&["simulate", "--config", "run.toml", "--out", out], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for rel in ["pre/tomo16.csv", "post/chsh.csv", "post/visibility_01.csv", "pre/timestamps.txt"] {
        let a = std::fs::read(dir.path().join("a").join(rel)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(rel)).unwrap();
        assert_eq!(a, b, "{rel}");
    }
    let o = oamsim(&["simulate", "--config", "run.toml", "--seed", "22", "--out", "c"], dir.path());
    assert!(o.status.success());
    let a = std::fs::read(dir.path().join("a/pre/tomo16.csv")).unwrap();
    let c = std::fs::read(dir.path().join("c/pre/tomo16.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn cli_tomography_matches_in_process() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SMALL_RUN).unwrap();
    assert!(oamsim(&["simulate", "--config", "run.toml", "--out", "r"], dir.path()).status.success());
    let o = oamsim(
        &["analyze", "tomo", "r/post/tomo16.csv", "--resamples", "0", "--out", "post.txt"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("fidelity"));

    let table = CountTable16::read(&dir.path().join("r/post/tomo16.csv")).unwrap();
    let opts = AnalysisOptions {
        resamples: 0,
        ..Default::default()
    };
    let direct = analyze_tomo(&table, None, &opts).unwrap();
    let text = std::fs::read_to_string(dir.path().join("post.txt")).unwrap();
    assert_eq!(text, direct.to_text());
    let back = TomographyResult::from_text(&text, "post.txt").unwrap();
    assert_eq!(back.rho.matrix(), direct.rho.matrix());
}

#[test]
fn report_summarises_run() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), SMALL_RUN).unwrap();
    assert!(oamsim(&["simulate", "--config", "run.toml", "--out", "r"], dir.path()).status.success());
    let o = oamsim(&["report", "r", "--resamples", "10"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("r/report.txt")).unwrap();
    assert_eq!(text, stdout(&o));
    assert!(text.contains("calibration"));
    assert!(text.contains("## pre-storage") && text.contains("## post-storage"));
    assert!(text.contains("F2"));
}

#[test]
fn noiseless_bell_table_gives_unit_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let t = expected_counts(&bell_state(BellKind::PhiPlus).density(), 1e4).unwrap();
    t.write(&dir.path().join("bell.csv")).unwrap();
    let o = oamsim(&["analyze", "tomo", "bell.csv", "--resamples", "0"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("1.0000"), "{}", stdout(&o));
}

#[test]
fn chsh_at_threshold_werner() {
    let dir = tempfile::tempdir().unwrap();
    let w = werner_state(std::f64::consts::FRAC_1_SQRT_2, &bell_state(BellKind::PhiPlus)).unwrap();
    let c = expected_chsh_counts(&w, ChshAngles::default(), &ArmPaths::default(), 1e5).unwrap();
    c.write(&dir.path().join("chsh.csv")).unwrap();
    let o = oamsim(&["analyze", "chsh", "chsh.csv", "--resamples", "50", "--out", "s.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("S: 2.0000"), "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(csv.starts_with("e_ab,e_abp,e_apb,e_apbp,s,s_std\n"));
}

#[test]
fn fit_memory_recovers_curve() {
    let dir = tempfile::tempdir().unwrap();
    let f = EfficiencyFit::default();
    let mut text = String::from("tau_ns,efficiency\n");
    for k in 0..12 {
        let t = 67.0 + 150.0 * k as f64;
        text.push_str(&format!("{t},{}\n", f.model(t)));
    }
    std::fs::write(dir.path().join("eff.csv"), text).unwrap();
    let o = oamsim(&["analyze", "fit-memory", "eff.csv", "--out", "fit.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let fit = std::fs::read_to_string(dir.path().join("fit.csv")).unwrap();
    let vals: Vec<f64> = fit.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((vals[0] + 0.08).abs() < 1e-4);
    assert!((vals[1] - 0.38).abs() < 1e-4);
    assert!((vals[2] - 67.0).abs() < 1e-9);
    assert!((vals[3] - 1434.0).abs() < 0.1);
}

#[test]
fn correlate_writes_histogram() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "seed = 3\n[source]\nwindow_count = 200000\npair_rate_per_window = 0.2\n[plan]\nstages = [\"pre\"]\n",
    )
    .unwrap();
    assert!(oamsim(&["simulate", "--config", "run.toml", "--out", "r"], dir.path()).status.success());
    let o = oamsim(&["analyze", "correlate", "r/pre/timestamps.txt", "--out", "h.csv"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("g12"));
    let h = std::fs::read_to_string(dir.path().join("h.csv")).unwrap();
    assert!(h.contains("delay_ns,count"));
    let o = oamsim(&["analyze", "hbt", "r/pre/timestamps.txt"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("alpha"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();

    std::fs::write(p.join("bad.toml"), "seed = 1\n[source]\npair_rate_per_window = -1.0\n").unwrap();
    let o = oamsim(&["simulate", "--config", "bad.toml"], p);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("source.pair_rate_per_window"), "{}", stderr(&o));

    std::fs::write(p.join("typo.toml"), "seed = 1\n[plan]\ncounts_per_settng = 3.0\n").unwrap();
    let o = oamsim(&["simulate", "--config", "typo.toml"], p);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("plan"), "{}", stderr(&o));

    let o = oamsim(&["simulate"], p);
    assert_eq!(o.status.code(), Some(1));

    std::fs::write(p.join("broken.csv"), "#integration_time_s=1\narm_a\\arm_b,L,R,L+R,L-iR\nL,1,2,x,4\n").unwrap();
    let o = oamsim(&["analyze", "tomo", "broken.csv"], p);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("broken.csv:3:"), "{}", stderr(&o));

    CountTable16::new([[0.0; 4]; 4], 1.0).unwrap().write(&p.join("zero.csv")).unwrap();
    let o = oamsim(&["analyze", "tomo", "zero.csv"], p);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = oamsim(&["no-such-command"], p);
    assert_eq!(o.status.code(), Some(1));
    let o = oamsim(&["--help"], p);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn minimal_config_uses_documented_defaults() {
    let cfg = RunConfig::from_toml("seed = 5\n", None).unwrap();
    assert_eq!(cfg.storage_time_ns, 150.0);
    assert_eq!(cfg.source.source_visibility, 0.885);
    assert_eq!(cfg.memory.efficiency, EfficiencyFit::default());
}
