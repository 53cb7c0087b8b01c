//! End-to-end checks of the command-line surface: exit codes, the fixed
//! CSV schemas, and byte-for-byte reproducibility from the echoed config.

use std::path::Path;
use std::process::{Command, Output};

fn kslab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kslab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_value(out: &Output, key: &str) -> f64 {
    let text = String::from_utf8_lossy(&out.stdout);
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix(&format!("{key} = ")) {
            return rest.trim().parse().unwrap();
        }
    }
    panic!("key `{key}` not in output:\n{text}");
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn criterion_constants_and_rejections() {
    let ok = kslab(&["criterion", "--n", "3", "--m", "1.25", "--mass", "1"]);
    assert_eq!(code(&ok), 0);
    let thr = stdout_value(&ok, "threshold_norm");
    assert!((thr - 1.0802675957077474e3).abs() < 1e-7);
    let fs = stdout_value(&ok, "f_star");
    assert!((fs - 3.550561368189392e4).abs() / fs < 1e-10);

    // the open interval rejects its endpoints, including a decimal
    // approximation of m* that overflows the exponent stack
    let at_star = kslab(&["criterion", "--n", "3", "--m", "1.3333333"]);
    assert_eq!(code(&at_star), 1);
    let msg = String::from_utf8_lossy(&at_star.stderr);
    assert!(msg.contains("admissible"), "{msg}");

    assert_eq!(code(&kslab(&["criterion", "--n", "3", "--m", "1.5"])), 1);
    assert_eq!(code(&kslab(&["criterion", "--n", "2", "--m", "1.1"])), 1);
}

#[test]
fn classify_exit_codes_follow_the_regime() {
    assert_eq!(
        code(&kslab(&["classify", "--scenario", "wide-subcritical"])),
        0
    );
    assert_eq!(
        code(&kslab(&["classify", "--scenario", "heavy-subcritical"])),
        0
    );
    assert_eq!(
        code(&kslab(&[
            "classify",
            "--scenario",
            "moderate-supercritical"
        ])),
        2
    );
    assert_eq!(
        code(&kslab(&["classify", "--scenario", "near-threshold"])),
        3
    );
    assert_eq!(
        code(&kslab(&[
            "classify",
            "--scenario",
            "example1",
            "--K-mult",
            "2"
        ])),
        2
    );
    assert_eq!(
        code(&kslab(&["classify", "--scenario", "no-such-thing"])),
        1
    );
    assert_eq!(
        code(&kslab(&["classify", "--snapshot", "/no/such/file"])),
        1
    );
    assert_eq!(code(&kslab(&["classify"])), 1);
}

#[test]
fn classify_accepts_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rho.txt");
    let built = kslab::scenarios::build_scenario(
        "moderate-supercritical",
        3,
        1.25,
        &kslab::scenarios::ScenarioOptions::default(),
    )
    .unwrap();
    kslab::radial::save_snapshot(&built.rho, &path).unwrap();
    let out = kslab(&["classify", "--snapshot", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    // dimension mismatch is an error
    let bad = kslab(&["classify", "--snapshot", path.to_str().unwrap(), "--n", "4"]);
    assert_eq!(code(&bad), 1);
}

const SERIES_HEADER: &str =
    "t,dt,mass,lm_norm,lcrit_norm,m2,F,F1,F2,entropy_production,dm2dt_formula,dm2dt_measured";

fn read_series(dir: &Path) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(dir.join("series.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), SERIES_HEADER, "schema drifted");
    lines
        .map(|l| {
            let row: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
            assert_eq!(row.len(), 12);
            row
        })
        .collect()
}

#[test]
fn simulate_subcritical_schema_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let out = kslab(&[
        "simulate",
        "--scenario",
        "wide-subcritical",
        "--cells",
        "256",
        "--r-max",
        "12",
        "--t-end",
        "2e-3",
        "--output-every",
        "10",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_series(dir.path());
    assert!(rows.len() >= 2);
    for w in rows.windows(2) {
        assert!(w[1][0] > w[0][0], "t not increasing");
        assert!(w[1][6] <= w[0][6] * (1.0 + 1e-10), "F increased");
    }
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("verdict = GlobalLooking"));

    // re-running from the echoed config reproduces the CSV byte-for-byte
    let dir2 = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.txt");
    let out2 = kslab(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--output-dir",
        dir2.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out2), 0);
    let a = std::fs::read(dir.path().join("series.csv")).unwrap();
    let b = std::fs::read(dir2.path().join("series.csv")).unwrap();
    assert_eq!(a, b, "series.csv not reproducible from config echo");
}

#[test]
fn simulate_supercritical_exits_2_with_falling_m2() {
    let dir = tempfile::tempdir().unwrap();
    let out = kslab(&[
        "simulate",
        "--scenario",
        "moderate-supercritical",
        "--r-max",
        "4",
        "--cells",
        "192",
        "--spacing",
        "geometric",
        "--ratio",
        "1.025",
        "--t-end",
        "5e-3",
        "--output-every",
        "200",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_series(dir.path());
    for w in rows.windows(2) {
        assert!(w[1][5] < w[0][5], "m2 not strictly decreasing");
    }
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("verdict = BlowUpDetected"));
}

#[test]
fn simulate_truncation_abort_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = kslab(&[
        "simulate",
        "--scenario",
        "wide-subcritical",
        "--cells",
        "64",
        "--r-max",
        "3",
        "--t-end",
        "1e-3",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("tail mass"), "{msg}");
}

#[test]
fn simulate_rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.txt");
    std::fs::write(&cfg, "cells = 64\nwarp_factor = 9\n").unwrap();
    let out = kslab(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown config key"));
}

#[test]
fn simulate_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("base.txt");
    std::fs::write(
        &cfg,
        "scenario = wide-subcritical\ncells = 128\nr_max = 12\nt_end = 5e-4\n",
    )
    .unwrap();
    let out = kslab(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--cells",
        "64",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let echo = std::fs::read_to_string(dir.path().join("config.txt")).unwrap();
    assert!(echo.contains("cells = 64"), "{echo}");
}

#[test]
fn example1_report_and_errors() {
    let out = kslab(&["example1", "--n", "3", "--m", "1.25", "--eps0", "1"]);
    assert_eq!(code(&out), 0);
    let k1 = stdout_value(&out, "k1");
    assert!((k1 - 1.8811592727915507e6).abs() / k1 < 1e-9);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("norm_condition_at_2k0 = true"));
    assert!(text.contains("energy_condition_at_2k0 = true"));

    let higher = kslab(&["example1", "--n", "4", "--m", "1.4", "--eps0", "0.5"]);
    assert_eq!(code(&higher), 0);
    assert!(stdout_value(&higher, "k0").is_finite());

    assert_eq!(code(&kslab(&["example1", "--eps0", "0"])), 1);
    assert_eq!(code(&kslab(&["example1", "--m", "1.9"])), 1);
}

#[test]
fn sweep_empty_grid_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = kslab(&["sweep", "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(dir.path().join("phase.csv")).unwrap();
    assert_eq!(text, "amp,width,mass,lcrit_norm,F0,regime,verdict\n");
}

#[test]
fn sweep_fixed_mass_regime_depends_on_width_not_mass() {
    let dir = tempfile::tempdir().unwrap();
    let out = kslab(&[
        "sweep",
        "--masses",
        "150",
        "--widths",
        "0.3,0.6,1.2,2.5,5",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(dir.path().join("phase.csv")).unwrap();
    let mut stages = Vec::new();
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let mass: f64 = cols[2].parse().unwrap();
        assert!((mass - 150.0).abs() < 1e-6 * 150.0, "mass should be fixed");
        stages.push(match cols[5] {
            "BlowUp" => 0,
            "OutsideTheoremScope" => 1,
            "GlobalExistence" => 2,
            other => panic!("unexpected regime {other}"),
        });
    }
    // same mass everywhere, both extreme regimes present, and the regime
    // moves monotonically with width: the separator is the norm, not mass
    assert!(stages.contains(&0) && stages.contains(&2), "{stages:?}");
    for w in stages.windows(2) {
        assert!(w[1] >= w[0], "regime not monotone in width: {stages:?}");
    }
}

#[test]
fn simulate_inconclusive_exits_3() {
    // capping the step count before t_end leaves the run without a verdict
    let dir = tempfile::tempdir().unwrap();
    let out = kslab(&[
        "simulate",
        "--scenario",
        "wide-subcritical",
        "--cells",
        "64",
        "--r-max",
        "12",
        "--t-end",
        "1.0",
        "--max-steps",
        "5",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("verdict = Inconclusive"));
}

#[test]
fn sweep_records_per_cell_failures_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let out = kslab(&[
        "sweep",
        "--masses",
        "1",
        "--widths",
        "0,0.5",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(dir.path().join("phase.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().any(|r| r.contains(",error,")), "{text}");
    assert!(rows.iter().any(|r| r.contains("GlobalExistence")), "{text}");
}

#[test]
fn sweep_with_simulation_is_consistent_with_classification() {
    let dir = tempfile::tempdir().unwrap();
    let out = kslab(&[
        "sweep",
        "--masses",
        "120,160,200",
        "--widths",
        "0.08,0.1,8",
        "--simulate",
        "--sim-t-end",
        "2e-3",
        "--jobs",
        "3",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("phase.csv")).unwrap();
    let mut saw_global = false;
    let mut saw_blowup = false;
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let (regime, verdict) = (cols[5], cols[6]);
        match regime {
            "GlobalExistence" => {
                saw_global = true;
                assert_eq!(verdict, "GlobalLooking", "{line}");
            }
            "BlowUp" => {
                saw_blowup = true;
                assert_ne!(verdict, "GlobalLooking", "{line}");
            }
            _ => {}
        }
    }
    assert!(
        saw_global && saw_blowup,
        "fixture must span both regimes:\n{text}"
    );
}
