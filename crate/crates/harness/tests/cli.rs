use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bearing-obs"));
    c.env_remove("BEARING_OBS_SEED");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(c: &mut Command) -> (i32, String, String) {
    let Output {
        status,
        stdout,
        stderr,
    } = c.output().unwrap();
    (
        status.code().unwrap(),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

fn write_cfg(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn simulate_cfg(dir: &TempDir, cfg: &Path) -> (i32, String, String) {
    run(bin()
        .args(["simulate", "--config"])
        .arg(cfg)
        .arg("--out-dir")
        .arg(dir.path()))
}

fn noisefree_trace(dir: &TempDir) -> PathBuf {
    let (code, _, err) = run(bin().args(["reproduce-paper", "--out-dir"]).arg(dir.path()));
    assert_eq!(code, 0, "{err}");
    dir.path().join("noisefree/trace.csv")
}

#[test]
fn bundled_noisefree_config_runs() {
    let dir = TempDir::new().unwrap();
    let (code, out, err) = simulate_cfg(&dir, &configs().join("reference_noisefree.cfg"));
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("final |ahat - a|"));
    assert!(out.contains("bound violations   0"), "{out}");
    assert!(dir.path().join("reference_noisefree.csv").exists());
}

#[test]
fn validation_errors_exit_2_and_name_the_field() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("gains.k = -1.0\n", "gains.k"),
        ("x0 = [0.0, 0.0, 0.0]\n", "x0"),
        ("gains.kk = 1.0\n", "kk"),
        ("h = 0.0\n", "h"),
        (
            "noise.kind = \"uniform_position\"\nnoise.half_width = -0.1\n",
            "noise.half_width",
        ),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let cfg = write_cfg(&dir, &format!("bad{i}.cfg"), text);
        let (code, _, err) = simulate_cfg(&dir, &cfg);
        assert_eq!(code, 2, "{text}: {err}");
        assert!(err.contains(needle), "{text}: {err}");
    }
    let (code, _, err) = simulate_cfg(&dir, &configs().join("missing.cfg"));
    assert_eq!(code, 2, "{err}");
}

#[test]
fn diverging_gain_is_a_runtime_fault() {
    let dir = TempDir::new().unwrap();
    let cfg = write_cfg(&dir, "stiff.cfg", "gains.k = 1.0e6\nduration = 1.0\n");
    let (code, _, err) = simulate_cfg(&dir, &cfg);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("t = "), "{err}");
}

#[test]
fn reproduce_is_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        let (code, _, err) = run(bin()
            .args(["reproduce-paper", "--variant", "noisefree", "--out-dir"])
            .arg(d.path()));
        assert_eq!(code, 0, "{err}");
    }
    for f in [
        "trace.csv",
        "paths.csv",
        "errors.csv",
        "bias.csv",
        "scenario.cfg",
    ] {
        let x = fs::read(a.path().join("noisefree").join(f)).unwrap();
        let y = fs::read(b.path().join("noisefree").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn reproduced_bias_file_layout() {
    let dir = TempDir::new().unwrap();
    noisefree_trace(&dir);
    let text = fs::read_to_string(dir.path().join("noisefree/bias.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,ahat_1,ahat_2,ahat_3,a_1,a_2,a_3");
    assert_eq!(lines.count(), 10_001);
}

#[test]
fn unknown_variant_exits_2() {
    let (code, _, _) = run(bin().args(["reproduce-paper", "--variant", "foggy"]));
    assert_eq!(code, 2);
}

#[test]
fn seed_precedence_flag_env_config() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("reference_noisy.cfg");
    let y_row = |sub: &str, env: Option<&str>, flag: Option<&str>| -> String {
        let out = dir.path().join(sub);
        let mut c = bin();
        c.args(["simulate", "--config"])
            .arg(&cfg)
            .arg("--out-dir")
            .arg(&out)
            .args(["--format", "csv"]);
        if let Some(e) = env {
            c.env("BEARING_OBS_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        let (code, _, err) = run(&mut c);
        assert_eq!(code, 0, "{err}");
        let text = fs::read_to_string(out.join("reference_noisy.csv")).unwrap();
        text.lines().nth(2).unwrap().to_string()
    };
    let config_seed = y_row("a", None, None);
    let env_seed = y_row("b", Some("7"), None);
    let flag_seed = y_row("c", Some("7"), Some("1"));
    assert_ne!(config_seed, env_seed);
    assert_eq!(config_seed, flag_seed);

    let (code, _, err) = run(bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out-dir")
        .arg(dir.path())
        .env("BEARING_OBS_SEED", "seven"));
    assert_eq!(code, 2);
    assert!(err.contains("BEARING_OBS_SEED"));
}

#[test]
fn pe_check_exit_codes() {
    let dir = TempDir::new().unwrap();
    let trace = noisefree_trace(&dir);
    let (code, out, err) =
        run(bin()
            .arg("pe-check")
            .arg(&trace)
            .args(["--delta", "12.57", "--epsilon", "0.05"]));
    assert_eq!(code, 0, "{err}");
    let rep: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(rep["passes_integral"], true);

    let (code, _, err) = simulate_cfg(&dir, &configs().join("radial.cfg"));
    assert_eq!(code, 0, "{err}");
    let (code, _, _) = run(bin()
        .arg("pe-check")
        .arg(dir.path().join("radial.csv"))
        .args(["--delta", "5"]));
    assert_eq!(code, 1);

    let (code, _, _) = run(bin().arg("pe-check").arg(&trace).args(["--delta", "500"]));
    assert_eq!(code, 2);

    let junk = dir.path().join("junk.csv");
    fs::write(&junk, "t,x\n0,1\n").unwrap();
    let (code, _, _) = run(bin().arg("pe-check").arg(&junk));
    assert_eq!(code, 2);
    let (code, _, _) = run(bin().arg("pe-check").arg(dir.path().join("absent.csv")));
    assert_eq!(code, 2);
}

#[test]
fn analyze_compliant_truncated_and_corrupted() {
    let dir = TempDir::new().unwrap();
    let trace = noisefree_trace(&dir);
    let (code, out, err) = run(bin().arg("analyze").arg(&trace));
    assert_eq!(code, 0, "{out}{err}");
    assert!(out.contains("result: PASS"));

    let text = fs::read_to_string(&trace).unwrap();
    let truncated: Vec<&str> = text.lines().take(3002).collect();
    let short = dir.path().join("short.csv");
    fs::write(&short, truncated.join("\n") + "\n").unwrap();
    let (code, out, err) = run(bin().arg("analyze").arg(&short));
    assert_eq!(code, 0, "{out}{err}");
    assert!(out.contains("insufficient horizon"), "{out}");

    // M_11 column is the 17th; make det M negative at one sample
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<String> = lines[2001].split(',').map(String::from).collect();
    fields[16] = "-5.0000000000000000e0".into();
    lines[2001] = fields.join(",");
    let bad = dir.path().join("corrupt.csv");
    fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let (code, out, err) = run(bin()
        .arg("analyze")
        .arg(&bad)
        .args(["--config"])
        .arg(configs().join("reference_noisefree.cfg")));
    assert_eq!(code, 1, "{out}{err}");
    assert!(out.contains("DetPositive"), "{out}");
    assert!(out.contains("t = 20"), "{out}");
}

#[test]
fn analyze_json_trace_uses_embedded_scenario() {
    let dir = TempDir::new().unwrap();
    let (code, _, err) = run(bin()
        .args(["simulate", "--format", "json", "--out-dir"])
        .arg(dir.path()));
    assert_eq!(code, 0, "{err}");
    let (code, out, err) = run(bin()
        .arg("analyze")
        .arg(dir.path().join("trace.json"))
        .args(["--format", "json"]));
    assert_eq!(code, 0, "{out}{err}");
    let rep: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(rep["det_floor_theory"], 27.0);
    assert_eq!(rep["late_time"], "insufficient horizon");
    assert_eq!(rep["violations"].as_array().unwrap().len(), 0);
}

#[test]
fn help_exits_0() {
    let (code, out, _) = run(bin().arg("--help"));
    assert_eq!(code, 0);
    for sub in ["simulate", "reproduce-paper", "pe-check", "analyze"] {
        assert!(out.contains(sub));
    }
}
