use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rlpp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rlpp")).args(args).env("RLPP_LOG", "warn").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn track_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../tracks/oval.csv").canonicalize().unwrap()
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    write_config_eval(dir, "laps = 2\n", extra)
}

fn write_config_eval(dir: &Path, eval: &str, extra: &str) -> PathBuf {
    let p = dir.join("c.toml");
    let text = format!(
        "[track]\npath = \"{}\"\n[pp]\nalpha_v = 0.6\n[eval]\n{eval}[sac]\nhidden = [8, 8]\nbatch_size = 16\ntotal_steps = 300\ncheckpoint_every = 0\n{extra}",
        track_path().display()
    );
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn eval_pp_writes_results_and_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("pp");
    let o = rlpp(&["eval", "--controller", "pp", "--laps", "3", "--config", s(&cfg), "--out", s(&out), "--alpha-v", "0.65"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("3 laps"));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("controller,t_mean,t_std,t_min,t_max,d_mean,d_std,cpu_mean_ms,cpu_std_ms,laps,violations"));
    let eff: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("effective_config.json")).unwrap()).unwrap();
    assert_eq!(eff["pp"]["alpha_v"], 0.65);
    assert_eq!(eff["eval"]["laps"], 3);
    assert!(out.join("trajectory.svg").is_file() && out.join("lap_03.csv").is_file());
}

#[test]
fn same_seed_same_laps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert!(rlpp(&["eval", "--config", s(&cfg), "--out", s(out), "--seed", "3"]).status.success());
    }
    assert_eq!(fs::read(a.join("laps.csv")).unwrap(), fs::read(b.join("laps.csv")).unwrap());
    assert_eq!(fs::read(a.join("lap_01.csv")).unwrap(), fs::read(b.join("lap_01.csv")).unwrap());
}

#[test]
fn missing_track_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[track]\npath = \"no_such_track.csv\"\n").unwrap();
    let o = rlpp(&["eval", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("no_such_track.csv"), "{}", stderr(&o));
}

#[test]
fn parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[pp]\nnot_a_key = 1\n");
    assert_eq!(rlpp(&["eval", "--config", s(&cfg)]).status.code(), Some(2));
    fs::write(&cfg, "[track\npath = 1").unwrap();
    assert_eq!(rlpp(&["eval", "--config", s(&cfg)]).status.code(), Some(2));
    assert_eq!(rlpp(&["eval", "--bogus-flag"]).status.code(), Some(2));
}

#[test]
fn out_of_range_values_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = rlpp(&["eval", "--config", s(&cfg), "--alpha-rl", "-1", "--out", s(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn controller_names_are_checked() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("x");
    assert_eq!(rlpp(&["eval", "--config", s(&cfg), "--out", s(&out), "--controller", "mpc"]).status.code(), Some(3));
    assert_eq!(rlpp(&["eval", "--config", s(&cfg), "--out", s(&out), "--controller", "rlpp"]).status.code(), Some(3));
    let o = rlpp(&["eval", "--config", s(&cfg), "--out", s(&out), "--controller", "rlpp", "--checkpoint", "missing.json"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("missing.json"));
}

#[test]
fn compare_reference_means() {
    let dir = tempfile::tempdir().unwrap();
    let header = "controller,t_mean,t_std,t_min,t_max,d_mean,d_std,cpu_mean_ms,cpu_std_ms,laps,violations\n";
    let a = dir.path().join("pp.csv");
    let b = dir.path().join("rlpp.csv");
    fs::write(&a, format!("{header}pp,14.3464,0,14.3464,14.3464,0,0,0,0,10,0\n")).unwrap();
    fs::write(&b, format!("{header}rlpp,13.6023,0,13.6023,13.6023,0,0,0,0,10,0\n")).unwrap();
    let o = rlpp(&["compare", "--a", s(&a), "--b", s(&b), "--real-a", "14.95", "--real-b", "13.890"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let imp: f64 = text.lines().find_map(|l| l.strip_prefix("improvement ")).unwrap().trim_end_matches('%').parse().unwrap();
    assert!((imp - 5.2).abs() < 0.1, "{imp}");
    let gap: f64 = text.lines().find_map(|l| l.strip_prefix("sim_gap_a ")).unwrap().trim_end_matches('%').parse().unwrap();
    assert!((gap - 4.207).abs() < 0.01, "{gap}");
}

#[test]
fn track_check_prints_geometry() {
    let o = rlpp(&["track", "check", "--track", s(&track_path())]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("length"));
    let o = rlpp(&["track", "check", "--track", "absent.csv"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn profile_writes_raceline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = dir.path().join("p");
    assert!(rlpp(&["track", "profile", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let text = fs::read_to_string(out.join("raceline.csv")).unwrap();
    assert!(text.starts_with("s_m,x_m,y_m,psi_rad,kappa_radpm,vx_mps"));
}

#[test]
fn train_eval_export_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let tr = dir.path().join("train");
    let o = rlpp(&["train", "--config", s(&cfg), "--out", s(&tr), "--steps", "400"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = fs::read_to_string(tr.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("step,episode,ep_reward,ep_len,lap_time,critic_loss,actor_loss,alpha"));
    let ck = tr.join("checkpoint.json");
    assert!(ck.is_file());

    let ev = dir.path().join("eval");
    let o = rlpp(&["eval", "--config", s(&cfg), "--out", s(&ev), "--controller", "rlpp", "--checkpoint", s(&ck), "--alpha-rl", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pp = dir.path().join("pp");
    assert!(rlpp(&["eval", "--config", s(&cfg), "--out", s(&pp)]).status.success());
    // a zero residual gain reproduces the baseline exactly
    assert_eq!(fs::read(ev.join("laps.csv")).unwrap(), fs::read(pp.join("laps.csv")).unwrap());

    let ex = dir.path().join("export");
    let o = rlpp(&["export", "--config", s(&cfg), "--run", s(&ev.join("run.json")), "--out", s(&ex)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["lap_01.csv", "lap_02.csv", "laps.csv", "trajectory.svg", "velocity.svg", "effective_config.json"] {
        assert!(ex.join(f).is_file(), "{f}");
    }
    assert_eq!(fs::read(ex.join("lap_01.csv")).unwrap(), fs::read(ev.join("lap_01.csv")).unwrap());

    let mut bad = fs::read_to_string(&ck).unwrap();
    bad.truncate(bad.len() / 2);
    let broken = dir.path().join("broken.json");
    fs::write(&broken, bad).unwrap();
    let o = rlpp(&["eval", "--config", s(&cfg), "--out", s(&ev), "--controller", "rlpp", "--checkpoint", s(&broken)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn parallel_eval_uses_seed_subdirectories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config_eval(dir.path(), "laps = 1\nrandomize_friction = true\n", "");
    let out = dir.path().join("par");
    let o = rlpp(&["eval", "--config", s(&cfg), "--out", s(&out), "--parallel", "3", "--seed", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for k in 10..13 {
        assert!(out.join(format!("seed_{k}")).join("laps.csv").is_file());
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}
