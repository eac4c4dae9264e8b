use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn sim(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sandman-sim"));
    c.args(args).env_remove("SANDMAN_SIM_THREADS");
    for (k, v) in envs {
        c.env(k, v);
    }
    c.output().expect("spawn sandman-sim")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "plot = true\n[sweep]\nmax_frames = 16\nmin_bit_errors = 20\nbatch_frames = 8\n";

#[test]
fn defaults_only_config_writes_results() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "empty.toml", "");
    let out = tmp.path().join("out");
    let o = sim(&["sweep", "--config", &cfg, "--out-dir", out.to_str().unwrap(), "--snr", "-12"], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# schema: sandman-ber/1"));
    assert!(lines.next().unwrap().starts_with("snr_db,detector,jammer,"));
    assert_eq!(lines.count(), 2);
    assert_eq!(fs::read_to_string(out.join("config.toml")).unwrap(), "");
    assert!(fs::read_to_string(out.join("ber.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn config_is_echoed_verbatim() {
    let tmp = TempDir::new().unwrap();
    let text = format!("# comment kept\nseed = 4\n{SMALL}");
    let cfg = write(tmp.path(), "c.toml", &text);
    let out = tmp.path().join("out");
    let o = sim(&["sweep", "--config", &cfg, "--out-dir", out.to_str().unwrap(), "--snr", "-6"], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("config.toml")).unwrap(), text);

    // the resolved config reproduces the run
    let eff = out.join("effective.toml");
    let out2 = tmp.path().join("out2");
    let o = sim(&["sweep", "--config", eff.to_str().unwrap(), "--out-dir", out2.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(out.join("results.csv")).unwrap(),
        fs::read(out2.join("results.csv")).unwrap()
    );
}

#[test]
fn same_seed_same_bytes_any_thread_count() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", SMALL);
    let run = |dir: &str, threads: &str| {
        let out = tmp.path().join(dir);
        let o = sim(
            &[
                "sweep", "--config", &cfg, "--out-dir", out.to_str().unwrap(), "--seed", "7", "--snr", "-6,-3",
                "--jammer", "barrage,data", "--detector", "sandman,lmmse",
            ],
            &[("SANDMAN_SIM_THREADS", threads)],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("results.csv")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn unknown_key_exits_2_with_line() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "c.toml", "seed = 1\n[sweep]\nmax_frame = 10\n");
    let o = sim(&["sweep", "--config", &cfg, "--out-dir", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("max_frame"), "{err}");
    assert!(err.contains("c.toml:3:"), "{err}");
}

#[test]
fn bad_values_exit_2() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path().to_str().unwrap();
    let wrong_type = write(tmp.path(), "t.toml", "[detector]\nt_max = \"ten\"\n");
    assert_eq!(sim(&["sweep", "--config", &wrong_type, "--out-dir", d], &[]).status.code(), Some(2));
    let unsorted = write(tmp.path(), "u.toml", "[sweep]\nsnr_points = [3.0, 0.0]\n");
    assert_eq!(sim(&["sweep", "--config", &unsorted, "--out-dir", d], &[]).status.code(), Some(2));
    assert_eq!(sim(&["sweep", "--jammer", "loud", "--out-dir", d], &[]).status.code(), Some(2));
    assert_eq!(
        sim(&["sweep", "--snr", "0", "--out-dir", d], &[("SANDMAN_SIM_THREADS", "zero")]).status.code(),
        Some(2)
    );
    assert_eq!(sim(&["cycles", "--numeric", "float"], &[]).status.code(), Some(2));
}

#[test]
fn detector_failure_exits_3() {
    let tmp = TempDir::new().unwrap();
    // with this seed the normal matrix of the LMMSE solve loses definiteness
    let cfg = write(tmp.path(), "c.toml", "seed = 0\njammer_power_db = 400.0\nplot = false\n[sweep]\nmax_frames = 2\n");
    let out = tmp.path().join("out");
    let o = sim(
        &["sweep", "--config", &cfg, "--out-dir", out.to_str().unwrap(), "--snr", "200", "--jammer", "barrage", "--detector", "lmmse"],
        &[],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("linear solve failed"));
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(csv.contains(",failed: "));
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn cycle_report_defaults() {
    let o = sim(&["cycles"], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(field(&text, "bits_per_block"), 1536.0);
    let t = field(&text, "throughput_mbps");
    assert!((222.0..=334.0).contains(&t), "{t}");
    let c = field(&text, "cycles_per_block");
    assert!((1841.0 * 0.8..=1841.0 * 1.2).contains(&c), "{c}");
}

#[test]
fn fewer_iterations_fewer_cycles() {
    let one = field(&stdout(&sim(&["cycles", "--tmax", "1"], &[])), "cycles_per_block");
    let ten = field(&stdout(&sim(&["cycles", "--tmax", "10"], &[])), "cycles_per_block");
    assert!(one < ten);
}

#[test]
fn cycles_writes_csv_and_scales_with_clock() {
    let tmp = TempDir::new().unwrap();
    let o = sim(&["cycles", "--out-dir", tmp.path().to_str().unwrap(), "--clock-mhz", "160"], &[]);
    assert!(o.status.success());
    let t = field(&stdout(&o), "throughput_mbps");
    let full = field(&stdout(&sim(&["cycles"], &[])), "throughput_mbps");
    assert!((2.0 * t - full).abs() <= 0.1);
    assert!(fs::read_to_string(tmp.path().join("cycles.csv")).unwrap().starts_with("phase,calls,cycles,share"));
}
