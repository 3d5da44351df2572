use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gausslit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gausslit"))
        .args(args)
        .env_remove("GL_SEED")
        .output()
        .expect("run gausslit")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn last_number(line: &str) -> f64 {
    line.split_whitespace().last().unwrap().parse().unwrap()
}

/// The number following `key` in `text`.
fn field(text: &str, key: &str) -> f64 {
    let rest = &text[text.find(key).unwrap_or_else(|| panic!("{key} in {text}")) + key.len()..];
    rest.split_whitespace().next().unwrap().trim_end_matches([',', ';', ')']).parse().unwrap()
}

fn same_files(a: &Path, b: &Path) {
    let mut names: Vec<_> = fs::read_dir(a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?} differs");
    }
}

#[test]
fn norm_of_one_plus_z_in_h4() {
    let o = gausslit(&["norm", "--coeffs", "1,1", "--p", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = last_number(stdout(&o).trim());
    assert!((v - 6f64.powf(0.25)).abs() < 1e-8, "{v}");
    assert!(stdout(&o).contains("1.56508458"));
}

#[test]
fn hilbert_two_by_two_norm() {
    let o = gausslit(&["covnorm", "--family", "hilbert", "--N", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = field(&stdout(&o), "N=1: ");
    assert!((v - (4.0 + 13f64.sqrt()) / 6.0).abs() < 1e-8, "{v}");
}

#[test]
fn identity_estimate_is_near_one() {
    let o = gausslit(&[
        "estimate", "--family", "identity", "--f", "single:0", "--p", "2", "--q", "2", "--trials", "10000",
        "--seed", "7",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    let (mean, se) = (field(&s, "mean "), field(&s, "stderr "));
    assert!((mean - 1.0).abs() <= 4.0 * se, "{s}");
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "family = \"toeplitz_geometric\"\nc = 0.25\ntrials = 100\nN = 8\nf = \"boundary\"\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let from_file = stdout(&gausslit(&["estimate", "--config", cfg]));
    assert!(from_file.contains("T=100 "), "{from_file}");
    let overridden = stdout(&gausslit(&["estimate", "--config", cfg, "--trials", "200"]));
    assert!(overridden.contains("T=200 "), "{overridden}");

    let empty = dir.path().join("empty.toml");
    fs::write(&empty, "").unwrap();
    let o = gausslit(&["covnorm", "--config", empty.to_str().unwrap(), "--family", "hilbert", "--degree", "1"]);
    assert!(stdout(&o).contains("1.26759188"));
}

#[test]
fn validation_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "N = -4\n").unwrap();
    let o = gausslit(&["covnorm", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("degree"), "{}", stderr(&o));

    let o = gausslit(&["covnorm", "--degree", "-1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("degree"));

    fs::write(&cfg, "trails = 5\n").unwrap();
    let o = gausslit(&["estimate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("trails"), "{}", stderr(&o));

    let o = gausslit(&["estimate", "--q", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let o = gausslit(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(gausslit(&["norm", "--bogus", "1"]).status.code(), Some(1));
    assert_eq!(gausslit(&["--help"]).status.code(), Some(0));
    let o = gausslit(&["covnorm", "--family", "hilbert", "--N", "64", "--max-iter", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = gausslit(&["norm", "--f", "file:/definitely/not/here.csv"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn seed_comes_from_environment() {
    let via_env = Command::new(env!("CARGO_BIN_EXE_gausslit"))
        .args(["sample", "--family", "hilbert", "--N", "5"])
        .env("GL_SEED", "99")
        .output()
        .unwrap();
    let via_flag = gausslit(&["sample", "--family", "hilbert", "--N", "5", "--seed", "99"]);
    assert!(via_env.status.success());
    assert_eq!(via_env.stdout, via_flag.stdout);
    assert!(stdout(&via_flag).contains("root_seed=99"));
}

#[test]
fn replays_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 5] = [
        &["verify", "--family", "band", "--f", "random", "--N", "32", "--p", "3", "--trials", "300"],
        &["estimate", "--family", "toeplitz_geometric", "--f", "boundary", "--N", "40", "--q", "4", "--trials", "200"],
        &["sample", "--family", "hilbert", "--N", "12", "--mean", "const:0.5"],
        &["covnorm", "--family", "band", "--bandwidth", "4", "--N", "20"],
        &["diag", "--check", "lacunary", "--family", "diagonal", "--sigma", "cycle:1,2", "--trials", "300"],
    ];
    for (k, args) in runs.iter().enumerate() {
        let a = dir.path().join(format!("{k}a"));
        let b = dir.path().join(format!("{k}b"));
        for d in [&a, &b] {
            let mut full: Vec<&str> = args.to_vec();
            full.extend(["--seed", "4242", "--out", d.to_str().unwrap()]);
            let o = gausslit(&full);
            assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        }
        same_files(&a, &b);
    }
}

#[test]
fn report_files_follow_the_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = gausslit(&[
        "verify", "--family", "identity", "--p", "4", "--N", "16", "--trials", "200", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("reports.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# schema=1"));
    assert_eq!(lines.next(), Some("bound_name,estimate,stderr,bound_value,satisfied,margin,p,q,T,M,seed"));
    assert_eq!(lines.count(), 2);
    let json = fs::read_to_string(dir.path().join("reports.json")).unwrap();
    assert!(json.contains("\"lower_c1\""));
}

#[test]
fn selftest_subset_and_full_replay() {
    let dir = tempfile::tempdir().unwrap();
    let o = gausslit(&["selftest", "--only", "1,4,12", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("PASS").count(), 3);
    assert!(dir.path().join("summary.csv").exists());

    // The full suite fails criterion 3 (Hilbert sections converge too slowly
    // to reach 2.9 at N = 256) and passes everything else.
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = gausslit(&["selftest", "--seed", "31", "--out", d.to_str().unwrap()]);
        let s = stdout(&o);
        assert_eq!(o.status.code(), Some(1), "{s}");
        assert!(s.contains("14/15 criteria passed"), "{s}");
        assert!(s.lines().any(|l| l.starts_with("criterion  3") && l.contains("FAIL")));
    }
    same_files(&a, &b);
}
