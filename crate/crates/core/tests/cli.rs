use std::path::Path;
use std::process::{Command, Output};

fn imnoma(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imnoma"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn se_table_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = imnoma(&["se"], dir.path());
    assert!(out.status.success());
    let csv = read(&dir.path().join("se.csv"));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("label,n_users,n_far,mod_order,imnomarc,pdnoma,imnoma")
    );
    let rows: Vec<_> = lines.collect();
    assert!(rows.contains(&",2,1,2,3,2,2"));
    assert!(rows.contains(&",5,2,2,7,5,4.25"));
    assert!(rows.contains(&",2,1,4,5,4,3.5"));
}

#[test]
fn se_schedules_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = imnoma(&["se", "--config", &config("se_schedules.toml")], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.path().join("se.csv"));
    assert!(csv.lines().any(|l| l == "C1,4,1,2,6,4,3.5"));
    assert!(csv.lines().any(|l| l == "C2,5,4,2,6,5,4.25"));
}

#[test]
fn flops_rows() {
    let dir = tempfile::tempdir().unwrap();
    assert!(imnoma(&["flops"], dir.path()).status.success());
    let csv = read(&dir.path().join("flops.csv"));
    assert!(csv.lines().any(|l| l == ",2,1,2,1,24,6"));
    assert!(csv.lines().any(|l| l == ",2,1,2,2,24,23"));
}

#[test]
fn bound_curves_are_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let out = imnoma(&["bound", "--snr", "0:10:30"], dir.path());
    assert!(out.status.success());
    let mut rdr = csv::Reader::from_path(dir.path().join("bound.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3 * 4);
    for user in ["1", "2", "index"] {
        let curve: Vec<f64> = rows
            .iter()
            .filter(|r| &r[2] == user)
            .map(|r| {
                assert_eq!(&r[1], "bound");
                r[6].parse().unwrap()
            })
            .collect();
        assert!(curve[0] >= curve[3]);
        assert!(curve.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn default_ber_run_emits_two_users_and_index() {
    let dir = tempfile::tempdir().unwrap();
    let out = imnoma(&["ber", "--snr", "0:10:20"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&dir.path().join("results.csv"));
    for user in ["1", "2", "index"] {
        assert_eq!(
            csv.lines().filter(|l| l.split(',').nth(2) == Some(user)).count(),
            3
        );
    }
    assert!(dir.path().join("manifest_imnomarc_ml.json").exists());
}

#[test]
fn repeated_detector_flags_share_one_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = imnoma(
        &["ber", "--snr", "10", "--detector", "sic", "--detector", "ml"],
        dir.path(),
    );
    assert!(out.status.success());
    let csv = read(&dir.path().join("results.csv"));
    assert!(csv.lines().any(|l| l.starts_with("imnomarc,sic,")));
    assert!(csv.lines().any(|l| l.starts_with("imnomarc,ml,")));
}

#[test]
fn fixed_seed_output_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "ber", "--seed", "7", "--snr", "0:5:15", "--scheme", "pdnoma", "--scheme", "ofdm",
    ];
    assert!(imnoma(&args, a.path()).status.success());
    assert!(imnoma(&args, b.path()).status.success());
    assert_eq!(
        read(&a.path().join("results.csv")),
        read(&b.path().join("results.csv"))
    );

    let manifest = |p: &Path| -> serde_json::Value {
        let mut v: serde_json::Value =
            serde_json::from_str(&read(&p.join("manifest_pdnoma_ml.json"))).unwrap();
        v.as_object_mut().unwrap().remove("started_at");
        v["points"]
            .as_array_mut()
            .unwrap()
            .iter_mut()
            .for_each(|p| p["seconds"] = 0.into());
        v
    };
    assert_eq!(manifest(a.path()), manifest(b.path()));
    assert_eq!(manifest(a.path())["master_seed"], 7);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[system]\nn_users = 1\n").unwrap();
    let code = |args: &[&str]| imnoma(args, dir.path()).status.code();
    assert_eq!(code(&["ber", "--config", bad.to_str().unwrap()]), Some(1));
    assert_eq!(code(&["ber", "--scheme", "cdma"]), Some(1));
    assert_eq!(code(&["ber", "--snr", "5:0:1"]), Some(1));
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["--help"]), Some(0));

    // Output directory path occupied by a file: a runtime failure.
    let blocked = dir.path().join("file");
    std::fs::write(&blocked, "").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_imnoma"))
        .args(["se", "--out"])
        .arg(&blocked)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    for name in [
        "default.toml",
        "scheme_comparison.toml",
        "index_user.toml",
        "se_schedules.toml",
    ] {
        let text = read(Path::new(&config(name)));
        imnoma::cli::ConfigFile::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
