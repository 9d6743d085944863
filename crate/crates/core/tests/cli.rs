use std::path::Path;
use std::process::Command;

use highrise::experiment::csv_body;

const BIN: &str = env!("CARGO_BIN_EXE_highrise");

const TINY: &str = r#"
band_ghz = 15
area_km = 0.3
isd_m = 150
n_ues = 10
n_realizations = 1
p_t_w = 0.01
densities = [38, 116]
bands = [4.6, 28]

[seeds]
city = 4
ue = 5
drop_excess = 6

[trace]
max_reflections = 1
"#;

fn highrise(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn run_writes_headed_outputs_and_is_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let (code, out, err) = highrise(&["run", "--config", &cfg, "--workers", "1", "--out", a.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}{err}");
    let (code, _, err) = highrise(&["run", "--config", &cfg, "--workers", "3", "--out", b.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    for f in ["metrics.csv", "cdf_snr.csv", "cdf_sinr.csv"] {
        let (ta, tb) = (read(a.join(f)), read(b.join(f)));
        assert!(ta.contains("# seeds: city=4 ue=5 drop_excess=6"));
        assert!(ta.contains("# config_sha256: "));
        assert_eq!(ta, tb, "{f}");
    }
    assert_eq!(csv_body(&read(a.join("metrics.csv"))).lines().count(), 11);
    let manifest: serde_json::Value = serde_json::from_str(&read(a.join("run_manifest.json"))).unwrap();
    assert_eq!(manifest["band"]["bundle"]["ura_rows"], 5);
    assert_eq!(manifest["band"]["bundle"]["bandwidth_hz"], 300_000_000u64);

    let rep = dir.path().join("rep");
    let (code, out, err) = highrise(&["report", a.to_str().unwrap(), "--out", rep.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("band_ghz,quantile"));
    assert!(rep.join("report.csv").exists());
}

#[test]
fn overrides_change_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(highrise(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]).0, 0);
    let (code, _, err) = highrise(&[
        "run", "--config", &cfg, "--seed-ue", "9", "--band", "28", "--out", b.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let (ta, tb) = (read(a.join("metrics.csv")), read(b.join("metrics.csv")));
    assert!(tb.contains("ue=9"));
    assert!(tb.contains("# band_ghz: 28"));
    let hash = |t: &str| t.lines().find(|l| l.starts_with("# config_sha256")).unwrap().to_string();
    assert_ne!(hash(&ta), hash(&tb));
}

#[test]
fn sweep_density_writes_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("s");
    let (code, _, err) = highrise(&["sweep-density", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let text = read(out.join("coverage.csv"));
    let body: Vec<&str> = csv_body(&text).lines().collect();
    assert_eq!(body[0], "bs_per_km2,isd_m,band_ghz,coverage");
    assert_eq!(body.len(), 5);
    assert!(body[1].starts_with("38,200,4.6,"));
    assert!(body[4].starts_with("116,100,28,"));
}

#[test]
fn gen_city_and_dump_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let (code, stdout, err) = highrise(&["gen-city", "--seed-city", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("buildings        400"));
    let layout = highrise::city::CityLayout::load(&out.join("city.json")).unwrap();
    assert_eq!(layout.buildings.len(), 400);

    let cfg = write_config(dir.path(), TINY);
    let (code, _, err) = highrise(&["dump-pattern", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(csv_body(&read(out.join("pattern_azimuth.csv"))).starts_with("angle_deg,gain_dbi"));
    let (code, _, err) = highrise(&["dump-paths", "--config", &cfg, "--ue", "2", "--cir", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(csv_body(&read(out.join("paths.csv"))).starts_with("tx_id,rx_id,path_idx,length_m"));
    assert!(out.join("cir").read_dir().unwrap().count() > 0);
}

#[test]
fn config_errors_exit_2_and_runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), &format!("{TINY}\nunknown_key = 1\n"));
    let (code, _, err) = highrise(&["run", "--config", &bad]);
    assert_eq!(code, 2);
    assert!(err.contains("line"), "{err}");
    let cfg = write_config(dir.path(), TINY);
    assert_eq!(highrise(&["run", "--config", &cfg, "--band", "9"]).0, 2);
    assert_eq!(highrise(&["run", "--config", "/nonexistent.toml"]).0, 2);
    assert_eq!(highrise(&["no-such-command"]).0, 2);

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let (code, _, _) = highrise(&["run", "--config", &cfg, "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code, 3);
    let (code, _, _) = highrise(&["report", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(code, 3);
}

#[test]
fn shipped_desk_config_is_the_preset() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let mut shipped = highrise::config::ScenarioConfig::load(&path).unwrap();
    shipped.output_dir = None;
    let preset = highrise::config::ScenarioConfig::desk(highrise::config::Seeds {
        city: 1,
        ue: 2,
        drop_excess: 3,
    });
    assert_eq!(shipped, preset);
    let full = highrise::config::ScenarioConfig::load(&path.with_file_name("full_scale.toml")).unwrap();
    assert_eq!(full.trace.max_reflections, 6);
    assert_eq!(full.n_ues, 370);
}
