//! Experiment drivers behind the command-line tool.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::antenna::{array_gain_towards, element_gain, ArrayGeometry, BandBundle};
use crate::band::Band;
use crate::channel::write_cir_csv;
use crate::city::{generate_city_with, validate_city, CityLayout, CityStats};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::metrics::{
    coverage_probability, empirical_cdf, fmt_db, write_cdf_csv, write_metrics_csv, LinkSample,
};
use crate::propagation::{path_response, rank_paths, Scene, TxTracer};
use crate::scenario::{density_to_isd, evaluate_scenario, evaluate_sweep, link_channel, place_bs_hex};
use crate::stats::quantile;

pub const GENERATOR: &str = concat!("highrise ", env!("CARGO_PKG_VERSION"));

/// Files written into one output directory; removed again unless committed.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Outputs> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            committed: false,
        })
    }

    pub fn write(&mut self, name: &str, content: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        self.written.push(path.clone());
        std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.written)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

/// Run `f` on a pool of `workers` threads (0 picks the rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Comment block opening every CSV file.
pub fn csv_header(cfg: &ScenarioConfig, extra: &[(&str, String)]) -> String {
    let mut s = String::new();
    writeln!(s, "# generator: {GENERATOR}").unwrap();
    writeln!(
        s,
        "# seeds: city={} ue={} drop_excess={}",
        cfg.seeds.city, cfg.seeds.ue, cfg.seeds.drop_excess
    )
    .unwrap();
    writeln!(s, "# config_sha256: {}", cfg.hash()).unwrap();
    for (k, v) in extra {
        writeln!(s, "# {k}: {v}").unwrap();
    }
    s
}

/// Drop the leading `#` comment lines of a CSV document.
pub fn csv_body(text: &str) -> &str {
    let mut rest = text;
    while rest.starts_with('#') {
        rest = rest.split_once('\n').map_or("", |(_, r)| r);
    }
    rest
}

fn csv_string(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> String {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

fn warn_unpinned(bs_per_km2: f64, isd_m: f64) {
    eprintln!(
        "warning: density {bs_per_km2} BS/km^2 is not in the pinned table; using hexagonal-cell ISD {isd_m:.1} m"
    );
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub band: Band,
    pub isd_m: f64,
    pub samples: Vec<LinkSample>,
    pub coverage: f64,
    pub files: Vec<PathBuf>,
}

/// `run`: one band, one density; metrics, CDFs and a manifest.
pub fn run(cfg: &ScenarioConfig, workers: usize) -> Result<RunSummary> {
    let band = cfg.band()?;
    let (isd_m, pinned) = cfg.resolved_isd()?;
    if let (Some(d), false) = (cfg.bs_density, pinned) {
        warn_unpinned(d, isd_m);
    }
    let scenario = cfg.scenario()?;
    let samples = with_workers(workers, || evaluate_scenario(&scenario, band))??;

    let snr: Vec<f64> = samples.iter().map(|s| s.snr_db).collect();
    let sinr: Vec<f64> = samples.iter().map(|s| s.sinr_db).collect();
    let coverage = coverage_probability(&sinr, cfg.gamma_th_db)?;
    let header = csv_header(cfg, &[("band_ghz", band.ghz().to_string()), ("isd_m", format!("{isd_m}"))]);

    let mut out = Outputs::new(&cfg.output_dir())?;
    let metrics = csv_string(|w| write_metrics_csv(&samples, w));
    out.write("metrics.csv", &format!("{header}{metrics}"))?;
    let cdf = csv_string(|w| write_cdf_csv(&empirical_cdf(&snr).expect("non-empty"), w));
    out.write("cdf_snr.csv", &format!("{header}{cdf}"))?;
    let cdf = csv_string(|w| write_cdf_csv(&empirical_cdf(&sinr).expect("non-empty"), w));
    out.write("cdf_sinr.csv", &format!("{header}{cdf}"))?;

    let bundle = BandBundle::for_band(band);
    let manifest = json!({
        "generator": GENERATOR,
        "config_sha256": cfg.hash(),
        "config": cfg,
        "band": {
            "ghz": band.ghz(),
            "carrier_hz": band.carrier_hz(),
            "wavelength_m": band.wavelength_m(),
            "bundle": bundle,
            "n_tx": bundle.n_tx(),
            "n_rx": bundle.ula_n,
        },
        "isd_m": isd_m,
        "isd_pinned": pinned,
        "n_buildings": scenario.layout.as_ref().map_or(scenario.n_buildings(), |l| l.buildings.len()),
        "n_samples": samples.len(),
        "n_outage": samples.iter().filter(|s| s.serving_bs.is_none()).count(),
        "coverage": { "gamma_th_db": fmt_db(cfg.gamma_th_db), "sinr": coverage },
        "workers": workers,
        "outputs": ["metrics.csv", "cdf_snr.csv", "cdf_sinr.csv"],
    });
    out.write(
        "run_manifest.json",
        &(serde_json::to_string_pretty(&manifest).expect("manifest serialises") + "\n"),
    )?;
    Ok(RunSummary {
        band,
        isd_m,
        samples,
        coverage,
        files: out.commit(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoveragePoint {
    pub bs_per_km2: f64,
    pub isd_m: f64,
    pub band_ghz: f64,
    pub coverage: f64,
}

/// Coverage per band and density, densities in the configured order.
pub fn coverage_sweep(cfg: &ScenarioConfig, workers: usize) -> Result<Vec<CoveragePoint>> {
    let bands = cfg.bands()?;
    let lookups = cfg
        .densities
        .iter()
        .map(|&d| density_to_isd(d))
        .collect::<Result<Vec<_>>>()?;
    for (d, l) in cfg.densities.iter().zip(&lookups) {
        if !l.pinned {
            warn_unpinned(*d, l.isd_m);
        }
    }
    let isds: Vec<f64> = lookups.iter().map(|l| l.isd_m).collect();
    let scenario = cfg.scenario()?;
    let samples = with_workers(workers, || evaluate_sweep(&scenario, &bands, &isds))??;
    let mut points = Vec::new();
    for (bi, band) in bands.iter().enumerate() {
        for (k, &d) in cfg.densities.iter().enumerate() {
            let sinr: Vec<f64> = samples[k][bi].iter().map(|s| s.sinr_db).collect();
            points.push(CoveragePoint {
                bs_per_km2: d,
                isd_m: isds[k],
                band_ghz: band.ghz(),
                coverage: coverage_probability(&sinr, cfg.gamma_th_db)?,
            });
        }
    }
    Ok(points)
}

/// `sweep-density`: writes `coverage.csv`.
pub fn sweep_density(cfg: &ScenarioConfig, workers: usize) -> Result<(Vec<CoveragePoint>, PathBuf)> {
    let points = coverage_sweep(cfg, workers)?;
    let mut text = csv_header(cfg, &[("gamma_th_db", fmt_db(cfg.gamma_th_db))]);
    text.push_str("bs_per_km2,isd_m,band_ghz,coverage\n");
    for p in &points {
        writeln!(text, "{},{},{},{:.6}", p.bs_per_km2, p.isd_m, p.band_ghz, p.coverage).unwrap();
    }
    let mut out = Outputs::new(&cfg.output_dir())?;
    let path = out.write("coverage.csv", &text)?;
    out.commit();
    Ok((points, path))
}

/// `gen-city`: one layout written to `city.json`.
pub fn gen_city(cfg: &ScenarioConfig) -> Result<(CityLayout, CityStats, PathBuf)> {
    let sc = cfg.scenario()?;
    let layout = generate_city_with(sc.city, sc.n_buildings(), cfg.seeds.city, sc.rounding)?;
    let stats = validate_city(&layout, sc.city.gamma0);
    let mut out = Outputs::new(&cfg.output_dir())?;
    let path = out.write("city.json", &(layout.to_json() + "\n"))?;
    out.commit();
    Ok((layout, stats, path))
}

/// Quantile summary of one metrics file.
#[derive(Debug, Clone, PartialEq)]
pub struct BandReport {
    pub band_ghz: f64,
    /// `(tag, snr_db, sinr_db)` at q10, q50, q90.
    pub quantiles: Vec<(&'static str, f64, f64)>,
}

/// Parse a `metrics.csv` written by `run`.
pub fn read_metrics(path: &Path) -> Result<(f64, Vec<LinkSample>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {message}"),
    };
    let band = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix("# band_ghz:"))
        .ok_or_else(|| parse_err(1, "missing `# band_ghz:` header".into()))?
        .trim()
        .parse::<f64>()
        .map_err(|e| parse_err(1, e.to_string()))?;
    let skip = text.lines().take_while(|l| l.starts_with('#')).count();
    let mut lines = text.lines().enumerate().skip(skip);
    match lines.next() {
        Some((_, h)) if h == crate::metrics::METRICS_HEADER => {}
        _ => return Err(parse_err(skip + 1, "missing metrics column header".into())),
    }
    let mut samples = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(parse_err(i + 1, format!("expected 7 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| parse_err(i + 1, format!("{s:?}: {e}")));
        let int = |s: &str| s.parse::<usize>().map_err(|e| parse_err(i + 1, format!("{s:?}: {e}")));
        samples.push(LinkSample {
            ue_id: int(f[0])?,
            x_m: num(f[1])?,
            y_m: num(f[2])?,
            serving_bs: if f[3].is_empty() { None } else { Some(int(f[3])?) },
            los: f[4] == "1",
            snr_db: num(f[5])?,
            sinr_db: num(f[6])?,
        });
    }
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok((band, samples))
}

pub fn band_report(band_ghz: f64, samples: &[LinkSample]) -> BandReport {
    let mut snr: Vec<f64> = samples.iter().map(|s| s.snr_db).collect();
    let mut sinr: Vec<f64> = samples.iter().map(|s| s.sinr_db).collect();
    snr.sort_by(f64::total_cmp);
    sinr.sort_by(f64::total_cmp);
    BandReport {
        band_ghz,
        quantiles: crate::metrics::TAGGED_QUANTILES
            .iter()
            .map(|&(p, tag)| (tag, quantile(&snr, p), quantile(&sinr, p)))
            .collect(),
    }
}

/// Report table: one row per band, quantile and other band (gap = this - other).
pub fn report_csv(reports: &[BandReport]) -> String {
    let mut s = String::from("band_ghz,quantile,snr_db,sinr_db,vs_band_ghz,snr_gap_db,sinr_gap_db\n");
    for r in reports {
        for (qi, &(tag, snr, sinr)) in r.quantiles.iter().enumerate() {
            let others: Vec<&BandReport> = reports.iter().filter(|o| o.band_ghz != r.band_ghz).collect();
            if others.is_empty() {
                writeln!(s, "{},{tag},{},{},,,", r.band_ghz, fmt_db(snr), fmt_db(sinr)).unwrap();
            }
            for o in others {
                let (_, osnr, osinr) = o.quantiles[qi];
                writeln!(
                    s,
                    "{},{tag},{},{},{},{},{}",
                    r.band_ghz,
                    fmt_db(snr),
                    fmt_db(sinr),
                    o.band_ghz,
                    fmt_db(snr - osnr),
                    fmt_db(sinr - osinr)
                )
                .unwrap();
            }
        }
    }
    s
}

/// `report`: quantiles of the given metrics files (or run directories).
pub fn report(inputs: &[PathBuf], out_dir: &Path) -> Result<(Vec<BandReport>, String, PathBuf)> {
    if inputs.is_empty() {
        return Err(Error::InvalidParameter("report needs at least one metrics file".into()));
    }
    let mut reports = Vec::new();
    for p in inputs {
        let file = if p.is_dir() { p.join("metrics.csv") } else { p.clone() };
        let (band, samples) = read_metrics(&file)?;
        if reports.iter().any(|r: &BandReport| r.band_ghz == band) {
            return Err(Error::InvalidParameter(format!("band {band} GHz given twice")));
        }
        reports.push(band_report(band, &samples));
    }
    reports.sort_by(|a, b| a.band_ghz.total_cmp(&b.band_ghz));
    let text = report_csv(&reports);
    let mut out = Outputs::new(out_dir)?;
    let path = out.write("report.csv", &text)?;
    out.commit();
    Ok((reports, text, path))
}

/// `dump-pattern`: azimuth and elevation cuts through boresight (azimuth 0)
/// in 0.5 degree steps; element gain plus the in-phase array gain.
pub fn dump_pattern(cfg: &ScenarioConfig) -> Result<Vec<PathBuf>> {
    let band = cfg.band()?;
    let bundle = BandBundle::for_band(band);
    let array = ArrayGeometry::ura(bundle.ura_rows, bundle.ura_cols, band.carrier_hz(), 0.0, cfg.antenna.tilt_deg);
    let frame = array.frame();
    let header = csv_header(cfg, &[("band_ghz", band.ghz().to_string())]);
    let mut out = Outputs::new(&cfg.output_dir())?;
    for (name, limit, azimuth_cut) in [("pattern_azimuth.csv", 360, true), ("pattern_elevation.csv", 180, false)] {
        let mut s = format!("{header}angle_deg,gain_dbi,array_gain_dbi\n");
        for k in -limit..=limit {
            let angle = k as f64 * 0.5;
            let (az, el) = if azimuth_cut { (angle, 0.0) } else { (0.0, angle) };
            let (sa, ca) = f64::to_radians(az).sin_cos();
            let (se, ce) = f64::to_radians(el).sin_cos();
            let d = frame.boresight * (ce * ca) + frame.horizontal * (ce * sa) + frame.up * se;
            let g = element_gain(&cfg.antenna, el, az);
            let g_arr = array_gain_towards(&array, &cfg.antenna, d);
            writeln!(s, "{angle},{},{}", fmt_db(g), fmt_db(g_arr)).unwrap();
        }
        out.write(name, &s)?;
    }
    Ok(out.commit())
}

pub const PATHS_HEADER: &str =
    "tx_id,rx_id,path_idx,length_m,delay_ns,power_dbm,phase_rad,n_refl,n_diff,n_trans,aod_az,aod_el,aoa_az,aoa_el";

fn az_el_deg(d: Vec3) -> (f64, f64) {
    let (az, el) = d.az_el();
    (az.to_degrees(), el.to_degrees())
}

/// `dump-paths`: retained paths of every sector to the selected UEs of
/// realization 0, plus one CIR file per link when `cir` is set.
pub fn dump_paths(cfg: &ScenarioConfig, ue: Option<usize>, cir: bool, workers: usize) -> Result<Vec<PathBuf>> {
    let band = cfg.band()?;
    let sc = cfg.scenario()?;
    sc.validate()?;
    let layout = sc.city_for(0)?;
    let scene = Scene::new(&layout);
    let deployment = place_bs_hex(&layout, sc.isd_m)?;
    let ues = sc.ues_for(0, &layout)?;
    let selected: Vec<usize> = match ue {
        Some(u) if u >= ues.ues.len() => {
            return Err(Error::InvalidParameter(format!(
                "UE {u} does not exist ({} UEs)",
                ues.ues.len()
            )))
        }
        Some(u) => vec![u],
        None => (0..ues.ues.len()).collect(),
    };
    let hz = band.carrier_hz();
    let links: Vec<(String, Vec<(String, String)>)> = with_workers(workers, || {
        deployment
            .sectors
            .iter()
            .map(|sector| {
                let tracer = TxTracer::new(&scene, sector.position, sc.trace);
                let per_ue = selected
                    .par_iter()
                    .map(|&u| {
                        let ue = &ues.ues[u];
                        let rays = tracer.rays_to(ue.position);
                        let responses = rays
                            .iter()
                            .map(|r| path_response(r, hz, sc.pattern.gain_towards(sector.azimuth_deg, r.aod), 0.0))
                            .collect::<Result<Vec<_>>>()?;
                        let mut rows = String::new();
                        for (k, &i) in rank_paths(&rays, &responses, &sc.trace).iter().enumerate() {
                            let (r, p) = (&rays[i], &responses[i]);
                            let (daz, del) = az_el_deg(r.aod);
                            let (aaz, ael) = az_el_deg(r.aoa);
                            writeln!(
                                rows,
                                "{},{},{k},{:.6},{:.6},{:.6},{:.6},{},{},{},{:.4},{:.4},{:.4},{:.4}",
                                sector.id,
                                ue.id,
                                r.length_m,
                                p.delay_s * 1e9,
                                sc.trace.reference_power_dbm + 20.0 * p.amplitude.log10(),
                                p.phase_rad,
                                r.n_reflections(),
                                r.n_diffractions(),
                                r.n_transmissions(),
                                daz,
                                del,
                                aaz,
                                ael
                            )
                            .unwrap();
                        }
                        let mut cirs = Vec::new();
                        if cir {
                            let (h, _) = link_channel(&rays, sector, &sc.pattern, ue, band, &sc.trace)?;
                            cirs.push((
                                format!("cir/cir_tx{}_rx{}.csv", sector.id, ue.id),
                                csv_string(|w| write_cir_csv(&h, w)),
                            ));
                        }
                        Ok((rows, cirs))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(per_ue)
            })
            .collect::<Result<Vec<Vec<_>>>>()
    })??
    .into_iter()
    .flatten()
    .collect();

    let header = csv_header(
        cfg,
        &[("band_ghz", band.ghz().to_string()), ("realization", "0".into())],
    );
    let mut paths = format!("{header}{PATHS_HEADER}\n");
    let mut out = Outputs::new(&cfg.output_dir())?;
    for (rows, cirs) in &links {
        paths.push_str(rows);
        for (name, body) in cirs {
            out.write(name, &format!("{header}{body}"))?;
        }
    }
    out.write("paths.csv", &paths)?;
    Ok(out.commit())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Seeds;

    fn tiny(dir: &Path) -> ScenarioConfig {
        let mut c = ScenarioConfig::desk(Seeds {
            city: 4,
            ue: 5,
            drop_excess: 6,
        });
        c.area_km = 0.3;
        c.n_ues = 8;
        c.n_realizations = 1;
        c.isd_m = Some(150.0);
        c.trace.max_reflections = 1;
        c.output_dir = Some(dir.to_path_buf());
        c
    }

    #[test]
    fn csv_body_strips_comments() {
        assert_eq!(csv_body("# a\n# b\nx,y\n1,2\n"), "x,y\n1,2\n");
        assert_eq!(csv_body("x\n"), "x\n");
    }

    #[test]
    fn outputs_removed_unless_committed() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut o = Outputs::new(dir.path()).unwrap();
            o.write("a.csv", "x").unwrap();
        }
        assert!(!dir.path().join("a.csv").exists());
        let mut o = Outputs::new(dir.path()).unwrap();
        o.write("a.csv", "x").unwrap();
        o.commit();
        assert!(dir.path().join("a.csv").exists());
    }

    #[test]
    fn run_writes_files_and_report_reads_them() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(dir.path());
        let s = run(&cfg, 1).unwrap();
        assert_eq!(s.samples.len(), 8);
        for f in ["metrics.csv", "cdf_snr.csv", "cdf_sinr.csv", "run_manifest.json"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let (band, back) = read_metrics(&dir.path().join("metrics.csv")).unwrap();
        assert_eq!(band, 8.2);
        assert_eq!(back.len(), 8);
        for (a, b) in back.iter().zip(&s.samples) {
            assert_eq!(a.serving_bs, b.serving_bs);
            assert!((a.sinr_db - b.sinr_db).abs() < 1e-5 || a.sinr_db == b.sinr_db);
        }
        let (reports, text, _) = report(&[dir.path().to_path_buf()], dir.path()).unwrap();
        assert_eq!(reports.len(), 1);
        assert!(text.lines().nth(1).unwrap().ends_with(",,,"));
    }

    #[test]
    fn report_gaps_are_differences() {
        let mk = |b: f64, v: f64| BandReport {
            band_ghz: b,
            quantiles: vec![("q10", v, v), ("q50", v + 1.0, v), ("q90", v + 2.0, v)],
        };
        let text = report_csv(&[mk(4.6, 10.0), mk(28.0, 4.0)]);
        let row = text.lines().nth(1).unwrap();
        assert_eq!(row, "4.6,q10,10.000000,10.000000,28,6.000000,6.000000");
    }

    #[test]
    fn dump_pattern_cuts_peak_at_boresight() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(dir.path());
        dump_pattern(&cfg).unwrap();
        let text = std::fs::read_to_string(dir.path().join("pattern_azimuth.csv")).unwrap();
        let rows: Vec<Vec<f64>> = csv_body(&text)
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 721);
        let best = rows.iter().max_by(|a, b| a[1].total_cmp(&b[1])).unwrap();
        assert_eq!(best[0], 0.0);
        assert_eq!(best[1], cfg.antenna.max_gain_dbi);
        assert!((best[2] - (30.0 + 10.0 * 9f64.log10())).abs() < 1e-6);
    }

    #[test]
    fn dump_paths_writes_rows() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny(dir.path());
        let files = dump_paths(&cfg, Some(0), true, 1).unwrap();
        let paths = std::fs::read_to_string(dir.path().join("paths.csv")).unwrap();
        let body = csv_body(&paths);
        assert!(body.starts_with(PATHS_HEADER));
        assert!(body.lines().count() > 1);
        assert!(files.iter().any(|f| f.to_string_lossy().contains("cir_tx0_rx0")));
        assert!(dump_paths(&cfg, Some(99), false, 1).is_err());
    }
}
