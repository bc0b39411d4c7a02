use std::path::{Path, PathBuf};
use std::process::Command;

use probekit::kinetics::RateSet;
use probekit::ldos::{Dipole, Location};
use probekit::synth::{expected_histogram, sample_histogram, AcquisitionConfig};
use probekit_cli::config::PipelineConfig;
use probekit_cli::format::{parse_histogram, read_histogram, write_histogram, HistogramMeta};
use probekit_cli::output::{emit_outputs, map_csv, rates_csv};
use probekit_cli::pipeline::{collect_inputs, run_pipeline};
use probekit_cli::simulate::{simulate_dataset, SimulationConfig};

fn meta(id: &str, location: Location, lattice_a: Option<f64>) -> HistogramMeta {
    HistogramMeta {
        id: id.into(),
        dipole: Dipole::X,
        lattice_a,
        wavelength: 970.0,
        rep_period: 25.0,
        location,
    }
}

fn small_campaign(dir: &Path) -> Vec<PathBuf> {
    let cfg = SimulationConfig {
        n_crystal: 8,
        n_reference: 3,
        seed: 4,
        ..Default::default()
    };
    simulate_dataset(&cfg, dir).unwrap().into_iter().map(|d| d.path).collect()
}

fn quick_config() -> PipelineConfig {
    PipelineConfig {
        n_boot: 20,
        ..Default::default()
    }
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn histogram_round_trip_is_identity() {
    let rates = RateSet::new(1.1, 0.06, 0.005);
    let acq = AcquisitionConfig::covering(25.0, 1000)
        .with_total_photons(&rates, 1e6)
        .unwrap()
        .with_seed(3);
    let m = meta("q", Location::InCrystal, Some(260.0));
    for hist in [
        sample_histogram(&rates, &acq).unwrap(),
        expected_histogram(&rates, &acq).unwrap(),
    ] {
        let parsed = parse_histogram(&write_histogram(&m, &hist)).unwrap();
        assert_eq!(parsed.meta, m);
        assert_eq!(parsed.hist.counts, hist.counts);
        assert_eq!(parsed.hist.bin_width, hist.bin_width);
        assert_eq!(parsed.hist.t0, hist.t0);
    }
}

#[test]
fn parses_4096_bin_file_without_width_header() {
    let mut text = String::from(
        "# id: big\n# dipole: Y\n# wavelength_nm: 968\n# rep_period_ns: 100\n# location: reference\n",
    );
    for j in 0..4096 {
        text.push_str(&format!("{},{}\n", j as f64 * 0.024414062, 4096 - j));
    }
    let f = parse_histogram(&text).unwrap();
    assert_eq!(f.hist.len(), 4096);
    assert_eq!(f.meta.lattice_a, None);
}

#[test]
fn pipeline_is_deterministic_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let files = small_campaign(tmp.path());
    let serial = run_pipeline(&PipelineConfig { jobs: 1, ..quick_config() }, &files).unwrap();
    let parallel = run_pipeline(&PipelineConfig { jobs: 3, ..quick_config() }, &files).unwrap();
    emit_outputs(&serial, &tmp.path().join("a")).unwrap();
    emit_outputs(&parallel, &tmp.path().join("b")).unwrap();
    let (a, b) = (read_all(&tmp.path().join("a")), read_all(&tmp.path().join("b")));
    assert_eq!(a.len(), 4);
    assert_eq!(a, b);
}

#[test]
fn quarantine_accounts_for_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let mut files = small_campaign(tmp.path());
    let bad = tmp.path().join("bad.txt");
    std::fs::write(&bad, "# id: bad\n# dipole: X\n# lattice_a_nm: 250\n# wavelength_nm: 970\n# rep_period_ns: 25\n# location: in_crystal\n0,5\n0.1,-1\n").unwrap();
    let flat = tmp.path().join("flat.txt");
    let mut text = write_histogram(&meta("flat", Location::InCrystal, Some(250.0)), &{
        let acq = AcquisitionConfig::covering(25.0, 200);
        let mut h = expected_histogram(&RateSet::new(1.0, 0.1, 0.01), &acq).unwrap();
        h.counts.iter_mut().for_each(|c| *c = 10.0);
        h
    });
    text.push('\n');
    std::fs::write(&flat, text).unwrap();
    files.insert(2, bad.clone());
    files.push(flat.clone());

    let out = run_pipeline(&quick_config(), &files).unwrap();
    assert_eq!(out.reports.len() + out.quarantine.len(), files.len());
    assert_eq!(out.quarantine.len(), 2);
    assert_eq!(out.quarantine[0].path, bad);
    assert!(out.quarantine[0].reason.contains("line 8"), "{}", out.quarantine[0].reason);
    assert_eq!(out.quarantine[1].path, flat);
    let csv = rates_csv(&out);
    assert_eq!(csv.lines().count(), 1 + out.reports.len());
    assert!(csv.starts_with("id,dipole,gamma_rad,gamma_nrad,gamma_db,ci_lo_gamma_rad,ci_hi_gamma_rad,"));
    assert!(csv.lines().next().unwrap().ends_with(",flags"));
}

#[test]
fn map_rows_are_sorted_by_frequency() {
    let tmp = tempfile::tempdir().unwrap();
    let files = small_campaign(tmp.path());
    let out = run_pipeline(&quick_config(), &files).unwrap();
    let csv = map_csv(&out).unwrap();
    let f: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(f.len(), 8);
    assert!(f.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn single_reference_runs_in_fit_only_mode() {
    let tmp = tempfile::tempdir().unwrap();
    let files = small_campaign(tmp.path());
    let one: Vec<PathBuf> = files.into_iter().filter(|p| p.ends_with("ref01.txt")).collect();
    let out = run_pipeline(&quick_config(), &one).unwrap();
    assert_eq!(out.reports.len(), 1);
    assert!(out.map.is_none());
    let written = emit_outputs(&out, &tmp.path().join("o")).unwrap();
    let names: Vec<_> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["rates.csv", "summary.txt"]);
}

#[test]
fn failing_references_abort_the_batch() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("r.txt");
    std::fs::write(&path, "# id: r\n# dipole: X\n# wavelength_nm: 970\n# rep_period_ns: 25\n# location: reference\n0,1\n0.1,x\n").unwrap();
    assert!(run_pipeline(&quick_config(), &[path]).is_err());
}

#[test]
fn inhibited_comparison_row() {
    let tmp = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    let write = |m: HistogramMeta, rates: RateSet, tau: f64| {
        let acq = AcquisitionConfig::covering(tau, 2000).with_total_photons(&rates, 1e9).unwrap();
        let path = tmp.path().join(format!("{}.txt", m.id));
        std::fs::write(&path, write_histogram(&HistogramMeta { rep_period: tau, ..m }, &expected_histogram(&rates, &acq).unwrap())).unwrap();
        path
    };
    for id in ["r1", "r2"] {
        files.push(write(meta(id, Location::Reference, None), RateSet::new(1.1, 0.06, 0.005), 25.0));
    }
    files.push(write(meta("inh", Location::InCrystal, Some(276.0)), RateSet::new(0.02, 0.06, 0.005), 200.0));
    let cfg = PipelineConfig { n_boot: 0, ..Default::default() };
    let out = run_pipeline(&cfg, &files).unwrap();
    let row = &out.map.as_ref().unwrap().comparison[0];
    assert!((row.extracted / 55.0 - 1.0).abs() < 1e-5, "{}", row.extracted);
    assert!((row.naive / 12.763_932_022_500_21 - 1.0).abs() < 1e-6, "{}", row.naive);
}

#[test]
fn binary_exit_codes_and_rerun_bytes() {
    let exe = env!("CARGO_BIN_EXE_probekit");
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let status = Command::new(exe)
        .args(["simulate", "--n-crystal", "4", "--n-reference", "2", "--seed", "9", "--out"])
        .arg(&data)
        .status()
        .unwrap();
    assert!(status.success());
    let inputs = collect_inputs(&[data.join("curves")]).unwrap();
    assert_eq!(inputs.len(), 6);

    let run = |out: &str| {
        Command::new(exe)
            .args(["map", "--n-boot", "10", "--config"])
            .arg(data.join("pipeline.conf"))
            .arg("--out")
            .arg(tmp.path().join(out))
            .arg(data.join("curves"))
            .status()
            .unwrap()
    };
    assert_eq!(run("o1").code(), Some(0));
    assert_eq!(run("o2").code(), Some(0));
    assert_eq!(read_all(&tmp.path().join("o1")), read_all(&tmp.path().join("o2")));

    std::fs::write(data.join("curves").join("zz.txt"), "# id: zz\n").unwrap();
    assert_eq!(run("o3").code(), Some(1));

    let fatal = Command::new(exe)
        .args(["map", "--out"])
        .arg(tmp.path().join("o4"))
        .arg(tmp.path().join("missing.txt"))
        .args(["--gap-window", "0.3,0.2"])
        .status()
        .unwrap();
    assert_eq!(fatal.code(), Some(2));

    let fit = Command::new(exe).arg("fit").arg(data.join("curves/ref01.txt")).output().unwrap();
    assert!(fit.status.success());
    assert!(String::from_utf8_lossy(&fit.stdout).contains("converged = true"));
    let f = read_histogram(&data.join("curves/ref01.txt")).unwrap();
    assert_eq!(f.meta.location, Location::Reference);
}
