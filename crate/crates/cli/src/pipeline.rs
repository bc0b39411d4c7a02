//! Batch processing: fit, extract and bootstrap every file, then aggregate the
//! references and assemble the LDOS map.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;

use probekit::extract::{bootstrap_uncertainty, naive_total_rate, BootstrapConfig, ExtractedRates, RateFlag};
use probekit::fit::{fit_histogram, goodness_of_fit, FitResult, GoodnessOfFit};
use probekit::ldos::{
    assemble_map, inhibition_comparison, reference_aggregate, Dipole, InhibitionComparison, LdosMap, Location,
    QdRecord, ReferenceAggregate, TheoryCurve,
};

use crate::config::PipelineConfig;
use crate::format::{read_histogram, read_overlay, HistogramMeta};

/// Everything derived from one decay curve.
#[derive(Debug, Clone)]
pub struct QdReport {
    pub path: PathBuf,
    pub meta: HistogramMeta,
    pub rep_period: f64,
    pub fit: FitResult,
    pub gof: GoodnessOfFit,
    pub rates: ExtractedRates,
    pub naive_rate: f64,
}

impl QdReport {
    pub fn record(&self) -> QdRecord {
        QdRecord {
            id: self.meta.id.clone(),
            dipole: self.meta.dipole,
            lattice_a: self.meta.lattice_a,
            wavelength: self.meta.wavelength,
            rep_period: self.rep_period,
            location: self.meta.location,
            rates: self.rates.clone(),
            naive_rate: self.naive_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quarantined {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct MapOutputs {
    pub reference: ReferenceAggregate,
    pub map: LdosMap,
    pub comparison: Vec<InhibitionComparison>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub config: PipelineConfig,
    /// Successful files in input order.
    pub reports: Vec<QdReport>,
    pub quarantine: Vec<Quarantined>,
    /// `None` in fit-only mode.
    pub map: Option<MapOutputs>,
    pub notes: Vec<String>,
}

/// 64-bit FNV-1a, used to derive a stable per-curve bootstrap seed.
fn fnv1a(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn bootstrap_seed(master: u64, id: &str) -> u64 {
    master ^ fnv1a(id)
}

/// Fit, extraction and bootstrap of one file.
pub fn process_file(path: &Path, config: &PipelineConfig) -> anyhow::Result<QdReport> {
    let file = read_histogram(path)?;
    let rep_period = config.rep_period.unwrap_or(file.meta.rep_period);
    let fit = fit_histogram(&file.hist).context("fit")?;
    let gof = goodness_of_fit(&file.hist, &fit);
    let boot = BootstrapConfig {
        n_boot: config.n_boot,
        seed: bootstrap_seed(config.seed, &file.meta.id),
        beta: config.beta,
    };
    let mut rates = bootstrap_uncertainty(&file.hist, &fit, rep_period, &boot).context("rate extraction")?;
    if gof.lack_of_fit {
        rates.flags.push(RateFlag::LackOfFit);
    }
    Ok(QdReport {
        path: path.to_path_buf(),
        meta: file.meta,
        rep_period,
        naive_rate: naive_total_rate(&fit),
        fit,
        gof,
        rates,
    })
}

fn load_overlays(config: &PipelineConfig) -> anyhow::Result<Vec<TheoryCurve>> {
    let mut out = Vec::new();
    for (want, path) in [(Dipole::X, &config.overlay_x), (Dipole::Y, &config.overlay_y)] {
        let Some(path) = path else { continue };
        let curve = read_overlay(path).with_context(|| format!("overlay {}", path.display()))?;
        if curve.dipole != want {
            bail!("overlay {} is for dipole {}, expected {want}", path.display(), curve.dipole);
        }
        out.push(curve.remapped(config.overlay_scale, config.overlay_offset)?);
    }
    Ok(out)
}

/// Runs the whole batch. Per-file failures are quarantined; the run fails
/// only on configuration errors or when every reference file fails.
pub fn run_pipeline(config: &PipelineConfig, paths: &[PathBuf]) -> anyhow::Result<PipelineOutput> {
    config.validate()?;
    let overlays = load_overlays(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .context("thread pool")?;
    let results: Vec<anyhow::Result<QdReport>> =
        pool.install(|| paths.par_iter().map(|p| process_file(p, config)).collect());

    let mut reports = Vec::new();
    let mut quarantine = Vec::new();
    let mut reference_files = 0;
    for (path, res) in paths.iter().zip(results) {
        match res {
            Ok(r) => {
                if r.meta.location == Location::Reference {
                    reference_files += 1;
                }
                reports.push(r);
            }
            Err(e) => {
                if is_reference_file(path) {
                    reference_files += 1;
                }
                quarantine.push(Quarantined {
                    path: path.clone(),
                    reason: format!("{e:#}"),
                });
            }
        }
    }

    let mut notes = Vec::new();
    let n_ref_ok = reports.iter().filter(|r| r.meta.location == Location::Reference).count();
    let n_crystal = reports.iter().filter(|r| r.meta.location == Location::InCrystal).count();
    if reference_files > 0 && n_ref_ok == 0 {
        bail!("all {reference_files} reference files failed");
    }
    let map = if n_ref_ok == 0 || n_crystal == 0 {
        notes.push("fit-only mode: a map needs at least one reference and one in-crystal curve".into());
        None
    } else {
        let records: Vec<QdRecord> = reports.iter().map(QdReport::record).collect();
        match reference_aggregate(&records) {
            Err(e) => {
                notes.push(format!("fit-only mode: {e}"));
                None
            }
            Ok(reference) => {
                for id in &reference.excluded {
                    notes.push(format!("reference {id} excluded: invalid rates"));
                }
                let map_cfg = config.map_config();
                let map = assemble_map(&records, reference.gamma_rad_hom(), &map_cfg, &overlays)?;
                let comparison = inhibition_comparison(&map, &map_cfg);
                Some(MapOutputs {
                    reference,
                    map,
                    comparison,
                })
            }
        }
    };
    Ok(PipelineOutput {
        config: config.clone(),
        reports,
        quarantine,
        map,
        notes,
    })
}

/// Best-effort header sniff for files that failed to parse completely.
fn is_reference_file(path: &Path) -> bool {
    std::fs::read_to_string(path)
        .map(|t| {
            t.lines()
                .take_while(|l| l.starts_with('#') || l.trim().is_empty())
                .any(|l| l.trim_start_matches('#').trim().replace(' ', "") == "location:reference")
        })
        .unwrap_or(false)
}

/// Expands directories into their `.txt` files; the result is sorted per
/// directory so runs do not depend on directory listing order.
pub fn collect_inputs(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|e| e == "txt"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}
