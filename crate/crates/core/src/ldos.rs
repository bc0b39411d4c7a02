//! Projected LDOS from radiative rates and the frequency-resolved map.
//!
//! The projected LDOS at the emitter follows from the ratio of its radiative
//! rate to the radiative rate in a homogeneous medium,
//! `rho_mu = (gamma_rad / gamma_rad_hom) rho(omega)` with
//! `rho(omega) = n omega^2 / (3 pi^2 c^3)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::extract::{ExtractedRates, Interval};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Homogeneous-medium DOS `n omega^2 / (3 pi^2 c^3)` in s m^-3 for a vacuum
/// wavelength in nm.
pub fn homogeneous_dos(wavelength_nm: f64, n_index: f64) -> f64 {
    let omega = 2.0 * PI * SPEED_OF_LIGHT / (wavelength_nm * 1e-9);
    n_index * omega * omega / (3.0 * PI * PI * SPEED_OF_LIGHT.powi(3))
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidRates(format!("{name} must be positive, got {v}")))
    }
}

/// `gamma_rad / gamma_rad_hom`.
pub fn ldos_ratio(gamma_rad: f64, gamma_rad_hom: f64) -> Result<f64> {
    check_rate("gamma_rad", gamma_rad)?;
    check_rate("gamma_rad_hom", gamma_rad_hom)?;
    Ok(gamma_rad / gamma_rad_hom)
}

/// `gamma_rad_hom / gamma_rad`; above one means inhibited emission.
pub fn inhibition_factor(gamma_rad_hom: f64, gamma_rad: f64) -> Result<f64> {
    check_rate("gamma_rad_hom", gamma_rad_hom)?;
    check_rate("gamma_rad", gamma_rad)?;
    Ok(gamma_rad_hom / gamma_rad)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dipole {
    X,
    Y,
}

impl fmt::Display for Dipole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dipole::X => "X",
            Dipole::Y => "Y",
        })
    }
}

impl FromStr for Dipole {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "X" | "x" => Ok(Dipole::X),
            "Y" | "y" => Ok(Dipole::Y),
            other => Err(format!("unknown dipole '{other}', expected X or Y")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Location {
    InCrystal,
    Reference,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Location::InCrystal => "in_crystal",
            Location::Reference => "reference",
        })
    }
}

impl FromStr for Location {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "in_crystal" => Ok(Location::InCrystal),
            "reference" => Ok(Location::Reference),
            other => Err(format!(
                "unknown location '{other}', expected in_crystal or reference"
            )),
        }
    }
}

/// One quantum dot with its extracted rates.
#[derive(Debug, Clone, PartialEq)]
pub struct QdRecord {
    pub id: String,
    pub dipole: Dipole,
    /// Lattice constant (nm); absent for reference dots outside the crystal.
    pub lattice_a: Option<f64>,
    /// Vacuum emission wavelength (nm).
    pub wavelength: f64,
    pub rep_period: f64,
    pub location: Location,
    pub rates: ExtractedRates,
    /// Directly measured fast decay rate (ns^-1).
    pub naive_rate: f64,
}

impl QdRecord {
    /// Normalized frequency `a / lambda`.
    pub fn norm_freq(&self) -> Option<f64> {
        self.lattice_a.map(|a| a / self.wavelength)
    }
}

/// Sample mean and standard deviation of the reference rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceAggregate {
    /// `(gamma_rad, gamma_nrad, gamma_db)`
    pub mean: [f64; 3],
    pub std: [f64; 3],
    pub n_used: usize,
    /// Ids of reference records excluded because their extraction is invalid.
    pub excluded: Vec<String>,
}

impl ReferenceAggregate {
    pub fn gamma_rad_hom(&self) -> f64 {
        self.mean[0]
    }

    pub fn std_error(&self) -> [f64; 3] {
        let k = (self.n_used as f64).sqrt();
        self.std.map(|s| s / k)
    }
}

/// Averages the valid reference records; in-crystal records are ignored.
pub fn reference_aggregate(records: &[QdRecord]) -> Result<ReferenceAggregate> {
    let mut refs: Vec<&QdRecord> = records
        .iter()
        .filter(|r| r.location == Location::Reference)
        .collect();
    refs.sort_by(|a, b| a.id.cmp(&b.id));
    let (good, bad): (Vec<&QdRecord>, Vec<&QdRecord>) = refs.into_iter().partition(|r| r.rates.valid);
    if good.len() < 2 {
        return Err(Error::TooFewReferences { found: good.len() });
    }
    let n = good.len() as f64;
    let values: Vec<[f64; 3]> = good
        .iter()
        .map(|r| [r.rates.gamma_rad, r.rates.gamma_nrad, r.rates.gamma_db])
        .collect();
    let mut mean = [0.0; 3];
    let mut std = [0.0; 3];
    for k in 0..3 {
        mean[k] = values.iter().map(|v| v[k]).sum::<f64>() / n;
        let ss: f64 = values.iter().map(|v| (v[k] - mean[k]).powi(2)).sum();
        std[k] = (ss / (n - 1.0)).sqrt();
    }
    Ok(ReferenceAggregate {
        mean,
        std,
        n_used: good.len(),
        excluded: bad.into_iter().map(|r| r.id.clone()).collect(),
    })
}

/// Calculated LDOS ratio versus normalized frequency for one dipole.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryCurve {
    pub dipole: Dipole,
    /// `(norm_freq, ldos_ratio)` sorted by frequency.
    pub points: Vec<(f64, f64)>,
}

impl TheoryCurve {
    pub fn new(dipole: Dipole, mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidOverlay("at least two points required".into()));
        }
        if points.iter().any(|(f, v)| !f.is_finite() || !v.is_finite()) {
            return Err(Error::InvalidOverlay("non-finite value".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidOverlay("duplicate frequency".into()));
        }
        Ok(Self { dipole, points })
    }

    /// Affine remap `f -> scale * f + offset` of the frequency axis, used to
    /// stretch a calculated band gap onto the measured membrane thickness.
    pub fn remapped(&self, scale: f64, offset: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidOverlay(format!("remap scale must be positive, got {scale}")));
        }
        Ok(Self {
            dipole: self.dipole,
            points: self.points.iter().map(|&(f, v)| (scale * f + offset, v)).collect(),
        })
    }

    pub fn span(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Linear interpolation; `None` outside the frequency span.
    pub fn interpolate(&self, f: f64) -> Option<f64> {
        let (lo, hi) = self.span();
        if !(lo..=hi).contains(&f) {
            return None;
        }
        let i = self.points.partition_point(|p| p.0 < f);
        if i == 0 {
            return Some(self.points[0].1);
        }
        let (f0, v0) = self.points[i - 1];
        let (f1, v1) = self.points[i];
        Some(v0 + (v1 - v0) * (f - f0) / (f1 - f0))
    }
}

/// Selection windows and constants for map assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapConfig {
    pub n_index: f64,
    /// Accepted emission wavelengths (nm).
    pub wavelength_window: (f64, f64),
    /// Band-gap window in normalized frequency.
    pub gap_window: (f64, f64),
    /// Accepted lattice constants (nm) for in-crystal dots.
    pub lattice_range: (f64, f64),
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            n_index: 3.5,
            wavelength_window: (965.0, 975.0),
            gap_window: (0.25, 0.32),
            lattice_range: (200.0, 385.0),
        }
    }
}

impl MapConfig {
    pub fn in_gap(&self, norm_freq: f64) -> bool {
        self.gap_window.0 <= norm_freq && norm_freq <= self.gap_window.1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdosPoint {
    pub id: String,
    pub dipole: Dipole,
    pub norm_freq: f64,
    pub ldos_ratio: f64,
    /// Absolute projected LDOS (s m^-3).
    pub ldos_abs: f64,
    pub inhibition: f64,
    /// Inhibition from the directly measured fast rate.
    pub naive_inhibition: f64,
    /// 68% interval of the ratio from the rate bootstrap.
    pub ci: Option<Interval>,
    /// `ldos_ratio - theory` when an overlay covers the point.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapWarning {
    InvalidRecord(String),
    OutsideWavelengthWindow(String),
    LatticeOutOfRange(String),
    MissingLattice(String),
    OutsideOverlay(String),
}

impl fmt::Display for MapWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapWarning::InvalidRecord(id) => write!(f, "{id}: invalid rates, excluded"),
            MapWarning::OutsideWavelengthWindow(id) => write!(f, "{id}: wavelength outside window, excluded"),
            MapWarning::LatticeOutOfRange(id) => write!(f, "{id}: lattice constant outside range"),
            MapWarning::MissingLattice(id) => write!(f, "{id}: no lattice constant, excluded"),
            MapWarning::OutsideOverlay(id) => write!(f, "{id}: outside theory overlay span"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GapStats {
    pub n_points: usize,
    pub mean_ratio: f64,
    pub max_inhibition: f64,
    pub max_naive_inhibition: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapSummary {
    pub n_points: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub gap: GapStats,
    /// Root-mean-square of the overlay residuals, if any point is covered.
    pub rms_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdosMap {
    /// Sorted by `(norm_freq, dipole, id)`.
    pub points: Vec<LdosPoint>,
    pub summary: MapSummary,
    pub warnings: Vec<MapWarning>,
}

impl LdosMap {
    pub fn dipole_points(&self, dipole: Dipole) -> impl Iterator<Item = &LdosPoint> {
        self.points.iter().filter(move |p| p.dipole == dipole)
    }
}

/// Builds the LDOS map from in-crystal records.
///
/// `overlays` holds at most one theory curve per dipole. The result does not
/// depend on the order of `records`.
pub fn assemble_map(
    records: &[QdRecord],
    gamma_rad_hom: f64,
    config: &MapConfig,
    overlays: &[TheoryCurve],
) -> Result<LdosMap> {
    check_rate("gamma_rad_hom", gamma_rad_hom)?;
    let mut sorted: Vec<&QdRecord> = records
        .iter()
        .filter(|r| r.location == Location::InCrystal)
        .collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let mut warnings = Vec::new();
    let mut points = Vec::new();
    for rec in sorted {
        if !rec.rates.valid || rec.rates.gamma_rad <= 0.0 {
            warnings.push(MapWarning::InvalidRecord(rec.id.clone()));
            continue;
        }
        let (wl_lo, wl_hi) = config.wavelength_window;
        if !(wl_lo..=wl_hi).contains(&rec.wavelength) {
            warnings.push(MapWarning::OutsideWavelengthWindow(rec.id.clone()));
            continue;
        }
        let Some(a) = rec.lattice_a else {
            warnings.push(MapWarning::MissingLattice(rec.id.clone()));
            continue;
        };
        if !(config.lattice_range.0..=config.lattice_range.1).contains(&a) {
            warnings.push(MapWarning::LatticeOutOfRange(rec.id.clone()));
        }
        let norm_freq = a / rec.wavelength;
        let ratio = ldos_ratio(rec.rates.gamma_rad, gamma_rad_hom)?;
        let naive_inhibition = if rec.naive_rate > 0.0 {
            gamma_rad_hom / rec.naive_rate
        } else {
            f64::NAN
        };
        let residual = match overlays.iter().find(|o| o.dipole == rec.dipole) {
            Some(curve) => match curve.interpolate(norm_freq) {
                Some(theory) => Some(ratio - theory),
                None => {
                    warnings.push(MapWarning::OutsideOverlay(rec.id.clone()));
                    None
                }
            },
            None => None,
        };
        points.push(LdosPoint {
            id: rec.id.clone(),
            dipole: rec.dipole,
            norm_freq,
            ldos_ratio: ratio,
            ldos_abs: ratio * homogeneous_dos(rec.wavelength, config.n_index),
            inhibition: 1.0 / ratio,
            naive_inhibition,
            ci: rec.rates.ci.map(|ci| Interval {
                lo: ci.gamma_rad.lo / gamma_rad_hom,
                hi: ci.gamma_rad.hi / gamma_rad_hom,
            }),
            residual,
        });
    }
    if points.is_empty() {
        return Err(Error::EmptyMap);
    }
    points.sort_by(|a, b| {
        a.norm_freq
            .total_cmp(&b.norm_freq)
            .then(a.dipole.cmp(&b.dipole))
            .then(a.id.cmp(&b.id))
    });

    let ratios = points.iter().map(|p| p.ldos_ratio);
    let min_ratio = ratios.clone().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.fold(f64::NEG_INFINITY, f64::max);
    let in_gap: Vec<&LdosPoint> = points.iter().filter(|p| config.in_gap(p.norm_freq)).collect();
    let gap = if in_gap.is_empty() {
        GapStats::default()
    } else {
        GapStats {
            n_points: in_gap.len(),
            mean_ratio: in_gap.iter().map(|p| p.ldos_ratio).sum::<f64>() / in_gap.len() as f64,
            max_inhibition: in_gap.iter().map(|p| p.inhibition).fold(0.0, f64::max),
            max_naive_inhibition: in_gap.iter().map(|p| p.naive_inhibition).fold(0.0, f64::max),
        }
    };
    let residuals: Vec<f64> = points.iter().filter_map(|p| p.residual).collect();
    let rms_residual = (!residuals.is_empty())
        .then(|| (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt());

    let summary = MapSummary {
        n_points: points.len(),
        n_x: points.iter().filter(|p| p.dipole == Dipole::X).count(),
        n_y: points.iter().filter(|p| p.dipole == Dipole::Y).count(),
        min_ratio,
        max_ratio,
        gap,
        rms_residual,
    };
    Ok(LdosMap {
        points,
        summary,
        warnings,
    })
}

/// One row of the extracted-versus-naive inhibition comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct InhibitionComparison {
    pub id: String,
    pub dipole: Dipole,
    pub norm_freq: f64,
    pub extracted: f64,
    pub naive: f64,
}

/// Extracted and naive inhibition factors of the points inside the gap window,
/// strongest inhibition first.
pub fn inhibition_comparison(map: &LdosMap, config: &MapConfig) -> Vec<InhibitionComparison> {
    let mut rows: Vec<InhibitionComparison> = map
        .points
        .iter()
        .filter(|p| config.in_gap(p.norm_freq))
        .map(|p| InhibitionComparison {
            id: p.id.clone(),
            dipole: p.dipole,
            norm_freq: p.norm_freq,
            extracted: p.inhibition,
            naive: p.naive_inhibition,
        })
        .collect();
    rows.sort_by(|a, b| b.extracted.total_cmp(&a.extracted).then(a.id.cmp(&b.id)));
    rows
}
