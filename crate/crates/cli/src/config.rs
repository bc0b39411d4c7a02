//! Pipeline configuration: `key = value` lines, `#` starts a comment.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Overrides the per-file `rep_period_ns` header when set.
    pub rep_period: Option<f64>,
    pub wavelength_window: (f64, f64),
    pub lattice_range: (f64, f64),
    /// `rho_d0 / rho_b0`
    pub beta: f64,
    pub n_index: f64,
    pub n_boot: usize,
    pub gap_window: (f64, f64),
    pub seed: u64,
    pub overlay_x: Option<PathBuf>,
    pub overlay_y: Option<PathBuf>,
    pub overlay_scale: f64,
    pub overlay_offset: f64,
    /// Worker threads; 0 uses all cores.
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            rep_period: None,
            wavelength_window: (965.0, 975.0),
            lattice_range: (200.0, 385.0),
            beta: 1.0,
            n_index: 3.5,
            n_boot: 200,
            gap_window: (0.25, 0.32),
            seed: 0,
            overlay_x: None,
            overlay_y: None,
            overlay_scale: 1.0,
            overlay_offset: 0.0,
            jobs: 0,
        }
    }
}

fn parse_pair(v: &str) -> anyhow::Result<(f64, f64)> {
    let (a, b) = v
        .split_once(',')
        .with_context(|| format!("expected 'lo, hi', got '{v}'"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

impl PipelineConfig {
    /// Applies one `key = value` setting. Relative overlay paths are resolved
    /// against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> anyhow::Result<()> {
        let v = value.trim();
        match key.trim() {
            "rep_period" => self.rep_period = if v == "auto" { None } else { Some(v.parse()?) },
            "wavelength_window" => self.wavelength_window = parse_pair(v)?,
            "lattice_range" => self.lattice_range = parse_pair(v)?,
            "beta" => self.beta = v.parse()?,
            "n_index" => self.n_index = v.parse()?,
            "n_boot" => self.n_boot = v.parse()?,
            "gap_window" => self.gap_window = parse_pair(v)?,
            "seed" => self.seed = v.parse()?,
            "overlay_x" => self.overlay_x = Some(base.join(v)),
            "overlay_y" => self.overlay_y = Some(base.join(v)),
            "overlay_scale" => self.overlay_scale = v.parse()?,
            "overlay_offset" => self.overlay_offset = v.parse()?,
            "jobs" => self.jobs = v.parse()?,
            other => bail!("unknown key '{other}'"),
        }
        Ok(())
    }

    pub fn parse(text: &str, base: &Path) -> anyhow::Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected 'key = value'", i + 1))?;
            cfg.set(k, v, base).with_context(|| format!("line {}", i + 1))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        for (name, (lo, hi)) in [
            ("wavelength_window", self.wavelength_window),
            ("lattice_range", self.lattice_range),
            ("gap_window", self.gap_window),
        ] {
            if !(lo < hi) {
                bail!("{name} must be ordered, got ({lo}, {hi})");
            }
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            bail!("beta must be nonnegative, got {}", self.beta);
        }
        if !(self.n_index > 0.0) {
            bail!("n_index must be positive, got {}", self.n_index);
        }
        if let Some(t) = self.rep_period {
            if !(t > 0.0) {
                bail!("rep_period must be positive, got {t}");
            }
        }
        if !(self.overlay_scale > 0.0) {
            bail!("overlay_scale must be positive, got {}", self.overlay_scale);
        }
        Ok(())
    }

    pub fn map_config(&self) -> probekit::ldos::MapConfig {
        probekit::ldos::MapConfig {
            n_index: self.n_index,
            wavelength_window: self.wavelength_window,
            gap_window: self.gap_window,
            lattice_range: self.lattice_range,
        }
    }

    /// Canonical `key = value` text; parsing it reproduces the configuration.
    pub fn echo(&self) -> String {
        let pair = |p: (f64, f64)| format!("{}, {}", p.0, p.1);
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut lines = vec![
            format!(
                "rep_period = {}",
                self.rep_period.map_or("auto".to_string(), |t| t.to_string())
            ),
            format!("wavelength_window = {}", pair(self.wavelength_window)),
            format!("lattice_range = {}", pair(self.lattice_range)),
            format!("beta = {}", self.beta),
            format!("n_index = {}", self.n_index),
            format!("n_boot = {}", self.n_boot),
            format!("gap_window = {}", pair(self.gap_window)),
            format!("seed = {}", self.seed),
        ];
        if let Some(p) = path(&self.overlay_x) {
            lines.push(format!("overlay_x = {p}"));
        }
        if let Some(p) = path(&self.overlay_y) {
            lines.push(format!("overlay_y = {p}"));
        }
        lines.push(format!("overlay_scale = {}", self.overlay_scale));
        lines.push(format!("overlay_offset = {}", self.overlay_offset));
        lines.join("\n") + "\n"
    }
}
