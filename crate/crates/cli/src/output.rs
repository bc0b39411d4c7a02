//! CSV and summary outputs of a pipeline run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::pipeline::PipelineOutput;

/// Formats like C's `%.9g`: 9 significant digits, trailing zeros removed.
pub fn g9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let trim = |s: String| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..9).contains(&exp) {
        trim(format!("{x:.prec$}", prec = (8 - exp).max(0) as usize))
    } else {
        let m = trim(mantissa.to_string());
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, g9)
}

pub fn rates_csv(out: &PipelineOutput) -> String {
    let mut s = String::from(
        "id,dipole,gamma_rad,gamma_nrad,gamma_db,ci_lo_gamma_rad,ci_hi_gamma_rad,ci_lo_gamma_nrad,ci_hi_gamma_nrad,\
         ci_lo_gamma_db,ci_hi_gamma_db,sigma_gamma_rad,sigma_gamma_nrad,sigma_gamma_db,location,lattice_a_nm,wavelength_nm,rep_period_ns,gamma_f,gamma_s,a_f,a_s,\
         background,r_asym,naive_rate,reduced_chi2,valid,flags\n",
    );
    for r in &out.reports {
        let ci = r.rates.ci;
        let sigma = r.rates.linear_sigma;
        let sol = &r.fit.solution;
        let flags: Vec<String> = r.rates.flags.iter().map(|f| f.to_string()).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.meta.id,
            r.meta.dipole,
            g9(r.rates.gamma_rad),
            g9(r.rates.gamma_nrad),
            g9(r.rates.gamma_db),
            opt(ci.map(|c| c.gamma_rad.lo)),
            opt(ci.map(|c| c.gamma_rad.hi)),
            opt(ci.map(|c| c.gamma_nrad.lo)),
            opt(ci.map(|c| c.gamma_nrad.hi)),
            opt(ci.map(|c| c.gamma_db.lo)),
            opt(ci.map(|c| c.gamma_db.hi)),
            opt(sigma.map(|s| s[0])),
            opt(sigma.map(|s| s[1])),
            opt(sigma.map(|s| s[2])),
            r.meta.location,
            opt(r.meta.lattice_a),
            g9(r.meta.wavelength),
            g9(r.rep_period),
            g9(sol.gamma_f),
            g9(sol.gamma_s),
            g9(sol.a_f),
            g9(sol.a_s),
            g9(r.fit.background),
            g9(r.rates.r_asym),
            g9(r.naive_rate),
            g9(r.gof.reduced_chi2),
            r.rates.valid,
            flags.join(";"),
        );
    }
    s
}

pub fn map_csv(out: &PipelineOutput) -> Option<String> {
    let m = out.map.as_ref()?;
    let mut s = String::from(
        "norm_freq,dipole,id,ldos_ratio,ci_lo,ci_hi,ldos_abs,inhibition,naive_inhibition,residual\n",
    );
    for p in &m.map.points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            g9(p.norm_freq),
            p.dipole,
            p.id,
            g9(p.ldos_ratio),
            opt(p.ci.map(|c| c.lo)),
            opt(p.ci.map(|c| c.hi)),
            g9(p.ldos_abs),
            g9(p.inhibition),
            g9(p.naive_inhibition),
            opt(p.residual),
        );
    }
    Some(s)
}

pub fn comparison_csv(out: &PipelineOutput) -> Option<String> {
    let m = out.map.as_ref()?;
    let mut s = String::from("id,dipole,norm_freq,inhibition_extracted,inhibition_naive\n");
    for c in &m.comparison {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            c.id,
            c.dipole,
            g9(c.norm_freq),
            g9(c.extracted),
            g9(c.naive)
        );
    }
    Some(s)
}

pub fn summary_text(out: &PipelineOutput) -> String {
    let mut s = String::from("# configuration\n");
    s.push_str(&out.config.echo());
    let _ = writeln!(s, "\n# files\nprocessed = {}", out.reports.len() + out.quarantine.len());
    let _ = writeln!(s, "succeeded = {}", out.reports.len());
    let _ = writeln!(s, "quarantined = {}", out.quarantine.len());
    for q in &out.quarantine {
        let _ = writeln!(s, "  {}: {}", q.path.display(), q.reason);
    }
    let flagged = out.reports.iter().filter(|r| !r.rates.flags.is_empty()).count();
    let _ = writeln!(s, "flagged = {flagged}");
    for n in &out.notes {
        let _ = writeln!(s, "note: {n}");
    }
    if let Some(m) = &out.map {
        let r = &m.reference;
        let se = r.std_error();
        let _ = writeln!(s, "\n# reference aggregate ({} dots)", r.n_used);
        for (k, name) in ["gamma_rad", "gamma_nrad", "gamma_db"].iter().enumerate() {
            let _ = writeln!(
                s,
                "{name} = {} (std {}, std error {})",
                g9(r.mean[k]),
                g9(r.std[k]),
                g9(se[k])
            );
        }
        let sm = &m.map.summary;
        let _ = writeln!(s, "\n# map");
        let _ = writeln!(s, "points = {} (X {}, Y {})", sm.n_points, sm.n_x, sm.n_y);
        let _ = writeln!(s, "ldos_ratio range = {} .. {}", g9(sm.min_ratio), g9(sm.max_ratio));
        let _ = writeln!(s, "gap points = {}", sm.gap.n_points);
        if sm.gap.n_points > 0 {
            let _ = writeln!(s, "gap mean ldos_ratio = {}", g9(sm.gap.mean_ratio));
            let _ = writeln!(s, "gap max inhibition = {}", g9(sm.gap.max_inhibition));
            let _ = writeln!(s, "gap max naive inhibition = {}", g9(sm.gap.max_naive_inhibition));
        }
        if let Some(rms) = sm.rms_residual {
            let _ = writeln!(s, "overlay rms residual = {}", g9(rms));
        }
        for w in &m.map.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
    }
    s
}

/// Writes `rates.csv`, `summary.txt` and, when a map was built, `map.csv`
/// and `comparison.csv` into `dir`. Returns the written paths.
pub fn emit_outputs(out: &PipelineOutput, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = vec![("rates.csv", rates_csv(out))];
    if let Some(m) = map_csv(out) {
        files.push(("map.csv", m));
    }
    if let Some(c) = comparison_csv(out) {
        files.push(("comparison.csv", c));
    }
    files.push(("summary.txt", summary_text(out)));
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    Ok(written)
}
