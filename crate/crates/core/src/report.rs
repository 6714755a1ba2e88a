//! CSV tables and standalone SVG line charts of diagnostics time series.

use std::fmt::Write as _;

use crate::diagnostics::DiagnosticsRecord;
use crate::ensemble::EnsembleResult;
use crate::error::{Result, ScnsError};

/// One table: a header of column names and rows of equal length.
#[derive(Clone, Debug, PartialEq)]
pub struct Family {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
    /// Optional `(lower, upper)` column indices drawn as a shaded band.
    pub band: Option<(usize, usize)>,
}

fn family(name: &'static str, columns: Vec<&'static str>, records: &[DiagnosticsRecord], row: impl Fn(&DiagnosticsRecord) -> Vec<f64>) -> Family {
    Family {
        name,
        columns,
        rows: records.iter().map(row).collect(),
        band: None,
    }
}

/// The diagnostic families of a single run.
pub fn run_families(records: &[DiagnosticsRecord], c_dagger: f64) -> Vec<Family> {
    let mut me = 0.0;
    let me_rows: Vec<Vec<f64>> = records
        .iter()
        .map(|r| {
            me += r.me_inc;
            vec![r.t, r.me_inc, me]
        })
        .collect();
    let mut out = vec![
        family("conservation", vec!["t", "mass_n", "linf_c"], records, |r| vec![r.t, r.mass_n, r.linf_c]),
        family("energy", vec!["t", "entropy", "grad_psi_energy", "kinetic", "energy"], records, |r| {
            vec![r.t, r.entropy, r.grad_psi_energy, r.kinetic, r.energy(c_dagger)]
        }),
        family("dissipation", vec!["t", "diss_n", "diss_c4", "diss_lap", "diss_u"], records, |r| {
            vec![r.t, r.diss_n, r.diss_c4, r.diss_lap, r.diss_u]
        }),
        Family {
            name: "martingale",
            columns: vec!["t", "me_inc", "me"],
            rows: me_rows,
            band: None,
        },
        family("aux", vec!["t", "aux_grad_sqrt_n", "aux_grad_c_quarter", "aux_n_l53", "aux_u_l103"], records, |r| {
            vec![r.t, r.aux_grad_sqrt_n, r.aux_grad_c_quarter, r.aux_n_l53, r.aux_u_l103]
        }),
    ];
    if records.iter().all(|r| r.ms_ratio.is_some()) && !records.is_empty() {
        out.push(family("boundary", vec!["t", "ms_ratio"], records, |r| vec![r.t, r.ms_ratio.unwrap_or(0.0)]));
    }
    out
}

/// Pooled `𝓜_E` mean with a ±2 standard-error band.
pub fn ensemble_family(result: &EnsembleResult) -> Family {
    let rows = result
        .times
        .iter()
        .zip(result.me_mean.iter().zip(&result.me_stderr))
        .map(|(&t, (&m, &s))| vec![t, m, s, m - 2.0 * s, m + 2.0 * s])
        .collect();
    Family {
        name: "martingale_ensemble",
        columns: vec!["t", "me_mean", "me_stderr", "me_lo", "me_hi"],
        rows,
        band: Some((3, 4)),
    }
}

pub fn to_csv(f: &Family) -> Result<String> {
    let mut s = f.columns.join(",");
    s.push('\n');
    for row in &f.rows {
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(ScnsError::NonFinite(format!("{} table value {v}", f.name)));
        }
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    Ok(s)
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// A line chart of every non-time column against column 0.
pub fn to_svg(f: &Family) -> Result<String> {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (70.0, 160.0, 30.0, 40.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="18" font-size="14" text-anchor="middle">{}</text>"#, left + pw / 2.0, f.name);
    if f.rows.is_empty() {
        s.push_str("</svg>\n");
        return Ok(s);
    }
    for row in &f.rows {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(ScnsError::NonFinite(format!("{} chart value", f.name)));
        }
    }
    let series: Vec<usize> = (1..f.columns.len())
        .filter(|c| f.band.is_none_or(|(lo, hi)| *c != lo && *c != hi) && f.columns[*c] != "me_stderr")
        .collect();
    let plotted: Vec<usize> = series.iter().copied().chain(f.band.map(|b| [b.0, b.1]).into_iter().flatten()).collect();
    let t0 = f.rows[0][0];
    let t1 = f.rows[f.rows.len() - 1][0];
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for row in &f.rows {
        for &c in &plotted {
            y0 = y0.min(row[c]);
            y1 = y1.max(row[c]);
        }
    }
    if y1 - y0 < 1e-300 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let tspan = if t1 > t0 { t1 - t0 } else { 1.0 };
    let px = |t: f64| left + (t - t0) / tspan * pw;
    let py = |y: f64| top + (y1 - y) / (y1 - y0) * ph;
    let _ = writeln!(s, r##"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
    for k in 0..=4 {
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        let ft = t0 + tspan * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{fy:.3e}</text>"#, left - 4.0, py(fy) + 4.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{ft:.3}</text>"#, px(ft), top + ph + 16.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">t</text>"#, left + pw / 2.0, h - 6.0);
    if let Some((lo, hi)) = f.band {
        let mut pts: Vec<String> = f.rows.iter().map(|r| format!("{:.2},{:.2}", px(r[0]), py(r[hi]))).collect();
        pts.extend(f.rows.iter().rev().map(|r| format!("{:.2},{:.2}", px(r[0]), py(r[lo]))));
        let _ = writeln!(s, r##"<polygon points="{}" fill="#1f77b4" fill-opacity="0.2" stroke="none"/>"##, pts.join(" "));
    }
    for (k, &c) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = f.rows.iter().map(|r| format!("{:.2},{:.2}", px(r[0]), py(r[c]))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
        let ly = top + 14.0 * k as f64 + 8.0;
        let lx = left + pw + 10.0;
        let _ = writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, lx + 20.0, ly + 4.0, f.columns[c]);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rejects_nan() {
        let f = Family {
            name: "x",
            columns: vec!["t", "v"],
            rows: vec![vec![0.0, f64::NAN]],
            band: None,
        };
        assert!(to_csv(&f).is_err());
        assert!(to_svg(&f).is_err());
    }
}
