//! Log-log SVG charts and gnuplot data files from experiment CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::experiment::CSV_HEADER;

#[derive(Clone, Debug, PartialEq)]
pub struct PlotRow {
    pub method: String,
    pub k: u32,
    pub mesh: String,
    pub dof: usize,
    pub ee: f64,
    pub scn: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Ee,
    Scn,
}

impl Quantity {
    fn tag(self) -> &'static str {
        match self {
            Quantity::Ee => "ee",
            Quantity::Scn => "scn",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Quantity::Ee => "EE",
            Quantity::Scn => "SCN",
        }
    }

    fn of(self, r: &PlotRow) -> f64 {
        match self {
            Quantity::Ee => r.ee,
            Quantity::Scn => r.scn,
        }
    }
}

/// A skipped CSV line, 1-based.
#[derive(Clone, Debug, PartialEq)]
pub struct Skipped {
    pub line: usize,
    pub reason: String,
}

fn parse_row(line: &str) -> std::result::Result<PlotRow, String> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != 10 {
        return Err(format!("expected 10 fields, found {}", f.len()));
    }
    let num = |i: usize| f[i].parse::<f64>().map_err(|_| format!("field {} ('{}') is not a number", i + 1, f[i]));
    Ok(PlotRow {
        method: f[0].to_string(),
        k: f[1].parse().map_err(|_| format!("degree '{}' is not an integer", f[1]))?,
        mesh: f[2].to_string(),
        dof: f[5].parse().map_err(|_| format!("dof '{}' is not an integer", f[5]))?,
        ee: num(6)?,
        scn: num(7)?,
    })
}

/// Parses CSV text. Comment lines and the header are ignored; malformed
/// rows are skipped and reported.
pub fn parse_csv(text: &str) -> (Vec<PlotRow>, Vec<Skipped>) {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t == CSV_HEADER {
            continue;
        }
        match parse_row(t) {
            Ok(r) => rows.push(r),
            Err(reason) => {
                log::warn!("line {}: {reason}; row skipped", i + 1);
                skipped.push(Skipped { line: i + 1, reason });
            }
        }
    }
    (rows, skipped)
}

pub struct Curve {
    pub label: String,
    /// `(sqrt(dof), value)`, ascending in the first component.
    pub points: Vec<(f64, f64)>,
}

/// Curves of one suite and quantity, in first-appearance order.
pub fn curves(rows: &[PlotRow], crack: bool, q: Quantity) -> Vec<Curve> {
    let mut out: Vec<Curve> = Vec::new();
    for r in rows.iter().filter(|r| (r.mesh == "crack") == crack) {
        let v = q.of(r);
        if !(v.is_finite() && v > 0.0 && r.dof > 0) {
            continue;
        }
        let label = if crack { r.method.clone() } else { format!("{} k={} {}", r.method, r.k, r.mesh) };
        let p = ((r.dof as f64).sqrt(), v);
        match out.iter_mut().find(|c| c.label == label) {
            Some(c) => c.points.push(p),
            None => out.push(Curve { label, points: vec![p] }),
        }
    }
    for c in &mut out {
        c.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

/// Gnuplot data: one indexed block per curve.
pub fn dat_text(curves: &[Curve], q: Quantity) -> String {
    let mut s = String::new();
    writeln!(s, "# sqrt_dof {}", q.label()).unwrap();
    for (i, c) in curves.iter().enumerate() {
        if i > 0 {
            s.push_str("\n\n");
        }
        writeln!(s, "# {}", c.label).unwrap();
        for (x, y) in &c.points {
            writeln!(s, "{x:e} {y:e}").unwrap();
        }
    }
    s
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const DASHES: [&str; 3] = ["", "6,3", "2,2"];

fn decade_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let (a, b) = (lo.log10().floor(), hi.log10().ceil());
    if a == b {
        (a, a + 1.0)
    } else {
        (a, b)
    }
}

/// Standalone log-log SVG chart.
pub fn svg_text(title: &str, curves: &[Curve], q: Quantity) -> String {
    let (w, h) = (720.0, 520.0);
    let (left, right, top, bottom) = (80.0, 220.0, 40.0, 60.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let (x0, x1) = decade_range(curves.iter().flat_map(|c| c.points.iter().map(|p| p.0)));
    let (y0, y1) = decade_range(curves.iter().flat_map(|c| c.points.iter().map(|p| p.1)));
    let sx = |x: f64| left + (x.log10() - x0) / (x1 - x0) * pw;
    let sy = |y: f64| top + ph - (y.log10() - y0) / (y1 - y0) * ph;
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#, left + pw / 2.0).unwrap();
    for d in (x0 as i32)..=(x1 as i32) {
        let x = left + (d as f64 - x0) / (x1 - x0) * pw;
        writeln!(s, r##"<line x1="{x:.1}" y1="{top}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/>"##, top + ph).unwrap();
        writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">1e{d}</text>"#, top + ph + 18.0).unwrap();
    }
    for d in (y0 as i32)..=(y1 as i32) {
        let y = top + ph - (d as f64 - y0) / (y1 - y0) * ph;
        writeln!(s, r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/>"##, left + pw).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{d}</text>"#, left - 6.0, y + 4.0).unwrap();
    }
    writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">sqrt(DOF)</text>"#, left + pw / 2.0, h - 16.0).unwrap();
    writeln!(s, r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}</text>"#, top + ph / 2.0, top + ph / 2.0, q.label()).unwrap();
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = DASHES[(i / PALETTE.len()) % DASHES.len()];
        let pts: Vec<String> = c.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5" stroke-dasharray="{dash}"/>"#, pts.join(" ")).unwrap();
        for &(x, y) in &c.points {
            writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, sx(x), sy(y)).unwrap();
        }
        let ly = top + 10.0 + 16.0 * i as f64;
        let lx = left + pw + 16.0;
        writeln!(s, r#"<line x1="{lx}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="1.5" stroke-dasharray="{dash}"/>"#, lx + 24.0).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 30.0, ly + 4.0, c.label).unwrap();
    }
    if curves.is_empty() {
        writeln!(s, r#"<text x="{:.1}" y="{:.1}">no data: no methods selected</text>"#, left + pw + 16.0, top + 14.0).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `<suite>_<ee|scn>.svg` and `.dat` for each suite present in the
/// CSV (both suites when it has no rows). Returns the files written and the
/// skipped lines.
pub fn emit_plots(csv_path: &Path, out_dir: &Path) -> Result<(Vec<PathBuf>, Vec<Skipped>)> {
    let text = fs::read_to_string(csv_path)?;
    let (rows, skipped) = parse_csv(&text);
    fs::create_dir_all(out_dir)?;
    let mut suites: Vec<bool> = Vec::new();
    for crack in [false, true] {
        if rows.iter().any(|r| (r.mesh == "crack") == crack) {
            suites.push(crack);
        }
    }
    if suites.is_empty() {
        suites = vec![false, true];
    }
    let mut files = Vec::new();
    for crack in suites {
        let suite = if crack { "crack" } else { "smooth" };
        for q in [Quantity::Ee, Quantity::Scn] {
            let cs = curves(&rows, crack, q);
            let stem = format!("{suite}_{}", q.tag());
            let svg = out_dir.join(format!("{stem}.svg"));
            fs::write(&svg, svg_text(&format!("{suite}: {} vs sqrt(DOF)", q.label()), &cs, q))?;
            let dat = out_dir.join(format!("{stem}.dat"));
            fs::write(&dat, dat_text(&cs, q))?;
            files.push(svg);
            files.push(dat);
        }
    }
    Ok((files, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "method,k,mesh,N,h,dof,EE,SCN,assembly_s,solve_s
fem,1,uniform,8,1.25e-1,81,5e-2,3e1,0.001,0.001
fem,1,uniform,16,6.25e-2,289,2.5e-2,1.2e2,0.001,0.001
fem,1,uniform,oops
cgfem,1,crack,9,2.2e-1,100,4e-2,1e2,0,0
fem,1,uniform,32,3.125e-2,1089,x,1e3,0,0
#slope,fem,1,uniform,EE,1.0,SCN,-2.0
";

    #[test]
    fn malformed_rows_are_reported_by_line() {
        let (rows, skipped) = parse_csv(SAMPLE);
        assert_eq!(rows.len(), 3);
        assert_eq!(skipped.iter().map(|s| s.line).collect::<Vec<_>>(), [4, 6]);
    }

    #[test]
    fn curves_use_sqrt_dof() {
        let (rows, _) = parse_csv(SAMPLE);
        let c = curves(&rows, false, Quantity::Ee);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].points, vec![(9.0, 5e-2), (17.0, 2.5e-2)]);
        assert_eq!(curves(&rows, true, Quantity::Scn)[0].points, vec![(10.0, 1e2)]);
    }

    #[test]
    fn empty_chart_has_note() {
        let svg = svg_text("t", &[], Quantity::Ee);
        assert!(svg.contains("no data"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("r.csv");
        fs::write(&csv, SAMPLE).unwrap();
        let (files, skipped) = emit_plots(&csv, &dir.path().join("plots")).unwrap();
        assert_eq!(files.len(), 8);
        assert_eq!(skipped.len(), 2);
        let dat = fs::read_to_string(dir.path().join("plots/smooth_ee.dat")).unwrap();
        assert!(dat.contains("9e0 5e-2"));
    }
}
