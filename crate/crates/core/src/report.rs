//! CSV, JSON and SVG emission for sweeps and pulse designs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inequality::{SweepResult, CHSH_CLASSICAL_BOUND, TSIRELSON};
use crate::noise::NoiseParams;

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Formats with 12 significant digits in scientific notation.
pub fn sig12(x: f64) -> String {
    // -0 would print differently from 0 for values that are equal
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.11e}")
}

/// `beta,eta,value`, one row per grid cell in sweep order.
pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut out = String::from("beta,eta,value\n");
    for p in &sweep.points {
        let _ = writeln!(out, "{},{},{}", sig12(p.beta), sig12(p.eta), sig12(p.value));
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub l: usize,
    pub max: f64,
    pub argmax: [f64; 2],
    pub min: f64,
    pub bound_classical: f64,
    pub bound_quantum: f64,
    pub via: String,
    pub grid: [f64; 3],
    pub n_points: usize,
    pub noise: Option<NoiseParams>,
    pub seed: u64,
}

impl SweepSummary {
    pub fn new(sweep: &SweepResult, seed: u64) -> Self {
        Self {
            l: sweep.l,
            max: sweep.max_value,
            argmax: [sweep.argmax.0, sweep.argmax.1],
            min: sweep.min_value,
            bound_classical: CHSH_CLASSICAL_BOUND,
            bound_quantum: TSIRELSON,
            via: sweep.via.to_string(),
            grid: [sweep.grid.start, sweep.grid.stop, sweep.grid.step],
            n_points: sweep.points.len(),
            noise: sweep.noise.clone(),
            seed,
        }
    }
}

/// Diverging blue–white–red map on `[−2√2, 2√2]`.
fn color(value: f64) -> String {
    let t = (value / TSIRELSON).clamp(-1.0, 1.0);
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Marching-squares segments of `level` on the cell-centre lattice, in
/// lattice coordinates.
fn contour_segments(values: &[Vec<f64>], level: f64) -> Vec<[(f64, f64); 2]> {
    let n = values.len();
    let mut segs = Vec::new();
    if n < 2 {
        return segs;
    }
    let lerp = |a: f64, b: f64| if (b - a).abs() < 1e-300 { 0.5 } else { ((level - a) / (b - a)).clamp(0.0, 1.0) };
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            // corners counterclockwise: (i,j) (i+1,j) (i+1,j+1) (i,j+1); i is the β index
            let c = [values[i][j], values[i + 1][j], values[i + 1][j + 1], values[i][j + 1]];
            let pos = [(i as f64, j as f64), ((i + 1) as f64, j as f64), ((i + 1) as f64, (j + 1) as f64), (i as f64, (j + 1) as f64)];
            let mut crossings = Vec::new();
            for e in 0..4 {
                let (a, b) = (c[e], c[(e + 1) % 4]);
                if (a >= level) != (b >= level) {
                    let t = lerp(a, b);
                    let (pa, pb) = (pos[e], pos[(e + 1) % 4]);
                    crossings.push((pa.0 + t * (pb.0 - pa.0), pa.1 + t * (pb.1 - pa.1)));
                }
            }
            match crossings.len() {
                2 => segs.push([crossings[0], crossings[1]]),
                4 => {
                    segs.push([crossings[0], crossings[1]]);
                    segs.push([crossings[2], crossings[3]]);
                }
                _ => {}
            }
        }
    }
    segs
}

/// Heatmap of a sweep with `β` across and `η` up, on a fixed colour scale,
/// with the `|I| = 2` contours drawn in black.
pub fn sweep_svg(sweep: &SweepResult) -> String {
    let axis = sweep.grid.points();
    let n = axis.len();
    let cell = (480.0 / n as f64).max(4.0);
    let (left, top) = (70.0, 40.0);
    let size = cell * n as f64;
    let values: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| sweep.points[i * n + j].value).collect()).collect();

    let mut s = String::new();
    let w = left + size + 110.0;
    let h = top + size + 60.0;
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle">I_{} (max {:.4} at β={:.4}, η={:.4})</text>"#,
        left + size / 2.0,
        sweep.l,
        sweep.max_value,
        sweep.argmax.0,
        sweep.argmax.1
    );
    for i in 0..n {
        for j in 0..n {
            let x = left + i as f64 * cell;
            let y = top + (n - 1 - j) as f64 * cell;
            let _ = writeln!(
                s,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="{}"/>"#,
                color(values[i][j])
            );
        }
    }
    let to_px = |(i, j): (f64, f64)| (left + (i + 0.5) * cell, top + (n as f64 - 0.5 - j) * cell);
    for level in [CHSH_CLASSICAL_BOUND, -CHSH_CLASSICAL_BOUND] {
        for [a, b] in contour_segments(&values, level) {
            let (pa, pb) = (to_px(a), to_px(b));
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="1.5"/>"#,
                pa.0, pa.1, pb.0, pb.1
            );
        }
    }
    let _ = writeln!(s, r#"<rect x="{left}" y="{top}" width="{size:.2}" height="{size:.2}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">β (rad)</text>"#, left + size / 2.0, top + size + 40.0);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">η (rad)</text>"#,
        top + size / 2.0,
        top + size / 2.0
    );
    for (k, v) in [(0, axis[0]), (n - 1, axis[n - 1])] {
        let x = left + (k as f64 + 0.5) * cell;
        let y = top + (n as f64 - 0.5 - k as f64) * cell;
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{v:.3}</text>"#, top + size + 18.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{y:.1}" text-anchor="end">{v:.3}</text>"#, left - 6.0);
    }
    // colour bar
    let bx = left + size + 30.0;
    let steps = 40;
    for k in 0..steps {
        let v = TSIRELSON * (1.0 - 2.0 * (k as f64 + 0.5) / steps as f64);
        let y = top + k as f64 * size / steps as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{bx:.1}" y="{y:.2}" width="20" height="{:.2}" fill="{}"/>"#,
            size / steps as f64 + 0.5,
            color(v)
        );
    }
    for (v, label) in [(TSIRELSON, "2√2"), (2.0, "2"), (0.0, "0"), (-2.0, "-2"), (-TSIRELSON, "-2√2")] {
        let y = top + (1.0 - v / TSIRELSON) / 2.0 * size;
        let _ = writeln!(s, r#"<line x1="{bx:.1}" y1="{y:.2}" x2="{:.1}" y2="{y:.2}" stroke="black"/>"#, bx + 24.0);
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.2}">{label}</text>"#, bx + 28.0, y + 4.0);
    }
    s.push_str("</svg>\n");
    s
}
