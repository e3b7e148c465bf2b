//! Output artifacts: field and convergence CSVs, solver reports and
//! dependency-free SVG line plots.

use std::fmt::Write as _;
use std::path::Path;

use crate::c64;
use crate::field::MultiCellField;
use crate::mesh::{CellMesh, PeriodicBasis};
use crate::Result;

/// A flat key/value run report, written as plain `key = value` lines.
#[derive(Default)]
pub struct SolverReport {
    entries: Vec<(String, String)>,
}

impl SolverReport {
    /// Appends one entry.
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Renders the report.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Writes the report to a file.
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

/// Writes a multi-cell field as CSV with columns
/// cell_index, x1, x2, re_u, im_u (x1 in cell-local global coordinates).
pub fn write_field_csv(
    path: &Path,
    field: &MultiCellField,
    mesh: &CellMesh,
    basis: &PeriodicBasis,
) -> Result<()> {
    let mut out = String::from("cell_index,x1,x2,re_u,im_u\n");
    for (off, cell) in field.cells.iter().enumerate() {
        let c = field.first_cell + off as i32;
        for (j, v) in cell.values.iter().enumerate() {
            let node = basis.node_of_dof[j];
            let [x1, x2] = mesh.vertices[node];
            let _ = writeln!(
                out,
                "{c},{:.12e},{:.12e},{:.12e},{:.12e}",
                x1 + c as f64,
                x2,
                v.re,
                v.im
            );
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a convergence table as CSV with columns param, rel_err.
pub fn write_convergence_csv(path: &Path, rows: &[(f64, f64)]) -> Result<()> {
    let mut out = String::from("param,rel_err\n");
    for (p, e) in rows {
        let _ = writeln!(out, "{p:.12e},{e:.12e}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes dispersion branches as CSV: alpha, mu_1, …, mu_m.
pub fn write_dispersion_csv(path: &Path, alphas: &[f64], rows: &[Vec<f64>]) -> Result<()> {
    let branches = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut out = String::from("alpha");
    for b in 0..branches {
        let _ = write!(out, ",mu_{}", b + 1);
    }
    out.push('\n');
    for (a, row) in alphas.iter().zip(rows) {
        let _ = write!(out, "{a:.12e}");
        for b in 0..branches {
            match row.get(b) {
                Some(mu) => {
                    let _ = write!(out, ",{mu:.12e}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes a contour polyline as CSV: t, re_s, im_s, re_sp, im_sp.
pub fn write_contour_csv(
    path: &Path,
    samples: &[(f64, c64, c64)],
) -> Result<()> {
    let mut out = String::from("t,re_s,im_s,re_sp,im_sp\n");
    for (t, s, sp) in samples {
        let _ = writeln!(
            out,
            "{t:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            s.re, s.im, sp.re, sp.im
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Renders named (x, y) series as a self-contained SVG line plot with
/// linear or log-scaled y axis.
pub fn svg_line_plot(
    path: &Path,
    title: &str,
    series: &[(&str, Vec<(f64, f64)>)],
    log_y: bool,
) -> Result<()> {
    const W: f64 = 640.0;
    const H: f64 = 440.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 40.0;
    const MB: f64 = 50.0;
    let map_y = |y: f64| if log_y { y.max(1e-300).log10() } else { y };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, s)| s.iter().map(|&(x, y)| (x, map_y(y))))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if pts.is_empty() {
        x0 = 0.0;
        x1 = 1.0;
        y0 = 0.0;
        y1 = 1.0;
    }
    if x1 - x0 < 1e-12 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| ML + (x - x0) / (x1 - x0) * (W - ML - MR);
    let sy = |y: f64| H - MB - (map_y(y) - y0) / (y1 - y0) * (H - MT - MB);
    let palette = ["#1f6fb4", "#c23b22", "#2e8540", "#8054a0", "#b8860b"];
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(out, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{title}</text>",
        W / 2.0
    );
    let _ = writeln!(
        out,
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>",
        W - ML - MR,
        H - MT - MB
    );
    for tick in 0..=4 {
        let fx = x0 + (x1 - x0) * tick as f64 / 4.0;
        let fy = y0 + (y1 - y0) * tick as f64 / 4.0;
        let px = ML + (W - ML - MR) * tick as f64 / 4.0;
        let py = H - MB - (H - MT - MB) * tick as f64 / 4.0;
        let ylabel = if log_y {
            format!("1e{fy:.1}")
        } else {
            format!("{fy:.3}")
        };
        let _ = writeln!(
            out,
            "<text x=\"{px:.1}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{fx:.3}</text>",
            H - MB + 18.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{py:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{ylabel}</text>",
            ML - 6.0
        );
    }
    for (si, (name, s)) in series.iter().enumerate() {
        let color = palette[si % palette.len()];
        let path_d: String = s
            .iter()
            .filter(|(x, y)| x.is_finite() && map_y(*y).is_finite())
            .enumerate()
            .map(|(i, &(x, y))| {
                format!("{}{:.2},{:.2}", if i == 0 { "M" } else { "L" }, sx(x), sy(y))
            })
            .collect();
        let _ = writeln!(
            out,
            "<path d=\"{path_d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>"
        );
        let _ = writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{name}</text>",
            ML + 10.0,
            MT + 16.0 + 16.0 * si as f64
        );
    }
    out.push_str("</svg>\n");
    std::fs::write(path, out)?;
    Ok(())
}
