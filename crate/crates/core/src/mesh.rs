//! Triangular-lattice mesh of the unit cell Ω₀ with periodic left/right
//! node identification.
//!
//! Node rows alternate between on-grid and half-offset horizontal
//! positions, so interior triangles are near-equilateral; this roughly
//! halves the eigenvalue discretization constant compared with a
//! diagonal-split square grid at the same density. Offset rows keep nodes
//! on both vertical boundaries, so left- and right-boundary traces match
//! exactly and every right-boundary node shares the periodic degree of
//! freedom of its left partner. Under Dirichlet wall conditions,
//! top/bottom nodes carry no DOF.

use std::fmt::Write as _;
use std::path::Path;

use crate::coeffs::{Bc, CELL_X1_MIN};
use crate::{Error, Result};

/// Location of a mesh node on the cell boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryTag {
    Interior,
    Left,
    Right,
    Bottom,
    Top,
}

/// Triangulation of Ω₀ = (−1/2, 1/2) × (0, 1).
#[derive(Clone)]
pub struct CellMesh {
    /// Node coordinates.
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex-index triples.
    pub triangles: Vec<[usize; 3]>,
    /// Effective mesh size (horizontal node spacing).
    pub h: f64,
    /// Column intervals per row.
    pub n_cols: usize,
    /// Node-row intervals.
    pub n_rows: usize,
    /// (left node, right node) pairs at equal heights.
    pub left_right_pairs: Vec<(usize, usize)>,
    /// Primary boundary location per node (left/right win at corners).
    pub boundary_tags: Vec<BoundaryTag>,
}

/// Map from mesh nodes to periodic degrees of freedom.
#[derive(Clone)]
pub struct PeriodicBasis {
    /// DOF index per node; `None` for nodes constrained to zero.
    pub dof_of_node: Vec<Option<usize>>,
    /// Number of periodic DOFs M′.
    pub m_prime: usize,
    /// Representative node per DOF (the left partner for paired nodes).
    pub node_of_dof: Vec<usize>,
    /// Wall boundary condition the basis was built for.
    pub bc: Bc,
}

impl CellMesh {
    /// Area of a triangle.
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1])).abs()
    }

    /// Triangles per horizontal strip of the lattice.
    pub fn strip_len(&self) -> usize {
        2 * self.n_cols + 1
    }

    /// Locates the triangle containing (x₁, x₂) and returns its index with
    /// the barycentric coordinates of the point. Coordinates are clamped
    /// onto the closed cell first.
    pub fn locate(&self, x1: f64, x2: f64) -> (usize, [f64; 3]) {
        let x1 = x1.clamp(CELL_X1_MIN, CELL_X1_MIN + 1.0);
        let x2 = x2.clamp(0.0, 1.0);
        let strip = ((x2 * self.n_rows as f64).floor() as usize).min(self.n_rows - 1);
        let base = strip * self.strip_len();
        // Strip triangles run left to right; start from an index estimate
        // and widen until the barycentric test accepts.
        let guess = ((x1 - CELL_X1_MIN) * self.n_cols as f64 * 2.0).floor() as isize;
        let mut best = (base, [f64::NEG_INFINITY; 3]);
        for radius in 0..=(self.strip_len() as isize) {
            for t in [guess - radius, guess + radius] {
                if t < 0 || t >= self.strip_len() as isize {
                    continue;
                }
                let tri = base + t as usize;
                let bary = self.barycentric(tri, x1, x2);
                let min = bary[0].min(bary[1]).min(bary[2]);
                if min >= -1e-12 {
                    return (tri, bary);
                }
                if min > best.1[0].min(best.1[1]).min(best.1[2]) {
                    best = (tri, bary);
                }
            }
        }
        best
    }

    /// Barycentric coordinates of a point with respect to a triangle.
    pub fn barycentric(&self, t: usize, x1: f64, x2: f64) -> [f64; 3] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let la = ((pb[0] - x1) * (pc[1] - x2) - (pc[0] - x1) * (pb[1] - x2)) / det;
        let lc = ((pa[0] - x1) * (pb[1] - x2) - (pb[0] - x1) * (pa[1] - x2)) / det;
        [la, 1.0 - la - lc, lc]
    }
}

impl PeriodicBasis {
    /// x₁ coordinate of the representative node of a DOF, in [−1/2, 1/2).
    pub fn dof_x1(&self, mesh: &CellMesh, dof: usize) -> f64 {
        mesh.vertices[self.node_of_dof[dof]][0]
    }
}

/// Builds the periodic lattice mesh and its DOF map.
///
/// The column count is round(1/h) and the row count keeps interior
/// triangles near-equilateral, so the effective mesh size may differ
/// slightly from the request.
pub fn build_cell_mesh(h: f64, bc: Bc) -> Result<(CellMesh, PeriodicBasis)> {
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::MeshSize { h });
    }
    let n = (1.0 / h).round().max(2.0) as usize;
    let m = ((n as f64) * 2.0 / 3f64.sqrt()).round().max(2.0) as usize;
    let a = 1.0 / n as f64;
    let mut vertices: Vec<[f64; 2]> = Vec::new();
    let mut boundary_tags = Vec::new();
    let mut rows: Vec<Vec<usize>> = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let x2 = j as f64 / m as f64;
        let xs: Vec<f64> = if j % 2 == 0 {
            (0..=n).map(|i| CELL_X1_MIN + i as f64 * a).collect()
        } else {
            // Half-offset interior nodes, plus pinned boundary nodes so the
            // left/right traces stay matched.
            std::iter::once(CELL_X1_MIN)
                .chain((0..n).map(|i| CELL_X1_MIN + (i as f64 + 0.5) * a))
                .chain(std::iter::once(CELL_X1_MIN + 1.0))
                .collect()
        };
        let last = xs.len() - 1;
        let mut row = Vec::with_capacity(xs.len());
        for (idx, &x1) in xs.iter().enumerate() {
            row.push(vertices.len());
            vertices.push([x1, x2]);
            boundary_tags.push(if idx == 0 {
                BoundaryTag::Left
            } else if idx == last {
                BoundaryTag::Right
            } else if j == 0 {
                BoundaryTag::Bottom
            } else if j == m {
                BoundaryTag::Top
            } else {
                BoundaryTag::Interior
            });
        }
        rows.push(row);
    }
    // Zigzag triangulation of each strip: advance whichever row has the
    // nearer next node, producing 2n+1 triangles per strip.
    let mut triangles = Vec::with_capacity(m * (2 * n + 1));
    for j in 0..m {
        let (lo, hi) = (&rows[j], &rows[j + 1]);
        let (mut il, mut ih) = (0usize, 0usize);
        while il + 1 < lo.len() || ih + 1 < hi.len() {
            let xl = lo
                .get(il + 1)
                .map_or(f64::INFINITY, |&v| vertices[v][0]);
            let xh = hi
                .get(ih + 1)
                .map_or(f64::INFINITY, |&v| vertices[v][0]);
            if xl <= xh {
                triangles.push([lo[il], lo[il + 1], hi[ih]]);
                il += 1;
            } else {
                triangles.push([lo[il], hi[ih + 1], hi[ih]]);
                ih += 1;
            }
        }
    }
    let left_right_pairs: Vec<(usize, usize)> = rows
        .iter()
        .map(|r| (r[0], *r.last().unwrap()))
        .collect();
    let mesh = CellMesh {
        vertices: vertices.clone(),
        triangles,
        h: a,
        n_cols: n,
        n_rows: m,
        left_right_pairs: left_right_pairs.clone(),
        boundary_tags,
    };

    let mut dof_of_node = vec![None; vertices.len()];
    let mut node_of_dof = Vec::new();
    for (j, row) in rows.iter().enumerate() {
        for &v in &row[..row.len() - 1] {
            if bc == Bc::Dirichlet && (j == 0 || j == m) {
                continue;
            }
            dof_of_node[v] = Some(node_of_dof.len());
            node_of_dof.push(v);
        }
    }
    // Right-boundary nodes share the DOF of their left partner.
    for (l, r) in &left_right_pairs {
        dof_of_node[*r] = dof_of_node[*l];
    }
    let basis = PeriodicBasis {
        m_prime: node_of_dof.len(),
        dof_of_node,
        node_of_dof,
        bc,
    };
    Ok((mesh, basis))
}

/// Writes the mesh as plain text (vertices, triangles, pairings) for
/// reproducibility of archived runs.
pub fn export_mesh(mesh: &CellMesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "h {}", mesh.h).unwrap();
    writeln!(out, "cols {}", mesh.n_cols).unwrap();
    writeln!(out, "rows {}", mesh.n_rows).unwrap();
    writeln!(out, "vertices {}", mesh.vertices.len()).unwrap();
    for v in &mesh.vertices {
        writeln!(out, "{:.17e} {:.17e}", v[0], v[1]).unwrap();
    }
    writeln!(out, "triangles {}", mesh.triangles.len()).unwrap();
    for t in &mesh.triangles {
        writeln!(out, "{} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(out, "pairs {}", mesh.left_right_pairs.len()).unwrap();
    for (l, r) in &mesh.left_right_pairs {
        writeln!(out, "{l} {r}").unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a mesh written by [`export_mesh`].
pub fn import_mesh(path: &Path) -> Result<CellMesh> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let mut expect = |tag: &str| -> Result<f64> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Config(format!("mesh file truncated before {tag}")))?;
        let (name, value) = line
            .split_once(' ')
            .ok_or_else(|| Error::Config(format!("malformed mesh header line: {line}")))?;
        if name != tag {
            return Err(Error::Config(format!("expected {tag}, found {name}")));
        }
        value
            .parse()
            .map_err(|_| Error::Config(format!("bad number in mesh header: {value}")))
    };
    let h = expect("h")?;
    let n_cols = expect("cols")? as usize;
    let n_rows = expect("rows")? as usize;
    let n_vertices = expect("vertices")? as usize;
    let mut rest = text.lines().skip(4);
    let mut vertices = Vec::with_capacity(n_vertices);
    for _ in 0..n_vertices {
        let line = rest
            .next()
            .ok_or_else(|| Error::Config("mesh file truncated in vertices".into()))?;
        let mut it = line.split_whitespace();
        let x: f64 = it.next().unwrap_or("").parse().unwrap_or(f64::NAN);
        let y: f64 = it.next().unwrap_or("").parse().unwrap_or(f64::NAN);
        vertices.push([x, y]);
    }
    let header = rest
        .next()
        .ok_or_else(|| Error::Config("mesh file truncated before triangles".into()))?;
    let n_triangles: usize = header
        .strip_prefix("triangles ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Config("bad triangle header".into()))?;
    let mut triangles = Vec::with_capacity(n_triangles);
    for _ in 0..n_triangles {
        let line = rest
            .next()
            .ok_or_else(|| Error::Config("mesh file truncated in triangles".into()))?;
        let idx: Vec<usize> = line
            .split_whitespace()
            .filter_map(|s| s.parse().ok())
            .collect();
        triangles.push([idx[0], idx[1], idx[2]]);
    }
    let header = rest
        .next()
        .ok_or_else(|| Error::Config("mesh file truncated before pairs".into()))?;
    let n_pairs: usize = header
        .strip_prefix("pairs ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Config("bad pairs header".into()))?;
    let mut left_right_pairs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let line = rest
            .next()
            .ok_or_else(|| Error::Config("mesh file truncated in pairs".into()))?;
        let idx: Vec<usize> = line
            .split_whitespace()
            .filter_map(|s| s.parse().ok())
            .collect();
        left_right_pairs.push((idx[0], idx[1]));
    }
    let boundary_tags = vertices
        .iter()
        .map(|&[x1, x2]| {
            if (x1 - CELL_X1_MIN).abs() < 1e-12 {
                BoundaryTag::Left
            } else if (x1 - CELL_X1_MIN - 1.0).abs() < 1e-12 {
                BoundaryTag::Right
            } else if x2.abs() < 1e-12 {
                BoundaryTag::Bottom
            } else if (x2 - 1.0).abs() < 1e-12 {
                BoundaryTag::Top
            } else {
                BoundaryTag::Interior
            }
        })
        .collect();
    Ok(CellMesh {
        vertices,
        triangles,
        h,
        n_cols,
        n_rows,
        left_right_pairs,
        boundary_tags,
    })
}
