//! Shape exports: closed polylines (CSV, SVG) in 2D and UV-sphere meshes (OBJ) in 3D.
//! Output is a pure function of the body and the resolution.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::sublinear::Sublinear;

fn require_dim<F: Sublinear + Clone>(body: &ConvexBody<F>, d: usize, what: &str) -> Result<()> {
    if body.dim() != d {
        return Err(Error::Unsupported(format!("{what} export needs d = {d}, got d = {}", body.dim())));
    }
    Ok(())
}

/// Boundary points `φ(cos t_k, sin t_k)` at `t_k = 2πk/n`.
pub fn boundary_polyline<F: Sublinear + Clone>(body: &ConvexBody<F>, n: usize) -> Result<Vec<[f64; 2]>> {
    require_dim(body, 2, "polyline")?;
    if n < 3 {
        return Err(Error::Domain("a polyline needs at least 3 points".into()));
    }
    (0..n)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            let y = body.map(&[t.cos(), t.sin()])?;
            Ok([y[0], y[1]])
        })
        .collect()
}

pub fn polyline_csv<F: Sublinear + Clone>(body: &ConvexBody<F>, n: usize) -> Result<String> {
    let mut out = String::from("x,y\n");
    for p in boundary_polyline(body, n)? {
        let _ = writeln!(out, "{:.17e},{:.17e}", p[0], p[1]);
    }
    Ok(out)
}

pub fn polyline_svg<F: Sublinear + Clone>(body: &ConvexBody<F>, n: usize) -> Result<String> {
    let pts = boundary_polyline(body, n)?;
    let r = pts.iter().flat_map(|p| [p[0].abs(), p[1].abs()]).fold(0.0, f64::max) * 1.1;
    let mut path = String::new();
    for (i, p) in pts.iter().enumerate() {
        // flip y so that the picture has the usual orientation
        let _ = write!(path, "{}{:.6} {:.6} ", if i == 0 { "M" } else { "L" }, p[0], -p[1]);
    }
    path.push('Z');
    Ok(format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{:.6} {:.6} {:.6} {:.6}\" width=\"512\" height=\"512\">\n\
         <path d=\"{path}\" fill=\"#dde6f0\" stroke=\"#1f3b57\" stroke-width=\"{:.6}\"/>\n</svg>\n",
        -r,
        -r,
        2.0 * r,
        2.0 * r,
        r * 0.01
    ))
}

/// Triangle mesh of the boundary over a UV-sphere grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub normals: Vec<[f64; 3]>,
    /// Zero-based, counter-clockwise seen from outside.
    pub triangles: Vec<[usize; 3]>,
}

/// `rings` interior latitude circles of `segments` vertices each plus the two
/// poles, so the mesh has `rings·segments + 2` vertices and is closed.
pub fn boundary_mesh<F: Sublinear + Clone>(body: &ConvexBody<F>, rings: usize, segments: usize) -> Result<Mesh> {
    require_dim(body, 3, "mesh")?;
    if rings < 1 || segments < 3 {
        return Err(Error::Domain("mesh needs at least 1 ring of 3 segments".into()));
    }
    let mut dirs = vec![[0.0, 0.0, 1.0]];
    for i in 1..=rings {
        let th = PI * i as f64 / (rings + 1) as f64;
        for j in 0..segments {
            let ph = 2.0 * PI * j as f64 / segments as f64;
            dirs.push([th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
        }
    }
    dirs.push([0.0, 0.0, -1.0]);
    let mut vertices = Vec::with_capacity(dirs.len());
    let mut normals = Vec::with_capacity(dirs.len());
    for x in &dirs {
        let fr = body.boundary_frame(x)?;
        vertices.push([fr.y[0], fr.y[1], fr.y[2]]);
        normals.push([fr.n[0], fr.n[1], fr.n[2]]);
    }
    let south = dirs.len() - 1;
    let at = |i: usize, j: usize| 1 + (i - 1) * segments + j % segments;
    let mut triangles = Vec::with_capacity(2 * rings * segments);
    for j in 0..segments {
        triangles.push([0, at(1, j), at(1, j + 1)]);
    }
    for i in 1..rings {
        for j in 0..segments {
            let (a, b, c, d) = (at(i, j), at(i, j + 1), at(i + 1, j), at(i + 1, j + 1));
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    for j in 0..segments {
        triangles.push([south, at(rings, j + 1), at(rings, j)]);
    }
    Ok(Mesh { vertices, normals, triangles })
}

impl Mesh {
    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            let _ = writeln!(out, "v {:.17e} {:.17e} {:.17e}", v[0], v[1], v[2]);
        }
        for n in &self.normals {
            let _ = writeln!(out, "vn {:.17e} {:.17e} {:.17e}", n[0], n[1], n[2]);
        }
        for t in &self.triangles {
            let (a, b, c) = (t[0] + 1, t[1] + 1, t[2] + 1);
            let _ = writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}");
        }
        out
    }

    /// Every edge is shared by exactly two triangles with opposite orientation.
    pub fn is_closed(&self) -> bool {
        let mut edges = std::collections::HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *edges.entry((t[k], t[(k + 1) % 3])).or_insert(0usize) += 1;
            }
        }
        edges.iter().all(|(&(a, b), &c)| c == 1 && edges.get(&(b, a)) == Some(&1))
    }

    /// Signed volume from the divergence theorem.
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let (a, b, c) = (self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]);
                let cross = [b[1] * c[2] - b[2] * c[1], b[2] * c[0] - b[0] * c[2], b[0] * c[1] - b[1] * c[0]];
                (a[0] * cross[0] + a[1] * cross[1] + a[2] * cross[2]) / 6.0
            })
            .sum()
    }
}
