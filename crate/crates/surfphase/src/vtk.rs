//! Legacy ASCII VTK polydata snapshots of `Gamma_h`.
//!
//! Each patch triangle contributes its own three points (no vertex sharing),
//! so the point count is three times the triangle count. Floats are written
//! in shortest round-trip form, which keeps files bit-identical across reruns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use surfphase_core::fespace::{p1_values, p2_values};
use surfphase_core::nsch::NschState;
use surfphase_core::{Discretization, Point3};

use crate::error::{AppError, Result};

/// Point data attached to a triangle soup.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SurfaceFields {
    pub c: Vec<f64>,
    pub mu: Vec<f64>,
    pub p: Vec<f64>,
    pub u: Vec<Point3>,
}

/// Triangles of `Gamma_h` and the traces of `state` at their corners.
pub fn sample_state(d: &Discretization, state: &NschState) -> (Vec<[Point3; 3]>, SurfaceFields) {
    let mut tris = Vec::new();
    let mut f = SurfaceFields::default();
    for patch in &d.patches {
        let ai = patch.active_index;
        let map = &d.maps[ai];
        let n1 = d.p1.tet_nodes(ai);
        let n2 = d.p2.tet_nodes(ai);
        for tri in &patch.triangles {
            tris.push(*tri);
            for x in tri {
                let l = map.barycentric(x);
                let w1 = p1_values(&l);
                let scalar = |v: &[f64]| (0..4).map(|i| w1[i] * v[n1[i]]).sum::<f64>();
                f.c.push(scalar(&state.c));
                f.mu.push(scalar(&state.mu));
                f.p.push(scalar(&state.p));
                let w2 = p2_values(&l);
                let mut u = Point3::zeros();
                for (k, &n) in n2.iter().enumerate() {
                    u += Point3::new(state.u[3 * n], state.u[3 * n + 1], state.u[3 * n + 2]) * w2[k];
                }
                f.u.push(u);
            }
        }
    }
    (tris, f)
}

pub fn render(title: &str, tris: &[[Point3; 3]], fields: &SurfaceFields) -> String {
    let n = 3 * tris.len();
    assert!(
        fields.c.len() == n && fields.mu.len() == n && fields.p.len() == n && fields.u.len() == n,
        "field length does not match the triangle corners"
    );
    let mut s = String::with_capacity(64 * n);
    s.push_str("# vtk DataFile Version 3.0\n");
    // the title line must not contain a newline
    let _ = writeln!(s, "{}", title.replace('\n', " "));
    s.push_str("ASCII\nDATASET POLYDATA\n");
    let _ = writeln!(s, "POINTS {n} double");
    for tri in tris {
        for x in tri {
            let _ = writeln!(s, "{:?} {:?} {:?}", x[0], x[1], x[2]);
        }
    }
    let _ = writeln!(s, "POLYGONS {} {}", tris.len(), 4 * tris.len());
    for i in 0..tris.len() {
        let _ = writeln!(s, "3 {} {} {}", 3 * i, 3 * i + 1, 3 * i + 2);
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    for (name, values) in [("c", &fields.c), ("mu", &fields.mu), ("p", &fields.p)] {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values {
            let _ = writeln!(s, "{v:?}");
        }
    }
    s.push_str("VECTORS u double\n");
    for u in &fields.u {
        let _ = writeln!(s, "{:?} {:?} {:?}", u[0], u[1], u[2]);
    }
    s
}

pub fn write_vtk_surface(path: &Path, title: &str, tris: &[[Point3; 3]], fields: &SurfaceFields) -> Result<()> {
    std::fs::write(path, render(title, tris, fields)).map_err(|e| AppError::io(path, e))
}

/// Contents of a polydata file as written by [`render`].
#[derive(Clone, Debug, Default)]
pub struct VtkSurface {
    pub title: String,
    pub points: Vec<Point3>,
    pub polygons: Vec<Vec<usize>>,
    pub scalars: BTreeMap<String, Vec<f64>>,
    pub vectors: BTreeMap<String, Vec<Point3>>,
}

impl VtkSurface {
    /// Parses the subset of the legacy grammar used by the writer, checking
    /// that every declared count matches the data that follows.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| AppError::Vtk(m);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        if !header.starts_with("# vtk DataFile Version") {
            return Err(bad(format!("bad header {header:?}")));
        }
        let title = lines.next().ok_or_else(|| bad("missing title".into()))?.to_string();
        if lines.next() != Some("ASCII") {
            return Err(bad("only ASCII files are supported".into()));
        }
        if lines.next().map(str::trim) != Some("DATASET POLYDATA") {
            return Err(bad("dataset is not POLYDATA".into()));
        }
        let mut tokens = lines.flat_map(str::split_whitespace);
        let mut next = |what: &str| tokens.next().ok_or_else(|| bad(format!("unexpected end of file in {what}")));
        let mut out = Self { title, ..Default::default() };
        let mut n_point_data = None;
        while let Ok(kw) = next("section") {
            match kw {
                "POINTS" => {
                    let n: usize = next("POINTS")?.parse().map_err(|_| bad("bad point count".into()))?;
                    next("POINTS")?;
                    for _ in 0..n {
                        out.points.push(read_vec(&mut next)?);
                    }
                }
                "POLYGONS" => {
                    let n: usize = next("POLYGONS")?.parse().map_err(|_| bad("bad polygon count".into()))?;
                    let size: usize = next("POLYGONS")?.parse().map_err(|_| bad("bad polygon size".into()))?;
                    let mut used = 0;
                    for _ in 0..n {
                        let k: usize = next("POLYGONS")?.parse().map_err(|_| bad("bad polygon".into()))?;
                        let mut poly = Vec::with_capacity(k);
                        for _ in 0..k {
                            let i: usize = next("POLYGONS")?.parse().map_err(|_| bad("bad index".into()))?;
                            if i >= out.points.len() {
                                return Err(bad(format!("index {i} out of range")));
                            }
                            poly.push(i);
                        }
                        used += k + 1;
                        out.polygons.push(poly);
                    }
                    if used != size {
                        return Err(bad(format!("POLYGONS size {size} but {used} entries")));
                    }
                }
                "POINT_DATA" => {
                    let n: usize = next("POINT_DATA")?.parse().map_err(|_| bad("bad POINT_DATA count".into()))?;
                    if n != out.points.len() {
                        return Err(bad(format!("POINT_DATA {n} but {} points", out.points.len())));
                    }
                    n_point_data = Some(n);
                }
                "SCALARS" => {
                    let n = n_point_data.ok_or_else(|| bad("SCALARS before POINT_DATA".into()))?;
                    let name = next("SCALARS")?.to_string();
                    next("SCALARS")?;
                    let mut tok = next("SCALARS")?;
                    if tok == "1" {
                        tok = next("SCALARS")?;
                    }
                    if tok != "LOOKUP_TABLE" {
                        return Err(bad(format!("expected LOOKUP_TABLE after SCALARS {name}")));
                    }
                    next("LOOKUP_TABLE")?;
                    let mut v = Vec::with_capacity(n);
                    for _ in 0..n {
                        v.push(next(&name)?.parse().map_err(|_| bad(format!("bad value in {name}")))?);
                    }
                    out.scalars.insert(name, v);
                }
                "VECTORS" => {
                    let n = n_point_data.ok_or_else(|| bad("VECTORS before POINT_DATA".into()))?;
                    let name = next("VECTORS")?.to_string();
                    next("VECTORS")?;
                    let mut v = Vec::with_capacity(n);
                    for _ in 0..n {
                        v.push(read_vec(&mut next)?);
                    }
                    out.vectors.insert(name, v);
                }
                other => return Err(bad(format!("unexpected keyword {other:?}"))),
            }
        }
        Ok(out)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?)
    }

    /// Sum of polygon areas, fanning from the first vertex.
    pub fn area(&self) -> f64 {
        self.polygons
            .iter()
            .map(|poly| {
                let a = self.points[poly[0]];
                poly.windows(2)
                    .skip(1)
                    .map(|w| 0.5 * (self.points[w[0]] - a).cross(&(self.points[w[1]] - a)).norm())
                    .sum::<f64>()
            })
            .sum()
    }
}

fn read_vec<'a>(next: &mut impl FnMut(&str) -> Result<&'a str>) -> Result<Point3> {
    let mut x = [0.0; 3];
    for v in &mut x {
        *v = next("coordinates")?.parse().map_err(|_| AppError::Vtk("bad coordinate".into()))?;
    }
    Ok(Point3::new(x[0], x[1], x[2]))
}
