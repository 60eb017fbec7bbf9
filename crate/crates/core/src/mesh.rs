//! Background tetrahedral meshes of a cube, their refinement, and the active
//! (surface-cut) subset that carries all degrees of freedom.

use std::collections::{BTreeSet, HashMap};

use log::debug;

use crate::error::{Error, Result};
use crate::levelset::{LevelSetSurface, Point3};

/// Local vertex pairs of the six tetrahedron edges.
pub const TET_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Axis-aligned cube `center + [-half_width, half_width]^3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub center: Point3,
    pub half_width: f64,
}

impl BoundingBox {
    pub fn centered(half_width: f64) -> Self {
        Self { center: Point3::zeros(), half_width }
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(3)
    }
}

impl Default for BoundingBox {
    fn default() -> Self {
        Self::centered(5.0 / 3.0)
    }
}

/// A conforming tetrahedral mesh of a cube.
///
/// Tetrahedra are stored in the vertex order that drives regular (red)
/// refinement, which does not always have positive orientation; use
/// [`BackgroundMesh::oriented_tet`] when orientation matters.
#[derive(Clone, Debug)]
pub struct BackgroundMesh {
    pub bbox: BoundingBox,
    pub vertices: Vec<Point3>,
    pub tets: Vec<[usize; 4]>,
    /// Number of regular refinements applied to the ancestor of each tet.
    pub depth: Vec<u32>,
    /// Uniform refinement level.
    pub level: u32,
}

impl BackgroundMesh {
    /// Splits the box into 2x2x2 sub-cubes and each sub-cube into six
    /// tetrahedra sharing the main diagonal (Kuhn subdivision).
    pub fn build_initial(bbox: BoundingBox) -> Self {
        let n = 2usize;
        let step = 2.0 * bbox.half_width / n as f64;
        let origin = bbox.center - Point3::repeat(bbox.half_width);
        let idx = |i: usize, j: usize, k: usize| (k * (n + 1) + j) * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1).pow(3));
        for k in 0..=n {
            for j in 0..=n {
                for i in 0..=n {
                    vertices.push(origin + Point3::new(i as f64, j as f64, k as f64) * step);
                }
            }
        }
        const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let mut tets = Vec::with_capacity(6 * n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    for perm in PERMS {
                        let mut c = [i, j, k];
                        let mut tet = [idx(c[0], c[1], c[2]); 4];
                        for (slot, &axis) in perm.iter().enumerate() {
                            c[axis] += 1;
                            tet[slot + 1] = idx(c[0], c[1], c[2]);
                        }
                        tets.push(tet);
                    }
                }
            }
        }
        let depth = vec![0; tets.len()];
        Self { bbox, vertices, tets, depth, level: 0 }
    }

    /// Characteristic size of a depth-0 tetrahedron: the sub-cube edge.
    pub fn base_size(&self) -> f64 {
        self.bbox.half_width
    }

    /// Mesh size of the uniform level, `(2 * half_width) / 2^(level + 1)`.
    pub fn h(&self) -> f64 {
        self.base_size() / f64::from(1u32 << self.level)
    }

    pub fn tet_size(&self, t: usize) -> f64 {
        self.base_size() / f64::from(1u32 << self.depth[t])
    }

    pub fn tet_points(&self, t: usize) -> [Point3; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    pub fn signed_volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tet_points(t);
        (b - a).cross(&(c - a)).dot(&(d - a)) / 6.0
    }

    pub fn volume(&self, t: usize) -> f64 {
        self.signed_volume(t).abs()
    }

    /// Vertex tuple of tet `t` with positive orientation.
    pub fn oriented_tet(&self, t: usize) -> [usize; 4] {
        let mut tet = self.tets[t];
        if self.signed_volume(t) < 0.0 {
            tet.swap(2, 3);
        }
        tet
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.tets.len()).map(|t| self.volume(t)).sum()
    }

    /// Regular refinement of every tetrahedron into eight children.
    pub fn refine_uniform(&self) -> Self {
        let marks = vec![Refinement::Red; self.tets.len()];
        let mut out = self.apply_refinement(&marks);
        out.level = self.level + 1;
        out
    }

    /// Refines the tetrahedra meeting the surface `extra_levels` more times,
    /// closing each pass with green (bisection) refinement of neighbours.
    pub fn refine_toward_surface(&self, surface: &LevelSetSurface, extra_levels: u32) -> Result<Self> {
        let mut mesh = self.clone();
        for pass in 0..extra_levels {
            let phi = mesh.vertex_phi(surface)?;
            let mut red = vec![false; mesh.tets.len()];
            for (t, tet) in mesh.tets.iter().enumerate() {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &v in tet {
                    lo = lo.min(phi[v]);
                    hi = hi.max(phi[v]);
                }
                // midpoints catch curved pieces of the surface that clip an edge
                for (a, b) in TET_EDGES {
                    let m = 0.5 * (mesh.vertices[tet[a]] + mesh.vertices[tet[b]]);
                    let val = safe_phi(surface, &m, mesh.tet_size(t))?;
                    lo = lo.min(val);
                    hi = hi.max(val);
                }
                red[t] = lo < 0.0 && hi > 0.0;
            }
            let marks = close_refinement(&mesh.tets, red);
            debug!(
                "surface refinement pass {pass}: {} red, {} green",
                marks.iter().filter(|m| matches!(m, Refinement::Red)).count(),
                marks.iter().filter(|m| matches!(m, Refinement::Green1(_) | Refinement::Green3(_))).count()
            );
            mesh = mesh.apply_refinement(&marks);
        }
        Ok(mesh)
    }

    fn apply_refinement(&self, marks: &[Refinement]) -> Self {
        let mut vertices = self.vertices.clone();
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                vertices.push(0.5 * (vertices[a] + vertices[b]));
                vertices.len() - 1
            })
        };
        let mut tets = Vec::with_capacity(self.tets.len() * 2);
        let mut depth = Vec::with_capacity(self.tets.len() * 2);
        for (t, &tet) in self.tets.iter().enumerate() {
            match marks[t] {
                Refinement::None => {
                    tets.push(tet);
                    depth.push(self.depth[t]);
                }
                Refinement::Red => {
                    let [x0, x1, x2, x3] = tet;
                    let m01 = mid(x0, x1, &mut vertices);
                    let m02 = mid(x0, x2, &mut vertices);
                    let m03 = mid(x0, x3, &mut vertices);
                    let m12 = mid(x1, x2, &mut vertices);
                    let m13 = mid(x1, x3, &mut vertices);
                    let m23 = mid(x2, x3, &mut vertices);
                    // Bey's ordering keeps children within a few congruence classes.
                    let children = [
                        [x0, m01, m02, m03],
                        [m01, x1, m12, m13],
                        [m02, m12, x2, m23],
                        [m03, m13, m23, x3],
                        [m01, m02, m03, m13],
                        [m01, m02, m12, m13],
                        [m02, m03, m13, m23],
                        [m02, m12, m13, m23],
                    ];
                    tets.extend_from_slice(&children);
                    depth.extend(std::iter::repeat(self.depth[t] + 1).take(8));
                }
                Refinement::Green1(e) => {
                    let (a, b) = TET_EDGES[e];
                    let m = mid(tet[a], tet[b], &mut vertices);
                    let mut c0 = tet;
                    c0[b] = m;
                    let mut c1 = tet;
                    c1[a] = m;
                    tets.push(c0);
                    tets.push(c1);
                    depth.extend([self.depth[t]; 2]);
                }
                Refinement::Green3(face) => {
                    // `face` is the local index of the vertex opposite the split face.
                    let f: Vec<usize> = (0..4).filter(|&i| i != face).collect();
                    let (a, b, c) = (f[0], f[1], f[2]);
                    let mab = mid(tet[a], tet[b], &mut vertices);
                    let mac = mid(tet[a], tet[c], &mut vertices);
                    let mbc = mid(tet[b], tet[c], &mut vertices);
                    let sub = |pa: usize, pb: usize, pc: usize| {
                        let mut child = tet;
                        child[a] = pa;
                        child[b] = pb;
                        child[c] = pc;
                        child
                    };
                    tets.push(sub(tet[a], mab, mac));
                    tets.push(sub(mab, tet[b], mbc));
                    tets.push(sub(mac, mbc, tet[c]));
                    tets.push(sub(mab, mbc, mac));
                    depth.extend([self.depth[t]; 4]);
                }
            }
        }
        Self { bbox: self.bbox, vertices, tets, depth, level: self.level }
    }

    /// Level-set values at all vertices. Points where the level set is
    /// undefined (the torus axis) are evaluated at a slightly shifted point.
    pub fn vertex_phi(&self, surface: &LevelSetSurface) -> Result<Vec<f64>> {
        let h = self.h();
        self.vertices.iter().map(|x| safe_phi(surface, x, h)).collect()
    }

    /// Checks face-to-face conformity: every face is shared by two tets
    /// unless it lies on the box boundary.
    pub fn audit_conformity(&self) -> std::result::Result<(), String> {
        let mut faces: HashMap<[usize; 3], u32> = HashMap::with_capacity(self.tets.len() * 2);
        for (t, tet) in self.tets.iter().enumerate() {
            if !(self.volume(t) > 0.0) {
                return Err(format!("tet {t} is degenerate"));
            }
            for skip in 0..4 {
                let mut f = [0; 3];
                let mut k = 0;
                for (i, &v) in tet.iter().enumerate() {
                    if i != skip {
                        f[k] = v;
                        k += 1;
                    }
                }
                f.sort_unstable();
                *faces.entry(f).or_insert(0) += 1;
            }
        }
        let tol = 1e-12 * self.bbox.half_width;
        for (f, count) in &faces {
            match count {
                2 => {}
                1 => {
                    let on_boundary = (0..3).any(|axis| {
                        [-1.0, 1.0].iter().any(|s| {
                            let plane = self.bbox.center[axis] + s * self.bbox.half_width;
                            f.iter().all(|&v| (self.vertices[v][axis] - plane).abs() < tol)
                        })
                    });
                    if !on_boundary {
                        return Err(format!("interior face {f:?} has a single neighbour"));
                    }
                }
                _ => return Err(format!("face {f:?} is shared by {count} tets")),
            }
        }
        Ok(())
    }
}

pub(crate) fn safe_phi(surface: &LevelSetSurface, x: &Point3, h: f64) -> Result<f64> {
    match surface.phi(x) {
        Err(Error::Domain { .. }) => surface.phi(&(x + Point3::new(1e-9 * h, 0.0, 0.0))),
        other => other,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Refinement {
    None,
    Red,
    /// Bisection of one local edge.
    Green1(usize),
    /// Regular split of the face opposite the given local vertex.
    Green3(usize),
}

/// Computes a conforming refinement: marked tets are refined regularly and
/// neighbours receive green closures, promoting to red where no green pattern
/// matches the split edges.
fn close_refinement(tets: &[[usize; 4]], mut red: Vec<bool>) -> Vec<Refinement> {
    loop {
        let mut split: BTreeSet<(usize, usize)> = BTreeSet::new();
        for (t, tet) in tets.iter().enumerate() {
            if red[t] {
                for (a, b) in TET_EDGES {
                    split.insert((tet[a].min(tet[b]), tet[a].max(tet[b])));
                }
            }
        }
        let mut marks = Vec::with_capacity(tets.len());
        let mut promoted = false;
        for (t, tet) in tets.iter().enumerate() {
            if red[t] {
                marks.push(Refinement::Red);
                continue;
            }
            let cut: Vec<usize> = (0..6)
                .filter(|&e| {
                    let (a, b) = TET_EDGES[e];
                    split.contains(&(tet[a].min(tet[b]), tet[a].max(tet[b])))
                })
                .collect();
            let mark = match cut.len() {
                0 => Some(Refinement::None),
                1 => Some(Refinement::Green1(cut[0])),
                3 => (0..4)
                    .find(|&opp| cut.iter().all(|&e| TET_EDGES[e].0 != opp && TET_EDGES[e].1 != opp))
                    .map(Refinement::Green3),
                6 => Some(Refinement::Red),
                _ => None,
            };
            match mark {
                Some(Refinement::Red) | None => {
                    red[t] = true;
                    promoted |= mark.is_none();
                    marks.push(Refinement::Red);
                }
                Some(m) => marks.push(m),
            }
        }
        if !promoted {
            return marks;
        }
    }
}

/// Tetrahedra cut by the discrete surface, i.e. `T_h^Gamma`.
#[derive(Clone, Debug)]
pub struct ActiveMesh {
    /// Indices into the background tets, increasing.
    pub tets: Vec<usize>,
    /// Background vertex indices touched by active tets, increasing.
    pub vertices: Vec<usize>,
    /// Perturbed level-set value of every background vertex.
    pub phi: Vec<f64>,
}

impl ActiveMesh {
    /// Selects tets whose vertex values take both signs. Values with
    /// `|phi| < 1e-12 h` are first replaced by `+1e-12 h`.
    pub fn select(mesh: &BackgroundMesh, surface: &LevelSetSurface) -> Result<Self> {
        let mut phi = mesh.vertex_phi(surface)?;
        let eps = 1e-12 * mesh.h();
        for p in phi.iter_mut() {
            if p.abs() < eps {
                *p = eps;
            }
        }
        let mut tets = Vec::new();
        let mut used = vec![false; mesh.vertices.len()];
        for (t, tet) in mesh.tets.iter().enumerate() {
            let lo = tet.iter().map(|&v| phi[v]).fold(f64::INFINITY, f64::min);
            let hi = tet.iter().map(|&v| phi[v]).fold(f64::NEG_INFINITY, f64::max);
            if lo < 0.0 && hi > 0.0 {
                tets.push(t);
                for &v in tet {
                    used[v] = true;
                }
            }
        }
        if tets.is_empty() {
            return Err(Error::EmptyActiveSet);
        }
        let vertices = used.iter().enumerate().filter(|(_, &u)| u).map(|(v, _)| v).collect();
        Ok(Self { tets, vertices, phi })
    }

    /// Volume of the narrow band `Omega_h^Gamma`.
    pub fn band_volume(&self, mesh: &BackgroundMesh) -> f64 {
        self.tets.iter().map(|&t| mesh.volume(t)).sum()
    }

    /// Largest characteristic size among active tets.
    pub fn max_size(&self, mesh: &BackgroundMesh) -> f64 {
        self.tets.iter().map(|&t| mesh.tet_size(t)).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box53() -> BoundingBox {
        BoundingBox::default()
    }

    #[test]
    fn initial_mesh_counts() {
        let m = BackgroundMesh::build_initial(box53());
        assert_eq!(m.vertices.len(), 27);
        assert_eq!(m.tets.len(), 48);
        assert!((m.h() - 5.0 / 3.0).abs() < 1e-15);
        assert!(((m.total_volume() - box53().volume()) / box53().volume()).abs() < 1e-12);
        m.audit_conformity().unwrap();
        for t in 0..m.tets.len() {
            let [a, b, c, d] = m.oriented_tet(t).map(|v| m.vertices[v]);
            assert!((b - a).cross(&(c - a)).dot(&(d - a)) > 0.0);
        }
    }

    #[test]
    fn any_box_is_partitioned() {
        let bb = BoundingBox { center: Point3::new(0.3, -2.0, 7.0), half_width: 0.37 };
        let m = BackgroundMesh::build_initial(bb);
        assert!(((m.total_volume() - bb.volume()) / bb.volume()).abs() < 1e-12);
    }

    #[test]
    fn uniform_refinement() {
        let m0 = BackgroundMesh::build_initial(box53());
        let m1 = m0.refine_uniform();
        assert_eq!(m1.tets.len(), 384);
        assert_eq!(m1.vertices.len(), 125);
        m1.audit_conformity().unwrap();
        let m3 = m1.refine_uniform().refine_uniform();
        assert_eq!(m3.level, 3);
        assert!((m3.h() - (10.0 / 3.0) / 16.0).abs() < 1e-15);
        assert!(((m3.total_volume() - box53().volume()) / box53().volume()).abs() < 1e-12);
        assert_eq!(m3.vertices.len(), 17 * 17 * 17);
        m3.audit_conformity().unwrap();
        assert!(m3.tets.iter().enumerate().all(|(t, _)| m3.oriented_tet(t) != [0; 4] && m3.volume(t) > 0.0));
    }

    #[test]
    fn refinement_is_deterministic() {
        let s = LevelSetSurface::unit_sphere();
        let a = BackgroundMesh::build_initial(box53()).refine_uniform().refine_toward_surface(&s, 1).unwrap();
        let b = BackgroundMesh::build_initial(box53()).refine_uniform().refine_toward_surface(&s, 1).unwrap();
        assert_eq!(a.tets, b.tets);
        assert_eq!(a.vertices, b.vertices);
    }

    #[test]
    fn zero_extra_levels_is_identity() {
        let m = BackgroundMesh::build_initial(box53()).refine_uniform();
        let r = m.refine_toward_surface(&LevelSetSurface::unit_sphere(), 0).unwrap();
        assert_eq!(r.tets, m.tets);
        assert_eq!(r.vertices, m.vertices);
    }

    #[test]
    fn plane_cuts_reference_tet() {
        let bb = box53();
        let mesh = BackgroundMesh {
            bbox: bb,
            vertices: vec![
                Point3::new(0.0, 0.0, -1.0),
                Point3::new(1.0, 0.0, -1.0),
                Point3::new(0.0, 1.0, -1.0),
                Point3::new(0.0, 0.0, 1.0),
            ],
            tets: vec![[0, 1, 2, 3]],
            depth: vec![0],
            level: 0,
        };
        struct Plane;
        impl crate::levelset::ImplicitFunction for Plane {
            fn value(&self, x: &Point3) -> f64 {
                x[2]
            }
            fn gradient(&self, _: &Point3) -> Point3 {
                Point3::z()
            }
        }
        let s = LevelSetSurface::custom(std::sync::Arc::new(Plane));
        let active = ActiveMesh::select(&mesh, &s).unwrap();
        assert_eq!(active.tets, vec![0]);
    }

    #[test]
    fn surface_outside_box_is_an_error() {
        let m = BackgroundMesh::build_initial(box53()).refine_uniform();
        assert!(matches!(
            ActiveMesh::select(&m, &LevelSetSurface::sphere(10.0)),
            Err(Error::EmptyActiveSet)
        ));
    }

    #[test]
    fn active_tets_change_sign() {
        let m = BackgroundMesh::build_initial(box53()).refine_uniform().refine_uniform();
        let a = ActiveMesh::select(&m, &LevelSetSurface::unit_sphere()).unwrap();
        assert!(!a.tets.is_empty());
        for &t in &a.tets {
            let vals: Vec<f64> = m.tets[t].iter().map(|&v| a.phi[v]).collect();
            assert!(vals.iter().any(|&p| p < 0.0) && vals.iter().any(|&p| p > 0.0));
            assert!(vals.iter().all(|&p| p != 0.0));
        }
    }
}
