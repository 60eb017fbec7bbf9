//! Piecewise-planar reconstruction of the surface inside active tets and the
//! quadrature rules living on it.

use log::warn;

use crate::error::Result;
use crate::levelset::Point3;
use crate::mesh::{ActiveMesh, BackgroundMesh};
use crate::quadrature::{TetRule, TriangleRule};
use crate::simplex::{triangle_area, TetMap};

/// The zero set of the linear level-set interpolant inside one active tet.
#[derive(Clone, Debug)]
pub struct SurfacePatch {
    /// Background tet index.
    pub tet: usize,
    /// Position of the owner in `ActiveMesh::tets`.
    pub active_index: usize,
    /// One triangle, or two for a quadrilateral cut. Counter-clockwise about `normal`.
    pub triangles: Vec<[Point3; 3]>,
    pub area: f64,
    /// Unit normal of the interpolant, pointing toward increasing `phi`.
    pub normal: Point3,
}

impl SurfacePatch {
    pub fn centroid(&self) -> Point3 {
        let mut c = Point3::zeros();
        for t in &self.triangles {
            c += triangle_area(t) * (t[0] + t[1] + t[2]) / 3.0;
        }
        c / self.area
    }
}

/// Marching-tetrahedra extraction of one patch per active tet.
pub fn extract_patches(mesh: &BackgroundMesh, active: &ActiveMesh) -> Result<Vec<SurfacePatch>> {
    let mut patches = Vec::with_capacity(active.tets.len());
    for (ai, &t) in active.tets.iter().enumerate() {
        let tet = mesh.tets[t];
        let phi = tet.map(|v| active.phi[v]);
        let map = TetMap::new(mesh.tet_points(t), t)?;
        let grad = map.linear_gradient(&phi);
        let normal = grad / grad.norm();
        let cut = |i: usize, j: usize| {
            let s = phi[i] / (phi[i] - phi[j]);
            map.points[i] + s * (map.points[j] - map.points[i])
        };
        let (neg, pos): (Vec<usize>, Vec<usize>) = (0..4).partition(|&i| phi[i] < 0.0);
        let mut triangles = Vec::with_capacity(2);
        match (neg.len(), pos.len()) {
            (1, 3) | (3, 1) => {
                let (lone, others) = if neg.len() == 1 { (neg[0], &pos) } else { (pos[0], &neg) };
                triangles.push([cut(lone, others[0]), cut(lone, others[1]), cut(lone, others[2])]);
            }
            (2, 2) => {
                // order each pair by global vertex index for a deterministic tie-break
                let by_global = |a: usize, b: usize| if tet[a] < tet[b] { (a, b) } else { (b, a) };
                let (i, j) = by_global(neg[0], neg[1]);
                let (k, l) = by_global(pos[0], pos[1]);
                let (pik, pil, pjl, pjk) = (cut(i, k), cut(i, l), cut(j, l), cut(j, k));
                let d1 = (pjl - pik).norm();
                let d2 = (pjk - pil).norm();
                if d1 <= d2 * (1.0 + 1e-12) {
                    triangles.push([pik, pil, pjl]);
                    triangles.push([pik, pjl, pjk]);
                } else {
                    triangles.push([pil, pjl, pjk]);
                    triangles.push([pil, pjk, pik]);
                }
            }
            _ => unreachable!("active tets have vertices of both signs"),
        }
        for tri in triangles.iter_mut() {
            if (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).dot(&normal) < 0.0 {
                tri.swap(1, 2);
            }
        }
        let area: f64 = triangles.iter().map(triangle_area).sum();
        let h = mesh.tet_size(t);
        if area < 1e-14 * h * h {
            warn!("dropping degenerate surface patch in tet {t} (area {area:e})");
            continue;
        }
        patches.push(SurfacePatch { tet: t, active_index: ai, triangles, area, normal });
    }
    Ok(patches)
}

#[derive(Clone, Debug)]
pub struct SurfaceQuadrature {
    pub order: u32,
    pub points: Vec<Point3>,
    pub weights: Vec<f64>,
}

pub fn patch_quadrature(patch: &SurfacePatch, order: u32) -> Result<SurfaceQuadrature> {
    let rule = TriangleRule::new(order)?;
    Ok(patch_quadrature_with(patch, &rule))
}

pub(crate) fn patch_quadrature_with(patch: &SurfacePatch, rule: &TriangleRule) -> SurfaceQuadrature {
    let n = rule.points.len() * patch.triangles.len();
    let mut points = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for tri in &patch.triangles {
        let area = triangle_area(tri);
        for (b, w) in rule.points.iter().zip(&rule.weights) {
            points.push(tri[0] * b[0] + tri[1] * b[1] + tri[2] * b[2]);
            weights.push(w * area);
        }
    }
    SurfaceQuadrature { order: rule.order, points, weights }
}

#[derive(Clone, Debug)]
pub struct VolumeQuadrature {
    pub order: u32,
    pub points: Vec<Point3>,
    pub weights: Vec<f64>,
}

pub fn volume_quadrature(tet: &[Point3; 4], order: u32) -> Result<VolumeQuadrature> {
    let rule = TetRule::new(order)?;
    Ok(volume_quadrature_with(tet, &rule))
}

pub(crate) fn volume_quadrature_with(tet: &[Point3; 4], rule: &TetRule) -> VolumeQuadrature {
    let vol = (tet[1] - tet[0]).cross(&(tet[2] - tet[0])).dot(&(tet[3] - tet[0])).abs() / 6.0;
    let points = rule.points.iter().map(|b| tet[0] * b[0] + tet[1] * b[1] + tet[2] * b[2] + tet[3] * b[3]).collect();
    let weights = rule.weights.iter().map(|w| w * vol).collect();
    VolumeQuadrature { order: rule.order, points, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelset::{ImplicitFunction, LevelSetSurface};
    use crate::mesh::BoundingBox;
    use std::sync::Arc;

    struct Linear(Point3, f64);
    impl ImplicitFunction for Linear {
        fn value(&self, x: &Point3) -> f64 {
            self.0.dot(x) - self.1
        }
        fn gradient(&self, _: &Point3) -> Point3 {
            self.0
        }
    }

    fn reference_tet() -> BackgroundMesh {
        BackgroundMesh {
            bbox: BoundingBox::centered(1.0),
            vertices: vec![Point3::zeros(), Point3::x(), Point3::y(), Point3::z()],
            tets: vec![[0, 1, 2, 3]],
            depth: vec![0],
            level: 0,
        }
    }

    fn single_patch(normal: Point3, offset: f64) -> SurfacePatch {
        let mesh = reference_tet();
        let s = LevelSetSurface::custom(Arc::new(Linear(normal, offset)));
        let active = ActiveMesh::select(&mesh, &s).unwrap();
        let mut p = extract_patches(&mesh, &active).unwrap();
        assert_eq!(p.len(), 1);
        p.remove(0)
    }

    fn contains(tri: &[Point3; 3], x: Point3) -> bool {
        tri.iter().any(|p| (p - x).norm() < 1e-14)
    }

    #[test]
    fn horizontal_plane_cut() {
        let p = single_patch(Point3::z(), 0.5);
        assert_eq!(p.triangles.len(), 1);
        let tri = &p.triangles[0];
        for x in [Point3::new(0.0, 0.0, 0.5), Point3::new(0.5, 0.0, 0.5), Point3::new(0.0, 0.5, 0.5)] {
            assert!(contains(tri, x));
        }
        assert!((p.area - 0.125).abs() < 1e-15);
        assert!((p.normal - Point3::z()).norm() < 1e-15);
    }

    #[test]
    fn oblique_plane_cut() {
        let p = single_patch(Point3::new(1.0, 1.0, 1.0), 0.5);
        assert_eq!(p.triangles.len(), 1);
        for x in [Point3::new(0.5, 0.0, 0.0), Point3::new(0.0, 0.5, 0.0), Point3::new(0.0, 0.0, 0.5)] {
            assert!(contains(&p.triangles[0], x));
        }
        assert!((p.area - 3f64.sqrt() / 8.0).abs() < 1e-15);
    }

    #[test]
    fn quadrilateral_cut_splits_into_two_triangles() {
        // x + y = 0.5 separates {0, 3} from {1, 2}
        let p = single_patch(Point3::new(1.0, 1.0, 0.0), 0.5);
        assert_eq!(p.triangles.len(), 2);
        for tri in &p.triangles {
            for k in 0..3 {
                let e = tri[(k + 1) % 3] - tri[k];
                assert!(e.dot(&p.normal).abs() < 1e-12);
            }
            let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
            assert!(n.dot(&p.normal) > 0.0);
        }
        // quad (0.5,0,0),(0,0.5,0),(0,0.5,0.5),(0.5,0,0.5): sqrt(0.5) x 0.5
        assert!((p.area - 0.5f64.sqrt() * 0.5).abs() < 1e-14);
    }

    #[test]
    fn quadrature_weights_sum_to_area() {
        let p = single_patch(Point3::new(1.0, 2.0, 0.5), 0.7);
        for order in [2, 4, 6] {
            let q = patch_quadrature(&p, order).unwrap();
            assert!(q.weights.iter().all(|&w| w > 0.0));
            let s: f64 = q.weights.iter().sum();
            assert!(((s - p.area) / p.area).abs() < 1e-14);
            for x in &q.points {
                assert!((Point3::new(1.0, 2.0, 0.5).dot(x) - 0.7).abs() < 1e-12);
            }
        }
        assert!(patch_quadrature(&p, 5).is_err());
    }

    #[test]
    fn unit_triangle_integrals() {
        let tri = [Point3::zeros(), Point3::x(), Point3::y()];
        let patch = SurfacePatch { tet: 0, active_index: 0, triangles: vec![tri], area: 0.5, normal: Point3::z() };
        let q = patch_quadrature(&patch, 2).unwrap();
        assert!((q.weights.iter().sum::<f64>() - 0.5).abs() < 1e-15);
        let q = patch_quadrature(&patch, 4).unwrap();
        let v: f64 = q.points.iter().zip(&q.weights).map(|(x, w)| w * (x[0] * x[1]).powi(2)).sum();
        assert!((v - 1.0 / 180.0).abs() < 1e-15);
    }

    #[test]
    fn reference_tet_volume_rules() {
        let tet = [Point3::zeros(), Point3::x(), Point3::y(), Point3::z()];
        for order in [1, 2, 4] {
            let q = volume_quadrature(&tet, order).unwrap();
            assert!(q.weights.iter().all(|&w| w > 0.0));
            assert!((q.weights.iter().sum::<f64>() - 1.0 / 6.0).abs() < 1e-15);
        }
        let q = volume_quadrature(&tet, 2).unwrap();
        let mx: f64 = q.points.iter().zip(&q.weights).map(|(x, w)| w * x[0]).sum();
        assert!((mx - 1.0 / 24.0).abs() < 1e-15);
        assert!(volume_quadrature(&tet, 3).is_err());
    }
}
