//! Continuous P1 scalar and P2 vector spaces on the active tets.

use std::collections::BTreeMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::levelset::Point3;
use crate::mesh::{ActiveMesh, BackgroundMesh, TET_EDGES};
use crate::simplex::TetMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    P1Scalar,
    P2Vector,
}

impl SpaceKind {
    pub fn nodes_per_tet(self) -> usize {
        match self {
            Self::P1Scalar => 4,
            Self::P2Vector => 10,
        }
    }

    pub fn components(self) -> usize {
        match self {
            Self::P1Scalar => 1,
            Self::P2Vector => 3,
        }
    }
}

/// Global numbering of the nodes of a space on the active mesh. Vector
/// degrees of freedom are interleaved: `dof = 3 * node + component`.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub kind: SpaceKind,
    /// Coordinates of every global node.
    pub nodes: Vec<Point3>,
    /// Global node of each local node, `nodes_per_tet` entries per active tet.
    local_to_global: Vec<usize>,
}

impl DofMap {
    /// Vertex nodes are numbered in increasing background-vertex order; P2
    /// edge nodes follow, ordered by their sorted vertex pairs.
    pub fn build(mesh: &BackgroundMesh, active: &ActiveMesh, kind: SpaceKind) -> Self {
        let mut vertex_node = vec![usize::MAX; mesh.vertices.len()];
        let mut nodes = Vec::with_capacity(active.vertices.len());
        for (i, &v) in active.vertices.iter().enumerate() {
            vertex_node[v] = i;
            nodes.push(mesh.vertices[v]);
        }
        let per = kind.nodes_per_tet();
        let mut local_to_global = Vec::with_capacity(per * active.tets.len());
        match kind {
            SpaceKind::P1Scalar => {
                for &t in &active.tets {
                    local_to_global.extend(mesh.tets[t].iter().map(|&v| vertex_node[v]));
                }
            }
            SpaceKind::P2Vector => {
                let mut edges: BTreeMap<(usize, usize), usize> = BTreeMap::new();
                for &t in &active.tets {
                    let tet = mesh.tets[t];
                    for (a, b) in TET_EDGES {
                        edges.insert((tet[a].min(tet[b]), tet[a].max(tet[b])), 0);
                    }
                }
                for (k, ((a, b), slot)) in edges.iter_mut().enumerate() {
                    *slot = nodes.len();
                    debug_assert_eq!(*slot, active.vertices.len() + k);
                    nodes.push(0.5 * (mesh.vertices[*a] + mesh.vertices[*b]));
                }
                for &t in &active.tets {
                    let tet = mesh.tets[t];
                    local_to_global.extend(tet.iter().map(|&v| vertex_node[v]));
                    for (a, b) in TET_EDGES {
                        local_to_global.push(edges[&(tet[a].min(tet[b]), tet[a].max(tet[b]))]);
                    }
                }
            }
        }
        Self { kind, nodes, local_to_global }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.nodes.len() * self.kind.components()
    }

    pub fn n_tets(&self) -> usize {
        self.local_to_global.len() / self.kind.nodes_per_tet()
    }

    /// Global nodes of active tet `ai`.
    pub fn tet_nodes(&self, ai: usize) -> &[usize] {
        let per = self.kind.nodes_per_tet();
        &self.local_to_global[ai * per..(ai + 1) * per]
    }

    /// Global degrees of freedom of active tet `ai` (node-major, then component).
    pub fn tet_dofs(&self, ai: usize) -> Vec<usize> {
        let c = self.kind.components();
        self.tet_nodes(ai).iter().flat_map(|&n| (0..c).map(move |d| c * n + d)).collect()
    }

    pub fn interpolate_scalar(&self, f: impl Fn(&Point3) -> f64) -> FieldVector {
        assert_eq!(self.kind, SpaceKind::P1Scalar);
        FieldVector::new(self.kind, self.nodes.iter().map(f).collect())
    }

    pub fn interpolate_vector(&self, f: impl Fn(&Point3) -> Vector3<f64>) -> FieldVector {
        assert_eq!(self.kind, SpaceKind::P2Vector);
        let mut values = Vec::with_capacity(self.n_dofs());
        for x in &self.nodes {
            values.extend_from_slice(f(x).as_slice());
        }
        FieldVector::new(self.kind, values)
    }
}

/// Coefficients of a finite element function.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldVector {
    pub kind: SpaceKind,
    pub values: Vec<f64>,
    pub time: f64,
}

impl FieldVector {
    pub fn new(kind: SpaceKind, values: Vec<f64>) -> Self {
        Self { kind, values, time: 0.0 }
    }

    pub fn zeros(map: &DofMap) -> Self {
        Self::new(map.kind, vec![0.0; map.n_dofs()])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }
}

pub fn p1_values(l: &[f64; 4]) -> [f64; 4] {
    *l
}

pub fn p2_values(l: &[f64; 4]) -> [f64; 10] {
    let mut v = [0.0; 10];
    for i in 0..4 {
        v[i] = l[i] * (2.0 * l[i] - 1.0);
    }
    for (e, (a, b)) in TET_EDGES.iter().enumerate() {
        v[4 + e] = 4.0 * l[*a] * l[*b];
    }
    v
}

pub fn p2_gradients(l: &[f64; 4], gl: &[Point3; 4]) -> [Point3; 10] {
    let mut g = [Point3::zeros(); 10];
    for i in 0..4 {
        g[i] = gl[i] * (4.0 * l[i] - 1.0);
    }
    for (e, (a, b)) in TET_EDGES.iter().enumerate() {
        g[4 + e] = (gl[*b] * l[*a] + gl[*a] * l[*b]) * 4.0;
    }
    g
}

/// Values and physical gradients of all local shape functions.
#[derive(Clone, Debug)]
pub struct ShapeEval {
    pub values: Vec<f64>,
    pub gradients: Vec<Point3>,
}

pub fn eval_shape(kind: SpaceKind, map: &TetMap, x: &Point3) -> Result<ShapeEval> {
    let l = map.barycentric(x);
    if l.iter().any(|&li| !(-1e-12..=1.0 + 1e-12).contains(&li)) {
        return Err(Error::Config(format!("point {x:?} lies outside the element")));
    }
    Ok(match kind {
        SpaceKind::P1Scalar => ShapeEval { values: p1_values(&l).to_vec(), gradients: map.grad_lambda.to_vec() },
        SpaceKind::P2Vector => ShapeEval {
            values: p2_values(&l).to_vec(),
            gradients: p2_gradients(&l, &map.grad_lambda).to_vec(),
        },
    })
}

/// `u - (u . n) n`.
pub fn tangential_part(u: &Vector3<f64>, n: &Vector3<f64>) -> Vector3<f64> {
    u - n * u.dot(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundingBox;

    fn single_tet() -> (BackgroundMesh, ActiveMesh) {
        let mesh = BackgroundMesh {
            bbox: BoundingBox::centered(1.0),
            vertices: vec![Point3::zeros(), Point3::x(), Point3::y(), Point3::z()],
            tets: vec![[0, 1, 2, 3]],
            depth: vec![0],
            level: 0,
        };
        let active = ActiveMesh { tets: vec![0], vertices: vec![0, 1, 2, 3], phi: vec![-1.0, 1.0, 1.0, 1.0] };
        (mesh, active)
    }

    fn skewed_map() -> TetMap {
        TetMap::new(
            [Point3::new(0.1, 0.0, 0.0), Point3::new(1.0, 0.2, 0.1), Point3::new(0.0, 1.1, 0.3), Point3::new(0.2, 0.1, 0.9)],
            0,
        )
        .unwrap()
    }

    #[test]
    fn single_tet_dof_counts() {
        let (mesh, active) = single_tet();
        assert_eq!(DofMap::build(&mesh, &active, SpaceKind::P1Scalar).n_dofs(), 4);
        let p2 = DofMap::build(&mesh, &active, SpaceKind::P2Vector);
        assert_eq!(p2.n_dofs(), 30);
        assert_eq!(p2.tet_dofs(0).len(), 30);
    }

    #[test]
    fn lagrange_property_at_nodes() {
        let map = skewed_map();
        for (k, x) in map.points.iter().enumerate() {
            let s = eval_shape(SpaceKind::P1Scalar, &map, x).unwrap();
            for (i, v) in s.values.iter().enumerate() {
                assert!((v - f64::from(u8::from(i == k))).abs() < 1e-13);
            }
        }
        let mut p2_nodes: Vec<Point3> = map.points.to_vec();
        p2_nodes.extend(TET_EDGES.iter().map(|(a, b)| 0.5 * (map.points[*a] + map.points[*b])));
        for (k, x) in p2_nodes.iter().enumerate() {
            let s = eval_shape(SpaceKind::P2Vector, &map, x).unwrap();
            for (i, v) in s.values.iter().enumerate() {
                assert!((v - f64::from(u8::from(i == k))).abs() < 1e-13, "node {k} fn {i}: {v}");
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let map = skewed_map();
        let x = map.point(&[0.1, 0.2, 0.3, 0.4]);
        for kind in [SpaceKind::P1Scalar, SpaceKind::P2Vector] {
            let s = eval_shape(kind, &map, &x).unwrap();
            assert!((s.values.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            assert!(s.gradients.iter().sum::<Point3>().norm() < 1e-12);
        }
    }

    #[test]
    fn p2_reproduces_quadratics() {
        let map = skewed_map();
        let f = |x: &Point3| x[0] * x[0] + 0.5 * x[1] * x[2] - x[2];
        let grad = |x: &Point3| Point3::new(2.0 * x[0], 0.5 * x[2], 0.5 * x[1] - 1.0);
        let mut nodal: Vec<f64> = map.points.iter().map(f).collect();
        nodal.extend(TET_EDGES.iter().map(|(a, b)| f(&(0.5 * (map.points[*a] + map.points[*b])))));
        for l in [[0.25; 4], [0.1, 0.2, 0.3, 0.4], [0.7, 0.1, 0.1, 0.1]] {
            let x = map.point(&l);
            let s = eval_shape(SpaceKind::P2Vector, &map, &x).unwrap();
            let v: f64 = s.values.iter().zip(&nodal).map(|(a, b)| a * b).sum();
            let g: Point3 = s.gradients.iter().zip(&nodal).map(|(a, b)| a * *b).sum();
            assert!((v - f(&x)).abs() < 1e-12);
            assert!((g - grad(&x)).norm() < 1e-12);
        }
    }

    #[test]
    fn outside_points_are_rejected() {
        let map = skewed_map();
        assert!(eval_shape(SpaceKind::P1Scalar, &map, &Point3::new(5.0, 5.0, 5.0)).is_err());
    }

    #[test]
    fn interpolating_constants() {
        let (mesh, active) = single_tet();
        let p1 = DofMap::build(&mesh, &active, SpaceKind::P1Scalar);
        assert!(p1.interpolate_scalar(|_| 1.0).values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn tangential_part_examples() {
        let n = Vector3::new(0.0, 0.6, 0.8);
        assert!(tangential_part(&n, &n).norm() < 1e-15);
        let u = Vector3::new(0.0, 1.0, 0.0);
        assert_eq!(tangential_part(&u, &Vector3::x()), u);
        let u = Vector3::new(0.3, -1.7, 2.2);
        assert!(tangential_part(&u, &n).dot(&n).abs() < 1e-14);
    }
}
