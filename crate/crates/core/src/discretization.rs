//! Everything that depends only on the geometry: mesh, active set, surface
//! patches, DOF maps, and shape data at every surface quadrature point.

use std::sync::OnceLock;

use nalgebra::Matrix3;

use crate::cutgeom::{extract_patches, patch_quadrature_with, volume_quadrature_with, SurfacePatch};
use crate::error::{Error, Result};
use crate::fespace::{p2_gradients, p2_values, DofMap, SpaceKind};
use crate::levelset::{tangent_projector, LevelSetSurface, Point3};
use crate::linalg::SparsityPattern;
use crate::mesh::{ActiveMesh, BackgroundMesh, BoundingBox};
use crate::quadrature::{TetRule, TriangleRule};
use crate::simplex::TetMap;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryOptions {
    pub level: u32,
    pub extra_surface_levels: u32,
    pub bbox: BoundingBox,
    pub surface_order: u32,
    /// Order of the P1 volume stabilization rule; P2 terms use at least 4.
    pub volume_order: u32,
    /// Use exact level-set normals instead of the discrete ones in surface forms.
    pub use_exact_normals: bool,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        Self {
            level: 3,
            extra_surface_levels: 0,
            bbox: BoundingBox::default(),
            surface_order: 4,
            volume_order: 2,
            use_exact_normals: false,
        }
    }
}

/// Shape data at the quadrature points of one surface patch.
#[derive(Clone, Debug)]
pub struct PatchQuadrature {
    /// Index into `ActiveMesh::tets` (and the DOF maps).
    pub active_index: usize,
    pub points: Vec<Point3>,
    pub weights: Vec<f64>,
    /// Normal used by surface operators at each point.
    pub normals: Vec<Point3>,
    pub projectors: Vec<Matrix3<f64>>,
    pub p1: Vec<[f64; 4]>,
    /// Surface gradients of the P1 basis at each point.
    pub p1_surface_grad: Vec<[Point3; 4]>,
    pub p2: Vec<[f64; 10]>,
    /// Full (ambient) gradients of the P2 basis at each point.
    pub p2_grad: Vec<[Point3; 10]>,
}

pub struct Discretization {
    pub surface: LevelSetSurface,
    pub options: GeometryOptions,
    pub mesh: BackgroundMesh,
    pub active: ActiveMesh,
    pub patches: Vec<SurfacePatch>,
    pub p1: DofMap,
    pub p2: DofMap,
    /// Affine maps of the active tets.
    pub maps: Vec<TetMap>,
    pub quad: Vec<PatchQuadrature>,
    p1_pattern: OnceLock<SparsityPattern>,
    p2_pattern: OnceLock<SparsityPattern>,
    p1_p2_pattern: OnceLock<SparsityPattern>,
    p1_normal_stiffness: OnceLock<Vec<[f64; 16]>>,
    p2_normal_stiffness: OnceLock<Vec<[f64; 100]>>,
}

impl std::fmt::Debug for Discretization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Discretization")
            .field("surface", &self.surface)
            .field("level", &self.options.level)
            .field("active_tets", &self.active.tets.len())
            .field("p1_dofs", &self.p1.n_dofs())
            .field("p2_dofs", &self.p2.n_dofs())
            .finish()
    }
}

impl Discretization {
    pub fn new(surface: LevelSetSurface, options: GeometryOptions) -> Result<Self> {
        let mut mesh = BackgroundMesh::build_initial(options.bbox);
        for _ in 0..options.level {
            mesh = mesh.refine_uniform();
        }
        if options.extra_surface_levels > 0 {
            mesh = mesh.refine_toward_surface(&surface, options.extra_surface_levels)?;
        }
        Self::from_mesh(surface, mesh, options)
    }

    pub fn from_mesh(surface: LevelSetSurface, mesh: BackgroundMesh, options: GeometryOptions) -> Result<Self> {
        let active = ActiveMesh::select(&mesh, &surface)?;
        let patches = extract_patches(&mesh, &active)?;
        let p1 = DofMap::build(&mesh, &active, SpaceKind::P1Scalar);
        let p2 = DofMap::build(&mesh, &active, SpaceKind::P2Vector);
        let maps = active.tets.iter().map(|&t| TetMap::new(mesh.tet_points(t), t)).collect::<Result<Vec<_>>>()?;
        let rule = TriangleRule::new(options.surface_order)?;
        TetRule::new(options.volume_order)?;
        let mut quad = Vec::with_capacity(patches.len());
        for patch in &patches {
            let q = patch_quadrature_with(patch, &rule);
            let map = &maps[patch.active_index];
            let n = q.points.len();
            let mut pq = PatchQuadrature {
                active_index: patch.active_index,
                points: q.points,
                weights: q.weights,
                normals: Vec::with_capacity(n),
                projectors: Vec::with_capacity(n),
                p1: Vec::with_capacity(n),
                p1_surface_grad: Vec::with_capacity(n),
                p2: Vec::with_capacity(n),
                p2_grad: Vec::with_capacity(n),
            };
            for x in &pq.points {
                let normal = if options.use_exact_normals { surface.normal(x)? } else { patch.normal };
                let proj = tangent_projector(&normal);
                let l = map.barycentric(x);
                pq.normals.push(normal);
                pq.projectors.push(proj);
                pq.p1.push(l);
                pq.p1_surface_grad.push(map.grad_lambda.map(|g| proj * g));
                pq.p2.push(p2_values(&l));
                pq.p2_grad.push(p2_gradients(&l, &map.grad_lambda));
            }
            quad.push(pq);
        }
        Ok(Self {
            surface,
            options,
            mesh,
            active,
            patches,
            p1,
            p2,
            maps,
            quad,
            p1_pattern: OnceLock::new(),
            p2_pattern: OnceLock::new(),
            p1_p2_pattern: OnceLock::new(),
            p1_normal_stiffness: OnceLock::new(),
            p2_normal_stiffness: OnceLock::new(),
        })
    }

    /// `|Gamma_h|`.
    pub fn area(&self) -> f64 {
        self.patches.iter().map(|p| p.area).sum()
    }

    /// Characteristic size of active tet `ai`.
    pub fn h(&self, ai: usize) -> f64 {
        self.mesh.tet_size(self.active.tets[ai])
    }

    pub fn max_h(&self) -> f64 {
        self.active.max_size(&self.mesh)
    }

    pub fn n_active(&self) -> usize {
        self.active.tets.len()
    }

    pub fn p1_pattern(&self) -> &SparsityPattern {
        self.p1_pattern.get_or_init(|| {
            let dofs: Vec<Vec<usize>> = (0..self.n_active()).map(|a| self.p1.tet_dofs(a)).collect();
            SparsityPattern::from_elements(self.p1.n_dofs(), self.p1.n_dofs(), dofs.iter().map(|d| (&d[..], &d[..])))
        })
    }

    pub fn p2_pattern(&self) -> &SparsityPattern {
        self.p2_pattern.get_or_init(|| {
            let dofs: Vec<Vec<usize>> = (0..self.n_active()).map(|a| self.p2.tet_dofs(a)).collect();
            SparsityPattern::from_elements(self.p2.n_dofs(), self.p2.n_dofs(), dofs.iter().map(|d| (&d[..], &d[..])))
        })
    }

    /// Rows: P1 pressure, columns: P2 velocity.
    pub fn p1_p2_pattern(&self) -> &SparsityPattern {
        self.p1_p2_pattern.get_or_init(|| {
            let rows: Vec<Vec<usize>> = (0..self.n_active()).map(|a| self.p1.tet_dofs(a)).collect();
            let cols: Vec<Vec<usize>> = (0..self.n_active()).map(|a| self.p2.tet_dofs(a)).collect();
            SparsityPattern::from_elements(
                self.p1.n_dofs(),
                self.p2.n_dofs(),
                rows.iter().zip(&cols).map(|(r, c)| (&r[..], &c[..])),
            )
        })
    }

    /// Per active tet, `int_T (n . grad phi_i)(n . grad phi_j) dx` for the P1
    /// basis with the exact quasi-normal `n`.
    pub fn p1_normal_stiffness(&self) -> Result<&[[f64; 16]]> {
        if let Some(v) = self.p1_normal_stiffness.get() {
            return Ok(v);
        }
        let rule = TetRule::new(self.options.volume_order)?;
        let mut out = Vec::with_capacity(self.n_active());
        for map in &self.maps {
            let q = volume_quadrature_with(&map.points, &rule);
            let mut local = [0.0; 16];
            for (x, w) in q.points.iter().zip(&q.weights) {
                let n = self.quasi_normal(x)?;
                let dn = map.grad_lambda.map(|g| g.dot(&n));
                for i in 0..4 {
                    for j in 0..4 {
                        local[i * 4 + j] += w * dn[i] * dn[j];
                    }
                }
            }
            out.push(local);
        }
        Ok(self.p1_normal_stiffness.get_or_init(|| out))
    }

    /// As [`Self::p1_normal_stiffness`] for the scalar P2 basis.
    pub fn p2_normal_stiffness(&self) -> Result<&[[f64; 100]]> {
        if let Some(v) = self.p2_normal_stiffness.get() {
            return Ok(v);
        }
        let rule = TetRule::new(self.options.volume_order.max(4))?;
        let mut out = Vec::with_capacity(self.n_active());
        for map in &self.maps {
            let q = volume_quadrature_with(&map.points, &rule);
            let mut local = [0.0; 100];
            for (x, w) in q.points.iter().zip(&q.weights) {
                let n = self.quasi_normal(x)?;
                let l = map.barycentric(x);
                let dn = p2_gradients(&l, &map.grad_lambda).map(|g| g.dot(&n));
                for i in 0..10 {
                    for j in 0..10 {
                        local[i * 10 + j] += w * dn[i] * dn[j];
                    }
                }
            }
            out.push(local);
        }
        Ok(self.p2_normal_stiffness.get_or_init(|| out))
    }

    fn quasi_normal(&self, x: &Point3) -> Result<Point3> {
        match self.surface.normal(x) {
            Err(Error::Domain { .. }) => self.surface.normal(&(x + Point3::new(1e-9, 0.0, 0.0))),
            other => other,
        }
    }

    /// Value of a P1 field at quadrature point `q` of patch `pi`.
    pub fn p1_value(&self, field: &[f64], pi: usize, q: usize) -> f64 {
        let pq = &self.quad[pi];
        let nodes = self.p1.tet_nodes(pq.active_index);
        (0..4).map(|i| field[nodes[i]] * pq.p1[q][i]).sum()
    }

    /// Surface gradient of a P1 field at a quadrature point.
    pub fn p1_surface_gradient(&self, field: &[f64], pi: usize, q: usize) -> Point3 {
        let pq = &self.quad[pi];
        let nodes = self.p1.tet_nodes(pq.active_index);
        (0..4).map(|i| pq.p1_surface_grad[q][i] * field[nodes[i]]).sum()
    }

    /// Value of a P2 vector field at a quadrature point.
    pub fn p2_value(&self, field: &[f64], pi: usize, q: usize) -> Point3 {
        let pq = &self.quad[pi];
        let nodes = self.p2.tet_nodes(pq.active_index);
        let mut u = Point3::zeros();
        for (k, &n) in nodes.iter().enumerate() {
            u += Point3::new(field[3 * n], field[3 * n + 1], field[3 * n + 2]) * pq.p2[q][k];
        }
        u
    }

    /// Ambient Jacobian `(grad u)_{ij} = d u_i / d x_j` of a P2 vector field.
    pub fn p2_jacobian(&self, field: &[f64], pi: usize, q: usize) -> Matrix3<f64> {
        let pq = &self.quad[pi];
        let nodes = self.p2.tet_nodes(pq.active_index);
        let mut j = Matrix3::zeros();
        for (k, &n) in nodes.iter().enumerate() {
            let u = Point3::new(field[3 * n], field[3 * n + 1], field[3 * n + 2]);
            j += u * pq.p2_grad[q][k].transpose();
        }
        j
    }

    /// Iterates `(patch, point, weight)` over all surface quadrature points.
    pub fn surface_points(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.quad.iter().enumerate().flat_map(|(pi, pq)| pq.weights.iter().enumerate().map(move |(q, &w)| (pi, q, w)))
    }

    /// `int_Gamma_h f ds` of a pointwise integrand.
    pub fn integrate(&self, mut f: impl FnMut(usize, usize) -> f64) -> f64 {
        self.surface_points().map(|(pi, q, w)| w * f(pi, q)).sum()
    }
}
