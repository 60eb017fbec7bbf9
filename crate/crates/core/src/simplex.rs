//! Affine maps of tetrahedra and the barycentric calculus on them.

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::levelset::Point3;

#[derive(Clone, Debug)]
pub struct TetMap {
    pub points: [Point3; 4],
    /// Constant gradients of the four barycentric coordinates.
    pub grad_lambda: [Point3; 4],
    pub volume: f64,
}

impl TetMap {
    pub fn new(points: [Point3; 4], tet: usize) -> Result<Self> {
        let j = Matrix3::from_columns(&[points[1] - points[0], points[2] - points[0], points[3] - points[0]]);
        let det = j.determinant();
        let scale = (points[1] - points[0]).norm().powi(3).max(f64::MIN_POSITIVE);
        if det.abs() < 1e-14 * scale {
            return Err(Error::DegenerateTet { tet, det });
        }
        let jinv = j.try_inverse().ok_or(Error::DegenerateTet { tet, det })?;
        let g1: Point3 = jinv.row(0).transpose();
        let g2: Point3 = jinv.row(1).transpose();
        let g3: Point3 = jinv.row(2).transpose();
        Ok(Self { points, grad_lambda: [-(g1 + g2 + g3), g1, g2, g3], volume: det.abs() / 6.0 })
    }

    pub fn barycentric(&self, x: &Point3) -> [f64; 4] {
        let d = x - self.points[0];
        let l1 = self.grad_lambda[1].dot(&d);
        let l2 = self.grad_lambda[2].dot(&d);
        let l3 = self.grad_lambda[3].dot(&d);
        [1.0 - l1 - l2 - l3, l1, l2, l3]
    }

    pub fn point(&self, lambda: &[f64; 4]) -> Point3 {
        self.points.iter().zip(lambda).map(|(p, l)| p * *l).sum()
    }

    /// Gradient of the linear interpolant with the given vertex values.
    pub fn linear_gradient(&self, values: &[f64; 4]) -> Point3 {
        self.grad_lambda.iter().zip(values).map(|(g, v)| g * *v).sum()
    }
}

pub fn triangle_area(t: &[Point3; 3]) -> f64 {
    0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm()
}
