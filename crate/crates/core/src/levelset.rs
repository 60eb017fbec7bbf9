//! Analytic level-set descriptions of closed surfaces.
//!
//! A surface is the zero set of a scalar field `phi`; normals and tangential
//! projectors come from the exact gradient. The sign convention is negative
//! inside, positive outside.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Point3 = Vector3<f64>;

/// A caller-supplied smooth scalar field together with its gradient.
pub trait ImplicitFunction: Send + Sync {
    fn value(&self, x: &Point3) -> f64;
    fn gradient(&self, x: &Point3) -> Point3;
}

#[derive(Clone)]
pub enum SurfaceKind {
    Sphere { radius: f64 },
    /// Torus of major radius `r_major` whose tube radius varies from `r_min`
    /// on the `+x` side to `r_max` on the `-x` side.
    AsymmetricTorus { r_major: f64, r_min: f64, r_max: f64 },
    Custom(Arc<dyn ImplicitFunction>),
}

impl fmt::Debug for SurfaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sphere { radius } => f.debug_struct("Sphere").field("radius", radius).finish(),
            Self::AsymmetricTorus { r_major, r_min, r_max } => f
                .debug_struct("AsymmetricTorus")
                .field("r_major", r_major)
                .field("r_min", r_min)
                .field("r_max", r_max)
                .finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LevelSetSurface {
    pub kind: SurfaceKind,
}

fn domain_err(x: &Point3) -> Error {
    Error::Domain { x: x[0], y: x[1], z: x[2] }
}

impl LevelSetSurface {
    pub fn unit_sphere() -> Self {
        Self::sphere(1.0)
    }

    pub fn sphere(radius: f64) -> Self {
        Self { kind: SurfaceKind::Sphere { radius } }
    }

    pub fn asymmetric_torus(r_major: f64, r_min: f64, r_max: f64) -> Self {
        Self { kind: SurfaceKind::AsymmetricTorus { r_major, r_min, r_max } }
    }

    /// The torus used in the experiments: `R = 1`, tube radius in `[0.3, 0.6]`.
    pub fn default_torus() -> Self {
        Self::asymmetric_torus(1.0, 0.3, 0.6)
    }

    pub fn custom(f: Arc<dyn ImplicitFunction>) -> Self {
        Self { kind: SurfaceKind::Custom(f) }
    }

    pub fn phi(&self, x: &Point3) -> Result<f64> {
        match &self.kind {
            SurfaceKind::Sphere { radius } => Ok(x.norm() - radius),
            SurfaceKind::AsymmetricTorus { r_major, r_min, r_max } => {
                let rho2 = x[0] * x[0] + x[1] * x[1];
                if rho2 == 0.0 {
                    return Err(domain_err(x));
                }
                let r = tube_radius(x, rho2.sqrt(), *r_min, *r_max);
                let a = x.norm_squared() + r_major * r_major - r * r;
                Ok(a * a - 4.0 * r_major * r_major * rho2)
            }
            SurfaceKind::Custom(f) => Ok(f.value(x)),
        }
    }

    pub fn gradient(&self, x: &Point3) -> Result<Point3> {
        match &self.kind {
            SurfaceKind::Sphere { .. } => {
                let r = x.norm();
                if r == 0.0 {
                    return Err(Error::SingularGradient { x: 0.0, y: 0.0, z: 0.0 });
                }
                Ok(x / r)
            }
            SurfaceKind::AsymmetricTorus { r_major, r_min, r_max } => {
                let rho2 = x[0] * x[0] + x[1] * x[1];
                if rho2 == 0.0 {
                    return Err(domain_err(x));
                }
                let rho = rho2.sqrt();
                let k = 0.5 * (r_max - r_min);
                let r = tube_radius(x, rho, *r_min, *r_max);
                let rho3 = rho2 * rho;
                let dr = Vector3::new(-k * x[1] * x[1] / rho3, k * x[0] * x[1] / rho3, 0.0);
                let a = x.norm_squared() + r_major * r_major - r * r;
                let four_r2 = 4.0 * r_major * r_major;
                let mut g = (2.0 * x - 2.0 * r * dr) * (2.0 * a);
                g[0] -= 2.0 * four_r2 * x[0];
                g[1] -= 2.0 * four_r2 * x[1];
                Ok(g)
            }
            SurfaceKind::Custom(f) => Ok(f.gradient(x)),
        }
    }

    /// Unit normal `grad phi / |grad phi|`.
    pub fn normal(&self, x: &Point3) -> Result<Point3> {
        let g = self.gradient(x)?;
        let n = g.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::SingularGradient { x: x[0], y: x[1], z: x[2] });
        }
        Ok(g / n)
    }

    /// Orthogonal projector `I - n n^T` onto the tangent plane.
    pub fn projector(&self, x: &Point3) -> Result<Matrix3<f64>> {
        Ok(tangent_projector(&self.normal(x)?))
    }

    /// Exact area where known in closed form.
    pub fn exact_area(&self) -> Option<f64> {
        match &self.kind {
            SurfaceKind::Sphere { radius } => Some(4.0 * std::f64::consts::PI * radius * radius),
            _ => None,
        }
    }
}

fn tube_radius(x: &Point3, rho: f64, r_min: f64, r_max: f64) -> f64 {
    r_min + 0.5 * (r_max - r_min) * (1.0 - x[0] / rho)
}

pub fn tangent_projector(n: &Point3) -> Matrix3<f64> {
    Matrix3::identity() - n * n.transpose()
}
