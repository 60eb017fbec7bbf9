//! Symmetric quadrature rules on the reference triangle and tetrahedron.
//!
//! Triangle rules are stored with barycentric points and weights that sum to
//! one, so mapping to a physical triangle only scales by its area. The same
//! holds for tetrahedra and volume.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub order: u32,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TetRule {
    pub order: u32,
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
}

fn perm3(out: &mut Vec<[f64; 3]>, w: &mut Vec<f64>, a: f64, b: f64, c: f64, weight: f64) {
    let mut seen: Vec<[f64; 3]> = Vec::new();
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        if !seen.contains(&p) {
            seen.push(p);
            out.push(p);
            w.push(weight);
        }
    }
}

impl TriangleRule {
    pub fn new(order: u32) -> Result<Self> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        match order {
            2 => {
                let a = 1.0 / 6.0;
                perm3(&mut points, &mut weights, 1.0 - 2.0 * a, a, a, 1.0 / 3.0);
            }
            4 => {
                let a = 0.445_948_490_915_965;
                perm3(&mut points, &mut weights, 1.0 - 2.0 * a, a, a, 0.223_381_589_678_011);
                let b = 0.091_576_213_509_771;
                perm3(&mut points, &mut weights, 1.0 - 2.0 * b, b, b, 0.109_951_743_655_322);
            }
            6 => {
                let a = 0.249_286_745_170_910;
                perm3(&mut points, &mut weights, 1.0 - 2.0 * a, a, a, 0.116_786_275_726_379);
                let b = 0.063_089_014_491_502;
                perm3(&mut points, &mut weights, 1.0 - 2.0 * b, b, b, 0.050_844_906_370_207);
                let (c0, c1) = (0.053_145_049_844_817, 0.310_352_451_033_784);
                perm3(&mut points, &mut weights, c0, c1, 1.0 - c0 - c1, 0.082_851_075_618_374);
            }
            _ => return Err(Error::Config(format!("unsupported surface quadrature order {order} (use 2, 4 or 6)"))),
        }
        normalize(&mut weights);
        Ok(Self { order, points, weights })
    }
}

impl TetRule {
    pub fn new(order: u32) -> Result<Self> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let orbit4 = |a: f64, w: f64, points: &mut Vec<[f64; 4]>, weights: &mut Vec<f64>| {
            let b = 1.0 - 3.0 * a;
            for k in 0..4 {
                let mut p = [a; 4];
                p[k] = b;
                points.push(p);
                weights.push(w);
            }
        };
        match order {
            1 => {
                points.push([0.25; 4]);
                weights.push(1.0);
            }
            2 => orbit4(0.138_196_601_125_010_5, 0.25, &mut points, &mut weights),
            // 14-point degree-5 rule with positive weights.
            4 | 5 => {
                orbit4(0.092_735_250_310_891_2, 0.073_493_043_116_361_95, &mut points, &mut weights);
                orbit4(0.310_885_919_263_300_6, 0.112_687_925_718_015_85, &mut points, &mut weights);
                let a = 0.454_496_295_874_350_4;
                let b = 0.5 - a;
                for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
                    let mut p = [b; 4];
                    p[i] = a;
                    p[j] = a;
                    points.push(p);
                    weights.push(0.042_546_020_777_081_47);
                }
            }
            _ => return Err(Error::Config(format!("unsupported volume quadrature order {order} (use 1, 2 or 4)"))),
        }
        normalize(&mut weights);
        Ok(Self { order, points, weights })
    }
}

fn normalize(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    // Exact integral of x^a y^b over the unit right triangle.
    fn tri_monomial(a: u32, b: u32) -> f64 {
        fact(a) * fact(b) / fact(a + b + 2)
    }

    // Exact integral of x^a y^b z^c over the unit right tetrahedron.
    fn tet_monomial(a: u32, b: u32, c: u32) -> f64 {
        fact(a) * fact(b) * fact(c) / fact(a + b + c + 3)
    }

    #[test]
    fn triangle_rules_are_exact_to_their_order() {
        for order in [2, 4, 6] {
            let r = TriangleRule::new(order).unwrap();
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for a in 0..=order {
                for b in 0..=(order - a) {
                    let q: f64 = r
                        .points
                        .iter()
                        .zip(&r.weights)
                        .map(|(p, w)| 0.5 * w * p[1].powi(a as i32) * p[2].powi(b as i32))
                        .sum();
                    let exact = tri_monomial(a, b);
                    assert!((q - exact).abs() < 1e-12, "order {order} x^{a} y^{b}: {q} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn x2y2_on_unit_triangle() {
        let r = TriangleRule::new(4).unwrap();
        let q: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| 0.5 * w * (p[1] * p[2]).powi(2)).sum();
        assert!((q - 1.0 / 180.0).abs() < 1e-14);
        let one: f64 = TriangleRule::new(2).unwrap().weights.iter().map(|w| 0.5 * w).sum();
        assert!((one - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tet_rules_are_exact_to_their_order() {
        for order in [1, 2, 4] {
            let r = TetRule::new(order).unwrap();
            assert!(r.weights.iter().all(|&w| w > 0.0));
            let deg = if order == 4 { 5 } else { order };
            for a in 0..=deg {
                for b in 0..=(deg - a) {
                    for c in 0..=(deg - a - b) {
                        let q: f64 = r
                            .points
                            .iter()
                            .zip(&r.weights)
                            .map(|(p, w)| w / 6.0 * p[1].powi(a as i32) * p[2].powi(b as i32) * p[3].powi(c as i32))
                            .sum();
                        assert!((q - tet_monomial(a, b, c)).abs() < 1e-12, "order {order} ({a},{b},{c})");
                    }
                }
            }
        }
        let r = TetRule::new(2).unwrap();
        let mx: f64 = r.points.iter().zip(&r.weights).map(|(p, w)| w / 6.0 * p[1]).sum();
        assert!((mx - 1.0 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn unsupported_orders_are_rejected() {
        assert!(TriangleRule::new(3).is_err());
        assert!(TetRule::new(7).is_err());
    }
}
