use crate::mesh::Polygon;
use crate::Vec2;

use super::BasisError;

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Gauss-Legendre nodes and weights on [-1, 1] (exact to degree 2n - 1).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let pm1 = if n == 0 { 0.0 } else { p0 };
    (p, n as f64 * (z * p - pm1) / (z * z - 1.0))
}

/// Legendre polynomials L_0..L_m at `s` in [-1, 1].
pub fn legendre_values(m: usize, s: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m + 1);
    out.push(1.0);
    if m >= 1 {
        out.push(s);
    }
    for k in 2..=m {
        let v = ((2 * k - 1) as f64 * s * out[k - 1] - (k - 1) as f64 * out[k - 2]) / k as f64;
        out.push(v);
    }
    out
}

/// Points and positive weights on a 2D region.
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn integrate(&self, f: impl Fn(Vec2) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss-Legendre rule on a segment. `params` holds the affine coordinate
/// t in [-1/2, 1/2] running from the first to the second endpoint.
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub points: Vec<Vec2>,
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl EdgeRule {
    pub fn integrate(&self, f: impl Fn(Vec2) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

pub fn edge_quadrature(a: Vec2, b: Vec2, degree: usize) -> EdgeRule {
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    let len = (b - a).norm();
    let params: Vec<f64> = x.iter().map(|s| 0.5 * s).collect();
    let points = params.iter().map(|t| a + (t + 0.5) * (b - a)).collect();
    let weights = w.iter().map(|wi| 0.5 * wi * len).collect();
    EdgeRule { points, params, weights, degree }
}

/// Collapsed-coordinate Gauss rule on the triangle (a, b, c), exact for
/// polynomials of total degree `degree`.
pub fn triangle_quadrature(a: Vec2, b: Vec2, c: Vec2, degree: usize, out: &mut QuadratureRule) {
    let n = (degree + 2).div_ceil(2);
    let (x, w) = gauss_legendre(n);
    let twice_area = cross(b - a, c - a);
    for i in 0..n {
        let u = 0.5 * (x[i] + 1.0);
        for j in 0..n {
            let v = 0.5 * (x[j] + 1.0);
            let (s, t) = (u, v * (1.0 - u));
            out.points.push(a + s * (b - a) + t * (c - a));
            out.weights.push(0.25 * w[i] * w[j] * (1.0 - u) * twice_area);
        }
    }
}

/// Quadrature on a simple polygon: a fan from the centroid when every fan
/// triangle is positively oriented, otherwise an ear-clipping triangulation.
pub fn polygon_quadrature(poly: &Polygon, degree: usize) -> Result<QuadratureRule, BasisError> {
    let mut rule = QuadratureRule { points: Vec::new(), weights: Vec::new(), degree };
    if poly.star_shaped_about_centroid() {
        let c = poly.centroid();
        for i in 0..poly.n() {
            let (a, b) = poly.edge(i);
            triangle_quadrature(c, a, b, degree, &mut rule);
        }
    } else {
        for [i, j, k] in ear_clip(poly.vertices())? {
            triangle_quadrature(poly.vertex(i), poly.vertex(j), poly.vertex(k), degree, &mut rule);
        }
    }
    Ok(rule)
}

/// Triangulates a counterclockwise simple polygon.
pub fn ear_clip(pts: &[Vec2]) -> Result<Vec<[usize; 3]>, BasisError> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    let mut tris = Vec::with_capacity(pts.len() - 2);
    let scale = pts.iter().map(|p| (p - pts[0]).norm_squared()).fold(0.0, f64::max);
    let tol = 1e-14 * scale;
    while idx.len() > 3 {
        let m = idx.len();
        let ear = (0..m).find(|&k| {
            let (i, j, l) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, c) = (pts[i], pts[j], pts[l]);
            if cross(b - a, c - b) <= tol {
                return false;
            }
            idx.iter().all(|&q| {
                if q == i || q == j || q == l {
                    return true;
                }
                let p = pts[q];
                !(cross(b - a, p - a) >= -tol && cross(c - b, p - b) >= -tol && cross(a - c, p - c) >= -tol)
            })
        });
        let k = ear.ok_or(BasisError::Triangulation)?;
        tris.push([idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]]);
        idx.remove(k);
    }
    tris.push([idx[0], idx[1], idx[2]]);
    Ok(tris)
}
