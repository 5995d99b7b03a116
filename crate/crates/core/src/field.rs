//! Analytic scalar fields with derivatives, used for interpolation,
//! manufactured solutions and error evaluation.

use nalgebra::Matrix2;
use rand::{Rng, RngExt};

use crate::Vec2;

pub trait ScalarField: Sync {
    fn value(&self, p: Vec2) -> f64;
    fn gradient(&self, p: Vec2) -> Vec2;
    fn hessian(&self, p: Vec2) -> Matrix2<f64>;
}

/// Field given by closures for the value, gradient and Hessian.
pub struct FnField<V, G, H> {
    pub value: V,
    pub gradient: G,
    pub hessian: H,
}

impl<V, G, H> FnField<V, G, H>
where
    V: Fn(Vec2) -> f64 + Sync,
    G: Fn(Vec2) -> Vec2 + Sync,
    H: Fn(Vec2) -> Matrix2<f64> + Sync,
{
    pub fn new(value: V, gradient: G, hessian: H) -> Self {
        Self { value, gradient, hessian }
    }
}

impl<V, G, H> ScalarField for FnField<V, G, H>
where
    V: Fn(Vec2) -> f64 + Sync,
    G: Fn(Vec2) -> Vec2 + Sync,
    H: Fn(Vec2) -> Matrix2<f64> + Sync,
{
    fn value(&self, p: Vec2) -> f64 {
        (self.value)(p)
    }
    fn gradient(&self, p: Vec2) -> Vec2 {
        (self.gradient)(p)
    }
    fn hessian(&self, p: Vec2) -> Matrix2<f64> {
        (self.hessian)(p)
    }
}

/// The zero field.
pub struct Zero;

impl ScalarField for Zero {
    fn value(&self, _: Vec2) -> f64 {
        0.0
    }
    fn gradient(&self, _: Vec2) -> Vec2 {
        Vec2::zeros()
    }
    fn hessian(&self, _: Vec2) -> Matrix2<f64> {
        Matrix2::zeros()
    }
}

/// Polynomial in x, y as a list of terms `c x^a y^b`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polynomial {
    pub terms: Vec<(usize, usize, f64)>,
}

impl Polynomial {
    pub fn new(terms: Vec<(usize, usize, f64)>) -> Self {
        Self { terms }
    }

    /// Random coefficients in [-1, 1] for every monomial of degree <= `degree`.
    pub fn random<R: Rng>(degree: usize, rng: &mut R) -> Self {
        let mut terms = Vec::new();
        for d in 0..=degree {
            for b in 0..=d {
                terms.push((d - b, b, rng.random_range(-1.0..=1.0)));
            }
        }
        Self { terms }
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().filter(|t| t.2 != 0.0).map(|t| t.0 + t.1).max().unwrap_or(0)
    }

    pub fn derivative(&self, alpha: (usize, usize)) -> Polynomial {
        let fall = |n: usize, k: usize| (0..k).map(|i| (n - i) as f64).product::<f64>();
        Polynomial {
            terms: self
                .terms
                .iter()
                .filter(|&&(a, b, _)| a >= alpha.0 && b >= alpha.1)
                .map(|&(a, b, c)| (a - alpha.0, b - alpha.1, c * fall(a, alpha.0) * fall(b, alpha.1)))
                .collect(),
        }
    }

    pub fn laplacian(&self) -> Polynomial {
        let mut t = self.derivative((2, 0)).terms;
        t.extend(self.derivative((0, 2)).terms);
        Polynomial { terms: t }
    }

    pub fn eval(&self, p: Vec2) -> f64 {
        self.terms.iter().map(|&(a, b, c)| c * p.x.powi(a as i32) * p.y.powi(b as i32)).sum()
    }
}

impl ScalarField for Polynomial {
    fn value(&self, p: Vec2) -> f64 {
        self.eval(p)
    }
    fn gradient(&self, p: Vec2) -> Vec2 {
        Vec2::new(self.derivative((1, 0)).eval(p), self.derivative((0, 1)).eval(p))
    }
    fn hessian(&self, p: Vec2) -> Matrix2<f64> {
        let xy = self.derivative((1, 1)).eval(p);
        Matrix2::new(self.derivative((2, 0)).eval(p), xy, xy, self.derivative((0, 2)).eval(p))
    }
}

/// `sin(pi x) sin(pi y)`
pub struct SineBump;

impl ScalarField for SineBump {
    fn value(&self, p: Vec2) -> f64 {
        use std::f64::consts::PI;
        (PI * p.x).sin() * (PI * p.y).sin()
    }
    fn gradient(&self, p: Vec2) -> Vec2 {
        use std::f64::consts::PI;
        let (sx, cx, sy, cy) = ((PI * p.x).sin(), (PI * p.x).cos(), (PI * p.y).sin(), (PI * p.y).cos());
        PI * Vec2::new(cx * sy, sx * cy)
    }
    fn hessian(&self, p: Vec2) -> Matrix2<f64> {
        use std::f64::consts::PI;
        let (sx, cx, sy, cy) = ((PI * p.x).sin(), (PI * p.x).cos(), (PI * p.y).sin(), (PI * p.y).cos());
        PI * PI * Matrix2::new(-sx * sy, cx * cy, cx * cy, -sx * sy)
    }
}

/// `(sin(pi x) sin(pi y))^2`, clamped on the unit square.
pub struct SquaredSineBump;

impl SquaredSineBump {
    /// `lap^2` of the field, from `u = (1 - cos 2 pi x)(1 - cos 2 pi y) / 4`.
    pub fn bilaplacian(p: Vec2) -> f64 {
        use std::f64::consts::PI;
        let k4 = (2.0 * PI).powi(4);
        let (cx, cy) = ((2.0 * PI * p.x).cos(), (2.0 * PI * p.y).cos());
        k4 * (-cx * (1.0 - cy) + 2.0 * cx * cy - (1.0 - cx) * cy) / 4.0
    }
}

impl ScalarField for SquaredSineBump {
    fn value(&self, p: Vec2) -> f64 {
        SineBump.value(p).powi(2)
    }
    fn gradient(&self, p: Vec2) -> Vec2 {
        2.0 * SineBump.value(p) * SineBump.gradient(p)
    }
    fn hessian(&self, p: Vec2) -> Matrix2<f64> {
        let g = SineBump.gradient(p);
        2.0 * (g * g.transpose() + SineBump.value(p) * SineBump.hessian(p))
    }
}

#[cfg(test)]
pub(crate) fn check_derivatives(f: &dyn ScalarField, p: Vec2) {
    let h = 1e-5;
    let (ex, ey) = (Vec2::new(h, 0.0), Vec2::new(0.0, h));
    let g = f.gradient(p);
    let fd = Vec2::new(f.value(p + ex) - f.value(p - ex), f.value(p + ey) - f.value(p - ey)) / (2.0 * h);
    assert!((g - fd).norm() < 1e-6 * g.norm().max(1.0), "gradient {g} vs {fd}");
    let hs = f.hessian(p);
    let col_x = (f.gradient(p + ex) - f.gradient(p - ex)) / (2.0 * h);
    let col_y = (f.gradient(p + ey) - f.gradient(p - ey)) / (2.0 * h);
    let fd_h = Matrix2::from_columns(&[col_x, col_y]);
    assert!((hs - fd_h).norm() < 1e-5 * hs.norm().max(1.0), "hessian {hs} vs {fd_h}");
}
