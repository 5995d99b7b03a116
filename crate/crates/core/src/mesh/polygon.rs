use crate::Vec2;

use super::MeshError;

pub(crate) fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Geometry of a single polygonal cell.
///
/// Besides the intrinsic quantities (centroid, area, diameter, edge frames)
/// a polygon carries the characteristic length of each vertex and, for every
/// local edge, whether the global canonical edge orientation runs against the
/// local counterclockwise traversal. A standalone polygon uses its own
/// diameter as vertex length and no flips.
#[derive(Clone, Debug)]
pub struct Polygon {
    vertices: Vec<Vec2>,
    vertex_h: Vec<f64>,
    edge_flip: Vec<bool>,
    centroid: Vec2,
    area: f64,
    diameter: f64,
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self, MeshError> {
        let n = vertices.len();
        if n < 3 {
            return Err(MeshError::TooFewVertices { cell: 0, count: n });
        }
        let o = vertices[0];
        let mut twice_area = 0.0;
        let mut c = Vec2::zeros();
        for i in 0..n {
            let a = vertices[i] - o;
            let b = vertices[(i + 1) % n] - o;
            let w = cross(a, b);
            twice_area += w;
            c += w * (a + b);
        }
        let area = 0.5 * twice_area;
        let mut diameter: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                diameter = diameter.max((vertices[i] - vertices[j]).norm());
            }
        }
        if !(area > 1e-14 * diameter * diameter) {
            return Err(MeshError::NonPositiveArea { cell: 0, area });
        }
        let centroid = o + c / (6.0 * area);
        let poly = Self { vertex_h: vec![diameter; n], edge_flip: vec![false; n], vertices, centroid, area, diameter };
        if !poly.is_simple() {
            return Err(MeshError::SelfIntersecting { cell: 0 });
        }
        Ok(poly)
    }

    pub fn with_vertex_scales(mut self, scales: Vec<f64>) -> Self {
        assert_eq!(scales.len(), self.vertices.len());
        self.vertex_h = scales;
        self
    }

    pub fn with_edge_flips(mut self, flips: Vec<bool>) -> Self {
        assert_eq!(flips.len(), self.vertices.len());
        self.edge_flip = flips;
        self
    }

    /// Applies an affine similarity `x -> s x + shift`, scaling vertex lengths.
    pub fn similar(&self, s: f64, shift: Vec2) -> Self {
        let pts = self.vertices.iter().map(|&p| s * p + shift).collect();
        let mut out = Self::new(pts).expect("similarity preserves validity");
        out.vertex_h = self.vertex_h.iter().map(|h| s * h).collect();
        out.edge_flip = self.edge_flip.clone();
        out
    }

    fn is_simple(&self) -> bool {
        let n = self.n();
        let tol = 1e-12 * self.diameter * self.diameter;
        for i in 0..n {
            let (a, b) = self.edge(i);
            // consecutive edges may be collinear but must not fold back
            let (_, c) = self.edge((i + 1) % n);
            if cross(b - a, c - b).abs() <= tol && (b - a).dot(&(c - b)) < 0.0 {
                return false;
            }
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (p, q) = self.edge(j);
                if segments_touch(a, b, p, q, tol) {
                    return false;
                }
            }
        }
        true
    }

    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Vec2 {
        self.vertices[i]
    }

    pub fn vertex_h(&self, i: usize) -> f64 {
        self.vertex_h[i]
    }

    pub fn centroid(&self) -> Vec2 {
        self.centroid
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Endpoints of local edge `i` in counterclockwise order.
    pub fn edge(&self, i: usize) -> (Vec2, Vec2) {
        (self.vertices[i], self.vertices[(i + 1) % self.n()])
    }

    pub fn edge_length(&self, i: usize) -> f64 {
        let (a, b) = self.edge(i);
        (b - a).norm()
    }

    /// Counterclockwise unit tangent of local edge `i`.
    pub fn tangent(&self, i: usize) -> Vec2 {
        let (a, b) = self.edge(i);
        (b - a).normalize()
    }

    /// Outward unit normal of local edge `i`.
    pub fn normal(&self, i: usize) -> Vec2 {
        let t = self.tangent(i);
        Vec2::new(t.y, -t.x)
    }

    /// True when the global orientation of edge `i` runs clockwise here.
    pub fn edge_flipped(&self, i: usize) -> bool {
        self.edge_flip[i]
    }

    /// +1 when the canonical edge orientation matches the local traversal.
    pub fn edge_sign(&self, i: usize) -> f64 {
        if self.edge_flip[i] {
            -1.0
        } else {
            1.0
        }
    }

    /// Indices of vertices with interior angle larger than pi.
    pub fn reflex_vertices(&self) -> Vec<usize> {
        let n = self.n();
        let tol = 1e-12 * self.diameter * self.diameter;
        (0..n)
            .filter(|&i| {
                let prev = self.vertices[(i + n - 1) % n];
                let next = self.vertices[(i + 1) % n];
                cross(self.vertices[i] - prev, next - self.vertices[i]) < -tol
            })
            .collect()
    }

    /// Whether every fan triangle (centroid, edge) has positive area.
    pub fn star_shaped_about_centroid(&self) -> bool {
        (0..self.n()).all(|i| {
            let (a, b) = self.edge(i);
            cross(a - self.centroid, b - self.centroid) > 1e-14 * self.diameter * self.diameter
        })
    }
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    cross(b - a, c - a)
}

fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_touch(a: Vec2, b: Vec2, p: Vec2, q: Vec2, tol: f64) -> bool {
    let d1 = orient(p, q, a);
    let d2 = orient(p, q, b);
    let d3 = orient(a, b, p);
    let d4 = orient(a, b, q);
    if ((d1 > tol && d2 < -tol) || (d1 < -tol && d2 > tol)) && ((d3 > tol && d4 < -tol) || (d3 < -tol && d4 > tol)) {
        return true;
    }
    (d1.abs() <= tol && on_segment(p, q, a))
        || (d2.abs() <= tol && on_segment(p, q, b))
        || (d3.abs() <= tol && on_segment(a, b, p))
        || (d4.abs() <= tol && on_segment(a, b, q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Polygon {
        Polygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)]).unwrap()
    }

    #[test]
    fn square_geometry() {
        let p = square();
        assert!((p.area() - 1.0).abs() < 1e-15);
        assert!((p.centroid() - Vec2::new(0.5, 0.5)).norm() < 1e-15);
        assert!((p.diameter() - 2f64.sqrt()).abs() < 1e-15);
        for i in 0..4 {
            let (n, t) = (p.normal(i), p.tangent(i));
            assert!(n.dot(&t).abs() < 1e-14);
            assert!((n.norm() - 1.0).abs() < 1e-14 && (t.norm() - 1.0).abs() < 1e-14);
            // outward: points away from the centroid
            let (a, _) = p.edge(i);
            assert!(n.dot(&(a - p.centroid())) > 0.0);
        }
    }

    #[test]
    fn rejects_bow_tie() {
        let r = Polygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn rejects_self_touching_polygon() {
        // positive area but one vertex lies on a non-adjacent edge
        let r = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 2.0),
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn arrow_has_one_reflex_vertex() {
        let p = Polygon::new(vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.5), Vec2::new(0.0, 1.0), Vec2::new(0.3, 0.5)]).unwrap();
        assert_eq!(p.reflex_vertices(), vec![3]);
        assert!(square().reflex_vertices().is_empty());
    }

    #[test]
    fn collinear_hanging_vertex_is_allowed() {
        let p = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.5, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ])
        .unwrap();
        assert!((p.area() - 1.0).abs() < 1e-15);
        assert!(p.reflex_vertices().is_empty());
    }
}
