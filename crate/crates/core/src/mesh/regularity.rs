use super::polygon::cross;
use super::PolygonalMesh;

#[derive(Clone, Debug, PartialEq)]
pub struct CellRegularity {
    /// min over edges of h_e / h_P
    pub min_edge_ratio: f64,
    pub m2_pass: bool,
    /// every fan triangle (centroid, edge) has positive area
    pub star_shaped: bool,
    /// min distance from centroid to the edges, divided by h_P
    pub radius_ratio: f64,
    pub m1_pass: bool,
}

#[derive(Clone, Debug)]
pub struct RegularityReport {
    pub gamma: f64,
    pub cells: Vec<CellRegularity>,
    /// Largest gamma for which every cell passes both checks.
    pub measured_gamma: f64,
    pub pass: bool,
}

/// Shape-regularity diagnostics. The edge-ratio test is exact; the
/// star-shapedness test uses the centroid as the candidate kernel point and
/// its distance to the edges as the ball radius.
pub fn check_regularity(mesh: &PolygonalMesh, gamma: f64) -> RegularityReport {
    let mut cells = Vec::with_capacity(mesh.num_cells());
    let mut measured = f64::INFINITY;
    for poly in mesh.polygons() {
        let h = poly.diameter();
        let min_edge_ratio = (0..poly.n()).map(|i| poly.edge_length(i) / h).fold(f64::INFINITY, f64::min);
        let c = poly.centroid();
        let radius = (0..poly.n())
            .map(|i| {
                let (a, b) = poly.edge(i);
                let t = ((c - a).dot(&(b - a)) / (b - a).norm_squared()).clamp(0.0, 1.0);
                (a + t * (b - a) - c).norm()
            })
            .fold(f64::INFINITY, f64::min);
        let star_shaped = (0..poly.n()).all(|i| {
            let (a, b) = poly.edge(i);
            cross(a - c, b - c) > 0.0
        });
        let radius_ratio = radius / h;
        let m2_pass = min_edge_ratio >= gamma;
        let m1_pass = star_shaped && radius_ratio >= gamma;
        let cell_gamma = if star_shaped { min_edge_ratio.min(radius_ratio) } else { 0.0 };
        measured = measured.min(cell_gamma);
        cells.push(CellRegularity { min_edge_ratio, m2_pass, star_shaped, radius_ratio, m1_pass });
    }
    let pass = cells.iter().all(|c| c.m1_pass && c.m2_pass);
    RegularityReport { gamma, cells, measured_gamma: measured, pass }
}
