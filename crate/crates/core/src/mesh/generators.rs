use std::collections::HashMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::polygon::cross;
use super::{MeshError, PolygonalMesh};
use crate::Vec2;

/// Jitter used when the caller does not choose one.
pub const DEFAULT_QUAD_JITTER: f64 = 0.2;
/// Amplitude of the smooth map applied to the hexagonal tiling.
pub const DEFAULT_HEX_DISTORTION: f64 = 0.05;

const MERGE_TOL: f64 = 1e-10;

pub fn generate_structured_quads(n: usize) -> Result<PolygonalMesh, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidParameter("structured quads need n >= 1".into()));
    }
    let (vertices, cells) = quad_grid(n);
    PolygonalMesh::new(vertices, cells)
}

fn quad_grid(n: usize) -> (Vec<Vec2>, Vec<Vec<usize>>) {
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Vec2::new(i as f64 / n as f64, j as f64 / n as f64));
        }
    }
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    (vertices, cells)
}

#[derive(Clone, Debug)]
pub struct RandomizedQuads {
    pub mesh: PolygonalMesh,
    /// Seed that produced a valid mesh (the requested one unless retried).
    pub seed_used: u64,
    pub attempts: usize,
}

/// Structured quads with interior vertices moved by at most `jitter / n`
/// per coordinate. Invalid draws are retried with the next seed.
pub fn generate_randomized_quads(n: usize, jitter: f64, seed: u64) -> Result<RandomizedQuads, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidParameter("randomized quads need n >= 1".into()));
    }
    if !(0.0..0.5).contains(&jitter) {
        return Err(MeshError::InvalidParameter(format!("jitter {jitter} outside [0, 0.5)")));
    }
    const ATTEMPTS: usize = 10;
    for attempt in 0..ATTEMPTS {
        let s = seed.wrapping_add(attempt as u64);
        let (mut vertices, cells) = quad_grid(n);
        if jitter > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let amp = jitter / n as f64;
            for j in 1..n {
                for i in 1..n {
                    let v = &mut vertices[j * (n + 1) + i];
                    v.x += rng.random_range(-amp..=amp);
                    v.y += rng.random_range(-amp..=amp);
                }
            }
        }
        match PolygonalMesh::new(vertices, cells) {
            Ok(mesh) => return Ok(RandomizedQuads { mesh, seed_used: s, attempts: attempt + 1 }),
            Err(MeshError::NonPositiveArea { .. } | MeshError::SelfIntersecting { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(MeshError::TooManyAttempts { attempts: ATTEMPTS })
}

/// Mainly hexagonal mesh with the default smooth distortion.
pub fn generate_hexagonal_distorted(n: usize) -> Result<PolygonalMesh, MeshError> {
    generate_hexagonal(n, DEFAULT_HEX_DISTORTION)
}

/// Voronoi diagram of a staggered lattice (hexagons inside, pentagons and
/// quadrilaterals along the boundary) followed by the map
/// `(x, y) -> (x, y) + a sin(2 pi x) sin(2 pi y) (1, 1)`.
pub fn generate_hexagonal(n: usize, amplitude: f64) -> Result<PolygonalMesh, MeshError> {
    if n < 2 {
        return Err(MeshError::InvalidParameter("hexagonal mesh needs n >= 2".into()));
    }
    // Row spacing close to the regular value sqrt(3)/(2n); an even row count
    // puts unshifted rows on both y = 0 and y = 1.
    let rows = 2 * ((n as f64 / 3f64.sqrt()).round() as usize).max(1);
    let mut seeds = Vec::new();
    for j in 0..=rows {
        let y = j as f64 / rows as f64;
        if j % 2 == 0 {
            seeds.extend((0..=n).map(|i| Vec2::new(i as f64 / n as f64, y)));
        } else {
            seeds.extend((0..n).map(|i| Vec2::new((i as f64 + 0.5) / n as f64, y)));
        }
    }
    let polygons = voronoi_cells(&seeds);
    let (mut vertices, cells) = merge_polygons(&polygons);
    let two_pi = 2.0 * std::f64::consts::PI;
    for v in vertices.iter_mut() {
        let s = amplitude * (two_pi * v.x).sin() * (two_pi * v.y).sin();
        *v += Vec2::new(s, s);
    }
    PolygonalMesh::new(vertices, cells)
}

/// Tiling by `2n x 2n` square blocks, each split into a four-pointed star
/// octagon (four reflex vertices) and four convex corner quadrilaterals.
pub fn generate_nonconvex_octagons(n: usize) -> Result<PolygonalMesh, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidParameter("octagon mesh needs n >= 1".into()));
    }
    const DENT: f64 = 0.15;
    let m = 2 * n;
    let s = 1.0 / m as f64;
    let mut vertices: Vec<Vec2> = Vec::new();
    let mut lattice: HashMap<(usize, usize), usize> = HashMap::new();
    // Points on the half-spacing lattice are shared between blocks.
    let mut lat = |i: usize, j: usize, vertices: &mut Vec<Vec2>| -> usize {
        *lattice.entry((i, j)).or_insert_with(|| {
            vertices.push(Vec2::new(i as f64 * 0.5 * s, j as f64 * 0.5 * s));
            vertices.len() - 1
        })
    };
    let mut cells = Vec::with_capacity(5 * m * m);
    for bj in 0..m {
        for bi in 0..m {
            let (i0, j0) = (2 * bi, 2 * bj);
            let origin = Vec2::new(bi as f64 * s, bj as f64 * s);
            let corner = [
                lat(i0, j0, &mut vertices),
                lat(i0 + 2, j0, &mut vertices),
                lat(i0 + 2, j0 + 2, &mut vertices),
                lat(i0, j0 + 2, &mut vertices),
            ];
            let mid = [
                lat(i0 + 1, j0, &mut vertices),
                lat(i0 + 2, j0 + 1, &mut vertices),
                lat(i0 + 1, j0 + 2, &mut vertices),
                lat(i0, j0 + 1, &mut vertices),
            ];
            let dents = [(0.5 + DENT, 0.5 - DENT), (0.5 + DENT, 0.5 + DENT), (0.5 - DENT, 0.5 + DENT), (0.5 - DENT, 0.5 - DENT)];
            let inner: Vec<usize> = dents
                .iter()
                .map(|&(x, y)| {
                    vertices.push(origin + s * Vec2::new(x, y));
                    vertices.len() - 1
                })
                .collect();
            // inner[q] sits between mid[q] and mid[q + 1]
            cells.push(vec![mid[0], inner[0], mid[1], inner[1], mid[2], inner[2], mid[3], inner[3]]);
            for q in 0..4 {
                let next_mid = mid[(q + 1) % 4];
                cells.push(vec![mid[q], corner[(q + 1) % 4], next_mid, inner[q]]);
            }
        }
    }
    PolygonalMesh::new(vertices, cells)
}

#[derive(Clone, Debug)]
pub struct VoronoiMesh {
    pub mesh: PolygonalMesh,
    /// Generators of the final diagram.
    pub seeds: Vec<Vec2>,
    /// Maximum centroid-to-seed distance before each centroidal update.
    pub lloyd_history: Vec<f64>,
    /// Centroidal energy sum_i int_{V_i} |x - s_i|^2 before each update and
    /// after the last one (non-increasing under Lloyd iterations).
    pub lloyd_energy: Vec<f64>,
}

/// Clipped Voronoi diagram of seeded uniform points in the unit square,
/// relaxed by `lloyd_iters` centroidal (Lloyd) updates.
pub fn generate_voronoi(n_seeds: usize, seed: u64, lloyd_iters: usize) -> Result<VoronoiMesh, MeshError> {
    if n_seeds == 0 {
        return Err(MeshError::InvalidParameter("voronoi mesh needs at least one seed".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seeds: Vec<Vec2> = (0..n_seeds).map(|_| Vec2::new(rng.random::<f64>(), rng.random::<f64>())).collect();
    separate_duplicates(&mut seeds);
    let mut lloyd_history = Vec::with_capacity(lloyd_iters);
    let mut lloyd_energy = Vec::with_capacity(lloyd_iters + 1);
    let mut polygons = voronoi_cells(&seeds);
    for _ in 0..lloyd_iters {
        lloyd_energy.push(centroidal_energy(&seeds, &polygons));
        let mut max_shift: f64 = 0.0;
        for (s, poly) in seeds.iter_mut().zip(&polygons) {
            let c = polygon_centroid(poly);
            max_shift = max_shift.max((c - *s).norm());
            *s = c;
        }
        lloyd_history.push(max_shift);
        separate_duplicates(&mut seeds);
        polygons = voronoi_cells(&seeds);
    }
    lloyd_energy.push(centroidal_energy(&seeds, &polygons));
    let (vertices, cells) = merge_polygons(&polygons);
    let mesh = PolygonalMesh::new(vertices, cells)?;
    Ok(VoronoiMesh { mesh, seeds, lloyd_history, lloyd_energy })
}

fn centroidal_energy(seeds: &[Vec2], polygons: &[Vec<Vec2>]) -> f64 {
    let mut total = 0.0;
    for (s, poly) in seeds.iter().zip(polygons) {
        let c = polygon_centroid(poly);
        for i in 0..poly.len() {
            let (a, b) = (poly[i] - s, poly[(i + 1) % poly.len()] - s);
            let m = c - s;
            // edge-midpoint rule is exact for quadratics on triangles
            let area = 0.5 * cross(a - m, b - m);
            let mids = [0.5 * (a + b), 0.5 * (b + m), 0.5 * (m + a)];
            total += area / 3.0 * mids.iter().map(|p| p.norm_squared()).sum::<f64>();
        }
    }
    total
}

/// Moves coincident seeds apart along a fixed, index-dependent direction.
fn separate_duplicates(seeds: &mut [Vec2]) {
    let mut order: Vec<usize> = (0..seeds.len()).collect();
    order.sort_by(|&a, &b| seeds[a].x.total_cmp(&seeds[b].x).then(seeds[a].y.total_cmp(&seeds[b].y)));
    for w in 1..order.len() {
        let (a, b) = (order[w - 1], order[w]);
        if (seeds[a] - seeds[b]).norm() < 1e-12 {
            let angle = b as f64;
            let mut p = seeds[b] + 1e-7 * Vec2::new(angle.cos(), angle.sin());
            p.x = p.x.clamp(0.0, 1.0);
            p.y = p.y.clamp(0.0, 1.0);
            seeds[b] = p;
        }
    }
}

fn polygon_centroid(p: &[Vec2]) -> Vec2 {
    let o = p[0];
    let (mut a2, mut c) = (0.0, Vec2::zeros());
    for i in 0..p.len() {
        let (a, b) = (p[i] - o, p[(i + 1) % p.len()] - o);
        let w = cross(a, b);
        a2 += w;
        c += w * (a + b);
    }
    o + c / (3.0 * a2)
}

/// Voronoi cells of `seeds` restricted to the unit square.
fn voronoi_cells(seeds: &[Vec2]) -> Vec<Vec<Vec2>> {
    use rayon::prelude::*;
    seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| {
            let mut poly = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)];
            let mut others: Vec<(f64, usize)> =
                seeds.iter().enumerate().filter(|&(j, _)| j != i).map(|(j, t)| ((t - s).norm(), j)).collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for (d, j) in others {
                let reach = poly.iter().map(|p| (p - s).norm()).fold(0.0, f64::max);
                if d > 2.0 * reach {
                    break;
                }
                let t = seeds[j];
                poly = clip_half_plane(&poly, 0.5 * (s + t), t - s);
            }
            poly
        })
        .collect()
}

/// Keeps the part of `poly` with `(x - m) . dir <= 0`.
fn clip_half_plane(poly: &[Vec2], m: Vec2, dir: Vec2) -> Vec<Vec2> {
    let scale = dir.norm();
    let side = |p: &Vec2| (p - m).dot(&dir) / scale;
    let mut out = Vec::with_capacity(poly.len() + 1);
    const EPS: f64 = 1e-14;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (dp, dq) = (side(&p), side(&q));
        if dp <= EPS {
            out.push(p);
        }
        // proper crossings only; touching endpoints are kept as they are
        if (dp < -EPS && dq > EPS) || (dp > EPS && dq < -EPS) {
            let t = dp / (dp - dq);
            out.push(p + t * (q - p));
        }
    }
    dedup_cycle(out)
}

fn dedup_cycle(mut pts: Vec<Vec2>) -> Vec<Vec2> {
    pts.dedup_by(|a, b| (*a - *b).norm() < MERGE_TOL);
    while pts.len() > 1 && (pts[0] - pts[pts.len() - 1]).norm() < MERGE_TOL {
        pts.pop();
    }
    pts
}

/// Identifies coincident polygon corners and returns shared connectivity.
fn merge_polygons(polygons: &[Vec<Vec2>]) -> (Vec<Vec2>, Vec<Vec<usize>>) {
    let mut vertices: Vec<Vec2> = Vec::new();
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let key = |p: Vec2| ((p.x / MERGE_TOL).floor() as i64, (p.y / MERGE_TOL).floor() as i64);
    let mut cells = Vec::with_capacity(polygons.len());
    for poly in polygons {
        let mut cell: Vec<usize> = Vec::with_capacity(poly.len());
        for &p in poly {
            let (kx, ky) = key(p);
            let mut found = None;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(list) = buckets.get(&(kx + dx, ky + dy)) {
                        if let Some(&v) = list.iter().find(|&&v| (vertices[v] - p).norm() < MERGE_TOL) {
                            found = Some(v);
                            break 'search;
                        }
                    }
                }
            }
            let v = found.unwrap_or_else(|| {
                vertices.push(p);
                buckets.entry((kx, ky)).or_default().push(vertices.len() - 1);
                vertices.len() - 1
            });
            if cell.last() != Some(&v) {
                cell.push(v);
            }
        }
        while cell.len() > 1 && cell.first() == cell.last() {
            cell.pop();
        }
        cells.push(cell);
    }
    (vertices, cells)
}

/// Used by tests: every boundary edge lies on the unit square boundary.
#[cfg(test)]
pub(crate) fn boundary_on_unit_square(mesh: &PolygonalMesh) -> bool {
    let on = |p: Vec2| p.x.abs() < 1e-12 || (p.x - 1.0).abs() < 1e-12 || p.y.abs() < 1e-12 || (p.y - 1.0).abs() < 1e-12;
    mesh.edges().iter().filter(|e| e.is_boundary()).all(|e| {
        let (a, b) = (mesh.vertex(e.vertices[0]), mesh.vertex(e.vertices[1]));
        on(a) && on(b) && on(0.5 * (a + b))
    })
}
