use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::field::{Polynomial, ScalarField, Zero};
use crate::mesh::{generate_hexagonal_distorted, generate_nonconvex_octagons, generate_randomized_quads, PolygonalMesh};

fn families(n: usize) -> Vec<(&'static str, PolygonalMesh)> {
    vec![
        ("quads", generate_randomized_quads(n, 0.3, 5).unwrap().mesh),
        ("hexagons", generate_hexagonal_distorted(n).unwrap()),
        ("octagons", generate_nonconvex_octagons(n.div_ceil(2)).unwrap()),
    ]
}

fn reduced(disc: &ElasticDiscretization, mesh: &PolygonalMesh) -> (DofPartition, SparseMatrix, SparseMatrix) {
    let part = DofPartition::new(&disc.dirichlet_mask(mesh));
    let r = |a: &SparseMatrix| a.restrict(part.reduced_map(), part.n_free(), part.reduced_map(), part.n_free());
    let (m, k) = (r(&disc.mass()), r(&disc.stiffness()));
    (part, m, k)
}

fn random_vector(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..=1.0))
}

#[test]
fn wave_speed_examples() {
    assert_eq!(Material::new(1.0, 2.0, 1.0).unwrap().wave_speeds(), (2.0, 1.0));
    assert_eq!(Material::new(1.0, 3.0, 0.0).unwrap().wave_speeds().1, 0.0);
    let (p, s) = Material::new(4.0, 2.0, 1.0).unwrap().wave_speeds();
    assert!((p - 1.0).abs() < 1e-15 && (s - 0.5).abs() < 1e-15);
    assert!(Material::new(0.0, 1.0, 1.0).is_err());
    assert!(Material::new(1.0, -1.0, 1.0).is_err());
    assert!(Material::new(1.0, 1.0, f64::NAN).is_err());
}

#[test]
fn rigid_motions_are_in_the_stiffness_kernel() {
    let lin = |terms: Vec<(usize, usize, f64)>| Polynomial::new(terms);
    let motions = [
        (lin(vec![(0, 0, 1.0)]), lin(vec![])),
        (lin(vec![]), lin(vec![(0, 0, 1.0)])),
        (lin(vec![(0, 1, -1.0)]), lin(vec![(1, 0, 1.0)])),
    ];
    for (name, mesh) in families(4) {
        for k in 1..=3 {
            let disc =
                ElasticDiscretization::new(&mesh, k, BasisKind::Orthogonal, Material::new(1.0, 2.0, 0.5).unwrap()).unwrap();
            let stiff = disc.stiffness();
            for (a, b) in &motions {
                let v = disc.interpolate(&mesh, [a, b]);
                let kv = stiff.mul_vec(&v).amax();
                assert!(kv < 1e-10, "{name} k={k}: {kv}");
            }
            // nothing else: a strain-free field is a rigid motion
            let q = Polynomial::new(vec![(2, 0, 1.0), (1, 1, 0.5)]);
            let v = disc.interpolate(&mesh, [&q, &Zero]);
            assert!(stiff.bilinear(&v, &v) > 1e-3);
        }
    }
}

#[test]
fn mass_integrates_density() {
    for (name, mesh) in families(4) {
        for k in 1..=3 {
            let rho = 2.5;
            let disc =
                ElasticDiscretization::new(&mesh, k, BasisKind::Orthogonal, Material::new(rho, 1.0, 1.0).unwrap()).unwrap();
            let m = disc.mass();
            let one = Polynomial::new(vec![(0, 0, 1.0)]);
            for comp in [[&one as &dyn ScalarField, &Zero], [&Zero, &one]] {
                let v = disc.interpolate(&mesh, comp);
                let total = m.bilinear(&v, &v);
                assert!((total - rho).abs() < 1e-11, "{name} k={k}: {total}");
            }
            assert!(m.asymmetry() < 1e-13);
            assert!(disc.stiffness().asymmetry() < 1e-12);
        }
    }
}

#[test]
fn stiffness_kernel_has_dimension_three() {
    let mesh = generate_randomized_quads(2, 0.3, 1).unwrap().mesh;
    for k in 1..=2 {
        let disc = ElasticDiscretization::new(&mesh, k, BasisKind::Orthogonal, Material::unit()).unwrap();
        let eig = disc.stiffness().to_dense().symmetric_eigenvalues();
        let mut sorted: Vec<f64> = eig.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        assert!(sorted[2].abs() < 1e-10, "{sorted:?}");
        assert!(sorted[3] > 1e-3, "{sorted:?}");
        assert!(sorted[0] > -1e-10);
    }
}

/// Local forms reproduce the exact ones on polynomial pairs of degree k.
#[test]
fn forms_are_k_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let material = Material::new(1.3, 0.7, 1.1).unwrap();
    for (name, mesh) in families(2) {
        for k in 1..=3 {
            let disc = ElasticDiscretization::new(&mesh, k, BasisKind::Orthogonal, material).unwrap();
            let p: Vec<Polynomial> = (0..4).map(|_| Polynomial::random(k, &mut rng)).collect();
            let u = disc.interpolate(&mesh, [&p[0], &p[1]]);
            let v = disc.interpolate(&mesh, [&p[2], &p[3]]);
            let grad = |a: &Polynomial, b: &Polynomial, x: Vec2| {
                let (ga, gb) = (a.gradient(x), b.gradient(x));
                Matrix2::new(ga.x, ga.y, gb.x, gb.y)
            };
            let (mut a_exact, mut m_exact) = (0.0, 0.0);
            for cell in mesh.polygons() {
                let quad = polygon_quadrature(cell, 2 * k).unwrap();
                for (&x, &w) in quad.points.iter().zip(&quad.weights) {
                    let (gu, gv) = (grad(&p[0], &p[1], x), grad(&p[2], &p[3], x));
                    let (eu, ev) = (0.5 * (gu + gu.transpose()), 0.5 * (gv + gv.transpose()));
                    a_exact += w * material.stress(&eu).component_mul(&ev).sum();
                    m_exact += w * material.rho * (p[0].value(x) * p[2].value(x) + p[1].value(x) * p[3].value(x));
                }
            }
            let a_h = disc.stiffness().bilinear(&u, &v);
            let m_h = disc.mass().bilinear(&u, &v);
            assert!((a_h - a_exact).abs() < 1e-10 * (1.0 + a_exact.abs()), "{name} k={k}: {a_h} vs {a_exact}");
            assert!((m_h - m_exact).abs() < 1e-10 * (1.0 + m_exact.abs()), "{name} k={k}: {m_h} vs {m_exact}");
        }
    }
}

#[test]
fn load_examples() {
    let mesh = generate_randomized_quads(3, 0.2, 4).unwrap().mesh;
    for k in 1..=3 {
        let disc = ElasticDiscretization::new(&mesh, k, BasisKind::Orthogonal, Material::unit()).unwrap();
        let zero = disc.load(&|_| Vec2::zeros(), Some(&|_| Vec2::zeros()));
        assert_eq!(zero.amax(), 0.0);
    }

    // constant traction on one boundary edge
    let mut mesh = generate_randomized_quads(3, 0.2, 4).unwrap().mesh;
    let e = mesh.edges().iter().position(|e| e.is_boundary()).unwrap();
    let [a, b] = mesh.edge(e).vertices;
    mesh.set_boundary_marker(a, b, BoundaryMarker::Neumann).unwrap();
    let len = (mesh.vertex(a) - mesh.vertex(b)).norm();
    let disc = ElasticDiscretization::new(&mesh, 1, BasisKind::Orthogonal, Material::unit()).unwrap();
    let g = Vec2::new(0.7, -1.9);
    let f = disc.load(&|_| Vec2::zeros(), Some(&move |_| g));
    let nv = mesh.num_vertices();
    for v in [a, b] {
        assert!((f[v] - g.x * len / 2.0).abs() < 1e-14);
        assert!((f[nv + v] - g.y * len / 2.0).abs() < 1e-14);
    }
    assert!((f.sum() - (g.x + g.y) * len).abs() < 1e-13);
}

/// `|F(v)| <= ||f||_0 ||Pi0_k v||_0` since `Pi0_{k-2}` is a contraction.
#[test]
fn load_is_bounded() {
    let mesh = generate_hexagonal_distorted(3).unwrap();
    let f = |p: Vec2| Vec2::new((3.0 * p.x).sin() + p.y, (p.x * p.y).exp());
    let quad_norm = {
        let mut s = 0.0;
        for cell in mesh.polygons() {
            let q = polygon_quadrature(cell, 16).unwrap();
            for (&x, &w) in q.points.iter().zip(&q.weights) {
                s += w * f(x).norm_squared();
            }
        }
        s.sqrt()
    };
    for k in 2..=3 {
        let disc = ElasticDiscretization::new(&mesh, k, BasisKind::Orthogonal, Material::unit()).unwrap();
        let load = disc.load(&f, None);
        for seed in 0..20 {
            let v = random_vector(disc.n_dofs(), seed);
            let mut pv = 0.0;
            let n = disc.scalar().n_dofs();
            for comp in 0..2 {
                let vc = v.rows(comp * n, n).into_owned();
                for (c, s) in disc.scalar().spaces().iter().enumerate() {
                    let coeffs = s.pi0() * disc.scalar().local_values(c, &vc);
                    pv += coeffs.dot(&(s.gram() * &coeffs));
                }
            }
            assert!(load.dot(&v).abs() <= quad_norm * pv.sqrt() * (1.0 + 1e-12));
        }
    }
}

#[test]
fn benchmark_force_matches_finite_differences() {
    let bench = Benchmark { material: Material::new(1.7, 0.6, 1.3).unwrap() };
    let m = bench.material;
    let h = 1e-4;
    for &(x, y) in &[(0.21, 0.37), (0.66, 0.12), (0.5, 0.93)] {
        let p = Vec2::new(x, y);
        let u = |q: Vec2| {
            let [a, b] = benchmark_profile(q);
            Vec2::new(a.0, b.0)
        };
        // stress by central differences, then its divergence
        let sigma = |q: Vec2| {
            let gx = (u(q + Vec2::new(h, 0.0)) - u(q - Vec2::new(h, 0.0))) / (2.0 * h);
            let gy = (u(q + Vec2::new(0.0, h)) - u(q - Vec2::new(0.0, h))) / (2.0 * h);
            let g = Matrix2::new(gx.x, gy.x, gx.y, gy.y);
            m.stress(&(0.5 * (g + g.transpose())))
        };
        let dx = (sigma(p + Vec2::new(h, 0.0)) - sigma(p - Vec2::new(h, 0.0))) / (2.0 * h);
        let dy = (sigma(p + Vec2::new(0.0, h)) - sigma(p - Vec2::new(0.0, h))) / (2.0 * h);
        let div = Vec2::new(dx[(0, 0)] + dy[(0, 1)], dx[(1, 0)] + dy[(1, 1)]);
        let fd = -4.0 * PI * PI * m.rho * u(p) - div;
        assert!((fd - bench.force_profile(p)).norm() < 1e-5 * (1.0 + fd.norm()));
        // the profile's derivatives agree with differences of the values
        for comp in 0..2 {
            let g = benchmark_profile(p)[comp].1;
            let gx =
                (benchmark_profile(p + Vec2::new(h, 0.0))[comp].0 - benchmark_profile(p - Vec2::new(h, 0.0))[comp].0) / (2.0 * h);
            assert!((g.x - gx).abs() < 1e-6);
        }
    }
    // quarter period: the displacement vanishes
    let zero = Benchmark::displacement(0.25, 0);
    assert!(zero.value(Vec2::new(0.3, 0.4)).abs() < 1e-15);
}

#[test]
fn zero_data_gives_zero_trajectory() {
    let mesh = generate_randomized_quads(3, 0.2, 1).unwrap().mesh;
    let disc = ElasticDiscretization::new(&mesh, 2, BasisKind::Orthogonal, Material::unit()).unwrap();
    let (part, m, k) = reduced(&disc, &mesh);
    let lf = Leapfrog::new(m, k, 1e-3).unwrap();
    let z = DVector::zeros(part.n_free());
    let (a, b) = lf.run(&z, &z, &|_| DVector::zeros(part.n_free()), 50, |_, _, u| assert_eq!(u.amax(), 0.0)).unwrap();
    assert_eq!(a.amax() + b.amax(), 0.0);
}

#[test]
fn free_translation_drifts_linearly() {
    let pts = [(0.0, 0.0), (1.0, 0.1), (1.2, 0.8), (0.3, 1.1), (-0.2, 0.5)];
    let mesh = PolygonalMesh::new(pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect(), vec![vec![0, 1, 2, 3, 4]]).unwrap();
    for k in 1..=3 {
        let disc = ElasticDiscretization::new(&mesh, k, BasisKind::Orthogonal, Material::unit()).unwrap();
        let lf = Leapfrog::new(disc.mass(), disc.stiffness(), 0.01).unwrap();
        let one = Polynomial::new(vec![(0, 0, 1.0)]);
        let velocity = disc.interpolate(&mesh, [&one, &Zero]) * 0.5;
        let u0 = disc.interpolate(&mesh, [&Zero, &one]);
        let zero = DVector::zeros(disc.n_dofs());
        lf.run(&u0, &velocity, &|_| zero.clone(), 100, |n, _, u| {
            let expected = &u0 + (n as f64 * 0.01) * &velocity;
            assert!((u - expected).amax() < 1e-11, "k={k} n={n}");
        })
        .unwrap();
    }
}

fn random_state(disc: &ElasticDiscretization, mesh: &PolygonalMesh, part: &DofPartition) -> DVector<f64> {
    part.restrict(&disc.interpolate(mesh, [&Benchmark::displacement(0.0, 0), &Benchmark::displacement(0.0, 1)]))
        + 0.1 * random_vector(part.n_free(), 9)
}

#[test]
fn midpoint_energy_is_conserved() {
    for (name, mesh) in families(4) {
        let disc = ElasticDiscretization::new(&mesh, 2, BasisKind::Orthogonal, Material::unit()).unwrap();
        let (part, m, k) = reduced(&disc, &mesh);
        let dt = cfl_time_step(&mesh, 2, &Material::unit(), DEFAULT_CFL);
        let lf = Leapfrog::new(m, k, dt).unwrap();
        let u0 = random_state(&disc, &mesh, &part);
        let zero = DVector::zeros(part.n_free());
        let mut energies = Vec::new();
        lf.run(&u0, &zero, &|_| zero.clone(), 1000, |_, prev, cur| energies.push(lf.midpoint_energy(prev, cur))).unwrap();
        let e0 = energies[0];
        let drift = energies.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max) / e0;
        assert!(drift < 1e-6, "{name}: {drift}");
    }
}

#[test]
fn leapfrog_is_reversible() {
    let mesh = generate_hexagonal_distorted(4).unwrap();
    let disc = ElasticDiscretization::new(&mesh, 2, BasisKind::Orthogonal, Material::unit()).unwrap();
    let (part, m, k) = reduced(&disc, &mesh);
    let lf = Leapfrog::new(m, k, cfl_time_step(&mesh, 2, &Material::unit(), DEFAULT_CFL)).unwrap();
    let u0 = random_state(&disc, &mesh, &part);
    let zero = DVector::zeros(part.n_free());
    let mut first = None;
    let n = 300;
    let (mut prev, mut cur) = lf
        .run(&u0, &zero, &|_| zero.clone(), n, |step, _, u| {
            if step == 1 {
                first = Some(u.clone());
            }
        })
        .unwrap();
    // walk back from (u_N, u_{N-1}) to u_0
    std::mem::swap(&mut prev, &mut cur);
    for _ in 0..n - 1 {
        let next = lf.step(&prev, &cur, &zero).unwrap();
        prev = cur;
        cur = next;
    }
    assert!((&prev - first.unwrap()).norm() <= 1e-8 * u0.norm());
    assert!((&cur - &u0).norm() <= 1e-8 * u0.norm());
}

#[test]
fn cfl_step_is_below_the_stability_limit() {
    let material = Material::unit();
    for (name, mesh) in families(4) {
        for k in 1..=3 {
            let disc = ElasticDiscretization::new(&mesh, k, BasisKind::Orthogonal, material).unwrap();
            let (_, m, kk) = reduced(&disc, &mesh);
            let chol = SparseCholesky::factorize(&m).unwrap();
            let lambda = kk.power_iteration(|x| chol.solve(x).unwrap(), 300);
            let critical = 2.0 / lambda.sqrt();
            let dt = cfl_time_step(&mesh, k, &material, DEFAULT_CFL);
            assert!(dt < critical, "{name} k={k}: {dt} vs {critical}");
        }
    }
}

/// Bisection on the blow-up detector brackets the spectral limit.
#[test]
fn empirical_threshold_matches_the_spectral_limit() {
    let mesh = generate_randomized_quads(4, 0.3, 5).unwrap().mesh;
    let disc = ElasticDiscretization::new(&mesh, 1, BasisKind::Orthogonal, Material::unit()).unwrap();
    let (part, m, k) = reduced(&disc, &mesh);
    let chol = SparseCholesky::factorize(&m).unwrap();
    let critical = 2.0 / k.power_iteration(|x| chol.solve(x).unwrap(), 500).sqrt();
    let u0 = random_state(&disc, &mesh, &part);
    let zero = DVector::zeros(part.n_free());
    let stable = |dt: f64| {
        let lf = Leapfrog::new(m.clone(), k.clone(), dt).unwrap();
        lf.run(&u0, &zero, &|_| zero.clone(), 3000, |_, _, _| {}).is_ok()
    };
    let (mut lo, mut hi) = (0.5 * critical, 1.5 * critical);
    assert!(stable(lo) && !stable(hi));
    for _ in 0..12 {
        let mid = 0.5 * (lo + hi);
        if stable(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo / critical - 1.0).abs() < 0.05, "{lo} vs {critical}");
    match Leapfrog::new(m.clone(), k.clone(), 1.2 * critical).unwrap().run(&u0, &zero, &|_| zero.clone(), 3000, |_, _, _| {}) {
        Err(Error::BlowUp { step, .. }) => assert!(step > 1),
        other => panic!("expected a blow-up, got {other:?}"),
    }
}

#[test]
fn energy_norm_examples() {
    let mesh = generate_randomized_quads(3, 0.2, 2).unwrap().mesh;
    let disc = ElasticDiscretization::new(&mesh, 2, BasisKind::Orthogonal, Material::unit()).unwrap();
    let zero = DVector::zeros(disc.n_dofs());
    assert_eq!(disc.energy_norm(&zero, &zero), 0.0);
    // static linear field: only |u|_1^2 = |grad|^2 |Omega| remains
    let p = Polynomial::new(vec![(1, 0, 2.0), (0, 1, -1.0)]);
    let u = disc.interpolate(&mesh, [&p, &Zero]);
    assert!((disc.energy_norm(&u, &zero) - 5.0).abs() < 1e-12);
    let one = Polynomial::new(vec![(0, 0, 1.0)]);
    let v = disc.interpolate(&mesh, [&Zero, &one]);
    assert!((disc.energy_norm(&u, &v) - 6.0).abs() < 1e-12);
}

#[test]
fn leapfrog_is_second_order_in_time() {
    let mesh = generate_randomized_quads(4, 0.3, 5).unwrap().mesh;
    let material = Material::unit();
    let t_end = 0.25;
    let n0 = benchmark_steps(&mesh, 2, &material, DEFAULT_CFL, 5e-4, t_end);
    let runs: Vec<DVector<f64>> = [1, 2, 4]
        .iter()
        .map(|&s| solve_benchmark(&mesh, 2, BasisKind::Orthogonal, material, InitialData::default(), t_end, s * n0).unwrap().1)
        .collect();
    let ratio = (&runs[0] - &runs[1]).norm() / (&runs[1] - &runs[2]).norm();
    assert!((3.4..=4.6).contains(&ratio), "{ratio}");
}

#[test]
fn bases_agree_at_lowest_order() {
    let mesh = generate_randomized_quads(5, 0.3, 5).unwrap().mesh;
    let material = Material::unit();
    let (_, a) = solve_benchmark(&mesh, 1, BasisKind::Monomial, material, InitialData::Interpolant, 0.05, 60).unwrap();
    let (_, b) = solve_benchmark(&mesh, 1, BasisKind::Orthogonal, material, InitialData::Interpolant, 0.05, 60).unwrap();
    assert!((&a - &b).amax() < 1e-10 * (1.0 + a.amax()));
}

#[test]
fn benchmark_errors_converge() {
    let meshes: Vec<_> = [4, 8, 16].iter().map(|&n| generate_randomized_quads(n, 0.3, 5).unwrap().mesh).collect();
    let table = run_benchmark_convergence(
        &meshes,
        1,
        BasisKind::Orthogonal,
        Material::unit(),
        InitialData::default(),
        BENCHMARK_DT_MAX,
        BENCHMARK_T_END,
    )
    .unwrap();
    let (l2, h1) = (table.final_rate("L2").unwrap(), table.final_rate("H1").unwrap());
    assert!(l2 > 1.6 && h1 > 0.8, "{l2} {h1}");
    let csv = table.to_csv(crate::convergence::CsvLayout::Grouped);
    assert!(csv.starts_with("h,dofs,errL2,errH1,rateL2,rateH1\n"));
}

/// The projected start matches the static problem; the interpolant differs
/// from it by the discretization error.
#[test]
fn elastic_projection_start_is_in_equilibrium_with_the_load() {
    let mesh = generate_hexagonal_distorted(3).unwrap();
    let material = Material::unit();
    let run = |init| solve_benchmark(&mesh, 2, BasisKind::Orthogonal, material, init, 1e-3, 1).unwrap().1;
    let (a, b) = (run(InitialData::ElasticProjection), run(InitialData::Interpolant));
    let gap = (&a - &b).amax() / b.amax();
    assert!(gap > 1e-6 && gap < 0.1, "{gap}");
}

#[test]
fn p_refinement_csv_layout() {
    let mesh = generate_randomized_quads(2, 0.3, 5).unwrap().mesh;
    let rows = run_p_refinement(&mesh, 2, BasisKind::Orthogonal, Material::unit(), InitialData::default(), 1e-3, 0.05).unwrap();
    let csv = p_refinement_csv(&rows);
    assert!(csv.starts_with("k,dofs,errL2,errH1,cond\n"));
    assert_eq!(csv.lines().count(), 3);
    assert!(rows[1].l2 < rows[0].l2);
}

#[test]
fn orthogonal_basis_conditions_better_from_cubics() {
    let mesh = generate_randomized_quads(3, 0.3, 5).unwrap().mesh;
    let cond = |k, kind| ElasticDiscretization::new(&mesh, k, kind, Material::unit()).unwrap().stiffness_condition(&mesh);
    for k in 1..=2 {
        let (a, b) = (cond(k, BasisKind::Orthogonal), cond(k, BasisKind::Monomial));
        assert!((a - b).abs() < 1e-6 * a, "k={k}: {a} {b}");
    }
    for k in 3..=4 {
        assert!(cond(k, BasisKind::Orthogonal) < cond(k, BasisKind::Monomial));
    }
}
