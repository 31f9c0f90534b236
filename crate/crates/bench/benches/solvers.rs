use criterion::{criterion_group, criterion_main, Criterion};
use phasemix_bench::example;
use phasemix_core::fem::mini::assemble_ns_jacobian;
use phasemix_core::fem::{apply_dirichlet, assemble_stiffness, Coefficient};
use phasemix_core::linsolve::sparse_solve;
use phasemix_core::phasefield::AllenCahn;
use std::hint::black_box;

fn assembly(c: &mut Criterion) {
    let (problem, phi) = example("example5", 100, 50);
    let (state, _) = problem.solve_state(&phi, None).unwrap();
    let coef = problem.params.ns_coefficients(true);
    c.bench_function("ns_jacobian_100x50", |b| {
        b.iter(|| assemble_ns_jacobian(&problem.mesh, &state.u, black_box(&phi.values), &coef).unwrap())
    });
}

fn lu(c: &mut Criterion) {
    let (problem, _) = example("example5", 100, 50);
    let mesh = &problem.mesh;
    let k = assemble_stiffness(mesh, Coefficient::Constant(1.0)).unwrap();
    let rhs = vec![1.0; mesh.num_nodes()];
    let bnd: Vec<(usize, f64)> = mesh.boundary_nodes(phasemix_core::BoundaryTag::Inlet).into_iter().map(|i| (i, 0.0)).collect();
    let (a, b) = apply_dirichlet(&k, &rhs, &bnd).unwrap();
    c.bench_function("poisson_lu_100x50", |bch| bch.iter(|| sparse_solve(&a, black_box(&b)).unwrap()));
}

fn allen_cahn(c: &mut Criterion) {
    let (problem, phi) = example("example5", 100, 50);
    let (state, _) = problem.solve_state(&phi, None).unwrap();
    let adj = problem.solve_adjoint(&phi, &state).unwrap();
    let sens = problem.sensitivity(&state, &adj).unwrap();
    let ac = AllenCahn::new(&problem.mesh, problem.fixed_fluid.clone()).unwrap();
    c.bench_function("allen_cahn_step_100x50", |b| {
        b.iter(|| ac.step(&problem.mesh, black_box(&phi), &sens, &problem.optim).unwrap())
    });
}

fn iteration(c: &mut Criterion) {
    let (problem, phi) = example("example7", 40, 20);
    let mut group = c.benchmark_group("outer_iteration");
    group.sample_size(10);
    group.bench_function("example7_40x20", |b| {
        b.iter(|| {
            let (state, _) = problem.solve_state(black_box(&phi), None).unwrap();
            let adj = problem.solve_adjoint(&phi, &state).unwrap();
            problem.sensitivity(&state, &adj).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, assembly, lu, allen_cahn, iteration);
criterion_main!(benches);
