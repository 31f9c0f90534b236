use phasemix_core::catalog;
use phasemix_core::config::parse_config;
use phasemix_core::driver::{run_optimization, Problem, RunOptions, Stage};
use phasemix_core::fem::ScalarField;
use phasemix_core::io::{read_history, read_vtk_scalar, vtk_string, RunHistory};
use phasemix_core::mesh::{build_structured_rect, channel_tagger};
use phasemix_core::verify::{gradient_check, GradientCheckOptions};
use phasemix_core::{BBox, ObjectiveWeights};

fn small(name: &str, nx: usize, ny: usize, iterations: usize) -> (Problem, ScalarField) {
    let mut cfg = catalog::load(name).unwrap().with_mesh(nx, ny);
    cfg.optim.iterations = iterations;
    cfg.build().unwrap()
}

#[test]
fn zero_iterations_give_empty_history() {
    let (problem, phi0) = small("example5", 12, 6, 0);
    let out = run_optimization(&problem, &phi0, &RunOptions::default()).unwrap();
    assert!(out.history.records.is_empty());
    assert!(out.state.is_none());
    assert_eq!(out.phi, phi0);
}

#[test]
fn stages_run_in_block_triangular_order() {
    use Stage::*;
    let (problem, phi0) = small("example7", 12, 6, 2);
    let out = run_optimization(&problem, &phi0, &RunOptions::default()).unwrap();
    let full = vec![
        PoissonBoltzmann,
        NavierStokes,
        ConvectionDiffusion,
        AdjointConcentration,
        AdjointFlow,
        AdjointPotential,
        Sensitivity,
        AllenCahn,
    ];
    assert_eq!(out.trace, vec![full.clone(), full]);

    let (problem, phi0) = small("example5", 12, 6, 1);
    let out = run_optimization(&problem, &phi0, &RunOptions::default()).unwrap();
    assert_eq!(
        out.trace[0],
        vec![NavierStokes, ConvectionDiffusion, AdjointConcentration, AdjointFlow, Sensitivity, AllenCahn]
    );
}

/// With no charge and uniform permittivity the potential decouples, so the
/// electrokinetic pipeline reproduces the plain mixing run.
#[test]
fn uncharged_potential_decouples() {
    let mut cfg = catalog::load("example7").unwrap().with_mesh(16, 8);
    cfg.optim.iterations = 3;
    cfg.physics.rho0 = 0.0;
    cfg.physics.eps_m = cfg.physics.eps0;
    let (with_pb, phi0) = cfg.build().unwrap();
    let mut without_pb = with_pb.clone();
    without_pb.params.electrokinetics = false;
    let a = run_optimization(&with_pb, &phi0, &RunOptions::default()).unwrap();
    let b = run_optimization(&without_pb, &phi0, &RunOptions::default()).unwrap();
    assert!(a.history.records[0].newton_pb > 0);
    for (ra, rb) in a.history.records.iter().zip(&b.history.records) {
        for (x, y) in [(ra.j1, rb.j1), (ra.j2, rb.j2), (ra.volume, rb.volume)] {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-300), "iteration {}: {x:e} vs {y:e}", ra.iter);
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let (problem, phi0) = small("example5", 16, 8, 3);
    let a = run_optimization(&problem, &phi0, &RunOptions::default()).unwrap();
    let b = run_optimization(&problem, &phi0, &RunOptions::default()).unwrap();
    assert_eq!(a.history.without_timing().to_csv(), b.history.without_timing().to_csv());
    assert_eq!(a.phi, b.phi);
}

#[test]
fn snapshots_and_history_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let (problem, phi0) = small("example5", 12, 6, 3);
    let opts = RunOptions { output: Some(dir.path().to_path_buf()), snapshot_stride: 2 };
    let out = run_optimization(&problem, &phi0, &opts).unwrap();
    for name in ["snapshot_0000.vtk", "snapshot_0002.vtk", "snapshot_0003.vtk", "final.vtk"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    assert!(!dir.path().join("snapshot_0001.vtk").exists());
    let phi = read_vtk_scalar(&dir.path().join("final.vtk"), "phi").unwrap();
    for (a, b) in phi.iter().zip(&out.phi.values) {
        assert!((a - b).abs() <= 1e-8);
    }
    let path = dir.path().join("history.csv");
    phasemix_core::io::export_history(&out.history, &path).unwrap();
    assert_eq!(read_history(&path).unwrap(), out.history);
    assert_eq!(RunHistory::parse_csv(&out.history.to_csv()).unwrap(), out.history);
}

#[test]
fn catalog_documents_round_trip() {
    for name in catalog::names() {
        let cfg = catalog::load(name).unwrap();
        let doc = cfg.to_document();
        let again = parse_config(&doc).unwrap();
        assert_eq!(again, cfg, "{name}");
        assert_eq!(again.to_document(), doc, "{name}: canonical form is a fixed point");
        cfg.validate().unwrap();
    }
}

#[test]
fn zero_weights_give_zero_gradient() {
    let (mut problem, phi) = small("example5", 12, 6, 1);
    problem.weights = ObjectiveWeights { beta1: 0.0, beta2: 0.0, beta3: problem.weights.beta3 };
    let opts = GradientCheckOptions { directions: 3, ..GradientCheckOptions::default() };
    let report = gradient_check(&problem, &phi, &opts).unwrap();
    for d in &report.directions {
        assert!(d.consistent.adjoint.abs() <= 1e-10 && d.consistent.fd.abs() <= 1e-10, "{d:?}");
    }
}

#[test]
fn electrokinetic_gradient_matches_finite_differences() {
    let (problem, phi) = small("example7", 16, 8, 1);
    let opts = GradientCheckOptions { directions: 3, ..GradientCheckOptions::default() };
    let report = gradient_check(&problem, &phi, &opts).unwrap();
    assert!(report.skipped.is_empty());
    assert!(report.max_rel_consistent <= 1e-5, "{}", report.table());
    assert!(report.pass);
}

#[test]
fn dissipation_gradient_rejects_the_printed_factor() {
    let (problem, phi) = small("example1", 16, 10, 1);
    let opts = GradientCheckOptions { directions: 3, ..GradientCheckOptions::default() };
    let report = gradient_check(&problem, &phi, &opts).unwrap();
    assert!(report.max_rel_consistent <= 1e-5, "{}", report.table());
    // the 1/Re factor only agrees with finite differences at Re = 1
    assert!(report.max_rel_as_printed > 0.1, "{}", report.table());
}

#[test]
fn smallest_vtk_file() {
    let bbox = BBox::new(0.0, 1.0, 0.0, 1.0);
    let mesh = build_structured_rect(bbox, 1, 1, &channel_tagger(bbox)).unwrap();
    let s = vtk_string(&mesh, &[]).unwrap();
    assert!(s.contains("POINTS 4 double\n"));
    assert!(s.contains("CELLS 2 8\n"));
    assert!(s.contains("CELL_TYPES 2\n5\n5\n"));
}
