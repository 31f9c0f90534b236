use phasemix_core::fem::ScalarField;
use phasemix_core::mesh::{build_structured_rect, channel_tagger};
use phasemix_core::phasefield::{
    critical_temperature, landau_a, landau_b, landau_density, landau_quartic, AllenCahn, LandauModel, VolumeForcing,
};
use phasemix_core::sensitivity::{gl_energy, normalize, solid_volume, SensitivityField};
use phasemix_core::verify::{landau_transition_check, LANDAU_REFERENCE};
use phasemix_core::{BBox, Mesh, OptimParams};
use proptest::prelude::*;

fn square(n: usize) -> Mesh {
    let bbox = BBox::new(0.0, 1.0, 0.0, 1.0);
    build_structured_rect(bbox, n, n, &channel_tagger(bbox)).unwrap()
}

fn sensitivity_from(mesh: &Mesh, raw: Vec<f64>) -> SensitivityField {
    let raw = ScalarField { values: raw };
    let (normalized, norm_value) = normalize(mesh, &raw);
    SensitivityField { raw, normalized, norm_value, load: vec![0.0; mesh.num_nodes()] }
}

fn params(kappa: f64, tau: f64, eta: f64, beta3: f64, v0: f64) -> OptimParams {
    OptimParams { kappa, tau, eta, beta3, v0, iterations: 1, substeps: 1, volume_forcing: VolumeForcing::Bounded }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn step_stays_in_unit_interval_before_clamping(
        phi in prop::collection::vec(0.0f64..=1.0, 121),
        g in prop::collection::vec(-1.0f64..1.0, 121),
        kappa in 1e-4f64..1e-1,
        tau in 1e-4f64..1e-1,
        eta in 0.0f64..100.0,
        beta3 in 0.0f64..1000.0,
        v0 in 0.0f64..1.0,
    ) {
        let mesh = square(10);
        let ac = AllenCahn::new(&mesh, Vec::new()).unwrap();
        let sens = sensitivity_from(&mesh, g);
        let out = ac.step(&mesh, &ScalarField { values: phi }, &sens, &params(kappa, tau, eta, beta3, v0)).unwrap();
        prop_assert!(out.clamp <= 1e-10, "pre-clamp excursion {}", out.clamp);
        prop_assert!(out.phi.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Without sensitivity and volume forcing the step is a gradient flow
    /// of the Ginzburg-Landau energy.
    #[test]
    fn energy_decays_without_forcing(
        a in 0.05f64..0.45,
        kx in 1u32..4,
        ky in 1u32..4,
        kappa in 1e-3f64..1e-2,
    ) {
        let mesh = square(16);
        let ac = AllenCahn::new(&mesh, Vec::new()).unwrap();
        let sens = SensitivityField::zeros(&mesh);
        let p = params(kappa, 1e-2, 0.0, 0.0, 0.5);
        let mut phi = ScalarField::from_fn(&mesh, |q| {
            0.5 + a * (f64::from(kx) * std::f64::consts::PI * q[0]).cos() * (f64::from(ky) * std::f64::consts::PI * q[1]).cos()
        });
        let mut e = gl_energy(&mesh, &phi, kappa);
        for _ in 0..20 {
            phi = ac.step(&mesh, &phi, &sens, &p).unwrap().phi;
            let next = gl_energy(&mesh, &phi, kappa);
            prop_assert!(next <= e * (1.0 + 1e-12), "energy rose from {e} to {next}");
            e = next;
        }
    }
}

#[test]
fn pure_phases_are_fixed_points() {
    let mesh = square(8);
    let ac = AllenCahn::new(&mesh, Vec::new()).unwrap();
    let g = sensitivity_from(&mesh, (0..mesh.num_nodes()).map(|i| (i as f64).sin()).collect());
    for value in [0.0, 1.0] {
        let phi = ScalarField::constant(&mesh, value);
        // volume forcing pushes towards the current state
        let v0 = solid_volume(&mesh, &phi);
        let out = ac.step(&mesh, &phi, &g, &params(1e-3, 1e-2, 50.0, 100.0, v0)).unwrap();
        assert!(out.phi.values.iter().all(|&v| (v - value).abs() <= 1e-12), "phi = {value} moved");
    }
}

#[test]
fn fixed_fluid_nodes_stay_fluid() {
    let mesh = square(8);
    let fixed: Vec<usize> = (0..mesh.num_nodes()).filter(|&i| mesh.nodes[i][0] < 0.3).collect();
    let ac = AllenCahn::new(&mesh, fixed.clone()).unwrap();
    // strong push towards solid everywhere
    let g = sensitivity_from(&mesh, vec![1.0; mesh.num_nodes()]);
    // pure phases are fixed points, so start inside the interval
    let mut phi = ScalarField::constant(&mesh, 0.9);
    for _ in 0..10 {
        phi = ac.step(&mesh, &phi, &g, &params(1e-3, 1e-2, 50.0, 0.0, 0.0)).unwrap().phi;
    }
    assert!(fixed.iter().all(|&i| phi.values[i] == 1.0));
    assert!(phi.values.iter().any(|&v| v < 0.5));
}

#[test]
fn volume_forcing_moves_volume_towards_target() {
    let mesh = square(8);
    let ac = AllenCahn::new(&mesh, Vec::new()).unwrap();
    let zero = SensitivityField::zeros(&mesh);
    let phi = ScalarField::from_fn(&mesh, |q| 0.5 + 0.2 * (3.0 * q[0]).sin());
    let v = solid_volume(&mesh, &phi);
    for (v0, forcing) in [(v + 0.2, VolumeForcing::Bounded), (v - 0.2, VolumeForcing::Bounded), (v + 0.2, VolumeForcing::Uniform)] {
        let p = OptimParams { volume_forcing: forcing, ..params(0.0, 1e-2, 0.0, 50.0, v0) };
        let next = solid_volume(&mesh, &ac.step(&mesh, &phi, &zero, &p).unwrap().phi);
        assert!((next - v0).abs() < (v - v0).abs(), "{forcing:?}: {v} -> {next}, target {v0}");
    }
}

#[test]
fn landau_coefficients() {
    let m = LANDAU_REFERENCE;
    let tc = critical_temperature(m.z, m.j, m.kb);
    assert_eq!(landau_a(tc, &m), 0.0);
    for i in 0..=60 {
        let t = tc * (0.5 + 1.5 * i as f64 / 60.0);
        assert!(landau_b(t, &m) > 0.0);
        assert_eq!(landau_a(t, &m) < 0.0, t < tc);
    }
    let other = LandauModel { z: 6.0, j: 0.7, kb: 1.3 };
    assert_eq!(landau_a(other.critical_temperature(), &other), 0.0);
}

#[test]
fn landau_single_and_double_well() {
    let m = LANDAU_REFERENCE;
    let tc = m.critical_temperature();
    let ratios: Vec<f64> = (0..=30).map(|i| 0.5 + 1.5 * i as f64 / 30.0).filter(|&r| r != 1.0).collect();
    for row in landau_transition_check(&ratios, &m) {
        let t = row.t_over_tc * tc;
        if row.t_over_tc > 1.0 {
            assert_eq!(row.minima.len(), 1, "T/Tc = {}", row.t_over_tc);
            assert!(row.minima[0].abs() < 1e-6);
        } else {
            assert_eq!(row.minima.len(), 2, "T/Tc = {}", row.t_over_tc);
            let exact = (-landau_a(t, &m) / (2.0 * landau_b(t, &m))).sqrt();
            assert!((row.minima[0] + exact).abs() < 1e-6 && (row.minima[1] - exact).abs() < 1e-6, "{row:?}");
        }
    }
}

/// The quartic is the small-amplitude expansion of the mean-field density.
#[test]
fn quartic_truncates_the_mean_field_density() {
    let m = LANDAU_REFERENCE;
    for ratio in [0.7, 1.0, 1.6] {
        let t = ratio * m.critical_temperature();
        let base = landau_density(0.0, t, 0.0, &m).unwrap();
        for phi in [1e-2, 2e-2, 4e-2] {
            let d = landau_density(phi, t, 0.0, &m).unwrap() - base;
            let rest = (d - landau_quartic(phi, t, &m)) / phi.powi(6);
            assert!(rest.abs() < 50.0, "T/Tc = {ratio}, phi = {phi}: sixth-order remainder {rest}");
        }
    }
    assert!(landau_density(0.1, -1.0, 0.0, &m).is_err());
}
