//! Light-cone scheduling and measurement-assisted evolution against exact
//! references.

use num_complex::Complex64 as C64;
use sebd_core::{
    circuit::build,
    engine::{run_sebd_trajectory, run_sebd_with_chooser, ProfileStage},
    oracle::{
        check_enumeration, check_schedule_equivalence, check_sebd_order_vs_tebd, enumerate_branches, exact_estimates, DenseState,
    },
    schedule::{assign_cones, assign_cones_mirrored},
    Axis, BrickworkCircuit, EngineConfig, EstimatorSuite, Gate2, ModelParams, MpsState, ObservableSpec,
    OutcomeChooser, ProjectionBasis, Spin, TruncationPolicy,
};

const J: f64 = std::f64::consts::PI / 8.0;
const Z: ProjectionBasis = ProjectionBasis::Fixed(Axis::Z);
const X: ProjectionBasis = ProjectionBasis::Fixed(Axis::X);

fn ki(n: usize, t: f64) -> BrickworkCircuit {
    build(&ModelParams::kicked_ising(n, J, 0.2, t)).unwrap()
}

fn specs(text: &str) -> Vec<ObservableSpec> {
    text.split(',').map(|s| s.parse().unwrap()).collect()
}

#[test]
fn first_cone_width_matches_light_cone() {
    assert_eq!(assign_cones(&ki(12, 3.0)).cone_width(0).unwrap(), 8);
    for n in 2..=12 {
        for t in 0..=4 {
            let w = assign_cones(&ki(n, t as f64)).cone_width(0).unwrap();
            let expected = if t == 0 { 0 } else { n.min(2 + 2 * t) };
            assert_eq!(w, expected, "n = {n}, t = {t}");
        }
    }
}

#[test]
fn interior_cones_stay_within_light_cone_width() {
    for n in 2..=12 {
        for layers in 1..=6 {
            let kicked = ki(n, layers as f64);
            let heis = build(&ModelParams::heisenberg(n, 0.5, 0.5 * layers as f64)).unwrap();
            for c in [kicked, heis] {
                let bound = 2 + c.layers().len();
                for sched in [assign_cones(&c), assign_cones_mirrored(&c)] {
                    assert_eq!(sched.gate_count(), c.gate_count());
                    for k in 1..sched.cell_count() {
                        assert!(sched.cone_width(k).unwrap() <= bound, "n = {n}, cone {k}");
                    }
                }
            }
        }
    }
}

#[test]
fn cone_order_equals_layer_order() {
    for n in 2..=9 {
        for t in [1.0, 2.0, 3.0] {
            let c = ki(n, t);
            let psi = DenseState::from_mps(&MpsState::random(n, 4, n as u64).unwrap()).unwrap();
            for sched in [assign_cones(&c), assign_cones_mirrored(&c)] {
                let r = check_schedule_equivalence("schedule", &psi, &c, &sched).unwrap();
                assert!(r.passed, "n = {n}, t = {t}: {}", r.error);
            }
        }
    }
    let h = build(&ModelParams::heisenberg(8, 0.1, 0.5)).unwrap();
    let r = check_schedule_equivalence("heisenberg", &DenseState::neel(8).unwrap(), &h, &assign_cones(&h)).unwrap();
    assert!(r.passed);
}

#[test]
fn cone_ordered_mps_equals_tebd_without_measurement() {
    let r = check_sebd_order_vs_tebd("n8", &MpsState::neel(8).unwrap(), &ki(8, 4.0)).unwrap();
    assert!(r.passed, "{}", r.error);
    let h = build(&ModelParams::heisenberg(8, 0.1, 1.0)).unwrap();
    assert!(check_sebd_order_vs_tebd("heis", &MpsState::random(8, 3, 1).unwrap(), &h).unwrap().passed);
}

#[test]
fn bell_pair_cell_has_two_equal_branches() {
    let mut s = MpsState::product_state(&[Spin::Up, Spin::Up]).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let o = C64::new(0.0, 0.0);
    let r = C64::new(h, 0.0);
    // Column 0 of this unitary is (|↑↑⟩ + |↓↓⟩)/√2.
    let bell = Gate2([r, o, o, r, o, r, r, o, o, r, -r, o, r, o, o, -r]);
    assert!(bell.is_unitary(1e-12));
    s.apply_two_site_gate(0, &bell, &TruncationPolicy::exact()).unwrap();
    let c = build(&ModelParams::kicked_ising(2, J, 0.2, 0.0)).unwrap();
    let suite = EstimatorSuite::new(specs("sz:em,sz:bitstring"), 2, Z).unwrap();
    let cfg = EngineConfig::sebd(TruncationPolicy::exact(), Z);
    let en = enumerate_branches(&s, &assign_cones(&c), &cfg, &suite, 16).unwrap();
    assert_eq!(en.branches, 2);
    assert!((en.total_probability - 1.0).abs() < 1e-12);
    for label in ["sz:em", "sz:bitstring"] {
        assert!(en.expectations[label].iter().all(|v| v.unwrap().abs() < 1e-12));
    }
}

#[test]
fn enumeration_is_unbiased_for_every_protocol() {
    let c = ki(6, 2.0);
    let s = assign_cones(&c);
    let neel = MpsState::neel(6).unwrap();
    let random = MpsState::random(6, 3, 21).unwrap();
    let cases: &[(&str, ProjectionBasis, &str)] = &[
        ("em_z", Z, "sx,sy,sz"),
        ("em_x", X, "sx,sy,sz"),
        ("em_y", ProjectionBasis::Fixed(Axis::Y), "sx,sz"),
        ("em_rdm", ProjectionBasis::Rdm, "sx,sz"),
        ("bitstring_z", Z, "sz:bitstring"),
        ("bitstring_x", X, "sx:bitstring"),
        ("rdm", ProjectionBasis::Rdm, "sx:rdm,sz:rdm"),
        ("ct_edge", Z, "cxx@1,czz@1"),
        ("ct_center", Z, "cxx@3,czz@3"),
        ("ct_center_x", X, "cxx@4,czz@4,cxz@4"),
        ("ct_bitstring", Z, "czz@1:bitstring,czz@4:bitstring"),
        ("ut_zz", Z, "uzz@3"),
        ("ut_mixed", X, "uzx@2,uxx@5"),
    ];
    for (name, basis, text) in cases {
        for initial in [&neel, &random] {
            let r = check_enumeration(name, initial, &c, &s, *basis, specs(text)).unwrap();
            assert!(r.passed, "{name}: {}", r.error);
        }
    }
}

#[test]
fn mirrored_scan_is_also_unbiased() {
    let c = ki(6, 2.0);
    let s = assign_cones_mirrored(&c);
    let init = MpsState::random(6, 3, 4).unwrap();
    for (basis, text) in [(Z, "sx,sz:bitstring"), (X, "czz@6,cxx@3"), (Z, "uzz@4")] {
        let r = check_enumeration("mirrored", &init, &c, &s, basis, specs(text)).unwrap();
        assert!(r.passed, "{text}: {}", r.error);
    }
}

#[test]
fn heisenberg_enumeration_is_unbiased() {
    let c = build(&ModelParams::heisenberg(4, 0.25, 0.5)).unwrap();
    let r = check_enumeration("heis", &MpsState::neel(4).unwrap(), &c, &assign_cones(&c), Z, specs("sx,sz,czz@1,uzz@2")).unwrap();
    assert!(r.passed, "{}", r.error);
}

#[test]
fn em_one_point_average_is_basis_independent() {
    let c = ki(6, 2.0);
    let s = assign_cones(&c);
    let init = MpsState::neel(6).unwrap();
    let exact = exact_estimates(&DenseState::from_mps(&init).unwrap(), &c, &EstimatorSuite::new(specs("sx"), 6, Z).unwrap()).unwrap();
    for basis in [Z, X, ProjectionBasis::Rdm] {
        let suite = EstimatorSuite::new(specs("sx"), 6, basis).unwrap();
        let en = enumerate_branches(&init, &s, &EngineConfig::sebd(TruncationPolicy::exact(), basis), &suite, 4096).unwrap();
        for site in 0..6 {
            assert!((en.expectations["sx:em"][site].unwrap() - exact["sx:em"][site].unwrap()).abs() < 1e-10);
        }
    }
}

#[test]
fn enumeration_refuses_large_chains() {
    let c = ki(7, 1.0);
    let suite = EstimatorSuite::empty(7, Z);
    let r = enumerate_branches(&MpsState::neel(7).unwrap(), &assign_cones(&c), &EngineConfig::sebd(TruncationPolicy::exact(), Z), &suite, 4096);
    assert!(matches!(r, Err(sebd_core::Error::Capacity(_))));
}

#[test]
fn projected_region_is_disentangled() {
    let c = ki(12, 3.0);
    let s = assign_cones(&c);
    let mut cfg = EngineConfig::sebd(TruncationPolicy::new(1e-10, None).unwrap(), X);
    cfg.record_profiles = true;
    for seed in 0..5 {
        let rec = run_sebd_trajectory(&MpsState::neel(12).unwrap(), &s, &cfg, &EstimatorSuite::empty(12, X), seed).unwrap();
        for snap in rec.profiles.iter().filter(|p| p.stage == ProfileStage::Post) {
            let front = *s.cones()[snap.cell].cell.iter().max().unwrap();
            for b in 0..front.min(11) {
                assert!(snap.profile.entropies[b] < 1e-10, "cone {} bond {b}", snap.cell);
            }
        }
        assert_eq!(rec.measurements.len(), 12);
    }
}

struct Always(usize);

impl OutcomeChooser for Always {
    fn choose(&mut self, p: [f64; 2]) -> usize {
        if p[self.0] > 1e-14 {
            self.0
        } else {
            1 - self.0
        }
    }
}

#[test]
fn born_weight_is_the_product_of_branch_probabilities() {
    let c = ki(6, 2.0);
    let cfg = EngineConfig::sebd(TruncationPolicy::exact(), Z);
    let rec = run_sebd_with_chooser(&MpsState::neel(6).unwrap(), &assign_cones(&c), &cfg, &EstimatorSuite::empty(6, Z), &mut Always(0), 0)
        .unwrap();
    let product: f64 = rec.measurements.iter().map(|m| m.probability).product();
    assert!((rec.born_weight - product).abs() < 1e-15);
    // The measured string is the one the dense state assigns that probability.
    let d = DenseState::from_mps(&MpsState::neel(6).unwrap()).unwrap();
    let psi = sebd_core::oracle::evolve_dense(&d, &c).unwrap();
    let bits: Vec<u8> = (0..6).map(|site| rec.measurements.iter().find(|m| m.site == site).unwrap().outcome as u8).collect();
    let index = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
    assert!((psi.amplitudes()[index].norm_sqr() - rec.born_weight).abs() < 1e-12);
}
