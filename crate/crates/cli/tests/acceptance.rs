//! Acceptance criteria, one test per criterion.
//!
//! Each test writes a single `criterion N: PASS|FAIL` line with the measured
//! quantities. Tests hold a shared lock so wall-clock limits are measured
//! without competing for the CPU.

use std::{
    collections::BTreeMap,
    io::Write,
    sync::{Mutex, OnceLock},
    time::{Duration, Instant},
};

use sebd_cli::{
    config::ConfigMap,
    runner::{compute, run, RunOutput},
    RunConfig,
};
use sebd_core::{
    circuit::{build, kicked_ising_period},
    engine::{run_sebd_trajectory, run_tebd, ProfileStage},
    oracle::{
        check_enumeration, check_schedule_equivalence, check_sebd_order_vs_tebd, evolve_dense, period_identity_error,
        unequal_time_dense, DenseState,
    },
    schedule::assign_cones,
    stats::{windowed_mean, windowed_variance},
    Axis, BrickworkCircuit, EngineConfig, EstimatorAccumulator, EstimatorSuite, ModelParams, MpsState, ObservableSpec, Op1,
    ProjectionBasis, SiteMoments, TruncationPolicy,
};

static LOCK: Mutex<()> = Mutex::new(());

const J: f64 = std::f64::consts::PI / 8.0;
const H: f64 = 0.2;

fn serial() -> std::sync::MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: u32, title: &str, ok: bool, detail: &str, elapsed: Duration, limit: Duration) {
    let passed = ok && elapsed < limit;
    // Written to the raw handle so the line survives the harness's output capture.
    let _ = writeln!(
        std::io::stderr(),
        "criterion {n}: {} [{title}] {detail}; runtime {:.2}s (limit {}s)",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    assert!(passed, "criterion {n} failed: {detail}");
}

fn config(text: &str) -> RunConfig {
    let mut m = ConfigMap::defaults();
    m.merge_text(text).unwrap();
    m.into_config().unwrap()
}

fn peak(out: &RunOutput, quantity: &str, time: f64) -> f64 {
    out.estimates.iter().find(|r| r.quantity == quantity && r.time == time && r.site_or_bond.is_none()).unwrap().mean
}

fn site_row<'a>(out: &'a RunOutput, quantity: &str, time: f64, site: usize) -> &'a sebd_cli::runner::EstimateRow {
    out.estimates.iter().find(|r| r.quantity == quantity && r.time == time && r.site_or_bond == Some(site + 1)).unwrap()
}

fn ki(n: usize, t: f64) -> BrickworkCircuit {
    build(&ModelParams::kicked_ising(n, J, H, t)).unwrap()
}

#[test]
fn criterion_01_tebd_matches_dense_evolution() {
    let _g = serial();
    let start = Instant::now();
    let c = ki(8, 4.0);
    let policy = TruncationPolicy::new(1e-12, None).unwrap();
    let (s, _) = run_tebd(MpsState::neel(8).unwrap(), &c, &EngineConfig::tebd(policy)).unwrap();
    let d = evolve_dense(&DenseState::neel(8).unwrap(), &c).unwrap();
    let sx = Op1::spin(Axis::X);
    let err = (0..8)
        .map(|l| (s.expect_local(l, &sx).unwrap() - d.expect(&[(l, sx)]).unwrap().re).abs())
        .fold(0.0, f64::max);
    report(1, "TEBD vs dense, N=8 t=4", err < 1e-8, &format!("max |dSx| = {err:.2e} (tol 1e-8)"), start.elapsed(), Duration::from_secs(10));
}

#[test]
fn criterion_02_period_operator_identity() {
    let _g = serial();
    let start = Instant::now();
    let mut worst = 0.0f64;
    for n in 2..=8 {
        let circuit = BrickworkCircuit::from_layers(n, 1.0, kicked_ising_period(n, J, H).to_vec()).unwrap();
        worst = worst.max(period_identity_error(&circuit, J, H).unwrap());
    }
    report(2, "period identity, N=2..8", worst < 1e-10, &format!("max entry error {worst:.2e} (tol 1e-10)"), start.elapsed(), Duration::from_secs(5));
}

#[test]
fn criterion_03_schedule_equivalence() {
    let _g = serial();
    let start = Instant::now();
    let c = ki(8, 4.0);
    let heis = build(&ModelParams::heisenberg(8, 0.1, 1.0)).unwrap();
    let reports = [
        check_schedule_equivalence("dense kicked Ising", &DenseState::neel(8).unwrap(), &c, &assign_cones(&c)).unwrap(),
        check_schedule_equivalence("dense Heisenberg", &DenseState::neel(8).unwrap(), &heis, &assign_cones(&heis)).unwrap(),
        check_sebd_order_vs_tebd("mps kicked Ising", &MpsState::random(8, 4, 3).unwrap(), &c).unwrap(),
    ];
    let worst = reports.iter().map(|r| r.error).fold(0.0, f64::max);
    let ok = reports.iter().all(|r| r.passed);
    report(3, "cone order = layer order, N=8", ok, &format!("max distance up to phase {worst:.2e} (tol 1e-10)"), start.elapsed(), Duration::from_secs(5));
}

#[test]
fn criterion_04_enumeration_unbiasedness() {
    let _g = serial();
    let start = Instant::now();
    let c = ki(6, 2.0);
    let s = assign_cones(&c);
    let neel = MpsState::neel(6).unwrap();
    let z = ProjectionBasis::Fixed(Axis::Z);
    let x = ProjectionBasis::Fixed(Axis::X);
    let specs = |t: &str| t.split(',').map(|s| s.parse::<ObservableSpec>().unwrap()).collect::<Vec<_>>();
    let parts = [
        ("a EM one-point (z basis)", z, "sx,sz"),
        ("a EM one-point (x basis)", x, "sx,sz"),
        ("b bitstring Sz in z basis", z, "sz:bitstring"),
        ("b bitstring Sx in x basis", x, "sx:bitstring"),
        ("c RDM-sampled one-point", ProjectionBasis::Rdm, "sx:rdm,sz:rdm"),
        ("d equal-time ref 1", z, "cxx@1,czz@1"),
        ("d equal-time ref center", z, "cxx@4,czz@4"),
        ("e unequal-time zz", z, "uzz@3"),
    ];
    let mut worst = (0.0f64, "");
    let mut failed = Vec::new();
    for (name, basis, text) in parts {
        let r = check_enumeration(name, &neel, &c, &s, basis, specs(text)).unwrap();
        if r.error >= worst.0 {
            worst = (r.error, name);
        }
        if !r.passed {
            failed.push(name);
        }
    }
    let detail = format!("{} parts, max error {:.2e} in '{}' (tol 1e-10), failing {failed:?}", parts.len(), worst.0, worst.1);
    report(4, "branch enumeration vs dense, N=6 t=2", failed.is_empty(), &detail, start.elapsed(), Duration::from_secs(120));
}

#[test]
fn criterion_05_measurement_disentangles() {
    let _g = serial();
    let start = Instant::now();
    let c = ki(32, 6.0);
    let s = assign_cones(&c);
    let basis = ProjectionBasis::Fixed(Axis::X);
    let mut cfg = EngineConfig::sebd(TruncationPolicy::new(1e-8, None).unwrap(), basis);
    cfg.record_profiles = true;
    let suite = EstimatorSuite::empty(32, basis);
    let mut worst = 0.0f64;
    let trajectories = 50;
    for seed in 0..trajectories {
        let rec = run_sebd_trajectory(&MpsState::neel(32).unwrap(), &s, &cfg, &suite, seed).unwrap();
        for snap in rec.profiles.iter().filter(|p| p.stage == ProfileStage::Post) {
            let front = *s.cones()[snap.cell].cell.iter().max().unwrap();
            for b in 0..front.min(31) {
                worst = worst.max(snap.profile.entropies[b]);
            }
        }
    }
    report(
        5,
        "post-projection entropy behind front, N=32 t=6",
        worst < 1e-10,
        &format!("max entropy {worst:.2e} over {trajectories} trajectories (tol 1e-10)"),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

const KI_TIMES: [f64; 7] = [4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];

struct KickedRun {
    sebd: RunOutput,
    tebd: RunOutput,
    elapsed: Duration,
}

fn kicked_run() -> &'static KickedRun {
    static RUN: OnceLock<KickedRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let base = "model = kicked-ising\nn = 32\nepsilon = 1e-8\ntimes = 4,5,6,7,8,9,10\nbasis = x\nobservables = sx:em, sx:bitstring\nsamples = 100\nseed = 1\n";
        let sebd = compute(&config(&format!("{base}engine = sebd\n"))).unwrap();
        let tebd = compute(&config(&format!("{base}engine = tebd\n"))).unwrap();
        KickedRun { sebd, tebd, elapsed: start.elapsed() }
    })
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn criterion_06_entanglement_suppression() {
    let _g = serial();
    let run = kicked_run();
    let mut gaps = Vec::new();
    let mut detail = String::new();
    for &t in &KI_TIMES {
        let (s, tb) = (peak(&run.sebd, "peak_entropy", t), peak(&run.tebd, "peak_entropy", t));
        gaps.push(tb - s);
        detail += &format!("t={t}: sebd {s:.4} tebd {tb:.4}; ");
    }
    let fit = slope(&KI_TIMES, &gaps);
    let below = gaps.iter().all(|&g| g > 0.0);
    detail += &format!("gap slope {fit:.4}");
    report(6, "SEBD peak entropy < TEBD, N=32", below && fit > 0.0, &detail, run.elapsed, Duration::from_secs(300));
}

#[test]
fn criterion_07_variance_comparison() {
    let _g = serial();
    let run = kicked_run();
    let (center, width) = (15, 10);
    let mut ok = true;
    let mut detail = String::new();
    for (t, accs) in &run.sebd.accumulators {
        let (bit, em) = (&accs["sx:bitstring"], &accs["sx:em"]);
        let vb = windowed_variance(bit, center, width).unwrap();
        let mb = windowed_mean(bit, center, width).unwrap();
        let ve = windowed_variance(em, center, width).unwrap();
        let plateau = (vb - (0.25 - mb * mb)).abs() <= 0.02;
        let ratio = vb / ve;
        ok &= plateau && ratio >= 5.0;
        detail += &format!("t={t}: var_bit {vb:.4} (0.25-m^2 = {:.4}) var_em {ve:.4} ratio {ratio:.1}; ", 0.25 - mb * mb);
    }
    report(7, "windowed variance, bitstring vs EM", ok, detail.trim_end_matches("; "), run.elapsed, Duration::from_secs(300));
}

/// `|a - b| <= 3 SE + floor`; also returns the deviation in units of that band.
/// The floor covers sites whose outcome is deterministic (SE = 0).
fn within_three_se(mean: f64, reference: f64, m: &SiteMoments, floor: f64) -> (bool, f64) {
    let se = m.stderr().unwrap_or(0.0);
    let band = 3.0 * se + floor;
    let diff = (mean - reference).abs();
    (diff <= band, diff / band)
}

#[test]
fn criterion_08_continuous_time_regime() {
    let _g = serial();
    let start = Instant::now();
    let base = "model = heisenberg\nn = 32\ndt = 0.1\ntime = 4\nepsilon = 1e-6\nbasis = z\nobservables = sz\nsamples = 500\nseed = 1\n";
    let sebd = compute(&config(&format!("{base}engine = sebd\n"))).unwrap();
    let tebd = compute(&config(&format!("{base}engine = tebd\n"))).unwrap();
    let elapsed = start.elapsed();
    let (se, te) = (peak(&sebd, "peak_entropy", 4.0), peak(&tebd, "peak_entropy", 4.0));
    let (sc, tc) = (peak(&sebd, "peak_chi", 4.0), peak(&tebd, "peak_chi", 4.0));
    let acc: &EstimatorAccumulator = &sebd.accumulators[0].1["sz:em"];
    let mut ok = se < te && sc < tc;
    let mut worst_z = 0.0f64;
    let mut worst_fixed = 0.0f64;
    for site in 0..32 {
        let reference = site_row(&tebd, "sz:em", 4.0, site).mean;
        let m = acc.site(site);
        let (inside, z) = within_three_se(m.mean, reference, m, 1e-6);
        if m.stderr() == Some(0.0) {
            worst_fixed = worst_fixed.max((m.mean - reference).abs());
        }
        worst_z = worst_z.max(z);
        ok &= inside;
    }
    report(
        8,
        "Heisenberg N=32 t=4",
        ok,
        &format!(
            "peak entropy sebd {se:.4} < tebd {te:.4}; peak chi sebd {sc:.1} < tebd {tc}; Sz max |d|/(3SE+1e-6) {worst_z:.2}, deterministic sites max |d| {worst_fixed:.1e}"
        ),
        elapsed,
        Duration::from_secs(600),
    );
}

#[test]
fn criterion_09_unequal_time_statistics() {
    let _g = serial();
    let start = Instant::now();
    let cfg = config(
        "model = kicked-ising\nn = 12\ntime = 3\nepsilon = 0\ninitial = random:8:5\nengine = sebd\nbasis = z\nobservables = uzz@6\nsamples = 1000\nseed = 1\n",
    );
    let out = compute(&cfg).unwrap();
    let elapsed = start.elapsed();
    let initial = DenseState::from_mps(&MpsState::random(12, 8, 5).unwrap()).unwrap();
    let circuit = ki(12, 3.0);
    let accs: &BTreeMap<String, EstimatorAccumulator> = &out.accumulators[0].1;
    let mut ok = true;
    let mut worst = 0.0f64;
    for site in 0..12 {
        let exact = unequal_time_dense(&initial, &circuit, site, Axis::Z, 5, Axis::Z).unwrap();
        for (label, value) in [("uzz@6:em:re", exact.re), ("uzz@6:em:im", exact.im)] {
            let m = accs[label].site(site);
            let (inside, z) = within_three_se(m.mean, value, m, 1e-9);
            ok &= inside;
            worst = worst.max(z);
        }
    }
    report(9, "unequal-time vs dense, N=12 t=3", ok, &format!("max |d|/(3SE+1e-9) {worst:.2} over re and im at 12 sites"), elapsed, Duration::from_secs(600));
}

#[test]
fn criterion_10_determinism_and_merge() {
    let _g = serial();
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for workers in [1, 4] {
        let out = dir.path().join(format!("w{workers}.csv"));
        let cfg = config(&format!(
            "n = 12\ntime = 3\nengine = sebd\nbasis = x\nobservables = sx, sx:bitstring, czz@1, uzz@6\nsamples = 100\nseed = 9\nworkers = {workers}\noutput = {}\n",
            out.display()
        ));
        run(&cfg).unwrap();
        files.push((std::fs::read(&out).unwrap(), std::fs::read(cfg.profiles_path()).unwrap()));
    }
    let identical = files[0] == files[1];

    let mut rng_state = 0x1234_5678_u64;
    let mut next = || {
        rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let mut parts = Vec::new();
    for len in [17, 40, 3] {
        let mut acc = EstimatorAccumulator::new(4);
        for _ in 0..len {
            let row: Vec<Option<f64>> = (0..4).map(|_| Some(next())).collect();
            acc.push(&row).unwrap();
        }
        parts.push(acc);
    }
    let (a, b, c) = (&parts[0], &parts[1], &parts[2]);
    let left = a.merge(b).unwrap().merge(c).unwrap();
    let right = a.merge(&b.merge(c).unwrap()).unwrap();
    let swapped = c.merge(a).unwrap().merge(b).unwrap();
    let mut merge_err = 0.0f64;
    for other in [&right, &swapped] {
        for s in 0..4 {
            merge_err = merge_err.max((left.mean(s).unwrap() - other.mean(s).unwrap()).abs());
            merge_err = merge_err.max((left.variance(s).unwrap() - other.variance(s).unwrap()).abs());
        }
    }
    report(
        10,
        "determinism and merge",
        identical && merge_err < 1e-12,
        &format!("1 vs 4 workers byte-identical: {identical}; merge discrepancy {merge_err:.1e} (tol 1e-12)"),
        start.elapsed(),
        Duration::from_secs(60),
    );
}
