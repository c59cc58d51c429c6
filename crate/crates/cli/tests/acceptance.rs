//! Acceptance run: one PASS/FAIL line per criterion, then a single assert.
//!
//! `cargo test -p torsionlab-cli --test acceptance -- --nocapture` shows the
//! table. Tolerances are the pinned constants below.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use torsionlab::curves::{
    complexity, curve_argmax, max_height_argmax, max_height_sequence, phi, EssentialCurve,
    TrigPolynomial,
};
use torsionlab::geometry::{AnnulusPoint, PlanePoint, TangentVector, HORIZONTAL, VERTICAL};
use torsionlab::harness::{
    birkhoff_check, bounded_before_check, graph_quarter_bound, linking_and_root, BirkhoffOptions,
    GridSpec,
};
use torsionlab::models::{Isotopy, IsotopyOrder, KickPolynomial, PendulumModel, TwistMapModel, PAPER_STIFFNESS};
use torsionlab::tilt::{torsion_via_tilt_column, TiltOptions};
use torsionlab::torsion::torsion_finite;
use torsionlab::Result;

const PERIOD_LAW_TOL: f64 = 5e-3;
const PERIOD_LAW_BUDGET: Duration = Duration::from_secs(30);
const EXTERIOR_TOL: f64 = 5e-3;
const EXTERIOR_N: u32 = 1000;
const VECTOR_SAMPLES: usize = 1000;
const VECTOR_MAX_N: u32 = 50;
const EXACT_ZERO_TOL: f64 = 1e-6;
const PHI_TOL: f64 = 1e-6;
const SEQUENCE_SLACK: f64 = 1e-6;
const SEQUENCE_MAX_N: u32 = 50;
const BOUNDED_BEFORE_C: f64 = 0.5;
const BOUNDED_BEFORE_K: i64 = 3;
const LINKING_TOL: f64 = 1e-9;
const ROOT_RESIDUAL_TOL: f64 = 1e-8;
const TILT_TOL: f64 = 1e-6;
const QUARTER_SLACK: f64 = 1e-6;
const QUARTER_MAX_N: u32 = 50;
const ISOTOPY_TOL: f64 = 1e-9;
const ISOTOPY_SAMPLES: usize = 100;
const ISOTOPY_MAX_N: u32 = 20;
const BIRKHOFF_TOL: f64 = 1e-5;
const BIRKHOFF_SAMPLES: usize = 32;
const BIRKHOFF_MAX_N: u32 = 20;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn random_unit(rng: &mut StdRng) -> TangentVector {
    let a: f64 = rng.gen_range(0.0..1.0);
    TangentVector::from_vertical_angle(a)
}

/// Interior points `(theta, 0)`: `|Torsion_N + 1/T| < tol`, `N = 10 ceil(T)`.
fn pendulum_period_law() -> Result<Verdict> {
    let start = Instant::now();
    let model = PendulumModel::paper();
    let thetas = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4];
    let rows = thetas
        .par_iter()
        .map(|&th| -> Result<(f64, f64, f64)> {
            let z = AnnulusPoint::new(th, 0.0);
            let period = model.orbit_period(z)?;
            let n = 10 * period.ceil() as u32;
            let t = torsion_finite(&model, z, VERTICAL, n)?.value;
            Ok((th, period, (t + 1.0 / period).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    let elapsed = start.elapsed();
    let worst = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let (tmin, tmax) = rows
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.1), hi.max(r.1)));
    verdict(
        worst < PERIOD_LAW_TOL && elapsed < PERIOD_LAW_BUDGET,
        format!(
            "max |Torsion_N + 1/T| = {worst:.2e} over T in [{tmin:.3}, {tmax:.3}], {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

/// Exterior points: `|Torsion_1000| < tol`.
fn pendulum_exterior() -> Result<Verdict> {
    let model = PendulumModel::paper();
    let pts = [
        (0.0, 0.4),
        (0.3, 0.5),
        (0.5, 0.7),
        (0.8, 1.0),
        (0.0, -0.4),
        (0.2, -0.5),
        (0.5, -0.7),
        (0.7, -1.0),
    ];
    let mut worst: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    let values = pts
        .par_iter()
        .map(|&(x, y)| torsion_finite(&model, AnnulusPoint::new(x, y), VERTICAL, EXTERIOR_N).map(|t| t.value))
        .collect::<Result<Vec<_>>>()?;
    for (&(x, y), v) in pts.iter().zip(&values) {
        worst = worst.max(v.abs());
        min_gap = min_gap.min(model.energy(AnnulusPoint::new(x, y)) - model.separatrix_energy());
    }
    verdict(
        worst < EXTERIOR_TOL && min_gap > 0.0,
        format!("max |Torsion_{EXTERIOR_N}| = {worst:.2e}, min H - H_sep = {min_gap:.3e}"),
    )
}

/// `|Torsion_n(xi) - Torsion_n(delta)| < 1/(2n)` on random samples.
fn vector_independence() -> Result<Verdict> {
    let model = TwistMapModel::standard(0.3);
    let mut rng = StdRng::seed_from_u64(3);
    let samples: Vec<_> = (0..VECTOR_SAMPLES)
        .map(|_| {
            let z = PlanePoint::new(rng.gen_range(0.0..1.0), rng.gen_range(-2.0..2.0));
            (z, random_unit(&mut rng), random_unit(&mut rng), rng.gen_range(1..=VECTOR_MAX_N))
        })
        .collect();
    let ratios = samples
        .par_iter()
        .map(|&(z, xi, delta, n)| -> Result<f64> {
            let a = torsion_finite(&model, z, xi, n)?.value;
            let b = torsion_finite(&model, z, delta, n)?.value;
            Ok((a - b).abs() * 2.0 * n as f64)
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = ratios.iter().filter(|r| r.is_nan() || **r >= 1.0).count();
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    verdict(
        violations == 0,
        format!("{violations} violations in {VECTOR_SAMPLES}, max 2n|difference| = {worst:.4}"),
    )
}

/// Max-height witnesses on circles, reused by the bounded-before check.
struct CircleWitness {
    k: f64,
    r: f64,
    n: u32,
    z: PlanePoint,
    value: f64,
}

fn circle_witnesses() -> Result<Vec<CircleWitness>> {
    let mut cases = Vec::new();
    for k in [0.1, 0.3] {
        for r in [-1.0, 0.0, 1.0] {
            for n in [1u32, 5, 20] {
                cases.push((k, r, n));
            }
        }
    }
    cases
        .par_iter()
        .map(|&(k, r, n)| {
            let model = TwistMapModel::standard(k);
            let curve = EssentialCurve::circle(r)?;
            let s = max_height_argmax(&model, &curve, n as f64)?.representative();
            let z = curve.lifted(s);
            let value = torsion_finite(&model, z, HORIZONTAL, n)?.total_variation;
            Ok(CircleWitness { k, r, n, z, value })
        })
        .collect()
}

fn circle_exact_zero(witnesses: &[CircleWitness]) -> Result<Verdict> {
    let worst = witnesses.iter().map(|w| w.value.abs()).fold(0.0, f64::max);
    verdict(
        worst < EXACT_ZERO_TOL,
        format!("{} cases, max |n Torsion_n(H)| = {worst:.2e}", witnesses.len()),
    )
}

/// Seeded small-amplitude Fourier loops, redrawn until embedded. They lie
/// in the regular zone between the integer resonances of the twist map,
/// where the pushed curves stay resolvable up to n = 50.
fn fourier_fixtures() -> Vec<EssentialCurve> {
    let mut rng = StdRng::seed_from_u64(5);
    let mut curves = Vec::new();
    while curves.len() < 5 {
        let mut coeffs = |n: usize, amp: f64| (0..n).map(|_| rng.gen_range(-amp..amp)).collect::<Vec<f64>>();
        let x = TrigPolynomial::new(0.0, coeffs(2, 0.05), coeffs(2, 0.05));
        let y = TrigPolynomial::new(0.5 + coeffs(1, 0.1)[0], coeffs(3, 0.05), coeffs(3, 0.05));
        if let Ok(c) = EssentialCurve::fourier(1, x, y) {
            curves.push(c);
        }
    }
    curves
}

fn fourier_model() -> TwistMapModel {
    TwistMapModel::standard(0.2)
}

fn phi_vanishes(curves: &[EssentialCurve]) -> Result<Verdict> {
    let model = fourier_model();
    let cases: Vec<(usize, u32)> = (0..curves.len()).flat_map(|i| [1, 2, 3, 5].map(|n| (i, n))).collect();
    let values = cases
        .par_iter()
        .map(|&(i, n)| {
            let anchor = curve_argmax(&curves[i])?.representative();
            phi(&model, &curves[i], n as f64, anchor).map(|p| p.value.abs())
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = values.iter().copied().fold(0.0, f64::max);
    verdict(worst < PHI_TOL, format!("{} cases, max |Phi(n)| = {worst:.2e}", cases.len()))
}

fn building_sequence(curves: &[EssentialCurve]) -> Result<Verdict> {
    let model = fourier_model();
    let excess = curves
        .par_iter()
        .map(|curve| -> Result<(f64, f64)> {
            let c = complexity(curve)?.value;
            let seq = max_height_sequence(&model, curve, SEQUENCE_MAX_N)?;
            let mut worst = f64::NEG_INFINITY;
            for (i, a) in seq.iter().enumerate() {
                for &s in &a.parameters {
                    let t = torsion_finite(&model, curve.lifted(s), curve.derivative(s), i as u32 + 1)?;
                    worst = worst.max(t.total_variation.abs() - c);
                }
            }
            Ok((c, worst))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = excess.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let cmax = excess.iter().map(|e| e.0).fold(0.0, f64::max);
    verdict(
        worst <= SEQUENCE_SLACK,
        format!("n <= {SEQUENCE_MAX_N}, max(|n Torsion_n| - C) = {worst:.2e}, C up to {cmax:.4}"),
    )
}

fn bounded_before(witnesses: &[CircleWitness]) -> Result<Verdict> {
    let reports = witnesses
        .par_iter()
        .map(|w| bounded_before_check(&TwistMapModel::standard(w.k), w.z, w.n, BOUNDED_BEFORE_C))
        .collect::<Result<Vec<_>>>()?;
    let failing: Vec<String> = witnesses
        .iter()
        .zip(&reports)
        .filter(|(_, r)| !r.pass || r.k != BOUNDED_BEFORE_K)
        .map(|(w, r)| format!("k={} r={} n={} ({:?})", w.k, w.r, w.n, r.violations))
        .collect();
    let lo = reports
        .iter()
        .flat_map(|r| r.values.iter().copied())
        .fold(f64::INFINITY, f64::min);
    let hi = reports
        .iter()
        .flat_map(|r| r.values.iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    verdict(
        failing.is_empty(),
        format!(
            "K = {BOUNDED_BEFORE_K}, m Torsion_m in [{lo:.4}, {hi:.4}]{}",
            if failing.is_empty() { String::new() } else { format!(", failing {}", failing.join("; ")) }
        ),
    )
}

fn linking_identity() -> Result<Verdict> {
    let kick = KickPolynomial { sin: vec![0.15], cos: vec![0.0, 0.05] };
    let cases: Vec<(Box<dyn Isotopy>, f64, u32)> = vec![
        (Box::new(TwistMapModel::standard(0.1)), 0.0, 3),
        (Box::new(TwistMapModel::standard(0.3)), 1.0, 5),
        (Box::new(TwistMapModel::standard(0.0)), 0.3, 10),
        (
            Box::new(TwistMapModel::with_kick(kick).isotopy_variant(IsotopyOrder::HorizontalFirst)),
            -0.5,
            4,
        ),
        (Box::new(PendulumModel::paper()), 0.5, 3),
        (Box::new(PendulumModel::paper()), -0.1, 2),
    ];
    let rows = cases
        .par_iter()
        .map(|(m, r, n)| linking_and_root(m.as_ref(), PlanePoint::new(0.0, *r), PlanePoint::new(1.0, *r), *n))
        .collect::<Result<Vec<_>>>()?;
    let worst_link = rows.iter().map(|(l, _)| l.abs()).fold(0.0, f64::max);
    let worst_res = rows.iter().map(|(_, root)| root.residual).fold(0.0, f64::max);
    verdict(
        worst_link < LINKING_TOL && worst_res < ROOT_RESIDUAL_TOL,
        format!("{} cases, max |Linking| = {worst_link:.2e}, max root residual = {worst_res:.2e}", rows.len()),
    )
}

fn tilt_worst(model: &dyn Isotopy, grid: &GridSpec) -> Result<f64> {
    let ys = grid.ys();
    let per_column = grid
        .xs()
        .par_iter()
        .map(|&x| -> Result<f64> {
            let via = torsion_via_tilt_column(model, x, &ys, &TiltOptions::default())?;
            let mut worst: f64 = 0.0;
            for (&y, v) in ys.iter().zip(via) {
                let direct = torsion_finite(model, PlanePoint::new(x, y), VERTICAL, 1)?.value;
                worst = worst.max((v - direct).abs());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_column.into_iter().fold(0.0, f64::max))
}

fn tilt_cross_validation() -> Result<Verdict> {
    let pend = tilt_worst(&PendulumModel::paper(), &GridSpec::new(16, -0.6, 0.6, 16)?)?;
    let twist = tilt_worst(&TwistMapModel::standard(0.3), &GridSpec::new(16, -1.0, 1.0, 16)?)?;
    verdict(
        pend < TILT_TOL && twist < TILT_TOL,
        format!("16x16 grids, max difference pendulum {pend:.2e}, twist map {twist:.2e}"),
    )
}

fn graph_quarter() -> Result<Verdict> {
    let fixtures = [
        (0.2, TrigPolynomial::new(0.0, vec![0.3], vec![0.0, 0.1])),
        (0.1, TrigPolynomial::new(0.5, vec![], vec![0.2])),
        (0.3, TrigPolynomial::new(-0.4, vec![0.05, 0.0, 0.02], vec![0.1])),
    ];
    let reports = fixtures
        .par_iter()
        .map(|(k, p)| graph_quarter_bound(&TwistMapModel::standard(*k), &EssentialCurve::graph(p.clone())?, QUARTER_MAX_N, QUARTER_SLACK))
        .collect::<Result<Vec<_>>>()?;
    let worst = reports.iter().map(|r| r.worst).fold(0.0, f64::max);
    verdict(
        reports.iter().all(|r| r.pass),
        format!("{} graphs, n <= {QUARTER_MAX_N}, max |n Torsion_n(chi)| = {worst:.4}", reports.len()),
    )
}

fn isotopy_independence() -> Result<Verdict> {
    let kick = KickPolynomial { sin: vec![0.2, 0.05], cos: vec![0.1] };
    let a = TwistMapModel::with_kick(kick);
    let b = a.isotopy_variant(IsotopyOrder::HorizontalFirst);
    let mut rng = StdRng::seed_from_u64(11);
    let samples: Vec<_> = (0..ISOTOPY_SAMPLES)
        .map(|_| {
            let z = PlanePoint::new(rng.gen_range(0.0..1.0), rng.gen_range(-2.0..2.0));
            (z, random_unit(&mut rng), rng.gen_range(1..=ISOTOPY_MAX_N))
        })
        .collect();
    let diffs = samples
        .par_iter()
        .map(|&(z, xi, n)| Ok((torsion_finite(&a, z, xi, n)?.value - torsion_finite(&b, z, xi, n)?.value).abs()))
        .collect::<Result<Vec<f64>>>()?;
    let worst = diffs.iter().copied().fold(0.0, f64::max);
    verdict(worst < ISOTOPY_TOL, format!("{ISOTOPY_SAMPLES} samples, max difference {worst:.2e}"))
}

fn birkhoff_identity() -> Result<Verdict> {
    let model = PendulumModel::paper();
    let curve = EssentialCurve::pendulum_level(PAPER_STIFFNESS, PAPER_STIFFNESS + 0.5, true)?;
    let opts = BirkhoffOptions {
        samples: BIRKHOFF_SAMPLES,
        identity_tolerance: BIRKHOFF_TOL,
        assumed_non_wandering: true,
        ..BirkhoffOptions::default()
    };
    let report = birkhoff_check(&model, &curve, BIRKHOFF_MAX_N, &opts)?;
    verdict(
        report.worst_difference < BIRKHOFF_TOL && report.graph.is_graph,
        format!(
            "{} rows, max |N Torsion_N - Var| = {:.2e}, is_graph = {}",
            report.rows.len(),
            report.worst_difference,
            report.graph.is_graph
        ),
    )
}

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Fixture, subcommand and the exit code it is expected to produce.
const CLI_FIXTURES: &[(&str, &str)] = &[
    ("torsion", "torsion_identity_grid"),
    ("torsion", "torsion_pendulum_exterior"),
    ("find-zero", "find_zero_circle"),
    ("find-zero", "find_zero_fourier"),
    ("sweep", "sweep_twist"),
    ("certify", "certify_shear"),
    ("birkhoff", "birkhoff_pendulum"),
    ("linking", "linking_twist"),
    ("tilt", "tilt_twist"),
    ("tilt", "tilt_pendulum"),
];

fn run_fixture(cmd: &str, name: &str, out: &Path, threads: &str) -> std::io::Result<(bool, Vec<u8>)> {
    let status = Command::new(env!("CARGO_BIN_EXE_torsionlab"))
        .arg(cmd)
        .arg("--config")
        .arg(fixtures_dir().join(format!("{name}.toml")))
        .arg("--out")
        .arg(out)
        .env("TORSIONLAB_THREADS", threads)
        .output()?
        .status;
    Ok((status.success(), std::fs::read(out)?))
}

fn determinism() -> Result<Verdict> {
    let dir = std::env::temp_dir().join(format!("torsionlab-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).expect("temp dir");
    let mut mismatched = Vec::new();
    let mut failed = Vec::new();
    for (cmd, name) in CLI_FIXTURES {
        let runs: Vec<_> = [("a", "1"), ("b", "4")]
            .iter()
            .map(|(tag, threads)| run_fixture(cmd, name, &dir.join(format!("{name}.{tag}.csv")), threads))
            .collect();
        match (&runs[0], &runs[1]) {
            (Ok((ok_a, a)), Ok((ok_b, b))) => {
                if !(ok_a & ok_b) {
                    failed.push(name.to_string());
                }
                if a != b {
                    mismatched.push(name.to_string());
                }
            }
            _ => failed.push(name.to_string()),
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    verdict(
        mismatched.is_empty() && failed.is_empty(),
        format!(
            "{} fixtures run twice (1 and 4 threads); mismatched {:?}, nonzero exit {:?}",
            CLI_FIXTURES.len(),
            mismatched,
            failed
        ),
    )
}

fn report(id: usize, name: &str, outcome: Result<Verdict>) -> bool {
    let (pass, detail) = match outcome {
        Ok(v) => (v.pass, v.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!("criterion {id:>2} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

#[test]
fn acceptance() {
    let witnesses = circle_witnesses();
    let curves = fourier_fixtures();
    let mut results = Vec::new();
    results.push(report(1, "pendulum torsion equals -1/period inside the separatrix", pendulum_period_law()));
    results.push(report(2, "pendulum torsion vanishes outside the separatrix", pendulum_exterior()));
    results.push(report(3, "torsion is independent of the vector up to 1/(2n)", vector_independence()));
    let w = witnesses.as_ref().map_err(|e| e.to_string());
    results.push(report(
        4,
        "horizontal torsion vanishes at max-height points of circles",
        match &w {
            Ok(w) => circle_exact_zero(w),
            Err(e) => Err(torsionlab::Error::Precondition(e.clone())),
        },
    ));
    results.push(report(5, "Phi vanishes on Fourier curves", phi_vanishes(&curves)));
    results.push(report(6, "building sequence stays within the complexity", building_sequence(&curves)));
    results.push(report(
        7,
        "bounded-before window at circle witnesses",
        match &w {
            Ok(w) => bounded_before(w),
            Err(e) => Err(torsionlab::Error::Precondition(e.clone())),
        },
    ));
    results.push(report(8, "linking of deck translates and torsion roots", linking_identity()));
    results.push(report(9, "tilt and direct time-one torsion agree", tilt_cross_validation()));
    results.push(report(10, "graphs keep |n Torsion_n| within 1/4", graph_quarter()));
    results.push(report(11, "isotopy variants give the same torsion", isotopy_independence()));
    results.push(report(12, "torsion equals angle variation on an invariant level", birkhoff_identity()));
    results.push(report(13, "CLI fixtures produce byte-identical CSV", determinism()));
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, p)| !**p)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
