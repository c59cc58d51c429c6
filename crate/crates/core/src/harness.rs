//! Executable checks of the statements about torsion: negative-torsion
//! certificates, zero-torsion points on essential curves, confinement of
//! finite-time torsion, torsion roots on segments, the quarter-turn bound
//! for graphs, cone bounds and the torsion/variation identity on invariant
//! curves.
//!
//! Grid certifications and sweeps run in parallel on the current rayon
//! pool; results are always returned in input order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curves::{
    angle_variation, complexity, is_graph, max_height_sequence, nearest_parameter, EssentialCurve,
    GraphTest,
};
use crate::error::{Error, Result};
use crate::geometry::{project_point, AnnulusPoint, PlanePoint, TangentVector, VERTICAL};
use crate::models::Isotopy;
use crate::torsion::{angle_determination, linking_finite, torsion_finite, torsion_profile, DeterminationOptions};

/// Tolerances shared by the checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Slack on angle and torsion inequalities, in turns.
    pub angle_residual: f64,
    /// Largest sampled distance between a curve and its image.
    pub invariance: f64,
    /// Parameter width at which bisections stop.
    pub bisection: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            angle_residual: 1e-6,
            invariance: 1e-6,
            bisection: 1e-10,
        }
    }
}

/// Rectangular grid on the annulus: `x_steps` abscissae `i / x_steps` and
/// `y_steps` evenly spaced heights in `[y_lo, y_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_steps: usize,
    pub y_lo: f64,
    pub y_hi: f64,
    pub y_steps: usize,
}

impl GridSpec {
    pub fn new(x_steps: usize, y_lo: f64, y_hi: f64, y_steps: usize) -> Result<Self> {
        let g = Self { x_steps, y_lo, y_hi, y_steps };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_steps < 2 || self.y_steps < 2 {
            return Err(Error::Domain("grid resolutions must be at least 2".into()));
        }
        if !(self.y_lo < self.y_hi) || !self.y_lo.is_finite() || !self.y_hi.is_finite() {
            return Err(Error::Domain("grid needs finite y_lo < y_hi".into()));
        }
        Ok(())
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.x_steps).map(|i| i as f64 / self.x_steps as f64).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        let n = self.y_steps - 1;
        (0..=n)
            .map(|j| {
                if j == n {
                    self.y_hi
                } else {
                    self.y_lo + (self.y_hi - self.y_lo) * j as f64 / n as f64
                }
            })
            .collect()
    }

    /// Points in row-major order (`x` outer, `y` inner).
    pub fn points(&self) -> Vec<AnnulusPoint> {
        let ys = self.ys();
        self.xs()
            .into_iter()
            .flat_map(|x| ys.iter().map(move |&y| AnnulusPoint::new(x, y)))
            .collect()
    }
}

/// Result of evaluating `Torsion_1(f, z, chi)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorsionCertificate {
    pub grid: GridSpec,
    pub min: f64,
    pub max: f64,
    /// `-max`: how far the worst grid value stays below zero.
    pub margin: f64,
    pub margin_floor: f64,
    pub pass: bool,
    /// Grid point attaining `max`.
    pub worst_point: AnnulusPoint,
    /// Per-point values, same order as [`GridSpec::points`].
    pub values: Vec<f64>,
}

pub const DEFAULT_MARGIN_FLOOR: f64 = 1e-9;

/// Evaluates `Torsion_1(f, z, chi)` on the grid; passes iff every value is
/// below `-margin_floor`. Nothing is claimed outside the grid.
pub fn certify_negative_torsion(
    model: &dyn Isotopy,
    grid: &GridSpec,
    margin_floor: f64,
) -> Result<TorsionCertificate> {
    grid.validate()?;
    let points = grid.points();
    let values = points
        .par_iter()
        .map(|&z| Ok(torsion_finite(model, z, VERTICAL, 1)?.value))
        .collect::<Result<Vec<f64>>>()?;
    let mut worst = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[worst] {
            worst = i;
        }
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values[worst];
    Ok(TorsionCertificate {
        grid: *grid,
        min,
        max,
        margin: 0.0 - max,
        margin_floor,
        pass: max < -margin_floor,
        worst_point: points[worst],
        values,
    })
}

/// Which proposition a constant `K` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundRule {
    /// `K = floor(2C) + 2`.
    FloorTwoC,
    /// `K = floor(2C + 1) + 2`, after swapping the tangent for the vertical.
    FloorTwoCPlusOne,
}

impl BoundRule {
    pub fn constant(self, c: f64) -> i64 {
        match self {
            BoundRule::FloorTwoC => (2.0 * c).floor() as i64 + 2,
            BoundRule::FloorTwoCPlusOne => (2.0 * c + 1.0).floor() as i64 + 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceStep {
    pub n: u32,
    /// Max-height parameter of `f^n o gamma`.
    pub parameter: f64,
    pub plateau: bool,
    /// `n Torsion_n(f, gamma(s_n), gamma'(s_n))`.
    pub tangent_variation: f64,
    pub within_complexity: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub horizon: u32,
    /// `Torsion_N(f, gamma(s_inf), chi)`.
    pub torsion: f64,
    /// `K / (2N)`.
    pub bound: f64,
    /// `Torsion_N` lies in `[-K/(2N), 0)`.
    pub in_window: bool,
    /// The window at this horizon is implied by the sequence and gates `pass`.
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterInfo {
    /// Cell width used to locate the accumulation point.
    pub cell_width: f64,
    pub cell_index: i64,
    /// Members of the densest cell among the tail of the sequence.
    pub members: usize,
    pub tail_len: usize,
    /// Index `n` of the sequence element used as the limit point.
    pub representative: u32,
}

/// Output of [`find_zero_torsion_on_curve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroTorsionReport {
    pub curve: String,
    pub n_max: u32,
    pub complexity: f64,
    pub sequence: Vec<SequenceStep>,
    pub sequence_bound_holds: bool,
    pub cluster: ClusterInfo,
    /// `s_inf` and the witness point `gamma(s_inf)`.
    pub parameter: f64,
    pub witness: AnnulusPoint,
    pub k: i64,
    pub k_rule: BoundRule,
    pub residuals: Vec<ResidualRow>,
    /// Every certified window holds and the sequence bound holds.
    pub pass: bool,
    pub certificate: Option<TorsionCertificate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroSearchOptions {
    pub tolerances: Tolerances,
    /// Skip the negative-torsion certification.
    pub assume_negative_torsion: bool,
    /// Grid resolution of the certification run.
    pub certificate_steps: usize,
    /// Cell width for the accumulation point.
    pub cell_width: f64,
}

impl Default for ZeroSearchOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            assume_negative_torsion: false,
            certificate_steps: 32,
            cell_width: 1.0 / 1024.0,
        }
    }
}

/// Accumulation cell of the tail of `params` (second half, 1-based index
/// `n`): the most populated cell, ties going to the cell holding the latest
/// element; its latest member is the representative.
pub fn cluster_point(params: &[f64], cell_width: f64) -> ClusterInfo {
    let len = params.len();
    let start = len / 2;
    let cells: Vec<i64> = params[start..]
        .iter()
        .map(|s| (s.rem_euclid(1.0) / cell_width).floor() as i64)
        .collect();
    let mut best: Option<(usize, usize, i64)> = None; // (count, latest, cell)
    for &c in &cells {
        let count = cells.iter().filter(|&&d| d == c).count();
        let latest = cells.iter().rposition(|&d| d == c).expect("present");
        let key = (count, latest);
        if best.is_none_or(|(bc, bl, _)| key > (bc, bl)) {
            best = Some((count, latest, c));
        }
    }
    let (members, latest, cell) = best.expect("non-empty sequence");
    ClusterInfo {
        cell_width,
        cell_index: cell,
        members,
        tail_len: cells.len(),
        representative: (start + latest + 1) as u32,
    }
}

fn curve_band(model: &dyn Isotopy, curve: &EssentialCurve) -> Result<(f64, f64)> {
    let m = 64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let p = curve.lifted(i as f64 / m as f64);
        let q = model.lifted_evaluate(1.0, p)?.0;
        lo = lo.min(p.y).min(q.y);
        hi = hi.max(p.y).max(q.y);
    }
    Ok((lo - 1.0, hi + 1.0))
}

/// Searches for a point of zero asymptotic torsion on `curve`.
///
/// Builds the max-height parameters `s_n` of `f^n o gamma`, checks
/// `|n Torsion_n(f, gamma(s_n), gamma'(s_n))| <= C(gamma)`, picks an
/// accumulation point `s_inf` and reports `Torsion_N(f, gamma(s_inf), chi)`
/// against the window `[-K/(2N), 0)`, `K = floor(2C + 1) + 2`.
///
/// Unless told to assume it, the model is first certified negative-torsion
/// on a band around the curve; a failed certificate is a refusal.
pub fn find_zero_torsion_on_curve(
    model: &dyn Isotopy,
    curve: &EssentialCurve,
    n_max: u32,
    opts: &ZeroSearchOptions,
) -> Result<ZeroTorsionReport> {
    if n_max == 0 {
        return Err(Error::Domain("n_max must be positive".into()));
    }
    let certificate = if opts.assume_negative_torsion {
        None
    } else {
        let (lo, hi) = curve_band(model, curve)?;
        let grid = GridSpec::new(opts.certificate_steps, lo, hi, opts.certificate_steps)?;
        let cert = certify_negative_torsion(model, &grid, DEFAULT_MARGIN_FLOOR)?;
        if !cert.pass {
            return Err(Error::NotNegativeTorsion(Box::new(cert)));
        }
        Some(cert)
    };
    let c = complexity(curve)?.value;
    let argmaxes = max_height_sequence(model, curve, n_max)?;
    let tol = opts.tolerances.angle_residual;
    let sequence = argmaxes
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let n = i as u32 + 1;
            let s = a.representative();
            let v = torsion_finite(model, curve.lifted(s), curve.derivative(s), n)?.total_variation;
            Ok(SequenceStep {
                n,
                parameter: s,
                plateau: a.plateau,
                tangent_variation: v,
                within_complexity: v.abs() <= c + tol,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sequence_bound_holds = sequence.iter().all(|s| s.within_complexity);
    let params: Vec<f64> = sequence.iter().map(|s| s.parameter).collect();
    let cluster = cluster_point(&params, opts.cell_width);
    let parameter = params[cluster.representative as usize - 1];
    let rule = BoundRule::FloorTwoCPlusOne;
    let k = rule.constant(c);
    let start = curve.lifted(parameter);
    let profile = torsion_profile(model, start, VERTICAL, n_max)?;
    let residuals: Vec<ResidualRow> = profile
        .iter()
        .enumerate()
        .map(|(i, total)| {
            let horizon = i as u32 + 1;
            let n = horizon as f64;
            let torsion = total / n;
            let bound = k as f64 / (2.0 * n);
            ResidualRow {
                horizon,
                torsion,
                bound,
                in_window: torsion >= -bound && torsion < 0.0,
                certified: horizon <= cluster.representative,
            }
        })
        .collect();
    let windows_hold = residuals.iter().filter(|r| r.certified).all(|r| r.in_window);
    Ok(ZeroTorsionReport {
        curve: curve.label(),
        n_max,
        complexity: c,
        sequence,
        sequence_bound_holds,
        cluster,
        parameter,
        witness: project_point(start),
        k,
        k_rule: rule,
        residuals,
        pass: sequence_bound_holds && windows_hold,
        certificate,
    })
}

/// Output of [`bounded_before_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedBeforeReport {
    pub point: AnnulusPoint,
    pub n: u32,
    pub c_bound: f64,
    pub k: i64,
    pub k_rule: BoundRule,
    /// `n Torsion_n(f, z, chi)`.
    pub endpoint_value: f64,
    /// `None` when the precondition holds, else which side failed.
    pub precondition_failure: Option<String>,
    /// `m Torsion_m(f, z, chi)` for `m = 1..=n`.
    pub values: Vec<f64>,
    /// Horizons `m` outside `[-K/2, 0)`.
    pub violations: Vec<u32>,
    pub pass: bool,
}

/// Given `|n Torsion_n(f, z, chi)| <= C`, checks
/// `m Torsion_m(f, z, chi)` in `[-K/2, 0)` for every `m <= n`,
/// `K = floor(2C) + 2`.
pub fn bounded_before_check(
    model: &dyn Isotopy,
    z: impl Into<PlanePoint>,
    n: u32,
    c_bound: f64,
) -> Result<BoundedBeforeReport> {
    let z = z.into();
    let values = torsion_profile(model, z, VERTICAL, n)?;
    let endpoint_value = *values.last().expect("n >= 1");
    let rule = BoundRule::FloorTwoC;
    let k = rule.constant(c_bound);
    let precondition_failure = if endpoint_value > c_bound {
        Some(format!("n Torsion_n = {endpoint_value} exceeds +{c_bound}"))
    } else if endpoint_value < -c_bound {
        Some(format!("n Torsion_n = {endpoint_value} is below -{c_bound}"))
    } else {
        None
    };
    let half = k as f64 / 2.0;
    let violations: Vec<u32> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| !(**v >= -half && **v < 0.0))
        .map(|(i, _)| i as u32 + 1)
        .collect();
    let pass = precondition_failure.is_none() && violations.is_empty();
    Ok(BoundedBeforeReport {
        point: project_point(z),
        n,
        c_bound,
        k,
        k_rule: rule,
        endpoint_value,
        precondition_failure,
        values,
        violations,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentRoot {
    /// Position along the segment, in `[0, 1]`.
    pub parameter: f64,
    pub point: PlanePoint,
    /// `Torsion_n(I, z, y - x)`.
    pub torsion: f64,
    pub target: f64,
    pub residual: f64,
}

/// Residual required of [`segment_torsion_root`].
pub const SEGMENT_RESIDUAL: f64 = 1e-8;

/// Point `z` of the segment `[x, y]` with `Torsion_n(I, z, y - x) = l`.
///
/// Scans the segment, doubling the resolution until a sign change (or an
/// exact hit) appears, then bisects until the residual is below
/// [`SEGMENT_RESIDUAL`].
pub fn segment_torsion_root(
    model: &dyn Isotopy,
    x: PlanePoint,
    y: PlanePoint,
    n: u32,
    l: f64,
) -> Result<SegmentRoot> {
    let chord = x.chord_to(&y);
    if chord.is_zero() {
        return Err(Error::ZeroVector);
    }
    let at = |s: f64| x.displace(s * chord.dx, s * chord.dy);
    let g = |s: f64| -> Result<f64> { Ok(torsion_finite(model, at(s), chord, n)?.value - l) };
    let done = |s: f64, v: f64| SegmentRoot {
        parameter: s,
        point: at(s),
        torsion: v + l,
        target: l,
        residual: v.abs(),
    };
    let mut steps = 16usize;
    while steps <= 4096 {
        let grid: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
        let values = grid.par_iter().map(|&s| g(s)).collect::<Result<Vec<f64>>>()?;
        let mut best = 0;
        for (i, v) in values.iter().enumerate() {
            if v.abs() < values[best].abs() {
                best = i;
            }
        }
        if values[best].abs() < SEGMENT_RESIDUAL {
            return Ok(done(grid[best], values[best]));
        }
        if let Some(i) = (0..steps).find(|&i| values[i] * values[i + 1] < 0.0) {
            let (mut a, mut b, mut ga) = (grid[i], grid[i + 1], values[i]);
            let mut last = (a, ga);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                let gm = g(mid)?;
                last = (mid, gm);
                if gm.abs() < SEGMENT_RESIDUAL || mid <= a || mid >= b {
                    break;
                }
                if gm * ga > 0.0 {
                    a = mid;
                    ga = gm;
                } else {
                    b = mid;
                }
            }
            if last.1.abs() < SEGMENT_RESIDUAL {
                return Ok(done(last.0, last.1));
            }
            return Err(Error::NoBracket(format!(
                "bisection stalled at s = {} with residual {:e} (torsion jumps across the bracket)",
                last.0,
                last.1.abs()
            )));
        }
        steps *= 4;
    }
    Err(Error::NoBracket(format!(
        "Torsion_{n} - {l} keeps one sign along the segment at resolution 4096"
    )))
}

/// Output of [`graph_quarter_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarterBoundReport {
    pub curve: String,
    /// `(n, s_n, n Torsion_n(f, gamma(s_n), chi))`.
    pub rows: Vec<(u32, f64, f64)>,
    pub worst: f64,
    pub pass: bool,
}

/// For a graph, checks `|n Torsion_n(f, gamma(s_n), chi)| <= 1/4` at the
/// max-height parameters `s_n`, `n = 1..=n_max`.
pub fn graph_quarter_bound(
    model: &dyn Isotopy,
    curve: &EssentialCurve,
    n_max: u32,
    slack: f64,
) -> Result<QuarterBoundReport> {
    let g = is_graph(curve)?;
    if !g.is_graph {
        return Err(Error::Precondition(format!(
            "curve is not a graph (vertical tangent near s = {})",
            g.witness.unwrap_or(f64::NAN)
        )));
    }
    let argmaxes = max_height_sequence(model, curve, n_max)?;
    let rows = argmaxes
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let n = i as u32 + 1;
            let s = a.representative();
            Ok((n, s, torsion_finite(model, curve.lifted(s), VERTICAL, n)?.total_variation))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
    Ok(QuarterBoundReport {
        curve: curve.label(),
        rows,
        worst,
        pass: worst <= 0.25 + slack,
    })
}

/// Output of [`cone_torsion_bound`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub delta: f64,
    /// `-max Torsion_1(f, x, v)` over samples and cone vectors.
    pub epsilon: f64,
    /// `delta < epsilon / 4`.
    pub delta_admissible: bool,
    pub n_max: u32,
    /// Largest `N Torsion_N(f, x, v) + epsilon / 2` seen; negative on success.
    pub worst_excess: f64,
    pub violations: usize,
    pub pass: bool,
}

/// Test vectors of the vertical cone of half-width `delta`: directions at
/// angles `-delta', 0, delta'` from `chi` and their opposites, with
/// `delta'` just inside the open cone.
pub fn cone_vectors(delta: f64) -> Vec<TangentVector> {
    let inner = delta * (1.0 - 1e-6);
    let mut angles = vec![0.0];
    if inner > 0.0 {
        angles.push(inner);
        angles.push(-inner);
    }
    angles
        .iter()
        .flat_map(|&a| {
            let v = TangentVector::from_vertical_angle(a);
            [v, -v]
        })
        .collect()
}

/// Estimates `epsilon = -max Torsion_1` over the samples and cone vectors,
/// then checks `N Torsion_N(f, x, v) < -epsilon/2` for `N = 1..=n_max`.
pub fn cone_torsion_bound(
    model: &dyn Isotopy,
    samples: &[AnnulusPoint],
    delta: f64,
    n_max: u32,
) -> Result<ConeReport> {
    if samples.is_empty() || n_max == 0 || !(delta >= 0.0) {
        return Err(Error::Domain("need samples, n_max >= 1 and delta >= 0".into()));
    }
    let vectors = cone_vectors(delta);
    let jobs: Vec<(AnnulusPoint, TangentVector)> = samples
        .iter()
        .flat_map(|&z| vectors.iter().map(move |&v| (z, v)))
        .collect();
    let profiles = jobs
        .par_iter()
        .map(|&(z, v)| torsion_profile(model, z, v, n_max))
        .collect::<Result<Vec<_>>>()?;
    let epsilon = -profiles.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    if !(epsilon > 0.0) {
        return Err(Error::Precondition(format!(
            "Torsion_1 reaches {} on the samples: the map is not negative-torsion there",
            -epsilon
        )));
    }
    let mut worst_excess = f64::NEG_INFINITY;
    let mut violations = 0;
    for p in &profiles {
        for v in p {
            let excess = v + epsilon / 2.0;
            worst_excess = worst_excess.max(excess);
            if excess >= 0.0 {
                violations += 1;
            }
        }
    }
    let delta_admissible = delta < epsilon / 4.0;
    Ok(ConeReport {
        delta,
        epsilon,
        delta_admissible,
        n_max,
        worst_excess,
        violations,
        pass: violations == 0 && delta_admissible,
    })
}

/// One sample of the torsion/variation identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityRow {
    pub parameter: f64,
    pub horizon: u32,
    /// `N Torsion_N(f, gamma(s), gamma'(s))`.
    pub torsion_term: f64,
    /// `Var_gamma(gamma(s), gamma(s_N))` with `gamma(s_N) = f^N(gamma(s))`.
    pub variation_term: f64,
    pub difference: f64,
}

/// Output of [`birkhoff_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffReport {
    pub curve: String,
    pub invariance_distance: f64,
    pub rows: Vec<IdentityRow>,
    pub worst_difference: f64,
    pub identity_holds: bool,
    pub graph: GraphTest,
    /// Supplied by the caller, never inferred.
    pub assumed_non_wandering: bool,
    /// The identity holds and the curve is a graph.
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffOptions {
    pub tolerances: Tolerances,
    /// Largest allowed `|N Torsion_N - Var|`.
    pub identity_tolerance: f64,
    /// Curve parameters checked, evenly spaced.
    pub samples: usize,
    /// Points used to measure invariance.
    pub invariance_samples: usize,
    pub assumed_non_wandering: bool,
}

impl Default for BirkhoffOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            identity_tolerance: 1e-5,
            samples: 32,
            invariance_samples: 256,
            assumed_non_wandering: true,
        }
    }
}

/// Sampled distance from `f(gamma)` to `gamma`.
pub fn invariance_distance(model: &dyn Isotopy, curve: &EssentialCurve, samples: usize) -> Result<f64> {
    let ds = (0..samples)
        .into_par_iter()
        .map(|i| {
            let s = i as f64 / samples as f64;
            let image = model.evaluate(1.0, curve.position(s))?;
            Ok(nearest_parameter(curve, image).1)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ds.into_iter().fold(0.0, f64::max))
}

/// On an invariant curve, checks
/// `N Torsion_N(f, gamma(s), gamma'(s)) = Var_gamma(gamma(s), gamma(s_N))`
/// and runs the graph test. Refuses curves that are not invariant.
pub fn birkhoff_check(
    model: &dyn Isotopy,
    curve: &EssentialCurve,
    n_max: u32,
    opts: &BirkhoffOptions,
) -> Result<BirkhoffReport> {
    if n_max == 0 || opts.samples == 0 {
        return Err(Error::Domain("n_max and samples must be positive".into()));
    }
    let distance = invariance_distance(model, curve, opts.invariance_samples.max(opts.samples))?;
    if !(distance < opts.tolerances.invariance) {
        return Err(Error::Precondition(format!(
            "curve is not invariant: sampled distance {distance:e} exceeds {:e}",
            opts.tolerances.invariance
        )));
    }
    let params: Vec<f64> = (0..opts.samples).map(|i| i as f64 / opts.samples as f64).collect();
    let per_sample = params
        .par_iter()
        .map(|&s| -> Result<Vec<IdentityRow>> {
            let det = angle_determination(
                model,
                curve.lifted(s),
                curve.derivative(s),
                n_max as f64,
                &DeterminationOptions::default(),
            )?;
            let totals = det.unit_variations();
            let mut rows = Vec::with_capacity(n_max as usize);
            let mut q = curve.lifted(s);
            for (i, total) in totals.iter().enumerate() {
                q = model.stage(1.0, q)?.0;
                let (s_n, _) = nearest_parameter(curve, project_point(q));
                let var = angle_variation(curve, s, s_n)?;
                rows.push(IdentityRow {
                    parameter: s,
                    horizon: i as u32 + 1,
                    torsion_term: *total,
                    variation_term: var,
                    difference: total - var,
                });
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<IdentityRow> = per_sample.into_iter().flatten().collect();
    let worst_difference = rows.iter().map(|r| r.difference.abs()).fold(0.0, f64::max);
    let identity_holds = worst_difference < opts.identity_tolerance;
    let graph = is_graph(curve)?;
    Ok(BirkhoffReport {
        curve: curve.label(),
        invariance_distance: distance,
        rows,
        worst_difference,
        identity_holds,
        graph,
        assumed_non_wandering: opts.assumed_non_wandering,
        pass: identity_holds && graph.is_graph,
    })
}

/// One row of [`zero_torsion_sweep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub height: f64,
    pub witness_x: f64,
    pub witness_y: f64,
    /// `Torsion_N(f, witness, chi)` at the final horizon.
    pub torsion: f64,
    /// `K / (2N)` with the report's `K`.
    pub bound: f64,
    pub pass: bool,
    pub error: Option<String>,
}

/// Heights `r_lo + i (r_hi - r_lo) / (steps - 1)`; a single step gives `r_lo`.
pub fn sweep_heights(r_lo: f64, r_hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![r_lo];
    }
    (0..steps)
        .map(|i| {
            if i == steps - 1 {
                r_hi
            } else {
                r_lo + (r_hi - r_lo) * i as f64 / (steps - 1) as f64
            }
        })
        .collect()
}

/// Runs [`find_zero_torsion_on_curve`] on every circle `T x {r}` of the
/// sweep. A failing row is recorded and the sweep continues.
pub fn zero_torsion_sweep(
    model: &dyn Isotopy,
    r_lo: f64,
    r_hi: f64,
    steps: usize,
    n: u32,
    opts: &ZeroSearchOptions,
) -> Result<Vec<SweepRow>> {
    if steps == 0 || n == 0 {
        return Err(Error::Domain("steps and n must be positive".into()));
    }
    let heights = sweep_heights(r_lo, r_hi, steps);
    let mut row_opts = *opts;
    if !opts.assume_negative_torsion {
        let grid = GridSpec::new(opts.certificate_steps, r_lo.min(r_hi) - 1.0, r_lo.max(r_hi) + 1.0, opts.certificate_steps)?;
        let cert = certify_negative_torsion(model, &grid, DEFAULT_MARGIN_FLOOR)?;
        if !cert.pass {
            return Err(Error::NotNegativeTorsion(Box::new(cert)));
        }
        row_opts.assume_negative_torsion = true;
    }
    Ok(heights
        .par_iter()
        .map(|&r| {
            let run = EssentialCurve::circle(r)
                .and_then(|c| find_zero_torsion_on_curve(model, &c, n, &row_opts));
            match run {
                Ok(report) => {
                    let last = report.residuals.last().expect("n >= 1");
                    SweepRow {
                        height: r,
                        witness_x: report.witness.x,
                        witness_y: report.witness.y,
                        torsion: last.torsion,
                        bound: last.bound,
                        pass: report.pass && last.in_window,
                        error: None,
                    }
                }
                Err(e) => SweepRow {
                    height: r,
                    witness_x: f64::NAN,
                    witness_y: f64::NAN,
                    torsion: f64::NAN,
                    bound: f64::NAN,
                    pass: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

/// `Linking_n(I, x, y)` and a root of `Torsion_n(I, ., y - x) = Linking_n`
/// on the segment between them.
pub fn linking_and_root(
    model: &dyn Isotopy,
    x: PlanePoint,
    y: PlanePoint,
    n: u32,
) -> Result<(f64, SegmentRoot)> {
    let l = linking_finite(model, x, y, n)?;
    Ok((l, segment_torsion_root(model, x, y, n, l)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::TrigPolynomial;
    use crate::models::{IdentityModel, PendulumModel, RigidRotationModel, TranslationModel, TwistMapModel};
    use approx::assert_abs_diff_eq;

    #[test]
    fn shear_certifies_with_margin_one_eighth() {
        let grid = GridSpec::new(8, -2.0, 2.0, 8).unwrap();
        let c = certify_negative_torsion(&TwistMapModel::standard(0.0), &grid, DEFAULT_MARGIN_FLOOR).unwrap();
        assert!(c.pass);
        assert_abs_diff_eq!(c.margin, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(c.min, -0.125, epsilon = 1e-15);
        assert_eq!(c.values.len(), 64);
    }

    #[test]
    fn identity_fails_certification() {
        let grid = GridSpec::new(4, -1.0, 1.0, 4).unwrap();
        let c = certify_negative_torsion(&IdentityModel, &grid, DEFAULT_MARGIN_FLOOR).unwrap();
        assert!(!c.pass);
        assert_eq!(c.margin, 0.0);
        let curve = EssentialCurve::circle(0.0).unwrap();
        let err = find_zero_torsion_on_curve(&IdentityModel, &curve, 5, &ZeroSearchOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NotNegativeTorsion(_)));
    }

    #[test]
    fn bound_rules() {
        assert_eq!(BoundRule::FloorTwoC.constant(0.5), 3);
        assert_eq!(BoundRule::FloorTwoCPlusOne.constant(0.0), 3);
        assert_eq!(BoundRule::FloorTwoCPlusOne.constant(0.3), 3);
        assert_eq!(BoundRule::FloorTwoC.constant(0.0), 2);
    }

    #[test]
    fn cluster_prefers_dense_then_latest() {
        let s = [0.9, 0.1, 0.5, 0.2, 0.2001, 0.7, 0.7001, 0.3];
        let c = cluster_point(&s, 1.0 / 1024.0);
        // tail is [0.2, 0.2001, 0.7, 0.7001]; two cells of two, latest wins
        assert_eq!(c.tail_len, 4);
        assert_eq!(c.members, 2);
        assert_eq!(c.representative, 7);
    }

    #[test]
    fn circle_zero_search_under_twist_map() {
        let f = TwistMapModel::standard(0.3);
        let curve = EssentialCurve::circle(0.5).unwrap();
        let r = find_zero_torsion_on_curve(&f, &curve, 30, &ZeroSearchOptions::default()).unwrap();
        assert!(r.pass, "{:?}", r.residuals);
        assert_eq!(r.k, 3);
        for step in &r.sequence {
            assert!(step.tangent_variation.abs() < 1e-6, "{step:?}");
        }
    }

    #[test]
    fn bounded_before_degenerate_and_failing() {
        let f = TwistMapModel::standard(0.0);
        let r = bounded_before_check(&f, AnnulusPoint::new(0.0, 0.0), 1, 0.5).unwrap();
        assert!(r.pass);
        assert_eq!(r.k, 3);
        assert_abs_diff_eq!(r.values[0], -0.125, epsilon = 1e-15);
        // a strongly kicked point rotates past the bound: reported, not asserted
        let wild = TwistMapModel::standard(6.0);
        let r = bounded_before_check(&wild, AnnulusPoint::new(0.0, 0.0), 40, 0.0).unwrap();
        assert!(r.precondition_failure.is_some());
        assert!(!r.pass);
    }

    #[test]
    fn segment_root_cases() {
        let f = TwistMapModel::standard(0.3);
        let x = PlanePoint::new(0.0, 0.4);
        let y = PlanePoint::new(1.0, 0.4);
        let (l, root) = linking_and_root(&f, x, y, 5).unwrap();
        assert_eq!(l, 0.0);
        assert!(root.residual < SEGMENT_RESIDUAL);
        let rot = RigidRotationModel::new(0.2);
        let root = segment_torsion_root(&rot, PlanePoint::new(-0.5, 0.0), PlanePoint::new(0.5, 0.0), 3, 0.2).unwrap();
        assert!(root.residual < 1e-12);
        let pend = PendulumModel::paper();
        let (l, root) = linking_and_root(&pend, PlanePoint::new(0.2, -0.3), PlanePoint::new(0.2, 0.6), 1).unwrap();
        assert_abs_diff_eq!(root.torsion, l, epsilon = SEGMENT_RESIDUAL);
    }

    #[test]
    fn quarter_bound_for_graphs() {
        let f = TwistMapModel::standard(0.5);
        let g = EssentialCurve::graph(TrigPolynomial::new(0.0, vec![], vec![0.3])).unwrap();
        let r = graph_quarter_bound(&f, &g, 20, 1e-6).unwrap();
        assert!(r.pass, "worst {}", r.worst);
        let folded = EssentialCurve::fourier(
            1,
            TrigPolynomial::new(0.0, vec![], vec![2.0 / std::f64::consts::TAU]),
            TrigPolynomial::new(0.0, vec![], vec![0.5]),
        )
        .unwrap();
        assert!(matches!(graph_quarter_bound(&f, &folded, 3, 1e-6), Err(Error::Precondition(_))));
    }

    #[test]
    fn cone_bound_under_shear() {
        let f = TwistMapModel::standard(0.0);
        let pts = [AnnulusPoint::new(0.1, 0.0), AnnulusPoint::new(0.7, 1.0)];
        let r = cone_torsion_bound(&f, &pts, 0.0, 10).unwrap();
        assert_abs_diff_eq!(r.epsilon, 0.125, epsilon = 1e-15);
        assert!(r.pass);
        let r = cone_torsion_bound(&f, &pts, 0.02, 10).unwrap();
        assert!(r.epsilon > 0.0 && r.epsilon < 0.125);
        assert!(r.pass);
        assert!(matches!(
            cone_torsion_bound(&IdentityModel, &pts, 0.0, 3),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn birkhoff_on_translated_circle_and_refusal() {
        let f = TranslationModel { rate: 0.3 };
        let c = EssentialCurve::circle(1.0).unwrap();
        let opts = BirkhoffOptions { samples: 4, ..BirkhoffOptions::default() };
        let r = birkhoff_check(&f, &c, 5, &opts).unwrap();
        assert!(r.pass);
        assert_eq!(r.worst_difference, 0.0);
        let shear = TwistMapModel::standard(0.3);
        let wavy = EssentialCurve::graph(TrigPolynomial::new(0.0, vec![], vec![0.2])).unwrap();
        assert!(matches!(birkhoff_check(&shear, &wavy, 2, &opts), Err(Error::Precondition(_))));
    }

    #[test]
    fn sweep_rows_in_order() {
        let f = TwistMapModel::standard(0.3);
        let rows = zero_torsion_sweep(&f, -1.0, 1.0, 3, 20, &ZeroSearchOptions::default()).unwrap();
        assert_eq!(rows.iter().map(|r| r.height).collect::<Vec<_>>(), vec![-1.0, 0.0, 1.0]);
        for r in &rows {
            assert!(r.pass, "{r:?}");
            assert!(r.torsion >= -1.5 / 20.0 && r.torsion < 0.0);
        }
        assert_eq!(zero_torsion_sweep(&f, 0.2, 0.9, 1, 5, &ZeroSearchOptions::default()).unwrap().len(), 1);
    }
}
