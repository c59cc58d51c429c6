//! Essential curves of the annulus and the quantities attached to them:
//! tangent angle variation, complexity, max-height parameters of pushed
//! curves, the `Phi` function and the graph test.
//!
//! A curve is given by a lifted parametrisation `Gamma: R -> R^2` with
//! `Gamma(S + 1) = Gamma(S) + (sign, 0)`, where `sign` is the homotopy sign.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_point, vertical_angle, AnnulusPoint, Mat2, PlanePoint, TangentVector, TurnAngle};
use crate::models::Isotopy;
use crate::torsion::torsion_at;
use crate::unwrap::{lift_samples, refine, uniform_grid, AngleSample};

pub const DEFAULT_RESOLUTION: usize = 4096;
/// Bound on the tangent turning between adjacent curve samples.
pub const VARIATION_STEP: f64 = 0.125;
/// Parameters whose height is within this of the maximum are reported.
pub const ARGMAX_TOLERANCE: f64 = 1e-9;
/// Derivatives shorter than this are treated as vanishing.
pub const MIN_TANGENT_NORM: f64 = 1e-12;
/// Upper bound on samples used to resolve a pushed curve.
pub const MAX_PUSHED_SAMPLES: usize = 1 << 22;

/// `c + sum_j cos_j cos(2 pi j s) + sin_j sin(2 pi j s)`, `j` from 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigPolynomial {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl TrigPolynomial {
    pub fn new(constant: f64, cos: Vec<f64>, sin: Vec<f64>) -> Self {
        Self { constant, cos, sin }
    }

    pub fn value(&self, s: f64) -> f64 {
        let mut v = self.constant;
        for (j, a) in self.cos.iter().enumerate() {
            v += a * (TAU * (j + 1) as f64 * s).cos();
        }
        for (j, b) in self.sin.iter().enumerate() {
            v += b * (TAU * (j + 1) as f64 * s).sin();
        }
        v
    }

    pub fn derivative(&self, s: f64) -> f64 {
        let mut v = 0.0;
        for (j, a) in self.cos.iter().enumerate() {
            let w = TAU * (j + 1) as f64;
            v -= a * w * (w * s).sin();
        }
        for (j, b) in self.sin.iter().enumerate() {
            let w = TAU * (j + 1) as f64;
            v += b * w * (w * s).cos();
        }
        v
    }

    fn is_finite(&self) -> bool {
        self.constant.is_finite()
            && self.cos.iter().chain(&self.sin).all(|c| c.is_finite())
    }
}

/// Built-in curve families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CurveFamily {
    /// `T x {height}`.
    Circle { height: f64 },
    /// Graph of a trigonometric polynomial.
    Graph { profile: TrigPolynomial },
    /// `Gamma(S) = (winding S + x(S), y(S))` with `winding = +-1`.
    Fourier {
        winding: i64,
        x: TrigPolynomial,
        y: TrigPolynomial,
    },
    /// Level set `H = energy` of the pendulum above the separatrix, on the
    /// upper (`r > 0`) or lower branch.
    PendulumLevel {
        stiffness: f64,
        energy: f64,
        upper: bool,
    },
}

/// A C^1 essential curve with a sampling resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssentialCurve {
    family: CurveFamily,
    resolution: usize,
}

impl EssentialCurve {
    /// Validates the family: finite data, nonvanishing derivative at the
    /// samples, unit endpoint displacement and (for Fourier loops)
    /// embeddedness at the sampling resolution.
    pub fn new(family: CurveFamily, resolution: usize) -> Result<Self> {
        if resolution < 8 {
            return Err(Error::InvalidCurve(format!("resolution {resolution} is below 8")));
        }
        match &family {
            CurveFamily::Circle { height } => {
                if !height.is_finite() {
                    return Err(Error::InvalidCurve("circle height must be finite".into()));
                }
            }
            CurveFamily::Graph { profile } => {
                if !profile.is_finite() {
                    return Err(Error::InvalidCurve("graph coefficients must be finite".into()));
                }
            }
            CurveFamily::Fourier { winding, x, y } => {
                if winding.abs() != 1 {
                    return Err(Error::InvalidCurve(format!(
                        "endpoint displacement {winding} is not +-1: the loop is not a simple essential curve"
                    )));
                }
                if !x.is_finite() || !y.is_finite() {
                    return Err(Error::InvalidCurve("Fourier coefficients must be finite".into()));
                }
            }
            CurveFamily::PendulumLevel { stiffness, energy, .. } => {
                if !(*stiffness > 0.0) || !stiffness.is_finite() || !energy.is_finite() {
                    return Err(Error::InvalidCurve("pendulum level needs finite c > 0".into()));
                }
                if !(*energy > *stiffness) {
                    return Err(Error::InvalidCurve(format!(
                        "energy {energy} is not above the separatrix energy {stiffness}"
                    )));
                }
            }
        }
        let curve = Self { family, resolution };
        for i in 0..resolution {
            let s = i as f64 / resolution as f64;
            curve.checked_derivative(s)?;
        }
        if let CurveFamily::Fourier { .. } = curve.family {
            if let Some((a, b)) = curve.self_intersection() {
                return Err(Error::InvalidCurve(format!(
                    "loop is not embedded: segments at s = {a} and s = {b} cross"
                )));
            }
        }
        Ok(curve)
    }

    pub fn circle(height: f64) -> Result<Self> {
        Self::new(CurveFamily::Circle { height }, DEFAULT_RESOLUTION)
    }

    pub fn graph(profile: TrigPolynomial) -> Result<Self> {
        Self::new(CurveFamily::Graph { profile }, DEFAULT_RESOLUTION)
    }

    pub fn fourier(winding: i64, x: TrigPolynomial, y: TrigPolynomial) -> Result<Self> {
        Self::new(CurveFamily::Fourier { winding, x, y }, DEFAULT_RESOLUTION)
    }

    pub fn pendulum_level(stiffness: f64, energy: f64, upper: bool) -> Result<Self> {
        Self::new(
            CurveFamily::PendulumLevel { stiffness, energy, upper },
            DEFAULT_RESOLUTION,
        )
    }

    pub fn family(&self) -> &CurveFamily {
        &self.family
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Short label for reports.
    pub fn label(&self) -> String {
        match &self.family {
            CurveFamily::Circle { height } => format!("circle(y={height})"),
            CurveFamily::Graph { .. } => "graph".into(),
            CurveFamily::Fourier { .. } => "fourier".into(),
            CurveFamily::PendulumLevel { energy, upper, .. } => {
                format!("pendulum-level(H={energy},{})", if *upper { "upper" } else { "lower" })
            }
        }
    }

    /// `+1` for the class of `T x {0}` traversed rightwards, `-1` otherwise.
    pub fn homotopy_sign(&self) -> i64 {
        match &self.family {
            CurveFamily::Fourier { winding, .. } => *winding,
            _ => 1,
        }
    }

    /// `Gamma(S)`.
    pub fn lifted(&self, s: f64) -> PlanePoint {
        match &self.family {
            CurveFamily::Circle { height } => PlanePoint::new(s, *height),
            CurveFamily::Graph { profile } => PlanePoint::new(s, profile.value(s)),
            CurveFamily::Fourier { winding, x, y } => {
                // Keep the integer part of S exact in the sheet.
                let k = s.floor();
                let f = s - k;
                PlanePoint::new(*winding as f64 * f + x.value(f), y.value(f))
                    .translate(*winding * k as i64)
            }
            CurveFamily::PendulumLevel { stiffness, energy, upper } => {
                let r = (2.0 * (energy + stiffness * (TAU * s).cos())).sqrt();
                PlanePoint::new(s, if *upper { r } else { -r })
            }
        }
    }

    pub fn position(&self, s: f64) -> AnnulusPoint {
        project_point(self.lifted(s))
    }

    /// `Gamma'(S)`.
    pub fn derivative(&self, s: f64) -> TangentVector {
        match &self.family {
            CurveFamily::Circle { .. } => TangentVector::new(1.0, 0.0),
            CurveFamily::Graph { profile } => TangentVector::new(1.0, profile.derivative(s)),
            CurveFamily::Fourier { winding, x, y } => {
                TangentVector::new(*winding as f64 + x.derivative(s), y.derivative(s))
            }
            CurveFamily::PendulumLevel { stiffness, energy, upper } => {
                let r = (2.0 * (energy + stiffness * (TAU * s).cos())).sqrt();
                let dr = -TAU * stiffness * (TAU * s).sin() / r;
                TangentVector::new(1.0, if *upper { dr } else { -dr })
            }
        }
    }

    fn checked_derivative(&self, s: f64) -> Result<TangentVector> {
        let d = self.derivative(s);
        let norm = d.norm();
        if !(norm >= MIN_TANGENT_NORM) {
            return Err(Error::DegenerateTangent { s, norm });
        }
        Ok(d)
    }

    fn tangent_angle(&self, s: f64) -> Result<TurnAngle> {
        vertical_angle(self.checked_derivative(s)?)
    }

    /// Parameters and continuous lifts of `theta(chi, Gamma')` on `[a, b]`,
    /// sampled so adjacent lifts differ by less than [`VARIATION_STEP`].
    pub fn tangent_profile(&self, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let raw = uniform_grid(a, b, self.resolution)
            .into_iter()
            .map(|s| Ok(AngleSample { s, angle: self.tangent_angle(s)?, extra: () }))
            .collect::<Result<Vec<_>>>()?;
        let refined = refine(raw, VARIATION_STEP, 1e-12, |s| Ok((self.tangent_angle(s)?, ())))
            .map_err(|e| match e {
                Error::RotationTooFast { t, .. } => Error::DegenerateTangent {
                    s: t,
                    norm: self.derivative(t).norm(),
                },
                other => other,
            })?;
        let start = refined[0].angle.value();
        let lifts = lift_samples(&refined, start);
        Ok((refined.iter().map(|r| r.s).collect(), lifts))
    }

    /// First pair of crossing sample segments of the lifted loop against
    /// itself and its deck translates, if any.
    ///
    /// Every crossing in the annulus has a representative with abscissa in
    /// `[0, 1]`, so only the translates meeting that strip are swept.
    fn self_intersection(&self) -> Option<(f64, f64)> {
        let m = self.resolution;
        let w = self.homotopy_sign();
        let pts: Vec<(f64, f64)> = (0..=m)
            .map(|i| {
                let p = self.lifted(i as f64 / m as f64);
                (p.x(), p.y)
            })
            .collect();
        // (xmin, xmax, segment, shift)
        let mut items: Vec<(f64, f64, usize, i64)> = Vec::new();
        for i in 0..m {
            let (a, b) = (pts[i], pts[i + 1]);
            let (lo, hi) = (a.0.min(b.0), a.0.max(b.0));
            for j in (-hi.floor() as i64 - 1)..=(1.0 - lo).ceil() as i64 {
                let (l, h) = (lo + j as f64, hi + j as f64);
                if h >= 0.0 && l <= 1.0 {
                    items.push((l, h, i, j));
                }
            }
        }
        items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
        let shifted = |i: usize, j: i64| {
            let d = j as f64;
            ((pts[i].0 + d, pts[i].1), (pts[i + 1].0 + d, pts[i + 1].1))
        };
        let mut active: Vec<(f64, f64, usize, i64)> = Vec::new();
        for &item in &items {
            active.retain(|a| a.1 >= item.0);
            for a in &active {
                let (i, k, d) = (a.2, item.2, item.3 - a.3);
                let adjacent = (d == 0 && i.abs_diff(k) <= 1)
                    || (d == w && i == m - 1 && k == 0)
                    || (d == -w && i == 0 && k == m - 1);
                if adjacent {
                    continue;
                }
                let (p0, p1) = shifted(i, a.3);
                let (q0, q1) = shifted(k, item.3);
                if segments_cross(p0, p1, q0, q1) {
                    return Some((i as f64 / m as f64, k as f64 / m as f64));
                }
            }
            active.push(item);
        }
        None
    }
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Proper crossing of two segments (collinear touching is ignored).
fn segments_cross(p0: (f64, f64), p1: (f64, f64), q0: (f64, f64), q1: (f64, f64)) -> bool {
    let d1 = orient(q0, q1, p0);
    let d2 = orient(q0, q1, p1);
    let d3 = orient(p0, p1, q0);
    let d4 = orient(p0, p1, q1);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// `Var_gamma(gamma(s1), gamma(s2))`: turning of the tangent along the arc
/// from `s1` to the lift of `s2` in `(s1, s1 + 1)`; zero when the points
/// coincide.
pub fn angle_variation(curve: &EssentialCurve, s1: f64, s2: f64) -> Result<f64> {
    let gap = (s2 - s1).rem_euclid(1.0);
    if gap == 0.0 || gap == 1.0 {
        return Ok(0.0);
    }
    let (_, lifts) = curve.tangent_profile(s1, s1 + gap)?;
    Ok(lifts.last().expect("non-empty") - lifts[0])
}

/// Complexity of a curve and the anchor it was measured from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complexity {
    pub value: f64,
    pub anchor: f64,
    /// Parameter where `|Var|` is largest.
    pub witness: f64,
}

/// `C(gamma)`: largest `|Var_gamma(gamma(s0), gamma(s0 + t))|` over one
/// period, `s0` a max-height parameter.
pub fn complexity(curve: &EssentialCurve) -> Result<Complexity> {
    let anchor = curve_argmax(curve)?.representative();
    complexity_from(curve, anchor)
}

/// Complexity measured from a given anchor.
pub fn complexity_from(curve: &EssentialCurve, anchor: f64) -> Result<Complexity> {
    let (params, lifts) = curve.tangent_profile(anchor, anchor + 1.0)?;
    let l0 = lifts[0];
    let top = lifts.iter().map(|l| (l - l0).abs()).fold(0.0, f64::max);
    let mut best = (top, anchor);
    // Polish every sampled local maximum of |Var| that comes close to the top.
    for i in 1..params.len() - 1 {
        let v = (lifts[i] - l0).abs();
        if v + 1e-6 < top || v < (lifts[i - 1] - l0).abs() || v < (lifts[i + 1] - l0).abs() {
            continue;
        }
        let local = |s: f64| -> f64 {
            let a = curve.tangent_angle(s).unwrap_or(TurnAngle::principal(0.0));
            (crate::geometry::nearest_lift(lifts[i], a) - l0).abs()
        };
        let (s, v) = golden_max(local, params[i - 1], params[i + 1]);
        if v > best.0 {
            best = (v, s);
        }
    }
    if best.0 == top {
        let i = lifts
            .iter()
            .position(|l| (l - l0).abs() == top)
            .expect("max is attained");
        best.1 = params[i];
    }
    Ok(Complexity {
        value: best.0,
        anchor,
        witness: best.1.rem_euclid(1.0),
    })
}

/// Golden-section maximisation of a unimodal function on `[a, b]`.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Max-height parameters of `p2 o f_t o gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Argmax {
    pub time: f64,
    /// `M^h_gamma(t)`.
    pub max_height: f64,
    /// Parameters in `[0, 1)` within [`ARGMAX_TOLERANCE`] of the max, ascending.
    pub parameters: Vec<f64>,
    /// The maximum is attained on a non-isolated set.
    pub plateau: bool,
    pub samples_used: usize,
}

impl Argmax {
    /// Parameter used when a single choice is needed.
    pub fn representative(&self) -> f64 {
        self.parameters[0]
    }
}

#[derive(Debug, Clone, Copy)]
struct PushedSample {
    s: f64,
    point: PlanePoint,
    jacobian: Mat2,
    height: f64,
    tangent: TangentVector,
}

impl PushedSample {
    fn new(curve: &EssentialCurve, s: f64, point: PlanePoint, jacobian: Mat2) -> Result<Self> {
        Ok(Self {
            s,
            point,
            jacobian,
            height: point.y,
            tangent: jacobian.apply(curve.checked_derivative(s)?),
        })
    }
}

fn push(model: &dyn Isotopy, curve: &EssentialCurve, t: f64, s: f64) -> Result<PushedSample> {
    let (q, jac) = model.lifted_evaluate(t, curve.lifted(s))?;
    PushedSample::new(curve, s, q, jac)
}

fn pushed_turn(a: &PushedSample, b: &PushedSample) -> f64 {
    TurnAngle::principal(
        vertical_angle(b.tangent).map(|x| x.value()).unwrap_or(0.0)
            - vertical_angle(a.tangent).map(|x| x.value()).unwrap_or(0.0),
    )
    .value()
    .abs()
}

/// Inserts samples of `f_t o gamma` until the pushed tangent turns by less
/// than [`VARIATION_STEP`] between neighbours.
fn refine_pushed(
    model: &dyn Isotopy,
    curve: &EssentialCurve,
    t: f64,
    samples: Vec<PushedSample>,
) -> Result<Vec<PushedSample>> {
    let total = samples.len();
    let mut pending: Vec<PushedSample> = samples.into_iter().rev().collect();
    let mut out = Vec::with_capacity(total);
    out.push(pending.pop().expect("samples are non-empty"));
    while let Some(right) = pending.last().copied() {
        let left = *out.last().expect("non-empty");
        if pushed_turn(&left, &right) < VARIATION_STEP {
            out.push(right);
            pending.pop();
            continue;
        }
        if right.s - left.s < 1e-13 || out.len() + pending.len() > MAX_PUSHED_SAMPLES {
            return Err(Error::RotationTooFast {
                t: left.s,
                dt: right.s - left.s,
                increment: pushed_turn(&left, &right),
            });
        }
        pending.push(push(model, curve, t, 0.5 * (left.s + right.s))?);
    }
    Ok(out)
}

fn pushed_samples(model: &dyn Isotopy, curve: &EssentialCurve, t: f64) -> Result<Vec<PushedSample>> {
    let grid = uniform_grid(0.0, 1.0, curve.resolution())
        .into_iter()
        .map(|s| push(model, curve, t, s))
        .collect::<Result<Vec<_>>>()?;
    refine_pushed(model, curve, t, grid)
}

/// Samples at time `t + 1` from samples at time `t`, `t` an integer.
fn advance_pushed(
    model: &dyn Isotopy,
    curve: &EssentialCurve,
    t: f64,
    samples: Vec<PushedSample>,
) -> Result<Vec<PushedSample>> {
    let moved = samples
        .into_iter()
        .map(|p| {
            let (q, m) = model.stage(1.0, p.point)?;
            PushedSample::new(curve, p.s, q, m * p.jacobian)
        })
        .collect::<Result<Vec<_>>>()?;
    refine_pushed(model, curve, t + 1.0, moved)
}

/// Root of the vertical component of the pushed tangent in `[a, b]`, where
/// it goes from positive to non-positive.
fn polish_max(
    model: &dyn Isotopy,
    curve: &EssentialCurve,
    t: f64,
    mut a: f64,
    mut b: f64,
) -> Result<PushedSample> {
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let p = push(model, curve, t, mid)?;
        if p.tangent.dy > 0.0 {
            a = mid;
        } else if p.tangent.dy < 0.0 {
            b = mid;
        } else {
            return Ok(p);
        }
    }
    let pa = push(model, curve, t, a)?;
    let pb = push(model, curve, t, b)?;
    Ok(if pa.tangent.dy.abs() <= pb.tangent.dy.abs() { pa } else { pb })
}

/// All max-height parameters of the pushed curve `f_t o gamma`.
///
/// Dense scan refined by tangent turning, then every sampled local maximum
/// near the top is polished to a point where the pushed tangent is
/// horizontal. A flat maximum is reported as a plateau with all sampled
/// parameters on it.
pub fn max_height_argmax(model: &dyn Isotopy, curve: &EssentialCurve, t: f64) -> Result<Argmax> {
    argmax_from_samples(model, curve, t, &pushed_samples(model, curve, t)?)
}

/// [`max_height_argmax`] at `t = 1, ..., n_max`, pushing the samples of one
/// iterate forward to seed the next.
pub fn max_height_sequence(model: &dyn Isotopy, curve: &EssentialCurve, n_max: u32) -> Result<Vec<Argmax>> {
    let mut out = Vec::with_capacity(n_max as usize);
    let mut samples = pushed_samples(model, curve, 0.0)?;
    for n in 1..=n_max {
        samples = advance_pushed(model, curve, (n - 1) as f64, samples)?;
        out.push(argmax_from_samples(model, curve, n as f64, &samples)?);
    }
    Ok(out)
}

/// Bracket subdivisions tried when a polished maximum turns out to be on
/// a fold that runs against the curve's direction.
const FOLD_SUBDIVISIONS: usize = 32;
const FOLD_DEPTH: usize = 4;

/// Downward crossings of the pushed tangent's vertical component.
fn down_brackets(samples: &[PushedSample]) -> impl Iterator<Item = (PushedSample, PushedSample)> + '_ {
    samples.windows(2).filter_map(|w| {
        let (l, r) = (w[0], w[1]);
        let down = (l.tangent.dy > 0.0 && r.tangent.dy <= 0.0) || (l.tangent.dy == 0.0 && r.tangent.dy < 0.0);
        down.then_some((l, r))
    })
}

/// Polished maxima inside `[l, r]` whose pushed tangent points along the
/// curve's direction, as a global maximum of an embedded essential curve
/// must. A wrong-way maximum means the bracket hides a fold, so the bracket
/// is resampled and searched again.
fn resolve_bracket(
    model: &dyn Isotopy,
    curve: &EssentialCurve,
    t: f64,
    l: PushedSample,
    r: PushedSample,
    floor: f64,
    depth: usize,
) -> Result<Vec<PushedSample>> {
    let p = if r.tangent.dy == 0.0 { r } else { polish_max(model, curve, t, l.s, r.s)? };
    let sign = curve.homotopy_sign() as f64;
    if sign * p.tangent.dx > 0.0 && p.height >= l.height.max(r.height) - ARGMAX_TOLERANCE {
        return Ok(vec![p]);
    }
    if depth >= FOLD_DEPTH || r.s - l.s < 1e-13 {
        return Ok(Vec::new());
    }
    let grid = (0..=FOLD_SUBDIVISIONS)
        .map(|i| {
            if i == 0 {
                Ok(l)
            } else if i == FOLD_SUBDIVISIONS {
                Ok(r)
            } else {
                push(model, curve, t, l.s + (r.s - l.s) * i as f64 / FOLD_SUBDIVISIONS as f64)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let fine = refine_pushed(model, curve, t, grid)?;
    let mut out = Vec::new();
    for (a, b) in down_brackets(&fine) {
        if a.height.max(b.height) >= floor {
            out.extend(resolve_bracket(model, curve, t, a, b, floor, depth + 1)?);
        }
    }
    Ok(out)
}

fn argmax_from_samples(
    model: &dyn Isotopy,
    curve: &EssentialCurve,
    t: f64,
    samples: &[PushedSample],
) -> Result<Argmax> {
    let n = samples.len() - 1; // last sample repeats the first point
    let top = samples[..n].iter().map(|p| p.height).fold(f64::NEG_INFINITY, f64::max);
    let flat: Vec<f64> = samples[..n]
        .iter()
        .filter(|p| p.height >= top - ARGMAX_TOLERANCE)
        .map(|p| p.s)
        .collect();
    if flat.len() > (n / 16).max(8) {
        return Ok(Argmax {
            time: t,
            max_height: top,
            parameters: flat,
            plateau: true,
            samples_used: samples.len(),
        });
    }
    // Bracket-width of the scan bounds how far a local max can sit below
    // the top while still hiding the global one.
    let spread = samples
        .windows(2)
        .map(|w| (w[1].height - w[0].height).abs())
        .fold(0.0, f64::max);
    let floor = top - spread - ARGMAX_TOLERANCE;
    let mut found: Vec<PushedSample> = Vec::new();
    for (l, r) in down_brackets(samples) {
        if l.height.max(r.height) >= floor {
            found.extend(resolve_bracket(model, curve, t, l, r, floor, 0)?);
        }
    }
    let best = found.iter().map(|p| p.height).fold(f64::NEG_INFINITY, f64::max);
    if !(best >= top - ARGMAX_TOLERANCE) {
        let s = samples[..n]
            .iter()
            .max_by(|a, b| a.height.total_cmp(&b.height))
            .map_or(f64::NAN, |p| p.s);
        return Err(Error::Normalisation(format!(
            "max-height point of the curve pushed to t = {t} not resolved near s = {s}"
        )));
    }
    let mut parameters: Vec<f64> = found
        .iter()
        .filter(|p| p.height >= best - ARGMAX_TOLERANCE)
        .map(|p| p.s.rem_euclid(1.0))
        .collect();
    parameters.sort_by(f64::total_cmp);
    parameters.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    if parameters.len() > 1 && parameters[parameters.len() - 1] - parameters[0] > 1.0 - 1e-12 {
        parameters.pop();
    }
    Ok(Argmax {
        time: t,
        max_height: best,
        parameters,
        plateau: false,
        samples_used: samples.len(),
    })
}

/// Max-height parameters of the curve itself.
pub fn curve_argmax(curve: &EssentialCurve) -> Result<Argmax> {
    max_height_argmax(&crate::models::IdentityModel, curve, 0.0)
}

/// One evaluation of `Phi(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiValue {
    pub time: f64,
    pub anchor: f64,
    pub parameter: f64,
    /// `t Torsion_t(f, gamma(s_t), gamma'(s_t))`.
    pub torsion_term: f64,
    /// `Var_gamma(gamma(s0), gamma(s_t))`.
    pub variation_term: f64,
    pub value: f64,
    /// The max-height set at `t` was a plateau; `parameter` is a representative.
    pub plateau: bool,
}

/// `Phi(t)` at a chosen max-height parameter `s_t`.
pub fn phi_at(
    model: &dyn Isotopy,
    curve: &EssentialCurve,
    t: f64,
    anchor: f64,
    s_t: f64,
) -> Result<PhiValue> {
    let torsion_term = if t == 0.0 {
        0.0
    } else {
        torsion_at(model, curve.lifted(s_t), curve.derivative(s_t), t)?.total_variation
    };
    let variation_term = angle_variation(curve, anchor, s_t)?;
    Ok(PhiValue {
        time: t,
        anchor,
        parameter: s_t,
        torsion_term,
        variation_term,
        value: torsion_term + variation_term,
        plateau: false,
    })
}

/// `Phi(t)` at the representative max-height parameter of `f_t o gamma`.
pub fn phi(model: &dyn Isotopy, curve: &EssentialCurve, t: f64, anchor: f64) -> Result<PhiValue> {
    if t == 0.0 {
        return phi_at(model, curve, 0.0, anchor, anchor);
    }
    let argmax = max_height_argmax(model, curve, t)?;
    let mut v = phi_at(model, curve, t, anchor, argmax.representative())?;
    v.plateau = argmax.plateau;
    Ok(v)
}

/// Outcome of the graph test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphTest {
    pub is_graph: bool,
    /// Smallest `|x'| / |gamma'|` over the samples (1 for horizontal curves).
    pub margin: f64,
    /// Where the tangent is vertical or the horizontal component changes sign.
    pub witness: Option<f64>,
}

/// Smallest margin treated as transversal to the vertical.
pub const GRAPH_MARGIN_FLOOR: f64 = 1e-9;

/// Whether the curve is transversal to the vertical at every sample.
pub fn is_graph(curve: &EssentialCurve) -> Result<GraphTest> {
    let m = curve.resolution();
    let ratio = |s: f64| -> Result<f64> {
        let d = curve.checked_derivative(s)?;
        Ok(d.dx / d.norm())
    };
    let values: Vec<(f64, f64)> = (0..=m)
        .map(|i| {
            let s = i as f64 / m as f64;
            Ok((s, ratio(s)?))
        })
        .collect::<Result<_>>()?;
    let (mut margin, mut at) = (f64::INFINITY, 0.0);
    for &(s, r) in &values {
        if r.abs() < margin {
            margin = r.abs();
            at = s;
        }
    }
    for w in values.windows(2) {
        let ((mut a, ra), (mut b, rb)) = (w[0], w[1]);
        if ra * rb < 0.0 {
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if ratio(mid)? * ra > 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            return Ok(GraphTest {
                is_graph: false,
                margin: 0.0,
                witness: Some(0.5 * (a + b)),
            });
        }
    }
    if margin < GRAPH_MARGIN_FLOOR {
        return Ok(GraphTest {
            is_graph: false,
            margin,
            witness: Some(at),
        });
    }
    Ok(GraphTest {
        is_graph: true,
        margin,
        witness: None,
    })
}

/// Outcome of checking `Var = 0` between max-height parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MaxHeightVarCheck {
    /// Fewer than two isolated maxima.
    Vacuous { maxima: usize },
    /// The maximum is a plateau; nothing is checked.
    SkippedPlateau,
    Checked {
        maxima: Vec<f64>,
        /// Largest `|Var|` over all ordered pairs.
        worst: f64,
        pass: bool,
    },
}

/// Checks `Var_gamma(gamma(s0), gamma(s1)) = 0` for every pair of max-height
/// parameters of the curve, within `tol`.
pub fn maxheight_var_zero_check(curve: &EssentialCurve, tol: f64) -> Result<MaxHeightVarCheck> {
    let argmax = curve_argmax(curve)?;
    if argmax.plateau {
        return Ok(MaxHeightVarCheck::SkippedPlateau);
    }
    let maxima = argmax.parameters;
    if maxima.len() < 2 {
        return Ok(MaxHeightVarCheck::Vacuous { maxima: maxima.len() });
    }
    let mut worst: f64 = 0.0;
    for &a in &maxima {
        for &b in &maxima {
            worst = worst.max(angle_variation(curve, a, b)?.abs());
        }
    }
    Ok(MaxHeightVarCheck::Checked {
        maxima,
        worst,
        pass: worst <= tol,
    })
}

/// Parameter of the point of the curve closest to `p` (in the annulus), and
/// the distance.
pub fn nearest_parameter(curve: &EssentialCurve, p: AnnulusPoint) -> (f64, f64) {
    let dist = |s: f64| -> f64 {
        let q = curve.position(s);
        let mut dx = (q.x - p.x).rem_euclid(1.0);
        if dx > 0.5 {
            dx -= 1.0;
        }
        (dx * dx + (q.y - p.y).powi(2)).sqrt()
    };
    let m = curve.resolution();
    let step = 1.0 / m as f64;
    let (mut best_s, mut best_d) = (0.0, f64::INFINITY);
    for i in 0..m {
        let s = i as f64 * step;
        let d = dist(s);
        if d < best_d {
            best_s = s;
            best_d = d;
        }
    }
    let (s, neg) = golden_max(|s| -dist(s), best_s - step, best_s + step);
    (s.rem_euclid(1.0), -neg)
}
