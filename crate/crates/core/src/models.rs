//! Isotopies joining the identity to a map of the annulus (or, for the rigid
//! rotation, of the plane).
//!
//! Every model provides the unit-interval stage `F_s`, `s` in `[0, 1]`, with
//! its Jacobian. Longer times follow the extension rule
//! `f_t = f_{frac(t)} o f^{floor(t)}`, implemented once in the provided
//! methods of [`Isotopy`].

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnnulusPoint, Mat2, PlanePoint, TangentVector, lift_point, project_point, nearest_lift, vertical_angle};

/// Name and parameters of a model, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub name: String,
    pub parameters: Vec<(String, f64)>,
}

impl ModelDescriptor {
    fn new(name: &str, parameters: &[(&str, f64)]) -> Self {
        Self {
            name: name.to_string(),
            parameters: parameters
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        }
    }
}

/// An isotopy `(F_t)` in the plane, extended to all `t >= 0`.
pub trait Isotopy: Send + Sync {
    fn descriptor(&self) -> ModelDescriptor;

    /// True when every `F_t` commutes with the deck translation `(1, 0)`,
    /// i.e. the model is the lift of an annulus isotopy.
    fn covers_annulus(&self) -> bool {
        true
    }

    /// `F_s(p)` and `DF_s(p)` for `s` in `[0, 1]`.
    ///
    /// For models that cover the annulus, `p` is always on sheet 0.
    fn unit_stage(&self, s: f64, p: PlanePoint) -> Result<(PlanePoint, Mat2)>;

    /// [`Isotopy::unit_stage`] at each of the increasing `times` in `[0, 1]`.
    fn unit_stage_path(&self, p: PlanePoint, times: &[f64]) -> Result<Vec<(PlanePoint, Mat2)>> {
        times.iter().map(|&s| self.unit_stage(s, p)).collect()
    }

    /// Uniform samples per unit time used when tracking tangent angles.
    fn samples_per_unit(&self) -> usize {
        32
    }

    /// Stage on an arbitrary sheet.
    fn stage(&self, s: f64, p: PlanePoint) -> Result<(PlanePoint, Mat2)> {
        if self.covers_annulus() {
            let (q, m) = self.unit_stage(s, p.translate(-p.sheet()))?;
            Ok((q.translate(p.sheet()), m))
        } else {
            self.unit_stage(s, p)
        }
    }

    fn stage_path(&self, p: PlanePoint, times: &[f64]) -> Result<Vec<(PlanePoint, Mat2)>> {
        if self.covers_annulus() {
            let k = p.sheet();
            let path = self.unit_stage_path(p.translate(-k), times)?;
            Ok(path.into_iter().map(|(q, m)| (q.translate(k), m)).collect())
        } else {
            self.unit_stage_path(p, times)
        }
    }

    /// `F_t(p)` and `DF_t(p)` for any `t >= 0`.
    fn lifted_evaluate(&self, t: f64, p: PlanePoint) -> Result<(PlanePoint, Mat2)> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("time must be finite and >= 0, got {t}")));
        }
        let whole = t.floor();
        let frac = t - whole;
        let mut q = p;
        let mut jac = Mat2::IDENTITY;
        for _ in 0..(whole as u64) {
            let (next, m) = self.stage(1.0, q)?;
            q = next;
            jac = m * jac;
        }
        if frac > 0.0 {
            let (next, m) = self.stage(frac, q)?;
            q = next;
            jac = m * jac;
        }
        Ok((q, jac))
    }

    fn evaluate(&self, t: f64, p: AnnulusPoint) -> Result<AnnulusPoint> {
        Ok(project_point(self.lifted_evaluate(t, lift_point(p, 0))?.0))
    }

    fn jacobian(&self, t: f64, p: AnnulusPoint) -> Result<Mat2> {
        Ok(self.lifted_evaluate(t, lift_point(p, 0))?.1)
    }
}

/// `f_t = Id` for all `t`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityModel;

impl Isotopy for IdentityModel {
    fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor::new("identity", &[])
    }

    fn unit_stage(&self, _s: f64, p: PlanePoint) -> Result<(PlanePoint, Mat2)> {
        Ok((p, Mat2::IDENTITY))
    }
}

/// Rigid horizontal translation `f_t(x, y) = (x + rate t, y)`.
#[derive(Debug, Clone, Copy)]
pub struct TranslationModel {
    pub rate: f64,
}

impl Isotopy for TranslationModel {
    fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor::new("translation", &[("rate", self.rate)])
    }

    fn unit_stage(&self, s: f64, p: PlanePoint) -> Result<(PlanePoint, Mat2)> {
        Ok((p.displace(self.rate * s, 0.0), Mat2::IDENTITY))
    }
}

/// Rotation of the plane by `rate * t` turns about `center`.
///
/// Only a plane isotopy: it does not descend to the annulus.
#[derive(Debug, Clone, Copy)]
pub struct RigidRotationModel {
    pub rate: f64,
    pub center: (f64, f64),
}

impl RigidRotationModel {
    pub fn new(rate: f64) -> Self {
        Self {
            rate,
            center: (0.0, 0.0),
        }
    }

    pub fn about(rate: f64, cx: f64, cy: f64) -> Self {
        Self {
            rate,
            center: (cx, cy),
        }
    }
}

impl Isotopy for RigidRotationModel {
    fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor::new(
            "rigid-rotation",
            &[
                ("rate", self.rate),
                ("center_x", self.center.0),
                ("center_y", self.center.1),
            ],
        )
    }

    fn covers_annulus(&self) -> bool {
        false
    }

    fn unit_stage(&self, s: f64, p: PlanePoint) -> Result<(PlanePoint, Mat2)> {
        let rot = Mat2::rotation(self.rate * s);
        let center = PlanePoint::new(self.center.0, self.center.1);
        let rel = center.chord_to(&p);
        let img = rot.apply(rel);
        Ok((center.displace(img.dx, img.dy), rot))
    }

    fn samples_per_unit(&self) -> usize {
        (8.0 * self.rate.abs()).ceil().max(32.0) as usize
    }
}

/// Kick function `g(x) = sum_j sin_j sin(2 pi j x) + cos_j cos(2 pi j x)`,
/// coefficients indexed from `j = 1`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KickPolynomial {
    #[serde(default)]
    pub sin: Vec<f64>,
    #[serde(default)]
    pub cos: Vec<f64>,
}

impl KickPolynomial {
    pub fn value(&self, x: f64) -> f64 {
        let mut v = 0.0;
        for (j, a) in self.sin.iter().enumerate() {
            v += a * (TAU * (j + 1) as f64 * x).sin();
        }
        for (j, b) in self.cos.iter().enumerate() {
            v += b * (TAU * (j + 1) as f64 * x).cos();
        }
        v
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let mut v = 0.0;
        for (j, a) in self.sin.iter().enumerate() {
            let w = TAU * (j + 1) as f64;
            v += a * w * (w * x).cos();
        }
        for (j, b) in self.cos.iter().enumerate() {
            let w = TAU * (j + 1) as f64;
            v -= b * w * (w * x).sin();
        }
        v
    }
}

/// Order of the two shear stages of a twist-map isotopy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IsotopyOrder {
    /// Kick `V_s` on `[0, 1/2]`, then horizontal shear `H_s`.
    VerticalFirst,
    /// Horizontal shear `H_s` on `[0, 1/2]`, then the conjugated kick
    /// `H o V_s o H^-1`.
    HorizontalFirst,
}

/// Positive twist map `F(X, Y) = (X + Y', Y')`, `Y' = Y - g(X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistMapModel {
    pub kick: KickPolynomial,
    pub order: IsotopyOrder,
}

impl TwistMapModel {
    /// Standard-map kick `g(X) = (k / 2 pi) sin(2 pi X)`.
    pub fn standard(k: f64) -> Self {
        Self {
            kick: KickPolynomial {
                sin: vec![k / TAU],
                cos: vec![],
            },
            order: IsotopyOrder::VerticalFirst,
        }
    }

    pub fn with_kick(kick: KickPolynomial) -> Self {
        Self {
            kick,
            order: IsotopyOrder::VerticalFirst,
        }
    }

    /// Same map, other isotopy.
    pub fn isotopy_variant(&self, order: IsotopyOrder) -> Self {
        Self {
            kick: self.kick.clone(),
            order,
        }
    }

    fn kick_stage(&self, s: f64, x: f64, y: f64) -> (f64, f64, Mat2) {
        let g = self.kick.value(x);
        let dg = self.kick.derivative(x);
        (x, y - s * g, Mat2::new(1.0, 0.0, -s * dg, 1.0))
    }

    fn conjugated_kick_stage(&self, s: f64, x: f64, y: f64) -> (f64, f64, Mat2) {
        let u = x - y;
        let g = s * self.kick.value(u);
        let dg = s * self.kick.derivative(u);
        (x - g, y - g, Mat2::new(1.0 - dg, dg, -dg, 1.0 + dg))
    }
}

fn shear(s: f64, x: f64, y: f64) -> (f64, f64, Mat2) {
    (x + s * y, y, Mat2::new(1.0, s, 0.0, 1.0))
}

impl Isotopy for TwistMapModel {
    fn descriptor(&self) -> ModelDescriptor {
        let mut params = Vec::new();
        for (j, a) in self.kick.sin.iter().enumerate() {
            params.push((format!("sin{}", j + 1), *a));
        }
        for (j, b) in self.kick.cos.iter().enumerate() {
            params.push((format!("cos{}", j + 1), *b));
        }
        let name = match self.order {
            IsotopyOrder::VerticalFirst => "twist-map",
            IsotopyOrder::HorizontalFirst => "twist-map/horizontal-first",
        };
        ModelDescriptor {
            name: name.to_string(),
            parameters: params,
        }
    }

    fn unit_stage(&self, s: f64, p: PlanePoint) -> Result<(PlanePoint, Mat2)> {
        let (x, y) = (p.offset(), p.y);
        let (x1, y1, m) = match self.order {
            IsotopyOrder::VerticalFirst => {
                if s <= 0.5 {
                    self.kick_stage(2.0 * s, x, y)
                } else {
                    let (xa, ya, ma) = self.kick_stage(1.0, x, y);
                    let (xb, yb, mb) = shear(2.0 * s - 1.0, xa, ya);
                    (xb, yb, mb * ma)
                }
            }
            IsotopyOrder::HorizontalFirst => {
                if s <= 0.5 {
                    shear(2.0 * s, x, y)
                } else {
                    let (xa, ya, ma) = shear(1.0, x, y);
                    let (xb, yb, mb) = self.conjugated_kick_stage(2.0 * s - 1.0, xa, ya);
                    (xb, yb, mb * ma)
                }
            }
        };
        Ok((PlanePoint::new(x1, y1).translate(p.sheet()), m))
    }
}

/// Named stiffness presets for the pendulum.
pub const PAPER_STIFFNESS: f64 = 1.0 / (4.0 * PI * PI);
pub const UNIT_PERIOD_STIFFNESS: f64 = 1.0;

/// Time-t flow of `H(theta, r) = r^2/2 - c cos(2 pi theta)`, integrated with
/// classical RK4 jointly with the variational equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumModel {
    stiffness: f64,
    steps_per_unit: usize,
}

type PendulumState = [f64; 6];

impl PendulumModel {
    pub const DEFAULT_STEP: f64 = 1e-3;

    pub fn new(stiffness: f64, step: f64) -> Result<Self> {
        if !(stiffness > 0.0) || !stiffness.is_finite() {
            return Err(Error::Domain(format!("stiffness must be > 0, got {stiffness}")));
        }
        if !(step > 0.0) || step > 1.0 {
            return Err(Error::Domain(format!("step must be in (0, 1], got {step}")));
        }
        let steps_per_unit = (1.0 / step).round().max(1.0) as usize;
        Ok(Self {
            stiffness,
            steps_per_unit,
        })
    }

    /// `c = 1/(4 pi^2)`: elliptic frequency 1 radian per unit time.
    pub fn paper() -> Self {
        Self::new(PAPER_STIFFNESS, Self::DEFAULT_STEP).unwrap()
    }

    /// `c = 1`: small oscillations have period 1.
    pub fn unit_period() -> Self {
        Self::new(UNIT_PERIOD_STIFFNESS, Self::DEFAULT_STEP).unwrap()
    }

    pub fn stiffness(&self) -> f64 {
        self.stiffness
    }

    /// Integrator step actually used (1 / steps per unit time).
    pub fn step(&self) -> f64 {
        1.0 / self.steps_per_unit as f64
    }

    pub fn energy(&self, p: AnnulusPoint) -> f64 {
        0.5 * p.y * p.y - self.stiffness * (TAU * p.x).cos()
    }

    /// Energy of the separatrix through the hyperbolic point `(1/2, 0)`.
    pub fn separatrix_energy(&self) -> f64 {
        self.stiffness
    }

    /// Point on `theta = 0` with energy `h`, `r > 0`.
    pub fn point_at_energy(&self, h: f64) -> Result<AnnulusPoint> {
        let r2 = 2.0 * (h + self.stiffness);
        if r2 < 0.0 {
            return Err(Error::Domain(format!("energy {h} is below the minimum")));
        }
        Ok(AnnulusPoint::new(0.0, r2.sqrt()))
    }

    fn rhs(&self, s: &PendulumState) -> PendulumState {
        let (sn, cs) = (TAU * s[0]).sin_cos();
        let force = -TAU * self.stiffness * sn;
        let k = -TAU * TAU * self.stiffness * cs;
        // J' = A J with A = [[0, 1], [k, 0]]
        [s[1], force, s[4], s[5], k * s[2], k * s[3]]
    }

    fn rk4(&self, s: &PendulumState, dt: f64) -> PendulumState {
        let add = |a: &PendulumState, b: &PendulumState, h: f64| {
            let mut out = *a;
            for i in 0..6 {
                out[i] += h * b[i];
            }
            out
        };
        let k1 = self.rhs(s);
        let k2 = self.rhs(&add(s, &k1, 0.5 * dt));
        let k3 = self.rhs(&add(s, &k2, 0.5 * dt));
        let k4 = self.rhs(&add(s, &k3, dt));
        let mut out = *s;
        for i in 0..6 {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }

    /// Splits `s` into whole RK4 steps and a remainder.
    fn split_time(&self, s: f64) -> (usize, f64) {
        let m = self.steps_per_unit as f64;
        let scaled = s * m;
        let mut whole = scaled.floor();
        if scaled - whole > 1.0 - 1e-9 {
            whole += 1.0;
        }
        let rem = s - whole / m;
        let rem = if rem.abs() * m < 1e-9 { 0.0 } else { rem };
        (whole as usize, rem)
    }

    fn finish(&self, p: PlanePoint, st: &PendulumState) -> (PlanePoint, Mat2) {
        (
            PlanePoint::new(st[0], st[1]).translate(p.sheet()),
            Mat2::new(st[2], st[3], st[4], st[5]),
        )
    }

    /// Flow for time `t` with its variational matrix.
    pub fn flow_with_variational(&self, p: AnnulusPoint, t: f64) -> Result<(AnnulusPoint, Mat2)> {
        let (q, m) = self.lifted_evaluate(t, lift_point(p, 0))?;
        Ok((project_point(q), m))
    }

    /// Period of an orbit strictly inside the separatrix region, other than
    /// the elliptic point.
    ///
    /// The section is the ray from the elliptic point through `p`; the return
    /// time is when the polar angle about `(0, 0)` has decreased by a full
    /// turn, located by sign change then bisection inside the step.
    pub fn orbit_period(&self, p: AnnulusPoint) -> Result<f64> {
        let h = self.energy(p);
        if !(h < self.separatrix_energy()) {
            return Err(Error::Domain(format!(
                "point {:?} is not inside the separatrix region (H = {h})",
                p
            )));
        }
        let theta = if p.x > 0.5 { p.x - 1.0 } else { p.x };
        if theta == 0.0 && p.y == 0.0 {
            return Err(Error::Domain("the elliptic point has no orbit period".into()));
        }
        let polar = |st: &PendulumState| {
            vertical_angle(TangentVector::new(st[0], st[1]))
                .expect("nonzero state")
        };
        let dt = self.step();
        let mut state: PendulumState = [theta, p.y, 1.0, 0.0, 0.0, 1.0];
        let start = polar(&state).value();
        let target = start - 1.0;
        let mut lift = start;
        let mut time = 0.0;
        let max_steps = (1e7 / dt.max(1e-12)) as u64;
        for _ in 0..max_steps {
            let next = self.rk4(&state, dt);
            let next_lift = nearest_lift(lift, polar(&next));
            if next_lift <= target {
                let (mut lo, mut hi) = (0.0, dt);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let probe = self.rk4(&state, mid);
                    let l = nearest_lift(lift, polar(&probe));
                    if l <= target {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo < 1e-15 {
                        break;
                    }
                }
                return Ok(time + 0.5 * (lo + hi));
            }
            state = next;
            lift = next_lift;
            time += dt;
        }
        Err(Error::StepUnderflow { t: time })
    }
}

impl Isotopy for PendulumModel {
    fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor::new(
            "pendulum",
            &[("stiffness", self.stiffness), ("step", self.step())],
        )
    }

    fn unit_stage(&self, s: f64, p: PlanePoint) -> Result<(PlanePoint, Mat2)> {
        Ok(self
            .unit_stage_path(p, &[s])?
            .pop()
            .expect("one sample requested"))
    }

    fn unit_stage_path(&self, p: PlanePoint, times: &[f64]) -> Result<Vec<(PlanePoint, Mat2)>> {
        let dt = self.step();
        let x0 = p.offset();
        let mut state: PendulumState = [x0, p.y, 1.0, 0.0, 0.0, 1.0];
        let mut done = 0usize;
        let mut out = Vec::with_capacity(times.len());
        for &s in times {
            let (whole, rem) = self.split_time(s);
            if whole < done {
                return Err(Error::Domain("sample times must be increasing".into()));
            }
            while done < whole {
                state = self.rk4(&state, dt);
                done += 1;
            }
            let sampled = if rem > 0.0 { self.rk4(&state, rem) } else { state };
            if !sampled.iter().all(|v| v.is_finite()) {
                return Err(Error::StepUnderflow { t: s });
            }
            out.push(self.finish(p, &sampled));
        }
        Ok(out)
    }

    fn samples_per_unit(&self) -> usize {
        // The tangent angle turns at most ||A|| / 2 pi turns per unit time.
        let rate = (TAU * TAU * self.stiffness).max(1.0) / TAU;
        ((16.0 * rate).ceil() as usize).max(32)
    }
}
