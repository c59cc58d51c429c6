//! Continuous angle determinations along an isotopy, finite-time and
//! asymptotic torsion, and finite-time linking numbers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{vertical_angle, AnnulusPoint, PlanePoint, TangentVector, TurnAngle, lift_point};
use crate::models::Isotopy;
use crate::unwrap::{lift_samples, refine, uniform_grid, AngleSample};

impl From<AnnulusPoint> for PlanePoint {
    fn from(p: AnnulusPoint) -> Self {
        lift_point(p, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeterminationOptions {
    /// Adjacent samples must turn by strictly less than this many turns.
    pub max_step_rotation: f64,
    /// Refinement floor for the time step.
    pub min_dt: f64,
    /// Integer added to the principal initial angle.
    pub branch_shift: i64,
}

impl Default for DeterminationOptions {
    fn default() -> Self {
        Self {
            max_step_rotation: 0.25,
            min_dt: 1e-9,
            branch_shift: 0,
        }
    }
}

/// Sampled continuous lift of `t -> angle(chi, Df_t(x) xi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleDetermination {
    /// `(t, lift)` pairs, increasing in `t`, starting at `t = 0`, on the
    /// principal branch (initial lift in `(-1/2, 1/2]`).
    pub samples: Vec<(f64, f64)>,
    /// Principal-branch lift at `t = 0, 1, ..., floor(horizon)`.
    pub unit_lifts: Vec<f64>,
    /// Integer added to every lift to obtain the requested branch.
    pub branch_shift: i64,
    pub base_point: PlanePoint,
    pub base_vector: TangentVector,
    pub max_step_rotation: f64,
    pub horizon: f64,
}

impl AngleDetermination {
    pub fn initial(&self) -> f64 {
        self.samples[0].1 + self.branch_shift as f64
    }

    pub fn final_lift(&self) -> f64 {
        self.samples.last().expect("non-empty").1 + self.branch_shift as f64
    }

    /// `lift(horizon) - lift(0)`; independent of the branch.
    pub fn variation(&self) -> f64 {
        self.samples.last().expect("non-empty").1 - self.samples[0].1
    }

    /// `m Torsion_m` for `m = 1..` up to the horizon.
    pub fn unit_variations(&self) -> Vec<f64> {
        let l0 = self.unit_lifts[0];
        self.unit_lifts[1..].iter().map(|l| l - l0).collect()
    }
}

fn tangent_angle(v: TangentVector) -> Result<TurnAngle> {
    vertical_angle(v)
}

fn normalised(v: TangentVector) -> TangentVector {
    v.scale(1.0 / v.norm())
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Domain(format!("horizon must be finite and > 0, got {horizon}")));
    }
    Ok(())
}

/// Continuous determination of the angle between the vertical and
/// `Df_t(x) xi` for `t` in `[0, horizon]`.
pub fn angle_determination(
    model: &dyn Isotopy,
    x: impl Into<PlanePoint>,
    xi: TangentVector,
    horizon: f64,
    opts: &DeterminationOptions,
) -> Result<AngleDetermination> {
    check_horizon(horizon)?;
    if xi.is_zero() {
        return Err(Error::ZeroVector);
    }
    let x = x.into();
    let start = tangent_angle(xi)?.value();
    let mut samples = vec![(0.0, start)];
    let mut unit_lifts = vec![start];
    let mut lift = start;
    let mut q = x;
    let mut w = normalised(xi);
    let per_unit = model.samples_per_unit();
    let units = horizon.ceil() as u64;
    for i in 0..units {
        let len = (horizon - i as f64).min(1.0);
        let times: Vec<f64> = uniform_grid(0.0, len, per_unit)[1..].to_vec();
        let path = model.stage_path(q, &times)?;
        let mut raw = Vec::with_capacity(times.len() + 1);
        raw.push(AngleSample { s: 0.0, angle: tangent_angle(w)?, extra: () });
        for (&s, (_, jac)) in times.iter().zip(&path) {
            raw.push(AngleSample { s, angle: tangent_angle(jac.apply(w))?, extra: () });
        }
        let base = q;
        let refined = refine(raw, opts.max_step_rotation, opts.min_dt, |s| {
            let (_, jac) = model.stage(s, base)?;
            Ok((tangent_angle(jac.apply(w))?, ()))
        })
        .map_err(|e| match e {
            Error::RotationTooFast { t, dt, increment } => Error::RotationTooFast {
                t: t + i as f64,
                dt,
                increment,
            },
            other => other,
        })?;
        let lifts = lift_samples(&refined, lift);
        for (smp, l) in refined.iter().zip(&lifts).skip(1) {
            samples.push((i as f64 + smp.s, *l));
        }
        lift = *lifts.last().expect("non-empty");
        if len == 1.0 {
            let (q_end, jac_end) = *path.last().expect("grid ends at 1");
            q = q_end;
            w = normalised(jac_end.apply(w));
            unit_lifts.push(lift);
        }
    }
    Ok(AngleDetermination {
        samples,
        unit_lifts,
        branch_shift: opts.branch_shift,
        base_point: x,
        base_vector: xi,
        max_step_rotation: opts.max_step_rotation,
        horizon,
    })
}

/// Torsion over a horizon: `value * horizon = lift(horizon) - lift(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorsionValue {
    pub horizon: f64,
    pub value: f64,
    pub total_variation: f64,
}

/// `Torsion_n(f, x, xi)` at a real horizon `t > 0`.
pub fn torsion_at(
    model: &dyn Isotopy,
    x: impl Into<PlanePoint>,
    xi: TangentVector,
    t: f64,
) -> Result<TorsionValue> {
    let det = angle_determination(model, x, xi, t, &DeterminationOptions::default())?;
    let total = det.variation();
    Ok(TorsionValue {
        horizon: t,
        value: total / t,
        total_variation: total,
    })
}

/// `Torsion_n(f, x, xi)` for a positive integer `n`.
pub fn torsion_finite(
    model: &dyn Isotopy,
    x: impl Into<PlanePoint>,
    xi: TangentVector,
    n: u32,
) -> Result<TorsionValue> {
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    torsion_at(model, x, xi, n as f64)
}

/// `m Torsion_m(f, x, xi)` for `m = 1..=n`, from a single determination.
pub fn torsion_profile(
    model: &dyn Isotopy,
    x: impl Into<PlanePoint>,
    xi: TangentVector,
    n: u32,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    let det = angle_determination(model, x, xi, n as f64, &DeterminationOptions::default())?;
    Ok(det.unit_variations())
}

/// Estimate of the asymptotic torsion from the tail of `Torsion_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticTorsion {
    /// `Torsion_{n_max}`.
    pub estimate: f64,
    /// Whether the last `window` values spread by less than the tolerance.
    /// Says nothing about the existence of the limit.
    pub converged: bool,
    pub spread: f64,
    /// `(n, Torsion_n)` for the last `window` horizons.
    pub tail: Vec<(u32, f64)>,
}

pub const DEFAULT_CONVERGENCE_TOL: f64 = 1e-3;
pub const DEFAULT_CONVERGENCE_WINDOW: u32 = 10;

pub fn torsion_asymptotic(
    model: &dyn Isotopy,
    x: impl Into<PlanePoint>,
    xi: TangentVector,
    n_max: u32,
    window: u32,
    tol: f64,
) -> Result<AsymptoticTorsion> {
    if window == 0 || n_max < 2 * window {
        return Err(Error::Domain(format!(
            "need n_max >= 2 * window > 0 (n_max = {n_max}, window = {window})"
        )));
    }
    let profile = torsion_profile(model, x, xi, n_max)?;
    let tail: Vec<(u32, f64)> = ((n_max - window + 1)..=n_max)
        .map(|n| (n, profile[(n - 1) as usize] / n as f64))
        .collect();
    let lo = tail.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    let hi = tail.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(AsymptoticTorsion {
        estimate: tail.last().expect("window > 0").1,
        converged: hi - lo < tol,
        spread: hi - lo,
        tail,
    })
}

pub const COLLISION_DISTANCE: f64 = 1e-12;

/// `Linking_t(I, x, y)` at a real horizon, from the chord `F_t(y) - F_t(x)`.
pub fn linking_at(model: &dyn Isotopy, x: PlanePoint, y: PlanePoint, horizon: f64) -> Result<f64> {
    check_horizon(horizon)?;
    let opts = DeterminationOptions::default();
    let chord_angle = |a: &PlanePoint, b: &PlanePoint, t: f64| -> Result<TurnAngle> {
        let c = a.chord_to(b);
        let sep = c.norm();
        if sep < COLLISION_DISTANCE {
            return Err(Error::OrbitCollision { t, separation: sep });
        }
        tangent_angle(c)
    };
    let start = chord_angle(&x, &y, 0.0)?.value();
    let mut lift = start;
    let (mut qx, mut qy) = (x, y);
    let per_unit = model.samples_per_unit();
    let units = horizon.ceil() as u64;
    for i in 0..units {
        let len = (horizon - i as f64).min(1.0);
        let times: Vec<f64> = uniform_grid(0.0, len, per_unit)[1..].to_vec();
        let px = model.stage_path(qx, &times)?;
        let py = model.stage_path(qy, &times)?;
        let t0 = i as f64;
        let mut raw = Vec::with_capacity(times.len() + 1);
        raw.push(AngleSample { s: 0.0, angle: chord_angle(&qx, &qy, t0)?, extra: () });
        for ((&s, (a, _)), (b, _)) in times.iter().zip(&px).zip(&py) {
            raw.push(AngleSample { s, angle: chord_angle(a, b, t0 + s)?, extra: () });
        }
        let (bx, by) = (qx, qy);
        let refined = refine(raw, opts.max_step_rotation, opts.min_dt, |s| {
            let (a, _) = model.stage(s, bx)?;
            let (b, _) = model.stage(s, by)?;
            Ok((chord_angle(&a, &b, t0 + s)?, ()))
        })?;
        lift = *lift_samples(&refined, lift).last().expect("non-empty");
        if len == 1.0 {
            qx = px.last().expect("grid ends at 1").0;
            qy = py.last().expect("grid ends at 1").0;
        }
    }
    Ok((lift - start) / horizon)
}

/// `Linking_n(I, x, y)` for a positive integer `n`.
pub fn linking_finite(model: &dyn Isotopy, x: PlanePoint, y: PlanePoint, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("n must be positive".into()));
    }
    linking_at(model, x, y, n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{HORIZONTAL, VERTICAL};
    use crate::models::{IdentityModel, IsotopyOrder, PendulumModel, RigidRotationModel, TwistMapModel};
    use approx::assert_abs_diff_eq;

    #[test]
    fn rigid_rotation_determination() {
        let m = RigidRotationModel::new(0.3);
        let d = angle_determination(&m, PlanePoint::new(0.2, 0.4), VERTICAL, 2.0, &Default::default()).unwrap();
        assert_abs_diff_eq!(d.variation(), 0.6, epsilon = 1e-12);
        for w in d.samples.windows(2) {
            assert!((w[1].1 - w[0].1).abs() < 0.25);
        }
    }

    #[test]
    fn fast_rigid_rotation_is_not_aliased() {
        // 5.3 turns per unit with only the default sample grid
        let m = RigidRotationModel::new(-5.3);
        let t = torsion_finite(&m, PlanePoint::new(0.0, 0.0), HORIZONTAL, 3).unwrap();
        assert_abs_diff_eq!(t.value, -5.3, epsilon = 1e-12);
    }

    #[test]
    fn identity_determination_is_constant() {
        let d = angle_determination(&IdentityModel, AnnulusPoint::new(0.3, 1.0), TangentVector::new(1.0, 2.0), 3.5, &Default::default()).unwrap();
        assert!(d.samples.iter().all(|s| s.1 == d.initial()));
        assert_eq!(d.unit_lifts.len(), 4);
    }

    #[test]
    fn integrable_shear_torsion_is_minus_one_eighth() {
        // Oracle: the stage Jacobians are [[1,0],[0,1]] then [[1,s],[0,1]];
        // chi goes to (s, 1), angle -atan(s)/(2 pi), monotone in s.
        let m = TwistMapModel::standard(0.0);
        let t = torsion_finite(&m, AnnulusPoint::new(0.0, 0.0), VERTICAL, 1).unwrap();
        assert_abs_diff_eq!(t.value, -0.125, epsilon = 1e-15);
        // n iterations: chi -> (n, 1)
        let t5 = torsion_finite(&m, AnnulusPoint::new(0.3, 2.0), VERTICAL, 5).unwrap();
        let oracle = -(5.0f64).atan() / std::f64::consts::TAU;
        assert_abs_diff_eq!(t5.total_variation, oracle, epsilon = 1e-14);
    }

    #[test]
    fn branch_shift_leaves_torsion_unchanged() {
        let m = TwistMapModel::standard(0.8);
        let p = AnnulusPoint::new(0.13, 0.4);
        let a = angle_determination(&m, p, VERTICAL, 7.0, &Default::default()).unwrap();
        let opts = DeterminationOptions { branch_shift: 3, ..Default::default() };
        let b = angle_determination(&m, p, VERTICAL, 7.0, &opts).unwrap();
        assert_eq!(a.variation(), b.variation());
        assert_eq!(b.initial() - a.initial(), 3.0);
    }

    #[test]
    fn unit_lifts_match_separate_horizons() {
        let m = TwistMapModel::standard(0.6).isotopy_variant(IsotopyOrder::HorizontalFirst);
        let p = AnnulusPoint::new(0.71, -0.2);
        let xi = TangentVector::new(0.3, -1.0);
        let prof = torsion_profile(&m, p, xi, 6).unwrap();
        for n in 1..=6u32 {
            let t = torsion_finite(&m, p, xi, n).unwrap();
            assert_abs_diff_eq!(t.total_variation, prof[(n - 1) as usize], epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_vector_rejected() {
        let r = torsion_finite(&IdentityModel, AnnulusPoint::new(0.0, 0.0), TangentVector::new(0.0, 0.0), 1);
        assert_eq!(r, Err(Error::ZeroVector));
    }

    #[test]
    fn unit_pendulum_elliptic_point_turns_once() {
        // Linearisation at (0,0): harmonic oscillator of period 1 turning clockwise.
        let m = PendulumModel::unit_period();
        let d = angle_determination(&m, AnnulusPoint::new(0.0, 0.0), VERTICAL, 1.0, &Default::default()).unwrap();
        assert_abs_diff_eq!(d.variation(), -1.0, epsilon = 1e-9);
    }

    #[test]
    fn asymptotic_requires_long_enough_run() {
        let r = torsion_asymptotic(&IdentityModel, AnnulusPoint::new(0.0, 0.0), VERTICAL, 15, 10, 1e-3);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn asymptotic_rigid_rotation_is_exact() {
        let m = RigidRotationModel::about(0.37, 1.0, -2.0);
        let a = torsion_asymptotic(&m, PlanePoint::new(0.5, 0.5), VERTICAL, 40, 10, 1e-3).unwrap();
        assert!(a.converged);
        for (_, v) in &a.tail {
            assert_abs_diff_eq!(*v, 0.37, epsilon = 1e-12);
        }
    }

    #[test]
    fn linking_of_deck_translates_vanishes() {
        let m = TwistMapModel::standard(0.9);
        for n in [1, 4, 9] {
            let l = linking_finite(&m, PlanePoint::new(0.0, 0.5), PlanePoint::new(1.0, 0.5), n).unwrap();
            assert_eq!(l, 0.0);
        }
    }

    #[test]
    fn linking_under_rigid_rotation() {
        let m = RigidRotationModel::about(0.21, 0.5, 1.0);
        let l = linking_finite(&m, PlanePoint::new(0.0, 1.0), PlanePoint::new(1.0, 1.0), 3).unwrap();
        assert_abs_diff_eq!(l, 0.21, epsilon = 1e-12);
        let l0 = linking_finite(&IdentityModel, PlanePoint::new(0.0, 1.0), PlanePoint::new(0.3, 2.0), 3).unwrap();
        assert_eq!(l0, 0.0);
    }

    #[test]
    fn linking_detects_collision() {
        let r = linking_finite(&IdentityModel, PlanePoint::new(0.2, 1.0), PlanePoint::new(0.2, 1.0), 1);
        assert!(matches!(r, Err(Error::OrbitCollision { .. })));
    }
}
