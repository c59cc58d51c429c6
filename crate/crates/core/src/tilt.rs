//! Tilt determinations of embedded lines going to infinity in height, and
//! the time-one torsion computed through them.
//!
//! The tilt of `psi` is the continuous determination of `theta(chi, psi')`
//! that lies in `[-1/4, 1/4]` at every height record of `psi`, i.e. every `t`
//! with `p2(psi(t)) > p2(psi(s))` for all `s < t`. Only a finite window below
//! the requested parameter is ever sampled, so the record used for the
//! normalisation is the last one inside the window, and the result is
//! accepted only when the doubled window gives the same branch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{vertical_angle, PlanePoint, TangentVector, VERTICAL};
use crate::models::Isotopy;
use crate::unwrap::{lift_samples, refine, uniform_grid, AngleSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltOptions {
    /// Initial length of the window below the requested parameter.
    pub window: f64,
    /// Number of times the window may be doubled.
    pub max_doublings: u32,
    pub samples_per_unit: usize,
}

impl Default for TiltOptions {
    fn default() -> Self {
        Self {
            window: 5.0,
            max_doublings: 8,
            samples_per_unit: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltValue {
    pub parameter: f64,
    /// Tilt at `parameter`, in turns.
    pub value: f64,
    /// Height record used for the normalisation.
    pub record: f64,
    /// Window length that produced a stable branch.
    pub window: f64,
}

struct Profile {
    params: Vec<f64>,
    heights: Vec<f64>,
    lifts: Vec<f64>,
}

/// Samples `[a, b]` uniformly plus at each of `extra`.
fn sample_profile(
    curve: &dyn Fn(f64) -> Result<(PlanePoint, TangentVector)>,
    a: f64,
    b: f64,
    extra: &[f64],
    opts: &TiltOptions,
) -> Result<Profile> {
    let probe = |s: f64| -> Result<(crate::geometry::TurnAngle, f64)> {
        let (p, v) = curve(s)?;
        if v.is_zero() {
            return Err(Error::DegenerateTangent { s, norm: 0.0 });
        }
        Ok((vertical_angle(v)?, p.y))
    };
    let mut grid = uniform_grid(a, b, opts.samples_per_unit);
    grid.extend_from_slice(extra);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let raw = grid
        .into_iter()
        .map(|s| {
            let (angle, h) = probe(s)?;
            Ok(AngleSample { s, angle, extra: h })
        })
        .collect::<Result<Vec<_>>>()?;
    let refined = refine(raw, 0.125, 1e-12, probe)?;
    let lifts = lift_samples(&refined, 0.0);
    Ok(Profile {
        params: refined.iter().map(|r| r.s).collect(),
        heights: refined.iter().map(|r| r.extra).collect(),
        lifts,
    })
}

/// Branch shift and record parameter from the last height record in the
/// samples `lo..=hi`, counted from the start of that range.
fn record_branch(p: &Profile, lo: usize, hi: usize) -> Option<(i64, usize)> {
    let mut best = p.heights[lo];
    let mut record = None;
    for i in lo + 1..=hi {
        if p.heights[i] > best {
            best = p.heights[i];
            record = Some(i);
        }
    }
    record.map(|i| (p.lifts[i].round() as i64, i))
}

/// Tilt of `curve` at each of `params`, from one shared sampling.
///
/// `curve(s)` returns `(psi(s), psi'(s))`; heights must tend to infinity
/// in both directions.
pub fn tilt_profile(
    curve: &dyn Fn(f64) -> Result<(PlanePoint, TangentVector)>,
    params: &[f64],
    opts: &TiltOptions,
) -> Result<Vec<TiltValue>> {
    if params.is_empty() {
        return Ok(Vec::new());
    }
    if !(opts.window > 0.0) || opts.samples_per_unit == 0 {
        return Err(Error::Domain("tilt window and sampling must be positive".into()));
    }
    let lo = params.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = params.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<Option<TiltValue>> = vec![None; params.len()];
    let mut window = opts.window;
    for _ in 0..=opts.max_doublings {
        let profile = sample_profile(curve, lo - 2.0 * window, hi, params, opts)?;
        let index_of = |s: f64| -> usize {
            profile.params.partition_point(|&x| x < s).min(profile.params.len() - 1)
        };
        for (slot, &s) in out.iter_mut().zip(params) {
            if slot.is_some() {
                continue;
            }
            let end = profile.params.partition_point(|&x| x <= s) - 1;
            let short = record_branch(&profile, index_of(s - window), end);
            let long = record_branch(&profile, index_of(s - 2.0 * window), end);
            if let (Some((k, i)), Some((k2, _))) = (short, long) {
                if k == k2 {
                    // `s` is itself a sample.
                    *slot = Some(TiltValue {
                        parameter: s,
                        value: profile.lifts[end] - k as f64,
                        record: profile.params[i],
                        window,
                    });
                }
            }
        }
        if out.iter().all(Option::is_some) {
            return Ok(out.into_iter().map(|v| v.expect("filled")).collect());
        }
        window *= 2.0;
    }
    let missing = params
        .iter()
        .zip(&out)
        .find(|(_, v)| v.is_none())
        .map(|(s, _)| *s)
        .expect("some parameter unresolved");
    Err(Error::Normalisation(format!(
        "no stable height record below s = {missing} within a window of {}",
        window / 2.0
    )))
}

/// Tilt at a single parameter.
pub fn tilt_determination(
    curve: &dyn Fn(f64) -> Result<(PlanePoint, TangentVector)>,
    t: f64,
    opts: &TiltOptions,
) -> Result<TiltValue> {
    Ok(tilt_profile(curve, &[t], opts)?[0])
}

/// `Torsion_1(f, z, chi)` for every `z = (x, y)` with `y` in `ys`, as the
/// tilt of the image of the vertical line through `x` under the time-one map.
pub fn torsion_via_tilt_column(
    model: &dyn Isotopy,
    x: f64,
    ys: &[f64],
    opts: &TiltOptions,
) -> Result<Vec<f64>> {
    let image = |s: f64| -> Result<(PlanePoint, TangentVector)> {
        let (q, jac) = model.lifted_evaluate(1.0, PlanePoint::new(x, s))?;
        Ok((q, jac.apply(VERTICAL)))
    };
    Ok(tilt_profile(&image, ys, opts)?
        .into_iter()
        .map(|v| v.value)
        .collect())
}

/// `Torsion_1(f, z, chi)` through the tilt of `f o V_z`.
pub fn torsion_via_tilt(model: &dyn Isotopy, z: crate::geometry::AnnulusPoint) -> Result<f64> {
    Ok(torsion_via_tilt_column(model, z.x, &[z.y], &TiltOptions::default())?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AnnulusPoint;
    use crate::models::{IdentityModel, PendulumModel, TwistMapModel};
    use crate::torsion::torsion_finite;
    use approx::assert_abs_diff_eq;

    #[test]
    fn vertical_line_has_zero_tilt() {
        let line = |s: f64| Ok((PlanePoint::new(0.3, s), VERTICAL));
        let v = tilt_determination(&line, 2.0, &TiltOptions::default()).unwrap();
        assert_eq!(v.value, 0.0);
        assert_eq!(v.record, 2.0);
    }

    #[test]
    fn diagonal_line_has_constant_tilt() {
        let line = |s: f64| Ok((PlanePoint::new(s, s), TangentVector::new(1.0, 1.0)));
        for t in [-3.0, 0.0, 4.5] {
            let v = tilt_determination(&line, t, &TiltOptions::default()).unwrap();
            assert_abs_diff_eq!(v.value, -0.125, epsilon = 1e-15);
        }
    }

    #[test]
    fn winding_below_the_parameter_is_normalised_away() {
        // psi(s) = (cos 2 pi s / 2 pi, s + b sin 2 pi s) with 2 pi b = 1.5:
        // the tangent makes a full counterclockwise turn every unit, and
        // every integer parameter is a height record with vertical tangent.
        let k = 1.5;
        let curve = move |s: f64| {
            let u = std::f64::consts::TAU * s;
            Ok((
                PlanePoint::new(u.cos() / std::f64::consts::TAU, s + k * u.sin() / std::f64::consts::TAU),
                TangentVector::new(-u.sin(), 1.0 + k * u.cos()),
            ))
        };
        let opts = TiltOptions::default();
        let v = tilt_profile(&curve, &[3.0, 3.25], &opts).unwrap();
        assert_abs_diff_eq!(v[0].value, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v[1].value, 0.125, epsilon = 1e-12);
    }

    #[test]
    fn records_missing_is_an_error() {
        let falling = |s: f64| Ok((PlanePoint::new(0.0, -s), -VERTICAL));
        let opts = TiltOptions { max_doublings: 2, ..TiltOptions::default() };
        let err = tilt_determination(&falling, 0.0, &opts).unwrap_err();
        assert!(matches!(err, Error::Normalisation(_)));
    }

    #[test]
    fn identity_and_shear() {
        let z = AnnulusPoint::new(0.3, 0.7);
        assert_eq!(torsion_via_tilt(&IdentityModel, z).unwrap(), 0.0);
        let v = torsion_via_tilt(&TwistMapModel::standard(0.0), z).unwrap();
        assert_abs_diff_eq!(v, -0.125, epsilon = 1e-15);
    }

    #[test]
    fn agrees_with_torsion_on_pendulum_and_twist() {
        let pend = PendulumModel::paper();
        let twist = TwistMapModel::standard(0.8);
        for z in [AnnulusPoint::new(0.25, 0.0), AnnulusPoint::new(0.6, -1.2), AnnulusPoint::new(0.0, 0.4)] {
            for model in [&pend as &dyn Isotopy, &twist] {
                let a = torsion_via_tilt(model, z).unwrap();
                let b = torsion_finite(model, z, VERTICAL, 1).unwrap().value;
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
        }
    }
}
