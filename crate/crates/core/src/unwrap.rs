//! Continuous determinations of sampled angle functions.
//!
//! A function is sampled at increasing parameters; adjacent samples whose
//! principal increment is not below the step bound are refined by bisection
//! before the nearest-branch lift is taken.

use crate::error::{Error, Result};
use crate::geometry::{nearest_lift, TurnAngle};

/// One sample of an angle function, with a payload carried along.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleSample<E> {
    pub s: f64,
    pub angle: TurnAngle,
    pub extra: E,
}

fn increment(a: TurnAngle, b: TurnAngle) -> f64 {
    TurnAngle::principal(b.value() - a.value()).value()
}

/// Inserts probe samples until every adjacent principal increment is
/// strictly below `max_step` turns.
///
/// `probe(s)` evaluates the function at an intermediate parameter. Fails
/// with [`Error::RotationTooFast`] once an interval shrinks below `min_ds`.
pub fn refine<E: Copy>(
    samples: Vec<AngleSample<E>>,
    max_step: f64,
    min_ds: f64,
    mut probe: impl FnMut(f64) -> Result<(TurnAngle, E)>,
) -> Result<Vec<AngleSample<E>>> {
    let mut out: Vec<AngleSample<E>> = Vec::with_capacity(samples.len());
    let mut iter = samples.into_iter();
    let Some(first) = iter.next() else {
        return Ok(out);
    };
    out.push(first);
    for next in iter {
        // Pending right endpoints, innermost last.
        let mut stack = vec![next];
        while let Some(right) = stack.last().copied() {
            let left = *out.last().expect("non-empty");
            if increment(left.angle, right.angle).abs() < max_step {
                out.push(right);
                stack.pop();
                continue;
            }
            let ds = right.s - left.s;
            if ds < min_ds {
                return Err(Error::RotationTooFast {
                    t: left.s,
                    dt: ds,
                    increment: increment(left.angle, right.angle),
                });
            }
            let mid = left.s + 0.5 * ds;
            let (angle, extra) = probe(mid)?;
            stack.push(AngleSample { s: mid, angle, extra });
        }
    }
    Ok(out)
}

/// Nearest-branch lifts of refined samples, the first one chosen closest
/// to `start`.
pub fn lift_samples<E>(samples: &[AngleSample<E>], start: f64) -> Vec<f64> {
    let mut lifts = Vec::with_capacity(samples.len());
    let mut prev = start;
    for smp in samples {
        prev = nearest_lift(prev, smp.angle);
        lifts.push(prev);
    }
    lifts
}

/// Uniform grid `a, a + h, ..., b` with about `per_unit` points per unit length.
pub fn uniform_grid(a: f64, b: f64, per_unit: usize) -> Vec<f64> {
    let n = (((b - a) * per_unit as f64).ceil() as usize).max(1);
    (0..=n)
        .map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn principal(t: f64) -> TurnAngle {
        TurnAngle::principal(t)
    }

    #[test]
    fn refine_recovers_fast_linear_angle() {
        // angle(s) = 1.2 s turns; the half-unit samples alias to -0.4
        let f = |s: f64| 1.2 * s;
        let raw: Vec<_> = [0.0, 0.5, 1.0]
            .iter()
            .map(|&s| AngleSample { s, angle: principal(f(s)), extra: () })
            .collect();
        let refined = refine(raw, 0.25, 1e-12, |s| Ok((principal(f(s)), ()))).unwrap();
        let lifts = lift_samples(&refined, 0.0);
        assert!(refined.len() > 3);
        assert_abs_diff_eq!(*lifts.last().unwrap(), 1.2, epsilon = 1e-12);
        for w in lifts.windows(2) {
            assert!((w[1] - w[0]).abs() < 0.25);
        }
    }

    #[test]
    fn refine_gives_up_on_a_jump() {
        let f = |s: f64| if s < 0.5 { 0.0 } else { 0.4 };
        let raw = vec![
            AngleSample { s: 0.0, angle: principal(0.0), extra: () },
            AngleSample { s: 1.0, angle: principal(0.4), extra: () },
        ];
        let err = refine(raw, 0.25, 1e-9, |s| Ok((principal(f(s)), ()))).unwrap_err();
        assert!(matches!(err, Error::RotationTooFast { .. }));
    }

    #[test]
    fn grid_endpoints_exact() {
        let g = uniform_grid(0.0, 0.37, 32);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 0.37);
        assert_eq!(g.len(), 13);
    }
}
