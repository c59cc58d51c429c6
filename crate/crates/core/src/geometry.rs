//! Points of the annulus and its universal cover, tangent vectors, and
//! oriented angles measured in turns.
//!
//! A full revolution is 1. Counterclockwise is positive, so the angle from
//! the vertical `(0, 1)` to the horizontal `(1, 0)` is `-1/4`.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point of `T x R`, with the angular coordinate in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusPoint {
    pub x: f64,
    pub y: f64,
}

impl AnnulusPoint {
    /// Builds a point, reducing `x` modulo 1.
    pub fn new(x: f64, y: f64) -> Self {
        Self { x: reduce_turn(x).1, y }
    }
}

/// Splits `x` into `(floor, frac)` with `frac` in `[0, 1)`.
///
/// When the fractional part rounds up to 1 the carry goes into the integer part.
pub fn reduce_turn(x: f64) -> (i64, f64) {
    let fl = x.floor();
    let frac = x - fl;
    if frac >= 1.0 {
        (fl as i64 + 1, 0.0)
    } else {
        (fl as i64, frac)
    }
}

/// Point of the plane covering the annulus.
///
/// The horizontal coordinate is stored as an integer sheet plus an offset in
/// `[0, 1)`, so deck translations by `(k, 0)` are exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    sheet: i64,
    offset: f64,
    pub y: f64,
}

impl PlanePoint {
    pub fn new(x: f64, y: f64) -> Self {
        let (sheet, offset) = reduce_turn(x);
        Self { sheet, offset, y }
    }

    /// Horizontal coordinate `X`.
    pub fn x(&self) -> f64 {
        self.sheet as f64 + self.offset
    }

    pub fn sheet(&self) -> i64 {
        self.sheet
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Translates by `(k, 0)`.
    pub fn translate(&self, k: i64) -> Self {
        Self {
            sheet: self.sheet + k,
            ..*self
        }
    }

    /// Adds a displacement, renormalising the sheet.
    pub fn displace(&self, dx: f64, dy: f64) -> Self {
        let (carry, offset) = reduce_turn(self.offset + dx);
        Self {
            sheet: self.sheet + carry,
            offset,
            y: self.y + dy,
        }
    }

    /// Vector from `self` to `other`, with the sheet difference taken exactly.
    pub fn chord_to(&self, other: &PlanePoint) -> TangentVector {
        let dx = (other.sheet - self.sheet) as f64 + (other.offset - self.offset);
        TangentVector::new(dx, other.y - self.y)
    }
}

pub fn lift_point(p: AnnulusPoint, sheet: i64) -> PlanePoint {
    let (carry, offset) = reduce_turn(p.x);
    PlanePoint {
        sheet: sheet + carry,
        offset,
        y: p.y,
    }
}

pub fn project_point(p: PlanePoint) -> AnnulusPoint {
    AnnulusPoint {
        x: p.offset,
        y: p.y,
    }
}

/// Tangent vector in the standard trivialisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub dx: f64,
    pub dy: f64,
}

/// Unit positive vertical vector.
pub const VERTICAL: TangentVector = TangentVector { dx: 0.0, dy: 1.0 };
/// Unit positive horizontal vector.
pub const HORIZONTAL: TangentVector = TangentVector { dx: 1.0, dy: 0.0 };

impl TangentVector {
    pub const fn new(dx: f64, dy: f64) -> Self {
        Self { dx, dy }
    }

    pub fn norm(&self) -> f64 {
        self.dx.hypot(self.dy)
    }

    pub fn is_zero(&self) -> bool {
        self.dx == 0.0 && self.dy == 0.0
    }

    /// Unit vector making the (counterclockwise) angle `turns` with the vertical.
    pub fn from_vertical_angle(turns: f64) -> Self {
        let a = turns * TAU;
        Self::new(-a.sin(), a.cos())
    }

    pub fn cross(&self, other: &TangentVector) -> f64 {
        self.dx * other.dy - self.dy * other.dx
    }

    pub fn dot(&self, other: &TangentVector) -> f64 {
        self.dx * other.dx + self.dy * other.dy
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.dx * k, self.dy * k)
    }
}

impl Neg for TangentVector {
    type Output = TangentVector;
    fn neg(self) -> TangentVector {
        TangentVector::new(-self.dx, -self.dy)
    }
}

impl Add for TangentVector {
    type Output = TangentVector;
    fn add(self, o: TangentVector) -> TangentVector {
        TangentVector::new(self.dx + o.dx, self.dy + o.dy)
    }
}

impl Sub for TangentVector {
    type Output = TangentVector;
    fn sub(self, o: TangentVector) -> TangentVector {
        TangentVector::new(self.dx - o.dx, self.dy - o.dy)
    }
}

/// Angle in turns, always held at its principal value in `(-1/2, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct TurnAngle(f64);

impl TurnAngle {
    /// Principal representative of `turns`.
    pub fn principal(turns: f64) -> Self {
        let mut r = turns - turns.round();
        if r <= -0.5 {
            r += 1.0;
        }
        if r > 0.5 {
            r -= 1.0;
        }
        TurnAngle(r)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Counterclockwise angle from `u` to `v`.
pub fn oriented_angle(u: TangentVector, v: TangentVector) -> Result<TurnAngle> {
    if u.is_zero() || v.is_zero() {
        return Err(Error::ZeroVector);
    }
    let a = u.cross(&v).atan2(u.dot(&v)) / TAU;
    Ok(TurnAngle::principal(a))
}

/// Angle from the positive vertical to `v`.
pub fn vertical_angle(v: TangentVector) -> Result<TurnAngle> {
    oriented_angle(VERTICAL, v)
}

/// Representative of `principal` (mod 1) closest to `previous`.
///
/// The result lies within 1/2 of `previous`; an exact antipodal tie resolves upward.
pub fn nearest_lift(previous: f64, principal: TurnAngle) -> f64 {
    let p = principal.value();
    let mut lift = p + (previous - p).round();
    let d = lift - previous;
    if d < -0.5 {
        lift += 1.0;
    } else if d > 0.5 {
        lift -= 1.0;
    } else if d == -0.5 {
        lift += 1.0;
    }
    lift
}

/// Real 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    /// Counterclockwise rotation by `turns`.
    pub fn rotation(turns: f64) -> Self {
        let (s, c) = (turns * TAU).sin_cos();
        Self::new(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn apply(&self, v: TangentVector) -> TangentVector {
        TangentVector::new(
            self.a * v.dx + self.b * v.dy,
            self.c * v.dx + self.d * v.dy,
        )
    }

    pub fn max_abs_diff(&self, o: &Mat2) -> f64 {
        [
            self.a - o.a,
            self.b - o.b,
            self.c - o.c,
            self.d - o.d,
        ]
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs_diff(&Mat2::new(0.0, 0.0, 0.0, 0.0))
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}
