//! The subcommands. Each one validates what it needs from the
//! configuration, runs the library and returns tables and reports; the
//! binary decides where they go.

use serde::Serialize;
use thiserror::Error;

use torsionlab::curves::EssentialCurve;
use torsionlab::geometry::{AnnulusPoint, PlanePoint, TangentVector};
use torsionlab::harness::{
    birkhoff_check, certify_negative_torsion, find_zero_torsion_on_curve, linking_and_root,
    zero_torsion_sweep, BirkhoffOptions, ZeroSearchOptions, DEFAULT_MARGIN_FLOOR,
};
use torsionlab::tilt::{torsion_via_tilt_column, TiltOptions};
use torsionlab::torsion::{torsion_finite, torsion_profile, DEFAULT_CONVERGENCE_TOL, DEFAULT_CONVERGENCE_WINDOW};
use torsionlab::Error;

use crate::config::{ConfigError, RunConfig};
use crate::output::Table;

use rayon::prelude::*;

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numerical(#[from] Error),
}

impl CommandError {
    /// 2 for refused preconditions, 3 for configuration errors, else 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => 3,
            CommandError::Numerical(Error::Precondition(_) | Error::NotNegativeTorsion(_)) => 2,
            CommandError::Numerical(_) => 1,
        }
    }

    /// Certificate attached to a refusal, as JSON.
    pub fn certificate_json(&self) -> Option<String> {
        match self {
            CommandError::Numerical(Error::NotNegativeTorsion(cert)) => {
                serde_json::to_string_pretty(cert).ok()
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Option<Table>,
    pub json: Option<String>,
    /// One-line human summary.
    pub summary: String,
    /// The summary is the result itself and goes to stdout when no CSV
    /// destination is set.
    pub summary_is_result: bool,
    pub status: Status,
}

fn status(pass: bool) -> Status {
    if pass {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialise");
    s.push('\n');
    s
}

fn require<T: Copy>(v: Option<T>, key: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| ConfigError::Invalid(format!("harness.{key} is required")))
}

/// `torsion`: `(x, y, n, torsion, converged)` per point.
pub fn torsion(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let model = cfg.model.build()?;
    let n = cfg.require_n()?;
    let points = cfg.points()?;
    let [vx, vy] = cfg.harness.vector.unwrap_or([0.0, 1.0]);
    let xi = TangentVector::new(vx, vy);
    let window = cfg.harness.window.unwrap_or(DEFAULT_CONVERGENCE_WINDOW).max(1);
    let tol = cfg.harness.convergence_tol.unwrap_or(DEFAULT_CONVERGENCE_TOL);
    let rows = points
        .par_iter()
        .map(|&[x, y]| {
            let profile = torsion_profile(model.as_ref(), AnnulusPoint::new(x, y), xi, n)?;
            let values: Vec<f64> = profile
                .iter()
                .enumerate()
                .map(|(i, v)| v / (i + 1) as f64)
                .collect();
            let converged = if n >= 2 * window {
                let tail = &values[(n - window) as usize..];
                let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
                hi - lo < tol
            } else {
                false
            };
            Ok((x, y, *values.last().expect("n >= 1"), converged))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut table = Table::new(&["x", "y", "n", "torsion", "converged"]);
    for (x, y, t, c) in rows {
        table.push(vec![x.into(), y.into(), n.into(), t.into(), c.into()]);
    }
    Ok(Outcome {
        summary: format!("{} points, n = {n}", table.len()),
        table: Some(table),
        json: None,
        summary_is_result: false,
        status: Status::Pass,
    })
}

/// `find-zero`: zero-torsion search on the configured curve.
pub fn find_zero(cfg: &RunConfig, assume_negative_torsion: bool) -> Result<Outcome, CommandError> {
    let model = cfg.model.build()?;
    let curve = cfg.require_curve()?;
    let n = cfg.require_n()?;
    let opts = ZeroSearchOptions {
        tolerances: cfg.tolerances(),
        assume_negative_torsion,
        ..ZeroSearchOptions::default()
    };
    let report = find_zero_torsion_on_curve(model.as_ref(), &curve, n, &opts)?;
    let mut table = Table::new(&["horizon", "torsion", "bound", "in_window", "certified"]);
    for r in &report.residuals {
        table.push(vec![
            r.horizon.into(),
            r.torsion.into(),
            r.bound.into(),
            r.in_window.into(),
            r.certified.into(),
        ]);
    }
    Ok(Outcome {
        summary: format!(
            "{}, witness ({}, {}), K = {}, C = {}",
            if report.pass { "pass" } else { "fail" },
            report.witness.x,
            report.witness.y,
            report.k,
            report.complexity
        ),
        table: Some(table),
        json: Some(to_json(&report)),
        summary_is_result: false,
        status: status(report.pass),
    })
}

/// `sweep`: zero-torsion search on every circle of a band.
pub fn sweep(cfg: &RunConfig, assume_negative_torsion: bool) -> Result<Outcome, CommandError> {
    let model = cfg.model.build()?;
    let n = cfg.require_n()?;
    let r_lo = require(cfg.harness.r_lo, "r_lo")?;
    let r_hi = require(cfg.harness.r_hi, "r_hi")?;
    let steps = require(cfg.harness.steps, "steps")?;
    let opts = ZeroSearchOptions {
        tolerances: cfg.tolerances(),
        assume_negative_torsion,
        ..ZeroSearchOptions::default()
    };
    let rows = zero_torsion_sweep(model.as_ref(), r_lo, r_hi, steps, n, &opts)?;
    let mut table = Table::new(&["r", "witness_x", "witness_y", "torsion", "bound", "pass", "error"]);
    for r in &rows {
        table.push(vec![
            r.height.into(),
            r.witness_x.into(),
            r.witness_y.into(),
            r.torsion.into(),
            r.bound.into(),
            r.pass.into(),
            r.error.as_deref().unwrap_or("").into(),
        ]);
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    Ok(Outcome {
        summary: format!("{passed}/{} rows pass", rows.len()),
        table: Some(table),
        json: None,
        summary_is_result: false,
        status: status(passed == rows.len()),
    })
}

/// `certify`: negative-torsion certificate on `harness.grid`.
pub fn certify(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let model = cfg.model.build()?;
    let grid = cfg
        .harness
        .grid
        .ok_or_else(|| ConfigError::Invalid("harness.grid is required".into()))?;
    let floor = cfg.harness.margin_floor.unwrap_or(DEFAULT_MARGIN_FLOOR);
    let cert = certify_negative_torsion(model.as_ref(), &grid, floor)?;
    let mut table = Table::new(&["x", "y", "torsion"]);
    for (z, v) in grid.points().iter().zip(&cert.values) {
        table.push(vec![z.x.into(), z.y.into(), (*v).into()]);
    }
    Ok(Outcome {
        summary: format!("{}, margin {}", if cert.pass { "pass" } else { "fail" }, cert.margin),
        table: Some(table),
        json: Some(to_json(&cert)),
        summary_is_result: true,
        status: status(cert.pass),
    })
}

/// `birkhoff`: torsion/variation identity and graph test on an invariant curve.
pub fn birkhoff(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let model = cfg.model.build()?;
    let curve: EssentialCurve = cfg.require_curve()?;
    let n = cfg.require_n()?;
    let defaults = BirkhoffOptions::default();
    let opts = BirkhoffOptions {
        tolerances: cfg.tolerances(),
        samples: cfg.harness.samples.unwrap_or(defaults.samples),
        assumed_non_wandering: cfg.harness.non_wandering.unwrap_or(false),
        ..defaults
    };
    let report = birkhoff_check(model.as_ref(), &curve, n, &opts)?;
    let mut table = Table::new(&["s", "horizon", "torsion_term", "variation_term", "difference"]);
    for r in &report.rows {
        table.push(vec![
            r.parameter.into(),
            r.horizon.into(),
            r.torsion_term.into(),
            r.variation_term.into(),
            r.difference.into(),
        ]);
    }
    Ok(Outcome {
        summary: format!(
            "{}, worst difference {:e}, graph {}, invariance distance {:e}",
            if report.pass { "pass" } else { "fail" },
            report.worst_difference,
            report.graph.is_graph,
            report.invariance_distance
        ),
        table: Some(table),
        json: Some(to_json(&report)),
        summary_is_result: false,
        status: status(report.pass),
    })
}

/// `linking`: `Linking_n(I, x, y)` and the matching torsion root on `[x, y]`.
pub fn linking(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let model = cfg.model.build()?;
    let n = cfg.require_n()?;
    let [ax, ay] = require(cfg.harness.x, "x")?;
    let [bx, by] = require(cfg.harness.y, "y")?;
    let (l, root) = linking_and_root(model.as_ref(), PlanePoint::new(ax, ay), PlanePoint::new(bx, by), n)?;
    let mut table = Table::new(&[
        "x_x", "x_y", "y_x", "y_y", "n", "linking", "root_s", "root_x", "root_y", "root_torsion", "residual",
    ]);
    table.push(vec![
        ax.into(),
        ay.into(),
        bx.into(),
        by.into(),
        n.into(),
        l.into(),
        root.parameter.into(),
        root.point.x().into(),
        root.point.y.into(),
        root.torsion.into(),
        root.residual.into(),
    ]);
    Ok(Outcome {
        summary: format!("linking {l}, root residual {:e}", root.residual),
        table: Some(table),
        json: None,
        summary_is_result: false,
        status: Status::Pass,
    })
}

/// `tilt`: time-one torsion through tilts, next to the direct value.
pub fn tilt(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let model = cfg.model.build()?;
    let points = cfg.points()?;
    let defaults = TiltOptions::default();
    let opts = TiltOptions {
        window: cfg.harness.tilt_window.unwrap_or(defaults.window),
        max_doublings: cfg.harness.tilt_doublings.unwrap_or(defaults.max_doublings),
        ..defaults
    };
    // Batch points sharing an abscissa into one column.
    let mut columns: Vec<(f64, Vec<f64>)> = Vec::new();
    for &[x, y] in &points {
        match columns.iter_mut().find(|(cx, _)| *cx == x) {
            Some((_, ys)) => ys.push(y),
            None => columns.push((x, vec![y])),
        }
    }
    let results = columns
        .par_iter()
        .map(|(x, ys)| -> Result<Vec<(f64, f64)>, Error> {
            let via = torsion_via_tilt_column(model.as_ref(), *x, ys, &opts)?;
            let direct = ys
                .iter()
                .map(|&y| Ok(torsion_finite(model.as_ref(), PlanePoint::new(*x, y), TangentVector::new(0.0, 1.0), 1)?.value))
                .collect::<Result<Vec<f64>, Error>>()?;
            Ok(via.into_iter().zip(direct).collect())
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut table = Table::new(&["x", "y", "tilt_torsion", "direct_torsion", "difference"]);
    let mut worst: f64 = 0.0;
    for ((x, ys), vals) in columns.iter().zip(&results) {
        for (y, (a, b)) in ys.iter().zip(vals) {
            worst = worst.max((a - b).abs());
            table.push(vec![(*x).into(), (*y).into(), (*a).into(), (*b).into(), (a - b).into()]);
        }
    }
    Ok(Outcome {
        summary: format!("{} points, max |tilt - direct| = {worst:e}", table.len()),
        table: Some(table),
        json: None,
        summary_is_result: false,
        status: Status::Pass,
    })
}
