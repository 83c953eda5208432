//! Residual checks for the exact identities and fitted-constant checks for
//! the estimates, runnable as a suite over several resolutions.

pub mod estimates;
pub mod fields;
pub mod identities;

use crate::error::{Error, Result};
use crate::runner::refine::{observed_orders, ORDER_FLOOR};
use crate::tensor::Domain;
use fields::{annulus_family, disk_family, flow_map, random_vector, ShearFlow};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

/// Finest-level bound for identity residuals.
pub const IDENTITY_TOL: f64 = 1e-6;
/// Smallest observed order accepted for identity residuals.
pub const MIN_ORDER: f64 = 2.0;
/// Observed orders are asymptotic estimates; a pair dominated by a pure
/// dt² term measures 2 minus a few thousandths.
pub const ORDER_SLACK: f64 = 0.05;
/// Largest growth of a fitted constant between consecutive levels.
pub const GROWTH_LIMIT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    /// Residual of an exact identity; should vanish under refinement.
    Identity,
    /// Fitted constant of an inequality; should stay bounded.
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    #[serde(rename = "Linf")]
    LInf,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    /// Every residual below the order floor; no order is reported.
    Exact,
    Fail,
    InvariantViolation,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub check_name: String,
    pub kind: CheckKind,
    pub norm_used: Norm,
    /// Residual, or the fitted constant for estimates.
    pub residual: f64,
    pub resolution: usize,
    pub dt: Option<f64>,
    /// Order against the previous resolution of the same check.
    pub convergence_order: Option<f64>,
    /// Verdict of the whole check, repeated on each of its levels.
    pub status: Status,
    pub note: Option<String>,
}

/// Shared inputs of every check.
#[derive(Debug, Clone, Copy)]
pub struct Ctx {
    pub seed: u64,
    pub corrupt_metric: bool,
    /// dt = dt_scale / n for time-differenced checks.
    pub dt_scale: f64,
}

impl Ctx {
    fn dt(&self, n: usize) -> f64 {
        self.dt_scale / n as f64
    }
}

type Eval = fn(&Ctx, usize) -> Result<f64>;

pub struct CheckSpec {
    pub name: &'static str,
    pub kind: CheckKind,
    pub norm: Norm,
    /// Uses the pulled-back metric (and so detects a corrupted one).
    pub metric: bool,
    /// Differenced in time with dt ∝ 1/n.
    pub timed: bool,
    pub resolutions: &'static [usize],
    eval: Eval,
}

const T0: f64 = 0.4;
const ID_RES: &[usize] = &[16, 24, 32];
const TIMED_RES: &[usize] = &[16, 32, 64];
const HIGH_RES: &[usize] = &[32, 48, 64];
const EST_RES: &[usize] = &[16, 32, 64];

fn labels(n: usize) -> Result<Arc<crate::spectral::Frame>> {
    Ok(Arc::new(disk_family(n)?))
}

fn gauss_disk(c: &Ctx, n: usize) -> Result<f64> {
    let lab = labels(n)?;
    let map = flow_map(&ShearFlow::default(), &lab, Domain::Plasma, T0)?;
    let m = fields::checked_metric(&map, c.corrupt_metric)?;
    let mut rng = fields::rng(c.seed, 1);
    let a = fields::BandLimited::random(&mut rng, 3, 6);
    let b = fields::BandLimited::random(&mut rng, 3, 6);
    identities::gauss_residual(&map, &m, &|x| [a.eval(x), b.eval(x)])
}

fn gauss_annulus(c: &Ctx, n: usize) -> Result<f64> {
    let lab = Arc::new(annulus_family(n)?);
    let map = flow_map(&ShearFlow { amp: 0.3 }, &lab, Domain::Vacuum, T0)?;
    let m = fields::checked_metric(&map, c.corrupt_metric)?;
    let mut rng = fields::rng(c.seed, 2);
    let a = fields::BandLimited::random(&mut rng, 2, 6);
    let b = fields::BandLimited::random(&mut rng, 2, 6);
    identities::gauss_residual(&map, &m, &|x| [a.eval(x), b.eval(x)])
}

fn metric_rate(c: &Ctx, n: usize) -> Result<f64> {
    Ok(identities::metric_rate(&ShearFlow::default(), &labels(n)?, T0, c.dt(n), c.corrupt_metric)?.max())
}

fn commutator(c: &Ctx, n: usize, pick: fn(&identities::Commutators) -> f64) -> Result<f64> {
    let r = identities::commutators(&ShearFlow::default(), &labels(n)?, T0, c.dt(n), c.corrupt_metric)?;
    Ok(pick(&r))
}

/// Label derivatives commute with D_t exactly, so the difference is pure
/// roundoff scaled by 1/dt; a fixed dt keeps it at the floor.
fn commutator_gradient(c: &Ctx, n: usize) -> Result<f64> {
    let r = identities::commutators(&ShearFlow::default(), &labels(n)?, T0, 1e-2, c.corrupt_metric)?;
    Ok(r.grad)
}

fn boundary(c: &Ctx, n: usize, normal: bool) -> Result<f64> {
    let r = identities::boundary_evolution(&ShearFlow::default(), &labels(n)?, T0, c.dt(n), c.corrupt_metric)?;
    Ok(if normal { r.normal } else { r.area })
}

/// q = (1 − |ζ|²)G(x) on the deformed disk, so q = 0 on Γ.
fn projection_data(n: usize) -> Result<(crate::spectral::Frame, Vec<f64>)> {
    let f = disk_family(n)?;
    let z = match f.grid.as_ref() {
        crate::spectral::Grid::Disk(g) => g.coords(),
        _ => unreachable!(),
    };
    let q = (0..f.n_nodes())
        .map(|k| {
            let (x, y) = (f.pos[0][k], f.pos[1][k]);
            (1.0 - z[k][0] * z[k][0] - z[k][1] * z[k][1]) * (x.sin() + (0.7 * y).cos() + x * y)
        })
        .collect();
    Ok((f, q))
}

fn projection(_: &Ctx, n: usize, second: bool) -> Result<f64> {
    let (f, q) = projection_data(n)?;
    let r = identities::projection(&f, &q)?;
    Ok(if second { r.second } else { r.third })
}

fn pressure(c: &Ctx, n: usize) -> Result<f64> {
    identities::pressure_mms(&labels(n)?, &ShearFlow { amp: 0.5 }, T0, 1.5, c.corrupt_metric)
}

fn vacuum_ratio(n: usize, r: usize) -> Result<f64> {
    Ok(estimates::VacuumSample::new(annulus_family(n)?)?.derivative_ratio(r))
}

fn trace(n: usize, p: u32) -> Result<f64> {
    Ok(estimates::VacuumSample::new(annulus_family(n)?)?.trace_constant(p))
}

fn divcurl(c: &Ctx, n: usize, r: usize) -> Result<f64> {
    let f = disk_family(n)?;
    let v = random_vector(&f, &mut fields::rng(c.seed, 10 + r as u64), 3);
    estimates::divcurl_constant(&f, &v, r, 0.5)
}

fn elliptic(c: &Ctx, n: usize, r: usize) -> Result<f64> {
    let f = disk_family(n)?;
    let rhs = fields::BandLimited::random(&mut fields::rng(c.seed, 20 + r as u64), 3, 6).sample(&f);
    estimates::elliptic_constant(&f, &rhs, r, 0.5)
}

macro_rules! spec {
    ($name:expr, $kind:ident, $norm:ident, $metric:expr, $timed:expr, $res:expr, $eval:expr) => {
        CheckSpec {
            name: $name,
            kind: CheckKind::$kind,
            norm: Norm::$norm,
            metric: $metric,
            timed: $timed,
            resolutions: $res,
            eval: $eval,
        }
    };
}

/// Every check the suite knows, in report order.
pub fn registry() -> Vec<CheckSpec> {
    vec![
        spec!("gauss-disk", Identity, LInf, true, false, ID_RES, gauss_disk),
        spec!("gauss-annulus", Identity, LInf, true, false, ID_RES, gauss_annulus),
        spec!("metric-rate", Identity, LInf, true, true, TIMED_RES, metric_rate),
        spec!("commutator-gradient", Identity, L2, true, false, ID_RES, commutator_gradient),
        spec!("commutator-covector", Identity, L2, true, true, TIMED_RES, |c, n| {
            commutator(c, n, |r| r.covector)
        }),
        spec!("commutator-divergence", Identity, L2, true, true, TIMED_RES, |c, n| {
            commutator(c, n, |r| r.div)
        }),
        spec!("commutator-laplacian", Identity, L2, true, true, TIMED_RES, |c, n| {
            commutator(c, n, |r| r.laplacian)
        }),
        spec!("commutator-second", Identity, L2, true, true, TIMED_RES, |c, n| {
            commutator(c, n, |r| r.second)
        }),
        spec!("commutator-third", Identity, L2, true, true, ID_RES, |c, n| {
            commutator(c, n, |r| r.third)
        }),
        spec!("boundary-normal-rate", Identity, LInf, true, true, TIMED_RES, |c, n| {
            boundary(c, n, true)
        }),
        spec!("boundary-area-rate", Identity, LInf, true, true, TIMED_RES, |c, n| {
            boundary(c, n, false)
        }),
        spec!("projection-second", Identity, LInf, false, false, ID_RES, |c, n| {
            projection(c, n, true)
        }),
        spec!("projection-third", Identity, LInf, false, false, HIGH_RES, |c, n| {
            projection(c, n, false)
        }),
        spec!("pressure-equation", Identity, LInf, true, false, ID_RES, pressure),
        spec!("vacuum-ratio-0", Estimate, L2, false, false, EST_RES, |_, n| vacuum_ratio(n, 0)),
        spec!("vacuum-ratio-1", Estimate, L2, false, false, EST_RES, |_, n| vacuum_ratio(n, 1)),
        spec!("vacuum-ratio-2", Estimate, L2, false, false, EST_RES, |_, n| vacuum_ratio(n, 2)),
        spec!("trace-l1", Estimate, L2, false, false, EST_RES, |_, n| trace(n, 1)),
        spec!("trace-l2", Estimate, L2, false, false, EST_RES, |_, n| trace(n, 2)),
        spec!("divcurl-0", Estimate, LInf, false, false, EST_RES, |c, n| divcurl(c, n, 0)),
        spec!("divcurl-1", Estimate, LInf, false, false, EST_RES, |c, n| divcurl(c, n, 1)),
        spec!("elliptic-2", Estimate, L2, false, false, EST_RES, |c, n| elliptic(c, n, 2)),
        spec!("elliptic-3", Estimate, L2, false, false, EST_RES, |c, n| elliptic(c, n, 3)),
    ]
}

pub fn check_names() -> Vec<String> {
    registry().iter().map(|s| s.name.to_string()).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// Check names; all checks when absent.
    pub checks: Vec<String>,
    /// Replaces each check's default resolutions.
    pub resolutions: Option<Vec<usize>>,
    pub seed: u64,
    pub dt_scale: f64,
    /// Replace every metric by a non-symmetric one.
    pub corrupt_metric: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            checks: check_names(),
            resolutions: None,
            seed: 0,
            dt_scale: 0.06,
            corrupt_metric: false,
        }
    }
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let known = check_names();
        if let Some(bad) = self.checks.iter().find(|c| !known.contains(c)) {
            return Err(Error::Config(format!("unknown check '{bad}'")));
        }
        if let Some(r) = &self.resolutions {
            if r.len() < 2 || r.windows(2).any(|w| w[1] <= w[0]) || r[0] < 8 || r.iter().any(|v| v % 2 != 0) {
                return Err(Error::Config(format!(
                    "resolutions must be at least two increasing even values >= 8, got {r:?}"
                )));
            }
        }
        if !(self.dt_scale > 0.0) {
            return Err(Error::Config(format!("dt_scale must be positive, got {}", self.dt_scale)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub reports: Vec<ResidualReport>,
    /// Names of checks whose verdict is not pass or exact.
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn verdict(spec: &CheckSpec, res: &[usize], vals: &[f64]) -> (Vec<Option<f64>>, Status, Option<String>) {
    match spec.kind {
        CheckKind::Identity => {
            let h: Vec<f64> = res.iter().map(|n| 1.0 / *n as f64).collect();
            let (orders, status) = observed_orders(&h, vals);
            if status == "exact" {
                return (orders, Status::Exact, Some(format!("below the {ORDER_FLOOR:e} floor")));
            }
            let finest = *vals.last().unwrap_or(&f64::INFINITY);
            let low = orders.iter().flatten().any(|o| *o < MIN_ORDER - ORDER_SLACK);
            // with no measurable pair the residual must have reached the floor
            let measured = orders.iter().flatten().next().is_some() || finest < ORDER_FLOOR;
            let ok = finest <= IDENTITY_TOL && !low && measured && status != "unreliable";
            let note = format!("finest {finest:.3e}, {status}");
            (orders, if ok { Status::Pass } else { Status::Fail }, Some(note))
        }
        CheckKind::Estimate => {
            let growth: Vec<f64> = vals.windows(2).map(|w| w[1] / w[0]).collect();
            let ok = vals.iter().all(|v| v.is_finite() && *v > 0.0)
                && growth.iter().all(|g| *g < GROWTH_LIMIT);
            let g: Vec<String> = growth.iter().map(|g| format!("{g:.3}")).collect();
            let note = format!("growth {}", g.join(" "));
            (vec![None; vals.len().saturating_sub(1)], if ok { Status::Pass } else { Status::Fail }, Some(note))
        }
    }
}

/// Run one check over its resolutions.
pub fn run_check(spec: &CheckSpec, ctx: &Ctx, resolutions: Option<&[usize]>) -> Vec<ResidualReport> {
    let res = resolutions.unwrap_or(spec.resolutions);
    let report = |n: usize, residual: f64, order: Option<f64>, status: Status, note: Option<String>| ResidualReport {
        check_name: spec.name.to_string(),
        kind: spec.kind,
        norm_used: spec.norm,
        residual,
        resolution: n,
        dt: spec.timed.then(|| ctx.dt(n)),
        convergence_order: order,
        status,
        note,
    };
    let mut vals = Vec::with_capacity(res.len());
    for &n in res {
        match (spec.eval)(ctx, n) {
            Ok(v) => vals.push(v),
            Err(e) => {
                let status = match e {
                    Error::Invariant(_) => Status::InvariantViolation,
                    _ => Status::Error,
                };
                return vec![report(n, f64::INFINITY, None, status, Some(e.to_string()))];
            }
        }
    }
    let (orders, status, note) = verdict(spec, res, &vals);
    res.iter()
        .zip(&vals)
        .enumerate()
        .map(|(i, (&n, &v))| {
            let o = if i == 0 { None } else { orders[i - 1] };
            report(n, v, o, status, note.clone())
        })
        .collect()
}

/// Run the selected checks concurrently; reports keep registry order and
/// failures are collected rather than short-circuited.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let ctx = Ctx {
        seed: cfg.seed,
        corrupt_metric: cfg.corrupt_metric,
        dt_scale: cfg.dt_scale,
    };
    let specs: Vec<CheckSpec> = registry()
        .into_iter()
        .filter(|s| cfg.checks.iter().any(|c| c == s.name))
        .collect();
    let res = cfg.resolutions.as_deref();
    let per_check: Vec<Vec<ResidualReport>> = std::thread::scope(|sc| {
        let handles: Vec<_> = specs
            .iter()
            .map(|s| sc.spawn(move || run_check(s, &ctx, res)))
            .collect();
        handles
            .into_iter()
            .zip(&specs)
            .map(|(h, s)| {
                h.join().unwrap_or_else(|_| {
                    vec![ResidualReport {
                        check_name: s.name.to_string(),
                        kind: s.kind,
                        norm_used: s.norm,
                        residual: f64::INFINITY,
                        resolution: 0,
                        dt: None,
                        convergence_order: None,
                        status: Status::Error,
                        note: Some("check panicked".into()),
                    }]
                })
            })
            .collect()
    });
    let failures = per_check
        .iter()
        .filter(|r| r.iter().any(|x| !matches!(x.status, Status::Pass | Status::Exact)))
        .map(|r| r[0].check_name.clone())
        .collect();
    Ok(SuiteReport {
        reports: per_check.into_iter().flatten().collect(),
        failures,
    })
}

/// Human-readable table, one line per check and resolution.
pub fn format_table(reports: &[ResidualReport]) -> String {
    let mut s = format!(
        "{:<24} {:>8} {:>5} {:>12} {:>10} {:>8}  {}\n",
        "check", "kind", "n", "residual", "order", "norm", "status"
    );
    for r in reports {
        let kind = match r.kind {
            CheckKind::Identity => "identity",
            CheckKind::Estimate => "estimate",
        };
        let order = r.convergence_order.map_or("n/a".to_string(), |o| format!("{o:.2}"));
        let norm = match r.norm_used {
            Norm::LInf => "Linf",
            Norm::L2 => "L2",
        };
        let status = serde_json::to_value(r.status)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default();
        s += &format!(
            "{:<24} {:>8} {:>5} {:>12.3e} {:>10} {:>8}  {}\n",
            r.check_name, kind, r.resolution, r.residual, order, norm, status
        );
    }
    s
}
