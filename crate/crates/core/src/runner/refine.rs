//! Refinement studies: run a scenario at several resolutions and report
//! observed orders.

use super::config::{Resolution, ScenarioConfig};
use super::run;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Residuals below this are reported as exact and get no order.
pub const ORDER_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RefineLevel {
    pub plasma: Resolution,
    pub vacuum: Resolution,
    /// Defaults to the configured dt scaled with the plasma angular count.
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineRow {
    pub metric: String,
    pub resolutions: Vec<usize>,
    pub values: Vec<f64>,
    /// Observed order between consecutive levels; None below the floor.
    pub orders: Vec<Option<f64>>,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefineTable {
    pub scenario: String,
    pub levels: Vec<RefineLevel>,
    pub rows: Vec<RefineRow>,
}

/// Observed orders log(r_k/r_{k+1}) / log(h_k/h_{k+1}) and a status of
/// `ok`, `exact` (all below the floor) or `unreliable` (non-monotone).
pub fn observed_orders(h: &[f64], r: &[f64]) -> (Vec<Option<f64>>, String) {
    let orders: Vec<Option<f64>> = (0..r.len().saturating_sub(1))
        .map(|k| {
            if r[k] < ORDER_FLOOR || r[k + 1] < ORDER_FLOOR {
                None
            } else {
                Some((r[k] / r[k + 1]).ln() / (h[k] / h[k + 1]).ln())
            }
        })
        .collect();
    let status = if r.iter().all(|v| *v < ORDER_FLOOR) {
        "exact"
    } else if r.windows(2).any(|w| w[1] > w[0] && w[1] >= ORDER_FLOOR) {
        "unreliable"
    } else {
        "ok"
    };
    (orders, status.to_string())
}

/// Default levels: the configured resolution is the finest, each coarser
/// level halves every count and doubles dt.
pub fn default_levels(cfg: &ScenarioConfig, n: usize) -> Result<Vec<RefineLevel>> {
    if n < 2 {
        return Err(Error::Config(format!("a refinement study needs at least 2 levels, got {n}")));
    }
    // Coarsen from the config as far as the 16-node floor allows, refine upward for the rest.
    let dims = [cfg.plasma.radial, cfg.plasma.angular, cfg.vacuum.radial, cfg.vacuum.angular];
    let mut down = 0;
    while down + 1 < n && dims.iter().all(|d| d >> (down + 1) >= 16) {
        down += 1;
    }
    let scale = |v: usize, e: i32| {
        if e >= 0 {
            v << e
        } else {
            (v >> -e) / 2 * 2
        }
    };
    Ok((0..n as i32)
        .map(|i| {
            let e = i - down as i32;
            RefineLevel {
                plasma: Resolution {
                    radial: scale(cfg.plasma.radial, e),
                    angular: scale(cfg.plasma.angular, e),
                },
                vacuum: Resolution {
                    radial: scale(cfg.vacuum.radial, e),
                    angular: scale(cfg.vacuum.angular, e),
                },
                dt: Some(cfg.dt * 2f64.powi(-e)),
            }
        })
        .collect())
}

pub fn refine_study(cfg: &ScenarioConfig, levels: &[RefineLevel]) -> Result<RefineTable> {
    if levels.len() < 2 {
        return Err(Error::Config("a refinement study needs at least 2 levels".into()));
    }
    let mut metrics: Vec<(String, Vec<f64>)> = [
        "e0_drift",
        "volume_drift",
        "max_vacuum_residual",
        "oblique_l2",
        "stationarity",
    ]
    .iter()
    .map(|m| (m.to_string(), Vec::new()))
    .collect();
    let mut h = Vec::new();
    for lv in levels {
        let mut c = cfg.clone();
        c.plasma = lv.plasma;
        c.vacuum = lv.vacuum;
        c.dt = lv
            .dt
            .unwrap_or(cfg.dt * cfg.plasma.angular as f64 / lv.plasma.angular as f64);
        c.output.dir = None;
        c.checks.report_every = usize::MAX / 2;
        let r = run(&c)?;
        let last = r.records.last().and_then(|x| x.diagnostics.as_ref());
        let p0 = &r.initial.plasma;
        let p1 = &r.final_state.plasma;
        let mut stat = p0.u.max_diff(&p1.u).max(p0.beta.max_diff(&p1.beta));
        for d in 0..2 {
            for (a, b) in p0.map.current.pos[d].iter().zip(&p1.map.current.pos[d]) {
                stat = stat.max((a - b).abs());
            }
        }
        let vals = [
            r.summary.e0_drift,
            r.summary.volume_drift,
            r.summary.max_vacuum_residual,
            last.map_or(0.0, |d| d.oblique_l2),
            stat,
        ];
        for (m, v) in metrics.iter_mut().zip(vals) {
            m.1.push(v);
        }
        h.push(1.0 / lv.plasma.radial as f64);
    }
    let rows = metrics
        .into_iter()
        .map(|(metric, values)| {
            let (orders, status) = observed_orders(&h, &values);
            RefineRow {
                metric,
                resolutions: levels.iter().map(|l| l.plasma.radial).collect(),
                values,
                orders,
                status,
            }
        })
        .collect();
    Ok(RefineTable {
        scenario: cfg.scenario.name().to_string(),
        levels: levels.to_vec(),
        rows,
    })
}

impl RefineTable {
    pub fn to_text(&self) -> String {
        let mut s = format!("refinement study: {}\n", self.scenario);
        s += &format!("{:<22}", "metric");
        for l in &self.levels {
            s += &format!(" {:>12}", format!("{}x{}", l.plasma.radial, l.plasma.angular));
        }
        s += "  orders / status\n";
        for r in &self.rows {
            s += &format!("{:<22}", r.metric);
            for v in &r.values {
                s += &format!(" {:>12.3e}", v);
            }
            let o: Vec<String> = r
                .orders
                .iter()
                .map(|o| o.map_or("n/a".into(), |v| format!("{v:.2}")))
                .collect();
            s += &format!("  {} {}\n", o.join(" "), r.status);
        }
        s
    }
}
