//! Run artifacts: energy CSV, per-step JSON lines, final grid dumps.

use super::config::ScenarioConfig;
use super::system::SystemState;
use super::{RunSummary, StepRecord};
use crate::error::{Error, Result};
use crate::geometry::{compute_geometry_with, ClosedCurve, GeometryReport};
use crate::spectral::Frame;
use serde_json::{json, Value};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const ENERGY_HEADER: [&str; 8] = ["t", "E0", "E1", "E2", "E3", "Kcal", "Ecal", "taylor_margin"];

fn parse_err(e: impl std::fmt::Display) -> Error {
    Error::Parse(e.to_string())
}

/// Shortest round-trip text for a float, with `inf` for the unbounded ℰ.
pub fn fmt(v: f64) -> String {
    format!("{v:e}")
}

/// The JSON object written for one step.
pub fn step_json(r: &StepRecord) -> Value {
    let mut v = match &r.report {
        Some(rep) => serde_json::to_value(rep).unwrap_or(Value::Null),
        None => json!({
            "t": r.t, "E0": r.e0, "E1": null, "E2": null, "E3": null,
            "Kcal": null, "Ecal": null, "M": null, "L": null,
            "taylor_margin": null, "flags": ["not-reported"],
        }),
    };
    if let Value::Object(m) = &mut v {
        m.insert("step".into(), json!(r.step));
        m.insert("E0".into(), json!(r.e0));
        m.insert("vol_plus".into(), json!(r.vol_plus));
        m.insert("vol_minus".into(), json!(r.vol_minus));
        if let Some(d) = &r.diagnostics {
            m.insert("diagnostics".into(), serde_json::to_value(d).unwrap_or(Value::Null));
        }
    }
    v
}

/// Energy CSV row, or None on steps without a full report.
pub fn energy_row(r: &StepRecord) -> Option<Vec<String>> {
    let rep = r.report.as_ref()?;
    Some(vec![
        fmt(rep.t),
        fmt(r.e0),
        fmt(rep.e1),
        fmt(rep.e2),
        fmt(rep.e3),
        fmt(rep.k_cal),
        rep.e_cal.map_or("inf".to_string(), fmt),
        fmt(rep.taylor_margin),
    ])
}

pub struct StepSink {
    csv: Option<csv::Writer<File>>,
    json: Option<BufWriter<File>>,
}

impl StepSink {
    pub fn open(cfg: &ScenarioConfig) -> Result<Self> {
        let Some(dir) = &cfg.output.dir else {
            return Ok(Self { csv: None, json: None });
        };
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join(cfg.output.energy_csv())).map_err(parse_err)?;
        w.write_record(ENERGY_HEADER).map_err(parse_err)?;
        let j = BufWriter::new(File::create(dir.join(cfg.output.step_json()))?);
        Ok(Self {
            csv: Some(w),
            json: Some(j),
        })
    }

    pub fn write(&mut self, r: &StepRecord) -> Result<()> {
        if let (Some(w), Some(row)) = (&mut self.csv, energy_row(r)) {
            w.write_record(&row).map_err(parse_err)?;
        }
        if let Some(j) = &mut self.json {
            writeln!(j, "{}", step_json(r))?;
        }
        Ok(())
    }

    pub fn finish(&mut self) -> Result<()> {
        if let Some(w) = &mut self.csv {
            w.flush()?;
        }
        if let Some(j) = &mut self.json {
            j.flush()?;
        }
        Ok(())
    }
}

/// Grid dump `y1,y2,<names…>` keyed by the label coordinates.
pub fn write_grid_csv(path: &Path, labels: &Frame, names: &[&str], comps: &[&[f64]]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(parse_err)?;
    let mut head = vec!["y1", "y2"];
    head.extend_from_slice(names);
    w.write_record(&head).map_err(parse_err)?;
    for k in 0..labels.n_nodes() {
        let mut row = vec![fmt(labels.pos[0][k]), fmt(labels.pos[1][k])];
        row.extend(comps.iter().map(|c| fmt(c[k])));
        w.write_record(&row).map_err(parse_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a grid dump back as (header, rows).
pub fn read_grid_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(parse_err)?;
    let head = r.headers().map_err(parse_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(parse_err)?;
        rows.push(
            rec.iter()
                .map(|s| s.parse::<f64>().map_err(parse_err))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok((head, rows))
}

pub fn dump_state(dir: &Path, state: &SystemState, eps1: f64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let p = &state.plasma;
    let v = &state.vacuum;
    let pl = &p.map.labels;
    let vl = &v.map.labels;
    let mut out = Vec::new();
    let mut put = |name: &str, f: &Frame, names: &[&str], comps: &[&[f64]]| -> Result<()> {
        let path = dir.join(name);
        write_grid_csv(&path, f, names, comps)?;
        out.push(path);
        Ok(())
    };
    let x = &p.map.current.pos;
    put("plasma_x.csv", pl, &["x1", "x2"], &[&x[0], &x[1]])?;
    put("plasma_u.csv", pl, &["u_1", "u_2"], &[p.u.comp(0), p.u.comp(1)])?;
    put("plasma_beta.csv", pl, &["beta_1", "beta_2"], &[p.beta.comp(0), p.beta.comp(1)])?;
    put("plasma_q.csv", pl, &["q"], &[&p.q_plus])?;
    let xv = &v.map.current.pos;
    put("vacuum_x.csv", vl, &["x1", "x2"], &[&xv[0], &xv[1]])?;
    put("vacuum_varpi.csv", vl, &["varpi_1", "varpi_2"], &[v.varpi.comp(0), v.varpi.comp(1)])?;
    put("vacuum_xi.csv", vl, &["xi"], &[&v.xi])?;
    let curve = ClosedCurve::new(p.map.current.ring(0), false)?;
    let gpath = dir.join("gamma.csv");
    curve.write_csv(File::create(&gpath)?)?;
    out.push(gpath);
    let geom = compute_geometry_with(&curve, eps1)?;
    let jpath = dir.join("geometry.json");
    serde_json::to_writer_pretty(File::create(&jpath)?, &GeometryReport::from(&geom)).map_err(parse_err)?;
    out.push(jpath);
    Ok(out)
}

pub fn write_final(cfg: &ScenarioConfig, state: &SystemState, summary: &RunSummary) -> Result<()> {
    let Some(dir) = &cfg.output.dir else {
        return Ok(());
    };
    if cfg.output.dump_final {
        dump_state(dir, state, cfg.eps1)?;
    }
    serde_json::to_writer_pretty(File::create(dir.join("summary.json"))?, summary).map_err(parse_err)?;
    Ok(())
}
