//! Runs a scenario and serializes its boundaries.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use swipt::fading::{sample_rician, FadingEnsemble};
use swipt::region::{self, REBoundary, REPoint, Scheme, SchemeKind};
use swipt::simo::SelectionStats;
use swipt::{Error, Result};

use crate::config::ScenarioConfig;

/// Relative slack of the nesting checks.
pub const NESTING_TOL: f64 = 5e-3;
/// Relative slack of the chord test on concave boundaries.
pub const CONCAVITY_TOL: f64 = 2e-3;

pub const CSV_COLUMNS: [&str; 6] = [
    "q_target_watts",
    "avg_energy_watts",
    "avg_rate_bits",
    "lambda_star",
    "beta_star",
    "iterations",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeRecord {
    pub scheme: Scheme,
    pub r_max_bits: Option<f64>,
    pub q_max_microwatts: Option<f64>,
    pub csv: Option<PathBuf>,
    pub selection: Option<SelectionStats>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub schemes: Vec<SchemeRecord>,
    pub checks: Vec<Check>,
    #[serde(skip)]
    pub boundaries: Vec<REBoundary>,
}

impl ExperimentReport {
    pub fn failed(&self) -> bool {
        self.schemes.iter().any(|s| s.error.is_some()) || self.checks.iter().any(|c| !c.passed)
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn point_fields(p: &REPoint) -> [String; 6] {
    [
        fmt_f64(p.q_target),
        fmt_f64(p.energy),
        fmt_f64(p.rate),
        fmt_f64(p.lambda),
        fmt_f64(p.beta),
        p.iterations.to_string(),
    ]
}

/// Writes one boundary as CSV. Corner points and selection statistics go in
/// leading `#` lines so the file can be read back into the same boundary.
pub fn write_boundary_csv(path: &Path, boundary: &REBoundary) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "# scheme: {}", boundary.scheme)?;
    writeln!(out, "# corner_rate_max: {}", point_fields(&boundary.corner_rate_max).join(","))?;
    writeln!(out, "# corner_energy_max: {}", point_fields(&boundary.corner_energy_max).join(","))?;
    if let Some(s) = &boundary.selection {
        writeln!(
            out,
            "# selection: {},{},{}",
            s.searched, s.early_exits, s.size_bound_violations
        )?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(CSV_COLUMNS).map_err(csv_error)?;
        for p in &boundary.points {
            w.write_record(point_fields(p)).map_err(csv_error)?;
        }
        w.flush()?;
    }
    fs::write(path, out)?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn parse_point(scheme: Scheme, fields: &[&str]) -> std::result::Result<REPoint, String> {
    if fields.len() != CSV_COLUMNS.len() {
        return Err(format!("expected {} fields, found {}", CSV_COLUMNS.len(), fields.len()));
    }
    let real = |i: usize| {
        fields[i]
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("{}: '{}' is not a number", CSV_COLUMNS[i], fields[i]))
    };
    Ok(REPoint {
        scheme,
        q_target: real(0)?,
        energy: real(1)?,
        rate: real(2)?,
        lambda: real(3)?,
        beta: real(4)?,
        iterations: fields[5]
            .trim()
            .parse()
            .map_err(|_| format!("iterations: '{}' is not a count", fields[5]))?,
    })
}

/// Reads a file produced by [`write_boundary_csv`].
pub fn read_boundary_csv(path: &Path) -> Result<REBoundary> {
    let text = fs::read_to_string(path)?;
    let origin = path.display().to_string();
    let err = |line: usize, message: String| Error::Parse {
        path: origin.clone(),
        line,
        message,
    };
    let mut scheme = None;
    let mut corners = [None, None];
    let mut selection = None;
    for (n, line) in text.lines().enumerate() {
        let Some(meta) = line.strip_prefix("# ") else {
            continue;
        };
        let Some((key, value)) = meta.split_once(": ") else {
            continue;
        };
        match key {
            "scheme" => scheme = Some(value.parse::<Scheme>().map_err(|e| err(n + 1, e.to_string()))?),
            "corner_rate_max" | "corner_energy_max" => {
                let s = scheme.ok_or_else(|| err(n + 1, "corner before scheme line".into()))?;
                let fields: Vec<&str> = value.split(',').collect();
                let p = parse_point(s, &fields).map_err(|m| err(n + 1, m))?;
                corners[usize::from(key == "corner_energy_max")] = Some(p);
            }
            "selection" => {
                let v: Vec<usize> = value
                    .split(',')
                    .map(|f| f.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| err(n + 1, format!("bad selection record '{value}'")))?;
                let [searched, early_exits, size_bound_violations] = v[..] else {
                    return Err(err(n + 1, "selection record needs 3 fields".into()));
                };
                selection = Some(SelectionStats {
                    searched,
                    early_exits,
                    size_bound_violations,
                });
            }
            _ => {}
        }
    }
    let scheme = scheme.ok_or_else(|| err(1, "missing scheme line".into()))?;
    let [Some(corner_rate_max), Some(corner_energy_max)] = corners else {
        return Err(err(1, "missing corner lines".into()));
    };

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error)?.clone();
    if header.iter().ne(CSV_COLUMNS) {
        return Err(err(0, format!("unexpected columns {header:?}")));
    }
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let fields: Vec<&str> = record.iter().collect();
        points.push(parse_point(scheme, &fields).map_err(|m| err(line, m))?);
    }
    Ok(REBoundary {
        scheme,
        points,
        corner_rate_max,
        corner_energy_max,
        selection,
    })
}

fn find(boundaries: &[REBoundary], kind: SchemeKind, csit: bool) -> Option<&REBoundary> {
    boundaries.iter().find(|b| b.scheme == Scheme::new(kind, csit))
}

/// Shape and nesting checks on whichever boundaries are present.
pub fn boundary_checks(boundaries: &[REBoundary]) -> Vec<Check> {
    let mut checks = Vec::new();
    for b in boundaries {
        let bad = b.monotonicity_violations();
        checks.push(Check::new(
            format!("monotone/{}", b.scheme),
            bad.is_empty(),
            format!("{} rate increases", bad.len()),
        ));
        if matches!(b.scheme.kind, SchemeKind::Dps | SchemeKind::Ups) {
            let bad = b.concavity_violations(CONCAVITY_TOL);
            checks.push(Check::new(
                format!("concave/{}", b.scheme),
                bad.is_empty(),
                format!("chord violations at points {bad:?}"),
            ));
        }
    }
    use SchemeKind::*;
    let mut pairs = Vec::new();
    for csit in [false, true] {
        pairs.push(((UpperBound, csit), (Dps, csit)));
        pairs.push(((Dps, csit), (TimeSwitching, csit)));
        pairs.push(((Ups, csit), (AntennaSwitchingExhaustive, csit)));
        pairs.push(((AntennaSwitchingExhaustive, csit), (AntennaSwitchingApprox, csit)));
    }
    pairs.push(((Dps, true), (Dps, false)));
    pairs.push(((Ups, true), (Ups, false)));
    for ((ka, ca), (kb, cb)) in pairs {
        let (Some(a), Some(b)) = (find(boundaries, ka, ca), find(boundaries, kb, cb)) else {
            continue;
        };
        let name = format!("encloses/{}/{}", a.scheme, b.scheme);
        checks.push(match region::region_dominates(a, b, NESTING_TOL) {
            Ok(d) => Check::new(
                name,
                d.holds,
                format!(
                    "worst relative shortfall {:.3e} at {:.4} uW",
                    d.worst_violation,
                    d.at_energy * 1e6
                ),
            ),
            Err(e) => Check::new(name, false, e.to_string()),
        });
    }
    checks
}

/// Traces every configured scheme on one shared ensemble.
pub fn trace_all(cfg: &ScenarioConfig, ensemble: &FadingEnsemble) -> Vec<(Scheme, Result<REBoundary>)> {
    cfg.effective_schemes()
        .into_iter()
        .map(|s| (s, region::trace_boundary(ensemble, &cfg.link, s, cfg.n_points, &cfg.trace)))
        .collect()
}

/// Writes `<scheme>.csv` per scheme, `summary.json` and `plot.gp` into the
/// output directory; on any failure also `error.json`.
pub fn run_experiment(cfg: &ScenarioConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let ensemble = sample_rician(&cfg.channel, cfg.num_states, cfg.seed)?;
    fs::create_dir_all(&cfg.out_dir)?;

    let mut records = Vec::new();
    let mut boundaries = Vec::new();
    for (scheme, result) in trace_all(cfg, &ensemble) {
        let mut record = SchemeRecord {
            scheme,
            r_max_bits: None,
            q_max_microwatts: None,
            csv: None,
            selection: None,
            error: None,
        };
        match result {
            Ok(b) => {
                let path = cfg.out_dir.join(format!("{scheme}.csv"));
                write_boundary_csv(&path, &b)?;
                record.r_max_bits = Some(b.r_max());
                record.q_max_microwatts = Some(b.q_max() * 1e6);
                record.csv = Some(path);
                record.selection = b.selection;
                boundaries.push(b);
            }
            Err(e) => record.error = Some(e.to_string()),
        }
        records.push(record);
    }

    let report = ExperimentReport {
        checks: boundary_checks(&boundaries),
        schemes: records,
        boundaries,
    };
    write_json(&cfg.out_dir.join("summary.json"), &serde_json::json!({
        "scenario": cfg,
        "schemes": report.schemes,
        "checks": report.checks,
        "complete": !report.failed(),
    }))?;
    fs::write(cfg.out_dir.join("plot.gp"), plot_script(&report.boundaries))?;
    let error_path = cfg.out_dir.join("error.json");
    if report.failed() {
        write_error_record(&error_path, &report)?;
    } else if error_path.exists() {
        fs::remove_file(&error_path)?;
    }
    Ok(report)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.into()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_error_record(path: &Path, report: &ExperimentReport) -> Result<()> {
    let errors: Vec<_> = report
        .schemes
        .iter()
        .filter_map(|s| {
            s.error
                .as_ref()
                .map(|e| serde_json::json!({ "scheme": s.scheme.to_string(), "message": e }))
        })
        .collect();
    let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).collect();
    write_json(path, &serde_json::json!({
        "status": "failed",
        "partial_output": !errors.is_empty(),
        "solver_errors": errors,
        "failed_checks": failed,
    }))
}

/// Records a fatal error that happened before any output was written.
pub fn write_fatal_error(out_dir: &Path, error: &str) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_json(&out_dir.join("error.json"), &serde_json::json!({
        "status": "failed",
        "partial_output": false,
        "fatal": error,
    }))
}

/// Gnuplot script drawing every boundary with energy in microwatts.
pub fn plot_script(boundaries: &[REBoundary]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set terminal pngcairo size 900,600\n");
    s.push_str("set output 'region.png'\n");
    s.push_str("set xlabel 'Average harvested energy (uW)'\n");
    s.push_str("set ylabel 'Ergodic capacity (bits/s/Hz)'\n");
    s.push_str("set key bottom left\n");
    s.push_str("set grid\n");
    let lines: Vec<String> = boundaries
        .iter()
        .map(|b| {
            let dash = if b.scheme.csit { 1 } else { 2 };
            format!(
                "'{}.csv' every ::1 using ($1*1e6):3 with lines dashtype {dash} lw 2 title '{}'",
                b.scheme, b.scheme
            )
        })
        .collect();
    if !lines.is_empty() {
        s.push_str("plot ");
        s.push_str(&lines.join(", \\\n     "));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boundary() -> REBoundary {
        let s = Scheme::new(SchemeKind::AntennaSwitchingApprox, true);
        let p = |q: f64, r: f64| REPoint {
            scheme: s,
            q_target: q,
            energy: q * (1.0 + 1e-9),
            rate: r,
            lambda: 1.0 / 3.0,
            beta: 0.1 + 0.2,
            iterations: 17,
        };
        REBoundary {
            scheme: s,
            points: vec![p(0.0, 10.0 / 3.0), p(std::f64::consts::PI * 1e-6, 1e-300)],
            corner_rate_max: p(0.0, 10.0 / 3.0),
            corner_energy_max: p(4e-6, 0.0),
            selection: Some(SelectionStats {
                searched: 5,
                early_exits: 2,
                size_bound_violations: 0,
            }),
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        let b = boundary();
        write_boundary_csv(&path, &b).unwrap();
        assert_eq!(read_boundary_csv(&path).unwrap(), b);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("q_target_watts,avg_energy_watts,avg_rate_bits,lambda_star,beta_star,iterations"));
    }

    #[test]
    fn malformed_csv_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        write_boundary_csv(&path, &boundary()).unwrap();
        let text = fs::read_to_string(&path).unwrap().replace("17\n", "x\n");
        fs::write(&path, text).unwrap();
        assert!(matches!(read_boundary_csv(&path), Err(Error::Parse { .. })));
        fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_boundary_csv(&path).is_err());
    }

    #[test]
    fn plot_script_names_every_file() {
        let s = plot_script(&[boundary()]);
        assert!(s.contains("'as-approx-csit.csv'"));
    }
}
