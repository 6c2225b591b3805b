//! Comparison of two run directories.

use crate::error::{Error, Result};
use crate::linalg::{trace_distance, CMat, C64};
use serde::Serialize;
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareMetric {
    /// ½‖ρ_A − ρ_B‖₁ at every time in both rho.csv files.
    TraceDistance,
    /// Per-channel deviations of observables.csv.
    Channel,
}

impl std::str::FromStr for CompareMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trace_distance" => Ok(CompareMetric::TraceDistance),
            "channel" => Ok(CompareMetric::Channel),
            _ => Err(Error::Config(format!(
                "unknown metric \"{s}\" (expected trace_distance or channel)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelDeviation {
    pub name: String,
    pub max_abs: f64,
    pub mean_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub metric: CompareMetric,
    pub channels: Vec<ChannelDeviation>,
    /// (t, trace distance)
    pub trace_distance: Vec<(f64, f64)>,
}

impl CompareReport {
    pub fn max_trace_distance(&self) -> f64 {
        self.trace_distance.iter().map(|x| x.1).fold(0.0, f64::max)
    }

    pub fn mean_trace_distance(&self) -> f64 {
        if self.trace_distance.is_empty() {
            return 0.0;
        }
        self.trace_distance.iter().map(|x| x.1).sum::<f64>() / self.trace_distance.len() as f64
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelDeviation> {
        self.channels.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for CompareReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.metric {
            CompareMetric::Channel => {
                writeln!(f, "channel,max_abs,mean_abs")?;
                for c in &self.channels {
                    writeln!(f, "{},{:e},{:e}", c.name, c.max_abs, c.mean_abs)?;
                }
            }
            CompareMetric::TraceDistance => {
                writeln!(f, "t,trace_distance")?;
                for (t, d) in &self.trace_distance {
                    writeln!(f, "{t},{d:e}")?;
                }
                writeln!(
                    f,
                    "# max {:e} mean {:e}",
                    self.max_trace_distance(),
                    self.mean_trace_distance()
                )?;
            }
        }
        Ok(())
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.first().map(String::as_str) != Some("t") {
        return Err(Error::Config(format!("{}: first column must be t", path.display())));
    }
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("{} row {}: {e}", path.display(), k + 1)))?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn check_times(a: &Table, b: &Table) -> Result<()> {
    if a.rows.len() != b.rows.len() {
        return Err(Error::GridMismatch(format!(
            "{} vs {} sampled times",
            a.rows.len(),
            b.rows.len()
        )));
    }
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        if (ra[0] - rb[0]).abs() > 1e-9 {
            return Err(Error::GridMismatch(format!("time {} vs {}", ra[0], rb[0])));
        }
    }
    Ok(())
}

fn rho_from_row(row: &[f64]) -> Result<CMat> {
    let n = row.len() - 1;
    let d = ((n / 2) as f64).sqrt().round() as usize;
    if 2 * d * d != n {
        return Err(Error::Config(format!("rho row has {n} values, not 2·d²")));
    }
    // row-major in the file
    Ok(CMat::from_fn(d, d, |r, c| {
        let k = 1 + 2 * (r * d + c);
        C64::new(row[k], row[k + 1])
    }))
}

pub fn compare_runs(dir_a: &Path, dir_b: &Path, metric: CompareMetric) -> Result<CompareReport> {
    match metric {
        CompareMetric::Channel => {
            let a = read_table(&dir_a.join("observables.csv"))?;
            let b = read_table(&dir_b.join("observables.csv"))?;
            check_times(&a, &b)?;
            let mut channels = Vec::new();
            for (ia, name) in a.header.iter().enumerate().skip(1) {
                let Some(ib) = b.header.iter().position(|n| n == name) else {
                    continue;
                };
                let devs: Vec<f64> = a.rows.iter().zip(&b.rows).map(|(ra, rb)| (ra[ia] - rb[ib]).abs()).collect();
                channels.push(ChannelDeviation {
                    name: name.clone(),
                    max_abs: devs.iter().copied().fold(0.0, f64::max),
                    mean_abs: devs.iter().sum::<f64>() / devs.len().max(1) as f64,
                });
            }
            if channels.is_empty() {
                return Err(Error::GridMismatch("the runs share no observable channels".into()));
            }
            Ok(CompareReport {
                metric,
                channels,
                trace_distance: Vec::new(),
            })
        }
        CompareMetric::TraceDistance => {
            let a = read_table(&dir_a.join("rho.csv"))?;
            let b = read_table(&dir_b.join("rho.csv"))?;
            check_times(&a, &b)?;
            if a.header.len() != b.header.len() {
                return Err(Error::GridMismatch("density matrices of different dimension".into()));
            }
            let trace_distance = a
                .rows
                .iter()
                .zip(&b.rows)
                .map(|(ra, rb)| Ok((ra[0], trace_distance(&rho_from_row(ra)?, &rho_from_row(rb)?))))
                .collect::<Result<_>>()?;
            Ok(CompareReport {
                metric,
                channels: Vec::new(),
                trace_distance,
            })
        }
    }
}
