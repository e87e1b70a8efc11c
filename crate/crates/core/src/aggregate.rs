//! Per-cell latency feature vectors.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};
use crate::geo::{CellId, PlanarPoint, Tessellation};

/// Below this 10th percentile the p90/p10 ratio is reported as undefined.
pub const RATIO_P10_GUARD_MS: f64 = 1e-6;

/// Percentile by linear interpolation between order statistics at rank
/// `p / 100 * (n - 1)`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyValues);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, p))
}

pub(crate) fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let rank = (p.clamp(0.0, 100.0) / 100.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    match sorted.get(lo + 1) {
        Some(&hi) if frac > 0.0 => sorted[lo] + frac * (hi - sorted[lo]),
        _ => sorted[lo],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Metric {
    #[default]
    Mean,
    Std,
    P10,
    P90,
    P95,
    P97_5,
    P99,
    InequalityRatio,
    LatencyReduction,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::Mean,
        Metric::Std,
        Metric::P10,
        Metric::P90,
        Metric::P95,
        Metric::P97_5,
        Metric::P99,
        Metric::InequalityRatio,
        Metric::LatencyReduction,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Mean => "mean",
            Metric::Std => "std",
            Metric::P10 => "p10",
            Metric::P90 => "p90",
            Metric::P95 => "p95",
            Metric::P97_5 => "p97_5",
            Metric::P99 => "p99",
            Metric::InequalityRatio => "ineq_ratio",
            Metric::LatencyReduction => "lat_reduction",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        let alias = match s.as_str() {
            "p97.5" => "p97_5",
            "ratio" | "inequality_ratio" => "ineq_ratio",
            "reduction" | "latency_reduction" => "lat_reduction",
            other => other,
        };
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == alias)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown metric `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellAggregate {
    pub cell: CellId,
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub p10: f64,
    pub p90: f64,
    pub p95: f64,
    pub p97_5: f64,
    pub p99: f64,
    /// `p90 / p10`; `None` when p10 is effectively zero.
    pub inequality_ratio: Option<f64>,
    pub latency_reduction: f64,
}

impl CellAggregate {
    pub fn from_values(cell: CellId, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyValues);
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let pct = |p| percentile_sorted(&sorted, p);
        let (p10, p90) = (pct(10.0), pct(90.0));
        Ok(Self {
            cell,
            count: sorted.len(),
            mean,
            std: var.sqrt(),
            p10,
            p90,
            p95: pct(95.0),
            p97_5: pct(97.5),
            p99: pct(99.0),
            inequality_ratio: (p10 >= RATIO_P10_GUARD_MS).then(|| p90 / p10),
            latency_reduction: p90 - p10,
        })
    }

    pub fn metric(&self, metric: Metric) -> Option<f64> {
        Some(match metric {
            Metric::Mean => self.mean,
            Metric::Std => self.std,
            Metric::P10 => self.p10,
            Metric::P90 => self.p90,
            Metric::P95 => self.p95,
            Metric::P97_5 => self.p97_5,
            Metric::P99 => self.p99,
            Metric::InequalityRatio => return self.inequality_ratio,
            Metric::LatencyReduction => self.latency_reduction,
        })
    }
}

/// Groups `(point, value)` pairs by the cell containing each point.
///
/// Points outside every polygon unit are dropped.
pub fn group_by_cell(
    source: impl IntoIterator<Item = (PlanarPoint, f64)>,
    t: &Tessellation,
) -> BTreeMap<CellId, Vec<f64>> {
    let mut cells: BTreeMap<CellId, Vec<f64>> = BTreeMap::new();
    for (p, v) in source {
        if let Some(cell) = t.point_to_cell(p) {
            cells.entry(cell).or_default().push(v);
        }
    }
    cells
}

/// One aggregate per cell holding at least `min_count` values, in cell order.
///
/// Raw measurements and interpolated grid points go through the same path:
/// pass `grid.iter()` or the projected measurements.
pub fn aggregate_cells(
    source: impl IntoIterator<Item = (PlanarPoint, f64)>,
    t: &Tessellation,
    min_count: usize,
) -> Result<Vec<CellAggregate>> {
    let mut any = false;
    let source = source.into_iter().inspect(|_| any = true);
    let groups = group_by_cell(source, t);
    if !any {
        return Err(Error::EmptySource);
    }
    aggregate_groups(&groups, min_count)
}

pub fn aggregate_groups(
    groups: &BTreeMap<CellId, Vec<f64>>,
    min_count: usize,
) -> Result<Vec<CellAggregate>> {
    groups
        .iter()
        .filter(|(_, v)| v.len() >= min_count.max(1))
        .map(|(cell, values)| CellAggregate::from_values(cell.clone(), values))
        .collect()
}

/// Feature map for one metric; cells where it is undefined are left out with
/// a warning.
pub fn metric_values(aggs: &[CellAggregate], metric: Metric) -> BTreeMap<CellId, f64> {
    let mut out = BTreeMap::new();
    let mut undefined = 0;
    for a in aggs {
        match a.metric(metric) {
            Some(v) => {
                out.insert(a.cell.clone(), v);
            }
            None => undefined += 1,
        }
    }
    if undefined > 0 {
        warn!("{metric} undefined in {undefined} cells; they are excluded");
    }
    out
}

const CSV_TAIL: [&str; 10] = [
    "count",
    "mean",
    "std",
    "p10",
    "p90",
    "p95",
    "p97_5",
    "p99",
    "ineq_ratio",
    "lat_reduction",
];

pub fn write_csv<W: Write>(out: W, aggs: &[CellAggregate], hex: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = if hex {
        vec!["cell_q", "cell_r"]
    } else {
        vec!["unit_id"]
    };
    header.extend(CSV_TAIL);
    w.write_record(&header)?;
    for a in aggs {
        let mut row: Vec<String> = match &a.cell {
            CellId::Hex(h) => vec![h.q.to_string(), h.r.to_string()],
            CellId::Unit(u) => vec![u.clone()],
        };
        row.push(a.count.to_string());
        for v in [a.mean, a.std, a.p10, a.p90, a.p95, a.p97_5, a.p99] {
            row.push(v.to_string());
        }
        row.push(
            a.inequality_ratio
                .map(|r| r.to_string())
                .unwrap_or_default(),
        );
        row.push(a.latency_reduction.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<aggregates>", e))?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<CellAggregate>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let hex = headers.get(0) == Some("cell_q");
    let offset = if hex { 2 } else { 1 };
    let bad = |m: String| Error::InvalidParameter(format!("aggregate csv: {m}"));
    let mut out = Vec::new();
    for record in r.records() {
        let record = record?;
        let num = |i: usize| -> Result<f64> {
            record
                .get(offset + i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(format!("bad value in column {}", CSV_TAIL[i])))
        };
        let cell = if hex {
            let q = record[0].parse().map_err(|_| bad("bad cell_q".into()))?;
            let r = record[1].parse().map_err(|_| bad("bad cell_r".into()))?;
            CellId::hex(q, r)
        } else {
            CellId::Unit(record[0].to_string())
        };
        out.push(CellAggregate {
            cell,
            count: num(0)? as usize,
            mean: num(1)?,
            std: num(2)?,
            p10: num(3)?,
            p90: num(4)?,
            p95: num(5)?,
            p97_5: num(6)?,
            p99: num(7)?,
            inequality_ratio: record.get(offset + 8).and_then(|s| s.parse().ok()),
            latency_reduction: num(9)?,
        });
    }
    Ok(out)
}
