//! Browser bindings: each call regenerates one month of the four-region
//! scenario and returns an SVG string.

use std::collections::BTreeMap;

use latency_regions::aggregate::{aggregate_cells, group_by_cell, metric_values, Metric};
use latency_regions::export::{
    clustering_svg, metric_svg, volatility_svg, CATEGORICAL, SEQUENTIAL,
};
use latency_regions::geo::{build_contiguity, CellId, Tessellation, DEFAULT_HEX_EDGE_M};
use latency_regions::interpolate::{make_grid, samples_from, InterpolatorConfig, SamplePoint};
use latency_regions::regionalize::{skater_partition, ContiguityGraph, Objective, SkaterParams};
use latency_regions::synth::{generate, PlantedScenario};
use latency_regions::volatility::{volatility_map, VolatilityParams};
use latency_regions::{Error, Result};
use wasm_bindgen::prelude::*;

const SPACING: f64 = 150.0;
const FINE_EDGE: f64 = 200.0;

struct Month {
    samples: Vec<SamplePoint>,
    hex: Tessellation,
}

fn month(seed: u32, points: usize) -> Result<Month> {
    let mut s = PlantedScenario::four_regions(seed as u64);
    s.months = 1;
    s.points_per_month = points;
    let data = generate(&s)?;
    Ok(Month {
        samples: samples_from(&data.measurements, s.origin),
        hex: Tessellation::hex(DEFAULT_HEX_EDGE_M, s.origin)?,
    })
}

fn interpolator(method: &str, param: f64) -> Result<InterpolatorConfig> {
    let cfg = match method {
        "idw" => InterpolatorConfig::Idw {
            p: param,
            neighbors: Some(16),
        },
        "idw-global" => InterpolatorConfig::idw(param),
        "loess" => InterpolatorConfig::Loess { span: param },
        "stbkr" => InterpolatorConfig::Stbkr { c: param, k: 30 },
        other => return Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn cell_means(
    m: &Month,
    cfg: InterpolatorConfig,
    t: &Tessellation,
) -> Result<BTreeMap<CellId, f64>> {
    let grid = make_grid(&m.samples, cfg, None, SPACING)?;
    let aggs = aggregate_cells(grid.iter(), t, 1)?;
    Ok(metric_values(&aggs, Metric::Mean))
}

pub fn render_surface(seed: u32, points: usize, method: &str, param: f64) -> Result<String> {
    let m = month(seed, points)?;
    let fine = Tessellation::hex(FINE_EDGE, m.hex.origin())?;
    let values = cell_means(&m, interpolator(method, param)?, &fine)?;
    Ok(metric_svg(&values, &fine, &SEQUENTIAL, "ms"))
}

pub fn render_regions(
    seed: u32,
    points: usize,
    n_clusters: usize,
    floor: usize,
    objective: &str,
) -> Result<String> {
    let m = month(seed, points)?;
    let values = cell_means(&m, interpolator("idw", 2.0)?, &m.hex)?;
    let g = ContiguityGraph::from_scalar(&values, &m.hex)?;
    let c = skater_partition(
        &g,
        SkaterParams {
            n_clusters,
            floor,
            objective: objective.parse()?,
        },
    )?;
    Ok(clustering_svg(&c, &m.hex, &CATEGORICAL))
}

pub fn render_volatility(
    seed: u32,
    points: usize,
    n_clusters: usize,
    floor: usize,
    replicates: usize,
) -> Result<String> {
    let m = month(seed, points)?;
    let mut cell_points =
        group_by_cell(m.samples.iter().map(|s| (s.location, s.latency_ms)), &m.hex);
    let contiguity = build_contiguity(&cell_points.keys().cloned().collect(), &m.hex)?;
    // sparse months leave islands; keep the biggest one
    let comp = contiguity.components();
    let mut sizes = BTreeMap::new();
    for &c in &comp {
        *sizes.entry(c).or_insert(0usize) += 1;
    }
    let main = sizes
        .iter()
        .max_by_key(|(c, n)| (**n, std::cmp::Reverse(**c)))
        .map(|(c, _)| *c);
    for (cell, c) in contiguity.cells.iter().zip(&comp) {
        if Some(*c) != main {
            cell_points.remove(cell);
        }
    }
    let contiguity = build_contiguity(&cell_points.keys().cloned().collect(), &m.hex)?;
    let params = VolatilityParams {
        skater: SkaterParams {
            n_clusters,
            floor,
            objective: Objective::Ssd,
        },
        metric: Metric::Mean,
        n_replicates: replicates,
        seed: seed as u64,
    };
    let v = volatility_map(&cell_points, &contiguity, params)?;
    Ok(volatility_svg(&v, &m.hex, &SEQUENTIAL))
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

/// Interpolated surface drawn on small hexes.
#[wasm_bindgen]
pub fn surface(
    seed: u32,
    points: usize,
    method: &str,
    param: f64,
) -> std::result::Result<String, JsError> {
    js(render_surface(seed, points, method, param))
}

/// SKATER regions over mean interpolated latency per hex.
#[wasm_bindgen]
pub fn regions(
    seed: u32,
    points: usize,
    n_clusters: usize,
    floor: usize,
    objective: &str,
) -> std::result::Result<String, JsError> {
    js(render_regions(seed, points, n_clusters, floor, objective))
}

/// Bootstrap volatility of the regions built from raw measurements.
#[wasm_bindgen]
pub fn volatility(
    seed: u32,
    points: usize,
    n_clusters: usize,
    floor: usize,
    replicates: usize,
) -> std::result::Result<String, JsError> {
    js(render_volatility(
        seed, points, n_clusters, floor, replicates,
    ))
}
