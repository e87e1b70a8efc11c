//! End-to-end runs: ingest, slice, interpolate, aggregate, regionalize and
//! evaluate, writing every artifact under one output directory together with
//! a manifest of content hashes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::aggregate::{self, group_by_cell, metric_values, CellAggregate, Metric};
use crate::config::{PipelineConfig, Source, UnitSpec};
use crate::error::{Error, Result};
use crate::evaluate::{ari_matrix, median, morans_i, AriMatrix, MoransResult};
use crate::export;
use crate::geo::{
    build_contiguity, project, CellId, Contiguity, GeoPoint, PlanarPoint, Tessellation,
};
use crate::ingest::{
    apply_filters, filter_isp, parse_measurements, partition_slices, Funnel, Measurement,
};
use crate::interpolate::{make_grid, samples_from, GridBounds, Rect};
use crate::regionalize::{skater_partition, Clustering, ContiguityGraph, SkaterParams};
use crate::rng::derive_seed;
use crate::volatility::{volatility_map, VolatilityMap, VolatilityParams};

/// Series name used when the run is not split by ISP.
pub const ALL_SERIES: &str = "all";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Manifest {
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn count_with_suffix(&self, suffix: &str) -> usize {
        self.artifacts
            .iter()
            .filter(|a| a.path.ends_with(suffix))
            .count()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes artifacts under a root directory and records their hashes.
struct ArtifactWriter {
    root: PathBuf,
    manifest: Manifest,
}

impl ArtifactWriter {
    fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest: Manifest::default(),
        })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.manifest.artifacts.push(Artifact {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    fn write_with(&mut self, rel: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(rel, &buf)
    }

    fn write_json(&mut self, rel: &str, v: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(v)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    fn finish(mut self) -> Result<Manifest> {
        self.manifest.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let text = self.manifest.to_json();
        let path = self.root.join("manifest.json");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(self.manifest)
    }
}

/// Reads and parses the configured measurement CSV.
pub fn load_measurements(cfg: &PipelineConfig) -> Result<Vec<Measurement>> {
    let path = cfg.input.path.as_ref().ok_or_else(|| {
        Error::Config("input.path is not set (use --config or pass an input file)".into())
    })?;
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (ms, report) = parse_measurements(file, &cfg.input.schema)?;
    if !report.skipped.is_empty() {
        warn!(
            "{}: skipped {} malformed rows",
            path.display(),
            report.skipped.len()
        );
    }
    Ok(ms)
}

/// Center of the latitude/longitude bounding box.
pub fn bbox_center(ms: &[Measurement]) -> Result<GeoPoint> {
    let first = ms.first().ok_or(Error::EmptyInput)?;
    let (mut lo, mut hi) = (first.location, first.location);
    for m in ms {
        lo.lat = lo.lat.min(m.location.lat);
        lo.lon = lo.lon.min(m.location.lon);
        hi.lat = hi.lat.max(m.location.lat);
        hi.lon = hi.lon.max(m.location.lon);
    }
    GeoPoint::new((lo.lat + hi.lat) / 2.0, (lo.lon + hi.lon) / 2.0)
}

/// Builds the configured tessellation. The projection origin comes from the
/// config, else the polygon file, else the data.
pub fn resolve_tessellation(cfg: &PipelineConfig, ms: &[Measurement]) -> Result<Tessellation> {
    let origin = cfg.tessellation.origin()?;
    match &cfg.tessellation.unit {
        UnitSpec::Hex => {
            let origin = match origin {
                Some(o) => o,
                None => bbox_center(ms)?,
            };
            Tessellation::hex(cfg.tessellation.edge_length, origin)
        }
        UnitSpec::Polygon(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Tessellation::from_geojson(&text, origin, cfg.tessellation.contiguity.into())
        }
    }
}

#[derive(Debug, Clone)]
pub struct SliceData {
    pub name: String,
    /// Values falling in each cell: grid values or raw latencies.
    pub groups: BTreeMap<CellId, Vec<f64>>,
    pub aggregates: Vec<CellAggregate>,
}

/// Aggregated slices ready for clustering.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub tessellation: Tessellation,
    pub funnel: Funnel,
    pub grid_bounds: Rect,
    /// Per series (`all`, or one per ISP), slices in time order.
    pub series: BTreeMap<String, Vec<SliceData>>,
    /// Pooled values per cell per series, for volatility.
    pub pooled: BTreeMap<String, BTreeMap<CellId, Vec<f64>>>,
    /// Cells with a defined metric in every slice of every series.
    pub cells: BTreeSet<CellId>,
    pub contiguity: Contiguity,
}

fn cell_values(
    cfg: &PipelineConfig,
    ms: &[Measurement],
    t: &Tessellation,
    bounds: &GridBounds,
) -> Result<BTreeMap<CellId, Vec<f64>>> {
    let samples = samples_from(ms, t.origin());
    let mut groups = match cfg.aggregate.source {
        Source::Interpolated => {
            let grid = make_grid(
                &samples,
                cfg.interpolate.interpolator(),
                Some(bounds),
                cfg.interpolate.spacing,
            )?;
            group_by_cell(grid.iter(), t)
        }
        Source::Raw => group_by_cell(samples.iter().map(|s| (s.location, s.latency_ms)), t),
    };
    groups.retain(|_, v| v.len() >= cfg.aggregate.min_count.max(1));
    if groups.is_empty() {
        return Err(Error::EmptySource);
    }
    Ok(groups)
}

fn map_jobs<T: Send, R: Send>(jobs: Vec<T>, f: impl Fn(T) -> R + Sync + Send) -> Vec<R> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.into_iter().map(f).collect()
    }
}

/// Filters, slices and aggregates measurements on a tessellation.
///
/// All slices share one grid (the padded bounding box of the filtered data)
/// and are clustered over the cells every slice covers, so their
/// clusterings are directly comparable.
pub fn prepare(cfg: &PipelineConfig, ms: Vec<Measurement>, t: Tessellation) -> Result<Prepared> {
    cfg.validate()?;
    let (ms, funnel) = apply_filters(ms, cfg.filter_policy());
    if ms.is_empty() {
        return Err(Error::EmptyInput);
    }
    let rect = Rect::bounding(ms.iter().map(|m| project(m.location, t.origin())))
        .expect("nonempty")
        .padded(cfg.interpolate.spacing);
    let bounds = GridBounds::Rect(rect);

    let series_input: Vec<(String, Vec<Measurement>)> = if cfg.filters.isp.is_empty() {
        vec![(ALL_SERIES.to_string(), ms)]
    } else {
        cfg.filters
            .isp
            .iter()
            .map(|isp| (isp.clone(), filter_isp(&ms, isp)))
            .collect()
    };

    let mut jobs = Vec::new();
    for (name, ms) in &series_input {
        if ms.is_empty() {
            return Err(Error::Config(format!("no measurements for isp `{name}`")));
        }
        for (slice, sms) in partition_slices(ms, cfg.slice_spec()) {
            jobs.push((name.clone(), slice, sms));
        }
    }
    let results = map_jobs(jobs, |(series, slice, sms)| {
        let label = slice_label(&series, &slice);
        let run = || -> Result<SliceData> {
            let groups = cell_values(cfg, &sms, &t, &bounds)?;
            let aggregates = aggregate::aggregate_groups(&groups, 1)?;
            Ok(SliceData {
                name: slice.clone(),
                groups,
                aggregates,
            })
        };
        (series, run().map_err(|e| slice_error(label, e)))
    });
    let mut series: BTreeMap<String, Vec<SliceData>> = BTreeMap::new();
    for (name, r) in results {
        series.entry(name).or_default().push(r?);
    }

    let mut cells: Option<BTreeSet<CellId>> = None;
    for slices in series.values() {
        for s in slices {
            let defined: BTreeSet<CellId> = metric_values(&s.aggregates, cfg.aggregate.metric)
                .into_keys()
                .collect();
            cells = Some(match cells {
                None => defined,
                Some(c) => c.intersection(&defined).cloned().collect(),
            });
        }
    }
    let cells = cells.unwrap_or_default();
    if cells.is_empty() {
        return Err(Error::EmptyCellSet);
    }
    info!("{} cells shared by all slices", cells.len());
    let contiguity = build_contiguity(&cells, &t)?;

    let mut pooled = BTreeMap::new();
    if cfg.volatility.enabled {
        for (name, ms) in &series_input {
            let mut groups = cell_values(cfg, ms, &t, &bounds)
                .map_err(|e| slice_error(slice_label(name, "pooled"), e))?;
            groups.retain(|c, _| cells.contains(c));
            pooled.insert(name.clone(), groups);
        }
    }

    Ok(Prepared {
        tessellation: t,
        funnel,
        grid_bounds: rect,
        series,
        pooled,
        cells,
        contiguity,
    })
}

fn slice_label(series: &str, slice: &str) -> String {
    if series == ALL_SERIES {
        slice.to_string()
    } else {
        format!("{series}/{slice}")
    }
}

fn slice_error(slice: String, e: Error) -> Error {
    Error::Slice {
        slice,
        source: Box::new(e),
    }
}

/// Metric values of one slice over the shared cells.
pub fn slice_features(p: &Prepared, s: &SliceData, metric: Metric) -> BTreeMap<CellId, f64> {
    metric_values(&s.aggregates, metric)
        .into_iter()
        .filter(|(c, _)| p.cells.contains(c))
        .collect()
}

pub fn cluster_slice(
    p: &Prepared,
    s: &SliceData,
    metric: Metric,
    params: SkaterParams,
) -> Result<Clustering> {
    let features: BTreeMap<CellId, Vec<f64>> = slice_features(p, s, metric)
        .into_iter()
        .map(|(c, v)| (c, vec![v]))
        .collect();
    let g = ContiguityGraph::new(&p.contiguity, &features)?;
    skater_partition(&g, params)
}

/// Clusterings of every slice, per series.
pub fn cluster_all(
    p: &Prepared,
    metric: Metric,
    params: SkaterParams,
) -> Result<BTreeMap<String, Vec<(String, Clustering)>>> {
    let jobs: Vec<(&String, &SliceData)> = p
        .series
        .iter()
        .flat_map(|(name, slices)| slices.iter().map(move |s| (name, s)))
        .collect();
    let results = map_jobs(jobs, |(name, s)| {
        let c = cluster_slice(p, s, metric, params)
            .map_err(|e| slice_error(slice_label(name, &s.name), e));
        (name.clone(), s.name.clone(), c)
    });
    let mut out: BTreeMap<String, Vec<(String, Clustering)>> = BTreeMap::new();
    for (name, slice, c) in results {
        out.entry(name).or_default().push((slice, c?));
    }
    Ok(out)
}

/// Pairwise ARI between slice clusterings; `None` with fewer than two slices.
pub fn slice_ari(clusterings: &[(String, Clustering)]) -> Result<Option<AriMatrix>> {
    if clusterings.len() < 2 {
        return Ok(None);
    }
    let (names, cs): (Vec<String>, Vec<Clustering>) = clusterings.iter().cloned().unzip();
    ari_matrix(&cs, names).map(Some)
}

/// Median over shared slices of the ARI between each pair of series.
pub fn series_ari(clusterings: &BTreeMap<String, Vec<(String, Clustering)>>) -> Result<AriMatrix> {
    let names: Vec<String> = clusterings.keys().cloned().collect();
    let n = names.len();
    let mut values = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let a: BTreeMap<&String, &Clustering> =
                clusterings[&names[i]].iter().map(|(s, c)| (s, c)).collect();
            let scores: Vec<f64> = clusterings[&names[j]]
                .iter()
                .filter_map(|(s, cb)| {
                    a.get(s)
                        .map(|ca| crate::evaluate::adjusted_rand_index(ca, cb))
                })
                .collect::<Result<_>>()?;
            let m = if scores.is_empty() {
                f64::NAN
            } else {
                median(&scores)
            };
            values[i][j] = m;
            values[j][i] = m;
        }
    }
    Ok(AriMatrix {
        labels: names,
        values,
    })
}

#[derive(Debug, Clone)]
pub struct SeriesResult {
    pub clusterings: Vec<(String, Clustering)>,
    pub ari: Option<AriMatrix>,
    pub median_ari: Option<f64>,
    pub morans: Vec<(String, MoransResult)>,
    pub volatility: Option<VolatilityMap>,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub manifest: Manifest,
    pub tessellation: Tessellation,
    pub series: BTreeMap<String, SeriesResult>,
    pub series_ari: Option<AriMatrix>,
}

/// Runs the configured pipeline from the input file.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun> {
    let ms = load_measurements(cfg)?;
    let t = resolve_tessellation(cfg, &ms)?;
    run_with(cfg, ms, t)
}

fn safe_name(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Runs the pipeline on in-memory measurements and a tessellation.
pub fn run_with(
    cfg: &PipelineConfig,
    ms: Vec<Measurement>,
    t: Tessellation,
) -> Result<PipelineRun> {
    let prep = prepare(cfg, ms, t)?;
    let metric = cfg.aggregate.metric;
    let clusterings = cluster_all(&prep, metric, cfg.skater_params())?;
    let t = &prep.tessellation;
    let hex = t.is_hex();
    let mut w = ArtifactWriter::new(&cfg.out)?;
    w.write_with("funnel.csv", |b| prep.funnel.write_csv(b))?;

    let split = !cfg.filters.isp.is_empty();
    let mut results = BTreeMap::new();
    let mut summary_series = serde_json::Map::new();
    for (k, (name, slices)) in prep.series.iter().enumerate() {
        let dir = if split {
            format!("isp/{}/", safe_name(name))
        } else {
            String::new()
        };
        let cs = &clusterings[name];
        let mut slice_summary = serde_json::Map::new();
        let mut morans = Vec::new();
        for (i, (s, (slice_name, c))) in slices.iter().zip(cs).enumerate() {
            let stem = safe_name(slice_name);
            let aggs: Vec<CellAggregate> = s
                .aggregates
                .iter()
                .filter(|a| prep.cells.contains(&a.cell))
                .cloned()
                .collect();
            let by_cell: BTreeMap<CellId, CellAggregate> =
                aggs.iter().map(|a| (a.cell.clone(), a.clone())).collect();
            w.write_with(&format!("{dir}aggregates/{stem}.csv"), |b| {
                aggregate::write_csv(b, &aggs, hex)
            })?;
            w.write_with(&format!("{dir}clusters/{stem}.csv"), |b| c.write_csv(b))?;
            w.write_json(
                &format!("{dir}clusters/{stem}.geojson"),
                &export::clustering_geojson(c, t, Some(&by_cell)),
            )?;
            w.write(
                &format!("{dir}clusters/{stem}.svg"),
                export::clustering_svg(c, t, &export::CATEGORICAL).as_bytes(),
            )?;
            let mut entry = json!({ "cluster_sizes": c.sizes(), "cells": c.cells.len() });
            if cfg.evaluate.morans_i {
                let values = slice_features(&prep, s, metric);
                let seed = derive_seed(cfg.seed, ((k as u64) << 32) | i as u64);
                match morans_i(
                    &values,
                    &prep.contiguity,
                    cfg.evaluate.weights.into(),
                    cfg.evaluate.permutations,
                    seed,
                ) {
                    Ok(m) => {
                        entry["morans_i"] =
                            json!({ "i": m.i, "expected": m.expected, "pseudo_p": m.pseudo_p });
                        morans.push((slice_name.clone(), m));
                    }
                    Err(e) => warn!("Moran's I skipped for slice `{slice_name}`: {e}"),
                }
            }
            slice_summary.insert(slice_name.clone(), entry);
        }

        let ari = if cfg.evaluate.pairwise_ari {
            slice_ari(cs)?
        } else {
            None
        };
        let median_ari = ari.as_ref().map(|m| median(&m.upper_triangle()));
        if let Some(m) = &ari {
            w.write_with(&format!("{dir}ari_matrix.csv"), |b| m.write_csv(b))?;
        } else if cfg.evaluate.pairwise_ari {
            warn!("series `{name}` has fewer than two slices; no ARI matrix");
        }

        let volatility = match prep.pooled.get(name) {
            Some(points) => {
                let params = VolatilityParams {
                    skater: cfg.skater_params(),
                    metric: cfg.volatility.metric,
                    n_replicates: cfg.volatility.replicates,
                    seed: derive_seed(cfg.seed, u64::MAX - k as u64),
                };
                let v = volatility_map(points, &prep.contiguity, params)
                    .map_err(|e| slice_error(slice_label(name, "pooled"), e))?;
                w.write_with(&format!("{dir}volatility.csv"), |b| v.write_csv(b))?;
                w.write_json(
                    &format!("{dir}volatility.geojson"),
                    &export::volatility_geojson(&v, t),
                )?;
                w.write(
                    &format!("{dir}volatility.svg"),
                    export::volatility_svg(&v, t, &export::SEQUENTIAL).as_bytes(),
                )?;
                Some(v)
            }
            None => None,
        };

        let mut s = json!({
            "slices": Value::Object(slice_summary),
            "median_pairwise_ari": median_ari,
        });
        if let Some(v) = &volatility {
            let mean = v.volatility.iter().sum::<f64>() / v.volatility.len() as f64;
            let max = v.volatility.iter().copied().fold(0.0, f64::max);
            s["volatility"] = json!({ "replicates": v.n_replicates, "mean": mean, "max": max });
        }
        summary_series.insert(name.clone(), s);
        results.insert(
            name.clone(),
            SeriesResult {
                clusterings: cs.clone(),
                ari,
                median_ari,
                morans,
                volatility,
            },
        );
    }

    let series_ari = if split && clusterings.len() >= 2 {
        let m = series_ari(&clusterings)?;
        w.write_with("isp_ari_matrix.csv", |b| m.write_csv(b))?;
        Some(m)
    } else {
        None
    };

    let origin = t.origin();
    let summary = json!({
        "origin": [origin.lat, origin.lon],
        "unit": if hex { "hex".to_string() } else { "polygon".to_string() },
        "edge_length": if hex { Some(cfg.tessellation.edge_length) } else { None },
        "source": match cfg.aggregate.source { Source::Interpolated => "interpolated", Source::Raw => "raw" },
        "metric": metric.name(),
        "n_clusters": cfg.skater.n_clusters,
        "floor": cfg.skater.floor,
        "objective": cfg.skater.objective.to_string(),
        "seed": cfg.seed,
        "cells": prep.cells.len(),
        "funnel": prep.funnel.0.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
        "series": Value::Object(summary_series),
        "isp_ari_matrix": series_ari.as_ref().map(|m| json!({ "labels": m.labels, "values": m.values })),
    });
    w.write_json("summary.json", &summary)?;
    let manifest = w.finish()?;
    Ok(PipelineRun {
        manifest,
        tessellation: prep.tessellation.clone(),
        series: results,
        series_ari,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub series: String,
    pub floor: usize,
    pub n_clusters: usize,
    /// `None` when the floor makes `n_clusters` infeasible.
    pub median_ari: Option<f64>,
}

/// Median pairwise ARI for every `N` in `2..=max_clusters` and every floor.
pub fn sweep(
    p: &Prepared,
    cfg: &PipelineConfig,
    max_clusters: usize,
    floors: &[usize],
) -> Result<Vec<SweepPoint>> {
    let mut jobs = Vec::new();
    for series in p.series.keys() {
        for &floor in floors {
            for n in 2..=max_clusters {
                jobs.push((series.clone(), floor, n));
            }
        }
    }
    let metric = cfg.aggregate.metric;
    let results = map_jobs(jobs, |(series, floor, n_clusters)| -> Result<SweepPoint> {
        let params = SkaterParams {
            n_clusters,
            floor,
            objective: cfg.skater.objective,
        };
        let mut cs = Vec::new();
        for s in &p.series[&series] {
            match cluster_slice(p, s, metric, params) {
                Ok(c) => cs.push((s.name.clone(), c)),
                Err(Error::InfeasibleFloor { .. }) => {
                    return Ok(SweepPoint {
                        series,
                        floor,
                        n_clusters,
                        median_ari: None,
                    })
                }
                Err(e) => return Err(slice_error(slice_label(&series, &s.name), e)),
            }
        }
        let median_ari = slice_ari(&cs)?.map(|m| median(&m.upper_triangle()));
        Ok(SweepPoint {
            series,
            floor,
            n_clusters,
            median_ari,
        })
    });
    results.into_iter().collect()
}

/// CSV with header `series,floor,n_clusters,median_ari`; infeasible points
/// leave the last column empty.
pub fn write_sweep_csv<W: std::io::Write>(out: W, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["series", "floor", "n_clusters", "median_ari"])?;
    for p in points {
        w.write_record([
            p.series.clone(),
            p.floor.to_string(),
            p.n_clusters.to_string(),
            p.median_ari.map(|v| format!("{v:.6}")).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<sweep>", e))?;
    Ok(())
}

/// Projects measurements and pairs them with their latencies.
pub fn measurement_points(ms: &[Measurement], origin: GeoPoint) -> Vec<(PlanarPoint, f64)> {
    ms.iter()
        .map(|m| (project(m.location, origin), m.latency_ms))
        .collect()
}
