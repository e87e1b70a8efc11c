//! Deterministic point interpolators and the regular grid surface.
//!
//! Three estimators are provided: inverse distance weighting, local linear
//! regression with tri-cube weights (LOESS) and Gaussian kernel regression
//! whose bandwidth adapts to the local sample density (STBKR).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::geo::{project, GeoPoint, PlanarPoint, PolygonUnit};
use crate::ingest::Measurement;
use crate::knn::KdTree;

/// Distance below which a sample counts as coincident with the query.
pub const COINCIDENCE_EPS_M: f64 = 1e-9;

/// Default grid spacing in meters.
pub const DEFAULT_GRID_SPACING_M: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub location: PlanarPoint,
    pub latency_ms: f64,
}

impl SamplePoint {
    pub const fn new(x: f64, y: f64, latency_ms: f64) -> Self {
        Self {
            location: PlanarPoint::new(x, y),
            latency_ms,
        }
    }
}

pub fn samples_from(ms: &[Measurement], origin: GeoPoint) -> Vec<SamplePoint> {
    ms.iter()
        .map(|m| SamplePoint {
            location: project(m.location, origin),
            latency_ms: m.latency_ms,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterpolatorConfig {
    /// `neighbors: None` weights every sample; `Some(k)` only the k nearest.
    Idw {
        p: f64,
        neighbors: Option<usize>,
    },
    Loess {
        span: f64,
    },
    Stbkr {
        c: f64,
        k: usize,
    },
}

impl Default for InterpolatorConfig {
    fn default() -> Self {
        InterpolatorConfig::idw(2.0)
    }
}

impl InterpolatorConfig {
    pub fn idw(p: f64) -> Self {
        InterpolatorConfig::Idw { p, neighbors: None }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match *self {
            InterpolatorConfig::Idw { p, .. } if !(p >= 1.0 && p.is_finite()) => {
                bad(format!("idw p must be >= 1, got {p}"))
            }
            InterpolatorConfig::Idw {
                neighbors: Some(0), ..
            } => bad("idw neighbors must be >= 1".into()),
            InterpolatorConfig::Loess { span } if !(span > 0.0 && span <= 1.0) => {
                bad(format!("loess span must be in (0, 1], got {span}"))
            }
            InterpolatorConfig::Stbkr { c, k } if !(c > 0.0 && c.is_finite()) || k == 0 => {
                bad(format!("stbkr needs c > 0 and k >= 1, got c={c}, k={k}"))
            }
            _ => Ok(()),
        }
    }
}

fn coincident_mean(q: PlanarPoint, samples: &[SamplePoint]) -> Option<f64> {
    let (sum, n) = samples
        .iter()
        .filter(|s| s.location.distance(&q) < COINCIDENCE_EPS_M)
        .fold((0.0, 0usize), |(sum, n), s| (sum + s.latency_ms, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn idw_predict(q: PlanarPoint, samples: &[SamplePoint], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    // Weights from squared distances: d^-p = (d^2)^(-p/2).
    let half = -p / 2.0;
    let weight = |d2: f64| if p == 2.0 { 1.0 / d2 } else { d2.powf(half) };
    let eps2 = COINCIDENCE_EPS_M * COINCIDENCE_EPS_M;
    let (mut num, mut den) = (0.0, 0.0);
    let (mut hit_sum, mut hits) = (0.0, 0usize);
    for s in samples {
        let d2 = s.location.distance_sq(&q);
        if d2 < eps2 {
            hit_sum += s.latency_ms;
            hits += 1;
            continue;
        }
        let w = weight(d2);
        num += w * s.latency_ms;
        den += w;
    }
    if hits > 0 {
        return Ok(hit_sum / hits as f64);
    }
    if den > 0.0 && den.is_finite() {
        return Ok(num / den);
    }
    // Weights under- or overflowed; rescale by the nearest distance.
    let d_min = samples
        .iter()
        .map(|s| s.location.distance(&q))
        .fold(f64::INFINITY, f64::min);
    let (mut num, mut den) = (0.0, 0.0);
    for s in samples {
        let w = (s.location.distance(&q) / d_min).powf(-p);
        num += w * s.latency_ms;
        den += w;
    }
    Ok(num / den)
}

/// Tri-cube kernel `(1 - u^3)^3` on `[0, 1]`, zero beyond.
pub fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

/// Neighborhood size used by LOESS for `n` samples.
pub fn loess_neighbors(span: f64, n: usize) -> usize {
    ((span * n as f64 - 1e-9).ceil() as usize).max(3).min(n)
}

pub fn loess_predict(q: PlanarPoint, samples: &[SamplePoint], span: f64) -> Result<f64> {
    let tree = KdTree::new(&samples.iter().map(|s| s.location).collect::<Vec<_>>());
    loess_with_tree(q, samples, &tree, span)
}

fn loess_with_tree(
    q: PlanarPoint,
    samples: &[SamplePoint],
    tree: &KdTree,
    span: f64,
) -> Result<f64> {
    if samples.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            found: samples.len(),
        });
    }
    if !(span > 0.0 && span <= 1.0) {
        return Err(Error::InvalidParameter(format!("loess span {span}")));
    }
    let m = loess_neighbors(span, samples.len());
    let neighbors = tree.nearest(q, m)?;
    let h = neighbors.last().expect("m >= 3").distance;

    let mut weights: Vec<f64> = neighbors
        .iter()
        .map(|n| {
            if h > 0.0 {
                tricube(n.distance / h)
            } else {
                1.0
            }
        })
        .collect();
    // Every neighbor sits exactly on the bandwidth: weight them equally.
    if weights.iter().all(|&w| w == 0.0) {
        weights.fill(1.0);
    }

    // Weighted least-squares plane, solved in coordinates centered on the
    // weighted centroid and scaled by h. The intercept there is the weighted
    // mean, and the slopes come from a 2x2 covariance system.
    let scale = if h > 0.0 { h } else { 1.0 };
    let wsum: f64 = weights.iter().sum();
    let (mut cx, mut cy, mut cz) = (0.0, 0.0, 0.0);
    for (n, &w) in neighbors.iter().zip(&weights) {
        let s = &samples[n.index];
        cx += w * (s.location.x - q.x) / scale;
        cy += w * (s.location.y - q.y) / scale;
        cz += w * s.latency_ms;
    }
    let (cx, cy, mean) = (cx / wsum, cy / wsum, cz / wsum);
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (n, &w) in neighbors.iter().zip(&weights) {
        let s = &samples[n.index];
        let dx = (s.location.x - q.x) / scale - cx;
        let dy = (s.location.y - q.y) / scale - cy;
        let dz = s.latency_ms - mean;
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
        sxz += w * dx * dz;
        syz += w * dy * dz;
    }
    let det = sxx * syy - sxy * sxy;
    let trace = sxx + syy;
    if trace.is_nan() || trace <= 0.0 || det <= 1e-10 * trace * trace {
        return Ok(mean);
    }
    let bx = (syy * sxz - sxy * syz) / det;
    let by = (sxx * syz - sxy * sxz) / det;
    // Evaluate the plane at q, which is the origin of the local frame.
    Ok(mean - bx * cx - by * cy)
}

/// STBKR bandwidth: `c` times the squared mean distance to the `k` nearest samples.
pub fn stbkr_bandwidth(neighbor_distances: &[f64], c: f64) -> f64 {
    let r_k = neighbor_distances.iter().sum::<f64>() / neighbor_distances.len() as f64;
    c * r_k * r_k
}

pub fn stbkr_predict(q: PlanarPoint, samples: &[SamplePoint], c: f64, k: usize) -> Result<f64> {
    let tree = KdTree::new(&samples.iter().map(|s| s.location).collect::<Vec<_>>());
    stbkr_with_tree(q, samples, &tree, c, k)
}

fn stbkr_with_tree(
    q: PlanarPoint,
    samples: &[SamplePoint],
    tree: &KdTree,
    c: f64,
    k: usize,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    if k == 0 {
        return Err(Error::InvalidParameter("stbkr k must be >= 1".into()));
    }
    if let Some(mean) = coincident_mean(q, samples) {
        return Ok(mean);
    }
    let neighbors = tree.nearest(q, k)?;
    let distances: Vec<f64> = neighbors.iter().map(|n| n.distance).collect();
    let h = stbkr_bandwidth(&distances, c);
    let d2: Vec<f64> = samples.iter().map(|s| s.location.distance_sq(&q)).collect();
    let d2_min = d2.iter().copied().fold(f64::INFINITY, f64::min);
    if h.is_nan() || h <= 0.0 {
        // Degenerate kernel: all mass on the nearest samples.
        let nearest: Vec<f64> = samples
            .iter()
            .zip(&d2)
            .filter(|(_, &d)| d == d2_min)
            .map(|(s, _)| s.latency_ms)
            .collect();
        return Ok(nearest.iter().sum::<f64>() / nearest.len() as f64);
    }
    // Shift exponents by the nearest distance so the largest weight is 1;
    // the kernel normalization constant cancels in the ratio.
    let two_h2 = 2.0 * h * h;
    let (mut num, mut den) = (0.0, 0.0);
    for (s, &d) in samples.iter().zip(&d2) {
        let w = (-(d - d2_min) / two_h2).exp();
        num += w * s.latency_ms;
        den += w;
    }
    Ok(num / den)
}

/// A predictor bound to a fixed sample set, reusing its spatial index.
pub struct Interpolator<'a> {
    samples: &'a [SamplePoint],
    tree: Option<KdTree>,
    config: InterpolatorConfig,
}

impl<'a> Interpolator<'a> {
    pub fn new(samples: &'a [SamplePoint], config: InterpolatorConfig) -> Result<Self> {
        config.validate()?;
        if samples.is_empty() {
            return Err(Error::NoSamples);
        }
        let tree = match config {
            InterpolatorConfig::Idw {
                neighbors: None, ..
            } => None,
            _ => Some(KdTree::new(
                &samples.iter().map(|s| s.location).collect::<Vec<_>>(),
            )),
        };
        if let InterpolatorConfig::Stbkr { k, .. } = config {
            if k > samples.len() {
                return Err(Error::KTooLarge {
                    k,
                    n: samples.len(),
                });
            }
        }
        if let InterpolatorConfig::Loess { .. } = config {
            if samples.len() < 3 {
                return Err(Error::TooFewSamples {
                    needed: 3,
                    found: samples.len(),
                });
            }
        }
        Ok(Self {
            samples,
            tree,
            config,
        })
    }

    pub fn predict(&self, q: PlanarPoint) -> Result<f64> {
        match self.config {
            InterpolatorConfig::Idw { p, neighbors: None } => idw_predict(q, self.samples, p),
            InterpolatorConfig::Idw {
                p,
                neighbors: Some(k),
            } => {
                let tree = self.tree.as_ref().expect("tree");
                let near: Vec<SamplePoint> = tree
                    .nearest(q, k.min(self.samples.len()))?
                    .iter()
                    .map(|n| self.samples[n.index])
                    .collect();
                idw_predict(q, &near, p)
            }
            InterpolatorConfig::Loess { span } => {
                loess_with_tree(q, self.samples, self.tree.as_ref().expect("tree"), span)
            }
            InterpolatorConfig::Stbkr { c, k } => {
                stbkr_with_tree(q, self.samples, self.tree.as_ref().expect("tree"), c, k)
            }
        }
    }

    pub fn predict_many(&self, queries: &[PlanarPoint]) -> Result<Vec<f64>> {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            queries.par_iter().map(|&q| self.predict(q)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            queries.iter().map(|&q| self.predict(q)).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: PlanarPoint,
    pub max: PlanarPoint,
}

impl Rect {
    pub fn bounding(points: impl IntoIterator<Item = PlanarPoint>) -> Option<Rect> {
        let mut it = points.into_iter();
        let first = it.next()?;
        Some(it.fold(
            Rect {
                min: first,
                max: first,
            },
            |r, p| Rect {
                min: PlanarPoint::new(r.min.x.min(p.x), r.min.y.min(p.y)),
                max: PlanarPoint::new(r.max.x.max(p.x), r.max.y.max(p.y)),
            },
        ))
    }

    pub fn padded(&self, pad: f64) -> Rect {
        Rect {
            min: PlanarPoint::new(self.min.x - pad, self.min.y - pad),
            max: PlanarPoint::new(self.max.x + pad, self.max.y + pad),
        }
    }
}

#[derive(Debug, Clone)]
pub enum GridBounds {
    Rect(Rect),
    /// Bounding box of the polygon, masked to points inside it.
    Polygon(PolygonUnit),
}

/// Interpolated values on a regular grid; row-major with `values[j * nx + i]`
/// at `(origin.x + i * spacing, origin.y + j * spacing)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSurface {
    pub origin: PlanarPoint,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl GridSurface {
    pub fn point(&self, i: usize, j: usize) -> PlanarPoint {
        PlanarPoint::new(
            self.origin.x + i as f64 * self.spacing,
            self.origin.y + j as f64 * self.spacing,
        )
    }

    /// Masked grid points with their values.
    pub fn iter(&self) -> impl Iterator<Item = (PlanarPoint, f64)> + '_ {
        (0..self.ny).flat_map(move |j| {
            (0..self.nx).filter_map(move |i| {
                let idx = j * self.nx + i;
                self.mask[idx].then(|| (self.point(i, j), self.values[idx]))
            })
        })
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Text export: `#` header lines with the grid geometry, then `x,y,value`
    /// for every masked point.
    pub fn write_csv<W: Write>(&self, mut out: W, projection: Option<GeoPoint>) -> Result<()> {
        let io = |e| Error::io("<grid>", e);
        writeln!(out, "# grid_surface v1").map_err(io)?;
        writeln!(
            out,
            "# origin_x={} origin_y={} spacing={} nx={} ny={}",
            self.origin.x, self.origin.y, self.spacing, self.nx, self.ny
        )
        .map_err(io)?;
        if let Some(p) = projection {
            writeln!(out, "# projection_lat={} projection_lon={}", p.lat, p.lon).map_err(io)?;
        }
        writeln!(out, "x,y,value").map_err(io)?;
        for (p, v) in self.iter() {
            writeln!(out, "{},{},{}", p.x, p.y, v).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<(GridSurface, Option<GeoPoint>)> {
        let bad = |m: &str| Error::InvalidParameter(format!("grid csv: {m}"));
        let mut header = BTreeMap::new();
        let mut rows = Vec::new();
        for line in input.lines() {
            let line = line.map_err(|e| Error::io("<grid>", e))?;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                for kv in rest.split_whitespace() {
                    if let Some((k, v)) = kv.split_once('=') {
                        header.insert(k.to_string(), v.to_string());
                    }
                }
            } else if line.is_empty() || line.starts_with("x,") {
                continue;
            } else {
                let parts: Vec<f64> = line
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("row is not numeric"))?;
                if parts.len() != 3 {
                    return Err(bad("expected x,y,value"));
                }
                rows.push((parts[0], parts[1], parts[2]));
            }
        }
        let num = |k: &str| -> Result<f64> {
            header
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(&format!("missing header field {k}")))
        };
        let origin = PlanarPoint::new(num("origin_x")?, num("origin_y")?);
        let spacing = num("spacing")?;
        let nx = num("nx")? as usize;
        let ny = num("ny")? as usize;
        let mut values = vec![f64::NAN; nx * ny];
        let mut mask = vec![false; nx * ny];
        for (x, y, v) in rows {
            let i = ((x - origin.x) / spacing).round();
            let j = ((y - origin.y) / spacing).round();
            if i < 0.0 || j < 0.0 || i as usize >= nx || j as usize >= ny {
                return Err(bad("point outside grid"));
            }
            let idx = j as usize * nx + i as usize;
            values[idx] = v;
            mask[idx] = true;
        }
        let projection = match (num("projection_lat"), num("projection_lon")) {
            (Ok(lat), Ok(lon)) => Some(GeoPoint::new(lat, lon)?),
            _ => None,
        };
        Ok((
            GridSurface {
                origin,
                spacing,
                nx,
                ny,
                values,
                mask,
            },
            projection,
        ))
    }
}

/// Evaluates the configured predictor on every masked grid point.
///
/// Without explicit bounds the grid covers the samples' bounding box padded
/// by one spacing.
pub fn make_grid(
    samples: &[SamplePoint],
    config: InterpolatorConfig,
    bounds: Option<&GridBounds>,
    spacing: f64,
) -> Result<GridSurface> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidParameter(format!("grid spacing {spacing}")));
    }
    let (rect, polygon) = match bounds {
        Some(GridBounds::Rect(r)) => (*r, None),
        Some(GridBounds::Polygon(poly)) => (
            Rect::bounding(poly.rings.iter().flatten().copied())
                .ok_or_else(|| Error::InvalidParameter("empty mask polygon".into()))?,
            Some(poly),
        ),
        None => (
            Rect::bounding(samples.iter().map(|s| s.location))
                .expect("nonempty")
                .padded(spacing),
            None,
        ),
    };
    let nx = ((rect.max.x - rect.min.x) / spacing + 1e-9).floor() as usize + 1;
    let ny = ((rect.max.y - rect.min.y) / spacing + 1e-9).floor() as usize + 1;
    let mut grid = GridSurface {
        origin: rect.min,
        spacing,
        nx,
        ny,
        values: vec![f64::NAN; nx * ny],
        mask: vec![true; nx * ny],
    };
    if let Some(poly) = polygon {
        for j in 0..ny {
            for i in 0..nx {
                grid.mask[j * nx + i] = poly.contains(grid.point(i, j));
            }
        }
    }
    let indices: Vec<usize> = (0..nx * ny).filter(|&k| grid.mask[k]).collect();
    let queries: Vec<PlanarPoint> = indices
        .iter()
        .map(|&k| grid.point(k % nx, k / nx))
        .collect();
    let interp = Interpolator::new(samples, config)?;
    let values = interp.predict_many(&queries)?;
    for (k, v) in indices.into_iter().zip(values) {
        grid.values[k] = v;
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutRecord {
    pub location: GeoPoint,
    pub best_truth: f64,
    pub estimate: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSummary {
    pub locations: usize,
    pub mean_abs_error: f64,
    pub median_abs_error: f64,
    /// Best-case ground truth per location, ascending.
    pub truth_distribution: Vec<f64>,
    /// Estimate per location, ascending.
    pub estimate_distribution: Vec<f64>,
    pub estimates_over_50ms: usize,
}

fn location_key(p: GeoPoint) -> (i64, i64) {
    ((p.lat * 1e4).trunc() as i64, (p.lon * 1e4).trunc() as i64)
}

/// Best-case holdout error: each test location (coordinates truncated to four
/// decimal degrees) is scored against whichever of its ground-truth
/// measurements lies closest to the estimate.
pub fn evaluate_holdout(
    train: &[Measurement],
    test: &[Measurement],
    config: InterpolatorConfig,
    origin: GeoPoint,
) -> Result<(Vec<HoldoutRecord>, HoldoutSummary)> {
    if test.is_empty() {
        return Err(Error::EmptyTest);
    }
    let samples = samples_from(train, origin);
    let interp = Interpolator::new(&samples, config)?;

    let mut groups: Vec<(GeoPoint, Vec<f64>)> = Vec::new();
    let mut index: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for m in test {
        let slot = *index.entry(location_key(m.location)).or_insert_with(|| {
            groups.push((m.location, Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(m.latency_ms);
    }
    let queries: Vec<PlanarPoint> = groups.iter().map(|(g, _)| project(*g, origin)).collect();
    let estimates = interp.predict_many(&queries)?;
    let records: Vec<HoldoutRecord> = groups
        .into_iter()
        .zip(estimates)
        .map(|((location, truths), estimate)| {
            let best_truth = truths
                .iter()
                .copied()
                .min_by(|a, b| (a - estimate).abs().total_cmp(&(b - estimate).abs()))
                .expect("group is nonempty");
            HoldoutRecord {
                location,
                best_truth,
                estimate,
                abs_error: (best_truth - estimate).abs(),
            }
        })
        .collect();
    let summary = summarize(&records);
    Ok((records, summary))
}

fn summarize(records: &[HoldoutRecord]) -> HoldoutSummary {
    let mut errors: Vec<f64> = records.iter().map(|r| r.abs_error).collect();
    errors.sort_by(f64::total_cmp);
    let mut truths: Vec<f64> = records.iter().map(|r| r.best_truth).collect();
    truths.sort_by(f64::total_cmp);
    let mut estimates: Vec<f64> = records.iter().map(|r| r.estimate).collect();
    estimates.sort_by(f64::total_cmp);
    let n = errors.len();
    let median = if n % 2 == 1 {
        errors[n / 2]
    } else {
        (errors[n / 2 - 1] + errors[n / 2]) / 2.0
    };
    HoldoutSummary {
        locations: n,
        mean_abs_error: errors.iter().sum::<f64>() / n as f64,
        median_abs_error: median,
        estimates_over_50ms: estimates.iter().filter(|&&e| e > 50.0).count(),
        truth_distribution: truths,
        estimate_distribution: estimates,
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Default search grids: 8 bandwidth multipliers in [1e-5, 100] and 8
/// neighbor counts in [5, 1000], clamped to the training size.
pub fn default_stbkr_grids(n_train: usize) -> (Vec<f64>, Vec<usize>) {
    let c_grid = log_space(1e-5, 100.0, 8);
    let mut k_grid: Vec<usize> = log_space(5.0, 1000.0, 8)
        .into_iter()
        .map(|k| (k.round() as usize).clamp(1, n_train.max(1)))
        .collect();
    k_grid.dedup();
    (c_grid, k_grid)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub c: f64,
    pub k: usize,
    pub mean_abs_error: f64,
    /// `(c, k, mean abs error)` for every grid pair evaluated.
    pub table: Vec<(f64, usize, f64)>,
}

/// Exhaustive STBKR grid search on best-case validation error; ties go to
/// the smaller `k`, then the smaller `c`.
pub fn tune_stbkr(
    train: &[Measurement],
    validation: &[Measurement],
    c_grid: &[f64],
    k_grid: &[usize],
    origin: GeoPoint,
) -> Result<TuningResult> {
    if c_grid.is_empty() || k_grid.is_empty() {
        return Err(Error::InvalidParameter("empty tuning grid".into()));
    }
    let mut table = Vec::with_capacity(c_grid.len() * k_grid.len());
    for &k in k_grid {
        for &c in c_grid {
            let (_, summary) = evaluate_holdout(
                train,
                validation,
                InterpolatorConfig::Stbkr { c, k },
                origin,
            )?;
            table.push((c, k, summary.mean_abs_error));
        }
    }
    let &(c, k, mean_abs_error) = table
        .iter()
        .min_by(|a, b| {
            a.2.total_cmp(&b.2)
                .then(a.1.cmp(&b.1))
                .then(a.0.total_cmp(&b.0))
        })
        .expect("nonempty grid");
    Ok(TuningResult {
        c,
        k,
        mean_abs_error,
        table,
    })
}
