//! Per-cell clustering volatility under cell-block bootstrap resampling.

use std::collections::BTreeMap;
use std::io::Write;

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;

use crate::aggregate::{CellAggregate, Metric};
use crate::error::{Error, Result};
use crate::geo::{CellId, Contiguity};
use crate::regionalize::{skater_partition, Clustering, ContiguityGraph, SkaterParams};
use crate::rng;

pub const DEFAULT_REPLICATES: usize = 1000;

/// Resamples each cell's own values with replacement, keeping every cell and
/// its value count.
pub fn bootstrap_replicate(
    cell_points: &BTreeMap<CellId, Vec<f64>>,
    seed: u64,
) -> Result<BTreeMap<CellId, Vec<f64>>> {
    let mut rng = rng::seeded(seed);
    cell_points
        .iter()
        .map(|(cell, values)| {
            if values.is_empty() {
                return Err(Error::EmptyCell(cell.to_string()));
            }
            let draw = (0..values.len())
                .map(|_| values[rng::below(&mut rng, values.len())])
                .collect();
            Ok((cell.clone(), draw))
        })
        .collect()
}

/// Renames replicate clusters to the reference clusters they overlap most,
/// using a maximum-weight one-to-one matching on the contingency table.
///
/// Replicate clusters left without a reference partner get fresh labels
/// starting at the reference cluster count. The returned labels are aligned,
/// not canonical.
pub fn align_labels(replicate: &Clustering, reference: &Clustering) -> Result<Clustering> {
    if replicate.cells != reference.cells {
        return Err(Error::CellSetMismatch);
    }
    let (kr, kf) = (replicate.n_clusters, reference.n_clusters);
    let size = kr.max(kf);
    let mut overlap = Matrix::new(size, size, 0i64);
    for (&r, &f) in replicate.labels.iter().zip(&reference.labels) {
        overlap[(r, f)] += 1;
    }
    let (_, assignment) = kuhn_munkres(&overlap);
    let mut fresh = kf;
    let mapping: Vec<usize> = (0..kr)
        .map(|r| {
            if assignment[r] < kf {
                assignment[r]
            } else {
                fresh += 1;
                fresh - 1
            }
        })
        .collect();
    Ok(Clustering {
        cells: replicate.cells.clone(),
        labels: replicate.labels.iter().map(|&l| mapping[l]).collect(),
        n_clusters: kr,
        floor: replicate.floor,
    })
}

/// Fraction of replicate pairs disagreeing on each cell, from label counts:
/// `1 - sum_L f_L (f_L - 1) / (B (B - 1))`.
///
/// `labels[b][i]` is the aligned label of cell `i` in replicate `b`.
pub fn volatility_from_labels(labels: &[Vec<usize>]) -> Vec<f64> {
    let b = labels.len();
    let n_cells = labels.first().map_or(0, Vec::len);
    if b < 2 {
        return vec![0.0; n_cells];
    }
    let pairs = (b * (b - 1)) as f64;
    (0..n_cells)
        .map(|i| {
            let mut freq: BTreeMap<usize, usize> = BTreeMap::new();
            for rep in labels {
                *freq.entry(rep[i]).or_default() += 1;
            }
            let agree: usize = freq.values().map(|&f| f * (f - 1)).sum();
            1.0 - agree as f64 / pairs
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolatilityParams {
    pub skater: SkaterParams,
    pub metric: Metric,
    pub n_replicates: usize,
    pub seed: u64,
}

impl Default for VolatilityParams {
    fn default() -> Self {
        Self {
            skater: SkaterParams::default(),
            metric: Metric::P10,
            n_replicates: DEFAULT_REPLICATES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolatilityMap {
    pub cells: Vec<CellId>,
    pub volatility: Vec<f64>,
    pub n_replicates: usize,
    pub reference: Clustering,
}

impl VolatilityMap {
    pub fn get(&self, cell: &CellId) -> Option<f64> {
        self.cells
            .binary_search(cell)
            .ok()
            .map(|i| self.volatility[i])
    }

    /// CSV with header `cell,volatility`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell", "volatility"])?;
        for (c, v) in self.cells.iter().zip(&self.volatility) {
            w.write_record([c.to_string(), format!("{v:.6}")])?;
        }
        w.flush().map_err(|e| Error::io("<volatility>", e))?;
        Ok(())
    }
}

fn cluster_cells(
    cell_points: &BTreeMap<CellId, Vec<f64>>,
    contiguity: &Contiguity,
    params: &VolatilityParams,
) -> Result<Clustering> {
    let mut features = BTreeMap::new();
    for (cell, values) in cell_points {
        let agg = CellAggregate::from_values(cell.clone(), values)?;
        let v = agg.metric(params.metric).ok_or_else(|| {
            Error::InvalidParameter(format!("{} undefined in cell `{cell}`", params.metric))
        })?;
        features.insert(cell.clone(), vec![v]);
    }
    let g = ContiguityGraph::new(contiguity, &features)?;
    skater_partition(&g, params.skater)
}

/// Bootstrap volatility of every cell's cluster assignment.
///
/// Each replicate resamples the cells' values, re-aggregates with the
/// configured metric, re-runs SKATER on the same adjacency and is aligned
/// to the clustering of the full data before counting disagreements.
pub fn volatility_map(
    cell_points: &BTreeMap<CellId, Vec<f64>>,
    contiguity: &Contiguity,
    params: VolatilityParams,
) -> Result<VolatilityMap> {
    let reference = cluster_cells(cell_points, contiguity, &params)?;
    let replicate = |b: usize| -> Result<Vec<usize>> {
        let sample = bootstrap_replicate(cell_points, rng::derive_seed(params.seed, b as u64))?;
        let c = cluster_cells(&sample, contiguity, &params)?;
        Ok(align_labels(&c, &reference)?.labels)
    };
    #[cfg(feature = "parallel")]
    let labels: Vec<Vec<usize>> = {
        use rayon::prelude::*;
        (0..params.n_replicates)
            .into_par_iter()
            .map(replicate)
            .collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let labels: Vec<Vec<usize>> = (0..params.n_replicates)
        .map(replicate)
        .collect::<Result<_>>()?;

    Ok(VolatilityMap {
        cells: reference.cells.clone(),
        volatility: volatility_from_labels(&labels),
        n_replicates: params.n_replicates,
        reference,
    })
}
