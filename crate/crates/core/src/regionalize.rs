//! SKATER regionalization: contiguity graph, minimum spanning forest and
//! constrained tree-edge removal.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use petgraph::unionfind::UnionFind;

use crate::error::{Error, Result};
use crate::geo::{build_contiguity, CellId, Contiguity, Tessellation};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge {
    /// Lower cell index.
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Cells with feature vectors and dissimilarity-weighted adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct ContiguityGraph {
    /// Sorted cell ids; node `i` is `cells[i]`.
    pub cells: Vec<CellId>,
    pub features: Vec<Vec<f64>>,
    pub edges: Vec<WeightedEdge>,
}

impl ContiguityGraph {
    /// Weights each adjacency by Euclidean feature distance. Multi-metric
    /// features are z-scored per column first; single metrics stay raw.
    pub fn new(contiguity: &Contiguity, features: &BTreeMap<CellId, Vec<f64>>) -> Result<Self> {
        let mut rows = Vec::with_capacity(contiguity.cells.len());
        for cell in &contiguity.cells {
            let f = features
                .get(cell)
                .ok_or_else(|| Error::InvalidParameter(format!("no features for cell `{cell}`")))?;
            rows.push(f.clone());
        }
        let features = if rows.first().map_or(0, Vec::len) > 1 {
            standardize(&rows)
        } else {
            rows
        };
        let edges = contiguity
            .edges
            .iter()
            .map(|&(a, b)| WeightedEdge {
                a,
                b,
                weight: euclidean(&features[a], &features[b]),
            })
            .collect();
        Ok(Self {
            cells: contiguity.cells.clone(),
            features,
            edges,
        })
    }

    /// Graph over the cells of `values` with their tessellation adjacency.
    pub fn from_values(values: &BTreeMap<CellId, Vec<f64>>, t: &Tessellation) -> Result<Self> {
        let contiguity = build_contiguity(&values.keys().cloned().collect(), t)?;
        Self::new(&contiguity, values)
    }

    pub fn from_scalar(values: &BTreeMap<CellId, f64>, t: &Tessellation) -> Result<Self> {
        let vectors = values.iter().map(|(k, v)| (k.clone(), vec![*v])).collect();
        Self::from_values(&vectors, t)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn index_of(&self, cell: &CellId) -> Option<usize> {
        self.cells.binary_search(cell).ok()
    }

    pub fn contiguity(&self) -> Contiguity {
        Contiguity {
            cells: self.cells.clone(),
            edges: self.edges.iter().map(|e| (e.a, e.b)).collect(),
        }
    }

    pub fn are_adjacent(&self, a: usize, b: usize) -> bool {
        let (a, b) = (a.min(b), a.max(b));
        self.edges.iter().any(|e| e.a == a && e.b == b)
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Per-column z-scores with population standard deviation; constant columns
/// become zero.
pub fn standardize(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let dims = rows.first().map_or(0, Vec::len);
    let mut out = rows.to_vec();
    for d in 0..dims {
        let mean = rows.iter().map(|r| r[d]).sum::<f64>() / n;
        let sd = (rows.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / n).sqrt();
        for row in &mut out {
            row[d] = if sd > 0.0 { (row[d] - mean) / sd } else { 0.0 };
        }
    }
    out
}

/// Minimum spanning forest by Kruskal; equal weights prefer the lexically
/// smaller `(a, b)` pair.
pub fn minimum_spanning_tree(g: &ContiguityGraph) -> Vec<WeightedEdge> {
    let mut edges = g.edges.clone();
    edges.sort_by(|x, y| {
        x.weight
            .total_cmp(&y.weight)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
    let mut uf = UnionFind::<usize>::new(g.len());
    edges.retain(|e| uf.union(e.a, e.b));
    edges
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    /// Cut the edge giving the largest drop in within-cluster sum of
    /// squared deviations.
    #[default]
    Ssd,
    /// Cut the heaviest feasible tree edge.
    MaxEdgeWeight,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Ssd => "ssd",
            Objective::MaxEdgeWeight => "max-edge-weight",
        })
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ssd" => Ok(Objective::Ssd),
            "max-edge-weight" | "max_edge_weight" | "max-edge" => Ok(Objective::MaxEdgeWeight),
            other => Err(Error::InvalidParameter(format!(
                "unknown objective `{other}`"
            ))),
        }
    }
}

/// Assignment of cells to contiguous clusters.
///
/// Labels are canonical: cluster 0 holds the smallest cell id, cluster 1 the
/// smallest cell not in cluster 0, and so on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering {
    pub cells: Vec<CellId>,
    pub labels: Vec<usize>,
    pub n_clusters: usize,
    pub floor: usize,
}

impl Clustering {
    /// Builds a clustering from arbitrary labels, renumbering canonically.
    pub fn from_labels(cells: Vec<CellId>, labels: Vec<usize>, floor: usize) -> Self {
        let mut pairs: Vec<(CellId, usize)> = cells.into_iter().zip(labels).collect();
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let (cells, labels): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let labels = canonical_labels(&labels);
        let n_clusters = labels.iter().max().map_or(0, |m| m + 1);
        Self {
            cells,
            labels,
            n_clusters,
            floor,
        }
    }

    pub fn label_of(&self, cell: &CellId) -> Option<usize> {
        self.cells.binary_search(cell).ok().map(|i| self.labels[i])
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members().iter().map(Vec::len).collect()
    }

    pub fn as_map(&self) -> BTreeMap<CellId, usize> {
        self.cells
            .iter()
            .cloned()
            .zip(self.labels.iter().copied())
            .collect()
    }

    /// CSV with header `cell,label`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell", "label"])?;
        for (c, l) in self.cells.iter().zip(&self.labels) {
            w.write_record([c.to_string(), l.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<clustering>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut raw = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let label: usize = rec
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::InvalidParameter("clustering csv: bad label".into()))?;
            raw.push((rec[0].to_string(), label));
        }
        let hex = raw.iter().all(|(c, _)| CellId::parse(c, true).is_some());
        let (cells, labels) = raw
            .into_iter()
            .map(|(c, l)| (CellId::parse(&c, hex).expect("checked above"), l))
            .unzip();
        Ok(Self::from_labels(cells, labels, 1))
    }
}

pub(crate) fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = remap.len();
            *remap.entry(*l).or_insert(next)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkaterParams {
    pub n_clusters: usize,
    pub floor: usize,
    pub objective: Objective,
}

impl Default for SkaterParams {
    fn default() -> Self {
        Self {
            n_clusters: 7,
            floor: 2,
            objective: Objective::Ssd,
        }
    }
}

/// A rooted spanning tree of one forest component in preorder.
struct RootedComponent {
    order: Vec<usize>,
    /// Parent node and edge weight of `order[i]`; unused for the root.
    parent: Vec<(usize, f64)>,
    /// Subtree size of `order[i]`.
    subtree: Vec<usize>,
}

/// Sum of squared deviations from the mean over a set of nodes.
#[allow(clippy::needless_range_loop)]
fn ssd<'a>(features: &[Vec<f64>], nodes: impl Iterator<Item = &'a usize> + Clone) -> f64 {
    let dims = features.first().map_or(0, Vec::len);
    let n = nodes.clone().count() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for d in 0..dims {
        let mean = nodes.clone().map(|&i| features[i][d]).sum::<f64>() / n;
        total += nodes
            .clone()
            .map(|&i| {
                let dev = features[i][d] - mean;
                dev * dev
            })
            .sum::<f64>();
    }
    total
}

/// Total within-cluster sum of squared deviations.
pub fn within_ssd(g: &ContiguityGraph, c: &Clustering) -> f64 {
    c.members().iter().map(|m| ssd(&g.features, m.iter())).sum()
}

/// SKATER partition of `g` into `n_clusters` contiguous clusters of at least
/// `floor` cells.
///
/// Starts from the minimum spanning forest, where each connected component
/// is a cluster, and removes one tree edge per step. The candidate edges in
/// every component compete for each step.
pub fn skater_partition(g: &ContiguityGraph, params: SkaterParams) -> Result<Clustering> {
    let SkaterParams {
        n_clusters,
        floor,
        objective,
    } = params;
    let n = g.len();
    if n == 0 {
        return Err(Error::EmptyCellSet);
    }
    if n_clusters == 0 || floor == 0 {
        return Err(Error::InvalidParameter(
            "n_clusters and floor must be at least 1".into(),
        ));
    }
    if n_clusters.saturating_mul(floor) > n {
        return Err(Error::InfeasibleFloor { n_clusters, floor });
    }

    let mut tree_adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for e in minimum_spanning_tree(g) {
        tree_adj[e.a].push((e.b, e.weight));
        tree_adj[e.b].push((e.a, e.weight));
    }

    loop {
        let components = rooted_components(&tree_adj);
        if components.len() > n_clusters {
            return Err(Error::TooManyComponents {
                components: components.len(),
                n_clusters,
            });
        }
        if components.iter().any(|c| c.order.len() < floor) {
            return Err(Error::InfeasibleFloor { n_clusters, floor });
        }
        if components.len() == n_clusters {
            let mut labels = vec![0; n];
            for (k, comp) in components.iter().enumerate() {
                for &v in &comp.order {
                    labels[v] = k;
                }
            }
            return Ok(Clustering {
                cells: g.cells.clone(),
                labels: canonical_labels(&labels),
                n_clusters,
                floor,
            });
        }

        // (score, (a, b)) of the best cut; higher score wins, then smaller edge.
        let mut best: Option<(f64, (usize, usize))> = None;
        for comp in &components {
            let size = comp.order.len();
            let total = match objective {
                Objective::Ssd => ssd(&g.features, comp.order.iter()),
                Objective::MaxEdgeWeight => 0.0,
            };
            for (pos, &v) in comp.order.iter().enumerate().skip(1) {
                let sub = comp.subtree[pos];
                if sub < floor || size - sub < floor {
                    continue;
                }
                let (parent, weight) = comp.parent[pos];
                let score = match objective {
                    Objective::MaxEdgeWeight => weight,
                    Objective::Ssd => {
                        let inside = &comp.order[pos..pos + sub];
                        let outside = comp.order[..pos].iter().chain(&comp.order[pos + sub..]);
                        total - ssd(&g.features, inside.iter()) - ssd(&g.features, outside)
                    }
                };
                let key = (v.min(parent), v.max(parent));
                let better = match best {
                    None => true,
                    Some((s, k)) => score > s || (score == s && key < k),
                };
                if better {
                    best = Some((score, key));
                }
            }
        }
        let Some((_, (a, b))) = best else {
            return Err(Error::InfeasibleFloor { n_clusters, floor });
        };
        tree_adj[a].retain(|&(w, _)| w != b);
        tree_adj[b].retain(|&(w, _)| w != a);
    }
}

fn rooted_components(tree_adj: &[Vec<(usize, f64)>]) -> Vec<RootedComponent> {
    let n = tree_adj.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for root in 0..n {
        if seen[root] {
            continue;
        }
        let mut order = Vec::new();
        let mut parent = Vec::new();
        let mut depth_stack = vec![(root, usize::MAX, 0.0)];
        seen[root] = true;
        while let Some((v, p, w)) = depth_stack.pop() {
            order.push(v);
            parent.push((p, w));
            let mut kids: Vec<(usize, f64)> = tree_adj[v]
                .iter()
                .copied()
                .filter(|&(u, _)| !seen[u])
                .collect();
            kids.sort_by_key(|k| std::cmp::Reverse(k.0));
            for (u, wu) in kids {
                seen[u] = true;
                depth_stack.push((u, v, wu));
            }
        }
        // Preorder positions make every subtree a contiguous run.
        let pos: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut subtree = vec![1usize; order.len()];
        for i in (1..order.len()).rev() {
            let p = pos[&parent[i].0];
            subtree[p] += subtree[i];
        }
        out.push(RootedComponent {
            order,
            parent,
            subtree,
        });
    }
    out
}

/// Whether a sampling boundary separates two adjacent cells.
pub fn boundary_exists(
    c: &Clustering,
    g: &ContiguityGraph,
    a: &CellId,
    b: &CellId,
) -> Result<bool> {
    let not_adjacent = || Error::NotAdjacent(a.to_string(), b.to_string());
    let (ia, ib) = (
        g.index_of(a).ok_or_else(not_adjacent)?,
        g.index_of(b).ok_or_else(not_adjacent)?,
    );
    if !g.are_adjacent(ia, ib) {
        return Err(not_adjacent());
    }
    match (c.label_of(a), c.label_of(b)) {
        (Some(la), Some(lb)) => Ok(la != lb),
        _ => Err(Error::CellSetMismatch),
    }
}

/// Number of graph edges crossing a cluster boundary.
pub fn boundary_edge_count(c: &Clustering, g: &ContiguityGraph) -> usize {
    g.edges
        .iter()
        .filter(|e| c.labels[e.a] != c.labels[e.b])
        .count()
}
