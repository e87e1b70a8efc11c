//! Clustering agreement and spatial autocorrelation.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use crate::error::{Error, Result};
use crate::geo::{CellId, Contiguity};
use crate::regionalize::{canonical_labels, Clustering};
use crate::rng;

fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Adjusted Rand Index from the contingency table of two clusterings over
/// the same cells.
///
/// When the chance-corrected denominator vanishes (both partitions trivial)
/// the result is 1 for identical partitions and 0 otherwise.
pub fn adjusted_rand_index(a: &Clustering, b: &Clustering) -> Result<f64> {
    if a.cells != b.cells {
        return Err(Error::CellSetMismatch);
    }
    ari_from_labels(&a.labels, &b.labels)
}

pub fn ari_from_labels(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::CellSetMismatch);
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    // Integer sums keep the result independent of hash iteration order.
    let pairs = |counts: &mut dyn Iterator<Item = u64>| -> u64 {
        counts.map(|n| n * n.saturating_sub(1) / 2).sum()
    };
    let index = pairs(&mut table.values().copied()) as i128;
    let sum_a = pairs(&mut rows.values().copied()) as i128;
    let sum_b = pairs(&mut cols.values().copied()) as i128;
    let total = choose2(a.len() as u64) as i128;
    // (index - expected) / (max - expected) scaled by 2 * total, so the only
    // rounding is the final division.
    let num = 2 * (index * total - sum_a * sum_b);
    let den = (sum_a + sum_b) * total - 2 * sum_a * sum_b;
    if den == 0 {
        return Ok(if canonical_labels(a) == canonical_labels(b) {
            1.0
        } else {
            0.0
        });
    }
    Ok(num as f64 / den as f64)
}

/// Symmetric matrix of pairwise ARI with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AriMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl AriMatrix {
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.labels.len();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| self.values[i][j])
            .collect()
    }

    /// CSV with the labels as both header row and first column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(&self.values) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|v| format!("{v:.6}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<ari matrix>", e))?;
        Ok(())
    }
}

/// Median of a nonempty list; even lengths average the two middle values.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn ari_matrix(clusterings: &[Clustering], labels: Vec<String>) -> Result<AriMatrix> {
    let m = clusterings.len();
    if labels.len() != m {
        return Err(Error::InvalidParameter(
            "one label per clustering is required".into(),
        ));
    }
    let mut values = vec![vec![1.0; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let v = adjusted_rand_index(&clusterings[i], &clusterings[j])?;
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    Ok(AriMatrix { labels, values })
}

/// Median ARI over all unordered pairs, with the full matrix.
pub fn median_pairwise_ari(
    clusterings: &[Clustering],
    labels: Vec<String>,
) -> Result<(f64, AriMatrix)> {
    if clusterings.len() < 2 {
        return Err(Error::TooFewClusterings);
    }
    let matrix = ari_matrix(clusterings, labels)?;
    Ok((median(&matrix.upper_triangle()), matrix))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpatialWeights {
    #[default]
    Binary,
    RowStandardized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoransResult {
    pub i: f64,
    pub expected: f64,
    pub s0: f64,
    pub pseudo_p: f64,
    pub n_permutations: usize,
}

pub const DEFAULT_PERMUTATIONS: usize = 999;

struct Weights {
    /// Per node: (neighbor, weight).
    rows: Vec<Vec<(usize, f64)>>,
    s0: f64,
}

fn weights(g: &Contiguity, scheme: SpatialWeights) -> Weights {
    let adj = g.adjacency();
    let rows: Vec<Vec<(usize, f64)>> = adj
        .into_iter()
        .map(|mut nbrs| {
            nbrs.sort_unstable();
            let w = match scheme {
                SpatialWeights::Binary => 1.0,
                SpatialWeights::RowStandardized => 1.0 / nbrs.len().max(1) as f64,
            };
            nbrs.into_iter().map(|j| (j, w)).collect()
        })
        .collect();
    let s0 = rows.iter().flatten().map(|(_, w)| w).sum();
    Weights { rows, s0 }
}

fn morans_statistic(z: &[f64], w: &Weights) -> f64 {
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let dev: Vec<f64> = z.iter().map(|v| v - mean).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    let num: f64 = w
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .map(|&(j, wij)| wij * dev[i] * dev[j])
                .sum::<f64>()
        })
        .sum();
    (n / w.s0) * num / denom
}

/// Global Moran's I with a one-sided (high) permutation pseudo p-value.
///
/// Permutation `k` shuffles the values with its own stream derived from
/// `seed`, so the result does not depend on evaluation order.
pub fn morans_i(
    values: &BTreeMap<CellId, f64>,
    g: &Contiguity,
    scheme: SpatialWeights,
    n_permutations: usize,
    seed: u64,
) -> Result<MoransResult> {
    let n = g.cells.len();
    if n < 2 {
        return Err(Error::TooFewCells(n));
    }
    let z: Vec<f64> = g
        .cells
        .iter()
        .map(|c| {
            values
                .get(c)
                .copied()
                .ok_or_else(|| Error::InvalidParameter(format!("no value for cell `{c}`")))
        })
        .collect::<Result<_>>()?;
    if z.iter().all(|&v| v == z[0]) {
        return Err(Error::ConstantField);
    }
    let w = weights(g, scheme);
    if w.s0 == 0.0 {
        return Err(Error::InvalidParameter(
            "contiguity graph has no edges".into(),
        ));
    }
    let observed = morans_statistic(&z, &w);

    let permuted = |k: usize| -> f64 {
        let mut perm = z.clone();
        rng::shuffle(
            &mut perm,
            &mut rng::seeded(rng::derive_seed(seed, k as u64)),
        );
        morans_statistic(&perm, &w)
    };
    #[cfg(feature = "parallel")]
    let stats: Vec<f64> = {
        use rayon::prelude::*;
        (0..n_permutations).into_par_iter().map(permuted).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let stats: Vec<f64> = (0..n_permutations).map(permuted).collect();

    let tol = 1e-12 * observed.abs().max(1.0);
    let extreme = stats.iter().filter(|&&s| s >= observed - tol).count();
    Ok(MoransResult {
        i: observed,
        expected: -1.0 / (n as f64 - 1.0),
        s0: w.s0,
        pseudo_p: (extreme + 1) as f64 / (n_permutations + 1) as f64,
        n_permutations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn clustering(labels: &[usize]) -> Clustering {
        let cells = (0..labels.len() as i64)
            .map(|q| CellId::hex(q, 0))
            .collect();
        Clustering::from_labels(cells, labels.to_vec(), 1)
    }

    /// Pair-counting ARI over every unordered pair of cells.
    fn ari_by_pairs(a: &[usize], b: &[usize]) -> f64 {
        let (mut ss, mut sd, mut ds, mut dd) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..a.len() {
            for j in (i + 1)..a.len() {
                match (a[i] == a[j], b[i] == b[j]) {
                    (true, true) => ss += 1.0,
                    (true, false) => sd += 1.0,
                    (false, true) => ds += 1.0,
                    (false, false) => dd += 1.0,
                }
            }
        }
        let denom = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
        if denom == 0.0 {
            return if canonical_labels(a) == canonical_labels(b) {
                1.0
            } else {
                0.0
            };
        }
        2.0 * (ss * dd - sd * ds) / denom
    }

    #[test]
    fn ari_fixed_cases() {
        let a = clustering(&[0, 0, 1, 1]);
        assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        // cells a,b,c,d: {a,b}{c,d} vs {a,c}{b,d}
        let b = clustering(&[0, 1, 0, 1]);
        assert_eq!(adjusted_rand_index(&a, &b).unwrap(), -0.5);
        let singletons = clustering(&[0, 1, 2, 3]);
        assert_eq!(adjusted_rand_index(&singletons, &singletons).unwrap(), 1.0);
        let one = clustering(&[0, 0, 0, 0]);
        assert_eq!(adjusted_rand_index(&one, &singletons).unwrap(), 0.0);
        let other = Clustering::from_labels(vec![CellId::hex(9, 9)], vec![0], 1);
        assert!(matches!(
            adjusted_rand_index(&a, &other),
            Err(Error::CellSetMismatch)
        ));
    }

    #[test]
    fn ari_matches_pair_enumeration() {
        let mut rng = seeded(77);
        for _ in 0..500 {
            let k1 = rng.random_range(1..5);
            let k2 = rng.random_range(1..5);
            let a: Vec<usize> = (0..8).map(|_| rng.random_range(0..k1)).collect();
            let b: Vec<usize> = (0..8).map(|_| rng.random_range(0..k2)).collect();
            let got = ari_from_labels(&a, &b).unwrap();
            assert!((got - ari_by_pairs(&a, &b)).abs() < 1e-12, "{a:?} {b:?}");
            assert_eq!(got, ari_from_labels(&b, &a).unwrap());
            let relabeled: Vec<usize> = a.iter().map(|l| 10 - l).collect();
            assert!((ari_from_labels(&relabeled, &b).unwrap() - got).abs() < 1e-15);
        }
    }

    #[test]
    fn median_pairwise_cases() {
        let a = clustering(&[0, 0, 1, 1]);
        let b = clustering(&[0, 1, 0, 1]);
        let names = |n: usize| (0..n).map(|i| format!("m{i}")).collect::<Vec<_>>();
        let (m, matrix) =
            median_pairwise_ari(&[a.clone(), a.clone(), a.clone()], names(3)).unwrap();
        assert_eq!(m, 1.0);
        assert!(matrix.values.iter().enumerate().all(|(i, r)| r[i] == 1.0));
        let (m, _) = median_pairwise_ari(&[a.clone(), b], names(2)).unwrap();
        assert_eq!(m, -0.5);
        assert!(matches!(
            median_pairwise_ari(&[a], names(1)),
            Err(Error::TooFewClusterings)
        ));
    }

    #[test]
    fn median_over_seventeen_months() {
        let mut rng = seeded(17);
        let months: Vec<Clustering> = (0..17)
            .map(|_| clustering(&(0..12).map(|_| rng.random_range(0..3)).collect::<Vec<_>>()))
            .collect();
        let names = (0..17).map(|i| i.to_string()).collect();
        let (m, matrix) = median_pairwise_ari(&months, names).unwrap();
        let mut pairs = Vec::new();
        for i in 0..17 {
            for j in (i + 1)..17 {
                pairs.push(ari_from_labels(&months[i].labels, &months[j].labels).unwrap());
            }
        }
        assert_eq!(pairs.len(), 136);
        pairs.sort_by(f64::total_cmp);
        assert_eq!(m, (pairs[67] + pairs[68]) / 2.0);
        let mut buf = Vec::new();
        matrix.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with(",0,1,2,"));
    }

    fn path(n: usize) -> Contiguity {
        Contiguity {
            cells: (0..n as i64).map(|q| CellId::hex(q, 0)).collect(),
            edges: (0..n - 1).map(|i| (i, i + 1)).collect(),
        }
    }

    fn values(g: &Contiguity, v: &[f64]) -> BTreeMap<CellId, f64> {
        g.cells.iter().cloned().zip(v.iter().copied()).collect()
    }

    #[test]
    fn morans_alternating_path() {
        let g = path(4);
        let r = morans_i(
            &values(&g, &[1.0, -1.0, 1.0, -1.0]),
            &g,
            SpatialWeights::Binary,
            99,
            1,
        )
        .unwrap();
        assert!((r.i + 1.0).abs() < 1e-12);
        assert_eq!(r.s0, 6.0);
    }

    #[test]
    fn morans_ramp_and_errors() {
        let g = path(10);
        let ramp: Vec<f64> = (0..10).map(f64::from).collect();
        let r = morans_i(&values(&g, &ramp), &g, SpatialWeights::Binary, 999, 3).unwrap();
        assert!(r.i > 0.0);
        assert!(r.pseudo_p > 0.0 && r.pseudo_p <= 1.0);
        assert!(r.pseudo_p < 0.05);
        let again = morans_i(&values(&g, &ramp), &g, SpatialWeights::Binary, 999, 3).unwrap();
        assert_eq!(r, again);

        let shifted: Vec<f64> = ramp.iter().map(|v| v + 100.0).collect();
        let s = morans_i(&values(&g, &shifted), &g, SpatialWeights::Binary, 0, 3).unwrap();
        assert!((s.i - r.i).abs() < 1e-12);
        let negated: Vec<f64> = ramp.iter().map(|v| -v).collect();
        let s = morans_i(&values(&g, &negated), &g, SpatialWeights::Binary, 0, 3).unwrap();
        assert!((s.i - r.i).abs() < 1e-12);

        let row = morans_i(
            &values(&g, &ramp),
            &g,
            SpatialWeights::RowStandardized,
            0,
            3,
        )
        .unwrap();
        assert!((row.s0 - 10.0).abs() < 1e-12);

        assert!(matches!(
            morans_i(&values(&g, &[2.0; 10]), &g, SpatialWeights::Binary, 9, 0),
            Err(Error::ConstantField)
        ));
        let single = path(2);
        let one = Contiguity {
            cells: single.cells[..1].to_vec(),
            edges: vec![],
        };
        assert!(matches!(
            morans_i(&values(&one, &[1.0]), &one, SpatialWeights::Binary, 9, 0),
            Err(Error::TooFewCells(1))
        ));
    }
}
