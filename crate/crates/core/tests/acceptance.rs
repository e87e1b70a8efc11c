//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use latency_regions::aggregate::Metric;
use latency_regions::config::{PipelineConfig, Source};
use latency_regions::evaluate::{adjusted_rand_index, ari_from_labels, morans_i, SpatialWeights};
use latency_regions::geo::{
    cell_neighbors, merge_hex_cells, CellId, Contiguity, GeoPoint, HexCellId, PlanarPoint,
    PolygonContiguity, PolygonUnit, Tessellation, DEFAULT_HEX_EDGE_M,
};
use latency_regions::interpolate::{idw_predict, loess_predict, stbkr_predict, SamplePoint};
use latency_regions::knn::{brute_force, KdTree};
use latency_regions::pipeline::{run_with, PipelineRun, ALL_SERIES};
use latency_regions::regionalize::{
    minimum_spanning_tree, skater_partition, within_ssd, Clustering, ContiguityGraph, Objective,
    SkaterParams, WeightedEdge,
};
use latency_regions::rng::{seeded, shuffle};
use latency_regions::synth::{generate, PlantedScenario};
use latency_regions::volatility::{volatility_from_labels, volatility_map, VolatilityParams};
use latency_regions::Error;
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_interpolators() -> Outcome {
    let pair = [
        SamplePoint::new(0.0, 0.0, 10.0),
        SamplePoint::new(1.0, 0.0, 20.0),
    ];
    let idw = idw_predict(PlanarPoint::new(0.25, 0.0), &pair, 2.0).map_err(|e| e.to_string())?;
    ensure((idw - 11.0).abs() <= 1e-9, || {
        format!("idw hand case gave {idw}")
    })?;

    let mut rng = seeded(101);
    let plane = |p: PlanarPoint| 12.5 + 0.03 * p.x - 0.07 * p.y;
    let samples: Vec<_> = (0..300)
        .map(|_| {
            let p = PlanarPoint::new(rng.random_range(0.0..2000.0), rng.random_range(0.0..2000.0));
            SamplePoint {
                location: p,
                latency_ms: plane(p),
            }
        })
        .collect();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = PlanarPoint::new(rng.random_range(0.0..2000.0), rng.random_range(0.0..2000.0));
        let v = loess_predict(q, &samples, 0.3).map_err(|e| e.to_string())?;
        worst = worst.max((v - plane(q)).abs());
    }
    ensure(worst <= 1e-6, || {
        format!("loess linear-field error {worst:e}")
    })?;

    let one = [SamplePoint::new(3.0, 4.0, 42.0)];
    let v =
        stbkr_predict(PlanarPoint::new(-50.0, 80.0), &one, 0.5, 1).map_err(|e| e.to_string())?;
    ensure(v == 42.0, || format!("stbkr single sample gave {v}"))?;
    Ok(format!(
        "idw {idw:.1}, loess max error {worst:.1e}, stbkr exact"
    ))
}

fn c2_knn() -> Outcome {
    let mut rng = seeded(202);
    let points: Vec<_> = (0..1000)
        .map(|_| PlanarPoint::new(rng.random_range(-5e3..5e3), rng.random_range(-5e3..5e3)))
        .collect();
    let tree = KdTree::new(&points);
    for _ in 0..100 {
        let q = PlanarPoint::new(rng.random_range(-6e3..6e3), rng.random_range(-6e3..6e3));
        for k in [1, 5, 50] {
            let fast = tree.nearest(q, k).map_err(|e| e.to_string())?;
            let slow = brute_force(&points, q, k).map_err(|e| e.to_string())?;
            ensure(fast == slow, || format!("mismatch at k={k}"))?;
        }
    }
    Ok("300 query/k combinations identical to linear scan".into())
}

fn is_spanning(n: usize, edges: &[&WeightedEdge]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    let mut joined = 0;
    for e in edges {
        let (a, b) = (find(&mut parent, e.a), find(&mut parent, e.b));
        if a != b {
            parent[a] = b;
            joined += 1;
        }
    }
    joined == n - 1
}

fn c3_mst() -> Outcome {
    let mut rng = seeded(303);
    let n = 6;
    let mut done = 0;
    while done < 200 {
        let mut edges = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                if rng.random_bool(0.6) {
                    edges.push(WeightedEdge {
                        a,
                        b,
                        weight: rng.random_range(0.0..10.0),
                    });
                }
            }
        }
        if !is_spanning(n, &edges.iter().collect::<Vec<_>>()) {
            continue;
        }
        let g = ContiguityGraph {
            cells: (0..n as i64).map(|q| CellId::hex(q, 0)).collect(),
            features: vec![vec![0.0]; n],
            edges: edges.clone(),
        };
        let got: f64 = minimum_spanning_tree(&g).iter().map(|e| e.weight).sum();
        let m = edges.len();
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << m) {
            if mask.count_ones() as usize != n - 1 {
                continue;
            }
            let subset: Vec<_> = (0..m)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| &edges[i])
                .collect();
            if is_spanning(n, &subset) {
                best = best.min(subset.iter().map(|e| e.weight).sum());
            }
        }
        ensure((got - best).abs() <= 1e-9, || {
            format!("tree weight {got} vs optimum {best}")
        })?;
        done += 1;
    }
    Ok("200 graphs match exhaustive enumeration".into())
}

fn hex_patch(rng: &mut impl Rng, size: usize) -> BTreeMap<CellId, f64> {
    let mut patch = BTreeSet::from([HexCellId::new(0, 0)]);
    while patch.len() < size {
        let from = *patch.iter().nth(rng.random_range(0..patch.len())).unwrap();
        patch.insert(cell_neighbors(from)[rng.random_range(0..6)]);
    }
    patch
        .into_iter()
        .map(|h| (CellId::Hex(h), rng.random_range(0.0..100.0)))
        .collect()
}

fn clusters_connected(c: &Clustering, g: &ContiguityGraph) -> bool {
    let mut adj = vec![Vec::new(); g.len()];
    for e in &g.edges {
        if c.labels[e.a] == c.labels[e.b] {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
    }
    c.members().iter().all(|m| {
        let mut seen = BTreeSet::from([m[0]]);
        let mut queue = VecDeque::from([m[0]]);
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if seen.insert(j) {
                    queue.push_back(j);
                }
            }
        }
        seen.len() == m.len()
    })
}

fn c4_skater() -> Outcome {
    let origin = GeoPoint::new(41.88, -87.63).unwrap();
    let t = Tessellation::hex(DEFAULT_HEX_EDGE_M, origin).unwrap();
    let mut rng = seeded(404);
    let (mut checked, mut infeasible) = (0, 0);
    for _ in 0..100 {
        let size = rng.random_range(10..=100);
        let g = ContiguityGraph::from_scalar(&hex_patch(&mut rng, size), &t)
            .map_err(|e| e.to_string())?;
        let n_clusters = rng.random_range(2..=7);
        let floor = [1, 2, 5][rng.random_range(0..3)];
        let params = SkaterParams {
            n_clusters,
            floor,
            objective: Objective::Ssd,
        };
        match skater_partition(&g, params) {
            Ok(c) => {
                ensure(c.n_clusters == n_clusters, || "wrong cluster count".into())?;
                ensure(c.sizes().iter().all(|&s| s >= floor), || {
                    "cluster below floor".into()
                })?;
                ensure(clusters_connected(&c, &g), || "disconnected cluster".into())?;
                checked += 1;
            }
            Err(Error::InfeasibleFloor { .. }) => infeasible += 1,
            Err(e) => return Err(e.to_string()),
        }
    }

    let path = |f: &[f64]| {
        let cells: Vec<_> = (0..f.len() as i64).map(|q| CellId::hex(q, 0)).collect();
        let contiguity = Contiguity {
            edges: (0..f.len() - 1).map(|i| (i, i + 1)).collect(),
            cells: cells.clone(),
        };
        let values = cells.into_iter().zip(f.iter().map(|&v| vec![v])).collect();
        ContiguityGraph::new(&contiguity, &values).unwrap()
    };
    let planted = skater_partition(
        &path(&[0.0, 0.0, 10.0, 10.0]),
        SkaterParams {
            n_clusters: 2,
            floor: 1,
            objective: Objective::Ssd,
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(planted.labels == vec![0, 0, 1, 1], || {
        format!("4-path labels {:?}", planted.labels)
    })?;

    for _ in 0..300 {
        let n = rng.random_range(3..=10);
        let features: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..50.0)]).collect();
        let edges: Vec<WeightedEdge> = (1..n)
            .map(|b| {
                let a = rng.random_range(0..b);
                WeightedEdge {
                    a,
                    b,
                    weight: (features[a][0] - features[b][0]).abs(),
                }
            })
            .collect();
        let g = ContiguityGraph {
            cells: (0..n as i64).map(|q| CellId::hex(q, 0)).collect(),
            features: features.clone(),
            edges: edges.clone(),
        };
        let floor = rng.random_range(1..=3);
        let mut best = f64::INFINITY;
        for cut in 0..edges.len() {
            let kept: Vec<_> = edges
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != cut)
                .map(|(_, e)| e)
                .collect();
            let mut side = vec![false; n];
            side[0] = true;
            let mut changed = true;
            while changed {
                changed = false;
                for e in &kept {
                    if side[e.a] != side[e.b] {
                        side[e.a] = true;
                        side[e.b] = true;
                        changed = true;
                    }
                }
            }
            let part = |s: bool| {
                (0..n)
                    .filter(|&i| side[i] == s)
                    .map(|i| features[i][0])
                    .collect::<Vec<_>>()
            };
            let (x, y) = (part(true), part(false));
            if x.len() < floor || y.len() < floor {
                continue;
            }
            let ssd = |v: &[f64]| {
                let m = v.iter().sum::<f64>() / v.len() as f64;
                v.iter().map(|a| (a - m) * (a - m)).sum::<f64>()
            };
            best = best.min(ssd(&x) + ssd(&y));
        }
        let result = skater_partition(
            &g,
            SkaterParams {
                n_clusters: 2,
                floor,
                objective: Objective::Ssd,
            },
        );
        match result {
            Ok(c) => {
                let got = within_ssd(&g, &c);
                ensure((got - best).abs() <= 1e-9 * best.max(1.0), || {
                    format!("ssd {got} vs optimum {best}")
                })?;
            }
            Err(Error::InfeasibleFloor { .. }) => ensure(best.is_infinite(), || {
                "feasible cut reported infeasible".into()
            })?,
            Err(e) => return Err(e.to_string()),
        }
    }
    Ok(format!(
        "{checked} patches valid ({infeasible} floor-infeasible), 4-path split, 300 trees optimal"
    ))
}

fn pair_count_ari(a: &[usize], b: &[usize]) -> f64 {
    let (mut both, mut only_a, mut only_b, mut neither) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..a.len() {
        for j in (i + 1)..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1,
                (true, false) => only_a += 1,
                (false, true) => only_b += 1,
                (false, false) => neither += 1,
            }
        }
    }
    let num = 2 * (both * neither - only_a * only_b);
    let den = (both + only_a) * (only_a + neither) + (both + only_b) * (only_b + neither);
    if den == 0 {
        return if only_a == 0 && only_b == 0 { 1.0 } else { 0.0 };
    }
    num as f64 / den as f64
}

fn c5_ari() -> Outcome {
    let mut rng = seeded(505);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let ka = rng.random_range(1..=4);
        let kb = rng.random_range(1..=4);
        let a: Vec<usize> = (0..8).map(|_| rng.random_range(0..ka)).collect();
        let b: Vec<usize> = (0..8).map(|_| rng.random_range(0..kb)).collect();
        let got = ari_from_labels(&a, &b).map_err(|e| e.to_string())?;
        worst = worst.max((got - pair_count_ari(&a, &b)).abs());
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    let a = vec![0, 0, 1, 1, 2, 2, 3, 3];
    let same = ari_from_labels(&a, &a).map_err(|e| e.to_string())?;
    ensure(same == 1.0, || format!("identical gave {same}"))?;
    let cross = ari_from_labels(&[0, 0, 1, 1], &[0, 1, 0, 1]).map_err(|e| e.to_string())?;
    ensure(cross == -0.5, || {
        format!("{{ab|cd}} vs {{ac|bd}} gave {cross:?}")
    })?;
    Ok(format!(
        "max deviation {worst:.1e}, identical 1, crossed {cross}"
    ))
}

fn c6_morans() -> Outcome {
    let cells: Vec<_> = (0..4).map(|q| CellId::hex(q, 0)).collect();
    let path = Contiguity {
        cells: cells.clone(),
        edges: vec![(0, 1), (1, 2), (2, 3)],
    };
    let values: BTreeMap<_, _> = cells.iter().cloned().zip([1.0, -1.0, 1.0, -1.0]).collect();
    let r = morans_i(&values, &path, SpatialWeights::Binary, 99, 7).map_err(|e| e.to_string())?;
    ensure((r.i + 1.0).abs() <= 1e-12, || {
        format!("alternating path gave {}", r.i)
    })?;

    let mut rng = seeded(606);
    let field = hex_patch(&mut rng, 60);
    let t = Tessellation::hex(DEFAULT_HEX_EDGE_M, GeoPoint::new(0.0, 0.0).unwrap()).unwrap();
    let contiguity = latency_regions::geo::build_contiguity(&field.keys().cloned().collect(), &t)
        .map_err(|e| e.to_string())?;
    let first = morans_i(&field, &contiguity, SpatialWeights::Binary, 999, 11)
        .map_err(|e| e.to_string())?;
    let second = morans_i(&field, &contiguity, SpatialWeights::Binary, 999, 11)
        .map_err(|e| e.to_string())?;
    ensure(first == second, || {
        "permutation p-value changed across runs".into()
    })?;

    let flat: BTreeMap<_, _> = cells.iter().cloned().map(|c| (c, 5.0)).collect();
    let err = morans_i(&flat, &path, SpatialWeights::Binary, 99, 7);
    ensure(matches!(err, Err(Error::ConstantField)), || {
        format!("constant field gave {err:?}")
    })?;
    Ok(format!(
        "alternating I = {}, pseudo-p {} reproducible, constant field rejected",
        r.i, first.pseudo_p
    ))
}

fn c7_volatility() -> Outcome {
    let mut rng = seeded(707);
    let b = 10;
    let labels: Vec<Vec<usize>> = (0..b)
        .map(|_| (0..40).map(|_| rng.random_range(0..4)).collect())
        .collect();
    let fast = volatility_from_labels(&labels);
    let mut worst: f64 = 0.0;
    for (i, v) in fast.iter().enumerate() {
        let (mut differ, mut pairs) = (0, 0);
        for x in 0..b {
            for y in (x + 1)..b {
                pairs += 1;
                if labels[x][i] != labels[y][i] {
                    differ += 1;
                }
            }
        }
        worst = worst.max((v - differ as f64 / pairs as f64).abs());
    }
    ensure(worst <= 1e-12, || format!("double sum deviation {worst:e}"))?;

    let t = Tessellation::hex(DEFAULT_HEX_EDGE_M, GeoPoint::new(0.0, 0.0).unwrap()).unwrap();
    let field = hex_patch(&mut rng, 30);
    let contiguity = latency_regions::geo::build_contiguity(&field.keys().cloned().collect(), &t)
        .map_err(|e| e.to_string())?;
    let params = VolatilityParams {
        skater: SkaterParams {
            n_clusters: 3,
            floor: 2,
            objective: Objective::Ssd,
        },
        metric: Metric::P10,
        n_replicates: 1000,
        seed: 17,
    };
    let constant: BTreeMap<_, _> = field
        .iter()
        .map(|(c, v)| (c.clone(), vec![*v; 8]))
        .collect();
    let map = volatility_map(&constant, &contiguity, params).map_err(|e| e.to_string())?;
    ensure(map.volatility.iter().all(|&v| v == 0.0), || {
        "zero-variance cells are volatile".into()
    })?;

    let noisy: BTreeMap<_, _> = field
        .iter()
        .map(|(c, v)| {
            (
                c.clone(),
                (0..8).map(|_| v + rng.random_range(-30.0..30.0)).collect(),
            )
        })
        .collect();
    let map = volatility_map(
        &noisy,
        &contiguity,
        VolatilityParams {
            n_replicates: 200,
            ..params
        },
    )
    .map_err(|e| e.to_string())?;
    ensure(
        map.volatility.iter().all(|v| (0.0..=1.0).contains(v)),
        || "volatility outside [0, 1]".into(),
    )?;
    let max = map.volatility.iter().cloned().fold(0.0, f64::max);
    Ok(format!(
        "double sum deviation {worst:.1e}, constant cells 0 over B=1000, noisy max {max:.3}"
    ))
}

const SEED: u64 = 2024;

fn scenario() -> PlantedScenario {
    PlantedScenario::four_regions(SEED)
}

fn stability_config(out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        seed: SEED,
        out: out.to_path_buf(),
        ..Default::default()
    };
    cfg.skater.n_clusters = 4;
    cfg.skater.floor = 2;
    cfg.interpolate.p = 2.0;
    cfg.interpolate.neighbors = Some(16);
    cfg
}

fn run_hex(out: &Path) -> Result<(PlantedScenario, PipelineRun), String> {
    let s = scenario();
    let data = generate(&s).map_err(|e| e.to_string())?;
    let t = Tessellation::hex(DEFAULT_HEX_EDGE_M, s.origin).map_err(|e| e.to_string())?;
    let run = run_with(&stability_config(out), data.measurements, t).map_err(|e| e.to_string())?;
    Ok((s, run))
}

/// Irregular units: random contiguous blobs of five to nine hexes, fewer
/// where the free neighborhood runs out.
fn merged_hex_units(s: &PlantedScenario, layout: u64) -> Result<Tessellation, String> {
    let e = DEFAULT_HEX_EDGE_M;
    let reach = (s.bounds.max.x.max(s.bounds.max.y) / e) as i64 + 2;
    let mut free: BTreeSet<HexCellId> = BTreeSet::new();
    for q in -2 * reach..=2 * reach {
        for r in -reach..=reach {
            let h = HexCellId::new(q, r);
            let c = h.center(e);
            if c.x.abs() <= s.bounds.max.x && c.y.abs() <= s.bounds.max.y {
                free.insert(h);
            }
        }
    }
    let mut order: Vec<HexCellId> = free.iter().copied().collect();
    let mut rng = seeded(layout);
    shuffle(&mut order, &mut rng);
    let mut units = Vec::new();
    for start in order {
        if !free.remove(&start) {
            continue;
        }
        let target = rng.random_range(5..=9);
        let mut blob = vec![start];
        while blob.len() < target {
            let open: Vec<HexCellId> = blob
                .iter()
                .flat_map(|h| cell_neighbors(*h))
                .filter(|n| free.contains(n))
                .collect();
            if open.is_empty() {
                break;
            }
            let next = open[rng.random_range(0..open.len())];
            free.remove(&next);
            blob.push(next);
        }
        let rings = merge_hex_cells(&blob, e);
        units.push(PolygonUnit {
            id: format!("u{:03}", units.len()),
            rings,
        });
    }
    Tessellation::polygons(units, s.origin, PolygonContiguity::SharedEdge)
        .map_err(|e| e.to_string())
}

fn c8_stability() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (s, run) = run_hex(dir.path())?;
    let series = &run.series[ALL_SERIES];
    ensure(series.clusterings.len() == 6, || {
        format!("{} monthly slices", series.clusterings.len())
    })?;
    let pairwise = series.median_ari.ok_or("no pairwise ARI")?;
    let mut oracle_ari = Vec::new();
    for (_, c) in &series.clusterings {
        let oracle = s.cell_oracle(&c.cells, &run.tessellation);
        let truth = Clustering::from_labels(
            oracle.keys().cloned().collect(),
            oracle.values().copied().collect(),
            1,
        );
        oracle_ari.push(adjusted_rand_index(c, &truth).map_err(|e| e.to_string())?);
    }
    let min_oracle = oracle_ari.iter().cloned().fold(f64::INFINITY, f64::min);

    // One layout is a noisy sample of the ordering, so compare the mean of
    // the median pairwise ARI over several layouts.
    let data = generate(&s).map_err(|e| e.to_string())?;
    let layouts = 10;
    let (mut interp, mut raw, mut wins) = (0.0, 0.0, 0);
    for layout in 1..=layouts {
        let units = merged_hex_units(&s, layout)?;
        let mut medians = Vec::new();
        for source in [Source::Interpolated, Source::Raw] {
            let out = tempfile::tempdir().map_err(|e| e.to_string())?;
            let mut cfg = stability_config(out.path());
            cfg.aggregate.source = source;
            let r = run_with(&cfg, data.measurements.clone(), units.clone())
                .map_err(|e| e.to_string())?;
            medians.push(
                r.series[ALL_SERIES]
                    .median_ari
                    .ok_or("no pairwise ARI on units")?,
            );
        }
        interp += medians[0] / layouts as f64;
        raw += medians[1] / layouts as f64;
        wins += (medians[0] >= medians[1]) as usize;
    }

    let detail = format!(
        "(a) median pairwise {pairwise:.3} (b) min oracle {min_oracle:.3} (c) units interpolated {interp:.3} vs raw {raw:.3}, {wins}/{layouts} layouts"
    );
    ensure(
        pairwise >= 0.8 && min_oracle >= 0.9 && interp >= raw,
        || detail.clone(),
    )?;
    Ok(detail)
}

fn c9_determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (_, ra) = run_hex(a.path())?;
    let (_, rb) = run_hex(b.path())?;
    let ma = fs::read(a.path().join("manifest.json")).map_err(|e| e.to_string())?;
    let mb = fs::read(b.path().join("manifest.json")).map_err(|e| e.to_string())?;
    ensure(ma == mb && ra.manifest == rb.manifest, || {
        "manifests differ".into()
    })?;
    Ok(format!(
        "{} artifacts, manifests byte-identical",
        ra.manifest.artifacts.len()
    ))
}

fn c10_defaults() -> Outcome {
    let cfg = PipelineConfig::default();
    let found = [
        ("N", cfg.skater.n_clusters as f64, 7.0),
        ("floor", cfg.skater.floor as f64, 2.0),
        ("spacing", cfg.interpolate.spacing, 50.0),
        ("hex edge", cfg.tessellation.edge_length, 461.35),
        ("replicates", cfg.volatility.replicates as f64, 1000.0),
        ("permutations", cfg.evaluate.permutations as f64, 999.0),
    ];
    for (name, got, want) in found {
        ensure(got == want, || format!("{name} = {got}, expected {want}"))?;
    }
    Ok("N=7 floor=2 spacing=50 m edge=461.35 m replicates=1000 permutations=999".into())
}

type Criterion = (&'static str, fn() -> Outcome, u64);

fn main() {
    let criteria: [Criterion; 10] = [
        ("interpolator oracles", c1_interpolators, 1),
        ("k-NN exactness", c2_knn, 5),
        ("MST optimality", c3_mst, 10),
        ("SKATER correctness", c4_skater, 30),
        ("ARI", c5_ari, 1),
        ("Moran's I", c6_morans, 5),
        ("volatility", c7_volatility, 60),
        ("synthetic stability", c8_stability, 300),
        ("determinism", c9_determinism, 300),
        ("defaults", c10_defaults, 1),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > Duration::from_secs(*limit) => {
                Err(format!("{d}; exceeded {limit} s"))
            }
            other => other,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        println!(
            "{tag} {:>2} {name}: {detail} [{:.2} s]",
            i + 1,
            elapsed.as_secs_f64()
        );
        failed += outcome.is_err() as usize;
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
