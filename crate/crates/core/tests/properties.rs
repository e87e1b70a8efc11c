use std::collections::{BTreeMap, BTreeSet};

use latency_regions::aggregate::percentile;
use latency_regions::evaluate::ari_from_labels;
use latency_regions::geo::{
    cell_neighbors, project, unproject, CellId, GeoPoint, HexCellId, PlanarPoint, Tessellation,
    DEFAULT_HEX_EDGE_M,
};
use latency_regions::interpolate::{idw_predict, loess_predict, stbkr_predict, SamplePoint};
use latency_regions::knn::{brute_force, KdTree};
use latency_regions::regionalize::{skater_partition, ContiguityGraph, Objective, SkaterParams};
use latency_regions::volatility::volatility_from_labels;
use proptest::prelude::*;

fn samples(max: usize) -> impl Strategy<Value = Vec<SamplePoint>> {
    sized_samples(3, max)
}

fn sized_samples(min: usize, max: usize) -> impl Strategy<Value = Vec<SamplePoint>> {
    prop::collection::vec((-1e4..1e4f64, -1e4..1e4f64, 0.5..300.0f64), min..max).prop_map(|v| {
        v.into_iter()
            .map(|(x, y, z)| SamplePoint::new(x, y, z))
            .collect()
    })
}

fn query() -> impl Strategy<Value = PlanarPoint> {
    (-1.2e4..1.2e4f64, -1.2e4..1.2e4f64).prop_map(|(x, y)| PlanarPoint::new(x, y))
}

fn bounds(s: &[SamplePoint]) -> (f64, f64) {
    s.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.latency_ms), hi.max(p.latency_ms))
        })
}

fn shifted(s: &[SamplePoint], dx: f64, dy: f64) -> Vec<SamplePoint> {
    s.iter()
        .map(|p| SamplePoint::new(p.location.x + dx, p.location.y + dy, p.latency_ms))
        .collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn idw_stays_in_sample_range(s in samples(40), q in query(), p in 1.0..4.0f64) {
        let (lo, hi) = bounds(&s);
        let v = idw_predict(q, &s, p).unwrap();
        prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
    }

    #[test]
    fn idw_translation_and_scale(s in samples(40), q in query(), dx in -5e3..5e3f64, dy in -5e3..5e3f64, k in 0.1..10.0f64) {
        let base = idw_predict(q, &s, 2.0).unwrap();
        let moved = idw_predict(PlanarPoint::new(q.x + dx, q.y + dy), &shifted(&s, dx, dy), 2.0).unwrap();
        prop_assert!(close(base, moved, 1e-6));
        let scaled: Vec<_> = s.iter().map(|p| SamplePoint { latency_ms: p.latency_ms * k, ..*p }).collect();
        prop_assert!(close(idw_predict(q, &scaled, 2.0).unwrap(), k * base, 1e-9));
    }

    #[test]
    fn idw_and_stbkr_exact_at_samples(s in samples(30), pick in any::<prop::sample::Index>()) {
        let target = s[pick.index(s.len())];
        let same: Vec<_> = s.iter().filter(|p| p.location == target.location).map(|p| p.latency_ms).collect();
        let mean = same.iter().sum::<f64>() / same.len() as f64;
        prop_assert!(close(idw_predict(target.location, &s, 2.0).unwrap(), mean, 1e-12));
        prop_assert!(close(stbkr_predict(target.location, &s, 0.01, 3).unwrap(), mean, 1e-12));
    }

    #[test]
    fn stbkr_convex_and_translation_invariant(s in samples(40), q in query(), dx in -5e3..5e3f64, c in 1e-4..10.0f64) {
        let k = s.len().min(5);
        let (lo, hi) = bounds(&s);
        let v = stbkr_predict(q, &s, c, k).unwrap();
        prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
        let moved = stbkr_predict(PlanarPoint::new(q.x + dx, q.y), &shifted(&s, dx, 0.0), c, k).unwrap();
        prop_assert!(close(v, moved, 1e-6));
    }

    // The farthest neighbor gets zero weight, so the fit needs enough
    // neighbors left to pin a plane.
    #[test]
    fn loess_reproduces_planes(s in sized_samples(20, 60), q in query(), a in -50.0..50.0f64, b in -0.01..0.01f64, c in -0.01..0.01f64, span in 0.3..1.0f64) {
        let plane: Vec<_> = s.iter()
            .map(|p| SamplePoint { latency_ms: a + b * p.location.x + c * p.location.y, ..*p })
            .collect();
        prop_assume!(!collinear(&plane));
        let v = loess_predict(q, &plane, span).unwrap();
        let want = a + b * q.x + c * q.y;
        prop_assert!((v - want).abs() <= 1e-6, "got {v}, want {want}");
    }

    #[test]
    fn knn_matches_linear_scan(pts in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 1..200), q in query(), k in 1usize..20) {
        let pts: Vec<_> = pts.into_iter().map(|(x, y)| PlanarPoint::new(x, y)).collect();
        let k = k.min(pts.len());
        prop_assert_eq!(KdTree::new(&pts).nearest(q, k).unwrap(), brute_force(&pts, q, k).unwrap());
    }

    #[test]
    fn percentiles_are_monotone(v in prop::collection::vec(0.0..500.0f64, 1..80), p in 0.0..100.0f64, d in 0.0..50.0f64) {
        let lo = percentile(&v, p).unwrap();
        let hi = percentile(&v, (p + d).min(100.0)).unwrap();
        prop_assert!(lo <= hi);
        let (min, max) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        prop_assert!(lo >= min && hi <= max);
    }

    #[test]
    fn ari_is_symmetric_and_label_blind(a in prop::collection::vec(0usize..4, 2..30), seed in any::<u64>()) {
        let b: Vec<usize> = a.iter().enumerate().map(|(i, &x)| if (seed >> (i % 64)) & 1 == 1 { (x + 1) % 4 } else { x }).collect();
        let ab = ari_from_labels(&a, &b).unwrap();
        prop_assert_eq!(ab, ari_from_labels(&b, &a).unwrap());
        prop_assert!(ab <= 1.0 + 1e-12);
        let renamed: Vec<usize> = a.iter().map(|&x| 7 - x).collect();
        prop_assert_eq!(ari_from_labels(&a, &renamed).unwrap(), 1.0);
    }

    #[test]
    fn projection_round_trips(lat in -60.0..60.0f64, lon in -170.0..170.0f64, dx in -2e4..2e4f64, dy in -2e4..2e4f64) {
        let origin = GeoPoint::new(lat, lon).unwrap();
        let p = PlanarPoint::new(dx, dy);
        let back = project(unproject(p, origin), origin);
        prop_assert!((back.x - p.x).abs() < 1e-6 && (back.y - p.y).abs() < 1e-6);
    }

    #[test]
    fn hex_assignment_picks_nearest_center(x in -1e5..1e5f64, y in -1e5..1e5f64) {
        let e = DEFAULT_HEX_EDGE_M;
        let p = PlanarPoint::new(x, y);
        let c = HexCellId::from_point(p, e);
        let d = p.distance(&c.center(e));
        for n in cell_neighbors(c) {
            prop_assert!(d <= p.distance(&n.center(e)) + 1e-6);
        }
    }

    #[test]
    fn skater_clusters_are_contiguous(values in prop::collection::vec(0.0..100.0f64, 8..60), steps in prop::collection::vec(0usize..6, 60), n in 2usize..6, floor in 1usize..4) {
        let mut patch = BTreeSet::from([HexCellId::new(0, 0)]);
        let mut frontier = HexCellId::new(0, 0);
        for s in &steps {
            if patch.len() == values.len() { break; }
            frontier = cell_neighbors(frontier)[*s];
            patch.insert(frontier);
        }
        let field: BTreeMap<CellId, f64> = patch.into_iter().map(CellId::Hex).zip(values).collect();
        let t = Tessellation::hex(DEFAULT_HEX_EDGE_M, GeoPoint::new(0.0, 0.0).unwrap()).unwrap();
        let g = ContiguityGraph::from_scalar(&field, &t).unwrap();
        let Ok(c) = skater_partition(&g, SkaterParams { n_clusters: n, floor, objective: Objective::Ssd }) else {
            return Ok(());
        };
        prop_assert!(c.sizes().iter().all(|&s| s >= floor));
        for members in c.members() {
            let set: BTreeSet<usize> = members.iter().copied().collect();
            let mut seen = BTreeSet::from([members[0]]);
            let mut stack = vec![members[0]];
            while let Some(i) = stack.pop() {
                for e in &g.edges {
                    let other = if e.a == i { e.b } else if e.b == i { e.a } else { continue };
                    if set.contains(&other) && seen.insert(other) {
                        stack.push(other);
                    }
                }
            }
            prop_assert_eq!(seen.len(), members.len());
        }
        // canonical labels appear in order of first occurrence
        let mut next = 0;
        for &l in &c.labels {
            prop_assert!(l <= next);
            if l == next { next += 1; }
        }
    }

    #[test]
    fn volatility_is_a_disagreement_rate(labels in prop::collection::vec(prop::collection::vec(0usize..3, 12), 2..15)) {
        let v = volatility_from_labels(&labels);
        for (i, x) in v.iter().enumerate() {
            let b = labels.len();
            let differ = (0..b).flat_map(|p| (p + 1..b).map(move |q| (p, q)))
                .filter(|&(p, q)| labels[p][i] != labels[q][i]).count();
            prop_assert!((x - differ as f64 / (b * (b - 1) / 2) as f64).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(x));
        }
    }
}

fn collinear(s: &[SamplePoint]) -> bool {
    let a = s[0].location;
    let Some(b) = s.iter().map(|p| p.location).find(|p| p.distance(&a) > 1.0) else {
        return true;
    };
    s.iter().all(|p| {
        let cross = (b.x - a.x) * (p.location.y - a.y) - (b.y - a.y) * (p.location.x - a.x);
        cross.abs() < 1e-3 * b.distance(&a) * b.distance(&a)
    })
}
