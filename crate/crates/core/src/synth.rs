//! Synthetic measurement campaigns with planted latency regions.
//!
//! Regions are the Voronoi cells of a few seed points, each with its own base
//! latency and sampling intensity. Generated data uses the same CSV schema
//! the ingest module reads.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geo::{unproject, CellId, GeoPoint, PlanarPoint, Tessellation};
use crate::ingest::{GeolocationSource, Measurement};
use crate::interpolate::Rect;
use crate::rng;

/// Latencies never drop below this value.
pub const MIN_LATENCY_MS: f64 = 0.1;

const HOME_JITTER_M: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseModel {
    /// Gaussian around the region mean, truncated at the latency floor.
    #[default]
    TruncatedGaussian,
    /// Log-normal with the region mean as its mean and `noise_std` as its
    /// standard deviation.
    LogNormal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedScenario {
    pub region_seeds: Vec<PlanarPoint>,
    pub region_means: Vec<f64>,
    pub noise_std: f64,
    pub noise: NoiseModel,
    /// Relative sampling intensity per region.
    pub density: Vec<f64>,
    pub bounds: Rect,
    pub origin: GeoPoint,
    pub months: usize,
    pub points_per_month: usize,
    /// First month as `(year, month)`.
    pub start: (i32, u32),
    pub isps: Vec<String>,
    pub seed: u64,
}

impl PlantedScenario {
    /// Four regions over a 12 km square, roughly one per quadrant.
    pub fn four_regions(seed: u64) -> Self {
        let s = 6000.0;
        Self {
            // Seeds sit off the axes so no row of hexes runs along a boundary.
            region_seeds: vec![
                PlanarPoint::new(-3400.0, -2600.0),
                PlanarPoint::new(2800.0, -3200.0),
                PlanarPoint::new(-2400.0, 3400.0),
                PlanarPoint::new(3200.0, 2400.0),
            ],
            region_means: vec![15.0, 25.0, 45.0, 80.0],
            noise_std: 3.0,
            noise: NoiseModel::TruncatedGaussian,
            density: vec![1.0; 4],
            bounds: Rect {
                min: PlanarPoint::new(-s, -s),
                max: PlanarPoint::new(s, s),
            },
            origin: GeoPoint {
                lat: 41.8781,
                lon: -87.6298,
            },
            months: 6,
            points_per_month: 5000,
            start: (2022, 1),
            isps: vec!["isp-a".into(), "isp-b".into(), "isp-c".into()],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        let k = self.region_seeds.len();
        if k < 2 {
            return bad(format!("need at least 2 regions, got {k}"));
        }
        if self.region_means.len() != k || self.density.len() != k {
            return bad("region_means and density need one entry per region".into());
        }
        for (i, a) in self.region_means.iter().enumerate() {
            if !(a.is_finite() && *a > 0.0) {
                return bad(format!("region mean {a} must be positive"));
            }
            if self.region_means[..i].contains(a) {
                return bad(format!("region means must be distinct; {a} repeats"));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std {} must be >= 0", self.noise_std));
        }
        if self.density.iter().any(|d| !(d.is_finite() && *d >= 0.0))
            || self.density.iter().all(|&d| d == 0.0)
        {
            return bad("densities must be >= 0 with at least one positive".into());
        }
        if !(self.bounds.max.x > self.bounds.min.x && self.bounds.max.y > self.bounds.min.y) {
            return bad("bounds are empty".into());
        }
        if self.months == 0 || self.isps.is_empty() {
            return bad("need at least one month and one isp".into());
        }
        if !(1..=12).contains(&self.start.1) {
            return bad(format!("start month {} out of range", self.start.1));
        }
        Ok(())
    }

    /// Index of the nearest region seed; ties go to the lower index.
    pub fn region_of(&self, p: PlanarPoint) -> usize {
        self.region_seeds
            .iter()
            .enumerate()
            .map(|(i, s)| (p.distance_sq(s), i))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, i)| i)
            .expect("at least two regions")
    }

    /// Planted region of each cell, judged at the cell center.
    pub fn cell_oracle<'a>(
        &self,
        cells: impl IntoIterator<Item = &'a CellId>,
        t: &Tessellation,
    ) -> BTreeMap<CellId, usize> {
        cells
            .into_iter()
            .filter_map(|c| t.cell_center(c).map(|p| (c.clone(), self.region_of(p))))
            .collect()
    }

    fn month_span(&self, m: usize) -> (i64, i64) {
        let (y0, m0) = self.start;
        let first = NaiveDate::from_ymd_opt(y0, m0, 1).expect("validated start month");
        let start = first
            .checked_add_months(chrono::Months::new(m as u32))
            .expect("month in range");
        let end = start
            .checked_add_months(chrono::Months::new(1))
            .expect("month in range");
        let secs = |d: NaiveDate| {
            d.and_hms_opt(0, 0, 0)
                .expect("midnight")
                .and_utc()
                .timestamp()
        };
        debug_assert_eq!(start.day(), 1);
        (secs(start), secs(end))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub measurements: Vec<Measurement>,
    /// Planted region of each measurement.
    pub regions: Vec<usize>,
}

struct Sampler<'a> {
    s: &'a PlantedScenario,
    max_density: f64,
    noise: Option<Normal<f64>>,
}

impl Sampler<'_> {
    fn accept(&self, p: PlanarPoint, rng: &mut impl Rng) -> bool {
        let d = self.s.density[self.s.region_of(p)] / self.max_density;
        d > 0.0 && rng.random::<f64>() < d
    }

    fn location(&self, rng: &mut impl Rng) -> PlanarPoint {
        let b = &self.s.bounds;
        loop {
            let p = PlanarPoint::new(
                rng.random_range(b.min.x..b.max.x),
                rng.random_range(b.min.y..b.max.y),
            );
            if self.accept(p, rng) {
                return p;
            }
        }
    }

    fn near(&self, home: PlanarPoint, rng: &mut impl Rng) -> PlanarPoint {
        let jitter = Normal::new(0.0, HOME_JITTER_M).expect("positive std");
        let b = &self.s.bounds;
        for _ in 0..64 {
            let p = PlanarPoint::new(
                (home.x + jitter.sample(rng)).clamp(b.min.x, b.max.x),
                (home.y + jitter.sample(rng)).clamp(b.min.y, b.max.y),
            );
            if self.accept(p, rng) {
                return p;
            }
        }
        home
    }

    fn latency(&self, region: usize, rng: &mut impl Rng) -> f64 {
        let mu = self.s.region_means[region];
        let Some(normal) = &self.noise else {
            return mu.max(MIN_LATENCY_MS);
        };
        let v = match self.s.noise {
            NoiseModel::TruncatedGaussian => mu + normal.sample(rng),
            NoiseModel::LogNormal => {
                let sigma2 = (1.0 + (self.s.noise_std / mu).powi(2)).ln();
                let z = normal.sample(rng) / self.s.noise_std;
                (mu.ln() - sigma2 / 2.0 + sigma2.sqrt() * z).exp()
            }
        };
        v.max(MIN_LATENCY_MS)
    }
}

/// Generates `months * points_per_month` measurements.
///
/// Each synthetic user has a home location drawn by density-weighted
/// rejection sampling and emits 1 to 10 measurements scattered around it.
pub fn generate(s: &PlantedScenario) -> Result<SyntheticData> {
    s.validate()?;
    let sampler = Sampler {
        s,
        max_density: s.density.iter().copied().fold(0.0, f64::max),
        noise: (s.noise_std > 0.0).then(|| Normal::new(0.0, s.noise_std).expect("validated std")),
    };
    let mut rng = rng::seeded(s.seed);
    let mut measurements = Vec::with_capacity(s.months * s.points_per_month);
    let mut regions = Vec::with_capacity(measurements.capacity());
    for month in 0..s.months {
        let (t_start, t_end) = s.month_span(month);
        let mut user = 0usize;
        let mut emitted = 0usize;
        while emitted < s.points_per_month {
            let home = sampler.location(&mut rng);
            let user_id = format!("u{month:02}-{user:05}");
            let isp = &s.isps[rng::below(&mut rng, s.isps.len())];
            let count = rng
                .random_range(1..=10usize)
                .min(s.points_per_month - emitted);
            for _ in 0..count {
                let p = sampler.near(home, &mut rng);
                let region = s.region_of(p);
                measurements.push(Measurement {
                    id: format!("m{}", measurements.len()),
                    timestamp: rng.random_range(t_start..t_end),
                    location: unproject(p, s.origin),
                    latency_ms: sampler.latency(region, &mut rng),
                    user_id: user_id.clone(),
                    isp_id: isp.clone(),
                    used_vpn: false,
                    server_autoselected: true,
                    geolocation_source: GeolocationSource::Gps,
                });
                regions.push(region);
            }
            emitted += count;
            user += 1;
        }
    }
    Ok(SyntheticData {
        measurements,
        regions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::project;
    use crate::ingest::{partition_slices, SliceSpec};

    fn small(seed: u64) -> PlantedScenario {
        PlantedScenario {
            months: 2,
            points_per_month: 800,
            ..PlantedScenario::four_regions(seed)
        }
    }

    #[test]
    fn zero_noise_is_exact() {
        let s = PlantedScenario {
            noise_std: 0.0,
            ..small(1)
        };
        let data = generate(&s).unwrap();
        for (m, r) in data.measurements.iter().zip(&data.regions) {
            assert_eq!(m.latency_ms, s.region_means[*r]);
        }
    }

    #[test]
    fn zero_density_region_is_empty() {
        let s = PlantedScenario {
            density: vec![1.0, 0.0, 1.0, 1.0],
            ..small(2)
        };
        let data = generate(&s).unwrap();
        assert!(data.regions.iter().all(|&r| r != 1));
        for m in &data.measurements {
            assert_ne!(s.region_of(project(m.location, s.origin)), 1);
        }
    }

    #[test]
    fn region_means_within_standard_error() {
        let s = small(3);
        let data = generate(&s).unwrap();
        for k in 0..4 {
            let vals: Vec<f64> = data
                .measurements
                .iter()
                .zip(&data.regions)
                .filter(|(_, &r)| r == k)
                .map(|(m, _)| m.latency_ms)
                .collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            assert!(
                (mean - s.region_means[k]).abs() <= 3.0 * s.noise_std / n.sqrt(),
                "region {k}: {mean} from {n} points"
            );
        }
    }

    #[test]
    fn labels_follow_nearest_seed_and_months_fill() {
        let s = small(4);
        let data = generate(&s).unwrap();
        assert_eq!(data.measurements.len(), 1600);
        for (m, &r) in data.measurements.iter().zip(&data.regions) {
            let p = project(m.location, s.origin);
            let brute = (0..4)
                .min_by(|&a, &b| {
                    p.distance(&s.region_seeds[a])
                        .total_cmp(&p.distance(&s.region_seeds[b]))
                })
                .unwrap();
            assert_eq!(brute, r);
        }
        let slices = partition_slices(&data.measurements, SliceSpec::CalendarMonth);
        assert_eq!(
            slices.keys().cloned().collect::<Vec<_>>(),
            vec!["2022-01", "2022-02"]
        );
        assert!(slices.values().all(|v| v.len() == 800));
        let mut per_user: BTreeMap<&str, usize> = BTreeMap::new();
        for m in &data.measurements {
            *per_user.entry(&m.user_id).or_default() += 1;
        }
        assert!(per_user.values().all(|&c| (1..=10).contains(&c)));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        assert_eq!(generate(&small(5)).unwrap(), generate(&small(5)).unwrap());
        assert_ne!(generate(&small(5)).unwrap(), generate(&small(6)).unwrap());
    }

    #[test]
    fn lognormal_keeps_the_mean() {
        let s = PlantedScenario {
            noise: NoiseModel::LogNormal,
            noise_std: 10.0,
            months: 1,
            points_per_month: 20_000,
            ..small(7)
        };
        let data = generate(&s).unwrap();
        let vals: Vec<f64> = data
            .measurements
            .iter()
            .zip(&data.regions)
            .filter(|(_, &r)| r == 0)
            .map(|(m, _)| m.latency_ms)
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((mean - 15.0).abs() < 3.0 * 10.0 / (vals.len() as f64).sqrt());
    }

    #[test]
    fn invalid_scenarios() {
        let mut s = small(1);
        s.region_means[1] = s.region_means[0];
        assert!(matches!(generate(&s), Err(Error::InvalidScenario(_))));
        let s = PlantedScenario {
            region_seeds: vec![PlanarPoint::default()],
            ..small(1)
        };
        assert!(generate(&s).is_err());
        let s = PlantedScenario {
            noise_std: -1.0,
            ..small(1)
        };
        assert!(generate(&s).is_err());
    }
}
