use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use latency_regions::aggregate::{self, Metric};
use latency_regions::config::{PipelineConfig, UnitSpec};
use latency_regions::evaluate::{ari_matrix, median};
use latency_regions::export;
use latency_regions::geo::{CellId, GeoPoint, Tessellation};
use latency_regions::ingest::{apply_filters, partition_slices, write_measurements};
use latency_regions::interpolate::{make_grid, samples_from, GridSurface};
use latency_regions::pipeline::{self, ALL_SERIES};
use latency_regions::regionalize::{skater_partition, Clustering, ContiguityGraph, Objective};
use latency_regions::synth::{generate, PlantedScenario};
use latency_regions::volatility::{volatility_map, VolatilityParams};
use latency_regions::{Error, Result};

#[derive(Parser)]
#[command(
    name = "latreg",
    version,
    about = "Stable latency sampling regions from point measurements"
)]
struct Cli {
    #[command(flatten)]
    flags: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each overrides its config key.
#[derive(Args, Default)]
struct Overrides {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    metric: Option<Metric>,
    #[arg(long, global = true)]
    n_clusters: Option<usize>,
    #[arg(long, global = true)]
    floor: Option<usize>,
    /// `ssd` or `max-edge-weight`.
    #[arg(long, global = true)]
    objective: Option<Objective>,
    /// Per-ISP mode; repeat or comma-separate.
    #[arg(long, global = true, value_delimiter = ',')]
    isp: Vec<String>,
    /// `hex` or `polygon:<file>`.
    #[arg(long, global = true)]
    unit: Option<UnitSpec>,
    /// Grid spacing in meters.
    #[arg(long, global = true)]
    spacing: Option<f64>,
    /// Hex edge length in meters.
    #[arg(long, global = true)]
    edge_length: Option<f64>,
    /// Weight only the k nearest samples in IDW.
    #[arg(long, global = true)]
    idw_neighbors: Option<usize>,
    #[arg(long, global = true)]
    replicates: Option<usize>,
    /// Projection origin as `lat,lon`.
    #[arg(long, global = true, value_parser = parse_origin, allow_hyphen_values = true)]
    origin: Option<GeoPoint>,
    /// Measurement CSV; overrides `input.path`.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
}

fn parse_origin(s: &str) -> std::result::Result<GeoPoint, String> {
    let (lat, lon) = s.split_once(',').ok_or("expected `lat,lon`")?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    GeoPoint::new(parse(lat)?, parse(lon)?).map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted four-region dataset.
    Synth {
        #[arg(long, default_value_t = 6)]
        months: usize,
        #[arg(long, default_value_t = 5000)]
        points_per_month: usize,
        #[arg(long, default_value_t = 3.0)]
        noise_std: f64,
    },
    /// Parse and filter measurements; report the filtering funnel and slices.
    Ingest,
    /// Interpolate filtered measurements onto a grid.
    Interpolate {
        /// Restrict to one slice, e.g. `2022-03`.
        #[arg(long)]
        slice: Option<String>,
    },
    /// Aggregate measurements, or a grid surface, over cells.
    Aggregate {
        /// Grid surface CSV from `interpolate`; raw measurements otherwise.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Cluster an aggregate CSV with SKATER.
    Regionalize {
        #[arg(long)]
        aggregates: PathBuf,
    },
    /// Pairwise ARI between clustering CSVs.
    Stability {
        #[arg(required = true, num_args = 2..)]
        clusterings: Vec<PathBuf>,
    },
    /// Bootstrap volatility map of the pooled measurements.
    Volatility,
    /// Median pairwise ARI over N and floor.
    Sweep {
        #[arg(long)]
        max_clusters: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        floors: Vec<usize>,
    },
    /// Run the full pipeline.
    Pipeline,
}

impl Overrides {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.metric {
            cfg.aggregate.metric = v;
        }
        if let Some(v) = self.n_clusters {
            cfg.skater.n_clusters = v;
        }
        if let Some(v) = self.floor {
            cfg.skater.floor = v;
        }
        if let Some(v) = self.objective {
            cfg.skater.objective = v;
        }
        if !self.isp.is_empty() {
            cfg.filters.isp = self.isp.clone();
        }
        if let Some(v) = &self.unit {
            cfg.tessellation.unit = v.clone();
        }
        if let Some(v) = self.idw_neighbors {
            cfg.interpolate.neighbors = Some(v);
        }
        if let Some(v) = self.spacing {
            cfg.interpolate.spacing = v;
        }
        if let Some(v) = self.edge_length {
            cfg.tessellation.edge_length = v;
        }
        if let Some(v) = self.replicates {
            cfg.volatility.replicates = v;
        }
        if let Some(o) = self.origin {
            cfg.tessellation.origin = Some([o.lat, o.lon]);
        }
        if let Some(v) = &self.input {
            cfg.input.path = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    info!("wrote {}", path.display());
    Ok(path)
}

fn buffer(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut b = Vec::new();
    f(&mut b)?;
    Ok(b)
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

/// Tessellation for steps that only see cell ids.
fn tessellation_without_data(
    cfg: &PipelineConfig,
    fallback: Option<GeoPoint>,
) -> Result<Tessellation> {
    let origin = cfg.tessellation.origin()?.or(fallback);
    match &cfg.tessellation.unit {
        UnitSpec::Hex => {
            let origin = origin.ok_or_else(|| {
                Error::Config("hex cells need a projection origin: pass --origin lat,lon or set tessellation.origin".into())
            })?;
            Tessellation::hex(cfg.tessellation.edge_length, origin)
        }
        UnitSpec::Polygon(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            Tessellation::from_geojson(&text, origin, cfg.tessellation.contiguity.into())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.flags.config()?;
    let out = cfg.out.clone();
    match cli.command {
        Command::Synth {
            months,
            points_per_month,
            noise_std,
        } => {
            let s = PlantedScenario {
                months,
                points_per_month,
                noise_std,
                ..PlantedScenario::four_regions(cfg.seed)
            };
            let data = generate(&s)?;
            write_file(
                &out,
                "measurements.csv",
                &buffer(|b| write_measurements(b, &data.measurements))?,
            )?;
            let mut truth = String::from("id,region\n");
            for (m, r) in data.measurements.iter().zip(&data.regions) {
                truth.push_str(&format!("{},{r}\n", m.id));
            }
            write_file(&out, "regions.csv", truth.as_bytes())?;
        }
        Command::Ingest => {
            let ms = pipeline::load_measurements(&cfg)?;
            let (kept, funnel) = apply_filters(ms, cfg.filter_policy());
            write_file(&out, "funnel.csv", &buffer(|b| funnel.write_csv(b))?)?;
            write_file(
                &out,
                "filtered.csv",
                &buffer(|b| write_measurements(b, &kept))?,
            )?;
            let mut slices = String::from("slice,measurements\n");
            for (name, ms) in partition_slices(&kept, cfg.slice_spec()) {
                slices.push_str(&format!("{name},{}\n", ms.len()));
            }
            write_file(&out, "slices.csv", slices.as_bytes())?;
        }
        Command::Interpolate { slice } => {
            let ms = pipeline::load_measurements(&cfg)?;
            let (mut kept, _) = apply_filters(ms, cfg.filter_policy());
            if let Some(name) = slice {
                kept = partition_slices(&kept, cfg.slice_spec())
                    .remove(&name)
                    .ok_or_else(|| Error::Config(format!("no slice `{name}` in the input")))?;
            }
            let origin = match cfg.tessellation.origin()? {
                Some(o) => o,
                None => pipeline::bbox_center(&kept)?,
            };
            let grid = make_grid(
                &samples_from(&kept, origin),
                cfg.interpolate.interpolator(),
                None,
                cfg.interpolate.spacing,
            )?;
            write_file(
                &out,
                "surface.csv",
                &buffer(|b| grid.write_csv(b, Some(origin)))?,
            )?;
        }
        Command::Aggregate { grid } => {
            let (points, t) = match grid {
                Some(path) => {
                    let (surface, projection) =
                        GridSurface::read_csv(BufReader::new(open(&path)?))?;
                    let t = tessellation_without_data(&cfg, projection)?;
                    (surface.iter().collect::<Vec<_>>(), t)
                }
                None => {
                    let ms = pipeline::load_measurements(&cfg)?;
                    let (kept, _) = apply_filters(ms, cfg.filter_policy());
                    let t = pipeline::resolve_tessellation(&cfg, &kept)?;
                    (pipeline::measurement_points(&kept, t.origin()), t)
                }
            };
            let aggs = aggregate::aggregate_cells(points, &t, cfg.aggregate.min_count)?;
            write_file(
                &out,
                "aggregates.csv",
                &buffer(|b| aggregate::write_csv(b, &aggs, t.is_hex()))?,
            )?;
        }
        Command::Regionalize { aggregates } => {
            let aggs = aggregate::read_csv(open(&aggregates)?)?;
            let t = tessellation_without_data(&cfg, None)?;
            let values = aggregate::metric_values(&aggs, cfg.aggregate.metric);
            let g = ContiguityGraph::from_scalar(&values, &t)?;
            let c = skater_partition(&g, cfg.skater_params())?;
            let by_cell: BTreeMap<CellId, _> =
                aggs.into_iter().map(|a| (a.cell.clone(), a)).collect();
            write_file(&out, "clusters.csv", &buffer(|b| c.write_csv(b))?)?;
            let doc = export::clustering_geojson(&c, &t, Some(&by_cell));
            write_file(
                &out,
                "clusters.geojson",
                serde_json::to_string_pretty(&doc)?.as_bytes(),
            )?;
            write_file(
                &out,
                "clusters.svg",
                export::clustering_svg(&c, &t, &export::CATEGORICAL).as_bytes(),
            )?;
        }
        Command::Stability { clusterings } => {
            let cs = clusterings
                .iter()
                .map(|p| Clustering::read_csv(open(p)?))
                .collect::<Result<Vec<_>>>()?;
            let labels = clusterings
                .iter()
                .map(|p| {
                    p.file_stem()
                        .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into())
                })
                .collect();
            let m = ari_matrix(&cs, labels)?;
            write_file(&out, "ari_matrix.csv", &buffer(|b| m.write_csv(b))?)?;
            println!("median pairwise ARI: {:.4}", median(&m.upper_triangle()));
        }
        Command::Volatility => {
            let mut cfg = cfg;
            cfg.volatility.enabled = true;
            cfg.filters.isp.clear();
            let ms = pipeline::load_measurements(&cfg)?;
            let t = pipeline::resolve_tessellation(&cfg, &ms)?;
            let p = pipeline::prepare(&cfg, ms, t)?;
            let params = VolatilityParams {
                skater: cfg.skater_params(),
                metric: cfg.volatility.metric,
                n_replicates: cfg.volatility.replicates,
                seed: cfg.seed,
            };
            let v = volatility_map(&p.pooled[ALL_SERIES], &p.contiguity, params)?;
            let t = &p.tessellation;
            write_file(&out, "volatility.csv", &buffer(|b| v.write_csv(b))?)?;
            let doc = export::volatility_geojson(&v, t);
            write_file(
                &out,
                "volatility.geojson",
                serde_json::to_string_pretty(&doc)?.as_bytes(),
            )?;
            write_file(
                &out,
                "volatility.svg",
                export::volatility_svg(&v, t, &export::SEQUENTIAL).as_bytes(),
            )?;
        }
        Command::Sweep {
            max_clusters,
            floors,
        } => {
            let ms = pipeline::load_measurements(&cfg)?;
            let t = pipeline::resolve_tessellation(&cfg, &ms)?;
            let p = pipeline::prepare(&cfg, ms, t)?;
            let floors = if floors.is_empty() {
                cfg.sweep.floors.clone()
            } else {
                floors
            };
            let points = pipeline::sweep(
                &p,
                &cfg,
                max_clusters.unwrap_or(cfg.sweep.max_clusters),
                &floors,
            )?;
            write_file(
                &out,
                "sweep.csv",
                &buffer(|b| pipeline::write_sweep_csv(b, &points))?,
            )?;
        }
        Command::Pipeline => {
            let run = pipeline::run_pipeline(&cfg)?;
            for (name, s) in &run.series {
                match s.median_ari {
                    Some(m) => println!(
                        "{name}: {} slices, median pairwise ARI {m:.4}",
                        s.clusterings.len()
                    ),
                    None => println!("{name}: {} slices", s.clusterings.len()),
                }
            }
            println!(
                "{} artifacts listed in {}",
                run.manifest.artifacts.len(),
                out.join("manifest.json").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
