//! Pipeline configuration: a sectioned TOML file whose every key can be
//! overridden from the command line.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregate::Metric;
use crate::error::{Error, Result};
use crate::evaluate::{SpatialWeights, DEFAULT_PERMUTATIONS};
use crate::geo::{GeoPoint, PolygonContiguity, DEFAULT_HEX_EDGE_M};
use crate::ingest::{FilterPolicy, Schema, SliceSpec};
use crate::interpolate::{InterpolatorConfig, DEFAULT_GRID_SPACING_M};
use crate::regionalize::{Objective, SkaterParams};
use crate::volatility::DEFAULT_REPLICATES;

/// Serde through `Display` / `FromStr`.
mod as_str {
    use super::*;
    use serde::{de, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(
        v: &T,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> std::result::Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?.parse().map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub path: Option<PathBuf>,
    pub schema: Schema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub drop_vpn: bool,
    pub require_autoselected_server: bool,
    pub require_gps: bool,
    /// Non-empty switches to per-ISP mode: one clustering series per ISP.
    pub isp: Vec<String>,
}

impl Default for FilterSection {
    fn default() -> Self {
        let p = FilterPolicy::default();
        Self {
            drop_vpn: p.drop_vpn,
            require_autoselected_server: p.require_autoselected_server,
            require_gps: p.require_gps,
            isp: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SliceKind {
    #[default]
    Month,
    Window,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SliceSection {
    pub kind: SliceKind,
    /// Window width for `kind = "window"`.
    pub days: u32,
}

impl Default for SliceSection {
    fn default() -> Self {
        Self {
            kind: SliceKind::Month,
            days: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Idw,
    Loess,
    Stbkr,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "idw" => Ok(Method::Idw),
            "loess" => Ok(Method::Loess),
            "stbkr" => Ok(Method::Stbkr),
            other => Err(Error::Config(format!(
                "unknown interpolation method `{other}` (expected idw, loess or stbkr)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpolateSection {
    pub method: Method,
    pub p: f64,
    /// Restrict IDW to the nearest samples; unset means all of them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neighbors: Option<usize>,
    pub span: f64,
    pub c: f64,
    pub k: usize,
    pub spacing: f64,
}

impl Default for InterpolateSection {
    fn default() -> Self {
        Self {
            method: Method::Idw,
            p: 2.0,
            neighbors: None,
            span: 0.3,
            c: 0.01,
            k: 50,
            spacing: DEFAULT_GRID_SPACING_M,
        }
    }
}

impl InterpolateSection {
    pub fn interpolator(&self) -> InterpolatorConfig {
        match self.method {
            Method::Idw => InterpolatorConfig::Idw {
                p: self.p,
                neighbors: self.neighbors,
            },
            Method::Loess => InterpolatorConfig::Loess { span: self.span },
            Method::Stbkr => InterpolatorConfig::Stbkr {
                c: self.c,
                k: self.k,
            },
        }
    }
}

/// Aggregation unit: the hex grid or polygons read from a GeoJSON file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum UnitSpec {
    #[default]
    Hex,
    Polygon(PathBuf),
}

impl FromStr for UnitSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "hex" => Ok(UnitSpec::Hex),
            Some(("polygon", path)) if !path.is_empty() => Ok(UnitSpec::Polygon(path.into())),
            _ => Err(Error::Config(format!(
                "unit `{s}` must be `hex` or `polygon:<file>`"
            ))),
        }
    }
}

impl Display for UnitSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            UnitSpec::Hex => f.write_str("hex"),
            UnitSpec::Polygon(p) => write!(f, "polygon:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContiguityRule {
    #[default]
    Rook,
    Queen,
}

impl From<ContiguityRule> for PolygonContiguity {
    fn from(r: ContiguityRule) -> Self {
        match r {
            ContiguityRule::Rook => PolygonContiguity::SharedEdge,
            ContiguityRule::Queen => PolygonContiguity::SharedVertex,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TessellationSection {
    #[serde(with = "as_str")]
    pub unit: UnitSpec,
    pub edge_length: f64,
    /// Polygon adjacency rule; hex cells always use their six neighbors.
    pub contiguity: ContiguityRule,
    /// Projection origin `[lat, lon]`; the data's bounding-box center when unset.
    pub origin: Option<[f64; 2]>,
}

impl Default for TessellationSection {
    fn default() -> Self {
        Self {
            unit: UnitSpec::Hex,
            edge_length: DEFAULT_HEX_EDGE_M,
            contiguity: ContiguityRule::Rook,
            origin: None,
        }
    }
}

impl TessellationSection {
    pub fn origin(&self) -> Result<Option<GeoPoint>> {
        self.origin
            .map(|[lat, lon]| {
                GeoPoint::new(lat, lon)
                    .map_err(|e| Error::Config(format!("tessellation.origin: {e}")))
            })
            .transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Aggregate the interpolated grid surface.
    #[default]
    Interpolated,
    /// Aggregate the measurements directly.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregateSection {
    #[serde(with = "as_str")]
    pub metric: Metric,
    pub source: Source,
    /// Cells with fewer values are dropped.
    pub min_count: usize,
}

impl Default for AggregateSection {
    fn default() -> Self {
        Self {
            metric: Metric::Mean,
            source: Source::Interpolated,
            min_count: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkaterSection {
    pub n_clusters: usize,
    pub floor: usize,
    #[serde(with = "as_str")]
    pub objective: Objective,
}

impl Default for SkaterSection {
    fn default() -> Self {
        let p = SkaterParams::default();
        Self {
            n_clusters: p.n_clusters,
            floor: p.floor,
            objective: p.objective,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightScheme {
    #[default]
    Binary,
    RowStandardized,
}

impl From<WeightScheme> for SpatialWeights {
    fn from(w: WeightScheme) -> Self {
        match w {
            WeightScheme::Binary => SpatialWeights::Binary,
            WeightScheme::RowStandardized => SpatialWeights::RowStandardized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub pairwise_ari: bool,
    pub morans_i: bool,
    pub permutations: usize,
    pub weights: WeightScheme,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            pairwise_ari: true,
            morans_i: false,
            permutations: DEFAULT_PERMUTATIONS,
            weights: WeightScheme::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolatilitySection {
    pub enabled: bool,
    pub replicates: usize,
    #[serde(with = "as_str")]
    pub metric: Metric,
}

impl Default for VolatilitySection {
    fn default() -> Self {
        Self {
            enabled: false,
            replicates: DEFAULT_REPLICATES,
            metric: Metric::P10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub max_clusters: usize,
    pub floors: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            max_clusters: 15,
            floors: vec![1, 2, 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub input: InputSection,
    pub filters: FilterSection,
    pub slices: SliceSection,
    pub interpolate: InterpolateSection,
    pub tessellation: TessellationSection,
    pub aggregate: AggregateSection,
    pub skater: SkaterSection,
    pub evaluate: EvaluateSection,
    pub volatility: VolatilitySection,
    pub sweep: SweepSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            input: InputSection::default(),
            filters: FilterSection::default(),
            slices: SliceSection::default(),
            interpolate: InterpolateSection::default(),
            tessellation: TessellationSection::default(),
            aggregate: AggregateSection::default(),
            skater: SkaterSection::default(),
            evaluate: EvaluateSection::default(),
            volatility: VolatilitySection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative paths inside it resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.input.path.as_mut() {
            resolve(p);
        }
        if let UnitSpec::Polygon(p) = &mut cfg.tessellation.unit {
            resolve(p);
        }
        resolve(&mut cfg.out);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.interpolate
            .interpolator()
            .validate()
            .map_err(|e| Error::Config(format!("[interpolate] {e}")))?;
        if !(self.interpolate.spacing > 0.0 && self.interpolate.spacing.is_finite()) {
            return bad(format!(
                "interpolate.spacing must be > 0, got {}",
                self.interpolate.spacing
            ));
        }
        if !(self.tessellation.edge_length > 0.0 && self.tessellation.edge_length.is_finite()) {
            return bad(format!(
                "tessellation.edge_length must be > 0, got {}",
                self.tessellation.edge_length
            ));
        }
        self.tessellation.origin()?;
        if self.skater.n_clusters == 0 || self.skater.floor == 0 {
            return bad("skater.n_clusters and skater.floor must be >= 1".into());
        }
        if self.slices.kind == SliceKind::Window && self.slices.days == 0 {
            return bad("slices.days must be >= 1".into());
        }
        if self.volatility.enabled && self.volatility.replicates < 2 {
            return bad("volatility.replicates must be >= 2".into());
        }
        if self.sweep.max_clusters < 2 || self.sweep.floors.is_empty() {
            return bad("sweep needs max_clusters >= 2 and at least one floor".into());
        }
        Ok(())
    }

    pub fn filter_policy(&self) -> FilterPolicy {
        FilterPolicy {
            drop_vpn: self.filters.drop_vpn,
            require_autoselected_server: self.filters.require_autoselected_server,
            require_gps: self.filters.require_gps,
        }
    }

    pub fn slice_spec(&self) -> SliceSpec {
        match self.slices.kind {
            SliceKind::Month => SliceSpec::CalendarMonth,
            SliceKind::Window => SliceSpec::FixedWindow {
                days: self.slices.days,
            },
        }
    }

    pub fn skater_params(&self) -> SkaterParams {
        SkaterParams {
            n_clusters: self.skater.n_clusters,
            floor: self.skater.floor,
            objective: self.skater.objective,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_defaults() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.skater.n_clusters, 7);
        assert_eq!(cfg.skater.floor, 2);
        assert_eq!(cfg.skater.objective, Objective::Ssd);
        assert_eq!(cfg.interpolate.spacing, 50.0);
        assert_eq!(cfg.interpolate.interpolator(), InterpolatorConfig::idw(2.0));
        assert_eq!(cfg.tessellation.edge_length, 461.35);
        assert_eq!(cfg.tessellation.unit, UnitSpec::Hex);
        assert_eq!(cfg.volatility.replicates, 1000);
        assert_eq!(cfg.volatility.metric, Metric::P10);
        assert_eq!(cfg.evaluate.permutations, 999);
        assert_eq!(cfg.evaluate.weights, WeightScheme::Binary);
        assert_eq!(cfg.aggregate.metric, Metric::Mean);
        assert_eq!(cfg.filter_policy(), FilterPolicy::default());
        assert_eq!(cfg.slice_spec(), SliceSpec::CalendarMonth);
    }

    #[test]
    fn empty_file_is_defaults_and_round_trips() {
        let cfg = PipelineConfig::from_toml("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = PipelineConfig::from_toml(
            r#"
seed = 42
[interpolate]
method = "loess"
span = 0.5
[tessellation]
unit = "polygon:tracts.geojson"
contiguity = "queen"
[aggregate]
metric = "p97.5"
source = "raw"
[skater]
n_clusters = 4
objective = "max-edge-weight"
[filters]
isp = ["a", "b"]
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(
            cfg.interpolate.interpolator(),
            InterpolatorConfig::Loess { span: 0.5 }
        );
        assert_eq!(
            cfg.tessellation.unit,
            UnitSpec::Polygon("tracts.geojson".into())
        );
        assert_eq!(cfg.aggregate.metric, Metric::P97_5);
        assert_eq!(cfg.aggregate.source, Source::Raw);
        assert_eq!(cfg.skater_params().objective, Objective::MaxEdgeWeight);
        assert_eq!(cfg.skater.floor, 2);
        assert_eq!(cfg.filters.isp.len(), 2);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            "[skater]\nn_cluster = 3",
            "[aggregate]\nmetric = \"median\"",
            "[tessellation]\nunit = \"tract\"",
            "[interpolate]\nspacing = 0.0",
            "[interpolate]\nmethod = \"loess\"\nspan = 2.0",
            "[skater]\nfloor = 0",
        ] {
            assert!(
                matches!(PipelineConfig::from_toml(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }
}
