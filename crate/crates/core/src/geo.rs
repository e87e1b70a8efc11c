//! Planar projection, hexagonal tessellation and polygon units.
//!
//! All geometry downstream of ingestion happens in a local equirectangular
//! plane measured in meters. Hex cells use a pointy-top axial layout; polygon
//! units are arbitrary (multi)polygons read from GeoJSON.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde_json::Value;

use crate::error::{Error, Result};

/// Mean earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Edge length of the default hexagon, matching the average H3 resolution-8 edge.
pub const DEFAULT_HEX_EDGE_M: f64 = 461.35;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidParameter(format!(
                "coordinate out of range: lat={lat}, lon={lon}"
            )));
        }
        Ok(Self { lat, lon })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &PlanarPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &PlanarPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Local equirectangular projection around `origin`.
pub fn project(p: GeoPoint, origin: GeoPoint) -> PlanarPoint {
    let rad = std::f64::consts::PI / 180.0;
    let x = EARTH_RADIUS_M * (p.lon - origin.lon) * rad * (origin.lat * rad).cos();
    let y = EARTH_RADIUS_M * (p.lat - origin.lat) * rad;
    PlanarPoint { x, y }
}

pub fn unproject(p: PlanarPoint, origin: GeoPoint) -> GeoPoint {
    let rad = std::f64::consts::PI / 180.0;
    let lat = origin.lat + p.y / (EARTH_RADIUS_M * rad);
    let lon = origin.lon + p.x / (EARTH_RADIUS_M * rad * (origin.lat * rad).cos());
    GeoPoint { lat, lon }
}

/// Axial hex coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HexCellId {
    pub q: i64,
    pub r: i64,
}

impl HexCellId {
    pub const fn new(q: i64, r: i64) -> Self {
        Self { q, r }
    }

    pub fn center(&self, edge: f64) -> PlanarPoint {
        let (q, r) = (self.q as f64, self.r as f64);
        PlanarPoint {
            x: edge * SQRT3 * (q + r / 2.0),
            y: edge * 1.5 * r,
        }
    }

    /// Corners counter-clockwise starting at the lower-right vertex.
    pub fn corners(&self, edge: f64) -> [PlanarPoint; 6] {
        let c = self.center(edge);
        std::array::from_fn(|i| {
            let angle = (60.0 * i as f64 - 30.0).to_radians();
            PlanarPoint {
                x: c.x + edge * angle.cos(),
                y: c.y + edge * angle.sin(),
            }
        })
    }

    pub fn from_point(p: PlanarPoint, edge: f64) -> Self {
        let fq = (SQRT3 / 3.0 * p.x - p.y / 3.0) / edge;
        let fr = (2.0 / 3.0 * p.y) / edge;
        cube_round(fq, fr)
    }
}

impl fmt::Display for HexCellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.q, self.r)
    }
}

fn cube_round(fq: f64, fr: f64) -> HexCellId {
    let fs = -fq - fr;
    let mut q = fq.round();
    let mut r = fr.round();
    let s = fs.round();
    let dq = (q - fq).abs();
    let dr = (r - fr).abs();
    let ds = (s - fs).abs();
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    HexCellId::new(q as i64, r as i64)
}

pub const AXIAL_OFFSETS: [(i64, i64); 6] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)];

pub fn cell_neighbors(c: HexCellId) -> [HexCellId; 6] {
    AXIAL_OFFSETS.map(|(dq, dr)| HexCellId::new(c.q + dq, c.r + dr))
}

/// Identifier of a tessellation cell: a hex or a named polygon unit.
///
/// Ordering is lexical on `(q, r)` for hexes and on the id string for units;
/// it drives every deterministic tie-break downstream.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellId {
    Hex(HexCellId),
    Unit(String),
}

impl CellId {
    pub fn hex(q: i64, r: i64) -> Self {
        CellId::Hex(HexCellId::new(q, r))
    }

    pub fn as_hex(&self) -> Option<HexCellId> {
        match self {
            CellId::Hex(h) => Some(*h),
            CellId::Unit(_) => None,
        }
    }

    /// Parses the textual form written by `Display`; `hex` selects the layout.
    pub fn parse(s: &str, hex: bool) -> Option<Self> {
        if hex {
            let (q, r) = s.split_once(':')?;
            Some(CellId::hex(q.trim().parse().ok()?, r.trim().parse().ok()?))
        } else {
            Some(CellId::Unit(s.to_string()))
        }
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellId::Hex(h) => h.fmt(f),
            CellId::Unit(u) => f.write_str(u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolygonContiguity {
    /// Units are adjacent when they share a boundary segment.
    #[default]
    SharedEdge,
    /// Units are adjacent when they share at least one vertex.
    SharedVertex,
}

#[derive(Debug, Clone)]
pub struct PolygonUnit {
    pub id: String,
    /// Closed rings; holes and multipolygon parts are all listed here and
    /// resolved by the even-odd rule.
    pub rings: Vec<Vec<PlanarPoint>>,
}

impl PolygonUnit {
    pub fn contains(&self, p: PlanarPoint) -> bool {
        let mut inside = false;
        for ring in &self.rings {
            for w in ring.windows(2) {
                let (a, b) = (w[0], w[1]);
                if (a.y > p.y) != (b.y > p.y) {
                    let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                    if p.x < x_cross {
                        inside = !inside;
                    }
                }
            }
        }
        inside || self.on_boundary(p)
    }

    fn on_boundary(&self, p: PlanarPoint) -> bool {
        self.rings
            .iter()
            .any(|ring| ring.windows(2).any(|w| point_on_segment(p, w[0], w[1])))
    }

    /// Area-weighted centroid of the outer shell (largest ring).
    pub fn centroid(&self) -> PlanarPoint {
        let ring = self
            .rings
            .iter()
            .max_by(|a, b| ring_area(a).abs().total_cmp(&ring_area(b).abs()))
            .expect("unit has at least one ring");
        ring_centroid(ring)
    }
}

fn point_on_segment(p: PlanarPoint, a: PlanarPoint, b: PlanarPoint) -> bool {
    let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    let len = a.distance(&b).max(1e-12);
    if cross.abs() / len > 1e-9 {
        return false;
    }
    p.x >= a.x.min(b.x) - 1e-9
        && p.x <= a.x.max(b.x) + 1e-9
        && p.y >= a.y.min(b.y) - 1e-9
        && p.y <= a.y.max(b.y) + 1e-9
}

fn ring_area(ring: &[PlanarPoint]) -> f64 {
    ring.windows(2)
        .map(|w| w[0].x * w[1].y - w[1].x * w[0].y)
        .sum::<f64>()
        / 2.0
}

fn ring_centroid(ring: &[PlanarPoint]) -> PlanarPoint {
    let a = ring_area(ring);
    if a.abs() < 1e-12 {
        let n = (ring.len() - 1).max(1) as f64;
        let (sx, sy) = ring[..ring.len() - 1]
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        return PlanarPoint::new(sx / n, sy / n);
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for w in ring.windows(2) {
        let f = w[0].x * w[1].y - w[1].x * w[0].y;
        cx += (w[0].x + w[1].x) * f;
        cy += (w[0].y + w[1].y) * f;
    }
    PlanarPoint::new(cx / (6.0 * a), cy / (6.0 * a))
}

fn segments_intersect(a: PlanarPoint, b: PlanarPoint, c: PlanarPoint, d: PlanarPoint) -> bool {
    fn orient(p: PlanarPoint, q: PlanarPoint, r: PlanarPoint) -> f64 {
        (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)
    }
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && point_on_segment(a, c, d))
        || (d2 == 0.0 && point_on_segment(b, c, d))
        || (d3 == 0.0 && point_on_segment(c, a, b))
        || (d4 == 0.0 && point_on_segment(d, a, b))
}

fn validate_ring(id: &str, ring: &[PlanarPoint]) -> Result<()> {
    let invalid = |msg: &str| Error::InvalidTessellation(format!("unit `{id}`: {msg}"));
    if ring.len() < 4 {
        return Err(invalid("ring needs at least 3 distinct vertices"));
    }
    if ring.first() != ring.last() {
        return Err(invalid("ring is not closed"));
    }
    if ring.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(invalid("non-finite vertex"));
    }
    let m = ring.len() - 1;
    for i in 0..m {
        for j in (i + 1)..m {
            // consecutive segments share a vertex by construction
            if j == i + 1 || (i == 0 && j == m - 1) {
                continue;
            }
            if segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                return Err(invalid("ring self-intersects"));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct HexGrid {
    pub edge_length: f64,
    pub origin: GeoPoint,
}

#[derive(Debug, Clone)]
pub struct PolygonUnits {
    pub units: Vec<PolygonUnit>,
    pub origin: GeoPoint,
    pub contiguity: PolygonContiguity,
}

#[derive(Debug, Clone)]
pub enum Tessellation {
    Hex(HexGrid),
    Polygons(PolygonUnits),
}

type Ring = Vec<(f64, f64)>;

impl Tessellation {
    pub fn hex(edge_length: f64, origin: GeoPoint) -> Result<Self> {
        if !(edge_length > 0.0 && edge_length.is_finite()) {
            return Err(Error::InvalidTessellation(format!(
                "hex edge length must be positive, got {edge_length}"
            )));
        }
        Ok(Tessellation::Hex(HexGrid {
            edge_length,
            origin,
        }))
    }

    pub fn polygons(
        units: Vec<PolygonUnit>,
        origin: GeoPoint,
        contiguity: PolygonContiguity,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for unit in &units {
            if !seen.insert(unit.id.as_str()) {
                return Err(Error::InvalidTessellation(format!(
                    "duplicate unit id `{}`",
                    unit.id
                )));
            }
            if unit.rings.is_empty() {
                return Err(Error::InvalidTessellation(format!(
                    "unit `{}` has no rings",
                    unit.id
                )));
            }
            for ring in &unit.rings {
                validate_ring(&unit.id, ring)?;
            }
        }
        Ok(Tessellation::Polygons(PolygonUnits {
            units,
            origin,
            contiguity,
        }))
    }

    pub fn origin(&self) -> GeoPoint {
        match self {
            Tessellation::Hex(h) => h.origin,
            Tessellation::Polygons(p) => p.origin,
        }
    }

    pub fn is_hex(&self) -> bool {
        matches!(self, Tessellation::Hex(_))
    }

    /// Cell containing `p`, or `None` when no polygon unit contains it.
    pub fn point_to_cell(&self, p: PlanarPoint) -> Option<CellId> {
        match self {
            Tessellation::Hex(h) => Some(CellId::Hex(HexCellId::from_point(p, h.edge_length))),
            Tessellation::Polygons(units) => units
                .units
                .iter()
                .find(|u| u.contains(p))
                .map(|u| CellId::Unit(u.id.clone())),
        }
    }

    /// Rings outlining a cell in planar coordinates.
    pub fn cell_rings(&self, cell: &CellId) -> Option<Vec<Vec<PlanarPoint>>> {
        match (self, cell) {
            (Tessellation::Hex(h), CellId::Hex(c)) => {
                let mut ring = c.corners(h.edge_length).to_vec();
                ring.push(ring[0]);
                Some(vec![ring])
            }
            (Tessellation::Polygons(units), CellId::Unit(id)) => units
                .units
                .iter()
                .find(|u| &u.id == id)
                .map(|u| u.rings.clone()),
            _ => None,
        }
    }

    pub fn cell_center(&self, cell: &CellId) -> Option<PlanarPoint> {
        match (self, cell) {
            (Tessellation::Hex(h), CellId::Hex(c)) => Some(c.center(h.edge_length)),
            (Tessellation::Polygons(units), CellId::Unit(id)) => units
                .units
                .iter()
                .find(|u| &u.id == id)
                .map(PolygonUnit::centroid),
            _ => None,
        }
    }

    /// Reads polygon units from a GeoJSON FeatureCollection whose features
    /// carry a string `unit_id` property.
    pub fn from_geojson(
        text: &str,
        origin: Option<GeoPoint>,
        contiguity: PolygonContiguity,
    ) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)?;
        let bad = |m: &str| Error::InvalidGeoJson(m.to_string());
        if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
            return Err(bad("expected a FeatureCollection"));
        }
        let features = doc
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing `features` array"))?;

        let mut raw: Vec<(String, Vec<Ring>)> = Vec::with_capacity(features.len());
        for (i, feature) in features.iter().enumerate() {
            let id = feature
                .pointer("/properties/unit_id")
                .and_then(Value::as_str)
                .ok_or_else(|| {
                    Error::InvalidGeoJson(format!("feature {i}: missing string property `unit_id`"))
                })?;
            let geometry = feature
                .get("geometry")
                .ok_or_else(|| Error::InvalidGeoJson(format!("feature {i}: missing geometry")))?;
            let coords = geometry.get("coordinates");
            let rings = match geometry.get("type").and_then(Value::as_str) {
                Some("Polygon") => parse_polygon(coords)?,
                Some("MultiPolygon") => coords
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad("MultiPolygon without coordinates"))?
                    .iter()
                    .map(|poly| parse_polygon(Some(poly)))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .flatten()
                    .collect(),
                other => {
                    return Err(Error::InvalidGeoJson(format!(
                        "feature {i}: unsupported geometry {other:?}"
                    )))
                }
            };
            raw.push((id.to_string(), rings));
        }

        let origin = match origin {
            Some(o) => o,
            None => {
                let (mut min_lat, mut max_lat, mut min_lon, mut max_lon) =
                    (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
                for (lon, lat) in raw.iter().flat_map(|(_, r)| r.iter().flatten()) {
                    min_lat = min_lat.min(*lat);
                    max_lat = max_lat.max(*lat);
                    min_lon = min_lon.min(*lon);
                    max_lon = max_lon.max(*lon);
                }
                if min_lat > max_lat {
                    return Err(bad("no coordinates"));
                }
                GeoPoint::new((min_lat + max_lat) / 2.0, (min_lon + max_lon) / 2.0)?
            }
        };
        let units = raw
            .into_iter()
            .map(|(id, rings)| PolygonUnit {
                id,
                rings: rings
                    .into_iter()
                    .map(|ring| {
                        ring.into_iter()
                            .map(|(lon, lat)| project(GeoPoint { lat, lon }, origin))
                            .collect()
                    })
                    .collect(),
            })
            .collect();
        Tessellation::polygons(units, origin, contiguity)
    }
}

fn parse_polygon(coords: Option<&Value>) -> Result<Vec<Vec<(f64, f64)>>> {
    let bad = |m: &str| Error::InvalidGeoJson(m.to_string());
    coords
        .and_then(Value::as_array)
        .ok_or_else(|| bad("polygon without coordinates"))?
        .iter()
        .map(|ring| {
            ring.as_array()
                .ok_or_else(|| bad("ring is not an array"))?
                .iter()
                .map(|pos| {
                    let lon = pos.get(0).and_then(Value::as_f64);
                    let lat = pos.get(1).and_then(Value::as_f64);
                    match (lon, lat) {
                        (Some(lon), Some(lat)) => Ok((lon, lat)),
                        _ => Err(bad("position must be [lon, lat]")),
                    }
                })
                .collect()
        })
        .collect()
}

/// Cells and undirected adjacency over them.
///
/// `cells` is sorted; edges are index pairs `(i, j)` with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Contiguity {
    pub cells: Vec<CellId>,
    pub edges: Vec<(usize, usize)>,
}

impl Contiguity {
    pub fn index_of(&self, cell: &CellId) -> Option<usize> {
        self.cells.binary_search(cell).ok()
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.cells.len()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    /// Connected component label per cell, numbered by lowest member index.
    pub fn components(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let mut comp = vec![usize::MAX; self.cells.len()];
        let mut next = 0;
        for start in 0..self.cells.len() {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = next;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }
}

fn quantize(p: PlanarPoint) -> (i64, i64) {
    ((p.x * 1e6).round() as i64, (p.y * 1e6).round() as i64)
}

pub fn build_contiguity(cells: &BTreeSet<CellId>, t: &Tessellation) -> Result<Contiguity> {
    if cells.is_empty() {
        return Err(Error::EmptyCellSet);
    }
    let cells: Vec<CellId> = cells.iter().cloned().collect();
    let index: HashMap<&CellId, usize> = cells.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut edges = BTreeSet::new();
    match t {
        Tessellation::Hex(_) => {
            for (i, cell) in cells.iter().enumerate() {
                let Some(h) = cell.as_hex() else { continue };
                for n in cell_neighbors(h) {
                    if let Some(&j) = index.get(&CellId::Hex(n)) {
                        if i < j {
                            edges.insert((i, j));
                        }
                    }
                }
            }
        }
        Tessellation::Polygons(units) => {
            let mut shared: BTreeMap<_, BTreeSet<usize>> = BTreeMap::new();
            for unit in &units.units {
                let Some(&i) = index.get(&CellId::Unit(unit.id.clone())) else {
                    continue;
                };
                for ring in &unit.rings {
                    match units.contiguity {
                        PolygonContiguity::SharedEdge => {
                            for w in ring.windows(2) {
                                let (a, b) = (quantize(w[0]), quantize(w[1]));
                                if a != b {
                                    shared.entry((a.min(b), a.max(b))).or_default().insert(i);
                                }
                            }
                        }
                        PolygonContiguity::SharedVertex => {
                            for p in ring {
                                let a = quantize(*p);
                                shared.entry((a, a)).or_default().insert(i);
                            }
                        }
                    }
                }
            }
            for members in shared.values() {
                let members: Vec<usize> = members.iter().copied().collect();
                for (k, &a) in members.iter().enumerate() {
                    for &b in &members[k + 1..] {
                        edges.insert((a, b));
                    }
                }
            }
        }
    }
    Ok(Contiguity {
        cells,
        edges: edges.into_iter().collect(),
    })
}

type Side = ((i64, i64), (i64, i64));

/// Outline of a union of hex cells as polygon rings.
///
/// Boundary edges are the hex sides used by exactly one member cell; they are
/// chained into closed rings. Useful for building irregular polygon units.
pub fn merge_hex_cells(cells: &[HexCellId], edge: f64) -> Vec<Vec<PlanarPoint>> {
    let mut side_count: BTreeMap<Side, usize> = BTreeMap::new();
    let mut coords: HashMap<(i64, i64), PlanarPoint> = HashMap::new();
    let mut directed = Vec::new();
    let unique: BTreeSet<HexCellId> = cells.iter().copied().collect();
    for cell in &unique {
        let corners = cell.corners(edge);
        for i in 0..6 {
            let (a, b) = (corners[i], corners[(i + 1) % 6]);
            let (ka, kb) = (quantize_coarse(a), quantize_coarse(b));
            coords.entry(ka).or_insert(a);
            coords.entry(kb).or_insert(b);
            *side_count.entry((ka.min(kb), ka.max(kb))).or_default() += 1;
            directed.push((ka, kb));
        }
    }
    // Counter-clockwise sides of boundary edges, keyed by start vertex.
    let mut next: BTreeMap<(i64, i64), Vec<(i64, i64)>> = BTreeMap::new();
    for (a, b) in directed {
        if side_count[&(a.min(b), a.max(b))] == 1 {
            next.entry(a).or_default().push(b);
        }
    }
    let mut rings = Vec::new();
    while let Some((&start, _)) = next.iter().find(|(_, v)| !v.is_empty()) {
        let mut ring = vec![coords[&start]];
        let mut cur = start;
        loop {
            let outs = next
                .get_mut(&cur)
                .expect("boundary vertex has an outgoing side");
            let nxt = outs.remove(0);
            ring.push(coords[&nxt]);
            cur = nxt;
            if cur == start {
                break;
            }
        }
        rings.push(ring);
    }
    rings
}

fn quantize_coarse(p: PlanarPoint) -> (i64, i64) {
    ((p.x * 1e3).round() as i64, (p.y * 1e3).round() as i64)
}
