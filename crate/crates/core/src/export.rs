//! GeoJSON and SVG choropleth output for clusterings and volatility maps.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::aggregate::CellAggregate;
use crate::geo::{unproject, CellId, PlanarPoint, Tessellation};
use crate::regionalize::Clustering;
use crate::volatility::VolatilityMap;

/// Tableau 10.
pub const CATEGORICAL: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

/// Light-to-dark sequential ramp (ColorBrewer Oranges).
pub const SEQUENTIAL: [(u8, u8, u8); 9] = [
    (0xff, 0xf5, 0xeb),
    (0xfe, 0xe6, 0xce),
    (0xfd, 0xd0, 0xa2),
    (0xfd, 0xae, 0x6b),
    (0xfd, 0x8d, 0x3c),
    (0xf1, 0x69, 0x13),
    (0xd9, 0x48, 0x01),
    (0xa6, 0x36, 0x03),
    (0x7f, 0x27, 0x04),
];

pub fn categorical_color(label: usize, palette: &[&str]) -> String {
    palette[label % palette.len()].to_string()
}

/// Linear interpolation along the ramp for `t` in [0, 1].
pub fn sequential_color(t: f64, ramp: &[(u8, u8, u8)]) -> String {
    let t = if t.is_finite() {
        t.clamp(0.0, 1.0)
    } else {
        0.0
    };
    let pos = t * (ramp.len() - 1) as f64;
    let i = (pos.floor() as usize).min(ramp.len() - 2);
    let f = pos - i as f64;
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * f).round() as u8;
    let (a, b) = (ramp[i], ramp[i + 1]);
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(a.0, b.0),
        mix(a.1, b.1),
        mix(a.2, b.2)
    )
}

fn round7(v: f64) -> f64 {
    (v * 1e7).round() / 1e7
}

fn ring_lonlat(ring: &[PlanarPoint], t: &Tessellation) -> Value {
    Value::Array(
        ring.iter()
            .map(|p| {
                let g = unproject(*p, t.origin());
                json!([round7(g.lon), round7(g.lat)])
            })
            .collect(),
    )
}

fn cell_geometry(cell: &CellId, t: &Tessellation) -> Value {
    let rings = t.cell_rings(cell).unwrap_or_default();
    if rings.len() == 1 {
        json!({"type": "Polygon", "coordinates": [ring_lonlat(&rings[0], t)]})
    } else {
        let polys: Vec<Value> = rings.iter().map(|r| json!([ring_lonlat(r, t)])).collect();
        json!({"type": "MultiPolygon", "coordinates": polys})
    }
}

fn feature_collection(
    features: impl IntoIterator<Item = (CellId, Map<String, Value>)>,
    t: &Tessellation,
) -> Value {
    let features: Vec<Value> = features
        .into_iter()
        .map(|(cell, mut props)| {
            props.insert("cell".into(), json!(cell.to_string()));
            if let CellId::Hex(h) = &cell {
                props.insert("q".into(), json!(h.q));
                props.insert("r".into(), json!(h.r));
            }
            json!({"type": "Feature", "properties": props, "geometry": cell_geometry(&cell, t)})
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

fn aggregate_props(props: &mut Map<String, Value>, a: &CellAggregate) {
    props.insert("count".into(), json!(a.count));
    for (k, v) in [
        ("mean", a.mean),
        ("std", a.std),
        ("p10", a.p10),
        ("p90", a.p90),
        ("p95", a.p95),
        ("p97_5", a.p97_5),
        ("p99", a.p99),
        ("lat_reduction", a.latency_reduction),
    ] {
        props.insert(k.into(), json!(v));
    }
    props.insert("ineq_ratio".into(), json!(a.inequality_ratio));
}

/// One feature per cell with its cluster label and, when given, its metrics.
pub fn clustering_geojson(
    c: &Clustering,
    t: &Tessellation,
    aggregates: Option<&BTreeMap<CellId, CellAggregate>>,
) -> Value {
    feature_collection(
        c.cells.iter().zip(&c.labels).map(|(cell, &label)| {
            let mut props = Map::new();
            props.insert("cluster".into(), json!(label));
            if let Some(a) = aggregates.and_then(|m| m.get(cell)) {
                aggregate_props(&mut props, a);
            }
            (cell.clone(), props)
        }),
        t,
    )
}

pub fn volatility_geojson(v: &VolatilityMap, t: &Tessellation) -> Value {
    feature_collection(
        v.cells.iter().zip(&v.volatility).map(|(cell, &vol)| {
            let mut props = Map::new();
            props.insert("volatility".into(), json!(vol));
            if let Some(l) = v.reference.label_of(cell) {
                props.insert("cluster".into(), json!(l));
            }
            (cell.clone(), props)
        }),
        t,
    )
}

const SVG_WIDTH: f64 = 800.0;
const MARGIN: f64 = 10.0;
const LEGEND_WIDTH: f64 = 150.0;

struct Frame {
    min: PlanarPoint,
    scale: f64,
    height: f64,
}

impl Frame {
    fn fit<'a>(rings: impl Iterator<Item = &'a PlanarPoint>) -> Frame {
        let (mut min, mut max) = (
            PlanarPoint::new(f64::MAX, f64::MAX),
            PlanarPoint::new(f64::MIN, f64::MIN),
        );
        for p in rings {
            min = PlanarPoint::new(min.x.min(p.x), min.y.min(p.y));
            max = PlanarPoint::new(max.x.max(p.x), max.y.max(p.y));
        }
        if min.x > max.x {
            return Frame {
                min: PlanarPoint::default(),
                scale: 1.0,
                height: 100.0,
            };
        }
        let w = (max.x - min.x).max(1e-9);
        let h = (max.y - min.y).max(1e-9);
        let scale = (SVG_WIDTH - 2.0 * MARGIN) / w;
        Frame {
            min: PlanarPoint::new(min.x, max.y),
            scale,
            height: h * scale + 2.0 * MARGIN,
        }
    }

    fn px(&self, p: &PlanarPoint) -> (f64, f64) {
        (
            MARGIN + (p.x - self.min.x) * self.scale,
            MARGIN + (self.min.y - p.y) * self.scale,
        )
    }
}

fn svg_document(
    cells: &[(Vec<Vec<PlanarPoint>>, String, String)],
    legend: &[(String, String)],
    gradient: Option<&[(u8, u8, u8)]>,
) -> String {
    let frame = Frame::fit(cells.iter().flat_map(|(r, _, _)| r.iter().flatten()));
    let legend_height = 30.0 + 20.0 * legend.len() as f64;
    let height = frame.height.max(legend_height).max(60.0);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0}" height="{height:.0}" viewBox="0 0 {w:.0} {height:.0}">"#,
        w = SVG_WIDTH + LEGEND_WIDTH
    );
    if let Some(ramp) = gradient {
        let _ = writeln!(
            s,
            r#"<defs><linearGradient id="ramp" x1="0" y1="1" x2="0" y2="0">"#
        );
        for i in 0..ramp.len() {
            let t = i as f64 / (ramp.len() - 1) as f64;
            let _ = writeln!(
                s,
                r#"<stop offset="{:.3}" stop-color="{}"/>"#,
                t,
                sequential_color(t, ramp)
            );
        }
        let _ = writeln!(s, "</linearGradient></defs>");
    }
    let _ = writeln!(s, r##"<g id="cells" stroke="#ffffff" stroke-width="0.5">"##);
    for (rings, fill, title) in cells {
        for ring in rings {
            let pts: Vec<String> = ring
                .iter()
                .map(|p| {
                    let (x, y) = frame.px(p);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{fill}"><title>{title}</title></polygon>"#,
                pts.join(" ")
            );
        }
    }
    let _ = writeln!(s, "</g>");
    let lx = SVG_WIDTH + 10.0;
    let _ = writeln!(
        s,
        r#"<g id="legend" font-family="sans-serif" font-size="12">"#
    );
    match gradient {
        Some(_) => {
            let _ = writeln!(
                s,
                r##"<rect x="{lx}" y="20" width="20" height="200" fill="url(#ramp)" stroke="#333333"/>"##
            );
            for (i, (label, _)) in legend.iter().enumerate() {
                let y = 220.0 - 200.0 * i as f64 / (legend.len().max(2) - 1) as f64;
                let _ = writeln!(
                    s,
                    r#"<text x="{}" y="{:.1}">{label}</text>"#,
                    lx + 26.0,
                    y + 4.0
                );
            }
        }
        None => {
            for (i, (label, color)) in legend.iter().enumerate() {
                let y = 20.0 + 20.0 * i as f64;
                let _ = writeln!(
                    s,
                    r#"<rect class="legend-entry" x="{lx}" y="{y}" width="14" height="14" fill="{color}"/><text x="{}" y="{}">{label}</text>"#,
                    lx + 20.0,
                    y + 11.0
                );
            }
        }
    }
    let _ = writeln!(s, "</g>\n</svg>");
    s
}

/// Categorical choropleth with one legend entry per cluster.
pub fn clustering_svg(c: &Clustering, t: &Tessellation, palette: &[&str]) -> String {
    let cells: Vec<_> = c
        .cells
        .iter()
        .zip(&c.labels)
        .map(|(cell, &l)| {
            (
                t.cell_rings(cell).unwrap_or_default(),
                categorical_color(l, palette),
                format!("{cell}: cluster {l}"),
            )
        })
        .collect();
    let legend: Vec<_> = (0..c.n_clusters)
        .map(|l| (format!("cluster {l}"), categorical_color(l, palette)))
        .collect();
    svg_document(&cells, &legend, None)
}

/// Sequential choropleth over volatility in [0, 1].
pub fn volatility_svg(v: &VolatilityMap, t: &Tessellation, ramp: &[(u8, u8, u8)]) -> String {
    let cells: Vec<_> = v
        .cells
        .iter()
        .zip(&v.volatility)
        .map(|(cell, &vol)| {
            (
                t.cell_rings(cell).unwrap_or_default(),
                sequential_color(vol, ramp),
                format!("{cell}: volatility {vol:.3}"),
            )
        })
        .collect();
    let legend: Vec<_> = [0.0, 0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&x| (format!("{x:.2}"), sequential_color(x, ramp)))
        .collect();
    svg_document(&cells, &legend, Some(ramp))
}

/// Choropleth of one value per cell, stretched over the observed range.
pub fn metric_svg(
    values: &BTreeMap<CellId, f64>,
    t: &Tessellation,
    ramp: &[(u8, u8, u8)],
    unit: &str,
) -> String {
    let (lo, hi) = values
        .values()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let cells: Vec<_> = values
        .iter()
        .map(|(cell, &v)| {
            (
                t.cell_rings(cell).unwrap_or_default(),
                sequential_color((v - lo) / span, ramp),
                format!("{cell}: {v:.1} {unit}"),
            )
        })
        .collect();
    let legend: Vec<_> = if values.is_empty() {
        Vec::new()
    } else {
        (0..5)
            .map(|i| {
                let x = i as f64 / 4.0;
                (
                    format!("{:.1} {unit}", lo + x * span),
                    sequential_color(x, ramp),
                )
            })
            .collect()
    };
    svg_document(&cells, &legend, Some(ramp))
}
