//! Measurement CSV ingestion, preprocessing filters, temporal slicing and
//! user-grouped holdout splits.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use chrono::{DateTime, Datelike, NaiveDateTime, TimeZone, Utc};
use log::warn;

use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GeolocationSource {
    #[default]
    Gps,
    Ip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub id: String,
    /// UTC seconds since the epoch.
    pub timestamp: i64,
    pub location: GeoPoint,
    pub latency_ms: f64,
    pub user_id: String,
    pub isp_id: String,
    pub used_vpn: bool,
    pub server_autoselected: bool,
    pub geolocation_source: GeolocationSource,
}

/// Column names to read each field from.
#[derive(Debug, Clone, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(default)]
pub struct Schema {
    pub id: String,
    pub latency_ms: String,
    pub lat: String,
    pub lon: String,
    pub timestamp: String,
    pub user_id: String,
    pub isp_id: String,
    pub used_vpn: String,
    pub server_autoselected: String,
    pub geolocation_source: String,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            id: "id".into(),
            latency_ms: "latency_ms".into(),
            lat: "lat".into(),
            lon: "lon".into(),
            timestamp: "timestamp".into(),
            user_id: "user_id".into(),
            isp_id: "isp_id".into(),
            used_vpn: "used_vpn".into(),
            server_autoselected: "server_autoselected".into(),
            geolocation_source: "geolocation_source".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedRow {
    /// 1-based data row number (the header is row 0).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseReport {
    pub rows: usize,
    pub skipped: Vec<SkippedRow>,
    /// Optional flag columns absent from the header; they default to passing.
    pub defaulted_columns: Vec<String>,
}

pub fn parse_measurements<R: Read>(
    source: R,
    schema: &Schema,
) -> Result<(Vec<Measurement>, ParseReport)> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::EmptyInput);
    }
    let column = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| column(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let latency_col = required(&schema.latency_ms)?;
    let lat_col = required(&schema.lat)?;
    let lon_col = required(&schema.lon)?;
    let ts_col = required(&schema.timestamp)?;
    let user_col = required(&schema.user_id)?;

    let mut report = ParseReport::default();
    let mut optional = |name: &str| {
        let c = column(name);
        if c.is_none() {
            report.defaulted_columns.push(name.to_string());
        }
        c
    };
    let id_col = column(&schema.id);
    let isp_col = optional(&schema.isp_id);
    let vpn_col = optional(&schema.used_vpn);
    let auto_col = optional(&schema.server_autoselected);
    let geo_col = optional(&schema.geolocation_source);
    for name in &report.defaulted_columns {
        warn!("column `{name}` not found; every row passes its filter");
    }

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        report.rows += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                report.skipped.push(SkippedRow {
                    row,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let field = |c: usize| record.get(c).unwrap_or("");
        let parsed = (|| -> std::result::Result<Measurement, String> {
            let latency_ms: f64 = field(latency_col)
                .parse()
                .map_err(|_| format!("latency_ms `{}` is not a number", field(latency_col)))?;
            if !(latency_ms.is_finite() && latency_ms > 0.0) {
                return Err(format!("latency_ms {latency_ms} is not positive"));
            }
            let lat: f64 = field(lat_col)
                .parse()
                .map_err(|_| format!("lat `{}` is not a number", field(lat_col)))?;
            let lon: f64 = field(lon_col)
                .parse()
                .map_err(|_| format!("lon `{}` is not a number", field(lon_col)))?;
            let location = GeoPoint::new(lat, lon).map_err(|e| e.to_string())?;
            let timestamp = parse_timestamp(field(ts_col))
                .ok_or_else(|| format!("timestamp `{}` is not parseable", field(ts_col)))?;
            let user_id = field(user_col);
            if user_id.is_empty() {
                return Err("user_id is empty".into());
            }
            let flag = |c: Option<usize>, default: bool, name: &str| match c {
                None => Ok(default),
                Some(c) => parse_bool(field(c))
                    .ok_or_else(|| format!("{name} `{}` is not a boolean", field(c))),
            };
            let geolocation_source = match geo_col {
                None => GeolocationSource::Gps,
                Some(c) => match field(c).to_ascii_lowercase().as_str() {
                    "gps" => GeolocationSource::Gps,
                    "ip" => GeolocationSource::Ip,
                    other => return Err(format!("geolocation_source `{other}` is not gps|ip")),
                },
            };
            Ok(Measurement {
                id: id_col
                    .map(|c| field(c).to_string())
                    .unwrap_or_else(|| row.to_string()),
                timestamp,
                location,
                latency_ms,
                user_id: user_id.to_string(),
                isp_id: isp_col.map(|c| field(c).to_string()).unwrap_or_default(),
                used_vpn: flag(vpn_col, false, "used_vpn")?,
                server_autoselected: flag(auto_col, true, "server_autoselected")?,
                geolocation_source,
            })
        })();
        match parsed {
            Ok(m) => out.push(m),
            Err(reason) => report.skipped.push(SkippedRow { row, reason }),
        }
    }
    if report.rows == 0 {
        return Err(Error::EmptyInput);
    }
    Ok((out, report))
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "t" | "y" => Some(true),
        "false" | "0" | "no" | "f" | "n" => Some(false),
        _ => None,
    }
}

/// Epoch seconds, RFC 3339, or `YYYY-MM-DD HH:MM:SS` taken as UTC.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    if let Ok(secs) = s.parse::<i64>() {
        return Some(secs);
    }
    if let Ok(secs) = s.parse::<f64>() {
        return secs.is_finite().then(|| secs.floor() as i64);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|dt| dt.and_utc().timestamp())
}

pub fn write_measurements<W: Write>(out: W, ms: &[Measurement]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "id",
        "timestamp",
        "lat",
        "lon",
        "latency_ms",
        "user_id",
        "isp_id",
        "used_vpn",
        "server_autoselected",
        "geolocation_source",
    ])?;
    for m in ms {
        w.write_record([
            m.id.clone(),
            m.timestamp.to_string(),
            format!("{:.7}", m.location.lat),
            format!("{:.7}", m.location.lon),
            format!("{:.3}", m.latency_ms),
            m.user_id.clone(),
            m.isp_id.clone(),
            m.used_vpn.to_string(),
            m.server_autoselected.to_string(),
            match m.geolocation_source {
                GeolocationSource::Gps => "gps".into(),
                GeolocationSource::Ip => "ip".into(),
            },
        ])?;
    }
    w.flush().map_err(|e| Error::io("<measurements>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterPolicy {
    pub drop_vpn: bool,
    pub require_autoselected_server: bool,
    pub require_gps: bool,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            drop_vpn: true,
            require_autoselected_server: true,
            require_gps: true,
        }
    }
}

impl FilterPolicy {
    pub const NONE: FilterPolicy = FilterPolicy {
        drop_vpn: false,
        require_autoselected_server: false,
        require_gps: false,
    };
}

/// Rows retained after each filtering step, starting with the input count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Funnel(pub Vec<(&'static str, usize)>);

impl Funnel {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "retained"])?;
        for (step, n) in &self.0 {
            w.write_record([step.to_string(), n.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<funnel>", e))?;
        Ok(())
    }
}

pub fn apply_filters(ms: Vec<Measurement>, policy: FilterPolicy) -> (Vec<Measurement>, Funnel) {
    let mut funnel = vec![("input", ms.len())];
    let mut kept = ms;
    if policy.drop_vpn {
        kept.retain(|m| !m.used_vpn);
    }
    funnel.push(("no_vpn", kept.len()));
    if policy.require_autoselected_server {
        kept.retain(|m| m.server_autoselected);
    }
    funnel.push(("server_autoselected", kept.len()));
    if policy.require_gps {
        kept.retain(|m| m.geolocation_source == GeolocationSource::Gps);
    }
    funnel.push(("gps_location", kept.len()));
    (kept, Funnel(funnel))
}

pub fn filter_isp(ms: &[Measurement], isp: &str) -> Vec<Measurement> {
    ms.iter().filter(|m| m.isp_id == isp).cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SliceSpec {
    #[default]
    CalendarMonth,
    /// Consecutive windows of this many days from UTC midnight of the
    /// earliest measurement.
    FixedWindow { days: u32 },
}

/// Slices keyed `YYYY-MM` for months, or by window start `YYYY-MM-DD`.
pub fn partition_slices(ms: &[Measurement], spec: SliceSpec) -> BTreeMap<String, Vec<Measurement>> {
    let mut out: BTreeMap<String, Vec<Measurement>> = BTreeMap::new();
    let Some(t0) = ms.iter().map(|m| m.timestamp).min() else {
        return out;
    };
    let day0 = t0.div_euclid(86_400) * 86_400;
    for m in ms {
        let key = match spec {
            SliceSpec::CalendarMonth => {
                let dt = Utc
                    .timestamp_opt(m.timestamp, 0)
                    .single()
                    .expect("valid timestamp");
                format!("{:04}-{:02}", dt.year(), dt.month())
            }
            SliceSpec::FixedWindow { days } => {
                let width = i64::from(days.max(1)) * 86_400;
                let start = day0 + (m.timestamp - day0).div_euclid(width) * width;
                let dt = Utc
                    .timestamp_opt(start, 0)
                    .single()
                    .expect("valid timestamp");
                dt.format("%Y-%m-%d").to_string()
            }
        };
        out.entry(key).or_default().push(m.clone());
    }
    out
}

/// Splits by vantage point: a user's measurements all land on one side.
///
/// Users are sorted, shuffled with a SplitMix64 stream seeded by `seed`, and
/// the first `ceil(train_fraction * U)` (capped at `U - 1`) go to training.
pub fn split_by_user(
    ms: &[Measurement],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<Measurement>, Vec<Measurement>)> {
    let mut users: Vec<&str> = ms
        .iter()
        .map(|m| m.user_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if users.len() < 2 {
        return Err(Error::TooFewUsers(users.len()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    rng::shuffle(&mut users, &mut rng::seeded(seed));
    let n_train =
        ((train_fraction * users.len() as f64 - 1e-9).ceil() as usize).clamp(1, users.len() - 1);
    let train_users: HashMap<&str, ()> = users[..n_train].iter().map(|u| (*u, ())).collect();
    let (train, test) = ms
        .iter()
        .cloned()
        .partition(|m| train_users.contains_key(m.user_id.as_str()));
    Ok((train, test))
}
