//! Sensor-file parsing and local-day segmentation.
//!
//! One CSV file per sensor kind. Rows that fail validation are rejected and
//! reported; a file where more than half the rows are rejected is treated as
//! a schema mismatch.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MS_PER_DAY: i64 = 86_400_000;
pub const MAX_UTC_OFFSET_MINUTES: i32 = 14 * 60;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: header {found:?} does not match the {kind} schema {expected:?}")]
    Header {
        path: String,
        kind: SensorKind,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("{path}: {rejected} of {total} rows rejected; file does not match the {kind} schema")]
    Schema {
        path: String,
        kind: SensorKind,
        rejected: usize,
        total: usize,
    },
    #[error("utc offset {0} minutes outside ±{MAX_UTC_OFFSET_MINUTES}")]
    Offset(i32),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Location,
    Screen,
    Bluetooth,
    Call,
    Steps,
    Sleep,
}

impl SensorKind {
    pub const ALL: [SensorKind; 6] = [
        SensorKind::Location,
        SensorKind::Screen,
        SensorKind::Bluetooth,
        SensorKind::Call,
        SensorKind::Steps,
        SensorKind::Sleep,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            SensorKind::Location => "locations.csv",
            SensorKind::Screen => "screen.csv",
            SensorKind::Bluetooth => "bluetooth.csv",
            SensorKind::Call => "calls.csv",
            SensorKind::Steps => "steps.csv",
            SensorKind::Sleep => "sleep.csv",
        }
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            SensorKind::Location => &["participant_id", "timestamp_ms", "latitude", "longitude", "accuracy_m"],
            SensorKind::Screen => &["participant_id", "timestamp_ms", "state"],
            SensorKind::Bluetooth => &["participant_id", "timestamp_ms", "device_hash", "rssi"],
            SensorKind::Call => &["participant_id", "timestamp_ms", "direction", "contact_hash", "duration_s"],
            SensorKind::Steps => &["participant_id", "timestamp_ms", "step_count"],
            SensorKind::Sleep => &[
                "participant_id",
                "start_ms",
                "end_ms",
                "minutes_asleep",
                "minutes_awake",
                "efficiency",
            ],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Location => "location",
            SensorKind::Screen => "screen",
            SensorKind::Bluetooth => "bluetooth",
            SensorKind::Call => "call",
            SensorKind::Steps => "steps",
            SensorKind::Sleep => "sleep",
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreenState {
    On,
    Off,
    Unlock,
    Lock,
}

impl ScreenState {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "on" => Some(Self::On),
            "off" => Some(Self::Off),
            "unlock" => Some(Self::Unlock),
            "lock" => Some(Self::Lock),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::On => "on",
            Self::Off => "off",
            Self::Unlock => "unlock",
            Self::Lock => "lock",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallDirection {
    Incoming,
    Outgoing,
    Missed,
}

impl CallDirection {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "incoming" => Some(Self::Incoming),
            "outgoing" => Some(Self::Outgoing),
            "missed" => Some(Self::Missed),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Incoming => "incoming",
            Self::Outgoing => "outgoing",
            Self::Missed => "missed",
        }
    }
}

/// Kind-specific fields of a [`SensorEvent`].
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    LocationFix { latitude: f64, longitude: f64, accuracy_m: f64 },
    Screen { state: ScreenState },
    Bluetooth { device_hash: String, rssi: i32 },
    Call { direction: CallDirection, contact_hash: String, duration_s: u64 },
    Steps { step_count: u64 },
    /// The owning event's timestamp is `end_ms`, so an episode belongs to the
    /// local day on which it ends.
    Sleep { start_ms: i64, end_ms: i64, minutes_asleep: f64, minutes_awake: f64, efficiency: f64 },
}

impl Payload {
    pub fn kind(&self) -> SensorKind {
        match self {
            Payload::LocationFix { .. } => SensorKind::Location,
            Payload::Screen { .. } => SensorKind::Screen,
            Payload::Bluetooth { .. } => SensorKind::Bluetooth,
            Payload::Call { .. } => SensorKind::Call,
            Payload::Steps { .. } => SensorKind::Steps,
            Payload::Sleep { .. } => SensorKind::Sleep,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorEvent {
    pub participant_id: String,
    /// UTC milliseconds.
    pub timestamp_ms: i64,
    pub payload: Payload,
}

impl SensorEvent {
    pub fn kind(&self) -> SensorKind {
        self.payload.kind()
    }

    /// Checks per-kind field bounds. Returns the rejection reason on failure.
    pub fn validate(&self) -> Result<(), String> {
        if self.participant_id.is_empty() {
            return Err("empty participant_id".into());
        }
        match &self.payload {
            Payload::LocationFix { latitude, longitude, accuracy_m } => {
                if !latitude.is_finite() || !(-90.0..=90.0).contains(latitude) {
                    return Err("latitude out of range".into());
                }
                if !longitude.is_finite() || !(-180.0..=180.0).contains(longitude) {
                    return Err("longitude out of range".into());
                }
                if !accuracy_m.is_finite() || *accuracy_m < 0.0 {
                    return Err("accuracy out of range".into());
                }
            }
            Payload::Screen { .. } | Payload::Steps { .. } | Payload::Bluetooth { .. } => {}
            Payload::Call { direction, duration_s, .. } => {
                if *direction == CallDirection::Missed && *duration_s != 0 {
                    return Err("missed call with nonzero duration".into());
                }
            }
            Payload::Sleep { start_ms, end_ms, minutes_asleep, minutes_awake, efficiency } => {
                if end_ms <= start_ms {
                    return Err("sleep end not after start".into());
                }
                if !minutes_asleep.is_finite() || *minutes_asleep < 0.0 {
                    return Err("minutes_asleep out of range".into());
                }
                if !minutes_awake.is_finite() || *minutes_awake < 0.0 {
                    return Err("minutes_awake out of range".into());
                }
                if !efficiency.is_finite() || !(0.0..=100.0).contains(efficiency) {
                    return Err("efficiency out of range".into());
                }
                let wall_min = (end_ms - start_ms) as f64 / 60_000.0;
                if minutes_asleep + minutes_awake > wall_min + 1e-9 {
                    return Err("asleep + awake exceeds episode length".into());
                }
            }
        }
        Ok(())
    }

    fn csv_fields(&self) -> Vec<String> {
        let mut out = vec![self.participant_id.clone()];
        match &self.payload {
            Payload::LocationFix { latitude, longitude, accuracy_m } => {
                out.push(self.timestamp_ms.to_string());
                out.extend([latitude.to_string(), longitude.to_string(), accuracy_m.to_string()]);
            }
            Payload::Screen { state } => {
                out.push(self.timestamp_ms.to_string());
                out.push(state.as_str().to_string());
            }
            Payload::Bluetooth { device_hash, rssi } => {
                out.push(self.timestamp_ms.to_string());
                out.extend([device_hash.clone(), rssi.to_string()]);
            }
            Payload::Call { direction, contact_hash, duration_s } => {
                out.push(self.timestamp_ms.to_string());
                out.extend([direction.as_str().to_string(), contact_hash.clone(), duration_s.to_string()]);
            }
            Payload::Steps { step_count } => {
                out.push(self.timestamp_ms.to_string());
                out.push(step_count.to_string());
            }
            Payload::Sleep { start_ms, end_ms, minutes_asleep, minutes_awake, efficiency } => {
                out.extend([
                    start_ms.to_string(),
                    end_ms.to_string(),
                    minutes_asleep.to_string(),
                    minutes_awake.to_string(),
                    efficiency.to_string(),
                ]);
            }
        }
        out
    }
}

/// A rejected input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub file: String,
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedFile {
    pub events: Vec<SensorEvent>,
    pub rejected: Vec<RowError>,
    /// Exact duplicates removed after sorting.
    pub duplicates_removed: usize,
}

fn parse_row(kind: SensorKind, rec: &csv::StringRecord) -> Result<SensorEvent, String> {
    let expected = kind.header().len();
    if rec.len() != expected {
        return Err(format!("expected {expected} fields, found {}", rec.len()));
    }
    let field = |i: usize| rec.get(i).unwrap_or("").trim();
    let int = |i: usize, name: &str| -> Result<i64, String> {
        field(i).parse::<i64>().map_err(|_| format!("{name} is not an integer"))
    };
    let uint = |i: usize, name: &str| -> Result<u64, String> {
        field(i).parse::<u64>().map_err(|_| format!("{name} is not a nonnegative integer"))
    };
    let real = |i: usize, name: &str| -> Result<f64, String> {
        match field(i).parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("{name} is not a finite number")),
        }
    };
    let participant_id = field(0).to_string();
    let (timestamp_ms, payload) = match kind {
        SensorKind::Location => (
            int(1, "timestamp_ms")?,
            Payload::LocationFix {
                latitude: real(2, "latitude")?,
                longitude: real(3, "longitude")?,
                accuracy_m: real(4, "accuracy_m")?,
            },
        ),
        SensorKind::Screen => (
            int(1, "timestamp_ms")?,
            Payload::Screen {
                state: ScreenState::parse(field(2)).ok_or_else(|| format!("unknown screen state {:?}", field(2)))?,
            },
        ),
        SensorKind::Bluetooth => (
            int(1, "timestamp_ms")?,
            Payload::Bluetooth {
                device_hash: field(2).to_string(),
                rssi: field(3).parse::<i32>().map_err(|_| "rssi is not an integer".to_string())?,
            },
        ),
        SensorKind::Call => (
            int(1, "timestamp_ms")?,
            Payload::Call {
                direction: CallDirection::parse(field(2))
                    .ok_or_else(|| format!("unknown call direction {:?}", field(2)))?,
                contact_hash: field(3).to_string(),
                duration_s: uint(4, "duration_s")?,
            },
        ),
        SensorKind::Steps => (int(1, "timestamp_ms")?, Payload::Steps { step_count: uint(2, "step_count")? }),
        SensorKind::Sleep => {
            let start_ms = int(1, "start_ms")?;
            let end_ms = int(2, "end_ms")?;
            (
                end_ms,
                Payload::Sleep {
                    start_ms,
                    end_ms,
                    minutes_asleep: real(3, "minutes_asleep")?,
                    minutes_awake: real(4, "minutes_awake")?,
                    efficiency: real(5, "efficiency")?,
                },
            )
        }
    };
    let event = SensorEvent { participant_id, timestamp_ms, payload };
    event.validate()?;
    Ok(event)
}

/// Sorts by (participant, timestamp), keeping input order for ties, and drops
/// exact duplicates. Returns the number of duplicates removed.
pub fn sort_and_dedup(events: &mut Vec<SensorEvent>) -> usize {
    events.sort_by(|a, b| {
        a.participant_id
            .cmp(&b.participant_id)
            .then(a.timestamp_ms.cmp(&b.timestamp_ms))
    });
    let before = events.len();
    let mut out: Vec<SensorEvent> = Vec::with_capacity(events.len());
    let mut group_start = 0;
    for ev in events.drain(..) {
        if out.last().is_some_and(|last| {
            last.participant_id != ev.participant_id || last.timestamp_ms != ev.timestamp_ms
        }) {
            group_start = out.len();
        }
        if !out[group_start..].contains(&ev) {
            out.push(ev);
        }
    }
    *events = out;
    before - events.len()
}

/// Parses CSV text for `kind`. `source` names the file in row errors.
pub fn parse_sensor_reader<R: Read>(reader: R, kind: SensorKind, source: &str) -> Result<ParsedFile, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != kind.header() {
        return Err(IngestError::Header {
            path: source.to_string(),
            kind,
            expected: kind.header().iter().map(|s| s.to_string()).collect(),
            found: header,
        });
    }
    let mut parsed = ParsedFile::default();
    let mut total = 0usize;
    for rec in rdr.records() {
        total += 1;
        match rec {
            Ok(rec) => {
                let line = rec.position().map_or(0, |p| p.line());
                match parse_row(kind, &rec) {
                    Ok(ev) => parsed.events.push(ev),
                    Err(reason) => parsed.rejected.push(RowError { file: source.to_string(), line, reason }),
                }
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                parsed.rejected.push(RowError { file: source.to_string(), line, reason: e.to_string() });
            }
        }
    }
    if total > 0 && parsed.rejected.len() * 2 > total {
        return Err(IngestError::Schema { path: source.to_string(), kind, rejected: parsed.rejected.len(), total });
    }
    parsed.duplicates_removed = sort_and_dedup(&mut parsed.events);
    Ok(parsed)
}

/// Reads and validates one sensor file.
pub fn parse_sensor_file(path: &Path, kind: SensorKind) -> Result<ParsedFile, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
    parse_sensor_reader(std::io::BufReader::new(file), kind, &name)
}

/// Every sensor file found in one directory, merged and sorted.
#[derive(Debug, Clone, Default)]
pub struct IngestedDir {
    pub events: Vec<SensorEvent>,
    pub rejected: Vec<RowError>,
    pub duplicates_removed: usize,
    /// Kinds whose file was present.
    pub kinds: Vec<SensorKind>,
}

/// Reads each `SensorKind::file_name` present in `dir`. Absent files are
/// skipped; at least one must exist.
pub fn read_dir(dir: &Path) -> Result<IngestedDir, IngestError> {
    let mut out = IngestedDir::default();
    for kind in SensorKind::ALL {
        let path = dir.join(kind.file_name());
        if !path.is_file() {
            continue;
        }
        let parsed = parse_sensor_file(&path, kind)?;
        out.events.extend(parsed.events);
        out.rejected.extend(parsed.rejected);
        out.duplicates_removed += parsed.duplicates_removed;
        out.kinds.push(kind);
    }
    if out.kinds.is_empty() {
        return Err(IngestError::Io {
            path: dir.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no sensor files"),
        });
    }
    out.events.sort_by(|a, b| a.participant_id.cmp(&b.participant_id).then(a.timestamp_ms.cmp(&b.timestamp_ms)));
    Ok(out)
}

/// Writes events of one kind in the canonical CSV schema.
pub fn write_sensor_csv<W: Write>(writer: W, kind: SensorKind, events: &[SensorEvent]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(kind.header())?;
    for ev in events.iter().filter(|e| e.kind() == kind) {
        w.write_record(ev.csv_fields())?;
    }
    w.flush().map_err(|e| IngestError::Csv(e.into()))?;
    Ok(())
}

/// Writes row errors as JSON lines.
pub fn write_error_report<W: Write>(mut writer: W, errors: &[RowError]) -> std::io::Result<()> {
    for e in errors {
        serde_json::to_writer(&mut writer, e)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// One participant's events inside one local calendar day.
#[derive(Debug, Clone, PartialEq)]
pub struct DayWindow {
    pub participant_id: String,
    pub local_date: NaiveDate,
    /// UTC millisecond of local midnight opening the window.
    pub start_ms: i64,
    /// Exclusive end; always `start_ms + MS_PER_DAY`.
    pub end_ms: i64,
    pub events: Vec<SensorEvent>,
}

impl DayWindow {
    pub fn events_of(&self, kind: SensorKind) -> impl Iterator<Item = &SensorEvent> {
        self.events.iter().filter(move |e| e.kind() == kind)
    }
}

fn epoch_date(day: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("epoch") + chrono::Duration::days(day)
}

/// Local day index (days since 1970-01-01 local) of a UTC timestamp.
pub fn local_day(timestamp_ms: i64, utc_offset_minutes: i32) -> i64 {
    (timestamp_ms + i64::from(utc_offset_minutes) * 60_000).div_euclid(MS_PER_DAY)
}

/// Splits events into fixed-offset local days. Days without events between a
/// participant's first and last event are emitted as empty windows.
pub fn segment_days(events: &[SensorEvent], utc_offset_minutes: i32) -> Result<Vec<DayWindow>, IngestError> {
    if utc_offset_minutes.abs() > MAX_UTC_OFFSET_MINUTES {
        return Err(IngestError::Offset(utc_offset_minutes));
    }
    let offset_ms = i64::from(utc_offset_minutes) * 60_000;
    let mut by_participant: BTreeMap<&str, Vec<&SensorEvent>> = BTreeMap::new();
    for ev in events {
        by_participant.entry(ev.participant_id.as_str()).or_default().push(ev);
    }
    let mut windows = Vec::new();
    for (pid, mut evs) in by_participant {
        evs.sort_by_key(|e| e.timestamp_ms);
        let first = local_day(evs[0].timestamp_ms, utc_offset_minutes);
        let last = local_day(evs[evs.len() - 1].timestamp_ms, utc_offset_minutes);
        let mut it = evs.into_iter().peekable();
        for day in first..=last {
            let start_ms = day * MS_PER_DAY - offset_ms;
            let end_ms = start_ms + MS_PER_DAY;
            let mut day_events = Vec::new();
            while let Some(ev) = it.next_if(|e| e.timestamp_ms < end_ms) {
                day_events.push(ev.clone());
            }
            windows.push(DayWindow {
                participant_id: pid.to_string(),
                local_date: epoch_date(day),
                start_ms,
                end_ms,
                events: day_events,
            });
        }
    }
    Ok(windows)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageRow {
    pub participant_id: String,
    pub kind: SensorKind,
    pub days: usize,
}

/// Non-empty day counts per participant and sensor kind. Every kind appears
/// for every participant, including zero counts.
pub fn coverage_report(windows: &[DayWindow]) -> Vec<CoverageRow> {
    let mut counts: BTreeMap<&str, [usize; 6]> = BTreeMap::new();
    for w in windows {
        let entry = counts.entry(w.participant_id.as_str()).or_insert([0; 6]);
        for (i, kind) in SensorKind::ALL.iter().enumerate() {
            if w.events.iter().any(|e| e.kind() == *kind) {
                entry[i] += 1;
            }
        }
    }
    counts
        .into_iter()
        .flat_map(|(pid, c)| {
            SensorKind::ALL
                .iter()
                .zip(c)
                .map(move |(kind, days)| CoverageRow { participant_id: pid.to_string(), kind: *kind, days })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn screen(pid: &str, t: i64, state: ScreenState) -> SensorEvent {
        SensorEvent { participant_id: pid.into(), timestamp_ms: t, payload: Payload::Screen { state } }
    }

    #[test]
    fn screen_rows_sorted_by_time() {
        let text = "participant_id,timestamp_ms,state\np1,1000,on\np1,500,unlock\n";
        let parsed = parse_sensor_reader(text.as_bytes(), SensorKind::Screen, "screen.csv").unwrap();
        assert_eq!(parsed.events.len(), 2);
        assert_eq!(parsed.events[0].timestamp_ms, 500);
        assert_eq!(parsed.events[1].timestamp_ms, 1000);
        assert!(parsed.rejected.is_empty());
    }

    #[test]
    fn latitude_out_of_range_rejected() {
        let text = "participant_id,timestamp_ms,latitude,longitude,accuracy_m\n\
                    p1,1,123.0,10.0,5\np1,2,47.0,10.0,5\np1,3,47.1,10.0,5\n";
        let parsed = parse_sensor_reader(text.as_bytes(), SensorKind::Location, "locations.csv").unwrap();
        assert_eq!(parsed.events.len(), 2);
        assert_eq!(parsed.rejected.len(), 1);
        assert_eq!(parsed.rejected[0].reason, "latitude out of range");
        assert_eq!(parsed.rejected[0].line, 2);
        assert_eq!(parsed.rejected[0].file, "locations.csv");
    }

    #[test]
    fn majority_rejection_is_fatal() {
        let mut text = String::from("participant_id,timestamp_ms,step_count\n");
        for i in 0..10 {
            if i < 6 {
                text.push_str(&format!("p1,{i},many\n"));
            } else {
                text.push_str(&format!("p1,{i},10\n"));
            }
        }
        let err = parse_sensor_reader(text.as_bytes(), SensorKind::Steps, "steps.csv").unwrap_err();
        assert!(matches!(err, IngestError::Schema { rejected: 6, total: 10, .. }));
    }

    #[test]
    fn exactly_half_rejected_is_tolerated() {
        let text = "participant_id,timestamp_ms,step_count\np1,1,x\np1,2,5\n";
        let parsed = parse_sensor_reader(text.as_bytes(), SensorKind::Steps, "steps.csv").unwrap();
        assert_eq!(parsed.events.len(), 1);
        assert_eq!(parsed.rejected.len(), 1);
    }

    #[test]
    fn header_mismatch_is_fatal() {
        let text = "participant_id,timestamp_ms,count\np1,1,5\n";
        assert!(matches!(
            parse_sensor_reader(text.as_bytes(), SensorKind::Steps, "steps.csv"),
            Err(IngestError::Header { .. })
        ));
    }

    #[test]
    fn sleep_validation() {
        let text = "participant_id,start_ms,end_ms,minutes_asleep,minutes_awake,efficiency\n\
                    p1,0,28800000,430,50,89.6\n\
                    p1,0,3600000,50,20,80\n\
                    p1,100,100,0,0,0\n\
                    p2,0,3600000,10,10,101\n\
                    p2,0,3600000,10,10,50\n\
                    p3,0,3600000,10,10,50\n\
                    p4,0,3600000,10,10,50\n";
        let parsed = parse_sensor_reader(text.as_bytes(), SensorKind::Sleep, "sleep.csv").unwrap();
        assert_eq!(parsed.events.len(), 4);
        let reasons: Vec<_> = parsed.rejected.iter().map(|r| r.reason.as_str()).collect();
        assert_eq!(
            reasons,
            ["asleep + awake exceeds episode length", "sleep end not after start", "efficiency out of range"]
        );
        assert_eq!(parsed.events[0].timestamp_ms, 28_800_000);
    }

    #[test]
    fn duplicates_removed_but_batches_kept() {
        let mut evs = vec![
            screen("p1", 5, ScreenState::On),
            screen("p1", 5, ScreenState::Unlock),
            screen("p1", 5, ScreenState::On),
        ];
        assert_eq!(sort_and_dedup(&mut evs), 1);
        assert_eq!(evs.len(), 2);
    }

    #[test]
    fn offset_shifts_local_date() {
        // 2019-04-01T06:59Z
        let t = NaiveDate::from_ymd_opt(2019, 4, 1)
            .unwrap()
            .and_hms_opt(6, 59, 0)
            .unwrap()
            .and_utc()
            .timestamp_millis();
        let w = segment_days(&[screen("p", t, ScreenState::On)], -420).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].local_date, NaiveDate::from_ymd_opt(2019, 3, 31).unwrap());
        assert_eq!(w[0].end_ms - w[0].start_ms, MS_PER_DAY);
        assert!(w[0].start_ms <= t && t < w[0].end_ms);
    }

    #[test]
    fn gaps_become_empty_windows() {
        let d1 = NaiveDate::from_ymd_opt(2019, 4, 1).unwrap().and_hms_opt(12, 0, 0).unwrap().and_utc();
        let t1 = d1.timestamp_millis();
        let t3 = t1 + 2 * MS_PER_DAY;
        let w = segment_days(&[screen("p", t1, ScreenState::On), screen("p", t3, ScreenState::Off)], 0).unwrap();
        assert_eq!(w.len(), 3);
        assert!(w[1].events.is_empty());
        assert_eq!(w[2].local_date, NaiveDate::from_ymd_opt(2019, 4, 3).unwrap());
    }

    #[test]
    fn empty_and_bad_offset() {
        assert!(segment_days(&[], 0).unwrap().is_empty());
        assert!(matches!(segment_days(&[], 841), Err(IngestError::Offset(841))));
    }

    #[test]
    fn coverage_counts_kinds_once_per_day() {
        let loc = SensorEvent {
            participant_id: "a".into(),
            timestamp_ms: 10,
            payload: Payload::LocationFix { latitude: 1.0, longitude: 1.0, accuracy_m: 1.0 },
        };
        let mut loc2 = loc.clone();
        loc2.timestamp_ms = 20;
        let evs = vec![loc, loc2, screen("b", 5, ScreenState::On)];
        let w = segment_days(&evs, 0).unwrap();
        let rep = coverage_report(&w);
        assert_eq!(rep.len(), 12);
        assert_eq!(rep[0], CoverageRow { participant_id: "a".into(), kind: SensorKind::Location, days: 1 });
        assert_eq!(rep[1], CoverageRow { participant_id: "a".into(), kind: SensorKind::Screen, days: 0 });
        assert_eq!(rep[7], CoverageRow { participant_id: "b".into(), kind: SensorKind::Screen, days: 1 });
    }
}
