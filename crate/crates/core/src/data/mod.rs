//! Listening-event ingestion and preprocessing.
//!
//! Raw CSV rows become [`InteractionEvent`]s with dense user/item indices,
//! sorted by `(user, item, t)`. Timestamps are converted to the configured
//! [`TimeUnit`] at parse time.

mod filter;
mod sequence;
mod split;

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use filter::{kcore_filter, window_trim};
pub use sequence::PairSequence;
pub use split::{
    holdout_split, read_split_manifest, write_split_manifest, HeldOut, HoldoutSplit, SplitAssignment,
    SplitRole,
};

/// Fraction of the track that must be played for an exposure to count as a listen.
pub const LISTEN_FRACTION: f64 = 0.8;

const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeUnit {
    Seconds,
    #[default]
    Hours,
}

impl TimeUnit {
    pub fn from_seconds(self, seconds: f64) -> f64 {
        match self {
            TimeUnit::Seconds => seconds,
            TimeUnit::Hours => seconds / SECONDS_PER_HOUR,
        }
    }

    pub fn to_hours(self, t: f64) -> f64 {
        match self {
            TimeUnit::Seconds => t / SECONDS_PER_HOUR,
            TimeUnit::Hours => t,
        }
    }
}

impl FromStr for TimeUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seconds" => Ok(TimeUnit::Seconds),
            "hours" => Ok(TimeUnit::Hours),
            other => Err(Error::Validation(format!("unknown time unit `{other}`"))),
        }
    }
}

impl fmt::Display for TimeUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeUnit::Seconds => "seconds",
            TimeUnit::Hours => "hours",
        })
    }
}

/// Input CSV layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schema {
    /// `user_id,item_id,timestamp,label`
    Labeled,
    /// `user_id,item_id,timestamp,listen_time,duration`
    Timed,
}

impl Schema {
    fn columns(self) -> usize {
        match self {
            Schema::Labeled => 4,
            Schema::Timed => 5,
        }
    }
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "labeled" => Ok(Schema::Labeled),
            "timed" => Ok(Schema::Timed),
            other => Err(Error::Validation(format!("unknown schema `{other}`"))),
        }
    }
}

/// One raw input row.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEvent {
    pub user_id: String,
    pub item_id: String,
    /// Seconds since epoch.
    pub timestamp: u64,
    pub listen_time: Option<f64>,
    pub duration: Option<f64>,
    pub label: Option<bool>,
}

impl RawEvent {
    /// Resolves the binary listen outcome from whichever schema the row uses.
    pub fn listened(&self) -> Result<bool> {
        match (self.label, self.listen_time, self.duration) {
            (Some(l), None, None) => Ok(l),
            (None, Some(lt), Some(d)) => label_listens(lt, d),
            _ => Err(Error::Validation(
                "row must carry either a label or listen_time and duration".into(),
            )),
        }
    }
}

/// `true` iff more than 80% of the track was played (strict).
pub fn label_listens(listen_time: f64, duration: f64) -> Result<bool> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::Validation(format!("duration must be positive, got {duration}")));
    }
    if !(listen_time >= 0.0) {
        return Err(Error::Validation(format!(
            "listen time must be non-negative, got {listen_time}"
        )));
    }
    Ok(listen_time / duration > LISTEN_FRACTION)
}

/// One exposure of a user to an item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionEvent {
    pub user: usize,
    pub item: usize,
    pub t: f64,
    pub listened: bool,
}

/// Immutable, sorted collection of interaction events with dense indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    events: Vec<InteractionEvent>,
    n_users: usize,
    n_items: usize,
    time_unit: TimeUnit,
    user_names: Vec<String>,
    item_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from indexed events.
    ///
    /// Events are sorted by `(user, item, t)`. Rows sharing `(user, item, t)`
    /// collapse into one, keeping `listened = true` if any copy has it.
    pub fn from_events(
        events: Vec<InteractionEvent>,
        n_users: usize,
        n_items: usize,
        time_unit: TimeUnit,
    ) -> Result<Self> {
        let user_names = (0..n_users).map(|u| u.to_string()).collect();
        let item_names = (0..n_items).map(|i| i.to_string()).collect();
        Self::with_names(events, user_names, item_names, time_unit)
    }

    fn with_names(
        mut events: Vec<InteractionEvent>,
        user_names: Vec<String>,
        item_names: Vec<String>,
        time_unit: TimeUnit,
    ) -> Result<Self> {
        let n_users = user_names.len();
        let n_items = item_names.len();
        for e in &events {
            if e.user >= n_users || e.item >= n_items {
                return Err(Error::Validation(format!(
                    "event ({}, {}) out of range for {n_users} users and {n_items} items",
                    e.user, e.item
                )));
            }
            if !e.t.is_finite() || e.t < 0.0 {
                return Err(Error::Validation(format!("invalid event time {}", e.t)));
            }
        }
        events.sort_by(|a, b| {
            (a.user, a.item)
                .cmp(&(b.user, b.item))
                .then(a.t.total_cmp(&b.t))
        });
        events.dedup_by(|next, kept| {
            let same = next.user == kept.user && next.item == kept.item && next.t == kept.t;
            if same {
                kept.listened |= next.listened;
            }
            same
        });
        Ok(Dataset {
            events,
            n_users,
            n_items,
            time_unit,
            user_names,
            item_names,
        })
    }

    /// Builds a dataset from raw rows, densifying ids in sorted string order
    /// so the result does not depend on row order.
    pub fn from_raw(rows: &[RawEvent], time_unit: TimeUnit) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let users: Vec<String> = rows
            .iter()
            .map(|r| r.user_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let items: Vec<String> = rows
            .iter()
            .map(|r| r.item_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut events = Vec::with_capacity(rows.len());
        for r in rows {
            events.push(InteractionEvent {
                user: users.binary_search(&r.user_id).expect("user interned"),
                item: items.binary_search(&r.item_id).expect("item interned"),
                t: time_unit.from_seconds(r.timestamp as f64),
                listened: r.listened()?,
            });
        }
        Self::with_names(events, users, items, time_unit)
    }

    pub fn events(&self) -> &[InteractionEvent] {
        &self.events
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn time_unit(&self) -> TimeUnit {
        self.time_unit
    }

    pub fn user_name(&self, user: usize) -> &str {
        &self.user_names[user]
    }

    pub fn item_name(&self, item: usize) -> &str {
        &self.item_names[item]
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Distinct `(user, item)` pairs in sorted order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs: Vec<(usize, usize)> = self.events.iter().map(|e| (e.user, e.item)).collect();
        pairs.dedup();
        pairs
    }

    /// One ordered sequence per `(user, item)` pair.
    pub fn pair_sequences(&self) -> Vec<PairSequence> {
        self.events
            .chunk_by(|a, b| a.user == b.user && a.item == b.item)
            .map(PairSequence::from_events)
            .collect()
    }

    /// Keeps events matching `keep`, without re-indexing.
    pub(crate) fn filter_events(&self, keep: impl Fn(&InteractionEvent) -> bool) -> Dataset {
        Dataset {
            events: self.events.iter().copied().filter(|e| keep(e)).collect(),
            n_users: self.n_users,
            n_items: self.n_items,
            time_unit: self.time_unit,
            user_names: self.user_names.clone(),
            item_names: self.item_names.clone(),
        }
    }

    /// Drops users and items without events and re-densifies indices,
    /// preserving relative order.
    pub fn compact(&self) -> Dataset {
        let mut user_map = vec![usize::MAX; self.n_users];
        let mut item_map = vec![usize::MAX; self.n_items];
        for e in &self.events {
            user_map[e.user] = 0;
            item_map[e.item] = 0;
        }
        let mut user_names = Vec::new();
        for (u, slot) in user_map.iter_mut().enumerate() {
            if *slot == 0 {
                *slot = user_names.len();
                user_names.push(self.user_names[u].clone());
            }
        }
        let mut item_names = Vec::new();
        for (i, slot) in item_map.iter_mut().enumerate() {
            if *slot == 0 {
                *slot = item_names.len();
                item_names.push(self.item_names[i].clone());
            }
        }
        let events = self
            .events
            .iter()
            .map(|e| InteractionEvent {
                user: user_map[e.user],
                item: item_map[e.item],
                ..*e
            })
            .collect();
        Dataset {
            events,
            n_users: user_names.len(),
            n_items: item_names.len(),
            time_unit: self.time_unit,
            user_names,
            item_names,
        }
    }
}

/// Parses a raw listening-event CSV file.
pub fn parse_events(path: impl AsRef<Path>, schema: Schema, time_unit: TimeUnit) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_events_from_reader(file, schema, time_unit)
}

pub fn parse_events_from_reader<R: Read>(
    reader: R,
    schema: Schema,
    time_unit: TimeUnit,
) -> Result<Dataset> {
    let rows = read_raw_rows(reader, schema)?;
    Dataset::from_raw(&rows, time_unit)
}

fn read_raw_rows<R: Read>(reader: R, schema: Schema) -> Result<Vec<RawEvent>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header_len = rdr
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .len();
    if header_len != schema.columns() {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected {} columns in header, found {header_len}", schema.columns()),
        });
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        rows.push(parse_row(&record, schema).map_err(|message| Error::Parse { line, message })?);
    }
    Ok(rows)
}

fn csv_error(err: csv::Error, fallback_line: u64) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(fallback_line);
    Error::Parse {
        line,
        message: err.to_string(),
    }
}

fn parse_row(record: &csv::StringRecord, schema: Schema) -> std::result::Result<RawEvent, String> {
    if record.len() != schema.columns() {
        return Err(format!("expected {} fields, found {}", schema.columns(), record.len()));
    }
    let field = |i: usize| record.get(i).unwrap_or_default();
    let timestamp: u64 = field(2)
        .parse()
        .map_err(|_| format!("timestamp `{}` is not a non-negative integer", field(2)))?;
    let mut row = RawEvent {
        user_id: field(0).to_string(),
        item_id: field(1).to_string(),
        timestamp,
        listen_time: None,
        duration: None,
        label: None,
    };
    if row.user_id.is_empty() || row.item_id.is_empty() {
        return Err("empty user or item id".into());
    }
    match schema {
        Schema::Labeled => {
            row.label = Some(match field(3) {
                "0" => false,
                "1" => true,
                other => return Err(format!("label `{other}` is not 0 or 1")),
            });
        }
        Schema::Timed => {
            let listen: f64 = field(3)
                .parse()
                .map_err(|_| format!("listen_time `{}` is not a number", field(3)))?;
            let duration: f64 = field(4)
                .parse()
                .map_err(|_| format!("duration `{}` is not a number", field(4)))?;
            if !(duration > 0.0) {
                return Err(format!("duration must be positive, got {duration}"));
            }
            if !(listen >= 0.0) {
                return Err(format!("listen_time must be non-negative, got {listen}"));
            }
            row.listen_time = Some(listen);
            row.duration = Some(duration);
        }
    }
    Ok(row)
}

/// Writes the canonical processed form: `user_idx,item_idx,t,L`, `t` with 6 decimals.
pub fn write_canonical<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Validation(format!("write failed: {e}"));
    w.write_record(["user_idx", "item_idx", "t", "L"]).map_err(io)?;
    for e in &dataset.events {
        w.write_record([
            e.user.to_string(),
            e.item.to_string(),
            format!("{:.6}", e.t),
            u8::from(e.listened).to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Validation(format!("write failed: {e}")))?;
    Ok(())
}

pub fn save_canonical(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_canonical(dataset, std::io::BufWriter::new(file))
}

/// Reads the canonical processed form. Counts are `max index + 1`.
pub fn read_canonical<R: Read>(reader: R, time_unit: TimeUnit) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse_err = |what: &str| Error::Parse {
            line,
            message: format!("bad {what}"),
        };
        if record.len() != 4 {
            return Err(Error::Parse {
                line,
                message: format!("expected 4 fields, found {}", record.len()),
            });
        }
        let user: usize = record[0].parse().map_err(|_| parse_err("user_idx"))?;
        let item: usize = record[1].parse().map_err(|_| parse_err("item_idx"))?;
        let t: f64 = record[2].parse().map_err(|_| parse_err("t"))?;
        let listened = match &record[3] {
            "0" => false,
            "1" => true,
            _ => return Err(parse_err("L")),
        };
        events.push(InteractionEvent {
            user,
            item,
            t,
            listened,
        });
    }
    if events.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n_users = events.iter().map(|e| e.user).max().unwrap_or(0) + 1;
    let n_items = events.iter().map(|e| e.item).max().unwrap_or(0) + 1;
    Dataset::from_events(events, n_users, n_items, time_unit)
}

pub fn load_canonical(path: impl AsRef<Path>, time_unit: TimeUnit) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_canonical(std::io::BufReader::new(file), time_unit)
}

/// Repetition class of a `(user, item)` pair by its total number of exposures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RepetitionClass {
    Excluded,
    LowRep,
    ModRep,
    HighRep,
    VHRep,
}

impl RepetitionClass {
    pub const ANALYZED: [RepetitionClass; 4] = [
        RepetitionClass::LowRep,
        RepetitionClass::ModRep,
        RepetitionClass::HighRep,
        RepetitionClass::VHRep,
    ];

    /// Most frequent sequence length within each analysed class.
    pub fn popular_length(self) -> Option<usize> {
        match self {
            RepetitionClass::Excluded => None,
            RepetitionClass::LowRep => Some(5),
            RepetitionClass::ModRep => Some(17),
            RepetitionClass::HighRep => Some(28),
            RepetitionClass::VHRep => Some(39),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RepetitionClass::Excluded => "Excluded",
            RepetitionClass::LowRep => "LowRep",
            RepetitionClass::ModRep => "ModRep",
            RepetitionClass::HighRep => "HighRep",
            RepetitionClass::VHRep => "VHRep",
        }
    }
}

impl fmt::Display for RepetitionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn assign_repetition_class(pair_length: usize) -> RepetitionClass {
    match pair_length {
        5..=16 => RepetitionClass::LowRep,
        17..=27 => RepetitionClass::ModRep,
        28..=38 => RepetitionClass::HighRep,
        39..=50 => RepetitionClass::VHRep,
        _ => RepetitionClass::Excluded,
    }
}
