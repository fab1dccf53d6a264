//! Draft logs: the canonical JSON Lines format, validation, train/test
//! splitting, and an importer for CSV pick exports.
//!
//! A log file starts with one header record carrying the set code, followed
//! by one [`DraftLog`] per line. Collections are not stored; they are rebuilt
//! from earlier picks by [`DraftLog::replay`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::card::{CardId, CardSet, Collection};
use crate::engine::{pack_size_at, TOTAL_PICKS};
use crate::error::{Error, Result};
use crate::rng;

pub const LOG_FORMAT: &str = "draftlab-log";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeatKind {
    Human,
    Bot,
}

/// One observed decision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PickEvent {
    pub global_pick: u8,
    pub pack: Vec<CardId>,
    pub picked: CardId,
}

/// All 45 decisions of one seat in one draft.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftLog {
    pub draft_id: String,
    pub seat: u8,
    #[serde(skip)]
    pub set_code: String,
    pub seat_kind: SeatKind,
    #[serde(rename = "picks")]
    pub events: Vec<PickEvent>,
}

/// A pick event together with the collection held before it.
pub struct PickView<'a> {
    pub event: &'a PickEvent,
    pub collection: &'a Collection,
}

impl DraftLog {
    pub fn is_human(&self) -> bool {
        self.seat_kind == SeatKind::Human
    }

    /// Visits every event with its reconstructed `collection_before`.
    pub fn replay<F>(&self, set_size: usize, mut visit: F) -> Result<()>
    where
        F: FnMut(PickView<'_>) -> Result<()>,
    {
        let mut collection = Collection::empty(set_size);
        for event in &self.events {
            visit(PickView {
                event,
                collection: &collection,
            })?;
            collection.add(event.picked)?;
        }
        Ok(())
    }

    /// Final collection after all recorded picks.
    pub fn final_collection(&self, set_size: usize) -> Result<Collection> {
        let mut c = Collection::empty(set_size);
        for e in &self.events {
            c.add(e.picked)?;
        }
        Ok(c)
    }

    pub fn validate(&self, set: &CardSet) -> Result<()> {
        let fail = |pick: usize, message: String| Error::Validation {
            draft_id: self.draft_id.clone(),
            pick,
            message,
        };
        if self.set_code != set.code {
            return Err(fail(
                0,
                format!("set code {} does not match {}", self.set_code, set.code),
            ));
        }
        if self.events.len() != TOTAL_PICKS {
            return Err(fail(
                self.events.len(),
                format!("expected {TOTAL_PICKS} events, found {}", self.events.len()),
            ));
        }
        for (i, e) in self.events.iter().enumerate() {
            let pick = i + 1;
            if e.global_pick as usize != pick {
                return Err(fail(pick, format!("out of order global_pick {}", e.global_pick)));
            }
            let expected = pack_size_at(pick);
            if e.pack.len() != expected {
                return Err(fail(
                    pick,
                    format!("pack has {} cards, expected {expected}", e.pack.len()),
                ));
            }
            if let Some(&bad) = e.pack.iter().find(|&&c| c >= set.len()) {
                return Err(fail(pick, format!("card index {bad} out of range")));
            }
            if !e.pack.contains(&e.picked) {
                return Err(fail(pick, format!("picked card {} is not in the pack", e.picked)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub version: u32,
    pub set_code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl LogHeader {
    pub fn new(set_code: impl Into<String>) -> Self {
        LogHeader {
            format: LOG_FORMAT.to_string(),
            version: LOG_VERSION,
            set_code: set_code.into(),
            seed: None,
            source: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = Some(source.into());
        self
    }
}

#[derive(Debug, Clone)]
pub struct LogFile {
    pub header: LogHeader,
    pub logs: Vec<DraftLog>,
}

impl LogFile {
    pub fn validate(&self, set: &CardSet) -> Result<()> {
        if self.header.set_code != set.code {
            return Err(Error::SetMismatch {
                expected: set.code.clone(),
                found: self.header.set_code.clone(),
            });
        }
        self.logs.iter().try_for_each(|l| l.validate(set))
    }
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn open_reader(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path)?;
    Ok(if is_gz(path) {
        Box::new(BufReader::new(GzDecoder::new(file)))
    } else {
        Box::new(BufReader::new(file))
    })
}

/// Serializes a header and logs to canonical JSONL text.
pub fn write_logs_to<W: Write>(mut out: W, header: &LogHeader, logs: &[DraftLog]) -> Result<()> {
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for log in logs {
        if log.set_code != header.set_code {
            return Err(Error::SetMismatch {
                expected: header.set_code.clone(),
                found: log.set_code.clone(),
            });
        }
        serde_json::to_writer(&mut out, log)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_logs(path: impl AsRef<Path>, header: &LogHeader, logs: &[DraftLog]) -> Result<()> {
    let path = path.as_ref();
    let file = BufWriter::new(File::create(path)?);
    if is_gz(path) {
        let mut enc = GzEncoder::new(file, Compression::default());
        write_logs_to(&mut enc, header, logs)?;
        enc.finish()?;
        Ok(())
    } else {
        write_logs_to(file, header, logs)
    }
}

/// Parses canonical JSONL. `origin` is only used in error messages.
pub fn read_logs_from<R: BufRead>(reader: R, origin: &Path) -> Result<LogFile> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut header: Option<LogHeader> = None;
    let mut logs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match &header {
            None => {
                let h: LogHeader =
                    serde_json::from_str(&line).map_err(|e| parse_err(line_no, e.to_string()))?;
                if h.format != LOG_FORMAT {
                    return Err(parse_err(line_no, format!("unknown format '{}'", h.format)));
                }
                if h.version != LOG_VERSION {
                    return Err(parse_err(line_no, format!("unsupported version {}", h.version)));
                }
                header = Some(h);
            }
            Some(h) => {
                let mut log: DraftLog =
                    serde_json::from_str(&line).map_err(|e| parse_err(line_no, e.to_string()))?;
                log.set_code = h.set_code.clone();
                logs.push(log);
            }
        }
    }
    let header = header.ok_or_else(|| parse_err(1, "missing header record".into()))?;
    Ok(LogFile { header, logs })
}

pub fn read_logs(path: impl AsRef<Path>) -> Result<LogFile> {
    let path = path.as_ref();
    read_logs_from(open_reader(path)?, path)
}

/// Reads and validates a log file against `set`.
pub fn load_logs(path: impl AsRef<Path>, set: &CardSet) -> Result<LogFile> {
    let file = read_logs(path)?;
    file.validate(set)?;
    Ok(file)
}

/// Partitions logs by draft id. Every seat of a draft lands on the same side.
pub fn split_dataset(
    logs: Vec<DraftLog>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<DraftLog>, Vec<DraftLog>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Invalid(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    if logs.is_empty() {
        return Err(Error::Empty("no logs to split".into()));
    }
    let mut ids: Vec<&str> = Vec::new();
    let mut seen = HashSet::new();
    for log in &logs {
        if seen.insert(log.draft_id.as_str()) {
            ids.push(log.draft_id.as_str());
        }
    }
    let mut order = ids.clone();
    order.shuffle(&mut rng::stream(seed));
    let n_train = (ids.len() as f64 * train_fraction).round() as usize;
    let train_ids: HashSet<String> = order[..n_train].iter().map(|s| s.to_string()).collect();
    let (train, test) = logs
        .into_iter()
        .partition(|l| train_ids.contains(&l.draft_id));
    Ok((train, test))
}

/// Column names of the CSV pick export. Each row is one pick of one seat.
///
/// `pack` lists card names separated by `|`.
#[derive(Debug, Clone)]
pub struct ExportColumns {
    pub draft_id: &'static str,
    pub seat: &'static str,
    pub seat_kind: &'static str,
    pub pick: &'static str,
    pub picked: &'static str,
    pub pack: &'static str,
}

pub const DEFAULT_EXPORT_COLUMNS: ExportColumns = ExportColumns {
    draft_id: "draft_id",
    seat: "seat",
    seat_kind: "seat_kind",
    pick: "pick",
    picked: "picked",
    pack: "pack",
};

pub const PACK_NAME_SEPARATOR: char = '|';

#[derive(Debug, Clone, Default)]
pub struct ImportOutcome {
    pub logs: Vec<DraftLog>,
    /// Seat logs dropped because they did not hold exactly 45 ordered picks.
    pub skipped_truncated: usize,
}

pub fn import_draftsim_export(path: impl AsRef<Path>, set: &CardSet) -> Result<ImportOutcome> {
    let path = path.as_ref();
    import_export_from(open_reader(path)?, set, &DEFAULT_EXPORT_COLUMNS)
}

pub fn import_export_from<R: Read>(
    reader: R,
    set: &CardSet,
    columns: &ExportColumns,
) -> Result<ImportOutcome> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Ok(ImportOutcome::default());
    }
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Invalid(format!("export is missing column '{name}'")))
    };
    let (c_id, c_seat, c_kind, c_pick, c_picked, c_pack) = (
        col(columns.draft_id)?,
        col(columns.seat)?,
        col(columns.seat_kind)?,
        col(columns.pick)?,
        col(columns.picked)?,
        col(columns.pack)?,
    );
    let by_name: HashMap<&str, CardId> =
        set.cards().iter().map(|c| (c.name.as_str(), c.index)).collect();
    let mut unknown: BTreeMap<String, ()> = BTreeMap::new();
    let mut resolve = |name: &str| -> CardId {
        match by_name.get(name.trim()) {
            Some(&id) => id,
            None => {
                unknown.insert(name.trim().to_string(), ());
                usize::MAX
            }
        }
    };

    // (draft_id, seat) -> (kind, picks) in first-appearance order
    let mut order: Vec<(String, u8)> = Vec::new();
    let mut groups: HashMap<(String, u8), (SeatKind, Vec<PickEvent>)> = HashMap::new();
    for (row_no, record) in rdr.records().enumerate() {
        let record = record?;
        let bad = |m: String| Error::Invalid(format!("export row {}: {m}", row_no + 2));
        let draft_id = record[c_id].to_string();
        let seat: u8 = record[c_seat]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad seat '{}'", &record[c_seat])))?;
        let kind = match record[c_kind].trim() {
            "human" => SeatKind::Human,
            "bot" => SeatKind::Bot,
            other => return Err(bad(format!("bad seat_kind '{other}'"))),
        };
        let pick: u8 = record[c_pick]
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad pick '{}'", &record[c_pick])))?;
        let picked = resolve(&record[c_picked]);
        let pack: Vec<CardId> = record[c_pack]
            .split(PACK_NAME_SEPARATOR)
            .filter(|s| !s.trim().is_empty())
            .map(&mut resolve)
            .collect();
        let key = (draft_id, seat);
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (kind, Vec::new())
        });
        entry.1.push(PickEvent {
            global_pick: pick,
            pack,
            picked,
        });
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownCards(unknown.into_keys().collect()));
    }

    let mut outcome = ImportOutcome::default();
    for key in order {
        let (kind, mut events) = groups.remove(&key).expect("group recorded");
        events.sort_by_key(|e| e.global_pick);
        let complete = events.len() == TOTAL_PICKS
            && events
                .iter()
                .enumerate()
                .all(|(i, e)| e.global_pick as usize == i + 1);
        if !complete {
            outcome.skipped_truncated += 1;
            continue;
        }
        let log = DraftLog {
            draft_id: key.0,
            seat: key.1,
            set_code: set.code.clone(),
            seat_kind: kind,
            events,
        };
        log.validate(set)?;
        outcome.logs.push(log);
    }
    if outcome.skipped_truncated > 0 {
        log::warn!(
            "skipped {} truncated seat logs during import",
            outcome.skipped_truncated
        );
    }
    Ok(outcome)
}

/// Writes logs in the CSV export layout read by [`import_draftsim_export`].
pub fn write_export<W: Write>(out: W, set: &CardSet, logs: &[DraftLog]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let c = &DEFAULT_EXPORT_COLUMNS;
    w.write_record([c.draft_id, c.seat, c.seat_kind, c.pick, c.picked, c.pack])?;
    for log in logs {
        let kind = match log.seat_kind {
            SeatKind::Human => "human",
            SeatKind::Bot => "bot",
        };
        for e in &log.events {
            let pack: Vec<&str> = e.pack.iter().map(|&id| set.card(id).name.as_str()).collect();
            w.write_record([
                log.draft_id.as_str(),
                &log.seat.to_string(),
                kind,
                &e.global_pick.to_string(),
                &set.card(e.picked).name,
                &pack.join(&PACK_NAME_SEPARATOR.to_string()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
