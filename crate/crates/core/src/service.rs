//! Live drafts: one human seat against seven agents, advanced in lockstep.
//!
//! The service only ever reveals the human seat's pack and collection until
//! a draft is finished. Every round (the human pick plus the seven agent
//! picks) is computed on a copy of the draft and swapped in whole, so a
//! failure part-way leaves the previous state intact.
//!
//! With a snapshot directory configured, each draft gets an append-only
//! JSONL file holding its creation parameters and the human picks. Agents
//! are deterministic given their seeds, so replaying that file rebuilds the
//! draft exactly.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentCatalog, PickContext};
use crate::card::{CardId, CardSet, ColorVector, Rarity, COLOR_LETTERS};
use crate::dataset::{write_logs_to, DraftLog, LogHeader, PickEvent, SeatKind};
use crate::engine::{seat_stream, DraftState, SEATS, TOTAL_PICKS};
use crate::error::Error;
use crate::rng::{self, StreamRng};

pub const BOT_SEATS: usize = SEATS - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorKind {
    NotFound,
    BadRequest,
    Conflict,
    Internal,
}

/// Error returned by service calls; `code` is a stable machine-readable tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceError {
    #[serde(skip)]
    pub kind: Option<ErrorKind>,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub legal_picks: Option<Vec<CardId>>,
}

impl ServiceError {
    fn new(kind: ErrorKind, code: &str, message: impl Into<String>) -> Self {
        ServiceError {
            kind: Some(kind),
            code: code.to_string(),
            message: message.into(),
            legal_picks: None,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        self.kind.unwrap_or(ErrorKind::Internal)
    }
}

impl std::fmt::Display for ServiceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ServiceError {}

impl From<Error> for ServiceError {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::UnknownAgent(_) | Error::Config(_) | Error::Invalid(_) | Error::SetMismatch { .. } => {
                ErrorKind::BadRequest
            }
            Error::DraftFinished => ErrorKind::Conflict,
            _ => ErrorKind::Internal,
        };
        let code = match e {
            Error::UnknownAgent(_) => "unknown_agent",
            Error::DraftFinished => "draft_finished",
            Error::SetMismatch { .. } => "set_mismatch",
            _ if kind == ErrorKind::BadRequest => "bad_request",
            _ => "internal",
        };
        ServiceError::new(kind, code, e.to_string())
    }
}

pub type ServiceResult<T> = std::result::Result<T, ServiceError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardView {
    pub index: CardId,
    pub name: String,
    pub rarity: Rarity,
    /// Colored symbols, e.g. `"UU"` or `"BR"`; empty for colorless.
    pub colors: String,
    pub color_class: String,
    pub strength: f64,
}

fn color_string(c: &ColorVector) -> String {
    (0..COLOR_LETTERS.len())
        .flat_map(|i| std::iter::repeat_n(COLOR_LETTERS[i], c.get(i) as usize))
        .collect()
}

impl CardView {
    pub fn new(set: &CardSet, id: CardId) -> Self {
        let c = set.card(id);
        CardView {
            index: c.index,
            name: c.name.clone(),
            rarity: c.rarity,
            colors: color_string(&c.colors),
            color_class: c.colors.class(),
            strength: c.strength,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionEntry {
    pub card: CardView,
    pub count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DraftStatus {
    AwaitingHuman,
    Finished,
}

/// Everything the human seat is allowed to see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DraftView {
    pub draft_id: String,
    pub set_code: String,
    pub seed: u64,
    pub status: DraftStatus,
    pub human_seat: usize,
    pub agents: Vec<String>,
    /// Global pick the human is about to make (1..=45); 45 once finished.
    pub pick_number: usize,
    pub pack_number: usize,
    pub pick_in_pack: usize,
    pub pack: Vec<CardView>,
    pub collection: Vec<CollectionEntry>,
    pub picks_made: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateDraft {
    #[serde(default)]
    pub set: Option<String>,
    pub agents: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub human_seat: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitPick {
    pub card: CardId,
    /// Pick the client believes it is making; stale values are rejected.
    pub pick_number: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub card: CardView,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestions {
    pub agent: String,
    pub pick_number: usize,
    pub chosen: CardId,
    /// Highest score first; ties by card index.
    pub ranked: Vec<Suggestion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetInfo {
    pub code: String,
    pub cards: Vec<CardView>,
    pub bayes_models: Vec<String>,
    pub nnet_models: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum SnapshotRecord {
    Create {
        draft_id: String,
        set_code: String,
        agents: Vec<String>,
        seed: u64,
        human_seat: usize,
    },
    Pick {
        pick_number: usize,
        card: CardId,
    },
}

#[derive(Clone)]
struct Round {
    state: DraftState,
    streams: Vec<StreamRng>,
    logs: Vec<DraftLog>,
}

struct LiveDraft {
    id: String,
    human_seat: usize,
    specs: Vec<String>,
    /// One per seat; `None` at the human seat.
    agents: Vec<Option<Arc<dyn Agent>>>,
    round: Round,
    snapshot: Option<PathBuf>,
}

impl LiveDraft {
    fn start(
        id: String,
        catalog: &AgentCatalog,
        specs: Vec<String>,
        seed: u64,
        human_seat: usize,
    ) -> ServiceResult<Self> {
        if specs.len() != BOT_SEATS {
            return Err(ServiceError::new(
                ErrorKind::BadRequest,
                "bad_agents",
                format!("expected {BOT_SEATS} agent specs, got {}", specs.len()),
            ));
        }
        if human_seat >= SEATS {
            return Err(ServiceError::new(
                ErrorKind::BadRequest,
                "bad_seat",
                format!("human seat must be below {SEATS}"),
            ));
        }
        let built: Vec<Arc<dyn Agent>> = specs
            .iter()
            .map(|s| catalog.build_str(s))
            .collect::<crate::Result<_>>()?;
        let mut bots = built.into_iter();
        let agents: Vec<Option<Arc<dyn Agent>>> = (0..SEATS)
            .map(|k| if k == human_seat { None } else { bots.next() })
            .collect();
        let set = Arc::clone(catalog.set());
        let state = DraftState::new(Arc::clone(&set), seed)?;
        let streams = agents
            .iter()
            .enumerate()
            .map(|(k, a)| seat_stream(seed, k, a.as_ref().map_or(0, |a| a.seed())))
            .collect();
        let logs = (0..SEATS)
            .map(|k| DraftLog {
                draft_id: id.clone(),
                seat: k as u8,
                set_code: set.code.clone(),
                seat_kind: if k == human_seat { SeatKind::Human } else { SeatKind::Bot },
                events: Vec::with_capacity(TOTAL_PICKS),
            })
            .collect();
        Ok(LiveDraft {
            id,
            human_seat,
            specs,
            agents,
            round: Round { state, streams, logs },
            snapshot: None,
        })
    }

    fn state(&self) -> &DraftState {
        &self.round.state
    }

    fn view(&self) -> DraftView {
        let state = self.state();
        let set = state.set();
        let seat = state.seat(self.human_seat);
        let finished = state.is_finished();
        DraftView {
            draft_id: self.id.clone(),
            set_code: set.code.clone(),
            seed: state.seed(),
            status: if finished { DraftStatus::Finished } else { DraftStatus::AwaitingHuman },
            human_seat: self.human_seat,
            agents: self.specs.clone(),
            pick_number: state.global_pick(),
            pack_number: state.pack_number(),
            pick_in_pack: state.pick_in_pack(),
            pack: if finished {
                Vec::new()
            } else {
                seat.pack.cards().iter().map(|&c| CardView::new(set, c)).collect()
            },
            collection: seat
                .collection
                .iter()
                .map(|(c, n)| CollectionEntry {
                    card: CardView::new(set, c),
                    count: n,
                })
                .collect(),
            picks_made: seat.collection.total() as usize,
        }
    }

    /// Runs one round on a copy and returns it; `self` is not modified.
    fn play_round(&self, human_card: CardId) -> ServiceResult<Round> {
        let mut next = self.round.clone();
        let global_pick = next.state.global_pick();
        let mut picks = Vec::with_capacity(SEATS);
        for k in 0..SEATS {
            let seat = next.state.seat(k);
            let chosen = match &self.agents[k] {
                None => human_card,
                Some(agent) => {
                    let ctx = PickContext {
                        pack: seat.pack.cards(),
                        collection: &seat.collection,
                        global_pick,
                    };
                    agent.rank(&ctx, &mut next.streams[k])?.chosen
                }
            };
            next.logs[k].events.push(PickEvent {
                global_pick: global_pick as u8,
                pack: seat.pack.cards().to_vec(),
                picked: chosen,
            });
            picks.push(chosen);
        }
        next.state.step(&picks)?;
        Ok(next)
    }

    fn check_pick(&self, pick: &SubmitPick) -> ServiceResult<()> {
        let state = self.state();
        if state.is_finished() {
            return Err(ServiceError::new(ErrorKind::Conflict, "draft_finished", "the draft is finished"));
        }
        if pick.pick_number != state.global_pick() {
            return Err(ServiceError::new(
                ErrorKind::Conflict,
                "stale_pick",
                format!("pick {} was submitted but pick {} is current", pick.pick_number, state.global_pick()),
            ));
        }
        let pack = &state.seat(self.human_seat).pack;
        if !pack.contains(pick.card) {
            let mut legal: Vec<CardId> = pack.cards().to_vec();
            legal.sort_unstable();
            legal.dedup();
            let mut err = ServiceError::new(
                ErrorKind::BadRequest,
                "illegal_pick",
                format!("card {} is not in the current pack", pick.card),
            );
            err.legal_picks = Some(legal);
            return Err(err);
        }
        Ok(())
    }
}

fn append_record(path: &Path, record: &SnapshotRecord) -> std::io::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_vec(record).map_err(std::io::Error::other)?;
    line.push(b'\n');
    f.write_all(&line)?;
    f.sync_data()
}

pub struct DraftService {
    catalogs: BTreeMap<String, Arc<AgentCatalog>>,
    drafts: RwLock<HashMap<String, Arc<Mutex<LiveDraft>>>>,
    counter: AtomicU64,
    snapshot_dir: Option<PathBuf>,
}

impl DraftService {
    pub fn new(catalogs: Vec<AgentCatalog>) -> Self {
        DraftService {
            catalogs: catalogs
                .into_iter()
                .map(|c| (c.set().code.clone(), Arc::new(c)))
                .collect(),
            drafts: RwLock::new(HashMap::new()),
            counter: AtomicU64::new(0),
            snapshot_dir: None,
        }
    }

    /// Enables snapshot files in `dir` and rebuilds every draft found there.
    /// Returns the number of drafts recovered.
    pub fn with_snapshots(mut self, dir: impl Into<PathBuf>) -> crate::Result<(Self, usize)> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        self.snapshot_dir = Some(dir.clone());
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
            .collect();
        paths.sort();
        let mut recovered = 0;
        for p in paths {
            match self.recover(&p) {
                Ok(draft) => {
                    let id = draft.id.clone();
                    self.drafts
                        .write()
                        .unwrap()
                        .insert(id, Arc::new(Mutex::new(draft)));
                    recovered += 1;
                }
                Err(e) => log::warn!("skipping snapshot {}: {e}", p.display()),
            }
        }
        self.counter.store(recovered as u64, Ordering::SeqCst);
        Ok((self, recovered))
    }

    fn recover(&self, path: &Path) -> ServiceResult<LiveDraft> {
        let reader = BufReader::new(File::open(path).map_err(|e| ServiceError::from(Error::Io(e)))?);
        let mut draft: Option<LiveDraft> = None;
        let mut kept = Vec::new();
        let mut torn = false;
        for line in reader.lines() {
            let line = line.map_err(|e| ServiceError::from(Error::Io(e)))?;
            let record: SnapshotRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                // a torn final line from a crash mid-append
                Err(_) => {
                    torn = true;
                    break;
                }
            };
            kept.push(line);
            match (record, draft.as_mut()) {
                (
                    SnapshotRecord::Create {
                        draft_id,
                        set_code,
                        agents,
                        seed,
                        human_seat,
                    },
                    None,
                ) => {
                    let catalog = self.catalog(Some(&set_code))?;
                    draft = Some(LiveDraft::start(draft_id, catalog, agents, seed, human_seat)?);
                }
                (SnapshotRecord::Pick { pick_number, card }, Some(d)) => {
                    d.check_pick(&SubmitPick { card, pick_number })?;
                    d.round = d.play_round(card)?;
                }
                _ => {
                    return Err(ServiceError::new(ErrorKind::Internal, "bad_snapshot", "records out of order"));
                }
            }
        }
        let mut d = draft.ok_or_else(|| ServiceError::new(ErrorKind::Internal, "bad_snapshot", "empty snapshot"))?;
        if torn {
            let text: String = kept.iter().map(|l| format!("{l}\n")).collect();
            std::fs::write(path, text).map_err(|e| ServiceError::from(Error::Io(e)))?;
        }
        d.snapshot = Some(path.to_path_buf());
        Ok(d)
    }

    fn catalog(&self, code: Option<&str>) -> ServiceResult<&AgentCatalog> {
        let found = match code {
            Some(c) => self.catalogs.get(c),
            None if self.catalogs.len() == 1 => self.catalogs.values().next(),
            None => {
                return Err(ServiceError::new(ErrorKind::BadRequest, "set_required", "several sets are loaded; name one"));
            }
        };
        found
            .map(|c| c.as_ref())
            .ok_or_else(|| ServiceError::new(ErrorKind::BadRequest, "unknown_set", format!("set {code:?} is not loaded")))
    }

    fn draft(&self, id: &str) -> ServiceResult<Arc<Mutex<LiveDraft>>> {
        self.drafts
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::new(ErrorKind::NotFound, "not_found", format!("no draft {id}")))
    }

    pub fn list_sets(&self) -> Vec<SetInfo> {
        self.catalogs
            .values()
            .map(|c| {
                let set = c.set();
                let (bayes_models, nnet_models) = c.model_names();
                SetInfo {
                    code: set.code.clone(),
                    cards: (0..set.len()).map(|i| CardView::new(set, i)).collect(),
                    bayes_models,
                    nnet_models,
                }
            })
            .collect()
    }

    pub fn create_draft(&self, req: CreateDraft) -> ServiceResult<DraftView> {
        let catalog = self.catalog(req.set.as_deref())?;
        let n = self.counter.fetch_add(1, Ordering::SeqCst);
        let seed = req.seed.unwrap_or_else(rand::random);
        let id = format!("{n:06}-{:08x}", rng::derive(seed, n) as u32);
        let mut draft = LiveDraft::start(id.clone(), catalog, req.agents, seed, req.human_seat.unwrap_or(0))?;
        if let Some(dir) = &self.snapshot_dir {
            let path = dir.join(format!("{id}.jsonl"));
            let record = SnapshotRecord::Create {
                draft_id: id.clone(),
                set_code: catalog.set().code.clone(),
                agents: draft.specs.clone(),
                seed,
                human_seat: draft.human_seat,
            };
            append_record(&path, &record).map_err(|e| ServiceError::from(Error::Io(e)))?;
            draft.snapshot = Some(path);
        }
        let view = draft.view();
        self.drafts.write().unwrap().insert(id, Arc::new(Mutex::new(draft)));
        Ok(view)
    }

    pub fn get_state(&self, id: &str) -> ServiceResult<DraftView> {
        let draft = self.draft(id)?;
        let d = draft.lock().unwrap();
        Ok(d.view())
    }

    pub fn submit_pick(&self, id: &str, pick: SubmitPick) -> ServiceResult<DraftView> {
        let draft = self.draft(id)?;
        let mut d = draft.lock().unwrap();
        d.check_pick(&pick)?;
        let next = d.play_round(pick.card)?;
        if let Some(path) = &d.snapshot {
            let record = SnapshotRecord::Pick {
                pick_number: pick.pick_number,
                card: pick.card,
            };
            append_record(path, &record).map_err(|e| ServiceError::from(Error::Io(e)))?;
        }
        d.round = next;
        Ok(d.view())
    }

    /// Scores the human's current pack with `spec` without touching the draft.
    pub fn get_suggestions(&self, id: &str, spec: &str) -> ServiceResult<Suggestions> {
        let draft = self.draft(id)?;
        let d = draft.lock().unwrap();
        let state = d.state();
        if state.is_finished() {
            return Err(ServiceError::new(ErrorKind::Conflict, "draft_finished", "the draft is finished"));
        }
        let set_code = state.set().code.clone();
        let agent = self.catalog(Some(&set_code))?.build_str(spec)?;
        let seat = state.seat(d.human_seat);
        let global_pick = state.global_pick();
        let ctx = PickContext {
            pack: seat.pack.cards(),
            collection: &seat.collection,
            global_pick,
        };
        let mut stream = rng::stream(rng::derive(
            rng::derive(state.seed(), rng::hash_str(spec)),
            global_pick as u64,
        ));
        let ranking = agent.rank(&ctx, &mut stream)?;
        let mut best: BTreeMap<CardId, f64> = BTreeMap::new();
        for (&c, &s) in ctx.pack.iter().zip(&ranking.scores) {
            best.entry(c).or_insert(s);
        }
        let mut ranked: Vec<Suggestion> = best
            .into_iter()
            .map(|(c, score)| Suggestion {
                card: CardView::new(state.set(), c),
                score,
            })
            .collect();
        ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.card.index.cmp(&b.card.index)));
        Ok(Suggestions {
            agent: spec.to_string(),
            pick_number: global_pick,
            chosen: ranking.chosen,
            ranked,
        })
    }

    /// All eight seat logs; only available once the draft is finished.
    pub fn get_log(&self, id: &str) -> ServiceResult<Vec<DraftLog>> {
        let draft = self.draft(id)?;
        let d = draft.lock().unwrap();
        if !d.state().is_finished() {
            return Err(ServiceError::new(
                ErrorKind::Conflict,
                "draft_unfinished",
                "logs are available once the draft is finished",
            ));
        }
        Ok(d.round.logs.clone())
    }

    /// [`DraftService::get_log`] rendered as the canonical JSONL file.
    pub fn get_log_jsonl(&self, id: &str) -> ServiceResult<String> {
        let logs = self.get_log(id)?;
        let seed = self.draft(id)?.lock().unwrap().state().seed();
        let header = LogHeader::new(logs[0].set_code.clone())
            .with_seed(seed)
            .with_source("live-draft");
        let mut buf = Vec::new();
        write_logs_to(&mut buf, &header, &logs)?;
        Ok(String::from_utf8(buf).expect("JSON output is UTF-8"))
    }
}
