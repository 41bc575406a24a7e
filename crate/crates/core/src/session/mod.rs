//! The running installation: one session owns the data, the narrations, the
//! composer, both hands and the event log, and advances on a logical clock.
//!
//! Refreshes are described as [`Work`] and executed by [`execute`], which
//! touches no session state. A server runs work off its loop and feeds the
//! results back through [`Session::apply`]; a headless run does the same
//! inline.

mod config;
mod headless;
mod protocol;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::ingestion::{
    build_schedule, fetch_snapshot, fetch_weather, DataFetcher, DataSnapshot, FixtureFetcher, IngestError,
    RefreshTarget, SnapshotStore, TimeScale, WeatherReading,
};
use crate::interaction::{
    default_layout, trail_color, update_pointer, InteractionError, Point, PointerState, StringModel, TrailConfig,
    HAND_COUNT,
};
use crate::layers::{DataSourceDescriptor, LayerId, PaceLayer, SourceKind};
use crate::library::{generate_fixture_library, FixtureParams, LibraryError, SoundLibrary};
use crate::music::{on_pluck, Composer, CompositionState, LayerVoice, MusicError, SoundEvent};
use crate::semantic::{
    activity_from_matches, match_sounds, narrate, EmbeddingProvider, HashEmbedder, LayerNarration, MatchResult,
    SemanticError, StubTextGen, TextGenProvider,
};
use crate::time::Timestamp;

pub use config::{
    EmbeddingChoice, OpenAiConfig, ProviderConfig, SessionConfig, SourceOverride, TextGenChoice, API_KEY_ENV,
};
pub use headless::{parse_script, run_headless, HeadlessRun, RunManifest, ScriptEvent};
pub use protocol::{
    parse_client_frame, ClientMessage, ClientMessageKind, HandView, LayerView, ServerMessage, StateSnapshot,
    TrailPointView, PROTOCOL_VERSION,
};

/// Logical ticks per second.
pub const TICK_HZ: u32 = 30;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Music(#[from] MusicError),
    #[error("script line {line}: {detail}")]
    Script { line: usize, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Providers and data shared by a session and its workers.
pub struct Services {
    pub fetcher: Box<dyn DataFetcher>,
    pub textgen: Box<dyn TextGenProvider>,
    pub embedder: Box<dyn EmbeddingProvider>,
    pub library: SoundLibrary,
    pub match_k: usize,
}

impl Services {
    pub fn new(
        fetcher: Box<dyn DataFetcher>,
        textgen: Box<dyn TextGenProvider>,
        embedder: Box<dyn EmbeddingProvider>,
        library: SoundLibrary,
        match_k: usize,
    ) -> Result<Self, SessionError> {
        if library.dimension() != embedder.dimension() {
            return Err(SessionError::Config(format!(
                "library dimension {} does not match embedder {} ({})",
                library.dimension(),
                embedder.model_id(),
                embedder.dimension()
            )));
        }
        Ok(Services { fetcher, textgen, embedder, library, match_k })
    }

    /// Fixture sources with the stub text generator and the hash embedder.
    pub fn offline(config: &SessionConfig) -> Result<Self, SessionError> {
        let dir = config
            .fixtures_dir
            .as_ref()
            .ok_or_else(|| SessionError::Config("offline services need fixtures_dir".into()))?;
        let fetcher = FixtureFetcher::from_dir(dir)?;
        let embedder = HashEmbedder::new(config.providers.embedding_dimension, config.providers.embedding_seed);
        let library = load_library(config, &embedder)?;
        Self::new(
            Box::new(fetcher),
            Box::new(StubTextGen::new(config.seed)),
            Box::new(embedder),
            library,
            config.match_k,
        )
    }
}

/// Loads the configured library, or generates the synthetic one.
pub fn load_library(config: &SessionConfig, embedder: &dyn EmbeddingProvider) -> Result<SoundLibrary, SessionError> {
    match &config.library {
        Some(path) => Ok(SoundLibrary::load(path, embedder.dimension())?),
        None => Ok(generate_fixture_library(
            FixtureParams::with_default_shape(config.library_sounds, config.providers.embedding_seed),
            embedder,
        )?),
    }
}

/// Layers with any configured source overrides applied.
pub fn configured_layers(config: &SessionConfig) -> Vec<PaceLayer> {
    let mut layers = PaceLayer::defaults();
    for layer in &mut layers {
        if let Some(o) = config.sources.get(layer.id.name()) {
            apply_override(&mut layer.source, o);
        }
    }
    layers
}

pub fn configured_weather_source(config: &SessionConfig) -> DataSourceDescriptor {
    let mut source =
        DataSourceDescriptor { kind: SourceKind::Weather, locale: "Canberra".into(), endpoint: "weather.json".into() };
    if let Some(o) = config.sources.get("weather") {
        apply_override(&mut source, o);
    }
    source
}

fn apply_override(source: &mut DataSourceDescriptor, o: &SourceOverride) {
    if let Some(e) = &o.endpoint {
        source.endpoint = e.clone();
    }
    if let Some(l) = &o.locale {
        source.locale = l.clone();
    }
}

#[derive(Clone, Debug)]
pub enum Work {
    Source { layer: PaceLayer, at: Timestamp },
    Weather { source: DataSourceDescriptor, at: Timestamp },
    Narration { layer: PaceLayer, snapshot: Arc<DataSnapshot>, at: Timestamp },
}

impl Work {
    pub fn target(&self) -> RefreshTarget {
        match self {
            Work::Source { layer, .. } => RefreshTarget::Source(layer.id),
            Work::Weather { .. } => RefreshTarget::Weather,
            Work::Narration { layer, .. } => RefreshTarget::Narration(layer.id),
        }
    }
}

#[derive(Clone, Debug)]
pub enum WorkResult {
    Source(LayerId, Result<DataSnapshot, IngestError>),
    Weather(Result<WeatherReading, IngestError>),
    Narration(LayerId, Result<(LayerNarration, Vec<MatchResult>), SemanticError>),
}

/// Runs one refresh. May block on the network.
pub fn execute(services: &Services, work: &Work) -> WorkResult {
    match work {
        Work::Source { layer, at } => WorkResult::Source(layer.id, fetch_snapshot(layer, &*services.fetcher, *at)),
        Work::Weather { source, at } => WorkResult::Weather(fetch_weather(source, &*services.fetcher, *at)),
        Work::Narration { layer, snapshot, at } => {
            let result = narrate(layer, snapshot, &*services.textgen, *at).and_then(|n| {
                let m = match_sounds(&n, &services.library, &*services.embedder, services.match_k)?;
                Ok((n, m))
            });
            WorkResult::Narration(layer.id, result)
        }
    }
}

/// Who should receive a server message.
#[derive(Clone, Debug, PartialEq)]
pub enum Outbound {
    Reply(ServerMessage),
    Broadcast(ServerMessage),
}

impl Outbound {
    pub fn message(&self) -> &ServerMessage {
        match self {
            Outbound::Reply(m) | Outbound::Broadcast(m) => m,
        }
    }
}

/// A refresh that failed; the previous state was kept.
#[derive(Clone, Debug, PartialEq)]
pub struct RefreshFailure {
    pub target: RefreshTarget,
    pub at: Timestamp,
    pub detail: String,
}

pub struct Session {
    services: Arc<Services>,
    layers: Vec<PaceLayer>,
    weather_source: DataSourceDescriptor,
    scale: TimeScale,
    store: SnapshotStore,
    narrations: BTreeMap<LayerId, LayerNarration>,
    matches: BTreeMap<LayerId, Vec<MatchResult>>,
    weather: WeatherReading,
    composer: Composer,
    strings: Vec<StringModel>,
    hands: Vec<PointerState>,
    trail_cfg: TrailConfig,
    last_refresh: BTreeMap<RefreshTarget, Timestamp>,
    in_flight: BTreeSet<RefreshTarget>,
    failures: Vec<RefreshFailure>,
    start: Timestamp,
    now: Timestamp,
    tick: u64,
    log: Vec<SoundEvent>,
}

impl Session {
    /// Fetches every source and the weather, narrates and matches every
    /// layer, then builds the composer. Nothing is emitted if any of it fails.
    pub fn start(config: &SessionConfig, services: Arc<Services>, start: Timestamp) -> Result<Self, SessionError> {
        config.validate()?;
        let layers = configured_layers(config);
        let weather_source = configured_weather_source(config);

        let mut store = SnapshotStore::new();
        for layer in &layers {
            let snapshot = fetch_snapshot(layer, &*services.fetcher, start)?;
            store.publish(snapshot);
        }
        let weather = fetch_weather(&weather_source, &*services.fetcher, start)?;

        let mut state = CompositionState::new(config.seed, &weather, start);
        let mut narrations = BTreeMap::new();
        let mut matches = BTreeMap::new();
        for layer in &layers {
            let snapshot = store.get(layer.id).expect("published above");
            let work = Work::Narration { layer: layer.clone(), snapshot, at: start };
            let WorkResult::Narration(_, result) = execute(&services, &work) else { unreachable!() };
            let (n, m) = result?;
            state.set_voice(layer.id, voice_of(&m));
            narrations.insert(layer.id, n);
            matches.insert(layer.id, m);
        }
        state.validate()?;

        let mut last_refresh = BTreeMap::new();
        for layer in &layers {
            last_refresh.insert(RefreshTarget::Source(layer.id), start);
            last_refresh.insert(RefreshTarget::Narration(layer.id), start);
        }
        last_refresh.insert(RefreshTarget::Weather, start);

        Ok(Session {
            services,
            layers,
            weather_source,
            scale: TimeScale::new(config.time_scale_factor)?,
            store,
            narrations,
            matches,
            weather,
            composer: Composer::new(state),
            strings: default_layout(),
            hands: (0..HAND_COUNT).map(|h| PointerState::new(h).expect("valid hand")).collect(),
            trail_cfg: TrailConfig::default(),
            last_refresh,
            in_flight: BTreeSet::new(),
            failures: Vec::new(),
            start,
            now: start,
            tick: 0,
            log: Vec::new(),
        })
    }

    pub fn services(&self) -> &Arc<Services> {
        &self.services
    }

    pub fn layers(&self) -> &[PaceLayer] {
        &self.layers
    }

    pub fn composition(&self) -> &CompositionState {
        self.composer.state()
    }

    pub fn narration(&self, layer: LayerId) -> Option<&LayerNarration> {
        self.narrations.get(&layer)
    }

    pub fn matches(&self, layer: LayerId) -> &[MatchResult] {
        self.matches.get(&layer).map_or(&[], Vec::as_slice)
    }

    pub fn snapshot_of(&self, layer: LayerId) -> Option<Arc<DataSnapshot>> {
        self.store.get(layer)
    }

    pub fn weather(&self) -> &WeatherReading {
        &self.weather
    }

    pub fn time_scale(&self) -> TimeScale {
        self.scale
    }

    pub fn start_time(&self) -> Timestamp {
        self.start
    }

    pub fn now(&self) -> Timestamp {
        self.now
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn event_log(&self) -> &[SoundEvent] {
        &self.log
    }

    pub fn failures(&self) -> &[RefreshFailure] {
        &self.failures
    }

    pub fn strings(&self) -> &[StringModel] {
        &self.strings
    }

    pub fn hand(&self, hand_id: u8) -> Option<&PointerState> {
        self.hands.get(hand_id as usize)
    }

    /// Refreshes due at the current time that are not already running. A
    /// narration waits while its source is being fetched so that it sees the
    /// new data.
    pub fn due_work(&mut self) -> Vec<Work> {
        let plan = build_schedule(&self.layers, &self.last_refresh, self.scale, self.now)
            .expect("session always holds every layer");
        let mut work = Vec::new();
        for entry in plan.due(self.now) {
            let target = entry.target;
            if self.in_flight.contains(&target) {
                continue;
            }
            let item = match target {
                RefreshTarget::Source(id) => {
                    if !self.store.begin_fetch(id) {
                        continue;
                    }
                    Work::Source { layer: self.layer(id).clone(), at: self.now }
                }
                RefreshTarget::Narration(id) => {
                    if self.store.is_in_flight(id)
                        || work.iter().any(|w: &Work| w.target() == RefreshTarget::Source(id))
                    {
                        continue;
                    }
                    let Some(snapshot) = self.store.get(id) else { continue };
                    Work::Narration { layer: self.layer(id).clone(), snapshot, at: self.now }
                }
                RefreshTarget::Weather => Work::Weather { source: self.weather_source.clone(), at: self.now },
            };
            self.in_flight.insert(target);
            self.last_refresh.insert(target, self.now);
            work.push(item);
        }
        work
    }

    fn layer(&self, id: LayerId) -> &PaceLayer {
        self.layers.iter().find(|l| l.id == id).expect("session always holds every layer")
    }

    /// Folds a finished refresh into the session. Failures keep the previous
    /// data and are recorded.
    pub fn apply(&mut self, result: WorkResult) -> Vec<Outbound> {
        let mut out = Vec::new();
        match result {
            WorkResult::Source(id, result) => {
                self.in_flight.remove(&RefreshTarget::Source(id));
                if let Err(e) = &result {
                    self.fail(RefreshTarget::Source(id), e.to_string());
                }
                self.store.complete_fetch(id, result);
            }
            WorkResult::Weather(result) => {
                self.in_flight.remove(&RefreshTarget::Weather);
                match result {
                    Ok(reading) => {
                        let changed = self.composer.apply_weather(&reading);
                        self.weather = reading;
                        if changed {
                            out.push(Outbound::Broadcast(ServerMessage::StateSnapshot(self.snapshot())));
                        }
                    }
                    Err(e) => self.fail(RefreshTarget::Weather, e.to_string()),
                }
            }
            WorkResult::Narration(id, result) => {
                self.in_flight.remove(&RefreshTarget::Narration(id));
                match result {
                    Ok((narration, matches)) => {
                        self.composer.set_voice(id, voice_of(&matches));
                        self.narrations.insert(id, narration);
                        self.matches.insert(id, matches);
                        out.push(Outbound::Broadcast(ServerMessage::StateSnapshot(self.snapshot())));
                    }
                    Err(e) => self.fail(RefreshTarget::Narration(id), e.to_string()),
                }
            }
        }
        out
    }

    fn fail(&mut self, target: RefreshTarget, detail: String) {
        self.failures.push(RefreshFailure { target, at: self.now, detail });
    }

    /// Moves the clock forward one tick to `t` and emits the composer's
    /// events up to it. The clock never moves backwards.
    pub fn advance(&mut self, t: Timestamp) -> Result<Vec<Outbound>, SessionError> {
        self.now = self.now.max(t);
        self.tick += 1;
        let events = self.composer.compose_tick(self.now)?;
        Ok(events.into_iter().map(|e| self.emit(e)).collect())
    }

    fn emit(&mut self, event: SoundEvent) -> Outbound {
        self.log.push(event.clone());
        Outbound::Broadcast(ServerMessage::NoteEvent(event))
    }

    pub fn handle_frame(&mut self, text: &str) -> Vec<Outbound> {
        match parse_client_frame(text) {
            Ok(msg) => self.handle_message(msg),
            Err(e) => vec![Outbound::Reply(e)],
        }
    }

    /// Client input, applied at the current logical time.
    pub fn handle_message(&mut self, msg: ClientMessage) -> Vec<Outbound> {
        match msg {
            ClientMessage::Hello { protocol_version } => {
                if protocol_version == PROTOCOL_VERSION {
                    vec![Outbound::Reply(ServerMessage::StateSnapshot(self.snapshot()))]
                } else {
                    vec![Outbound::Reply(ServerMessage::error(
                        "version_mismatch",
                        format!("server speaks {PROTOCOL_VERSION}, client sent {protocol_version}"),
                    ))]
                }
            }
            ClientMessage::PointerUpdate { hand_id, x, y, .. } => self.pointer(hand_id, x, y),
        }
    }

    fn pointer(&mut self, hand_id: u8, x: f64, y: f64) -> Vec<Outbound> {
        let Some(state) = self.hands.get(hand_id as usize) else {
            return vec![Outbound::Reply(ServerMessage::error("bad_hand", format!("no hand {hand_id}")))];
        };
        let outcome = match update_pointer(state, Point::new(x, y), self.now, &self.strings, &self.trail_cfg) {
            Ok(o) => o,
            Err(e @ InteractionError::NonFinite(..)) => {
                return vec![Outbound::Reply(ServerMessage::error("bad_frame", e.to_string()))];
            }
            Err(e) => return vec![Outbound::Reply(ServerMessage::error("bad_pointer", e.to_string()))],
        };
        self.hands[hand_id as usize] = outcome.state;
        let mut out = Vec::new();
        for c in outcome.crossings {
            let event = on_pluck(c.string_index, c.t, c.hand_id).expect("crossings name real strings");
            out.push(self.emit(event));
        }
        out.push(Outbound::Broadcast(self.trail_update(hand_id)));
        out
    }

    fn trail_update(&self, hand_id: u8) -> ServerMessage {
        let ttl = self.trail_cfg.ttl.as_secs_f64();
        let points = self.hands[hand_id as usize]
            .trail_with_ages(self.now)
            .into_iter()
            .map(|(p, age)| TrailPointView { x: p.x, y: p.y, age_s: age, alpha: trail_color(age, ttl).a })
            .collect();
        ServerMessage::TrailUpdate { hand_id, t_ms: self.now.as_millis(), points }
    }

    /// A consistent view of everything the client draws.
    pub fn snapshot(&self) -> StateSnapshot {
        let state = self.composer.state();
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let n = self.narrations.get(&l.id);
                LayerView {
                    layer: l.id,
                    pace_rank: l.pace_rank,
                    attribute: l.attribute,
                    sentence: n.map(|n| n.sentence.clone()).unwrap_or_default(),
                    labels: n.map(|n| n.emotion_labels.to_vec()).unwrap_or_default(),
                    activity: state.voice(l.id).map_or(0.0, |v| v.activity),
                    matched_sound_ids: state.voice(l.id).map(|v| v.matched.clone()).unwrap_or_default(),
                }
            })
            .collect();
        let hands = self
            .hands
            .iter()
            .map(|h| {
                let live =
                    h.visible && h.last_update().is_some_and(|t| self.now.saturating_since(t) <= self.trail_cfg.ttl);
                let pos = h.pos().filter(|_| live);
                HandView { hand_id: h.hand_id, visible: live, x: pos.map(|p| p.x), y: pos.map(|p| p.y) }
            })
            .collect();
        let mut snapshot = StateSnapshot {
            protocol_version: PROTOCOL_VERSION.into(),
            tick: self.tick,
            t_ms: self.now.as_millis(),
            key: state.global_key().value(),
            key_name: state.global_key().name().into(),
            mode: state.mode(),
            tempo_bpm: state.tempo_bpm(),
            strings: self.strings.clone(),
            layers,
            hands,
            render_hash: String::new(),
        };
        snapshot.render_hash = snapshot.compute_render_hash();
        snapshot
    }
}

fn voice_of(matches: &[MatchResult]) -> LayerVoice {
    LayerVoice { matched: matches.iter().map(|m| m.sound_id).collect(), activity: activity_from_matches(matches) }
}
