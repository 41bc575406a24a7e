//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sonifier_core::ingestion::{load_fixture_set, WeatherCondition, WeatherReading};
use sonifier_core::interaction::{default_layout, update_pointer, Point, PointerState, TrailConfig};
use sonifier_core::layers::PaceLayer;
use sonifier_core::library::{SoundAsset, SoundLibrary};
use sonifier_core::music::{
    assign_global_key, attribute_for_layer, mode_from_weather, parse_event_log, scale_pitches, EventKind, Mode,
    MusicalAttribute, PitchClass, OPEN_STRING_PITCHES,
};
use sonifier_core::semantic::{
    cosine_similarity, match_sounds, narrate, normalize_label, parse_labels, Embedding, EmbeddingProvider,
    LayerNarration, ProviderError, SnapshotRef, StubTextGen,
};
use sonifier_core::session::{
    parse_client_frame, parse_script, run_headless, ClientMessage, ClientMessageKind, HeadlessRun, Outbound,
    ServerMessage, Services, Session, SessionConfig,
};
use sonifier_core::{LayerId, Timestamp};

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($arg)+)),
        }
    };
}

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn rule_tables() -> Check {
    let at = Timestamp(0);
    let w = |c| WeatherReading { condition: c, fetched_at: at };
    for (cond, mode) in [
        (WeatherCondition::Sunny, Mode::Upbeat),
        (WeatherCondition::Rainy, Mode::Melancholic),
        (WeatherCondition::PartlyCloudy, Mode::Neutral),
    ] {
        ensure!(mode_from_weather(&w(cond.clone())) == mode, "{cond:?} does not map to {mode:?}");
    }
    let table = [
        (LayerId::SocialMedia, MusicalAttribute::Accents),
        (LayerId::Commerce, MusicalAttribute::Bass),
        (LayerId::Infrastructure, MusicalAttribute::Timekeepers),
        (LayerId::Governance, MusicalAttribute::PadsAndChords),
        (LayerId::Culture, MusicalAttribute::Scales),
        (LayerId::Nature, MusicalAttribute::Atmospheric),
    ];
    ensure!(LayerId::ALL.len() == table.len(), "layer count changed");
    for (layer, attr) in table {
        ensure!(attribute_for_layer(layer) == attr, "{layer:?} does not map to {attr:?}");
        let configured = PaceLayer::defaults().into_iter().find(|l| l.id == layer).unwrap();
        ensure!(configured.attribute == attr, "default {layer:?} layer carries {:?}", configured.attribute);
    }
    Ok(())
}

fn pluck_mapping() -> Check {
    let strings = default_layout();
    let cfg = TrailConfig::default();
    let mut hand = PointerState::new(0).unwrap();
    let mut plucks = Vec::new();
    for i in 0..=100 {
        let t = Timestamp(i * 10);
        let out =
            update_pointer(&hand, Point::new(0.5, i as f64 / 100.0), t, &strings, &cfg).map_err(|e| e.to_string())?;
        for c in out.crossings {
            plucks.push(sonifier_core::music::on_pluck(c.string_index, c.t, c.hand_id).map_err(|e| e.to_string())?);
        }
        hand = out.state;
    }
    ensure!(plucks.len() == 5, "{} plucks", plucks.len());
    ensure!(plucks.iter().all(|e| e.kind == EventKind::NotePluck), "non-pluck event");
    let classes: Vec<PitchClass> = plucks.iter().map(|e| PitchClass::of_midi(e.pitch.unwrap())).collect();
    let want = [PitchClass::A, PitchClass::D, PitchClass::G, PitchClass::B, PitchClass::E];
    ensure!(classes == want, "pitch classes {classes:?}");
    Ok(())
}

fn cosine_suite() -> Check {
    let a = Embedding::new(vec![1.0, 2.0, 3.0], "t");
    let b = Embedding::new(vec![4.0, 5.0, 6.0], "t");
    let hand = 32.0 / (14f64.sqrt() * 77f64.sqrt());
    let got = cosine_similarity(&a, &b).map_err(|e| e.to_string())?;
    ensure!((got - hand).abs() < 1e-9, "hand example {got} vs {hand}");

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..10_000 {
        let dim = rng.random_range(1..=64);
        let mut v = || Embedding::new((0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(), "r");
        let (x, y) = (v(), v());
        let xy = cosine_similarity(&x, &y).map_err(|e| e.to_string())?;
        let yx = cosine_similarity(&y, &x).map_err(|e| e.to_string())?;
        let xx = cosine_similarity(&x, &x).map_err(|e| e.to_string())?;
        ensure!((xx - 1.0).abs() < 1e-9, "pair {i}: self-similarity {xx}");
        ensure!((xy - yx).abs() < 1e-12, "pair {i}: asymmetric {xy} vs {yx}");
        ensure!((-1.0..=1.0).contains(&xy), "pair {i}: out of range {xy}");
    }
    Ok(())
}

/// Returns the stored vector for each text, times a constant.
struct TableEmbedder {
    table: HashMap<String, Vec<f64>>,
    factor: f64,
    dim: usize,
}

impl EmbeddingProvider for TableEmbedder {
    fn model_id(&self) -> &str {
        "table"
    }

    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding, ProviderError> {
        let v = self.table.get(text).ok_or_else(|| ProviderError::new("table", format!("no vector for {text}")))?;
        Ok(Embedding::new(v.iter().map(|x| x * self.factor).collect(), "table"))
    }
}

fn oracle_cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn matcher_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..200 {
        let dim = rng.random_range(2..=16);
        let sounds = rng.random_range(1..=50u32);
        let mut table: HashMap<String, Vec<f64>> = HashMap::new();
        let mut word = |rng: &mut ChaCha8Rng, prefix: &str| {
            let text = format!("{prefix}{}", table.len());
            table.insert(text.clone(), (0..dim).map(|_| rng.sample(StandardNormal)).collect());
            text
        };
        let sound_labels: Vec<(u32, Vec<String>)> =
            (1..=sounds).map(|id| (id, (0..rng.random_range(1..=5)).map(|_| word(&mut rng, "s")).collect())).collect();
        let narration_labels: [String; 3] = std::array::from_fn(|_| word(&mut rng, "n"));
        let table = &table;

        let build = |factor: f64| -> Result<(SoundLibrary, TableEmbedder), String> {
            let emb = TableEmbedder { table: table.clone(), factor, dim };
            let mut lib = SoundLibrary::new(dim);
            for (id, labels) in &sound_labels {
                lib.insert_sound(SoundAsset {
                    sound_id: *id,
                    file_ref: format!("{id}.wav"),
                    duration_s: 1.0,
                    labels: vec![],
                })
                .map_err(|e| e.to_string())?;
                for l in labels {
                    lib.add_label(*id, l, "x", &emb, Timestamp(0)).map_err(|e| e.to_string())?;
                }
            }
            Ok((lib, emb))
        };
        let narration = LayerNarration {
            layer_id: LayerId::Culture,
            sentence: "s".into(),
            emotion_labels: narration_labels.clone(),
            generated_at: Timestamp(0),
            source_snapshot_ref: SnapshotRef {
                layer_id: LayerId::Culture,
                fetched_at: Timestamp(0),
                digest: "0".into(),
            },
        };

        let (lib, emb) = build(1.0)?;
        let ours = match_sounds(&narration, &lib, &emb, sounds as usize).map_err(|e| e.to_string())?;
        let mut oracle: Vec<(u32, f64)> = sound_labels
            .iter()
            .map(|(id, labels)| {
                let best = labels
                    .iter()
                    .flat_map(|s| narration_labels.iter().map(move |n| oracle_cos(&table[n], &table[s])))
                    .fold(f64::NEG_INFINITY, f64::max);
                (*id, best)
            })
            .collect();
        oracle.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let ours_ids: Vec<u32> = ours.iter().map(|m| m.sound_id).collect();
        let oracle_ids: Vec<u32> = oracle.iter().map(|o| o.0).collect();
        ensure!(ours_ids == oracle_ids, "case {case}: ranking differs from brute force");

        let factor = rng.random_range(0.01..100.0);
        let (lib, emb) = build(factor)?;
        let scaled = match_sounds(&narration, &lib, &emb, sounds as usize).map_err(|e| e.to_string())?;
        let scaled_ids: Vec<u32> = scaled.iter().map(|m| m.sound_id).collect();
        ensure!(scaled_ids == ours_ids, "case {case}: ranking changes under scaling by {factor}");
    }
    Ok(())
}

fn crossing_oracle() -> Check {
    let strings = default_layout();
    let cfg = TrailConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 1_000 {
        let p0 = Point::new(rng.random(), rng.random());
        let p1 = Point::new(rng.random(), rng.random());
        if strings.iter().any(|s| (p0.y - s.y).abs() < 1e-9 || (p1.y - s.y).abs() < 1e-9) {
            continue;
        }
        // Dense samples along the segment; a string is crossed where the
        // side of consecutive samples changes, reported in travel order.
        let n = 10_000;
        let mut expected = Vec::new();
        let mut prev: Vec<bool> = strings.iter().map(|s| p0.y > s.y).collect();
        for i in 1..=n {
            let y = p0.y + (p1.y - p0.y) * i as f64 / n as f64;
            for (k, s) in strings.iter().enumerate() {
                let below = y > s.y;
                if below != prev[k] {
                    expected.push(s.index);
                    prev[k] = below;
                }
            }
        }
        let hand = update_pointer(&PointerState::new(0).unwrap(), p0, Timestamp(0), &strings, &cfg)
            .map_err(|e| e.to_string())?
            .state;
        let out = update_pointer(&hand, p1, Timestamp(16), &strings, &cfg).map_err(|e| e.to_string())?;
        let got: Vec<u8> = out.crossings.iter().map(|c| c.string_index).collect();
        ensure!(got == expected, "segment {p0:?} -> {p1:?}: {got:?} vs oracle {expected:?}");
        checked += 1;
    }
    Ok(())
}

fn headless_config() -> Result<SessionConfig, String> {
    SessionConfig::load(repo().join("fixtures/headless.toml")).map_err(|e| e.to_string())
}

fn headless_run(config: &SessionConfig) -> Result<(HeadlessRun, Duration), String> {
    let started = Instant::now();
    let script_path = config.script.as_ref().ok_or("config has no script")?;
    let script =
        parse_script(&std::fs::read_to_string(script_path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let services = Arc::new(Services::offline(config).map_err(|e| e.to_string())?);
    let run = run_headless(config, services, &script).map_err(|e| e.to_string())?;
    Ok((run, started.elapsed()))
}

fn deterministic_replay() -> Check {
    let config = headless_config()?;
    ensure!(config.time_scale_factor * config.min_duration_s >= 86_400.0, "run window does not span a day");
    let (a, ta) = headless_run(&config)?;
    let (b, tb) = headless_run(&config)?;
    ensure!(ta < Duration::from_secs(60) && tb < Duration::from_secs(60), "runs took {ta:?} and {tb:?}");
    ensure!(!a.log.is_empty(), "empty event log");
    ensure!(a.log.as_bytes() == b.log.as_bytes(), "event logs differ");
    ensure!(a.manifest == b.manifest && a.manifest_json() == b.manifest_json(), "manifests differ");
    let narrations = a.outbound.iter().filter(|o| matches!(o.message(), ServerMessage::StateSnapshot(_))).count();
    ensure!(narrations > 0, "no scaled refresh happened inside the run window");
    ensure!(a.failures.is_empty(), "refresh failures: {:?}", a.failures);
    Ok(())
}

fn scale_membership() -> Check {
    let config = headless_config()?;
    let (run, elapsed) = headless_run(&config)?;
    ensure!(elapsed < Duration::from_secs(30), "run took {elapsed:?}");
    let weather =
        load_fixture_set(config.fixtures_dir.as_ref().unwrap(), Timestamp(0)).map_err(|e| e.to_string())?.weather;
    let key = assign_global_key(config.seed);
    ensure!(run.manifest.key == key.value(), "manifest key {} vs {}", run.manifest.key, key.value());

    let mut mode = mode_from_weather(&weather);
    let (mut pitched, mut plucks) = (0, 0);
    let mut last_onset = i64::MIN;
    for o in &run.outbound {
        match o.message() {
            ServerMessage::StateSnapshot(s) => {
                ensure!(s.key == key.value(), "key changed mid-run");
                mode = s.mode;
            }
            ServerMessage::NoteEvent(e) if e.kind == EventKind::NotePluck => {
                let s = e.string_index.ok_or("pluck without string")? as usize;
                ensure!(e.pitch == Some(OPEN_STRING_PITCHES[s]), "pluck on string {s} has pitch {:?}", e.pitch);
                plucks += 1;
            }
            ServerMessage::NoteEvent(e) => {
                last_onset = last_onset.max(e.onset.as_millis());
                if let Some(p) = e.pitch {
                    ensure!(
                        scale_pitches(key, mode).contains(&PitchClass::of_midi(p)),
                        "pitch {p} at {} outside {:?} {:?}",
                        e.onset,
                        key,
                        mode
                    );
                    pitched += 1;
                }
            }
            _ => {}
        }
    }
    let beats = (last_onset - run.manifest.start_ms) / 1000 + 1;
    ensure!(beats >= 64, "only {beats} beats composed");
    ensure!(pitched > 0 && plucks > 0, "{pitched} pitched events, {plucks} plucks");
    let logged = parse_event_log(&run.log).map_err(|e| e.to_string())?;
    ensure!(logged.len() == run.manifest.event_count, "log and manifest disagree");
    Ok(())
}

const PACE_TERMS: [&str; 11] =
    ["tempo", "bpm", "key", "cadence", "pace", "period", "speed", "rate", "scale", "mode", "seed"];

fn explicit_slowness() -> Check {
    for kind in ClientMessageKind::ALL {
        let (tag, fields) = kind.grammar();
        let example = kind.example();
        ensure!(example.kind() == kind, "example for {tag} has the wrong kind");
        let value = serde_json::to_value(&example).map_err(|e| e.to_string())?;
        let wire: Vec<&String> = value.as_object().unwrap().keys().filter(|k| *k != "type").collect();
        ensure!(wire.len() == fields.len(), "{tag}: wire fields {wire:?} vs grammar {fields:?}");
        for name in std::iter::once(tag).chain(fields.iter().copied()) {
            for term in PACE_TERMS {
                ensure!(!name.split('_').any(|p| p == term), "{tag}.{name} touches {term}");
            }
        }
    }
    for frame in [
        r#"{"type":"set_tempo","tempo_bpm":120}"#,
        r#"{"type":"set_key","key":1}"#,
        r#"{"type":"set_cadence","layer":"nature","period":1}"#,
        r#"{"type":"set_time_scale","factor":1000}"#,
    ] {
        ensure!(parse_client_frame(frame).is_err(), "accepted {frame}");
    }

    // Drive a live session with hostile frames and check nothing paced moved.
    let mut config = headless_config()?;
    config.library_sounds = 60;
    config.providers.embedding_dimension = 32;
    let services = Arc::new(Services::offline(&config).map_err(|e| e.to_string())?);
    let t0 = Timestamp::parse_rfc3339(&config.start_time).unwrap();
    let mut s = Session::start(&config, services, t0).map_err(|e| e.to_string())?;
    let before = (s.composition().global_key(), s.composition().tempo_bpm(), s.time_scale());
    let cadences: Vec<_> = s.layers().iter().map(|l| (l.id, l.pace_rank, l.cadence)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..500 {
        s.advance(Timestamp(t0.as_millis() + i * 33)).map_err(|e| e.to_string())?;
        let frame = match i % 4 {
            0 => r#"{"type":"pointer_update","hand_id":0,"x":0.5,"y":0.5,"tempo_bpm":240,"key":5,"mode":"upbeat"}"#
                .into(),
            1 => r#"{"type":"set_tempo","tempo_bpm":240}"#.into(),
            _ => serde_json::to_string(&ClientMessage::PointerUpdate {
                hand_id: rng.random_range(0..2),
                x: rng.random(),
                y: rng.random(),
                client_time: Some(rng.random_range(0.0..1e6)),
            })
            .unwrap(),
        };
        for o in s.handle_frame(&frame) {
            ensure!(
                !matches!(o, Outbound::Broadcast(ServerMessage::StateSnapshot(_))),
                "input triggered a scene change"
            );
        }
    }
    let after = (s.composition().global_key(), s.composition().tempo_bpm(), s.time_scale());
    ensure!(before == after, "pace changed: {before:?} -> {after:?}");
    let cadences_after: Vec<_> = s.layers().iter().map(|l| (l.id, l.pace_rank, l.cadence)).collect();
    ensure!(cadences == cadences_after, "layer cadence changed");
    Ok(())
}

fn key_distribution() -> Check {
    let n = 12_000;
    let mut counts = [0u32; 12];
    for seed in 0..n as u64 {
        counts[assign_global_key(seed).value() as usize] += 1;
    }
    let expected = n as f64 / 12.0;
    for (pc, &c) in counts.iter().enumerate() {
        ensure!((c as f64 - expected).abs() <= 0.05 * expected, "pitch class {pc}: {c} draws, outside {expected} ± 5%");
    }
    Ok(())
}

fn narration_contract() -> Check {
    let dir = repo().join("fixtures/canberra");
    let set = load_fixture_set(&dir, Timestamp(0)).map_err(|e| e.to_string())?;
    let stub = StubTextGen::new(42);
    for layer in PaceLayer::defaults() {
        let snapshot = &set.snapshots[&layer.id];
        let n = narrate(&layer, snapshot, &stub, Timestamp(0)).map_err(|e| format!("{:?}: {e}", layer.id))?;
        ensure!(!n.sentence.trim().is_empty(), "{:?}: empty sentence", layer.id);
        for l in &n.emotion_labels {
            ensure!(!l.is_empty() && normalize_label(l) == *l, "{:?}: label {l:?} not normalized", layer.id);
        }
        let again = narrate(&layer, snapshot, &stub, Timestamp(0)).map_err(|e| e.to_string())?;
        ensure!(again == n, "{:?}: stub narration not reproducible", layer.id);
    }

    let want = ["calm", "rising", "heavy concern"];
    let corpus = [
        "calm, rising, heavy concern",
        "Calm, Rising, Heavy Concern",
        "calm; rising; heavy concern",
        "calm | rising | heavy concern",
        "calm / rising / heavy concern",
        "calm, rising and heavy concern",
        "calm, rising, and heavy concern",
        "1. calm\n2. rising\n3. heavy concern",
        "1) calm 2) rising 3) heavy concern",
        "1. calm 2. rising 3. heavy concern",
        "- calm\n- rising\n- heavy concern",
        "* Calm\n* Rising\n* Heavy concern",
        "• calm\n• rising\n• heavy concern",
        "\"calm\", \"rising\", \"heavy concern\"",
        "[calm, rising, heavy concern]",
        "Here are three words: calm, rising, heavy concern",
        "Emotions: Calm, Rising, Heavy concern.",
        "calm,rising,heavy concern",
        "  calm ,  rising ,  heavy   concern  \n",
        "calm\nrising\nheavy concern",
    ];
    ensure!(corpus.len() == 20, "corpus has {} variants", corpus.len());
    for (i, text) in corpus.iter().enumerate() {
        let got = parse_labels(text).map_err(|e| format!("variant {i} {text:?}: {e}"))?;
        ensure!(got == want, "variant {i} {text:?} parsed as {got:?}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("rule tables", rule_tables),
        ("pluck mapping", pluck_mapping),
        ("cosine similarity suite", cosine_suite),
        ("matcher oracle equivalence", matcher_oracle),
        ("crossing-detection oracle", crossing_oracle),
        ("end-to-end deterministic replay", deterministic_replay),
        ("scale membership", scale_membership),
        ("explicit slowness", explicit_slowness),
        ("key distribution", key_distribution),
        ("narration contract", narration_contract),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let result = check();
        let ms = started.elapsed().as_millis();
        match result {
            Ok(()) => println!("PASS {name} ({ms} ms)"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({ms} ms): {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
