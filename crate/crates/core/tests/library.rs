use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sonifier_core::library::{
    generate_fixture_library, FixtureParams, LabelingSession, SoundAsset, SoundLibrary, LABEL_VOCABULARY,
};
use sonifier_core::semantic::HashEmbedder;
use sonifier_core::Timestamp;

fn empty_library(n: u32, dim: usize) -> SoundLibrary {
    let mut lib = SoundLibrary::new(dim);
    for id in 1..=n {
        lib.insert_sound(SoundAsset { sound_id: id, file_ref: format!("s/{id}.wav"), duration_s: 2.5, labels: vec![] })
            .unwrap();
    }
    lib
}

#[test]
fn assignment_frequency_is_uniform() {
    let lib = empty_library(10, 4);
    let mut session = LabelingSession::new(2024);
    let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
    let n = 10_000;
    for _ in 0..n {
        *counts.entry(session.next_assignment(&lib, "fresh").unwrap()).or_default() += 1;
    }
    assert_eq!(counts.len(), 10);
    let expected = n as f64 / 10.0;
    let chi2: f64 = counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 9 degrees of freedom, p = 0.001.
    assert!(chi2 < 27.88, "chi-square {chi2}");
    for (id, &c) in &counts {
        let share = c as f64 / n as f64;
        assert!((share - 0.1).abs() <= 0.05, "sound {id} drawn {c} times");
    }
}

#[test]
fn mean_words_matches_recount() {
    let emb = HashEmbedder::new(16, 3);
    let mut lib = empty_library(20, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut stored: BTreeSet<(u32, String, String)> = BTreeSet::new();
    for i in 0..100 {
        let sound = rng.random_range(1..=20);
        let text = LABEL_VOCABULARY[rng.random_range(0..LABEL_VOCABULARY.len())];
        let labeler = format!("l{}", i % 7);
        lib.add_label(sound, text, &labeler, &emb, Timestamp(i)).unwrap();
        stored.insert((sound, labeler, text.to_string()));
    }
    let words: Vec<usize> = stored.iter().map(|(_, _, t)| t.split_whitespace().count()).collect();
    let mean = words.iter().sum::<usize>() as f64 / words.len() as f64;
    let stats = lib.coverage_stats();
    assert!((stats.mean_words_per_label - mean).abs() < 1e-12, "{} vs {mean}", stats.mean_words_per_label);
    let labeled: BTreeSet<u32> = stored.iter().map(|(s, _, _)| *s).collect();
    assert_eq!(stats.labeled_sounds, labeled.len());
}

#[test]
fn reference_shape_counts() {
    let emb = HashEmbedder::new(32, 0);
    let lib = generate_fixture_library(FixtureParams::with_default_shape(1050, 9), &emb).unwrap();
    let stats = lib.coverage_stats();
    assert_eq!(stats.total_sounds, 1050);
    assert_eq!(stats.multi_labeled_sounds, 219);
    assert_eq!(stats.labeled_sounds, 1050);
}

#[test]
fn randomized_corpus_recount() {
    let emb = HashEmbedder::new(8, 1);
    for seed in 0..5 {
        let params = FixtureParams { sounds: 60 + seed as u32 * 7, multi_labeled: 11 + seed as u32, labelers: 9, seed };
        let lib = generate_fixture_library(params, &emb).unwrap();
        let stats = lib.coverage_stats();
        let labeled = lib.sounds().filter(|s| !s.labels.is_empty()).count();
        let multi = lib.sounds().filter(|s| s.labels.len() > 1).count();
        let all: Vec<usize> = lib.sounds().flat_map(|s| s.labels.iter().map(|l| l.text.split(' ').count())).collect();
        assert_eq!(stats.total_sounds, lib.sounds().count());
        assert_eq!(stats.labeled_sounds, labeled);
        assert_eq!(stats.multi_labeled_sounds, multi);
        assert_eq!(multi, params.multi_labeled as usize);
        let mean = all.iter().sum::<usize>() as f64 / all.len() as f64;
        assert!((stats.mean_words_per_label - mean).abs() < 1e-12);
        assert!(lib.sounds().flat_map(|s| &s.labels).all(|l| l.embedding.dimension() == 8));
    }
}

#[test]
fn persistence_round_trip_through_file() {
    let emb = HashEmbedder::new(12, 4);
    let lib = generate_fixture_library(FixtureParams::with_default_shape(80, 4), &emb).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("library.jsonl");
    lib.save(&path).unwrap();
    let back = SoundLibrary::load(&path, 12).unwrap();
    assert_eq!(back.coverage_stats(), lib.coverage_stats());
    for (a, b) in lib.sounds().zip(back.sounds()) {
        assert_eq!(a, b);
    }
    assert!(SoundLibrary::load(&path, 13).is_err());
}
