use sha2::{Digest, Sha256};

use super::labels::parse_labels;
use super::prompt::{serialize_payload_for_prompt, PromptTemplate};
use super::providers::{with_retry, TextGenProvider};
use super::{LayerNarration, SemanticError, SnapshotRef};
use crate::ingestion::DataSnapshot;
use crate::layers::PaceLayer;
use crate::time::Timestamp;

/// Two-stage narration: explain the data in a sentence, then distil the
/// sentence into three emotion labels. A label-parse failure gets one more
/// try with the strict prompt.
pub fn narrate(
    layer: &PaceLayer,
    snapshot: &DataSnapshot,
    gen: &dyn TextGenProvider,
    now: Timestamp,
) -> Result<LayerNarration, SemanticError> {
    let name = layer.id.display_name();
    let data = serialize_payload_for_prompt(snapshot);
    let explain = PromptTemplate::EXPLAIN_DATA.render(&[
        ("layer", name),
        ("locale", &layer.source.locale),
        ("data", data.trim_end()),
    ])?;
    let sentence = with_retry(|| gen.generate(&explain))?.trim().to_string();
    if sentence.is_empty() {
        return Err(SemanticError::GenerationFailed { attempts: 1, detail: "empty sentence".into() });
    }

    let values = [("layer", name), ("sentence", sentence.as_str())];
    let labels_prompt = PromptTemplate::EMOTION_LABELS.render(&values)?;
    let labels = match parse_labels(&with_retry(|| gen.generate(&labels_prompt))?) {
        Ok(labels) => labels,
        Err(SemanticError::LabelParse(_)) => {
            let strict = PromptTemplate::EMOTION_LABELS_STRICT.render(&values)?;
            parse_labels(&with_retry(|| gen.generate(&strict))?)?
        }
        Err(e) => return Err(e),
    };

    let digest = Sha256::digest(snapshot.raw.as_bytes());
    Ok(LayerNarration {
        layer_id: layer.id,
        sentence,
        emotion_labels: labels,
        generated_at: now,
        source_snapshot_ref: SnapshotRef {
            layer_id: snapshot.layer_id,
            fetched_at: snapshot.fetched_at,
            digest: hex::encode(&digest[..8]),
        },
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Mutex;

    use super::*;
    use crate::ingestion::{Co2Month, Payload, Provenance};
    use crate::layers::LayerId;
    use crate::semantic::{ProviderError, StubTextGen};

    fn nature() -> (PaceLayer, DataSnapshot) {
        let layer = PaceLayer::defaults().remove(5);
        let snap = DataSnapshot {
            layer_id: LayerId::Nature,
            raw: "{}".into(),
            payload: Payload::Co2 {
                location: None,
                unit: "ppm".into(),
                series: vec![Co2Month { month: "2023-01".into(), ppm: 419.1 }],
            },
            fetched_at: Timestamp(3),
            provenance: Provenance::Fixture,
        };
        (layer, snap)
    }

    /// Replies with queued responses in order.
    struct Scripted(Mutex<Vec<Result<String, ProviderError>>>);

    impl Scripted {
        fn new(replies: Vec<Result<&str, &str>>) -> Self {
            Scripted(Mutex::new(
                replies
                    .into_iter()
                    .rev()
                    .map(|r| r.map(str::to_string).map_err(|e| ProviderError::new("scripted", e)))
                    .collect(),
            ))
        }
    }

    impl TextGenProvider for Scripted {
        fn provider_id(&self) -> &str {
            "scripted"
        }

        fn generate(&self, _: &str) -> Result<String, ProviderError> {
            self.0.lock().unwrap().pop().unwrap_or_else(|| Err(ProviderError::new("scripted", "exhausted")))
        }
    }

    #[test]
    fn stub_is_deterministic() {
        let (layer, snap) = nature();
        let a = narrate(&layer, &snap, &StubTextGen::new(1), Timestamp(9)).unwrap();
        let b = narrate(&layer, &snap, &StubTextGen::new(1), Timestamp(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.emotion_labels, ["calm", "rising", "heavy concern"]);
        assert!(!a.sentence.is_empty());
        assert_eq!(a.source_snapshot_ref.fetched_at, Timestamp(3));
        let c = narrate(&layer, &snap, &StubTextGen::new(2), Timestamp(9)).unwrap();
        assert_ne!(a.sentence, c.sentence);
    }

    #[test]
    fn provider_labels_are_normalized() {
        let (layer, snap) = nature();
        let gen = Scripted::new(vec![Ok("CO2 climbs."), Ok("Calm, Rising, HEAVY")]);
        let n = narrate(&layer, &snap, &gen, Timestamp(0)).unwrap();
        assert_eq!(n.emotion_labels, ["calm", "rising", "heavy"]);
    }

    #[test]
    fn unparseable_labels_retry_with_strict_prompt() {
        let (layer, snap) = nature();
        let gen = Scripted::new(vec![Ok("CO2 climbs."), Ok("I feel many things"), Ok("calm, rising, heavy")]);
        assert!(narrate(&layer, &snap, &gen, Timestamp(0)).is_ok());

        let gen = Scripted::new(vec![Ok("CO2 climbs."), Ok("many things"), Ok("still many things, truly")]);
        assert!(matches!(narrate(&layer, &snap, &gen, Timestamp(0)), Err(SemanticError::LabelParse(_))));
    }

    #[test]
    fn provider_failure_after_retry() {
        let (layer, snap) = nature();
        let gen = Scripted::new(vec![Err("503"), Ok("CO2 climbs."), Ok("a, b, c")]);
        assert!(narrate(&layer, &snap, &gen, Timestamp(0)).is_ok());
        let gen = Scripted::new(vec![Err("503"), Err("503")]);
        assert!(matches!(
            narrate(&layer, &snap, &gen, Timestamp(0)),
            Err(SemanticError::GenerationFailed { attempts: 2, .. })
        ));
    }
}
