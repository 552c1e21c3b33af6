//! Phonetic respelling: TTS input text that reflects how a speaker would
//! pronounce a sentence, paired with the untouched transcript as ASR target.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::filter::char_allowed;
use super::llm::{LlmClient, ModelConfig, Task};
use super::prompts::PromptTemplates;
use super::{AugmentError, Warning};
use crate::corpus::Sentence;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RespelledPair {
    pub sentence_id: String,
    pub tts_text: String,
    pub asr_target: String,
}

/// Asks `client` for a respelling of `s`. Output outside the language's
/// character set, or empty output, falls back to the canonical text.
pub fn respell(
    s: &Sentence,
    client: &dyn LlmClient,
    model: &ModelConfig,
    templates: &PromptTemplates,
) -> Result<(RespelledPair, Option<Warning>), AugmentError> {
    let prompt = templates.respell.render(&[("text", &s.raw_text)])?;
    let req = model.request(prompt, Task::Respell { text: s.raw_text.clone() });
    let out = client.complete(&req)?;
    let candidate = out.trim();
    let mut pair = RespelledPair {
        sentence_id: s.id.clone(),
        tts_text: candidate.to_owned(),
        asr_target: s.raw_text.clone(),
    };
    let reason = if candidate.is_empty() {
        Some("empty respelling".to_owned())
    } else if candidate.contains('\n') {
        Some("multi-line respelling".to_owned())
    } else { candidate.chars().find(|&c| !char_allowed(&s.lang, c)).map(|bad| format!("respelling contains disallowed character {bad:?} (U+{:04X})", bad as u32)) };
    let warning = reason.map(|message| {
        pair.tts_text = s.raw_text.clone();
        Warning {
            stage: "respell".into(),
            sentence_id: Some(s.id.clone()),
            message: format!("{message}; using canonical text"),
        }
    });
    Ok((pair, warning))
}

/// One line of the text side of a training manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixEntry {
    pub sentence_id: String,
    pub tts_text: String,
    pub asr_target: String,
    pub respelled: bool,
}

/// Number of respelled entries for `n` sentences at `ratio`.
pub fn respelled_count(n: usize, ratio: f64) -> usize {
    // The epsilon keeps e.g. 0.6 * 10 = 5.999... from flooring to 5.
    ((ratio * n as f64) + 1e-9).floor() as usize
}

/// Chooses `⌊ratio·N⌋` of the canonical sentences, by seeded sample, to be
/// voiced from their respelling. Order follows `canonical`. Sentences
/// without a pair are never chosen; if fewer than `⌊ratio·N⌋` have pairs,
/// all of those are used.
pub fn mix_respelled(
    pairs: &[RespelledPair],
    canonical: &[Sentence],
    ratio: f64,
    seed: u64,
) -> Result<Vec<MixEntry>, AugmentError> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(AugmentError::InvalidPlan(format!("respelling ratio {ratio} outside [0, 1]")));
    }
    let by_id: HashMap<&str, &RespelledPair> = pairs.iter().map(|p| (p.sentence_id.as_str(), p)).collect();
    let eligible: Vec<usize> = canonical
        .iter()
        .enumerate()
        .filter(|(_, s)| by_id.contains_key(s.id.as_str()))
        .map(|(i, _)| i)
        .collect();
    let want = respelled_count(canonical.len(), ratio).min(eligible.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; canonical.len()];
    for k in sample(&mut rng, eligible.len(), want) {
        chosen[eligible[k]] = true;
    }
    Ok(canonical
        .iter()
        .zip(chosen)
        .map(|(s, respelled)| MixEntry {
            sentence_id: s.id.clone(),
            tts_text: if respelled {
                by_id[s.id.as_str()].tts_text.clone()
            } else {
                s.raw_text.clone()
            },
            asr_target: s.raw_text.clone(),
            respelled,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::mock::MockLlm;
    use crate::corpus::NormalizationRules;

    struct Fixed(&'static str);
    impl LlmClient for Fixed {
        fn complete(&self, _: &super::super::llm::ChatRequest) -> Result<String, AugmentError> {
            Ok(self.0.into())
        }
    }

    fn sent(id: &str, text: &str) -> Sentence {
        Sentence::new(id, text, "en", &NormalizationRules::default()).unwrap()
    }

    #[test]
    fn accepts_hyphenated_respelling() {
        let s = sent("1", "The Boeing is at gate seven.");
        let (p, w) = respell(&s, &MockLlm::new(0), &ModelConfig::default(), &PromptTemplates::default()).unwrap();
        assert!(w.is_none());
        assert!(p.tts_text.contains("Bo-in"), "{}", p.tts_text);
        assert!(p.tts_text.contains("sevem"), "{}", p.tts_text);
        assert_eq!(p.asr_target, s.raw_text);
    }

    #[test]
    fn ipa_falls_back_with_warning() {
        let s = sent("1", "The aircraft is ready.");
        let (p, w) = respell(&s, &Fixed("ðə eer-kraft"), &ModelConfig::default(), &PromptTemplates::default()).unwrap();
        assert_eq!(p.tts_text, s.raw_text);
        assert!(w.unwrap().message.contains("disallowed"));
    }

    #[test]
    fn mix_counts() {
        let canon: Vec<_> = (0..10).map(|i| sent(&i.to_string(), &format!("sentence number {i}"))).collect();
        let pairs: Vec<_> = canon
            .iter()
            .map(|s| RespelledPair {
                sentence_id: s.id.clone(),
                tts_text: format!("{} ya", s.raw_text),
                asr_target: s.raw_text.clone(),
            })
            .collect();
        for (ratio, want) in [(0.0, 0), (0.6, 6), (1.0, 10)] {
            let m = mix_respelled(&pairs, &canon, ratio, 7).unwrap();
            assert_eq!(m.iter().filter(|e| e.respelled).count(), want);
            assert!(m.iter().zip(&canon).all(|(e, s)| e.asr_target == s.raw_text));
            assert_eq!(m, mix_respelled(&pairs, &canon, ratio, 7).unwrap());
        }
        assert!(mix_respelled(&pairs, &canon, 1.5, 0).is_err());
    }
}
