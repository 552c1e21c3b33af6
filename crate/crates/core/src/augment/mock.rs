//! Offline LLM backend: deterministic template filling from word lists.
//!
//! Output depends only on the seed and the request, never on call order, so
//! runs are reproducible under any concurrency.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::llm::{ChatRequest, LlmClient, Task};
use super::AugmentError;

#[derive(Debug, Clone, Copy, Default)]
pub struct MockLlm {
    pub seed: u64,
}

const SETTINGS: &[&str] = &[
    "a routine morning briefing",
    "a handover between shifts",
    "an unexpected equipment fault",
    "a busy peak-hour period",
    "a training session for new staff",
    "a delayed schedule",
    "a weather-related disruption",
    "a safety inspection",
    "a night operation with reduced staff",
    "a coordination call with another team",
];

const ROLES: &[&str] = &[
    "two operators",
    "a supervisor and a trainee",
    "a technician and a dispatcher",
    "a crew and the control room",
    "a duty manager and a field engineer",
];

const EN_FRAMES: &[&str] = &[
    "Please confirm the {term} before we move to {place}.",
    "We need a quick check on the {term} at {place}, {name}.",
    "{name}, the {term} is ready and we are waiting on {place}.",
    "Copy that, the {term} will be handled at {place} in {num} minutes.",
    "Can you read back the {term} for {place} one more time?",
    "Hold position, the {term} near {place} is still being reviewed.",
    "Understood, {name} will report the {term} status from {place}.",
    "Stand by for the {term} update, expect about {num} minutes at {place}.",
    "The {term} has been logged, {name} is heading to {place} now.",
    "Negative, the {term} at {place} does not match the plan yet.",
    "Request permission to start the {term} procedure at {place}.",
    "Roger, {num} units are assigned to the {term} at {place}.",
];

const NAMES: &[&str] = &["Alpha", "Bravo", "Charlie", "Delta", "Echo", "Foxtrot", "Kilo", "Lima", "Sierra", "Tango"];

const PLACES: &[&str] = &[
    "gate seven",
    "the north ramp",
    "bay twelve",
    "the east apron",
    "stand three",
    "the main hangar",
    "the west terminal",
    "the service road",
];

const NUMS: &[&str] = &["two", "three", "five", "seven", "ten", "fifteen", "twenty"];

const JA_FRAMES: &[&str] = &[
    "{term} の状態を確認してください、{num}番です。",
    "これから {term} の手順を始めます、準備をお願いします。",
    "{term} について、管制室に連絡してください。",
    "了解しました、{term} は{num}分後に完了します。",
];

const ZH_FRAMES: &[&str] = &[
    "请确认{term}的状态，编号{num}。",
    "我们现在开始{term}程序，请做好准备。",
    "关于{term}，请联系控制室。",
    "收到，{term}将在{num}分钟后完成。",
];

const FILLERS: &[&str] = &["Okay,", "So,", "Alright,", "Right,", "Well,", "Just to be clear,"];
const TAILS: &[&str] = &["over.", "thanks.", "please advise.", "copy?", "as briefed."];

const SWAPS: &[(&str, &str)] = &[
    ("Please confirm", "Could you verify"),
    ("confirm", "verify"),
    ("ready", "prepared"),
    ("waiting on", "holding for"),
    ("check", "look"),
    ("Understood", "Got it"),
    ("Roger", "Copy"),
    ("now", "right away"),
    ("still", "currently"),
    ("update", "report"),
];

const RESPELLINGS: &[(&str, &str)] = &[
    ("seven", "sevem"),
    ("boeing", "bo-in"),
    ("the", "ze"),
    ("this", "zis"),
    ("that", "zat"),
    ("them", "zem"),
    ("with", "wiz"),
    ("three", "tree"),
    ("think", "tink"),
    ("aircraft", "eer-kraft"),
    ("going", "goin'"),
    ("nothing", "nuffin'"),
    ("something", "somefin'"),
    ("and", "an'"),
    ("twenty", "twenny"),
    ("probably", "prob'ly"),
];

impl MockLlm {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn rng(&self, req: &ChatRequest) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(req.cache_key().as_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().expect("non-empty list")
}

fn fill(rng: &mut ChaCha8Rng, frame: &str, term: &str) -> String {
    let term = if term.is_empty() { "schedule" } else { term };
    let name = pick(rng, NAMES);
    let place = pick(rng, PLACES);
    let num = pick(rng, NUMS);
    frame
        .replace("{term}", term)
        .replace("{name}", name)
        .replace("{place}", place)
        .replace("{num}", num)
}

fn numbered(items: &[String]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {s}", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Maximal runs of ASCII letters, hyphens, and apostrophes; the English term
/// embedded in a non-English sentence.
fn latin_runs(text: &str) -> Vec<&str> {
    text.split(|c: char| !(c.is_ascii_alphabetic() || c == '-' || c == '\''))
        .filter(|w| w.chars().any(|c| c.is_ascii_alphabetic()))
        .collect()
}

fn match_case(original: &str, replacement: &str) -> String {
    if original.chars().next().is_some_and(char::is_uppercase) {
        let mut cs = replacement.chars();
        cs.next()
            .map(|c| c.to_uppercase().chain(cs).collect())
            .unwrap_or_default()
    } else {
        replacement.to_owned()
    }
}

/// Word-level respelling rules; non-word characters pass through.
pub fn respell_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        let lower = word.to_lowercase();
        match RESPELLINGS.iter().find(|(w, _)| *w == lower) {
            Some((_, r)) => out.push_str(&match_case(word, r)),
            None => out.push_str(word),
        }
        word.clear();
    };
    for c in text.chars() {
        if c.is_alphabetic() {
            word.push(c);
        } else {
            flush(&mut word, &mut out);
            out.push(c);
        }
    }
    flush(&mut word, &mut out);
    out
}

fn paraphrase_one(rng: &mut ChaCha8Rng, text: &str) -> String {
    let mut t = text.to_owned();
    let mut swapped = false;
    for (from, to) in SWAPS {
        if t.contains(from) && rng.gen_bool(0.5) {
            t = t.replacen(from, to, 1);
            swapped = true;
        }
    }
    if !swapped || rng.gen_bool(0.5) {
        let f = pick(rng, FILLERS);
        let mut cs = t.chars();
        let first = cs.next().map(|c| c.to_lowercase().chain(cs).collect::<String>()).unwrap_or_default();
        t = format!("{f} {first}");
    }
    if rng.gen_bool(0.3) {
        let trimmed = t.trim_end_matches(['.', '?', '!']);
        t = format!("{trimmed}, {}", pick(rng, TAILS));
    }
    t
}

impl LlmClient for MockLlm {
    fn complete(&self, req: &ChatRequest) -> Result<String, AugmentError> {
        let mut rng = self.rng(req);
        let text = match &req.task {
            Task::Unspecified => req
                .messages
                .last()
                .and_then(|m| m.content.lines().next())
                .unwrap_or_default()
                .to_owned(),
            Task::Scenarios { count, term } => {
                let items: Vec<String> = (0..*count)
                    .map(|i| {
                        let about = term.as_deref().map(|t| format!(" about the {t}")).unwrap_or_default();
                        format!(
                            "During {}, {} talk{about} (variant {}).",
                            SETTINGS[(rng.gen_range(0..SETTINGS.len()) + i) % SETTINGS.len()],
                            pick(&mut rng, ROLES),
                            i + 1
                        )
                    })
                    .collect();
                numbered(&items)
            }
            Task::Generate { count, term, lang } => {
                let term = term.as_deref().unwrap_or("");
                let frames = match lang.as_str() {
                    "ja" => JA_FRAMES,
                    "zh" => ZH_FRAMES,
                    _ => EN_FRAMES,
                };
                let mut order: Vec<&str> = frames.to_vec();
                order.shuffle(&mut rng);
                let items: Vec<String> = (0..*count)
                    .map(|i| {
                        let frame = order[i % order.len()];
                        match lang.as_str() {
                            "ja" | "zh" => frame
                                .replace("{term}", if term.is_empty() { "これ" } else { term })
                                .replace("{num}", &rng.gen_range(1..20).to_string()),
                            _ => fill(&mut rng, frame, term),
                        }
                    })
                    .collect();
                numbered(&items)
            }
            Task::Translate { text, .. } => {
                let runs = latin_runs(text);
                let term = runs.first().copied().unwrap_or("");
                let frame = pick(&mut rng, EN_FRAMES);
                fill(&mut rng, frame, term)
            }
            Task::Paraphrase { count, text } => {
                // The first rewrite echoes the source, as real models sometimes do.
                let items: Vec<String> = (0..*count)
                    .map(|i| if i == 0 { text.clone() } else { paraphrase_one(&mut rng, text) })
                    .collect();
                numbered(&items)
            }
            Task::Respell { text } => respell_text(text),
        };
        Ok(text)
    }
}
