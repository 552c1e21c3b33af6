//! Text-to-speech adapters. Each writes one WAV file per request.

use std::fs;
use std::path::Path;
use std::process::Command;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::wav;
use crate::corpus::{tokenize, NormalizationRules};
use crate::http::{HttpConfig, JsonEndpoint, TransportError};
use crate::selector::DEFAULT_WPM;

#[derive(Debug, Error)]
pub enum TtsError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("tts command {program}: {message}")]
    Command { program: String, message: String },
    #[error("{path}: {message}")]
    Output { path: String, message: String },
}

pub trait TtsBackend: Sync {
    fn synthesize(&self, text: &str, speaker: &str, out: &Path) -> Result<(), TtsError>;
}

/// Posts `{"text", "speaker"}` and writes the response body, which must be a WAV file.
pub struct HttpTts {
    endpoint: JsonEndpoint,
}

#[derive(Serialize)]
struct TtsRequest<'a> {
    text: &'a str,
    speaker: &'a str,
}

impl HttpTts {
    pub fn new(config: HttpConfig) -> Result<Self, TtsError> {
        Ok(Self {
            endpoint: JsonEndpoint::new(config)?,
        })
    }
}

fn write_checked(out: &Path, bytes: &[u8]) -> Result<(), TtsError> {
    let err = |message: String| TtsError::Output {
        path: out.display().to_string(),
        message,
    };
    wav::parse_wav(bytes).map_err(|e| err(e.to_string()))?;
    fs::write(out, bytes).map_err(|e| err(e.to_string()))
}

impl TtsBackend for HttpTts {
    fn synthesize(&self, text: &str, speaker: &str, out: &Path) -> Result<(), TtsError> {
        let bytes = self.endpoint.post_bytes(&TtsRequest { text, speaker })?;
        write_checked(out, &bytes)
    }
}

/// Runs an external program. `{text}`, `{speaker}` and `{out}` in the
/// argument list are replaced per request; each argument is passed as-is,
/// without a shell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandTts {
    pub program: String,
    pub args: Vec<String>,
}

impl Default for CommandTts {
    fn default() -> Self {
        Self {
            program: "tts-cmd".into(),
            args: vec!["--text".into(), "{text}".into(), "--out".into(), "{out}".into()],
        }
    }
}

impl TtsBackend for CommandTts {
    fn synthesize(&self, text: &str, speaker: &str, out: &Path) -> Result<(), TtsError> {
        let out_s = out.display().to_string();
        let args: Vec<String> = self
            .args
            .iter()
            .map(|a| a.replace("{text}", text).replace("{speaker}", speaker).replace("{out}", &out_s))
            .collect();
        let err = |message: String| TtsError::Command {
            program: self.program.clone(),
            message,
        };
        let status = Command::new(&self.program)
            .args(&args)
            .output()
            .map_err(|e| err(e.to_string()))?;
        if !status.status.success() {
            return Err(err(format!(
                "{}: {}",
                status.status,
                String::from_utf8_lossy(&status.stderr).trim()
            )));
        }
        let bytes = fs::read(out).map_err(|e| err(format!("no output file: {e}")))?;
        wav::parse_wav(&bytes).map(|_| ()).map_err(|e| err(e.to_string()))
    }
}

/// Silent audio whose length is the heuristic speaking-rate estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockTts {
    pub sample_rate: u32,
    pub wpm: f64,
}

impl Default for MockTts {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            wpm: DEFAULT_WPM,
        }
    }
}

impl MockTts {
    pub fn seconds_for(&self, text: &str) -> f64 {
        tokenize(text, &NormalizationRules::default()).len() as f64 / (self.wpm / 60.0)
    }
}

impl TtsBackend for MockTts {
    fn synthesize(&self, text: &str, _speaker: &str, out: &Path) -> Result<(), TtsError> {
        write_checked(out, &wav::silent_wav(self.sample_rate, self.seconds_for(text)))
    }
}

pub fn default_speakers() -> Vec<String> {
    (1..=19).map(|i| format!("en_us_{i:02}")).collect()
}

/// One speaker per entry, drawn with replacement from `speakers`.
pub fn draw_speakers(speakers: &[String], n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| speakers.choose(&mut rng).cloned().unwrap_or_default())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn speaker_draw_is_reproducible() {
        let s = default_speakers();
        assert_eq!(s.len(), 19);
        let a = draw_speakers(&s, 50, 9);
        assert_eq!(a, draw_speakers(&s, 50, 9));
        assert_ne!(a, draw_speakers(&s, 50, 10));
    }

    #[test]
    fn mock_duration_matches_estimate() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("a.wav");
        let tts = MockTts::default();
        let text = "one two three four five six seven eight";
        tts.synthesize(text, "x", &out).unwrap();
        assert_eq!(wav::read_wav_duration(&out).unwrap(), 3.0);
        assert_eq!(tts.seconds_for(text), 3.0);
    }

    #[test]
    fn command_adapter() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src.wav");
        fs::write(&src, wav::silent_wav(8_000, 0.5)).unwrap();
        let tts = CommandTts {
            program: "cp".into(),
            args: vec![src.display().to_string(), "{out}".into()],
        };
        let out = dir.path().join("out.wav");
        tts.synthesize("hello", "s", &out).unwrap();
        assert_eq!(wav::read_wav_duration(&out).unwrap(), 0.5);
        let missing = CommandTts {
            program: "definitely-not-a-tts-binary".into(),
            args: vec![],
        };
        assert!(missing.synthesize("x", "s", &out).is_err());
    }
}
