//! The public record of a run, persisted as line-delimited JSON.
//!
//! The first line is a header echoing the full configuration and a content
//! hash of the subset design; every following line is one [`StepRecord`].
//! Unknown fields are rejected on read.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mechanism::MechanismSpec;
use crate::zo::{TaskSpec, TrainConfig};
use crate::{Error, Result};

pub const FORMAT: &str = "paczero-transcript/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Unanimity,
    Disagreement,
    ZplCoin,
    /// A non-private surrogate release.
    Surrogate,
}

/// One released bit (or surrogate value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    /// Step, starting at 1.
    pub t: usize,
    /// Direction within the step, starting at 0.
    pub k: usize,
    pub branch: Branch,
    pub q_plus: f64,
    /// Budget offered to this release after the entropy cap.
    pub beta: f64,
    pub sigma: Option<f64>,
    pub released_bit: i8,
    /// Value entering the parameter update: the bit, or a surrogate's real value.
    pub release: f64,
    /// Noisy value before quantization; mechanism-internal, kept for replay.
    pub pre_quant_release: Option<f64>,
    pub beta_used: f64,
    pub cumulative_mi: f64,
    pub unanimity_count_so_far: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptHeader {
    pub format: String,
    pub task: TaskSpec,
    pub mechanism: MechanismSpec,
    pub train: TrainConfig,
    pub design_seed: u64,
    pub design_hash: String,
    pub num_records: usize,
    pub num_subsets: usize,
    pub private: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header(TranscriptHeader),
    Step(StepRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub header: TranscriptHeader,
    pub records: Vec<StepRecord>,
}

impl Transcript {
    pub fn new(header: TranscriptHeader, records: Vec<StepRecord>) -> Self {
        Self { header, records }
    }

    pub fn cumulative_mi(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cumulative_mi)
    }

    pub fn unanimity_count(&self) -> usize {
        self.records.iter().filter(|r| r.branch == Branch::Unanimity).count()
    }

    /// `n_free / (T·K)`: the fraction of releases that cost nothing.
    pub fn unanimity_fraction(&self) -> f64 {
        if self.records.is_empty() {
            0.0
        } else {
            self.unanimity_count() as f64 / self.records.len() as f64
        }
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, &LineRef::Header(&self.header))?;
        out.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut out, &LineRef::Step(r))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut header = None;
        let mut records = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line)
                .map_err(|e| Error::Schema(format!("line {}: {e}", n + 1)))?;
            match (parsed, header.is_some()) {
                (Line::Header(h), false) => header = Some(h),
                (Line::Header(_), true) => return Err(Error::Schema(format!("line {}: second header", n + 1))),
                (Line::Step(_), false) => return Err(Error::Schema("transcript must start with a header".into())),
                (Line::Step(r), true) => records.push(r),
            }
        }
        let header = header.ok_or_else(|| Error::Schema("empty transcript".into()))?;
        if header.format != FORMAT {
            return Err(Error::Schema(format!("unsupported format `{}`", header.format)));
        }
        Ok(Self { header, records })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LineRef<'a> {
    Header(&'a TranscriptHeader),
    Step(&'a StepRecord),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::MechanismSpec;

    fn header() -> TranscriptHeader {
        TranscriptHeader {
            format: FORMAT.into(),
            task: TaskSpec::default(),
            mechanism: MechanismSpec::paczero_zpl(),
            train: TrainConfig::default(),
            design_seed: 3,
            design_hash: "00".into(),
            num_records: 128,
            num_subsets: 126,
            private: true,
        }
    }

    fn record(t: usize) -> StepRecord {
        StepRecord {
            t,
            k: 0,
            branch: Branch::Disagreement,
            q_plus: 0.1 + 1e-17 * t as f64,
            beta: 3.3e-4,
            sigma: Some(12.345678901234567),
            released_bit: -1,
            release: -1.0,
            pre_quant_release: Some(-0.7071067811865475),
            beta_used: 3.3e-4,
            cumulative_mi: 3.3e-4 * t as f64,
            unanimity_count_so_far: 0,
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let tr = Transcript::new(header(), (1..=5).map(record).collect());
        let text = tr.to_jsonl();
        let back = Transcript::read_from(text.as_bytes()).unwrap();
        assert_eq!(back, tr);
        assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let tr = Transcript::new(header(), vec![record(1)]);
        let text = tr.to_jsonl().replace("\"beta_used\"", "\"extra\":1,\"beta_used\"");
        assert!(matches!(Transcript::read_from(text.as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn missing_fields_are_rejected() {
        let tr = Transcript::new(header(), vec![record(1)]);
        let text = tr.to_jsonl().replace("\"beta_used\":0.00033,", "");
        assert!(matches!(Transcript::read_from(text.as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn header_must_come_first() {
        let tr = Transcript::new(header(), vec![record(1)]);
        let text = tr.to_jsonl();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.swap(0, 1);
        assert!(Transcript::read_from(lines.join("\n").as_bytes()).is_err());
        assert!(Transcript::read_from(&b""[..]).is_err());
    }
}
