use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

/// One line of an episode trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub episode: u64,
    pub t: usize,
    pub rb: usize,
    pub rate: f64,
    pub success: bool,
    pub skipped: bool,
    pub reward: f64,
    pub throughput: f64,
    pub v_rb: Vec<u8>,
    pub v_rate: Vec<f64>,
}

pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, record: &TraceRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn read_trace<R: BufRead>(input: R) -> io::Result<Vec<TraceRecord>> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|line| serde_json::from_str(&line?).map_err(io::Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip() {
        let rec = TraceRecord {
            episode: 3,
            t: 1,
            rb: 2,
            rate: 1.25,
            success: true,
            skipped: false,
            reward: -0.5,
            throughput: 1.25,
            v_rb: vec![1, 0, 1],
            v_rate: vec![2.0, 0.0, 1.5],
        };
        let mut w = TraceWriter::new(Vec::new());
        w.write(&rec).unwrap();
        w.write(&rec).unwrap();
        let bytes = w.into_inner();
        assert_eq!(bytes.iter().filter(|b| **b == b'\n').count(), 2);
        assert_eq!(read_trace(&bytes[..]).unwrap(), vec![rec.clone(), rec]);
    }
}
