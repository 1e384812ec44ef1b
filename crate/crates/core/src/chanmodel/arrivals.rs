//! Reader and writer for BELLHOP ASCII arrival files (`.arr`).
//!
//! Two layouts are accepted. The current one starts with a quoted dimension tag
//! (`'2D'`) and stores complex delays:
//!
//! ```text
//! '2D'
//! freq
//! Nsz  zs(1..Nsz)
//! Nrz  zr(1..Nrz)
//! Nr   r(1..Nr)
//! Narrmx                        (once per source depth)
//! Narr                          (once per receiver, depth-major)
//! A  phase  delay_re  delay_im  src_angle  rcv_angle  n_top  n_bot
//! ```
//!
//! The legacy layout has `freq Nsz Nrz Nr` on the first line, bare depth/range
//! lists, and seven-field arrival rows with a real delay.
//!
//! Phases are in degrees. Depth and range lists may wrap over several lines.

use std::fmt;

use num_complex::Complex;
use thiserror::Error;

use super::{ChannelError, ChannelImpulseResponse, Endpoint, LinkId, Tap};
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Arrival {
    pub amplitude: f64,
    pub phase_deg: f64,
    /// Seconds.
    pub delay: f64,
    /// Imaginary delay part; present only in the tagged layout.
    pub delay_imag: Option<f64>,
    pub source_angle: f64,
    pub receiver_angle: f64,
    pub surface_bounces: i64,
    pub bottom_bounces: i64,
}

impl Arrival {
    pub fn gain(&self) -> Complex<f64> {
        Complex::from_polar(self.amplitude, self.phase_deg.to_radians())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceBlock {
    pub max_arrivals: usize,
    /// One arrival list per receiver, receiver depth major, range minor.
    pub receivers: Vec<Vec<Arrival>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalFile {
    /// Dimension tag without quotes (`2D`); `None` for the legacy layout.
    pub tag: Option<String>,
    pub frequency: f64,
    pub source_depths: Vec<f64>,
    pub receiver_depths: Vec<f64>,
    pub receiver_ranges: Vec<f64>,
    pub sources: Vec<SourceBlock>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("non-numeric field `{token}`")]
    NonNumeric { token: String },
    #[error("receiver declared {expected} arrivals on line {declared_at} but only {found} rows follow")]
    ArrivalCountMismatch { expected: usize, found: usize, declared_at: usize },
    #[error("arrival row has {found} fields, expected {expected}")]
    FieldCount { expected: usize, found: usize },
    #[error("expected a single arrival count, found {found} fields")]
    ExpectedCount { found: usize },
    #[error("unexpected end of file while reading {0}")]
    UnexpectedEof(&'static str),
    #[error("trailing content after the last receiver")]
    TrailingContent,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    /// 1-based line number of the offending line (one past the end for EOF).
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArrivalError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("source {source_index}, receiver {receiver}: no arrivals")]
    EmptyReceiver { source_index: usize, receiver: usize },
    #[error("source {source_index}, receiver {receiver}: {error}")]
    Channel { source_index: usize, receiver: usize, error: ChannelError },
}

struct Cursor<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
    end_line: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        let mut end_line = 1;
        let lines = text
            .lines()
            .enumerate()
            .inspect(|(i, _)| end_line = i + 2)
            .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
            .filter(|(_, toks)| !toks.is_empty())
            .collect();
        Self { lines, pos: 0, end_line }
    }

    fn peek(&self) -> Option<&(usize, Vec<&'a str>)> {
        self.lines.get(self.pos)
    }

    fn next(&mut self, what: &'static str) -> Result<(usize, Vec<&'a str>), ParseError> {
        let item =
            self.lines.get(self.pos).cloned().ok_or(ParseError { line: self.end_line, kind: ParseErrorKind::UnexpectedEof(what) })?;
        self.pos += 1;
        Ok(item)
    }

    /// `n` numbers starting with `seed` tokens, continuing onto following lines.
    fn values(&mut self, n: usize, line: usize, seed: &[&str], what: &'static str) -> Result<Vec<f64>, ParseError> {
        let mut out = Vec::with_capacity(n);
        for tok in seed {
            out.push(number(tok, line)?);
        }
        while out.len() < n {
            let (l, toks) = self.next(what)?;
            for tok in toks {
                out.push(number(tok, l)?);
            }
        }
        if out.len() != n {
            return Err(ParseError {
                line,
                kind: ParseErrorKind::MalformedHeader(format!("{what}: expected {n} values, found {}", out.len())),
            });
        }
        Ok(out)
    }
}

fn number(tok: &str, line: usize) -> Result<f64, ParseError> {
    // Fortran may emit D exponents
    tok.replace(['D', 'd'], "E")
        .parse::<f64>()
        .map_err(|_| ParseError { line, kind: ParseErrorKind::NonNumeric { token: tok.to_string() } })
}

fn integer(tok: &str, line: usize) -> Result<i64, ParseError> {
    if let Ok(v) = tok.parse::<i64>() {
        return Ok(v);
    }
    let v = number(tok, line)?;
    if v.fract() == 0.0 && v.abs() < 9.0e15 {
        Ok(v as i64)
    } else {
        Err(ParseError { line, kind: ParseErrorKind::NonNumeric { token: tok.to_string() } })
    }
}

fn count(tok: &str, line: usize) -> Result<usize, ParseError> {
    let v = integer(tok, line)?;
    usize::try_from(v).map_err(|_| ParseError { line, kind: ParseErrorKind::MalformedHeader(format!("negative count {v}")) })
}

fn header_err(line: usize, msg: impl Into<String>) -> ParseError {
    ParseError { line, kind: ParseErrorKind::MalformedHeader(msg.into()) }
}

impl ArrivalFile {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut cur = Cursor::new(text);
        let (first_line, first) = cur.next("header")?;
        let tagged = first[0].starts_with('\'') || first[0].starts_with('"');

        let (tag, frequency, source_depths, receiver_depths, receiver_ranges) = if tagged {
            if first.len() != 1 {
                return Err(header_err(first_line, "dimension tag line must hold a single token"));
            }
            let tag = first[0].trim_matches(|c| c == '\'' || c == '"').to_string();
            if tag.is_empty() {
                return Err(header_err(first_line, "empty dimension tag"));
            }
            let (fl, ftoks) = cur.next("frequency")?;
            if ftoks.len() != 1 {
                return Err(header_err(fl, "frequency line must hold a single value"));
            }
            let frequency = number(ftoks[0], fl)?;
            let mut list = |what: &'static str| -> Result<Vec<f64>, ParseError> {
                let (l, toks) = cur.next(what)?;
                let n = count(toks[0], l)?;
                cur.values(n, l, &toks[1..], what)
            };
            let zs = list("source depths")?;
            let zr = list("receiver depths")?;
            let rr = list("receiver ranges")?;
            (Some(tag), frequency, zs, zr, rr)
        } else {
            if first.len() != 4 {
                return Err(header_err(first_line, format!("expected `freq Nsz Nrz Nr`, found {} fields", first.len())));
            }
            let frequency = number(first[0], first_line)?;
            let nsz = count(first[1], first_line)?;
            let nrz = count(first[2], first_line)?;
            let nr = count(first[3], first_line)?;
            let zs = cur.values(nsz, first_line, &[], "source depths")?;
            let zr = cur.values(nrz, first_line, &[], "receiver depths")?;
            let rr = cur.values(nr, first_line, &[], "receiver ranges")?;
            (None, frequency, zs, zr, rr)
        };
        if source_depths.is_empty() || receiver_depths.is_empty() || receiver_ranges.is_empty() {
            return Err(header_err(first_line, "source/receiver grid must be nonempty"));
        }

        let fields = if tag.is_some() { 8 } else { 7 };
        let n_receivers = receiver_depths.len() * receiver_ranges.len();
        let mut sources = Vec::with_capacity(source_depths.len());
        for _ in 0..source_depths.len() {
            let (l, toks) = cur.next("maximum arrival count")?;
            if toks.len() != 1 {
                return Err(ParseError { line: l, kind: ParseErrorKind::ExpectedCount { found: toks.len() } });
            }
            let max_arrivals = count(toks[0], l)?;
            let mut receivers = Vec::with_capacity(n_receivers);
            for _ in 0..n_receivers {
                let (declared_at, toks) = cur.next("arrival count")?;
                if toks.len() != 1 {
                    return Err(ParseError { line: declared_at, kind: ParseErrorKind::ExpectedCount { found: toks.len() } });
                }
                let expected = count(toks[0], declared_at)?;
                let mut rows = Vec::with_capacity(expected);
                for found in 0..expected {
                    let short = ParseErrorKind::ArrivalCountMismatch { expected, found, declared_at };
                    let Some((l, toks)) = cur.peek().cloned() else {
                        return Err(ParseError { line: cur.end_line, kind: short });
                    };
                    if toks.len() == 1 {
                        return Err(ParseError { line: l, kind: short });
                    }
                    if toks.len() != fields {
                        return Err(ParseError { line: l, kind: ParseErrorKind::FieldCount { expected: fields, found: toks.len() } });
                    }
                    cur.pos += 1;
                    rows.push(arrival_row(&toks, l, tag.is_some())?);
                }
                receivers.push(rows);
            }
            sources.push(SourceBlock { max_arrivals, receivers });
        }
        if let Some((l, _)) = cur.peek() {
            return Err(ParseError { line: *l, kind: ParseErrorKind::TrailingContent });
        }
        Ok(Self { tag, frequency, source_depths, receiver_depths, receiver_ranges, sources })
    }

    /// One response per (source depth, receiver), in file order.
    pub fn to_cirs<T: Real>(&self) -> Result<Vec<ChannelImpulseResponse<T>>, ArrivalError> {
        let mut out = Vec::new();
        for (s, block) in self.sources.iter().enumerate() {
            for (r, arrivals) in block.receivers.iter().enumerate() {
                if arrivals.is_empty() {
                    return Err(ArrivalError::EmptyReceiver { source_index: s, receiver: r });
                }
                let taps = arrivals
                    .iter()
                    .map(|a| {
                        let g = a.gain();
                        Tap { delay: T::lit(a.delay), gain: Complex::new(T::lit(g.re), T::lit(g.im)) }
                    })
                    .collect();
                let link = LinkId::new(Endpoint::Node(s), Endpoint::Node(r));
                let cir = ChannelImpulseResponse::from_unsorted(link, taps).map_err(|error| ArrivalError::Channel {
                    source_index: s,
                    receiver: r,
                    error,
                })?;
                out.push(cir);
            }
        }
        Ok(out)
    }
}

fn arrival_row(toks: &[&str], line: usize, tagged: bool) -> Result<Arrival, ParseError> {
    let f = |i: usize| number(toks[i], line);
    let (delay_imag, rest) = if tagged { (Some(f(3)?), 4) } else { (None, 3) };
    Ok(Arrival {
        amplitude: f(0)?,
        phase_deg: f(1)?,
        delay: f(2)?,
        delay_imag,
        source_angle: f(rest)?,
        receiver_angle: f(rest + 1)?,
        surface_bounces: integer(toks[rest + 2], line)?,
        bottom_bounces: integer(toks[rest + 3], line)?,
    })
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// Canonical text form; parsing it yields an identical [`ArrivalFile`].
impl fmt::Display for ArrivalFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.tag {
            Some(tag) => {
                writeln!(f, "'{tag}'")?;
                writeln!(f, "{}", self.frequency)?;
                writeln!(f, "{} {}", self.source_depths.len(), join(&self.source_depths))?;
                writeln!(f, "{} {}", self.receiver_depths.len(), join(&self.receiver_depths))?;
                writeln!(f, "{} {}", self.receiver_ranges.len(), join(&self.receiver_ranges))?;
            }
            None => {
                writeln!(
                    f,
                    "{} {} {} {}",
                    self.frequency,
                    self.source_depths.len(),
                    self.receiver_depths.len(),
                    self.receiver_ranges.len()
                )?;
                writeln!(f, "{}", join(&self.source_depths))?;
                writeln!(f, "{}", join(&self.receiver_depths))?;
                writeln!(f, "{}", join(&self.receiver_ranges))?;
            }
        }
        for block in &self.sources {
            writeln!(f, "{}", block.max_arrivals)?;
            for arrivals in &block.receivers {
                writeln!(f, "{}", arrivals.len())?;
                for a in arrivals {
                    write!(f, "{} {} {}", a.amplitude, a.phase_deg, a.delay)?;
                    if let Some(im) = a.delay_imag {
                        write!(f, " {im}")?;
                    }
                    writeln!(f, " {} {} {} {}", a.source_angle, a.receiver_angle, a.surface_bounces, a.bottom_bounces)?;
                }
            }
        }
        Ok(())
    }
}

/// Parses arrival-file text straight to channel responses.
pub fn parse_bellhop_arrivals<T: Real>(text: &str) -> Result<Vec<ChannelImpulseResponse<T>>, ArrivalError> {
    ArrivalFile::parse(text)?.to_cirs()
}
