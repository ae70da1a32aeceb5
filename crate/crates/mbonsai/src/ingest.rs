//! Dataset readers producing streams of symbol strings.
//!
//! Three formats:
//!
//! * FIMI transaction files: one whitespace-separated list of non-negative
//!   integer items per line; the alphabet size is one past the largest item.
//! * FASTQ: four-line records, sequence on the second line, bases ACGTN
//!   (case-insensitive) mapped to 0..=4.
//! * Plain text lines: one string per line, either raw bytes (alphabet 256)
//!   or a declared alphabet string mapping each byte to its position.
//!
//! Readers stream; nothing buffers the whole file. A [`Dataset`] wraps a
//! path (or an in-memory list for tests and synthetic workloads), knows its
//! alphabet, and can be iterated any number of times.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::trie::Symbol;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Fimi,
    Fastq,
    Lines,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Fimi => "fimi",
            Format::Fastq => "fastq",
            Format::Lines => "lines",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fimi" => Ok(Format::Fimi),
            "fastq" => Ok(Format::Fastq),
            "lines" => Ok(Format::Lines),
            other => Err(format!("unknown format {other:?} (fimi|fastq|lines)")),
        }
    }
}

/// Byte-to-symbol mapping for the `lines` format.
#[derive(Clone, Debug)]
pub enum LineAlphabet {
    /// Every byte is its own symbol; sigma = 256.
    Bytes,
    /// Symbols are positions in the given alphabet string.
    Declared(Arc<Vec<u8>>),
}

impl LineAlphabet {
    pub fn declared(alphabet: &str) -> Self {
        LineAlphabet::Declared(Arc::new(alphabet.as_bytes().to_vec()))
    }

    pub fn sigma(&self) -> u64 {
        match self {
            LineAlphabet::Bytes => 256,
            LineAlphabet::Declared(a) => a.len() as u64,
        }
    }

    fn map_line(&self, line: &str, lineno: u64) -> Result<Vec<Symbol>> {
        match self {
            LineAlphabet::Bytes => Ok(line.bytes().map(|b| b as Symbol).collect()),
            LineAlphabet::Declared(a) => line
                .bytes()
                .map(|b| {
                    a.iter()
                        .position(|&x| x == b)
                        .map(|i| i as Symbol)
                        .ok_or_else(|| {
                            Error::parse(
                                lineno,
                                format!("byte {:?} outside the declared alphabet", b as char),
                            )
                        })
                })
                .collect(),
        }
    }
}

/// Iterator over FIMI transactions.
pub struct FimiReader<R: BufRead> {
    lines: std::io::Lines<R>,
    lineno: u64,
}

impl<R: BufRead> FimiReader<R> {
    pub fn new(r: R) -> Self {
        FimiReader {
            lines: r.lines(),
            lineno: 0,
        }
    }
}

impl<R: BufRead> Iterator for FimiReader<R> {
    type Item = Result<Vec<Symbol>>;
    fn next(&mut self) -> Option<Self::Item> {
        let line = match self.lines.next()? {
            Ok(l) => l,
            Err(e) => return Some(Err(e.into())),
        };
        self.lineno += 1;
        let lineno = self.lineno;
        let items: Result<Vec<Symbol>> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<Symbol>()
                    .map_err(|e| Error::parse(lineno, format!("item {tok:?}: {e}")))
            })
            .collect();
        Some(items)
    }
}

/// Iterator over FASTQ reads (the sequence line of each 4-line record).
pub struct FastqReader<R: BufRead> {
    lines: std::io::Lines<R>,
    record: u64,
}

impl<R: BufRead> FastqReader<R> {
    pub fn new(r: R) -> Self {
        FastqReader {
            lines: r.lines(),
            record: 0,
        }
    }

    fn line(&mut self, what: &str) -> Result<String> {
        match self.lines.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(e.into()),
            None => Err(Error::parse(
                self.record,
                format!("truncated record: missing {what}"),
            )),
        }
    }
}

pub fn base_symbol(b: u8) -> Option<Symbol> {
    match b.to_ascii_uppercase() {
        b'A' => Some(0),
        b'C' => Some(1),
        b'G' => Some(2),
        b'T' => Some(3),
        b'N' => Some(4),
        _ => None,
    }
}

impl<R: BufRead> Iterator for FastqReader<R> {
    type Item = Result<Vec<Symbol>>;
    fn next(&mut self) -> Option<Self::Item> {
        let header = match self.lines.next()? {
            Ok(l) => l,
            Err(e) => return Some(Err(e.into())),
        };
        self.record += 1;
        let rec = self.record;
        let parse = (|| {
            if !header.starts_with('@') {
                return Err(Error::parse(rec, "header must start with '@'".to_string()));
            }
            let seq = self.line("sequence")?;
            let plus = self.line("separator")?;
            if !plus.starts_with('+') {
                return Err(Error::parse(
                    rec,
                    "separator must start with '+'".to_string(),
                ));
            }
            self.line("quality")?;
            seq.bytes()
                .map(|b| {
                    base_symbol(b).ok_or_else(|| {
                        Error::parse(rec, format!("unexpected base {:?}", b as char))
                    })
                })
                .collect()
        })();
        Some(parse)
    }
}

/// Iterator over plain text lines under a byte mapping.
pub struct LinesReader<R: BufRead> {
    lines: std::io::Lines<R>,
    alphabet: LineAlphabet,
    lineno: u64,
}

impl<R: BufRead> LinesReader<R> {
    pub fn new(r: R, alphabet: LineAlphabet) -> Self {
        LinesReader {
            lines: r.lines(),
            alphabet,
            lineno: 0,
        }
    }
}

impl<R: BufRead> Iterator for LinesReader<R> {
    type Item = Result<Vec<Symbol>>;
    fn next(&mut self) -> Option<Self::Item> {
        let line = match self.lines.next()? {
            Ok(l) => l,
            Err(e) => return Some(Err(e.into())),
        };
        self.lineno += 1;
        Some(self.alphabet.map_line(&line, self.lineno))
    }
}

enum Source {
    Path(PathBuf),
    Memory(Arc<Vec<Vec<Symbol>>>),
}

/// A dataset with a known alphabet that can be streamed repeatedly.
pub struct Dataset {
    pub format: Format,
    sigma: u64,
    strings: u64,
    source: Source,
    line_alphabet: LineAlphabet,
    /// Sort items inside each FIMI transaction (many mining tools do).
    pub sort_items: bool,
}

impl Dataset {
    /// Open a FIMI file; scans it once to infer the alphabet (one past the
    /// largest item) and count transactions.
    pub fn fimi(path: &Path) -> Result<Dataset> {
        let mut max_item: Option<Symbol> = None;
        let mut strings = 0u64;
        for rec in FimiReader::new(BufReader::new(File::open(path)?)) {
            let rec = rec?;
            strings += 1;
            for &x in &rec {
                max_item = Some(max_item.map_or(x, |m| m.max(x)));
            }
        }
        Ok(Dataset {
            format: Format::Fimi,
            sigma: max_item.map_or(1, |m| m as u64 + 1),
            strings,
            source: Source::Path(path.to_path_buf()),
            line_alphabet: LineAlphabet::Bytes,
            sort_items: false,
        })
    }

    /// Open a FASTQ file; scans it once to validate the record structure and
    /// count reads. The alphabet is fixed at 5 (ACGTN).
    pub fn fastq(path: &Path) -> Result<Dataset> {
        let mut strings = 0u64;
        for rec in FastqReader::new(BufReader::new(File::open(path)?)) {
            rec?;
            strings += 1;
        }
        Ok(Dataset {
            format: Format::Fastq,
            sigma: 5,
            strings,
            source: Source::Path(path.to_path_buf()),
            line_alphabet: LineAlphabet::Bytes,
            sort_items: false,
        })
    }

    /// Open a plain text file, one string per line.
    pub fn lines(path: &Path, alphabet: LineAlphabet) -> Result<Dataset> {
        let mut strings = 0u64;
        for rec in LinesReader::new(BufReader::new(File::open(path)?), alphabet.clone()) {
            rec?;
            strings += 1;
        }
        Ok(Dataset {
            format: Format::Lines,
            sigma: alphabet.sigma(),
            strings,
            source: Source::Path(path.to_path_buf()),
            line_alphabet: alphabet,
            sort_items: false,
        })
    }

    pub fn open(path: &Path, format: Format, alphabet: LineAlphabet) -> Result<Dataset> {
        match format {
            Format::Fimi => Dataset::fimi(path),
            Format::Fastq => Dataset::fastq(path),
            Format::Lines => Dataset::lines(path, alphabet),
        }
    }

    /// In-memory dataset (synthetic workloads and tests).
    pub fn memory(strings: Vec<Vec<Symbol>>, sigma: u64) -> Dataset {
        debug_assert!(strings.iter().flatten().all(|&c| (c as u64) < sigma));
        Dataset {
            format: Format::Lines,
            sigma,
            strings: strings.len() as u64,
            source: Source::Memory(Arc::new(strings)),
            line_alphabet: LineAlphabet::Bytes,
            sort_items: false,
        }
    }

    /// Alphabet size; every emitted symbol is below it.
    pub fn sigma(&self) -> u64 {
        self.sigma
    }

    /// Number of strings in the dataset.
    pub fn n_strings(&self) -> u64 {
        self.strings
    }

    /// Fresh stream over all strings.
    pub fn stream(&self) -> Result<Box<dyn Iterator<Item = Result<Vec<Symbol>>> + '_>> {
        let sort = self.sort_items;
        let iter: Box<dyn Iterator<Item = Result<Vec<Symbol>>>> = match &self.source {
            Source::Memory(v) => {
                let v = Arc::clone(v);
                Box::new((0..v.len()).map(move |i| Ok(v[i].clone())))
            }
            Source::Path(p) => {
                let r = BufReader::new(File::open(p)?);
                match self.format {
                    Format::Fimi => Box::new(FimiReader::new(r)),
                    Format::Fastq => Box::new(FastqReader::new(r)),
                    Format::Lines => Box::new(LinesReader::new(r, self.line_alphabet.clone())),
                }
            }
        };
        if sort {
            Ok(Box::new(iter.map(|rec| {
                rec.map(|mut s| {
                    s.sort_unstable();
                    s
                })
            })))
        } else {
            Ok(iter)
        }
    }
}
