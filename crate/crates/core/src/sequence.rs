//! Alphabets, encoded sequences and input parsers.
//!
//! A [`Sequence`] keeps the initial context and the observations in one
//! buffer: `data[..depth]` is `x_{-D+1}^0` and `data[depth..]` is `x_1^n`.
//! Observation `i` (1-based) lives at `data[depth + i - 1]`.

use std::collections::HashMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Symbol};

/// Largest supported alphabet.
pub const MAX_ALPHABET: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Alphabet {
    labels: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, Symbol>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 || labels.len() > MAX_ALPHABET {
            return Err(Error::InvalidAlphabet(format!(
                "size {} outside 2..={MAX_ALPHABET}",
                labels.len()
            )));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (code, label) in labels.iter().enumerate() {
            if label.is_empty() || label.chars().any(char::is_whitespace) {
                return Err(Error::InvalidAlphabet(format!("bad label {label:?}")));
            }
            if index.insert(label.clone(), code as Symbol).is_some() {
                return Err(Error::InvalidAlphabet(format!("duplicate label {label:?}")));
            }
        }
        Ok(Self { labels, index })
    }

    /// One label per character of `chars`, e.g. `"ACGT"`.
    pub fn from_chars(chars: &str) -> Result<Self> {
        Self::new(chars.chars().map(String::from))
    }

    /// Digits `0..m` as labels.
    pub fn numeric(m: usize) -> Result<Self> {
        Self::new((0..m).map(|c| c.to_string()))
    }

    /// `A,C,G,T -> 0,1,2,3`.
    pub fn dna() -> Self {
        Self::from_chars("ACGT").expect("static alphabet")
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn encode(&self, label: &str) -> Option<Symbol> {
        self.index.get(label).copied()
    }

    pub fn decode(&self, symbol: Symbol) -> Option<&str> {
        self.labels.get(symbol as usize).map(String::as_str)
    }

    /// True when every label is a single character, so strings of labels can
    /// be split back unambiguously.
    pub fn single_char(&self) -> bool {
        self.labels.iter().all(|l| l.chars().count() == 1)
    }

    /// Concatenate labels of `symbols`.
    pub fn render(&self, symbols: &[Symbol]) -> String {
        symbols.iter().map(|&s| self.decode(s).unwrap_or("?")).collect()
    }

    /// Inverse of [`Alphabet::render`] for single-character alphabets.
    pub fn parse_string(&self, text: &str) -> Result<Vec<Symbol>> {
        let mut buf = [0u8; 4];
        text.chars()
            .enumerate()
            .map(|(offset, c)| {
                self.encode(c.encode_utf8(&mut buf))
                    .ok_or_else(|| Error::UnmappedSymbol {
                        offset,
                        symbol: c.to_string(),
                    })
            })
            .collect()
    }
}

impl TryFrom<Vec<String>> for Alphabet {
    type Error = Error;
    fn try_from(labels: Vec<String>) -> Result<Self> {
        Self::new(labels)
    }
}

impl From<Alphabet> for Vec<String> {
    fn from(a: Alphabet) -> Self {
        a.labels
    }
}

/// Observations `x_1^n` together with their initial context `x_{-D+1}^0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    alphabet: Alphabet,
    depth: usize,
    data: Vec<Symbol>,
}

impl Sequence {
    pub fn new(alphabet: Alphabet, context: &[Symbol], observations: &[Symbol]) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptyRecord);
        }
        let m = alphabet.size();
        if let Some(offset) = context.iter().chain(observations).position(|&s| s as usize >= m) {
            return Err(Error::UnmappedSymbol {
                offset,
                symbol: context.iter().chain(observations).nth(offset).unwrap().to_string(),
            });
        }
        let mut data = Vec::with_capacity(context.len() + observations.len());
        data.extend_from_slice(context);
        data.extend_from_slice(observations);
        Ok(Self {
            alphabet,
            depth: context.len(),
            data,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// Length `D` of the initial context.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Number of observations `n`.
    pub fn n(&self) -> usize {
        self.data.len() - self.depth
    }

    pub fn context(&self) -> &[Symbol] {
        &self.data[..self.depth]
    }

    pub fn observations(&self) -> &[Symbol] {
        &self.data[self.depth..]
    }

    /// Context followed by observations.
    pub fn data(&self) -> &[Symbol] {
        &self.data
    }

    /// Observation `x_i`, 1-based.
    pub fn obs(&self, i: usize) -> Symbol {
        self.data[self.depth + i - 1]
    }

    /// Observations `x_start..=x_end` (1-based, inclusive) preceded by the `D`
    /// symbols before `x_start`, which may reach into the initial context.
    pub fn window(&self, start: usize, end: usize) -> &[Symbol] {
        assert!(1 <= start && start <= end && end <= self.n(), "window {start}..={end}");
        &self.data[start - 1..self.depth + end]
    }
}

/// Use the first `depth` symbols of `raw` as the initial context.
pub fn split_context(alphabet: Alphabet, raw: &[Symbol], depth: usize) -> Result<Sequence> {
    if raw.len() <= depth {
        return Err(Error::TooShort { len: raw.len(), depth });
    }
    Sequence::new(alphabet, &raw[..depth], &raw[depth..])
}

/// First record of a FASTA file. Lowercase bases are upcased before lookup.
pub fn parse_fasta(text: &str, alphabet: &Alphabet) -> Result<Vec<Symbol>> {
    let mut lines = text.lines().skip_while(|l| l.trim().is_empty());
    match lines.next() {
        Some(h) if h.starts_with('>') => {}
        _ => return Err(Error::InvalidParameter("FASTA input must start with '>'".into())),
    }
    let mut out = Vec::new();
    let mut buf = [0u8; 4];
    for line in lines {
        if line.starts_with('>') {
            break;
        }
        for c in line.chars().filter(|c| !c.is_whitespace()) {
            let up = c.to_ascii_uppercase();
            let code = alphabet
                .encode(up.encode_utf8(&mut buf))
                .ok_or_else(|| Error::UnmappedSymbol {
                    offset: out.len(),
                    symbol: c.to_string(),
                })?;
            out.push(code);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyRecord);
    }
    Ok(out)
}

/// Plain text: one label per line when every non-empty line is a label,
/// otherwise one label per non-whitespace character.
pub fn parse_plain(text: &str, alphabet: &Alphabet) -> Result<Vec<Symbol>> {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    if lines.len() > 1 || !alphabet.single_char() {
        if let Some(per_line) = lines.iter().map(|l| alphabet.encode(l)).collect::<Option<Vec<_>>>() {
            return non_empty(per_line);
        }
    }
    let mut buf = [0u8; 4];
    let out = text
        .chars()
        .filter(|c| !c.is_whitespace())
        .enumerate()
        .map(|(offset, c)| {
            alphabet
                .encode(c.encode_utf8(&mut buf))
                .ok_or_else(|| Error::UnmappedSymbol {
                    offset,
                    symbol: c.to_string(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    non_empty(out)
}

/// First column of a CSV file. A leading row that is not a label is taken as
/// a header.
pub fn parse_csv(reader: impl Read, alphabet: &Alphabet) -> Result<Vec<Symbol>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
        let Some(field) = record.get(0).map(str::trim) else {
            continue;
        };
        if field.is_empty() {
            continue;
        }
        match alphabet.encode(field) {
            Some(code) => out.push(code),
            None if row == 0 => {}
            None => {
                return Err(Error::UnmappedSymbol {
                    offset: out.len(),
                    symbol: field.to_string(),
                })
            }
        }
    }
    non_empty(out)
}

/// Smallest numeric alphabet (at least binary) covering integer tokens in
/// `text`, for inputs given without an explicit alphabet.
pub fn infer_numeric_alphabet(text: &str) -> Result<Alphabet> {
    let max = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .flat_map(|t| {
            // single-character stream, e.g. "0101"
            if t.chars().all(|c| c.is_ascii_digit()) && t.len() > 1 {
                t.chars().map(|c| c as usize - '0' as usize).collect::<Vec<_>>()
            } else {
                t.parse::<usize>().into_iter().collect()
            }
        })
        .max()
        .unwrap_or(1);
    Alphabet::numeric((max + 1).max(2))
}

fn non_empty(v: Vec<Symbol>) -> Result<Vec<Symbol>> {
    if v.is_empty() {
        Err(Error::EmptyRecord)
    } else {
        Ok(v)
    }
}
