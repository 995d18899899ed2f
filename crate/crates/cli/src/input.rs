use std::fmt;
use std::path::Path;

use bctseg::sequence::{
    infer_numeric_alphabet, parse_csv, parse_fasta, parse_plain, split_context, Alphabet, Sequence,
};
use bctseg::Symbol;
use sha2::{Digest, Sha256};

use crate::args::InputFormat;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INPUT: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;
pub const EXIT_IO: u8 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, message)
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Exit code for a library error raised after the input was read.
impl From<bctseg::Error> for CliError {
    fn from(e: bctseg::Error) -> Self {
        use bctseg::Error as E;
        let code = match e {
            E::InvalidParameter(_)
            | E::InvalidChangePoints(_)
            | E::InvalidAlphabet(_)
            | E::ModelClassTooLarge { .. } => EXIT_USAGE,
            E::UnmappedSymbol { .. } | E::EmptyRecord | E::TooShort { .. } | E::MalformedModel(_) | E::Json(_) => {
                EXIT_INPUT
            }
            E::NoUniqueStationary(_)
            | E::StateSpaceTooLarge { .. }
            | E::EmptyTrace
            | E::RatioCaseMismatch(_)
            | E::NoSupport(_) => EXIT_NUMERIC,
        };
        Self::new(code, e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Raw bytes of an input file plus their SHA-256.
pub struct InputFile {
    pub text: String,
    pub sha256: String,
    pub bytes: usize,
}

pub fn read_input(path: &Path) -> CliResult<InputFile> {
    let raw = std::fs::read(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let sha256 = hex::encode(Sha256::digest(&raw));
    let bytes = raw.len();
    let text = String::from_utf8(raw).map_err(|_| CliError::input(format!("{}: not UTF-8 text", path.display())))?;
    Ok(InputFile { text, sha256, bytes })
}

pub fn resolve_format(format: InputFormat, path: &Path, text: &str) -> InputFormat {
    if format != InputFormat::Auto {
        return format;
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    match ext.as_str() {
        "fa" | "fasta" | "fna" | "fas" => InputFormat::Fasta,
        "csv" => InputFormat::Csv,
        _ if text.trim_start().starts_with('>') => InputFormat::Fasta,
        _ => InputFormat::Plain,
    }
}

pub fn resolve_alphabet(spec: Option<&str>, format: InputFormat, text: &str) -> CliResult<Alphabet> {
    let alphabet = match spec {
        Some(s) if s.eq_ignore_ascii_case("dna") => Ok(Alphabet::dna()),
        Some(s) if s.contains(',') => Alphabet::new(s.split(',').map(str::trim)),
        Some(s) => Alphabet::from_chars(s),
        None if format == InputFormat::Fasta => Ok(Alphabet::dna()),
        None => infer_numeric_alphabet(text),
    };
    alphabet.map_err(|e| CliError::usage(e.to_string()))
}

pub fn parse_symbols(format: InputFormat, text: &str, alphabet: &Alphabet) -> CliResult<Vec<Symbol>> {
    let parsed = match format {
        InputFormat::Fasta => parse_fasta(text, alphabet),
        InputFormat::Csv => parse_csv(text.as_bytes(), alphabet),
        InputFormat::Plain | InputFormat::Auto => parse_plain(text, alphabet),
    };
    parsed.map_err(|e| CliError::input(e.to_string()))
}

/// A parsed input series with the first `depth` symbols as initial context.
pub struct LoadedSeries {
    pub sequence: Sequence,
    pub file: InputFile,
    pub format: InputFormat,
}

pub fn load_series(path: &Path, format: InputFormat, alphabet: Option<&str>, depth: usize) -> CliResult<LoadedSeries> {
    let file = read_input(path)?;
    let format = resolve_format(format, path, &file.text);
    let alphabet = resolve_alphabet(alphabet, format, &file.text)?;
    let raw = parse_symbols(format, &file.text, &alphabet)?;
    let sequence = split_context(alphabet, &raw, depth).map_err(|e| CliError::input(e.to_string()))?;
    Ok(LoadedSeries { sequence, file, format })
}
