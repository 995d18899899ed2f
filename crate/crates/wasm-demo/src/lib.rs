//! Browser bindings for the segmentation demo in `www/`.
//!
//! Every export takes plain arguments and returns a JSON string; errors are
//! thrown as JS strings.

use bctseg::bct::{map_tree, BctParams};
use bctseg::changepoint::{exact_single_cp_posterior, partition, ChangePoints};
use bctseg::mcmc::{run, summarize, McmcConfig, Mode};
use bctseg::sequence::{infer_numeric_alphabet, parse_plain, split_context, Alphabet, Sequence};
use bctseg::simulator::{generate_piecewise, ternary_benchmark_spec, SpecJson};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Iteration cap so a click cannot freeze the tab for minutes.
pub const MAX_ITERATIONS: usize = 200_000;

fn err(e: impl ToString) -> String {
    e.to_string()
}

fn alphabet_for(text: &str, alphabet: &str) -> Result<Alphabet, String> {
    let a = alphabet.trim();
    if a.is_empty() {
        if text.chars().any(|c| "ACGTacgt".contains(c)) {
            return Ok(Alphabet::dna());
        }
        return infer_numeric_alphabet(text).map_err(err);
    }
    if a.eq_ignore_ascii_case("dna") {
        return Ok(Alphabet::dna());
    }
    Alphabet::from_chars(a).map_err(err)
}

fn load(text: &str, alphabet: &str, depth: usize) -> Result<Sequence, String> {
    let alphabet = alphabet_for(text, alphabet)?;
    let upper;
    let body = if alphabet == Alphabet::dna() {
        upper = text.to_ascii_uppercase();
        &upper
    } else {
        text
    };
    let raw = parse_plain(body, &alphabet).map_err(err)?;
    split_context(alphabet, &raw, depth).map_err(err)
}

pub fn generate_inner(spec_json: &str, seed: Option<u64>) -> Result<String, String> {
    let spec = if spec_json.trim().is_empty() {
        ternary_benchmark_spec(seed.unwrap_or(0))
    } else {
        let mut json: SpecJson = serde_json::from_str(spec_json).map_err(err)?;
        if let Some(s) = seed {
            json.seed = s;
        }
        json.to_spec().map_err(err)?
    };
    let g = generate_piecewise(&spec).map_err(err)?;
    let seq = &g.sequence;
    Ok(json!({
        "sequence": seq.alphabet().render(seq.data()),
        "alphabet": seq.alphabet().labels(),
        "depth": seq.depth(),
        "n": seq.n(),
        "change_points": g.change_points.positions(),
    })
    .to_string())
}

pub fn exact_inner(text: &str, alphabet: &str, depth: usize) -> Result<String, String> {
    let seq = load(text, alphabet, depth)?;
    let params = BctParams::new(seq.alphabet().size(), depth, None).map_err(err)?;
    let post = exact_single_cp_posterior(&seq, &params).map_err(err)?;
    Ok(json!({
        "n": seq.n(),
        "argmax": post.argmax(),
        "positions": post.positions,
        "probs": post.probs,
    })
    .to_string())
}

pub fn segment_inner(
    text: &str,
    alphabet: &str,
    depth: usize,
    ell_max: usize,
    iterations: usize,
    burn_in: usize,
    seed: u64,
) -> Result<String, String> {
    if iterations > MAX_ITERATIONS {
        return Err(format!("at most {MAX_ITERATIONS} iterations in the browser"));
    }
    let seq = load(text, alphabet, depth)?;
    let config = McmcConfig::new(Mode::Variable { ell_max }, depth, iterations, burn_in, seed);
    let trace = run(&seq, &config).map_err(err)?;
    let summary = summarize(&trace).map_err(err)?;
    let cp = ChangePoints::new(seq.n(), summary.map.positions.clone()).map_err(err)?;
    let params = config.params(&seq).map_err(err)?;
    let depths = partition(&seq, &cp)
        .map_err(err)?
        .iter()
        .map(|s| map_tree(&s.to_sequence(&seq), &params).map(|t| t.max_depth()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    Ok(json!({
        "n": seq.n(),
        "ell_freq": summary.ell_frequencies(),
        "loc_hist": summary.loc_hist,
        "retained": summary.retained,
        "map": summary.map,
        "segment_depths": depths,
        "acceptance_rates": summary.acceptance_rates,
    })
    .to_string())
}

/// Generate from a JSON spec, or the built-in four-segment ternary
/// benchmark when `spec_json` is empty. A negative seed keeps the spec's.
#[wasm_bindgen]
pub fn generate(spec_json: &str, seed: f64) -> Result<String, JsValue> {
    let seed = (seed >= 0.0).then_some(seed as u64);
    generate_inner(spec_json, seed).map_err(|e| JsValue::from_str(&e))
}

/// Exact posterior of a single change-point.
#[wasm_bindgen]
pub fn exact_posterior(text: &str, alphabet: &str, depth: usize) -> Result<String, JsValue> {
    exact_inner(text, alphabet, depth).map_err(|e| JsValue::from_str(&e))
}

/// Sample the number and locations of change-points.
#[wasm_bindgen]
pub fn segment(
    text: &str,
    alphabet: &str,
    depth: usize,
    ell_max: usize,
    iterations: usize,
    burn_in: usize,
    seed: u32,
) -> Result<String, JsValue> {
    segment_inner(text, alphabet, depth, ell_max, iterations, burn_in, seed as u64).map_err(|e| JsValue::from_str(&e))
}
