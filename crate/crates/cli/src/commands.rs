use std::path::Path;

use bctseg::bct::{build_counts, map_tree, BctParams, TreeModel, TreeModelJson};
use bctseg::changepoint::{exact_single_cp_posterior, partition, ChangePoints};
use bctseg::mcmc::{run_chains, summarize, McmcConfig, Mode, Trace};
use bctseg::sequence::{Alphabet, Sequence};
use bctseg::simulator::{generate_piecewise, stationary_marginal, SpecJson, Truth};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::args::{ExactArgs, GenerateArgs, MapTreeArgs, SegmentArgs, StationaryArgs, TableFormat};
use crate::input::{load_series, read_input, resolve_alphabet, CliError, CliResult, InputFile, LoadedSeries, EXIT_IO};
use crate::manifest::{InputRecord, RunRecord};

fn write_out(dir: &Path, name: &str, contents: &str, record: &mut RunRecord) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::new(EXIT_IO, format!("{}: {e}", path.display())))?;
    record.outputs.push(name.to_owned());
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("serialisable");
    s.push('\n');
    s
}

fn input_record(role: &str, path: &Path, file: &InputFile) -> InputRecord {
    InputRecord {
        role: role.to_owned(),
        path: path.to_path_buf(),
        sha256: file.sha256.clone(),
        bytes: file.bytes,
    }
}

fn note_series(record: &mut RunRecord, path: &Path, series: &LoadedSeries) {
    record.inputs.push(input_record("series", path, &series.file));
    record.resolved.insert("format".into(), json!(series.format));
}

fn params_for(
    seq: &Sequence,
    depth: usize,
    beta: Option<f64>,
    resolved: &mut Map<String, Value>,
) -> CliResult<BctParams> {
    let params = BctParams::new(seq.alphabet().size(), depth, beta)?;
    resolved.insert("alphabet".into(), json!(seq.alphabet().labels()));
    resolved.insert("m".into(), json!(params.m()));
    resolved.insert("n".into(), json!(seq.n()));
    resolved.insert("depth".into(), json!(params.depth()));
    resolved.insert("beta".into(), json!(params.beta()));
    resolved.insert("alpha".into(), json!(params.alpha()));
    Ok(params)
}

fn fixed_change_points(n: usize, positions: &[usize]) -> CliResult<ChangePoints> {
    ChangePoints::new(n, positions.to_vec()).map_err(|e| CliError::usage(e.to_string()))
}

pub fn segment(a: &SegmentArgs, record: &mut RunRecord) -> CliResult<()> {
    let mode = match (a.lmax, a.num_changes) {
        (Some(ell_max), None) => Mode::Variable { ell_max },
        (None, Some(ell)) => Mode::Fixed { ell },
        _ => return Err(CliError::usage("exactly one of --lmax and --num-changes is required")),
    };
    if a.chains == 0 {
        return Err(CliError::usage("--chains must be at least 1"));
    }
    let series = load_series(
        &a.input.input,
        a.input.format,
        a.input.alphabet.as_deref(),
        a.model.depth,
    )?;
    note_series(record, &a.input.input, &series);
    let seq = &series.sequence;
    let params = params_for(seq, a.model.depth, a.model.beta, &mut record.resolved)?;

    let mut config = McmcConfig::new(mode, a.model.depth, a.iters, a.burnin, a.seed);
    config.beta = Some(params.beta());
    config.thinning = a.thin;
    config.cache_capacity = a.cache;
    config.validate()?;
    record
        .resolved
        .insert("mode".into(), serde_json::to_value(mode).expect("serialisable"));
    record.resolved.insert("iterations".into(), json!(a.iters));
    record.resolved.insert("burn_in".into(), json!(a.burnin));
    record.resolved.insert("thinning".into(), json!(a.thin));
    record.resolved.insert("chains".into(), json!(a.chains));
    record.resolved.insert(
        "seeds".into(),
        json!((0..a.chains as u64).map(|k| a.seed.wrapping_add(k)).collect::<Vec<_>>()),
    );
    record.resolved.insert("cache_capacity".into(), json!(a.cache));

    let traces = run_chains(seq, &config, a.chains)?;
    let mut merged: Option<Trace> = None;
    for (k, t) in traces.iter().enumerate() {
        let name = if a.chains == 1 {
            "trace.csv".to_owned()
        } else {
            format!("trace_{}.csv", k + 1)
        };
        write_out(&a.out, &name, &t.to_csv(), record)?;
        match merged.as_mut() {
            None => merged = Some(t.clone()),
            Some(m) => m.merge(t)?,
        }
    }
    let merged = merged.expect("at least one chain");
    let summary = summarize(&merged)?;
    write_out(&a.out, "summary.json", &to_json(&summary), record)?;

    let timings: Vec<f64> = traces.iter().flat_map(|t| t.ms_per_1000.iter().copied()).collect();
    if !timings.is_empty() {
        let mean = timings.iter().sum::<f64>() / timings.len() as f64;
        record.diagnostics.insert("ms_per_1000_iterations".into(), json!(mean));
    }
    record.diagnostics.insert(
        "cache_hits".into(),
        json!(traces.iter().map(|t| t.cache_hits).sum::<u64>()),
    );
    record.diagnostics.insert(
        "cache_misses".into(),
        json!(traces.iter().map(|t| t.cache_misses).sum::<u64>()),
    );

    let freq = summary.ell_frequencies();
    println!(
        "l = {} (posterior {:.4}), change-points {:?}",
        summary.map.ell,
        freq.get(summary.map.ell).copied().unwrap_or(0.0),
        summary.map.positions
    );
    Ok(())
}

pub fn exact(a: &ExactArgs, record: &mut RunRecord) -> CliResult<()> {
    let series = load_series(
        &a.input.input,
        a.input.format,
        a.input.alphabet.as_deref(),
        a.model.depth,
    )?;
    note_series(record, &a.input.input, &series);
    let seq = &series.sequence;
    let params = params_for(seq, a.model.depth, a.model.beta, &mut record.resolved)?;
    let posterior = exact_single_cp_posterior(seq, &params)?;
    match a.emit {
        TableFormat::Csv => write_out(&a.out, "posterior.csv", &posterior.to_csv(), record)?,
        TableFormat::Json => write_out(&a.out, "posterior.json", &to_json(&posterior), record)?,
    }
    let p = posterior.argmax();
    println!("argmax p = {p} (probability {:.6})", posterior.prob(p));
    Ok(())
}

#[derive(Serialize)]
struct SegmentTree {
    segment: usize,
    start: usize,
    end: usize,
    depth: usize,
    leaf_count: usize,
    log_map_score: f64,
    tree: TreeModelJson,
}

pub fn maptree(a: &MapTreeArgs, record: &mut RunRecord) -> CliResult<()> {
    let series = load_series(
        &a.input.input,
        a.input.format,
        a.input.alphabet.as_deref(),
        a.model.depth,
    )?;
    note_series(record, &a.input.input, &series);
    let seq = &series.sequence;
    let params = params_for(seq, a.model.depth, a.model.beta, &mut record.resolved)?;
    let cp = fixed_change_points(seq.n(), &a.segments)?;
    record.resolved.insert("segments".into(), json!(cp.positions()));
    let mut out = Vec::new();
    for view in partition(seq, &cp)? {
        let sub = view.to_sequence(seq);
        let counts = build_counts(&sub, &params)?;
        let tree = counts.map_tree();
        out.push(SegmentTree {
            segment: view.index,
            start: view.start,
            end: view.end,
            depth: tree.max_depth(),
            leaf_count: tree.leaf_count(),
            log_map_score: counts.log_map_score(),
            tree: tree.to_json(seq.alphabet()),
        });
    }
    write_out(&a.out, "maptree.json", &to_json(&out), record)?;
    let depths: Vec<usize> = out.iter().map(|s| s.depth).collect();
    println!("MAP tree depths {depths:?}");
    Ok(())
}

fn render_series(alphabet: &Alphabet, data: &[bctseg::Symbol]) -> String {
    let mut out = String::with_capacity(data.len() + data.len() / 80 + 1);
    if alphabet.single_char() {
        for chunk in data.chunks(80) {
            out.push_str(&alphabet.render(chunk));
            out.push('\n');
        }
    } else {
        for &s in data {
            out.push_str(alphabet.decode(s).expect("symbol in alphabet"));
            out.push('\n');
        }
    }
    out
}

pub fn generate(a: &GenerateArgs, record: &mut RunRecord) -> CliResult<()> {
    let file = read_input(&a.spec)?;
    record.inputs.push(input_record("spec", &a.spec, &file));
    let mut json: SpecJson = serde_json::from_str(&file.text).map_err(|e| CliError::input(format!("spec: {e}")))?;
    if let Some(seed) = a.seed {
        json.seed = seed;
    }
    let spec = json.to_spec().map_err(|e| CliError::input(format!("spec: {e}")))?;
    record.resolved.insert("seed".into(), json!(spec.seed));
    record.resolved.insert("depth".into(), json!(spec.depth));
    record.resolved.insert("n".into(), json!(spec.total_length()));
    let generated = generate_piecewise(&spec)?;
    let seq = &generated.sequence;
    write_out(
        &a.out,
        "sequence.txt",
        &render_series(seq.alphabet(), seq.data()),
        record,
    )?;
    write_out(&a.out, "truth.json", &to_json(&Truth::of(&spec)), record)?;
    println!(
        "n = {}, change-points {:?}",
        seq.n(),
        generated.change_points.positions()
    );
    Ok(())
}

#[derive(Serialize)]
struct Marginal {
    #[serde(skip_serializing_if = "Option::is_none")]
    segment: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    start: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    end: Option<usize>,
    tree_depth: usize,
    marginal: Vec<f64>,
}

pub fn stationary(a: &StationaryArgs, record: &mut RunRecord) -> CliResult<()> {
    let mut out = Vec::new();
    let labels;
    if let Some(model_path) = &a.model {
        let file = read_input(model_path)?;
        record.inputs.push(input_record("model", model_path, &file));
        let json: TreeModelJson =
            serde_json::from_str(&file.text).map_err(|e| CliError::input(format!("model: {e}")))?;
        let alphabet = match &a.alphabet {
            Some(_) => resolve_alphabet(a.alphabet.as_deref(), a.format, "")?,
            None => {
                let m = json.params.values().next().map_or(2, Vec::len);
                Alphabet::numeric(m)?
            }
        };
        let tree = TreeModel::from_json(&json, &alphabet).map_err(|e| CliError::input(format!("model: {e}")))?;
        out.push(Marginal {
            segment: None,
            start: None,
            end: None,
            tree_depth: tree.max_depth(),
            marginal: stationary_marginal(&tree)?,
        });
        labels = alphabet.labels().to_vec();
    } else {
        let path = a.input.as_ref().expect("clap requires --input or --model");
        let depth = a.depth.expect("clap requires --depth with --input");
        let series = load_series(path, a.format, a.alphabet.as_deref(), depth)?;
        note_series(record, path, &series);
        let seq = &series.sequence;
        let params = params_for(seq, depth, a.beta, &mut record.resolved)?;
        let cp = fixed_change_points(seq.n(), &a.segments)?;
        record.resolved.insert("segments".into(), json!(cp.positions()));
        for view in partition(seq, &cp)? {
            let tree = map_tree(&view.to_sequence(seq), &params)?;
            out.push(Marginal {
                segment: Some(view.index),
                start: Some(view.start),
                end: Some(view.end),
                tree_depth: tree.max_depth(),
                marginal: stationary_marginal(&tree)?,
            });
        }
        labels = seq.alphabet().labels().to_vec();
    }
    write_out(
        &a.out,
        "stationary.json",
        &to_json(&json!({ "alphabet": labels, "segments": out })),
        record,
    )?;
    for m in &out {
        println!("{:?}", m.marginal);
    }
    Ok(())
}
