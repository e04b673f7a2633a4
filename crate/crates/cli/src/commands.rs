use std::fs;
use std::io::Write;
use std::path::Path;

use rpd_core::{
    align_vocabularies, count_cooccurrences, decompose_per_word, evaluate, layout_from_distances,
    load_embeddings, monte_carlo_null, perf_vs_rpd_study, rpd, rpd_pairwise_matrix,
    save_embeddings, z_test, AnalogyDataset, CountOptions, Corpus, DistanceMatrix,
    EmbeddingFormat, EmbeddingMatrix, NullDistribution, SimilarityDataset, SvdConfig, Tail,
    TokenizerOptions, VocabMode,
};
use serde::Serialize;

use crate::{
    CliError, CliResult, DatasetArgs, EvalArgs, MapArgs, MatrixArgs, NamedPath, NullArgs,
    OutputArg, RpdArgs, StudyArgs, TrainArgs,
};

fn emit(output: &OutputArg, text: &str) -> CliResult<()> {
    match &output.output {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::internal(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::internal(format!("stdout: {e}")))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::internal(format!("cannot serialize result: {e}")))
}

fn warn(message: &str) {
    eprintln!("warning: {message}");
}

fn load(path: &Path, format: EmbeddingFormat) -> CliResult<EmbeddingMatrix> {
    Ok(load_embeddings(path, format)?)
}

fn load_named(embs: &[NamedPath], format: EmbeddingFormat) -> CliResult<Vec<(String, EmbeddingMatrix)>> {
    let mut seen = std::collections::HashSet::new();
    embs.iter()
        .map(|e| {
            if !seen.insert(e.name.as_str()) {
                return Err(CliError::input(format!("duplicate embedding name {:?}", e.name)));
            }
            Ok((e.name.clone(), load(&e.path, format)?))
        })
        .collect()
}

fn note_coverage(left: f64, right: f64) {
    if left < 1.0 || right < 1.0 {
        warn(&format!(
            "compared on the shared vocabulary: {:.1}% of left, {:.1}% of right",
            100.0 * left,
            100.0 * right
        ));
    }
}

#[derive(Serialize)]
struct PairOutput {
    #[serde(flatten)]
    report: rpd_core::RpdReport,
    coverage_left: f64,
    coverage_right: f64,
}

pub fn rpd_pair(args: RpdArgs) -> CliResult<()> {
    let fmt = args.format.format;
    let pair = align_vocabularies(&load(&args.left, fmt)?, &load(&args.right, fmt)?)?;
    note_coverage(pair.coverage_left(), pair.coverage_right());
    let standardize = !args.no_standardize;
    let mut report = if args.decompose {
        decompose_per_word(&pair, standardize)?
    } else {
        rpd(&pair, standardize)?
    };
    if let Some(k) = args.top_k {
        report.truncate_per_word(k);
    }
    let out = PairOutput {
        report,
        coverage_left: pair.coverage_left(),
        coverage_right: pair.coverage_right(),
    };
    emit(&args.output, &to_json(&out)?)
}

pub fn rpd_matrix(args: MatrixArgs) -> CliResult<()> {
    let embs = load_named(&args.embs, args.format.format)?;
    let mode = if args.common_vocab { VocabMode::Common } else { VocabMode::PerPair };
    let matrix = rpd_pairwise_matrix(&embs, mode)?;
    emit(&args.output, &matrix.to_tsv())
}

#[derive(Serialize)]
struct NullTestOutput {
    observed_rpd: f64,
    n: usize,
    d_left: usize,
    d_right: usize,
    null: NullDistribution,
    z: f64,
    p_two_sided: f64,
    tail: Tail,
    p_value: f64,
    reject_at_0_01: bool,
    decision: &'static str,
}

pub fn nulltest(args: NullArgs) -> CliResult<()> {
    if args.replicates < 2 {
        return Err(CliError::input(format!(
            "--replicates must be at least 2, got {}",
            args.replicates
        )));
    }
    let fmt = args.format.format;
    let pair = align_vocabularies(&load(&args.left, fmt)?, &load(&args.right, fmt)?)?;
    note_coverage(pair.coverage_left(), pair.coverage_right());
    let observed = rpd(&pair, true)?;
    let null = monte_carlo_null(observed.n, observed.d_left, observed.d_right, args.replicates, args.seed)?;
    if null.low_replicates {
        warn(&format!("only {} replicates; the null estimate is unreliable", null.replicates));
    }
    if let Some(path) = &args.samples {
        let text = null.samples_text().unwrap_or_default();
        fs::write(path, text).map_err(|e| CliError::internal(format!("{}: {e}", path.display())))?;
    }
    let t = z_test(observed.rpd, &null, args.tail)?;
    let out = NullTestOutput {
        observed_rpd: observed.rpd,
        n: observed.n,
        d_left: observed.d_left,
        d_right: observed.d_right,
        null: null.without_samples(),
        z: t.z,
        p_two_sided: t.p_two_sided,
        tail: t.tail,
        p_value: t.p_value,
        reject_at_0_01: t.reject_at_0_01,
        decision: if t.reject_at_0_01 { "reject independence" } else { "fail to reject independence" },
    };
    emit(&args.output, &to_json(&out)?)
}

#[derive(Serialize)]
struct TrainSummary {
    output: String,
    signal: String,
    vocab_size: usize,
    dim: usize,
    tokens: usize,
    total_count: f64,
    singular_values: Vec<f64>,
    iterations: usize,
    converged: bool,
    negative_eigen_directions: usize,
}

pub fn train_svd(args: TrainArgs) -> CliResult<()> {
    let tokenizer = TokenizerOptions {
        lowercase: !args.keep_case,
        strip_punctuation: args.strip_punctuation,
        split_documents: args.split_documents,
    };
    let corpus = Corpus::load(&args.corpus, &tokenizer)?;
    let counts = count_cooccurrences(
        &corpus,
        &CountOptions {
            window: args.window,
            min_count: args.min_count,
            weighting: args.weighting,
        },
    )?;
    if let (Some(t), Some(v)) = (&args.counts_out, &args.vocab_out) {
        counts.save(t, v)?;
    }
    let config = SvdConfig {
        seed: args.seed,
        oversample: args.oversample,
        power_iters: args.power_iters,
        tol: args.tol,
        max_iters: args.max_iters,
    };
    let trained = rpd_core::train_svd(&counts, args.signal, args.dim, &config)?;
    if !trained.converged {
        warn(&format!(
            "subspace iteration stopped after {} sweeps without reaching tolerance {}",
            trained.iterations, args.tol
        ));
    }
    if trained.negative_eigen_directions > 0 {
        warn(&format!(
            "{} of the top {} directions have negative eigenvalues; E E^T is not the best rank-{} approximation of the signal",
            trained.negative_eigen_directions, args.dim, args.dim
        ));
    }
    if trained.clamped > 0 {
        warn(&format!("{} negative singular values clamped to zero", trained.clamped));
    }
    save_embeddings(&trained.embedding, &args.output, EmbeddingFormat::Word2VecText)
        .map_err(|e| CliError::internal(e.to_string()))?;
    let summary = TrainSummary {
        output: args.output.display().to_string(),
        signal: args.signal.to_string(),
        vocab_size: counts.n(),
        dim: args.dim,
        tokens: corpus.token_count(),
        total_count: counts.total(),
        singular_values: trained.singular_values,
        iterations: trained.iterations,
        converged: trained.converged,
        negative_eigen_directions: trained.negative_eigen_directions,
    };
    emit(&OutputArg { output: None }, &to_json(&summary)?)
}

fn load_datasets(args: &DatasetArgs) -> CliResult<(Option<SimilarityDataset>, Option<AnalogyDataset>)> {
    if args.similarity.is_none() && args.analogy.is_none() {
        return Err(CliError::input("give --similarity, --analogy or both"));
    }
    let lowercase = !args.keep_case;
    let sim = args
        .similarity
        .as_ref()
        .map(|p| SimilarityDataset::load(p, lowercase))
        .transpose()?;
    let ana = args
        .analogy
        .as_ref()
        .map(|p| AnalogyDataset::load(p, lowercase))
        .transpose()?;
    Ok((sim, ana))
}

pub fn eval(args: EvalArgs) -> CliResult<()> {
    let (sim, ana) = load_datasets(&args.datasets)?;
    let emb = load(&args.emb, args.format.format)?;
    let result = evaluate(&emb, sim.as_ref(), ana.as_ref())?;
    emit(&args.output, &to_json(&result)?)
}

pub fn study(args: StudyArgs) -> CliResult<()> {
    let (sim, ana) = load_datasets(&args.datasets)?;
    let fmt = args.format.format;
    let baseline = load(&args.baseline, fmt)?;
    let others = load_named(&args.embs, fmt)?;
    let study = perf_vs_rpd_study(&baseline, &others, sim.as_ref(), ana.as_ref())?;
    for e in &study.entries {
        if let Some(err) = &e.error {
            warn(&format!("{}: {err}", e.name));
        }
    }
    emit(&args.output, &study.to_tsv())
}

pub fn map(args: MapArgs) -> CliResult<()> {
    let [a, b] = args.anchors.as_slice() else {
        return Err(CliError::input("--anchors takes exactly two names, as NAME,NAME"));
    };
    let dist = match &args.distances {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            DistanceMatrix::from_tsv(&text)?
        }
        None => {
            let embs = load_named(&args.embs, args.format.format)?;
            let mode = if args.common_vocab { VocabMode::Common } else { VocabMode::PerPair };
            rpd_pairwise_matrix(&embs, mode)?
        }
    };
    let layout = layout_from_distances(&dist, a, b)?;
    if layout.projected {
        warn("some distances violate the triangle inequality; points were projected onto the anchor axis");
    }
    emit(&args.output, &layout.to_tsv())
}
