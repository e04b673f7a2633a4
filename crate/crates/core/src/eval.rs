//! Word similarity and analogy evaluation, and the RPD-vs-performance study.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{align_vocabularies, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::rpd::rpd;

/// Ranks starting at 1, ties sharing the average of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "spearman inputs have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Precondition("spearman needs at least 2 observations".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Precondition("spearman inputs must be finite".into()));
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Err(Error::Degenerate(
            "correlation is undefined for constant input".into(),
        ));
    }
    Ok(pearson(&average_ranks(x), &average_ranks(y)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityPair {
    pub word1: String,
    pub word2: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityDataset {
    pairs: Vec<SimilarityPair>,
}

impl SimilarityDataset {
    pub fn new(pairs: Vec<SimilarityPair>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Format("similarity dataset has no pairs".into()));
        }
        if let Some(p) = pairs.iter().find(|p| !p.score.is_finite()) {
            return Err(Error::Format(format!(
                "non-finite score for ({}, {})",
                p.word1, p.word2
            )));
        }
        Ok(SimilarityDataset { pairs })
    }

    /// `word1<TAB>word2<TAB>score` per line. A first line whose score field
    /// does not parse is taken as a header. Lines without tabs fall back to
    /// whitespace splitting.
    pub fn parse(text: &str, lowercase: bool) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut seen_data = false;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = if line.contains('\t') {
                line.split('\t').map(str::trim).collect()
            } else {
                line.split_whitespace().collect()
            };
            if fields.len() < 3 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let score = match fields[2].parse::<f64>() {
                Ok(s) => s,
                Err(_) if !seen_data => {
                    seen_data = true;
                    continue;
                }
                Err(_) => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("invalid score {:?}", fields[2]),
                    })
                }
            };
            seen_data = true;
            let word = |w: &str| if lowercase { w.to_lowercase() } else { w.to_string() };
            pairs.push(SimilarityPair {
                word1: word(fields[0]),
                word2: word(fields[1]),
                score,
            });
        }
        Self::new(pairs)
    }

    pub fn load(path: impl AsRef<Path>, lowercase: bool) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, lowercase)
    }

    pub fn pairs(&self) -> &[SimilarityPair] {
        &self.pairs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogyQuestion {
    pub a: String,
    pub b: String,
    pub c: String,
    pub expected: String,
    pub section: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalogyDataset {
    questions: Vec<AnalogyQuestion>,
}

impl AnalogyDataset {
    pub fn new(questions: Vec<AnalogyQuestion>) -> Result<Self> {
        if questions.is_empty() {
            return Err(Error::Format("analogy dataset has no questions".into()));
        }
        for q in &questions {
            if [&q.a, &q.b, &q.c, &q.expected].iter().any(|w| w.is_empty()) {
                return Err(Error::Format("analogy question with an empty word".into()));
            }
            if q.expected == q.a || q.expected == q.b || q.expected == q.c {
                return Err(Error::Format(format!(
                    "expected word {:?} repeats a query word",
                    q.expected
                )));
            }
        }
        Ok(AnalogyDataset { questions })
    }

    /// Google format: `a b c d` per line, `: name` starts a section.
    pub fn parse(text: &str, lowercase: bool) -> Result<Self> {
        let mut section = None;
        let mut questions = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix(':') {
                section = Some(name.trim().to_string());
                continue;
            }
            let words: Vec<String> = line
                .split_whitespace()
                .map(|w| if lowercase { w.to_lowercase() } else { w.to_string() })
                .collect();
            let [a, b, c, expected]: [String; 4] = words.try_into().map_err(|w: Vec<String>| Error::Parse {
                line: lineno + 1,
                message: format!("expected 4 words, found {}", w.len()),
            })?;
            questions.push(AnalogyQuestion {
                a,
                b,
                c,
                expected,
                section: section.clone(),
            });
        }
        Self::new(questions)
    }

    pub fn load(path: impl AsRef<Path>, lowercase: bool) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, lowercase)
    }

    pub fn questions(&self) -> &[AnalogyQuestion] {
        &self.questions
    }
}

/// Scores are present only when at least one item was answerable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity_spearman: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity_coverage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analogy_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analogy_coverage: Option<f64>,
}

impl EvalResult {
    /// Fields of `other` override unset fields of `self`.
    pub fn merge(self, other: EvalResult) -> EvalResult {
        EvalResult {
            similarity_spearman: self.similarity_spearman.or(other.similarity_spearman),
            similarity_coverage: self.similarity_coverage.or(other.similarity_coverage),
            analogy_accuracy: self.analogy_accuracy.or(other.analogy_accuracy),
            analogy_coverage: self.analogy_coverage.or(other.analogy_coverage),
        }
    }
}

fn cosine(emb: &EmbeddingMatrix, i: usize, j: usize) -> Option<f64> {
    let m = emb.matrix();
    let (a, b) = (m.row(i), m.row(j));
    let denom = a.norm() * b.norm();
    (denom > 0.0).then(|| (a.dot(&b) / denom).clamp(-1.0, 1.0))
}

/// Spearman correlation between cosine similarities and human scores. Pairs
/// with an out-of-vocabulary or zero vector count against coverage.
pub fn eval_similarity(emb: &EmbeddingMatrix, ds: &SimilarityDataset) -> Result<EvalResult> {
    let (mut cos, mut human) = (Vec::new(), Vec::new());
    for p in ds.pairs() {
        let (Some(i), Some(j)) = (emb.index_of(&p.word1), emb.index_of(&p.word2)) else {
            continue;
        };
        if let Some(c) = cosine(emb, i, j) {
            cos.push(c);
            human.push(p.score);
        }
    }
    let coverage = cos.len() as f64 / ds.pairs().len() as f64;
    let rho = if cos.len() >= 2 {
        Some(spearman(&cos, &human)?)
    } else {
        None
    };
    Ok(EvalResult {
        similarity_spearman: rho,
        similarity_coverage: Some(coverage),
        ..Default::default()
    })
}

fn normalized_rows(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    out
}

const ANALOGY_BATCH: usize = 256;

/// 3CosAdd on L2-normalized rows: the answer is the word maximizing
/// `cos(v, v_b - v_a + v_c)`, excluding `a`, `b`, `c`. Equal scores go to
/// the lexicographically smallest word, so row order does not matter.
/// Questions with any word out of vocabulary are unanswerable.
pub fn eval_analogy_3cosadd(emb: &EmbeddingMatrix, ds: &AnalogyDataset) -> Result<EvalResult> {
    let answerable: Vec<[usize; 4]> = ds
        .questions()
        .iter()
        .filter_map(|q| {
            Some([
                emb.index_of(&q.a)?,
                emb.index_of(&q.b)?,
                emb.index_of(&q.c)?,
                emb.index_of(&q.expected)?,
            ])
        })
        .collect();
    let coverage = answerable.len() as f64 / ds.questions().len() as f64;
    if answerable.is_empty() {
        return Ok(EvalResult {
            analogy_coverage: Some(0.0),
            ..Default::default()
        });
    }
    let unit = normalized_rows(emb.matrix());
    let vocab = emb.vocab();
    let d = unit.ncols();

    let correct: usize = answerable
        .par_chunks(ANALOGY_BATCH)
        .map(|batch| {
            let targets = DMatrix::from_fn(d, batch.len(), |k, q| {
                let [a, b, c, _] = batch[q];
                unit[(b, k)] - unit[(a, k)] + unit[(c, k)]
            });
            let scores = &unit * targets;
            batch
                .iter()
                .enumerate()
                .filter(|&(q, &[a, b, c, expected])| {
                    let mut best: Option<usize> = None;
                    for w in 0..unit.nrows() {
                        if w == a || w == b || w == c {
                            continue;
                        }
                        let s = scores[(w, q)];
                        best = match best {
                            Some(cur)
                                if s < scores[(cur, q)]
                                    || (s == scores[(cur, q)] && vocab[w] > vocab[cur]) =>
                            {
                                Some(cur)
                            }
                            _ => Some(w),
                        };
                    }
                    best == Some(expected)
                })
                .count()
        })
        .sum();
    Ok(EvalResult {
        analogy_accuracy: Some(correct as f64 / answerable.len() as f64),
        analogy_coverage: Some(coverage),
        ..Default::default()
    })
}

/// Runs whichever evaluations have a dataset.
pub fn evaluate(
    emb: &EmbeddingMatrix,
    sim: Option<&SimilarityDataset>,
    ana: Option<&AnalogyDataset>,
) -> Result<EvalResult> {
    let mut out = EvalResult::default();
    if let Some(ds) = sim {
        out = out.merge(eval_similarity(emb, ds)?);
    }
    if let Some(ds) = ana {
        out = out.merge(eval_analogy_3cosadd(emb, ds)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyEntry {
    pub name: String,
    pub rpd: Option<f64>,
    /// `|delta similarity_spearman| + |delta analogy_accuracy|`, over the
    /// metrics available for both the entry and the baseline.
    pub delta_perf: Option<f64>,
    pub eval: EvalResult,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfStudy {
    pub baseline: EvalResult,
    pub entries: Vec<StudyEntry>,
    /// Spearman correlation between the `rpd` and `delta_perf` columns.
    pub rank_correlation: Option<f64>,
}

impl PerfStudy {
    /// Tab-separated table with coverage columns and a trailing comment
    /// holding the rank correlation.
    pub fn to_tsv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_else(|| "NA".into());
        let mut out = String::from(
            "name\trpd\tdelta_perf\tsimilarity_coverage\tanalogy_coverage\terror\n",
        );
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                e.name,
                opt(e.rpd),
                opt(e.delta_perf),
                opt(e.eval.similarity_coverage),
                opt(e.eval.analogy_coverage),
                e.error.as_deref().unwrap_or("")
            );
        }
        let _ = writeln!(out, "# rank_correlation\t{}", opt(self.rank_correlation));
        out
    }
}

fn delta_perf(base: &EvalResult, other: &EvalResult) -> Option<f64> {
    let terms: Vec<f64> = [
        (base.similarity_spearman, other.similarity_spearman),
        (base.analogy_accuracy, other.analogy_accuracy),
    ]
    .into_iter()
    .filter_map(|(a, b)| Some((a? - b?).abs()))
    .collect();
    (!terms.is_empty()).then(|| terms.iter().sum())
}

fn study_entry(
    baseline: &EmbeddingMatrix,
    base_eval: &EvalResult,
    name: &str,
    emb: &EmbeddingMatrix,
    sim: Option<&SimilarityDataset>,
    ana: Option<&AnalogyDataset>,
) -> StudyEntry {
    let outcome = align_vocabularies(baseline, emb)
        .and_then(|pair| rpd(&pair, true))
        .and_then(|r| Ok((r.rpd, evaluate(emb, sim, ana)?)));
    match outcome {
        Ok((rpd, eval)) => StudyEntry {
            name: name.to_string(),
            rpd: Some(rpd),
            delta_perf: delta_perf(base_eval, &eval),
            eval,
            error: None,
        },
        Err(e) => StudyEntry {
            name: name.to_string(),
            rpd: None,
            delta_perf: None,
            eval: EvalResult::default(),
            error: Some(e.to_string()),
        },
    }
}

/// RPD to `baseline` and change in task performance for each of `others`.
/// Each embedding is evaluated on its own vocabulary. Failures are recorded
/// per entry and the study continues.
pub fn perf_vs_rpd_study(
    baseline: &EmbeddingMatrix,
    others: &[(String, EmbeddingMatrix)],
    sim: Option<&SimilarityDataset>,
    ana: Option<&AnalogyDataset>,
) -> Result<PerfStudy> {
    if sim.is_none() && ana.is_none() {
        return Err(Error::Precondition(
            "study needs a similarity or analogy dataset".into(),
        ));
    }
    let names: HashSet<&str> = others.iter().map(|(n, _)| n.as_str()).collect();
    if names.len() != others.len() {
        return Err(Error::Precondition("study entry names must be unique".into()));
    }
    let base_eval = evaluate(baseline, sim, ana)?;
    let entries: Vec<StudyEntry> = others
        .par_iter()
        .map(|(name, emb)| study_entry(baseline, &base_eval, name, emb, sim, ana))
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = entries
        .iter()
        .filter_map(|e| Some((e.rpd?, e.delta_perf?)))
        .unzip();
    let rank_correlation = if xs.len() >= 2 {
        spearman(&xs, &ys).ok()
    } else {
        None
    };
    Ok(PerfStudy {
        baseline: base_eval,
        entries,
        rank_correlation,
    })
}
