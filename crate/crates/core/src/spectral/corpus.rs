//! Tokenization and windowed co-occurrence counting.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::spectral::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenizerOptions {
    pub lowercase: bool,
    /// Trim non-alphanumeric characters from both ends of each token.
    pub strip_punctuation: bool,
    /// Treat blank lines as document boundaries that windows do not cross.
    pub split_documents: bool,
}

impl Default for TokenizerOptions {
    fn default() -> Self {
        TokenizerOptions {
            lowercase: true,
            strip_punctuation: false,
            split_documents: false,
        }
    }
}

/// Whitespace-tokenized text, as one or more documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Vec<String>>,
}

impl Corpus {
    pub fn from_text(text: &str, opts: &TokenizerOptions) -> Self {
        let mut documents = vec![Vec::new()];
        for line in text.lines() {
            if opts.split_documents && line.trim().is_empty() {
                if !documents.last().is_some_and(Vec::is_empty) {
                    documents.push(Vec::new());
                }
                continue;
            }
            let doc = documents.last_mut().expect("at least one document");
            for raw in line.split_whitespace() {
                let token = if opts.strip_punctuation {
                    raw.trim_matches(|c: char| !c.is_alphanumeric())
                } else {
                    raw
                };
                if token.is_empty() {
                    continue;
                }
                doc.push(if opts.lowercase {
                    token.to_lowercase()
                } else {
                    token.to_string()
                });
            }
        }
        documents.retain(|d| !d.is_empty());
        Corpus { documents }
    }

    pub fn from_documents(documents: Vec<Vec<String>>) -> Self {
        Corpus {
            documents: documents.into_iter().filter(|d| !d.is_empty()).collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>, opts: &TokenizerOptions) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_text(&text, opts))
    }

    pub fn documents(&self) -> &[Vec<String>] {
        &self.documents
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowWeighting {
    /// Every neighbor within the window counts 1.
    #[default]
    Flat,
    /// A neighbor at distance `k` counts `1/k`.
    Harmonic,
}

impl WindowWeighting {
    fn weight(self, distance: usize) -> f64 {
        match self {
            WindowWeighting::Flat => 1.0,
            WindowWeighting::Harmonic => 1.0 / distance as f64,
        }
    }
}

impl FromStr for WindowWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(WindowWeighting::Flat),
            "harmonic" => Ok(WindowWeighting::Harmonic),
            other => Err(Error::Precondition(format!("unknown window weighting {other:?}"))),
        }
    }
}

impl fmt::Display for WindowWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindowWeighting::Flat => "flat",
            WindowWeighting::Harmonic => "harmonic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountOptions {
    pub window: usize,
    pub min_count: usize,
    pub weighting: WindowWeighting,
}

impl Default for CountOptions {
    fn default() -> Self {
        CountOptions {
            window: 10,
            min_count: 10,
            weighting: WindowWeighting::Flat,
        }
    }
}

/// Symmetric word-word co-occurrence counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceCounts {
    vocab: Vec<String>,
    counts: SparseMatrix,
    total: f64,
    options: CountOptions,
}

impl CooccurrenceCounts {
    pub fn new(vocab: Vec<String>, counts: SparseMatrix, options: CountOptions) -> Result<Self> {
        let n = vocab.len();
        if n == 0 {
            return Err(Error::Corpus("empty vocabulary".into()));
        }
        if counts.nrows() != n || counts.ncols() != n {
            return Err(Error::Dimension(format!(
                "counts are {}x{} for {n} words",
                counts.nrows(),
                counts.ncols()
            )));
        }
        if counts.values().iter().any(|&v| v < 0.0) {
            return Err(Error::Format("negative co-occurrence count".into()));
        }
        if !counts.is_symmetric() {
            return Err(Error::Format("co-occurrence counts are not symmetric".into()));
        }
        let total = counts.sum();
        if total <= 0.0 {
            return Err(Error::Corpus("no co-occurrences within the window".into()));
        }
        Ok(CooccurrenceCounts {
            vocab,
            counts,
            total,
            options,
        })
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn counts(&self) -> &SparseMatrix {
        &self.counts
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn options(&self) -> CountOptions {
        self.options
    }

    pub fn n(&self) -> usize {
        self.vocab.len()
    }

    pub fn get(&self, a: &str, b: &str) -> f64 {
        let pos = |w: &str| self.vocab.iter().position(|v| v == w);
        match (pos(a), pos(b)) {
            (Some(i), Some(j)) => self.counts.get(i, j),
            _ => 0.0,
        }
    }

    /// Writes `i j count` triples (with option comments) and a vocabulary
    /// sidecar holding one word per line in index order.
    pub fn save(&self, triples: impl AsRef<Path>, vocab: impl AsRef<Path>) -> Result<()> {
        let (triples, vocab_path) = (triples.as_ref(), vocab.as_ref());
        let write_triples = || -> std::io::Result<()> {
            let mut w = BufWriter::new(fs::File::create(triples)?);
            writeln!(w, "# window {}", self.options.window)?;
            writeln!(w, "# min_count {}", self.options.min_count)?;
            writeln!(w, "# weighting {}", self.options.weighting)?;
            for (i, j, v) in self.counts.triplets() {
                writeln!(w, "{i} {j} {v:?}")?;
            }
            w.flush()
        };
        write_triples().map_err(|e| Error::io(triples, e))?;
        let write_vocab = || -> std::io::Result<()> {
            let mut w = BufWriter::new(fs::File::create(vocab_path)?);
            for word in &self.vocab {
                writeln!(w, "{word}")?;
            }
            w.flush()
        };
        write_vocab().map_err(|e| Error::io(vocab_path, e))
    }

    pub fn load(triples: impl AsRef<Path>, vocab: impl AsRef<Path>) -> Result<Self> {
        let (triples, vocab_path) = (triples.as_ref(), vocab.as_ref());
        let words: Vec<String> = fs::read_to_string(vocab_path)
            .map_err(|e| Error::io(vocab_path, e))?
            .lines()
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        let n = words.len();
        let mut options = CountOptions::default();
        let mut entries = Vec::new();
        let reader = BufReader::new(fs::File::open(triples).map_err(|e| Error::io(triples, e))?);
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(triples, e))?;
            let parse_err = |message: String| Error::Parse {
                line: lineno + 1,
                message,
            };
            if let Some(comment) = line.strip_prefix('#') {
                let mut parts = comment.split_whitespace();
                match (parts.next(), parts.next()) {
                    (Some("window"), Some(v)) => {
                        options.window = v.parse().map_err(|_| parse_err(format!("bad window {v:?}")))?
                    }
                    (Some("min_count"), Some(v)) => {
                        options.min_count =
                            v.parse().map_err(|_| parse_err(format!("bad min_count {v:?}")))?
                    }
                    (Some("weighting"), Some(v)) => options.weighting = v.parse()?,
                    _ => {}
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(parse_err(format!("expected 3 fields, found {}", fields.len())));
            }
            let i: usize = fields[0].parse().map_err(|_| parse_err("bad row index".into()))?;
            let j: usize = fields[1].parse().map_err(|_| parse_err("bad column index".into()))?;
            let v: f64 = fields[2].parse().map_err(|_| parse_err("bad count".into()))?;
            if i >= n || j >= n {
                return Err(parse_err(format!("index out of range for {n} words")));
            }
            entries.push((i, j, v));
        }
        Self::new(words, SparseMatrix::from_triplets(n, n, entries)?, options)
    }
}

/// Counts co-occurrences of in-vocabulary words within `window` positions of
/// each other. Words under `min_count` are dropped from the vocabulary but
/// still occupy their positions, so they do not bring other words closer.
///
/// Each unordered pair of positions adds its weight to both `(a, b)` and
/// `(b, a)`, so the result is symmetric by construction.
pub fn count_cooccurrences(corpus: &Corpus, options: &CountOptions) -> Result<CooccurrenceCounts> {
    if options.window == 0 {
        return Err(Error::Precondition("window must be at least 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::Corpus("corpus has no tokens".into()));
    }

    let mut freq: HashMap<&str, usize> = HashMap::new();
    for doc in corpus.documents() {
        for t in doc {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = freq
        .into_iter()
        .filter(|&(_, c)| c >= options.min_count)
        .collect();
    if kept.is_empty() {
        return Err(Error::Corpus(format!(
            "no word occurs at least {} times",
            options.min_count
        )));
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let index: HashMap<&str, usize> = kept.iter().enumerate().map(|(i, (w, _))| (*w, i)).collect();
    let n = kept.len();

    let mut acc: HashMap<(u32, u32), f64> = HashMap::new();
    for doc in corpus.documents() {
        let ids: Vec<Option<u32>> = doc
            .iter()
            .map(|t| index.get(t.as_str()).map(|&i| i as u32))
            .collect();
        for (pos, a) in ids.iter().enumerate() {
            let Some(a) = *a else { continue };
            for dist in 1..=options.window {
                let Some(&b) = ids.get(pos + dist) else { break };
                let Some(b) = b else { continue };
                let w = options.weighting.weight(dist);
                *acc.entry((a, b)).or_default() += w;
                *acc.entry((b, a)).or_default() += w;
            }
        }
    }
    let triplets = acc
        .into_iter()
        .map(|((a, b), v)| (a as usize, b as usize, v))
        .collect();
    let counts = SparseMatrix::from_triplets(n, n, triplets)?;
    let vocab = kept.into_iter().map(|(w, _)| w.to_string()).collect();
    CooccurrenceCounts::new(vocab, counts, *options)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(text: &str) -> Corpus {
        Corpus::from_text(text, &TokenizerOptions::default())
    }

    fn opts(window: usize, min_count: usize) -> CountOptions {
        CountOptions {
            window,
            min_count,
            weighting: WindowWeighting::Flat,
        }
    }

    #[test]
    fn aba_window_one() {
        let c = count_cooccurrences(&corpus("a b a"), &opts(1, 1)).unwrap();
        assert_eq!(c.vocab(), ["a", "b"]);
        assert_eq!(c.get("a", "b"), 2.0);
        assert_eq!(c.get("b", "a"), 2.0);
        assert_eq!(c.get("a", "a"), 0.0);
        assert_eq!(c.total(), 4.0);
    }

    #[test]
    fn aba_window_two() {
        let c = count_cooccurrences(&corpus("a b a"), &opts(2, 1)).unwrap();
        assert_eq!(c.get("a", "a"), 2.0);
        assert_eq!(c.total(), 6.0);
    }

    #[test]
    fn min_count_too_high() {
        assert!(matches!(
            count_cooccurrences(&corpus("a b a"), &opts(1, 3)),
            Err(Error::Corpus(_))
        ));
        assert!(count_cooccurrences(&corpus("   \n"), &opts(1, 1)).is_err());
        assert!(count_cooccurrences(&corpus("a b"), &opts(0, 1)).is_err());
    }

    #[test]
    fn vocab_order_frequency_then_lexicographic() {
        let c = count_cooccurrences(&corpus("z y y x x q"), &opts(1, 1)).unwrap();
        assert_eq!(c.vocab(), ["x", "y", "q", "z"]);
    }

    #[test]
    fn filtered_words_keep_positions() {
        // "c" is dropped but still separates a and b
        let c = count_cooccurrences(&corpus("a c b a b"), &opts(1, 2)).unwrap();
        assert_eq!(c.vocab(), ["a", "b"]);
        assert_eq!(c.get("a", "b"), 2.0);
    }

    #[test]
    fn lowercasing_and_punctuation() {
        let text = "The cat, the CAT.";
        let plain = Corpus::from_text(text, &TokenizerOptions::default());
        assert_eq!(plain.documents()[0], ["the", "cat,", "the", "cat."]);
        let stripped = Corpus::from_text(
            text,
            &TokenizerOptions {
                strip_punctuation: true,
                ..Default::default()
            },
        );
        assert_eq!(stripped.documents()[0], ["the", "cat", "the", "cat"]);
    }

    #[test]
    fn documents_bound_windows() {
        let split = TokenizerOptions {
            split_documents: true,
            ..Default::default()
        };
        let text = "a b\n\n\nb a\n";
        let joined = count_cooccurrences(&corpus(text), &opts(1, 1)).unwrap();
        let docs = Corpus::from_text(text, &split);
        assert_eq!(docs.documents().len(), 2);
        let separate = count_cooccurrences(&docs, &opts(1, 1)).unwrap();
        assert_eq!(joined.get("b", "b"), 2.0);
        assert_eq!(separate.get("b", "b"), 0.0);
        assert_eq!(separate.get("a", "b"), 2.0);
    }

    #[test]
    fn harmonic_weights() {
        let c = count_cooccurrences(
            &corpus("a x b"),
            &CountOptions {
                window: 2,
                min_count: 1,
                weighting: WindowWeighting::Harmonic,
            },
        )
        .unwrap();
        assert_eq!(c.get("a", "b"), 0.5);
        assert_eq!(c.get("a", "x"), 1.0);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = count_cooccurrences(&corpus("a b c a b d a"), &opts(2, 1)).unwrap();
        let (t, v) = (dir.path().join("c.txt"), dir.path().join("v.txt"));
        c.save(&t, &v).unwrap();
        assert_eq!(CooccurrenceCounts::load(&t, &v).unwrap(), c);
    }

    #[test]
    fn load_rejects_asymmetric() {
        let dir = tempfile::tempdir().unwrap();
        let (t, v) = (dir.path().join("c.txt"), dir.path().join("v.txt"));
        fs::write(&t, "0 1 2\n").unwrap();
        fs::write(&v, "a\nb\n").unwrap();
        assert!(CooccurrenceCounts::load(&t, &v).is_err());
        fs::write(&t, "0 5 2\n").unwrap();
        assert!(matches!(
            CooccurrenceCounts::load(&t, &v),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
