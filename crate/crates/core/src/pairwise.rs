//! Pairwise RPD matrices between named embedding spaces.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::embedding::{align_vocabularies, common_vocabulary, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::rpd::rpd;

/// Which vocabulary each pair is compared on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VocabMode {
    /// Each pair uses its own intersection.
    #[default]
    PerPair,
    /// Every pair uses the intersection of all vocabularies.
    Common,
}

/// Symmetric matrix of distances with named rows/columns and a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    names: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    pub fn new(names: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let k = names.len();
        if values.len() != k || values.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension(format!("distance matrix must be {k}x{k}")));
        }
        for i in 0..k {
            if values[i][i] != 0.0 {
                return Err(Error::Format(format!("non-zero diagonal for {:?}", names[i])));
            }
            for j in 0..k {
                let v = values[i][j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Format(format!(
                        "invalid distance {v} between {:?} and {:?}",
                        names[i], names[j]
                    )));
                }
                if v != values[j][i] {
                    return Err(Error::Format(format!(
                        "asymmetric distances between {:?} and {:?}",
                        names[i], names[j]
                    )));
                }
            }
        }
        Ok(DistanceMatrix { names, values })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Header row of names, then one row per name.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for name in &self.names {
            out.push('\t');
            out.push_str(name);
        }
        out.push('\n');
        for (name, row) in self.names.iter().zip(&self.values) {
            out.push_str(name);
            for v in row {
                let _ = write!(out, "\t{v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Format("empty distance table".into()))?;
        let names: Vec<String> = header
            .split('\t')
            .skip(1)
            .map(|s| s.trim().to_string())
            .collect();
        let mut values = Vec::with_capacity(names.len());
        for (i, (lineno, line)) in lines.enumerate() {
            let mut fields = line.split('\t');
            let name = fields.next().unwrap_or_default().trim();
            if names.get(i).map(String::as_str) != Some(name) {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("row label {name:?} does not match header order"),
                });
            }
            let row = fields
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: lineno + 1,
                        message: format!("invalid distance {f:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            values.push(row);
        }
        Self::new(names, values)
    }
}

/// RPD between every pair of embeddings (standardization on).
pub fn rpd_pairwise_matrix(
    embs: &[(String, EmbeddingMatrix)],
    mode: VocabMode,
) -> Result<DistanceMatrix> {
    if embs.len() < 2 {
        return Err(Error::Precondition(
            "pairwise matrix needs at least two embeddings".into(),
        ));
    }
    let names: Vec<String> = embs.iter().map(|(n, _)| n.clone()).collect();
    let restricted: Vec<EmbeddingMatrix>;
    let matrices: Vec<&EmbeddingMatrix> = match mode {
        VocabMode::PerPair => embs.iter().map(|(_, e)| e).collect(),
        VocabMode::Common => {
            let shared = common_vocabulary(embs.iter().map(|(_, e)| e));
            if shared.is_empty() {
                return Err(Error::Alignment(
                    "embeddings share no common vocabulary".into(),
                ));
            }
            restricted = embs
                .iter()
                .map(|(_, e)| e.select(&shared))
                .collect::<Result<_>>()?;
            restricted.iter().collect()
        }
    };

    let k = embs.len();
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| ((i + 1)..k).map(move |j| (i, j)))
        .collect();
    let results: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            align_vocabularies(matrices[i], matrices[j])
                .and_then(|pair| rpd(&pair, true))
                .map(|r| r.rpd)
                .map_err(|e| e.in_pair(&names[i], &names[j]))
        })
        .collect::<Result<_>>()?;

    let mut values = vec![vec![0.0; k]; k];
    for (&(i, j), v) in pairs.iter().zip(results) {
        values[i][j] = v;
        values[j][i] = v;
    }
    DistanceMatrix::new(names, values)
}
