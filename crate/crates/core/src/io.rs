//! word2vec and GloVe text formats.
//!
//! `word2vec_text` starts with an `n d` header line; `glove_text` has no
//! header and infers `d` from the first line. Data lines are
//! `word v1 ... vd`, space separated.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Word2VecText,
    GloveText,
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word2vec" | "word2vec_text" => Ok(EmbeddingFormat::Word2VecText),
            "glove" | "glove_text" => Ok(EmbeddingFormat::GloveText),
            other => Err(Error::Format(format!("unknown embedding format {other:?}"))),
        }
    }
}

impl fmt::Display for EmbeddingFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingFormat::Word2VecText => f.write_str("word2vec"),
            EmbeddingFormat::GloveText => f.write_str("glove"),
        }
    }
}

pub fn load_embeddings(path: impl AsRef<Path>, format: EmbeddingFormat) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), format).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_embeddings<R: Read>(reader: R, format: EmbeddingFormat) -> Result<EmbeddingMatrix> {
    let reader = BufReader::new(reader);
    let mut lines = reader.lines().enumerate().filter_map(|(i, line)| match line {
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(Ok((i + 1, l))),
        Err(e) => Some(Err(Error::io("<reader>", e))),
    });

    let header = match format {
        EmbeddingFormat::Word2VecText => {
            let (lineno, line) = lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::Format("missing word2vec header".into()))?;
            Some(parse_header(lineno, &line)?)
        }
        EmbeddingFormat::GloveText => None,
    };

    let mut dim = header.map(|(_, d)| d);
    let mut vocab = Vec::new();
    let mut data = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for item in lines {
        let (lineno, line) = item?;
        let mut fields = line.split_whitespace();
        let word = fields.next().expect("non-empty line has a field");
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line: lineno,
                        message: format!("invalid value {f:?}"),
                    })
            })
            .collect::<Result<_>>()?;
        let d = *dim.get_or_insert(values.len());
        if d == 0 || values.len() != d {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {d} values for {word:?}, found {}", values.len()),
            });
        }
        if !seen.insert(word.to_string()) {
            return Err(Error::DuplicateVocab {
                word: word.to_string(),
                line: lineno,
            });
        }
        vocab.push(word.to_string());
        data.extend(values);
    }

    if let Some((n, _)) = header {
        if n != vocab.len() {
            return Err(Error::Format(format!(
                "header declares {n} words but file has {}",
                vocab.len()
            )));
        }
    }
    let d = match dim {
        Some(d) if !vocab.is_empty() => d,
        _ => return Err(Error::Format("no embedding rows".into())),
    };
    let matrix = DMatrix::from_row_slice(vocab.len(), d, &data);
    EmbeddingMatrix::new(vocab, matrix)
}

fn parse_header(lineno: usize, line: &str) -> Result<(usize, usize)> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    let parsed: Option<Vec<usize>> = fields.iter().map(|f| f.parse().ok()).collect();
    match parsed.as_deref() {
        Some(&[n, d]) if d > 0 => Ok((n, d)),
        _ => Err(Error::Format(format!(
            "line {lineno}: expected header \"n d\", found {line:?}"
        ))),
    }
}

pub fn save_embeddings(
    emb: &EmbeddingMatrix,
    path: impl AsRef<Path>,
    format: EmbeddingFormat,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    write_embeddings(emb, &mut writer, format)
        .and_then(|_| writer.flush())
        .map_err(|e| Error::io(path, e))
}

/// Values are written in shortest round-trip form, so reloading is exact.
pub fn write_embeddings<W: Write>(
    emb: &EmbeddingMatrix,
    writer: &mut W,
    format: EmbeddingFormat,
) -> std::io::Result<()> {
    if format == EmbeddingFormat::Word2VecText {
        writeln!(writer, "{} {}", emb.n(), emb.dim())?;
    }
    let matrix = emb.matrix();
    for (i, word) in emb.vocab().iter().enumerate() {
        write!(writer, "{word}")?;
        for v in matrix.row(i).iter() {
            write!(writer, " {v:?}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}
