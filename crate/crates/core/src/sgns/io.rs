//! Embedding file formats.
//!
//! Text: a `<vocab_size> <dim>` header line followed by one `key v1 ... vd`
//! line per word, in vocabulary order (descending count).
//!
//! Binary (little-endian): 8-byte magic, `u32` version, `u8` value width
//! (4 or 8), `u8` output-table flag, 2 reserved bytes, `u32` period index,
//! `u64` vocab size, `u64` dim, then per word a `u32` key length, the UTF-8
//! key and a `u64` count, then the input matrix and optionally the output
//! matrix, row-major.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::space::{EmbeddingSpace, WordVectors};

pub const BINARY_MAGIC: [u8; 8] = *b"DRIFTEMB";
const BINARY_VERSION: u32 = 1;

pub fn write_text<W: Write, V: WordVectors + ?Sized>(vectors: &V, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let vocab = vectors.vocab();
    let dim = vectors.dim();
    writeln!(w, "{} {}", vocab.len(), dim)?;
    let mut row = vec![0.0; dim];
    for (id, key) in vocab.keys().iter().enumerate() {
        if key.is_empty() || key.chars().any(char::is_whitespace) {
            return Err(Error::Format(format!(
                "key `{key}` cannot be written to the text format"
            )));
        }
        vectors.read_row(id as u32, &mut row);
        w.write_all(key.as_bytes())?;
        for &x in &row {
            write!(w, " {}", x as f32)?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the text format. Counts are not stored in it, so the resulting
/// vocabulary has zero counts and keeps file order; output vectors are zero.
pub fn read_text<R: Read>(reader: R) -> Result<EmbeddingSpace> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty embedding file".into()))??;
    let mut parts = header.split_whitespace();
    let parse_usize = |s: Option<&str>| -> Result<usize> {
        s.and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad header `{header}`")))
    };
    let n = parse_usize(parts.next())?;
    let dim = parse_usize(parts.next())?;
    if parts.next().is_some() {
        return Err(Error::Format(format!("bad header `{header}`")));
    }

    let mut keys = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * dim);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = keys.len() + 2;
        let mut fields = line.split_whitespace();
        let key = fields.next().expect("non-empty line");
        let before = data.len();
        for f in fields {
            let v: f32 = f
                .parse()
                .map_err(|_| Error::Format(format!("line {lineno}: bad float `{f}`")))?;
            data.push(v);
        }
        if data.len() - before != dim {
            return Err(Error::Format(format!(
                "line {lineno}: expected {dim} values, found {}",
                data.len() - before
            )));
        }
        keys.push(key.to_owned());
    }
    if keys.len() != n {
        return Err(Error::Format(format!(
            "header declares {n} words, file has {}",
            keys.len()
        )));
    }
    let vocab = Vocabulary::from_sorted(keys, vec![0; n]);
    if vocab.keys().len() != n || (0..n).any(|i| vocab.id(&vocab.keys()[i]) != Some(i as u32)) {
        return Err(Error::Format("duplicate keys in embedding file".into()));
    }
    Ok(EmbeddingSpace {
        vocab,
        input_vectors: Matrix::from_vec(n, dim, data),
        output_vectors: Matrix::zeros(n, dim),
        period_index: 0,
    })
}

trait Scalar: Copy {
    const WIDTH: u8;
    fn write_le<W: Write>(self, w: &mut W) -> std::io::Result<()>;
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const WIDTH: u8 = 4;
    fn write_le<W: Write>(self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&self.to_le_bytes())
    }
    fn read_le(b: &[u8]) -> Self {
        f32::from_le_bytes(b.try_into().expect("4 bytes"))
    }
}

impl Scalar for f64 {
    const WIDTH: u8 = 8;
    fn write_le<W: Write>(self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&self.to_le_bytes())
    }
    fn read_le(b: &[u8]) -> Self {
        f64::from_le_bytes(b.try_into().expect("8 bytes"))
    }
}

fn write_table<T: Scalar, W: Write>(
    writer: W,
    period: usize,
    vocab: &Vocabulary,
    input: &Matrix<T>,
    output: Option<&Matrix<T>>,
) -> Result<()> {
    let mut w = BufWriter::new(writer);
    w.write_all(&BINARY_MAGIC)?;
    w.write_all(&BINARY_VERSION.to_le_bytes())?;
    w.write_all(&[T::WIDTH, u8::from(output.is_some()), 0, 0])?;
    w.write_all(&(period as u32).to_le_bytes())?;
    w.write_all(&(vocab.len() as u64).to_le_bytes())?;
    w.write_all(&(input.cols() as u64).to_le_bytes())?;
    for (key, &count) in vocab.keys().iter().zip(vocab.counts()) {
        w.write_all(&(key.len() as u32).to_le_bytes())?;
        w.write_all(key.as_bytes())?;
        w.write_all(&count.to_le_bytes())?;
    }
    for m in std::iter::once(input).chain(output) {
        for &v in m.as_slice() {
            v.write_le(&mut w)?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Table<T> {
    period: usize,
    vocab: Vocabulary,
    input: Matrix<T>,
    output: Option<Matrix<T>>,
}

fn read_exact_vec<R: Read>(r: &mut R, n: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated binary embedding file: {e}")))?;
    Ok(buf)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_exact_vec(r, 4)?.try_into().unwrap()))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_exact_vec(r, 8)?.try_into().unwrap()))
}

fn read_table<T: Scalar, R: Read>(reader: R) -> Result<Table<T>> {
    let mut r = BufReader::new(reader);
    if read_exact_vec(&mut r, 8)? != BINARY_MAGIC {
        return Err(Error::Format("not a binary embedding file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != BINARY_VERSION {
        return Err(Error::Format(format!("unsupported binary version {version}")));
    }
    let flags = read_exact_vec(&mut r, 4)?;
    if flags[0] != T::WIDTH {
        return Err(Error::Format(format!(
            "binary file stores {}-byte values, expected {}",
            flags[0],
            T::WIDTH
        )));
    }
    let has_output = flags[1] != 0;
    let period = read_u32(&mut r)? as usize;
    let n = read_u64(&mut r)? as usize;
    let dim = read_u64(&mut r)? as usize;
    let mut keys = Vec::with_capacity(n);
    let mut counts = Vec::with_capacity(n);
    for _ in 0..n {
        let len = read_u32(&mut r)? as usize;
        let key = String::from_utf8(read_exact_vec(&mut r, len)?)
            .map_err(|_| Error::Format("key is not valid UTF-8".into()))?;
        keys.push(key);
        counts.push(read_u64(&mut r)?);
    }
    let width = T::WIDTH as usize;
    let read_matrix = |r: &mut BufReader<R>| -> Result<Matrix<T>> {
        let bytes = read_exact_vec(r, n * dim * width)?;
        let data = bytes.chunks_exact(width).map(T::read_le).collect();
        Ok(Matrix::from_vec(n, dim, data))
    };
    let input = read_matrix(&mut r)?;
    let output = if has_output {
        Some(read_matrix(&mut r)?)
    } else {
        None
    };
    Ok(Table {
        period,
        vocab: Vocabulary::from_sorted(keys, counts),
        input,
        output,
    })
}

pub fn write_binary<W: Write>(space: &EmbeddingSpace, writer: W) -> Result<()> {
    write_table(
        writer,
        space.period_index,
        &space.vocab,
        &space.input_vectors,
        Some(&space.output_vectors),
    )
}

pub fn read_binary<R: Read>(reader: R) -> Result<EmbeddingSpace> {
    let t = read_table::<f32, _>(reader)?;
    let n = t.vocab.len();
    let dim = t.input.cols();
    Ok(EmbeddingSpace {
        vocab: t.vocab,
        input_vectors: t.input,
        output_vectors: t.output.unwrap_or_else(|| Matrix::zeros(n, dim)),
        period_index: t.period,
    })
}

pub(crate) fn write_binary_f64<W: Write>(
    writer: W,
    period: usize,
    vocab: &Vocabulary,
    vectors: &Matrix<f64>,
) -> Result<()> {
    write_table(writer, period, vocab, vectors, None)
}

pub(crate) fn read_binary_f64<R: Read>(reader: R) -> Result<(usize, Vocabulary, Matrix<f64>)> {
    let t = read_table::<f64, _>(reader)?;
    Ok((t.period, t.vocab, t.input))
}

/// Loads either format, sniffing the binary magic.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingSpace> {
    let bytes = std::fs::read(path).map_err(|e| Error::io_at(path, e))?;
    if bytes.starts_with(&BINARY_MAGIC) {
        read_binary(bytes.as_slice())
    } else {
        read_text(bytes.as_slice())
    }
}
