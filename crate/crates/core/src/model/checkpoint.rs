//! Plain-text checkpoint bundle.
//!
//! ```text
//! ex2vec-checkpoint,1
//! dim,<D>
//! n_users,<U>
//! n_items,<I>
//! decay,<f>
//! threshold,<f>
//! lambda,<f>
//! cutoff,<f>
//! alpha,<f>
//! beta,<f>
//! gamma,<f>
//! user,<idx>,<lambda_bias>,<bias>,<e_0>,...,<e_{D-1}>     (U rows)
//! item,<idx>,<bias>,<e_0>,...,<e_{D-1}>                   (I rows)
//! ```
//!
//! Every float is written in scientific notation with 17 significant digits,
//! so save followed by load reproduces each value bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::ModelParams;
use crate::error::{Error, Result};

const MAGIC: &str = "ex2vec-checkpoint,1";

/// Model parameters together with the calibrated decision threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub threshold: f64,
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, writer: W) -> Result<()> {
    let p = &ckpt.params;
    let mut w = BufWriter::new(writer);
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("dim,{}\nn_users,{}\nn_items,{}\n", p.dim, p.n_users(), p.n_items()));
    for (k, v) in [
        ("decay", p.decay),
        ("threshold", ckpt.threshold),
        ("lambda", p.lambda),
        ("cutoff", p.cutoff),
        ("alpha", p.alpha),
        ("beta", p.beta),
        ("gamma", p.gamma),
    ] {
        out.push_str(&format!("{k},{}\n", fmt(v)));
    }
    for u in 0..p.n_users() {
        out.push_str(&format!("user,{u},{},{}", fmt(p.lambda_user_bias[u]), fmt(p.user_bias[u])));
        for x in p.user_row(u) {
            out.push(',');
            out.push_str(&fmt(*x));
        }
        out.push('\n');
    }
    for i in 0..p.n_items() {
        out.push_str(&format!("item,{i},{}", fmt(p.item_bias[i])));
        for x in p.item_row(i) {
            out.push(',');
            out.push_str(&fmt(*x));
        }
        out.push('\n');
    }
    let err = |e: std::io::Error| Error::Validation(format!("checkpoint write failed: {e}"));
    w.write_all(out.as_bytes()).map_err(err)?;
    w.flush().map_err(err)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(reader: R) -> Result<Checkpoint> {
    let mut lines = BufReader::new(reader).lines().enumerate();
    let mut next = |expect: &str| -> Result<(u64, Vec<String>)> {
        let (n, line) = lines.next().ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("unexpected end of checkpoint, expected {expect}"),
        })?;
        let line = line.map_err(|e| Error::Parse {
            line: n as u64 + 1,
            message: e.to_string(),
        })?;
        Ok((n as u64 + 1, line.trim_end().split(',').map(str::to_string).collect()))
    };
    let bad = |line: u64, m: String| Error::Parse { line, message: m };

    let (ln, magic) = next("header")?;
    if magic.join(",") != MAGIC {
        return Err(bad(ln, "not an ex2vec checkpoint".into()));
    }
    let mut header = |key: &str| -> Result<String> {
        let (ln, f) = next(key)?;
        if f.len() != 2 || f[0] != key {
            return Err(bad(ln, format!("expected `{key},<value>`")));
        }
        Ok(f[1].clone())
    };
    let parse_usize = |s: String, what: &str| s.parse::<usize>().map_err(|_| bad(0, format!("bad {what}")));
    let parse_f = |s: &str, ln: u64| s.parse::<f64>().map_err(|_| bad(ln, format!("bad number `{s}`")));

    let dim = parse_usize(header("dim")?, "dim")?;
    let n_users = parse_usize(header("n_users")?, "n_users")?;
    let n_items = parse_usize(header("n_items")?, "n_items")?;
    let mut scalars = [0.0f64; 7];
    for (slot, key) in scalars
        .iter_mut()
        .zip(["decay", "threshold", "lambda", "cutoff", "alpha", "beta", "gamma"])
    {
        *slot = parse_f(&header(key)?, 0)?;
    }
    let mut p = ModelParams::new(n_users, n_items, dim);
    p.decay = scalars[0];
    let threshold = scalars[1];
    p.lambda = scalars[2];
    p.cutoff = scalars[3];
    p.alpha = scalars[4];
    p.beta = scalars[5];
    p.gamma = scalars[6];

    for u in 0..n_users {
        let (ln, f) = next("user row")?;
        if f.len() != 4 + dim || f[0] != "user" || f[1] != u.to_string() {
            return Err(bad(ln, format!("malformed user row {u}")));
        }
        p.lambda_user_bias[u] = parse_f(&f[2], ln)?;
        p.user_bias[u] = parse_f(&f[3], ln)?;
        for d in 0..dim {
            p.user_emb[u * dim + d] = parse_f(&f[4 + d], ln)?;
        }
    }
    for i in 0..n_items {
        let (ln, f) = next("item row")?;
        if f.len() != 3 + dim || f[0] != "item" || f[1] != i.to_string() {
            return Err(bad(ln, format!("malformed item row {i}")));
        }
        p.item_bias[i] = parse_f(&f[2], ln)?;
        for d in 0..dim {
            p.item_emb[i * dim + d] = parse_f(&f[3 + d], ln)?;
        }
    }
    Ok(Checkpoint { params: p, threshold })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(ckpt, file)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gradcheck::random_problem;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), threshold in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            let (params, _) = random_problem(seed);
            let ckpt = Checkpoint { params, threshold };
            let mut buf = Vec::new();
            write_checkpoint(&ckpt, &mut buf).unwrap();
            let back = read_checkpoint(buf.as_slice()).unwrap();
            prop_assert_eq!(&back, &ckpt);
            for (a, b) in back.params.user_emb.iter().zip(&ckpt.params.user_emb) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let (params, _) = random_problem(0);
        let mut buf = Vec::new();
        write_checkpoint(&Checkpoint { params, threshold: 0.5 }, &mut buf).unwrap();
        let cut = &buf[..buf.len() / 2];
        assert!(read_checkpoint(cut).is_err());
        assert!(read_checkpoint("garbage\n".as_bytes()).is_err());
    }
}
