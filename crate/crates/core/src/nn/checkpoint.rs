//! Checkpoint files: a text manifest followed by one little-endian f64 buffer.
//!
//! ```text
//! floydnet-checkpoint 1
//! tensors 2
//! init.l1.weight 9x32 0 2304
//! init.l1.bias 32 2304 256
//! data 2560
//! <2560 raw bytes>
//! ```
//! Each manifest row is `name shape byte_offset byte_len`; offsets are
//! relative to the start of the buffer.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

const MAGIC: &str = "floydnet-checkpoint 1";

pub fn write_checkpoint<W: Write>(mut w: W, tensors: &[(String, &Tensor)]) -> Result<()> {
    let mut header = format!("{MAGIC}\ntensors {}\n", tensors.len());
    let mut offset = 0usize;
    for (name, t) in tensors {
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::Checkpoint(format!("invalid tensor name {name:?}")));
        }
        let shape: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        let bytes = t.len() * 8;
        header.push_str(&format!("{name} {} {offset} {bytes}\n", shape.join("x")));
        offset += bytes;
    }
    header.push_str(&format!("data {offset}\n"));
    w.write_all(header.as_bytes())?;
    let mut buf = Vec::with_capacity(offset);
    for (_, t) in tensors {
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

fn read_line<R: BufRead>(r: &mut R, line_no: &mut usize) -> Result<String> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Err(Error::Checkpoint("unexpected end of manifest".into()));
    }
    *line_no += 1;
    Ok(line.trim_end_matches(['\n', '\r']).to_string())
}

pub fn read_checkpoint<R: BufRead>(mut r: R) -> Result<Vec<(String, Tensor)>> {
    let mut line_no = 0;
    let parse_err = |line: usize, msg: &str| Error::Parse {
        line,
        msg: msg.to_string(),
    };
    if read_line(&mut r, &mut line_no)? != MAGIC {
        return Err(Error::Checkpoint("missing checkpoint magic line".into()));
    }
    let count_line = read_line(&mut r, &mut line_no)?;
    let count: usize = count_line
        .strip_prefix("tensors ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(line_no, "expected `tensors <count>`"))?;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let line = read_line(&mut r, &mut line_no)?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(line_no, "expected `name shape offset len`"));
        }
        let shape: Vec<usize> = fields[1]
            .split('x')
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(line_no, "bad shape"))?;
        let offset: usize = fields[2]
            .parse()
            .map_err(|_| parse_err(line_no, "bad offset"))?;
        let len: usize = fields[3]
            .parse()
            .map_err(|_| parse_err(line_no, "bad length"))?;
        if shape.iter().product::<usize>() * 8 != len {
            return Err(parse_err(line_no, "length does not match shape"));
        }
        entries.push((fields[0].to_string(), shape, offset, len));
    }
    let data_line = read_line(&mut r, &mut line_no)?;
    let total: usize = data_line
        .strip_prefix("data ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(line_no, "expected `data <bytes>`"))?;
    let mut buf = vec![0u8; total];
    r.read_exact(&mut buf)?;
    let mut out = Vec::with_capacity(count);
    for (name, shape, offset, len) in entries {
        let bytes = buf
            .get(offset..offset + len)
            .ok_or_else(|| Error::Checkpoint(format!("{name} lies outside the data buffer")))?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    Ok(out)
}
