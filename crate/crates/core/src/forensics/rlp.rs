//! Recursive length prefix serialization.
//!
//! The decoder is strict: it accepts only the canonical encoding of an item, so
//! `encode` is a bijection between items and the byte strings `decode` accepts.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RlpItem {
    Bytes(Vec<u8>),
    List(Vec<RlpItem>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RlpError {
    #[error("input ended before the item did")]
    Truncated,
    #[error("{0} trailing bytes after item")]
    Trailing(usize),
    #[error("non-canonical encoding at offset {0}")]
    NonCanonical(usize),
    #[error("expected a byte string")]
    ExpectedBytes,
    #[error("expected a list")]
    ExpectedList,
    #[error("integer wider than 8 bytes")]
    IntegerOverflow,
}

impl RlpItem {
    pub fn bytes(b: impl Into<Vec<u8>>) -> Self {
        RlpItem::Bytes(b.into())
    }

    /// A non-negative integer as its minimal big-endian byte string (zero is empty).
    pub fn uint(v: u64) -> Self {
        RlpItem::Bytes(minimal_be(v))
    }

    pub fn as_bytes(&self) -> Result<&[u8], RlpError> {
        match self {
            RlpItem::Bytes(b) => Ok(b),
            RlpItem::List(_) => Err(RlpError::ExpectedBytes),
        }
    }

    pub fn as_list(&self) -> Result<&[RlpItem], RlpError> {
        match self {
            RlpItem::List(l) => Ok(l),
            RlpItem::Bytes(_) => Err(RlpError::ExpectedList),
        }
    }

    pub fn as_uint(&self) -> Result<u64, RlpError> {
        let b = self.as_bytes()?;
        if b.len() > 8 {
            return Err(RlpError::IntegerOverflow);
        }
        if b.first() == Some(&0) {
            return Err(RlpError::NonCanonical(0));
        }
        Ok(b.iter().fold(0u64, |acc, &x| (acc << 8) | x as u64))
    }
}

pub fn minimal_be(v: u64) -> Vec<u8> {
    let bytes = v.to_be_bytes();
    let skip = bytes.iter().take_while(|&&b| b == 0).count();
    bytes[skip..].to_vec()
}

pub fn encode(item: &RlpItem) -> Vec<u8> {
    let mut out = Vec::new();
    encode_into(item, &mut out);
    out
}

fn encode_into(item: &RlpItem, out: &mut Vec<u8>) {
    match item {
        RlpItem::Bytes(b) if b.len() == 1 && b[0] < 0x80 => out.push(b[0]),
        RlpItem::Bytes(b) => {
            push_header(0x80, 0xb7, b.len(), out);
            out.extend_from_slice(b);
        }
        RlpItem::List(items) => {
            let mut payload = Vec::new();
            for it in items {
                encode_into(it, &mut payload);
            }
            push_header(0xc0, 0xf7, payload.len(), out);
            out.extend_from_slice(&payload);
        }
    }
}

fn push_header(short: u8, long: u8, len: usize, out: &mut Vec<u8>) {
    if len <= 55 {
        out.push(short + len as u8);
    } else {
        let len_bytes = minimal_be(len as u64);
        out.push(long + len_bytes.len() as u8);
        out.extend_from_slice(&len_bytes);
    }
}

pub fn decode(input: &[u8]) -> Result<RlpItem, RlpError> {
    let (item, used) = decode_at(input, 0)?;
    if used != input.len() {
        return Err(RlpError::Trailing(input.len() - used));
    }
    Ok(item)
}

/// Decodes one item starting at `pos`; returns the item and the offset just past it.
fn decode_at(input: &[u8], pos: usize) -> Result<(RlpItem, usize), RlpError> {
    let prefix = *input.get(pos).ok_or(RlpError::Truncated)?;
    match prefix {
        0x00..=0x7f => Ok((RlpItem::Bytes(vec![prefix]), pos + 1)),
        0x80..=0xbf => {
            let (start, len) = read_len(input, pos, 0x80, 0xb7)?;
            let body = slice(input, start, len)?;
            if len == 1 && body[0] < 0x80 {
                return Err(RlpError::NonCanonical(pos));
            }
            Ok((RlpItem::Bytes(body.to_vec()), start + len))
        }
        0xc0..=0xff => {
            let (start, len) = read_len(input, pos, 0xc0, 0xf7)?;
            let end = start + len;
            slice(input, start, len)?;
            let mut items = Vec::new();
            let mut at = start;
            while at < end {
                let (it, next) = decode_at(&input[..end], at)?;
                items.push(it);
                at = next;
            }
            Ok((RlpItem::List(items), end))
        }
    }
}

fn read_len(input: &[u8], pos: usize, short: u8, long: u8) -> Result<(usize, usize), RlpError> {
    let prefix = input[pos];
    if prefix <= long {
        return Ok((pos + 1, (prefix - short) as usize));
    }
    let n = (prefix - long) as usize;
    let len_bytes = slice(input, pos + 1, n)?;
    if len_bytes[0] == 0 || n > 8 {
        return Err(RlpError::NonCanonical(pos));
    }
    let len = len_bytes.iter().fold(0u64, |acc, &b| (acc << 8) | b as u64);
    if len <= 55 {
        return Err(RlpError::NonCanonical(pos));
    }
    let len = usize::try_from(len).map_err(|_| RlpError::Truncated)?;
    Ok((pos + 1 + n, len))
}

fn slice(input: &[u8], start: usize, len: usize) -> Result<&[u8], RlpError> {
    let end = start.checked_add(len).ok_or(RlpError::Truncated)?;
    input.get(start..end).ok_or(RlpError::Truncated)
}
