//! COCO's compressed RLE string format.
//!
//! Each count is delta-coded against the count two positions earlier (from
//! the fourth count on) and written as little-endian groups of 5 bits. A
//! group is one byte `48 + bits`, with `0x20` flagging that more groups
//! follow and `0x10` acting as the sign bit of the final group.

use crate::error::{Error, Result};
use crate::mask::RleMask;

pub fn rle_string_encode(rle: &RleMask) -> String {
    let counts = rle.counts();
    let mut out = String::with_capacity(counts.len() * 2);
    for (i, &c) in counts.iter().enumerate() {
        let mut x = c as i64;
        if i > 2 {
            x -= counts[i - 2] as i64;
        }
        loop {
            let mut group = (x & 0x1f) as u8;
            x >>= 5;
            let more = if group & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                group |= 0x20;
            }
            out.push((group + 48) as char);
            if !more {
                break;
            }
        }
    }
    out
}

pub fn rle_string_decode(s: &str, width: usize, height: usize) -> Result<RleMask> {
    let bytes = s.as_bytes();
    let mut counts: Vec<i64> = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut shift = 0u32;
        loop {
            let Some(&byte) = bytes.get(p) else {
                return Err(Error::MalformedRleString {
                    offset: p,
                    reason: "string ends inside a count",
                });
            };
            if !(48..48 + 64).contains(&byte) {
                return Err(Error::MalformedRleString {
                    offset: p,
                    reason: "byte outside the encoding alphabet",
                });
            }
            if shift > 55 {
                return Err(Error::MalformedRleString {
                    offset: p,
                    reason: "count too long",
                });
            }
            let group = (byte - 48) as i64;
            x |= (group & 0x1f) << shift;
            p += 1;
            shift += 5;
            if group & 0x20 == 0 {
                if group & 0x10 != 0 {
                    x |= -1i64 << shift;
                }
                break;
            }
        }
        if counts.len() > 2 {
            x += counts[counts.len() - 2];
        }
        counts.push(x);
    }
    let counts = counts
        .into_iter()
        .map(|c| {
            u32::try_from(c).map_err(|_| Error::MalformedRleString {
                offset: p,
                reason: "decoded count out of range",
            })
        })
        .collect::<Result<Vec<u32>>>()?;
    RleMask::new(width, height, counts)
}
