// SPDX-License-Identifier: Apache-2.0

use sha2::{Digest, Sha256};

use super::{EntropyBlock, EntropyError};

/// Longest output [`mix`] will produce.
pub const MAX_MIX_OUTPUT: usize = 64;

/// Conditions `blocks` into `out_len` bytes with a SHA-256 extractor.
///
/// Output block `i` is
/// `SHA256(be32(i) || be32(out_len) || be64(|tag|) || tag || be64(#blocks) || {be64(|b|) || b}*)`,
/// and the blocks are concatenated and truncated. Every input is length
/// prefixed, so no source can cancel or shift another's contribution.
pub fn mix(
    blocks: &[EntropyBlock],
    out_len: usize,
    domain_tag: &[u8],
) -> Result<Vec<u8>, EntropyError> {
    if blocks.is_empty() {
        return Err(EntropyError::EmptyInput);
    }
    if out_len == 0 || out_len > MAX_MIX_OUTPUT {
        return Err(EntropyError::RequestTooLarge {
            requested: out_len,
            limit: MAX_MIX_OUTPUT,
        });
    }

    let body_len = 16 + domain_tag.len() + blocks.iter().map(|b| 8 + b.len()).sum::<usize>();
    let mut body = Vec::with_capacity(body_len);
    body.extend_from_slice(&(domain_tag.len() as u64).to_be_bytes());
    body.extend_from_slice(domain_tag);
    body.extend_from_slice(&(blocks.len() as u64).to_be_bytes());
    for b in blocks {
        body.extend_from_slice(&(b.len() as u64).to_be_bytes());
        body.extend_from_slice(b.bytes());
    }

    let mut out = Vec::with_capacity(out_len.next_multiple_of(32));
    let mut counter = 0u32;
    while out.len() < out_len {
        let mut h = Sha256::new();
        h.update(counter.to_be_bytes());
        h.update((out_len as u32).to_be_bytes());
        h.update(&body);
        out.extend_from_slice(&h.finalize());
        counter += 1;
    }
    out.truncate(out_len);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::ResistanceClass;

    fn block(bytes: Vec<u8>) -> EntropyBlock {
        EntropyBlock::new(bytes, "t", ResistanceClass::Unknown).unwrap()
    }

    #[test]
    fn zero_block_known_answer() {
        // tests/oracles/mix_kat.py
        let out = mix(&[block(vec![0; 48])], 48, b"seed").unwrap();
        assert_eq!(
            hex::encode(out),
            "ae8b2ab2b6ae2d7e2d99cb49131f4edbc140421f633e85a225707c4c8a4b77cf\
             0dc936de5f854aaaa7c213b1db103b72"
        );
    }

    #[test]
    fn two_block_known_answer() {
        let out = mix(
            &[block((0..48).collect()), block(vec![0xff; 16])],
            64,
            b"dprand/test",
        )
        .unwrap();
        assert_eq!(
            hex::encode(out),
            "ca1458354a17b295717eef6a84b6052ca8c84452655689ccb1999707c96fc085\
             aa950583325e8b86d231ffcbf90f05765b0c092efe11cd46dab82554923efa0b"
        );
    }

    #[test]
    fn deterministic_and_domain_separated() {
        let blocks = [block(vec![9; 32])];
        assert_eq!(
            mix(&blocks, 48, b"a").unwrap(),
            mix(&blocks, 48, b"a").unwrap()
        );
        assert_ne!(
            mix(&blocks, 48, b"a").unwrap(),
            mix(&blocks, 48, b"b").unwrap()
        );
    }

    #[test]
    fn empty_input_refused() {
        assert_eq!(mix(&[], 48, b"seed"), Err(EntropyError::EmptyInput));
    }

    #[test]
    fn output_length_bounds() {
        let blocks = [block(vec![1])];
        assert!(mix(&blocks, 65, b"").is_err());
        assert!(mix(&blocks, 0, b"").is_err());
        assert_eq!(mix(&blocks, 1, b"").unwrap().len(), 1);
    }
}
