// SPDX-License-Identifier: Apache-2.0

//! MT19937, the 32-bit Mersenne Twister. Not a CSPRNG: 624 outputs
//! determine its entire future. Present only for attack demonstrations and
//! testing.

pub const N: usize = 624;
const M: usize = 397;
const MATRIX_A: u32 = 0x9908_b0df;
const UPPER_MASK: u32 = 0x8000_0000;
const LOWER_MASK: u32 = 0x7fff_ffff;

const TEMPER_B: u32 = 0x9d2c_5680;
const TEMPER_C: u32 = 0xefc6_0000;

/// 624 state words and the position of the next word to temper.
/// `index == 624` means a twist is due before the next output.
#[derive(Clone, PartialEq, Eq)]
pub struct MtState {
    words: [u32; N],
    index: usize,
}

impl std::fmt::Debug for MtState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MtState")
            .field("index", &self.index)
            .field("words[0..4]", &&self.words[..4])
            .finish()
    }
}

impl MtState {
    /// Reference `init_genrand` seeding.
    pub fn from_seed(seed: u32) -> Self {
        let mut words = [0u32; N];
        words[0] = seed;
        for i in 1..N {
            let prev = words[i - 1];
            words[i] = 1_812_433_253u32
                .wrapping_mul(prev ^ (prev >> 30))
                .wrapping_add(i as u32);
        }
        MtState { words, index: N }
    }

    /// Reference `init_by_array` seeding.
    pub fn from_key(key: &[u32]) -> Self {
        let mut s = Self::from_seed(19_650_218);
        let mt = &mut s.words;
        let (mut i, mut j) = (1usize, 0usize);
        let mut k = N.max(key.len());
        while k > 0 {
            let prev = mt[i - 1];
            mt[i] = (mt[i] ^ (prev ^ (prev >> 30)).wrapping_mul(1_664_525))
                .wrapping_add(key.get(j).copied().unwrap_or(0))
                .wrapping_add(j as u32);
            i += 1;
            j += 1;
            if i >= N {
                mt[0] = mt[N - 1];
                i = 1;
            }
            if j >= key.len() {
                j = 0;
            }
            k -= 1;
        }
        k = N - 1;
        while k > 0 {
            let prev = mt[i - 1];
            mt[i] = (mt[i] ^ (prev ^ (prev >> 30)).wrapping_mul(1_566_083_941))
                .wrapping_sub(i as u32);
            i += 1;
            if i >= N {
                mt[0] = mt[N - 1];
                i = 1;
            }
            k -= 1;
        }
        mt[0] = 0x8000_0000;
        s.index = N;
        s
    }

    /// Builds a state from raw words and a position in `0..=624`.
    pub fn from_words(words: [u32; N], index: usize) -> Option<Self> {
        (index <= N).then_some(MtState { words, index })
    }

    pub fn words(&self) -> &[u32; N] {
        &self.words
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn next_u32(&mut self) -> u32 {
        if self.index >= N {
            self.twist();
        }
        let y = self.words[self.index];
        self.index += 1;
        temper(y)
    }

    fn twist(&mut self) {
        let mt = &mut self.words;
        for i in 0..N {
            let y = (mt[i] & UPPER_MASK) | (mt[(i + 1) % N] & LOWER_MASK);
            let mag = if y & 1 == 1 { MATRIX_A } else { 0 };
            mt[i] = mt[(i + M) % N] ^ (y >> 1) ^ mag;
        }
        self.index = 0;
    }
}

pub fn temper(mut y: u32) -> u32 {
    y ^= y >> 11;
    y ^= (y << 7) & TEMPER_B;
    y ^= (y << 15) & TEMPER_C;
    y ^= y >> 18;
    y
}

/// Inverse of [`temper`].
pub fn untemper(mut y: u32) -> u32 {
    y = undo_right_shift_xor(y, 18);
    y = undo_left_shift_xor_mask(y, 15, TEMPER_C);
    y = undo_left_shift_xor_mask(y, 7, TEMPER_B);
    undo_right_shift_xor(y, 11)
}

// Recovers x from y = x ^ (x >> shift). Each pass fixes `shift` more
// high-order bits.
fn undo_right_shift_xor(y: u32, shift: u32) -> u32 {
    let mut x = y;
    let mut known = shift;
    while known < 32 {
        x = y ^ (x >> shift);
        known += shift;
    }
    x
}

// Recovers x from y = x ^ ((x << shift) & mask), low-order bits first.
fn undo_left_shift_xor_mask(y: u32, shift: u32, mask: u32) -> u32 {
    let mut x = y;
    let mut known = shift;
    while known < 32 {
        x = y ^ ((x << shift) & mask);
        known += shift;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_seed_first_outputs() {
        let mut mt = MtState::from_seed(5489);
        let got: Vec<u32> = (0..5).map(|_| mt.next_u32()).collect();
        assert_eq!(got, [3499211612, 581869302, 3890346734, 3586334585, 545404204]);
    }

    #[test]
    fn ten_thousandth_output() {
        // The C++ standard pins this value for a default-seeded mt19937.
        let mut mt = MtState::from_seed(5489);
        let last = (0..10_000).map(|_| mt.next_u32()).last().unwrap();
        assert_eq!(last, 4_123_659_995);
    }

    #[test]
    fn init_by_array_reference() {
        // mt19937ar.out, key {0x123, 0x234, 0x345, 0x456}.
        let mut mt = MtState::from_key(&[0x123, 0x234, 0x345, 0x456]);
        let got: Vec<u32> = (0..5).map(|_| mt.next_u32()).collect();
        assert_eq!(got, [1067595299, 955945823, 477289528, 4107218783, 4228976476]);
    }

    #[test]
    fn untemper_edge_words() {
        assert_eq!(untemper(temper(0)), 0);
        assert_eq!(untemper(temper(u32::MAX)), u32::MAX);
    }

    #[test]
    fn from_words_bounds_index() {
        assert!(MtState::from_words([0; N], N).is_some());
        assert!(MtState::from_words([0; N], N + 1).is_none());
    }
}
