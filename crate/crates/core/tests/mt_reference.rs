// SPDX-License-Identifier: Apache-2.0

//! MT19937 against the reference stream in `data/mt19937_seed5489.txt`,
//! produced by `oracles/mt19937_reference.py`.

use dprand::attack::{attack_cells, identity_channel_measurements, reconstruct_state, Channel};
use dprand::bitgen::mt19937::{untemper, MtState, N};
use dprand::GeneratorHandle;

struct Reference {
    outputs: Vec<u32>,
    state: Vec<u32>,
}

fn reference() -> Reference {
    let text = include_str!("data/mt19937_seed5489.txt");
    let (outputs, state) = text.split_once("# state").unwrap();
    let parse = |s: &str| -> Vec<u32> {
        s.lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .map(|l| l.trim().parse().unwrap())
            .collect()
    };
    Reference {
        outputs: parse(outputs),
        state: parse(state),
    }
}

#[test]
fn first_outputs_match_reference() {
    let r = reference();
    assert_eq!(r.outputs.len(), 2000);
    let mut mt = MtState::from_seed(5489);
    for (i, &want) in r.outputs.iter().enumerate() {
        assert_eq!(mt.next_u32(), want, "output {i}");
    }
}

#[test]
fn state_after_first_twist_matches_reference() {
    let r = reference();
    let mut mt = MtState::from_seed(5489);
    mt.next_u32();
    assert_eq!(&mt.words()[..], &r.state[..]);
    assert_eq!(untemper(r.outputs[0]), r.state[0]);
}

fn check_window(r: &Reference, start: usize) {
    let mut mt = reconstruct_state(&r.outputs[start..start + N]).unwrap();
    for (i, &want) in r.outputs[start + N..start + N + 1000].iter().enumerate() {
        assert_eq!(mt.next_u32(), want, "window {start}, prediction {i}");
    }
}

#[test]
fn aligned_window_predicts_next_thousand() {
    check_window(&reference(), 0);
}

#[test]
fn unaligned_window_predicts_next_thousand() {
    check_window(&reference(), 100);
}

#[test]
fn every_offset_in_one_period_validates() {
    // The attack must not depend on where the observation starts.
    for offset in 0..N as u32 {
        let mut g = GeneratorHandle::mt19937_insecure(0x5eed ^ offset);
        for _ in 0..offset {
            g.next_u32().unwrap();
        }
        let cells = identity_channel_measurements(&[0; 400], &mut g).unwrap();
        let t = attack_cells(&cells, &Channel::Identity)
            .unwrap_or_else(|e| panic!("offset {offset}: {e}"));
        assert!(t.recovered_true_counts.iter().all(|&c| c == 0));
    }
}
