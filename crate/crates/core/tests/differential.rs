//! The full cluster pipeline, with eight PEs contending for banks and shared
//! units, must leave exactly the architectural state the naive reference
//! interpreter computes for each PE alone.

mod common;

use common::diff::check;
use common::gen::random_program;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn random_programs_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d1ff);
    for i in 0..150 {
        let stages = if i % 3 == 0 { 3 } else { 2 };
        let src = random_program(&mut rng, 400, i % 2 == 0);
        check(&src, stages, i % 2 == 0);
    }
}

#[test]
fn subword_traffic_on_one_bank() {
    // All PEs hammer bytes of the same word-aligned bank through the shared
    // subword units.
    let src = "\
        lw x31, -8(x0)
        andi x31, x31, 7
        slli x31, x31, 12
        lui x29, 0x10
        add x29, x29, x31
        addi x1, x0, 0x5a
        sb x1, 0(x29)
        sb x1, 17(x29)
        sh x1, 34(x29)
        lb x2, 0(x29)
        lhu x3, 34(x29)
        lbu x4, 17(x29)
        sll x5, x1, x4
        halt
    ";
    check(src, 2, false);
    check(src, 3, false);
}

#[test]
fn backward_loop_matches_reference() {
    let src = "\
        lw x31, -8(x0)
        andi x31, x31, 7
        slli x31, x31, 12
        lui x29, 0x10
        add x29, x29, x31
        addi x1, x0, 50
        addi x2, x0, 0
    top:
        add x2, x2, x1
        sw x2, 0(x29)
        lw x3, 0(x29)
        mul x4, x3, x1
        addi x1, x1, -1
        bnez x1, top
        halt
    ";
    check(src, 2, true);
}
