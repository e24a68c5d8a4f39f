//! The 70% ALU / 15% load / 15% taken-branch instruction mix.

use phalanx::programkit::assemble;
use phalanx::system::{HaltCondition, Report, System, SystemConfig};

/// Twenty-instruction loop body: 14 ALU ops (one is the counter), 3 loads
/// and 3 taken branches, two of them to the next instruction.
pub fn mix_source(iterations: u32) -> String {
    let alu = |k: u32| format!("        addi  t{}, t{}, {}\n", 1 + k % 5, 1 + k % 5, k + 1);
    let mut s = format!("        lui   s0, 0x10\n        li    s1, {iterations}\nloop:\n");
    s += "        lw    t0, 0(s0)\n";
    (0..4).for_each(|k| s += &alu(k));
    s += "        beq   x0, x0, hop1\nhop1:\n";
    s += "        lw    t0, 4(s0)\n";
    (4..9).for_each(|k| s += &alu(k));
    s += "        beq   x0, x0, hop2\nhop2:\n";
    s += "        lw    t0, 8(s0)\n";
    (9..13).for_each(|k| s += &alu(k));
    s += "        addi  s1, s1, -1\n        bnez  s1, loop\n        halt\n";
    s
}

/// Runs the mix on PE 0 of a lone cluster with the other PEs in reset.
pub fn run_mix(stages: u8, iterations: u32, threads: usize) -> Report {
    let cfg = SystemConfig {
        stages,
        ..SystemConfig::single_cluster()
    };
    let image = assemble(&mix_source(iterations)).unwrap();
    let mut sys = System::build(cfg).unwrap();
    sys.set_threads(threads);
    sys.write_iram_direct(0, 0, image.words());
    sys.release_cluster(0, 0, 0);
    for i in 1..cfg.cluster.n_pes {
        sys.cluster_mut(0, 0).hold_in_reset(i);
    }
    sys.run(HaltCondition::AllHalted).unwrap()
}
