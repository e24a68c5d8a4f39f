//! Cluster-versus-reference comparison.

use super::reference::RefMachine;
use phalanx::cluster::{Cluster, ClusterConfig, ClusterParams};
use phalanx::isa::PeStatus;
use phalanx::programkit::assemble;

/// Runs `src` on all PEs of one cluster and on the reference; panics on any
/// difference. Returns the cluster's cycle count and the fewest instructions
/// any PE retired.
pub fn check(src: &str, stages: u8, with_mul: bool) -> (u64, u64) {
    let image = assemble(src).unwrap_or_else(|e| panic!("{e}\n{src}"));
    let cfg = ClusterConfig::default();
    let params = ClusterParams {
        stages,
        has_mul: with_mul,
        ..ClusterParams::single()
    };
    let mut cluster = Cluster::new(cfg, params).unwrap();
    cluster.load_iram(image.words());
    cluster.release(0);
    let mut events = Vec::new();
    let mut cycles = 0;
    while !cluster.all_stopped() {
        events.clear();
        cluster.cycle(None, &mut events);
        cycles += 1;
        assert!(cycles < 200_000, "cluster did not halt");
    }

    let mut fewest = u64::MAX;
    let mut mem = vec![0u8; cfg.cram_bytes as usize];
    for id in 0..cfg.n_pes {
        let mut m = RefMachine::new(image.words(), &mut mem, id as u32);
        m.run(100_000);
        assert!(m.pe.halted, "reference did not halt");
        let got = cluster.pe(id);
        assert_eq!(got.status, PeStatus::Halted, "PE {id}\n{src}");
        assert_eq!(got.regs, m.pe.x, "PE {id} registers\n{src}");
        assert_eq!(got.pc, m.pe.pc, "PE {id} pc");
        assert_eq!(got.retired, m.pe.retired, "PE {id} retired");
        fewest = fewest.min(got.retired);
        let s = cluster.pe_stats(id);
        assert_eq!(s.active_cycles, s.retired + s.stalls.total());
    }
    assert_eq!(cluster.cram().to_bytes(), mem, "CRAM image\n{src}");
    (cycles, fewest)
}
