//! Drivers that push flits through a bare network and check what comes out.

use std::collections::HashMap;

use phalanx::noc::{Flit, Noc, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Steps the network and checks flit conservation.
pub fn step(noc: &mut Noc, inj: &mut [Option<Flit>], del: &mut [Option<Flit>]) {
    noc.step(inj, del);
    let c = noc.counters();
    assert_eq!(
        c.injected + c.spawned,
        c.consumed + noc.in_flight(),
        "conservation broken at cycle {}",
        noc.cycle()
    );
}

pub fn tagged(dest: (usize, usize), tag: u32) -> Flit {
    let mut words = [0u32; 8];
    words[0] = tag;
    Flit::unicast(
        dest.0 as u8,
        dest.1 as u8,
        0,
        Flit::payload_from_words(&words),
    )
}

/// Injects one flit into a quiet network and returns the steps until delivery,
/// counting the injection step and the delivery step.
pub fn quiet_latency(topo: Topology, src: (usize, usize), dst: (usize, usize)) -> u64 {
    let mut noc = Noc::new(topo);
    let n = topo.len();
    let mut inj = vec![None; n];
    let mut del = vec![None; n];
    inj[topo.index(src.0, src.1)] = Some(tagged(dst, 1));
    for steps in 1..=1000 {
        step(&mut noc, &mut inj, &mut del);
        assert!(
            inj.iter().all(Option::is_none),
            "quiet network refused an injection"
        );
        if let Some(f) = del[topo.index(dst.0, dst.1)].take() {
            assert_eq!(f.payload_words()[0], 1);
            assert!(noc.is_quiet());
            return steps;
        }
        assert!(
            del.iter().all(Option::is_none),
            "delivered to the wrong router"
        );
    }
    panic!("flit lost");
}

/// Delivers `count` multicasts from `src` back to back; returns per-router
/// payload tags in arrival order.
pub fn multicast_burst(topo: Topology, src: (usize, usize), count: u32) -> Vec<Vec<u32>> {
    let mut noc = Noc::new(topo);
    let n = topo.len();
    let mut inj = vec![None; n];
    let mut del = vec![None; n];
    let mut got = vec![Vec::new(); n];
    let s = topo.index(src.0, src.1);
    let mut next = 0;
    let limit = 64 * (count as usize + n) as u64;
    while next < count || !noc.is_quiet() {
        if inj[s].is_none() && next < count {
            let mut w = [0u32; 8];
            w[0] = next;
            inj[s] = Some(Flit::broadcast(next as u16, Flit::payload_from_words(&w)));
            next += 1;
        }
        step(&mut noc, &mut inj, &mut del);
        for (r, d) in del.iter_mut().enumerate() {
            if let Some(f) = d.take() {
                assert!(f.multicast);
                got[r].push(f.payload_words()[0]);
            }
        }
        assert!(noc.cycle() < limit, "multicast burst did not drain");
    }
    got
}

/// Random traffic where each client retries until accepted. Every flit must
/// arrive exactly once, at its destination, and no flit may stay in the
/// network longer than rows × cols × (most flits outstanding during its trip).
pub fn random_traffic(topo: Topology, seed: u64, rate: f64, cycles: u64, hot_spot: bool) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = topo.len();
    let mut noc = Noc::new(topo);
    let mut inj: Vec<Option<Flit>> = vec![None; n];
    let mut del = vec![None; n];
    let mut waiting: Vec<Option<(u32, (usize, usize))>> = vec![None; n];
    // tag -> (destination, entry cycle, peak outstanding while in flight)
    let mut in_net: HashMap<u32, ((usize, usize), u64, u64)> = HashMap::new();
    let mut tag = 0u32;
    let mut delivered = 0;
    let mut t = 0u64;
    while t < cycles || !in_net.is_empty() || waiting.iter().any(Option::is_some) {
        if t < cycles {
            for (slot, w) in inj.iter_mut().zip(waiting.iter_mut()) {
                if slot.is_none() && rng.gen_bool(rate) {
                    let dst = if hot_spot {
                        (0, 0)
                    } else {
                        (rng.gen_range(0..topo.cols()), rng.gen_range(0..topo.rows()))
                    };
                    tag += 1;
                    *w = Some((tag, dst));
                    *slot = Some(tagged(dst, tag));
                }
            }
        }
        step(&mut noc, &mut inj, &mut del);
        for (slot, w) in inj.iter().zip(waiting.iter_mut()) {
            if slot.is_none() {
                if let Some((k, dst)) = w.take() {
                    in_net.insert(k, (dst, t, 0));
                }
            }
        }
        let outstanding = in_net.len() as u64;
        for (_, _, peak) in in_net.values_mut() {
            *peak = (*peak).max(outstanding);
        }
        for (r, d) in del.iter_mut().enumerate() {
            if let Some(f) = d.take() {
                let k = f.payload_words()[0];
                let (dst, _, _) = in_net.remove(&k).expect("delivered twice or never sent");
                assert_eq!(topo.index(dst.0, dst.1), r);
                delivered += 1;
            }
        }
        for (k, (_, born, peak)) in &in_net {
            let bound = n as u64 * peak;
            assert!(
                t + 1 - born <= bound,
                "watchdog: flit {k} in flight {} > {bound} cycles",
                t + 1 - born
            );
        }
        t += 1;
        assert!(t < cycles + 100_000, "traffic did not drain");
    }
    assert_eq!(noc.counters().deliveries, delivered);
    delivered
}
