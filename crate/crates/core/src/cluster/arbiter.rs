//! PE-side CRAM arbitration: 2:1 concentrators feeding a crossbar onto the
//! banks, plus the round-robin pointer used by every shared resource.

/// Round-robin pointer over `n` requesters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundRobin {
    next: usize,
}

impl RoundRobin {
    pub fn new() -> RoundRobin {
        RoundRobin { next: 0 }
    }

    /// Picks the first requester at or after the pointer, cyclically.
    /// The pointer only moves past the winner when more than one requested.
    pub fn pick(&mut self, n: usize, mut requesting: impl FnMut(usize) -> bool) -> Option<usize> {
        let mut winner = None;
        let mut count = 0;
        for k in 0..n {
            let i = (self.next + k) % n;
            if requesting(i) {
                count += 1;
                if winner.is_none() {
                    winner = Some(i);
                }
            }
        }
        if count > 1 {
            self.next = (winner.unwrap() + 1) % n;
        }
        winner
    }
}

/// Outcome for one PE in one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grant {
    #[default]
    Idle,
    Granted,
    /// The pair partner took the concentrator.
    LostConcentrator,
    /// The target bank went to another concentrator.
    LostBank,
}

/// Two-stage arbiter state for `n_pes` PEs over `n_banks` banks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CramArbiter {
    n_banks: usize,
    /// Preferred PE (0 = even, 1 = odd) of each concentrator.
    conc_pref: Vec<u8>,
    bank_rr: Vec<RoundRobin>,
    // scratch
    conc_done: Vec<bool>,
    bank_taken: Vec<bool>,
    forward: Vec<Option<usize>>,
}

impl CramArbiter {
    pub fn new(n_pes: usize, n_banks: usize) -> CramArbiter {
        assert!(n_pes.is_multiple_of(2) && n_pes > 0, "PEs come in pairs");
        let n_conc = n_pes / 2;
        CramArbiter {
            n_banks,
            conc_pref: vec![0; n_conc],
            bank_rr: vec![RoundRobin::new(); n_banks],
            conc_done: vec![false; n_conc],
            bank_taken: vec![false; n_banks],
            forward: vec![None; n_conc],
        }
    }

    /// Arbitrates one cycle. `requests[pe]` is the bank a PE wants, if any;
    /// results land in `grants`.
    ///
    /// Each concentrator forwards one of its PEs (preferred one first), each
    /// bank grants one forwarded request round-robin over concentrators. A
    /// concentrator whose pick lost may then forward its other PE toward a
    /// still-free bank; this repeats until nothing changes, so the grant set
    /// is maximal. Pointers advance only when a contested grant is made.
    pub fn arbitrate(&mut self, requests: &[Option<usize>], grants: &mut [Grant]) {
        let n_conc = self.conc_pref.len();
        assert_eq!(requests.len(), 2 * n_conc);
        assert_eq!(grants.len(), requests.len());
        for (g, r) in grants.iter_mut().zip(requests) {
            *g = if r.is_some() {
                Grant::LostBank
            } else {
                Grant::Idle
            };
        }
        self.conc_done.iter_mut().for_each(|d| *d = false);
        self.bank_taken.iter_mut().for_each(|t| *t = false);

        loop {
            // Stage 1: concentrators.
            let mut any = false;
            for c in 0..n_conc {
                self.forward[c] = None;
                if self.conc_done[c] {
                    continue;
                }
                let pref = 2 * c + self.conc_pref[c] as usize;
                let other = 2 * c + 1 - self.conc_pref[c] as usize;
                for pe in [pref, other] {
                    if let Some(bank) = requests[pe] {
                        if !self.bank_taken[bank] {
                            self.forward[c] = Some(pe);
                            any = true;
                            break;
                        }
                    }
                }
            }
            if !any {
                break;
            }
            // Stage 2: crossbar, one winner per bank.
            for bank in 0..self.n_banks {
                if self.bank_taken[bank] {
                    continue;
                }
                let forward = &self.forward;
                let wants = |c: usize| forward[c].is_some_and(|pe| requests[pe] == Some(bank));
                let Some(c) = self.bank_rr[bank].pick(n_conc, wants) else {
                    continue;
                };
                let pe = self.forward[c].unwrap();
                grants[pe] = Grant::Granted;
                self.bank_taken[bank] = true;
                self.conc_done[c] = true;
                let partner = pe ^ 1;
                if requests[partner].is_some() {
                    self.conc_pref[c] = (partner & 1) as u8;
                    grants[partner] = Grant::LostConcentrator;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(arb: &mut CramArbiter, req: &[Option<usize>]) -> Vec<Grant> {
        let mut g = vec![Grant::Idle; req.len()];
        arb.arbitrate(req, &mut g);
        g
    }

    #[test]
    fn disjoint_banks_all_granted() {
        let mut arb = CramArbiter::new(8, 4);
        let req = [Some(0), None, Some(1), None, Some(2), None, Some(3), None];
        let g = run(&mut arb, &req);
        assert_eq!(g.iter().filter(|&&g| g == Grant::Granted).count(), 4);
        assert!(g
            .iter()
            .all(|&g| g != Grant::LostBank && g != Grant::LostConcentrator));
    }

    #[test]
    fn pair_partners_share_one_slot() {
        let mut arb = CramArbiter::new(8, 4);
        let req = [Some(0), Some(3), None, None, None, None, None, None];
        let g = run(&mut arb, &req);
        assert_eq!(g[0], Grant::Granted);
        assert_eq!(g[1], Grant::LostConcentrator);
        let g = run(&mut arb, &req);
        assert_eq!(g[1], Grant::Granted);
        assert_eq!(g[0], Grant::LostConcentrator);
    }

    #[test]
    fn loser_partner_retries_free_bank() {
        // Concentrator 0 prefers PE 0 (bank 0) but concentrator 1 also wants
        // bank 0 and holds the bank pointer's favour after a first round.
        let mut arb = CramArbiter::new(4, 4);
        // Move bank 0's pointer past concentrator 0.
        run(&mut arb, &[Some(0), None, Some(0), None]);
        let g = run(&mut arb, &[Some(0), Some(1), Some(0), None]);
        assert_eq!(g[2], Grant::Granted);
        assert_eq!(g[1], Grant::Granted, "maximal matching must use bank 1");
        assert_eq!(g[0], Grant::LostConcentrator);
    }

    /// Frozen from exhaustive stepping of the two-stage round robin: under
    /// all-8-on-bank-0 the grant order over 8 cycles is 0,2,4,6,1,3,5,7.
    #[test]
    fn hammering_one_bank_rotates_through_all_pes() {
        let mut arb = CramArbiter::new(8, 4);
        let req = [Some(0); 8];
        let mut order = Vec::new();
        for _ in 0..16 {
            let g = run(&mut arb, &req);
            let winners: Vec<usize> = (0..8).filter(|&i| g[i] == Grant::Granted).collect();
            assert_eq!(winners.len(), 1);
            order.push(winners[0]);
        }
        assert_eq!(order, [0, 2, 4, 6, 1, 3, 5, 7, 0, 2, 4, 6, 1, 3, 5, 7]);
    }

    #[test]
    fn round_robin_only_moves_when_contested() {
        let mut rr = RoundRobin::new();
        assert_eq!(rr.pick(4, |i| i == 2), Some(2));
        assert_eq!(rr.pick(4, |i| i == 1 || i == 2), Some(1));
        assert_eq!(rr.pick(4, |i| i == 1 || i == 2), Some(2));
        assert_eq!(rr.pick(4, |_| false), None);
    }
}
