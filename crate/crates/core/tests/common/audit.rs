use phalanx::cluster::Grant;

/// Structural checks on one cycle's grants, written against the definition
/// of the crossbar rather than the arbiter's algorithm.
pub fn audit(req: &[Option<usize>], grants: &[Grant], n_banks: usize) {
    let granted: Vec<usize> = (0..req.len())
        .filter(|&i| grants[i] == Grant::Granted)
        .collect();
    assert!(granted.len() <= n_banks);
    let mut bank_used = vec![false; n_banks];
    let mut conc_used = vec![false; req.len() / 2];
    for &i in &granted {
        let b = req[i].expect("grant without request");
        assert!(!bank_used[b], "bank {b} granted twice");
        assert!(!conc_used[i / 2], "concentrator {} granted twice", i / 2);
        bank_used[b] = true;
        conc_used[i / 2] = true;
    }
    for (i, r) in req.iter().enumerate() {
        match r {
            None => assert_eq!(grants[i], Grant::Idle),
            Some(b) if grants[i] != Grant::Granted => {
                // Maximal: a loser either shares its concentrator with a
                // winner or finds its bank taken.
                assert!(
                    conc_used[i / 2] || bank_used[*b],
                    "PE {i} could have been granted"
                );
                let want = if conc_used[i / 2] {
                    Grant::LostConcentrator
                } else {
                    Grant::LostBank
                };
                assert_eq!(grants[i], want);
            }
            _ => {}
        }
    }
}
