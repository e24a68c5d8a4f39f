use super::{Flit, Topology};

/// What happened inside one router during one cycle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RouteEvents {
    /// The X input wanted to leave the row (turn, eject or seed a copy) but
    /// had to continue on X.
    pub deflected: bool,
    /// The X input turned onto the Y ring.
    pub turned: bool,
    /// A multicast Y copy was seeded this cycle.
    pub spawned: bool,
    /// Flits that left the network for good (final delivery or multicast retirement).
    pub consumed: u32,
    /// The client flit was injected.
    pub injected: bool,
}

#[derive(Debug, Default)]
pub struct RouteOutcome {
    pub x_out: Option<Flit>,
    pub y_out: Option<Flit>,
    pub deliver: Option<Flit>,
    pub client_accepted: bool,
    /// The client flit handed back when injection is refused.
    pub rejected: Option<Flit>,
    pub events: RouteEvents,
}

/// Routing decision of the router at (`x`, `y`).
///
/// Dimension-ordered X-then-Y with deflection. Input priority is Y, then X,
/// then the client. The Y input is never deflected: it either ejects or
/// continues on Y. An X input that cannot turn or eject continues around its
/// row. A client flit is accepted only if its first output is still free.
///
/// Multicast travels the source row on X, seeding one Y copy per column; a Y
/// copy ejects at every router it visits and retires back at the source row.
/// The source router delivers its own copy at injection and starts its
/// column's Y copy immediately.
pub fn route_select(
    topo: &Topology,
    x: u8,
    y: u8,
    x_in: Option<Flit>,
    y_in: Option<Flit>,
    client_in: Option<Flit>,
) -> RouteOutcome {
    let mut out = RouteOutcome::default();

    if let Some(f) = y_in {
        if f.multicast {
            let last = f.retire_y == y;
            if !last {
                out.y_out = Some(f.clone());
            } else {
                out.events.consumed += 1;
            }
            out.deliver = Some(f);
        } else if f.dest_y == y {
            debug_assert_eq!(f.dest_x, x, "Y-ring flit off its column");
            out.events.consumed += 1;
            out.deliver = Some(f);
        } else {
            out.y_out = Some(f);
        }
    }

    if let Some(mut f) = x_in {
        if f.multicast {
            let bit = 1u64 << x;
            if f.pending_cols & bit != 0 {
                if out.y_out.is_none() {
                    f.pending_cols &= !bit;
                    let mut copy = f.clone();
                    copy.pending_cols = 0;
                    copy.retire_y = f.src_y;
                    out.y_out = Some(copy);
                    out.events.spawned = true;
                } else {
                    out.events.deflected = true;
                }
            }
            if f.pending_cols == 0 {
                out.events.consumed += 1;
            } else {
                out.x_out = Some(f);
            }
        } else if f.dest_x != x {
            out.x_out = Some(f);
        } else if f.dest_y == y {
            if out.deliver.is_none() {
                out.events.consumed += 1;
                out.deliver = Some(f);
            } else {
                out.events.deflected = true;
                out.x_out = Some(f);
            }
        } else if out.y_out.is_none() {
            out.events.turned = true;
            out.y_out = Some(f);
        } else {
            out.events.deflected = true;
            out.x_out = Some(f);
        }
    }

    if let Some(mut f) = client_in {
        f.src_x = x;
        f.src_y = y;
        if f.multicast {
            inject_multicast(topo, x, y, f, &mut out);
        } else {
            let slot = if f.dest_x != x {
                &mut out.x_out
            } else if f.dest_y != y {
                &mut out.y_out
            } else {
                &mut out.deliver
            };
            if slot.is_none() {
                let local = f.dest_x == x && f.dest_y == y;
                *slot = Some(f);
                out.client_accepted = true;
                out.events.injected = true;
                if local {
                    out.events.consumed += 1;
                }
            } else {
                out.rejected = Some(f);
            }
        }
    }

    out
}

/// A client multicast is delivered locally at once, starts its own column's
/// Y copy (which stops one row short of the source) and leaves on X to seed
/// the other columns. It needs every one of those outputs free.
fn inject_multicast(topo: &Topology, x: u8, y: u8, mut f: Flit, out: &mut RouteOutcome) {
    let need_x = topo.cols() > 1;
    let need_y = topo.rows() > 1;
    if out.deliver.is_some() || (need_x && out.x_out.is_some()) || (need_y && out.y_out.is_some()) {
        out.rejected = Some(f);
        return;
    }
    out.client_accepted = true;
    out.events.injected = true;
    f.pending_cols = 0;
    out.deliver = Some(f.clone());
    if need_y {
        let mut copy = f.clone();
        copy.retire_y = ((usize::from(y) + topo.rows() - 1) % topo.rows()) as u8;
        out.y_out = Some(copy);
    }
    if need_x {
        f.pending_cols = topo.all_cols_mask() & !(1u64 << x);
        out.x_out = Some(f);
    }
    match (need_x, need_y) {
        (true, true) => out.events.spawned = true,
        (false, false) => out.events.consumed += 1,
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topo() -> Topology {
        Topology::new(10, 5).unwrap()
    }

    fn uni(dx: u8, dy: u8) -> Flit {
        Flit::unicast(dx, dy, 0, [0; 32])
    }

    fn mcast(src_y: u8) -> Flit {
        let mut f = Flit::broadcast(0, [0; 32]);
        f.src_y = src_y;
        f.retire_y = src_y;
        f
    }

    #[test]
    fn y_input_at_destination_ejects() {
        let o = route_select(&topo(), 2, 3, None, Some(uni(2, 3)), None);
        assert!(o.deliver.is_some() && o.x_out.is_none() && o.y_out.is_none());
        assert_eq!(o.events.consumed, 1);
    }

    #[test]
    fn turning_x_input_deflects_behind_y_traffic() {
        let o = route_select(&topo(), 2, 3, Some(uni(2, 7)), Some(uni(2, 8)), None);
        assert_eq!(o.y_out.as_ref().unwrap().dest_y, 8);
        assert_eq!(o.x_out.as_ref().unwrap().dest_y, 7);
        assert!(o.events.deflected && !o.events.turned);
    }

    #[test]
    fn client_refused_when_output_taken() {
        let o = route_select(&topo(), 0, 0, Some(uni(3, 0)), None, Some(uni(4, 4)));
        assert!(!o.client_accepted);
        assert!(o.rejected.is_some());
        let o = route_select(&topo(), 0, 0, Some(uni(3, 0)), None, Some(uni(0, 4)));
        assert!(o.client_accepted && o.y_out.is_some() && o.x_out.is_some());
    }

    #[test]
    fn multicast_copy_retires_at_source_row() {
        let o = route_select(&topo(), 1, 4, None, Some(mcast(4)), None);
        assert!(o.deliver.is_some() && o.y_out.is_none());
        assert_eq!(o.events.consumed, 1);
        let o = route_select(&topo(), 1, 5, None, Some(mcast(4)), None);
        assert!(o.deliver.is_some() && o.y_out.is_some());
        assert_eq!(o.events.consumed, 0);
    }

    #[test]
    fn multicast_seed_blocked_keeps_column_pending() {
        let mut m = mcast(0);
        m.pending_cols = 0b11111;
        let o = route_select(&topo(), 2, 0, Some(m.clone()), Some(uni(2, 5)), None);
        assert!(o.events.deflected);
        assert_eq!(o.x_out.unwrap().pending_cols, 0b11111);
        let o = route_select(&topo(), 2, 0, Some(m), None, None);
        assert!(o.events.spawned);
        assert_eq!(o.x_out.unwrap().pending_cols, 0b11011);
    }

    #[test]
    fn client_multicast_needs_all_three_outputs() {
        let t = topo();
        let o = route_select(&t, 2, 3, None, None, Some(Flit::broadcast(0, [0; 32])));
        assert!(o.client_accepted && o.events.spawned);
        assert_eq!(o.x_out.as_ref().unwrap().pending_cols, 0b11011);
        assert_eq!(o.y_out.as_ref().unwrap().retire_y, 2);
        assert!(o.deliver.is_some());
        let o = route_select(
            &t,
            2,
            3,
            None,
            Some(uni(2, 5)),
            Some(Flit::broadcast(0, [0; 32])),
        );
        assert!(!o.client_accepted && o.rejected.is_some());
        let single = Topology::new(1, 1).unwrap();
        let o = route_select(&single, 0, 0, None, None, Some(Flit::broadcast(0, [0; 32])));
        assert!(o.deliver.is_some() && o.x_out.is_none() && o.y_out.is_none());
        assert_eq!(o.events.consumed, 1);
    }

    /// Enumerates presence and intent of all three inputs and checks that every
    /// flit appears on exactly one output (multicast seeding aside) and that Y
    /// traffic is never displaced.
    #[test]
    fn exactly_one_output_exhaustive() {
        let t = topo();
        let (x, y) = (2u8, 3u8);
        // Possible Y inputs: none, eject here, continue.
        let y_opts = [None, Some(uni(2, 3)), Some(uni(2, 9))];
        // X inputs: none, pass through, turn, eject here.
        let x_opts = [None, Some(uni(4, 3)), Some(uni(2, 6)), Some(uni(2, 3))];
        // Client: none, go X, go Y, local.
        let c_opts = [None, Some(uni(0, 0)), Some(uni(2, 0)), Some(uni(2, 3))];
        for yi in &y_opts {
            for xi in &x_opts {
                for ci in &c_opts {
                    let mut tagged = Vec::new();
                    let tag = |f: &Option<Flit>, id: u64, v: &mut Vec<u64>| {
                        f.clone().map(|mut f| {
                            f.id = id;
                            v.push(id);
                            f
                        })
                    };
                    let yv = tag(yi, 1, &mut tagged);
                    let xv = tag(xi, 2, &mut tagged);
                    let cv = tag(ci, 3, &mut tagged);
                    let o = route_select(&t, x, y, xv, yv, cv);
                    let mut seen: Vec<u64> = [&o.x_out, &o.y_out, &o.deliver, &o.rejected]
                        .iter()
                        .filter_map(|f| f.as_ref().map(|f| f.id))
                        .collect();
                    seen.sort();
                    assert_eq!(seen, tagged, "y={yi:?} x={xi:?} c={ci:?}");
                    if let Some(f) = yi {
                        let kept = if f.dest_y == y { &o.deliver } else { &o.y_out };
                        assert_eq!(kept.as_ref().map(|f| f.id), Some(1));
                    }
                    assert_eq!(o.client_accepted, ci.is_some() && o.rejected.is_none());
                }
            }
        }
    }
}
