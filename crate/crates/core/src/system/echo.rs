//! Request/response ping-pong between PE 0 and every other PE.
//!
//! Each requester `g` writes `{round, reply descriptor, g}` into its outbox
//! block, sends it to block `g` of cluster (0,0), waits until word 0 of its
//! response block equals the round number, writes `R` to the trace port and
//! goes again. PE 0 walks `g = 1..N` each round, waits for that request,
//! and sends `{round, g}` back using the descriptor it carried.

use std::fmt::Write;

use crate::cluster::BLOCK_BYTES;
use crate::memmap::{CRAM_BASE, NOC_BASE};

use super::SystemConfig;

/// CRAM block assignment used by the echo kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EchoLayout {
    pub n_pes_total: u32,
    pub pes_per_cluster: u32,
    /// First outbox block; PE `local` uses `outbox_base + local`.
    pub outbox_base: u32,
    /// First response block; PE `local` uses `response_base + local`.
    pub response_base: u32,
}

impl EchoLayout {
    /// `None` when the grid has more PEs than PE 0's cluster has inbox blocks.
    pub fn for_config(cfg: &SystemConfig) -> Option<EchoLayout> {
        let per = cfg.cluster.n_pes as u32;
        let blocks = cfg.cluster.cram_blocks();
        if !per.is_power_of_two() || blocks < 2 * per {
            return None;
        }
        let layout = EchoLayout {
            n_pes_total: cfg.n_pes() as u32,
            pes_per_cluster: per,
            outbox_base: blocks - 2 * per,
            response_base: blocks - per,
        };
        (layout.n_pes_total <= layout.outbox_base && layout.response_base < 2048).then_some(layout)
    }
}

/// Assembly source of the echo kernel for `cfg`, running `rounds` rounds.
pub fn echo_kernel_source(cfg: &SystemConfig, rounds: u32) -> Option<String> {
    let l = EchoLayout::for_config(cfg)?;
    let shift = l.pes_per_cluster.trailing_zeros();
    let outbox = CRAM_BASE + l.outbox_base * BLOCK_BYTES;
    let response = CRAM_BASE + l.response_base * BLOCK_BYTES;
    let send = NOC_BASE + l.outbox_base * BLOCK_BYTES;
    let end_round = rounds + 1;
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(
        w,
        "# echo kernel: {}x{} grid, {} PEs, {rounds} round(s)",
        cfg.cols, cfg.rows, l.n_pes_total
    );
    let _ = write!(
        w,
        "        lw    s0, -8(x0)          # global PE id
        beqz  s0, server
        andi  s1, s0, {mask}
        srli  s2, s0, {shift}             # cluster index
        li    s3, 0
        li    t0, {cols}
ydiv:   blt   s2, t0, ydone       # s2 becomes x, s3 becomes y
        sub   s2, s2, t0
        addi  s3, s3, 1
        j     ydiv
ydone:  slli  t1, s1, 5
        li    t2, {outbox:#x}
        add   s4, t2, t1          # outbox
        li    t2, {response:#x}
        add   s5, t2, t1          # response block
        li    t2, {send:#x}
        add   s7, t2, t1          # send address for the outbox
        slli  t1, s2, 24
        slli  t2, s3, 16
        or    s6, t1, t2
        addi  t3, s1, {rbase}
        or    s6, s6, t3          # reply descriptor
        li    s8, 1
        li    s9, {end_round}
req:    sw    s8, 0(s4)
        sw    s6, 4(s4)
        sw    s0, 8(s4)
        sw    s0, 0(s7)           # to (0,0), block g
wait:   lw    t1, 0(s5)
        bne   t1, s8, wait
        li    t2, 'R'
        sw    t2, -12(x0)
        addi  s8, s8, 1
        bne   s8, s9, req
        halt

server: li    s8, 1
        li    s9, {end_round}
        li    s10, {n}
        li    s4, {outbox:#x}
        li    s7, {send:#x}
round:  li    s0, 1
next:   slli  t1, s0, 5
        li    t2, {cram:#x}
        add   t1, t1, t2          # inbox of g
poll:   lw    t3, 0(t1)
        bne   t3, s8, poll
        lw    t4, 4(t1)
        sw    s8, 0(s4)
        sw    s0, 4(s4)
        sw    t4, 0(s7)
        addi  s0, s0, 1
        bne   s0, s10, next
        addi  s8, s8, 1
        bne   s8, s9, round
        halt
",
        mask = l.pes_per_cluster - 1,
        cols = cfg.cols,
        rbase = l.response_base,
        n = l.n_pes_total,
        cram = CRAM_BASE,
    );
    Some(s)
}
