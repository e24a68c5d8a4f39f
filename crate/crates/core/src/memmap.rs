//! PE-visible address map.
//!
//! | range                        | region                                   |
//! |------------------------------|------------------------------------------|
//! | `0x0000_0000 ..` iram_bytes  | IRAM of the PE pair (fetch only)         |
//! | `0x0001_0000 ..` cram_bytes  | cluster shared CRAM                      |
//! | `0x4000_0000 ..= 0x4000_7FFF`| NOC send window (store = send 32 B block)|
//! | `0xFFFF_FFF0`                | store: halt this PE                      |
//! | `0xFFFF_FFF4`                | store: emit low byte as trace character  |
//! | `0xFFFF_FFF8`                | load: global PE id                       |

pub const IRAM_BASE: u32 = 0x0000_0000;
pub const CRAM_BASE: u32 = 0x0001_0000;
pub const NOC_BASE: u32 = 0x4000_0000;
pub const NOC_WINDOW_BYTES: u32 = 0x8000;
pub const HALT_ADDR: u32 = 0xFFFF_FFF0;
pub const TRACE_ADDR: u32 = 0xFFFF_FFF4;
pub const PE_ID_ADDR: u32 = 0xFFFF_FFF8;
const CONTROL_BASE: u32 = 0xFFFF_FFF0;

/// True for addresses served by the cluster's MMIO decoder rather than memory.
pub fn is_mmio(address: u32) -> bool {
    address >= CONTROL_BASE || (NOC_BASE..NOC_BASE + NOC_WINDOW_BYTES).contains(&address)
}

pub fn in_noc_window(address: u32) -> bool {
    (NOC_BASE..NOC_BASE + NOC_WINDOW_BYTES).contains(&address)
}

/// CRAM-relative offset of `address`, if it falls inside a CRAM of `cram_bytes`.
pub fn cram_offset(address: u32, cram_bytes: u32) -> Option<u32> {
    address
        .checked_sub(CRAM_BASE)
        .filter(|&off| off < cram_bytes)
}
