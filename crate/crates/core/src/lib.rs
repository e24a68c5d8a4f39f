//! Cycle-level simulator of a many-core RISC-V accelerator: RV32I processing
//! elements in shared-memory clusters, joined by a deflection-routed torus
//! network, plus the tooling to build and load kernels for it.

pub mod cluster;
pub mod isa;
pub mod memmap;
pub mod noc;
pub mod programkit;
pub mod system;
