use thiserror::Error;

use crate::memmap;
use crate::noc::Flit;

/// Decoded MMIO send request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SendHeader {
    /// 32-byte block of the local CRAM holding the message.
    pub src_block: u32,
    pub dest_x: u8,
    pub dest_y: u8,
    pub multicast: bool,
    pub dest_block: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SendError {
    #[error("destination ({x},{y}) outside the {cols}x{rows} grid")]
    InvalidDestination {
        x: u8,
        y: u8,
        cols: usize,
        rows: usize,
    },
    #[error("block {block} outside CRAM ({blocks} blocks)")]
    InvalidBlock { block: u32, blocks: u32 },
}

/// Splits a store to the NOC window into its send request.
///
/// Address bits `[14:5]` name the source block. Store data carries
/// `dest_x` in `[31:24]`, `dest_y` in `[23:16]`, the multicast flag in bit 15
/// and the destination block in `[9:0]`.
pub fn encode_send(
    store_address: u32,
    store_data: u32,
    rows: usize,
    cols: usize,
    cram_blocks: u32,
) -> Result<SendHeader, SendError> {
    debug_assert!(memmap::in_noc_window(store_address));
    let src_block = (store_address >> 5) & 0x3ff;
    let dest_x = (store_data >> 24) as u8;
    let dest_y = (store_data >> 16) as u8;
    let multicast = store_data & (1 << 15) != 0;
    let dest_block = (store_data & 0x3ff) as u16;

    if !multicast && (dest_x as usize >= cols || dest_y as usize >= rows) {
        return Err(SendError::InvalidDestination {
            x: dest_x,
            y: dest_y,
            cols,
            rows,
        });
    }
    for block in [src_block, u32::from(dest_block)] {
        if block >= cram_blocks {
            return Err(SendError::InvalidBlock {
                block,
                blocks: cram_blocks,
            });
        }
    }
    Ok(SendHeader {
        src_block,
        dest_x,
        dest_y,
        multicast,
        dest_block,
    })
}

/// Store data word that addresses `(x, y)` block `block`.
pub fn send_descriptor(x: u8, y: u8, block: u16, multicast: bool) -> u32 {
    (u32::from(x) << 24)
        | (u32::from(y) << 16)
        | (u32::from(multicast) << 15)
        | u32::from(block & 0x3ff)
}

/// The cluster side of its router port.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NocInterface {
    /// Flit latched by a send and waiting for the router to accept it.
    pub outgoing: Option<Flit>,
    /// A PE is stalled because the buffer or port was busy this cycle.
    pub send_stall: bool,
}
