use std::fmt;

/// Message payload carried by one flit.
pub const PAYLOAD_BYTES: usize = 32;
pub const PAYLOAD_BITS: u32 = 256;

/// Header bits on the wire: dest_x 8, dest_y 8, multicast 1, iram 1,
/// dest_block 10, src_x 8, src_y 8.
pub const HEADER_BITS: u32 = 44;

/// Equivalent link width used for bandwidth accounting.
pub const LINK_BITS: u32 = PAYLOAD_BITS + HEADER_BITS;

/// Router-to-client interface width of the cluster port.
pub const CLIENT_INTERFACE_BITS: u32 = 288;

/// One 32-byte NOC message plus its routing header.
#[derive(Clone, PartialEq, Eq)]
pub struct Flit {
    pub dest_x: u8,
    pub dest_y: u8,
    /// Broadcast to every cluster; `dest_x`/`dest_y` are ignored.
    pub multicast: bool,
    /// Write into the receiving cluster's IRAMs instead of its CRAM.
    pub iram: bool,
    /// 32-byte block index in the destination memory.
    pub dest_block: u16,
    pub payload: [u8; PAYLOAD_BYTES],
    pub src_x: u8,
    pub src_y: u8,
    /// Links traversed so far (instrumentation).
    pub hop_count: u32,
    /// Unique per injection; multicast copies share the id of their origin.
    pub id: u64,
    /// Columns the X-phase multicast flit has yet to seed with a Y copy.
    pub(crate) pending_cols: u64,
    /// Row at which a multicast Y copy delivers for the last time.
    pub(crate) retire_y: u8,
}

impl Flit {
    pub fn unicast(dest_x: u8, dest_y: u8, dest_block: u16, payload: [u8; PAYLOAD_BYTES]) -> Flit {
        Flit {
            dest_x,
            dest_y,
            multicast: false,
            iram: false,
            dest_block,
            payload,
            src_x: 0,
            src_y: 0,
            hop_count: 0,
            id: 0,
            pending_cols: 0,
            retire_y: 0,
        }
    }

    pub fn broadcast(dest_block: u16, payload: [u8; PAYLOAD_BYTES]) -> Flit {
        Flit {
            multicast: true,
            ..Flit::unicast(0, 0, dest_block, payload)
        }
    }

    pub fn with_iram(mut self, iram: bool) -> Flit {
        self.iram = iram;
        self
    }

    /// Payload as eight little-endian words.
    pub fn payload_words(&self) -> [u32; 8] {
        let mut out = [0u32; 8];
        for (i, w) in out.iter_mut().enumerate() {
            let b = &self.payload[i * 4..i * 4 + 4];
            *w = u32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        }
        out
    }

    pub fn payload_from_words(words: &[u32; 8]) -> [u8; PAYLOAD_BYTES] {
        let mut out = [0u8; PAYLOAD_BYTES];
        for (i, w) in words.iter().enumerate() {
            out[i * 4..i * 4 + 4].copy_from_slice(&w.to_le_bytes());
        }
        out
    }
}

impl fmt::Debug for Flit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("Flit");
        d.field("id", &self.id)
            .field("src", &(self.src_x, self.src_y));
        if self.multicast {
            d.field("multicast", &true)
                .field("pending_cols", &self.pending_cols);
        } else {
            d.field("dest", &(self.dest_x, self.dest_y));
        }
        d.field("iram", &self.iram)
            .field("dest_block", &self.dest_block)
            .field("hops", &self.hop_count)
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths() {
        assert_eq!(LINK_BITS, 300);
        assert_eq!(CLIENT_INTERFACE_BITS, 288);
        assert_eq!(PAYLOAD_BITS, 256);
    }

    #[test]
    fn payload_words_are_little_endian() {
        let mut words = [0u32; 8];
        words[0] = 0x0403_0201;
        words[7] = 0xdead_beef;
        let p = Flit::payload_from_words(&words);
        assert_eq!(&p[..4], &[1, 2, 3, 4]);
        assert_eq!(Flit::broadcast(0, p).payload_words(), words);
    }
}
