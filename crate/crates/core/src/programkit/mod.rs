//! Kernel tooling: assembler, disassembler, the flat image format and the
//! network loaders that fill IRAMs.

mod asm;
mod disasm;

use thiserror::Error;

pub use asm::{assemble, AsmError, AsmErrorKind};
pub use disasm::{disassemble, format_instr};

use crate::cluster::BLOCK_WORDS;
use crate::noc::Flit;
use crate::system::System;

/// A flat kernel: little-endian instruction words loaded at IRAM offset 0.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KernelImage {
    words: Vec<u32>,
    /// Byte offset where PEs start executing.
    pub entry: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImageError {
    #[error("image length {0} is not a multiple of 4")]
    Truncated(usize),
    #[error("image of {bytes} bytes exceeds the {limit}-byte IRAM")]
    ImageTooLarge { bytes: usize, limit: usize },
    #[error("entry point {entry:#x} outside the {len}-byte image")]
    BadEntry { entry: u32, len: usize },
}

impl KernelImage {
    pub fn new(words: Vec<u32>) -> KernelImage {
        KernelImage { words, entry: 0 }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<KernelImage, ImageError> {
        if !bytes.len().is_multiple_of(4) {
            return Err(ImageError::Truncated(bytes.len()));
        }
        let words = bytes
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(KernelImage::new(words))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.words.iter().flat_map(|w| w.to_le_bytes()).collect()
    }

    pub fn words(&self) -> &[u32] {
        &self.words
    }

    pub fn len_bytes(&self) -> usize {
        self.words.len() * 4
    }

    pub fn check_fits(&self, iram_bytes: u32) -> Result<(), ImageError> {
        let limit = iram_bytes as usize;
        if self.len_bytes() > limit {
            return Err(ImageError::ImageTooLarge {
                bytes: self.len_bytes(),
                limit,
            });
        }
        if !self.entry.is_multiple_of(4) || self.entry as usize >= self.len_bytes().max(4) {
            return Err(ImageError::BadEntry {
                entry: self.entry,
                len: self.len_bytes(),
            });
        }
        Ok(())
    }

    /// The image cut into zero-padded 32-byte blocks.
    pub fn blocks(&self) -> impl Iterator<Item = [u32; BLOCK_WORDS]> + '_ {
        self.words.chunks(BLOCK_WORDS).map(|c| {
            let mut b = [0u32; BLOCK_WORDS];
            b[..c.len()].copy_from_slice(c);
            b
        })
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("system is not quiescent: messages are still in flight")]
    NotQuiescent,
    #[error("cluster ({x},{y}) outside the grid")]
    NoSuchCluster { x: usize, y: usize },
    #[error("load did not complete within {0} cycles")]
    Stuck(u64),
    #[error("trace output failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Which IRAMs a load targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadTarget {
    /// Every IRAM of every cluster, by multicast.
    All,
    /// Every IRAM of one cluster, by unicast.
    Cluster { x: usize, y: usize },
}

/// Streams `image` from the loader client at router (0,0) into the targeted
/// IRAMs without releasing any PE. Returns network cycles from the first
/// injection to the last delivery, inclusive.
pub fn load_image(
    sys: &mut System,
    image: &KernelImage,
    target: LoadTarget,
) -> Result<u64, LoadError> {
    image.check_fits(sys.config().cluster.iram_bytes)?;
    if !sys.network_idle() {
        return Err(LoadError::NotQuiescent);
    }
    if let LoadTarget::Cluster { x, y } = target {
        if !sys.topology().contains(x, y) {
            return Err(LoadError::NoSuchCluster { x, y });
        }
    }
    let flits: Vec<Flit> = image
        .blocks()
        .enumerate()
        .map(|(k, words)| {
            let payload = Flit::payload_from_words(&words);
            let f = match target {
                LoadTarget::All => Flit::broadcast(k as u16, payload),
                LoadTarget::Cluster { x, y } => Flit::unicast(x as u8, y as u8, k as u16, payload),
            };
            f.with_iram(true)
        })
        .collect();
    if flits.is_empty() {
        return Ok(0);
    }
    let budget = sys.cycle() + 64 * (flits.len() as u64 + sys.topology().len() as u64) + 1024;
    sys.queue_loader_flits(flits);
    while !sys.network_idle() {
        if sys.cycle() >= budget {
            return Err(LoadError::Stuck(budget));
        }
        sys.step()?;
    }
    let (first, last) = sys
        .loader_window()
        .expect("flits were injected and delivered");
    Ok(last - first + 1)
}

/// Broadcasts `image` into every IRAM and then releases every PE at the
/// image's entry point. Returns the load's cycle count.
pub fn multicast_load(sys: &mut System, image: &KernelImage) -> Result<u64, LoadError> {
    let cycles = load_image(sys, image, LoadTarget::All)?;
    sys.release_all(image.entry);
    Ok(cycles)
}

/// Loads `image` into one cluster's IRAMs by unicast and releases that
/// cluster's PEs.
pub fn load_cluster(
    sys: &mut System,
    x: usize,
    y: usize,
    image: &KernelImage,
) -> Result<u64, LoadError> {
    let cycles = load_image(sys, image, LoadTarget::Cluster { x, y })?;
    sys.release_cluster(x, y, image.entry);
    Ok(cycles)
}
