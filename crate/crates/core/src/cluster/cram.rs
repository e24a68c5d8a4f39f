/// Word-interleaved, banked cluster memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cram {
    banks: Vec<Vec<u32>>,
    bank_mask: u32,
    bank_shift: u32,
    bytes: u32,
}

pub const BLOCK_BYTES: u32 = 32;
pub const BLOCK_WORDS: usize = 8;

/// Bank holding a CRAM-relative byte address: the word index modulo the bank count.
pub fn bank_of(address: u32, n_banks: u32) -> usize {
    ((address >> 2) & (n_banks - 1)) as usize
}

impl Cram {
    pub fn new(bytes: u32, n_banks: u32) -> Cram {
        assert!(n_banks.is_power_of_two());
        assert_eq!(bytes % (4 * n_banks), 0);
        let per_bank = (bytes / 4 / n_banks) as usize;
        Cram {
            banks: vec![vec![0; per_bank]; n_banks as usize],
            bank_mask: n_banks - 1,
            bank_shift: n_banks.trailing_zeros(),
            bytes,
        }
    }

    pub fn bytes(&self) -> u32 {
        self.bytes
    }

    pub fn n_banks(&self) -> usize {
        self.banks.len()
    }

    pub fn blocks(&self) -> u32 {
        self.bytes / BLOCK_BYTES
    }

    pub fn bank(&self, k: usize) -> &[u32] {
        &self.banks[k]
    }

    #[inline]
    fn locate(&self, offset: u32) -> (usize, usize) {
        let word = offset >> 2;
        (
            (word & self.bank_mask) as usize,
            (word >> self.bank_shift) as usize,
        )
    }

    /// Reads the aligned word containing `offset`.
    #[inline]
    pub fn read(&self, offset: u32) -> u32 {
        let (b, i) = self.locate(offset);
        self.banks[b][i]
    }

    #[inline]
    pub fn write(&mut self, offset: u32, value: u32) {
        let (b, i) = self.locate(offset);
        self.banks[b][i] = value;
    }

    pub fn read_block(&self, block: u32) -> [u32; BLOCK_WORDS] {
        let base = block * BLOCK_BYTES;
        std::array::from_fn(|i| self.read(base + 4 * i as u32))
    }

    pub fn write_block(&mut self, block: u32, words: &[u32; BLOCK_WORDS]) {
        let base = block * BLOCK_BYTES;
        for (i, &w) in words.iter().enumerate() {
            self.write(base + 4 * i as u32, w);
        }
    }

    /// Contents in address order.
    pub fn to_words(&self) -> Vec<u32> {
        (0..self.bytes / 4).map(|w| self.read(w * 4)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_words()
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .collect()
    }
}
