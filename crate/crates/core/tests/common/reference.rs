//! Naive RV32I(+MUL) interpreter written straight from the ISA tables.
//!
//! Deliberately shares nothing with the simulator: it decodes raw words
//! itself, keeps memory as a flat byte array and knows only the few MMIO
//! addresses the generated programs touch.

pub const CRAM_BASE: u32 = 0x0001_0000;
const HALT: u32 = 0xFFFF_FFF0;
const PE_ID: u32 = 0xFFFF_FFF8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefPe {
    pub pc: u32,
    pub x: [u32; 32],
    pub retired: u64,
    pub halted: bool,
}

#[derive(Debug)]
pub struct RefMachine<'a> {
    pub pe: RefPe,
    pub code: &'a [u32],
    pub mem: &'a mut [u8],
    pub id: u32,
}

fn bits(w: u32, hi: u32, lo: u32) -> u32 {
    (w >> lo) & ((1u32 << (hi - lo + 1)) - 1)
}

fn sext(v: u32, width: u32) -> u32 {
    let s = 32 - width;
    (((v << s) as i32) >> s) as u32
}

impl<'a> RefMachine<'a> {
    pub fn new(code: &'a [u32], mem: &'a mut [u8], id: u32) -> Self {
        RefMachine {
            pe: RefPe {
                pc: 0,
                x: [0; 32],
                retired: 0,
                halted: false,
            },
            code,
            mem,
            id,
        }
    }

    fn load(&self, addr: u32, size: u32) -> u32 {
        if addr == PE_ID && size == 4 {
            return self.id;
        }
        assert_eq!(addr % size, 0, "misaligned load at {addr:#x}");
        let off = addr.checked_sub(CRAM_BASE).expect("load below CRAM") as usize;
        let mut v = 0u32;
        for i in 0..size as usize {
            v |= u32::from(self.mem[off + i]) << (8 * i);
        }
        v
    }

    fn store(&mut self, addr: u32, size: u32, v: u32) -> bool {
        if addr == HALT {
            return true;
        }
        assert_eq!(addr % size, 0, "misaligned store at {addr:#x}");
        let off = addr.checked_sub(CRAM_BASE).expect("store below CRAM") as usize;
        for i in 0..size as usize {
            self.mem[off + i] = (v >> (8 * i)) as u8;
        }
        false
    }

    /// Executes one instruction.
    pub fn step(&mut self) {
        let pc = self.pe.pc;
        let w = self.code[(pc / 4) as usize];
        let opcode = bits(w, 6, 0);
        let rd = bits(w, 11, 7) as usize;
        let f3 = bits(w, 14, 12);
        let rs1 = self.pe.x[bits(w, 19, 15) as usize];
        let rs2 = self.pe.x[bits(w, 24, 20) as usize];
        let f7 = bits(w, 31, 25);
        let i_imm = sext(bits(w, 31, 20), 12);
        let s_imm = sext(bits(w, 31, 25) << 5 | bits(w, 11, 7), 12);
        let b_imm = sext(
            bits(w, 31, 31) << 12
                | bits(w, 7, 7) << 11
                | bits(w, 30, 25) << 5
                | bits(w, 11, 8) << 1,
            13,
        );
        let u_imm = w & 0xffff_f000;
        let j_imm = sext(
            bits(w, 31, 31) << 20
                | bits(w, 19, 12) << 12
                | bits(w, 20, 20) << 11
                | bits(w, 30, 21) << 1,
            21,
        );
        let mut next = pc.wrapping_add(4);
        let mut result: Option<u32> = None;
        match opcode {
            0x37 => result = Some(u_imm),
            0x17 => result = Some(pc.wrapping_add(u_imm)),
            0x6f => {
                result = Some(pc.wrapping_add(4));
                next = pc.wrapping_add(j_imm);
            }
            0x67 => {
                result = Some(pc.wrapping_add(4));
                next = rs1.wrapping_add(i_imm) & !1;
            }
            0x63 => {
                let taken = match f3 {
                    0 => rs1 == rs2,
                    1 => rs1 != rs2,
                    4 => (rs1 as i32) < (rs2 as i32),
                    5 => (rs1 as i32) >= (rs2 as i32),
                    6 => rs1 < rs2,
                    7 => rs1 >= rs2,
                    _ => panic!("bad branch {w:#x}"),
                };
                if taken {
                    next = pc.wrapping_add(b_imm);
                }
            }
            0x03 => {
                let a = rs1.wrapping_add(i_imm);
                result = Some(match f3 {
                    0 => sext(self.load(a, 1), 8),
                    1 => sext(self.load(a, 2), 16),
                    2 => self.load(a, 4),
                    4 => self.load(a, 1),
                    5 => self.load(a, 2),
                    _ => panic!("bad load {w:#x}"),
                });
            }
            0x23 => {
                let a = rs1.wrapping_add(s_imm);
                let size = 1 << f3;
                if self.store(a, size, rs2) {
                    self.pe.halted = true;
                }
            }
            0x13 => {
                let sh = bits(w, 24, 20);
                result = Some(match f3 {
                    0 => rs1.wrapping_add(i_imm),
                    1 => rs1 << sh,
                    2 => ((rs1 as i32) < (i_imm as i32)) as u32,
                    3 => (rs1 < i_imm) as u32,
                    4 => rs1 ^ i_imm,
                    5 if f7 == 0x20 => ((rs1 as i32) >> sh) as u32,
                    5 => rs1 >> sh,
                    6 => rs1 | i_imm,
                    _ => rs1 & i_imm,
                });
            }
            0x33 => {
                let sh = rs2 & 31;
                result = Some(match (f7, f3) {
                    (1, 0) => rs1.wrapping_mul(rs2),
                    (0x20, 0) => rs1.wrapping_sub(rs2),
                    (_, 0) => rs1.wrapping_add(rs2),
                    (_, 1) => rs1 << sh,
                    (_, 2) => ((rs1 as i32) < (rs2 as i32)) as u32,
                    (_, 3) => (rs1 < rs2) as u32,
                    (_, 4) => rs1 ^ rs2,
                    (0x20, 5) => ((rs1 as i32) >> sh) as u32,
                    (_, 5) => rs1 >> sh,
                    (_, 6) => rs1 | rs2,
                    _ => rs1 & rs2,
                });
            }
            0x0f => {}
            _ => panic!("reference cannot execute {w:#010x}"),
        }
        if let Some(v) = result {
            if rd != 0 {
                self.pe.x[rd] = v;
            }
        }
        self.pe.pc = next;
        self.pe.retired += 1;
    }

    pub fn run(&mut self, limit: u64) {
        while !self.pe.halted && self.pe.retired < limit {
            self.step();
        }
    }
}
