//! RV32I processing-element core: instruction model, decoder, encoder,
//! the pure execute function and the contention-free timing model.
//!
//! Shifts, the optional multiply and byte/halfword memory accesses are not
//! performed by a PE alone. `execute` computes their architectural result but
//! also tags the effect with the shared functional unit the cluster must
//! grant before the instruction may retire.

mod decode;
mod encode;
mod exec;
mod timing;

use std::fmt;

use thiserror::Error;

pub use decode::{decode, decode_ext};
pub use encode::encode;
pub use exec::{execute, AccessWidth, ExecEffect, MemOp, MemRequest, MmioRequest, SharedUnitKind};
pub use timing::{occupancy, timing_cost, Occupancy};

/// Architectural register index, `x0` through `x31`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Reg(u8);

impl Reg {
    pub const ZERO: Reg = Reg(0);

    pub fn new(index: u8) -> Option<Reg> {
        (index < 32).then_some(Reg(index))
    }

    /// Extracts a 5-bit register field; always in range.
    pub(crate) fn from_field(bits: u32) -> Reg {
        Reg((bits & 0x1f) as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// Operation kind of a decoded instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Lui,
    Auipc,
    Jal,
    Jalr,
    Beq,
    Bne,
    Blt,
    Bge,
    Bltu,
    Bgeu,
    Lb,
    Lh,
    Lw,
    Lbu,
    Lhu,
    Sb,
    Sh,
    Sw,
    Addi,
    Slti,
    Sltiu,
    Xori,
    Ori,
    Andi,
    Slli,
    Srli,
    Srai,
    Add,
    Sub,
    Sll,
    Slt,
    Sltu,
    Xor,
    Srl,
    Sra,
    Or,
    And,
    Fence,
    Ecall,
    Ebreak,
    /// Low 32 bits of the product; only decodable when the multiply option is on.
    Mul,
}

/// Encoding format of an operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    R,
    I,
    S,
    B,
    U,
    J,
}

impl Op {
    pub const ALL: [Op; 41] = [
        Op::Lui,
        Op::Auipc,
        Op::Jal,
        Op::Jalr,
        Op::Beq,
        Op::Bne,
        Op::Blt,
        Op::Bge,
        Op::Bltu,
        Op::Bgeu,
        Op::Lb,
        Op::Lh,
        Op::Lw,
        Op::Lbu,
        Op::Lhu,
        Op::Sb,
        Op::Sh,
        Op::Sw,
        Op::Addi,
        Op::Slti,
        Op::Sltiu,
        Op::Xori,
        Op::Ori,
        Op::Andi,
        Op::Slli,
        Op::Srli,
        Op::Srai,
        Op::Add,
        Op::Sub,
        Op::Sll,
        Op::Slt,
        Op::Sltu,
        Op::Xor,
        Op::Srl,
        Op::Sra,
        Op::Or,
        Op::And,
        Op::Fence,
        Op::Ecall,
        Op::Ebreak,
        Op::Mul,
    ];

    pub fn format(self) -> Format {
        use Op::*;
        match self {
            Lui | Auipc => Format::U,
            Jal => Format::J,
            Beq | Bne | Blt | Bge | Bltu | Bgeu => Format::B,
            Sb | Sh | Sw => Format::S,
            Add | Sub | Sll | Slt | Sltu | Xor | Srl | Sra | Or | And | Mul => Format::R,
            Jalr | Lb | Lh | Lw | Lbu | Lhu | Addi | Slti | Sltiu | Xori | Ori | Andi | Slli
            | Srli | Srai | Fence | Ecall | Ebreak => Format::I,
        }
    }

    pub fn mnemonic(self) -> &'static str {
        use Op::*;
        match self {
            Lui => "lui",
            Auipc => "auipc",
            Jal => "jal",
            Jalr => "jalr",
            Beq => "beq",
            Bne => "bne",
            Blt => "blt",
            Bge => "bge",
            Bltu => "bltu",
            Bgeu => "bgeu",
            Lb => "lb",
            Lh => "lh",
            Lw => "lw",
            Lbu => "lbu",
            Lhu => "lhu",
            Sb => "sb",
            Sh => "sh",
            Sw => "sw",
            Addi => "addi",
            Slti => "slti",
            Sltiu => "sltiu",
            Xori => "xori",
            Ori => "ori",
            Andi => "andi",
            Slli => "slli",
            Srli => "srli",
            Srai => "srai",
            Add => "add",
            Sub => "sub",
            Sll => "sll",
            Slt => "slt",
            Sltu => "sltu",
            Xor => "xor",
            Srl => "srl",
            Sra => "sra",
            Or => "or",
            And => "and",
            Fence => "fence",
            Ecall => "ecall",
            Ebreak => "ebreak",
            Mul => "mul",
        }
    }

    pub fn from_mnemonic(name: &str) -> Option<Op> {
        Op::ALL.iter().copied().find(|op| op.mnemonic() == name)
    }

    pub fn is_branch(self) -> bool {
        self.format() == Format::B
    }

    pub fn is_load(self) -> bool {
        matches!(self, Op::Lb | Op::Lh | Op::Lw | Op::Lbu | Op::Lhu)
    }

    pub fn is_store(self) -> bool {
        matches!(self, Op::Sb | Op::Sh | Op::Sw)
    }

    pub fn is_shift(self) -> bool {
        matches!(
            self,
            Op::Sll | Op::Srl | Op::Sra | Op::Slli | Op::Srli | Op::Srai
        )
    }
}

/// A decoded instruction.
///
/// `imm` is already sign-extended; for branches and `jal` it is the byte
/// offset, for `lui`/`auipc` it is the full 32-bit value with the low twelve
/// bits clear, for shift-immediates it is the shift amount and for `fence` it
/// holds `pred << 4 | succ`. Unused register fields are `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Instr {
    pub op: Op,
    pub rd: Reg,
    pub rs1: Reg,
    pub rs2: Reg,
    pub imm: i32,
}

impl Instr {
    pub const NOP: Instr = Instr {
        op: Op::Addi,
        rd: Reg::ZERO,
        rs1: Reg::ZERO,
        rs2: Reg::ZERO,
        imm: 0,
    };

    pub fn new(op: Op, rd: Reg, rs1: Reg, rs2: Reg, imm: i32) -> Instr {
        Instr {
            op,
            rd,
            rs1,
            rs2,
            imm,
        }
    }
}

/// Pipeline configuration of one processing element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeConfig {
    /// 2 (decode, execute) or 3 (with the optional fetch latch).
    pub stages: u8,
    pub has_mul: bool,
    pub pe_local_index: u8,
    pub global_pe_id: u32,
}

impl PeConfig {
    pub fn branch_penalty(&self) -> u32 {
        u32::from(self.stages) - 1
    }
}

impl Default for PeConfig {
    fn default() -> Self {
        PeConfig {
            stages: 2,
            has_mul: false,
            pe_local_index: 0,
            global_pe_id: 0,
        }
    }
}

/// Run state of a processing element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeStatus {
    /// Held in reset until a kernel is loaded.
    Reset,
    Running,
    Halted,
    Faulted,
}

/// Architectural state plus the timing bookkeeping of one PE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeState {
    pub pc: u32,
    pub regs: [u32; 32],
    pub stall_cycles_remaining: u32,
    pub status: PeStatus,
    pub retired: u64,
}

impl PeState {
    pub fn new() -> PeState {
        PeState {
            pc: 0,
            regs: [0; 32],
            stall_cycles_remaining: 0,
            status: PeStatus::Reset,
            retired: 0,
        }
    }

    pub fn reg(&self, r: Reg) -> u32 {
        self.regs[r.index()]
    }

    /// Writes a register, discarding writes to `x0`.
    pub fn set_reg(&mut self, r: Reg, value: u32) {
        if !r.is_zero() {
            self.regs[r.index()] = value;
        }
    }

    pub fn is_halted(&self) -> bool {
        self.status != PeStatus::Running
    }
}

impl Default for PeState {
    fn default() -> Self {
        PeState::new()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IsaError {
    #[error("illegal instruction {word:#010x}")]
    IllegalInstruction { word: u32 },
    #[error("misaligned {width} access at {address:#010x}")]
    MisalignedAccess { address: u32, width: AccessWidth },
    #[error("misaligned fetch target {target:#010x}")]
    MisalignedFetch { target: u32 },
}
