use std::fmt;

use super::{Instr, IsaError, Op, PeState, Reg};
use crate::memmap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessWidth {
    Byte,
    Half,
    Word,
}

impl AccessWidth {
    pub fn bytes(self) -> u32 {
        match self {
            AccessWidth::Byte => 1,
            AccessWidth::Half => 2,
            AccessWidth::Word => 4,
        }
    }
}

impl fmt::Display for AccessWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessWidth::Byte => "byte",
            AccessWidth::Half => "halfword",
            AccessWidth::Word => "word",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemOp {
    Load,
    Store,
}

/// Shared functional units that PEs borrow from the cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SharedUnitKind {
    Shifter,
    Subword,
    Multiplier,
}

/// A data-memory access toward IRAM/CRAM space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemRequest {
    pub op: MemOp,
    pub address: u32,
    pub width: AccessWidth,
    /// Store value from rs2 (unshifted); zero for loads.
    pub data: u32,
    pub sign_extend: bool,
    /// Load destination; `x0` for stores.
    pub rd: Reg,
}

impl MemRequest {
    /// Aligned word address containing the access.
    pub fn word_address(&self) -> u32 {
        self.address & !3
    }

    fn shift(&self) -> u32 {
        (self.address & 3) * 8
    }

    /// Extracts the loaded value from the containing word.
    pub fn extract(&self, word: u32) -> u32 {
        let raw = word >> self.shift();
        match (self.width, self.sign_extend) {
            (AccessWidth::Word, _) => word,
            (AccessWidth::Half, false) => raw & 0xffff,
            (AccessWidth::Half, true) => raw as u16 as i16 as i32 as u32,
            (AccessWidth::Byte, false) => raw & 0xff,
            (AccessWidth::Byte, true) => raw as u8 as i8 as i32 as u32,
        }
    }

    /// Merges the store data into the old contents of the containing word.
    pub fn merge(&self, old: u32) -> u32 {
        let mask: u32 = match self.width {
            AccessWidth::Word => return self.data,
            AccessWidth::Half => 0xffff,
            AccessWidth::Byte => 0xff,
        };
        let sh = self.shift();
        (old & !(mask << sh)) | ((self.data & mask) << sh)
    }
}

/// A load or store decoded by the MMIO block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MmioRequest {
    pub op: MemOp,
    pub address: u32,
    pub width: AccessWidth,
    pub data: u32,
    pub rd: Reg,
}

/// Everything one instruction asks of the world; produced without mutating state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecEffect {
    pub reg_write: Option<(Reg, u32)>,
    pub next_pc: u32,
    pub branch_taken: bool,
    pub mem_req: Option<MemRequest>,
    pub mmio_req: Option<MmioRequest>,
    pub shared_unit: Option<SharedUnitKind>,
    pub halt_req: bool,
}

impl ExecEffect {
    fn fallthrough(pc: u32) -> ExecEffect {
        ExecEffect {
            reg_write: None,
            next_pc: pc.wrapping_add(4),
            branch_taken: false,
            mem_req: None,
            mmio_req: None,
            shared_unit: None,
            halt_req: false,
        }
    }

    /// The data access of this instruction, whichever side serves it.
    pub fn is_load(&self) -> bool {
        matches!(
            self.mem_req,
            Some(MemRequest {
                op: MemOp::Load,
                ..
            })
        ) || matches!(
            self.mmio_req,
            Some(MmioRequest {
                op: MemOp::Load,
                ..
            })
        )
    }
}

fn write(rd: Reg, value: u32) -> Option<(Reg, u32)> {
    (!rd.is_zero()).then_some((rd, value))
}

fn alu(op: Op, a: u32, b: u32) -> u32 {
    match op {
        Op::Add | Op::Addi => a.wrapping_add(b),
        Op::Sub => a.wrapping_sub(b),
        Op::Slt | Op::Slti => ((a as i32) < (b as i32)) as u32,
        Op::Sltu | Op::Sltiu => (a < b) as u32,
        Op::Xor | Op::Xori => a ^ b,
        Op::Or | Op::Ori => a | b,
        Op::And | Op::Andi => a & b,
        Op::Sll | Op::Slli => a << (b & 31),
        Op::Srl | Op::Srli => a >> (b & 31),
        Op::Sra | Op::Srai => ((a as i32) >> (b & 31)) as u32,
        Op::Mul => a.wrapping_mul(b),
        _ => unreachable!("{op:?} is not an ALU operation"),
    }
}

fn branch_cond(op: Op, a: u32, b: u32) -> bool {
    match op {
        Op::Beq => a == b,
        Op::Bne => a != b,
        Op::Blt => (a as i32) < (b as i32),
        Op::Bge => (a as i32) >= (b as i32),
        Op::Bltu => a < b,
        Op::Bgeu => a >= b,
        _ => unreachable!("{op:?} is not a branch"),
    }
}

fn width_of(op: Op) -> (AccessWidth, bool) {
    match op {
        Op::Lb => (AccessWidth::Byte, true),
        Op::Lbu | Op::Sb => (AccessWidth::Byte, false),
        Op::Lh => (AccessWidth::Half, true),
        Op::Lhu | Op::Sh => (AccessWidth::Half, false),
        _ => (AccessWidth::Word, false),
    }
}

fn check_target(target: u32) -> Result<u32, IsaError> {
    if !target.is_multiple_of(4) {
        Err(IsaError::MisalignedFetch { target })
    } else {
        Ok(target)
    }
}

/// Executes `instr` against `state` without mutating it.
///
/// For loads, call once with `load_data = None` to obtain the request, then
/// again with the containing aligned word to obtain the register write.
pub fn execute(
    state: &PeState,
    instr: &Instr,
    load_data: Option<u32>,
) -> Result<ExecEffect, IsaError> {
    let pc = state.pc;
    let a = state.reg(instr.rs1);
    let b = state.reg(instr.rs2);
    let imm = instr.imm as u32;
    let mut eff = ExecEffect::fallthrough(pc);

    match instr.op {
        Op::Lui => eff.reg_write = write(instr.rd, imm),
        Op::Auipc => eff.reg_write = write(instr.rd, pc.wrapping_add(imm)),
        Op::Jal => {
            eff.next_pc = check_target(pc.wrapping_add(imm))?;
            eff.branch_taken = true;
            eff.reg_write = write(instr.rd, pc.wrapping_add(4));
        }
        Op::Jalr => {
            eff.next_pc = check_target(a.wrapping_add(imm) & !1)?;
            eff.branch_taken = true;
            eff.reg_write = write(instr.rd, pc.wrapping_add(4));
        }
        op if op.is_branch() => {
            if branch_cond(op, a, b) {
                eff.next_pc = check_target(pc.wrapping_add(imm))?;
                eff.branch_taken = true;
            }
        }
        op if op.is_load() || op.is_store() => {
            let address = a.wrapping_add(imm);
            let (width, sign_extend) = width_of(op);
            if !address.is_multiple_of(width.bytes()) {
                return Err(IsaError::MisalignedAccess { address, width });
            }
            let (mem_op, data) = if op.is_load() {
                (MemOp::Load, 0)
            } else {
                (MemOp::Store, b)
            };
            let req = MemRequest {
                op: mem_op,
                address,
                width,
                data,
                sign_extend,
                rd: if op.is_load() { instr.rd } else { Reg::ZERO },
            };
            if memmap::is_mmio(address) {
                eff.mmio_req = Some(MmioRequest {
                    op: mem_op,
                    address,
                    width,
                    data,
                    rd: req.rd,
                });
            } else {
                eff.mem_req = Some(req);
            }
            if width != AccessWidth::Word {
                eff.shared_unit = Some(SharedUnitKind::Subword);
            }
            if let (MemOp::Load, Some(word)) = (mem_op, load_data) {
                eff.reg_write = write(instr.rd, req.extract(word));
            }
        }
        Op::Addi | Op::Slti | Op::Sltiu | Op::Xori | Op::Ori | Op::Andi => {
            eff.reg_write = write(instr.rd, alu(instr.op, a, imm));
        }
        Op::Slli | Op::Srli | Op::Srai => {
            eff.reg_write = write(instr.rd, alu(instr.op, a, imm));
            eff.shared_unit = Some(SharedUnitKind::Shifter);
        }
        Op::Sll | Op::Srl | Op::Sra => {
            eff.reg_write = write(instr.rd, alu(instr.op, a, b));
            eff.shared_unit = Some(SharedUnitKind::Shifter);
        }
        Op::Mul => {
            eff.reg_write = write(instr.rd, alu(instr.op, a, b));
            eff.shared_unit = Some(SharedUnitKind::Multiplier);
        }
        Op::Add | Op::Sub | Op::Slt | Op::Sltu | Op::Xor | Op::Or | Op::And => {
            eff.reg_write = write(instr.rd, alu(instr.op, a, b));
        }
        Op::Fence => {}
        Op::Ecall | Op::Ebreak => eff.halt_req = true,
        op => unreachable!("unhandled {op:?}"),
    }
    Ok(eff)
}
