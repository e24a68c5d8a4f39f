use super::{Instr, IsaError, Op, Reg};

const OPC_LUI: u32 = 0b0110111;
const OPC_AUIPC: u32 = 0b0010111;
const OPC_JAL: u32 = 0b1101111;
const OPC_JALR: u32 = 0b1100111;
const OPC_BRANCH: u32 = 0b1100011;
const OPC_LOAD: u32 = 0b0000011;
const OPC_STORE: u32 = 0b0100011;
const OPC_OP_IMM: u32 = 0b0010011;
const OPC_OP: u32 = 0b0110011;
const OPC_MISC_MEM: u32 = 0b0001111;
const OPC_SYSTEM: u32 = 0b1110011;

#[inline]
fn bits(word: u32, hi: u32, lo: u32) -> u32 {
    (word >> lo) & ((1u32 << (hi - lo + 1)) - 1)
}

/// Sign-extends the low `width` bits of `value`.
#[inline]
fn sext(value: u32, width: u32) -> i32 {
    let shift = 32 - width;
    ((value << shift) as i32) >> shift
}

fn imm_i(w: u32) -> i32 {
    (w as i32) >> 20
}

fn imm_s(w: u32) -> i32 {
    sext((bits(w, 31, 25) << 5) | bits(w, 11, 7), 12)
}

fn imm_b(w: u32) -> i32 {
    let v = (bits(w, 31, 31) << 12)
        | (bits(w, 7, 7) << 11)
        | (bits(w, 30, 25) << 5)
        | (bits(w, 11, 8) << 1);
    sext(v, 13)
}

fn imm_u(w: u32) -> i32 {
    (w & 0xffff_f000) as i32
}

fn imm_j(w: u32) -> i32 {
    let v = (bits(w, 31, 31) << 20)
        | (bits(w, 19, 12) << 12)
        | (bits(w, 20, 20) << 11)
        | (bits(w, 30, 21) << 1);
    sext(v, 21)
}

/// Decodes a base RV32I word. `mul` is rejected; see [`decode_ext`].
pub fn decode(word: u32) -> Result<Instr, IsaError> {
    decode_ext(word, false)
}

/// Decodes an RV32I word, additionally accepting `mul` when `has_mul` is set.
pub fn decode_ext(word: u32, has_mul: bool) -> Result<Instr, IsaError> {
    let illegal = IsaError::IllegalInstruction { word };
    let rd = Reg::from_field(bits(word, 11, 7));
    let rs1 = Reg::from_field(bits(word, 19, 15));
    let rs2 = Reg::from_field(bits(word, 24, 20));
    let funct3 = bits(word, 14, 12);
    let funct7 = bits(word, 31, 25);
    let z = Reg::ZERO;

    let instr = match bits(word, 6, 0) {
        OPC_LUI => Instr::new(Op::Lui, rd, z, z, imm_u(word)),
        OPC_AUIPC => Instr::new(Op::Auipc, rd, z, z, imm_u(word)),
        OPC_JAL => Instr::new(Op::Jal, rd, z, z, imm_j(word)),
        OPC_JALR if funct3 == 0 => Instr::new(Op::Jalr, rd, rs1, z, imm_i(word)),
        OPC_BRANCH => {
            let op = match funct3 {
                0b000 => Op::Beq,
                0b001 => Op::Bne,
                0b100 => Op::Blt,
                0b101 => Op::Bge,
                0b110 => Op::Bltu,
                0b111 => Op::Bgeu,
                _ => return Err(illegal),
            };
            Instr::new(op, z, rs1, rs2, imm_b(word))
        }
        OPC_LOAD => {
            let op = match funct3 {
                0b000 => Op::Lb,
                0b001 => Op::Lh,
                0b010 => Op::Lw,
                0b100 => Op::Lbu,
                0b101 => Op::Lhu,
                _ => return Err(illegal),
            };
            Instr::new(op, rd, rs1, z, imm_i(word))
        }
        OPC_STORE => {
            let op = match funct3 {
                0b000 => Op::Sb,
                0b001 => Op::Sh,
                0b010 => Op::Sw,
                _ => return Err(illegal),
            };
            Instr::new(op, z, rs1, rs2, imm_s(word))
        }
        OPC_OP_IMM => {
            let shamt = bits(word, 24, 20) as i32;
            match funct3 {
                0b000 => Instr::new(Op::Addi, rd, rs1, z, imm_i(word)),
                0b010 => Instr::new(Op::Slti, rd, rs1, z, imm_i(word)),
                0b011 => Instr::new(Op::Sltiu, rd, rs1, z, imm_i(word)),
                0b100 => Instr::new(Op::Xori, rd, rs1, z, imm_i(word)),
                0b110 => Instr::new(Op::Ori, rd, rs1, z, imm_i(word)),
                0b111 => Instr::new(Op::Andi, rd, rs1, z, imm_i(word)),
                0b001 if funct7 == 0 => Instr::new(Op::Slli, rd, rs1, z, shamt),
                0b101 if funct7 == 0 => Instr::new(Op::Srli, rd, rs1, z, shamt),
                0b101 if funct7 == 0b0100000 => Instr::new(Op::Srai, rd, rs1, z, shamt),
                _ => return Err(illegal),
            }
        }
        OPC_OP => {
            let op = match (funct7, funct3) {
                (0, 0b000) => Op::Add,
                (0b0100000, 0b000) => Op::Sub,
                (0, 0b001) => Op::Sll,
                (0, 0b010) => Op::Slt,
                (0, 0b011) => Op::Sltu,
                (0, 0b100) => Op::Xor,
                (0, 0b101) => Op::Srl,
                (0b0100000, 0b101) => Op::Sra,
                (0, 0b110) => Op::Or,
                (0, 0b111) => Op::And,
                (1, 0b000) if has_mul => Op::Mul,
                _ => return Err(illegal),
            };
            Instr::new(op, rd, rs1, rs2, 0)
        }
        // fm must be zero and rd/rs1 unused; pred/succ are kept in imm.
        OPC_MISC_MEM if funct3 == 0 && rd.is_zero() && rs1.is_zero() && bits(word, 31, 28) == 0 => {
            Instr::new(Op::Fence, z, z, z, bits(word, 27, 20) as i32)
        }
        OPC_SYSTEM => match word {
            0x0000_0073 => Instr::new(Op::Ecall, z, z, z, 0),
            0x0010_0073 => Instr::new(Op::Ebreak, z, z, z, 0),
            _ => return Err(illegal),
        },
        _ => return Err(illegal),
    };
    Ok(instr)
}
