use super::{Format, Instr, Op};

fn opcode_funct(op: Op) -> (u32, u32, u32) {
    use Op::*;
    // (opcode, funct3, funct7)
    match op {
        Lui => (0b0110111, 0, 0),
        Auipc => (0b0010111, 0, 0),
        Jal => (0b1101111, 0, 0),
        Jalr => (0b1100111, 0, 0),
        Beq => (0b1100011, 0b000, 0),
        Bne => (0b1100011, 0b001, 0),
        Blt => (0b1100011, 0b100, 0),
        Bge => (0b1100011, 0b101, 0),
        Bltu => (0b1100011, 0b110, 0),
        Bgeu => (0b1100011, 0b111, 0),
        Lb => (0b0000011, 0b000, 0),
        Lh => (0b0000011, 0b001, 0),
        Lw => (0b0000011, 0b010, 0),
        Lbu => (0b0000011, 0b100, 0),
        Lhu => (0b0000011, 0b101, 0),
        Sb => (0b0100011, 0b000, 0),
        Sh => (0b0100011, 0b001, 0),
        Sw => (0b0100011, 0b010, 0),
        Addi => (0b0010011, 0b000, 0),
        Slti => (0b0010011, 0b010, 0),
        Sltiu => (0b0010011, 0b011, 0),
        Xori => (0b0010011, 0b100, 0),
        Ori => (0b0010011, 0b110, 0),
        Andi => (0b0010011, 0b111, 0),
        Slli => (0b0010011, 0b001, 0),
        Srli => (0b0010011, 0b101, 0),
        Srai => (0b0010011, 0b101, 0b0100000),
        Add => (0b0110011, 0b000, 0),
        Sub => (0b0110011, 0b000, 0b0100000),
        Sll => (0b0110011, 0b001, 0),
        Slt => (0b0110011, 0b010, 0),
        Sltu => (0b0110011, 0b011, 0),
        Xor => (0b0110011, 0b100, 0),
        Srl => (0b0110011, 0b101, 0),
        Sra => (0b0110011, 0b101, 0b0100000),
        Or => (0b0110011, 0b110, 0),
        And => (0b0110011, 0b111, 0),
        Mul => (0b0110011, 0b000, 0b0000001),
        Fence => (0b0001111, 0, 0),
        Ecall | Ebreak => (0b1110011, 0, 0),
    }
}

/// Encodes an instruction. Immediates are masked to their field width; the
/// assembler is responsible for range checks.
pub fn encode(instr: &Instr) -> u32 {
    let (opcode, funct3, funct7) = opcode_funct(instr.op);
    let rd = instr.rd.index() as u32;
    let rs1 = instr.rs1.index() as u32;
    let rs2 = instr.rs2.index() as u32;
    let imm = instr.imm as u32;

    match instr.op {
        Op::Ecall => return 0x0000_0073,
        Op::Ebreak => return 0x0010_0073,
        Op::Fence => return ((imm & 0xff) << 20) | opcode,
        Op::Slli | Op::Srli | Op::Srai => {
            return (funct7 << 25)
                | ((imm & 0x1f) << 20)
                | (rs1 << 15)
                | (funct3 << 12)
                | (rd << 7)
                | opcode
        }
        _ => {}
    }

    match instr.op.format() {
        Format::R => {
            (funct7 << 25) | (rs2 << 20) | (rs1 << 15) | (funct3 << 12) | (rd << 7) | opcode
        }
        Format::I => ((imm & 0xfff) << 20) | (rs1 << 15) | (funct3 << 12) | (rd << 7) | opcode,
        Format::S => {
            (((imm >> 5) & 0x7f) << 25)
                | (rs2 << 20)
                | (rs1 << 15)
                | (funct3 << 12)
                | ((imm & 0x1f) << 7)
                | opcode
        }
        Format::B => {
            (((imm >> 12) & 1) << 31)
                | (((imm >> 5) & 0x3f) << 25)
                | (rs2 << 20)
                | (rs1 << 15)
                | (funct3 << 12)
                | (((imm >> 1) & 0xf) << 8)
                | (((imm >> 11) & 1) << 7)
                | opcode
        }
        Format::U => (imm & 0xffff_f000) | (rd << 7) | opcode,
        Format::J => {
            (((imm >> 20) & 1) << 31)
                | (((imm >> 1) & 0x3ff) << 21)
                | (((imm >> 11) & 1) << 20)
                | (((imm >> 12) & 0xff) << 12)
                | (rd << 7)
                | opcode
        }
    }
}
