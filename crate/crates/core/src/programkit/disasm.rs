use crate::isa::{decode_ext, Format, Instr, Op};

fn fence_set(bits: i32) -> String {
    if bits == 0 {
        return "0".into();
    }
    "iorw"
        .chars()
        .zip([8, 4, 2, 1])
        .filter(|&(_, b)| bits & b != 0)
        .map(|(c, _)| c)
        .collect()
}

/// Renders an instruction in the assembler's own syntax, branch and jump
/// targets as relative byte offsets.
pub fn format_instr(i: &Instr) -> String {
    let m = i.op.mnemonic();
    match i.op {
        Op::Fence => format!(
            "fence {}, {}",
            fence_set(i.imm >> 4 & 0xf),
            fence_set(i.imm & 0xf)
        ),
        Op::Ecall | Op::Ebreak => m.to_string(),
        Op::Lui | Op::Auipc => format!("{m} {}, {:#x}", i.rd, (i.imm as u32) >> 12),
        Op::Jal => format!("{m} {}, {}", i.rd, i.imm),
        Op::Jalr => format!("{m} {}, {}({})", i.rd, i.imm, i.rs1),
        op if op.is_load() => format!("{m} {}, {}({})", i.rd, i.imm, i.rs1),
        op if op.is_store() => format!("{m} {}, {}({})", i.rs2, i.imm, i.rs1),
        op => match op.format() {
            Format::B => format!("{m} {}, {}, {}", i.rs1, i.rs2, i.imm),
            Format::R => format!("{m} {}, {}, {}", i.rd, i.rs1, i.rs2),
            _ => format!("{m} {}, {}, {}", i.rd, i.rs1, i.imm),
        },
    }
}

/// Disassembles one word; words outside the supported set render as `.word`.
pub fn disassemble(word: u32) -> String {
    match decode_ext(word, true) {
        Ok(i) => format_instr(&i),
        Err(_) => format!(".word {word:#010x}"),
    }
}
