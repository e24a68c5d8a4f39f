//! Two-pass RV32I assembler.
//!
//! Grammar, one statement per line:
//!
//! ```text
//! line      := [label ':'] [statement] ['#' comment]
//! statement := mnemonic [operand {',' operand}] | '.word' value {',' value}
//! operand   := register | value | label | value '(' register ')'
//! value     := decimal | 0x-hex | 0b-binary | 'c' (character), optionally negated
//! ```
//!
//! Registers are `x0`..`x31` or their ABI names. Branch and jump targets are
//! labels or byte offsets relative to the instruction.

use std::collections::HashMap;

use thiserror::Error;

use super::KernelImage;
use crate::isa::{encode, Instr, Op, Reg};
use crate::memmap::HALT_ADDR;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AsmErrorKind {
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("immediate {value} out of range {min}..={max}")]
    ImmediateOutOfRange { value: i64, min: i64, max: i64 },
    #[error("target offset {0} is not a multiple of 2")]
    MisalignedTarget(i64),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("{0}")]
    Syntax(String),
}

impl AsmErrorKind {
    /// Stable identifier used in diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            AsmErrorKind::UnknownMnemonic(_) => "UnknownMnemonic",
            AsmErrorKind::UndefinedLabel(_) => "UndefinedLabel",
            AsmErrorKind::ImmediateOutOfRange { .. } => "ImmediateOutOfRange",
            AsmErrorKind::MisalignedTarget(_) => "MisalignedTarget",
            AsmErrorKind::DuplicateLabel(_) => "DuplicateLabel",
            AsmErrorKind::Syntax(_) => "Syntax",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct AsmError {
    pub line: usize,
    pub kind: AsmErrorKind,
}

type Res<T> = Result<T, AsmErrorKind>;

fn syntax<T>(msg: impl Into<String>) -> Res<T> {
    Err(AsmErrorKind::Syntax(msg.into()))
}

const ABI_NAMES: [&str; 32] = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4",
    "a5", "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4",
    "t5", "t6",
];

fn parse_reg(s: &str) -> Res<Reg> {
    let s = s.trim();
    if let Some(n) = s.strip_prefix('x') {
        if let Ok(i) = n.parse::<u8>() {
            if let Some(r) = Reg::new(i) {
                return Ok(r);
            }
        }
    }
    if s == "fp" {
        return Ok(Reg::new(8).unwrap());
    }
    match ABI_NAMES.iter().position(|&n| n == s) {
        Some(i) => Ok(Reg::new(i as u8).unwrap()),
        None => syntax(format!("expected register, found `{s}`")),
    }
}

fn parse_value(s: &str) -> Option<i64> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b.trim_start()),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let v = if let Some(h) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(&h.replace('_', ""), 16).ok()?
    } else if let Some(b) = body.strip_prefix("0b") {
        i64::from_str_radix(&b.replace('_', ""), 2).ok()?
    } else if body.len() >= 3 && body.starts_with('\'') && body.ends_with('\'') {
        let inner = &body[1..body.len() - 1];
        let c = match inner {
            "\\n" => '\n',
            "\\t" => '\t',
            "\\0" => '\0',
            "\\\\" => '\\',
            "\\'" => '\'',
            _ => {
                let mut it = inner.chars();
                let c = it.next()?;
                if it.next().is_some() {
                    return None;
                }
                c
            }
        };
        c as i64
    } else {
        if !body.starts_with(|c: char| c.is_ascii_digit()) {
            return None;
        }
        body.replace('_', "").parse::<i64>().ok()?
    };
    Some(if neg { -v } else { v })
}

fn imm(s: &str) -> Res<i64> {
    parse_value(s).map_or_else(
        || syntax(format!("expected immediate, found `{}`", s.trim())),
        Ok,
    )
}

fn check_range(v: i64, min: i64, max: i64) -> Res<i64> {
    if v < min || v > max {
        Err(AsmErrorKind::ImmediateOutOfRange { value: v, min, max })
    } else {
        Ok(v)
    }
}

fn imm12(v: i64) -> Res<i32> {
    check_range(v, -2048, 2047).map(|v| v as i32)
}

/// `off(reg)`, `(reg)` or a bare immediate (base `x0`).
fn parse_mem(s: &str) -> Res<(i64, Reg)> {
    let s = s.trim();
    match s.find('(') {
        Some(open) => {
            let Some(inner) = s[open + 1..].strip_suffix(')') else {
                return syntax(format!("malformed memory operand `{s}`"));
            };
            let off = if s[..open].trim().is_empty() {
                0
            } else {
                imm(&s[..open])?
            };
            Ok((off, parse_reg(inner)?))
        }
        None => Ok((imm(s)?, Reg::ZERO)),
    }
}

fn is_label_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '.')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// Resolves a control-transfer target to a byte offset from `pc`.
fn target(s: &str, pc: u32, labels: &HashMap<String, u32>, bits: u32) -> Res<i32> {
    let s = s.trim();
    let off = match parse_value(s) {
        Some(v) => v,
        None if is_label_name(s) => match labels.get(s) {
            Some(&addr) => i64::from(addr) - i64::from(pc),
            None => return Err(AsmErrorKind::UndefinedLabel(s.to_string())),
        },
        None => return syntax(format!("expected label or offset, found `{s}`")),
    };
    if off % 2 != 0 {
        return Err(AsmErrorKind::MisalignedTarget(off));
    }
    let lim = 1i64 << (bits - 1);
    check_range(off, -lim, lim - 2).map(|v| v as i32)
}

fn fence_set(s: &str) -> Res<i32> {
    let s = s.trim();
    if let Some(v) = parse_value(s) {
        return check_range(v, 0, 15).map(|v| v as i32);
    }
    let mut bits = 0;
    for c in s.chars() {
        bits |= match c {
            'i' => 8,
            'o' => 4,
            'r' => 2,
            'w' => 1,
            _ => return syntax(format!("bad fence set `{s}`")),
        };
    }
    Ok(bits)
}

/// Splits `lui` / `li` style constants into upper and lower parts such that
/// `(hi << 12) + sext(lo) == value`.
fn split_hi_lo(value: i32) -> (i32, i32) {
    let lo = (value << 20) >> 20;
    let hi = value.wrapping_sub(lo) >> 12;
    (hi & 0xfffff, lo)
}

struct Stmt<'a> {
    line: usize,
    mnemonic: String,
    operands: Vec<&'a str>,
    pc: u32,
}

fn split_operands(s: &str) -> Vec<&str> {
    if s.trim().is_empty() {
        Vec::new()
    } else {
        s.split(',').map(str::trim).collect()
    }
}

/// Number of words a statement occupies; decided in pass 1.
fn size_words(mnemonic: &str, ops: &[&str]) -> Res<u32> {
    Ok(match mnemonic {
        ".word" => ops.len() as u32,
        "li" => {
            let [_, v] = ops else {
                return syntax("li takes 2 operands");
            };
            let v = check_range(imm(v)?, i64::from(i32::MIN), i64::from(u32::MAX))?;
            if (-2048..=2047).contains(&(v as u32 as i32)) {
                1
            } else {
                2
            }
        }
        _ => 1,
    })
}

fn expect_n(ops: &[&str], n: usize, m: &str) -> Res<()> {
    if ops.len() == n {
        Ok(())
    } else {
        syntax(format!("`{m}` takes {n} operand(s), found {}", ops.len()))
    }
}

fn r(op: Op, rd: Reg, rs1: Reg, rs2: Reg, imm: i32) -> Instr {
    Instr::new(op, rd, rs1, rs2, imm)
}

fn emit(st: &Stmt, labels: &HashMap<String, u32>, out: &mut Vec<u32>) -> Res<()> {
    let ops = &st.operands[..];
    let m = st.mnemonic.as_str();
    let z = Reg::ZERO;
    let ra = Reg::new(1).unwrap();
    let mut push = |i: Instr| out.push(encode(&i));

    if m == ".word" {
        if ops.is_empty() {
            return syntax(".word needs a value");
        }
        for o in ops {
            let v = check_range(imm(o)?, i64::from(i32::MIN), i64::from(u32::MAX))?;
            out.push(v as u32);
        }
        return Ok(());
    }

    // Pseudo-instructions.
    match m {
        "nop" => {
            expect_n(ops, 0, m)?;
            push(Instr::NOP);
            return Ok(());
        }
        "halt" => {
            expect_n(ops, 0, m)?;
            push(r(Op::Sw, z, z, z, HALT_ADDR as i32));
            return Ok(());
        }
        "mv" => {
            expect_n(ops, 2, m)?;
            push(r(Op::Addi, parse_reg(ops[0])?, parse_reg(ops[1])?, z, 0));
            return Ok(());
        }
        "not" => {
            expect_n(ops, 2, m)?;
            push(r(Op::Xori, parse_reg(ops[0])?, parse_reg(ops[1])?, z, -1));
            return Ok(());
        }
        "neg" => {
            expect_n(ops, 2, m)?;
            push(r(Op::Sub, parse_reg(ops[0])?, z, parse_reg(ops[1])?, 0));
            return Ok(());
        }
        "li" => {
            expect_n(ops, 2, m)?;
            let rd = parse_reg(ops[0])?;
            let v = imm(ops[1])? as u32 as i32;
            if (-2048..=2047).contains(&v) {
                push(r(Op::Addi, rd, z, z, v));
            } else {
                let (hi, lo) = split_hi_lo(v);
                push(r(Op::Lui, rd, z, z, hi << 12));
                push(r(Op::Addi, rd, rd, z, lo));
            }
            return Ok(());
        }
        "j" => {
            expect_n(ops, 1, m)?;
            push(r(Op::Jal, z, z, z, target(ops[0], st.pc, labels, 21)?));
            return Ok(());
        }
        "ret" => {
            expect_n(ops, 0, m)?;
            push(r(Op::Jalr, z, ra, z, 0));
            return Ok(());
        }
        "beqz" | "bnez" => {
            expect_n(ops, 2, m)?;
            let op = if m == "beqz" { Op::Beq } else { Op::Bne };
            push(r(
                op,
                z,
                parse_reg(ops[0])?,
                z,
                target(ops[1], st.pc, labels, 13)?,
            ));
            return Ok(());
        }
        _ => {}
    }

    let Some(op) = Op::from_mnemonic(m) else {
        return Err(AsmErrorKind::UnknownMnemonic(m.to_string()));
    };
    let instr = match op {
        Op::Lui | Op::Auipc => {
            expect_n(ops, 2, m)?;
            let v = check_range(imm(ops[1])?, -(1 << 19), (1 << 20) - 1)?;
            r(op, parse_reg(ops[0])?, z, z, ((v as i32) & 0xfffff) << 12)
        }
        Op::Jal => match ops.len() {
            1 => r(op, ra, z, z, target(ops[0], st.pc, labels, 21)?),
            2 => r(
                op,
                parse_reg(ops[0])?,
                z,
                z,
                target(ops[1], st.pc, labels, 21)?,
            ),
            n => return syntax(format!("`jal` takes 1 or 2 operands, found {n}")),
        },
        Op::Jalr => match ops.len() {
            1 => r(op, ra, parse_reg(ops[0])?, z, 0),
            2 => {
                let (off, base) = parse_mem(ops[1])?;
                r(op, parse_reg(ops[0])?, base, z, imm12(off)?)
            }
            3 => r(
                op,
                parse_reg(ops[0])?,
                parse_reg(ops[1])?,
                z,
                imm12(imm(ops[2])?)?,
            ),
            n => return syntax(format!("`jalr` takes 1 to 3 operands, found {n}")),
        },
        _ if op.is_branch() => {
            expect_n(ops, 3, m)?;
            let off = target(ops[2], st.pc, labels, 13)?;
            r(op, z, parse_reg(ops[0])?, parse_reg(ops[1])?, off)
        }
        _ if op.is_load() => {
            expect_n(ops, 2, m)?;
            let (off, base) = parse_mem(ops[1])?;
            r(op, parse_reg(ops[0])?, base, z, imm12(off)?)
        }
        _ if op.is_store() => {
            expect_n(ops, 2, m)?;
            let (off, base) = parse_mem(ops[1])?;
            r(op, z, base, parse_reg(ops[0])?, imm12(off)?)
        }
        Op::Slli | Op::Srli | Op::Srai => {
            expect_n(ops, 3, m)?;
            let sh = check_range(imm(ops[2])?, 0, 31)? as i32;
            r(op, parse_reg(ops[0])?, parse_reg(ops[1])?, z, sh)
        }
        Op::Addi | Op::Slti | Op::Sltiu | Op::Xori | Op::Ori | Op::Andi => {
            expect_n(ops, 3, m)?;
            r(
                op,
                parse_reg(ops[0])?,
                parse_reg(ops[1])?,
                z,
                imm12(imm(ops[2])?)?,
            )
        }
        Op::Fence => match ops.len() {
            0 => r(op, z, z, z, 0xff),
            2 => r(op, z, z, z, fence_set(ops[0])? << 4 | fence_set(ops[1])?),
            n => return syntax(format!("`fence` takes 0 or 2 operands, found {n}")),
        },
        Op::Ecall | Op::Ebreak => {
            expect_n(ops, 0, m)?;
            r(op, z, z, z, 0)
        }
        _ => {
            expect_n(ops, 3, m)?;
            r(
                op,
                parse_reg(ops[0])?,
                parse_reg(ops[1])?,
                parse_reg(ops[2])?,
                0,
            )
        }
    };
    push(instr);
    Ok(())
}

/// Assembles source text into a kernel image based at address 0.
pub fn assemble(source: &str) -> Result<KernelImage, AsmError> {
    let mut labels: HashMap<String, u32> = HashMap::new();
    let mut stmts = Vec::new();
    let mut pc = 0u32;

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let at = |kind| AsmError { line, kind };
        let mut text = raw.split('#').next().unwrap_or("").trim();
        while let Some(colon) = text.find(':') {
            let name = text[..colon].trim();
            if !is_label_name(name) {
                break;
            }
            if labels.insert(name.to_string(), pc).is_some() {
                return Err(at(AsmErrorKind::DuplicateLabel(name.to_string())));
            }
            text = text[colon + 1..].trim();
        }
        if text.is_empty() {
            continue;
        }
        let (mnemonic, rest) = match text.find(char::is_whitespace) {
            Some(sp) => (&text[..sp], &text[sp..]),
            None => (text, ""),
        };
        let mnemonic = mnemonic.to_ascii_lowercase();
        let operands = split_operands(rest);
        let words = size_words(&mnemonic, &operands).map_err(at)?;
        stmts.push(Stmt {
            line,
            mnemonic,
            operands,
            pc,
        });
        pc = pc.wrapping_add(4 * words);
    }

    let mut words = Vec::with_capacity((pc / 4) as usize);
    for st in &stmts {
        emit(st, &labels, &mut words).map_err(|kind| AsmError {
            line: st.line,
            kind,
        })?;
    }
    Ok(KernelImage::new(words))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(src: &str) -> u32 {
        let img = assemble(src).unwrap();
        assert_eq!(img.words().len(), 1, "{src}");
        img.words()[0]
    }

    fn err(src: &str) -> AsmError {
        assemble(src).unwrap_err()
    }

    #[test]
    fn canonical_words() {
        assert_eq!(one("nop"), 0x0000_0013);
        assert_eq!(one("addi x1, x0, 5"), 0x0050_0093);
        assert_eq!(one("addi ra, zero, 5"), 0x0050_0093);
        assert_eq!(one("halt"), 0xfe00_2823);
    }

    #[test]
    fn labels_resolve_forward_and_backward() {
        let img = assemble("top:\n  beq x1, x2, end\n  j top\nend: nop\n").unwrap();
        let w = img.words();
        assert_eq!(w[0], 0x0020_8463); // beq x1, x2, +8
        assert_eq!(w[1], 0xffdf_f06f); // jal x0, -4
    }

    #[test]
    fn li_expansion() {
        assert_eq!(assemble("li a0, -2048").unwrap().words().len(), 1);
        let img = assemble("li a0, 0x12345fff\nli a1, 0xffffffff").unwrap();
        assert_eq!(img.words(), &[0x1234_6537, 0xfff5_0513, 0xfff0_0593]);
    }

    #[test]
    fn errors_carry_lines() {
        let e = err("nop\nbeq x1, x2, loop\n");
        assert_eq!(e.line, 2);
        assert_eq!(e.kind, AsmErrorKind::UndefinedLabel("loop".into()));
        assert_eq!(err("\n\nfrob x1").kind.code(), "UnknownMnemonic");
        assert_eq!(err("addi x1, x0, 2048").kind.code(), "ImmediateOutOfRange");
        assert_eq!(err("beq x0, x0, 3").kind, AsmErrorKind::MisalignedTarget(3));
        assert_eq!(err("a:\na:").kind.code(), "DuplicateLabel");
        assert_eq!(err("lw x1, 4(x40)").kind.code(), "Syntax");
        assert_eq!(err("slli x1, x1, 32").kind.code(), "ImmediateOutOfRange");
    }

    #[test]
    fn data_and_chars() {
        let img = assemble(".word 0xffffffff, -1, 'A'\n").unwrap();
        assert_eq!(img.words(), &[u32::MAX, u32::MAX, 65]);
    }

    #[test]
    fn split_hi_lo_reconstructs() {
        for v in [0, 1, -1, 2047, 2048, -2049, i32::MIN, i32::MAX, 0x7ff_f800] {
            let (hi, lo) = split_hi_lo(v);
            assert_eq!((hi << 12).wrapping_add(lo), v, "{v}");
        }
    }
}
