//! Random message-free programs for differential testing.
//!
//! Every PE derives a private 4 KB CRAM window from its id, so all PEs of a
//! cluster can run the same image at once. Inside the body control flow only
//! moves forward; the looped variant repeats the whole body a fixed number of
//! times. Registers x28..x31 are reserved: pass counter, window base,
//! scratch address, window offset.

use rand::seq::SliceRandom;
use rand::Rng;

const PROLOGUE: [&str; 5] = [
    "lw x31, -8(x0)",
    "andi x31, x31, 7",
    "slli x31, x31, 12",
    "lui x29, 0x10",
    "add x29, x29, x31",
];

fn rd(rng: &mut impl Rng) -> String {
    format!("x{}", rng.gen_range(1..=27))
}

fn rs(rng: &mut impl Rng) -> String {
    format!("x{}", rng.gen_range(0..=31))
}

fn imm12(rng: &mut impl Rng) -> i32 {
    match rng.gen_range(0..4) {
        0 => rng.gen_range(-4..=4),
        1 => *[-2048, 2047, -1, 0x7ff, -0x800].choose(rng).unwrap(),
        _ => rng.gen_range(-2048..=2047),
    }
}

/// One statement, possibly several instructions, for slot `at` of a body
/// whose `halt` sits at index `end`. Returns the lines emitted.
fn statement(rng: &mut impl Rng, at: usize, end: usize, with_mul: bool) -> Vec<String> {
    let room = end - at; // instructions from here to the halt, exclusive
    let pick = rng.gen_range(0..100);
    match pick {
        0..=21 => {
            let mut ops = vec![
                "add", "sub", "xor", "or", "and", "slt", "sltu", "sll", "srl", "sra",
            ];
            if with_mul {
                ops.push("mul");
            }
            let op = ops.choose(rng).unwrap();
            vec![format!("{op} {}, {}, {}", rd(rng), rs(rng), rs(rng))]
        }
        22..=39 => {
            let op = *["addi", "slti", "sltiu", "xori", "ori", "andi"]
                .choose(rng)
                .unwrap();
            vec![format!("{op} {}, {}, {}", rd(rng), rs(rng), imm12(rng))]
        }
        40..=45 => {
            let op = *["slli", "srli", "srai"].choose(rng).unwrap();
            vec![format!(
                "{op} {}, {}, {}",
                rd(rng),
                rs(rng),
                rng.gen_range(0..32)
            )]
        }
        46..=49 => {
            let op = *["lui", "auipc"].choose(rng).unwrap();
            vec![format!(
                "{op} {}, {:#x}",
                rd(rng),
                rng.gen_range(0..1u32 << 20)
            )]
        }
        50..=59 => {
            let (op, size) = *[("lw", 4), ("lh", 2), ("lhu", 2), ("lb", 1), ("lbu", 1)]
                .choose(rng)
                .unwrap();
            let off = rng.gen_range(0..2048 / size) * size;
            vec![format!("{op} {}, {off}(x29)", rd(rng))]
        }
        60..=67 => {
            let (op, size) = *[("sw", 4), ("sh", 2), ("sb", 1)].choose(rng).unwrap();
            let off = rng.gen_range(0..2048 / size) * size;
            vec![format!("{op} {}, {off}(x29)", rs(rng))]
        }
        68..=73 if room >= 3 => {
            let ops: &[(&str, i32)] = &[
                ("lw", 0x7fc),
                ("lhu", 0x7fe),
                ("lb", 0x7ff),
                ("sw", 0x7fc),
                ("sh", 0x7fe),
                ("sb", 0x7ff),
            ];
            let (op, mask) = *ops.choose(rng).unwrap();
            let reg = if op.starts_with('s') {
                rs(rng)
            } else {
                rd(rng)
            };
            vec![
                format!("andi x30, {}, {mask}", rs(rng)),
                "add x30, x30, x29".to_string(),
                format!("{op} {reg}, 0(x30)"),
            ]
        }
        74..=87 => {
            let op = *["beq", "bne", "blt", "bge", "bltu", "bgeu"]
                .choose(rng)
                .unwrap();
            let k = rng.gen_range(1..=8.min(room));
            vec![format!("{op} {}, {}, @{k}", rs(rng), rs(rng))]
        }
        88..=92 => {
            let k = rng.gen_range(1..=12.min(room));
            vec![format!("jal {}, @{k}", rd(rng))]
        }
        93..=96 if room >= 3 => {
            // auipc at `at`, jalr at `at + 1`, target at `at + 2 + m`
            let m = rng.gen_range(0..=(room - 2).min(6));
            vec![
                "auipc x30, 0".to_string(),
                format!("jalr {}, %{}(x30)", rd(rng), 2 + m),
            ]
        }
        97 => vec!["fence".to_string()],
        _ => vec!["nop".to_string()],
    }
}

/// Assembly source with `body_len` instructions after the prologue, then `halt`.
pub fn random_program(rng: &mut impl Rng, body_len: usize, with_mul: bool) -> String {
    build(rng, body_len, 1, with_mul)
}

/// Like [`random_program`], but the body runs `passes` times.
pub fn random_looped_program(
    rng: &mut impl Rng,
    body_len: usize,
    passes: u32,
    with_mul: bool,
) -> String {
    build(rng, body_len, passes, with_mul)
}

fn build(rng: &mut impl Rng, body_len: usize, passes: u32, with_mul: bool) -> String {
    let mut lines: Vec<String> = PROLOGUE.iter().map(|s| s.to_string()).collect();
    let looped = passes > 1;
    if looped {
        lines.push(format!("addi x28, x0, {passes}"));
        lines.push("top: nop".to_string());
    }
    let end = lines.len() + body_len;
    while lines.len() < end {
        for l in statement(rng, lines.len(), end, with_mul) {
            if lines.len() < end {
                lines.push(l);
            }
        }
    }
    if looped {
        lines.push("addi x28, x28, -1".to_string());
        lines.push("bnez x28, top".to_string());
    }
    lines.push("halt".to_string());

    // Resolve `@k` word offsets, never landing inside a sequence that
    // builds its address in x30.
    let no_land: Vec<bool> = lines
        .iter()
        .map(|l| l.contains("(x30)") || l.starts_with("add x30"))
        .collect();
    for (i, line) in lines.iter_mut().enumerate() {
        // `@k`: k words after this line; `%k`: k words after the preceding auipc.
        let Some(at) = line.find(['@', '%']) else {
            continue;
        };
        let base = if line.as_bytes()[at] == b'%' {
            i - 1
        } else {
            i
        };
        let digits = line[at + 1..]
            .find(|c: char| !c.is_ascii_digit())
            .map_or(line.len(), |d| at + 1 + d);
        let mut k: usize = line[at + 1..digits].parse().unwrap();
        while no_land[base + k] {
            k += 1;
        }
        *line = format!("{}{}{}", &line[..at], 4 * k, &line[digits..]);
    }
    lines.join("\n") + "\n"
}
