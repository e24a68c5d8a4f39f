use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use phalanx::programkit::{assemble, disassemble, load_image, KernelImage, LoadError, LoadTarget};
use phalanx::system::{
    analytic_peaks, HaltCondition, Report, RunError, System, SystemConfig, TraceKinds,
};

use crate::{MetricsArgs, RunArgs};

/// Exit status for a run that stopped on a PE fault.
pub const EXIT_FAULT: u8 = 3;
/// Exit status for a run stopped by the watchdog.
pub const EXIT_WATCHDOG: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub exit: u8,
}

impl CliError {
    fn new(code: &'static str, message: impl Into<String>) -> CliError {
        CliError {
            code,
            message: message.into(),
            exit: 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Diagnostics are always a single line.
        let flat = self.message.replace('\n', " ");
        write!(f, "error[{}]: {flat}", self.code)
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => CliError::new(
            "FileNotFound",
            format!("{}: file not found", path.display()),
        ),
        _ => CliError::new("Io", format!("{}: {e}", path.display())),
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::new("Io", format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<SystemConfig, CliError> {
    let Some(path) = path else {
        return Ok(SystemConfig::default());
    };
    let text = String::from_utf8(read(path)?)
        .map_err(|_| CliError::new("InvalidConfig", format!("{}: not UTF-8", path.display())))?;
    SystemConfig::from_json(&text)
        .map_err(|e| CliError::new("InvalidConfig", format!("{}: {e}", path.display())))
}

fn assemble_file(path: &Path) -> Result<KernelImage, CliError> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::new("Syntax", format!("{}: source is not UTF-8", path.display())))?;
    assemble(&text).map_err(|e| {
        CliError::new(
            e.kind.code(),
            format!("{}:{}: {}", path.display(), e.line, e.kind),
        )
    })
}

/// Reads a kernel: assembly when the extension is `.s`, otherwise a flat image.
fn load_kernel(path: &Path) -> Result<KernelImage, CliError> {
    if path.extension().is_some_and(|e| e == "s" || e == "S") {
        return assemble_file(path);
    }
    KernelImage::from_bytes(&read(path)?)
        .map_err(|e| CliError::new("BadImage", format!("{}: {e}", path.display())))
}

fn parse_placement(arg: &str) -> Result<(usize, usize, PathBuf), CliError> {
    let bad = || {
        CliError::new(
            "Usage",
            format!("--kernel-per-cluster expects X,Y,PATH (got `{arg}`)"),
        )
    };
    let mut parts = arg.splitn(3, ',');
    let x = parts
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(bad)?;
    let y = parts
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(bad)?;
    let path = parts.next().filter(|p| !p.is_empty()).ok_or_else(bad)?;
    Ok((x, y, PathBuf::from(path)))
}

fn load_error(e: LoadError) -> CliError {
    let code = match &e {
        LoadError::Image(phalanx::programkit::ImageError::ImageTooLarge { .. }) => "ImageTooLarge",
        LoadError::Image(_) => "BadImage",
        LoadError::NotQuiescent => "NotQuiescent",
        LoadError::NoSuchCluster { .. } => "NoSuchCluster",
        LoadError::Stuck(_) => "LoadStuck",
        LoadError::Io(_) => "Io",
    };
    CliError::new(code, e.to_string())
}

fn write_stats(path: Option<&Path>, report: &Report) -> Result<(), CliError> {
    match path {
        Some(p) => write(p, (report.to_json() + "\n").as_bytes()),
        None => Ok(()),
    }
}

fn summary(r: &Report) -> String {
    let m = &r.measured;
    format!(
        "{} after {} cycles: retired={} cpi={:.4} mips={:.1} halted={} faulted={} flits={} console_bytes={}",
        r.halt_reason, r.cycles, m.retired, m.cpi, m.mips, m.halted_pes, m.faulted_pes, m.noc.deliveries, m.console_bytes
    )
}

pub fn run(args: RunArgs) -> Result<(), CliError> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(n) = args.max_cycles {
        cfg.max_cycles = n;
    }
    if let Some(f) = args.fclk {
        cfg.fclk_hz = f;
    }
    if let Some(s) = args.stages {
        cfg.stages = s;
    }
    cfg.validate()
        .map_err(|e| CliError::new("InvalidConfig", e.to_string()))?;

    if args.kernel.is_none() && args.kernel_per_cluster.is_empty() {
        return Err(CliError::new(
            "Usage",
            "no kernel given: use --kernel or --kernel-per-cluster",
        ));
    }
    let common = args.kernel.as_deref().map(load_kernel).transpose()?;
    let mut placed = Vec::new();
    let mut seen = BTreeSet::new();
    for arg in &args.kernel_per_cluster {
        let (x, y, path) = parse_placement(arg)?;
        if !seen.insert((x, y)) {
            return Err(CliError::new(
                "Usage",
                format!("two kernels for cluster ({x},{y})"),
            ));
        }
        placed.push((x, y, load_kernel(&path)?));
    }

    let mut sys = System::build(cfg).map_err(|e| CliError::new("InvalidConfig", e.to_string()))?;
    sys.set_threads(args.threads.max(1));
    if let Some(kinds) = &args.trace {
        let kinds = TraceKinds::parse(kinds).map_err(|e| CliError::new("Usage", e))?;
        sys.set_trace(kinds, Box::new(BufWriter::new(io::stdout())));
    }

    // All loads complete before any PE is released.
    if let Some(image) = &common {
        load_image(&mut sys, image, LoadTarget::All).map_err(load_error)?;
    }
    for (x, y, image) in &placed {
        load_image(&mut sys, image, LoadTarget::Cluster { x: *x, y: *y }).map_err(load_error)?;
    }
    if let Some(image) = &common {
        sys.release_all(image.entry);
    }
    for (x, y, image) in &placed {
        sys.release_cluster(*x, *y, image.entry);
    }

    let report = match sys.run(HaltCondition::AllHalted) {
        Ok(r) => r,
        Err(RunError::WatchdogExpired { report }) => {
            write_stats(args.stats.as_deref(), &report)?;
            eprintln!("{}", summary(&report));
            return Err(CliError {
                code: "WatchdogExpired",
                message: format!("no clean halt within {} cycles", report.cycles),
                exit: EXIT_WATCHDOG,
            });
        }
        Err(RunError::Trace(e)) => return Err(CliError::new("Io", format!("trace output: {e}"))),
    };
    drop(sys);
    write_stats(args.stats.as_deref(), &report)?;
    eprintln!("{}", summary(&report));
    if let Some(f) = report.measured.faults.first() {
        return Err(CliError {
            code: "PeFault",
            message: format!(
                "PE {} at pc {:#x}, cycle {}: {} ({} PE(s) faulted)",
                f.pe, f.pc, f.cycle, f.error, report.measured.faulted_pes
            ),
            exit: EXIT_FAULT,
        });
    }
    Ok(())
}

pub fn asm(input: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let image = assemble_file(input)?;
    let out = output.map_or_else(|| input.with_extension("bin"), Path::to_path_buf);
    write(&out, &image.to_bytes())?;
    eprintln!("{}: {} bytes", out.display(), image.len_bytes());
    Ok(())
}

pub fn disasm(input: &Path) -> Result<(), CliError> {
    let image = KernelImage::from_bytes(&read(input)?)
        .map_err(|e| CliError::new("BadImage", format!("{}: {e}", input.display())))?;
    let mut out = BufWriter::new(io::stdout().lock());
    for (i, &w) in image.words().iter().enumerate() {
        writeln!(out, "{:04x}: {}", i * 4, disassemble(w))
            .map_err(|e| CliError::new("Io", e.to_string()))?;
    }
    out.flush().map_err(|e| CliError::new("Io", e.to_string()))
}

pub fn metrics(args: MetricsArgs) -> Result<(), CliError> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(f) = args.fclk {
        cfg.fclk_hz = f;
        cfg.validate()
            .map_err(|e| CliError::new("InvalidConfig", e.to_string()))?;
    }
    let a = analytic_peaks(&cfg);
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&a).expect("model serializes")
        );
    } else {
        println!("peak_mips={}", a.peak_mips);
        println!("cram_GBps={}", a.cram_gbytes_per_s);
        println!("bisection_Gbps={}", a.bisection_gbits_per_s);
        println!("kernel_load_cycles={}", a.kernel_load_cycles);
    }
    Ok(())
}
