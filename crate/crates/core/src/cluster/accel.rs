//! Accelerator hook on the 8-port side of the CRAM.

use super::cram::Cram;

/// Word ports available to an accelerator per cycle on the wide CRAM side.
pub const ACCEL_PORTS: u32 = 8;

/// Budgeted access to the CRAM for one cycle.
pub struct AccelPorts<'a> {
    cram: &'a mut Cram,
    remaining: u32,
    used: u32,
}

impl<'a> AccelPorts<'a> {
    pub(crate) fn new(cram: &'a mut Cram, budget: u32) -> Self {
        AccelPorts {
            cram,
            remaining: budget,
            used: 0,
        }
    }

    pub fn available(&self) -> u32 {
        self.remaining
    }

    pub fn used(&self) -> u32 {
        self.used
    }

    /// Reads the word at a CRAM-relative offset; `None` once the budget is spent.
    pub fn read(&mut self, offset: u32) -> Option<u32> {
        if self.remaining == 0 || offset >= self.cram.bytes() {
            return None;
        }
        self.remaining -= 1;
        self.used += 1;
        Some(self.cram.read(offset))
    }

    pub fn write(&mut self, offset: u32, value: u32) -> bool {
        if self.remaining == 0 || offset >= self.cram.bytes() {
            return false;
        }
        self.remaining -= 1;
        self.used += 1;
        self.cram.write(offset, value);
        true
    }
}

/// A cluster-attached accelerator, stepped once per cycle after message receive.
pub trait Accelerator: Send {
    fn name(&self) -> &str;
    fn cycle(&mut self, ports: &mut AccelPorts<'_>);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SumState {
    Idle { wait: u32 },
    Start { len: u32 },
    Summing { next: u32, end: u32, acc: u32 },
    Finish { acc: u32 },
}

/// Sums a region of CRAM words.
///
/// Control block at `ctrl` (CRAM-relative): word 0 is the word count and the
/// go flag (nonzero starts), word 1 the source offset, word 2 receives the
/// sum. Word 0 is cleared when the sum is written. While idle the control
/// word is polled every `poll_interval` cycles.
#[derive(Debug, Clone)]
pub struct BlockSum {
    ctrl: u32,
    poll_interval: u32,
    state: SumState,
}

impl BlockSum {
    pub fn new(ctrl: u32) -> BlockSum {
        BlockSum {
            ctrl,
            poll_interval: 16,
            state: SumState::Idle { wait: 0 },
        }
    }

    pub fn with_poll_interval(mut self, cycles: u32) -> BlockSum {
        self.poll_interval = cycles.max(1);
        self
    }

    pub fn is_idle(&self) -> bool {
        matches!(self.state, SumState::Idle { .. })
    }
}

impl Accelerator for BlockSum {
    fn name(&self) -> &str {
        "block-sum"
    }

    fn cycle(&mut self, ports: &mut AccelPorts<'_>) {
        if ports.available() == 0 {
            return;
        }
        self.state = match self.state {
            SumState::Idle { wait } if wait > 0 => SumState::Idle { wait: wait - 1 },
            SumState::Idle { .. } => match ports.read(self.ctrl) {
                Some(0) | None => SumState::Idle {
                    wait: self.poll_interval - 1,
                },
                Some(len) => SumState::Start { len },
            },
            SumState::Start { len } => match ports.read(self.ctrl + 4) {
                Some(src) => SumState::Summing {
                    next: src & !3,
                    end: (src & !3).saturating_add(len.saturating_mul(4)),
                    acc: 0,
                },
                None => SumState::Start { len },
            },
            SumState::Summing {
                mut next,
                end,
                mut acc,
            } => {
                while next < end {
                    match ports.read(next) {
                        Some(w) => acc = acc.wrapping_add(w),
                        None => break,
                    }
                    next += 4;
                }
                if next >= end {
                    SumState::Finish { acc }
                } else {
                    SumState::Summing { next, end, acc }
                }
            }
            SumState::Finish { acc } => {
                if ports.available() >= 2 {
                    ports.write(self.ctrl + 8, acc);
                    ports.write(self.ctrl, 0);
                    SumState::Idle { wait: 0 }
                } else {
                    SumState::Finish { acc }
                }
            }
        };
    }
}
