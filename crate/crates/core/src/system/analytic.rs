use serde::Serialize;

use super::SystemConfig;
use crate::noc::LINK_BITS;

/// Closed-form peak figures for a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticModel {
    /// One instruction per PE per cycle.
    pub peak_mips: f64,
    /// Every CRAM port (one per bank plus the eight-word wide side) busy every cycle.
    pub cram_gbytes_per_s: f64,
    pub bisection_gbits_per_s: f64,
    /// Word-per-cycle broadcast of a full IRAM image.
    pub kernel_load_cycles: u64,
}

pub fn analytic_peaks(cfg: &SystemConfig) -> AnalyticModel {
    let f = cfg.fclk_hz;
    let ports = f64::from(cfg.cluster.cram_ports());
    let big = cfg.rows.max(cfg.cols);
    let cut_rings = if big >= 2 { cfg.rows.min(cfg.cols) } else { 0 };
    AnalyticModel {
        peak_mips: cfg.n_pes() as f64 * f / 1e6,
        cram_gbytes_per_s: cfg.n_clusters() as f64 * ports * 4.0 * f / 1e9,
        bisection_gbits_per_s: 2.0 * cut_rings as f64 * f64::from(LINK_BITS) * f / 1e9,
        kernel_load_cycles: u64::from(cfg.cluster.iram_bytes / 4),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cluster() {
        let m = analytic_peaks(&SystemConfig::single_cluster());
        assert_eq!(m.peak_mips, 2000.0);
        assert_eq!(m.cram_gbytes_per_s, 12.0);
        assert_eq!(m.bisection_gbits_per_s, 0.0);
    }

    #[test]
    fn scales_with_clock() {
        let cfg = SystemConfig {
            fclk_hz: 375e6,
            ..Default::default()
        };
        assert_eq!(analytic_peaks(&cfg).peak_mips, 150_000.0);
    }
}
