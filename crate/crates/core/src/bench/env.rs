//! Free-text description of the machine a benchmark ran on.

use std::fs;

#[derive(Debug, Clone, PartialEq)]
pub struct CpuInfo {
    pub model: String,
    pub mhz: Option<f64>,
    pub cores: usize,
}

/// Reads `/proc/cpuinfo` where available.
pub fn cpu_info() -> CpuInfo {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let text = fs::read_to_string("/proc/cpuinfo").unwrap_or_default();
    let field = |key: &str| {
        text.lines()
            .filter_map(|l| l.split_once(':'))
            .find(|(k, _)| k.trim() == key)
            .map(|(_, v)| v.trim().to_string())
    };
    CpuInfo {
        model: field("model name").unwrap_or_else(|| std::env::consts::ARCH.to_string()),
        mhz: field("cpu MHz").and_then(|v| v.parse().ok()),
        cores,
    }
}

/// `cpu=<model>; mhz=<clock>; cores=<n>; date=<UTC timestamp>`.
pub fn environment_note() -> String {
    let cpu = cpu_info();
    let mhz = cpu.mhz.map_or("unknown".into(), |m| format!("{m:.0}"));
    format!(
        "cpu={}; mhz={}; cores={}; date={}",
        cpu.model.replace(';', ","),
        mhz,
        cpu.cores,
        chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ")
    )
}
