//! Configuration parsing, deterministic CSV output, and binary snapshots.
//!
//! The configuration is flat `key = value` text. Unknown keys are rejected,
//! duplicate keys name both offending lines, and validation reports every
//! violation rather than the first. Floats are serialized with Rust's
//! shortest round-trip formatting, which is locale-independent and
//! deterministic, so identical runs produce identical bytes.

use std::collections::HashMap;
use std::io::{Read as _, Write as _};
use std::path::Path;

use crate::driver::{
    csv_columns, DiagnosticsRecord, InitDensity, InitVelocity, KernelChoice, RunMode,
    SimulationConfig,
};
use crate::{Error, Result};

/// All violations found while parsing or validating a configuration.
#[derive(Debug, Clone)]
pub struct ConfigViolations(pub Vec<String>);

impl std::fmt::Display for ConfigViolations {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0.join("; "))
    }
}

impl From<ConfigViolations> for Error {
    fn from(v: ConfigViolations) -> Error {
        Error::Config(v.to_string())
    }
}

const KNOWN_KEYS: [&str; 16] = [
    "kernel.kind",
    "kernel.alpha",
    "kernel.N",
    "time.T",
    "fene.b",
    "trunc.ell",
    "grid.nx",
    "grid.nr",
    "grid.ntheta",
    "mode",
    "init.u",
    "init.psi",
    "forcing.modes",
    "gradu",
    "perturb.delta",
    "out.dir",
];

/// Parse a flat `key = value` configuration into a validated config.
pub fn parse_config(text: &str) -> std::result::Result<SimulationConfig, ConfigViolations> {
    let mut errs: Vec<String> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut values: HashMap<String, String> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errs.push(format!("line {lineno}: expected key = value, got {line:?}"));
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            errs.push(format!("line {lineno}: unknown key {key:?}"));
            continue;
        }
        if let Some(first) = seen.get(&key) {
            errs.push(format!(
                "duplicate key {key:?} on lines {first} and {lineno}"
            ));
            continue;
        }
        seen.insert(key.clone(), lineno);
        values.insert(key, value);
    }

    let mut cfg = SimulationConfig::default();
    let line_of = |key: &str, seen: &HashMap<String, usize>| -> usize {
        seen.get(key).copied().unwrap_or(0)
    };

    let parse_f64 = |key: &str, errs: &mut Vec<String>, values: &HashMap<String, String>, seen: &HashMap<String, usize>| -> Option<f64> {
        values.get(key).map(|v| {
            v.parse::<f64>().map_err(|_| {
                errs.push(format!(
                    "line {}: {key}: malformed number {v:?}",
                    line_of(key, seen)
                ))
            })
        }).and_then(|r| r.ok())
    };
    let parse_usize = |key: &str, errs: &mut Vec<String>, values: &HashMap<String, String>, seen: &HashMap<String, usize>| -> Option<usize> {
        values.get(key).map(|v| {
            v.parse::<usize>().map_err(|_| {
                errs.push(format!(
                    "line {}: {key}: malformed integer {v:?}",
                    line_of(key, seen)
                ))
            })
        }).and_then(|r| r.ok())
    };

    let kind = values.get("kernel.kind").cloned();
    let alpha = parse_f64("kernel.alpha", &mut errs, &values, &seen);
    match kind.as_deref() {
        Some("abel") => match alpha {
            Some(a) => cfg.kernel = KernelChoice::Abel { alpha: a },
            None => {
                if !values.contains_key("kernel.alpha") {
                    errs.push("kernel.alpha: required when kernel.kind = abel".into());
                }
            }
        },
        Some("classical") | None => {
            cfg.kernel = KernelChoice::Classical;
            if values.contains_key("kernel.alpha") && kind.as_deref() == Some("classical") {
                errs.push(format!(
                    "line {}: kernel.alpha: only meaningful for kernel.kind = abel",
                    line_of("kernel.alpha", &seen)
                ));
            }
        }
        Some(other) => errs.push(format!(
            "line {}: kernel.kind: expected abel or classical, got {other:?}",
            line_of("kernel.kind", &seen)
        )),
    }
    if let Some(n) = parse_usize("kernel.N", &mut errs, &values, &seen) {
        cfg.steps = n;
    }
    if let Some(t) = parse_f64("time.T", &mut errs, &values, &seen) {
        cfg.horizon = t;
    }
    if let Some(b) = parse_f64("fene.b", &mut errs, &values, &seen) {
        cfg.b = b;
    }
    if let Some(e) = parse_f64("trunc.ell", &mut errs, &values, &seen) {
        cfg.ell = e;
    }
    if let Some(v) = parse_usize("grid.nx", &mut errs, &values, &seen) {
        cfg.nx = v;
    }
    if let Some(v) = parse_usize("grid.nr", &mut errs, &values, &seen) {
        cfg.nr = v;
    }
    if let Some(v) = parse_usize("grid.ntheta", &mut errs, &values, &seen) {
        cfg.ntheta = v;
    }
    if let Some(v) = values.get("mode") {
        match v.as_str() {
            "full" => cfg.mode = RunMode::Full,
            "homogeneous" => cfg.mode = RunMode::Homogeneous,
            other => errs.push(format!(
                "line {}: mode: expected full or homogeneous, got {other:?}",
                line_of("mode", &seen)
            )),
        }
    }
    if let Some(v) = values.get("init.u") {
        match v.as_str() {
            "zero" => cfg.init_u = InitVelocity::Zero,
            "taylor_green" => cfg.init_u = InitVelocity::TaylorGreen,
            other => errs.push(format!(
                "line {}: init.u: expected zero or taylor_green, got {other:?}",
                line_of("init.u", &seen)
            )),
        }
    }
    if let Some(v) = values.get("init.psi") {
        match v.as_str() {
            "uniform" => cfg.init_psi = InitDensity::Uniform,
            "q_bump" => cfg.init_psi = InitDensity::QBump,
            "x_bump" => cfg.init_psi = InitDensity::XBump,
            other => errs.push(format!(
                "line {}: init.psi: expected uniform, q_bump or x_bump, got {other:?}",
                line_of("init.psi", &seen)
            )),
        }
    }
    if let Some(v) = values.get("forcing.modes") {
        cfg.forcing.clear();
        for part in v.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let nums: Vec<&str> = part.split(',').map(str::trim).collect();
            if nums.len() != 5 {
                errs.push(format!(
                    "line {}: forcing.modes: each entry needs kx,ky,ax,ay,phase; got {part:?}",
                    line_of("forcing.modes", &seen)
                ));
                continue;
            }
            let kx = nums[0].parse::<i32>();
            let ky = nums[1].parse::<i32>();
            let ax = nums[2].parse::<f64>();
            let ay = nums[3].parse::<f64>();
            let ph = nums[4].parse::<f64>();
            match (kx, ky, ax, ay, ph) {
                (Ok(a), Ok(b), Ok(c), Ok(d), Ok(e)) => cfg.forcing.push((a, b, c, d, e)),
                _ => errs.push(format!(
                    "line {}: forcing.modes: malformed entry {part:?}",
                    line_of("forcing.modes", &seen)
                )),
            }
        }
    }
    if let Some(v) = values.get("gradu") {
        let nums: Vec<&str> = v.split(',').map(str::trim).collect();
        if nums.len() != 4 {
            errs.push(format!(
                "line {}: gradu: expected a11,a12,a21,a22, got {v:?}",
                line_of("gradu", &seen)
            ));
        } else {
            let parsed: Vec<_> = nums.iter().map(|s| s.parse::<f64>()).collect();
            if parsed.iter().any(|p| p.is_err()) {
                errs.push(format!(
                    "line {}: gradu: malformed number in {v:?}",
                    line_of("gradu", &seen)
                ));
            } else {
                let p: Vec<f64> = parsed.into_iter().map(|x| x.unwrap()).collect();
                cfg.grad_u = [[p[0], p[1]], [p[2], p[3]]];
            }
        }
    }
    if let Some(d) = parse_f64("perturb.delta", &mut errs, &values, &seen) {
        cfg.perturb_delta = d;
    }
    if let Some(v) = values.get("out.dir") {
        cfg.out_dir = v.clone();
    }

    if errs.is_empty() {
        if let Err(mut v) = cfg.validate() {
            errs.append(&mut v);
        }
    }
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigViolations(errs))
    }
}

/// Serialize a config so that reparsing yields an equal config.
pub fn config_text(cfg: &SimulationConfig) -> String {
    let mut out = String::new();
    match cfg.kernel {
        KernelChoice::Abel { alpha } => {
            out.push_str("kernel.kind = abel\n");
            out.push_str(&format!("kernel.alpha = {alpha}\n"));
        }
        KernelChoice::Classical => out.push_str("kernel.kind = classical\n"),
    }
    out.push_str(&format!("kernel.N = {}\n", cfg.steps));
    out.push_str(&format!("time.T = {}\n", cfg.horizon));
    out.push_str(&format!("fene.b = {}\n", cfg.b));
    out.push_str(&format!("trunc.ell = {}\n", cfg.ell));
    out.push_str(&format!("grid.nx = {}\n", cfg.nx));
    out.push_str(&format!("grid.nr = {}\n", cfg.nr));
    out.push_str(&format!("grid.ntheta = {}\n", cfg.ntheta));
    out.push_str(&format!(
        "mode = {}\n",
        match cfg.mode {
            RunMode::Full => "full",
            RunMode::Homogeneous => "homogeneous",
        }
    ));
    out.push_str(&format!(
        "init.u = {}\n",
        match cfg.init_u {
            InitVelocity::Zero => "zero",
            InitVelocity::TaylorGreen => "taylor_green",
        }
    ));
    out.push_str(&format!(
        "init.psi = {}\n",
        match cfg.init_psi {
            InitDensity::Uniform => "uniform",
            InitDensity::QBump => "q_bump",
            InitDensity::XBump => "x_bump",
        }
    ));
    let modes: Vec<String> = cfg
        .forcing
        .iter()
        .map(|(kx, ky, ax, ay, ph)| format!("{kx},{ky},{ax},{ay},{ph}"))
        .collect();
    out.push_str(&format!("forcing.modes = {}\n", modes.join("; ")));
    out.push_str(&format!(
        "gradu = {},{},{},{}\n",
        cfg.grad_u[0][0], cfg.grad_u[0][1], cfg.grad_u[1][0], cfg.grad_u[1][1]
    ));
    out.push_str(&format!("perturb.delta = {}\n", cfg.perturb_delta));
    out.push_str(&format!("out.dir = {}\n", cfg.out_dir));
    out
}

/// Fixed CSV header; the column order is part of the format.
pub const CSV_HEADER: &str =
    "t,ke,enstrophy,entropy,mass,min_psi,clip_mass,max_rho,stress_norm,energy_residual";

/// Render diagnostics as deterministic CSV bytes.
pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Diagnostics("empty diagnostics series".into()));
    }
    let mut out = String::with_capacity(records.len() * 96);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let cols = csv_columns(r);
        let mut first = true;
        for c in cols {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format!("{c}"));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Write diagnostics to a file; nothing is created for an empty series.
pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let body = diagnostics_csv(records)?;
    let ctx = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(ctx)?;
    f.write_all(body.as_bytes()).map_err(ctx)?;
    Ok(())
}

/// Magic bytes of the snapshot format.
pub const SNAPSHOT_MAGIC: &[u8; 4] = b"NSFP";
/// Current snapshot format version.
pub const SNAPSHOT_VERSION: u32 = 1;

/// In-memory snapshot of one recorded state.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotFile {
    /// 0 = homogeneous, 1 = full.
    pub mode_tag: u32,
    pub nx: u32,
    pub nr: u32,
    pub ntheta: u32,
    pub time_index: u32,
    /// Scaled density, row-major (x outer, then r, then theta).
    pub psi: Vec<f64>,
    /// Physical velocity components (empty in homogeneous mode).
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
}

impl SnapshotFile {
    fn expected_psi_len(&self) -> usize {
        let nq = (self.nr * self.ntheta) as usize;
        match self.mode_tag {
            0 => nq,
            _ => (self.nx * self.nx) as usize * nq,
        }
    }

    fn expected_u_len(&self) -> usize {
        match self.mode_tag {
            0 => 0,
            _ => (self.nx * self.nx) as usize,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        if self.psi.len() != self.expected_psi_len()
            || self.ux.len() != self.expected_u_len()
            || self.uy.len() != self.expected_u_len()
        {
            return Err(Error::Snapshot(format!(
                "payload lengths ({}, {}, {}) do not match header",
                self.psi.len(),
                self.ux.len(),
                self.uy.len()
            )));
        }
        let mut out = Vec::with_capacity(28 + 8 * (self.psi.len() + 2 * self.ux.len()));
        out.extend_from_slice(SNAPSHOT_MAGIC);
        for v in [
            SNAPSHOT_VERSION,
            self.mode_tag,
            self.nx,
            self.nr,
            self.ntheta,
            self.time_index,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.psi.iter().chain(&self.ux).chain(&self.uy) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 28 {
            return Err(Error::Snapshot("file shorter than the header".into()));
        }
        if &bytes[0..4] != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot("bad magic, not an NSFP snapshot".into()));
        }
        let u32_at = |off: usize| {
            u32::from_le_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]])
        };
        let version = u32_at(4);
        if version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported version {version}, expected {SNAPSHOT_VERSION}"
            )));
        }
        let mut snap = SnapshotFile {
            mode_tag: u32_at(8),
            nx: u32_at(12),
            nr: u32_at(16),
            ntheta: u32_at(20),
            time_index: u32_at(24),
            psi: Vec::new(),
            ux: Vec::new(),
            uy: Vec::new(),
        };
        if snap.mode_tag > 1 {
            return Err(Error::Snapshot(format!("unknown mode tag {}", snap.mode_tag)));
        }
        let n_psi = snap.expected_psi_len();
        let n_u = snap.expected_u_len();
        let expected = 28 + 8 * (n_psi + 2 * n_u);
        if bytes.len() != expected {
            return Err(Error::Snapshot(format!(
                "payload length {} does not match the header-implied {}",
                bytes.len(),
                expected
            )));
        }
        let mut off = 28;
        let read_vec = |len: usize, off: &mut usize| -> Vec<f64> {
            let mut v = Vec::with_capacity(len);
            for _ in 0..len {
                let mut b = [0u8; 8];
                b.copy_from_slice(&bytes[*off..*off + 8]);
                v.push(f64::from_le_bytes(b));
                *off += 8;
            }
            v
        };
        snap.psi = read_vec(n_psi, &mut off);
        snap.ux = read_vec(n_u, &mut off);
        snap.uy = read_vec(n_u, &mut off);
        Ok(snap)
    }
}

pub fn write_snapshot(path: &Path, snap: &SnapshotFile) -> Result<()> {
    let bytes = snap.to_bytes()?;
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_snapshot(path: &Path) -> Result<SnapshotFile> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
    SnapshotFile::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::SimulationConfig;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("kernel.kind = classical\n").unwrap();
        assert_eq!(cfg.kernel, KernelChoice::Classical);
        assert_eq!(cfg, SimulationConfig::default());
    }

    #[test]
    fn alpha_bound_is_reported() {
        let err = parse_config("kernel.kind = abel\nkernel.alpha = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("alpha out of (0,1)"), "{err}");
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let err = parse_config("time.T = 1\nfene.b = 4\ntime.T = 2\n").unwrap_err();
        assert!(
            err.to_string().contains("lines 1 and 3"),
            "expected both line numbers: {err}"
        );
    }

    #[test]
    fn unknown_key_rejected_and_all_violations_listed() {
        let err = parse_config(
            "kernel.kind = abel\nkernel.alpha = 2.0\nbogus = 1\ngrid.nx = 7\n",
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown key"), "{msg}");
        assert!(msg.contains("bogus"), "{msg}");
        // Parse-level issues are reported together; numeric-range validation
        // follows once the file itself is well-formed.
        let err2 = parse_config("kernel.kind = abel\nkernel.alpha = 2.0\ngrid.nx = 7\n")
            .unwrap_err();
        let msg2 = err2.to_string();
        assert!(msg2.contains("alpha out of (0,1)"), "{msg2}");
        assert!(msg2.contains("grid.nx"), "{msg2}");
    }

    #[test]
    fn malformed_number_is_an_error() {
        let err = parse_config("kernel.kind = classical\ntime.T = abc\n").unwrap_err();
        assert!(err.to_string().contains("malformed number"), "{err}");
    }

    #[test]
    fn config_round_trip() {
        let cfg = SimulationConfig {
            kernel: KernelChoice::Abel { alpha: 0.35 },
            steps: 123,
            horizon: 0.75,
            b: 3.5,
            ell: 7.0,
            nx: 12,
            nr: 20,
            ntheta: 14,
            mode: RunMode::Full,
            init_u: InitVelocity::TaylorGreen,
            init_psi: InitDensity::XBump,
            forcing: vec![(1, 2, 0.25, -0.5, 0.1)],
            grad_u: [[0.0, 0.0], [0.0, 0.0]],
            perturb_delta: 1e-7,
            out_dir: "results".into(),
        };
        let text = config_text(&cfg);
        let parsed = parse_config(&text).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn gradu_round_trip_and_trace_check() {
        let text = "kernel.kind = classical\ngradu = 0,0.25,0,0\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.grad_u, [[0.0, 0.25], [0.0, 0.0]]);
        let bad = "kernel.kind = classical\ngradu = 0.1,0,0,0.2\n";
        assert!(parse_config(bad).unwrap_err().to_string().contains("trace"));
    }

    #[test]
    fn csv_is_deterministic_and_rejects_empty() {
        assert!(diagnostics_csv(&[]).is_err());
        let rec = DiagnosticsRecord {
            t: 0.0,
            kinetic_energy: 1.5,
            enstrophy: 2.0,
            entropy: 1.0 / std::f64::consts::E,
            mass: 1.0,
            min_psi: 0.5,
            clip_mass: 0.0,
            max_rho: 1.0,
            stress_norm: 0.0,
            energy_residual: 0.0,
            ledger: Default::default(),
        };
        let a = diagnostics_csv(&[rec]).unwrap();
        let b = diagnostics_csv(&[rec]).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with(CSV_HEADER));
        // Full-precision shortest round-trip formatting of 1/e.
        assert!(a.contains("0.36787944117144233"), "{a}");
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let snap = SnapshotFile {
            mode_tag: 1,
            nx: 2,
            nr: 3,
            ntheta: 4,
            time_index: 7,
            psi: (0..48).map(|i| (i as f64).sin() * 1e-3 + 1.0).collect(),
            ux: vec![0.1, -0.2, 0.3, f64::MIN_POSITIVE],
            uy: vec![1.0, 2.0, -3.0, 4.0],
        };
        let bytes = snap.to_bytes().unwrap();
        let back = SnapshotFile::from_bytes(&bytes).unwrap();
        assert_eq!(snap, back);
        let again = back.to_bytes().unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn snapshot_rejects_corrupt_input() {
        let snap = SnapshotFile {
            mode_tag: 0,
            nx: 0,
            nr: 2,
            ntheta: 2,
            time_index: 0,
            psi: vec![1.0; 4],
            ux: vec![],
            uy: vec![],
        };
        let mut bytes = snap.to_bytes().unwrap();
        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(SnapshotFile::from_bytes(&bad_magic).is_err());
        bytes.truncate(bytes.len() - 4);
        assert!(SnapshotFile::from_bytes(&bytes).is_err());
        // Length mismatch in the constructor is also rejected.
        let wrong = SnapshotFile {
            psi: vec![1.0; 3],
            ..snap
        };
        assert!(wrong.to_bytes().is_err());
    }
}
