//! Flat `key = value` run configuration.
//!
//! One file drives every subcommand; each command reads the subset of
//! keys it needs. Unknown keys are rejected (with a nearest-key
//! suggestion), every numeric range is validated before any computation
//! starts, and the full effective config (defaults included) is echoed
//! into artifact headers so outputs are self-describing.

use std::fmt::Write as _;
use std::path::Path;

use sqg_core::chain::KernelConstants;
use sqg_core::grid::GridField;
use sqg_core::solver::{initial_condition, InitKind, SolverConfig, VelocityMode};
use sqg_core::TorusGrid;

use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Fractional dissipation exponent of (-Delta)^{alpha/2}.
    pub alpha: f64,
    /// Extra viscosity coefficient on -Delta (0 disables it).
    pub epsilon: f64,
    pub d: usize,
    pub n: usize,
    pub t_end: f64,
    pub dt_max: f64,
    pub seed: u64,
    pub snapshot_stride: usize,
    /// Exponent of the lq column and of the dual-decay envelope.
    pub q: f64,
    /// Hoelder exponent for the holder_lp column and holder-scan.
    pub beta: f64,
    /// zero | random | cosine | shear | vortex-pair
    pub init: String,
    pub init_kmax: f64,
    pub init_linf: f64,
    /// riesz | rest | mollified
    pub velocity: String,
    pub mollify_r: f64,
    /// Backward window length for dual-pair (key "s").
    pub s: f64,
    /// Dual integrability exponent (key "p").
    pub p: f64,
    /// bump | random: terminal data for the backward dual.
    pub dual_init: String,
    /// Test-class scale of the bump terminal data (key "r").
    pub r: f64,
    /// Test-class mass constant (key "a").
    pub a: f64,
    /// Input snapshot path for holder-scan (key "snapshot").
    pub snapshot: String,
    /// Translates per axis for the pairing estimator.
    pub translates: usize,
    /// chain: derive (beta, q) from alpha instead of using chain_beta/chain_q.
    pub auto_select: bool,
    pub chain_beta: f64,
    pub chain_q: f64,
    /// Initial sup norm fed to the decay-time solve.
    pub linf0: f64,
    pub lattice_radius: i64,
    /// verify-kernel probes all integer modes with |n| <= mode_max.
    pub mode_max: f64,
    pub const_estimator: f64,
    pub const_rough_part: f64,
    pub const_decay_rate: f64,
    pub const_domination: f64,
    pub const_frac_normalization: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: 0.9,
            epsilon: 0.0,
            d: 2,
            n: 256,
            t_end: 1.0,
            dt_max: 0.5,
            seed: 0,
            snapshot_stride: 1,
            q: 2.0,
            beta: 0.5,
            init: "random".into(),
            init_kmax: 3.0,
            init_linf: 1.0,
            velocity: "riesz".into(),
            mollify_r: 0.5,
            s: 0.1,
            p: 2.0,
            dual_init: "bump".into(),
            r: 0.5,
            a: 2.0,
            snapshot: String::new(),
            translates: 16,
            auto_select: false,
            chain_beta: 0.5,
            chain_q: 32.0,
            linf0: 1.0,
            lattice_radius: 20,
            mode_max: 4.0,
            const_estimator: 1.0,
            const_rough_part: 1.0,
            const_decay_rate: 1.0,
            const_domination: 1.0,
            const_frac_normalization: 1.0,
        }
    }
}

/// Canonical key names, kept sorted; `N` is accepted as an alias for `n`.
const KEYS: [&str; 33] = [
    "a",
    "alpha",
    "auto_select",
    "beta",
    "chain_beta",
    "chain_q",
    "const_decay_rate",
    "const_domination",
    "const_estimator",
    "const_frac_normalization",
    "const_rough_part",
    "d",
    "dt_max",
    "dual_init",
    "epsilon",
    "init",
    "init_kmax",
    "init_linf",
    "lattice_radius",
    "linf0",
    "mode_max",
    "mollify_r",
    "n",
    "p",
    "q",
    "r",
    "s",
    "seed",
    "snapshot",
    "snapshot_stride",
    "t_end",
    "translates",
    "velocity",
];

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn suggest(key: &str) -> Option<&'static str> {
    KEYS.iter()
        .map(|&k| (levenshtein(key, k), k))
        .min()
        .filter(|&(dist, _)| dist <= 3)
        .map(|(_, k)| k)
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    v.parse().map_err(|_| CliError::ConfigLine {
        line,
        msg: format!("key \"{key}\" needs a number, got \"{v}\""),
    })
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| CliError::ConfigLine {
        line,
        msg: format!("key \"{key}\" needs a non-negative integer, got \"{v}\""),
    })
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(CliError::ConfigLine {
            line,
            msg: format!("key \"{key}\" needs true or false, got \"{v}\""),
        }),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen: Vec<String> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((k, v)) = trimmed.split_once('=') else {
            return Err(CliError::ConfigLine {
                line,
                msg: format!("expected key = value, got \"{trimmed}\""),
            });
        };
        let key_raw = k.trim();
        let v = v.trim();
        // strip a trailing inline comment
        let v = v.split('#').next().unwrap_or("").trim();
        let key = if key_raw == "N" { "n" } else { key_raw };
        if !KEYS.contains(&key) {
            let hint = suggest(key)
                .map(|s| format!("; did you mean \"{s}\"?"))
                .unwrap_or_default();
            return Err(CliError::ConfigLine {
                line,
                msg: format!("unknown key \"{key_raw}\"{hint}"),
            });
        }
        if seen.iter().any(|s| s == key) {
            return Err(CliError::ConfigLine {
                line,
                msg: format!("duplicate key \"{key}\""),
            });
        }
        seen.push(key.to_string());
        match key {
            "alpha" => cfg.alpha = parse_f64(line, key, v)?,
            "epsilon" => cfg.epsilon = parse_f64(line, key, v)?,
            "d" => cfg.d = parse_usize(line, key, v)?,
            "n" => cfg.n = parse_usize(line, key, v)?,
            "t_end" => cfg.t_end = parse_f64(line, key, v)?,
            "dt_max" => cfg.dt_max = parse_f64(line, key, v)?,
            "seed" => {
                cfg.seed = v.parse().map_err(|_| CliError::ConfigLine {
                    line,
                    msg: format!("key \"seed\" needs a non-negative integer, got \"{v}\""),
                })?
            }
            "snapshot_stride" => cfg.snapshot_stride = parse_usize(line, key, v)?,
            "q" => cfg.q = parse_f64(line, key, v)?,
            "beta" => cfg.beta = parse_f64(line, key, v)?,
            "init" => cfg.init = v.to_string(),
            "init_kmax" => cfg.init_kmax = parse_f64(line, key, v)?,
            "init_linf" => cfg.init_linf = parse_f64(line, key, v)?,
            "velocity" => cfg.velocity = v.to_string(),
            "mollify_r" => cfg.mollify_r = parse_f64(line, key, v)?,
            "s" => cfg.s = parse_f64(line, key, v)?,
            "p" => cfg.p = parse_f64(line, key, v)?,
            "dual_init" => cfg.dual_init = v.to_string(),
            "r" => cfg.r = parse_f64(line, key, v)?,
            "a" => cfg.a = parse_f64(line, key, v)?,
            "snapshot" => cfg.snapshot = v.to_string(),
            "translates" => cfg.translates = parse_usize(line, key, v)?,
            "auto_select" => cfg.auto_select = parse_bool(line, key, v)?,
            "chain_beta" => cfg.chain_beta = parse_f64(line, key, v)?,
            "chain_q" => cfg.chain_q = parse_f64(line, key, v)?,
            "linf0" => cfg.linf0 = parse_f64(line, key, v)?,
            "lattice_radius" => {
                let r = parse_usize(line, key, v)?;
                cfg.lattice_radius = r as i64;
            }
            "mode_max" => cfg.mode_max = parse_f64(line, key, v)?,
            "const_estimator" => cfg.const_estimator = parse_f64(line, key, v)?,
            "const_rough_part" => cfg.const_rough_part = parse_f64(line, key, v)?,
            "const_decay_rate" => cfg.const_decay_rate = parse_f64(line, key, v)?,
            "const_domination" => cfg.const_domination = parse_f64(line, key, v)?,
            "const_frac_normalization" => cfg.const_frac_normalization = parse_f64(line, key, v)?,
            _ => unreachable!("key list and dispatch disagree"),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

fn range_err(key: &'static str, why: String) -> CliError {
    CliError::Config(format!("key \"{key}\" out of range: {why}"))
}

impl RunConfig {
    /// Every range check runs here, before any computation, naming the
    /// offending key. Core types re-validate, but this layer owns the
    /// user-facing message.
    pub fn validate(&self) -> Result<()> {
        let fin_pos = |key: &'static str, v: f64, lo_open: f64| -> Result<()> {
            if !(v.is_finite() && v > lo_open) {
                return Err(range_err(key, format!("need a finite value > {lo_open}, got {v}")));
            }
            Ok(())
        };
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(range_err("alpha", format!("need 0 < alpha <= 2, got {}", self.alpha)));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(range_err("epsilon", format!("need epsilon >= 0, got {}", self.epsilon)));
        }
        if !(1..=3).contains(&self.d) {
            return Err(range_err("d", format!("need d in 1..=3, got {}", self.d)));
        }
        if self.n < 8 || !self.n.is_power_of_two() {
            return Err(range_err("n", format!("need a power of two >= 8, got {}", self.n)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(range_err("t_end", format!("need t_end >= 0, got {}", self.t_end)));
        }
        fin_pos("dt_max", self.dt_max, 0.0)?;
        if self.snapshot_stride == 0 {
            return Err(range_err("snapshot_stride", "need at least 1".into()));
        }
        if !(self.q.is_finite() && self.q >= 1.0) {
            return Err(range_err("q", format!("need q >= 1, got {}", self.q)));
        }
        for (key, b) in [("beta", self.beta), ("chain_beta", self.chain_beta)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(range_err(key, format!("need an exponent in (0, 1), got {b}")));
            }
        }
        match self.init.as_str() {
            "zero" | "random" | "cosine" | "shear" | "vortex-pair" => {}
            other => {
                return Err(range_err(
                    "init",
                    format!("expected zero|random|cosine|shear|vortex-pair, got \"{other}\""),
                ))
            }
        }
        fin_pos("init_kmax", self.init_kmax, 0.0)?;
        if !(self.init_linf.is_finite() && self.init_linf >= 0.0) {
            return Err(range_err("init_linf", format!("need init_linf >= 0, got {}", self.init_linf)));
        }
        match self.velocity.as_str() {
            "riesz" | "rest" | "mollified" => {}
            other => {
                return Err(range_err(
                    "velocity",
                    format!("expected riesz|rest|mollified, got \"{other}\""),
                ))
            }
        }
        fin_pos("mollify_r", self.mollify_r, 0.0)?;
        if !(self.s.is_finite() && self.s >= 0.0) {
            return Err(range_err("s", format!("need a window s >= 0, got {}", self.s)));
        }
        fin_pos("p", self.p, 1.0)?;
        match self.dual_init.as_str() {
            "bump" | "random" => {}
            other => {
                return Err(range_err(
                    "dual_init",
                    format!("expected bump|random, got \"{other}\""),
                ))
            }
        }
        fin_pos("r", self.r, 0.0)?;
        fin_pos("a", self.a, 1.0)?;
        if self.translates == 0 {
            return Err(range_err("translates", "need at least 1 per axis".into()));
        }
        let cq = self.chain_q;
        if !(cq.is_finite() && cq >= 2.0 && cq.fract() == 0.0 && (cq as u64).is_power_of_two()) {
            return Err(range_err(
                "chain_q",
                format!("need a dyadic integer >= 2, got {cq}"),
            ));
        }
        if !(self.linf0.is_finite() && self.linf0 >= 0.0) {
            return Err(range_err("linf0", format!("need linf0 >= 0, got {}", self.linf0)));
        }
        if self.lattice_radius < 1 {
            return Err(range_err("lattice_radius", "need at least 1".into()));
        }
        fin_pos("mode_max", self.mode_max, 0.0)?;
        for (key, v) in [
            ("const_estimator", self.const_estimator),
            ("const_rough_part", self.const_rough_part),
            ("const_decay_rate", self.const_decay_rate),
            ("const_domination", self.const_domination),
            ("const_frac_normalization", self.const_frac_normalization),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(range_err(key, format!("need a finite value > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// The full effective configuration, one sorted `key = value` line
    /// each, as embedded in artifact headers. Reparsing the echo
    /// reproduces the config exactly.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("a", self.a.to_string());
        put("alpha", self.alpha.to_string());
        put("auto_select", self.auto_select.to_string());
        put("beta", self.beta.to_string());
        put("chain_beta", self.chain_beta.to_string());
        put("chain_q", self.chain_q.to_string());
        put("const_decay_rate", self.const_decay_rate.to_string());
        put("const_domination", self.const_domination.to_string());
        put("const_estimator", self.const_estimator.to_string());
        put(
            "const_frac_normalization",
            self.const_frac_normalization.to_string(),
        );
        put("const_rough_part", self.const_rough_part.to_string());
        put("d", self.d.to_string());
        put("dt_max", self.dt_max.to_string());
        put("dual_init", self.dual_init.clone());
        put("epsilon", self.epsilon.to_string());
        put("init", self.init.clone());
        put("init_kmax", self.init_kmax.to_string());
        put("init_linf", self.init_linf.to_string());
        put("lattice_radius", self.lattice_radius.to_string());
        put("linf0", self.linf0.to_string());
        put("mode_max", self.mode_max.to_string());
        put("mollify_r", self.mollify_r.to_string());
        put("n", self.n.to_string());
        put("p", self.p.to_string());
        put("q", self.q.to_string());
        put("r", self.r.to_string());
        put("s", self.s.to_string());
        put("seed", self.seed.to_string());
        put("snapshot", self.snapshot.clone());
        put("snapshot_stride", self.snapshot_stride.to_string());
        put("t_end", self.t_end.to_string());
        put("translates", self.translates.to_string());
        put("velocity", self.velocity.clone());
        out
    }

    pub fn solver_config(&self) -> SolverConfig {
        let velocity_mode = match self.velocity.as_str() {
            "rest" => VelocityMode::Prescribed,
            "mollified" => VelocityMode::Mollified { r: self.mollify_r },
            _ => VelocityMode::RieszPerp,
        };
        let init = match self.init.as_str() {
            "zero" | "cosine" => InitKind::Zero,
            "shear" => InitKind::Shear,
            "vortex-pair" => InitKind::VortexPair,
            _ => InitKind::RandomMeanZero {
                kmax: self.init_kmax,
                linf: self.init_linf,
            },
        };
        SolverConfig {
            alpha: self.alpha,
            epsilon: self.epsilon,
            d: self.d,
            n: self.n,
            dt_max: self.dt_max,
            t_end: self.t_end,
            velocity_mode,
            snapshot_stride: self.snapshot_stride,
            seed: self.seed,
            init,
            series_q: self.q,
        }
    }

    /// The initial scalar for forward runs. `cosine` is the exact
    /// invariant-solution preset theta0 = cos x1 and is built here; the
    /// remaining presets come from the solver.
    pub fn initial_field(&self) -> Result<GridField> {
        let scfg = self.solver_config();
        let grid = scfg.validate()?;
        if self.init == "cosine" {
            return Ok(GridField::from_fn(grid, |x| x[0].cos()));
        }
        Ok(initial_condition(&scfg)?)
    }

    pub fn kernel_constants(&self) -> KernelConstants {
        KernelConstants {
            estimator: self.const_estimator,
            rough_part: self.const_rough_part,
            decay_rate: self.const_decay_rate,
            domination: self.const_domination,
            frac_normalization: self.const_frac_normalization,
        }
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        Ok(TorusGrid::new(self.d, self.n)?)
    }
}
