//! Constant algebra linking the jump-activity index, the weight-function
//! growth order and the observation scheme, plus a symbolic checker for the
//! rate conditions a sampling scheme must satisfy.
//!
//! All scheme checks are done in exponent arithmetic: with `Delta_n = n^-y`,
//! a limit `n Delta_n^a -> 0` holds iff `y a > 1` and `-> infinity` iff
//! `y a < 1`, so every condition reduces to the sign of an affine expression
//! in `y` and carries an exact slack.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Truncation exponent: thresholds scale like `gamma * Delta_n^(1/8)`.
pub const VARPI: f64 = 0.125;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConditionsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

/// The user-facing constants: activity index `beta`, window parameters
/// `zeta < tau`, the induced weight growth order `p` and moment order `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimaryConstants {
    pub beta: f64,
    pub zeta: f64,
    pub tau: f64,
    pub p: f64,
    pub varpi: f64,
    pub t1: f64,
    pub t2: f64,
    pub m: u32,
}

/// Constants derived from the primary set; these drive the scheme checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlternateConstants {
    pub r: f64,
    pub varpi_r: f64,
    pub varpi_v: f64,
    pub q: f64,
    pub epsilon: f64,
    pub ell_tilde: f64,
    pub ell: f64,
    pub m: u32,
}

/// Outcome of checking an observation scheme `Delta_n = n^-y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeCheckReport {
    pub y: f64,
    pub t1: f64,
    pub t2: f64,
    pub passed: bool,
    /// Names of the violated conditions; empty iff `passed`.
    pub violated: Vec<String>,
    /// Signed slack per condition; positive means satisfied strictly.
    pub margins: BTreeMap<String, f64>,
}

/// A planned scheme rate together with its check and conformance flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemePlan {
    pub y: f64,
    pub conforming: bool,
    pub warning: Option<String>,
    pub report: SchemeCheckReport,
}

/// Full bundle emitted by `check-conditions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsReport {
    pub primary: PrimaryConstants,
    pub alternate: AlternateConstants,
    pub scheme: Option<SchemeCheckReport>,
}

/// Derive the primary constants from `(beta, zeta, tau)`.
pub fn derive_primary(beta: f64, zeta: f64, tau: f64) -> Result<PrimaryConstants, ConditionsError> {
    for (name, v) in [("beta", beta), ("zeta", zeta), ("tau", tau)] {
        if !v.is_finite() {
            return Err(ConditionsError::Domain(format!("{name} must be finite, got {v}")));
        }
    }
    if beta <= 0.0 {
        return Err(ConditionsError::Domain(format!("beta must be > 0, got {beta}")));
    }
    if beta >= 2.0 {
        return Err(ConditionsError::Domain(format!("beta must be < 2, got {beta}")));
    }
    if zeta <= 0.0 {
        return Err(ConditionsError::Domain(format!("zeta must be > 0, got {zeta}")));
    }
    if tau >= 1.0 / 16.0 {
        return Err(ConditionsError::Domain(format!("tau must be < 1/16, got {tau}")));
    }
    if zeta >= tau {
        return Err(ConditionsError::Domain(format!(
            "zeta must be < tau, got zeta = {zeta}, tau = {tau}"
        )));
    }

    let p = 8.0 * (1.0 + 3.0 * beta) * (1.0 + tau) / (1.0 - 16.0 * tau);
    let t1 = 1.0 / (1.0 + tau);
    let t2 = 1.0 / (1.0 + zeta);
    let m_arg = (8.0 + 7.0 * beta - beta * beta) / (3.0 - beta);
    let m = ((m_arg.floor() as u32) + 1).max(4);
    if !(4..=18).contains(&m) {
        return Err(ConditionsError::Internal(format!("m = {m} outside {{4,...,18}}")));
    }
    if !(t1 > 0.0 && t1 < t2 && t2 < 1.0) {
        return Err(ConditionsError::Internal(format!("window ordering broken: t1={t1}, t2={t2}")));
    }
    Ok(PrimaryConstants { beta, zeta, tau, p, varpi: VARPI, t1, t2, m })
}

/// Derive the alternate constants and verify the guaranteed inequalities.
pub fn derive_alternate(pc: &PrimaryConstants) -> Result<AlternateConstants, ConditionsError> {
    let (beta, zeta, tau, p) = (pc.beta, pc.zeta, pc.tau, pc.p);
    let r = beta;
    let varpi_r = (1.0 + zeta) / 8.0;
    let varpi_v = (1.0 - 16.0 * tau) / (8.0 * (1.0 + 3.0 * beta));
    let q = varpi_r - (1.0 + 3.0 * beta) * varpi_v;
    let epsilon = (3.0 - beta) / 2.0;
    let ell_tilde = (3.0 - beta) / 4.0;
    let ell = 1.0 + ell_tilde;
    let m_arg = ((2.0 + r * ell) / (ell - 1.0)).max((1.0 + 2.0 * VARPI) / (0.5 - VARPI));
    let m = m_arg.floor() as u32 + 1;

    // Algebraic identity q = zeta/8 + 2 tau.
    let q_alt = zeta / 8.0 + 2.0 * tau;
    if (q - q_alt).abs() > 1e-12 {
        return Err(ConditionsError::Internal(format!(
            "q computed two ways disagrees: {q} vs {q_alt}"
        )));
    }
    // Ordering of the truncation exponents.
    if !(0.0 < varpi_v && varpi_v < VARPI && VARPI < varpi_r) {
        return Err(ConditionsError::Internal(format!(
            "exponent ordering broken: varpi_v={varpi_v}, varpi={VARPI}, varpi_r={varpi_r}"
        )));
    }
    // Bracketing of the truncation exponent.
    if !(1.0 / (2.0 * (p - r)) < VARPI && VARPI < 0.5f64.min(1.0 / (4.0 * r))) {
        return Err(ConditionsError::Internal(format!(
            "truncation exponent bracketing failed for p={p}, r={r}"
        )));
    }
    // Growth-order lower bounds used throughout the rate analysis.
    if !(p > 4.0 + beta && p > 2.0f64.max(1.0 + 3.0 * r)) {
        return Err(ConditionsError::Internal(format!("p = {p} too small for beta = {beta}")));
    }
    if m != pc.m {
        return Err(ConditionsError::Internal(format!(
            "moment order mismatch: alternate {m} vs primary {}",
            pc.m
        )));
    }
    Ok(AlternateConstants { r, varpi_r, varpi_v, q, epsilon, ell_tilde, ell, m })
}

/// Names and strict slacks of the inequality chain
/// `1 < 1 + 2 varpi_r - 2 varpi < 1/t2 < 1/t1 < min(2 p varpi_v - 1, 1 + q/2,
/// 1 + 2 varpi) < 2 - 2 r varpi (1 + epsilon)`.
pub fn inequality_chain(pc: &PrimaryConstants, ac: &AlternateConstants) -> Vec<(String, f64)> {
    let a = 1.0 + 2.0 * ac.varpi_r - 2.0 * pc.varpi;
    let inv_t2 = 1.0 / pc.t2;
    let inv_t1 = 1.0 / pc.t1;
    let mid = (2.0 * pc.p * ac.varpi_v - 1.0)
        .min(1.0 + ac.q / 2.0)
        .min(1.0 + 2.0 * pc.varpi);
    let top = 2.0 - 2.0 * ac.r * pc.varpi * (1.0 + ac.epsilon);
    vec![
        ("1 < 1 + 2 varpi_r - 2 varpi".into(), a - 1.0),
        ("1 + 2 varpi_r - 2 varpi < 1/t2".into(), inv_t2 - a),
        ("1/t2 < 1/t1".into(), inv_t1 - inv_t2),
        ("1/t1 < min(2 p varpi_v - 1, 1 + q/2, 1 + 2 varpi)".into(), mid - inv_t1),
        ("min(...) < 2 - 2 r varpi (1 + epsilon)".into(), top - mid),
    ]
}

fn scheme_conditions(pc: &PrimaryConstants, ac: &AlternateConstants, y: f64) -> Vec<(String, f64)> {
    vec![
        ("y > t1".into(), y - pc.t1),
        ("y < t2".into(), pc.t2 - y),
        ("Delta_n -> 0".into(), y),
        ("n Delta_n -> infinity".into(), 1.0 - y),
        ("n Delta_n^(1 + q/2) -> 0".into(), y * (1.0 + ac.q / 2.0) - 1.0),
        ("n Delta_n^(1 + 2 varpi) -> 0".into(), y * (1.0 + 2.0 * pc.varpi) - 1.0),
        ("n Delta_n^(2 p varpi_v - 1) -> 0".into(), y * (2.0 * pc.p * ac.varpi_v - 1.0) - 1.0),
        (
            "n Delta_n^(2 (1 - r varpi (1 + epsilon))) -> 0".into(),
            y * 2.0 * (1.0 - ac.r * pc.varpi * (1.0 + ac.epsilon)) - 1.0,
        ),
        (
            "n Delta_n^(1 + 2 (varpi_r - varpi)) -> infinity".into(),
            1.0 - y * (1.0 + 2.0 * (ac.varpi_r - pc.varpi)),
        ),
    ]
}

/// Check the observation scheme `Delta_n = n^-y` against the rate window and
/// the seven limit conditions. Failures are report entries, never errors.
pub fn check_scheme(pc: &PrimaryConstants, y: f64) -> Result<SchemeCheckReport, ConditionsError> {
    if !y.is_finite() || y <= 0.0 {
        return Err(ConditionsError::Domain(format!("y must be a positive real, got {y}")));
    }
    let ac = derive_alternate(pc)?;
    let mut margins = BTreeMap::new();
    let mut violated = Vec::new();
    for (name, slack) in scheme_conditions(pc, &ac, y) {
        if slack <= 0.0 {
            violated.push(name.clone());
        }
        margins.insert(name, slack);
    }
    Ok(SchemeCheckReport { y, t1: pc.t1, t2: pc.t2, passed: violated.is_empty(), violated, margins })
}

/// Pick or validate a sampling rate. With `y = None` the midpoint of the
/// conforming window is used (maximal slack on both sides). A nonconforming
/// `y` is a domain error unless `allow_nonconforming` is set, in which case
/// the plan carries a prominent warning instead.
pub fn plan_scheme(
    pc: &PrimaryConstants,
    y: Option<f64>,
    allow_nonconforming: bool,
) -> Result<SchemePlan, ConditionsError> {
    let y = y.unwrap_or(0.5 * (pc.t1 + pc.t2));
    let report = check_scheme(pc, y)?;
    if report.passed {
        Ok(SchemePlan { y, conforming: true, warning: None, report })
    } else if allow_nonconforming {
        let warning = format!(
            "observation scheme y = {y} is NOT conforming (window ({:.6}, {:.6})); violated: {}",
            pc.t1,
            pc.t2,
            report.violated.join(", ")
        );
        Ok(SchemePlan { y, conforming: false, warning: Some(warning), report })
    } else {
        Err(ConditionsError::Domain(format!(
            "y = {y} violates the scheme conditions: {}",
            report.violated.join(", ")
        )))
    }
}

/// Convenience bundle for the CLI: primary and alternate constants plus an
/// optional scheme check.
pub fn constants_report(
    beta: f64,
    zeta: f64,
    tau: f64,
    y: Option<f64>,
) -> Result<ConstantsReport, ConditionsError> {
    let primary = derive_primary(beta, zeta, tau)?;
    let alternate = derive_alternate(&primary)?;
    let scheme = match y {
        Some(y) => Some(check_scheme(&primary, y)?),
        None => None,
    };
    Ok(ConstantsReport { primary, alternate, scheme })
}

impl fmt::Display for ConstantsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.primary;
        let a = &self.alternate;
        writeln!(f, "primary constants")?;
        writeln!(f, "  beta   = {:<12.8} zeta = {:<12.8} tau = {:<12.8}", p.beta, p.zeta, p.tau)?;
        writeln!(f, "  p      = {:<12.8} varpi = {:<12.8} m  = {}", p.p, p.varpi, p.m)?;
        writeln!(f, "  t1     = {:<12.8} t2   = {:<12.8}", p.t1, p.t2)?;
        writeln!(f, "alternate constants")?;
        writeln!(f, "  r      = {:<12.8} varpi_r = {:<12.8} varpi_v = {:<12.8}", a.r, a.varpi_r, a.varpi_v)?;
        writeln!(f, "  q      = {:<12.8} epsilon = {:<12.8} ell     = {:<12.8}", a.q, a.epsilon, a.ell)?;
        match &self.scheme {
            None => writeln!(f, "scheme: not checked (no y supplied)")?,
            Some(s) => {
                writeln!(
                    f,
                    "scheme: y = {} in window ({:.6}, {:.6}) -> {}",
                    s.y,
                    s.t1,
                    s.t2,
                    if s.passed { "CONFORMING" } else { "NOT CONFORMING" }
                )?;
                for (name, slack) in &s.margins {
                    let mark = if *slack > 0.0 { "ok  " } else { "FAIL" };
                    writeln!(f, "  [{mark}] {name:<55} slack = {slack:+.6}")?;
                }
            }
        }
        Ok(())
    }
}
