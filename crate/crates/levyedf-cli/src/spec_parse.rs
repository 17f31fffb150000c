//! Compact command-line specs for models, weight functions, coefficients and
//! grids. A spec is either `kind:key=value,...` or `@path.json` pointing at a
//! serialized spec document.

use std::collections::BTreeMap;
use std::fs;

use levyedf::limitlaw::GridSpec;
use levyedf::models::{ModelSpec, RhoSpec};
use levyedf::pathsim::CoeffFn;

use crate::error::CliError;

fn parse_kv(body: &str, what: &str) -> Result<BTreeMap<String, f64>, CliError> {
    let mut out = BTreeMap::new();
    if body.trim().is_empty() {
        return Ok(out);
    }
    for part in body.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("{what}: expected key=value, got '{part}'")))?;
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{what}: '{v}' is not a number")))?;
        out.insert(k.trim().to_string(), value);
    }
    Ok(out)
}

fn take(map: &mut BTreeMap<String, f64>, key: &str, what: &str) -> Result<f64, CliError> {
    map.remove(key)
        .ok_or_else(|| CliError::Config(format!("{what}: missing parameter '{key}'")))
}

fn no_leftovers(map: &BTreeMap<String, f64>, what: &str) -> Result<(), CliError> {
    if let Some(k) = map.keys().next() {
        return Err(CliError::Config(format!("{what}: unknown parameter '{k}'")));
    }
    Ok(())
}

/// `exp_jump`, `stable_tempered:c=..,beta=..,lambda=..`,
/// `variance_gamma:c=..,lambda=..` or `@model.json`.
pub fn parse_model(spec: &str) -> Result<ModelSpec, CliError> {
    if let Some(path) = spec.strip_prefix('@') {
        let text = fs::read_to_string(path)?;
        return Ok(serde_json::from_str(&text)?);
    }
    let (kind, body) = spec.split_once(':').unwrap_or((spec, ""));
    let mut kv = parse_kv(body, "model spec")?;
    let out = match kind {
        "exp_jump" => ModelSpec::ExpJump,
        "stable_tempered" => ModelSpec::StableTempered {
            c: take(&mut kv, "c", "model spec")?,
            beta: take(&mut kv, "beta", "model spec")?,
            lambda: take(&mut kv, "lambda", "model spec")?,
        },
        "variance_gamma" => ModelSpec::VarianceGamma {
            c: take(&mut kv, "c", "model spec")?,
            lambda: take(&mut kv, "lambda", "model spec")?,
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown model kind '{other}' (expected exp_jump, stable_tempered, variance_gamma)"
            )))
        }
    };
    no_leftovers(&kv, "model spec")?;
    Ok(out)
}

/// `poly:p=5`, `exp_bump:p=3` or `@rho.json`.
pub fn parse_rho(spec: &str) -> Result<RhoSpec, CliError> {
    if let Some(path) = spec.strip_prefix('@') {
        let text = fs::read_to_string(path)?;
        return Ok(serde_json::from_str(&text)?);
    }
    let (kind, body) = spec.split_once(':').unwrap_or((spec, ""));
    let mut kv = parse_kv(body, "rho spec")?;
    let out = match kind {
        "poly" => RhoSpec::Poly { p: take(&mut kv, "p", "rho spec")? },
        "exp_bump" => RhoSpec::ExpBump { p: take(&mut kv, "p", "rho spec")? },
        other => {
            return Err(CliError::Config(format!(
                "unknown rho kind '{other}' (expected poly, exp_bump)"
            )))
        }
    };
    no_leftovers(&kv, "rho spec")?;
    Ok(out)
}

/// `const:0.3` or `sin:base=..,amp=..,period=..`.
pub fn parse_coeff(spec: &str) -> Result<CoeffFn, CliError> {
    let (kind, body) = spec.split_once(':').unwrap_or((spec, ""));
    match kind {
        "const" => {
            let value: f64 = body
                .parse()
                .map_err(|_| CliError::Config(format!("coefficient: '{body}' is not a number")))?;
            Ok(CoeffFn::Constant { value })
        }
        "sin" => {
            let mut kv = parse_kv(body, "coefficient")?;
            let out = CoeffFn::Sinusoid {
                base: take(&mut kv, "base", "coefficient")?,
                amplitude: take(&mut kv, "amp", "coefficient")?,
                period: take(&mut kv, "period", "coefficient")?,
            };
            no_leftovers(&kv, "coefficient")?;
            Ok(out)
        }
        other => Err(CliError::Config(format!(
            "unknown coefficient kind '{other}' (expected const, sin)"
        ))),
    }
}

/// Evaluation grid `t0:t1:steps` (inclusive endpoints).
pub fn parse_grid(spec: &str) -> Result<GridSpec, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!("grid: expected t0:t1:steps, got '{spec}'")));
    }
    let lo: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Config(format!("grid: '{}' is not a number", parts[0])))?;
    let hi: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Config(format!("grid: '{}' is not a number", parts[1])))?;
    let steps: usize = parts[2]
        .parse()
        .map_err(|_| CliError::Config(format!("grid: '{}' is not a step count", parts[2])))?;
    if !(lo < hi) || steps < 2 {
        return Err(CliError::Config(format!(
            "grid: need t0 < t1 and steps >= 2, got '{spec}'"
        )));
    }
    Ok(GridSpec::Linspace { lo, hi, count: steps })
}

/// Same grammar as [`parse_grid`], resolved to explicit points.
pub fn parse_grid_points(spec: &str) -> Result<Vec<f64>, CliError> {
    match parse_grid(spec)? {
        GridSpec::Linspace { lo, hi, count } => Ok((0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count as f64 - 1.0))
            .collect()),
        _ => unreachable!("parse_grid only produces linspace grids"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_specs() {
        assert_eq!(parse_model("exp_jump").unwrap(), ModelSpec::ExpJump);
        assert_eq!(
            parse_model("stable_tempered:c=0.25,beta=0.5,lambda=1").unwrap(),
            ModelSpec::StableTempered { c: 0.25, beta: 0.5, lambda: 1.0 }
        );
        assert!(parse_model("stable_tempered:c=1").is_err());
        assert!(parse_model("nope").is_err());
        assert!(parse_model("exp_jump:extra=1").is_err());
    }

    #[test]
    fn rho_specs() {
        assert_eq!(parse_rho("poly:p=5").unwrap(), RhoSpec::Poly { p: 5.0 });
        assert_eq!(parse_rho("exp_bump:p=3").unwrap(), RhoSpec::ExpBump { p: 3.0 });
        assert!(parse_rho("poly").is_err());
    }

    #[test]
    fn coeff_specs() {
        assert_eq!(parse_coeff("const:0.3").unwrap(), CoeffFn::Constant { value: 0.3 });
        assert!(matches!(
            parse_coeff("sin:base=0,amp=0.2,period=10").unwrap(),
            CoeffFn::Sinusoid { .. }
        ));
        assert!(parse_coeff("const:x").is_err());
    }

    #[test]
    fn grid_specs() {
        assert_eq!(
            parse_grid("-1:2:31").unwrap(),
            GridSpec::Linspace { lo: -1.0, hi: 2.0, count: 31 }
        );
        assert!(parse_grid("2:1:10").is_err());
        assert!(parse_grid("1:2").is_err());
    }
}
