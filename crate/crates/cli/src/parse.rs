//! Flag value parsers.

use lgcert::certification::SettingsDistribution;
use lgcert::simulator::{Drift, DriftParam};

/// A list of real values from one flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Values(pub Vec<f64>);

/// A list of round counts from one flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Rounds(pub Vec<u64>);

pub fn grid_flag(s: &str) -> Result<Values, String> {
    grid(s).map(Values)
}

pub fn values_flag(s: &str) -> Result<Values, String> {
    values(s).map(Values)
}

pub fn rounds_flag(s: &str) -> Result<Rounds, String> {
    rounds(s).map(Rounds)
}

/// `0.25`, or a fraction such as `5/12`.
pub fn number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let n: f64 = num.trim().parse().map_err(|_| format!("bad numerator in `{s}`"))?;
            let d: f64 = den.trim().parse().map_err(|_| format!("bad denominator in `{s}`"))?;
            if d == 0.0 {
                return Err(format!("zero denominator in `{s}`"));
            }
            n / d
        }
        None => s.parse().map_err(|_| format!("`{s}` is not a number"))?,
    };
    if value.is_finite() { Ok(value) } else { Err(format!("`{s}` is not finite")) }
}

/// `start:stop:step`, inclusive of `stop` up to round-off.
pub fn grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, step] = parts[..] else {
        return Err(format!("grid `{s}` must look like start:stop:step"));
    };
    let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
    if step <= 0.0 || stop < start {
        return Err(format!("grid `{s}` needs step > 0 and stop >= start"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return Err(format!("grid `{s}` has more than 10^6 points"));
    }
    Ok((0..count)
        .map(|k| {
            let v = start + k as f64 * step;
            if (v - stop).abs() < 1e-9 * step.max(1.0) { stop } else { v }
        })
        .collect())
}

/// Comma-separated values or a `start:stop:step` grid.
pub fn values(s: &str) -> Result<Vec<f64>, String> {
    if s.contains(':') {
        grid(s)
    } else {
        s.split(',').map(number).collect()
    }
}

/// Positive integer round counts, as a list or a grid; `1e5` style allowed.
pub fn rounds(s: &str) -> Result<Vec<u64>, String> {
    values(s)?
        .into_iter()
        .map(|v| {
            let r = v.round();
            if r >= 1.0 && (v - r).abs() < 1e-6 && r <= u64::MAX as f64 {
                Ok(r as u64)
            } else {
                Err(format!("round count {v} must be a positive integer"))
            }
        })
        .collect()
}

pub fn count(s: &str) -> Result<u64, String> {
    match rounds(s)?.as_slice() {
        [n] => Ok(*n),
        _ => Err(format!("`{s}` must be a single round count")),
    }
}

/// `uniform`, or `biased:p12,p23,p13`.
pub fn distribution(s: &str) -> Result<SettingsDistribution, String> {
    if s == "uniform" {
        return Ok(SettingsDistribution::uniform());
    }
    let Some(rest) = s.strip_prefix("biased:") else {
        return Err(format!("distribution `{s}` must be `uniform` or `biased:p12,p23,p13`"));
    };
    let p: Vec<f64> = rest.split(',').map(number).collect::<Result<_, _>>()?;
    let [p12, p23, p13] = p[..] else {
        return Err(format!("`{s}` needs exactly three probabilities"));
    };
    SettingsDistribution::pairs(p12, p23, p13).map_err(|e| e.to_string())
}

/// `param:amplitude:period`, e.g. `z1:0.05:10000`.
pub fn drift(s: &str) -> Result<Drift, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [param, amplitude, period] = parts[..] else {
        return Err(format!("drift `{s}` must look like z1:0.05:10000"));
    };
    let param = match param {
        "x1" => DriftParam::X1,
        "y1" => DriftParam::Y1,
        "z1" => DriftParam::Z1,
        "x2" => DriftParam::X2,
        "y2" => DriftParam::Y2,
        "z2" => DriftParam::Z2,
        other => return Err(format!("unknown drift parameter `{other}` (x1 y1 z1 x2 y2 z2)")),
    };
    let (amplitude, period) = (number(amplitude)?, number(period)?);
    if period <= 0.0 {
        return Err("drift period must be positive".into());
    }
    Ok(Drift { param, amplitude, period })
}
