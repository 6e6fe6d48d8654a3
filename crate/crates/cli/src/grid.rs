//! Grid arguments: `start:step:stop` ranges or comma lists, where `inf`
//! stands for the steady state.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Point {
    At(f64),
    Steady,
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::At(x) => write!(f, "{x:.16e}"),
            Point::Steady => f.write_str("inf"),
        }
    }
}

pub fn parse(text: &str) -> Result<Vec<Point>, String> {
    let text = text.trim();
    if text.is_empty() {
        return Err("empty grid".into());
    }
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, step, b] = parts[..] else {
            return Err(format!("range must be start:step:stop, got '{text}'"));
        };
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("bad number '{s}': {e}"));
        let (a, step, b) = (num(a)?, num(step)?, num(b)?);
        if !(step > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(format!("range '{text}' needs finite ends and a positive step"));
        }
        if b < a {
            return Err(format!("range '{text}' is empty"));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| Point::At(a + i as f64 * step)).collect());
    }
    text.split(',')
        .map(|s| match s.trim() {
            "inf" | "Inf" | "infinity" => Ok(Point::Steady),
            s => s
                .parse::<f64>()
                .map_err(|e| format!("bad number '{s}': {e}"))
                .and_then(|x| if x.is_finite() { Ok(Point::At(x)) } else { Err(format!("'{s}' is not finite")) }),
        })
        .collect()
}

/// Only finite points allowed.
pub fn parse_finite(text: &str) -> Result<Vec<f64>, String> {
    parse(text)?
        .into_iter()
        .map(|p| match p {
            Point::At(x) => Ok(x),
            Point::Steady => Err("'inf' is not allowed here".to_string()),
        })
        .collect()
}
