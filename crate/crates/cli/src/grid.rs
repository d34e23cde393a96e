//! Parameter grid syntax: `start:stop:step` or a comma-separated list.

use ssreg::Error;

const MAX_POINTS: usize = 1_000_000;

fn decimals(s: &str) -> Option<usize> {
    let s = s.trim();
    if s.contains(['e', 'E']) {
        return None;
    }
    Some(s.split_once('.').map_or(0, |(_, frac)| frac.len()))
}

fn number(s: &str) -> Result<f64, Error> {
    let v: f64 = s.trim().parse().map_err(|_| Error::InvalidGrid(format!("`{s}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::InvalidGrid(format!("`{s}` is not finite")));
    }
    Ok(v)
}

/// Parses a grid. Ranges include `stop` when it lies within half a step of a
/// grid point; points are rounded to the inputs' decimal places.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, h) = (number(start)?, number(stop)?, number(step)?);
            if !(h > 0.0) {
                return Err(Error::InvalidGrid(format!("step must be positive in `{text}`")));
            }
            if b < a {
                return Err(Error::InvalidGrid(format!("stop is below start in `{text}`")));
            }
            let count = ((b - a) / h + 0.5).floor();
            if count >= MAX_POINTS as f64 {
                return Err(Error::InvalidGrid(format!("`{text}` has too many points")));
            }
            let places = [start, stop, step].iter().map(|s| decimals(s)).collect::<Option<Vec<_>>>();
            Ok((0..=count as usize)
                .map(|k| {
                    let v = a + k as f64 * h;
                    match &places {
                        Some(d) => {
                            let d = *d.iter().max().unwrap();
                            let r: f64 = format!("{v:.d$}").parse().unwrap();
                            if r == 0.0 {
                                0.0
                            } else {
                                r
                            }
                        }
                        None => v,
                    }
                })
                .collect())
        }
        [list] => {
            let vals = list.split(',').map(number).collect::<Result<Vec<_>, _>>()?;
            if vals.is_empty() {
                return Err(Error::EmptyGrid);
            }
            Ok(vals)
        }
        _ => Err(Error::InvalidGrid(format!("cannot parse grid `{text}`"))),
    }
}
