//! Small parsers for list-valued flags.

use crate::error::{CliError, Result};

/// Comma-separated floats, e.g. `0.15,0.3,0.55`.
pub fn floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("`{t}` is not a number")))
        })
        .collect()
}

/// Comma-separated 1-based user indices, returned 0-based.
pub fn users(s: &str, k: usize) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(u) if (1..=k).contains(&u) => Ok(u - 1),
            _ => Err(CliError::Usage(format!("user `{t}` not in 1..={k}"))),
        })
        .collect()
}

/// Degree set in `start:step:end` ranges and single values, e.g. `2:1:30,35:5:50,60`.
pub fn degrees(s: &str) -> Result<Vec<usize>> {
    let bad = |t: &str| CliError::Usage(format!("bad degree spec `{t}`"));
    let mut out = Vec::new();
    for part in s.split(',') {
        let f: Vec<&str> = part.trim().split(':').collect();
        let num = |x: &str| x.parse::<usize>().map_err(|_| bad(part));
        match f.as_slice() {
            [d] => out.push(num(d)?),
            [a, step, b] => {
                let (a, step, b) = (num(a)?, num(step)?, num(b)?);
                if step == 0 || a > b {
                    return Err(bad(part));
                }
                out.extend((a..=b).step_by(step));
            }
            _ => return Err(bad(part)),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// File-name friendly SNR label, e.g. `1.5` -> `1.5dB`, `-0.5` -> `m0.5dB`.
pub fn snr_label(db: f64) -> String {
    let s = format!("{db}");
    format!("{}dB", s.replace('-', "m"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_ranges() {
        assert_eq!(
            degrees("2:1:4,10:5:20,3").unwrap(),
            vec![2, 3, 4, 10, 15, 20]
        );
        assert!(degrees("2:0:4").is_err());
        assert!(degrees("x").is_err());
    }

    #[test]
    fn user_lists_are_one_based() {
        assert_eq!(users("1,3", 3).unwrap(), vec![0, 2]);
        assert!(users("0", 3).is_err());
        assert!(users("4", 3).is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(snr_label(-0.5), "m0.5dB");
        assert_eq!(snr_label(1.0), "1dB");
    }
}
