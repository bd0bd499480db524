//! Period labels. Internally periods are integers; quarterly series use
//! `year * 4 + quarter - 1`, monthly `year * 12 + month - 1` and annual the
//! year itself. Any other frequency label prints the bare integer.

use crate::error::{invalid, Result};

pub fn format_period(t: i64, frequency: &str) -> String {
    match frequency {
        "Q" => format!("{}Q{}", t.div_euclid(4), t.rem_euclid(4) + 1),
        "M" => format!("{}-{:02}", t.div_euclid(12), t.rem_euclid(12) + 1),
        _ => t.to_string(),
    }
}

pub fn parse_period(s: &str, frequency: &str) -> Result<i64> {
    let s = s.trim();
    let bad = || invalid(format!("period {s:?} does not match frequency {frequency:?}"));
    match frequency {
        "Q" => {
            let (y, q) = s.split_once('Q').ok_or_else(bad)?;
            let y: i64 = y.parse().map_err(|_| bad())?;
            let q: i64 = q.parse().map_err(|_| bad())?;
            if !(1..=4).contains(&q) {
                return Err(bad());
            }
            Ok(y * 4 + q - 1)
        }
        "M" => {
            let (y, m) = s.rsplit_once('-').ok_or_else(bad)?;
            let y: i64 = y.parse().map_err(|_| bad())?;
            let m: i64 = m.parse().map_err(|_| bad())?;
            if !(1..=12).contains(&m) {
                return Err(bad());
            }
            Ok(y * 12 + m - 1)
        }
        _ => s.parse().map_err(|_| bad()),
    }
}

/// Frequency implied by a label's shape: `2005Q2` quarterly, `2005-04`
/// monthly, anything else plain.
pub fn detect_frequency(label: &str) -> &'static str {
    let l = label.trim();
    if l.contains('Q') {
        "Q"
    } else if l.len() > 1 && l[1..].contains('-') {
        "M"
    } else {
        ""
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarterly_labels() {
        let t = parse_period("2005Q2", "Q").unwrap();
        assert_eq!(t, 2005 * 4 + 1);
        assert_eq!(format_period(t, "Q"), "2005Q2");
        assert_eq!(format_period(t + 3, "Q"), "2006Q1");
        assert!(parse_period("2005Q5", "Q").is_err());
    }

    #[test]
    fn monthly_and_plain() {
        assert_eq!(format_period(parse_period("1999-12", "M").unwrap(), "M"), "1999-12");
        assert_eq!(parse_period("-3", "").unwrap(), -3);
        assert_eq!(format_period(17, "T"), "17");
        assert_eq!(detect_frequency("2001Q1"), "Q");
        assert_eq!(detect_frequency("2001-02"), "M");
        assert_eq!(detect_frequency("-12"), "");
    }
}
