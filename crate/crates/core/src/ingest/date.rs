//! Calendar dates as found in registry and bibliographic exports.
//!
//! Missing day → first of the month; missing month → January 1.

use chrono::{Datelike, NaiveDate};

const MONTHS: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];

fn month_number(token: &str) -> Option<u32> {
    if let Ok(n) = token.parse::<u32>() {
        return (1..=12).contains(&n).then_some(n);
    }
    let lower = token.to_ascii_lowercase();
    if lower.len() < 3 {
        return None;
    }
    MONTHS
        .iter()
        .position(|m| lower.starts_with(m))
        .map(|i| i as u32 + 1)
}

fn year(token: &str) -> Option<i32> {
    (token.len() == 4 && token.bytes().all(|b| b.is_ascii_digit()))
        .then(|| token.parse().ok())
        .flatten()
}

/// Parses `YYYY-MM-DD`, `YYYY-MM`, `YYYY`, `Month D, YYYY`, `Month YYYY`,
/// `YYYY Mon D` and `YYYY Mon`.
pub fn parse_lenient_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    if raw.is_empty() {
        return None;
    }
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return Some(d);
    }
    let tokens: Vec<&str> = raw
        .split(|c: char| c == '-' || c == ',' || c == '/' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect();
    let (y, m, d) = match tokens.as_slice() {
        [y] => (year(y)?, 1, 1),
        [a, b] => match year(a) {
            Some(y) => (y, month_number(b)?, 1),
            None => (year(b)?, month_number(a)?, 1),
        },
        [a, b, c] => match year(a) {
            Some(y) => (y, month_number(b)?, c.parse().ok()?),
            None => (year(c)?, month_number(a)?, b.parse().ok()?),
        },
        _ => return None,
    };
    NaiveDate::from_ymd_opt(y, m, d)
}

pub(crate) fn format(date: &NaiveDate) -> String {
    format!("{:04}-{:02}-{:02}", date.year(), date.month(), date.day())
}

pub(crate) mod required {
    use chrono::NaiveDate;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(date: &NaiveDate, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format(date))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
        let raw = String::deserialize(d)?;
        super::parse_lenient_date(&raw)
            .ok_or_else(|| serde::de::Error::custom(format!("unparseable date {raw:?}")))
    }
}

pub(crate) mod optional {
    use chrono::NaiveDate;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(date: &Option<NaiveDate>, s: S) -> Result<S::Ok, S::Error> {
        match date {
            Some(d) => s.serialize_str(&super::format(d)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<NaiveDate>, D::Error> {
        match Option::<String>::deserialize(d)? {
            None => Ok(None),
            Some(raw) if raw.trim().is_empty() => Ok(None),
            Some(raw) => super::parse_lenient_date(&raw)
                .map(Some)
                .ok_or_else(|| serde::de::Error::custom(format!("unparseable date {raw:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn partial_dates_complete_to_first() {
        assert_eq!(parse_lenient_date("2007-10-01"), Some(ymd(2007, 10, 1)));
        assert_eq!(parse_lenient_date("2009-03"), Some(ymd(2009, 3, 1)));
        assert_eq!(parse_lenient_date("2011"), Some(ymd(2011, 1, 1)));
        assert_eq!(
            parse_lenient_date("September 30, 2007"),
            Some(ymd(2007, 9, 30))
        );
        assert_eq!(parse_lenient_date("June 2012"), Some(ymd(2012, 6, 1)));
        assert_eq!(parse_lenient_date("2014 Feb 3"), Some(ymd(2014, 2, 3)));
        assert_eq!(parse_lenient_date("2014 Feb"), Some(ymd(2014, 2, 1)));
    }

    #[test]
    fn garbage_is_rejected() {
        assert_eq!(parse_lenient_date(""), None);
        assert_eq!(parse_lenient_date("soon"), None);
        assert_eq!(parse_lenient_date("2014-02-30"), None);
        assert_eq!(parse_lenient_date("Spring 2014"), None);
    }
}
