//! Number formatting for report tables.

use crate::types::DateDay;

/// `2983867` -> `2,983,867`.
pub fn grouped(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

const SUFFIXES: [(f64, &str); 3] = [(1e9, "B"), (1e6, "M"), (1e3, "K")];

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Three significant digits with a K/M/B suffix, trailing zeros dropped:
/// `8176522` -> `8.18M`, `1200` -> `1.2K`, `969` -> `969`.
pub fn compact(n: f64) -> String {
    if n.abs() < 999.5 {
        return format!("{}", n.round() as i64);
    }
    for (i, (scale, suffix)) in SUFFIXES.iter().enumerate() {
        let v = n / scale;
        if v.abs() >= 0.9995 {
            let decimals = if v.abs() >= 99.95 {
                0
            } else if v.abs() >= 9.995 {
                1
            } else {
                2
            };
            let s = format!("{v:.decimals$}");
            // 999.6K rounds to 1000K; step up a unit
            if s.starts_with("1000") && i > 0 {
                return compact(n.signum() * SUFFIXES[i - 1].0);
            }
            return format!("{}{suffix}", trim_zeros(&s));
        }
    }
    unreachable!("values below 999.5 returned early")
}

/// Whole thousands below a million (`118400` -> `118K`), grouped digits below ten
/// thousand (`1830` -> `1,830`), [`compact`] above.
pub fn compact_k(n: u64) -> String {
    if n < 10_000 {
        grouped(n)
    } else if n < 999_500 {
        format!("{}K", (n as f64 / 1e3).round() as u64)
    } else {
        compact(n as f64)
    }
}

/// One decimal at the largest fitting suffix: `22_800_000` -> `22.8M`, `2_000_000` -> `2.0M`.
pub fn fixed1(n: f64) -> String {
    for (scale, suffix) in SUFFIXES {
        if n.abs() >= scale {
            return format!("{:.1}{suffix}", n / scale);
        }
    }
    format!("{n:.1}")
}

/// Percentage at two decimals; `None` when the denominator is zero.
pub fn pct(num: u64, den: u64) -> Option<String> {
    (den > 0).then(|| format!("{:.2}%", 100.0 * num as f64 / den as f64))
}

pub fn pct_or_na(num: u64, den: u64) -> String {
    pct(num, den).unwrap_or_else(|| "N/A".to_string())
}

/// Like [`pct`] but exact whole percentages drop the decimals (`49/196` -> `25%`).
pub fn pct_cell(num: u64, den: u64) -> String {
    if den == 0 {
        return "N/A".into();
    }
    if (100 * u128::from(num)) % u128::from(den) == 0 {
        return format!("{}%", 100 * u128::from(num) / u128::from(den));
    }
    format!("{:.2}%", 100.0 * num as f64 / den as f64)
}

/// `04/10/21 - 10/15/21`.
pub fn period_mmddyy(first: DateDay, last: DateDay) -> String {
    format!("{} - {}", first.date().format("%m/%d/%y"), last.date().format("%m/%d/%y"))
}

/// Renders rows as tab-separated text with a header line.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join("\t");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join("\t"));
        s.push('\n');
    }
    s
}

/// CSV with a header row; fields are quoted as needed.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("fields are utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grouping() {
        assert_eq!(grouped(0), "0");
        assert_eq!(grouped(999), "999");
        assert_eq!(grouped(1_000), "1,000");
        assert_eq!(grouped(168_585_991), "168,585,991");
    }

    #[test]
    fn compact_three_digits() {
        let cases = [
            (8_176_522.0, "8.18M"),
            (27_400.0, "27.4K"),
            (203.0, "203"),
            (1_200.0, "1.2K"),
            (1_249.0, "1.25K"),
            (969.0, "969"),
            (50_300.0, "50.3K"),
            (761e6, "761M"),
            (1.33e9, "1.33B"),
            (464_875.0, "465K"),
            (999_600.0, "1M"),
            (999.6, "1K"),
        ];
        for (n, s) in cases {
            assert_eq!(compact(n), s, "{n}");
        }
    }

    #[test]
    fn compact_thousands_and_fixed() {
        assert_eq!(compact_k(118_400), "118K");
        assert_eq!(compact_k(1_830), "1,830");
        assert_eq!(compact_k(211), "211");
        assert_eq!(compact_k(24_300), "24K");
        assert_eq!(fixed1(22_800_000.0), "22.8M");
        assert_eq!(fixed1(2_000_000.0), "2.0M");
    }

    #[test]
    fn percentages() {
        assert_eq!(pct(1_113_872, 1_277_389).unwrap(), "87.20%");
        assert_eq!(pct(1_113_872, 2_983_867).unwrap(), "37.33%");
        assert_eq!(pct(1, 0), None);
        assert_eq!(pct_cell(49, 196), "25%");
        assert_eq!(pct_cell(5, 5), "100%");
        assert_eq!(pct_cell(211, 6_430_000), "0.00%");
    }

    #[test]
    fn period_and_csv() {
        let a = DateDay::from_ymd(2021, 4, 10).unwrap();
        let b = DateDay::from_ymd(2021, 10, 15).unwrap();
        assert_eq!(period_mmddyy(a, b), "04/10/21 - 10/15/21");
        assert_eq!(csv(&["a"], &[vec!["x,y".into()]]), "a\n\"x,y\"\n");
    }
}
