//! CSV formatting shared by all commands.

use std::io::Write;

/// Formats a probability with 12 significant digits, trailing zeros
/// trimmed, in plain decimal notation when that stays readable.
pub fn number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = 11 - magnitude;
    if (0..=20).contains(&decimals) {
        let s = format!("{x:.*}", decimals as usize);
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" { "0".into() } else { s }
    } else {
        format!("{x:.11e}")
    }
}

pub fn optional(x: Option<f64>, missing: &str) -> String {
    x.map_or_else(|| missing.to_string(), number)
}

/// Writes `header` and `rows` as CSV.
pub fn write_csv<W: Write>(out: W, header: &[String], rows: &[Vec<String>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `prefix_1, ..., prefix_n`.
pub fn per_user(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}
