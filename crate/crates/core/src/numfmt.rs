//! Number formatting for reports: 17 significant digits in machine-read
//! columns, 6 in human summaries.

/// Scientific notation with 17 significant digits; round-trips every f64.
pub fn machine(v: f64) -> String {
    format!("{v:.16e}")
}

/// Six significant digits, positional for moderate magnitudes.
pub fn human(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0.00000".into();
    }
    let sci = format!("{v:.5e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        format!("{v:.*}", (5 - exp) as usize)
    } else {
        sci
    }
}
