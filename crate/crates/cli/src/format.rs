/// Six significant digits, trailing zeros kept, scientific outside [1e-5, 1e6).
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // the exponent after rounding, so 999999.7 goes scientific
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("exponent");
    if (-5..6).contains(&exp) {
        format!("{x:.*}", (5 - exp) as usize)
    } else {
        sci
    }
}

/// Two decimals, used for dB figures in text output.
pub fn db2(x: f64) -> String {
    format!("{x:.2}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(20.0199), "20.0199");
        assert_eq!(sig6(1.0), "1.00000");
        assert_eq!(sig6(-34.6812345), "-34.6812");
        assert_eq!(sig6(0.001), "0.00100000");
        assert_eq!(sig6(1e-5), "0.0000100000");
        assert_eq!(sig6(1e-7), "1.00000e-7");
        assert_eq!(sig6(999999.7), "1.00000e6");
        assert_eq!(sig6(123456.4), "123456");
        assert_eq!(sig6(0.0), "0");
    }
}
