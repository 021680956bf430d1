//! Number formatting for CSV output.

/// Formats `x` with 17 significant digits in the style of C's `%.17g`:
/// fixed notation for decimal exponents in `[-5, 17)`, scientific otherwise,
/// trailing zeros removed. The result parses back to the same `f64`.
pub fn g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exponent) = sci.split_once('e').expect("`e` format always has an exponent");
    let exponent: i32 = exponent.parse().expect("exponent is an integer");
    if (-5..17).contains(&exponent) {
        let decimals = (16 - exponent).max(0) as usize;
        trim(format!("{:.*}", decimals, x))
    } else {
        let mantissa = trim(mantissa.to_string());
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exponent.abs())
    }
}

fn trim(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_style() {
        assert_eq!(g17(135.0), "135");
        assert_eq!(g17(0.1), "0.10000000000000001");
        assert_eq!(g17((-1f64).exp()), "0.36787944117144233");
        assert_eq!(g17(1e-7), "9.9999999999999995e-08");
        assert_eq!(g17(1e20), "1e+20");
        assert_eq!(g17(-2.5), "-2.5");
    }

    proptest::proptest! {
        #[test]
        fn parses_back_exactly(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            proptest::prop_assert_eq!(g17(x).parse::<f64>().unwrap(), x);
        }
    }
}
