//! Text formatting shared by the CSV writers.

/// Fixed 17-significant-digit scientific notation; parses back to the same
/// `f64`.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(real(1.0), "1.0000000000000000e0");
        assert_eq!(real(0.125), "1.2500000000000000e-1");
    }

    proptest! {
        #[test]
        fn round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(real(x).parse::<f64>().unwrap(), x);
        }
    }
}
