//! The additive surrogate `q = -ln(1 - p)` for realization probabilities:
//! independent events at one value realize with probability
//! `1 - exp(-sum q)`.

use crate::error::{Error, Result};

pub fn q_transform(p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("q-transform needs p in [0, 1), got {p}")));
    }
    Ok(-(-p).ln_1p())
}

/// Inverse of [`q_transform`].
pub fn p_transform(q: f64) -> f64 {
    -(-q).exp_m1()
}

/// `q` of an atom, infinite for a certain event.
pub(crate) fn q_of(p: f64) -> f64 {
    if p >= 1.0 {
        f64::INFINITY
    } else {
        -(-p).ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(q_transform(0.0).unwrap(), 0.0);
        assert!((q_transform(1.0 - (-1.0f64).exp()).unwrap() - 1.0).abs() < 1e-15);
        assert!(q_transform(1.0).is_err());
        assert!(q_transform(-0.1).is_err());
        assert_eq!(q_of(1.0), f64::INFINITY);
    }

    #[test]
    fn round_trip() {
        for i in 0..1000 {
            let p = i as f64 / 1000.0;
            assert!((p_transform(q_transform(p).unwrap()) - p).abs() <= 1e-12);
        }
    }
}
