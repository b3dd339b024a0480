//! Stylized Lanczos sequences used to explore how the coefficient profile shapes the AGP.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `b_n = n`.
    Linear,
    /// `b_n = sqrt(n)`.
    Sqrt,
    /// `b_n = sqrt(n (d - n))`, the spin-coherent shape.
    Su2,
}

impl Profile {
    pub fn all() -> [Profile; 3] {
        [Profile::Linear, Profile::Sqrt, Profile::Su2]
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Linear => "linear",
            Profile::Sqrt => "sqrt",
            Profile::Su2 => "su2",
        }
    }

    /// `b_0 .. b_{d-1}` with `b_0 = 1`.
    pub fn coefficients(self, d: usize) -> Vec<f64> {
        let mut b = vec![1.0];
        for n in 1..d {
            let x = n as f64;
            b.push(match self {
                Profile::Linear => x,
                Profile::Sqrt => x.sqrt(),
                Profile::Su2 => (x * (d as f64 - x)).sqrt(),
            });
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn su2_profile_is_symmetric_and_positive() {
        let b = Profile::Su2.coefficients(9);
        assert_eq!(b.len(), 9);
        for n in 1..9 {
            assert!(b[n] > 0.0);
            assert!((b[n] - b[9 - n]).abs() < 1e-14 || 9 - n >= 9);
        }
        assert_eq!(Profile::Linear.coefficients(4), vec![1.0, 1.0, 2.0, 3.0]);
    }
}
