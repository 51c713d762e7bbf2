use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discounting: one rate shared by all players, or one rate per player in
/// the two-player game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Discount {
    Uniform(f64),
    PerPlayer(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    pub n: usize,
    pub discount: Discount,
}

impl GameParams {
    pub fn new(n: usize, alpha: f64) -> Result<Self> {
        let p = GameParams { n, discount: Discount::Uniform(alpha) };
        p.validate()?;
        Ok(p)
    }

    pub fn two_player(alpha1: f64, alpha2: f64) -> Result<Self> {
        let p = GameParams { n: 2, discount: Discount::PerPlayer(alpha1, alpha2) };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::input("player count must be at least 1"));
        }
        let ok = |a: f64| a.is_finite() && a > 0.0;
        match self.discount {
            Discount::Uniform(a) if ok(a) => Ok(()),
            Discount::PerPlayer(a, b) if self.n == 2 && ok(a) && ok(b) => Ok(()),
            Discount::PerPlayer(..) if self.n != 2 => {
                Err(Error::input("per-player discounting is only defined for N = 2"))
            }
            _ => Err(Error::input("discount factors must be positive and finite")),
        }
    }

    /// Discount rate of player `i` (0-based).
    pub fn alpha_of(&self, i: usize) -> f64 {
        match self.discount {
            Discount::Uniform(a) => a,
            Discount::PerPlayer(a, b) => {
                if i == 0 {
                    a
                } else {
                    b
                }
            }
        }
    }

    /// The shared rate; `None` under per-player discounting.
    pub fn alpha(&self) -> Option<f64> {
        match self.discount {
            Discount::Uniform(a) => Some(a),
            Discount::PerPlayer(..) => None,
        }
    }
}

/// `N/(N−1)`, with the single-player convention `k = 1` at `N = 1`.
pub fn k_ratio(n: usize) -> f64 {
    if n <= 1 {
        1.0
    } else {
        n as f64 / (n as f64 - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_params() {
        assert!(GameParams::new(0, 1.0).is_err());
        assert!(GameParams::new(3, 0.0).is_err());
        assert!(GameParams::new(3, f64::NAN).is_err());
        let bad = GameParams { n: 3, discount: Discount::PerPlayer(1.0, 2.0) };
        assert!(bad.validate().is_err());
        let p = GameParams::two_player(1.0, 2.0).unwrap();
        assert_eq!(p.alpha_of(1), 2.0);
        assert_eq!(p.alpha(), None);
    }

    #[test]
    fn k_ratio_values() {
        assert_eq!(k_ratio(1), 1.0);
        assert_eq!(k_ratio(2), 2.0);
        assert!((k_ratio(5) - 1.25).abs() < 1e-15);
    }
}
