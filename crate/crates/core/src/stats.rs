//! Small estimators shared by the simulators.

use serde::{Deserialize, Serialize};

/// Two-sided normal quantile for 95% intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> Interval {
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // center - half cancels to rounding noise at the edges; pin them
    Interval {
        lo: if successes == 0 { 0.0 } else { (center - half).max(0.0) },
        hi: if successes == trials { 1.0 } else { (center + half).min(1.0) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_known_value() {
        // 10/100 at 95%: [0.0552, 0.1744]
        let i = wilson(10, 100, Z95);
        assert!((i.lo - 0.055_229).abs() < 1e-5, "{i:?}");
        assert!((i.hi - 0.174_366).abs() < 1e-5, "{i:?}");
        let z = wilson(0, 1000, Z95);
        assert_eq!(z.lo, 0.0);
        assert!(z.hi > 0.0 && z.hi < 0.004);
    }

    #[test]
    fn width_shrinks_like_inverse_sqrt() {
        let a = wilson(100, 1000, Z95).width();
        let b = wilson(400, 4000, Z95).width();
        assert!((a / b - 2.0).abs() < 0.05);
    }
}
