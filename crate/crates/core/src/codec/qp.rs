use std::fmt;

use crate::error::{Error, Result};

/// Lowest QP of the agent's action space; also the default anchor.
pub const ACTION_QP_MIN: u8 = 22;
pub const ACTION_QP_MAX: u8 = 51;
pub const ACTION_COUNT: usize = (ACTION_QP_MAX - ACTION_QP_MIN + 1) as usize;

/// Quantization parameter in `[0, 51]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Qp(u8);

impl Qp {
    pub const MAX: u8 = 51;

    pub fn new(value: u8) -> Result<Self> {
        if value > Self::MAX {
            return Err(Error::invalid(format!("qp {value} outside [0, 51]")));
        }
        Ok(Qp(value))
    }

    /// QP of action index `action` (offset from [`ACTION_QP_MIN`]).
    pub fn from_action(action: usize) -> Result<Self> {
        if action >= ACTION_COUNT {
            return Err(Error::invalid(format!(
                "action {action} outside [0, {}]",
                ACTION_COUNT - 1
            )));
        }
        Ok(Qp(ACTION_QP_MIN + action as u8))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn action_index(self) -> Option<usize> {
        (ACTION_QP_MIN..=ACTION_QP_MAX)
            .contains(&self.0)
            .then(|| (self.0 - ACTION_QP_MIN) as usize)
    }

    /// `2^((qp - 4) / 6)`, built as `2^(r/6) * 2^k` so that six steps double it exactly.
    pub fn qstep(self) -> f64 {
        let shifted = self.0 as i32 - 4;
        let octave = shifted.div_euclid(6);
        let rem = shifted.rem_euclid(6);
        (rem as f64 / 6.0).exp2() * 2f64.powi(octave)
    }

    pub fn action_range() -> impl Iterator<Item = Qp> {
        (ACTION_QP_MIN..=ACTION_QP_MAX).map(Qp)
    }
}

impl fmt::Display for Qp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qstep_doubles_every_six() {
        for q in 0..=45u8 {
            assert_eq!(Qp(q + 6).qstep(), 2.0 * Qp(q).qstep());
        }
    }

    #[test]
    fn qstep_matches_closed_form_and_increases() {
        for q in 0..=51u8 {
            let closed = ((q as f64 - 4.0) / 6.0).exp2();
            assert!((Qp(q).qstep() - closed).abs() < 1e-12 * closed);
            if q > 0 {
                assert!(Qp(q).qstep() > Qp(q - 1).qstep());
            }
        }
        assert_eq!(Qp(4).qstep(), 1.0);
        assert_eq!(Qp(22).qstep(), 8.0);
    }

    #[test]
    fn range_checks() {
        assert!(Qp::new(52).is_err());
        assert_eq!(Qp::from_action(0).unwrap().value(), 22);
        assert_eq!(Qp::from_action(29).unwrap().value(), 51);
        assert!(Qp::from_action(30).is_err());
        assert_eq!(Qp(37).action_index(), Some(15));
        assert_eq!(Qp(21).action_index(), None);
    }
}
