//! Score-based performance measures, computed from raw score samples.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default target score for measures A and C.
pub const DEFAULT_S_STAR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum PerfMeasureKind {
    /// `E[x - S*] / sqrt(E[(x - S*)^2])`.
    A { s_star: f64 },
    /// `E[x] / sqrt(E[x^2])`.
    B,
    /// Upper partial expectation over lower partial expectation around `S*`.
    C { s_star: f64 },
    /// `E[sqrt(x)]`.
    D,
}

impl PerfMeasureKind {
    /// Parse `A`/`B`/`C`/`D` (case-insensitive), using `s_star` for A and C.
    pub fn parse(label: &str, s_star: f64) -> Result<Self> {
        let kind = match label.trim().to_ascii_uppercase().as_str() {
            "A" => Self::A { s_star },
            "B" => Self::B,
            "C" => Self::C { s_star },
            "D" => Self::D,
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown measure {other:?}, expected A, B, C or D"
                )))
            }
        };
        kind.validate()?;
        Ok(kind)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::A { .. } => "A",
            Self::B => "B",
            Self::C { .. } => "C",
            Self::D => "D",
        }
    }

    pub fn s_star(&self) -> Option<f64> {
        match *self {
            Self::A { s_star } | Self::C { s_star } => Some(s_star),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.s_star() {
            Some(s) if !(s > 0.0 && s < 1.0) => {
                Err(Error::InvalidInput(format!("S* must lie in (0, 1), got {s}")))
            }
            _ => Ok(()),
        }
    }
}

fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::UndefinedMeasure(format!("{what}: zero denominator")))
    }
}

/// Evaluate a measure on raw score samples.
pub fn perf_measure_samples(samples: &[f64], kind: PerfMeasureKind) -> Result<f64> {
    kind.validate()?;
    if samples.is_empty() {
        return Err(Error::UndefinedMeasure("no score samples".into()));
    }
    let n = samples.len() as f64;
    match kind {
        PerfMeasureKind::A { s_star } => {
            let (mut first, mut second) = (0.0, 0.0);
            for &x in samples {
                let d = x - s_star;
                first += d;
                second += d * d;
            }
            ratio(first / n, (second / n).sqrt(), "measure A")
        }
        PerfMeasureKind::B => {
            let first: f64 = samples.iter().sum();
            let second: f64 = samples.iter().map(|x| x * x).sum();
            ratio(first / n, (second / n).sqrt(), "measure B")
        }
        PerfMeasureKind::C { s_star } => {
            let (mut upper, mut lower) = (0.0, 0.0);
            let (mut n_up, mut n_low) = (0usize, 0usize);
            for &x in samples {
                if x > s_star {
                    upper += x - s_star;
                    n_up += 1;
                } else if x < s_star {
                    lower += s_star - x;
                    n_low += 1;
                }
            }
            if n_up == 0 || n_low == 0 {
                return Err(Error::UndefinedMeasure(format!(
                    "measure C needs scores on both sides of S* = {s_star}"
                )));
            }
            ratio(upper, lower, "measure C")
        }
        PerfMeasureKind::D => Ok(samples.iter().map(|x| x.max(0.0).sqrt()).sum::<f64>() / n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HALF: f64 = DEFAULT_S_STAR;

    #[test]
    fn hand_values() {
        let c = perf_measure_samples(&[0.25, 0.75], PerfMeasureKind::C { s_star: HALF }).unwrap();
        assert_eq!(c, 1.0);
        let ones = vec![1.0; 10];
        assert_eq!(perf_measure_samples(&ones, PerfMeasureKind::B).unwrap(), 1.0);
        assert_eq!(perf_measure_samples(&ones, PerfMeasureKind::D).unwrap(), 1.0);
        let sym = [0.1, 0.3, 0.7, 0.9];
        assert!(
            perf_measure_samples(&sym, PerfMeasureKind::A { s_star: HALF })
                .unwrap()
                .abs()
                < 1e-15
        );
    }

    #[test]
    fn undefined_cases() {
        let empty_tail = [0.6, 0.7];
        assert!(matches!(
            perf_measure_samples(&empty_tail, PerfMeasureKind::C { s_star: HALF }),
            Err(Error::UndefinedMeasure(_))
        ));
        assert!(perf_measure_samples(&[0.0, 0.0], PerfMeasureKind::B).is_err());
        assert!(perf_measure_samples(&[0.5, 0.5], PerfMeasureKind::A { s_star: HALF }).is_err());
        assert!(perf_measure_samples(&[], PerfMeasureKind::D).is_err());
    }

    #[test]
    fn s_star_range() {
        assert!(PerfMeasureKind::parse("a", 0.0).is_err());
        assert!(PerfMeasureKind::parse("C", 1.0).is_err());
        assert_eq!(
            PerfMeasureKind::parse("c", 0.4).unwrap(),
            PerfMeasureKind::C { s_star: 0.4 }
        );
        assert!(PerfMeasureKind::parse("E", 0.5).is_err());
    }

    proptest! {
        #[test]
        fn measure_ranges(x in prop::collection::vec(0.0f64..=1.0, 1..200)) {
            if let Ok(b) = perf_measure_samples(&x, PerfMeasureKind::B) {
                prop_assert!((0.0..=1.0 + 1e-15).contains(&b));
            }
            let d = perf_measure_samples(&x, PerfMeasureKind::D).unwrap();
            prop_assert!((0.0..=1.0).contains(&d));
            if let Ok(c) = perf_measure_samples(&x, PerfMeasureKind::C { s_star: HALF }) {
                prop_assert!(c >= 0.0);
            }
        }
    }
}
