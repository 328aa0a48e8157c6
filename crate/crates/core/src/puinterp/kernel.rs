use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compactly supported radial basis function families.
///
/// With `s = c r` and `(.)_+` the positive part:
///
/// | family          | formula                                              | smoothness |
/// |-----------------|------------------------------------------------------|------------|
/// | `WendlandC2`    | `(1-s)_+^4 (4s + 1)`                                 | C2 |
/// | `WendlandC4`    | `(1-s)_+^6 (35s^2 + 18s + 3)`                        | C4 |
/// | `WuC2`          | `(1-s)_+^5 (5s^4 + 25s^3 + 48s^2 + 40s + 8)`         | C2 |
/// | `WuC4`          | `(1-s)_+^6 (5s^5 + 30s^4 + 72s^3 + 82s^2 + 36s + 6)` | C4 |
/// | `GneitingC2A`   | `(1-s)_+^(7/2) (-135/8 s^2 + 7/2 s + 1)`             | C2 |
/// | `GneitingC2B`   | `(1-s)_+^5 (-27s^2 + 5s + 1)`                        | C2 |
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    WendlandC2,
    WendlandC4,
    WuC2,
    WuC4,
    GneitingC2A,
    GneitingC2B,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 6] = [
        KernelFamily::WendlandC2,
        KernelFamily::WendlandC4,
        KernelFamily::WuC2,
        KernelFamily::WuC4,
        KernelFamily::GneitingC2A,
        KernelFamily::GneitingC2B,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::WendlandC2 => "wendland-c2",
            KernelFamily::WendlandC4 => "wendland-c4",
            KernelFamily::WuC2 => "wu-c2",
            KernelFamily::WuC4 => "wu-c4",
            KernelFamily::GneitingC2A => "gneiting-c2-a",
            KernelFamily::GneitingC2B => "gneiting-c2-b",
        }
    }

    /// Value at the origin (the polynomial's constant term).
    pub fn value_at_zero(self) -> f64 {
        match self {
            KernelFamily::WendlandC2 => 1.0,
            KernelFamily::WendlandC4 => 3.0,
            KernelFamily::WuC2 => 8.0,
            KernelFamily::WuC4 => 6.0,
            KernelFamily::GneitingC2A | KernelFamily::GneitingC2B => 1.0,
        }
    }

    /// Largest space dimension on which the family is known to be strictly
    /// positive definite.
    pub fn max_dimension(self) -> usize {
        match self {
            KernelFamily::GneitingC2A | KernelFamily::GneitingC2B => 2,
            _ => 3,
        }
    }

    /// Evaluates at the scaled radius `s = c r >= 0`.
    #[inline]
    pub fn eval_scaled(self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        let t = 1.0 - s;
        match self {
            KernelFamily::WendlandC2 => {
                let t2 = t * t;
                t2 * t2 * (4.0 * s + 1.0)
            }
            KernelFamily::WendlandC4 => {
                let t3 = t * t * t;
                t3 * t3 * ((35.0 * s + 18.0) * s + 3.0)
            }
            KernelFamily::WuC2 => {
                let t2 = t * t;
                t2 * t2 * t * ((((5.0 * s + 25.0) * s + 48.0) * s + 40.0) * s + 8.0)
            }
            KernelFamily::WuC4 => {
                let t3 = t * t * t;
                t3 * t3 * (((((5.0 * s + 30.0) * s + 72.0) * s + 82.0) * s + 36.0) * s + 6.0)
            }
            KernelFamily::GneitingC2A => {
                t.powi(3) * t.sqrt() * ((-135.0 / 8.0 * s + 3.5) * s + 1.0)
            }
            KernelFamily::GneitingC2B => {
                let t2 = t * t;
                t2 * t2 * t * ((-27.0 * s + 5.0) * s + 1.0)
            }
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        KernelFamily::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| {
                Error::Kernel(format!(
                    "unknown kernel `{s}`; expected one of {}",
                    KernelFamily::ALL.map(|k| k.name()).join(", ")
                ))
            })
    }
}

/// A kernel family with its shape parameter; support radius is `1/c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub family: KernelFamily,
    pub c: f64,
}

impl Kernel {
    pub fn new(family: KernelFamily, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Kernel(format!(
                "shape parameter c = {c} must be positive"
            )));
        }
        Ok(Kernel { family, c })
    }

    pub fn support_radius(&self) -> f64 {
        1.0 / self.c
    }

    /// Kernel value at distance `r >= 0`.
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        self.family.eval_scaled(self.c * r)
    }

    /// Rejects families that are not positive definite in `dim` dimensions.
    pub fn check_dimension(&self, dim: usize) -> Result<()> {
        if dim > self.family.max_dimension() {
            return Err(Error::Kernel(format!(
                "{} is only positive definite up to dimension {}, requested {dim}",
                self.family,
                self.family.max_dimension()
            )));
        }
        Ok(())
    }
}

/// Partition-of-unity bump: Wendland C2 on the unit ball.
#[inline]
pub(crate) fn weight_bump(t: f64) -> f64 {
    KernelFamily::WendlandC2.eval_scaled(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_terms() {
        for fam in KernelFamily::ALL {
            let k = Kernel::new(fam, 0.37).unwrap();
            assert_eq!(k.eval(0.0), fam.value_at_zero(), "{fam}");
        }
    }

    #[test]
    fn compact_support() {
        for fam in KernelFamily::ALL {
            let k = Kernel::new(fam, 0.5).unwrap();
            for r in [2.0, 2.0 + 1e-12, 3.0, 1e6] {
                assert_eq!(k.eval(r), 0.0, "{fam} at {r}");
            }
        }
    }

    #[test]
    fn wendland_half_support() {
        // (0.5)^4 (4 * 0.5 + 1) = 0.1875
        assert_eq!(KernelFamily::WendlandC2.eval_scaled(0.5), 0.1875);
        let k = Kernel::new(KernelFamily::WendlandC2, 0.25).unwrap();
        assert_eq!(k.eval(2.0), 0.1875);
    }

    #[test]
    fn parse_names() {
        for fam in KernelFamily::ALL {
            assert_eq!(fam.name().parse::<KernelFamily>().unwrap(), fam);
        }
        assert_eq!(
            "Wendland_C2".parse::<KernelFamily>().unwrap(),
            KernelFamily::WendlandC2
        );
        assert!("gauss".parse::<KernelFamily>().is_err());
    }

    #[test]
    fn gneiting_dimension_limit() {
        let k = Kernel::new(KernelFamily::GneitingC2A, 0.1).unwrap();
        assert!(k.check_dimension(2).is_ok());
        assert!(k.check_dimension(3).is_err());
        assert!(Kernel::new(KernelFamily::WuC4, 0.0).is_err());
    }
}
