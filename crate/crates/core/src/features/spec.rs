use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One column of the feature bank. Sigmas and radii are in voxels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureDescriptor {
    Identity,
    Gaussian { sigma: f64 },
    Dog { sigma1: f64, sigma2: f64 },
    GradientMagnitude { sigma: f64 },
    LocalMean { radius: usize },
    LocalVariance { radius: usize },
}

impl FeatureDescriptor {
    pub fn validate(&self) -> Result<()> {
        let positive = |s: f64| s.is_finite() && s > 0.0;
        let ok = match *self {
            FeatureDescriptor::Identity => true,
            FeatureDescriptor::Gaussian { sigma } => positive(sigma),
            FeatureDescriptor::Dog { sigma1, sigma2 } => {
                positive(sigma1) && positive(sigma2) && sigma1 < sigma2
            }
            FeatureDescriptor::GradientMagnitude { sigma } => sigma.is_finite() && sigma >= 0.0,
            FeatureDescriptor::LocalMean { radius } | FeatureDescriptor::LocalVariance { radius } => {
                radius >= 1
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid feature descriptor {self}")))
        }
    }

    /// Column name, e.g. `dog_1_2`.
    pub fn name(&self) -> String {
        match *self {
            FeatureDescriptor::Identity => "identity".into(),
            FeatureDescriptor::Gaussian { sigma } => format!("gauss_{sigma}"),
            FeatureDescriptor::Dog { sigma1, sigma2 } => format!("dog_{sigma1}_{sigma2}"),
            FeatureDescriptor::GradientMagnitude { sigma } => format!("gradmag_{sigma}"),
            FeatureDescriptor::LocalMean { radius } => format!("mean_{radius}"),
            FeatureDescriptor::LocalVariance { radius } => format!("variance_{radius}"),
        }
    }

    /// Number of neighbouring slices on each side the descriptor reads.
    pub fn reach(&self) -> usize {
        let half = |s: f64| (3.0 * s).ceil() as usize;
        match *self {
            FeatureDescriptor::Identity => 0,
            FeatureDescriptor::Gaussian { sigma } => half(sigma),
            FeatureDescriptor::Dog { sigma2, .. } => half(sigma2),
            FeatureDescriptor::GradientMagnitude { sigma } => half(sigma) + 1,
            FeatureDescriptor::LocalMean { radius } | FeatureDescriptor::LocalVariance { radius } => {
                radius
            }
        }
    }
}

impl fmt::Display for FeatureDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FeatureDescriptor::Identity => write!(f, "identity"),
            FeatureDescriptor::Gaussian { sigma } => write!(f, "gaussian {sigma}"),
            FeatureDescriptor::Dog { sigma1, sigma2 } => write!(f, "dog {sigma1} {sigma2}"),
            FeatureDescriptor::GradientMagnitude { sigma } => write!(f, "gradmag {sigma}"),
            FeatureDescriptor::LocalMean { radius } => write!(f, "mean {radius}"),
            FeatureDescriptor::LocalVariance { radius } => write!(f, "variance {radius}"),
        }
    }
}

impl FromStr for FeatureDescriptor {
    type Err = Error;

    fn from_str(line: &str) -> Result<Self> {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Config(format!("cannot parse feature descriptor {line:?}"));
        let real = |i: usize| -> Result<f64> {
            parts.get(i).and_then(|s| s.parse().ok()).ok_or_else(bad)
        };
        let int = |i: usize| -> Result<usize> {
            parts.get(i).and_then(|s| s.parse().ok()).ok_or_else(bad)
        };
        let (head, arity) = match parts.first() {
            Some(h) => (h.to_ascii_lowercase(), parts.len() - 1),
            None => return Err(bad()),
        };
        let d = match (head.as_str(), arity) {
            ("identity", 0) => FeatureDescriptor::Identity,
            ("gaussian", 1) => FeatureDescriptor::Gaussian { sigma: real(1)? },
            ("dog", 2) => FeatureDescriptor::Dog {
                sigma1: real(1)?,
                sigma2: real(2)?,
            },
            ("gradmag", 1) => FeatureDescriptor::GradientMagnitude { sigma: real(1)? },
            ("mean", 1) => FeatureDescriptor::LocalMean { radius: int(1)? },
            ("variance", 1) => FeatureDescriptor::LocalVariance { radius: int(1)? },
            _ => return Err(bad()),
        };
        d.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(d)
    }
}

/// Ordered list of feature descriptors.
///
/// Text form is one descriptor per line (`identity`, `gaussian S`, `dog S1 S2`,
/// `gradmag S`, `mean R`, `variance R`); blank lines and `#` comments are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    descriptors: Vec<FeatureDescriptor>,
}

impl FeatureSpec {
    pub fn new(descriptors: Vec<FeatureDescriptor>) -> Result<Self> {
        if descriptors.is_empty() {
            return Err(Error::InvalidParameter("feature spec has no descriptors".into()));
        }
        for d in &descriptors {
            d.validate()?;
        }
        Ok(FeatureSpec { descriptors })
    }

    /// The 12-column default bank.
    pub fn default_bank() -> Self {
        use FeatureDescriptor::*;
        FeatureSpec {
            descriptors: vec![
                Identity,
                Gaussian { sigma: 1.0 },
                Gaussian { sigma: 2.0 },
                Gaussian { sigma: 4.0 },
                Dog { sigma1: 1.0, sigma2: 2.0 },
                Dog { sigma1: 2.0, sigma2: 4.0 },
                Dog { sigma1: 1.0, sigma2: 4.0 },
                GradientMagnitude { sigma: 0.0 },
                GradientMagnitude { sigma: 1.0 },
                GradientMagnitude { sigma: 2.0 },
                LocalMean { radius: 2 },
                LocalVariance { radius: 2 },
            ],
        }
    }

    pub fn descriptors(&self) -> &[FeatureDescriptor] {
        &self.descriptors
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.descriptors.iter().map(FeatureDescriptor::name).collect()
    }

    /// Halo width (in slices) needed to compute the bank on a z-slab exactly.
    pub fn z_halo(&self) -> usize {
        self.descriptors.iter().map(FeatureDescriptor::reach).max().unwrap_or(0)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let descriptors = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<_>>>()?;
        FeatureSpec::new(descriptors).map_err(|e| Error::Config(e.to_string()))
    }
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec::default_bank()
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.descriptors {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bank_has_twelve_columns() {
        let s = FeatureSpec::default_bank();
        assert_eq!(s.len(), 12);
        assert_eq!(s.z_halo(), 12);
        assert_eq!(s.names()[4], "dog_1_2");
    }

    #[test]
    fn text_round_trip() {
        let s = FeatureSpec::default_bank();
        assert_eq!(FeatureSpec::parse(&s.to_string()).unwrap(), s);
        let t = "# bank\nidentity\n\ndog 0.5 1.5  # band\nmean 3\n";
        let p = FeatureSpec::parse(t).unwrap();
        assert_eq!(
            p.descriptors(),
            &[
                FeatureDescriptor::Identity,
                FeatureDescriptor::Dog { sigma1: 0.5, sigma2: 1.5 },
                FeatureDescriptor::LocalMean { radius: 3 }
            ]
        );
    }

    #[test]
    fn rejects_bad_descriptors() {
        assert!(FeatureSpec::parse("dog 2 1").is_err());
        assert!(FeatureSpec::parse("gaussian 0").is_err());
        assert!(FeatureSpec::parse("gaussian -1").is_err());
        assert!(FeatureSpec::parse("gaussian inf").is_err());
        assert!(FeatureSpec::parse("mean 0").is_err());
        assert!(FeatureSpec::parse("sobel 1").is_err());
        assert!(FeatureSpec::parse("").is_err());
        assert!(FeatureSpec::parse("gradmag 0").is_ok());
        assert!(FeatureSpec::new(vec![]).is_err());
    }
}
