//! JSON coefficient-vector files shared by test functions and distributions:
//!
//! ```json
//! {"convention":"lambda=2k+2","K":3,"coeffs":[1.0,0.0,0.5]}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::CONVENTION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffFile {
    pub convention: String,
    #[serde(rename = "K")]
    pub dim: usize,
    pub coeffs: Vec<f64>,
}

impl CoeffFile {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self {
            convention: CONVENTION.to_string(),
            dim: coeffs.len(),
            coeffs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.convention != CONVENTION {
            return Err(Error::Convention(self.convention.clone()));
        }
        if self.dim != self.coeffs.len() {
            return Err(Error::input(format!(
                "K = {} but {} coefficients given",
                self.dim,
                self.coeffs.len()
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)?;
        file.validate()?;
        Ok(file)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::{BasisConfig, TestFunction};
    use crate::scale::DistributionVector;
    use proptest::prelude::*;

    #[test]
    fn parses_wire_format() {
        let f =
            CoeffFile::from_json(r#"{"convention":"lambda=2k+2","K":3,"coeffs":[1.0,0.0,0.5]}"#)
                .unwrap();
        assert_eq!(f.dim, 3);
        assert_eq!(f.coeffs, vec![1.0, 0.0, 0.5]);
        let phi = TestFunction::from_coeff_file(&f).unwrap();
        assert_eq!(phi.coeffs()[2], 0.5);
    }

    #[test]
    fn rejects_unknown_convention() {
        let err = CoeffFile::from_json(r#"{"convention":"lambda=k+1","K":1,"coeffs":[1.0]}"#)
            .unwrap_err();
        assert!(matches!(err, Error::Convention(_)));
    }

    #[test]
    fn rejects_length_mismatch() {
        assert!(
            CoeffFile::from_json(r#"{"convention":"lambda=2k+2","K":2,"coeffs":[1.0]}"#).is_err()
        );
        assert!(CoeffFile::from_json(r#"{"convention":"lambda=2k+2","K":1}"#).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(coeffs in prop::collection::vec(-1e6f64..1e6, 1..40)) {
            let basis = BasisConfig::new(coeffs.len()).unwrap();
            let x = DistributionVector::new(basis, coeffs).unwrap();
            let text = x.to_coeff_file().to_json().unwrap();
            let back = DistributionVector::from_coeff_file(&CoeffFile::from_json(&text).unwrap()).unwrap();
            prop_assert_eq!(back.coeffs(), x.coeffs());
        }
    }
}
