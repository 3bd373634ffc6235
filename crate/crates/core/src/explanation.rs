use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Every explainer the crate implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "alpha-avg")]
    AlphaAvg,
    #[serde(rename = "alpha-max")]
    AlphaMax,
    #[serde(rename = "g-avg")]
    GradAvg,
    #[serde(rename = "g-l1")]
    GradL1,
    #[serde(rename = "g-l2")]
    GradL2,
    #[serde(rename = "gxi")]
    GradTimesInput,
    #[serde(rename = "lime-empirical")]
    LimeEmpirical,
    #[serde(rename = "lime-limit-exact")]
    LimeLimitExact,
    #[serde(rename = "lime-limit-approx")]
    LimeLimitApprox,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::AlphaAvg,
        Method::AlphaMax,
        Method::GradAvg,
        Method::GradL1,
        Method::GradL2,
        Method::GradTimesInput,
        Method::LimeEmpirical,
        Method::LimeLimitExact,
        Method::LimeLimitApprox,
    ];

    /// The everyday explainers: attention, gradient, and sampled LIME.
    pub const STANDARD: [Method; 7] = [
        Method::AlphaAvg,
        Method::AlphaMax,
        Method::GradAvg,
        Method::GradL1,
        Method::GradL2,
        Method::GradTimesInput,
        Method::LimeEmpirical,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::AlphaAvg => "alpha-avg",
            Method::AlphaMax => "alpha-max",
            Method::GradAvg => "g-avg",
            Method::GradL1 => "g-l1",
            Method::GradL2 => "g-l2",
            Method::GradTimesInput => "gxi",
            Method::LimeEmpirical => "lime-empirical",
            Method::LimeLimitExact => "lime-limit-exact",
            Method::LimeLimitApprox => "lime-limit-approx",
        }
    }

    /// Whether the method can only produce non-negative weights.
    pub fn is_unsigned(self) -> bool {
        matches!(
            self,
            Method::AlphaAvg | Method::AlphaMax | Method::GradL1 | Method::GradL2
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }
}

/// Per-token weights produced by one explainer, aligned with document
/// positions (padding slots excluded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub method: Method,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
}

impl Explanation {
    pub fn new(method: Method, weights: Vec<f64>) -> Self {
        Self {
            method,
            weights,
            tokens: None,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.tag()));
        }
        assert!("saliency".parse::<Method>().is_err());
    }
}
