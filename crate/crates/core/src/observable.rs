//! Closed catalog of observables: functions of one momentum value and
//! functions of the momentum pair.
//!
//! One-variable observables are written in a small string grammar:
//! `p1` (or `p`, `id`), `p1^2` (or `p^2`), `poly:c0,c1,...` and `ind:a,b`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A real function of a single momentum value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable1 {
    Identity,
    Square,
    /// `c0 + c1 x + c2 x^2 + ...`
    Polynomial { coeffs: Vec<f64> },
    /// Indicator of the half-open interval `[lo, hi)`.
    Indicator { lo: f64, hi: f64 },
}

impl Observable1 {
    pub fn constant(value: f64) -> Self {
        Observable1::Polynomial { coeffs: vec![value] }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Observable1::Identity => x,
            Observable1::Square => x * x,
            Observable1::Polynomial { coeffs } => {
                coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
            }
            Observable1::Indicator { lo, hi } => {
                if x >= *lo && x < *hi {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for Observable1 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observable1::Identity => write!(f, "p1"),
            Observable1::Square => write!(f, "p1^2"),
            Observable1::Polynomial { coeffs } => {
                let parts: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
            Observable1::Indicator { lo, hi } => write!(f, "ind:{lo},{hi}"),
        }
    }
}

fn parse_numbers(list: &str) -> Result<Vec<f64>, Error> {
    list.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number '{t}' in observable")))
        })
        .collect()
}

impl FromStr for Observable1 {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        match s {
            "p1" | "p" | "id" => return Ok(Observable1::Identity),
            "p1^2" | "p^2" => return Ok(Observable1::Square),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("poly:") {
            let coeffs = parse_numbers(rest)?;
            if coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::Parse("polynomial coefficients must be finite".into()));
            }
            return Ok(Observable1::Polynomial { coeffs });
        }
        if let Some(rest) = s.strip_prefix("ind:") {
            let v = parse_numbers(rest)?;
            if v.len() != 2 || !(v[0] < v[1]) {
                return Err(Error::Parse(format!("indicator needs 'ind:a,b' with a < b, got '{s}'")));
            }
            return Ok(Observable1::Indicator { lo: v[0], hi: v[1] });
        }
        Err(Error::Parse(format!("unknown observable '{s}'")))
    }
}

/// A real function of the momentum pair `(p1, p2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "of", rename_all = "snake_case")]
pub enum Observable2 {
    P1 { f: Observable1 },
    P2 { f: Observable1 },
    /// A function of the total momentum `p1 + p2`.
    Total { f: Observable1 },
    Product { a: Box<Observable2>, b: Box<Observable2> },
    Sum { a: Box<Observable2>, b: Box<Observable2> },
    Constant { value: f64 },
}

impl Observable2 {
    pub fn p1() -> Self {
        Observable2::P1 { f: Observable1::Identity }
    }

    pub fn p2() -> Self {
        Observable2::P2 { f: Observable1::Identity }
    }

    pub fn total() -> Self {
        Observable2::Total { f: Observable1::Identity }
    }

    pub fn of_p1(f: Observable1) -> Self {
        Observable2::P1 { f }
    }

    pub fn of_total(f: Observable1) -> Self {
        Observable2::Total { f }
    }

    pub fn product(a: Observable2, b: Observable2) -> Self {
        Observable2::Product { a: Box::new(a), b: Box::new(b) }
    }

    pub fn sum(a: Observable2, b: Observable2) -> Self {
        Observable2::Sum { a: Box::new(a), b: Box::new(b) }
    }

    pub fn eval(&self, p1: f64, p2: f64) -> f64 {
        match self {
            Observable2::P1 { f } => f.eval(p1),
            Observable2::P2 { f } => f.eval(p2),
            Observable2::Total { f } => f.eval(p1 + p2),
            Observable2::Product { a, b } => a.eval(p1, p2) * b.eval(p1, p2),
            Observable2::Sum { a, b } => a.eval(p1, p2) + b.eval(p1, p2),
            Observable2::Constant { value } => *value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_round_trip() {
        for s in ["p1", "p1^2", "poly:1,0.5,-2", "ind:-1,2.5"] {
            let o: Observable1 = s.parse().unwrap();
            assert_eq!(o.to_string().parse::<Observable1>().unwrap(), o);
        }
        assert_eq!("p".parse::<Observable1>().unwrap(), Observable1::Identity);
        assert!("ind:2,1".parse::<Observable1>().is_err());
        assert!("exp".parse::<Observable1>().is_err());
        assert!("poly:1,x".parse::<Observable1>().is_err());
    }

    #[test]
    fn evaluation() {
        let poly: Observable1 = "poly:1,2,3".parse().unwrap();
        assert_eq!(poly.eval(2.0), 1.0 + 4.0 + 12.0);
        let ind = Observable1::Indicator { lo: 0.0, hi: 1.0 };
        assert_eq!(ind.eval(0.0), 1.0);
        assert_eq!(ind.eval(1.0), 0.0);
        let cross = Observable2::product(Observable2::p1(), Observable2::p2());
        assert_eq!(cross.eval(3.0, -2.0), -6.0);
        assert_eq!(Observable2::of_total(Observable1::Square).eval(1.0, 2.0), 9.0);
    }
}
