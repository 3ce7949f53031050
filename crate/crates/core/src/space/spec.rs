//! Textual space descriptions, e.g. `kind=lp p=3 n=2`, `kind=cone theta=4.0`,
//! `kind=sphere cap=1.0`, and
//! `kind=product first=(kind=lp p=2 n=1) second=(kind=cone theta=4.0)`.
//! The same description appears in experiment configs, reports and witnesses,
//! so replays can rebuild the exact model.

use super::SpaceModel;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceSpec {
    Lp {
        p: f64,
        n: usize,
    },
    Cone {
        theta: f64,
    },
    Sphere {
        cap: f64,
    },
    Product {
        first: Box<SpaceSpec>,
        second: Box<SpaceSpec>,
    },
}

impl SpaceSpec {
    pub fn build(&self) -> Result<SpaceModel> {
        match self {
            SpaceSpec::Lp { p, n } => SpaceModel::lp(*p, *n),
            SpaceSpec::Cone { theta } => SpaceModel::cone(*theta),
            SpaceSpec::Sphere { cap } => SpaceModel::sphere_cap(*cap),
            SpaceSpec::Product { first, second } => {
                SpaceModel::product(first.build()?, second.build()?)
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let fields = split_fields(text)?;
        let kind = fields
            .iter()
            .find(|(k, _)| k == "kind")
            .ok_or_else(|| Error::InvalidSpec(format!("missing kind in {text:?}")))?
            .1
            .clone();
        let get = |key: &str| -> Result<&str> {
            fields
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::InvalidSpec(format!("missing field {key} in {text:?}")))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?
                .parse::<f64>()
                .map_err(|_| Error::InvalidSpec(format!("field {key} is not a number")))
        };
        match kind.as_str() {
            "lp" => Ok(SpaceSpec::Lp {
                p: num("p")?,
                n: num("n")? as usize,
            }),
            "euclidean" => Ok(SpaceSpec::Lp {
                p: 2.0,
                n: num("n")? as usize,
            }),
            "cone" => Ok(SpaceSpec::Cone {
                theta: num("theta")?,
            }),
            "sphere" => Ok(SpaceSpec::Sphere { cap: num("cap")? }),
            "product" => Ok(SpaceSpec::Product {
                first: Box::new(SpaceSpec::parse(get("first")?)?),
                second: Box::new(SpaceSpec::parse(get("second")?)?),
            }),
            other => Err(Error::InvalidSpec(format!("unknown space kind {other:?}"))),
        }
    }
}

impl FromStr for SpaceSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SpaceSpec::parse(s)
    }
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceSpec::Lp { p, n } => write!(f, "kind=lp p={p} n={n}"),
            SpaceSpec::Cone { theta } => write!(f, "kind=cone theta={theta}"),
            SpaceSpec::Sphere { cap } => write!(f, "kind=sphere cap={cap}"),
            SpaceSpec::Product { first, second } => {
                write!(f, "kind=product first=({first}) second=({second})")
            }
        }
    }
}

/// Split `k=v` fields at depth zero; values may be parenthesized groups.
fn split_fields(text: &str) -> Result<Vec<(String, String)>> {
    let mut fields = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let mut key = String::new();
        while let Some(&c) = chars.peek() {
            if c == '=' {
                break;
            }
            if c.is_whitespace() {
                return Err(Error::InvalidSpec(format!("dangling token near {key:?}")));
            }
            key.push(c);
            chars.next();
        }
        if chars.next() != Some('=') {
            return Err(Error::InvalidSpec(format!("expected '=' after {key:?}")));
        }
        let mut value = String::new();
        if chars.peek() == Some(&'(') {
            chars.next();
            let mut depth = 1usize;
            for c in chars.by_ref() {
                match c {
                    '(' => depth += 1,
                    ')' => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
                value.push(c);
            }
            if depth != 0 {
                return Err(Error::InvalidSpec("unbalanced parentheses".into()));
            }
        } else {
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                value.push(c);
                chars.next();
            }
        }
        fields.push((key, value));
    }
    if fields.is_empty() {
        return Err(Error::InvalidSpec("empty space description".into()));
    }
    Ok(fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_kinds() {
        assert_eq!(
            SpaceSpec::parse("kind=lp p=3 n=2").unwrap(),
            SpaceSpec::Lp { p: 3.0, n: 2 }
        );
        assert_eq!(
            SpaceSpec::parse("kind=cone theta=4.0").unwrap(),
            SpaceSpec::Cone { theta: 4.0 }
        );
        assert_eq!(
            SpaceSpec::parse("kind=sphere cap=1.0").unwrap(),
            SpaceSpec::Sphere { cap: 1.0 }
        );
    }

    #[test]
    fn parses_nested_product_and_round_trips() {
        let text = "kind=product first=(kind=lp p=2 n=1) second=(kind=cone theta=4)";
        let spec = SpaceSpec::parse(text).unwrap();
        let printed = spec.to_string();
        assert_eq!(SpaceSpec::parse(&printed).unwrap(), spec);
        assert!(spec.build().is_ok());
    }

    #[test]
    fn rejects_malformed_descriptions() {
        assert!(SpaceSpec::parse("p=3 n=2").is_err());
        assert!(SpaceSpec::parse("kind=torus r=1").is_err());
        assert!(SpaceSpec::parse("kind=lp p=(3 n=2").is_err());
        assert!(SpaceSpec::parse("").is_err());
    }
}
