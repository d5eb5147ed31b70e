//! Flat `key = value` parameter files.
//!
//! ```text
//! # copper on nickel, nondimensional
//! alpha = 1.1
//! mu = 1.0
//! nu = 0.3
//! sigma = 1.0
//! ```

use super::MaterialInput;
use crate::{Error, Result};
use std::path::Path;

/// Parsed contents of a parameter file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamFile {
    pub material: MaterialInput,
    pub big_r: Option<f64>,
    pub theta: Option<f64>,
}

pub fn parse_config(text: &str) -> Result<ParamFile> {
    let mut out = ParamFile::default();
    let mut seen: Vec<String> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Config {
            line: line_no,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        if seen.iter().any(|k| k == key) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        seen.push(key.to_string());

        let number = || -> Result<f64> {
            let v: f64 = value
                .parse()
                .map_err(|_| err(format!("`{key}`: `{value}` is not a number")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(err(format!("`{key}` must be finite")))
            }
        };
        let m = &mut out.material;
        match key {
            "alpha" => m.alpha = Some(number()?),
            "n" => {
                m.n = Some(
                    value
                        .parse()
                        .map_err(|_| err(format!("`n`: `{value}` is not a positive integer")))?,
                )
            }
            "b" => m.b = Some(number()?),
            "mu" => m.mu = Some(number()?),
            "nu" => m.nu = Some(number()?),
            "lambda" => m.lambda = Some(number()?),
            "gamma_ch" => m.gamma_ch = Some(number()?),
            "h" => m.h = Some(number()?),
            "sigma" => m.sigma = Some(number()?),
            "R" => out.big_r = Some(number()?),
            "theta" => out.theta = Some(number()?),
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<ParamFile> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let text = "# header\nalpha = 1.1\n  mu=2 # inline\n\nnu = 0.3\nsigma = 1\nR = 1e4\ntheta=0.95\nn = 10\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.material.alpha, Some(1.1));
        assert_eq!(cfg.material.mu, Some(2.0));
        assert_eq!(cfg.material.n, Some(10));
        assert_eq!(cfg.big_r, Some(1e4));
        assert_eq!(cfg.theta, Some(0.95));
        let p = cfg.material.build().unwrap();
        assert_eq!(p.sigma, 1.0);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = parse_config("alpha = 1.1\nkappa = 3\n").unwrap_err();
        match err {
            Error::Config { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("kappa"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_lines_are_errors() {
        assert!(parse_config("alpha 1.1").is_err());
        assert!(parse_config("alpha = x").is_err());
        assert!(parse_config("alpha = 1\nalpha = 2").is_err());
        assert!(parse_config("n = -3").is_err());
        assert!(parse_config("mu = inf").is_err());
    }
}
