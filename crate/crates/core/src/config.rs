//! Parameter files: UTF-8 `key = expression` lines with `#` comments.
//!
//! Values are arithmetic expressions over decimal numbers with `+ - * /`
//! and parentheses, e.g. `random_failure_rate = 0.01/(24*60)`. Optional
//! parameters accept the literal `none`. Keys not mentioned keep their
//! defaults.

use crate::error::ConfigError;
use crate::params::{ParamKey, SimParams};

/// Parses a parameter document on top of the defaults and validates it.
pub fn parse_config(text: &str) -> Result<SimParams, ConfigError> {
    let mut params = SimParams::default();
    let mut seen: Vec<ParamKey> = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(ConfigError::Parse {
                line,
                column: content.len() - content.trim_start().len() + 1,
                message: "expected `key = value`".into(),
            });
        };
        let key: ParamKey = content[..eq].trim().parse()?;
        if seen.contains(&key) {
            return Err(ConfigError::Parse {
                line,
                column: 1,
                message: format!("`{key}` is set more than once"),
            });
        }
        seen.push(key);

        let value_text = &content[eq + 1..];
        if value_text.trim() == "none" {
            params.unset(key)?;
            continue;
        }
        let value = eval(value_text).map_err(|e| ConfigError::Parse {
            line,
            column: eq + 2 + e.offset,
            message: e.message,
        })?;
        params.set(key, value)?;
    }
    params.validate()?;
    Ok(params)
}

/// Renders `params` as a document that [`parse_config`] reads back exactly.
pub fn to_config_string(params: &SimParams) -> String {
    let mut out = String::new();
    for key in ParamKey::ALL {
        let value = match params.get(key) {
            Some(v) => format!("{v}"),
            None => "none".to_owned(),
        };
        out.push_str(key.name());
        out.push_str(" = ");
        out.push_str(&value);
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExprError {
    /// Byte offset into the expression text.
    pub offset: usize,
    pub message: String,
}

/// Evaluates an arithmetic expression.
pub fn eval(text: &str) -> Result<f64, ExprError> {
    let mut parser = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let value = parser.expr()?;
    parser.skip_ws();
    if parser.pos < parser.src.len() {
        return Err(parser.error("unexpected trailing input"));
    }
    if !value.is_finite() {
        return Err(ExprError {
            offset: 0,
            message: "expression does not evaluate to a finite number".into(),
        });
    }
    Ok(value)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        ExprError {
            offset: self.pos,
            message: message.to_owned(),
        }
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(u8::is_ascii_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<f64, ExprError> {
        let mut acc = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            acc = if op == b'+' { acc + rhs } else { acc - rhs };
        }
        Ok(acc)
    }

    // term := factor (('*' | '/') factor)*
    fn term(&mut self) -> Result<f64, ExprError> {
        let mut acc = self.factor()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let at = self.pos;
            let rhs = self.factor()?;
            if op == b'/' && rhs == 0.0 {
                return Err(ExprError {
                    offset: at,
                    message: "division by zero".into(),
                });
            }
            acc = if op == b'*' { acc * rhs } else { acc / rhs };
        }
        Ok(acc)
    }

    // factor := ('+' | '-') factor | '(' expr ')' | number
    fn factor(&mut self) -> Result<f64, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-self.factor()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.factor()
            }
            Some(b'(') => {
                self.pos += 1;
                let value = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(value)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(_) => Err(self.error("expected a number, `(` or sign")),
            None => Err(self.error("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<f64, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.src.get(p.pos).is_some_and(u8::is_ascii_digit) {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                digits(self);
            } else {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse().map_err(|_| ExprError {
            offset: start,
            message: format!("malformed number `{text}`"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), SimParams::default());
        assert_eq!(
            parse_config("# only a comment\n\n   \n").unwrap(),
            SimParams::default()
        );
    }

    #[test]
    fn arithmetic_values() {
        let p = parse_config("manual_repair_time = 2*1440\nrandom_failure_rate = 0.01/(24*60)").unwrap();
        assert_eq!(p.manual_repair_time, 2880.0);
        assert_eq!(p.random_failure_rate, 0.01 / (24.0 * 60.0));
    }

    #[test]
    fn expression_grammar() {
        assert_eq!(eval("1 + 2 * 3").unwrap(), 7.0);
        assert_eq!(eval("(1 + 2) * 3").unwrap(), 9.0);
        assert_eq!(eval("-(4 - 6)").unwrap(), 2.0);
        assert_eq!(eval("8 / 4 / 2").unwrap(), 1.0);
        assert_eq!(eval("1e3 + .5").unwrap(), 1000.5);
        assert_eq!(eval("2.5E-1").unwrap(), 0.25);
    }

    #[test]
    fn expression_errors_carry_position() {
        assert_eq!(eval("1 + ").unwrap_err().offset, 4);
        assert_eq!(eval("(1 + 2").unwrap_err().offset, 6);
        assert_eq!(eval("2 ** 3").unwrap_err().offset, 3);
        assert_eq!(eval("3 4").unwrap_err().offset, 2);
        assert!(eval("1/0").unwrap_err().message.contains("division"));
        assert!(eval("pow(2)").is_err());
    }

    #[test]
    fn parse_error_reports_line_and_column() {
        let err = parse_config("recovery_time = 20\njob_length = 10 * (3").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Parse {
                line: 2,
                column: 21,
                message: "expected `)`".into()
            }
        );
    }

    #[test]
    fn range_error() {
        assert!(matches!(
            parse_config("auto_repair_probability = 1.5"),
            Err(ConfigError::OutOfRange {
                key: "auto_repair_probability",
                ..
            })
        ));
    }

    #[test]
    fn unknown_key() {
        assert_eq!(
            parse_config("no_such_knob = 3"),
            Err(ConfigError::UnknownKey("no_such_knob".into()))
        );
    }

    #[test]
    fn optional_none_and_duplicates() {
        let p = parse_config("regeneration_period = 7*1440\nremoval_threshold = 3\nremoval_window = 1440").unwrap();
        assert_eq!(p.regeneration_period, Some(10080.0));
        assert_eq!(p.removal_threshold, Some(3));
        let p = parse_config("regeneration_period = none").unwrap();
        assert_eq!(p.regeneration_period, None);
        assert!(parse_config("recovery_time = none").is_err());
        assert!(parse_config("recovery_time = 1\nrecovery_time = 2").is_err());
        assert!(parse_config("recovery_time 20").is_err());
    }

    #[test]
    fn trailing_comment() {
        let p = parse_config("waiting_time = 30 # minutes").unwrap();
        assert_eq!(p.waiting_time, 30.0);
    }

    #[test]
    fn serialized_defaults_round_trip() {
        let p = SimParams::default();
        assert_eq!(parse_config(&to_config_string(&p)).unwrap(), p);
    }
}
