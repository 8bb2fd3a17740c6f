//! Conformance vectors pinning the provider primitives.
//!
//! One vector per line:
//!
//! ```text
//! <hex buffer> <primitive> <args> -> <value> <hex rest>
//! ```
//!
//! An empty buffer or rest is written `-`, as are absent arguments. Arguments are
//! comma-separated integers. Values: integers in decimal, `true`/`false`,
//! probabilities in shortest round-trip form with Python-style exponents,
//! strings JSON-quoted, integer lists as `[a,b,c]`. Lines starting with `#` and
//! blank lines are ignored.

use thiserror::Error;

use super::provider::{
    reference_consume_ascii_string, reference_consume_bool, reference_consume_int_in_range,
    reference_consume_int_list, reference_consume_probability, ProviderError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    IntInRange,
    Bool,
    Probability,
    AsciiString,
    IntList,
}

impl Primitive {
    pub fn name(self) -> &'static str {
        match self {
            Primitive::IntInRange => "int_in_range",
            Primitive::Bool => "bool",
            Primitive::Probability => "probability",
            Primitive::AsciiString => "ascii_string",
            Primitive::IntList => "int_list",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        [
            Primitive::IntInRange,
            Primitive::Bool,
            Primitive::Probability,
            Primitive::AsciiString,
            Primitive::IntList,
        ]
        .into_iter()
        .find(|p| p.name() == s)
    }

    fn arity(self) -> usize {
        match self {
            Primitive::IntInRange => 2,
            Primitive::Bool | Primitive::Probability => 0,
            Primitive::AsciiString => 1,
            Primitive::IntList => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vector {
    pub buffer: Vec<u8>,
    pub primitive: Primitive,
    pub args: Vec<i64>,
    /// Expected `<value> <hex rest>` exactly as written.
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VectorError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Python `repr(float)` formatting: shortest round-trip digits, positional for
/// decimal exponents in [-4, 16), scientific with a signed two-digit exponent
/// otherwise.
pub fn format_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{:e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let sign = if x < 0.0 { "-" } else { "" };
    if (-4..16).contains(&exp) {
        let body = if exp < 0 {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
        } else {
            let point = exp as usize + 1;
            if digits.len() <= point {
                format!("{}{}.0", digits, "0".repeat(point - digits.len()))
            } else {
                format!("{}.{}", &digits[..point], &digits[point..])
            }
        };
        format!("{sign}{body}")
    } else {
        let esign = if exp < 0 { '-' } else { '+' };
        format!("{sign}{mantissa}e{esign}{:02}", exp.abs())
    }
}

fn hex_or_dash(bytes: &[u8]) -> String {
    if bytes.is_empty() {
        "-".into()
    } else {
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn parse_hex(s: &str) -> Option<Vec<u8>> {
    if s == "-" {
        return Some(Vec::new());
    }
    if s.len() % 2 != 0 {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
        .collect()
}

/// Evaluates one primitive with the reference implementation and renders
/// `<value> <hex rest>`.
pub fn evaluate(buffer: &[u8], primitive: Primitive, args: &[i64]) -> Result<String, VectorError> {
    let (value, rest) = match primitive {
        Primitive::IntInRange => {
            let (v, r) = reference_consume_int_in_range(buffer, args[0], args[1])?;
            (v.to_string(), r)
        }
        Primitive::Bool => {
            let (v, r) = reference_consume_bool(buffer);
            (v.to_string(), r)
        }
        Primitive::Probability => {
            let (v, r) = reference_consume_probability(buffer);
            (format_real(v), r)
        }
        Primitive::AsciiString => {
            let (v, r) = reference_consume_ascii_string(buffer, args[0].max(0) as usize);
            (serde_json::to_string(&v).expect("string serializes"), r)
        }
        Primitive::IntList => {
            let (v, r) = reference_consume_int_list(buffer, args[0].max(0) as usize, args[1], args[2])?;
            let items: Vec<String> = v.iter().map(i64::to_string).collect();
            (format!("[{}]", items.join(",")), r)
        }
    };
    Ok(format!("{value} {}", hex_or_dash(rest)))
}

/// Renders a full vector line for `buffer` with the reference result.
pub fn render_line(buffer: &[u8], primitive: Primitive, args: &[i64]) -> Result<String, VectorError> {
    let args_text = if args.is_empty() {
        "-".to_string()
    } else {
        args.iter().map(i64::to_string).collect::<Vec<_>>().join(",")
    };
    Ok(format!(
        "{} {} {} -> {}",
        hex_or_dash(buffer),
        primitive.name(),
        args_text,
        evaluate(buffer, primitive, args)?
    ))
}

pub fn parse_vectors(text: &str) -> Result<Vec<Vector>, VectorError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let bad = |message: &str| VectorError::Malformed {
            line,
            message: message.to_string(),
        };
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (lhs, rhs) = trimmed.split_once(" -> ").ok_or_else(|| bad("missing ' -> '"))?;
        let mut parts = lhs.split_whitespace();
        let (Some(buf), Some(prim), Some(args), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(bad("expected '<hex buffer> <primitive> <args>'"));
        };
        let buffer = parse_hex(buf).ok_or_else(|| bad("bad hex buffer"))?;
        let primitive = Primitive::from_name(prim).ok_or_else(|| bad("unknown primitive"))?;
        let args: Vec<i64> = if args == "-" {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| a.parse().map_err(|_| bad("bad argument")))
                .collect::<Result<_, _>>()?
        };
        if args.len() != primitive.arity() {
            return Err(bad("wrong argument count"));
        }
        out.push(Vector {
            buffer,
            primitive,
            args,
            expected: rhs.to_string(),
        });
    }
    Ok(out)
}

/// Checks every vector against the reference primitives, returning the
/// mismatches as `(vector, actual)` pairs.
pub fn check_vectors(vectors: &[Vector]) -> Result<Vec<(Vector, String)>, VectorError> {
    let mut bad = Vec::new();
    for v in vectors {
        let got = evaluate(&v.buffer, v.primitive, &v.args)?;
        if got != v.expected {
            bad.push((v.clone(), got));
        }
    }
    Ok(bad)
}
