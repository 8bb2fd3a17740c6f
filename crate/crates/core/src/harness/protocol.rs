//! Messages of the line-delimited JSON runner protocol.

use serde::{Deserialize, Serialize};

use crate::model::Level;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Request {
    Init(InitRequest),
    Exec { buf: String },
    Shutdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitRequest {
    pub mode: Level,
    pub code_a: String,
    pub code_b: String,
    pub binding: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecReply {
    pub out_a: String,
    pub out_b: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub err: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_a: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_b: Option<String>,
}

impl Response {
    pub fn ok() -> Self {
        Response {
            ok: true,
            err: None,
            out_a: None,
            out_b: None,
        }
    }

    pub fn error(message: impl Into<String>) -> Self {
        Response {
            ok: false,
            err: Some(message.into()),
            ..Response::ok()
        }
    }

    pub fn exec(reply: ExecReply) -> Self {
        Response {
            out_a: Some(reply.out_a),
            out_b: Some(reply.out_b),
            ..Response::ok()
        }
    }

    /// The exec payload, if this is a successful exec reply.
    pub fn into_exec(self) -> Result<ExecReply, String> {
        match (self.ok, self.out_a, self.out_b) {
            (true, Some(out_a), Some(out_b)) => Ok(ExecReply { out_a, out_b }),
            (false, ..) => Err(self.err.unwrap_or_else(|| "runner reported failure".into())),
            _ => Err("exec reply lacks out_a/out_b".into()),
        }
    }
}

/// The result of one side on one input.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// Canonical text of a returned value (without the `OUT:` prefix).
    Output(String),
    /// The full `ERROR:<class>` token.
    ErrorToken(String),
    /// The full `BINDERR:<class>` token: the binding program failed.
    BindError(String),
    Timeout,
}

impl Outcome {
    pub fn parse(wire: &str) -> Result<Self, String> {
        if let Some(rest) = wire.strip_prefix("OUT:") {
            Ok(Outcome::Output(rest.to_string()))
        } else if wire.starts_with("ERROR:") {
            Ok(Outcome::ErrorToken(wire.to_string()))
        } else if wire.starts_with("BINDERR:") {
            Ok(Outcome::BindError(wire.to_string()))
        } else {
            Err(format!("unrecognised output {wire:?}"))
        }
    }

    /// Whether the input is left out of the score.
    pub fn excluded(&self) -> bool {
        matches!(self, Outcome::Timeout | Outcome::BindError(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_format() {
        let init = Request::Init(InitRequest {
            mode: Level::Function,
            code_a: "a".into(),
            code_b: "b".into(),
            binding: "x".into(),
            entry: None,
        });
        assert_eq!(
            serde_json::to_string(&init).unwrap(),
            r#"{"op":"init","mode":"function","code_a":"a","code_b":"b","binding":"x"}"#
        );
        assert_eq!(serde_json::to_string(&Request::Shutdown).unwrap(), r#"{"op":"shutdown"}"#);
        assert_eq!(
            serde_json::from_str::<Request>(r#"{"op":"exec","buf":"AA=="}"#).unwrap(),
            Request::Exec { buf: "AA==".into() }
        );
        assert_eq!(serde_json::to_string(&Response::ok()).unwrap(), r#"{"ok":true}"#);
        assert_eq!(
            serde_json::to_string(&Response::error("boom")).unwrap(),
            r#"{"ok":false,"err":"boom"}"#
        );
    }

    #[test]
    fn outcomes() {
        assert_eq!(Outcome::parse("OUT:3"), Ok(Outcome::Output("3".into())));
        assert_eq!(Outcome::parse("OUT:"), Ok(Outcome::Output(String::new())));
        assert_eq!(
            Outcome::parse("ERROR:ValueError"),
            Ok(Outcome::ErrorToken("ERROR:ValueError".into()))
        );
        assert!(Outcome::parse("BINDERR:IndexError").unwrap().excluded());
        assert!(Outcome::parse("3").is_err());
    }
}
