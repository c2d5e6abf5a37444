//! NDJSON wire messages between the host and an external predictor.
//!
//! ```text
//! -> {"type":"handshake","protocol":1}
//! <- {"type":"capabilities","mid_names":[..7],"emotion_names":[..8],
//!     "linear_head":{"weights":[[..7]..8],"bias":[..8]} | null,
//!     "input_spec":{"bins":B,"frames":"variable" | F}}
//! -> {"type":"predict","id":n,"shape":[B,F],"scale":"db","batch":[[..B*F]..]}
//! <- {"type":"prediction","id":n,"mid":[[..7]..],"emotion":[[..8]..]}
//! -> {"type":"shutdown"}
//! ```
//!
//! A child may also answer any request with `{"type":"error","message":..}`.

use serde::{Deserialize, Serialize};

use super::{LinearHead, PredictorCapabilities, PredictorError, EMOTION_COUNT, MID_COUNT};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HostMessage {
    Handshake { protocol: u32 },
    Shutdown,
}

/// Borrowing view of a predict request so large batches are serialized
/// without copying.
#[derive(Debug, Serialize)]
pub struct PredictRequest<'a> {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub id: u64,
    pub shape: [usize; 2],
    pub scale: &'static str,
    pub batch: Vec<&'a [f64]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    /// `None` (JSON `null`) accepts any bin count.
    pub bins: Option<usize>,
    pub frames: FramesSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FramesSpec {
    Variable,
    Fixed(usize),
}

impl Serialize for FramesSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            FramesSpec::Variable => s.serialize_str("variable"),
            FramesSpec::Fixed(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for FramesSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Fixed(usize),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Fixed(n) => Ok(FramesSpec::Fixed(n)),
            Raw::Word(w) if w == "variable" => Ok(FramesSpec::Variable),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("frames must be \"variable\" or a count, got {w:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearHeadWire {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapabilitiesMessage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<u32>,
    pub mid_names: Vec<String>,
    pub emotion_names: Vec<String>,
    pub linear_head: Option<LinearHeadWire>,
    pub input_spec: InputSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionMessage {
    pub id: u64,
    /// `null` entries stand for NaN.
    pub mid: Vec<Vec<Option<f64>>>,
    pub emotion: Vec<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ChildMessage {
    Capabilities(CapabilitiesMessage),
    Prediction(PredictionMessage),
    Error { message: String },
}

fn arity(field: &str, expected: usize, actual: usize) -> Result<(), PredictorError> {
    if expected == actual {
        Ok(())
    } else {
        Err(PredictorError::Arity { field: field.to_string(), expected, actual })
    }
}

impl CapabilitiesMessage {
    pub fn into_capabilities(self) -> Result<PredictorCapabilities, PredictorError> {
        if let Some(actual) = self.protocol {
            if actual != PROTOCOL_VERSION {
                return Err(PredictorError::ProtocolVersion { expected: PROTOCOL_VERSION, actual });
            }
        }
        arity("mid_names", MID_COUNT, self.mid_names.len())?;
        arity("emotion_names", EMOTION_COUNT, self.emotion_names.len())?;
        let linear_head = match self.linear_head {
            None => None,
            Some(wire) => {
                arity("linear_head.weights", EMOTION_COUNT, wire.weights.len())?;
                arity("linear_head.bias", EMOTION_COUNT, wire.bias.len())?;
                let mut head = LinearHead { weights: [[0.0; MID_COUNT]; EMOTION_COUNT], bias: [0.0; EMOTION_COUNT] };
                for (i, row) in wire.weights.iter().enumerate() {
                    arity(&format!("linear_head.weights[{i}]"), MID_COUNT, row.len())?;
                    head.weights[i].copy_from_slice(row);
                }
                head.bias.copy_from_slice(&wire.bias);
                if !head.is_finite() {
                    return Err(PredictorError::Protocol {
                        reason: "linear_head has non-finite entries".into(),
                        line: String::new(),
                    });
                }
                Some(head)
            }
        };
        Ok(PredictorCapabilities {
            mid_names: self.mid_names,
            emotion_names: self.emotion_names,
            linear_head,
            input_spec: Some(self.input_spec),
        })
    }
}

impl From<&LinearHead> for LinearHeadWire {
    fn from(head: &LinearHead) -> Self {
        Self { weights: head.weights.iter().map(|r| r.to_vec()).collect(), bias: head.bias.to_vec() }
    }
}

/// Parses one line from the child. Bare `NaN`/`Infinity` tokens (as emitted
/// by e.g. Python's json module) are mapped to `null` so they surface as
/// value errors on the affected item rather than as unparseable lines.
pub fn parse_child_line(line: &str) -> Result<ChildMessage, PredictorError> {
    let protocol_error = |e: serde_json::Error| PredictorError::Protocol {
        reason: format!("malformed message ({e})"),
        line: line.to_string(),
    };
    match serde_json::from_str(line) {
        Ok(msg) => Ok(msg),
        Err(first) => {
            let cleaned = null_non_finite_tokens(line);
            if cleaned == line {
                return Err(protocol_error(first));
            }
            serde_json::from_str(&cleaned).map_err(protocol_error)
        }
    }
}

fn null_non_finite_tokens(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut rest = line;
    while let Some(ch) = rest.chars().next() {
        if in_string {
            out.push(ch);
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == '"' {
                in_string = false;
            }
            rest = &rest[ch.len_utf8()..];
            continue;
        }
        if ch == '"' {
            in_string = true;
        }
        let token = ["-Infinity", "Infinity", "NaN"].into_iter().find(|t| rest.starts_with(t));
        match token {
            Some(t) => {
                out.push_str("null");
                rest = &rest[t.len()..];
            }
            None => {
                out.push(ch);
                rest = &rest[ch.len_utf8()..];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caps_json(mids: usize, head: bool) -> String {
        let mid_names: Vec<String> = (0..mids).map(|i| format!("m{i}")).collect();
        let emotion_names: Vec<String> = (0..8).map(|i| format!("e{i}")).collect();
        let head = if head {
            serde_json::json!({"weights": vec![vec![0.5; 7]; 8], "bias": vec![0.0; 8]})
        } else {
            serde_json::Value::Null
        };
        serde_json::json!({
            "type": "capabilities", "mid_names": mid_names, "emotion_names": emotion_names,
            "linear_head": head, "input_spec": {"bins": 4, "frames": "variable"}
        })
        .to_string()
    }

    fn caps(line: &str) -> Result<PredictorCapabilities, PredictorError> {
        match parse_child_line(line)? {
            ChildMessage::Capabilities(c) => c.into_capabilities(),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn handshake_serialization() {
        let msg = serde_json::to_string(&HostMessage::Handshake { protocol: 1 }).unwrap();
        assert_eq!(msg, r#"{"type":"handshake","protocol":1}"#);
        let msg = serde_json::to_string(&HostMessage::Shutdown).unwrap();
        assert_eq!(msg, r#"{"type":"shutdown"}"#);
    }

    #[test]
    fn capabilities_happy_path() {
        let c = caps(&caps_json(7, true)).unwrap();
        assert!(c.linear_head.is_some());
        assert_eq!(c.input_spec.unwrap().frames, FramesSpec::Variable);
        assert!(caps(&caps_json(7, false)).unwrap().linear_head.is_none());
    }

    #[test]
    fn six_mid_names_is_an_arity_error() {
        match caps(&caps_json(6, true)) {
            Err(PredictorError::Arity { field, expected: 7, actual: 6 }) => assert_eq!(field, "mid_names"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_json_line_is_reported_verbatim() {
        match parse_child_line("hello there") {
            Err(PredictorError::Protocol { line, .. }) => assert_eq!(line, "hello there"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn protocol_version_mismatch() {
        let mut v: serde_json::Value = serde_json::from_str(&caps_json(7, true)).unwrap();
        v["protocol"] = 2.into();
        assert!(matches!(caps(&v.to_string()), Err(PredictorError::ProtocolVersion { expected: 1, actual: 2 })));
    }

    #[test]
    fn nan_tokens_become_null() {
        let line =
            r#"{"type":"prediction","id":3,"mid":[[NaN,1,2,3,4,5,-Infinity]],"emotion":[[0,0,0,0,0,0,0,Infinity]]}"#;
        match parse_child_line(line).unwrap() {
            ChildMessage::Prediction(p) => {
                assert_eq!(p.mid[0][0], None);
                assert_eq!(p.mid[0][6], None);
                assert_eq!(p.emotion[0][7], None);
                assert_eq!(p.mid[0][1], Some(1.0));
            }
            other => panic!("unexpected {other:?}"),
        }
        // tokens inside strings are left alone
        assert_eq!(null_non_finite_tokens(r#"{"a":"NaN",b:NaN}"#), r#"{"a":"NaN",b:null}"#);
    }

    #[test]
    fn frames_spec_wire_forms() {
        assert_eq!(serde_json::to_string(&FramesSpec::Fixed(12)).unwrap(), "12");
        assert_eq!(serde_json::from_str::<FramesSpec>("\"variable\"").unwrap(), FramesSpec::Variable);
        assert!(serde_json::from_str::<FramesSpec>("\"lots\"").is_err());
    }
}
