//! JSON-lines messages exchanged with an external model process.
//!
//! Single query: `{"id":1,"x":[0.5,1.0]}` answered by `{"id":1,"f":0.25}`.
//! Batch query: `{"id":2,"X":[[...],[...]]}` answered by `{"id":2,"F":[...]}`.
//! A server that cannot answer replies `{"id":n,"error":"..."}`. One JSON
//! document per line, UTF-8, ids echoed back.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::Model;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(rename = "X", default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<Vec<Vec<f64>>>,
}

impl Request {
    pub fn single(id: u64, x: &[f64]) -> Self {
        Request {
            id,
            x: Some(x.to_vec()),
            batch: None,
        }
    }

    pub fn batch(id: u64, xs: &[Vec<f64>]) -> Self {
        Request {
            id,
            x: None,
            batch: Some(xs.to_vec()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    fn error(id: Option<u64>, msg: impl Into<String>) -> Self {
        Response {
            id,
            f: None,
            batch: None,
            error: Some(msg.into()),
        }
    }
}

/// Answers one request line. Malformed input yields an error response.
pub fn handle_line(model: &dyn Model, line: &str) -> Response {
    let req: Request = match serde_json::from_str(line) {
        Ok(r) => r,
        Err(e) => {
            let id = serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("id").and_then(|id| id.as_u64()));
            return Response::error(id, format!("malformed request: {e}"));
        }
    };
    let id = Some(req.id);
    match (req.x, req.batch) {
        (Some(x), None) => match model.query(&x) {
            Ok(f) => Response {
                id,
                f: Some(f),
                batch: None,
                error: None,
            },
            Err(e) => Response::error(id, e.to_string()),
        },
        (None, Some(xs)) => match model.query_batch(&xs) {
            Ok(values) => Response {
                id,
                f: None,
                batch: Some(values),
                error: None,
            },
            Err(e) => Response::error(id, e.to_string()),
        },
        _ => Response::error(id, "request needs exactly one of `x` or `X`"),
    }
}

/// Serves requests until `input` closes, flushing after every response.
pub fn serve<R: BufRead, W: Write>(
    model: &dyn Model,
    input: R,
    mut output: W,
) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = handle_line(model, &line);
        serde_json::to_writer(&mut output, &resp)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BuiltinModel;

    #[test]
    fn wire_format() {
        let req = serde_json::to_string(&Request::single(1, &[0.0, 0.5])).unwrap();
        assert_eq!(req, r#"{"id":1,"x":[0.0,0.5]}"#);
        let req = serde_json::to_string(&Request::batch(2, &[vec![1.0, 2.0]])).unwrap();
        assert_eq!(req, r#"{"id":2,"X":[[1.0,2.0]]}"#);
    }

    #[test]
    fn serves_single_batch_and_malformed() {
        let input =
            b"{\"id\":1,\"x\":[0,0]}\nnot json\n{\"id\":3,\"X\":[[0,0],[0,0],[0,0]]}\n{\"id\":4}\n";
        let mut out = Vec::new();
        serve(&BuiltinModel::MexicanHat, &input[..], &mut out).unwrap();
        let lines: Vec<Response> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0].id, Some(1));
        assert_eq!(lines[0].f, Some(1.0));
        assert!(lines[1].error.is_some());
        assert_eq!(lines[1].id, None);
        assert_eq!(lines[2].batch.as_ref().unwrap().len(), 3);
        assert_eq!(lines[3].id, Some(4));
        assert!(lines[3].error.is_some());
    }
}
