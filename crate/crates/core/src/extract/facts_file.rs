//! Newline-delimited facts file: a header line, then one JSON record per
//! method model.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExtractError;
use crate::model::MethodUsageModel;

pub const FORMAT: &str = "misuse-facts";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Header {
    format: String,
    version: u32,
}

pub fn write_facts<W: Write>(models: &[MethodUsageModel], mut out: W) -> Result<(), ExtractError> {
    let header = Header {
        format: FORMAT.to_owned(),
        version: VERSION,
    };
    let io = |e: std::io::Error| ExtractError::Facts {
        line: 0,
        message: e.to_string(),
    };
    serde_json::to_writer(&mut out, &header).map_err(|e| ExtractError::Facts {
        line: 1,
        message: e.to_string(),
    })?;
    out.write_all(b"\n").map_err(io)?;
    for (i, m) in models.iter().enumerate() {
        serde_json::to_writer(&mut out, m).map_err(|e| ExtractError::Facts {
            line: i + 2,
            message: e.to_string(),
        })?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_facts<R: BufRead>(input: R) -> Result<Vec<MethodUsageModel>, ExtractError> {
    let mut models = Vec::new();
    let mut saw_header = false;
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| ExtractError::Facts {
            line: line_no,
            message: e.to_string(),
        })?;
        if !saw_header {
            let header: Header = serde_json::from_str(&line).map_err(|e| ExtractError::Facts {
                line: line_no,
                message: format!("bad header: {e}"),
            })?;
            if header.format != FORMAT || header.version != VERSION {
                return Err(ExtractError::Facts {
                    line: line_no,
                    message: format!("unsupported format {} v{}", header.format, header.version),
                });
            }
            saw_header = true;
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let model: MethodUsageModel = serde_json::from_str(&line).map_err(|e| ExtractError::Facts {
            line: line_no,
            message: e.to_string(),
        })?;
        model.validate().map_err(|e| ExtractError::Facts {
            line: line_no,
            message: e.to_string(),
        })?;
        models.push(model);
    }
    if !saw_header {
        return Err(ExtractError::Facts {
            line: 1,
            message: "missing header".into(),
        });
    }
    Ok(models)
}

pub fn write_facts_file(models: &[MethodUsageModel], path: &Path) -> Result<(), ExtractError> {
    let file = File::create(path).map_err(|e| ExtractError::io(path, e))?;
    write_facts(models, BufWriter::new(file))
}

pub fn load_facts_file(path: &Path) -> Result<Vec<MethodUsageModel>, ExtractError> {
    let file = File::open(path).map_err(|e| ExtractError::io(path, e))?;
    read_facts(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::java::parse_method_models;

    #[test]
    fn empty_list_is_header_only() {
        let mut buf = Vec::new();
        write_facts(&[], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "{\"format\":\"misuse-facts\",\"version\":1}\n");
        assert!(read_facts(text.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn round_trip_and_field_names() {
        let src = "class A { void m(java.io.Writer w) { try { w.write(1); } catch (java.io.IOException e) { e.printStackTrace(); } finally { w.close(); } } }";
        let models = parse_method_models(src, "A.java", "p", "v").unwrap().models;
        let mut buf = Vec::new();
        write_facts(&models, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        let record: serde_json::Value = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
        let keys: Vec<_> = record.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, vec!["events", "exceptional_successors", "location", "objects"]);
        assert_eq!(read_facts(buf.as_slice()).unwrap(), models);
    }

    #[test]
    fn corrupt_line_is_named() {
        let text = "{\"format\":\"misuse-facts\",\"version\":1}\n{not json}\n";
        match read_facts(text.as_bytes()) {
            Err(ExtractError::Facts { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
