use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MAX_DIAGNOSTIC: usize = 200;

/// Deterministic, side-effect-free checks over a workspace. File paths are
/// workspace-relative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CheckerSpec {
    FieldEquals {
        file: String,
        row_key: String,
        column: String,
        expected: String,
    },
    RowCount {
        file: String,
        expected: usize,
    },
    KeyPresent {
        file: String,
        key: String,
        expected_value: String,
    },
    AnswerEquals {
        expected_normalized: String,
    },
    FileDigest {
        file: String,
        expected_digest: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub pass: bool,
    pub diagnostic: String,
}

impl CheckResult {
    fn pass() -> Self {
        CheckResult {
            pass: true,
            diagnostic: "check passed".into(),
        }
    }

    fn fail(msg: impl Into<String>) -> Self {
        let mut diagnostic: String = msg.into();
        if diagnostic.chars().count() > MAX_DIAGNOSTIC {
            diagnostic = diagnostic.chars().take(MAX_DIAGNOSTIC).collect();
        }
        CheckResult {
            pass: false,
            diagnostic,
        }
    }
}

/// Trim plus internal whitespace collapse; case is preserved.
pub fn normalize_answer(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn answer_path(unit_id: &str) -> String {
    format!("answers/{unit_id}.txt")
}

/// Parsed CSV: header plus rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.iter().map(str::to_owned).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_owned).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()?;
        Ok(CsvTable { headers, rows })
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
        writer
            .write_record(&self.headers)
            .expect("writing to memory");
        for row in &self.rows {
            writer.write_record(row).expect("writing to memory");
        }
        String::from_utf8(writer.into_inner().expect("flush to memory")).expect("utf-8 input")
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Row whose first column equals `key`.
    pub fn row_index(&self, key: &str) -> Option<usize> {
        self.rows.iter().position(|r| r.first().map(String::as_str) == Some(key))
    }
}

/// `key: value` lines in file order.
pub fn parse_metadata(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|line| line.split_once(':'))
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .collect()
}

fn read(root: &Path, rel: &str) -> Option<String> {
    fs::read_to_string(root.join(rel)).ok()
}

pub fn evaluate(checker: &CheckerSpec, root: &Path, unit_id: &str) -> CheckResult {
    match checker {
        CheckerSpec::FieldEquals {
            file,
            row_key,
            column,
            expected,
        } => {
            let Some(text) = read(root, file) else {
                return CheckResult::fail(format!("artifact `{file}` is missing"));
            };
            let table = match CsvTable::parse(&text) {
                Ok(t) => t,
                Err(_) => return CheckResult::fail(format!("`{file}` is not valid CSV")),
            };
            let Some(col) = table.column(column) else {
                return CheckResult::fail(format!("column `{column}` not found"));
            };
            let Some(row) = table.row_index(row_key) else {
                return CheckResult::fail(format!("row `{row_key}` not found"));
            };
            let actual = table.rows[row].get(col).map(String::as_str).unwrap_or("");
            if actual == expected {
                CheckResult::pass()
            } else {
                CheckResult::fail(format!(
                    "row `{row_key}` column `{column}`: expected `{expected}`, found `{actual}`"
                ))
            }
        }
        CheckerSpec::RowCount { file, expected } => {
            let Some(text) = read(root, file) else {
                return CheckResult::fail(format!("artifact `{file}` is missing"));
            };
            match CsvTable::parse(&text) {
                Ok(t) if t.rows.len() == *expected => CheckResult::pass(),
                Ok(t) => CheckResult::fail(format!(
                    "expected {expected} data rows, found {}",
                    t.rows.len()
                )),
                Err(_) => CheckResult::fail(format!("`{file}` is not valid CSV")),
            }
        }
        CheckerSpec::KeyPresent {
            file,
            key,
            expected_value,
        } => {
            let Some(text) = read(root, file) else {
                return CheckResult::fail(format!("artifact `{file}` is missing"));
            };
            match parse_metadata(&text).get(key) {
                Some(v) if v == expected_value => CheckResult::pass(),
                Some(v) => CheckResult::fail(format!(
                    "key `{key}`: expected `{expected_value}`, found `{v}`"
                )),
                None => CheckResult::fail(format!("key `{key}` is missing")),
            }
        }
        CheckerSpec::AnswerEquals {
            expected_normalized,
        } => match read(root, &answer_path(unit_id)) {
            None => CheckResult::fail("no answer stored"),
            Some(a) if normalize_answer(&a) == *expected_normalized => CheckResult::pass(),
            Some(_) => CheckResult::fail("stored answer does not match"),
        },
        CheckerSpec::FileDigest {
            file,
            expected_digest,
        } => match fs::read(root.join(file)) {
            Err(_) => CheckResult::fail(format!("artifact `{file}` is missing")),
            Ok(bytes) if sha256_hex(&bytes) == *expected_digest => CheckResult::pass(),
            Ok(bytes) => CheckResult::fail(format!(
                "digest mismatch for `{file}` ({} lines)",
                bytes.split(|b| *b == b'\n').count().saturating_sub(1)
            )),
        },
    }
}

/// Structured edit. Each unit kind accepts exactly one operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum EditOp {
    SetCell {
        row: String,
        column: String,
        value: String,
    },
    KeepRows {
        count: usize,
    },
    SetKey {
        key: String,
        value: String,
    },
    Answer {
        value: String,
    },
    StripLines {
        prefix: String,
    },
}

impl EditOp {
    pub fn parse(payload: &str) -> Result<Self> {
        serde_json::from_str(payload).map_err(Error::from)
    }

    pub fn to_payload(&self) -> String {
        serde_json::to_string(self).expect("edit ops serialize")
    }

    pub fn allowed_for(&self, kind: super::UnitKind) -> bool {
        use super::UnitKind::*;
        matches!(
            (self, kind),
            (EditOp::SetCell { .. }, CsvFieldCheck)
                | (EditOp::KeepRows { .. }, CsvCountCheck)
                | (EditOp::SetKey { .. }, MetadataRepair)
                | (EditOp::Answer { .. }, ConsistencyAnswer)
                | (EditOp::StripLines { .. }, ArtifactValidation)
        )
    }
}

/// Rewrites `key: value` (or appends it) preserving other lines.
pub fn set_metadata_key(text: &str, key: &str, value: &str) -> String {
    let mut out = String::new();
    let mut found = false;
    for line in text.lines() {
        match line.split_once(':') {
            Some((k, _)) if k.trim() == key && !found => {
                out.push_str(&format!("{key}: {value}\n"));
                found = true;
            }
            _ => {
                out.push_str(line);
                out.push('\n');
            }
        }
    }
    if !found {
        out.push_str(&format!("{key}: {value}\n"));
    }
    out
}

pub fn strip_lines(text: &str, prefix: &str) -> String {
    text.split_inclusive('\n')
        .filter(|l| !l.starts_with(prefix))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ws(files: &[(&str, &str)]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (p, c) in files {
            let path = dir.path().join(p);
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            fs::write(path, c).unwrap();
        }
        dir
    }

    #[test]
    fn field_equals() {
        let d = ws(&[("a.csv", "Name,Hp\nford,100\namc,150\n")]);
        let c = CheckerSpec::FieldEquals {
            file: "a.csv".into(),
            row_key: "amc".into(),
            column: "Hp".into(),
            expected: "150".into(),
        };
        assert!(evaluate(&c, d.path(), "u1").pass);
    }

    #[test]
    fn row_count_off_by_one() {
        let mut text = String::from("k,v\n");
        for i in 0..31 {
            text.push_str(&format!("r{i},{i}\n"));
        }
        let d = ws(&[("a.csv", &text)]);
        let c = CheckerSpec::RowCount {
            file: "a.csv".into(),
            expected: 32,
        };
        let r = evaluate(&c, d.path(), "u1");
        assert!(!r.pass);
        assert_eq!(r.diagnostic, "expected 32 data rows, found 31");
    }

    #[test]
    fn answer_normalization() {
        let d = ws(&[("answers/u1.txt", "  42 \n")]);
        let c = CheckerSpec::AnswerEquals {
            expected_normalized: "42".into(),
        };
        assert!(evaluate(&c, d.path(), "u1").pass);
        let d = ws(&[("answers/u1.txt", "Apache   2.0")]);
        let c = CheckerSpec::AnswerEquals {
            expected_normalized: "Apache 2.0".into(),
        };
        assert!(evaluate(&c, d.path(), "u1").pass);
        let c = CheckerSpec::AnswerEquals {
            expected_normalized: "apache 2.0".into(),
        };
        let r = evaluate(&c, d.path(), "u1");
        assert!(!r.pass);
        assert!(!r.diagnostic.contains("apache"));
    }

    #[test]
    fn missing_file_fails_with_diagnostic() {
        let d = ws(&[]);
        let c = CheckerSpec::KeyPresent {
            file: "m.meta".into(),
            key: "license".into(),
            expected_value: "MIT".into(),
        };
        let r = evaluate(&c, d.path(), "u1");
        assert!(!r.pass);
        assert!(r.diagnostic.contains("missing"));
    }

    #[test]
    fn digest_and_strip() {
        let original = "line one\nline two\n";
        let corrupted = "line one\n# LOCAL-EDIT: note\nline two\n";
        let d = ws(&[("f.md", corrupted)]);
        let c = CheckerSpec::FileDigest {
            file: "f.md".into(),
            expected_digest: sha256_hex(original.as_bytes()),
        };
        assert!(!evaluate(&c, d.path(), "u").pass);
        assert_eq!(strip_lines(corrupted, "# LOCAL-EDIT"), original);
    }

    #[test]
    fn metadata_rewrite() {
        let text = "name: a\nlicense: ???\n";
        assert_eq!(set_metadata_key(text, "license", "MIT"), "name: a\nlicense: MIT\n");
        assert_eq!(set_metadata_key("name: a\n", "license", "MIT"), "name: a\nlicense: MIT\n");
    }

    #[test]
    fn edit_ops_are_kind_specific() {
        use super::super::UnitKind;
        let op = EditOp::parse(r#"{"op":"keep_rows","count":3}"#).unwrap();
        assert!(op.allowed_for(UnitKind::CsvCountCheck));
        assert!(!op.allowed_for(UnitKind::CsvFieldCheck));
        assert!(EditOp::parse("keep 3 rows").is_err());
        assert_eq!(EditOp::parse(&op.to_payload()).unwrap(), op);
    }

    #[test]
    fn csv_roundtrip_quotes_when_needed() {
        let t = CsvTable::parse("Name,Note\n\"a, b\",x\n").unwrap();
        assert_eq!(t.rows[0][0], "a, b");
        assert_eq!(CsvTable::parse(&t.to_csv()).unwrap(), t);
    }
}
