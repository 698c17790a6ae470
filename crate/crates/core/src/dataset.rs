//! Input tables and their metadata.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kv;
use crate::lexicon::LanguageTag;
use crate::text::split_qualified;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DatasetId(pub String);

impl DatasetId {
    pub fn new(id: impl Into<String>) -> Self {
        DatasetId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("csv line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("csv row {row} has {found} cells, header has {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("column '{column}' uses undeclared namespace prefix '{prefix}'")]
    UnknownPrefix { column: String, prefix: String },
    #[error("metadata line {line}: {message}")]
    Meta { line: usize, message: String },
    #[error("metadata is missing required key '{0}'")]
    MissingKey(&'static str),
}

/// Per-dataset metadata, read from a `key = value` file:
///
/// ```text
/// name = Car
/// language = en
/// ns.schema = ns:schema
/// identifying.0 = true
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub language: LanguageTag,
    pub namespaces: BTreeMap<String, LanguageTag>,
    /// Column overrides keyed by index or header text.
    pub identifying: BTreeMap<String, bool>,
}

impl DatasetMeta {
    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let entries = kv::parse(text).map_err(|(line, message)| DatasetError::Meta { line, message })?;
        let mut name = None;
        let mut language = None;
        let mut namespaces = BTreeMap::new();
        let mut identifying = BTreeMap::new();
        for e in entries {
            let bad = |message: String| DatasetError::Meta {
                line: e.line,
                message,
            };
            if e.key == "name" {
                if e.value.is_empty() {
                    return Err(bad("empty dataset name".into()));
                }
                name = Some(e.value.clone());
            } else if e.key == "language" {
                language = Some(LanguageTag::new(e.value.clone()).map_err(|err| bad(err.to_string()))?);
            } else if let Some(prefix) = e.key.strip_prefix("ns.") {
                let tag = if e.value.starts_with("ns:") {
                    LanguageTag::new(e.value.clone())
                } else {
                    LanguageTag::namespace(&e.value)
                }
                .map_err(|err| bad(err.to_string()))?;
                namespaces.insert(prefix.to_string(), tag);
            } else if let Some(column) = e.key.strip_prefix("identifying.") {
                let flag = match e.value.as_str() {
                    "true" | "yes" => true,
                    "false" | "no" => false,
                    other => return Err(bad(format!("expected true/false, got '{other}'"))),
                };
                identifying.insert(column.to_string(), flag);
            } else {
                return Err(bad(format!("unknown key '{}'", e.key)));
            }
        }
        Ok(DatasetMeta {
            name: name.ok_or(DatasetError::MissingKey("name"))?,
            language: language.ok_or(DatasetError::MissingKey("language"))?,
            namespaces,
            identifying,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub id: DatasetId,
    pub name: String,
    pub language: LanguageTag,
    pub namespaces: BTreeMap<String, LanguageTag>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Identifying overrides by column index.
    #[serde(default)]
    pub identifying: BTreeMap<usize, bool>,
}

impl Dataset {
    /// Reads an RFC-4180 table whose first record is the header.
    pub fn from_csv(id: DatasetId, csv_text: &str, meta: DatasetMeta) -> Result<Self, DatasetError> {
        let csv_text = csv_text.strip_prefix('\u{feff}').unwrap_or(csv_text);
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(csv_text.as_bytes());
        let mut records = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| DatasetError::Csv {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
        }
        let mut records = records.into_iter();
        let columns = records.next().unwrap_or_default();
        let rows: Vec<Vec<String>> = records.collect();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(DatasetError::Ragged {
                    row: i + 1,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
        }
        for column in &columns {
            if let Some((prefix, _)) = split_qualified(column) {
                if !meta.namespaces.contains_key(prefix) {
                    return Err(DatasetError::UnknownPrefix {
                        column: column.clone(),
                        prefix: prefix.to_string(),
                    });
                }
            }
        }
        let mut identifying = BTreeMap::new();
        for (key, flag) in &meta.identifying {
            let index = match key.parse::<usize>() {
                Ok(i) if i < columns.len() => i,
                _ => columns.iter().position(|c| c == key).ok_or_else(|| DatasetError::Meta {
                    line: 0,
                    message: format!("identifying override names unknown column '{key}'"),
                })?,
            };
            identifying.insert(index, *flag);
        }
        Ok(Dataset {
            id,
            name: meta.name,
            language: meta.language,
            namespaces: meta.namespaces,
            columns,
            rows,
            identifying,
        })
    }

    /// Language a surface form resolves to: the namespace pseudo-language for
    /// a declared `prefix:` qualifier, the dataset language otherwise.
    pub fn resolve<'a>(&'a self, surface: &'a str) -> (&'a LanguageTag, &'a str) {
        if let Some((prefix, local)) = split_qualified(surface) {
            if let Some(tag) = self.namespaces.get(prefix) {
                return (tag, local);
            }
        }
        (&self.language, surface)
    }

    pub fn cell(&self, row: usize, column: usize) -> Option<&str> {
        self.rows.get(row).and_then(|r| r.get(column)).map(String::as_str)
    }

    /// Every cell value, trimmed; used for fresh-id collision checks.
    pub fn cell_values(&self) -> BTreeSet<&str> {
        self.rows
            .iter()
            .flat_map(|r| r.iter().map(|c| c.trim()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(text: &str) -> DatasetMeta {
        DatasetMeta::parse(text).unwrap()
    }

    #[test]
    fn reads_table_with_namespaces() {
        let m = meta("name = Car\nlanguage = en\nns.schema = ns:schema\nidentifying.Nameplate = true\n");
        let d = Dataset::from_csv(
            DatasetId::new("d1"),
            "Nameplate,schema:speed\nFP372MK,150\n",
            m,
        )
        .unwrap();
        assert_eq!(d.columns, vec!["Nameplate", "schema:speed"]);
        assert_eq!(d.rows, vec![vec!["FP372MK".to_string(), "150".to_string()]]);
        assert_eq!(d.identifying.get(&0), Some(&true));
        let (lang, local) = d.resolve("schema:speed");
        assert_eq!(lang.as_str(), "ns:schema");
        assert_eq!(local, "speed");
        assert_eq!(d.resolve("Nameplate").0.as_str(), "en");
    }

    #[test]
    fn ragged_rows_report_row_number() {
        let m = meta("name = T\nlanguage = en\n");
        let err = Dataset::from_csv(DatasetId::new("d1"), "a,b\n1,2\n3\n", m).unwrap_err();
        assert!(matches!(err, DatasetError::Ragged { row: 2, expected: 2, found: 1 }), "{err}");
    }

    #[test]
    fn undeclared_prefix_rejected() {
        let m = meta("name = T\nlanguage = en\n");
        let err = Dataset::from_csv(DatasetId::new("d1"), "vso:VIN\nX\n", m).unwrap_err();
        assert!(matches!(err, DatasetError::UnknownPrefix { .. }));
    }

    #[test]
    fn quoted_fields() {
        let m = meta("name = T\nlanguage = it\n");
        let d = Dataset::from_csv(DatasetId::new("d1"), "\"Tipo di corpo\",x\n\"a, b\",\"say \"\"hi\"\"\"\n", m).unwrap();
        assert_eq!(d.rows[0], vec!["a, b", "say \"hi\""]);
    }

    #[test]
    fn meta_errors() {
        assert!(matches!(DatasetMeta::parse("language = en"), Err(DatasetError::MissingKey("name"))));
        assert!(matches!(
            DatasetMeta::parse("name = x\nlanguage = en\ncolour = red"),
            Err(DatasetError::Meta { line: 3, .. })
        ));
    }
}
