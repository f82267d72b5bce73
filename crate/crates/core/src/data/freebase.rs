//! Replacement of Freebase identifiers in CFQ-style logical forms with short
//! readable keywords.

use std::sync::OnceLock;

use crate::error::{Error, Result};

const BUILTIN_TABLE: &str = include_str!("../../data/freebase_map.tsv");

/// How a key matches the input text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyMatch {
    /// Replace exactly the key.
    Exact,
    /// The key is a truncated identifier: replace it together with the rest
    /// of the identifier up to the next whitespace.
    Prefix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapEntry {
    pub key: String,
    pub value: String,
    pub matching: KeyMatch,
}

/// Identifier table applied longest-key-first, so `ns:film.film` never
/// clobbers `ns:film.film.directed_by`.
#[derive(Debug, Clone)]
pub struct IdentifierMap {
    entries: Vec<MapEntry>,
}

impl IdentifierMap {
    pub fn new(mut entries: Vec<MapEntry>) -> Result<Self> {
        if let Some(e) = entries.iter().find(|e| e.key.is_empty()) {
            return Err(Error::InvalidArgument(format!(
                "identifier map has an empty key (value `{}`)",
                e.value
            )));
        }
        // stable sort keeps file order among equal lengths
        entries.sort_by_key(|e| std::cmp::Reverse(e.key.len()));
        Ok(Self { entries })
    }

    /// Parse `key<TAB>value[<TAB>exact|prefix]` lines; `#` starts a comment.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "identifier map line {}: expected key<TAB>value",
                    i + 1
                )));
            }
            let matching = match cols.get(2).map(|s| s.trim()) {
                None | Some("") | Some("exact") => KeyMatch::Exact,
                Some("prefix") => KeyMatch::Prefix,
                Some(other) => {
                    return Err(Error::InvalidArgument(format!(
                        "identifier map line {}: unknown match mode `{other}`",
                        i + 1
                    )))
                }
            };
            entries.push(MapEntry {
                key: cols[0].to_string(),
                value: cols[1].to_string(),
                matching,
            });
        }
        Self::new(entries)
    }

    pub fn from_pairs<I, K, V>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        Self::new(
            pairs
                .into_iter()
                .map(|(k, v)| MapEntry {
                    key: k.into(),
                    value: v.into(),
                    matching: KeyMatch::Exact,
                })
                .collect(),
        )
    }

    /// The shipped CFQ table.
    pub fn builtin() -> &'static IdentifierMap {
        static TABLE: OnceLock<IdentifierMap> = OnceLock::new();
        TABLE.get_or_init(|| {
            IdentifierMap::from_tsv(BUILTIN_TABLE).expect("builtin identifier table parses")
        })
    }

    pub fn entries(&self) -> &[MapEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rewrite `lf`, replacing every key occurrence left to right. Text that
    /// matches no key is copied unchanged.
    pub fn apply(&self, lf: &str) -> String {
        let mut out = String::with_capacity(lf.len());
        let mut pos = 0;
        'scan: while pos < lf.len() {
            let rest = &lf[pos..];
            for e in &self.entries {
                if rest.starts_with(e.key.as_str()) {
                    out.push_str(&e.value);
                    let mut consumed = e.key.len();
                    if e.matching == KeyMatch::Prefix {
                        consumed += rest[consumed..]
                            .find(char::is_whitespace)
                            .unwrap_or(rest.len() - consumed);
                    }
                    pos += consumed;
                    continue 'scan;
                }
            }
            let ch = rest.chars().next().expect("pos is on a char boundary");
            out.push(ch);
            pos += ch.len_utf8();
        }
        out
    }
}

/// Apply `table` to `lf`. Unknown identifiers pass through untouched.
pub fn map_freebase_ids(lf: &str, table: &IdentifierMap) -> String {
    table.apply(lf)
}
