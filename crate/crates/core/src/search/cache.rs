//! Persistent memo of search results.
//!
//! One record per line: `spec-hash TAB status TAB max_length TAB witness`.
//! The hash covers the sorted forbidden set, the threshold and the cap, and is
//! prefixed by [`HASH_VERSION`] so records written under an older scheme can be
//! told apart and evicted by [`cache_gc`].

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::{AvoidanceSpec, SearchOutcome, SearchStatus};
use crate::error::{Error, Result};
use crate::word::Word;

pub const HASH_VERSION: &str = "v1";

pub fn spec_hash(spec: &AvoidanceSpec, cap: usize) -> String {
    let digest = Sha256::digest(format!("{};cap={cap}", spec.canonical()).as_bytes());
    let hex: String = digest[..12].iter().map(|b| format!("{b:02x}")).collect();
    format!("{HASH_VERSION}-{hex}")
}

struct Record {
    hash: String,
    outcome: SearchOutcome,
}

fn parse_line(line: &str, lineno: usize) -> Result<Record> {
    let corrupt = |message: &str| Error::CorruptCache { line: lineno, message: message.to_string() };
    let fields: Vec<&str> = line.split('\t').collect();
    let [hash, status, max_length, witness] = fields[..] else {
        return Err(corrupt("expected 4 tab-separated fields"));
    };
    if hash.is_empty() || !hash.contains('-') {
        return Err(corrupt("malformed spec hash"));
    }
    let status = match status {
        "exhausted" => SearchStatus::Exhausted,
        "cap-reached" => SearchStatus::CapReached,
        _ => return Err(corrupt("unknown status")),
    };
    let max_length: usize = max_length.parse().map_err(|_| corrupt("bad max_length"))?;
    let witness: Word = witness.parse().map_err(|_| corrupt("bad witness word"))?;
    if witness.len() != max_length {
        return Err(corrupt("witness length differs from max_length"));
    }
    Ok(Record { hash: hash.to_string(), outcome: SearchOutcome { status, max_length, witness } })
}

fn format_record(hash: &str, outcome: &SearchOutcome) -> String {
    format!("{hash}\t{}\t{}\t{}\n", outcome.status, outcome.max_length, outcome.witness)
}

fn read_records(path: &Path) -> Result<Vec<Record>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_line(&line, i + 1)?);
    }
    Ok(out)
}

/// File-backed cache; lookups are served from memory, writes are appended under a lock.
pub struct SearchCache {
    path: PathBuf,
    state: Mutex<HashMap<String, SearchOutcome>>,
}

impl SearchCache {
    pub fn open(path: impl Into<PathBuf>) -> Result<SearchCache> {
        let path = path.into();
        let records = read_records(&path)?
            .into_iter()
            .filter(|r| r.hash.starts_with(&format!("{HASH_VERSION}-")))
            .map(|r| (r.hash, r.outcome))
            .collect();
        Ok(SearchCache { path, state: Mutex::new(records) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, hash: &str) -> Option<SearchOutcome> {
        self.state.lock().expect("cache lock").get(hash).cloned()
    }

    pub fn put(&self, hash: &str, outcome: &SearchOutcome) -> Result<()> {
        let mut state = self.state.lock().expect("cache lock");
        if state.contains_key(hash) {
            return Ok(());
        }
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&self.path)?;
        file.write_all(format_record(hash, outcome).as_bytes())?;
        state.insert(hash.to_string(), outcome.clone());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Drops records written under another hash version; returns how many were removed.
pub fn cache_gc(path: &Path) -> Result<usize> {
    let records = read_records(path)?;
    let current = format!("{HASH_VERSION}-");
    let (keep, stale): (Vec<Record>, Vec<Record>) = records.into_iter().partition(|r| r.hash.starts_with(&current));
    if stale.is_empty() {
        return Ok(0);
    }
    let body: String = keep.iter().map(|r| format_record(&r.hash, &r.outcome)).collect();
    fs::write(path, body)?;
    Ok(stale.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::longest_avoiding;

    fn spec() -> AvoidanceSpec {
        AvoidanceSpec::five_halves(["11", "12", "21", "22", "010"].iter().map(|s| Word::lit(s))).unwrap()
    }

    #[test]
    fn hash_is_stable_and_order_independent() {
        let a = spec();
        let b = AvoidanceSpec::five_halves(["010", "22", "21", "12", "11"].iter().map(|s| Word::lit(s))).unwrap();
        assert_eq!(spec_hash(&a, 50), spec_hash(&b, 50));
        assert_ne!(spec_hash(&a, 50), spec_hash(&a, 51));
        assert!(spec_hash(&a, 50).starts_with("v1-"));
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.tsv");
        let outcome = longest_avoiding(&spec(), 50);
        let key = spec_hash(&spec(), 50);
        {
            let cache = SearchCache::open(&path).unwrap();
            assert!(cache.get(&key).is_none());
            cache.put(&key, &outcome).unwrap();
        }
        let cache = SearchCache::open(&path).unwrap();
        assert_eq!(cache.get(&key), Some(outcome));
        assert_eq!(cache_gc(&path).unwrap(), 0);
    }

    #[test]
    fn gc_evicts_stale_versions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.tsv");
        let key = spec_hash(&spec(), 50);
        fs::write(&path, format!("{key}\texhausted\t3\t012\nv0-abcdef\texhausted\t2\t01\n")).unwrap();
        assert_eq!(cache_gc(&path).unwrap(), 1);
        assert_eq!(fs::read_to_string(&path).unwrap(), format!("{key}\texhausted\t3\t012\n"));
        assert_eq!(cache_gc(&path).unwrap(), 0);
    }

    #[test]
    fn corrupt_lines_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.tsv");
        fs::write(&path, "v1-00\texhausted\t3\t012\nnot a record\n").unwrap();
        match cache_gc(&path) {
            Err(Error::CorruptCache { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected corrupt cache, got {other:?}"),
        }
        assert!(SearchCache::open(&path).is_err());
    }
}
