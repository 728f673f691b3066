//! Artifact files. Every write goes to a temporary file in the target
//! directory and is renamed into place, so a final name never holds a
//! partial artifact.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

pub const CASCADE: &str = "cascade.json";
pub const CASCADE_CSV: &str = "cascade.csv";
pub const FSTAR: &str = "fstar.json";
pub const SPECTRUM: &str = "spectrum.json";
pub const TOWER: &str = "tower.json";
pub const CANTOR: &str = "cantor.json";
pub const PIECES: &str = "pieces.jsonl";
pub const RIGIDITY: &str = "rigidity.json";
pub const CLASS_TOWER: &str = "class_tower.json";
pub const DISTORTION: &str = "distortion.json";
pub const REPORT: &str = "report.json";

pub fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

pub fn exists(dir: &Path, name: &str) -> bool {
    path(dir, name).is_file()
}

pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let target = path(dir, name);
    let mut builder = tempfile::Builder::new();
    builder.prefix(".tmp-");
    #[cfg(unix)]
    builder.permissions(std::os::unix::fs::PermissionsExt::from_mode(0o644));
    let mut tmp = builder.tempfile_in(dir).map_err(|e| CliError::io("creating temp file", e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(format!("writing {name}"), e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(format!("syncing {name}"), e))?;
    tmp.persist(&target).map_err(|e| CliError::io(format!("renaming into {}", target.display()), e.error))?;
    Ok(target)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| CliError::Json { name: name.into(), source })?;
    bytes.push(b'\n');
    write_atomic(dir, name, &bytes)
}

pub fn read_bytes(dir: &Path, name: &str) -> Result<Vec<u8>> {
    let p = path(dir, name);
    if !p.is_file() {
        return Err(CliError::MissingArtifact { name: name.into(), path: dir.to_path_buf() });
    }
    std::fs::read(&p).map_err(|e| CliError::io(format!("reading {}", p.display()), e))
}

pub fn read_json<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T> {
    let bytes = read_bytes(dir, name)?;
    serde_json::from_slice(&bytes).map_err(|source| CliError::Json { name: name.into(), source })
}

/// One JSON value per line.
pub fn write_jsonl<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<PathBuf> {
    let mut bytes = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut bytes, r).map_err(|source| CliError::Json { name: name.into(), source })?;
        bytes.push(b'\n');
    }
    write_atomic(dir, name, &bytes)
}

pub fn read_jsonl<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<Vec<T>> {
    let bytes = read_bytes(dir, name)?;
    bytes
        .split(|b| *b == b'\n')
        .filter(|l| !l.is_empty())
        .map(|l| serde_json::from_slice(l).map_err(|source| CliError::Json { name: name.into(), source }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        write_json(dir.path(), "a.json", &vec![1, 2]).unwrap();
        write_json(dir.path(), "a.json", &vec![3]).unwrap();
        let v: Vec<i32> = read_json(dir.path(), "a.json").unwrap();
        assert_eq!(v, vec![3]);
        let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("a.json")]);
    }

    #[test]
    fn jsonl_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        write_jsonl(dir.path(), "r.jsonl", &[(1, "a"), (2, "b")]).unwrap();
        let back: Vec<(i32, String)> = read_jsonl(dir.path(), "r.jsonl").unwrap();
        assert_eq!(back, vec![(1, "a".to_string()), (2, "b".to_string())]);
        assert!(matches!(read_bytes(dir.path(), "none.json"), Err(CliError::MissingArtifact { .. })));
    }
}
