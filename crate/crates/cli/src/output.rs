use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Command, Failure};

pub const ECHO_FILE: &str = "config-echo.json";
pub const CHECKSUM_FILE: &str = "checksums.txt";

/// `--threads` of this process, recorded in the echo.
pub static THREADS: OnceLock<Option<usize>> = OnceLock::new();

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

pub fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))
}

#[derive(Serialize, Deserialize)]
pub struct Echo {
    pub version: String,
    pub threads: Option<usize>,
    #[serde(flatten)]
    pub command: Command,
}

pub fn write_echo(dir: &Path, command: &Command) -> Result<(), Failure> {
    write_json(
        &dir.join(ECHO_FILE),
        &Echo {
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads: THREADS.get().copied().flatten(),
            command: command.clone(),
        },
    )
}

fn files_under(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            files_under(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

/// `sha256sum`-style lines for every file under `dir`, sorted by path. The
/// echo and the checksum file itself are left out since the echo records the
/// output path.
pub fn checksums(dir: &Path) -> Result<String, Failure> {
    let mut files = Vec::new();
    files_under(dir, &mut files)?;
    let mut rel: Vec<(String, PathBuf)> = files
        .into_iter()
        .filter_map(|p| {
            let r = p.strip_prefix(dir).ok()?.to_string_lossy().replace('\\', "/");
            (r != ECHO_FILE && r != CHECKSUM_FILE).then_some((r, p))
        })
        .collect();
    rel.sort();
    let mut out = String::new();
    for (r, p) in rel {
        let bytes = fs::read(&p)?;
        out.push_str(&format!("{}  {r}\n", hex::encode(Sha256::digest(&bytes))));
    }
    Ok(out)
}

pub fn write_checksums(dir: &Path) -> Result<(), Failure> {
    let sums = checksums(dir)?;
    fs::write(dir.join(CHECKSUM_FILE), sums)?;
    Ok(())
}
