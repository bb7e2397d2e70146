//! Output-directory manifest: one `<sha256>  <name>` line per file, sorted
//! by name, so a finished run can be audited for completeness and bit-level
//! reproducibility.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "MANIFEST";

pub fn write_manifest(dir: &Path) -> Result<()> {
    let mut names: Vec<String> = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let entry = entry?;
        if !entry.file_type()?.is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if name != MANIFEST_NAME {
            names.push(name);
        }
    }
    names.sort();
    let mut out = fs::File::create(dir.join(MANIFEST_NAME))?;
    for name in names {
        let bytes = fs::read(dir.join(&name))?;
        let hash = Sha256::digest(&bytes);
        writeln!(out, "{:x}  {name}", hash)?;
    }
    Ok(())
}
