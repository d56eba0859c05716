//! Run manifests: the command, a configuration snapshot and SHA-256
//! checksums of every input read. No timestamps, so identical runs give
//! identical manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use typomap_core::PipelineConfig;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Input checksums keyed by display path.
pub fn format_manifest(command: &str, cfg: &PipelineConfig, inputs: &BTreeMap<String, String>) -> String {
    let mut out = format!("command = {command}\n\n[config]\n");
    out.push_str(&cfg.to_text());
    out.push_str("\n[inputs]\n");
    for (path, sum) in inputs {
        let _ = writeln!(out, "{sum}  {path}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_sections_and_order() {
        let mut inputs = BTreeMap::new();
        inputs.insert("b.txt".to_string(), sha256_hex(b"b"));
        inputs.insert("a.txt".to_string(), sha256_hex(b"a"));
        let m = format_manifest("map", &PipelineConfig::default(), &inputs);
        assert!(m.starts_with("command = map\n\n[config]\npivot") || m.starts_with("command = map\n\n[config]\nsource"));
        let a = m.find("  a.txt").unwrap();
        let b = m.find("  b.txt").unwrap();
        assert!(a < b);
        assert_eq!(m, format_manifest("map", &PipelineConfig::default(), &inputs));
    }
}
