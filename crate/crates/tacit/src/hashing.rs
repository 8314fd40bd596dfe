//! Deterministic identifiers, digests, and seed derivation.

use sha2::{Digest, Sha256};

/// Full SHA-256 hex digest of raw bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Short (16 hex char) content id over tagged parts.
///
/// Parts are length-prefixed before hashing so that ("ab","c") and ("a","bc")
/// cannot collide.
pub fn short_id(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    hex::encode(&hasher.finalize()[..8])
}

/// Derive a 64-bit RNG seed from tagged parts.
pub fn derive_seed(parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// SHA-256 hex digest of a file's bytes.
pub fn file_digest(path: &std::path::Path) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_id_is_stable_and_boundary_safe() {
        assert_eq!(short_id(&["a", "b"]), short_id(&["a", "b"]));
        assert_ne!(short_id(&["ab", "c"]), short_id(&["a", "bc"]));
        assert_eq!(short_id(&["x"]).len(), 16);
    }

    #[test]
    fn derive_seed_differs_by_tag() {
        assert_ne!(derive_seed(&["s", "1"]), derive_seed(&["s", "2"]));
    }
}
