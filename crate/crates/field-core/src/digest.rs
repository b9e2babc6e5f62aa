use sha2::{Digest, Sha256};

/// 32-byte digest of a canonical config text. Stable for identical configs.
pub fn config_digest(canonical_config: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(canonical_config.as_bytes());
    hasher.finalize().into()
}
