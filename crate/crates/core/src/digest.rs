use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    hex::encode(Sha256::digest(bytes.as_ref()))
}

/// First 16 hex digits of the SHA-256, used for content ids.
pub fn short_digest(bytes: impl AsRef<[u8]>) -> String {
    let mut s = sha256_hex(bytes);
    s.truncate(16);
    s
}

/// Stable 64-bit seed derived from a list of string parts.
pub fn seed_from(parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}
