//! Canonical JSON and hashing helpers shared by transcripts and cache keys.

use alloc::string::String;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// JSON with object keys sorted at every level.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    // serde_json's default map is a BTreeMap, so going through `Value` sorts keys.
    let v = serde_json::to_value(value).expect("serializable value");
    serde_json::to_string(&v).expect("json value always serializes")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
