use std::fmt;

use md5::{Digest, Md5};
use serde::{Deserialize, Deserializer, Serialize};

use super::FieldDef;

/// Order-invariant 128-bit structural signature of a field set, as 32
/// lowercase hex characters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct SchemaSignature(String);

impl SchemaSignature {
    pub fn parse(hex: &str) -> Option<Self> {
        let ok = hex.len() == 32 && hex.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        ok.then(|| SchemaSignature(hex.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// First eight hex characters, used for display names.
    pub fn short(&self) -> &str {
        &self.0[..8]
    }
}

impl fmt::Display for SchemaSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for SchemaSignature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        SchemaSignature::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("invalid signature `{s}`")))
    }
}

/// `name:type` renderings sorted by code point and joined with `|`.
pub fn canonical_string(fields: &[FieldDef]) -> String {
    let mut rendered: Vec<String> = fields.iter().map(|f| format!("{}:{}", f.name, f.data_type)).collect();
    // UTF-8 byte order coincides with code-point order.
    rendered.sort_unstable();
    rendered.join("|")
}

pub fn md5_hex(bytes: &[u8]) -> String {
    Md5::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn generate_signature(fields: &[FieldDef]) -> SchemaSignature {
    SchemaSignature(md5_hex(canonical_string(fields).as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f(name: &str, ty: &str) -> FieldDef {
        FieldDef::new(name, ty)
    }

    #[test]
    fn canonical_form_sorts_renderings() {
        let fields = [f("user_id", "INTEGER"), f("name", "TEXT")];
        assert_eq!(canonical_string(&fields), "name:TEXT|user_id:INTEGER");
    }

    #[test]
    fn known_digests() {
        // Reference values from GNU md5sum:
        //   printf '' | md5sum
        //   printf 'name:TEXT|user_id:INTEGER' | md5sum
        assert_eq!(generate_signature(&[]).as_str(), "d41d8cd98f00b204e9800998ecf8427e");
        let sig = generate_signature(&[f("user_id", "INTEGER"), f("name", "TEXT")]);
        assert_eq!(sig.as_str(), "7428b537debb7b734870eb008c86c950");
        assert_eq!(sig, generate_signature(&[f("name", "TEXT"), f("user_id", "INTEGER")]));
    }

    #[test]
    fn case_and_type_matter() {
        let a = generate_signature(&[f("Name", "TEXT")]);
        let b = generate_signature(&[f("name", "TEXT")]);
        let c = generate_signature(&[f("name", "text")]);
        assert_ne!(a, b);
        assert_ne!(b, c);
    }

    #[test]
    fn parse_rejects_bad_hex() {
        assert!(SchemaSignature::parse("d41d8cd98f00b204e9800998ecf8427e").is_some());
        assert!(SchemaSignature::parse("D41D8CD98F00B204E9800998ECF8427E").is_none());
        assert!(SchemaSignature::parse("d41d8c").is_none());
    }

    proptest! {
        #[test]
        fn signature_is_column_order_invariant(
            names in proptest::collection::btree_set("[a-z_]{1,6}", 0..8),
            seed in any::<u64>(),
        ) {
            let fields: Vec<FieldDef> = names.iter().enumerate()
                .map(|(i, n)| f(n, ["INTEGER", "TEXT", "REAL"][i % 3])).collect();
            let mut shuffled = fields.clone();
            // deterministic Fisher-Yates driven by the seed
            let mut s = seed;
            for i in (1..shuffled.len()).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                shuffled.swap(i, (s >> 33) as usize % (i + 1));
            }
            prop_assert_eq!(generate_signature(&fields), generate_signature(&shuffled));
            prop_assert_eq!(generate_signature(&fields).as_str().len(), 32);
        }
    }
}
