use std::io::Write;
use std::path::Path;

use super::{KbError, KnowledgeBase, Triplet};
use crate::Scalar;

/// One JSON object per line, keys `id, fragment, sql, description,
/// embedding, provenance`, in insertion order. An empty knowledge base is an
/// empty file.
pub fn serialize_triplets<F: Scalar>(triplets: &[Triplet<F>]) -> String {
    let mut out = String::new();
    for t in triplets {
        out.push_str(&serde_json::to_string(t).expect("triplets serialize"));
        out.push('\n');
    }
    out
}

/// Writes the triplets to `path` atomically (temporary file, then rename).
pub fn persist_kb<F: Scalar>(kb: &KnowledgeBase<F>, path: &Path) -> Result<(), KbError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(serialize_triplets(kb.triplets()).as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| KbError::Io(e.error))?;
    Ok(())
}

/// Parses triplet lines. Blank lines are skipped; the first bad line is
/// reported with its 1-based number.
pub fn load_triplets<F: Scalar>(text: &str, dimension: Option<usize>) -> Result<Vec<Triplet<F>>, KbError> {
    let mut dimension = dimension;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let t: Triplet<F> =
            serde_json::from_str(line).map_err(|e| KbError::BadLine { line: line_no, message: e.to_string() })?;
        let expected = *dimension.get_or_insert(t.embedding.len());
        if t.embedding.len() != expected {
            return Err(KbError::BadLine {
                line: line_no,
                message: format!("embedding has {} values, expected {expected}", t.embedding.len()),
            });
        }
        if t.sql.trim().is_empty() {
            return Err(KbError::BadLine { line: line_no, message: "empty sql".into() });
        }
        out.push(t);
    }
    Ok(out)
}

/// Loads a knowledge-base file into a fresh base of the given dimension.
pub fn load_kb<F: Scalar>(path: &Path, dimension: usize) -> Result<KnowledgeBase<F>, KbError> {
    let text = std::fs::read_to_string(path)?;
    let mut kb = KnowledgeBase::new(dimension);
    for t in load_triplets(&text, Some(dimension))? {
        kb.insert_triplet(t)?;
    }
    Ok(kb)
}
