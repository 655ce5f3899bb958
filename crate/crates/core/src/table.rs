//! CSV field quoting.

/// `s` as a CSV field, quoted when it holds a comma, quote or newline.
pub(crate) fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
