//! Lock lists: one 0-based vertex index per line, `#` starts a comment.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub fn parse_locks(text: &str, num_vertices: usize, path: &Path) -> Result<Vec<bool>> {
    let mut locked = vec![false; num_vertices];
    for (n, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let v: usize = body
            .parse()
            .map_err(|_| Error::parse(path, n + 1, format!("expected a 0-based vertex index, found '{body}'")))?;
        if v >= num_vertices {
            return Err(Error::parse(path, n + 1, format!("vertex index {v} out of range 0..{num_vertices}")));
        }
        locked[v] = true;
    }
    Ok(locked)
}

pub fn read_locks(path: &Path, num_vertices: usize) -> Result<Vec<bool>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_locks(&text, num_vertices, path)
}

pub fn format_locks(locked: &[bool]) -> String {
    let mut s = String::from("# locked vertices, 0-based\n");
    for (v, _) in locked.iter().enumerate().filter(|(_, &l)| l) {
        s.push_str(&v.to_string());
        s.push('\n');
    }
    s
}
