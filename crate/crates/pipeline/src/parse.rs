//! Structured-output parsing with one bounded repair attempt.

use serde::de::DeserializeOwned;
use serde_json::Value;

/// Parses `text` as a JSON document. On failure, strips markdown fences and
/// anything outside the outermost `{...}` and tries once more.
pub fn parse_document(text: &str) -> Result<Value, String> {
    match serde_json::from_str::<Value>(text.trim()) {
        Ok(v) => Ok(v),
        Err(first) => {
            let repaired = repair(text).ok_or_else(|| first.to_string())?;
            serde_json::from_str(repaired).map_err(|_| first.to_string())
        }
    }
}

/// [`parse_document`] followed by typed decoding.
pub fn parse_as<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let doc = parse_document(text)?;
    serde_json::from_value(doc).map_err(|e| e.to_string())
}

fn repair(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    (end > start).then(|| &text[start..=end])
}

/// Yields each complete object directly inside the first array of a
/// streamed document, as soon as its closing brace arrives.
#[derive(Debug, Default)]
pub struct ArrayObjectScanner {
    buf: String,
    pos: usize,
    depth: Vec<char>,
    in_string: bool,
    escaped: bool,
    start: Option<usize>,
    array_seen: bool,
}

impl ArrayObjectScanner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, fragment: &str) -> Vec<String> {
        self.buf.push_str(fragment);
        let mut out = Vec::new();
        let bytes = self.buf.as_bytes();
        while self.pos < bytes.len() {
            let b = bytes[self.pos];
            let i = self.pos;
            self.pos += 1;
            if self.in_string {
                if self.escaped {
                    self.escaped = false;
                } else if b == b'\\' {
                    self.escaped = true;
                } else if b == b'"' {
                    self.in_string = false;
                }
                continue;
            }
            match b {
                b'"' => self.in_string = true,
                b'[' => {
                    self.depth.push('[');
                }
                b'{' => {
                    if self.is_item_level() {
                        self.start = Some(i);
                    }
                    self.depth.push('{');
                }
                b'}' => {
                    self.depth.pop();
                    if self.is_item_level() {
                        if let Some(s) = self.start.take() {
                            out.push(self.buf[s..=i].to_string());
                        }
                    }
                }
                b']' => {
                    if self.is_item_level() {
                        self.array_seen = true;
                    }
                    self.depth.pop();
                }
                _ => {}
            }
        }
        out
    }

    /// Inside the first array, outside any item.
    fn is_item_level(&self) -> bool {
        !self.array_seen && self.depth.last() == Some(&'[') && self.depth.iter().filter(|c| **c == '[').count() == 1
    }
}
