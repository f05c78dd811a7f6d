//! Character-offset helpers. Every offset in this crate counts Unicode scalar
//! values, not bytes, so spans agree with tools that index strings by code point.

/// Slice `text` by 0-based half-open character offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let begin = indices.nth(start)?;
    let finish = if end == start {
        begin
    } else {
        indices.nth(end - start - 1)?
    };
    Some(&text[begin..finish])
}

pub fn char_len(text: &str) -> usize {
    text.chars().count()
}
