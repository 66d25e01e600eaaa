//! Tolerant tokenizer for Dafny source.
//!
//! Never fails: unterminated strings and comments run to end of input,
//! unknown bytes become single-character punctuation.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    Char,
    Punct,
    LineComment,
    BlockComment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }

    pub fn is_comment(&self) -> bool {
        matches!(self.kind, TokenKind::LineComment | TokenKind::BlockComment)
    }
}

const MULTI_PUNCT: &[&str] = &[
    "<==>", "==>", "<==", ":=", "==", "!=", "<=", ">=", "&&", "||", "=>", "::", "..", ":|",
];

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\'' || c == '?'
}

pub fn tokenize(src: &str) -> Vec<Token> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < src.len() {
        let c = src[i..].chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let start = i;
        let kind;
        if src[i..].starts_with("//") {
            let end = src[i..].find('\n').map_or(src.len(), |n| i + n);
            // exclude a trailing carriage return from the comment text
            let end = if end > i && bytes[end - 1] == b'\r' {
                end - 1
            } else {
                end
            };
            i = end;
            kind = TokenKind::LineComment;
        } else if src[i..].starts_with("/*") {
            let mut depth = 0usize;
            while i < src.len() {
                if src[i..].starts_with("/*") {
                    depth += 1;
                    i += 2;
                } else if src[i..].starts_with("*/") {
                    depth -= 1;
                    i += 2;
                    if depth == 0 {
                        break;
                    }
                } else {
                    i += src[i..].chars().next().unwrap().len_utf8();
                }
            }
            kind = TokenKind::BlockComment;
        } else if c == '"' || (c == '@' && src[i + 1..].starts_with('"')) {
            let verbatim = c == '@';
            i += if verbatim { 2 } else { 1 };
            while i < src.len() {
                let ch = src[i..].chars().next().unwrap();
                if !verbatim && ch == '\\' {
                    i += 1;
                    if i < src.len() {
                        i += src[i..].chars().next().unwrap().len_utf8();
                    }
                    continue;
                }
                if ch == '"' {
                    if verbatim && src[i + 1..].starts_with('"') {
                        i += 2;
                        continue;
                    }
                    i += 1;
                    break;
                }
                if !verbatim && ch == '\n' {
                    break;
                }
                i += ch.len_utf8();
            }
            kind = TokenKind::Str;
        } else if c == '\'' && char_literal_len(&src[i..]).is_some() {
            i += char_literal_len(&src[i..]).unwrap();
            kind = TokenKind::Char;
        } else if is_ident_start(c) {
            while i < src.len() {
                let ch = src[i..].chars().next().unwrap();
                if !is_ident_continue(ch) {
                    break;
                }
                i += ch.len_utf8();
            }
            kind = TokenKind::Ident;
        } else if c.is_ascii_digit() {
            while i < src.len() {
                let ch = bytes[i] as char;
                let decimal_point =
                    ch == '.' && i + 1 < src.len() && (bytes[i + 1] as char).is_ascii_digit();
                if ch.is_ascii_alphanumeric() || ch == '_' || decimal_point {
                    i += 1;
                } else {
                    break;
                }
            }
            kind = TokenKind::Number;
        } else {
            let len = MULTI_PUNCT
                .iter()
                .find(|p| src[i..].starts_with(**p))
                .map_or(c.len_utf8(), |p| p.len());
            i += len;
            kind = TokenKind::Punct;
        }
        out.push(Token {
            kind,
            start,
            end: i,
        });
    }
    out
}

fn char_literal_len(s: &str) -> Option<usize> {
    let mut it = s.char_indices().skip(1);
    let (_, c) = it.next()?;
    if c == '\\' {
        // escapes such as '\n', '\'', '\u{1F600}', '\U{...}'
        let (_, _escaped) = it.next()?;
        for (i, ch) in it.take(12) {
            if ch == '\'' {
                return Some(i + 1);
            }
            if ch == '\n' {
                return None;
            }
        }
        None
    } else if c == '\'' || c == '\n' {
        None
    } else {
        let after = 1 + c.len_utf8();
        s[after..].starts_with('\'').then_some(after + 1)
    }
}

/// Maps byte offsets to 1-based line/column positions.
#[derive(Debug, Clone)]
pub struct LineIndex {
    starts: Vec<usize>,
    len: usize,
}

impl LineIndex {
    pub fn new(src: &str) -> Self {
        let mut starts = vec![0];
        for (i, b) in src.bytes().enumerate() {
            if b == b'\n' {
                starts.push(i + 1);
            }
        }
        Self {
            starts,
            len: src.len(),
        }
    }

    /// 1-based line containing `offset`.
    pub fn line_of(&self, offset: usize) -> usize {
        match self.starts.binary_search(&offset) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
    }

    pub fn position(&self, src: &str, offset: usize) -> (usize, usize) {
        let mut offset = offset.min(src.len());
        while !src.is_char_boundary(offset) {
            offset -= 1;
        }
        let line = self.line_of(offset);
        let start = self.starts[line - 1];
        let col = src[start..offset].chars().count() + 1;
        (line, col)
    }

    pub fn line_start(&self, line: usize) -> usize {
        self.starts[line - 1]
    }

    /// Byte offset just past the line's content (before its newline).
    pub fn line_end(&self, src: &str, line: usize) -> usize {
        let end = if line < self.starts.len() {
            self.starts[line] - 1
        } else {
            self.len
        };
        if end > self.starts[line - 1] && src.as_bytes()[end - 1] == b'\r' {
            end - 1
        } else {
            end
        }
    }

    pub fn line_count(&self) -> usize {
        if self.len == 0 {
            0
        } else if *self.starts.last().unwrap() == self.len {
            self.starts.len() - 1
        } else {
            self.starts.len()
        }
    }
}
