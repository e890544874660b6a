//! Line-oriented N-Triples reader.
//!
//! Terms are reduced to dictionary keys: IRIs by their text, blank nodes as
//! `_:label`, literals by their quoted lexical form (language tags and
//! datatypes are dropped, so equal lexical forms share one node).

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Term<'a> {
    Iri(&'a str),
    Blank(&'a str),
    /// Lexical form exactly as written between the quotes (escapes kept).
    Literal(&'a str),
}

impl Term<'_> {
    /// Key under which the term is dictionary-encoded.
    pub fn key(&self) -> String {
        match *self {
            Term::Iri(s) => s.to_owned(),
            Term::Blank(s) => format!("_:{s}"),
            Term::Literal(s) => format!("\"{s}\""),
        }
    }
}

impl fmt::Display for Term<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(s) => write!(f, "<{s}>"),
            Term::Blank(s) => write!(f, "_:{s}"),
            Term::Literal(s) => write!(f, "\"{s}\""),
        }
    }
}

/// Parse failure; `column` is 1-based and counts bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntaxError {
    pub column: usize,
    pub message: String,
}

struct Cursor<'a> {
    line: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, SyntaxError> {
        Err(SyntaxError { column: self.pos + 1, message: message.into() })
    }

    fn peek(&self) -> Option<u8> {
        self.line.as_bytes().get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t')) {
            self.pos += 1;
        }
    }

    fn iri(&mut self) -> Result<&'a str, SyntaxError> {
        debug_assert_eq!(self.peek(), Some(b'<'));
        let start = self.pos + 1;
        match self.line[start..].find(|c: char| c == '>' || c == ' ' || c == '<' || c == '"') {
            Some(off) if self.line.as_bytes()[start + off] == b'>' => {
                self.pos = start + off + 1;
                Ok(&self.line[start..start + off])
            }
            Some(off) => {
                self.pos = start + off;
                self.err("invalid character in IRI")
            }
            None => {
                self.pos = self.line.len();
                self.err("unterminated IRI")
            }
        }
    }

    fn blank(&mut self) -> Result<&'a str, SyntaxError> {
        if !self.line[self.pos..].starts_with("_:") {
            return self.err("expected blank node");
        }
        let start = self.pos + 2;
        let end = self.line[start..]
            .find(|c: char| c.is_whitespace() || c == '<' || c == '"')
            .map_or(self.line.len(), |o| start + o);
        // Labels never end in '.', so a trailing dot terminates the statement.
        let mut end = end;
        while end > start && self.line.as_bytes()[end - 1] == b'.' {
            end -= 1;
        }
        if end == start {
            self.pos = start;
            return self.err("empty blank node label");
        }
        self.pos = end;
        Ok(&self.line[start..end])
    }

    fn literal(&mut self) -> Result<&'a str, SyntaxError> {
        let bytes = self.line.as_bytes();
        let start = self.pos + 1;
        let mut i = start;
        loop {
            match bytes.get(i) {
                None => {
                    self.pos = i;
                    return self.err("unterminated literal");
                }
                Some(b'\\') => {
                    match bytes.get(i + 1) {
                        Some(b't' | b'b' | b'n' | b'r' | b'f' | b'"' | b'\'' | b'\\') => i += 2,
                        Some(b'u') => i += 6,
                        Some(b'U') => i += 10,
                        _ => {
                            self.pos = i;
                            return self.err("invalid escape in literal");
                        }
                    }
                    if i > bytes.len() {
                        self.pos = bytes.len();
                        return self.err("truncated escape in literal");
                    }
                }
                Some(b'"') => break,
                Some(_) => i += 1,
            }
        }
        let lexical = &self.line[start..i];
        self.pos = i + 1;
        match self.peek() {
            Some(b'@') => {
                let tag_start = self.pos + 1;
                let end = self.line[tag_start..]
                    .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
                    .map_or(self.line.len(), |o| tag_start + o);
                if end == tag_start {
                    self.pos = tag_start;
                    return self.err("empty language tag");
                }
                self.pos = end;
            }
            Some(b'^') => {
                if !self.line[self.pos..].starts_with("^^<") {
                    return self.err("expected ^^<datatype>");
                }
                self.pos += 2;
                self.iri()?;
            }
            _ => {}
        }
        Ok(lexical)
    }

    fn subject(&mut self) -> Result<Term<'a>, SyntaxError> {
        match self.peek() {
            Some(b'<') => self.iri().map(Term::Iri),
            Some(b'_') => self.blank().map(Term::Blank),
            _ => self.err("expected IRI or blank node as subject"),
        }
    }

    fn object(&mut self) -> Result<Term<'a>, SyntaxError> {
        match self.peek() {
            Some(b'<') => self.iri().map(Term::Iri),
            Some(b'_') => self.blank().map(Term::Blank),
            Some(b'"') => self.literal().map(Term::Literal),
            _ => self.err("expected IRI, blank node or literal as object"),
        }
    }
}

/// Parses one line. Blank lines and comments give `Ok(None)`.
pub fn parse_line(line: &str) -> Result<Option<(Term<'_>, Term<'_>, Term<'_>)>, SyntaxError> {
    let line = line.strip_suffix('\n').unwrap_or(line);
    let line = line.strip_suffix('\r').unwrap_or(line);
    let mut c = Cursor { line, pos: 0 };
    c.skip_ws();
    if matches!(c.peek(), None | Some(b'#')) {
        return Ok(None);
    }
    let s = c.subject()?;
    c.skip_ws();
    if c.peek() != Some(b'<') {
        return c.err("expected IRI as predicate");
    }
    let p = c.iri()?;
    c.skip_ws();
    let o = c.object()?;
    c.skip_ws();
    if c.peek() != Some(b'.') {
        return c.err("expected '.' after object");
    }
    c.pos += 1;
    c.skip_ws();
    if !matches!(c.peek(), None | Some(b'#')) {
        return c.err("unexpected content after '.'");
    }
    Ok(Some((s, Term::Iri(p), o)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_three_object_kinds() {
        let (s, p, o) = parse_line("<http://a> <http://p> <http://b> .").unwrap().unwrap();
        assert_eq!((s, p, o), (Term::Iri("http://a"), Term::Iri("http://p"), Term::Iri("http://b")));
        let (_, _, o) = parse_line("_:x <p> \"hi \\\"there\\\"\"@en-GB .").unwrap().unwrap();
        assert_eq!(o, Term::Literal("hi \\\"there\\\""));
        let (s, _, o) = parse_line("_:b1 <p> \"5\"^^<http://www.w3.org/2001/XMLSchema#int> . # note").unwrap().unwrap();
        assert_eq!((s, o), (Term::Blank("b1"), Term::Literal("5")));
        let (_, _, o) = parse_line("<a> <p> _:end.").unwrap().unwrap();
        assert_eq!(o, Term::Blank("end"));
    }

    #[test]
    fn skips_blank_and_comment_lines() {
        assert_eq!(parse_line("").unwrap(), None);
        assert_eq!(parse_line("   # comment").unwrap(), None);
        assert_eq!(parse_line("\r\n").unwrap(), None);
    }

    #[test]
    fn reports_columns() {
        assert_eq!(parse_line("<a> <p> <b>").unwrap_err().column, 12);
        assert_eq!(parse_line("<a> \"p\" <b> .").unwrap_err().column, 5);
        assert_eq!(parse_line("<a> <p> \"open .").unwrap_err().column, 16);
        assert_eq!(parse_line("<a b> <p> <c> .").unwrap_err().column, 3);
        assert_eq!(parse_line("<a> <p> <c> . extra").unwrap_err().column, 15);
    }

    #[test]
    fn literal_keys_ignore_tags() {
        let a = parse_line("<a> <p> \"x\"@en .").unwrap().unwrap().2;
        let b = parse_line("<a> <p> \"x\"^^<t> .").unwrap().unwrap().2;
        assert_eq!(a.key(), b.key());
        assert_ne!(a.key(), Term::Iri("x").key());
    }
}
