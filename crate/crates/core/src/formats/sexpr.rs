//! A minimal s-expression reader that keeps source positions.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SExpr {
    Atom(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Atom(_, p) | SExpr::List(_, p) => *p,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(s, _) => Some(s),
            SExpr::List(..) => None,
        }
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        let p = self.pos();
        Error::parse(p.line, p.column, message)
    }
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl Reader<'_> {
    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            column: self.column,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn read(&mut self) -> Result<Option<SExpr>> {
        self.skip_trivia();
        let start = self.pos();
        match self.chars.peek().copied() {
            None => Ok(None),
            Some(')') => Err(Error::parse(start.line, start.column, "unexpected ')'")),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.chars.peek() {
                        None => {
                            return Err(Error::parse(start.line, start.column, "unclosed '('"));
                        }
                        Some(')') => {
                            self.bump();
                            return Ok(Some(SExpr::List(items, start)));
                        }
                        Some(_) => items.push(self.read()?.expect("input is not exhausted")),
                    }
                }
            }
            Some(_) => {
                let mut atom = String::new();
                while let Some(&c) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    atom.push(c);
                    self.bump();
                }
                Ok(Some(SExpr::Atom(atom, start)))
            }
        }
    }
}

/// Reads every top-level expression in `text`.
pub fn parse_all(text: &str) -> Result<Vec<SExpr>> {
    let mut reader = Reader {
        chars: text.chars().peekable(),
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    while let Some(e) = reader.read()? {
        out.push(e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_lists_and_positions() {
        let e = parse_all("; comment\n(assert (<= X_0 1.5))\n").unwrap();
        assert_eq!(e.len(), 1);
        let SExpr::List(items, pos) = &e[0] else { panic!() };
        assert_eq!(pos, &Pos { line: 2, column: 1 });
        assert_eq!(items[0].as_atom(), Some("assert"));
        assert_eq!(items[1].pos(), Pos { line: 2, column: 9 });
    }

    #[test]
    fn unbalanced_input_reports_position() {
        match parse_all("(a (b c)\n") {
            Err(Error::Parse { line: 1, column: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse_all("a)\n") {
            Err(Error::Parse { line: 1, column: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
