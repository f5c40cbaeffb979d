//! Line-oriented s-expression reader and writer used by all textual formats.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexpr {
    Atom(String),
    List(Vec<Sexpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: unexpected ')'")]
    UnexpectedClose { line: usize },
    #[error("line {line}: unclosed '('")]
    UnclosedOpen { line: usize },
    #[error("line {line}: expected {expected}, got {got}")]
    Malformed {
        line: usize,
        expected: String,
        got: String,
    },
}

impl Sexpr {
    pub fn atom(s: impl Into<String>) -> Sexpr {
        Sexpr::Atom(s.into())
    }

    pub fn list(items: Vec<Sexpr>) -> Sexpr {
        Sexpr::List(items)
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexpr::Atom(s) => Some(s),
            Sexpr::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::Atom(_) => None,
            Sexpr::List(items) => Some(items),
        }
    }

    /// For a list whose head is the atom `tag`, returns the remaining items.
    pub fn tagged(&self, tag: &str) -> Option<&[Sexpr]> {
        let items = self.as_list()?;
        match items.split_first() {
            Some((Sexpr::Atom(head), rest)) if head == tag => Some(rest),
            _ => None,
        }
    }

    pub fn head(&self) -> Option<&str> {
        self.as_list()?.first()?.as_atom()
    }
}

impl fmt::Display for Sexpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexpr::Atom(s) => write!(f, "{s}"),
            Sexpr::List(items) => {
                write!(f, "(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Parses a whole input into a sequence of top-level s-expressions.
/// `;` starts a comment running to end of line.
pub fn parse_many(input: &str) -> Result<Vec<Sexpr>, ParseError> {
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<Sexpr>, usize)> = Vec::new();
    let mut atom = String::new();
    let mut line = 1usize;

    let flush = |atom: &mut String, stack: &mut Vec<(Vec<Sexpr>, usize)>, out: &mut Vec<Sexpr>| {
        if !atom.is_empty() {
            let a = Sexpr::Atom(std::mem::take(atom));
            match stack.last_mut() {
                Some((items, _)) => items.push(a),
                None => out.push(a),
            }
        }
    };

    let mut chars = input.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\n' => {
                flush(&mut atom, &mut stack, &mut out);
                line += 1;
            }
            ';' => {
                flush(&mut atom, &mut stack, &mut out);
                while let Some(&c2) = chars.peek() {
                    if c2 == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            c if c.is_whitespace() => flush(&mut atom, &mut stack, &mut out),
            '(' => {
                flush(&mut atom, &mut stack, &mut out);
                stack.push((Vec::new(), line));
            }
            ')' => {
                flush(&mut atom, &mut stack, &mut out);
                let (items, _) = stack.pop().ok_or(ParseError::UnexpectedClose { line })?;
                let node = Sexpr::List(items);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(node),
                    None => out.push(node),
                }
            }
            c => atom.push(c),
        }
    }
    flush(&mut atom, &mut stack, &mut out);
    if let Some((_, open_line)) = stack.last() {
        return Err(ParseError::UnclosedOpen { line: *open_line });
    }
    Ok(out)
}

pub fn parse_one(input: &str) -> Result<Sexpr, ParseError> {
    let mut items = parse_many(input)?;
    match items.len() {
        1 => Ok(items.pop().unwrap()),
        n => Err(ParseError::Malformed {
            line: 1,
            expected: "a single expression".into(),
            got: format!("{n} expressions"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let src = "(fun ft (params (n)) (args (ty n)) (result (ctx n)))";
        let e = parse_one(src).unwrap();
        assert_eq!(e.to_string(), src);
    }

    #[test]
    fn comments_and_lines() {
        let es = parse_many("(a b) ; trailing\n(c (d))\n").unwrap();
        assert_eq!(es.len(), 2);
        assert_eq!(es[1].to_string(), "(c (d))");
    }

    #[test]
    fn unbalanced() {
        assert!(matches!(
            parse_many("(a (b)"),
            Err(ParseError::UnclosedOpen { .. })
        ));
        assert!(matches!(
            parse_many("a))"),
            Err(ParseError::UnexpectedClose { .. })
        ));
    }
}
