//! Text form of trees: `X<j>` leaves (1-based), `&`, `|`, prefix `!`, parentheses.
//!
//! `!` binds tightest, then `&`, then `|`; binary operators associate to the
//! left. The printer adds parentheses wherever the parser would otherwise
//! rebuild a different shape, so `parse(print(t)) == t`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{LogicTree, Op};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unexpected character {found:?} at offset {offset}")]
    UnexpectedChar { found: char, offset: usize },
    #[error("leaf at offset {offset} needs a positive index, e.g. X1")]
    BadLeaf { offset: usize },
    #[error("trailing input at offset {offset}")]
    Trailing { offset: usize },
}

impl FromStr for LogicTree {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut p = Parser { src: s, pos: 0 };
        let tree = p.expr()?;
        p.skip_ws();
        if p.pos < s.len() {
            return Err(ParseError::Trailing { offset: p.pos });
        }
        Ok(tree)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_raw() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek_raw(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.peek_raw()
    }

    fn expr(&mut self) -> Result<LogicTree, ParseError> {
        let mut acc = self.term()?;
        while self.peek() == Some('|') {
            self.pos += 1;
            acc = LogicTree::or(acc, self.term()?);
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<LogicTree, ParseError> {
        let mut acc = self.factor()?;
        while self.peek() == Some('&') {
            self.pos += 1;
            acc = LogicTree::and(acc, self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<LogicTree, ParseError> {
        match self.peek() {
            None => Err(ParseError::UnexpectedEnd),
            Some('!') => {
                self.pos += 1;
                Ok(self.factor()?.negate())
            }
            Some('(') => {
                self.pos += 1;
                let inner = self.expr()?;
                match self.peek() {
                    Some(')') => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    Some(c) => Err(ParseError::UnexpectedChar {
                        found: c,
                        offset: self.pos,
                    }),
                    None => Err(ParseError::UnexpectedEnd),
                }
            }
            Some('X') | Some('x') => {
                let start = self.pos;
                self.pos += 1;
                let digits: String = self.src[self.pos..].chars().take_while(|c| c.is_ascii_digit()).collect();
                self.pos += digits.len();
                match digits.parse::<usize>() {
                    Ok(j) if j >= 1 => Ok(LogicTree::leaf(j - 1)),
                    _ => Err(ParseError::BadLeaf { offset: start }),
                }
            }
            Some(c) => Err(ParseError::UnexpectedChar {
                found: c,
                offset: self.pos,
            }),
        }
    }
}

type LeafWriter<'a> = dyn Fn(&mut fmt::Formatter<'_>, usize) -> fmt::Result + 'a;

pub(super) fn write_tree(tree: &LogicTree, f: &mut fmt::Formatter<'_>, leaf: &LeafWriter<'_>) -> fmt::Result {
    match tree {
        LogicTree::Leaf { index, negated } => {
            if *negated {
                f.write_str("!")?;
            }
            leaf(f, *index)
        }
        LogicTree::Node {
            op,
            left,
            right,
            negated,
        } => {
            if *negated {
                f.write_str("!(")?;
            }
            write_child(left, *op, false, f, leaf)?;
            f.write_str(match op {
                Op::And => " & ",
                Op::Or => " | ",
            })?;
            write_child(right, *op, true, f, leaf)?;
            if *negated {
                f.write_str(")")?;
            }
            Ok(())
        }
    }
}

fn write_child(
    child: &LogicTree,
    parent: Op,
    is_right: bool,
    f: &mut fmt::Formatter<'_>,
    leaf: &LeafWriter<'_>,
) -> fmt::Result {
    let needs_parens = match child {
        LogicTree::Node { op, negated: false, .. } => {
            (parent == Op::And && *op == Op::Or) || (is_right && *op == parent)
        }
        _ => false,
    };
    if needs_parens {
        f.write_str("(")?;
        write_tree(child, f, leaf)?;
        f.write_str(")")
    } else {
        write_tree(child, f, leaf)
    }
}

pub(super) struct Labelled<'a> {
    pub tree: &'a LogicTree,
    pub labels: &'a [String],
}

impl fmt::Display for Labelled<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_tree(self.tree, f, &|f, i| match self.labels.get(i) {
            Some(name) => f.write_str(name),
            None => write!(f, "X{}", i + 1),
        })
    }
}
