//! Linear temporal logic formulas over named atomic propositions.
//!
//! Concrete syntax, loosest binding first:
//!
//! ```text
//! formula := or
//! or      := and ('|' and)*
//! and     := until ('&' until)*
//! until   := unary ('U' until)?
//! unary   := '!' unary | 'F' unary | 'G' unary | atom | 'true' | 'false' | '(' formula ')'
//! atom    := [A-Za-z_][A-Za-z0-9_,]*
//! ```
//!
//! `|` and `&` associate to the left, `U` to the right.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(String),
    True,
    False,
    Not(Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
}

impl Formula {
    pub fn atom(name: &str) -> Self {
        Formula::Atom(name.to_string())
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn until(a: Formula, b: Formula) -> Self {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn eventually(f: Formula) -> Self {
        Formula::Eventually(Box::new(f))
    }

    pub fn always(f: Formula) -> Self {
        Formula::Always(Box::new(f))
    }

    /// Names of all atomic propositions.
    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::Atom(a) => {
                out.insert(a.clone());
            }
            Formula::True | Formula::False => {}
            Formula::Not(a) | Formula::Eventually(a) | Formula::Always(a) => a.collect_atoms(out),
            Formula::Or(a, b) | Formula::And(a, b) | Formula::Until(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// True when the formula contains `U`, `F` or `G`.
    pub fn is_temporal(&self) -> bool {
        match self {
            Formula::Atom(_) | Formula::True | Formula::False => false,
            Formula::Until(..) | Formula::Eventually(_) | Formula::Always(_) => true,
            Formula::Not(a) => a.is_temporal(),
            Formula::Or(a, b) | Formula::And(a, b) => a.is_temporal() || b.is_temporal(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Formula::Atom(_) | Formula::True | Formula::False => 1,
            Formula::Not(a) | Formula::Eventually(a) | Formula::Always(a) => 1 + a.depth(),
            Formula::Or(a, b) | Formula::And(a, b) | Formula::Until(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&to_text(self))
    }
}

/// Canonical fully parenthesized rendering; `parse(to_text(f)) == f`.
pub fn to_text(f: &Formula) -> String {
    match f {
        Formula::Atom(a) => a.clone(),
        Formula::True => "true".into(),
        Formula::False => "false".into(),
        Formula::Not(a) => format!("(! {})", to_text(a)),
        Formula::Eventually(a) => format!("(F {})", to_text(a)),
        Formula::Always(a) => format!("(G {})", to_text(a)),
        Formula::Or(a, b) => format!("({} | {})", to_text(a), to_text(b)),
        Formula::And(a, b) => format!("({} & {})", to_text(a), to_text(b)),
        Formula::Until(a, b) => format!("({} U {})", to_text(a), to_text(b)),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Not,
    And,
    Or,
    Until,
    Eventually,
    Always,
    True,
    False,
    Ident(String),
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut line, mut column) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (l, col) = (line, column);
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '!' => Some(Tok::Not),
            '&' => Some(Tok::And),
            '|' => Some(Tok::Or),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, line: l, column: col });
            column += 1;
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == ',') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            column += i - start;
            let tok = match word.as_str() {
                "U" => Tok::Until,
                "F" => Tok::Eventually,
                "G" => Tok::Always,
                "true" => Tok::True,
                "false" => Tok::False,
                _ => Tok::Ident(word),
            };
            out.push(Token { tok, line: l, column: col });
            continue;
        }
        return Err(Error::Syntax { line: l, column: col, message: format!("unknown operator `{c}`") });
    }
    out.push(Token { tok: Tok::End, line, column });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        let t = self.peek();
        Err(Error::Syntax { line: t.line, column: t.column, message: message.into() })
    }

    fn or(&mut self) -> Result<Formula> {
        let mut lhs = self.and()?;
        while self.peek().tok == Tok::Or {
            self.bump();
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula> {
        let mut lhs = self.until()?;
        while self.peek().tok == Tok::And {
            self.bump();
            lhs = Formula::and(lhs, self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula> {
        let lhs = self.unary()?;
        if self.peek().tok == Tok::Until {
            self.bump();
            return Ok(Formula::until(lhs, self.until()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.peek().tok.clone() {
            Tok::Not => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Eventually => {
                self.bump();
                Ok(Formula::eventually(self.unary()?))
            }
            Tok::Always => {
                self.bump();
                Ok(Formula::always(self.unary()?))
            }
            Tok::True => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::False => {
                self.bump();
                Ok(Formula::False)
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Formula::Atom(name))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.or()?;
                if self.peek().tok != Tok::RParen {
                    return self.error("expected `)`");
                }
                self.bump();
                Ok(inner)
            }
            Tok::End => self.error("unexpected end of input"),
            other => self.error(format!("unexpected token {other:?}")),
        }
    }
}

pub fn parse(text: &str) -> Result<Formula> {
    let mut p = Parser { tokens: tokenize(text)?, pos: 0 };
    let f = p.or()?;
    if p.peek().tok != Tok::End {
        return p.error(format!("unexpected token {:?}", p.peek().tok));
    }
    Ok(f)
}

/// Rewrites `F φ` as `true U φ` and pushes negations down to atoms.
///
/// Negation over a temporal operator is rejected.
pub fn normalize(f: &Formula) -> Result<Formula> {
    Ok(match f {
        Formula::Atom(_) | Formula::True | Formula::False => f.clone(),
        Formula::Not(a) => negate(a)?,
        Formula::Or(a, b) => Formula::or(normalize(a)?, normalize(b)?),
        Formula::And(a, b) => Formula::and(normalize(a)?, normalize(b)?),
        Formula::Until(a, b) => Formula::until(normalize(a)?, normalize(b)?),
        Formula::Eventually(a) => Formula::until(Formula::True, normalize(a)?),
        Formula::Always(a) => Formula::always(normalize(a)?),
    })
}

fn negate(f: &Formula) -> Result<Formula> {
    Ok(match f {
        Formula::Atom(_) => Formula::not(f.clone()),
        Formula::True => Formula::False,
        Formula::False => Formula::True,
        Formula::Not(a) => normalize(a)?,
        Formula::Or(a, b) => Formula::and(negate(a)?, negate(b)?),
        Formula::And(a, b) => Formula::or(negate(a)?, negate(b)?),
        Formula::Until(..) | Formula::Eventually(_) | Formula::Always(_) => {
            return Err(Error::UnsupportedFragment(format!("negation of temporal subformula {}", to_text(f))))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(n: &str) -> Formula {
        Formula::atom(n)
    }

    #[test]
    fn spp_shape_parses_left_associated() {
        let f = parse("F g1 & G c1 & G !(d10)").unwrap();
        let expected = Formula::and(
            Formula::and(Formula::eventually(a("g1")), Formula::always(a("c1"))),
            Formula::always(Formula::not(a("d10"))),
        );
        assert_eq!(f, expected);
    }

    #[test]
    fn until_is_right_associative() {
        assert_eq!(parse("a U b U c").unwrap(), Formula::until(a("a"), Formula::until(a("b"), a("c"))));
    }

    #[test]
    fn precedence_levels() {
        assert_eq!(parse("a | b & c").unwrap(), Formula::or(a("a"), Formula::and(a("b"), a("c"))));
        assert_eq!(parse("!a U b").unwrap(), Formula::until(Formula::not(a("a")), a("b")));
        assert_eq!(parse("a & b U c").unwrap(), Formula::and(a("a"), Formula::until(a("b"), a("c"))));
        assert_eq!(parse("F G x").unwrap(), Formula::eventually(Formula::always(a("x"))));
        assert_eq!(parse("d3,1").unwrap(), a("d3,1"));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse("F (g1") {
            Err(Error::Syntax { line, column, .. }) => assert_eq!((line, column), (1, 6)),
            other => panic!("{other:?}"),
        }
        match parse("a &\n  # b") {
            Err(Error::Syntax { line, column, message }) => {
                assert_eq!((line, column), (2, 3));
                assert!(message.contains("unknown operator"));
            }
            other => panic!("{other:?}"),
        }
        assert!(parse("a b").is_err());
        assert!(parse("").is_err());
        assert!(parse("a &").is_err());
    }

    #[test]
    fn canonical_text() {
        assert_eq!(to_text(&a("g")), "g");
        assert_eq!(to_text(&Formula::eventually(a("g"))), "(F g)");
        assert_eq!(to_text(&parse("a U b & !c").unwrap()), "((a U b) & (! c))");
    }

    #[test]
    fn eventually_becomes_until() {
        assert_eq!(normalize(&parse("F g").unwrap()).unwrap(), Formula::until(Formula::True, a("g")));
    }

    #[test]
    fn de_morgan_and_double_negation() {
        assert_eq!(normalize(&parse("!(a | b)").unwrap()).unwrap(), Formula::and(Formula::not(a("a")), Formula::not(a("b"))));
        assert_eq!(normalize(&parse("!!a").unwrap()).unwrap(), a("a"));
        assert_eq!(normalize(&parse("!true").unwrap()).unwrap(), Formula::False);
        assert_eq!(normalize(&parse("G !(d1 | d2)").unwrap()).unwrap(), Formula::always(Formula::and(Formula::not(a("d1")), Formula::not(a("d2")))));
    }

    #[test]
    fn negated_temporal_is_unsupported() {
        assert!(matches!(normalize(&parse("!F g").unwrap()), Err(Error::UnsupportedFragment(_))));
        assert!(matches!(normalize(&parse("!(a & G b)").unwrap()), Err(Error::UnsupportedFragment(_))));
    }

    pub(crate) fn arb_formula(depth: u32) -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![
            4 => "[a-z_][a-z0-9_,]{0,3}".prop_filter("keyword", |s| s != "true" && s != "false").prop_map(Formula::Atom),
            1 => Just(Formula::True),
            1 => Just(Formula::False),
        ];
        leaf.prop_recursive(depth, 64, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                inner.clone().prop_map(Formula::eventually),
                inner.clone().prop_map(Formula::always),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| Formula::until(a, b)),
            ]
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn print_then_parse_round_trips(f in arb_formula(5)) {
            prop_assert_eq!(parse(&to_text(&f)).unwrap(), f);
        }

        #[test]
        fn normalize_is_idempotent_and_keeps_atoms(f in arb_formula(5)) {
            if let Ok(n) = normalize(&f) {
                prop_assert_eq!(normalize(&n).unwrap(), n.clone());
                let before = f.atoms();
                let after = n.atoms();
                prop_assert_eq!(before, after);
            }
        }
    }
}
