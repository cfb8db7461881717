//! Recursive-descent parser.
//!
//! ```text
//! statement  := IDENT "<-" expr | expr
//! expr       := comparison
//! comparison := additive (("<"|">"|"<="|">="|"=="|"!=") additive)*
//! additive   := multiplicative (("+"|"-") multiplicative)*
//! multiplicative := power (("*"|"/") power)*
//! power      := unary ("^" power)?
//! unary      := "-" unary | postfix
//! postfix    := atom ("(" [arg ("," arg)*] ")")*
//! arg        := [IDENT "="] expr
//! atom       := NUMBER | STRING | TRUE | FALSE | NA | NaN | Inf | NULL
//!             | IDENT | "(" expr ")" | "function" "(" params ")" expr
//! ```

use std::collections::HashSet;

use super::ast::{Arg, Expr, Literal, Param};
use super::error::{LangError, LangResult};
use super::lexer::{tokenize, Tok, Token};

const MAX_DEPTH: usize = 128;

/// One top-level statement and where it sits in the source.
#[derive(Clone, Debug, PartialEq)]
pub struct Statement {
    pub expr: Expr,
    /// Byte range of the statement in the source text.
    pub start: usize,
    pub end: usize,
    pub line: usize,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    parens: usize,
    depth: usize,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(x) => format!("number {x}"),
        Tok::Str(_) => "string".into(),
        Tok::Ident(n) => format!("'{n}'"),
        Tok::Op(o) => format!("'{o}'"),
        Tok::Arrow => "'<-'".into(),
        Tok::Equals => "'='".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Comma => "','".into(),
        Tok::Semi => "';'".into(),
        Tok::Newline => "end of line".into(),
        Tok::Eof => "end of input".into(),
        Tok::True => "TRUE".into(),
        Tok::False => "FALSE".into(),
        Tok::Na => "NA".into(),
        Tok::NaN => "NaN".into(),
        Tok::Inf => "Inf".into(),
        Tok::Null => "NULL".into(),
        Tok::Function => "'function'".into(),
    }
}

impl Parser {
    fn skip_newlines(&mut self) {
        while self.toks[self.pos].tok == Tok::Newline {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> &Token {
        if self.parens > 0 {
            self.skip_newlines();
        }
        &self.toks[self.pos]
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let mut i = self.pos;
        let mut seen = 0;
        loop {
            let t = &self.toks[i].tok;
            if *t == Tok::Eof {
                return t;
            }
            if !(self.parens > 0 && *t == Tok::Newline) {
                if seen == offset {
                    return t;
                }
                seen += 1;
            }
            i += 1;
        }
    }

    fn next(&mut self) -> Token {
        self.peek();
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, t: &Token, msg: String) -> LangError {
        LangError::parse(msg, t.line, t.column)
    }

    fn unexpected(&mut self) -> LangError {
        let t = self.peek().clone();
        self.error_at(&t, format!("unexpected {}", describe(&t.tok)))
    }

    fn expect(&mut self, want: Tok) -> LangResult<Token> {
        if self.peek().tok == want {
            Ok(self.next())
        } else {
            let t = self.peek().clone();
            Err(self.error_at(&t, format!("expected {} but found {}", describe(&want), describe(&t.tok))))
        }
    }

    fn enter(&mut self) -> LangResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            let t = self.peek().clone();
            return Err(self.error_at(&t, "expression nested too deeply".into()));
        }
        Ok(())
    }

    fn program(&mut self) -> LangResult<Vec<Statement>> {
        let mut out = Vec::new();
        loop {
            while matches!(self.toks[self.pos].tok, Tok::Newline | Tok::Semi) {
                self.pos += 1;
            }
            if self.toks[self.pos].tok == Tok::Eof {
                return Ok(out);
            }
            let first = self.toks[self.pos].clone();
            let expr = self.statement()?;
            let end = self.toks[self.pos - 1].end;
            out.push(Statement {
                expr,
                start: first.start,
                end,
                line: first.line,
            });
            match self.toks[self.pos].tok {
                Tok::Newline | Tok::Semi | Tok::Eof => {}
                _ => return Err(self.unexpected()),
            }
        }
    }

    fn statement(&mut self) -> LangResult<Expr> {
        if let Tok::Ident(name) = self.peek().tok.clone() {
            if *self.peek_at(1) == Tok::Arrow {
                self.next();
                self.next();
                self.skip_newlines();
                let value = self.expr()?;
                return Ok(Expr::Assign {
                    name,
                    value: Box::new(value),
                });
            }
        }
        let e = self.expr()?;
        if self.peek().tok == Tok::Arrow {
            let t = self.peek().clone();
            return Err(self.error_at(&t, "invalid assignment target".into()));
        }
        Ok(e)
    }

    fn expr(&mut self) -> LangResult<Expr> {
        self.enter()?;
        let e = self.comparison();
        self.depth -= 1;
        e
    }

    fn binary_chain(
        &mut self,
        ops: &[&'static str],
        operand: fn(&mut Self) -> LangResult<Expr>,
    ) -> LangResult<Expr> {
        let mut lhs = operand(self)?;
        loop {
            let op = match self.peek().tok {
                Tok::Op(o) if ops.contains(&o) => o,
                _ => return Ok(lhs),
            };
            self.next();
            self.skip_newlines();
            let rhs = operand(self)?;
            lhs = Expr::call(op, vec![Arg::positional(lhs), Arg::positional(rhs)]);
        }
    }

    fn comparison(&mut self) -> LangResult<Expr> {
        self.binary_chain(&["<", ">", "<=", ">=", "==", "!="], Self::additive)
    }

    fn additive(&mut self) -> LangResult<Expr> {
        self.binary_chain(&["+", "-"], Self::multiplicative)
    }

    fn multiplicative(&mut self) -> LangResult<Expr> {
        self.binary_chain(&["*", "/"], Self::power)
    }

    fn power(&mut self) -> LangResult<Expr> {
        let base = self.unary()?;
        if self.peek().tok == Tok::Op("^") {
            self.next();
            self.skip_newlines();
            self.enter()?;
            let exponent = self.power();
            self.depth -= 1;
            return Ok(Expr::call("^", vec![Arg::positional(base), Arg::positional(exponent?)]));
        }
        Ok(base)
    }

    fn unary(&mut self) -> LangResult<Expr> {
        if self.peek().tok == Tok::Op("-") {
            self.next();
            self.skip_newlines();
            self.enter()?;
            let operand = self.unary();
            self.depth -= 1;
            return Ok(Expr::call("-", vec![Arg::positional(operand?)]));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> LangResult<Expr> {
        let mut e = self.atom()?;
        while self.peek().tok == Tok::LParen {
            let open = self.next();
            self.parens += 1;
            let args = self.args(&open);
            self.parens -= 1;
            let args = args?;
            self.expect_close()?;
            e = Expr::Call {
                callee: Box::new(e),
                args,
            };
        }
        Ok(e)
    }

    fn expect_close(&mut self) -> LangResult<()> {
        // Newlines were skipped while inside the parentheses.
        match self.toks[self.pos].tok {
            Tok::RParen => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.unexpected()),
        }
    }

    fn args(&mut self, open: &Token) -> LangResult<Vec<Arg>> {
        let mut args = Vec::new();
        let mut names = HashSet::new();
        if self.peek().tok == Tok::RParen {
            return Ok(args);
        }
        loop {
            let head = self.peek().tok.clone();
            let name = match (head, self.peek_at(1)) {
                (Tok::Ident(n), Tok::Equals) => {
                    let t = self.next();
                    self.next();
                    if !names.insert(n.clone()) {
                        return Err(self.error_at(&t, format!("argument '{n}' given more than once")));
                    }
                    Some(n)
                }
                _ => None,
            };
            if matches!(self.peek().tok, Tok::Eof) {
                return Err(self.error_at(open, "unexpected end of input: unbalanced '('".into()));
            }
            let value = self.expr()?;
            args.push(Arg { name, value });
            match self.peek().tok {
                Tok::Comma => {
                    self.next();
                }
                Tok::RParen => return Ok(args),
                Tok::Eof => return Err(self.error_at(open, "unexpected end of input: unbalanced '('".into())),
                _ => return Err(self.unexpected()),
            }
        }
    }

    fn params(&mut self) -> LangResult<Vec<Param>> {
        let mut params = Vec::new();
        let mut names = HashSet::new();
        if self.peek().tok == Tok::RParen {
            return Ok(params);
        }
        loop {
            let t = self.next();
            let name = match t.tok {
                Tok::Ident(ref n) => n.clone(),
                _ => return Err(self.error_at(&t, format!("expected parameter name but found {}", describe(&t.tok)))),
            };
            if !names.insert(name.clone()) {
                return Err(self.error_at(&t, format!("parameter '{name}' repeated")));
            }
            let default = if self.peek().tok == Tok::Equals {
                self.next();
                Some(self.expr()?)
            } else {
                None
            };
            params.push(Param { name, default });
            match self.peek().tok {
                Tok::Comma => {
                    self.next();
                }
                Tok::RParen => return Ok(params),
                _ => return Err(self.unexpected()),
            }
        }
    }

    fn atom(&mut self) -> LangResult<Expr> {
        let t = self.next();
        Ok(match t.tok.clone() {
            Tok::Num(x) => Expr::Literal(Literal::Number(x)),
            Tok::Str(s) => Expr::Literal(Literal::Str(s)),
            Tok::True => Expr::Literal(Literal::Logical(true)),
            Tok::False => Expr::Literal(Literal::Logical(false)),
            Tok::Na => Expr::Literal(Literal::Na),
            Tok::NaN => Expr::Literal(Literal::Number(f64::NAN)),
            Tok::Inf => Expr::Literal(Literal::Number(f64::INFINITY)),
            Tok::Null => Expr::Literal(Literal::Null),
            Tok::Ident(n) => Expr::Ident(n),
            Tok::LParen => {
                self.parens += 1;
                let inner = self.expr();
                self.parens -= 1;
                let inner = inner?;
                if self.peek().tok == Tok::Eof {
                    return Err(self.error_at(&t, "unexpected end of input: unbalanced '('".into()));
                }
                self.expect_close()?;
                inner
            }
            Tok::Function => {
                self.expect(Tok::LParen)?;
                self.parens += 1;
                let params = self.params();
                self.parens -= 1;
                let params = params?;
                self.expect_close()?;
                self.skip_newlines();
                let body = self.expr()?;
                Expr::Function {
                    params,
                    body: Box::new(body),
                }
            }
            Tok::Eof => return Err(self.error_at(&t, "unexpected end of input".into())),
            other => return Err(self.error_at(&t, format!("unexpected {}", describe(&other)))),
        })
    }
}

/// Parses a script into top-level statements with their source spans.
pub fn parse_program(src: &str) -> LangResult<Vec<Statement>> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
        parens: 0,
        depth: 0,
    };
    p.program()
}

/// Parses a script into one expression per top-level statement.
pub fn parse(src: &str) -> LangResult<Vec<Expr>> {
    Ok(parse_program(src)?.into_iter().map(|s| s.expr).collect())
}

/// Parses text that must hold exactly one expression (no assignment).
pub fn parse_single(src: &str) -> LangResult<Expr> {
    let mut stmts = parse_program(src)?;
    match (stmts.len(), stmts.first().map(|s| &s.expr)) {
        (1, Some(Expr::Assign { .. })) => Err(LangError::parse("assignment is not allowed here", 1, 1)),
        (1, _) => Ok(stmts.remove(0).expr),
        (0, _) => Err(LangError::parse("empty expression", 1, 1)),
        _ => Err(LangError::parse("expected a single expression", stmts[1].line, 1)),
    }
}
