//! Recursive-descent parser.

use super::ast::{BinaryOp, Expr, ExprKind, FromItem, Ident, OrderBy, Query, SelectItem};
use super::error::QueryError;
use super::lexer::{is_keyword, tokenize, Token, TokenKind};

pub fn parse(src: &str) -> Result<Query, QueryError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { src, tokens, at: 0 };
    let q = p.query()?;
    p.eat_op(";");
    p.expect_eof()?;
    Ok(q)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    at: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> QueryError {
        let t = self.peek();
        QueryError::Parse {
            position: t.start,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.describe(self.src),
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().kind, TokenKind::Ident(w) if w == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<Token, QueryError> {
        if self.is_kw(kw) {
            Ok(self.bump())
        } else {
            Err(self.error(&[&kw.to_ascii_uppercase()]))
        }
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.peek().kind, TokenKind::Op(o) if o == op)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<Token, QueryError> {
        if self.is_op(op) {
            Ok(self.bump())
        } else {
            Err(self.error(&[&format!("'{op}'")]))
        }
    }

    fn expect_eof(&self) -> Result<(), QueryError> {
        if matches!(self.peek().kind, TokenKind::Eof) {
            Ok(())
        } else {
            Err(self.error(&["end of input"]))
        }
    }

    /// A non-keyword identifier at the cursor.
    fn plain_ident(&self) -> Option<Ident> {
        match &self.peek().kind {
            TokenKind::Ident(w) if !is_keyword(w) => Some(Ident { name: w.clone(), pos: self.peek().start }),
            _ => None,
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<Ident, QueryError> {
        match self.plain_ident() {
            Some(id) => {
                self.bump();
                Ok(id)
            }
            None => Err(self.error(&[what])),
        }
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        self.expect_kw("select")?;
        let mut select = vec![self.select_item()?];
        while self.eat_op(",") {
            select.push(self.select_item()?);
        }
        let mut from = Vec::new();
        if self.eat_kw("from") {
            from.push(self.table_ref()?);
            while self.eat_op(",") {
                from.push(self.table_ref()?);
            }
        }
        let mut filter = Vec::new();
        if self.eat_kw("where") {
            filter.push(self.expr()?);
            while self.eat_kw("and") {
                filter.push(self.expr()?);
            }
        }
        let mut order_by = None;
        if self.eat_kw("order") {
            self.expect_kw("by")?;
            let expr = self.expr()?;
            let desc = if self.eat_kw("desc") {
                true
            } else {
                self.eat_kw("asc");
                false
            };
            order_by = Some(OrderBy { expr, desc });
        }
        let mut limit = None;
        if self.eat_kw("limit") {
            match self.peek().kind {
                TokenKind::Number(v) if v >= 0.0 && v.fract() == 0.0 && v <= u64::MAX as f64 => {
                    self.bump();
                    limit = Some(v as u64);
                }
                _ => return Err(self.error(&["non-negative integer"])),
            }
        }
        Ok(Query { select, from, filter, order_by, limit })
    }

    fn select_item(&mut self) -> Result<SelectItem, QueryError> {
        let expr = self.expr()?;
        let alias = if self.eat_kw("as") {
            Some(self.expect_ident("alias")?)
        } else if let Some(id) = self.plain_ident() {
            self.bump();
            Some(id)
        } else {
            None
        };
        Ok(SelectItem { expr, alias })
    }

    fn table_ref(&mut self) -> Result<FromItem, QueryError> {
        if self.eat_op("(") {
            let query = self.query()?;
            self.expect_op(")")?;
            self.eat_kw("as");
            let alias = self.expect_ident("subquery alias")?;
            return Ok(FromItem::Subquery { query: Box::new(query), alias });
        }
        let name = match self.plain_ident() {
            Some(id) => {
                self.bump();
                id
            }
            None => return Err(self.error(&["table name", "'('"])),
        };
        let alias = if self.eat_kw("as") {
            Some(self.expect_ident("alias")?)
        } else if let Some(id) = self.plain_ident() {
            self.bump();
            Some(id)
        } else {
            None
        };
        Ok(FromItem::Table { name, alias })
    }

    fn expr(&mut self) -> Result<Expr, QueryError> {
        let mut left = self.is_null()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Op("=") => BinaryOp::Eq,
                TokenKind::Op("<>") | TokenKind::Op("!=") => BinaryOp::Ne,
                TokenKind::Op("<") => BinaryOp::Lt,
                TokenKind::Op("<=") => BinaryOp::Le,
                TokenKind::Op(">") => BinaryOp::Gt,
                TokenKind::Op(">=") => BinaryOp::Ge,
                TokenKind::Op("&&") => BinaryOp::Overlaps,
                _ => return Ok(left),
            };
            let pos = self.bump().start;
            let right = self.is_null()?;
            left = Expr::new(ExprKind::Binary { op, left: Box::new(left), right: Box::new(right) }, pos);
        }
    }

    fn is_null(&mut self) -> Result<Expr, QueryError> {
        let expr = self.additive()?;
        if self.is_kw("is") {
            let pos = self.bump().start;
            let negated = self.eat_kw("not");
            if !self.eat_kw("null") {
                return Err(self.error(if negated { &["NULL"] } else { &["NOT", "NULL"] }));
            }
            return Ok(Expr::new(ExprKind::IsNull { expr: Box::new(expr), negated }, pos));
        }
        Ok(expr)
    }

    fn additive(&mut self) -> Result<Expr, QueryError> {
        let mut left = self.multiplicative()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Op("+") => BinaryOp::Add,
                TokenKind::Op("-") => BinaryOp::Sub,
                _ => return Ok(left),
            };
            let pos = self.bump().start;
            let right = self.multiplicative()?;
            left = Expr::new(ExprKind::Binary { op, left: Box::new(left), right: Box::new(right) }, pos);
        }
    }

    fn multiplicative(&mut self) -> Result<Expr, QueryError> {
        let mut left = self.unary()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Op("*") => BinaryOp::Mul,
                TokenKind::Op("/") => BinaryOp::Div,
                _ => return Ok(left),
            };
            let pos = self.bump().start;
            let right = self.unary()?;
            left = Expr::new(ExprKind::Binary { op, left: Box::new(left), right: Box::new(right) }, pos);
        }
    }

    fn unary(&mut self) -> Result<Expr, QueryError> {
        if self.is_op("-") {
            let pos = self.bump().start;
            let inner = self.unary()?;
            return Ok(Expr::new(ExprKind::Neg(Box::new(inner)), pos));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, QueryError> {
        const EXPECTED: &[&str] = &["expression"];
        let tok = self.peek().clone();
        match tok.kind {
            TokenKind::Number(v) => {
                self.bump();
                Ok(Expr::new(ExprKind::Number(v), tok.start))
            }
            TokenKind::Str(s) => {
                self.bump();
                Ok(Expr::new(ExprKind::Str(s), tok.start))
            }
            TokenKind::Op("(") => {
                self.bump();
                let inner = self.expr()?;
                self.expect_op(")")?;
                if self.is_op(".") {
                    self.bump();
                    let field = self.expect_ident("field name")?;
                    return Ok(Expr::new(ExprKind::Field { expr: Box::new(inner), field: field.name }, tok.start));
                }
                Ok(inner)
            }
            TokenKind::Ident(ref w) if w == "null" => {
                self.bump();
                Ok(Expr::new(ExprKind::Null, tok.start))
            }
            TokenKind::Ident(ref w) if !is_keyword(w) => {
                self.bump();
                let name = w.clone();
                if self.is_op("(") {
                    self.bump();
                    let mut args = Vec::new();
                    if !self.is_op(")") {
                        args.push(self.expr()?);
                        while self.eat_op(",") {
                            args.push(self.expr()?);
                        }
                    }
                    self.expect_op(")")?;
                    return Ok(Expr::new(ExprKind::Call { name, args }, tok.start));
                }
                if self.eat_op(".") {
                    let col = self.expect_ident("column name")?;
                    return Ok(Expr::new(ExprKind::Column { qualifier: Some(name), name: col.name }, tok.start));
                }
                Ok(Expr::new(ExprKind::Column { qualifier: None, name }, tok.start))
            }
            _ => Err(self.error(EXPECTED)),
        }
    }
}
