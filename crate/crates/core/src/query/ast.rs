//! Syntax tree. Every node carries the byte offset it was parsed from;
//! equality ignores offsets so printed-and-reparsed trees compare equal.

use std::fmt;

use super::lexer::is_keyword;
use crate::value::format_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    /// Bounding-box overlap.
    Overlaps,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Overlaps => "&&",
        }
    }

    pub fn is_comparison(self) -> bool {
        !matches!(self, BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div)
    }
}

#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub pos: usize,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Column { qualifier: Option<String>, name: String },
    /// `(expr).field`
    Field { expr: Box<Expr>, field: String },
    Number(f64),
    Str(String),
    Null,
    Call { name: String, args: Vec<Expr> },
    Binary { op: BinaryOp, left: Box<Expr>, right: Box<Expr> },
    Neg(Box<Expr>),
    IsNull { expr: Box<Expr>, negated: bool },
}

impl Expr {
    pub fn new(kind: ExprKind, pos: usize) -> Self {
        Expr { kind, pos }
    }
}

#[derive(Debug, Clone)]
pub struct Ident {
    pub name: String,
    pub pos: usize,
}

impl PartialEq for Ident {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectItem {
    pub expr: Expr,
    pub alias: Option<Ident>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FromItem {
    Table { name: Ident, alias: Option<Ident> },
    Subquery { query: Box<Query>, alias: Ident },
}

impl FromItem {
    /// Name the item's columns are qualified by.
    pub fn binding_name(&self) -> &Ident {
        match self {
            FromItem::Table { name, alias } => alias.as_ref().unwrap_or(name),
            FromItem::Subquery { alias, .. } => alias,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderBy {
    pub expr: Expr,
    pub desc: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub select: Vec<SelectItem>,
    pub from: Vec<FromItem>,
    /// Conjuncts of the WHERE clause.
    pub filter: Vec<Expr>,
    pub order_by: Option<OrderBy>,
    pub limit: Option<u64>,
}

fn write_ident(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    f.write_str(name)
}

fn needs_parens(e: &Expr) -> bool {
    matches!(e.kind, ExprKind::Binary { .. } | ExprKind::Neg(_) | ExprKind::IsNull { .. })
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    if needs_parens(e) {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Column { qualifier, name } => {
                if let Some(q) = qualifier {
                    write_ident(f, q)?;
                    f.write_str(".")?;
                }
                write_ident(f, name)
            }
            ExprKind::Field { expr, field } => write!(f, "({expr}).{field}"),
            ExprKind::Number(v) => f.write_str(&format_f64(*v)),
            ExprKind::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
            ExprKind::Null => f.write_str("NULL"),
            ExprKind::Call { name, args } => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            ExprKind::Binary { op, left, right } => {
                write_operand(f, left)?;
                write!(f, " {} ", op.symbol())?;
                write_operand(f, right)
            }
            ExprKind::Neg(e) => {
                f.write_str("-")?;
                write_operand(f, e)
            }
            ExprKind::IsNull { expr, negated } => {
                write_operand(f, expr)?;
                f.write_str(if *negated { " IS NOT NULL" } else { " IS NULL" })
            }
        }
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        for (i, item) in self.select.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", item.expr)?;
            if let Some(a) = &item.alias {
                write!(f, " AS {}", a.name)?;
            }
        }
        if !self.from.is_empty() {
            f.write_str(" FROM ")?;
            for (i, item) in self.from.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                match item {
                    FromItem::Table { name, alias } => {
                        f.write_str(&name.name)?;
                        if let Some(a) = alias {
                            write!(f, " AS {}", a.name)?;
                        }
                    }
                    FromItem::Subquery { query, alias } => write!(f, "({query}) AS {}", alias.name)?,
                }
            }
        }
        for (i, c) in self.filter.iter().enumerate() {
            f.write_str(if i == 0 { " WHERE " } else { " AND " })?;
            write!(f, "{c}")?;
        }
        if let Some(o) = &self.order_by {
            write!(f, " ORDER BY {} {}", o.expr, if o.desc { "DESC" } else { "ASC" })?;
        }
        if let Some(n) = self.limit {
            write!(f, " LIMIT {n}")?;
        }
        Ok(())
    }
}

/// True when `name` can be written bare as an identifier.
pub fn is_plain_ident(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase() || c == '_')
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        && !is_keyword(name)
}
