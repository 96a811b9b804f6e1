use super::ast::*;
use super::lexer::{Token, TokenKind};
use super::FrontendError;
use crate::ir::{BinOp, Type, UnOp};

/// Parses a token stream into a [`Program`]. Recursion is rejected here;
/// name resolution and typing happen in [`super::typecheck`].
pub fn parse(tokens: &[Token]) -> Result<Program, FrontendError> {
    let mut parser = Parser {
        tokens,
        pos: 0,
        next_site: 0,
    };
    let program = parser.program()?;
    if let Some(cycle) = super::find_call_cycle(&program) {
        let span = program
            .function(&cycle[0])
            .map(|f| f.span)
            .unwrap_or_default();
        return Err(FrontendError::Unsupported {
            feature: format!("recursion ({})", cycle.join(" -> ")),
            line: span.line,
            column: span.column,
        });
    }
    Ok(program)
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    next_site: u32,
}

const UNSUPPORTED_TYPES: &[(&str, &str)] = &[
    ("struct", "structs"),
    ("union", "unions"),
    ("enum", "enums"),
    ("typedef", "typedefs"),
    ("float", "floating-point types"),
    ("double", "floating-point types"),
    ("char", "char types"),
    ("long", "long integer types"),
    ("short", "short integer types"),
    ("unsigned", "unsigned integer types"),
    ("signed", "explicitly signed integer types"),
];

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&'t Token> {
        self.tokens.get(self.pos + offset)
    }

    fn span(&self) -> Span {
        match self.peek().or_else(|| self.tokens.last()) {
            Some(t) => Span {
                line: t.line,
                column: t.column,
            },
            None => Span { line: 1, column: 1 },
        }
    }

    fn at(&self, kind: TokenKind, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is(kind, text))
    }

    fn at_punct(&self, text: &str) -> bool {
        self.at(TokenKind::Punctuation, text)
    }

    fn at_op(&self, text: &str) -> bool {
        self.at(TokenKind::Operator, text)
    }

    fn at_kw(&self, text: &str) -> bool {
        self.at(TokenKind::Keyword, text)
    }

    fn eat(&mut self, kind: TokenKind, text: &str) -> bool {
        if self.at(kind, text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &[&str]) -> FrontendError {
        let span = self.span();
        FrontendError::Parse {
            line: span.line,
            column: span.column,
            found: self
                .peek()
                .map(|t| t.text.clone())
                .unwrap_or_else(|| "end of input".into()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn unsupported(&self, feature: &str) -> FrontendError {
        let span = self.span();
        FrontendError::Unsupported {
            feature: feature.into(),
            line: span.line,
            column: span.column,
        }
    }

    fn expect(&mut self, kind: TokenKind, text: &str) -> Result<(), FrontendError> {
        if self.eat(kind, text) {
            Ok(())
        } else {
            Err(self.unexpected(&[text]))
        }
    }

    fn expect_punct(&mut self, text: &str) -> Result<(), FrontendError> {
        self.expect(TokenKind::Punctuation, text)
    }

    fn ident(&mut self) -> Result<String, FrontendError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                self.pos += 1;
                Ok(t.text.clone())
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn check_unsupported_keyword(&self) -> Result<(), FrontendError> {
        if let Some(t) = self.peek() {
            if t.kind == TokenKind::Keyword {
                if let Some((_, feature)) = UNSUPPORTED_TYPES.iter().find(|(k, _)| *k == t.text) {
                    return Err(self.unsupported(feature));
                }
            }
        }
        Ok(())
    }

    fn at_type(&self) -> bool {
        ["int", "bool", "_Bool", "void", "const", "volatile", "static", "extern"]
            .iter()
            .any(|k| self.at_kw(k))
            || self.peek().is_some_and(|t| {
                t.kind == TokenKind::Keyword && UNSUPPORTED_TYPES.iter().any(|(k, _)| *k == t.text)
            })
    }

    /// Parses qualifiers and a base type. Returns `(is_extern, type)`, with
    /// `None` meaning `void`.
    fn type_spec(&mut self) -> Result<(bool, Option<Type>), FrontendError> {
        let mut is_extern = false;
        loop {
            if self.eat(TokenKind::Keyword, "extern") {
                is_extern = true;
            } else if !(self.eat(TokenKind::Keyword, "static")
                || self.eat(TokenKind::Keyword, "const")
                || self.eat(TokenKind::Keyword, "volatile"))
            {
                break;
            }
        }
        self.check_unsupported_keyword()?;
        let ty = if self.eat(TokenKind::Keyword, "int") {
            Some(Type::Int)
        } else if self.eat(TokenKind::Keyword, "bool") || self.eat(TokenKind::Keyword, "_Bool") {
            Some(Type::Bool)
        } else if self.eat(TokenKind::Keyword, "void") {
            None
        } else {
            return Err(self.unexpected(&["int", "bool", "void"]));
        };
        while self.eat(TokenKind::Keyword, "const") || self.eat(TokenKind::Keyword, "volatile") {}
        if self.at_op("*") {
            return Err(self.unsupported("pointers"));
        }
        Ok((is_extern, ty))
    }

    fn program(&mut self) -> Result<Program, FrontendError> {
        let mut items = Vec::new();
        while self.peek().is_some() {
            if self.eat(TokenKind::Punctuation, ";") {
                continue;
            }
            items.push(self.item()?);
        }
        Ok(Program { items })
    }

    fn item(&mut self) -> Result<Item, FrontendError> {
        let span = self.span();
        let (is_extern, ty) = self.type_spec()?;
        let name_span = self.span();
        let name = self.ident()?;
        if self.eat(TokenKind::Punctuation, "(") {
            let params = self.params()?;
            let body = if self.eat(TokenKind::Punctuation, ";") {
                None
            } else {
                if is_extern {
                    return Err(self.unexpected(&[";"]));
                }
                Some(self.block_body()?)
            };
            return Ok(Item::Function(Function {
                name,
                params,
                ret: ty,
                body,
                is_extern,
                span,
            }));
        }
        let Some(ty) = ty else {
            return Err(self.unexpected(&["("]));
        };
        let decl = self.declarators(ty, name, name_span, span)?;
        Ok(Item::Global(decl))
    }

    fn params(&mut self) -> Result<Vec<Param>, FrontendError> {
        let mut params = Vec::new();
        if self.eat(TokenKind::Punctuation, ")") {
            return Ok(params);
        }
        if self.at_kw("void") && self.peek_at(1).is_some_and(|t| t.is(TokenKind::Punctuation, ")")) {
            self.pos += 2;
            return Ok(params);
        }
        loop {
            let span = self.span();
            let (_, ty) = self.type_spec()?;
            let Some(ty) = ty else {
                return Err(self.unexpected(&["int", "bool"]));
            };
            let name = self.ident()?;
            if self.at_punct("[") {
                return Err(self.unsupported("arrays"));
            }
            params.push(Param { name, ty, span });
            if self.eat(TokenKind::Punctuation, ")") {
                return Ok(params);
            }
            if self.at_op("...") {
                return Err(self.unsupported("varargs"));
            }
            if self.at_punct(".") {
                return Err(self.unsupported("varargs"));
            }
            self.expect_punct(",")?;
        }
    }

    /// Parses the remainder of `ty first [= e] (, name [= e])* ;`.
    fn declarators(
        &mut self,
        ty: Type,
        first: String,
        first_span: Span,
        span: Span,
    ) -> Result<Decl, FrontendError> {
        let mut declarators = Vec::new();
        let mut name = first;
        let mut name_span = first_span;
        loop {
            if self.at_punct("[") {
                return Err(self.unsupported("arrays"));
            }
            let init = if self.eat(TokenKind::Operator, "=") {
                Some(self.expr()?)
            } else {
                None
            };
            declarators.push(Declarator {
                name,
                init,
                span: name_span,
            });
            if self.eat(TokenKind::Punctuation, ";") {
                return Ok(Decl {
                    ty,
                    declarators,
                    span,
                });
            }
            if !self.eat(TokenKind::Punctuation, ",") {
                return Err(self.unexpected(&[",", ";", "="]));
            }
            if self.at_op("*") {
                return Err(self.unsupported("pointers"));
            }
            name_span = self.span();
            name = self.ident()?;
        }
    }

    fn block_body(&mut self) -> Result<Vec<Stmt>, FrontendError> {
        self.expect_punct("{")?;
        let mut body = Vec::new();
        while !self.eat(TokenKind::Punctuation, "}") {
            if self.peek().is_none() {
                return Err(self.unexpected(&["}"]));
            }
            body.push(self.stmt()?);
        }
        Ok(body)
    }

    fn paren_expr(&mut self) -> Result<Expr, FrontendError> {
        self.expect_punct("(")?;
        let e = self.expr()?;
        self.expect_punct(")")?;
        Ok(e)
    }

    fn stmt(&mut self) -> Result<Stmt, FrontendError> {
        let span = self.span();
        let Some(tok) = self.peek() else {
            return Err(self.unexpected(&["statement"]));
        };
        let kind = match (tok.kind, tok.text.as_str()) {
            (TokenKind::Punctuation, "{") => StmtKind::Block(self.block_body()?),
            (TokenKind::Punctuation, ";") => {
                self.pos += 1;
                StmtKind::Empty
            }
            (TokenKind::Keyword, "if") => {
                self.pos += 1;
                let cond = self.paren_expr()?;
                let then_branch = Box::new(self.stmt()?);
                // dangling else binds to the nearest if
                let else_branch = if self.eat(TokenKind::Keyword, "else") {
                    Some(Box::new(self.stmt()?))
                } else {
                    None
                };
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                }
            }
            (TokenKind::Keyword, "while") => {
                self.pos += 1;
                let cond = self.paren_expr()?;
                let body = Box::new(self.stmt()?);
                StmtKind::While { cond, body }
            }
            (TokenKind::Keyword, "do") => {
                self.pos += 1;
                let body = Box::new(self.stmt()?);
                self.expect(TokenKind::Keyword, "while")?;
                let cond = self.paren_expr()?;
                self.expect_punct(";")?;
                StmtKind::DoWhile { body, cond }
            }
            (TokenKind::Keyword, "for") => return Err(self.unsupported("for loops")),
            (TokenKind::Keyword, "switch") => {
                self.pos += 1;
                let scrutinee = self.paren_expr()?;
                StmtKind::Switch {
                    scrutinee,
                    cases: self.switch_body()?,
                }
            }
            (TokenKind::Keyword, "break") => {
                self.pos += 1;
                self.expect_punct(";")?;
                StmtKind::Break
            }
            (TokenKind::Keyword, "continue") => {
                self.pos += 1;
                self.expect_punct(";")?;
                StmtKind::Continue
            }
            (TokenKind::Keyword, "goto") => {
                self.pos += 1;
                let label = self.ident()?;
                self.expect_punct(";")?;
                StmtKind::Goto(label)
            }
            (TokenKind::Keyword, "return") => {
                self.pos += 1;
                let value = if self.at_punct(";") {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect_punct(";")?;
                StmtKind::Return(value)
            }
            (TokenKind::Keyword, "case" | "default") => {
                return Err(self.unexpected(&["statement"]));
            }
            (TokenKind::Keyword, "extern") => return Err(self.unexpected(&["statement"])),
            (TokenKind::Keyword, _) if self.at_type() => {
                let (_, ty) = self.type_spec()?;
                let Some(ty) = ty else {
                    return Err(self.unexpected(&["int", "bool"]));
                };
                let name_span = self.span();
                let name = self.ident()?;
                if self.at_punct("(") {
                    return Err(self.unsupported("nested function declarations"));
                }
                StmtKind::Decl(self.declarators(ty, name, name_span, span)?)
            }
            (TokenKind::Identifier, "assert")
                if self.peek_at(1).is_some_and(|t| t.is(TokenKind::Punctuation, "(")) =>
            {
                self.pos += 1;
                let cond = self.paren_expr()?;
                self.expect_punct(";")?;
                StmtKind::Assert(cond)
            }
            (TokenKind::Identifier, _)
                if self.peek_at(1).is_some_and(|t| t.is(TokenKind::Punctuation, ":")) =>
            {
                let label = self.ident()?;
                self.pos += 1;
                // a label right before `}` labels an empty statement
                let stmt = if self.at_punct("}") {
                    Stmt::new(StmtKind::Empty, self.span())
                } else {
                    self.stmt()?
                };
                StmtKind::Labeled {
                    label,
                    stmt: Box::new(stmt),
                }
            }
            (TokenKind::Operator, "++" | "--") => {
                let op = if tok.text == "++" { BinOp::Add } else { BinOp::Sub };
                self.pos += 1;
                let target_span = self.span();
                let target = self.ident()?;
                self.expect_punct(";")?;
                increment(target, op, target_span)
            }
            (TokenKind::Identifier, _) => self.simple_stmt()?,
            (TokenKind::Operator, "*") => return Err(self.unsupported("pointers")),
            _ => return Err(self.unexpected(&["statement"])),
        };
        Ok(Stmt::new(kind, span))
    }

    /// Assignment, compound assignment, increment, or call statement.
    fn simple_stmt(&mut self) -> Result<StmtKind, FrontendError> {
        let target_span = self.span();
        if self.peek_at(1).is_some_and(|t| t.is(TokenKind::Punctuation, "(")) {
            let call = self.expr()?;
            if call.as_call().is_none() {
                return Err(self.unexpected(&[";"]));
            }
            self.expect_punct(";")?;
            return Ok(StmtKind::Expr(call));
        }
        let target = self.ident()?;
        if self.at_punct("[") {
            return Err(self.unsupported("arrays"));
        }
        if self.at_punct(".") || self.at_op("->") {
            return Err(self.unsupported("structs"));
        }
        let Some(tok) = self.peek() else {
            return Err(self.unexpected(&["="]));
        };
        let compound = match tok.text.as_str() {
            "=" => None,
            "+=" => Some(BinOp::Add),
            "-=" => Some(BinOp::Sub),
            "*=" => Some(BinOp::Mul),
            "/=" => Some(BinOp::Div),
            "%=" => Some(BinOp::Rem),
            "++" | "--" => {
                let op = if tok.text == "++" { BinOp::Add } else { BinOp::Sub };
                self.pos += 1;
                self.expect_punct(";")?;
                return Ok(increment(target, op, target_span));
            }
            _ => return Err(self.unexpected(&["=", "+=", "-=", "*=", "/=", "%=", "++", "--", "("])),
        };
        if tok.kind != TokenKind::Operator {
            return Err(self.unexpected(&["="]));
        }
        self.pos += 1;
        let rhs = self.expr()?;
        self.expect_punct(";")?;
        let value = match compound {
            None => rhs,
            Some(op) => {
                let span = rhs.span;
                Expr::new(
                    ExprKind::Binary(
                        op,
                        Box::new(Expr::new(ExprKind::Var(target.clone()), target_span)),
                        Box::new(rhs),
                    ),
                    span,
                )
            }
        };
        Ok(StmtKind::Assign { target, value })
    }

    fn switch_body(&mut self) -> Result<Vec<SwitchCase>, FrontendError> {
        self.expect_punct("{")?;
        let mut cases: Vec<SwitchCase> = Vec::new();
        loop {
            let span = self.span();
            if self.eat(TokenKind::Punctuation, "}") {
                return Ok(cases);
            }
            if self.eat(TokenKind::Keyword, "case") {
                let negative = self.eat(TokenKind::Operator, "-");
                let value = match self.peek().and_then(Token::int_value) {
                    Some(v) => v,
                    None => return Err(self.unexpected(&["integer literal"])),
                };
                self.pos += 1;
                self.expect_punct(":")?;
                cases.push(SwitchCase {
                    label: Some(if negative { value.wrapping_neg() } else { value }),
                    body: Vec::new(),
                    span,
                });
            } else if self.eat(TokenKind::Keyword, "default") {
                self.expect_punct(":")?;
                cases.push(SwitchCase {
                    label: None,
                    body: Vec::new(),
                    span,
                });
            } else {
                let stmt = self.stmt()?;
                match cases.last_mut() {
                    Some(case) => case.body.push(stmt),
                    None => return Err(FrontendError::Parse {
                        line: span.line,
                        column: span.column,
                        found: "statement".into(),
                        expected: vec!["case".into(), "default".into()],
                    }),
                }
            }
        }
    }

    pub fn expr(&mut self) -> Result<Expr, FrontendError> {
        let e = self.binary(1)?;
        if self.at_op("?") {
            return Err(self.unsupported("conditional operator"));
        }
        if self.at_op("=") || self.at_op("+=") || self.at_op("-=") {
            return Err(self.unsupported("assignment inside expressions"));
        }
        Ok(e)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        let t = self.peek()?;
        if t.kind != TokenKind::Operator {
            return None;
        }
        Some(match t.text.as_str() {
            "||" => BinOp::Or,
            "&&" => BinOp::And,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            _ => return None,
        })
    }

    /// Precedence climbing over left-associative binary operators.
    fn binary(&mut self, min_prec: u8) -> Result<Expr, FrontendError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            let span = self.span();
            self.pos += 1;
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, FrontendError> {
        let span = self.span();
        if self.eat(TokenKind::Operator, "-") {
            // fold `-literal` so that negative literals round-trip through printing
            let operand = self.unary()?;
            if let ExprKind::Int(n) = operand.kind {
                if n > 0 && !matches!(self.tokens.get(self.pos - 1), Some(t) if t.text == ")") {
                    return Ok(Expr::new(ExprKind::Int(-n), span));
                }
            }
            return Ok(Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(operand)), span));
        }
        if self.eat(TokenKind::Operator, "!") {
            let operand = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(UnOp::Not, Box::new(operand)), span));
        }
        if self.eat(TokenKind::Operator, "+") {
            return self.unary();
        }
        if self.at_op("&") || self.at_op("*") {
            return Err(self.unsupported("pointers"));
        }
        if self.at_op("++") || self.at_op("--") {
            return Err(self.unsupported("increment inside expressions"));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, FrontendError> {
        let e = self.primary()?;
        if self.at_punct("[") {
            return Err(self.unsupported("arrays"));
        }
        if self.at_punct(".") || self.at_op("->") {
            return Err(self.unsupported("structs"));
        }
        if self.at_op("++") || self.at_op("--") {
            return Err(self.unsupported("increment inside expressions"));
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, FrontendError> {
        let span = self.span();
        let Some(tok) = self.peek() else {
            return Err(self.unexpected(&["expression"]));
        };
        match tok.kind {
            TokenKind::IntLiteral => {
                self.pos += 1;
                let value = tok.int_value().ok_or(FrontendError::Overflow {
                    literal: tok.text.clone(),
                    line: tok.line,
                    column: tok.column,
                })?;
                Ok(Expr::new(ExprKind::Int(value), span))
            }
            TokenKind::Keyword if tok.text == "true" || tok.text == "false" => {
                self.pos += 1;
                Ok(Expr::new(ExprKind::Bool(tok.text == "true"), span))
            }
            TokenKind::Identifier => {
                self.pos += 1;
                if self.eat(TokenKind::Punctuation, "(") {
                    let mut args = Vec::new();
                    if !self.eat(TokenKind::Punctuation, ")") {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(TokenKind::Punctuation, ")") {
                                break;
                            }
                            self.expect_punct(",")?;
                        }
                    }
                    let site = CallSiteId(self.next_site);
                    self.next_site += 1;
                    Ok(Expr::new(
                        ExprKind::Call {
                            callee: tok.text.clone(),
                            args,
                            site,
                        },
                        span,
                    ))
                } else {
                    Ok(Expr::new(ExprKind::Var(tok.text.clone()), span))
                }
            }
            TokenKind::Punctuation if tok.text == "(" => {
                self.pos += 1;
                if self.at_type() {
                    return Err(self.unsupported("casts"));
                }
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => Err(self.unexpected(&["expression"])),
        }
    }
}

fn increment(target: String, op: BinOp, span: Span) -> StmtKind {
    StmtKind::Assign {
        value: Expr::new(
            ExprKind::Binary(
                op,
                Box::new(Expr::new(ExprKind::Var(target.clone()), span)),
                Box::new(Expr::new(ExprKind::Int(1), span)),
            ),
            span,
        ),
        target,
    }
}
