use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::ast::*;
use super::error::ParseError;
use super::lexer::{tokenize, Tok, Token};

/// Parses minilang source into a validated [`Program`].
///
/// Every field access and method call receives its [`DecisionPointId`]
/// here; the assignment depends only on AST position.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    parse_named(source, "<input>")
}

pub fn parse_named(source: &str, source_name: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut program = p.program(source_name)?;
    for f in program.functions.iter_mut() {
        number_function(f);
    }
    for c in program.classes.iter_mut() {
        for m in c.methods.iter_mut() {
            number_function(m);
        }
    }
    validate(&program)?;
    Ok(program)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

fn placeholder_site() -> DecisionPointId {
    DecisionPointId {
        function: String::new(),
        path: Vec::new(),
        expr: 0,
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn line(&self) -> u32 {
        self.tokens[self.pos].line
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl ToString) -> ParseError {
        let t = &self.tokens[self.pos];
        ParseError::syntax(t.line, t.col, message)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(alloc::format!("expected {what}")))
        }
    }

    fn eat(&mut self, want: &Tok) -> bool {
        if self.peek() == want {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            _ => Err(self.error(alloc::format!("expected {what}"))),
        }
    }

    fn program(&mut self, source_name: &str) -> Result<Program, ParseError> {
        let mut classes = Vec::new();
        let mut functions = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof => break,
                Tok::Class => classes.push(self.class_decl()?),
                Tok::Fn => functions.push(self.fun_decl(None)?),
                _ => return Err(self.error("expected `class` or `fn`")),
            }
        }
        Ok(Program {
            classes,
            functions,
            source_name: source_name.to_string(),
        })
    }

    fn class_decl(&mut self) -> Result<ClassDecl, ParseError> {
        let class_line = self.line();
        self.expect(Tok::Class, "`class`")?;
        let name = self.ident("class name")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut fields = Vec::new();
        let mut methods = Vec::new();
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Var => {
                    let line = self.line();
                    self.bump();
                    let fname = self.ident("field name")?;
                    let ty = self.opt_type()?;
                    let init = if self.eat(&Tok::Assign) {
                        Some(self.literal()?)
                    } else {
                        None
                    };
                    self.expect(Tok::Semi, "`;`")?;
                    fields.push(FieldDecl {
                        name: fname,
                        ty,
                        init,
                        line,
                    });
                }
                Tok::Fn => methods.push(self.fun_decl(Some(&name))?),
                _ => return Err(self.error("expected `var`, `fn` or `}` in class body")),
            }
        }
        Ok(ClassDecl {
            name,
            fields,
            methods,
            line: class_line,
        })
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        let neg = self.eat(&Tok::Minus);
        let lit = match self.bump() {
            Tok::Int(v) => Literal::Int(if neg { -v } else { v }),
            _ if neg => return Err(self.error("expected integer literal after `-`")),
            Tok::Null => Literal::Null,
            Tok::True => Literal::Bool(true),
            Tok::False => Literal::Bool(false),
            Tok::Str(s) => Literal::Str(s),
            _ => {
                self.pos -= 1;
                return Err(self.error("expected literal"));
            }
        };
        Ok(lit)
    }

    fn opt_type(&mut self) -> Result<Option<TypeName>, ParseError> {
        if self.eat(&Tok::Colon) {
            Ok(Some(self.type_name()?))
        } else {
            Ok(None)
        }
    }

    fn type_name(&mut self) -> Result<TypeName, ParseError> {
        let name = self.ident("type name")?;
        Ok(match name.as_str() {
            "int" => TypeName::Int,
            "bool" => TypeName::Bool,
            "str" => TypeName::Str,
            _ => TypeName::Class(name),
        })
    }

    fn fun_decl(&mut self, owner: Option<&str>) -> Result<FunDecl, ParseError> {
        let line = self.line();
        self.expect(Tok::Fn, "`fn`")?;
        let short = self.ident("function name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                let pname = self.ident("parameter name")?;
                let ty = self.opt_type()?;
                params.push(Param { name: pname, ty });
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma, "`,` or `)`")?;
            }
        }
        let return_type = if self.eat(&Tok::Arrow) {
            Some(self.type_name()?)
        } else {
            None
        };
        let body = self.block()?;
        let name = match owner {
            Some(c) => alloc::format!("{c}.{short}"),
            None => short,
        };
        Ok(FunDecl {
            name,
            params,
            return_type,
            body,
            owner: owner.map(String::from),
            line,
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while !self.eat(&Tok::RBrace) {
            if *self.peek() == Tok::Eof {
                return Err(self.error("unexpected end of input, expected `}`"));
            }
            stmts.push(self.statement()?);
        }
        Ok(stmts)
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        let line = self.line();
        let kind = match self.peek() {
            Tok::Var => {
                self.bump();
                let name = self.ident("variable name")?;
                let ty = self.opt_type()?;
                let init = if self.eat(&Tok::Assign) {
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::VarDecl { name, ty, init }
            }
            Tok::Return => {
                self.bump();
                let value = if *self.peek() == Tok::Semi {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Return(value)
            }
            Tok::If => return self.if_statement(),
            Tok::While => {
                self.bump();
                let cond = self.expr()?;
                let body = self.block()?;
                StmtKind::While { cond, body }
            }
            Tok::Assert => {
                self.bump();
                if *self.peek() != Tok::LParen {
                    return Err(self.error("expected `(` after `assert`"));
                }
                let e = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Assert(e)
            }
            _ => {
                let e = self.expr()?;
                if self.eat(&Tok::Assign) {
                    let target = match e {
                        Expr::Var(name) => AssignTarget::Var(name),
                        Expr::Field {
                            object,
                            field,
                            site,
                        } => AssignTarget::Field {
                            object: *object,
                            field,
                            site,
                        },
                        _ => return Err(ParseError::syntax(line, 1, "invalid assignment target")),
                    };
                    let value = self.expr()?;
                    self.expect(Tok::Semi, "`;`")?;
                    StmtKind::Assign { target, value }
                } else {
                    self.expect(Tok::Semi, "`;`")?;
                    StmtKind::Expr(e)
                }
            }
        };
        Ok(Stmt { kind, line })
    }

    fn if_statement(&mut self) -> Result<Stmt, ParseError> {
        let line = self.line();
        self.expect(Tok::If, "`if`")?;
        let cond = self.expr()?;
        let then_block = self.block()?;
        let else_block = if self.eat(&Tok::Else) {
            if *self.peek() == Tok::If {
                vec![self.if_statement()?]
            } else {
                self.block()?
            }
        } else {
            Vec::new()
        };
        Ok(Stmt {
            kind: StmtKind::If {
                cond,
                then_block,
                else_block,
            },
            line,
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> Result<Expr, ParseError> {
        const LEVELS: &[&[(Tok, BinOp)]] = &[
            &[(Tok::OrOr, BinOp::Or)],
            &[(Tok::AndAnd, BinOp::And)],
            &[(Tok::EqEq, BinOp::Eq), (Tok::NotEq, BinOp::Ne)],
            &[
                (Tok::Lt, BinOp::Lt),
                (Tok::Gt, BinOp::Gt),
                (Tok::Le, BinOp::Le),
                (Tok::Ge, BinOp::Ge),
            ],
            &[(Tok::Plus, BinOp::Add), (Tok::Minus, BinOp::Sub)],
            &[(Tok::Star, BinOp::Mul), (Tok::Slash, BinOp::Div)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        'outer: loop {
            for (tok, op) in LEVELS[level] {
                if self.peek() == tok {
                    self.bump();
                    let rhs = self.binary(level + 1)?;
                    lhs = Expr::Binary {
                        op: *op,
                        lhs: Box::new(lhs),
                        rhs: Box::new(rhs),
                    };
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let op = match self.peek() {
            Tok::Bang => UnOp::Not,
            Tok::Minus => UnOp::Neg,
            _ => return self.postfix(),
        };
        self.bump();
        let operand = self.unary()?;
        Ok(Expr::Unary {
            op,
            operand: Box::new(operand),
        })
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        while self.eat(&Tok::Dot) {
            let member = self.ident("member name")?;
            if *self.peek() == Tok::LParen {
                let args = self.args()?;
                e = Expr::MethodCall {
                    receiver: Box::new(e),
                    method: member,
                    args,
                    site: placeholder_site(),
                };
            } else {
                e = Expr::Field {
                    object: Box::new(e),
                    field: member,
                    site: placeholder_site(),
                };
            }
        }
        Ok(e)
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat(&Tok::RParen) {
                return Ok(args);
            }
            self.expect(Tok::Comma, "`,` or `)`")?;
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Literal(Literal::Int(v)))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Literal(Literal::Str(s)))
            }
            Tok::True => {
                self.bump();
                Ok(Expr::Literal(Literal::Bool(true)))
            }
            Tok::False => {
                self.bump();
                Ok(Expr::Literal(Literal::Bool(false)))
            }
            Tok::Null => {
                self.bump();
                Ok(Expr::Literal(Literal::Null))
            }
            Tok::This => {
                self.bump();
                Ok(Expr::This)
            }
            Tok::New => {
                self.bump();
                let class = self.ident("class name")?;
                self.expect(Tok::LParen, "`(`")?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::New(class))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek_at(0) == Tok::LParen {
                    let args = self.args()?;
                    Ok(Expr::Call {
                        function: name,
                        args,
                    })
                } else {
                    Ok(Expr::Var(name))
                }
            }
            _ => Err(self.error("expected expression")),
        }
    }
}

fn number_function(f: &mut FunDecl) {
    let fname = f.name.clone();
    for (i, stmt) in f.body.iter_mut().enumerate() {
        number_stmt(stmt, &fname, vec![i as u32]);
    }
}

fn number_stmt(stmt: &mut Stmt, function: &str, path: Vec<u32>) {
    let mut counter = 0u32;
    let mut site = |s: &mut DecisionPointId| {
        *s = DecisionPointId {
            function: function.to_string(),
            path: path.clone(),
            expr: counter,
        };
        counter += 1;
    };
    match &mut stmt.kind {
        StmtKind::VarDecl { init, .. } => {
            if let Some(e) = init {
                number_expr(e, &mut site);
            }
        }
        StmtKind::Assign { target, value } => {
            if let AssignTarget::Field {
                object, site: s, ..
            } = target
            {
                site(s);
                number_expr(object, &mut site);
            }
            number_expr(value, &mut site);
        }
        StmtKind::Return(e) => {
            if let Some(e) = e {
                number_expr(e, &mut site);
            }
        }
        StmtKind::Assert(e) | StmtKind::Expr(e) => number_expr(e, &mut site),
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            number_expr(cond, &mut site);
            number_block(then_block, function, &path, 0);
            number_block(else_block, function, &path, 1);
        }
        StmtKind::While { cond, body } => {
            number_expr(cond, &mut site);
            number_block(body, function, &path, 0);
        }
    }
}

fn number_block(block: &mut [Stmt], function: &str, parent: &[u32], branch: u32) {
    for (i, s) in block.iter_mut().enumerate() {
        let mut path = parent.to_vec();
        path.push(branch);
        path.push(i as u32);
        number_stmt(s, function, path);
    }
}

// Pre-order, matching `Expr::collect_sites`.
fn number_expr(e: &mut Expr, site: &mut impl FnMut(&mut DecisionPointId)) {
    match e {
        Expr::Literal(_) | Expr::Var(_) | Expr::This | Expr::New(_) => {}
        Expr::Field {
            object, site: s, ..
        } => {
            site(s);
            number_expr(object, site);
        }
        Expr::MethodCall {
            receiver,
            args,
            site: s,
            ..
        } => {
            site(s);
            number_expr(receiver, site);
            for a in args {
                number_expr(a, site);
            }
        }
        Expr::Call { args, .. } => {
            for a in args {
                number_expr(a, site);
            }
        }
        Expr::Binary { lhs, rhs, .. } => {
            number_expr(lhs, site);
            number_expr(rhs, site);
        }
        Expr::Unary { operand, .. } => number_expr(operand, site),
    }
}

fn validate(program: &Program) -> Result<(), ParseError> {
    let mut seen = BTreeSet::new();
    for c in &program.classes {
        if !seen.insert(c.name.as_str()) {
            return Err(ParseError::DuplicateName {
                kind: "class",
                name: c.name.clone(),
                line: c.line,
            });
        }
    }
    let mut seen = BTreeSet::new();
    for f in &program.functions {
        if !seen.insert(f.name.as_str()) {
            return Err(ParseError::DuplicateName {
                kind: "function",
                name: f.name.clone(),
                line: f.line,
            });
        }
    }
    for c in &program.classes {
        let mut members = BTreeSet::new();
        for field in &c.fields {
            if !members.insert(field.name.as_str()) {
                return Err(ParseError::DuplicateName {
                    kind: "member",
                    name: alloc::format!("{}.{}", c.name, field.name),
                    line: field.line,
                });
            }
            if let Some(ty) = &field.ty {
                check_type(program, ty, field.line)?;
            }
        }
        for m in &c.methods {
            if !members.insert(m.short_name()) {
                return Err(ParseError::DuplicateName {
                    kind: "member",
                    name: m.name.clone(),
                    line: m.line,
                });
            }
        }
    }
    for f in program
        .functions
        .iter()
        .chain(program.classes.iter().flat_map(|c| c.methods.iter()))
    {
        Resolver::new(program, f)?.block(&f.body)?;
    }
    Ok(())
}

fn check_type(program: &Program, ty: &TypeName, line: u32) -> Result<(), ParseError> {
    match ty {
        TypeName::Class(name) if program.class(name).is_none() => Err(ParseError::UnresolvedName {
            kind: "type",
            name: name.clone(),
            line,
        }),
        _ => Ok(()),
    }
}

/// Static name resolution for one function body.
struct Resolver<'p> {
    program: &'p Program,
    is_method: bool,
    scopes: Vec<Vec<String>>,
}

impl<'p> Resolver<'p> {
    fn new(program: &'p Program, f: &FunDecl) -> Result<Self, ParseError> {
        let mut params: Vec<String> = Vec::new();
        for p in &f.params {
            if params.contains(&p.name) {
                return Err(ParseError::DuplicateName {
                    kind: "parameter",
                    name: p.name.clone(),
                    line: f.line,
                });
            }
            if let Some(ty) = &p.ty {
                check_type(program, ty, f.line)?;
            }
            params.push(p.name.clone());
        }
        if let Some(ty) = &f.return_type {
            check_type(program, ty, f.line)?;
        }
        Ok(Resolver {
            program,
            is_method: f.owner.is_some(),
            scopes: vec![params],
        })
    }

    fn visible(&self, name: &str) -> bool {
        self.scopes.iter().any(|s| s.iter().any(|n| n == name))
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<(), ParseError> {
        self.scopes.push(Vec::new());
        for s in stmts {
            self.stmt(s)?;
        }
        self.scopes.pop();
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), ParseError> {
        let line = s.line;
        match &s.kind {
            StmtKind::VarDecl { name, ty, init } => {
                if let Some(ty) = ty {
                    check_type(self.program, ty, line)?;
                }
                if let Some(e) = init {
                    self.expr(e, line)?;
                }
                if self.visible(name) {
                    return Err(ParseError::DuplicateName {
                        kind: "variable",
                        name: name.clone(),
                        line,
                    });
                }
                self.scopes.last_mut().expect("scope").push(name.clone());
            }
            StmtKind::Assign { target, value } => {
                match target {
                    AssignTarget::Var(name) => self.var(name, line)?,
                    AssignTarget::Field { object, .. } => self.expr(object, line)?,
                }
                self.expr(value, line)?;
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e, line)?;
                }
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.expr(cond, line)?;
                self.block(then_block)?;
                self.block(else_block)?;
            }
            StmtKind::While { cond, body } => {
                self.expr(cond, line)?;
                self.block(body)?;
            }
            StmtKind::Assert(e) | StmtKind::Expr(e) => self.expr(e, line)?,
        }
        Ok(())
    }

    fn var(&self, name: &str, line: u32) -> Result<(), ParseError> {
        if self.visible(name) {
            Ok(())
        } else {
            Err(ParseError::UnresolvedName {
                kind: "variable",
                name: name.to_string(),
                line,
            })
        }
    }

    fn expr(&self, e: &Expr, line: u32) -> Result<(), ParseError> {
        match e {
            Expr::Literal(_) => Ok(()),
            Expr::Var(name) => self.var(name, line),
            Expr::This if self.is_method => Ok(()),
            Expr::This => Err(ParseError::UnresolvedName {
                kind: "variable",
                name: "this".to_string(),
                line,
            }),
            Expr::Field { object, .. } => self.expr(object, line),
            Expr::MethodCall { receiver, args, .. } => {
                self.expr(receiver, line)?;
                args.iter().try_for_each(|a| self.expr(a, line))
            }
            Expr::Call { function, args } => {
                if self.program.function(function).is_none() {
                    return Err(ParseError::UnresolvedName {
                        kind: "function",
                        name: function.clone(),
                        line,
                    });
                }
                args.iter().try_for_each(|a| self.expr(a, line))
            }
            Expr::New(class) => check_type(self.program, &TypeName::Class(class.clone()), line)
                .map_err(|_| ParseError::UnresolvedName {
                    kind: "class",
                    name: class.clone(),
                    line,
                }),
            Expr::Binary { lhs, rhs, .. } => {
                self.expr(lhs, line)?;
                self.expr(rhs, line)
            }
            Expr::Unary { operand, .. } => self.expr(operand, line),
        }
    }
}
