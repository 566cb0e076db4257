//! Syntax tree for minilang programs.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

/// A parsed program: classes and free functions in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub classes: Vec<ClassDecl>,
    pub functions: Vec<FunDecl>,
    pub source_name: String,
}

impl Program {
    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&FunDecl> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Looks up a function by its qualified name (`f` or `Class.m`).
    pub fn function_by_qualified(&self, qualified: &str) -> Option<&FunDecl> {
        match qualified.split_once('.') {
            Some((class, method)) => self.class(class)?.method(method),
            None => self.function(qualified),
        }
    }

    /// Every dereference site of the program, in declaration order.
    pub fn decision_points(&self) -> Vec<DecisionPointId> {
        let mut out = Vec::new();
        for f in self
            .functions
            .iter()
            .chain(self.classes.iter().flat_map(|c| c.methods.iter()))
        {
            for stmt in &f.body {
                stmt.collect_sites(&mut out);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDecl {
    pub name: String,
    pub fields: Vec<FieldDecl>,
    pub methods: Vec<FunDecl>,
    pub line: u32,
}

impl ClassDecl {
    pub fn method(&self, name: &str) -> Option<&FunDecl> {
        self.methods.iter().find(|m| m.short_name() == name)
    }

    pub fn has_field(&self, name: &str) -> bool {
        self.fields.iter().any(|f| f.name == name)
    }

    /// True when the class has a field or a method called `member`.
    pub fn declares(&self, member: &str) -> bool {
        self.has_field(member) || self.method(member).is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDecl {
    pub name: String,
    pub ty: Option<TypeName>,
    pub init: Option<Literal>,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunDecl {
    /// Qualified name: `f` for free functions, `Class.m` for methods.
    pub name: String,
    pub params: Vec<Param>,
    pub return_type: Option<TypeName>,
    pub body: Vec<Stmt>,
    /// Owning class, for methods.
    pub owner: Option<String>,
    pub line: u32,
}

impl FunDecl {
    /// Unqualified name as written in the source.
    pub fn short_name(&self) -> &str {
        self.name.rsplit('.').next().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: Option<TypeName>,
}

/// A type annotation. Builtins are `int`, `bool` and `str`; anything else names a class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeName {
    Int,
    Bool,
    Str,
    Class(String),
}

impl TypeName {
    pub fn class_name(&self) -> Option<&str> {
        match self {
            TypeName::Class(c) => Some(c),
            _ => None,
        }
    }
}

impl fmt::Display for TypeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeName::Int => f.write_str("int"),
            TypeName::Bool => f.write_str("bool"),
            TypeName::Str => f.write_str("str"),
            TypeName::Class(c) => f.write_str(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Null,
    Int(i64),
    Bool(bool),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub line: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    VarDecl {
        name: String,
        ty: Option<TypeName>,
        init: Option<Expr>,
    },
    Assign {
        target: AssignTarget,
        value: Expr,
    },
    Return(Option<Expr>),
    If {
        cond: Expr,
        then_block: Vec<Stmt>,
        else_block: Vec<Stmt>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    Assert(Expr),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AssignTarget {
    Var(String),
    Field {
        object: Expr,
        field: String,
        site: DecisionPointId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Literal),
    Var(String),
    This,
    Field {
        object: Box<Expr>,
        field: String,
        site: DecisionPointId,
    },
    MethodCall {
        receiver: Box<Expr>,
        method: String,
        args: Vec<Expr>,
        site: DecisionPointId,
    },
    Call {
        function: String,
        args: Vec<Expr>,
    },
    New(String),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Unary {
        op: UnOp,
        operand: Box<Expr>,
    },
}

impl Stmt {
    pub(crate) fn collect_sites(&self, out: &mut Vec<DecisionPointId>) {
        match &self.kind {
            StmtKind::VarDecl { init, .. } => {
                if let Some(e) = init {
                    e.collect_sites(out);
                }
            }
            StmtKind::Assign { target, value } => {
                if let AssignTarget::Field { object, site, .. } = target {
                    out.push(site.clone());
                    object.collect_sites(out);
                }
                value.collect_sites(out);
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    e.collect_sites(out);
                }
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                cond.collect_sites(out);
                for s in then_block.iter().chain(else_block) {
                    s.collect_sites(out);
                }
            }
            StmtKind::While { cond, body } => {
                cond.collect_sites(out);
                for s in body {
                    s.collect_sites(out);
                }
            }
            StmtKind::Assert(e) | StmtKind::Expr(e) => e.collect_sites(out),
        }
    }
}

impl Expr {
    fn collect_sites(&self, out: &mut Vec<DecisionPointId>) {
        match self {
            Expr::Literal(_) | Expr::Var(_) | Expr::This | Expr::New(_) => {}
            Expr::Field { object, site, .. } => {
                out.push(site.clone());
                object.collect_sites(out);
            }
            Expr::MethodCall {
                receiver,
                args,
                site,
                ..
            } => {
                out.push(site.clone());
                receiver.collect_sites(out);
                for a in args {
                    a.collect_sites(out);
                }
            }
            Expr::Call { args, .. } => {
                for a in args {
                    a.collect_sites(out);
                }
            }
            Expr::Binary { lhs, rhs, .. } => {
                lhs.collect_sites(out);
                rhs.collect_sites(out);
            }
            Expr::Unary { operand, .. } => operand.collect_sites(out),
        }
    }
}

/// Identity of a dereference site, derived purely from its AST position.
///
/// `path` addresses the enclosing statement: the top-level statement index,
/// then for each nested block a (branch, index) pair, where branch is 0 for a
/// `then`/`while` body and 1 for an `else` body. `expr` numbers the
/// dereference sites of that statement in pre-order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DecisionPointId {
    pub function: String,
    pub path: Vec<u32>,
    pub expr: u32,
}

impl fmt::Display for DecisionPointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/", self.function)?;
        for (i, p) in self.path.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "/{}", self.expr)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseIdError(pub String);

impl fmt::Display for ParseIdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "malformed decision point id `{}`", self.0)
    }
}

impl core::error::Error for ParseIdError {}

impl FromStr for DecisionPointId {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseIdError(String::from(s));
        let mut parts = s.rsplitn(3, '/');
        let expr = parts.next().ok_or_else(bad)?;
        let path = parts.next().ok_or_else(bad)?;
        let function = parts.next().ok_or_else(bad)?;
        if function.is_empty() || path.is_empty() {
            return Err(bad());
        }
        let path = path
            .split('.')
            .map(|p| p.parse::<u32>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(DecisionPointId {
            function: String::from(function),
            path,
            expr: expr.parse().map_err(|_| bad())?,
        })
    }
}
