use alloc::rc::Rc;
use alloc::string::String;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;

use super::ast::{ClassDecl, Literal};

/// A runtime value. Objects are shared, mutable and compared by identity.
#[derive(Clone)]
pub enum Value {
    Null,
    Int(i64),
    Bool(bool),
    Str(Rc<str>),
    Object(ObjRef),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_object(&self) -> Option<&ObjRef> {
        match self {
            Value::Object(o) => Some(o),
            _ => None,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::Str(_) => "str",
            Value::Object(_) => "object",
        }
    }

    pub(crate) fn from_literal(lit: &Literal) -> Value {
        match lit {
            Literal::Null => Value::Null,
            Literal::Int(v) => Value::Int(*v),
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Str(s) => Value::Str(Rc::from(s.as_str())),
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Null, Value::Null) => true,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Object(a), Value::Object(b)) => a.ptr_eq(b),
            _ => false,
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => write!(f, "{s:?}"),
            other => write!(f, "{other}"),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => f.write_str(s),
            Value::Object(o) => write!(f, "<{}>", o.class_name()),
        }
    }
}

#[derive(Debug)]
pub struct Object {
    class: Rc<str>,
    fields: Vec<(String, Value)>,
}

/// Shared handle to a heap object.
#[derive(Clone)]
pub struct ObjRef(Rc<RefCell<Object>>);

impl ObjRef {
    /// Default construction: declared initializers, `null` for the rest.
    pub fn instantiate(class: &ClassDecl) -> ObjRef {
        let fields = class
            .fields
            .iter()
            .map(|f| {
                let v = f
                    .init
                    .as_ref()
                    .map(Value::from_literal)
                    .unwrap_or(Value::Null);
                (f.name.clone(), v)
            })
            .collect();
        ObjRef(Rc::new(RefCell::new(Object {
            class: Rc::from(class.name.as_str()),
            fields,
        })))
    }

    pub fn class_name(&self) -> Rc<str> {
        self.0.borrow().class.clone()
    }

    pub fn get(&self, field: &str) -> Option<Value> {
        self.0
            .borrow()
            .fields
            .iter()
            .find(|(n, _)| n == field)
            .map(|(_, v)| v.clone())
    }

    /// Writes a declared field; returns false when the class has no such field.
    pub fn set(&self, field: &str, value: Value) -> bool {
        let mut obj = self.0.borrow_mut();
        match obj.fields.iter_mut().find(|(n, _)| n == field) {
            Some(slot) => {
                slot.1 = value;
                true
            }
            None => false,
        }
    }

    pub fn field_names(&self) -> Vec<String> {
        self.0
            .borrow()
            .fields
            .iter()
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn ptr_eq(&self, other: &ObjRef) -> bool {
        Rc::ptr_eq(&self.0, &other.0)
    }
}

impl fmt::Debug for ObjRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.class_name())
    }
}
