use std::collections::HashMap;
use std::fmt;

/// Interned symbol id. Ids are dense and assigned in first-intern order.
pub type SymId = i64;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolTable {
    ids: HashMap<String, SymId>,
    names: Vec<String>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, s: &str) -> SymId {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.names.len() as SymId;
        self.names.push(s.to_string());
        self.ids.insert(s.to_string(), id);
        id
    }

    pub fn lookup(&self, s: &str) -> Option<SymId> {
        self.ids.get(s).copied()
    }

    pub fn resolve(&self, id: SymId) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// A cell value as seen outside the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Sym(SymId),
    Num(i64),
}

impl Value {
    pub fn raw(self) -> i64 {
        match self {
            Value::Sym(id) => id,
            Value::Num(n) => n,
        }
    }

    pub fn display<'a>(&self, symbols: &'a SymbolTable) -> ValueDisplay<'a> {
        ValueDisplay {
            value: *self,
            symbols,
        }
    }
}

pub struct ValueDisplay<'a> {
    value: Value,
    symbols: &'a SymbolTable,
}

impl fmt::Display for ValueDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value {
            Value::Sym(id) => f.write_str(self.symbols.resolve(id)),
            Value::Num(n) => write!(f, "{n}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_dense_and_stable() {
        let mut t = SymbolTable::new();
        assert_eq!(t.intern("L1"), 0);
        assert_eq!(t.intern("L2"), 1);
        assert_eq!(t.intern("L1"), 0);
        assert_eq!(t.resolve(1), "L2");
        assert_eq!(t.lookup("L3"), None);
        assert_eq!(t.len(), 2);
    }
}
