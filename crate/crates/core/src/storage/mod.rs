//! Tuple storage: interned values, indexed relations and instances.

mod relation;
mod symbols;

use std::collections::{BTreeSet, HashMap};

pub use relation::{
    pattern_signature, signature_columns, signature_of, Relation, Scan, Signature, StorageError,
    Tuple,
};
pub use symbols::{SymId, SymbolTable, Value, ValueDisplay};

use crate::ast::AttrType;
use crate::ram::{bound_columns, walk_cond, walk_op, Cond, Op, RamProgram, RelId};

/// Bound-column signatures required per relation id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IndexPlan {
    pub signatures: Vec<BTreeSet<Vec<usize>>>,
}

impl IndexPlan {
    pub fn for_relation(&self, rel: RelId) -> &BTreeSet<Vec<usize>> {
        &self.signatures[rel]
    }
}

/// Collects the bound columns of every index scan, existence check and
/// aggregate probe. Versions of one relation share a plan so that swapping
/// them keeps every index valid.
pub fn plan_indexes(ram: &RamProgram) -> IndexPlan {
    let mut per_base: HashMap<RelId, BTreeSet<Vec<usize>>> = HashMap::new();
    let base = |r: RelId| ram.relations[r].base;
    let mut add = |rel: RelId, cols: Vec<usize>| {
        if !cols.is_empty() {
            per_base.entry(base(rel)).or_default().insert(cols);
        }
    };
    for q in ram.queries() {
        walk_op(q, &mut |op| match op {
            Op::IndexScan { rel, pattern, .. } => add(*rel, bound_columns(pattern)),
            Op::Aggregate {
                rel,
                pattern,
                filter,
                ..
            } => {
                add(*rel, bound_columns(pattern));
                walk_cond(filter, &mut |c| check_cond(c, &mut add));
            }
            Op::Filter { cond, .. } => walk_cond(cond, &mut |c| check_cond(c, &mut add)),
            Op::GuardedInsert { checks, .. } => {
                for c in checks {
                    add(c.rel, c.bound_columns());
                }
            }
            _ => {}
        });
    }
    let mut exit_conds = Vec::new();
    ram.main.walk(&mut |s| {
        if let crate::ram::Stmt::Exit(c) = s {
            exit_conds.push(c);
        }
    });
    for c in exit_conds {
        walk_cond(c, &mut |c| check_cond(c, &mut add));
    }
    IndexPlan {
        signatures: (0..ram.relations.len())
            .map(|r| per_base.get(&base(r)).cloned().unwrap_or_default())
            .collect(),
    }
}

fn check_cond(c: &Cond, add: &mut impl FnMut(RelId, Vec<usize>)) {
    if let Cond::Exists(e) | Cond::NotExists(e) = c {
        add(e.rel, e.bound_columns());
    }
}

/// A relation's schema together with its tuples.
#[derive(Debug, Clone)]
pub struct Instance {
    pub relations: Vec<Relation>,
    pub types: Vec<Vec<AttrType>>,
    pub symbols: SymbolTable,
    by_name: HashMap<String, RelId>,
}

impl Instance {
    /// Empty relations for every RAM relation, indexed as planned.
    pub fn new(ram: &RamProgram, plan: &IndexPlan) -> Self {
        let relations = ram
            .relations
            .iter()
            .enumerate()
            .map(|(i, r)| {
                Relation::with_indexes(
                    r.name.clone(),
                    r.arity(),
                    plan.for_relation(i).iter().map(Vec::as_slice),
                )
            })
            .collect();
        let mut by_name = HashMap::new();
        for (i, r) in ram.relations.iter().enumerate() {
            by_name.entry(r.name.clone()).or_insert(i);
        }
        Instance {
            relations,
            types: ram.relations.iter().map(|r| r.types.clone()).collect(),
            symbols: ram.symbols.clone(),
            by_name,
        }
    }

    pub fn id(&self, name: &str) -> Option<RelId> {
        self.by_name.get(name).copied()
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.id(name).map(|i| &self.relations[i])
    }

    pub fn relation_mut(&mut self, name: &str) -> Option<&mut Relation> {
        self.id(name).map(move |i| &mut self.relations[i])
    }

    pub fn to_value(&self, ty: AttrType, raw: i64) -> Value {
        match ty {
            AttrType::Symbol => Value::Sym(raw),
            AttrType::Number => Value::Num(raw),
        }
    }

    /// Tuples of `name` as typed values, in full index order.
    pub fn tuples(&self, name: &str) -> Option<Vec<Vec<Value>>> {
        let id = self.id(name)?;
        let types = &self.types[id];
        Some(
            self.relations[id]
                .iter()
                .map(|t| t.iter().zip(types).map(|(&v, &ty)| self.to_value(ty, v)).collect())
                .collect(),
        )
    }

    /// Tuples of `name` rendered as strings.
    pub fn rows(&self, name: &str) -> Option<Vec<Vec<String>>> {
        Some(
            self.tuples(name)?
                .into_iter()
                .map(|t| t.iter().map(|v| v.display(&self.symbols).to_string()).collect())
                .collect(),
        )
    }

    /// Converts typed values to a raw tuple, interning symbols given as text.
    pub fn encode(&mut self, name: &str, fields: &[&str]) -> Result<Tuple, String> {
        let id = self.id(name).ok_or_else(|| format!("unknown relation `{name}`"))?;
        let types = self.types[id].clone();
        if fields.len() != types.len() {
            return Err(format!(
                "`{name}` has arity {} but {} fields were given",
                types.len(),
                fields.len()
            ));
        }
        fields
            .iter()
            .zip(&types)
            .map(|(f, ty)| match ty {
                AttrType::Symbol => Ok(self.symbols.intern(f)),
                AttrType::Number => f
                    .parse::<i64>()
                    .map_err(|_| format!("`{f}` is not a number")),
            })
            .collect()
    }
}
