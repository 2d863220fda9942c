use std::collections::{BTreeSet, HashMap, HashSet};
use std::ops::Bound;

use smallvec::SmallVec;
use thiserror::Error;

use crate::ast::ChoiceDomain;

pub type Tuple = SmallVec<[i64; 4]>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StorageError {
    #[error("arity mismatch on `{relation}`: expected {expected}, got {found}")]
    ArityMismatch {
        relation: String,
        expected: usize,
        found: usize,
    },
    #[error("no index on `{relation}` for bound columns {columns:?}")]
    MissingIndex { relation: String, columns: Vec<usize> },
}

/// Bound-column set as a bitmask over positions.
pub type Signature = u64;

pub fn signature_of(columns: impl IntoIterator<Item = usize>) -> Signature {
    columns.into_iter().fold(0, |acc, c| acc | (1u64 << c))
}

pub fn pattern_signature(pattern: &[Option<i64>]) -> Signature {
    signature_of(pattern.iter().enumerate().filter(|(_, p)| p.is_some()).map(|(i, _)| i))
}

pub fn signature_columns(sig: Signature, arity: usize) -> Vec<usize> {
    (0..arity).filter(|c| sig & (1u64 << c) != 0).collect()
}

/// Bound columns first (ascending), then the rest (ascending).
fn permutation_for(sig: Signature, arity: usize) -> Vec<usize> {
    let (mut bound, free): (Vec<usize>, Vec<usize>) =
        (0..arity).partition(|c| sig & (1u64 << c) != 0);
    bound.extend(free);
    bound
}

#[derive(Debug, Clone)]
struct Index {
    /// `perm[k]` is the tuple column stored at key position `k`.
    perm: Vec<usize>,
    identity: bool,
    tuples: BTreeSet<Tuple>,
}

impl Index {
    fn new(perm: Vec<usize>) -> Self {
        let identity = perm.iter().enumerate().all(|(i, &c)| i == c);
        Index {
            perm,
            identity,
            tuples: BTreeSet::new(),
        }
    }

    fn key(&self, t: &[i64]) -> Tuple {
        if self.identity {
            Tuple::from_slice(t)
        } else {
            self.perm.iter().map(|&c| t[c]).collect()
        }
    }
}

/// A set of fixed-arity tuples with one ordered index per distinct column
/// permutation. Index 0 is always the natural (full-order) index.
#[derive(Debug, Clone)]
pub struct Relation {
    name: String,
    arity: usize,
    indexes: Vec<Index>,
    by_signature: HashMap<Signature, usize>,
}

impl Relation {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        assert!(arity <= 64, "relations wider than 64 columns are not supported");
        let mut by_signature = HashMap::new();
        by_signature.insert(0, 0);
        by_signature.insert(signature_of(0..arity), 0);
        Relation {
            name: name.into(),
            arity,
            indexes: vec![Index::new((0..arity).collect())],
            by_signature,
        }
    }

    /// Builds a relation with an index for each of the given bound-column sets.
    pub fn with_indexes<'a>(
        name: impl Into<String>,
        arity: usize,
        signatures: impl IntoIterator<Item = &'a [usize]>,
    ) -> Self {
        let mut r = Relation::new(name, arity);
        for cols in signatures {
            r.add_index(cols);
        }
        r
    }

    /// Registers an index for the bound columns `cols`. Signatures that map to
    /// an existing column permutation share that index.
    pub fn add_index(&mut self, cols: &[usize]) {
        let sig = signature_of(cols.iter().copied());
        if self.by_signature.contains_key(&sig) {
            return;
        }
        let perm = permutation_for(sig, self.arity);
        let idx = match self.indexes.iter().position(|i| i.perm == perm) {
            Some(i) => i,
            None => {
                let mut index = Index::new(perm);
                for t in &self.indexes[0].tuples {
                    index.tuples.insert(index.key(t));
                }
                self.indexes.push(index);
                self.indexes.len() - 1
            }
        };
        self.by_signature.insert(sig, idx);
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.indexes[0].tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indexes[0].tuples.is_empty()
    }

    /// Number of physical indexes, including the full-order one.
    pub fn index_count(&self) -> usize {
        self.indexes.len()
    }

    pub fn signatures(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self
            .by_signature
            .keys()
            .map(|&s| signature_columns(s, self.arity))
            .collect();
        out.sort();
        out
    }

    fn check_arity(&self, found: usize) -> Result<(), StorageError> {
        if found == self.arity {
            Ok(())
        } else {
            Err(StorageError::ArityMismatch {
                relation: self.name.clone(),
                expected: self.arity,
                found,
            })
        }
    }

    /// Returns false if the tuple was already present.
    pub fn insert(&mut self, t: &[i64]) -> Result<bool, StorageError> {
        self.check_arity(t.len())?;
        Ok(self.insert_unchecked(t))
    }

    pub(crate) fn insert_unchecked(&mut self, t: &[i64]) -> bool {
        if !self.indexes[0].tuples.insert(Tuple::from_slice(t)) {
            return false;
        }
        for index in &mut self.indexes[1..] {
            let k = index.key(t);
            index.tuples.insert(k);
        }
        true
    }

    pub fn contains(&self, t: &[i64]) -> bool {
        t.len() == self.arity && self.indexes[0].tuples.contains(t)
    }

    fn index_for(&self, pattern: &[Option<i64>]) -> Result<&Index, StorageError> {
        self.check_arity(pattern.len())?;
        let sig = pattern_signature(pattern);
        let bound = sig.count_ones() as usize;
        let by_prefix = || {
            self.indexes
                .iter()
                .find(|i| i.perm[..bound].iter().all(|&c| pattern[c].is_some()))
        };
        match self.by_signature.get(&sig) {
            Some(&i) => Ok(&self.indexes[i]),
            None => by_prefix().ok_or_else(|| StorageError::MissingIndex {
                relation: self.name.clone(),
                columns: signature_columns(sig, self.arity),
            }),
        }
    }

    /// True iff some tuple agrees with every bound position of `pattern`.
    pub fn exists(&self, pattern: &[Option<i64>]) -> Result<bool, StorageError> {
        if self.is_empty() {
            self.check_arity(pattern.len())?;
            return Ok(false);
        }
        Ok(self.scan(pattern)?.next().is_some())
    }

    /// Tuples matching `pattern`, in the order of the index serving it.
    pub fn scan(&self, pattern: &[Option<i64>]) -> Result<Scan<'_>, StorageError> {
        let index = self.index_for(pattern)?;
        let mut lo = Tuple::new();
        let mut hi = Tuple::new();
        for &c in &index.perm {
            match pattern[c] {
                Some(v) => {
                    lo.push(v);
                    hi.push(v);
                }
                None => {
                    lo.push(i64::MIN);
                    hi.push(i64::MAX);
                }
            }
        }
        Ok(Scan {
            range: index
                .tuples
                .range((Bound::Included(lo), Bound::Included(hi))),
            perm: if index.identity { None } else { Some(&index.perm) },
        })
    }

    /// All tuples in full (lexicographic id) order.
    pub fn iter(&self) -> impl Iterator<Item = &Tuple> + '_ {
        self.indexes[0].tuples.iter()
    }

    pub fn clear(&mut self) {
        for index in &mut self.indexes {
            index.tuples.clear();
        }
    }

    /// Set union into `self`. Newly added tuples are appended to `added` when given.
    pub fn merge_from(
        &mut self,
        src: &Relation,
        mut added: Option<&mut Vec<Tuple>>,
    ) -> Result<usize, StorageError> {
        self.check_arity(src.arity)?;
        let mut n = 0;
        for t in src.iter() {
            if self.insert_unchecked(t) {
                n += 1;
                if let Some(out) = added.as_deref_mut() {
                    out.push(t.clone());
                }
            }
        }
        Ok(n)
    }

    /// Exchanges contents and indexes with `other`; names stay put.
    pub fn swap_contents(&mut self, other: &mut Relation) -> Result<(), StorageError> {
        self.check_arity(other.arity)?;
        std::mem::swap(&mut self.indexes, &mut other.indexes);
        std::mem::swap(&mut self.by_signature, &mut other.by_signature);
        Ok(())
    }

    /// First pair of distinct tuples agreeing on some domain, if any.
    pub fn fd_violation(&self, domains: &[ChoiceDomain]) -> Option<(Tuple, Tuple)> {
        for d in domains {
            let mut seen: HashMap<Tuple, &Tuple> = HashMap::with_capacity(self.len());
            for t in self.iter() {
                let key: Tuple = d.positions().iter().map(|&p| t[p]).collect();
                if let Some(prev) = seen.insert(key, t) {
                    return Some((prev.clone(), t.clone()));
                }
            }
        }
        None
    }

    /// Checks that every index enumerates exactly the tuple set.
    pub fn indexes_coherent(&self) -> bool {
        let base: HashSet<&Tuple> = self.indexes[0].tuples.iter().collect();
        self.indexes[1..].iter().all(|index| {
            index.tuples.len() == base.len()
                && index.tuples.iter().all(|k| {
                    let mut t = Tuple::from_elem(0, self.arity);
                    for (pos, &c) in index.perm.iter().enumerate() {
                        t[c] = k[pos];
                    }
                    base.contains(&t)
                })
        })
    }
}

pub struct Scan<'a> {
    range: std::collections::btree_set::Range<'a, Tuple>,
    perm: Option<&'a [usize]>,
}

impl Iterator for Scan<'_> {
    type Item = Tuple;

    fn next(&mut self) -> Option<Tuple> {
        let k = self.range.next()?;
        Some(match self.perm {
            None => k.clone(),
            Some(perm) => {
                let mut t = Tuple::from_elem(0, perm.len());
                for (pos, &c) in perm.iter().enumerate() {
                    t[c] = k[pos];
                }
                t
            }
        })
    }
}
