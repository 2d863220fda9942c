use super::*;

/// Replaces every insert into a choice-constrained relation with a guarded
/// insert. Each reduced domain contributes a check against the target and,
/// when the target is a `new_` relation, a second check against its full
/// relation so earlier iterations keep their choices.
pub fn add_guards(mut ram: RamProgram) -> RamProgram {
    let relations = ram.relations.clone();
    ram.main.walk_mut(&mut |s| {
        if let Stmt::Query(op) = s {
            guard_op(op, &relations);
        }
    });
    ram
}

fn guard_op(op: &mut Op, relations: &[RamRelation]) {
    match op {
        Op::Scan { body, .. }
        | Op::IndexScan { body, .. }
        | Op::Filter { body, .. }
        | Op::Aggregate { body, .. } => guard_op(body, relations),
        Op::GuardedInsert { .. } => {}
        Op::Insert { rel, values } => {
            let target = &relations[*rel];
            if !target.has_choice() {
                return;
            }
            let mut checks = Vec::new();
            for d in &target.reduced_domains {
                let pattern: Vec<Option<Expr>> = values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| d.contains(i).then(|| v.clone()))
                    .collect();
                checks.push(ExistenceCheck {
                    rel: *rel,
                    pattern: pattern.clone(),
                });
                if target.version == Version::New {
                    checks.push(ExistenceCheck {
                        rel: target.base,
                        pattern,
                    });
                }
            }
            *op = Op::GuardedInsert {
                rel: *rel,
                values: std::mem::take(values),
                checks,
            };
        }
    }
}
