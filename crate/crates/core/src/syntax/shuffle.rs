use thiserror::Error;

use super::Context;

pub const DEFAULT_SHUFFLE_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShuffleError {
    #[error("shuffle enumeration over {found} variables exceeds the limit of {limit}")]
    LimitExceeded { found: usize, limit: usize },
}

/// True iff `candidate` interleaves `parts`, keeping each part's order.
pub fn is_shuffle(candidate: &Context, parts: &[Context]) -> bool {
    let total: usize = parts.iter().map(Context::len).sum();
    if total != candidate.len() {
        return false;
    }
    let mut cursors = vec![0usize; parts.len()];
    'outer: for entry in candidate.entries() {
        for (p, part) in parts.iter().enumerate() {
            if let Some(next) = part.entries().get(cursors[p]) {
                if next == entry {
                    cursors[p] += 1;
                    continue 'outer;
                }
            }
        }
        return false;
    }
    true
}

/// All shuffles of `parts`, in lexicographic order of part choice.
pub fn enumerate_shuffles(parts: &[Context], limit: usize) -> Result<Vec<Context>, ShuffleError> {
    let total: usize = parts.iter().map(Context::len).sum();
    if total > limit {
        return Err(ShuffleError::LimitExceeded {
            found: total,
            limit,
        });
    }
    let mut out = Vec::new();
    let mut cursors = vec![0usize; parts.len()];
    let mut acc = Vec::with_capacity(total);
    fn go(
        parts: &[Context],
        cursors: &mut [usize],
        acc: &mut Vec<(super::Name, super::LinType)>,
        total: usize,
        out: &mut Vec<Context>,
    ) {
        if acc.len() == total {
            out.push(Context(acc.clone()));
            return;
        }
        for p in 0..parts.len() {
            if let Some(e) = parts[p].entries().get(cursors[p]) {
                cursors[p] += 1;
                acc.push(e.clone());
                go(parts, cursors, acc, total, out);
                acc.pop();
                cursors[p] -= 1;
            }
        }
    }
    go(parts, &mut cursors, &mut acc, total, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{LinType, Name};

    fn ctx(vars: &[(&str, &str)]) -> Context {
        Context::new(
            vars.iter()
                .map(|(x, t)| (Name::new(x), LinType::ground(t)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn shuffle_membership() {
        let parts = [ctx(&[("x", "A"), ("y", "B")]), ctx(&[("z", "C")])];
        assert!(is_shuffle(&ctx(&[("z", "C"), ("x", "A"), ("y", "B")]), &parts));
        assert!(!is_shuffle(&ctx(&[("y", "B"), ("x", "A"), ("z", "C")]), &parts));
        assert!(is_shuffle(&ctx(&[("x", "A")]), &[ctx(&[("x", "A")])]));
        assert!(!is_shuffle(&ctx(&[("x", "A")]), &[ctx(&[("x", "B")])]));
    }

    #[test]
    fn shuffle_enumeration() {
        let two = enumerate_shuffles(&[ctx(&[("x", "A")]), ctx(&[("y", "B")])], 10).unwrap();
        assert_eq!(two, vec![ctx(&[("x", "A"), ("y", "B")]), ctx(&[("y", "B"), ("x", "A")])]);
        let parts = [ctx(&[("x", "A"), ("y", "B")]), ctx(&[("z", "C")])];
        let three = enumerate_shuffles(&parts, 10).unwrap();
        assert_eq!(three.len(), 3);
        assert!(three.iter().all(|c| is_shuffle(c, &parts)));
        assert_eq!(enumerate_shuffles(&[Context::empty()], 10).unwrap(), vec![Context::empty()]);
        let big: Vec<Context> = (0..11).map(|i| ctx(&[(format!("v{i}").as_str(), "A")])).collect();
        assert!(enumerate_shuffles(&big, 10).is_err());
    }
}
