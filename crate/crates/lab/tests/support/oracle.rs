//! Brute-force enumeration of decision sequences, kept independent of the
//! explorer: a worklist of index scripts, each run from scratch, with every
//! unfinished script extended by every index of the next activated point.

use std::collections::BTreeSet;

use banditlab::core::minilang::{execute, DecisionProvider, DecisionRequest, Program, Provision};

/// One finished path: rendered `strategy@point` steps and whether it succeeded.
pub type Path = (Vec<String>, bool);

struct IndexScript<'a> {
    script: &'a [usize],
    at: usize,
    taken: Vec<String>,
    next_width: Option<usize>,
}

impl DecisionProvider for IndexScript<'_> {
    fn provide(&mut self, r: &DecisionRequest<'_>) -> Provision {
        match self.script.get(self.at) {
            Some(&i) => {
                self.at += 1;
                let d = r.decisions[i].clone();
                self.taken.push(format!("{}@{}", d.strategy, r.point));
                Provision::Apply(d)
            }
            None => {
                self.next_width = Some(r.decisions.len());
                Provision::Exhausted
            }
        }
    }
}

/// Every complete path, or `None` when there are more than `limit`.
pub fn enumerate(program: &Program, entry: &str, budget: u64, limit: usize) -> Option<Vec<Path>> {
    let mut paths = Vec::new();
    let mut work: Vec<Vec<usize>> = vec![Vec::new()];
    while let Some(script) = work.pop() {
        let mut p = IndexScript {
            script: &script,
            at: 0,
            taken: Vec::new(),
            next_width: None,
        };
        let e = execute(program, entry, &mut p, budget).expect("entry runs");
        match p.next_width {
            Some(n) => {
                for i in 0..n {
                    let mut longer = script.clone();
                    longer.push(i);
                    work.push(longer);
                }
            }
            None if script.is_empty() => {}
            None => {
                paths.push((p.taken, e.outcome.is_success()));
                if paths.len() > limit {
                    return None;
                }
            }
        }
    }
    Some(paths)
}

/// Sequences, valid sequences and (min, lower median, max) valid size.
pub struct Summary {
    pub all: BTreeSet<String>,
    pub valid: BTreeSet<String>,
    pub sizes: Option<(usize, usize, usize)>,
}

pub fn summarize(paths: &[Path]) -> Summary {
    let join = |s: &Vec<String>| s.join(";");
    let all = paths.iter().map(|(s, _)| join(s)).collect();
    let valid = paths
        .iter()
        .filter(|(_, ok)| *ok)
        .map(|(s, _)| join(s))
        .collect();
    let mut sizes: Vec<usize> = paths
        .iter()
        .filter(|(_, ok)| *ok)
        .map(|(s, _)| s.len())
        .collect();
    sizes.sort();
    let sizes = if sizes.is_empty() {
        None
    } else {
        Some((
            sizes[0],
            sizes[(sizes.len() - 1) / 2],
            *sizes.last().unwrap(),
        ))
    };
    Summary { all, valid, sizes }
}
