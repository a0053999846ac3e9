//! Qualitative analysis on the underlying digraph of an MDP.
//!
//! Every function here only looks at which edges exist, so the results hold
//! for every graph-preserving instantiation of a parametric model.

use crate::model::Topology;

/// Strongly connected components of a graph given as CSR adjacency.
/// Returns the component id of every node (ids in reverse topological order).
pub fn sccs(n: usize, start: &[usize], adj: &[usize]) -> Vec<usize> {
    const UNVISITED: usize = usize::MAX;
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNVISITED; n];
    let mut stack = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut next_index = 0;
    let mut next_comp = 0;
    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, start[root]));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < start[v + 1] {
                let w = adj[*pos];
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, start[w]));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp[w] = next_comp;
                        if w == v {
                            break;
                        }
                    }
                    next_comp += 1;
                }
            }
        }
    }
    comp
}

/// States that can reach `target` along some path: the complement is the set
/// of states with maximal reachability probability 0.
pub fn can_reach(t: &Topology, target: &[bool]) -> Vec<bool> {
    let pred = t.predecessors(|_| true);
    let mut seen = target.to_vec();
    let mut queue: Vec<usize> = (0..t.num_states).filter(|&s| target[s]).collect();
    while let Some(s) = queue.pop() {
        for &p in &pred[s] {
            if !seen[p] {
                seen[p] = true;
                queue.push(p);
            }
        }
    }
    seen
}

/// States where the minimal reachability probability is 0: some policy avoids
/// `target` surely.
pub fn prob0e(t: &Topology, target: &[bool]) -> Vec<bool> {
    // least fixed point of R = T ∪ {s | every choice has a successor in R}
    let n = t.num_states;
    let choice_state = t.choice_state();
    let mut pred_choices: Vec<Vec<usize>> = vec![Vec::new(); n];
    for c in 0..t.num_choices() {
        for e in t.edges(c) {
            pred_choices[t.edge_succ[e]].push(c);
        }
    }
    let mut in_r = target.to_vec();
    let mut choice_hit = vec![false; t.num_choices()];
    let mut missing: Vec<usize> = (0..n).map(|s| t.choices(s).len()).collect();
    let mut queue: Vec<usize> = (0..n).filter(|&s| target[s]).collect();
    while let Some(s) = queue.pop() {
        for &c in &pred_choices[s] {
            if choice_hit[c] {
                continue;
            }
            choice_hit[c] = true;
            let p = choice_state[c];
            missing[p] -= 1;
            if missing[p] == 0 && !in_r[p] {
                in_r[p] = true;
                queue.push(p);
            }
        }
    }
    in_r.into_iter().map(|r| !r).collect()
}

/// States where the minimal reachability probability is 1: every policy
/// reaches `target` almost surely.
pub fn prob1a(t: &Topology, target: &[bool]) -> Vec<bool> {
    let avoid = prob0e(t, target);
    // states that can move into `avoid` without passing through the target
    let n = t.num_states;
    let pred = t.predecessors(|_| true);
    let mut bad = avoid.clone();
    let mut queue: Vec<usize> = (0..n).filter(|&s| bad[s]).collect();
    while let Some(s) = queue.pop() {
        for &p in &pred[s] {
            if !bad[p] && !target[p] {
                bad[p] = true;
                queue.push(p);
            }
        }
    }
    bad.into_iter().map(|b| !b).collect()
}

/// States where the maximal reachability probability is 1.
pub fn prob1e(t: &Topology, target: &[bool]) -> Vec<bool> {
    let n = t.num_states;
    let choice_state = t.choice_state();
    let mut pred_choices: Vec<Vec<usize>> = vec![Vec::new(); n];
    for c in 0..t.num_choices() {
        for e in t.edges(c) {
            pred_choices[t.edge_succ[e]].push(c);
        }
    }
    let mut u = vec![true; n];
    loop {
        // choices that stay inside u
        let safe: Vec<bool> = (0..t.num_choices())
            .map(|c| t.edges(c).all(|e| u[t.edge_succ[e]]))
            .collect();
        let mut r = target.to_vec();
        let mut queue: Vec<usize> = (0..n).filter(|&s| target[s]).collect();
        while let Some(s) = queue.pop() {
            for &c in &pred_choices[s] {
                let p = choice_state[c];
                if !r[p] && u[p] && safe[c] {
                    r[p] = true;
                    queue.push(p);
                }
            }
        }
        if r == u {
            return u;
        }
        u = r;
    }
}

/// A maximal end component: its states and the choices that never leave it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mec {
    pub states: Vec<usize>,
    pub choices: Vec<usize>,
}

/// Maximal end components inside `region`, using only choices accepted by
/// `allowed`.
pub fn mecs(t: &Topology, region: &[bool], allowed: impl Fn(usize) -> bool) -> Vec<Mec> {
    let n = t.num_states;
    let mut in_region = region.to_vec();
    let mut active: Vec<bool> = (0..t.num_choices()).map(&allowed).collect();
    let mut comp = vec![usize::MAX; n];
    loop {
        let mut changed = false;
        // drop choices leaving the region, and states without choices
        loop {
            let mut inner = false;
            for s in 0..n {
                if !in_region[s] {
                    continue;
                }
                let mut any = false;
                for c in t.choices(s) {
                    if active[c] && !t.edges(c).all(|e| in_region[t.edge_succ[e]]) {
                        active[c] = false;
                    }
                    any |= active[c];
                }
                if !any {
                    in_region[s] = false;
                    inner = true;
                    changed = true;
                }
            }
            if !inner {
                break;
            }
        }
        // SCCs of the remaining graph
        let mut start = vec![0; n + 1];
        let mut adj = Vec::new();
        for s in 0..n {
            if in_region[s] {
                for c in t.choices(s) {
                    if active[c] {
                        adj.extend(t.edges(c).map(|e| t.edge_succ[e]));
                    }
                }
            }
            start[s + 1] = adj.len();
        }
        let scc = sccs(n, &start, &adj);
        for s in 0..n {
            comp[s] = if in_region[s] { scc[s] } else { usize::MAX };
            if in_region[s] {
                for c in t.choices(s) {
                    if active[c] && !t.edges(c).all(|e| scc[t.edge_succ[e]] == scc[s]) {
                        active[c] = false;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut by_comp: std::collections::BTreeMap<usize, Mec> = std::collections::BTreeMap::new();
    for s in 0..n {
        if in_region[s] {
            let mec = by_comp.entry(comp[s]).or_insert_with(|| Mec {
                states: Vec::new(),
                choices: Vec::new(),
            });
            mec.states.push(s);
            mec.choices.extend(t.choices(s).filter(|&c| active[c]));
        }
    }
    let mut out: Vec<Mec> = by_comp.into_values().collect();
    out.sort_by_key(|m| m.states[0]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConcreteModel;

    fn topo(rows: Vec<Vec<Vec<usize>>>) -> Topology {
        let rows = rows
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|succ| {
                        let p = 1.0 / succ.len() as f64;
                        succ.into_iter().map(|s| (s, p)).collect()
                    })
                    .collect()
            })
            .collect();
        ConcreteModel::from_rows(0, rows, None)
            .unwrap()
            .topology()
            .clone()
    }

    #[test]
    fn scc_of_a_cycle_and_a_tail() {
        // 0 -> 1 -> 2 -> 0, 2 -> 3
        let start = [0, 1, 2, 4, 4];
        let adj = [1, 2, 0, 3];
        let c = sccs(4, &start, &adj);
        assert_eq!(c[0], c[1]);
        assert_eq!(c[1], c[2]);
        assert_ne!(c[2], c[3]);
        // sink component first
        assert!(c[3] < c[0]);
    }

    #[test]
    fn qualitative_sets() {
        // 0: a -> {1}, b -> {2};  1: -> {1, 3};  2: -> {2};  3 target
        let t = topo(vec![
            vec![vec![1], vec![2]],
            vec![vec![1, 3]],
            vec![vec![2]],
            vec![vec![3]],
        ]);
        let target = [false, false, false, true];
        assert_eq!(can_reach(&t, &target), vec![true, true, false, true]);
        assert_eq!(prob0e(&t, &target), vec![true, false, true, false]);
        assert_eq!(prob1a(&t, &target), vec![false, true, false, true]);
        assert_eq!(prob1e(&t, &target), vec![true, true, false, true]);
    }

    #[test]
    fn end_components() {
        // 0 <-> 1 via action a; 1 has an exit to 2; 2 absorbing
        let t = topo(vec![vec![vec![1]], vec![vec![0], vec![2]], vec![vec![2]]]);
        let all = [true, true, true];
        let m = mecs(&t, &all, |_| true);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].states, vec![0, 1]);
        assert_eq!(m[0].choices, vec![0, 1]);
        assert_eq!(m[1].states, vec![2]);
        let m = mecs(&t, &[true, true, false], |_| true);
        assert_eq!(m.len(), 1);
        // without the choice 1 -> 0 there is no end component among {0, 1}
        let m = mecs(&t, &[true, true, false], |c| c != 1);
        assert!(m.is_empty());
    }
}
