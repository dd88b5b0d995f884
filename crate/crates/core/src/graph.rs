//! Small graph helpers: iterative Tarjan SCC over adjacency lists.

/// Strongly connected components, returned as a component id per node.
/// Component ids are in reverse topological order (successors have lower
/// ids than predecessors within the condensation).
pub fn tarjan_sccs(n: usize, adj: &dyn Fn(usize) -> Vec<usize>) -> (Vec<u32>, u32) {
    const UNSET: u32 = u32::MAX;
    let mut index = vec![UNSET; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSET; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index: u32 = 0;
    let mut next_comp: u32 = 0;

    // Explicit DFS stack of (node, neighbor list, cursor).
    let mut call: Vec<(usize, Vec<usize>, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSET {
            continue;
        }
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, adj(root), 0));

        while let Some((v, neighbors, cursor)) = call.last_mut() {
            if let Some(&w) = neighbors.get(*cursor) {
                *cursor += 1;
                if index[w] == UNSET {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, adj(w), 0));
                } else if on_stack[w] {
                    let v = *v;
                    low[v] = low[v].min(index[w]);
                }
            } else {
                let v = *v;
                call.pop();
                if let Some((parent, _, _)) = call.last() {
                    let p = *parent;
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
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
    (comp, next_comp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sccs_of_a_cycle_and_a_tail() {
        // 0 -> 1 -> 2 -> 0, 3 -> 0
        let adj = |v: usize| -> Vec<usize> {
            match v {
                0 => vec![1],
                1 => vec![2],
                2 => vec![0],
                3 => vec![0],
                _ => vec![],
            }
        };
        let (comp, n) = tarjan_sccs(4, &adj);
        assert_eq!(n, 2);
        assert_eq!(comp[0], comp[1]);
        assert_eq!(comp[1], comp[2]);
        assert_ne!(comp[3], comp[0]);
    }
}
