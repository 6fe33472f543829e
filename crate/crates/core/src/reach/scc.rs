use super::graph::Csr;

/// Strongly connected components, iterative Tarjan. Returns the component
/// id of every node; ids are in reverse topological order (sinks first).
pub fn tarjan(g: &Csr) -> (Vec<usize>, usize) {
    const UNSEEN: usize = usize::MAX;
    let n = g.nodes();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack: Vec<usize> = Vec::new();
    // (node, next successor position)
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut counter = 0;
    let mut ncomp = 0;

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(top) = call.last_mut() {
            let v = top.0;
            let succ = g.successors(v);
            if top.1 < succ.len() {
                let w = succ[top.1] as usize;
                top.1 += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp[w] = ncomp;
                    if w == v {
                        break;
                    }
                }
                ncomp += 1;
            }
        }
    }
    (comp, ncomp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csr(lists: &[&[u32]]) -> Csr {
        Csr::from_lists(&lists.iter().map(|l| l.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn small_graph() {
        // 0 -> 1 -> 2 -> 0, 2 -> 3, 3 -> 3, 4 -> 3
        let g = csr(&[&[1], &[2], &[0, 3], &[3], &[3]]);
        let (comp, n) = tarjan(&g);
        assert_eq!(n, 3);
        assert_eq!(comp[0], comp[1]);
        assert_eq!(comp[1], comp[2]);
        assert_ne!(comp[0], comp[3]);
        assert_ne!(comp[4], comp[3]);
        // sink first
        assert_eq!(comp[3], 0);
    }

    #[test]
    fn long_chain_no_recursion_limit() {
        let n = 200_000u32;
        let lists: Vec<Vec<u32>> = (0..n).map(|v| vec![(v + 1) % n]).collect();
        let (_, k) = tarjan(&Csr::from_lists(&lists));
        assert_eq!(k, 1);
    }

    proptest::proptest! {
        #[test]
        fn matches_mutual_reachability(edges in proptest::collection::vec((0u32..12, 0u32..12), 0..40)) {
            let mut lists = vec![Vec::new(); 12];
            for (a, b) in edges {
                lists[a as usize].push(b);
            }
            let g = Csr::from_lists(&lists);
            let (comp, _) = tarjan(&g);
            let reach: Vec<Vec<bool>> = (0..12).map(|v| g.closure([v])).collect();
            for a in 0..12 {
                for b in 0..12 {
                    let mutual = reach[a][b] && reach[b][a];
                    proptest::prop_assert_eq!(mutual, comp[a] == comp[b]);
                }
            }
        }
    }
}
