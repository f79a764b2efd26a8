//! Graph primitives over an adjacency-list view: connected components,
//! BFS distances, Brandes betweenness (unweighted and weighted), and local
//! clustering. All operate on the simple undirected projection supplied by
//! the caller; parallel-line handling is the caller's concern.

use std::collections::VecDeque;

/// Adjacency as neighbour lists over `0..n`, deduplicated (simple graph).
pub type SimpleAdj = Vec<Vec<usize>>;

/// Labels each node with a component id; returns (labels, component count).
/// `alive` masks nodes out of the traversal; dead nodes keep label usize::MAX.
pub fn components(adj: &SimpleAdj, alive: &[bool]) -> (Vec<usize>, usize) {
    let n = adj.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if !alive[start] || label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if alive[v] && label[v] == usize::MAX {
                    label[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    (label, next)
}

/// Sum of shortest-path lengths and reachable-pair count from every node,
/// over unordered pairs. Used for the mean unweighted nodal distance.
pub fn distance_sums(adj: &SimpleAdj) -> (u64, u64) {
    let n = adj.len();
    let mut total = 0u64;
    let mut pairs = 0u64;
    let mut dist = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        dist.fill(u32::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        for &d in &dist[(s + 1)..] {
            if d != u32::MAX {
                total += d as u64;
                pairs += 1;
            }
        }
    }
    (total, pairs)
}

/// Brandes betweenness for an unweighted undirected graph, each unordered
/// pair counted once. `alive` masks removed nodes.
pub fn betweenness_unweighted(adj: &SimpleAdj, alive: &[bool]) -> Vec<f64> {
    let n = adj.len();
    let mut score = vec![0.0; n];
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![i64::MAX; n];
    let mut delta = vec![0.0f64; n];
    let mut queue = VecDeque::new();

    for s in 0..n {
        if !alive[s] {
            continue;
        }
        stack.clear();
        for v in 0..n {
            pred[v].clear();
            sigma[v] = 0.0;
            dist[v] = i64::MAX;
            delta[v] = 0.0;
        }
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            stack.push(u);
            for &v in &adj[u] {
                if !alive[v] {
                    continue;
                }
                if dist[v] == i64::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
                if dist[v] == dist[u] + 1 {
                    sigma[v] += sigma[u];
                    pred[v].push(u);
                }
            }
        }
        while let Some(w) = stack.pop() {
            for &v in &pred[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                score[w] += delta[w];
            }
        }
    }
    // every unordered pair was visited from both endpoints
    for v in &mut score {
        *v /= 2.0;
    }
    score
}

/// Brandes betweenness under positive edge weights (Dijkstra variant).
/// `edges[u]` lists `(neighbour, weight)` with parallel edges already
/// collapsed to their minimum weight.
pub fn betweenness_weighted(edges: &[Vec<(usize, f64)>], alive: &[bool]) -> Vec<f64> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    // total_cmp-ordered f64 key for the heap
    #[derive(PartialEq)]
    struct Key(f64);
    impl Eq for Key {}
    impl PartialOrd for Key {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Key {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0)
        }
    }

    let n = edges.len();
    let mut score = vec![0.0; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut sigma = vec![0.0f64; n];
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut delta = vec![0.0f64; n];
    let mut settled: Vec<usize> = Vec::with_capacity(n);

    for s in 0..n {
        if !alive[s] {
            continue;
        }
        for v in 0..n {
            dist[v] = f64::INFINITY;
            sigma[v] = 0.0;
            pred[v].clear();
            delta[v] = 0.0;
        }
        settled.clear();
        dist[s] = 0.0;
        sigma[s] = 1.0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((Key(0.0), s)));
        let mut done = vec![false; n];
        while let Some(Reverse((Key(d), u))) = heap.pop() {
            if done[u] || d > dist[u] {
                continue;
            }
            done[u] = true;
            settled.push(u);
            for &(v, w) in &edges[u] {
                if !alive[v] {
                    continue;
                }
                let nd = dist[u] + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    sigma[v] = sigma[u];
                    pred[v].clear();
                    pred[v].push(u);
                    heap.push(Reverse((Key(nd), v)));
                } else if nd == dist[v] {
                    sigma[v] += sigma[u];
                    pred[v].push(u);
                }
            }
        }
        while let Some(w) = settled.pop() {
            for &v in &pred[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                score[w] += delta[w];
            }
        }
    }
    for v in &mut score {
        *v /= 2.0;
    }
    score
}

/// Average local clustering coefficient on the simple projection.
pub fn mean_clustering(adj: &SimpleAdj) -> f64 {
    let n = adj.len();
    if n == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for u in 0..n {
        let neigh = &adj[u];
        let k = neigh.len();
        if k < 2 {
            continue;
        }
        let mut links = 0usize;
        for i in 0..k {
            for j in (i + 1)..k {
                if adj[neigh[i]].contains(&neigh[j]) {
                    links += 1;
                }
            }
        }
        total += 2.0 * links as f64 / (k * (k - 1)) as f64;
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> SimpleAdj {
        vec![vec![1], vec![0, 2], vec![1]]
    }

    #[test]
    fn components_and_masks() {
        let adj = path3();
        let (label, n) = components(&adj, &[true, true, true]);
        assert_eq!(n, 1);
        assert_eq!(label[0], label[2]);
        let (label, n) = components(&adj, &[true, false, true]);
        assert_eq!(n, 2);
        assert_ne!(label[0], label[2]);
    }

    #[test]
    fn path_distances() {
        let (total, pairs) = distance_sums(&path3());
        assert_eq!((total, pairs), (4, 3)); // 1 + 1 + 2
    }

    #[test]
    fn star_betweenness_centers_hub() {
        // hub 0 with 4 leaves: hub lies on C(4,2)=6 shortest paths
        let adj = vec![vec![1, 2, 3, 4], vec![0], vec![0], vec![0], vec![0]];
        let b = betweenness_unweighted(&adj, &[true; 5]);
        assert_eq!(b[0], 6.0);
        assert_eq!(b[1], 0.0);
    }

    #[test]
    fn weighted_betweenness_prefers_cheap_detour() {
        // 0-1 weight 10, 0-2 and 2-1 weight 1: node 2 carries the 0..1 pair
        let edges = vec![
            vec![(1, 10.0), (2, 1.0)],
            vec![(0, 10.0), (2, 1.0)],
            vec![(0, 1.0), (1, 1.0)],
        ];
        let b = betweenness_weighted(&edges, &[true; 3]);
        assert_eq!(b[2], 1.0);
        assert_eq!(b[0], 0.0);
    }

    #[test]
    fn triangle_clustering_is_one() {
        let adj = vec![vec![1, 2], vec![0, 2], vec![0, 1]];
        assert_eq!(mean_clustering(&adj), 1.0);
    }
}
