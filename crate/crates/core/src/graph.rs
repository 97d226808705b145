//! Small dense-index digraph used by the conflict graph and the split-schedule
//! search graphs. Adjacency lists keep insertion order, which fixes every
//! traversal order downstream.

use std::collections::VecDeque;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Digraph {
    adj: Vec<Vec<usize>>,
}

impl Digraph {
    pub fn with_nodes(n: usize) -> Self {
        Digraph { adj: vec![Vec::new(); n] }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn add_node(&mut self) -> usize {
        self.adj.push(Vec::new());
        self.adj.len() - 1
    }

    /// Adds `from -> to` unless already present.
    pub fn add_edge(&mut self, from: usize, to: usize) {
        if !self.adj[from].contains(&to) {
            self.adj[from].push(to);
        }
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.adj[from].contains(&to)
    }

    pub fn successors(&self, node: usize) -> &[usize] {
        &self.adj[node]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    /// Breadth-first search from `start`; returns each node's BFS parent
    /// (`Some(start)` for the start node itself) or `None` if unreachable.
    pub fn bfs_parents(&self, start: usize) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.adj.len()];
        parent[start] = Some(start);
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            for &m in &self.adj[n] {
                if parent[m].is_none() {
                    parent[m] = Some(n);
                    queue.push_back(m);
                }
            }
        }
        parent
    }

    /// Reflexive-transitive reachability from `start`.
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        self.bfs_parents(start).into_iter().map(|p| p.is_some()).collect()
    }

    /// Shortest path `start ..= goal` (inclusive), `None` if unreachable.
    pub fn shortest_path(&self, start: usize, goal: usize) -> Option<Vec<usize>> {
        let parent = self.bfs_parents(start);
        path_from_parents(&parent, start, goal)
    }

    /// Finds one directed cycle, preferring the one hit first by a depth-first
    /// search over nodes in index order.
    pub fn find_cycle(&self) -> Option<Vec<usize>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            White,
            Gray,
            Black,
        }
        let n = self.adj.len();
        let mut mark = vec![Mark::White; n];
        for root in 0..n {
            if mark[root] != Mark::White {
                continue;
            }
            // (node, next successor index)
            let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
            mark[root] = Mark::Gray;
            while let Some(&mut (node, ref mut next)) = stack.last_mut() {
                if let Some(&succ) = self.adj[node].get(*next) {
                    *next += 1;
                    match mark[succ] {
                        Mark::White => {
                            mark[succ] = Mark::Gray;
                            stack.push((succ, 0));
                        }
                        Mark::Gray => {
                            let from = stack.iter().position(|&(v, _)| v == succ).expect("gray node on stack");
                            return Some(stack[from..].iter().map(|&(v, _)| v).collect());
                        }
                        Mark::Black => {}
                    }
                } else {
                    mark[node] = Mark::Black;
                    stack.pop();
                }
            }
        }
        None
    }
}

pub(crate) fn path_from_parents(parent: &[Option<usize>], start: usize, goal: usize) -> Option<Vec<usize>> {
    parent[goal]?;
    let mut path = vec![goal];
    let mut cur = goal;
    while cur != start {
        cur = parent[cur]?;
        path.push(cur);
    }
    path.reverse();
    Some(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_simple_cycle_in_dfs_order() {
        let mut g = Digraph::with_nodes(4);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        g.add_edge(2, 3);
        g.add_edge(3, 0);
        assert_eq!(g.find_cycle(), Some(vec![0, 1, 2, 3]));
    }

    #[test]
    fn dag_has_no_cycle() {
        let mut g = Digraph::with_nodes(3);
        g.add_edge(0, 1);
        g.add_edge(0, 2);
        g.add_edge(1, 2);
        assert_eq!(g.find_cycle(), None);
    }

    #[test]
    fn shortest_path_is_breadth_first() {
        let mut g = Digraph::with_nodes(5);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        g.add_edge(2, 4);
        g.add_edge(0, 3);
        g.add_edge(3, 4);
        assert_eq!(g.shortest_path(0, 4), Some(vec![0, 3, 4]));
        assert_eq!(g.shortest_path(4, 0), None);
        assert_eq!(g.shortest_path(2, 2), Some(vec![2]));
    }

    #[test]
    fn duplicate_edges_are_ignored() {
        let mut g = Digraph::with_nodes(2);
        g.add_edge(0, 1);
        g.add_edge(0, 1);
        assert_eq!(g.edge_count(), 1);
    }
}
