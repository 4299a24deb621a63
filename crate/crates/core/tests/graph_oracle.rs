//! SCC, condensation reachability and RoA labels against a transitive-closure oracle.

use morals::morse::{MorseDecomposition, RoaLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_digraph(rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let n = rng.gen_range(1..=200);
    let density = rng.gen_range(0.01..0.3);
    (0..n)
        .map(|_| (0..n).filter(|_| rng.gen_bool(density)).collect())
        .collect()
}

/// `reach[u][v]` iff a path of length >= 1 leads from `u` to `v` (Floyd-Warshall).
fn closure(adj: &[Vec<usize>]) -> Vec<Vec<bool>> {
    let n = adj.len();
    let mut r = vec![vec![false; n]; n];
    for (u, out) in adj.iter().enumerate() {
        for &v in out {
            r[u][v] = true;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

struct Oracle {
    reach: Vec<Vec<bool>>,
}

impl Oracle {
    fn same_scc(&self, u: usize, v: usize) -> bool {
        u == v || (self.reach[u][v] && self.reach[v][u])
    }

    /// Recurrent: lies on a cycle (a self-loop counts).
    fn recurrent(&self, u: usize) -> bool {
        self.reach[u][u]
    }

    /// Reaches-or-equals, at the level of vertices.
    fn leads_to(&self, u: usize, v: usize) -> bool {
        u == v || self.reach[u][v]
    }

    /// Recurrent vertex whose every reachable recurrent vertex is in its own SCC.
    fn minimal(&self, u: usize) -> bool {
        let n = self.reach.len();
        self.recurrent(u)
            && (0..n).all(|v| !(self.reach[u][v] && self.recurrent(v)) || self.same_scc(u, v))
    }
}

#[test]
fn random_digraphs_match_closure_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let adj = random_digraph(&mut rng);
        let n = adj.len();
        let o = Oracle {
            reach: closure(&adj),
        };
        let d = MorseDecomposition::new(&adj);
        let cg = &d.condensation;
        let mg = &d.morse_graph;

        for u in 0..n {
            for v in 0..n {
                assert_eq!(cg.component[u] == cg.component[v], o.same_scc(u, v));
            }
            assert_eq!(cg.recurrent[cg.component[u]], o.recurrent(u));
        }

        // Condensation reachability, via DFS over the DAG.
        let k = cg.len();
        let mut dag_reach = vec![vec![false; k]; k];
        for a in 0..k {
            let mut stack = vec![a];
            while let Some(c) = stack.pop() {
                for &s in &cg.successors[c] {
                    assert!(s < c, "successor ids must be smaller");
                    if !dag_reach[a][s] {
                        dag_reach[a][s] = true;
                        stack.push(s);
                    }
                }
            }
        }
        for u in 0..n {
            for v in 0..n {
                let (cu, cv) = (cg.component[u], cg.component[v]);
                if cu != cv {
                    assert_eq!(dag_reach[cu][cv], o.reach[u][v]);
                }
            }
        }

        // Morse order and minimal nodes.
        for a in 0..mg.len() {
            let ua = d.vertices_of(a)[0];
            for b in 0..mg.len() {
                let ub = d.vertices_of(b)[0];
                let expect = a != b && o.reach[ua][ub];
                assert_eq!(mg.below[a].contains(b), expect);
            }
            assert_eq!(mg.is_minimal(a), o.minimal(ua));
        }

        // RoA: a vertex belongs to RoA(A) iff A is the only minimal node it reaches.
        for u in 0..n {
            let reached: Vec<usize> = mg
                .minimal
                .iter()
                .copied()
                .filter(|&m| o.leads_to(u, d.vertices_of(m)[0]))
                .collect();
            let expect = match reached.as_slice() {
                [m] if d.morse_node_of(u) == Some(*m) => RoaLabel::Attractor(*m),
                [m] => RoaLabel::Basin(*m),
                _ => RoaLabel::Undecided,
            };
            assert_eq!(d.roa[u], expect, "vertex {u}");
        }
    }
}

#[test]
fn transitive_reduction_keeps_only_covering_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let adj = random_digraph(&mut rng);
        let d = MorseDecomposition::new(&adj);
        let mg = &d.morse_graph;
        let mut expect = Vec::new();
        for a in 0..mg.len() {
            for b in mg.below[a].ones() {
                let covered = mg.below[a].ones().any(|c| mg.below[c].contains(b));
                if !covered {
                    expect.push((a, b));
                }
            }
        }
        let mut got = mg.edges.clone();
        got.sort_unstable();
        expect.sort_unstable();
        assert_eq!(got, expect);
    }
}
