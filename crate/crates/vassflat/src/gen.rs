//! Instance factories: reductions from bounded one-counter automata and
//! digraph reachability, random connected systems, and the doubling family
//! whose witnesses need exponentially large cycle exponents.
//!
//! The reductions double as correctness cross-checks: their equivalence
//! claims are sampled against brute-force search on both sides.

use num_bigint::BigUint;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::core::{Configuration, StateId, Vass};

/// Rejected generator parameters.
#[derive(Debug, thiserror::Error)]
#[error("invalid generator parameters: {0}")]
pub struct ParamError(pub String);

// --- bounded one-counter automata ------------------------------------------

/// A one-counter automaton whose runs keep the counter within `[0, bound]`.
#[derive(Clone, Debug)]
pub struct BoundedOca {
    pub num_states: usize,
    /// `(src, counter update, dst)` triples.
    pub transitions: Vec<(StateId, i64, StateId)>,
    pub bound: i64,
}

impl BoundedOca {
    /// One search step of the bounded semantics: successors of `(q, z)`.
    pub fn successors(&self, state: StateId, z: i64) -> Vec<(StateId, i64)> {
        self.transitions
            .iter()
            .filter(|&&(src, _, _)| src == state)
            .map(|&(_, u, dst)| (dst, z + u))
            .filter(|&(_, z2)| 0 <= z2 && z2 <= self.bound)
            .collect()
    }
}

/// Encodes a bounded one-counter automaton as a two-counter system over `N²`.
///
/// Each transition `(p, z, q)` becomes `(p, (z, −z), q)`; the second counter
/// mirrors the slack to the bound, so a configuration `q(z)` embeds as
/// `q(z, bound − z)`. Runs within the bound correspond exactly to runs of the
/// image over `N²` between embedded configurations.
pub fn boca_to_2vass(o: &BoundedOca) -> (Vass<i64>, impl Fn(StateId, i64) -> Configuration<i64>) {
    let mut v = Vass::new(2);
    for q in 0..o.num_states {
        v.add_state(format!("q{q}"));
    }
    for &(src, u, dst) in &o.transitions {
        v.add_transition(src, vec![u, -u], dst);
    }
    let bound = o.bound;
    (v, move |state, z| Configuration::new(state, vec![z, bound - z]))
}

// --- digraph reachability as flat 2-VASS reachability ----------------------

/// A directed graph on vertices `0..num_vertices` given by its edge list.
#[derive(Clone, Debug)]
pub struct Digraph {
    pub num_vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

/// Encodes `s`-`t` reachability in a digraph as reachability in a flat
/// two-counter system.
///
/// Vertex `u_i` is represented by the counter pair `(i, m−1−i)` where `m` is
/// the vertex count. The system is a chain of `m·n` stages (`n` edges); stage
/// `j` offers a two-step detour that subtracts the source encoding of edge
/// `j mod n` and adds its target encoding, so a chain traversal simulates a
/// walk of at most `m·n` edge steps — enough for any simple path. Every state
/// lies on at most one simple cycle, so the output is structurally flat.
///
/// Returns the system together with the configurations encoding vertex `0` at
/// the chain entry and vertex `m−1` at the chain exit; the latter is reachable
/// from the former iff vertex `m−1` is reachable from vertex `0` in the graph.
pub fn graph_to_flat_2vass(g: &Digraph) -> (Vass<i64>, Configuration<i64>, Configuration<i64>) {
    let m = g.num_vertices;
    let n = g.edges.len();
    assert!(m >= 1, "graph must have at least one vertex");
    assert!(n >= 1, "graph must have at least one edge");
    assert!(
        g.edges.iter().all(|&(a, b)| a < m && b < m),
        "edge endpoint out of range"
    );
    let h = |i: usize| [i as i64, (m - 1 - i) as i64];
    let last = m * n - 1;
    let mut v = Vass::new(2);
    let mut main = Vec::with_capacity(last + 1);
    let mut detour = Vec::with_capacity(last + 1);
    for j in 0..=last {
        main.push(v.add_state(format!("q{j}")));
        detour.push(v.add_state(format!("q{j}_mid")));
    }
    for j in 0..=last {
        if j < last {
            v.add_transition(main[j], vec![0, 0], main[j + 1]);
        }
        let (a, b) = g.edges[j % n];
        let [x, y] = h(a);
        v.add_transition(main[j], vec![-x, -y], detour[j]);
        let [x, y] = h(b);
        v.add_transition(detour[j], vec![x, y], main[j]);
    }
    let from = Configuration::new(main[0], h(0).to_vec());
    let to = Configuration::new(main[last], h(m - 1).to_vec());
    (v, from, to)
}

/// Structural flatness: every state lies on at most one simple cycle.
///
/// Exponential in the worst case (it enumerates simple cycles through each
/// state, stopping at the second); intended for test-sized instances.
pub fn is_flat(v: &Vass<i64>) -> bool {
    fn cycles_through(v: &Vass<i64>, origin: StateId, at: StateId, seen: &mut Vec<bool>) -> usize {
        let mut count = 0;
        for t in v.transitions() {
            if t.src != at {
                continue;
            }
            if t.dst == origin {
                count += 1;
            } else if !seen[t.dst] {
                seen[t.dst] = true;
                count += cycles_through(v, origin, t.dst, seen);
                seen[t.dst] = false;
            }
            if count >= 2 {
                return count;
            }
        }
        count
    }
    (0..v.num_states()).all(|q| {
        let mut seen = vec![false; v.num_states()];
        seen[q] = true;
        cycles_through(v, q, q, &mut seen) <= 1
    })
}

// --- random instances ------------------------------------------------------

/// Deterministic random system: `num_trans` transitions with uniform endpoints
/// and coordinate updates in `[−norm, norm]`, resampled until the underlying
/// undirected graph connects all states.
pub fn gen_random(
    dim: usize,
    num_states: usize,
    num_trans: usize,
    norm: i64,
    seed: u64,
) -> Result<Vass<i64>, ParamError> {
    if dim == 0 || num_states == 0 {
        return Err(ParamError("dimension and state count must be positive".into()));
    }
    if norm < 0 {
        return Err(ParamError("update norm must be nonnegative".into()));
    }
    if num_states > 1 && num_trans < num_states - 1 {
        return Err(ParamError(format!(
            "{num_trans} transitions cannot connect {num_states} states"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut v = Vass::new(dim);
        for q in 0..num_states {
            v.add_state(format!("q{q}"));
        }
        for _ in 0..num_trans {
            let src = rng.gen_range(0..num_states);
            let dst = rng.gen_range(0..num_states);
            let update = (0..dim).map(|_| rng.gen_range(-norm..=norm)).collect();
            v.add_transition(src, update, dst);
        }
        if connected(&v) {
            return Ok(v);
        }
    }
}

/// Whether the underlying undirected graph of `v` is connected.
fn connected(v: &Vass<i64>) -> bool {
    let n = v.num_states();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(q) = stack.pop() {
        for t in v.transitions() {
            for (a, b) in [(t.src, t.dst), (t.dst, t.src)] {
                if a == q && !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
    }
    seen.into_iter().all(|s| s)
}

// --- doubling family -------------------------------------------------------

/// An instance whose only witnesses drive a counter through an exponential
/// peak, together with that recorded peak.
#[derive(Clone, Debug)]
pub struct DoublingInstance {
    pub vass: Vass<i64>,
    pub from: Configuration<i64>,
    pub to: Configuration<i64>,
    /// Minimal peak counter value along any witnessing run: `2^n`.
    pub peak: BigUint,
}

/// Chain of `n+1` states whose self-loops transfer value between the two
/// counters at rate two-for-one, alternating direction. Starting from one
/// unit, each stage must fully drain one counter into the other, so reaching
/// the target forces the value to double at every stage: witnesses exist and
/// every one of them attains a peak of `2^n` on some counter.
pub fn gen_doubling_family(n: usize) -> DoublingInstance {
    assert!(n >= 1, "family is defined for n >= 1");
    assert!(n < 63, "peak must fit the target configuration's i64 counters");
    let mut v = Vass::new(2);
    let states: Vec<_> = (0..=n).map(|k| v.add_state(format!("s{k}"))).collect();
    for k in 0..=n {
        let update = if k % 2 == 0 { vec![-1, 2] } else { vec![2, -1] };
        v.add_transition(states[k], update, states[k]);
        if k < n {
            v.add_transition(states[k], vec![0, 0], states[k + 1]);
        }
    }
    let from = Configuration::new(states[0], vec![1, 0]);
    let peak = 1i64 << n;
    let to = if n % 2 == 0 {
        Configuration::new(states[n], vec![peak, 0])
    } else {
        Configuration::new(states[n], vec![0, peak])
    };
    DoublingInstance { vass: v, from, to, peak: BigUint::from(1u32) << n }
}
