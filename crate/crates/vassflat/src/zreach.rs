//! Parikh-respecting factorization of paths into linear path schemes and the
//! integer (Z^d) reachability decision procedure.
//!
//! Over Z^d a run never blocks, so reachability only depends on the Parikh
//! image of the path: a simple skeleton path plus a connected collection of
//! simple cycles whose weighted displacements close the gap. Both directions
//! of that equivalence are constructive here: `path_to_lps` folds any path
//! into a linear path scheme with the same Parikh image, and `z_reachable`
//! searches skeleton/cycle-support candidates, discharging each against an
//! equality system from `dioph`.

use crate::core::{
    Configuration, CoreError, ExecOutcome, LinearPathScheme, Path, Region, Segment, StateId,
    TransId, Vass,
};
use crate::dioph::{build_target_equations, inhomogeneous_bound, solve_feasible, SolveOutcome};
use num_bigint::BigUint;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Multiplicity of each transition in a (partial) flow; finite support.
pub type FlowCount = BTreeMap<TransId, u64>;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ZReachError {
    #[error("counter dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("no witness: the pair is not reachable over Z")]
    NoWitness,
    #[error("candidate enumeration exceeded the resource cap")]
    ResourceCap,
    #[error("malformed path: {0}")]
    MalformedPath(CoreError),
}

/// A scheme together with one exponent per starred cycle (scheme order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZCertificate {
    pub scheme: LinearPathScheme,
    pub exponents: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ZOutcome {
    Reachable(ZCertificate),
    Unreachable,
    /// The candidate space or the solver exceeded its cap; no verdict.
    GiveUp,
}

/// Caps for the candidate enumeration in [`z_reachable`].
#[derive(Clone, Copy, Debug)]
pub struct ZReachCaps {
    /// Total (skeleton, cycle-subset) candidates examined.
    pub max_candidates: u64,
}

impl Default for ZReachCaps {
    fn default() -> Self {
        ZReachCaps { max_candidates: 1 << 20 }
    }
}

/// Does `sigma` conserve flow at every state (in-count = out-count)?
pub fn is_flow_preserving(v: &Vass<i64>, sigma: &FlowCount) -> bool {
    let mut balance: BTreeMap<StateId, i128> = BTreeMap::new();
    for (&t, &n) in sigma {
        if n == 0 {
            continue;
        }
        let tr = v.transition(t);
        *balance.entry(tr.dst).or_insert(0) += n as i128;
        *balance.entry(tr.src).or_insert(0) -= n as i128;
    }
    balance.values().all(|&b| b == 0)
}

// --- scheme assembly --------------------------------------------------------

/// Scheme under construction: plain/star pieces with one exponent per star.
struct Builder {
    start: StateId,
    items: Vec<(Segment, u64)>,
}

impl Builder {
    fn from_spine(start: StateId, spine: Vec<TransId>) -> Self {
        let items = if spine.is_empty() {
            Vec::new()
        } else {
            vec![(Segment::Plain(spine), 0)]
        };
        Builder { start, items }
    }

    /// States visited by the spine, one entry per insertion point (stars do
    /// not move the state, so they share the entry of the point before them).
    fn insertion_states(&self, v: &Vass<i64>) -> Vec<StateId> {
        let mut out = vec![self.start];
        for (seg, _) in &self.items {
            match seg {
                Segment::Plain(p) => {
                    for &t in p {
                        out.push(v.transition(t).dst);
                    }
                }
                Segment::Star(_) => out.push(*out.last().expect("nonempty")),
            }
        }
        out
    }

    /// Insert the given items at insertion point `pos` (0 = before
    /// everything; points advance per plain edge and per star).
    fn insert_items(&mut self, pos: usize, new: Vec<(Segment, u64)>) {
        let mut at = 0usize;
        for i in 0..self.items.len() {
            let width = match &self.items[i].0 {
                Segment::Plain(p) => p.len(),
                Segment::Star(_) => 1,
            };
            if pos <= at {
                self.items.splice(i..i, new);
                return;
            }
            if pos < at + width {
                // split a plain segment
                if let (Segment::Plain(p), _) = &self.items[i] {
                    let off = pos - at;
                    let head = p[..off].to_vec();
                    let tail = p[off..].to_vec();
                    let mut repl = vec![(Segment::Plain(head), 0)];
                    repl.extend(new);
                    repl.push((Segment::Plain(tail), 0));
                    self.items.splice(i..=i, repl);
                    return;
                }
                unreachable!("stars have width 1, pos can only land inside a plain");
            }
            at += width;
        }
        self.items.extend(new);
    }

    /// Insert `β*` with the given exponent at insertion point `pos`.
    fn insert_star(&mut self, pos: usize, cycle: Path, exponent: u64) {
        self.insert_items(pos, vec![(Segment::Star(cycle), exponent)]);
    }

    fn finish(self) -> (LinearPathScheme, Vec<u64>) {
        let mut segments = Vec::with_capacity(self.items.len());
        let mut exps = Vec::new();
        for (seg, e) in self.items {
            if matches!(seg, Segment::Star(_)) {
                exps.push(e);
            }
            segments.push(seg);
        }
        (LinearPathScheme { segments }, exps)
    }
}

/// Rotate a simple cycle so it starts with its least transition index.
fn canonical_rotation(cycle: &[TransId]) -> Vec<TransId> {
    let k = cycle
        .iter()
        .enumerate()
        .min_by_key(|(_, &t)| t)
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut out = cycle[k..].to_vec();
    out.extend_from_slice(&cycle[..k]);
    out
}

/// Fold `pi` into a linear path scheme with the same Parikh image.
///
/// Construction: (1) protect the first edge and every edge that first enters
/// a state, and greedily move simple cycles between protected edges into a
/// flow count; (2) while the flow has support, walk least-index edges until a
/// state repeats, peel that simple cycle at its minimum multiplicity, and
/// splice it as a star at the leftmost spine occurrence of its anchor state.
///
/// The result has the original endpoints, at most `2·|U|·|E|` transitions
/// counting each cycle once, and at most `|E|` cycles, where `U`/`E` are the
/// states/transitions actually used by `pi`.
pub fn path_to_lps(
    v: &Vass<i64>,
    pi: &[TransId],
) -> Result<(LinearPathScheme, Vec<u64>), ZReachError> {
    let endpoints = v.path_endpoints(pi).map_err(ZReachError::MalformedPath)?;
    let Some((start, _)) = endpoints else {
        return Ok((LinearPathScheme::default(), Vec::new()));
    };

    // phase 1: skeleton spine + flow of removed cycles
    let mut visited: BTreeSet<StateId> = BTreeSet::new();
    visited.insert(start);
    let mut sigma: FlowCount = FlowCount::new();
    let mut spine: Vec<TransId> = Vec::new();
    let mut states: Vec<StateId> = vec![start];
    let mut protected: Vec<bool> = Vec::new();
    for (idx, &t) in pi.iter().enumerate() {
        let tr = v.transition(t);
        let new_state = visited.insert(tr.dst);
        let guard = idx == 0 || new_state;
        spine.push(t);
        protected.push(guard);
        states.push(tr.dst);
        if !guard {
            if let Some(i) = (0..states.len() - 1).rev().find(|&i| states[i] == tr.dst) {
                if !protected[i..].iter().any(|&p| p) {
                    for &e in &spine[i..] {
                        *sigma.entry(e).or_insert(0) += 1;
                    }
                    spine.truncate(i);
                    states.truncate(i + 1);
                    protected.truncate(i);
                }
            }
        }
    }
    debug_assert!(is_flow_preserving(v, &sigma));

    // phase 2: peel simple cycles from the flow and splice them in
    let mut builder = Builder::from_spine(start, spine);
    while let Some((&e0, _)) = sigma.iter().next() {
        // least-index-edge walk until a state repeats
        let mut cyc: Vec<TransId> = vec![e0];
        let mut seq: Vec<StateId> = vec![v.transition(e0).src, v.transition(e0).dst];
        let cycle = loop {
            let cur = *seq.last().expect("nonempty");
            if let Some(p) = seq[..seq.len() - 1].iter().position(|&s| s == cur) {
                break cyc[p..].to_vec();
            }
            let next = sigma
                .iter()
                .find(|(&t, _)| v.transition(t).src == cur)
                .map(|(&t, _)| t)
                .expect("flow preservation guarantees an outgoing edge");
            cyc.push(next);
            seq.push(v.transition(next).dst);
        };
        let cycle = canonical_rotation(&cycle);
        let count = cycle
            .iter()
            .map(|t| *sigma.get(t).expect("cycle drawn from support"))
            .min()
            .expect("cycle nonempty");
        for t in &cycle {
            let c = sigma.get_mut(t).expect("cycle drawn from support");
            *c -= count;
            if *c == 0 {
                sigma.remove(t);
            }
        }
        let anchor = v.transition(cycle[0]).src;
        let pos = builder
            .insertion_states(v)
            .iter()
            .position(|&s| s == anchor)
            .expect("the spine visits every state of pi");
        builder.insert_star(pos, cycle, count);
    }

    let (rho, exps) = builder.finish();
    debug_assert_eq!(
        crate::core::parikh(&v.instantiate_lps(&rho, &exps).expect("valid by construction")),
        crate::core::parikh(pi)
    );
    Ok((rho, exps))
}

// --- simple cycles and skeletons -------------------------------------------

/// All simple cycles (no repeated state, length ≤ |Q|), each rotated to start
/// at its least transition index; sorted by that canonical form.
pub fn simple_cycles(v: &Vass<i64>) -> Vec<Path> {
    let mut out: Vec<Path> = Vec::new();
    let n = v.num_transitions();
    for e0 in 0..n {
        let root = v.transition(e0).src;
        // DFS over edges with index > e0 keeps e0 the canonical minimum
        let mut stack: Vec<(Vec<TransId>, Vec<StateId>)> =
            vec![(vec![e0], vec![root, v.transition(e0).dst])];
        while let Some((path, states)) = stack.pop() {
            let cur = *states.last().expect("nonempty");
            if cur == root {
                out.push(path);
                continue;
            }
            for t in (0..n).rev() {
                if t <= e0 || v.transition(t).src != cur {
                    continue;
                }
                let dst = v.transition(t).dst;
                if dst != root && states.contains(&dst) {
                    continue;
                }
                let mut p = path.clone();
                p.push(t);
                let mut s = states.clone();
                s.push(dst);
                stack.push((p, s));
            }
        }
    }
    out.sort();
    out
}

/// Simple paths from `p` to `q` (no repeated state), lowest-index-first DFS
/// order; includes the empty path when `p == q`.
pub(crate) fn simple_paths(v: &Vass<i64>, p: StateId, q: StateId) -> Vec<Path> {
    let mut out = Vec::new();
    let n = v.num_transitions();
    let mut stack: Vec<(Path, Vec<StateId>)> = vec![(Vec::new(), vec![p])];
    while let Some((path, states)) = stack.pop() {
        let cur = *states.last().expect("nonempty");
        if cur == q {
            out.push(path.clone());
            // fall through: longer paths may revisit q? no — simple paths
            // cannot come back to q once left, so stop this branch
            continue;
        }
        for t in (0..n).rev() {
            if v.transition(t).src != cur {
                continue;
            }
            let dst = v.transition(t).dst;
            if states.contains(&dst) {
                continue;
            }
            let mut np = path.clone();
            np.push(t);
            let mut ns = states.clone();
            ns.push(dst);
            stack.push((np, ns));
        }
    }
    out
}

pub(crate) fn cycle_states(v: &Vass<i64>, cycle: &[TransId]) -> BTreeSet<StateId> {
    cycle.iter().map(|&t| v.transition(t).src).collect()
}

/// Splices each attached cycle into the skeleton spine at the leftmost
/// occurrence of one of its states: a concrete traversal (exposing the cycle's
/// interior states as anchors for cycles attached later) followed by its star.
/// `attached` must be ordered so every cycle touches a state already on the
/// spine when its turn comes.
pub(crate) fn spliced_scheme(
    v: &Vass<i64>,
    start: StateId,
    skel: &[TransId],
    cycles: &[Path],
    cyc_states: &[BTreeSet<StateId>],
    attached: &[usize],
) -> LinearPathScheme {
    let mut builder = Builder::from_spine(start, skel.to_vec());
    for &ci in attached {
        let spine = builder.insertion_states(v);
        let (pos, &anchor) = spine
            .iter()
            .enumerate()
            .find(|(_, s)| cyc_states[ci].contains(s))
            .expect("attached cycles share a spine state");
        let cyc = &cycles[ci];
        let starts: Vec<StateId> = cyc.iter().map(|&t| v.transition(t).src).collect();
        let k = starts.iter().position(|&s| s == anchor).expect("anchor on cycle");
        let mut rotated = cyc[k..].to_vec();
        rotated.extend_from_slice(&cyc[..k]);
        builder.insert_items(
            pos,
            vec![(Segment::Plain(rotated.clone()), 0), (Segment::Star(rotated), 0)],
        );
    }
    builder.finish().0
}

/// Decide reachability over Z^d with default caps.
pub fn z_reachable(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
) -> Result<ZOutcome, ZReachError> {
    z_reachable_with(v, from, to, &ZReachCaps::default())
}

/// Decide reachability over Z^d.
///
/// Candidates are pairs of a simple skeleton path from `from.state` to
/// `to.state` and a connected subset of simple cycles anchored on it; each is
/// discharged by solving the displacement equations with every chosen cycle
/// used at least once. This is complete: any Z-run's Parikh image decomposes
/// into exactly such a pair.
pub fn z_reachable_with(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
    caps: &ZReachCaps,
) -> Result<ZOutcome, ZReachError> {
    if from.counters.len() != to.counters.len() || from.counters.len() != v.dim() {
        return Err(ZReachError::DimensionMismatch(from.counters.len(), to.counters.len()));
    }
    if from == to {
        return Ok(ZOutcome::Reachable(ZCertificate {
            scheme: LinearPathScheme::default(),
            exponents: Vec::new(),
        }));
    }
    let cycles = simple_cycles(v);
    let cyc_states: Vec<BTreeSet<StateId>> =
        cycles.iter().map(|c| cycle_states(v, c)).collect();
    let skeletons = simple_paths(v, from.state, to.state);
    let mut budget = caps.max_candidates;
    let mut gave_up = false;
    for skel in &skeletons {
        let mut skel_states: BTreeSet<StateId> = BTreeSet::new();
        skel_states.insert(from.state);
        for &t in skel {
            skel_states.insert(v.transition(t).dst);
        }
        // cycles that can ever attach to this skeleton (directly or via
        // other such cycles)
        let mut usable: Vec<usize> = Vec::new();
        let mut reach_states = skel_states.clone();
        loop {
            let mut grew = false;
            for (i, cs) in cyc_states.iter().enumerate() {
                if usable.contains(&i) {
                    continue;
                }
                if cs.iter().any(|s| reach_states.contains(s)) {
                    usable.push(i);
                    reach_states.extend(cs.iter().copied());
                    grew = true;
                }
            }
            if !grew {
                break;
            }
        }
        usable.sort_unstable();
        if usable.len() > 20 {
            // subset enumeration would overflow any budget; give up cleanly
            gave_up = true;
            continue;
        }
        for mask in 0u64..(1u64 << usable.len()) {
            if budget == 0 {
                gave_up = true;
                break;
            }
            budget -= 1;
            let chosen: Vec<usize> =
                (0..usable.len()).filter(|&i| mask >> i & 1 == 1).map(|i| usable[i]).collect();
            // connectivity of skeleton ∪ chosen cycles
            let mut attached: Vec<usize> = Vec::new();
            let mut states = skel_states.clone();
            loop {
                let mut grew = false;
                for &ci in &chosen {
                    if attached.contains(&ci) {
                        continue;
                    }
                    if cyc_states[ci].iter().any(|s| states.contains(s)) {
                        attached.push(ci);
                        states.extend(cyc_states[ci].iter().copied());
                        grew = true;
                    }
                }
                if !grew {
                    break;
                }
            }
            if attached.len() != chosen.len() {
                continue;
            }
            // splice one concrete traversal of each cycle into the spine
            // followed by its star; the star exponent then counts the extra
            // traversals beyond the mandatory first one
            let scheme = spliced_scheme(v, from.state, skel, &cycles, &cyc_states, &attached);
            let sys = build_target_equations(&from.counters, &to.counters, v, &scheme)
                .expect("scheme valid by construction");
            match solve_feasible(&sys) {
                SolveOutcome::Solution(e) => {
                    let cert = ZCertificate { scheme, exponents: e };
                    debug_assert!(certificate_replays(v, from, to, &cert));
                    return Ok(ZOutcome::Reachable(cert));
                }
                SolveOutcome::Infeasible => {}
                SolveOutcome::BoundOverflow => gave_up = true,
            }
        }
        if budget == 0 {
            gave_up = true;
            break;
        }
    }
    Ok(if gave_up { ZOutcome::GiveUp } else { ZOutcome::Unreachable })
}

/// Replay a certificate over Z^d and check the exact endpoint.
pub fn certificate_replays(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
    cert: &ZCertificate,
) -> bool {
    let Ok(path) = v.instantiate_lps(&cert.scheme, &cert.exponents) else {
        return false;
    };
    if let Some((s, _)) = v.path_endpoints(&path).ok().flatten() {
        if s != from.state {
            return false;
        }
    }
    match v.execute(from, &path, &Region::All) {
        Ok(ExecOutcome::Done(c)) => &c == to,
        _ => path.is_empty() && from == to,
    }
}

/// A concrete short path witnessing Z-reachability.
///
/// Instantiates the certificate of [`z_reachable`]; with lexicographically
/// least exponents the length stays within `b·|ρ|` for `b` the pinned
/// inhomogeneous bound of the certificate's equation system.
pub fn z_short_witness(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
) -> Result<Path, ZReachError> {
    match z_reachable(v, from, to)? {
        ZOutcome::Reachable(cert) => {
            let path = v.instantiate_lps(&cert.scheme, &cert.exponents).expect("valid cert");
            #[cfg(debug_assertions)]
            {
                let eqs = build_target_equations(&from.counters, &to.counters, v, &cert.scheme)
                    .expect("valid cert");
                let bound = inhomogeneous_bound(&eqs) * BigUint::from(cert.scheme.len().max(1));
                assert!(BigUint::from(path.len()) <= bound);
            }
            Ok(path)
        }
        ZOutcome::Unreachable => Err(ZReachError::NoWitness),
        ZOutcome::GiveUp => Err(ZReachError::ResourceCap),
    }
}
