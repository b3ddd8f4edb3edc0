//! Top-level decision procedures: 2-VASS reachability with certificates,
//! certificate verification, coverability and boundedness.
//!
//! Reachability witnesses are linear path schemes with exponent vectors.
//! Exponents may be astronomically large while the scheme stays short, so
//! [`verify`] never unrolls a run: along each starred cycle every counter
//! moves linearly in the iteration number, and membership of all iterations
//! in the region reduces to emptiness of finitely many integer intervals.

use std::collections::VecDeque;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::core::{Configuration, CoreError, Interval, LinearPathScheme, Region, Segment, Vass};
use crate::flatten::{flatten_reach_with, path_certificate, FlattenCaps, FlattenError};
use crate::oracle::{bfs_reach, SearchCaps, SearchResult};

/// Errors of the top-level procedures.
#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("resource cap reached before a verdict")]
    ResourceCap,
    #[error("core error: {0}")]
    Core(#[from] CoreError),
}

/// A verifiable reachability witness: a scheme, one exponent per starred
/// cycle, the region the run must stay in, and the claimed endpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub scheme: LinearPathScheme,
    /// Unbounded naturals: certificates stay short even when the witnessing
    /// run is exponentially long.
    pub exponents: Vec<BigUint>,
    pub region: Region<i64>,
    /// Arbitrary-precision endpoints: huge exponents reach configurations far
    /// beyond any machine integer.
    pub from: Configuration<BigInt>,
    pub to: Configuration<BigInt>,
}

impl Certificate {
    /// Packages a machine-sized witness produced by the decision procedures.
    pub fn from_witness(
        scheme: LinearPathScheme,
        exponents: &[u64],
        region: Region<i64>,
        from: Configuration<i64>,
        to: Configuration<i64>,
    ) -> Certificate {
        Certificate {
            scheme,
            exponents: exponents.iter().map(|&e| BigUint::from(e)).collect(),
            region,
            from: big_config(&from),
            to: big_config(&to),
        }
    }
}

/// Widens a machine-sized configuration to arbitrary precision.
pub fn big_config(c: &Configuration<i64>) -> Configuration<BigInt> {
    Configuration::new(c.state, c.counters.iter().map(|&x| BigInt::from(x)).collect())
}

/// How [`reach2`] searches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Capped breadth-first search; definitive only on instances whose
    /// reachable space fits under the caps.
    BoundedSearch,
    /// The flattening decision procedure.
    Flatten,
    /// Bounded search first on small instances, flattening otherwise; falls
    /// through to the other strategy before giving up.
    Auto,
}

/// Outcome of [`reach2`]: reachable verdicts always carry a certificate.
#[derive(Clone, Debug)]
pub enum Decision {
    Reachable(Certificate),
    Unreachable,
}

/// Resource budgets of [`reach2_with`].
#[derive(Clone, Debug)]
pub struct SolverCaps {
    /// Node budget of the bounded-search strategy.
    pub search_nodes: usize,
    /// Budgets of the flattening strategy.
    pub flatten: FlattenCaps,
}

impl Default for SolverCaps {
    fn default() -> Self {
        SolverCaps { search_nodes: 1 << 21, flatten: FlattenCaps::default() }
    }
}

/// [`reach2_with`] under the default budgets.
pub fn reach2(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
    strategy: Strategy,
) -> Result<Decision, SolverError> {
    reach2_with(v, from, to, strategy, &SolverCaps::default())
}

/// Decides reachability over `N²` between two configurations.
///
/// Sound under every strategy: a `Reachable` verdict's certificate passes
/// [`verify`], an `Unreachable` verdict is definitive, and exhausting the
/// strategy's caps yields `ResourceCap` rather than a guess.
pub fn reach2_with(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
    strategy: Strategy,
    caps: &SolverCaps,
) -> Result<Decision, SolverError> {
    if v.dim() != 2 {
        return Err(SolverError::PreconditionViolated(format!(
            "reachability requires dimension 2, got {}",
            v.dim()
        )));
    }
    if from.counters.len() != 2 || to.counters.len() != 2 {
        return Err(SolverError::PreconditionViolated(
            "endpoint configurations must have two counters".into(),
        ));
    }
    if from.state >= v.num_states() || to.state >= v.num_states() {
        return Err(SolverError::PreconditionViolated("endpoint state out of range".into()));
    }
    if from.counters.iter().chain(&to.counters).any(|&x| x < 0) {
        return Err(SolverError::PreconditionViolated("endpoints must be nonnegative".into()));
    }
    match strategy {
        Strategy::BoundedSearch => bounded_search(v, from, to, caps),
        Strategy::Flatten => flatten_decision(v, from, to, caps),
        Strategy::Auto => {
            let small = v.num_states() * v.num_transitions() <= 64
                && from.counters.iter().chain(&to.counters).all(|&x| x <= 64);
            let (first, second): (fn(_, _, _, _) -> _, fn(_, _, _, _) -> _) = if small {
                (bounded_search, flatten_decision)
            } else {
                (flatten_decision, bounded_search)
            };
            match first(v, from, to, caps) {
                Err(SolverError::ResourceCap) => second(v, from, to, caps),
                other => other,
            }
        }
    }
}

fn bounded_search(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
    solver_caps: &SolverCaps,
) -> Result<Decision, SolverError> {
    // cap scaled from the endpoint and update norms; far below the pinned
    // run-length bound, so only corpus-scale instances terminate here
    let scale = from
        .counters
        .iter()
        .chain(&to.counters)
        .copied()
        .max()
        .unwrap_or(0)
        .max(v.norm_t())
        .max(16);
    let caps = SearchCaps {
        counter_caps: vec![Some(scale.saturating_mul(32)); 2],
        node_budget: Some(solver_caps.search_nodes),
        depth_budget: None,
    };
    match bfs_reach(v, from, to, &Region::NonNegative, &caps) {
        SearchResult::Found(p) => {
            let cycle_cap = 6 * v.num_states() * v.num_states();
            let (scheme, exps) = path_certificate(v, from, to, p, cycle_cap);
            Ok(Decision::Reachable(Certificate::from_witness(
                scheme,
                &exps,
                Region::NonNegative,
                from.clone(),
                to.clone(),
            )))
        }
        SearchResult::ExhaustedComplete => Ok(Decision::Unreachable),
        SearchResult::NotFoundWithinCaps => Err(SolverError::ResourceCap),
    }
}

fn flatten_decision(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
    caps: &SolverCaps,
) -> Result<Decision, SolverError> {
    match flatten_reach_with(v, from, to, &caps.flatten) {
        Ok((scheme, exps)) => Ok(Decision::Reachable(Certificate::from_witness(
            scheme,
            &exps,
            Region::NonNegative,
            from.clone(),
            to.clone(),
        ))),
        Err(FlattenError::Unreachable) => Ok(Decision::Unreachable),
        Err(FlattenError::ResourceCap) => Err(SolverError::ResourceCap),
        Err(FlattenError::PreconditionViolated(m)) => Err(SolverError::PreconditionViolated(m)),
        Err(FlattenError::Core(e)) => Err(SolverError::Core(e)),
    }
}

// --- certificate verification ----------------------------------------------

/// Why a certificate failed verification.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyFailure {
    /// Index of the offending segment, when the failure is localized.
    pub segment: Option<usize>,
    pub reason: String,
}

/// Checks a certificate; `true` iff instantiating the scheme with the
/// exponents yields a run inside the certificate's region between exactly the
/// certificate's endpoints. Polynomial in the scheme size and the bit-length
/// of the exponents — runs are never unrolled.
pub fn verify(v: &Vass<i64>, cert: &Certificate) -> bool {
    verify_report(v, cert).is_ok()
}

/// [`verify`] with a diagnostic on failure.
pub fn verify_report(v: &Vass<i64>, cert: &Certificate) -> Result<(), VerifyFailure> {
    let fail = |segment: Option<usize>, reason: String| Err(VerifyFailure { segment, reason });
    let info = match v.validate_lps(&cert.scheme) {
        Ok(i) => i,
        Err(e) => return fail(None, format!("malformed scheme: {e}")),
    };
    if cert.exponents.len() != cert.scheme.cycle_count() {
        return fail(
            None,
            format!(
                "arity mismatch: {} exponents for {} cycles",
                cert.exponents.len(),
                cert.scheme.cycle_count()
            ),
        );
    }
    if cert.from.counters.len() != v.dim() || cert.to.counters.len() != v.dim() {
        return fail(None, "endpoint dimension mismatch".into());
    }
    match info.endpoints {
        Some((s, e)) => {
            if s != cert.from.state || e != cert.to.state {
                return fail(None, "scheme endpoints do not match the certificate".into());
            }
        }
        None => {
            if cert.from.state != cert.to.state {
                return fail(None, "empty scheme between distinct states".into());
            }
        }
    }
    let mut cur: Vec<BigInt> = cert.from.counters.clone();
    if !contains_big(&cert.region, &cur) {
        return fail(None, "source configuration outside the region".into());
    }
    let mut ei = 0usize;
    for (si, seg) in cert.scheme.segments.iter().enumerate() {
        match seg {
            Segment::Plain(p) => {
                for &t in p {
                    for (c, u) in cur.iter_mut().zip(&v.transition(t).update) {
                        *c += *u;
                    }
                    if !contains_big(&cert.region, &cur) {
                        return fail(Some(si), format!("connector leaves the region at {cur:?}"));
                    }
                }
            }
            Segment::Star(b) => {
                let e = &cert.exponents[ei];
                ei += 1;
                if e.is_zero() {
                    continue;
                }
                let delta: Vec<BigInt> = v
                    .displacement(b)
                    .expect("validated scheme")
                    .into_iter()
                    .map(BigInt::from)
                    .collect();
                // iterations j = 0..e-1 start at cur + j·δ; each in-cycle
                // prefix position moves linearly in j
                let last = BigInt::from(e.clone()) - 1;
                let mut prefix = vec![BigInt::zero(); v.dim()];
                for &t in b {
                    for (p, u) in prefix.iter_mut().zip(&v.transition(t).update) {
                        *p += *u;
                    }
                    let at: Vec<BigInt> =
                        cur.iter().zip(&prefix).map(|(c, p)| c + p).collect();
                    if !iterations_contained(&cert.region, &at, &delta, &last) {
                        return fail(
                            Some(si),
                            format!("some traversal of the cycle leaves the region from {cur:?}"),
                        );
                    }
                }
                for (c, d) in cur.iter_mut().zip(&delta) {
                    *c += d * BigInt::from(e.clone());
                }
            }
        }
    }
    if cur != cert.to.counters {
        return fail(None, format!("run ends at {cur:?}, certificate claims {:?}", cert.to.counters));
    }
    Ok(())
}

fn contains_big(region: &Region<i64>, x: &[BigInt]) -> bool {
    match region {
        Region::All => true,
        Region::NonNegative => x.iter().all(|c| !c.is_negative()),
        Region::Box(ivs) => {
            ivs.len() == x.len()
                && ivs.iter().zip(x).all(|(Interval { lo, hi }, c)| {
                    c >= &BigInt::from(*lo) && (*hi).map_or(true, |h| c <= &BigInt::from(h))
                })
        }
        Region::LShape(e) => {
            x.iter().all(|c| !c.is_negative())
                && x.iter().any(|c| c <= &BigInt::from(*e))
        }
        Region::Outside(d) => x.iter().all(|c| c >= &BigInt::from(*d)),
        Region::Intersection(r, s) => contains_big(r, x) && contains_big(s, x),
    }
}

/// Whether `a + j·b ∈ region` for every integer `j ∈ [0, last]`, decided by
/// interval arithmetic on `j` (each coordinate is linear in `j`).
fn iterations_contained(region: &Region<i64>, a: &[BigInt], b: &[BigInt], last: &BigInt) -> bool {
    violations(region, a, b, last).is_empty()
}

/// Sorted disjoint closed intervals of iteration numbers.
type JSet = Vec<(BigInt, BigInt)>;

/// The `j ∈ [0, last]` with `a + j·b ∉ region`.
fn violations(region: &Region<i64>, a: &[BigInt], b: &[BigInt], last: &BigInt) -> JSet {
    match region {
        Region::All => Vec::new(),
        Region::NonNegative => {
            let mut out = Vec::new();
            for (ai, bi) in a.iter().zip(b) {
                out = jset_union(out, jset_below(ai, bi, &BigInt::zero(), last));
            }
            out
        }
        Region::Box(ivs) => {
            let mut out = Vec::new();
            for ((ai, bi), Interval { lo, hi }) in a.iter().zip(b).zip(ivs) {
                out = jset_union(out, jset_below(ai, bi, &BigInt::from(*lo), last));
                if let Some(h) = hi {
                    out = jset_union(out, jset_above(ai, bi, &BigInt::from(*h), last));
                }
            }
            out
        }
        Region::LShape(e) => {
            let mut out = Vec::new();
            for (ai, bi) in a.iter().zip(b) {
                out = jset_union(out, jset_below(ai, bi, &BigInt::zero(), last));
            }
            // both coordinates above the bound simultaneously
            let mut both = jset_above(&a[0], &b[0], &BigInt::from(*e), last);
            both = jset_intersect(&both, &jset_above(&a[1], &b[1], &BigInt::from(*e), last));
            jset_union(out, both)
        }
        Region::Outside(d) => {
            let mut out = Vec::new();
            for (ai, bi) in a.iter().zip(b) {
                out = jset_union(out, jset_below(ai, bi, &BigInt::from(*d), last));
            }
            out
        }
        Region::Intersection(r, s) => {
            jset_union(violations(r, a, b, last), violations(s, a, b, last))
        }
    }
}

/// `{j ∈ [0, last] : a + j·b < c}` — one interval since the value is monotone.
fn jset_below(a: &BigInt, b: &BigInt, c: &BigInt, last: &BigInt) -> JSet {
    let gap = c - a; // violating iff j·b < gap
    if b.is_zero() {
        return if BigInt::zero() < gap { vec![(BigInt::zero(), last.clone())] } else { vec![] };
    }
    if b.is_positive() {
        // j < gap / b  ⇔  j ≤ ceil(gap / b) - 1
        let hi = (Integer::div_ceil(&gap, b) - BigInt::from(1)).min(last.clone());
        if hi >= BigInt::zero() {
            vec![(BigInt::zero(), hi)]
        } else {
            vec![]
        }
    } else {
        // j > gap / b  ⇔  j ≥ floor(gap / b) + 1
        let lo = (Integer::div_floor(&gap, b) + BigInt::from(1)).max(BigInt::zero());
        if &lo <= last {
            vec![(lo, last.clone())]
        } else {
            vec![]
        }
    }
}

/// `{j ∈ [0, last] : a + j·b > c}`.
fn jset_above(a: &BigInt, b: &BigInt, c: &BigInt, last: &BigInt) -> JSet {
    // a + j·b > c  ⇔  -a + j·(-b) < -c
    jset_below(&-a, &-b, &-c, last)
}

fn jset_union(x: JSet, y: JSet) -> JSet {
    let mut all: JSet = x.into_iter().chain(y).collect();
    all.sort();
    let mut out: JSet = Vec::with_capacity(all.len());
    for (lo, hi) in all {
        match out.last_mut() {
            Some((_, phi)) if lo <= &*phi + 1 => {
                if hi > *phi {
                    *phi = hi;
                }
            }
            _ => out.push((lo, hi)),
        }
    }
    out
}

fn jset_intersect(x: &JSet, y: &JSet) -> JSet {
    let mut out = Vec::new();
    for (xl, xh) in x {
        for (yl, yh) in y {
            let lo = xl.max(yl).clone();
            let hi = xh.min(yh).clone();
            if lo <= hi {
                out.push((lo, hi));
            }
        }
    }
    out.sort();
    out
}

// --- coverability ----------------------------------------------------------

/// Decides whether some `w ≥ to.counters` is reachable at `to.state` from
/// `from`, via the backward fixpoint over upward-closed sets represented by
/// their minimal bases. Terminates unconditionally (well-quasi-ordering);
/// a positive verdict carries a forward-replayed witness path.
pub fn coverable(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
) -> Result<(bool, Option<Vec<usize>>), SolverError> {
    if from.counters.len() != v.dim() || to.counters.len() != v.dim() {
        return Err(SolverError::PreconditionViolated("counter dimension mismatch".into()));
    }
    if from.state >= v.num_states() || to.state >= v.num_states() {
        return Err(SolverError::PreconditionViolated("state out of range".into()));
    }
    if from.counters.iter().chain(&to.counters).any(|&x| x < 0) {
        return Err(SolverError::PreconditionViolated("configurations must be nonnegative".into()));
    }
    // basis elements: minimal configurations whose upward closure can reach a
    // covering configuration; `via` records the generating transition and the
    // successor basis element for witness reconstruction
    struct Elem {
        conf: Configuration<i64>,
        via: Option<(usize, usize)>, // (transition, successor element index)
    }
    let dominates = |a: &Configuration<i64>, b: &Configuration<i64>| {
        a.state == b.state && a.counters.iter().zip(&b.counters).all(|(x, y)| x >= y)
    };
    let mut basis: Vec<Elem> = vec![Elem { conf: to.clone(), via: None }];
    let mut alive: Vec<bool> = vec![true];
    let mut frontier: VecDeque<usize> = VecDeque::from([0usize]);
    while let Some(bi) = frontier.pop_front() {
        if !alive[bi] {
            continue;
        }
        for (ti, t) in v.transitions().iter().enumerate() {
            if t.dst != basis[bi].conf.state {
                continue;
            }
            // minimal predecessor demand: counters needed before firing t so
            // that afterwards the element is dominated
            let pred: Vec<i64> = basis[bi]
                .conf
                .counters
                .iter()
                .zip(&t.update)
                .map(|(&c, &u)| (c - u).max(0))
                .collect();
            let cand = Configuration::new(t.src, pred);
            if basis.iter().zip(&alive).any(|(e, &a)| a && dominates(&cand, &e.conf)) {
                continue;
            }
            for (e, a) in basis.iter().zip(alive.iter_mut()) {
                if *a && dominates(&e.conf, &cand) {
                    *a = false;
                }
            }
            basis.push(Elem { conf: cand, via: Some((ti, bi)) });
            alive.push(true);
            frontier.push_back(basis.len() - 1);
        }
    }
    // covered iff the source dominates some (live) basis element; elements
    // killed by domination are subsumed by the element that killed them
    let Some(start) = basis
        .iter()
        .enumerate()
        .find(|(i, e)| alive[*i] && dominates(from, &e.conf))
        .map(|(i, _)| i)
    else {
        return Ok((false, None));
    };
    // forward replay: the demand chain guarantees nonnegativity
    let mut path = Vec::new();
    let mut cur = from.clone();
    let mut at = start;
    while let Some((ti, next)) = basis[at].via {
        let t = v.transition(ti);
        debug_assert_eq!(cur.state, t.src);
        cur.state = t.dst;
        for (c, u) in cur.counters.iter_mut().zip(&t.update) {
            *c += u;
            debug_assert!(*c >= 0, "backward demand violated in forward replay");
        }
        path.push(ti);
        at = next;
    }
    debug_assert!(dominates(&cur, to), "witness does not cover the target");
    Ok((true, Some(path)))
}

// --- boundedness -----------------------------------------------------------

/// A concrete unboundedness witness: after `prefix`, the `cycle` is a valid
/// loop with componentwise nonnegative, nonzero displacement — repeating it
/// pumps some counter beyond every bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PumpWitness {
    pub prefix: Vec<usize>,
    pub cycle: Vec<usize>,
}

/// Whether the reachability set from `from` over `N^d` is finite, by a
/// Karp–Miller-style coverability tree stopped at the first acceleration
/// point (a node strictly dominating an ancestor). Terminates unconditionally
/// by well-quasi-ordering; `false` iff some counter can be pumped beyond
/// every bound.
pub fn bounded(v: &Vass<i64>, from: &Configuration<i64>) -> Result<bool, SolverError> {
    Ok(bounded_with_pump(v, from)?.is_none())
}

/// [`bounded`] with the pumping witness on the unbounded side. The search
/// stops at the first dominated ancestor, so every tree node is a concrete
/// reachable configuration and the witness replays literally.
pub fn bounded_with_pump(
    v: &Vass<i64>,
    from: &Configuration<i64>,
) -> Result<Option<PumpWitness>, SolverError> {
    if from.counters.len() != v.dim() {
        return Err(SolverError::PreconditionViolated("counter dimension mismatch".into()));
    }
    if from.state >= v.num_states() {
        return Err(SolverError::PreconditionViolated("state out of range".into()));
    }
    if from.counters.iter().any(|&x| x < 0) {
        return Err(SolverError::PreconditionViolated("configuration must be nonnegative".into()));
    }
    struct Node {
        state: usize,
        counters: Vec<i64>,
        via: Option<(usize, usize)>, // (transition, parent node)
    }
    let path_up = |nodes: &[Node], mut at: usize, stop: Option<usize>| -> Vec<usize> {
        let mut path = Vec::new();
        while Some(at) != stop {
            let Some((ti, parent)) = nodes[at].via else { break };
            path.push(ti);
            at = parent;
        }
        path.reverse();
        path
    };
    let root = Node { state: from.state, counters: from.counters.clone(), via: None };
    let mut nodes = vec![root];
    let mut work: VecDeque<usize> = VecDeque::from([0usize]);
    while let Some(ni) = work.pop_front() {
        for (ti, t) in v.transitions().iter().enumerate() {
            if t.src != nodes[ni].state {
                continue;
            }
            let next: Vec<i64> =
                nodes[ni].counters.iter().zip(&t.update).map(|(x, u)| x + u).collect();
            if next.iter().any(|&x| x < 0) {
                continue;
            }
            // a strictly dominated ancestor yields a pump
            let mut anc = Some(ni);
            while let Some(ai) = anc {
                let a = &nodes[ai];
                if a.state == t.dst
                    && next.iter().zip(&a.counters).all(|(x, y)| x >= y)
                    && next.iter().zip(&a.counters).any(|(x, y)| x > y)
                {
                    let prefix = path_up(&nodes, ai, None);
                    let mut cycle = path_up(&nodes, ni, Some(ai));
                    cycle.push(ti);
                    return Ok(Some(PumpWitness { prefix, cycle }));
                }
                anc = a.via.map(|(_, p)| p);
            }
            // prune configurations already covered by an explored node
            if nodes
                .iter()
                .any(|n| n.state == t.dst && n.counters.iter().zip(&next).all(|(x, y)| x >= y))
            {
                continue;
            }
            nodes.push(Node { state: t.dst, counters: next, via: Some((ti, ni)) });
            work.push_back(nodes.len() - 1);
        }
    }
    Ok(None)
}
