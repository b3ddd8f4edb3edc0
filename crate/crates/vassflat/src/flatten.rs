//! The outside-region machinery and the global factorization that decides
//! 2-VASS reachability through flattening.
//!
//! The plane splits into the L-shaped belt region `𝓛 = LShape(E)`, the
//! outside region `𝒪 = [D,∞)²`, and their overlap `𝓑 = 𝓛 ∩ 𝒪`: two bands of
//! width `∥T∥+1` where one coordinate sits in `[D, E]` and the other is
//! unbounded. The threshold `D` is chosen so that every zigzag-free scheme in
//! the materialized witness family stays nonnegative when started at or above
//! `(D, D)`; then same-state reachability over `N²` between configurations in
//! the outside region coincides with plain `Z²`-reachability, and arbitrary
//! runs factor into belt segments and outside segments stitched inside `𝓑`.
//!
//! The module exposes the threshold computation ([`compute_d`]), the
//! same-state jump over the outside region ([`type1_reach`]), the procedure
//! for runs confined to the outside region ([`outside_reach`]), and the
//! complete decision procedure ([`flatten_reach`]) built from a bounded
//! exhaustive search, a flat scheme search over skeletons with per-state loop
//! families, and belt-to-band stitching.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::core::{
    Configuration, CoreError, ExecOutcome, LinearPathScheme, Path, Region, Segment, StateId,
    TransId, Vass,
};
use crate::dioph::{
    build_lps_system, build_target_equations, conjoin, solve_feasible, SolveOutcome,
};
use crate::geometry::zigzag_decompose;
use crate::onedim::belt_reach;
use crate::oracle::{bfs_reach, SearchCaps, SearchResult};
use crate::zreach::{
    cycle_states, path_to_lps, simple_cycles, simple_paths, spliced_scheme, z_reachable, ZOutcome,
};

/// Errors of the flattening procedures.
#[derive(Debug, thiserror::Error)]
pub enum FlattenError {
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("no witnessing run exists")]
    Unreachable,
    #[error("resource cap reached before a verdict")]
    ResourceCap,
    #[error("core error: {0}")]
    Core(#[from] CoreError),
}

/// Search budgets of the flattening procedures. All limits are pinned
/// engineering constants; exhausting one yields `ResourceCap`, never a wrong
/// verdict.
#[derive(Clone, Debug)]
pub struct FlattenCaps {
    /// Largest set of simple cycles reachable from one state for which the
    /// candidate loop schemes are still enumerated exhaustively.
    pub usable_cycle_cap: usize,
    /// Total candidate loop schemes decomposed while materializing the
    /// witness families.
    pub scheme_budget: usize,
    /// Candidate schemes solved per flat witness search.
    pub flat_candidate_budget: usize,
    /// Node budget of the first bounded exhaustive search.
    pub quick_nodes: usize,
    /// Node budget of the final fallback exhaustive search.
    pub fallback_nodes: usize,
    /// Band configurations collected per belt exploration.
    pub anchor_limit: usize,
    /// Anchor pairs tried during belt-to-band stitching.
    pub stitch_budget: usize,
    /// Belt stitching is attempted only when `E` stays below this bound.
    pub belt_bound_cap: i64,
    /// Certificates up to this many concrete steps are verified by explicit
    /// replay; longer ones arithmetically through their constraint systems.
    pub replay_step_cap: u128,
}

impl Default for FlattenCaps {
    fn default() -> Self {
        FlattenCaps {
            usable_cycle_cap: 16,
            scheme_budget: 2048,
            flat_candidate_budget: 4096,
            quick_nodes: 1 << 17,
            fallback_nodes: 1 << 21,
            anchor_limit: 64,
            stitch_budget: 48,
            belt_bound_cap: 64,
            replay_step_cap: 1 << 20,
        }
    }
}

/// How the threshold `D` is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DStrategy {
    /// Materialize the witness family and take the exact maximum
    /// `max{|σ|}·∥T∥` over its schemes.
    Exact,
    /// The pinned closed-form over-approximation `(|Q|·|T|·(∥T∥+1))^10`.
    Formula,
}

/// Region thresholds plus the materialized per-state families of zigzag-free
/// loop schemes used by the symbolic procedures.
#[derive(Clone, Debug)]
pub struct FlattenParams {
    /// Outside-region threshold: `𝒪 = [D,∞)²`.
    pub d: i64,
    /// Belt width: `𝓛 = LShape(E)` with `E = D + ∥T∥`.
    pub e: i64,
    /// For each state, zigzag-free loop schemes with at most two cycles whose
    /// displacement sets jointly cover every achievable same-state `Z²`
    /// displacement, closed under deleting cycles. The undeleted scheme of
    /// each decomposition comes first.
    families: Vec<Vec<LinearPathScheme>>,
}

impl FlattenParams {
    /// Exact-threshold parameters with default budgets.
    pub fn exact(v: &Vass<i64>) -> Result<FlattenParams, FlattenError> {
        FlattenParams::exact_with(v, &FlattenCaps::default())
    }

    /// Exact-threshold parameters: enumerates, for every state, all candidate
    /// loop schemes (connected subsets of simple cycles spliced into the
    /// trivial skeleton), rewrites each into zigzag-free schemes, and sets
    /// `D = max{|σ|}·∥T∥` over everything produced.
    pub fn exact_with(v: &Vass<i64>, caps: &FlattenCaps) -> Result<FlattenParams, FlattenError> {
        let (families, max_len) = materialize_families(v, caps)?;
        let tnorm = v.norm_t();
        let d = (max_len as i64).checked_mul(tnorm).ok_or(FlattenError::ResourceCap)?;
        let e = d.checked_add(tnorm).ok_or(FlattenError::ResourceCap)?;
        Ok(FlattenParams { d, e, families })
    }

    /// Parameters with a caller-supplied threshold (e.g. the closed-form one).
    /// The threshold must dominate the exact one, otherwise the monotonicity
    /// guarantee behind the same-state equivalence would not hold.
    pub fn with_threshold(
        v: &Vass<i64>,
        d: i64,
        caps: &FlattenCaps,
    ) -> Result<FlattenParams, FlattenError> {
        let exact = FlattenParams::exact_with(v, caps)?;
        if d < exact.d {
            return Err(FlattenError::PreconditionViolated(format!(
                "threshold {d} is below the exact threshold {}",
                exact.d
            )));
        }
        let e = d.checked_add(v.norm_t()).ok_or(FlattenError::ResourceCap)?;
        Ok(FlattenParams { d, e, families: exact.families })
    }

    /// The witness family of one state.
    pub fn family(&self, q: StateId) -> &[LinearPathScheme] {
        &self.families[q]
    }

    /// The outside region `𝒪 = [D,∞)²`.
    pub fn outside(&self) -> Region<i64> {
        Region::Outside(self.d)
    }

    /// The belt region `𝓛 = LShape(E)`.
    pub fn belt(&self) -> Region<i64> {
        Region::LShape(self.e)
    }

    /// Whether a configuration lies in a band of `𝓑 = 𝓛 ∩ 𝒪`.
    pub fn in_band(&self, c: &Configuration<i64>) -> bool {
        let (x, y) = (c.counters[0], c.counters[1]);
        x >= self.d && y >= self.d && x.min(y) <= self.e
    }
}

/// The outside-region threshold.
///
/// Any zigzag-free scheme of the materialized family stays nonnegative when
/// instantiated between configurations at or above `(D, D)`: a traversal
/// prefix can dip at most `|σ|·∥T∥ ≤ D` below an endpoint.
pub fn compute_d(v: &Vass<i64>, strategy: DStrategy) -> Result<i64, FlattenError> {
    check_two_dim(v)?;
    match strategy {
        DStrategy::Exact => Ok(FlattenParams::exact(v)?.d),
        DStrategy::Formula => {
            let base = (v.num_states() as i64)
                .checked_mul(v.num_transitions() as i64)
                .and_then(|b| b.checked_mul(v.norm_t().checked_add(1)?))
                .ok_or(FlattenError::ResourceCap)?;
            let mut d: i64 = 1;
            for _ in 0..10 {
                d = d.checked_mul(base).ok_or(FlattenError::ResourceCap)?;
            }
            Ok(d)
        }
    }
}

fn materialize_families(
    v: &Vass<i64>,
    caps: &FlattenCaps,
) -> Result<(Vec<Vec<LinearPathScheme>>, usize), FlattenError> {
    check_two_dim(v)?;
    let cycles = simple_cycles(v);
    let cyc_states: Vec<BTreeSet<StateId>> = cycles.iter().map(|c| cycle_states(v, c)).collect();
    let mut budget = caps.scheme_budget;
    let mut families: Vec<Vec<LinearPathScheme>> = vec![Vec::new(); v.num_states()];
    let mut max_len: usize = 0;
    for q in 0..v.num_states() {
        // cycles that can attach to the trivial skeleton at q, directly or
        // through other such cycles
        let mut usable: Vec<usize> = Vec::new();
        let mut reach_states: BTreeSet<StateId> = BTreeSet::new();
        reach_states.insert(q);
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
        if usable.len() > caps.usable_cycle_cap {
            return Err(FlattenError::ResourceCap);
        }
        let mut seen: BTreeSet<Vec<(bool, Vec<TransId>)>> = BTreeSet::new();
        for mask in 0u64..(1u64 << usable.len()) {
            let chosen: Vec<usize> =
                (0..usable.len()).filter(|&i| mask >> i & 1 == 1).map(|i| usable[i]).collect();
            if chosen.is_empty() {
                continue;
            }
            // keep only subsets connected to {q}, ordered so each cycle
            // attaches to states already reachable
            let mut attached: Vec<usize> = Vec::new();
            let mut states: BTreeSet<StateId> = BTreeSet::new();
            states.insert(q);
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
            if budget == 0 {
                return Err(FlattenError::ResourceCap);
            }
            budget -= 1;
            let cand = spliced_scheme(v, q, &[], &cycles, &cyc_states, &attached);
            let sigmas = zigzag_decompose(v, &cand).map_err(|_| FlattenError::ResourceCap)?;
            for sigma in sigmas {
                max_len = max_len.max(sigma.len());
                for variant in cycle_deletions(&sigma) {
                    let key: Vec<(bool, Vec<TransId>)> = variant
                        .segments
                        .iter()
                        .map(|s| (s.is_star(), s.steps().to_vec()))
                        .collect();
                    if seen.insert(key) {
                        families[q].push(variant);
                    }
                }
            }
        }
    }
    Ok((families, max_len))
}

/// The scheme followed by every variant obtained by deleting a subset of its
/// starred cycles (solvers force every remaining cycle to run at least once,
/// so zero exponents are covered by the deletions). The unmodified scheme
/// comes first; the empty scheme is dropped.
fn cycle_deletions(sigma: &LinearPathScheme) -> Vec<LinearPathScheme> {
    let star_positions: Vec<usize> = sigma
        .segments
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_star())
        .map(|(i, _)| i)
        .collect();
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << star_positions.len()) {
        let dropped: BTreeSet<usize> = star_positions
            .iter()
            .enumerate()
            .filter(|(j, _)| mask >> j & 1 == 1)
            .map(|(_, &p)| p)
            .collect();
        let segments: Vec<Segment> = sigma
            .segments
            .iter()
            .enumerate()
            .filter(|(i, _)| !dropped.contains(i))
            .map(|(_, s)| s.clone())
            .collect();
        if !segments.is_empty() {
            out.push(LinearPathScheme { segments });
        }
    }
    out
}

// --- flat witness search ---------------------------------------------------

enum FlatOutcome {
    Witness(LinearPathScheme, Vec<u64>),
    NoneFound { definitive: bool },
}

/// Searches for a scheme of the shape `α₀ σ₁ α₁ ⋯ σ_h α_h` valid over `N²`
/// from `from` to `to`: simple-path connectors joined at up to `max_anchors`
/// distinct anchor states, each carrying one scheme of its witness family.
/// Every candidate is discharged exactly by the scheme inequality system
/// conjoined with the displacement equations, so reported witnesses are
/// always sound regardless of the thresholds.
fn flat_witness(
    v: &Vass<i64>,
    families: &[Vec<LinearPathScheme>],
    from: &Configuration<i64>,
    to: &Configuration<i64>,
    max_anchors: usize,
    caps: &FlattenCaps,
) -> FlatOutcome {
    struct Dfs<'a> {
        v: &'a Vass<i64>,
        families: &'a [Vec<LinearPathScheme>],
        from: &'a Configuration<i64>,
        to: &'a Configuration<i64>,
        max_anchors: usize,
        budget: usize,
        definitive: bool,
        // simple paths between state pairs, computed on demand
        paths: HashMap<(StateId, StateId), Vec<Path>>,
    }
    impl Dfs<'_> {
        fn paths(&mut self, p: StateId, q: StateId) -> Vec<Path> {
            if let Some(ps) = self.paths.get(&(p, q)) {
                return ps.clone();
            }
            let mut ps = simple_paths(self.v, p, q);
            ps.sort_by_key(|a| a.len());
            self.paths.insert((p, q), ps.clone());
            ps
        }

        fn solve(&mut self, segments: &[Segment]) -> Option<(LinearPathScheme, Vec<u64>)> {
            if self.budget == 0 {
                self.definitive = false;
                return None;
            }
            self.budget -= 1;
            let scheme = LinearPathScheme { segments: segments.to_vec() };
            let chi = vec![true; scheme.cycle_count()];
            let Ok(ineq) = build_lps_system(&self.from.counters, self.v, &scheme, &chi) else {
                return None;
            };
            let Ok(eqs) =
                build_target_equations(&self.from.counters, &self.to.counters, self.v, &scheme)
            else {
                return None;
            };
            let Ok(sys) = conjoin(&ineq, &eqs) else {
                return None;
            };
            match solve_feasible(&sys) {
                SolveOutcome::Solution(e) => Some((scheme, e)),
                SolveOutcome::Infeasible => None,
                SolveOutcome::BoundOverflow => {
                    self.definitive = false;
                    None
                }
            }
        }

        /// Checks the prefix alone for validity over `N²` (no target
        /// equations): an infeasible prefix dooms its entire subtree.
        fn prefix_feasible(&mut self, segments: &[Segment]) -> bool {
            if self.budget == 0 {
                self.definitive = false;
                return false;
            }
            self.budget -= 1;
            let scheme = LinearPathScheme { segments: segments.to_vec() };
            let chi = vec![true; scheme.cycle_count()];
            let Ok(sys) = build_lps_system(&self.from.counters, self.v, &scheme, &chi) else {
                return false;
            };
            match solve_feasible(&sys) {
                SolveOutcome::Solution(_) => true,
                SolveOutcome::Infeasible => false,
                SolveOutcome::BoundOverflow => {
                    self.definitive = false;
                    false
                }
            }
        }

        fn recurse(
            &mut self,
            cur: StateId,
            used: u64,
            anchors: usize,
            prefix: &mut Vec<Segment>,
        ) -> Option<(LinearPathScheme, Vec<u64>)> {
            // close the candidate with a final connector
            for tail in self.paths(cur, self.to.state) {
                let mut segments = prefix.clone();
                if !tail.is_empty() {
                    segments.push(Segment::Plain(tail));
                }
                if let Some(found) = self.solve(&segments) {
                    return Some(found);
                }
                if self.budget == 0 {
                    self.definitive = false;
                    return None;
                }
            }
            if anchors == self.max_anchors {
                return None;
            }
            // or extend by a connector to a fresh anchor carrying a scheme
            for a in 0..self.v.num_states() {
                if used >> a & 1 == 1 || self.families[a].is_empty() {
                    continue;
                }
                for pi in self.paths(cur, a) {
                    for sigma in self.families[a].to_vec() {
                        let depth = prefix.len();
                        if !pi.is_empty() {
                            prefix.push(Segment::Plain(pi.clone()));
                        }
                        prefix.extend(sigma.segments.iter().cloned());
                        let found = if self.prefix_feasible(prefix) {
                            self.recurse(a, used | 1 << a, anchors + 1, prefix)
                        } else {
                            None
                        };
                        prefix.truncate(depth);
                        if found.is_some() {
                            return found;
                        }
                        if self.budget == 0 {
                            self.definitive = false;
                            return None;
                        }
                    }
                }
            }
            None
        }
    }

    let mut dfs = Dfs {
        v,
        families,
        from,
        to,
        max_anchors,
        budget: caps.flat_candidate_budget,
        definitive: true,
        paths: HashMap::new(),
    };
    let mut prefix = Vec::new();
    match dfs.recurse(from.state, 0, 0, &mut prefix) {
        Some((scheme, exps)) => FlatOutcome::Witness(scheme, exps),
        None => FlatOutcome::NoneFound { definitive: dfs.definitive },
    }
}

// --- the three procedures --------------------------------------------------

/// Same-state reachability across the outside region.
///
/// For `u, v′ ≥ (D, D)` with `D` at least the exact threshold, reachability
/// over `N²` coincides with reachability over `Z²`, and a witness exists as a
/// single zigzag-free scheme with at most two cycles from the state's
/// family. Candidates are validated by their exact constraint systems, so a
/// returned witness is replay-correct even with huge exponents.
pub fn type1_reach(
    v: &Vass<i64>,
    params: &FlattenParams,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
) -> Result<(LinearPathScheme, Vec<u64>), FlattenError> {
    type1_reach_with(v, params, from, to, &FlattenCaps::default())
}

pub fn type1_reach_with(
    v: &Vass<i64>,
    params: &FlattenParams,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
    caps: &FlattenCaps,
) -> Result<(LinearPathScheme, Vec<u64>), FlattenError> {
    check_endpoints(v, from, to)?;
    if from.state != to.state {
        return Err(FlattenError::PreconditionViolated("endpoints must share a state".into()));
    }
    let outside = params.outside();
    if !outside.contains(&from.counters) || !outside.contains(&to.counters) {
        return Err(FlattenError::PreconditionViolated(
            "endpoints must lie in the outside region".into(),
        ));
    }
    if from == to {
        return Ok((LinearPathScheme::default(), Vec::new()));
    }
    match flat_witness(v, &params.families, from, to, 1, caps) {
        FlatOutcome::Witness(scheme, exps) => {
            debug_assert!(scheme.cycle_count() <= 2);
            debug_assert!(witness_checks(v, from, to, &scheme, &exps, caps.replay_step_cap));
            Ok((scheme, exps))
        }
        FlatOutcome::NoneFound { definitive: true } => Err(FlattenError::Unreachable),
        FlatOutcome::NoneFound { definitive: false } => Err(FlattenError::ResourceCap),
    }
}

/// Reachability by runs confined to the outside region `𝒪 = [D,∞)²`.
///
/// A run stays in `𝒪` exactly when its shift by `(−D, −D)` stays in `N²`, so
/// the flat search runs on the shifted endpoints: skeletons with cycle-free
/// connectors joined at per-state family schemes, at most `2·|Q|` cycles
/// total, each candidate validated by its constraint system on the shifted
/// instance.
pub fn outside_reach(
    v: &Vass<i64>,
    params: &FlattenParams,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
) -> Result<(LinearPathScheme, Vec<u64>), FlattenError> {
    outside_reach_with(v, params, from, to, &FlattenCaps::default())
}

pub fn outside_reach_with(
    v: &Vass<i64>,
    params: &FlattenParams,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
    caps: &FlattenCaps,
) -> Result<(LinearPathScheme, Vec<u64>), FlattenError> {
    check_endpoints(v, from, to)?;
    let outside = params.outside();
    if !outside.contains(&from.counters) || !outside.contains(&to.counters) {
        return Err(FlattenError::PreconditionViolated(
            "endpoints must lie in the outside region".into(),
        ));
    }
    if from == to {
        return Ok((LinearPathScheme::default(), Vec::new()));
    }
    let shift = |c: &Configuration<i64>| {
        Configuration::new(c.state, c.counters.iter().map(|&x| x - params.d).collect())
    };
    let (sf, st) = (shift(from), shift(to));
    match flat_witness(v, &params.families, &sf, &st, v.num_states(), caps) {
        FlatOutcome::Witness(scheme, exps) => {
            debug_assert!(scheme.cycle_count() <= 2 * v.num_states());
            debug_assert!(witness_checks(v, &sf, &st, &scheme, &exps, caps.replay_step_cap));
            Ok((scheme, exps))
        }
        FlatOutcome::NoneFound { definitive: true } => Err(FlattenError::Unreachable),
        FlatOutcome::NoneFound { definitive: false } => Err(FlattenError::ResourceCap),
    }
}

/// Complete decision procedure for 2-VASS reachability over `N²`.
///
/// Stages, each sound on its own:
/// 1. bounded exhaustive search — decides every instance whose reachable
///    space fits under the pinned quick caps;
/// 2. flat scheme search from the endpoints (skeletons plus per-state
///    families, exact constraint validation) — finds witnesses whose
///    exponents are far beyond any enumeration;
/// 3. `Z²` relaxation — a certified negative;
/// 4. belt-to-band stitching: belt segments from the endpoints into the
///    bands `𝓑`, joined by a flat witness across the outside region;
/// 5. fallback exhaustive search under the full pinned caps.
///
/// A `ResourceCap` verdict is returned only when no stage was conclusive;
/// `Unreachable` and witnesses are always correct.
pub fn flatten_reach(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
) -> Result<(LinearPathScheme, Vec<u64>), FlattenError> {
    flatten_reach_with(v, from, to, &FlattenCaps::default())
}

pub fn flatten_reach_with(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
    caps: &FlattenCaps,
) -> Result<(LinearPathScheme, Vec<u64>), FlattenError> {
    check_endpoints(v, from, to)?;
    if from.counters.iter().chain(&to.counters).any(|&x| x < 0) {
        return Err(FlattenError::PreconditionViolated("endpoints must be nonnegative".into()));
    }
    if from == to {
        return Ok((LinearPathScheme::default(), Vec::new()));
    }
    let cycle_cap = 6 * v.num_states() * v.num_states();

    // stage 1: bounded exhaustive search
    let scale = endpoint_scale(v, from, to);
    let quick = SearchCaps {
        counter_caps: vec![Some(8 * scale); 2],
        node_budget: Some(caps.quick_nodes),
        depth_budget: None,
    };
    match bfs_reach(v, from, to, &Region::NonNegative, &quick) {
        SearchResult::Found(p) => return Ok(path_certificate(v, from, to, p, cycle_cap)),
        SearchResult::ExhaustedComplete => return Err(FlattenError::Unreachable),
        SearchResult::NotFoundWithinCaps => {}
    }

    // stage 2: structural parameters; without them only the fallback search
    // remains
    let params = match FlattenParams::exact_with(v, caps) {
        Ok(p) => p,
        Err(_) => return fallback_search(v, from, to, cycle_cap, caps),
    };

    // stage 3: flat scheme search between the endpoints
    if let FlatOutcome::Witness(scheme, exps) =
        flat_witness(v, &params.families, from, to, v.num_states(), caps)
    {
        debug_assert!(scheme.cycle_count() <= cycle_cap);
        debug_assert!(witness_checks(v, from, to, &scheme, &exps, caps.replay_step_cap));
        return Ok((scheme, exps));
    }

    // stage 4: Z² relaxation
    if let Ok(ZOutcome::Unreachable) = z_reachable(v, from, to) {
        return Err(FlattenError::Unreachable);
    }

    // stage 5: belt-to-band stitching
    if params.e <= caps.belt_bound_cap {
        if let Some((scheme, exps)) = stitch_through_bands(v, &params, from, to, caps) {
            debug_assert!(scheme.cycle_count() <= cycle_cap);
            debug_assert!(witness_checks(v, from, to, &scheme, &exps, caps.replay_step_cap));
            return Ok((scheme, exps));
        }
    }

    // stage 6: fallback exhaustive search
    fallback_search(v, from, to, cycle_cap, caps)
}

fn fallback_search(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
    cycle_cap: usize,
    caps: &FlattenCaps,
) -> Result<(LinearPathScheme, Vec<u64>), FlattenError> {
    let scale = endpoint_scale(v, from, to);
    let full = SearchCaps {
        counter_caps: vec![Some(32 * scale); 2],
        node_budget: Some(caps.fallback_nodes),
        depth_budget: None,
    };
    match bfs_reach(v, from, to, &Region::NonNegative, &full) {
        SearchResult::Found(p) => Ok(path_certificate(v, from, to, p, cycle_cap)),
        SearchResult::ExhaustedComplete => Err(FlattenError::Unreachable),
        SearchResult::NotFoundWithinCaps => Err(FlattenError::ResourceCap),
    }
}

/// Folds a concrete witnessing path into a scheme, keeping it plain when
/// folding would exceed the pinned cycle budget or break nonnegativity
/// (folding preserves the Parikh image but may reorder cycle traversals).
pub(crate) fn path_certificate(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
    path: Path,
    cycle_cap: usize,
) -> (LinearPathScheme, Vec<u64>) {
    if let Ok((rho, exps)) = path_to_lps(v, &path) {
        if rho.cycle_count() <= cycle_cap && witness_checks(v, from, to, &rho, &exps, u128::MAX) {
            return (rho, exps);
        }
    }
    (LinearPathScheme::from_path(path), Vec::new())
}

fn endpoint_scale(v: &Vass<i64>, from: &Configuration<i64>, to: &Configuration<i64>) -> i64 {
    from.counters
        .iter()
        .chain(&to.counters)
        .copied()
        .max()
        .unwrap_or(0)
        .max(v.norm_t())
        .max(16)
}

// --- belt-to-band stitching ------------------------------------------------

/// Tries witnesses of the shape: belt run from `from` to an anchor in `𝓑`,
/// flat witness across the outside region, belt run from a second anchor to
/// `to`. Anchors are discovered by bounded exploration of the belt region;
/// their unbounded coordinates are handled symbolically by the flat search.
fn stitch_through_bands(
    v: &Vass<i64>,
    params: &FlattenParams,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
    caps: &FlattenCaps,
) -> Option<(LinearPathScheme, Vec<u64>)> {
    let belt = params.belt();
    let mut heads: Vec<(Configuration<i64>, Path)> = Vec::new();
    let mut tails: Vec<(Configuration<i64>, Path)> = Vec::new();
    if params.outside().contains(&from.counters) {
        heads.push((from.clone(), Vec::new()));
    }
    if params.outside().contains(&to.counters) {
        tails.push((to.clone(), Vec::new()));
    }
    if belt.contains(&from.counters) {
        heads.extend(explore_band(v, params, from, caps, false));
    }
    if belt.contains(&to.counters) {
        tails.extend(explore_band(v, params, to, caps, true));
    }

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for i in 0..heads.len() {
        for j in 0..tails.len() {
            if heads[i].1.is_empty() && tails[j].1.is_empty() {
                // the direct pair is the flat search already performed
                continue;
            }
            pairs.push((i, j));
        }
    }
    // same-state pairs first, then by coordinate magnitude
    pairs.sort_by_key(|&(i, j)| {
        let (a, b) = (&heads[i].0, &tails[j].0);
        let coords: i64 = a.counters.iter().chain(&b.counters).sum();
        (a.state != b.state, coords)
    });

    for &(i, j) in pairs.iter().take(caps.stitch_budget) {
        let (a, head) = &heads[i];
        let (b, tail) = &tails[j];
        let FlatOutcome::Witness(mid, mid_exps) =
            flat_witness(v, &params.families, a, b, v.num_states(), caps)
        else {
            continue;
        };
        let mut segments: Vec<Segment> = Vec::new();
        let mut exps: Vec<u64> = Vec::new();
        let attach = |piece: &Path, endpoint_a: &Configuration<i64>,
                          endpoint_b: &Configuration<i64>,
                          segments: &mut Vec<Segment>, exps: &mut Vec<u64>| {
            // compact long belt paths through the belt decision procedure
            if piece.len() > 4 * (params.e as usize + 1) * v.num_states() {
                if let Ok((s, x)) = belt_reach(v, params.e, endpoint_a, endpoint_b) {
                    segments.extend(s.segments);
                    exps.extend(x);
                    return;
                }
            }
            if !piece.is_empty() {
                segments.push(Segment::Plain(piece.clone()));
            }
        };
        attach(head, from, a, &mut segments, &mut exps);
        segments.extend(mid.segments);
        exps.extend(mid_exps);
        attach(tail, b, to, &mut segments, &mut exps);
        return Some((LinearPathScheme { segments }, exps));
    }
    None
}

/// Bounded breadth-first exploration of the belt region from `start`,
/// collecting configurations in the bands `𝓑` together with connecting paths
/// (from `start` forward, or to `start` when `backward`).
fn explore_band(
    v: &Vass<i64>,
    params: &FlattenParams,
    start: &Configuration<i64>,
    caps: &FlattenCaps,
    backward: bool,
) -> Vec<(Configuration<i64>, Path)> {
    let belt = params.belt();
    let window = 4 * (params.e + 1) * (v.num_states() as i64 + 2);
    let cap = start.counters.iter().copied().max().unwrap_or(0).max(params.e) + window;
    type Key = (StateId, i64, i64);
    let key = |c: &Configuration<i64>| (c.state, c.counters[0], c.counters[1]);
    let mut parent: HashMap<Key, (Key, TransId)> = HashMap::new();
    let mut seen: BTreeSet<Key> = BTreeSet::new();
    seen.insert(key(start));
    let mut queue: VecDeque<Configuration<i64>> = VecDeque::new();
    queue.push_back(start.clone());
    let mut found: Vec<(Configuration<i64>, Path)> = Vec::new();
    let mut nodes = 0usize;
    while let Some(cur) = queue.pop_front() {
        nodes += 1;
        if nodes > caps.quick_nodes || found.len() >= caps.anchor_limit {
            break;
        }
        for (t, tr) in v.transitions().iter().enumerate() {
            let next = if backward {
                if tr.dst != cur.state {
                    continue;
                }
                Configuration::new(
                    tr.src,
                    cur.counters.iter().zip(&tr.update).map(|(&c, &u)| c - u).collect(),
                )
            } else {
                if tr.src != cur.state {
                    continue;
                }
                Configuration::new(
                    tr.dst,
                    cur.counters.iter().zip(&tr.update).map(|(&c, &u)| c + u).collect(),
                )
            };
            if !belt.contains(&next.counters) || next.counters.iter().any(|&x| x > cap) {
                continue;
            }
            let nk = key(&next);
            if !seen.insert(nk) {
                continue;
            }
            parent.insert(nk, (key(&cur), t));
            if params.in_band(&next) {
                // reconstruct the connecting path
                let mut steps: Vec<TransId> = Vec::new();
                let mut at = nk;
                while let Some(&(prev, pt)) = parent.get(&at) {
                    steps.push(pt);
                    at = prev;
                }
                if !backward {
                    steps.reverse();
                }
                found.push((next.clone(), steps));
            }
            queue.push_back(next);
        }
    }
    found
}

// --- shared checks ---------------------------------------------------------

fn check_two_dim(v: &Vass<i64>) -> Result<(), FlattenError> {
    if v.dim() != 2 {
        return Err(FlattenError::PreconditionViolated(format!(
            "flattening requires dimension 2, got {}",
            v.dim()
        )));
    }
    Ok(())
}

fn check_endpoints(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
) -> Result<(), FlattenError> {
    check_two_dim(v)?;
    if from.counters.len() != 2 || to.counters.len() != 2 {
        return Err(FlattenError::PreconditionViolated(
            "endpoint configurations must have two counters".into(),
        ));
    }
    Ok(())
}

/// Full witness check: explicit replay over `N²` when the instantiation is
/// short enough, otherwise arithmetic validation through the scheme
/// inequality system and the displacement equations.
fn witness_checks(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
    scheme: &LinearPathScheme,
    exps: &[u64],
    replay_cap: u128,
) -> bool {
    let Ok(info) = v.validate_lps(scheme) else {
        return false;
    };
    if let Some((s, e)) = info.endpoints {
        if s != from.state || e != to.state {
            return false;
        }
    } else if from.state != to.state {
        return false;
    }
    if exps.len() != scheme.cycle_count() {
        return false;
    }
    let mut total: u128 = 0;
    let mut ei = 0usize;
    for seg in &scheme.segments {
        match seg {
            Segment::Plain(p) => total += p.len() as u128,
            Segment::Star(b) => {
                total += exps[ei] as u128 * b.len() as u128;
                ei += 1;
            }
        }
    }
    if total <= replay_cap {
        let Ok(path) = v.instantiate_lps(scheme, &exps.to_vec()) else {
            return false;
        };
        match v.execute(from, &path, &Region::NonNegative) {
            Ok(ExecOutcome::Done(c)) => &c == to,
            _ => false,
        }
    } else {
        let chi: Vec<bool> = exps.iter().map(|&e| e > 0).collect();
        let Ok(ineq) = build_lps_system(&from.counters, v, scheme, &chi) else {
            return false;
        };
        let Ok(eqs) = build_target_equations(&from.counters, &to.counters, v, scheme) else {
            return false;
        };
        ineq.satisfied_by(exps) && eqs.satisfied_by(exps)
    }
}
