//! One-counter machinery and the band constructions built on it.
//!
//! Runs of a two-counter system that keep one counter small behave like runs
//! of a one-counter system: [`band_product`] folds the small counter into the
//! state space, [`unary_expand`] normalizes updates to `{-1, 0, +1}`,
//! [`shortest_run_1vass`] finds capped shortest runs, and
//! [`lps_witness_1vass`] compresses them into schemes with at most one
//! starred cycle. [`belt_reach`] stitches per-band witnesses into a scheme
//! with at most two starred cycles for runs confined to an L-shaped region.

use crate::core::{
    Configuration, CoreError, ExecOutcome, LinearPathScheme, Path, Region, Segment, StateId,
    TransId, Vass,
};
use std::collections::{HashMap, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OneDimError {
    #[error("operation requires dimension {expected}, system has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("target is not reachable under the region restriction")]
    Unreachable,
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

fn check_dim(v: &Vass<i64>, expected: usize) -> Result<(), OneDimError> {
    if v.dim() != expected {
        return Err(OneDimError::DimensionMismatch { expected, found: v.dim() });
    }
    Ok(())
}

fn check_counter1(c: &Configuration<i64>, who: &str) -> Result<(), OneDimError> {
    if c.counters.len() != 1 || c.counters[0] < 0 {
        return Err(OneDimError::PreconditionViolated(format!(
            "{who} must be a one-counter configuration with a nonnegative counter"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Unary expansion
// ---------------------------------------------------------------------------

/// A one-counter system rewritten with updates in `{-1, 0, +1}`, together
/// with the transition homomorphism relating it to the original system.
///
/// Every original transition `(p, z, q)` becomes a chain of `|z| + 2`
/// transitions: a 0-step into a fresh entry state, `|z|` unit steps through
/// fresh intermediate states, and a 0-step out to `q`. Original states keep
/// their identifiers; the chain states are fresh and each has exactly one
/// outgoing transition, so any path of the expansion between original states
/// decomposes uniquely into complete chains.
pub struct UnaryExpansion {
    pub expanded: Vass<i64>,
    /// `chains[t]` is the replacement chain for original transition `t`.
    chains: Vec<Path>,
    /// `owner[t']` is `(t, i)`: expanded transition `t'` is step `i` of the
    /// chain replacing original transition `t`.
    owner: Vec<(TransId, usize)>,
    num_original_states: usize,
}

impl UnaryExpansion {
    /// The replacement chain `h(t)` of an original transition.
    pub fn chain(&self, t: TransId) -> &[TransId] {
        &self.chains[t]
    }

    /// Whether an expanded state is one of the original states.
    pub fn is_original_state(&self, s: StateId) -> bool {
        s < self.num_original_states
    }

    /// `h(π)`: the expanded image of an original path.
    pub fn apply(&self, path: &[TransId]) -> Path {
        path.iter().flat_map(|&t| self.chains[t].iter().copied()).collect()
    }

    /// `h⁻¹(π′)`: the unique original preimage of an expanded path between
    /// original states. Fails if the path is not a concatenation of complete
    /// replacement chains.
    pub fn invert(&self, path: &[TransId]) -> Result<Path, OneDimError> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < path.len() {
            let (t, pos) = self.owner[path[i]];
            let chain = &self.chains[t];
            if pos != 0
                || path.len() - i < chain.len()
                || path[i..i + chain.len()] != chain[..]
            {
                return Err(OneDimError::PreconditionViolated(format!(
                    "step {i} does not begin a complete replacement chain"
                )));
            }
            out.push(t);
            i += chain.len();
        }
        Ok(out)
    }
}

/// Rewrites a one-counter system so that all updates lie in `{-1, 0, +1}`,
/// preserving reachability between original states in both directions.
pub fn unary_expand(v1: &Vass<i64>) -> Result<UnaryExpansion, OneDimError> {
    check_dim(v1, 1)?;
    let mut expanded = Vass::new(1);
    for name in v1.states() {
        expanded.add_state(name.clone());
    }
    let mut chains = Vec::with_capacity(v1.num_transitions());
    let mut owner = Vec::new();
    for (t, tr) in v1.transitions().iter().enumerate() {
        let z = tr.update[0];
        let n = z.unsigned_abs() as usize;
        let step = if z >= 0 { 1 } else { -1 };
        let aux: Vec<StateId> =
            (0..=n).map(|i| expanded.add_state(format!("t{t}.{i}"))).collect();
        let mut chain = Vec::with_capacity(n + 2);
        chain.push(expanded.add_transition(tr.src, vec![0], aux[0]));
        for i in 1..=n {
            chain.push(expanded.add_transition(aux[i - 1], vec![step], aux[i]));
        }
        chain.push(expanded.add_transition(aux[n], vec![0], tr.dst));
        for (i, _) in chain.iter().enumerate() {
            owner.push((t, i));
        }
        chains.push(chain);
    }
    Ok(UnaryExpansion { expanded, chains, owner, num_original_states: v1.num_states() })
}

// ---------------------------------------------------------------------------
// Shortest runs in unary one-counter systems
// ---------------------------------------------------------------------------

/// Counter cap for the capped shortest-run search: the search window extends
/// `4·(|Q| + |Q|²)` above the larger endpoint. A shortest run never needs to
/// leave this window (validated against uncapped search in the test suite).
fn shortest_run_cap(num_states: usize, u: i64, v: i64) -> i64 {
    let q = num_states as i64;
    u.max(v) + 4 * (q + q * q)
}

/// Exact distances to `to` over configurations `(state, x)` with
/// `0 ≤ x ≤ cap`, following transitions backwards.
fn backward_dist(
    v: &Vass<i64>,
    to: &Configuration<i64>,
    cap: i64,
) -> HashMap<(StateId, i64), u32> {
    let mut incoming: Vec<Vec<(StateId, i64)>> = vec![Vec::new(); v.num_states()];
    for tr in v.transitions() {
        incoming[tr.dst].push((tr.src, tr.update[0]));
    }
    let mut dist = HashMap::new();
    let mut queue = VecDeque::new();
    if (0..=cap).contains(&to.counters[0]) {
        dist.insert((to.state, to.counters[0]), 0u32);
        queue.push_back((to.state, to.counters[0]));
    }
    while let Some((s, x)) = queue.pop_front() {
        let d = dist[&(s, x)];
        for &(src, z) in &incoming[s] {
            let px = x - z;
            if (0..=cap).contains(&px) {
                dist.entry((src, px)).or_insert_with(|| {
                    queue.push_back((src, px));
                    d + 1
                });
            }
        }
    }
    dist
}

/// A canonical shortest run from `from` to `to` with every counter value in
/// `[0, cap]`: among shortest runs, the one taking the smallest transition
/// identifier at every step. `None` if no capped run exists.
fn canonical_run(
    v: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
    cap: i64,
) -> Option<Path> {
    if !(0..=cap).contains(&from.counters[0]) {
        return None;
    }
    let dist = backward_dist(v, to, cap);
    let mut rem = *dist.get(&(from.state, from.counters[0]))?;
    let mut state = from.state;
    let mut x = from.counters[0];
    let mut path = Vec::with_capacity(rem as usize);
    while rem > 0 {
        let mut advanced = false;
        for (t, tr) in v.transitions().iter().enumerate() {
            if tr.src != state {
                continue;
            }
            let nx = x + tr.update[0];
            if (0..=cap).contains(&nx) && dist.get(&(tr.dst, nx)) == Some(&(rem - 1)) {
                path.push(t);
                state = tr.dst;
                x = nx;
                rem -= 1;
                advanced = true;
                break;
            }
        }
        assert!(advanced, "distance labels must admit a step");
    }
    Some(path)
}

/// A shortest run over `N` between two configurations of a one-counter
/// system with unary updates, searched over counters capped at
/// `max(u, v) + 4·(|Q| + |Q|²)`. The returned length is asserted against the
/// bound `8·|Q|·(|Q| + |Q|²) + |Q|·|u − v|`.
pub fn shortest_run_1vass(
    v1: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
) -> Result<Path, OneDimError> {
    check_dim(v1, 1)?;
    check_counter1(from, "source")?;
    check_counter1(to, "target")?;
    if v1.transitions().iter().any(|tr| tr.update[0].abs() > 1) {
        return Err(OneDimError::PreconditionViolated(
            "shortest-run search requires unary updates".into(),
        ));
    }
    if from == to {
        return Ok(Vec::new());
    }
    let (u, v) = (from.counters[0], to.counters[0]);
    let cap = shortest_run_cap(v1.num_states(), u, v);
    let run = canonical_run(v1, from, to, cap).ok_or(OneDimError::Unreachable)?;
    let q = v1.num_states() as i64;
    let bound = 8 * q * (q + q * q) + q * (u - v).abs();
    assert!(
        run.len() as i64 <= bound,
        "shortest run of length {} exceeds the pinned bound {bound}",
        run.len()
    );
    Ok(run)
}

// ---------------------------------------------------------------------------
// Single-cycle scheme witnesses
// ---------------------------------------------------------------------------

/// Best literal repetition `run[i..i+l]` repeated `reps` times starting at
/// `i`, maximizing the compression saving `(reps − 1)·l` over periods
/// `l ≤ max_period`; ties prefer shorter periods, then earlier starts.
/// Returns `(i, l, reps)`; `reps < 2` means no repetition was found.
fn best_repetition(run: &[TransId], max_period: usize) -> (usize, usize, usize) {
    let n = run.len();
    if n < 2 {
        return (0, 0, 1);
    }
    // Rolling hash for O(1) block comparison; the chosen candidate is
    // verified exactly below, so a collision can only miss a compression.
    const BASE: u128 = 0x9E37_79B9_7F4A_7C15 | 1;
    let mut pow = vec![1u128; n + 1];
    let mut pre = vec![0u128; n + 1];
    for i in 0..n {
        pow[i + 1] = pow[i].wrapping_mul(BASE);
        pre[i + 1] = pre[i].wrapping_mul(BASE).wrapping_add(run[i] as u128 + 1);
    }
    let hash = |a: usize, len: usize| -> u128 {
        pre[a + len].wrapping_sub(pre[a].wrapping_mul(pow[len]))
    };
    let mut best = (0usize, 0usize, 1usize);
    let mut best_saving = 0usize;
    let mut reps = vec![0usize; n + 1];
    for l in 1..=max_period.min(n / 2) {
        for i in (0..n).rev() {
            reps[i] = if i + 2 * l <= n && hash(i, l) == hash(i + l, l) {
                reps[i + l] + 1
            } else if i + l <= n {
                1
            } else {
                0
            };
            let saving = reps[i].saturating_sub(1) * l;
            if saving > best_saving {
                best_saving = saving;
                best = (i, l, reps[i]);
            }
        }
    }
    if best_saving == 0 {
        return (0, 0, 1);
    }
    // Exact verification of the selected candidate.
    let (i, l, _) = best;
    let mut exact = 1;
    while i + (exact + 1) * l <= n && run[i..i + l] == run[i + exact * l..i + (exact + 1) * l] {
        exact += 1;
    }
    (i, l, exact)
}

/// A reachability witness for a one-counter system in the form of a linear
/// path scheme with at most one starred cycle, together with its exponent.
///
/// The witness is found in the unary expansion: a canonical shortest run is
/// compressed at its best literal repetition, the repeated cycle is rotated
/// to anchor at an original state when it starts inside a replacement chain,
/// and the pieces are mapped back through the inverse homomorphism.
pub fn lps_witness_1vass(
    v1: &Vass<i64>,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
) -> Result<(LinearPathScheme, Vec<u64>), OneDimError> {
    check_dim(v1, 1)?;
    check_counter1(from, "source")?;
    check_counter1(to, "target")?;
    if from == to {
        return Ok((LinearPathScheme::default(), Vec::new()));
    }
    let exp = unary_expand(v1)?;
    let ev = &exp.expanded;
    let full_cap = shortest_run_cap(ev.num_states(), from.counters[0], to.counters[0]);
    // Escalating caps: reachable pairs are usually found well below the
    // completeness cap, and the search cost grows with the cap.
    let base = from.counters[0].max(to.counters[0]);
    let mut run = None;
    let mut cap = (base + 16).min(full_cap);
    loop {
        if let Some(r) = canonical_run(ev, from, to, cap) {
            run = Some(r);
            break;
        }
        if cap >= full_cap {
            break;
        }
        cap = (base + (cap - base) * 8).min(full_cap);
    }
    let run = run.ok_or(OneDimError::Unreachable)?;

    let max_period = (4 * ev.num_states()).max(64);
    let (i, l, reps) = best_repetition(&run, max_period);
    let (scheme, exps) = if reps < 2 {
        (LinearPathScheme::from_path(exp.invert(&run)?), Vec::new())
    } else {
        let beta = &run[i..i + l];
        // Rotate the cycle to an original-state anchor: chain starts are the
        // only transitions leaving original states, and every cycle of the
        // expansion crosses a chain boundary.
        let j = beta
            .iter()
            .position(|&t| exp.owner[t].1 == 0)
            .expect("every cycle of the expansion crosses a chain boundary");
        let (alpha, cycle, gamma, e) = if j == 0 {
            (&run[..i], beta.to_vec(), &run[i + reps * l..], reps)
        } else {
            // α β^r γ = (α β[..j]) (β[j..] β[..j])^{r−1} (β[j..] γ); every
            // piece is a contiguous slice of the run cut at chain boundaries.
            let mut cycle = beta[j..].to_vec();
            cycle.extend_from_slice(&beta[..j]);
            (&run[..i + j], cycle, &run[i + (reps - 1) * l + j..], reps - 1)
        };
        let alpha = exp.invert(alpha)?;
        let cycle = exp.invert(&cycle)?;
        let gamma = exp.invert(gamma)?;
        let mut segments = Vec::new();
        if !alpha.is_empty() {
            segments.push(Segment::Plain(alpha));
        }
        segments.push(Segment::Star(cycle));
        if !gamma.is_empty() {
            segments.push(Segment::Plain(gamma));
        }
        (LinearPathScheme { segments }, vec![e as u64])
    };
    debug_assert!(scheme.cycle_count() <= 1);
    debug_assert_eq!(
        v1.execute(from, &v1.instantiate_lps(&scheme, &exps)?, &Region::NonNegative)?,
        ExecOutcome::Done(to.clone()),
        "one-counter witness must replay exactly"
    );
    Ok((scheme, exps))
}

// ---------------------------------------------------------------------------
// Band products
// ---------------------------------------------------------------------------

/// Which coordinate of a two-counter system is confined to `[0, bound]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundedAxis {
    First,
    Second,
}

/// A band `N × [0, D]` or `[0, D] × N` of the two-counter plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BandSpec {
    pub axis: BoundedAxis,
    /// Bound `D ≥ 0` on the confined coordinate.
    pub bound: i64,
}

/// A two-counter system restricted to a band, folded into a one-counter
/// system: states are pairs `(q, n)` of an original state and a value
/// `n ∈ [0, D]` of the confined coordinate, and transitions that would leave
/// the band are dropped.
pub struct BandProduct {
    pub product: Vass<i64>,
    pub band: BandSpec,
    /// `origin[t']` is the two-counter transition that product transition
    /// `t'` instantiates.
    origin: Vec<TransId>,
}

/// Folds the band-confined coordinate of a two-counter system into its state
/// space. Reachability between band configurations is preserved exactly.
pub fn band_product(v2: &Vass<i64>, band: BandSpec) -> Result<BandProduct, OneDimError> {
    check_dim(v2, 2)?;
    if band.bound < 0 {
        return Err(OneDimError::PreconditionViolated("band bound must be nonnegative".into()));
    }
    let d = band.bound;
    let (bounded, unbounded) = match band.axis {
        BoundedAxis::First => (0, 1),
        BoundedAxis::Second => (1, 0),
    };
    let mut product = Vass::new(1);
    for q in v2.states() {
        for n in 0..=d {
            product.add_state(format!("{q}@{n}"));
        }
    }
    let sid = |q: StateId, n: i64| q * (d as usize + 1) + n as usize;
    let mut origin = Vec::new();
    for (t, tr) in v2.transitions().iter().enumerate() {
        let shift = tr.update[bounded];
        let step = tr.update[unbounded];
        for n in 0..=d {
            let m = n + shift;
            if (0..=d).contains(&m) {
                product.add_transition(sid(tr.src, n), vec![step], sid(tr.dst, m));
                origin.push(t);
            }
        }
    }
    Ok(BandProduct { product, band, origin })
}

impl BandProduct {
    /// The product state representing original state `q` at confined value `n`.
    pub fn state(&self, q: StateId, n: i64) -> StateId {
        q * (self.band.bound as usize + 1) + n as usize
    }

    /// The product configuration of a two-counter configuration inside the
    /// band; `None` if the configuration lies outside.
    pub fn embed(&self, c: &Configuration<i64>) -> Option<Configuration<i64>> {
        if c.counters.len() != 2 {
            return None;
        }
        let (bounded, unbounded) = match self.band.axis {
            BoundedAxis::First => (0, 1),
            BoundedAxis::Second => (1, 0),
        };
        if !(0..=self.band.bound).contains(&c.counters[bounded]) || c.counters[unbounded] < 0 {
            return None;
        }
        Some(Configuration::new(
            self.state(c.state, c.counters[bounded]),
            vec![c.counters[unbounded]],
        ))
    }

    /// The two-counter configuration represented by a product configuration.
    pub fn project(&self, c: &Configuration<i64>) -> Configuration<i64> {
        let levels = self.band.bound as usize + 1;
        let q = c.state / levels;
        let n = (c.state % levels) as i64;
        let counters = match self.band.axis {
            BoundedAxis::First => vec![n, c.counters[0]],
            BoundedAxis::Second => vec![c.counters[0], n],
        };
        Configuration::new(q, counters)
    }

    /// `φ(π′)`: the two-counter path a product path instantiates. Cycles of
    /// the product map to cycles of the original system.
    pub fn map_path(&self, path: &[TransId]) -> Path {
        path.iter().map(|&t| self.origin[t]).collect()
    }
}

// ---------------------------------------------------------------------------
// Belt reachability
// ---------------------------------------------------------------------------

/// Decides reachability by runs confined to the L-shaped region
/// `𝓛 = ([0,D] × N) ∪ (N × [0,D])`.
///
/// A minimal confined run is factored at its visits to the corner square
/// `H = [0,E]²` with `E = D + ∥T∥`; between visits it stays inside one band
/// of width `E`, where a one-counter witness is computed through the band
/// product. Only the first and last band segments keep a starred cycle;
/// middle segments are instantiated to concrete paths. The returned scheme
/// has at most two starred cycles and replays from `from` to `to` inside the
/// widened region `𝓛′ = LShape(E)`.
pub fn belt_reach(
    v2: &Vass<i64>,
    d: i64,
    from: &Configuration<i64>,
    to: &Configuration<i64>,
) -> Result<(LinearPathScheme, Vec<u64>), OneDimError> {
    check_dim(v2, 2)?;
    if d < 0 {
        return Err(OneDimError::PreconditionViolated("band width must be nonnegative".into()));
    }
    let lshape = Region::LShape(d);
    if !lshape.contains(&from.counters) || !lshape.contains(&to.counters) {
        return Err(OneDimError::PreconditionViolated(
            "endpoints must lie in the L-shaped region".into(),
        ));
    }
    if from == to {
        return Ok((LinearPathScheme::default(), Vec::new()));
    }
    let e = d + v2.norm_t();
    // Counter cap for the confined search: band segments behave like
    // one-counter runs over the band product, whose shortest runs stay
    // within the one-counter window above their endpoints.
    let n_band = v2.num_states() as i64 * (e + 1);
    let endpoint_max = from
        .counters
        .iter()
        .chain(&to.counters)
        .copied()
        .max()
        .unwrap()
        .max(e);
    let cap = endpoint_max + 4 * (n_band + n_band * n_band);
    let caps = crate::oracle::SearchCaps {
        counter_caps: vec![Some(cap); 2],
        node_budget: None,
        depth_budget: None,
    };
    let run = match crate::oracle::bfs_reach(v2, from, to, &lshape, &caps) {
        crate::oracle::SearchResult::Found(p) => p,
        _ => return Err(OneDimError::Unreachable),
    };

    // Configurations along the minimal run.
    let mut configs = Vec::with_capacity(run.len() + 1);
    configs.push(from.clone());
    for &t in &run {
        let prev = configs.last().unwrap();
        let tr = v2.transition(t);
        configs.push(Configuration::new(
            tr.dst,
            prev.counters.iter().zip(&tr.update).map(|(x, u)| x + u).collect(),
        ));
    }
    debug_assert_eq!(configs.last().unwrap(), to);

    // Factor at every visit to the corner square H = [0,E]²; between
    // consecutive cuts the same coordinate stays ≤ E throughout, because
    // switching bands inside 𝓛 forces a pass through H.
    let in_h = |c: &Configuration<i64>| c.counters.iter().all(|&x| (0..=e).contains(&x));
    let mut cuts = vec![0usize];
    for (i, c) in configs.iter().enumerate().take(run.len()).skip(1) {
        if in_h(c) {
            cuts.push(i);
        }
    }
    cuts.push(run.len());

    let mut products: [Option<BandProduct>; 2] = [None, None];
    let mut segments: Vec<Segment> = Vec::new();
    let mut exps: Vec<u64> = Vec::new();
    let last_idx = cuts.len() - 2;
    for (idx, window) in cuts.windows(2).enumerate() {
        let (a, b) = (window[0], window[1]);
        let axis = if configs[a..=b].iter().all(|c| c.counters[1] <= e) {
            BoundedAxis::Second
        } else {
            assert!(
                configs[a..=b].iter().all(|c| c.counters[0] <= e),
                "segment must stay inside one band"
            );
            BoundedAxis::First
        };
        let slot = match axis {
            BoundedAxis::First => 0,
            BoundedAxis::Second => 1,
        };
        let bp = products[slot]
            .get_or_insert_with(|| band_product(v2, BandSpec { axis, bound: e }).unwrap());
        let pf = bp.embed(&configs[a]).expect("segment start lies in its band");
        let pt = bp.embed(&configs[b]).expect("segment end lies in its band");
        let (sch, sch_exps) =
            lps_witness_1vass(&bp.product, &pf, &pt).expect("band segment admits a witness");
        if idx == 0 || idx == last_idx {
            for seg in &sch.segments {
                match seg {
                    Segment::Plain(p) => {
                        if !p.is_empty() {
                            segments.push(Segment::Plain(bp.map_path(p)));
                        }
                    }
                    Segment::Star(p) => segments.push(Segment::Star(bp.map_path(p))),
                }
            }
            exps.extend_from_slice(&sch_exps);
        } else {
            let concrete = bp.product.instantiate_lps(&sch, &sch_exps)?;
            if !concrete.is_empty() {
                segments.push(Segment::Plain(bp.map_path(&concrete)));
            }
        }
    }

    let scheme = LinearPathScheme { segments };
    assert!(scheme.cycle_count() <= 2, "belt witness keeps at most two starred cycles");
    let replay = v2.instantiate_lps(&scheme, &exps)?;
    match v2.execute(from, &replay, &Region::LShape(e))? {
        ExecOutcome::Done(c) if c == *to => {}
        outcome => panic!("belt witness must replay inside the widened region: {outcome:?}"),
    }
    Ok((scheme, exps))
}
