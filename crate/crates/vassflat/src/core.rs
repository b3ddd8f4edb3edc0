//! Exact data model and operational semantics for d-dimensional VASS.
//!
//! A system is a finite directed graph whose transitions carry integer update
//! vectors. Configurations pair a control state with a counter vector; runs
//! are region-restricted: a step is enabled only if the resulting counter
//! vector stays inside the chosen region. All arithmetic is exact and
//! unbounded; the types are generic over the scalar so the same semantics run
//! on `i64` and on `BigInt` counters.

use num_bigint::BigInt;
use num_traits::Signed;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Scalar requirements for counters and updates.
///
/// Satisfied by the built-in signed integers and by `BigInt`.
pub trait Scalar: Clone + Ord + Signed + From<i64> + fmt::Debug + fmt::Display {}
impl<T> Scalar for T where T: Clone + Ord + Signed + From<i64> + fmt::Debug + fmt::Display {}

/// Index into [`Vass::states`].
pub type StateId = usize;
/// Index into [`Vass::transitions`].
pub type TransId = usize;
/// A path is a sequence of transition indices; consecutive transitions must
/// chain (target of one = source of the next) to be well-formed.
pub type Path = Vec<TransId>;

/// One transition: source state, update vector, target state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition<S> {
    pub src: StateId,
    pub update: Vec<S>,
    pub dst: StateId,
}

/// A finite Z^d-labeled directed graph: the system under analysis.
///
/// Transition order is fixed and significant: all nondeterministic choices in
/// the decision procedures break ties by lowest transition index.
#[derive(Clone, Debug)]
pub struct Vass<S = i64> {
    dim: usize,
    states: Vec<String>,
    transitions: Vec<Transition<S>>,
}

/// A control state plus a counter vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration<S = i64> {
    pub state: StateId,
    pub counters: Vec<S>,
}

impl<S: Scalar> Configuration<S> {
    pub fn new(state: StateId, counters: Vec<S>) -> Self {
        Configuration { state, counters }
    }
}

impl Configuration<i64> {
    pub fn to_big(&self) -> Configuration<BigInt> {
        Configuration {
            state: self.state,
            counters: self.counters.iter().map(|&x| BigInt::from(x)).collect(),
        }
    }
}

/// Closed-below interval `[lo, hi]` or `[lo, ∞)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval<S> {
    pub lo: S,
    pub hi: Option<S>,
}

/// Counter-space restriction applied to every intermediate configuration of a
/// run. `LShape` and `Outside` are only meaningful in dimension two.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Region<S = i64> {
    /// Z^d: no restriction.
    All,
    /// N^d: every counter nonnegative.
    NonNegative,
    /// Product of per-coordinate intervals.
    Box(Vec<Interval<S>>),
    /// `([0,D] × N) ∪ (N × [0,D])`: at least one counter small, both nonnegative.
    LShape(S),
    /// `[D,∞)²`: both counters at least D.
    Outside(S),
    Intersection(std::boxed::Box<Region<S>>, std::boxed::Box<Region<S>>),
}

impl<S: Scalar> Region<S> {
    pub fn contains(&self, counters: &[S]) -> bool {
        match self {
            Region::All => true,
            Region::NonNegative => counters.iter().all(|x| !x.is_negative()),
            Region::Box(intervals) => {
                intervals.len() == counters.len()
                    && counters.iter().zip(intervals).all(|(x, iv)| {
                        *x >= iv.lo && iv.hi.as_ref().map_or(true, |hi| x <= hi)
                    })
            }
            Region::LShape(d) => {
                counters.len() == 2
                    && counters.iter().all(|x| !x.is_negative())
                    && (counters[0] <= *d || counters[1] <= *d)
            }
            Region::Outside(d) => counters.len() == 2 && counters.iter().all(|x| *x >= *d),
            Region::Intersection(a, b) => a.contains(counters) && b.contains(counters),
        }
    }
}

/// Occurrence counts of transitions along a path.
pub type ParikhImage = BTreeMap<TransId, u64>;

/// Exact occurrence counts; additive under concatenation.
pub fn parikh(path: &[TransId]) -> ParikhImage {
    let mut image = ParikhImage::new();
    for &t in path {
        *image.entry(t).or_insert(0) += 1;
    }
    image
}

/// One segment of a linear path scheme: either a plain path piece or a starred
/// cycle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Segment {
    Plain(Path),
    Star(Path),
}

impl Segment {
    pub fn steps(&self) -> &[TransId] {
        match self {
            Segment::Plain(p) | Segment::Star(p) => p,
        }
    }

    pub fn is_star(&self) -> bool {
        matches!(self, Segment::Star(_))
    }
}

/// Linear path scheme `α₀ β₁* α₁ ⋯ βₖ* αₖ`.
///
/// Stored as a segment list; consecutive plain segments are allowed and are
/// read as one α. The concatenation of all segments must be a path and every
/// starred segment must be a nonempty cycle.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LinearPathScheme {
    pub segments: Vec<Segment>,
}

impl LinearPathScheme {
    pub fn from_path(path: Path) -> Self {
        LinearPathScheme {
            segments: if path.is_empty() { vec![] } else { vec![Segment::Plain(path)] },
        }
    }

    /// Number of starred cycles k.
    pub fn cycle_count(&self) -> usize {
        self.segments.iter().filter(|s| s.is_star()).count()
    }

    /// Length |ρ| of the concatenation α₀β₁α₁⋯βₖαₖ (each cycle counted once).
    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.steps().len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The concatenated word with every cycle taken once.
    pub fn concatenation(&self) -> Path {
        let mut word = Vec::with_capacity(self.len());
        for seg in &self.segments {
            word.extend_from_slice(seg.steps());
        }
        word
    }

    /// The starred cycles in order.
    pub fn cycles(&self) -> Vec<&[TransId]> {
        self.segments
            .iter()
            .filter(|s| s.is_star())
            .map(|s| s.steps())
            .collect()
    }
}

/// Outcome details of [`Vass::validate_lps`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpsInfo {
    pub cycle_count: usize,
    pub len: usize,
    /// Endpoints of the concatenated path; `None` for the empty scheme.
    pub endpoints: Option<(StateId, StateId)>,
}

/// One of the four sign quadrants of Z². Axis vectors belong to every adjacent
/// quadrant; ties are broken by this fixed order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quadrant {
    PosPos,
    NegPos,
    PosNeg,
    NegNeg,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] =
        [Quadrant::PosPos, Quadrant::NegPos, Quadrant::PosNeg, Quadrant::NegNeg];

    /// Componentwise sign pattern, +1 or −1.
    pub fn signs(&self) -> (i64, i64) {
        match self {
            Quadrant::PosPos => (1, 1),
            Quadrant::NegPos => (-1, 1),
            Quadrant::PosNeg => (1, -1),
            Quadrant::NegNeg => (-1, -1),
        }
    }

    pub fn contains<S: Scalar>(&self, v: &[S]) -> bool {
        let (sx, sy) = self.signs();
        let ok = |x: &S, s: i64| if s > 0 { !x.is_negative() } else { !x.is_positive() };
        v.len() == 2 && ok(&v[0], sx) && ok(&v[1], sy)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum CoreError {
    #[error("transitions do not chain at position {at}")]
    MalformedPath { at: usize },
    #[error("transition index {index} out of range")]
    UnknownTransition { index: usize },
    #[error("start state mismatch: configuration at state {found}, path starts at {expected}")]
    StartMismatch { expected: StateId, found: StateId },
    #[error("segment {segment} is not chained to its predecessor")]
    NotAPath { segment: usize },
    #[error("starred segment {segment} is not a cycle")]
    NotACycle { segment: usize },
    #[error("starred segment {segment} is empty")]
    EmptyCycle { segment: usize },
    #[error("expected {expected} exponents, got {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("operation requires dimension {expected}, system has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("counter vector has wrong dimension")]
    CounterDimension,
}

/// A region-restricted step failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExecOutcome<S> {
    Done(Configuration<S>),
    /// Earliest failing step (1-based) and the configuration that left the region.
    Blocked { step: usize, at: Configuration<S> },
}

impl<S: Scalar> Vass<S> {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Vass { dim, states: Vec::new(), transitions: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn add_state(&mut self, name: impl Into<String>) -> StateId {
        let name = name.into();
        assert!(
            !self.states.contains(&name),
            "duplicate state name {name}"
        );
        self.states.push(name);
        self.states.len() - 1
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name)
    }

    pub fn state_name(&self, id: StateId) -> &str {
        &self.states[id]
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn add_transition(&mut self, src: StateId, update: Vec<S>, dst: StateId) -> TransId {
        assert!(src < self.states.len() && dst < self.states.len(), "unknown state");
        assert_eq!(update.len(), self.dim, "update dimension mismatch");
        self.transitions.push(Transition { src, update, dst });
        self.transitions.len() - 1
    }

    pub fn transitions(&self) -> &[Transition<S>] {
        &self.transitions
    }

    pub fn transition(&self, t: TransId) -> &Transition<S> {
        &self.transitions[t]
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    /// ∥T∥: maximum absolute value of any update entry (0 for no transitions).
    pub fn norm_t(&self) -> S {
        let mut best = S::zero();
        for t in &self.transitions {
            for x in &t.update {
                let a = x.abs();
                if a > best {
                    best = a;
                }
            }
        }
        best
    }

    /// Endpoints of a well-formed path; `None` for the empty path.
    pub fn path_endpoints(&self, path: &[TransId]) -> Result<Option<(StateId, StateId)>, CoreError> {
        let mut endpoints = None;
        for (i, &t) in path.iter().enumerate() {
            let tr = self
                .transitions
                .get(t)
                .ok_or(CoreError::UnknownTransition { index: t })?;
            match endpoints {
                None => endpoints = Some((tr.src, tr.dst)),
                Some((start, end)) => {
                    if end != tr.src {
                        return Err(CoreError::MalformedPath { at: i });
                    }
                    endpoints = Some((start, tr.dst));
                }
            }
        }
        Ok(endpoints)
    }

    /// δ(π): sum of update vectors; δ(ε) = 0.
    pub fn displacement(&self, path: &[TransId]) -> Result<Vec<S>, CoreError> {
        self.path_endpoints(path)?;
        let mut delta = vec![S::zero(); self.dim];
        for &t in path {
            for (d, u) in delta.iter_mut().zip(&self.transitions[t].update) {
                *d = d.clone() + u.clone();
            }
        }
        Ok(delta)
    }

    /// Region-restricted execution of a path from a configuration.
    ///
    /// The start configuration itself must lie in the region; every
    /// configuration reached after a step must too, else the earliest failing
    /// step is reported.
    pub fn execute(
        &self,
        c: &Configuration<S>,
        path: &[TransId],
        region: &Region<S>,
    ) -> Result<ExecOutcome<S>, CoreError> {
        if c.counters.len() != self.dim {
            return Err(CoreError::CounterDimension);
        }
        let endpoints = self.path_endpoints(path)?;
        if let Some((start, _)) = endpoints {
            if start != c.state {
                return Err(CoreError::StartMismatch { expected: start, found: c.state });
            }
        }
        let mut cur = c.clone();
        for (i, &t) in path.iter().enumerate() {
            let tr = &self.transitions[t];
            for (x, u) in cur.counters.iter_mut().zip(&tr.update) {
                *x = x.clone() + u.clone();
            }
            cur.state = tr.dst;
            if !region.contains(&cur.counters) {
                return Ok(ExecOutcome::Blocked { step: i + 1, at: cur });
            }
        }
        Ok(ExecOutcome::Done(cur))
    }

    /// Checks scheme well-formedness: the concatenation chains and every
    /// starred segment is a nonempty cycle.
    pub fn validate_lps(&self, rho: &LinearPathScheme) -> Result<LpsInfo, CoreError> {
        let mut endpoints: Option<(StateId, StateId)> = None;
        for (i, seg) in rho.segments.iter().enumerate() {
            let seg_ends = self
                .path_endpoints(seg.steps())
                .map_err(|_| CoreError::NotAPath { segment: i })?;
            if seg.is_star() {
                match seg_ends {
                    None => return Err(CoreError::EmptyCycle { segment: i }),
                    Some((s, e)) if s != e => return Err(CoreError::NotACycle { segment: i }),
                    _ => {}
                }
            }
            if let Some((s, e)) = seg_ends {
                match endpoints {
                    None => endpoints = Some((s, e)),
                    Some((start, end)) => {
                        if end != s {
                            return Err(CoreError::NotAPath { segment: i });
                        }
                        endpoints = Some((start, e));
                    }
                }
            }
        }
        Ok(LpsInfo {
            cycle_count: rho.cycle_count(),
            len: rho.len(),
            endpoints,
        })
    }

    /// `α₀ β₁^{e₁} ⋯ βₖ^{eₖ} αₖ` as a concrete path.
    pub fn instantiate_lps(
        &self,
        rho: &LinearPathScheme,
        exps: &[u64],
    ) -> Result<Path, CoreError> {
        if exps.len() != rho.cycle_count() {
            return Err(CoreError::ArityMismatch {
                expected: rho.cycle_count(),
                found: exps.len(),
            });
        }
        self.validate_lps(rho)?;
        let mut path = Vec::new();
        let mut next_exp = exps.iter();
        for seg in &rho.segments {
            match seg {
                Segment::Plain(p) => path.extend_from_slice(p),
                Segment::Star(p) => {
                    let &e = next_exp.next().expect("arity checked");
                    for _ in 0..e {
                        path.extend_from_slice(p);
                    }
                }
            }
        }
        Ok(path)
    }

    /// True iff all cycle displacements lie in one common quadrant; returns
    /// the first such quadrant in the fixed order.
    pub fn is_zigzag_free(
        &self,
        rho: &LinearPathScheme,
    ) -> Result<(bool, Option<Quadrant>), CoreError> {
        if self.dim != 2 {
            return Err(CoreError::DimensionMismatch { expected: 2, found: self.dim });
        }
        self.validate_lps(rho)?;
        let deltas: Vec<Vec<S>> = rho
            .cycles()
            .iter()
            .map(|beta| self.displacement(beta))
            .collect::<Result<_, _>>()?;
        for q in Quadrant::ALL {
            if deltas.iter().all(|d| q.contains(d)) {
                return Ok((true, Some(q)));
            }
        }
        Ok((false, None))
    }
}

impl Vass<i64> {
    pub fn to_big(&self) -> Vass<BigInt> {
        Vass {
            dim: self.dim,
            states: self.states.clone(),
            transitions: self
                .transitions
                .iter()
                .map(|t| Transition {
                    src: t.src,
                    update: t.update.iter().map(|&x| BigInt::from(x)).collect(),
                    dst: t.dst,
                })
                .collect(),
        }
    }
}
