//! Linear Diophantine inequality/equation systems over the naturals.
//!
//! Systems have the shape `A·x ≥ c` or `A·x = c` with integer entries and
//! natural-valued unknowns. Feasibility is decided exactly by integer
//! Fourier–Motzkin elimination (Omega-test style, with dark shadows and
//! splintering); the module also provides the minimal homogeneous generators
//! (Hilbert-basis style) and the constructions that turn cycles and linear
//! path schemes into systems whose solutions are exactly the valid exponent
//! vectors.
//!
//! Norm conventions: `∥A∥ = k · max|a_ij|` (column count times the largest
//! absolute entry) and `∥c∥ = max|c_i|`.

use crate::core::{CoreError, LinearPathScheme, Segment, Vass};
use num_bigint::BigUint;
use num_integer::Integer;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    /// A·x ≥ c
    Inequality,
    /// A·x = c
    Equality,
}

/// An integer system over `arity` natural unknowns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiophSystem {
    pub kind: Kind,
    pub arity: usize,
    /// Rows as (coefficients, right-hand side).
    pub rows: Vec<(Vec<i64>, i64)>,
}

/// Per-cycle sign pattern: `true` forces the exponent ≥ 1, `false` forces 0.
pub type SignPattern = Vec<bool>;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DiophError {
    #[error("variable arities differ: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("path is not a cycle")]
    NotACycle,
    #[error("scheme invalid: {0}")]
    InvalidScheme(CoreError),
    #[error("row has wrong width")]
    RowWidth,
}

/// Outcome of [`solve_feasible`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    Solution(Vec<u64>),
    /// No solution within the pinned search bound.
    Infeasible,
    /// The search hit a resource cap before reaching a decision.
    BoundOverflow,
}

/// Resource caps for the feasibility search.
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Largest value any single variable is allowed to take during search.
    pub var_cap: u64,
    /// Total number of search nodes across the whole solve.
    pub node_budget: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { var_cap: 1 << 20, node_budget: 1 << 22 }
    }
}

impl DiophSystem {
    pub fn new(kind: Kind, arity: usize) -> Self {
        DiophSystem { kind, arity, rows: Vec::new() }
    }

    pub fn push_row(&mut self, coeffs: Vec<i64>, rhs: i64) {
        assert_eq!(coeffs.len(), self.arity, "row width mismatch");
        self.rows.push((coeffs, rhs));
    }

    /// The canonical infeasible system `0·x ≥ 1` over the given arity.
    pub fn infeasible(arity: usize) -> Self {
        DiophSystem {
            kind: Kind::Inequality,
            arity,
            rows: vec![(vec![0; arity], 1)],
        }
    }

    /// ∥A∥ = arity · max |a_ij|.
    pub fn norm_a(&self) -> i64 {
        let m = self
            .rows
            .iter()
            .flat_map(|(a, _)| a.iter())
            .map(|x| x.abs())
            .max()
            .unwrap_or(0);
        self.arity as i64 * m
    }

    /// ∥c∥ = max |c_i|.
    pub fn norm_c(&self) -> i64 {
        self.rows.iter().map(|(_, c)| c.abs()).max().unwrap_or(0)
    }

    /// Inequality rows equivalent to this system (equality rows become a
    /// `≥`/`≤` pair).
    pub fn to_inequality_rows(&self) -> Vec<(Vec<i64>, i64)> {
        match self.kind {
            Kind::Inequality => self.rows.clone(),
            Kind::Equality => {
                let mut rows = Vec::with_capacity(2 * self.rows.len());
                for (a, c) in &self.rows {
                    rows.push((a.clone(), *c));
                    rows.push((a.iter().map(|x| -x).collect(), -c));
                }
                rows
            }
        }
    }

    /// Does `x` satisfy every row exactly?
    pub fn satisfied_by(&self, x: &[u64]) -> bool {
        if x.len() != self.arity {
            return false;
        }
        self.rows.iter().all(|(a, c)| {
            let lhs: i128 = a
                .iter()
                .zip(x)
                .map(|(&a, &v)| a as i128 * v as i128)
                .sum();
            match self.kind {
                Kind::Inequality => lhs >= *c as i128,
                Kind::Equality => lhs == *c as i128,
            }
        })
    }

    /// Line format used by the CLI's `--dump-system` flag.
    pub fn to_text(&self) -> String {
        let mut out = format!("rows {} {}\n", self.arity, self.rows.len());
        let op = match self.kind {
            Kind::Inequality => ">=",
            Kind::Equality => "=",
        };
        for (a, c) in &self.rows {
            for x in a {
                out.push_str(&format!("{x} "));
            }
            out.push_str(&format!("{op} {c}\n"));
        }
        out
    }
}

/// Pinned feasibility bound `((k+1)·(∥A∥+∥c∥+1))^(2(k+r))`: a feasible system
/// has a solution of norm at most this.
pub fn feasibility_bound(sys: &DiophSystem) -> BigUint {
    let k = sys.arity as u64;
    let r = sys.rows.len() as u64;
    let base = BigUint::from((k + 1) * (sys.norm_a().unsigned_abs() + sys.norm_c().unsigned_abs() + 1));
    base.pow(2 * (k as u32 + r as u32))
}

/// Pinned bound `(∥A∥+∥c∥+1)^(r+1)` on the norm of some solution of a
/// feasible equality system.
pub fn inhomogeneous_bound(sys: &DiophSystem) -> BigUint {
    let base =
        BigUint::from(sys.norm_a().unsigned_abs() + sys.norm_c().unsigned_abs() + 1);
    base.pow(sys.rows.len() as u32 + 1)
}

/// Stack inequality rows with an equality system (encoded as `≥`/`≤` pairs);
/// the solution set is the intersection.
pub fn conjoin(ineq: &DiophSystem, eq: &DiophSystem) -> Result<DiophSystem, DiophError> {
    if ineq.arity != eq.arity {
        return Err(DiophError::ArityMismatch(ineq.arity, eq.arity));
    }
    let mut rows = ineq.to_inequality_rows();
    rows.extend(eq.to_inequality_rows());
    Ok(DiophSystem { kind: Kind::Inequality, arity: ineq.arity, rows })
}

// --- feasibility: integer linear arithmetic core ---------------------------
//
// The decision core works over Z with exact BigInt arithmetic. Rows are
// written `a·x + c ≥ 0` / `a·x + c = 0`. Equalities are removed by unit or
// modular substitution; inequalities are removed by variable elimination with
// integer-exact shadows where available, the dark shadow otherwise, and
// splintering on the residual near-tight cases. The procedure is complete;
// a node budget turns pathological blowup into an explicit `BoundOverflow`.

use num_bigint::BigInt;
use num_traits::{One, Signed as _, Zero};

#[derive(Clone)]
struct LinSys {
    n: usize,
    /// a·x + c ≥ 0
    ge: Vec<(Vec<BigInt>, BigInt)>,
    /// a·x + c = 0
    eq: Vec<(Vec<BigInt>, BigInt)>,
}

enum Lp {
    Sat(Vec<BigInt>),
    Unsat,
    Overflow,
}

struct Budget {
    left: u64,
}

impl Budget {
    fn spend(&mut self, amount: u64) -> bool {
        if self.left < amount {
            self.left = 0;
            false
        } else {
            self.left -= amount;
            true
        }
    }
}

fn vec_gcd(a: &[BigInt]) -> BigInt {
    a.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x))
}

/// Symmetric residue of `v` modulo `m > 0`, in `[−m/2, m/2)`.
fn smod(v: &BigInt, m: &BigInt) -> BigInt {
    let q = (v * 2i32 + m).div_floor(&(m * 2i32));
    v - m * q
}

fn dot_c(a: &[BigInt], x: &[BigInt], c: &BigInt) -> BigInt {
    let mut acc = c.clone();
    for (ai, xi) in a.iter().zip(x) {
        acc += ai * xi;
    }
    acc
}

/// Replace `x_k` by the affine form `Σ s_i·y_i + s_c` in every row. The
/// reduced system reuses slot `k` for whatever variable `s` puts there.
fn substitute(sys: &mut LinSys, k: usize, s: &[BigInt], s_c: &BigInt) {
    for (b, d) in sys.ge.iter_mut().chain(sys.eq.iter_mut()) {
        let bk = std::mem::replace(&mut b[k], BigInt::zero());
        if bk.is_zero() {
            continue;
        }
        for i in 0..b.len() {
            b[i] += &bk * &s[i];
        }
        *d += &bk * s_c;
    }
}

fn ila_solve(mut sys: LinSys, budget: &mut Budget) -> Lp {
    if !budget.spend(1 + sys.ge.len() as u64 + sys.eq.len() as u64) {
        return Lp::Overflow;
    }
    // Normalize: divide rows by their content, resolve constant rows.
    let mut eqs = Vec::with_capacity(sys.eq.len());
    for (a, c) in std::mem::take(&mut sys.eq) {
        let g = vec_gcd(&a);
        if g.is_zero() {
            if !c.is_zero() {
                return Lp::Unsat;
            }
            continue;
        }
        if !(&c % &g).is_zero() {
            return Lp::Unsat;
        }
        eqs.push((a.iter().map(|x| x / &g).collect(), &c / &g));
    }
    sys.eq = eqs;
    // Normalize inequalities and drop dominated rows: among rows with the
    // same coefficient vector only the smallest constant binds.
    let mut ges: std::collections::BTreeMap<Vec<BigInt>, BigInt> = std::collections::BTreeMap::new();
    for (a, c) in std::mem::take(&mut sys.ge) {
        let g = vec_gcd(&a);
        if g.is_zero() {
            if c.is_negative() {
                return Lp::Unsat;
            }
            continue;
        }
        let a: Vec<BigInt> = a.iter().map(|x| x / &g).collect();
        let c = c.div_floor(&g);
        match ges.entry(a) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                if &c < e.get() {
                    e.insert(c);
                }
            }
        }
    }
    sys.ge = ges.into_iter().collect();
    if !sys.eq.is_empty() {
        eliminate_equality(sys, budget)
    } else {
        eliminate_inequality(sys, budget)
    }
}

fn eliminate_equality(mut sys: LinSys, budget: &mut Budget) -> Lp {
    let (mut a, mut c) = sys.eq.swap_remove(0);
    // coefficients are coprime after normalization; pick the smallest one
    let k = (0..sys.n)
        .filter(|&i| !a[i].is_zero())
        .min_by_key(|&i| a[i].abs())
        .expect("normalized equality has a nonzero coefficient");
    let s: Vec<BigInt>;
    let s_c: BigInt;
    if a[k].abs().is_one() {
        // x_k = (−c − Σ_{i≠k} a_i x_i) / a_k
        let sign = if a[k].is_one() { -1 } else { 1 };
        s = (0..sys.n)
            .map(|i| if i == k { BigInt::zero() } else { &a[i] * sign })
            .collect();
        s_c = &c * sign;
    } else {
        // Modular step: with m = |a_k| + 1 the symmetric residues give an
        // equivalent equation in which x_k has coefficient −1; slot k is
        // reused for the fresh quotient variable.
        if a[k].is_negative() {
            for x in a.iter_mut() {
                *x = -&*x;
            }
            c = -c;
        }
        let m = &a[k] + 1u8;
        s = (0..sys.n)
            .map(|i| if i == k { -&m } else { smod(&a[i], &m) })
            .collect();
        s_c = smod(&c, &m);
        sys.eq.push((a, c));
    }
    substitute(&mut sys, k, &s, &s_c);
    match ila_solve(sys, budget) {
        Lp::Sat(mut y) => {
            y[k] = dot_c(&s, &y, &s_c);
            Lp::Sat(y)
        }
        other => other,
    }
}

fn eliminate_inequality(sys: LinSys, budget: &mut Budget) -> Lp {
    if sys.ge.is_empty() {
        return Lp::Sat(vec![BigInt::zero(); sys.n]);
    }
    // pick a variable: any one-sided variable is free to absorb its rows;
    // otherwise minimize the pairing fan-out, preferring exact eliminations
    let mut choice: Option<(usize, usize, usize, bool)> = None; // (j, lowers, uppers, exact)
    for j in 0..sys.n {
        let mut lowers = 0usize;
        let mut uppers = 0usize;
        let mut all_lo_unit = true;
        let mut all_up_unit = true;
        for (b, _) in &sys.ge {
            if b[j].is_positive() {
                lowers += 1;
                all_lo_unit &= b[j].is_one();
            } else if b[j].is_negative() {
                uppers += 1;
                all_up_unit &= (-&b[j]).is_one();
            }
        }
        if lowers == 0 && uppers == 0 {
            continue;
        }
        if lowers == 0 || uppers == 0 {
            choice = Some((j, lowers, uppers, true));
            break;
        }
        let exact = all_lo_unit || all_up_unit;
        let cost = lowers * uppers;
        let better = match &choice {
            None => true,
            Some((_, l0, u0, e0)) => {
                let cost0 = l0 * u0;
                (exact, std::cmp::Reverse(cost)) > (*e0, std::cmp::Reverse(cost0))
            }
        };
        if better {
            choice = Some((j, lowers, uppers, exact));
        }
    }
    let Some((j, lowers, uppers, exact)) = choice else {
        // no variable left in any row; normalization already vetted constants
        return Lp::Sat(vec![BigInt::zero(); sys.n]);
    };

    let mut lo_rows: Vec<(Vec<BigInt>, BigInt)> = Vec::with_capacity(lowers);
    let mut up_rows: Vec<(Vec<BigInt>, BigInt)> = Vec::with_capacity(uppers);
    let mut rest = LinSys { n: sys.n, ge: Vec::new(), eq: Vec::new() };
    for (b, d) in &sys.ge {
        if b[j].is_positive() {
            lo_rows.push((b.clone(), d.clone()));
        } else if b[j].is_negative() {
            up_rows.push((b.clone(), d.clone()));
        } else {
            rest.ge.push((b.clone(), d.clone()));
        }
    }

    // value of x_j compatible with the one-sided rows, given the other
    // variables; defined whenever the corresponding shadow holds
    let pick_xj = |y: &[BigInt]| -> BigInt {
        let mut lo: Option<BigInt> = None;
        for (b, d) in &lo_rows {
            // b_j·x_j + rest ≥ 0  ⇒  x_j ≥ ⌈−rest / b_j⌉
            let mut restv = dot_c(b, y, d);
            restv -= &b[j] * &y[j];
            let need = (-restv).div_ceil(&b[j]);
            lo = Some(lo.map_or(need.clone(), |l: BigInt| l.max(need)));
        }
        match lo {
            Some(l) => l,
            None => {
                // only upper bounds: take the least of them
                let mut hi: Option<BigInt> = None;
                for (b, d) in &up_rows {
                    let mut restv = dot_c(b, y, d);
                    restv -= &b[j] * &y[j];
                    let bound = restv.div_floor(&(-&b[j]));
                    hi = Some(hi.map_or(bound.clone(), |h: BigInt| h.min(bound)));
                }
                hi.unwrap_or_else(BigInt::zero)
            }
        }
    };
    let lift = |mut y: Vec<BigInt>| -> Vec<BigInt> {
        y[j] = pick_xj(&y);
        debug_assert!(lo_rows
            .iter()
            .chain(&up_rows)
            .all(|(b, d)| !dot_c(b, &y, d).is_negative()));
        y
    };

    if lowers == 0 || uppers == 0 {
        return match ila_solve(rest, budget) {
            Lp::Sat(y) => Lp::Sat(lift(y)),
            other => other,
        };
    }

    // shadow rows: from a·x_j + L ≥ 0 and −b·x_j + U ≥ 0 derive a·U + b·L ≥ 0
    // (real) or a·U + b·L ≥ (a−1)(b−1) (dark, guaranteeing an integer x_j)
    let shadow = |dark: bool| -> LinSys {
        let mut out = rest.clone();
        for (bl, dl) in &lo_rows {
            let a = &bl[j];
            for (bu, du) in &up_rows {
                let b = -&bu[j];
                let mut row: Vec<BigInt> = (0..sys.n)
                    .map(|i| if i == j { BigInt::zero() } else { &b * &bl[i] + a * &bu[i] })
                    .collect();
                row[j] = BigInt::zero();
                let mut cst = &b * dl + a * du;
                if dark {
                    cst -= (a - 1u8) * (&b - 1u8);
                }
                out.ge.push((row, cst));
            }
        }
        out
    };

    // constructing a shadow costs one row per lower/upper pairing
    if !budget.spend((lowers * uppers) as u64) {
        return Lp::Overflow;
    }
    match ila_solve(shadow(!exact), budget) {
        Lp::Sat(y) => return Lp::Sat(lift(y)),
        Lp::Overflow => return Lp::Overflow,
        Lp::Unsat if exact => return Lp::Unsat,
        Lp::Unsat => {}
    }
    // Dark shadow missed: any remaining solution has some lower bound nearly
    // tight, so case-split on a·x_j + L = i for the finitely many residues.
    let bmax = up_rows.iter().map(|(b, _)| -&b[j]).max().expect("uppers > 0");
    for (bl, dl) in &lo_rows {
        let a = &bl[j];
        let imax = (a * &bmax - a - &bmax).div_floor(&bmax);
        let mut i = BigInt::zero();
        while i <= imax {
            let mut split = sys.clone();
            split.eq.push((bl.clone(), dl - &i));
            match ila_solve(split, budget) {
                Lp::Sat(y) => return Lp::Sat(y),
                Lp::Overflow => return Lp::Overflow,
                Lp::Unsat => {}
            }
            i += 1u8;
        }
    }
    Lp::Unsat
}

/// Decides feasibility and returns the lexicographically least solution.
pub fn solve_feasible(sys: &DiophSystem) -> SolveOutcome {
    solve_feasible_with(sys, &SolveOptions::default())
}

pub fn solve_feasible_with(sys: &DiophSystem, opts: &SolveOptions) -> SolveOutcome {
    let n = sys.arity;
    let mut base = LinSys { n, ge: Vec::new(), eq: Vec::new() };
    for (a, c) in sys.to_inequality_rows() {
        // a·x ≥ c  ⇒  a·x − c ≥ 0
        base.ge.push((a.iter().map(|&x| BigInt::from(x)).collect(), BigInt::from(-c)));
    }
    for i in 0..n {
        let mut e = vec![BigInt::zero(); n];
        e[i] = BigInt::one();
        base.ge.push((e, BigInt::zero()));
    }
    let mut budget = Budget { left: opts.node_budget };
    let mut w = match ila_solve(base.clone(), &mut budget) {
        Lp::Sat(w) => w,
        Lp::Unsat => return SolveOutcome::Infeasible,
        Lp::Overflow => return SolveOutcome::BoundOverflow,
    };
    // Lex refinement: for each variable in order, binary-search the least
    // feasible value given the fixed prefix ("is there a solution with
    // x_j ≤ m" is monotone in m).
    let mut fixed: Vec<BigInt> = Vec::new();
    for j in 0..n {
        let mut lo = BigInt::zero();
        let mut hi = w[j].clone();
        while lo < hi {
            let mid: BigInt = (&lo + &hi) / 2;
            let mut probe = base.clone();
            for (i, v) in fixed.iter().enumerate() {
                let mut e = vec![BigInt::zero(); n];
                e[i] = BigInt::one();
                probe.eq.push((e, -v));
            }
            let mut e = vec![BigInt::zero(); n];
            e[j] = -BigInt::one();
            probe.ge.push((e, mid.clone()));
            let mut b = Budget { left: opts.node_budget };
            match ila_solve(probe, &mut b) {
                Lp::Sat(y) => {
                    hi = y[j].clone();
                    w = y;
                }
                Lp::Unsat => lo = mid + 1u8,
                Lp::Overflow => {
                    // keep the current (valid) witness rather than fail
                    lo = hi.clone();
                }
            }
        }
        fixed.push(w[j].clone());
    }
    let mut out = Vec::with_capacity(n);
    for x in &w {
        match u64::try_from(x) {
            Ok(v) => out.push(v),
            Err(_) => return SolveOutcome::BoundOverflow,
        }
    }
    debug_assert!(sys.satisfied_by(&out));
    SolveOutcome::Solution(out)
}

// --- homogeneous generators ----------------------------------------------

/// Componentwise-minimal nonzero natural solutions of `A·x = 0`
/// (Contejean–Devie style completion from the unit vectors).
pub fn homogeneous_generators(sys: &DiophSystem) -> Vec<Vec<u64>> {
    assert_eq!(sys.kind, Kind::Equality, "homogeneous generators need an equality system");
    assert!(sys.rows.iter().all(|(_, c)| *c == 0), "right-hand side must be zero");
    let k = sys.arity;
    let rows: Vec<&Vec<i64>> = sys.rows.iter().map(|(a, _)| a).collect();
    let value = |x: &[u64]| -> Vec<i128> {
        rows.iter()
            .map(|a| a.iter().zip(x).map(|(&a, &v)| a as i128 * v as i128).sum())
            .collect()
    };
    // every minimal solution has entries within (∥A∥+1)^r, so candidates
    // beyond that can be pruned without losing completeness
    let cap: u64 = {
        let b = BigUint::from(sys.norm_a().unsigned_abs() + 1).pow(sys.rows.len() as u32);
        u64::try_from(&b).unwrap_or(u64::MAX)
    };
    let unit_values: Vec<Vec<i128>> = (0..k)
        .map(|j| {
            let mut e = vec![0u64; k];
            e[j] = 1;
            value(&e)
        })
        .collect();
    let mut minimal: Vec<Vec<u64>> = Vec::new();
    // breadth-first by total size, so solutions are recorded before anything
    // they dominate is expanded
    let mut frontier: std::collections::VecDeque<Vec<u64>> = (0..k)
        .map(|j| {
            let mut e = vec![0u64; k];
            e[j] = 1;
            e
        })
        .collect();
    let mut seen: std::collections::BTreeSet<Vec<u64>> = frontier.iter().cloned().collect();
    let dominated = |minimal: &Vec<Vec<u64>>, x: &[u64]| {
        minimal.iter().any(|m| m.iter().zip(x).all(|(&a, &b)| a <= b))
    };
    while let Some(t) = frontier.pop_front() {
        if dominated(&minimal, &t) {
            continue;
        }
        let y = value(&t);
        if y.iter().all(|&v| v == 0) {
            minimal.push(t);
            continue;
        }
        for j in 0..k {
            // decrease criterion: step only toward the origin of the image
            let dot: i128 = y.iter().zip(&unit_values[j]).map(|(&a, &b)| a * b).sum();
            if dot >= 0 {
                continue;
            }
            let mut next = t.clone();
            next[j] += 1;
            if next[j] > cap || dominated(&minimal, &next) || seen.contains(&next) {
                continue;
            }
            seen.insert(next.clone());
            frontier.push_back(next);
        }
    }
    minimal.sort();
    minimal
}

// --- system constructions from cycles and schemes --------------------------

/// ∥x∥ of an integer vector.
fn vec_norm(v: &[i64]) -> i64 {
    v.iter().map(|x| x.abs()).max().unwrap_or(0)
}

/// Single-variable system whose natural solutions are exactly the `e ≥ 1`
/// with `q(u) →_{β^e} q(u + e·δ(β))` over N^d.
///
/// The per-iteration prefix constraints are linear in the iteration number,
/// so only the first and last traversal matter: the first is independent of
/// `e` (checked up front, failure yields the canonical infeasible system) and
/// the last folds into one row per coordinate by taking the worst prefix.
pub fn build_cycle_system(
    u: &[i64],
    v: &Vass<i64>,
    beta: &[usize],
) -> Result<DiophSystem, DiophError> {
    let endpoints = v.path_endpoints(beta).map_err(DiophError::InvalidScheme)?;
    match endpoints {
        Some((s, e)) if s == e => {}
        _ => return Err(DiophError::NotACycle),
    }
    let d = v.dim();
    let delta = v.displacement(beta).expect("validated");
    // prefix displacements δ(β[1,j])
    let mut prefixes: Vec<Vec<i64>> = Vec::with_capacity(beta.len());
    let mut acc = vec![0i64; d];
    for &t in beta {
        for (a, x) in acc.iter_mut().zip(&v.transition(t).update) {
            *a += x;
        }
        prefixes.push(acc.clone());
    }
    // first traversal: u + δ(β[1,j]) ≥ 0
    for p in &prefixes {
        if p.iter().zip(u).any(|(&dp, &ui)| ui + dp < 0) {
            return Ok(DiophSystem::infeasible(1));
        }
    }
    let mut sys = DiophSystem::new(Kind::Inequality, 1);
    sys.push_row(vec![1], 1);
    // last traversal: u + (e−1)·δ + δ(β[1,j]) ≥ 0, folded per coordinate
    for i in 0..d {
        let rhs = prefixes
            .iter()
            .map(|p| delta[i] - p[i] - u[i])
            .max()
            .expect("cycle nonempty");
        sys.push_row(vec![delta[i]], rhs);
    }
    let beta_len = beta.len() as i64;
    let tnorm = v.norm_t();
    debug_assert!(sys.norm_a() <= (beta_len * tnorm).max(1));
    debug_assert!(sys.norm_c() <= 2 * beta_len * tnorm + vec_norm(u));
    Ok(sys)
}

/// The alternating pieces of a scheme: connectors `α₀..αₖ` and cycles
/// `β₁..βₖ` (consecutive plain segments merged).
fn scheme_pieces(rho: &LinearPathScheme) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut alphas: Vec<Vec<usize>> = vec![Vec::new()];
    let mut betas: Vec<Vec<usize>> = Vec::new();
    for seg in &rho.segments {
        match seg {
            Segment::Plain(p) => alphas.last_mut().unwrap().extend_from_slice(p),
            Segment::Star(b) => {
                betas.push(b.clone());
                alphas.push(Vec::new());
            }
        }
    }
    (alphas, betas)
}

/// System over the cycle exponents of `rho` whose natural solutions are
/// exactly the vectors `e` with `sign(eᵢ) = chi(i)` and a valid N^d run on
/// `instantiate(rho, e)` from `u`.
///
/// Cycles with `chi(i) = false` are deleted from the scheme before constraint
/// generation; their variables are forced to 0 by a dedicated row.
pub fn build_lps_system(
    u: &[i64],
    v: &Vass<i64>,
    rho: &LinearPathScheme,
    chi: &SignPattern,
) -> Result<DiophSystem, DiophError> {
    v.validate_lps(rho).map_err(DiophError::InvalidScheme)?;
    let (alphas, betas) = scheme_pieces(rho);
    let k = betas.len();
    if chi.len() != k {
        return Err(DiophError::ArityMismatch(chi.len(), k));
    }
    let d = v.dim();
    // reduced scheme: keep cycles with chi = 1, merge connectors around the
    // deleted ones
    let mut red_alphas: Vec<Vec<usize>> = vec![alphas[0].clone()];
    let mut red_betas: Vec<(usize, Vec<usize>)> = Vec::new(); // (original index, cycle)
    for i in 0..k {
        if chi[i] {
            red_betas.push((i, betas[i].clone()));
            red_alphas.push(alphas[i + 1].clone());
        } else {
            red_alphas.last_mut().unwrap().extend_from_slice(&alphas[i + 1]);
        }
    }
    let kp = red_betas.len();
    let beta_delta: Vec<Vec<i64>> = red_betas
        .iter()
        .map(|(_, b)| v.displacement(b).expect("validated"))
        .collect();
    let alpha_delta: Vec<Vec<i64>> = red_alphas
        .iter()
        .map(|a| v.displacement(a).expect("validated"))
        .collect();
    let prefixes = |path: &[usize]| -> Vec<Vec<i64>> {
        let mut out = Vec::with_capacity(path.len());
        let mut acc = vec![0i64; d];
        for &t in path {
            for (a, x) in acc.iter_mut().zip(&v.transition(t).update) {
                *a += x;
            }
            out.push(acc.clone());
        }
        out
    };
    // base_g = u + δ(α₀) + … + δ(α_{g-1}) for g ∈ [0, kp]
    let mut base: Vec<Vec<i64>> = Vec::with_capacity(kp + 1);
    let mut acc: Vec<i64> = u.to_vec();
    base.push(acc.clone());
    for ad in alpha_delta.iter().take(kp) {
        for (a, x) in acc.iter_mut().zip(ad) {
            *a += x;
        }
        base.push(acc.clone());
    }
    // group g carries the coefficient pattern δ(β₁)…δ(β_g); rhs folded as the
    // per-coordinate max over: α_g prefixes, first traversal of β_{g+1}, last
    // traversal of β_g
    let mut group_rhs: Vec<Vec<Option<i64>>> = vec![vec![None; d]; kp + 1];
    let mut raise = |g: usize, coord: usize, val: i64| {
        let slot = &mut group_rhs[g][coord];
        *slot = Some(slot.map_or(val, |old| old.max(val)));
    };
    for g in 0..=kp {
        for p in prefixes(&red_alphas[g]) {
            for i in 0..d {
                raise(g, i, -base[g][i] - p[i]);
            }
        }
        if g + 1 <= kp {
            // first traversal of β_{g+1} starts after α_g
            for p in prefixes(&red_betas[g].1) {
                for i in 0..d {
                    raise(g, i, -base[g + 1][i] - p[i]);
                }
            }
        }
        if g >= 1 {
            // last traversal of β_g starts at base_g shifted by the earlier
            // exponents plus (e_g − 1)·δ(β_g)
            for p in prefixes(&red_betas[g - 1].1) {
                for i in 0..d {
                    raise(g, i, -base[g][i] + beta_delta[g - 1][i] - p[i]);
                }
            }
        }
    }
    // group 0 rows have all-zero coefficients: any positive rhs is a
    // contradiction independent of the exponents
    if group_rhs[0].iter().any(|r| r.map_or(false, |v| v > 0)) {
        return Ok(DiophSystem::infeasible(k));
    }
    let mut sys = DiophSystem::new(Kind::Inequality, k);
    for (i, &on) in chi.iter().enumerate() {
        let mut a = vec![0i64; k];
        if on {
            a[i] = 1;
            sys.push_row(a, 1);
        } else {
            a[i] = -1;
            sys.push_row(a, 0);
        }
    }
    for g in 1..=kp {
        for i in 0..d {
            let Some(rhs) = group_rhs[g][i] else { continue };
            let mut a = vec![0i64; k];
            for (slot, (orig, _)) in red_betas.iter().enumerate().take(g) {
                a[*orig] = beta_delta[slot][i];
            }
            sys.push_row(a, rhs);
        }
    }
    let rho_len = rho.len() as i64;
    let tnorm = v.norm_t();
    debug_assert!(sys.norm_a() <= (k as i64).max(1) * rho_len.max(1) * tnorm.max(1));
    // rhs entries combine a base offset, one cycle displacement and one cycle
    // prefix, each bounded by |ρ|·∥T∥; the sign rows carry constant 1
    debug_assert!(sys.norm_c() <= (vec_norm(u) + 3 * rho_len * tnorm).max(1));
    Ok(sys)
}

/// Equality system `[δ(β₁) ⋯ δ(βₖ)] · e = v' − u − Σδ(αᵢ)`: solutions are the
/// exponent vectors whose instantiation has total displacement `v' − u`.
pub fn build_target_equations(
    u: &[i64],
    v_target: &[i64],
    v: &Vass<i64>,
    rho: &LinearPathScheme,
) -> Result<DiophSystem, DiophError> {
    v.validate_lps(rho).map_err(DiophError::InvalidScheme)?;
    let (alphas, betas) = scheme_pieces(rho);
    let d = v.dim();
    let k = betas.len();
    let mut rhs: Vec<i64> = v_target.to_vec();
    for (r, &ui) in rhs.iter_mut().zip(u) {
        *r -= ui;
    }
    for a in &alphas {
        let da = v.displacement(a).expect("validated");
        for (r, x) in rhs.iter_mut().zip(&da) {
            *r -= x;
        }
    }
    let beta_delta: Vec<Vec<i64>> = betas
        .iter()
        .map(|b| v.displacement(b).expect("validated"))
        .collect();
    let mut sys = DiophSystem::new(Kind::Equality, k);
    for i in 0..d {
        let row: Vec<i64> = beta_delta.iter().map(|bd| bd[i]).collect();
        sys.push_row(row, rhs[i]);
    }
    Ok(sys)
}
