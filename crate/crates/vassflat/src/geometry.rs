//! Linear and semilinear sets in dimension two: membership, quadrant
//! decomposition, and zigzag-free scheme extraction.
//!
//! The central operation is [`decompose_quadrant`]: intersect a linear set
//! `L(b; P) = b + cone_N(P)` with one of the four sign quadrants and return the
//! result as a finite union of linear sets, each with at most two periods, both
//! pointing into the quadrant. [`zigzag_decompose`] lifts this to loop-shaped
//! linear path schemes: the displacement set of a loop scheme is a linear set
//! over its cycle displacements, and decomposing it per quadrant yields
//! equivalent zigzag-free schemes with at most two cycles each.

use crate::core::{CoreError, LinearPathScheme, Path, Quadrant, Segment, Vass};
use crate::dioph::{
    conjoin, homogeneous_generators, solve_feasible, DiophSystem, Kind, SolveOutcome,
};
use num_bigint::BigUint;
use num_integer::Integer;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// `L(b; P) = b + cone_N(P)`: all `b + Σ λᵢ pᵢ` with natural coefficients.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct LinearSet {
    pub base: [i64; 2],
    pub periods: Vec<[i64; 2]>,
}

impl LinearSet {
    pub fn new(base: [i64; 2], periods: Vec<[i64; 2]>) -> Self {
        LinearSet { base, periods }
    }

    /// ∥P∥: largest absolute entry over all periods.
    pub fn period_norm(&self) -> i64 {
        self.periods
            .iter()
            .flat_map(|p| p.iter())
            .map(|x| x.abs())
            .max()
            .unwrap_or(0)
    }
}

/// Finite union of linear sets.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SemiLinearSet {
    pub components: Vec<LinearSet>,
}

impl SemiLinearSet {
    /// Membership in the union; returns the index of a containing component.
    pub fn member(&self, x: [i64; 2]) -> Option<usize> {
        self.components.iter().position(|c| linset_member(c, x).is_some())
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("precondition violated: the base must be one of the periods")]
    PreconditionViolated,
    #[error("scheme endpoints differ: not a loop scheme")]
    NotALoopScheme,
    #[error("two counters required, system has {0}")]
    Dimension(usize),
    #[error("invalid scheme: {0}")]
    InvalidScheme(#[from] CoreError),
}

/// Decides `x ∈ L(b; P)` and returns one coefficient witness when true.
///
/// The witness is the lexicographically least natural solution of the two
/// coordinate equations `Σ λᵢ pᵢ = x − b`.
pub fn linset_member(ls: &LinearSet, x: [i64; 2]) -> Option<Vec<u64>> {
    let n = ls.periods.len();
    let mut sys = DiophSystem::new(Kind::Equality, n);
    for c in 0..2 {
        let row: Vec<i64> = ls.periods.iter().map(|p| p[c]).collect();
        sys.push_row(row, x[c] - ls.base[c]);
    }
    match solve_feasible(&sys) {
        SolveOutcome::Solution(w) => Some(w),
        _ => None,
    }
}

/// Pinned polynomial bound `E(B) = (B + 1)^8` on the coefficients needed to
/// express component bases and set-drawn periods over the input periods.
pub fn coefficient_bound(period_norm: i64) -> BigUint {
    BigUint::from(period_norm.unsigned_abs() + 1).pow(8)
}

fn reflect(p: [i64; 2], signs: (i64, i64)) -> [i64; 2] {
    [p[0] * signs.0, p[1] * signs.1]
}

fn cross(a: [i64; 2], b: [i64; 2]) -> i64 {
    a[0] * b[1] - a[1] * b[0]
}

fn add(a: [i64; 2], b: [i64; 2]) -> [i64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

fn scale(k: i64, a: [i64; 2]) -> [i64; 2] {
    [k * a[0], k * a[1]]
}

/// Intersects `L(b; P)` with a quadrant.
///
/// Requires `b ∈ P` (so that scaled representatives of derived periods exist
/// inside the set). The returned union equals `L(b; P) ∩ z` exactly; every
/// component has at most two periods, each lying in `(P ∪ L(b;P)) ∩ z`.
pub fn decompose_quadrant(ls: &LinearSet, z: Quadrant) -> Result<SemiLinearSet, GeometryError> {
    if !ls.periods.contains(&ls.base) {
        return Err(GeometryError::PreconditionViolated);
    }
    let s = z.signs();
    let b = reflect(ls.base, s);
    let periods: Vec<[i64; 2]> = ls.periods.iter().map(|p| reflect(*p, s)).collect();
    let comps = decompose_nonneg(b, &periods);
    let mut components: Vec<LinearSet> = comps
        .into_iter()
        .map(|(base, ps)| {
            LinearSet::new(reflect(base, s), ps.into_iter().map(|p| reflect(p, s)).collect())
        })
        .collect();
    for c in &mut components {
        c.periods.sort();
        c.periods.dedup();
    }
    components.sort();
    components.dedup();
    Ok(SemiLinearSet { components: prune_subsumed(components) })
}

/// Drops a component whose base lies in another kept component with a period
/// superset; the dropped set is then contained in the keeper.
fn prune_subsumed(components: Vec<LinearSet>) -> Vec<LinearSet> {
    // Richer components first so singletons get absorbed by them.
    let mut ordered = components;
    ordered.sort_by(|a, b| {
        (b.periods.len(), &a.base, &a.periods).cmp(&(a.periods.len(), &b.base, &b.periods))
    });
    let mut kept: Vec<LinearSet> = Vec::new();
    'next: for cand in ordered {
        for k in &kept {
            let subset = cand.periods.iter().all(|p| k.periods.contains(p));
            if subset && cheap_member(k, cand.base) {
                continue 'next;
            }
        }
        kept.push(cand);
    }
    debug_assert!(kept.iter().all(|c| c.periods.len() <= 2));
    kept.sort();
    kept
}

/// Constant-time membership for components with ≤ 2 pairwise independent
/// periods; used only for pruning, falls back to the solver when degenerate.
fn cheap_member(ls: &LinearSet, x: [i64; 2]) -> bool {
    let d = [x[0] - ls.base[0], x[1] - ls.base[1]];
    let ps: Vec<[i64; 2]> = ls.periods.iter().copied().filter(|p| *p != [0, 0]).collect();
    match ps.len() {
        0 => d == [0, 0],
        1 => {
            let p = ps[0];
            let (num, den) = if p[0] != 0 { (d[0], p[0]) } else { (d[1], p[1]) };
            num % den == 0 && num / den >= 0 && d == scale(num / den, p)
        }
        _ => {
            let (p, q) = (ps[0], ps[1]);
            let det = cross(p, q);
            if det == 0 {
                return linset_member(ls, x).is_some();
            }
            let lam = cross(d, q);
            let mu = cross(p, d);
            lam % det == 0 && mu % det == 0 && lam / det >= 0 && mu / det >= 0
        }
    }
}

/// Exact decomposition of `L(b; P) ∩ N²` into components with ≤ 2 periods.
///
/// Strategy: the members are `b + Σ λᵢ pᵢ` with both coordinates nonnegative.
/// Adding slack variables turns this into a linear equality system over N whose
/// solution set is generated by its finitely many minimal solutions: the
/// inhomogeneous minimals give the component bases, the homogeneous minimals
/// give a finite set G of period directions with
/// `L(b;P) ∩ N² = ∪_m (c_m + cone_N(G))`. The generated monoid `cone_N(G)` is
/// then rewritten over at most two periods: collinear generators collapse to
/// their shortest member with finitely many residue offsets (least element per
/// residue class of the generated numerical semigroup), and generators whose
/// direction lies strictly between the two angular extremes are eliminated by
/// the exchange identity `γ·g = a·g_min + c·g_max` (nonnegative integers by
/// Cramer's rule), which caps their multiplicity by γ. Finally each period not
/// itself in P is replaced by its least multiple expressible in `L(b; P)`,
/// absorbing the remainder classes into shifted bases.
fn decompose_nonneg(b: [i64; 2], periods: &[[i64; 2]]) -> Vec<([i64; 2], Vec<[i64; 2]>)> {
    let n = periods.len();
    // Minimal natural solutions of  Σ λᵢ pᵢ − s + b·x₀ = 0  (s = slack = position).
    let mut sys = DiophSystem::new(Kind::Equality, n + 3);
    for c in 0..2 {
        let mut row = vec![0i64; n + 3];
        for (i, p) in periods.iter().enumerate() {
            row[i] = p[c];
        }
        row[n + c] = -1;
        row[n + 2] = b[c];
        sys.push_row(row, 0);
    }
    let sols = homogeneous_generators(&sys);
    let mut bases: Vec<[i64; 2]> = Vec::new();
    let mut gens: BTreeSet<[i64; 2]> = BTreeSet::new();
    for sol in &sols {
        let point = [
            i64::try_from(sol[n]).expect("position fits in i64"),
            i64::try_from(sol[n + 1]).expect("position fits in i64"),
        ];
        match sol[n + 2] {
            1 => bases.push(point),
            0 => {
                if point != [0, 0] {
                    gens.insert(point);
                }
            }
            // Minimal solutions using the base more than once are not needed:
            // every point of the set dominates one with a single base use.
            _ => {}
        }
    }
    if bases.is_empty() {
        return Vec::new();
    }
    // Input periods stay available as component periods (always valid), so
    // they are exempt from redundancy pruning.
    let gens = drop_redundant_generators(gens, periods);

    // Group generators by primitive direction; each group contributes the
    // numerical semigroup of its multiples.
    let mut groups: BTreeMap<[i64; 2], Vec<i64>> = BTreeMap::new();
    for g in &gens {
        let d = g[0].gcd(&g[1]);
        groups.entry([g[0] / d, g[1] / d]).or_default().push(d);
    }
    struct Group {
        dir: [i64; 2],
        /// Multiple of `dir` used as the group's period: the smallest multiple
        /// that is an input period when one exists (valid as-is), otherwise
        /// the smallest generator multiple (replaced by an in-set multiple in
        /// the ladder step below).
        m1: i64,
        /// Least semigroup element in each residue class mod m1.
        offsets: Vec<i64>,
    }
    let mut glist: Vec<Group> = groups
        .into_iter()
        .map(|(dir, ms)| {
            let m1 = ms
                .iter()
                .copied()
                .filter(|&m| periods.contains(&scale(m, dir)))
                .min()
                .unwrap_or_else(|| *ms.iter().min().expect("nonempty group"));
            Group { dir, m1, offsets: apery_offsets(&ms, m1) }
        })
        .collect();
    // Ascending angle from the x-axis; all directions are in N² so the span is
    // below 90° and the comparator is a strict total order.
    glist.sort_by(|a, b| 0.cmp(&cross(a.dir, b.dir)));

    let mut comps: Vec<([i64; 2], Vec<[i64; 2]>)> = Vec::new();
    match glist.len() {
        0 => {
            for c in bases {
                comps.push((c, vec![]));
            }
        }
        1 => {
            let g = &glist[0];
            let pi = scale(g.m1, g.dir);
            for c in &bases {
                for &off in &g.offsets {
                    comps.push((add(*c, scale(off, g.dir)), vec![pi]));
                }
            }
        }
        _ => {
            let pmin = scale(glist[0].m1, glist[0].dir);
            let pmax = scale(glist[glist.len() - 1].m1, glist[glist.len() - 1].dir);
            let det = cross(pmin, pmax);
            debug_assert!(det > 0);
            // Finite contribution sets: extremes contribute their residue
            // offsets; interior directions additionally range over the
            // multiplicities left after the exchange reduction. The residual
            // bases are accumulated level by level with deduplication, which
            // keeps the work proportional to the number of distinct sums
            // rather than the raw product of choice counts.
            let mut residuals: BTreeSet<[i64; 2]> = bases.iter().copied().collect();
            for (i, g) in glist.iter().enumerate() {
                let pi = scale(g.m1, g.dir);
                let mut choices: Vec<[i64; 2]> = Vec::new();
                if i == 0 || i == glist.len() - 1 {
                    for &off in &g.offsets {
                        choices.push(scale(off, g.dir));
                    }
                } else {
                    let a = cross(pi, pmax);
                    let c = cross(pmin, pi);
                    debug_assert!(a >= 0 && c >= 0);
                    // Least γ with γ·pi an N-combination of the extremes.
                    let gamma = det / det.gcd(&a.gcd(&c));
                    for &off in &g.offsets {
                        for k in 0..gamma {
                            choices.push(add(scale(off, g.dir), scale(k, pi)));
                        }
                    }
                }
                let mut next = BTreeSet::new();
                for r in &residuals {
                    for c in &choices {
                        next.insert(add(*r, *c));
                    }
                }
                residuals = next;
                assert!(
                    residuals.len() <= 1 << 20,
                    "quadrant decomposition blow-up: {} residual bases",
                    residuals.len()
                );
            }
            for r in residuals {
                comps.push((r, vec![pmin, pmax]));
            }
        }
    }

    comps.sort();
    comps.dedup();

    // Replace derived periods by in-set representatives: π becomes t·π for the
    // least t ≥ 1 with t·π ∈ L(b;P), and the t remainder classes shift bases.
    let mut scale_cache: BTreeMap<[i64; 2], i64> = BTreeMap::new();
    let mut out: Vec<([i64; 2], Vec<[i64; 2]>)> = Vec::new();
    for (base, ps) in comps {
        let mut variants: Vec<[i64; 2]> = vec![base];
        let mut new_ps: Vec<[i64; 2]> = Vec::new();
        for pi in ps {
            let t = *scale_cache
                .entry(pi)
                .or_insert_with(|| least_in_set_multiple(b, periods, pi));
            new_ps.push(scale(t, pi));
            if t > 1 {
                let mut expanded = Vec::with_capacity(variants.len() * t as usize);
                for v in variants {
                    for i in 0..t {
                        expanded.push(add(v, scale(i, pi)));
                    }
                }
                variants = expanded;
            }
        }
        for v in variants {
            out.push((v, new_ps.clone()));
        }
    }
    out
}

/// Removes generators that are N-combinations of the remaining ones; the
/// generated monoid is unchanged and every later stage shrinks accordingly.
fn drop_redundant_generators(gens: BTreeSet<[i64; 2]>, keep: &[[i64; 2]]) -> Vec<[i64; 2]> {
    let mut kept: Vec<[i64; 2]> = gens.into_iter().collect();
    // try to discard large generators first
    kept.sort_by_key(|g| std::cmp::Reverse(g[0].max(g[1])));
    let mut i = 0;
    while i < kept.len() {
        if keep.contains(&kept[i]) {
            i += 1;
            continue;
        }
        let others: Vec<[i64; 2]> = kept
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, h)| *h)
            .collect();
        if combination_reachable(kept[i], &others) {
            kept.remove(i);
        } else {
            i += 1;
        }
    }
    kept
}

/// Grid reachability: is `target` a sum of the given nonnegative vectors?
fn combination_reachable(target: [i64; 2], gens: &[[i64; 2]]) -> bool {
    let (w, h) = (target[0] as usize, target[1] as usize);
    let idx = |x: usize, y: usize| y * (w + 1) + x;
    let mut dp = vec![false; (w + 1) * (h + 1)];
    dp[0] = true;
    for y in 0..=h {
        for x in 0..=w {
            if !dp[idx(x, y)] {
                continue;
            }
            for g in gens {
                let (nx, ny) = (x + g[0] as usize, y + g[1] as usize);
                if nx <= w && ny <= h {
                    dp[idx(nx, ny)] = true;
                }
            }
        }
    }
    dp[idx(w, h)]
}

/// Least element of the semigroup generated by `ms` in each residue class
/// mod `m1`; unreachable classes are omitted.
fn apery_offsets(ms: &[i64], m1: i64) -> Vec<i64> {
    let m1u = m1 as usize;
    let mut dist: Vec<Option<i64>> = vec![None; m1u];
    dist[0] = Some(0);
    loop {
        let mut changed = false;
        for r in 0..m1u {
            let Some(v) = dist[r] else { continue };
            for &m in ms {
                let nr = ((r as i64 + m) % m1) as usize;
                let nv = v + m;
                if dist[nr].is_none_or(|old| nv < old) {
                    dist[nr] = Some(nv);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist.into_iter().flatten().collect()
}

/// Least `t ≥ 1` with `t·π ∈ b + cone_N(P)`, or 1 when `π ∈ P` already.
fn least_in_set_multiple(b: [i64; 2], periods: &[[i64; 2]], pi: [i64; 2]) -> i64 {
    if periods.contains(&pi) {
        return 1;
    }
    let n = periods.len();
    let mut eqs = DiophSystem::new(Kind::Equality, n + 1);
    for c in 0..2 {
        let mut row = vec![0i64; n + 1];
        row[0] = pi[c];
        for (i, p) in periods.iter().enumerate() {
            row[i + 1] = -p[c];
        }
        eqs.push_row(row, b[c]);
    }
    let mut lower = DiophSystem::new(Kind::Inequality, n + 1);
    let mut at_least_one = vec![0i64; n + 1];
    at_least_one[0] = 1;
    lower.push_row(at_least_one, 1);
    let sys = conjoin(&lower, &eqs).expect("matching arity");
    match solve_feasible(&sys) {
        SolveOutcome::Solution(w) => i64::try_from(w[0]).expect("scale fits in i64"),
        other => {
            debug_assert!(false, "no in-set multiple of derived period {pi:?}: {other:?}");
            1
        }
    }
}

/// How a period of the displacement set is realized as a concrete cycle.
#[derive(Clone, Copy)]
enum Rep {
    /// The i-th starred cycle of the input scheme.
    Cycle(usize),
    /// One full traversal of the whole loop with all exponents zero.
    Whole,
}

/// Rewrites a loop-shaped linear path scheme into zigzag-free schemes with at
/// most two cycles each.
///
/// The displacement set of a loop scheme `ρ = α₀β₁*⋯βₖ*αₖ`, closed under extra
/// whole-loop traversals, is the linear set `L(b; {δ(βᵢ)} ∪ {b})` with
/// `b = δ(α₀⋯αₖ)`. Decomposing it per quadrant and realizing each component —
/// base as a concrete instantiation, periods as starred cycles — yields the
/// output family. Its displacement sets union to that linear set; when the
/// input is already zigzag-free with ≤ 2 cycles it is returned unchanged and
/// the union is exactly δ(ρ).
pub fn zigzag_decompose(
    v: &Vass<i64>,
    rho: &LinearPathScheme,
) -> Result<Vec<LinearPathScheme>, GeometryError> {
    if v.dim() != 2 {
        return Err(GeometryError::Dimension(v.dim()));
    }
    let info = v.validate_lps(rho)?;
    if let Some((start, end)) = info.endpoints {
        if start != end {
            return Err(GeometryError::NotALoopScheme);
        }
    }
    let cycles: Vec<Path> = rho.cycles().iter().map(|c| c.to_vec()).collect();
    let base_path = v
        .instantiate_lps(rho, &vec![0; rho.cycle_count()])
        .expect("validated scheme instantiates");
    let b = pair(&v.displacement(&base_path)?);

    // Period list with duplicates removed; remember a realizing cycle for each.
    let mut items: Vec<([i64; 2], Rep)> = Vec::new();
    for (i, beta) in cycles.iter().enumerate() {
        let d = pair(&v.displacement(beta)?);
        if !items.iter().any(|(e, _)| *e == d) {
            items.push((d, Rep::Cycle(i)));
        }
    }
    // An already zigzag-free scheme with ≤ 2 cycles is returned unchanged when
    // extra whole-loop traversals add no new displacements; otherwise the
    // whole loop becomes an additional period.
    let absorbed = b == [0, 0] || items.iter().any(|(e, _)| *e == b);
    if absorbed && rho.cycle_count() <= 2 && v.is_zigzag_free(rho)?.0 {
        return Ok(vec![rho.clone()]);
    }
    if b != [0, 0] && !items.iter().any(|(e, _)| *e == b) {
        items.push((b, Rep::Whole));
    }
    let ls = LinearSet::new(b, items.iter().map(|(d, _)| *d).collect());

    let realize = |wit: &[u64]| -> Path {
        let mut exps = vec![0u64; rho.cycle_count()];
        let mut whole_extra = 0u64;
        for ((_, rep), &w) in items.iter().zip(wit) {
            match rep {
                Rep::Cycle(i) => exps[*i] = w,
                Rep::Whole => whole_extra = w,
            }
        }
        let mut path = v.instantiate_lps(rho, &exps).expect("validated scheme instantiates");
        for _ in 0..whole_extra {
            path.extend_from_slice(&base_path);
        }
        path
    };

    let mut gathered: Vec<LinearSet> = Vec::new();
    let mut seen: BTreeSet<([i64; 2], Vec<[i64; 2]>)> = BTreeSet::new();
    for z in Quadrant::ALL {
        let decomposition = decompose_quadrant(&ls, z)?;
        for comp in decomposition.components {
            let mut key_periods = comp.periods.clone();
            key_periods.sort();
            if seen.insert((comp.base, key_periods)) {
                gathered.push(comp);
            }
        }
    }

    let mut out: Vec<LinearPathScheme> = Vec::new();
    for comp in prune_subsumed(gathered) {
        let wit = linset_member(&ls, comp.base).expect("component base lies in the set");
        let mut exps = vec![0u64; rho.cycle_count()];
        let mut whole_extra = 0u64;
        for ((_, rep), &w) in items.iter().zip(&wit) {
            match rep {
                Rep::Cycle(i) => exps[*i] = w,
                Rep::Whole => whole_extra = w,
            }
        }
        // classify the component periods by their realization
        let mut star_at = vec![false; rho.cycle_count()];
        let mut whole_star = false;
        let mut derived_loops: Vec<Path> = Vec::new();
        for period in &comp.periods {
            match items.iter().find(|(d, _)| d == period) {
                Some((_, Rep::Cycle(i))) => star_at[*i] = true,
                Some((_, Rep::Whole)) => whole_star = true,
                None => {
                    let w =
                        linset_member(&ls, *period).expect("component period lies in the set");
                    let lp = realize(&w);
                    debug_assert!(!lp.is_empty(), "nonzero period realizes a nonempty loop");
                    derived_loops.push(lp);
                }
            }
        }
        // splice each starred cycle in place so it sits at its own anchor
        // state; the base exponents become concrete traversals
        let mut segments: Vec<Segment> = Vec::new();
        let mut ci = 0usize;
        for seg in &rho.segments {
            match seg {
                Segment::Plain(p) => {
                    if !p.is_empty() {
                        segments.push(Segment::Plain(p.clone()));
                    }
                }
                Segment::Star(c) => {
                    if exps[ci] > 0 {
                        let mut word = Vec::with_capacity(c.len() * exps[ci] as usize);
                        for _ in 0..exps[ci] {
                            word.extend_from_slice(c);
                        }
                        segments.push(Segment::Plain(word));
                    }
                    if star_at[ci] {
                        segments.push(Segment::Star(c.clone()));
                    }
                    ci += 1;
                }
            }
        }
        // whole-loop traversals and derived-period loops are loops at the
        // scheme's endpoint state, so they append at the end
        for _ in 0..whole_extra {
            if !base_path.is_empty() {
                segments.push(Segment::Plain(base_path.clone()));
            }
        }
        if whole_star {
            debug_assert!(!base_path.is_empty(), "whole-loop period with an empty loop");
            segments.push(Segment::Star(base_path.clone()));
        }
        for lp in derived_loops {
            segments.push(Segment::Star(lp));
        }
        let scheme = LinearPathScheme { segments };
        debug_assert!(v.is_zigzag_free(&scheme).expect("valid scheme").0);
        out.push(scheme);
    }
    Ok(out)
}

fn pair(d: &[i64]) -> [i64; 2] {
    [d[0], d[1]]
}
