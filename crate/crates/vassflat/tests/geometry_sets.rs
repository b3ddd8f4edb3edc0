use num_bigint::BigUint;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use vassflat::core::{LinearPathScheme, Quadrant, Segment};
use vassflat::geometry::{
    coefficient_bound, decompose_quadrant, linset_member, zigzag_decompose, GeometryError,
    LinearSet, SemiLinearSet,
};
use vassflat::oracle::enumerate_linset;
use vassflat::Vass64;

/// Exact membership for a component with at most two periods, by plain
/// arithmetic (independent of the solver used inside the library).
fn member2(ls: &LinearSet, x: [i64; 2]) -> bool {
    let d = [x[0] - ls.base[0], x[1] - ls.base[1]];
    let ps: Vec<[i64; 2]> = ls.periods.iter().copied().filter(|p| *p != [0, 0]).collect();
    let cross = |a: [i64; 2], b: [i64; 2]| a[0] * b[1] - a[1] * b[0];
    match ps.len() {
        0 => d == [0, 0],
        1 => {
            let p = ps[0];
            let (num, den) = if p[0] != 0 { (d[0], p[0]) } else { (d[1], p[1]) };
            if num % den != 0 {
                return false;
            }
            let k = num / den;
            k >= 0 && d == [k * p[0], k * p[1]]
        }
        _ => {
            let (p, q) = (ps[0], ps[1]);
            let det = cross(p, q);
            if det != 0 {
                let lam = cross(d, q);
                let mu = cross(p, d);
                if lam % det != 0 || mu % det != 0 {
                    return false;
                }
                lam / det >= 0 && mu / det >= 0
            } else {
                // collinear pair: bounded search over the shorter period
                let bound = d.iter().map(|v| v.abs()).max().unwrap_or(0)
                    / p.iter().map(|v| v.abs()).max().unwrap().max(1)
                    + 1;
                (0..=bound).any(|a| {
                    let r = [d[0] - a * p[0], d[1] - a * p[1]];
                    member2(&LinearSet::new([0, 0], vec![q]), r)
                })
            }
        }
    }
}

fn in_union(sl: &SemiLinearSet, x: [i64; 2]) -> bool {
    sl.components.iter().any(|c| member2(c, x))
}

#[test]
fn linset_member_examples() {
    let ls = LinearSet::new([1, 1], vec![[1, 1]]);
    assert_eq!(linset_member(&ls, [4, 4]), Some(vec![3]));
    assert_eq!(linset_member(&ls, [2, 3]), None);
    // x = b has the all-zero witness
    assert_eq!(linset_member(&ls, [1, 1]), Some(vec![0]));

    // (0,1) = (1,−1) + 1·(−1,2); the lex-least witness spends nothing on p₁
    let ls = LinearSet::new([1, -1], vec![[1, -1], [-1, 2]]);
    let w = linset_member(&ls, [0, 1]).expect("member");
    assert_eq!(w, vec![0, 1]);
}

#[test]
fn member2_agrees_with_linset_member() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..300 {
        let n = rng.gen_range(0..=2);
        let periods: Vec<[i64; 2]> =
            (0..n).map(|_| [rng.gen_range(-3..=3), rng.gen_range(-3..=3)]).collect();
        let ls = LinearSet::new([rng.gen_range(-3..=3), rng.gen_range(-3..=3)], periods);
        let x = [rng.gen_range(-12..=12), rng.gen_range(-12..=12)];
        assert_eq!(member2(&ls, x), linset_member(&ls, x).is_some(), "{ls:?} {x:?}");
    }
}

#[test]
fn decompose_examples() {
    // already inside the quadrant: a single unchanged component
    let ls = LinearSet::new([1, 1], vec![[1, 1]]);
    let sl = decompose_quadrant(&ls, Quadrant::PosPos).unwrap();
    assert_eq!(sl.components, vec![LinearSet::new([1, 1], vec![[1, 1]])]);

    // no member in the target quadrant: empty union
    let ls = LinearSet::new([-1, -1], vec![[-1, -1]]);
    let sl = decompose_quadrant(&ls, Quadrant::PosPos).unwrap();
    assert!(sl.components.is_empty());

    // precondition: the base must appear among the periods
    let ls = LinearSet::new([1, 1], vec![[2, 2]]);
    assert_eq!(
        decompose_quadrant(&ls, Quadrant::PosPos),
        Err(GeometryError::PreconditionViolated)
    );

    // mixed directions against the brute-force oracle
    let ls = LinearSet::new([1, -1], vec![[1, -1], [-1, 2]]);
    let sl = decompose_quadrant(&ls, Quadrant::PosPos).unwrap();
    check_decomposition(&ls, Quadrant::PosPos, &sl);
}

/// Oracle + structural checks shared by the example and randomized tests.
fn check_decomposition(ls: &LinearSet, z: Quadrant, sl: &SemiLinearSet) {
    let truth: BTreeSet<[i64; 2]> = enumerate_linset(ls, 25, 40)
        .into_iter()
        .filter(|x| z.contains(x))
        .collect();
    // completeness: every enumerated member of the intersection is covered
    for x in &truth {
        assert!(in_union(sl, *x), "missing {x:?} for {ls:?} in {z:?}");
    }
    // soundness: every point any component can reach lies in the intersection
    for comp in &sl.components {
        assert!(comp.periods.len() <= 2, "too many periods: {comp:?}");
        for x in enumerate_linset(comp, 81, 40) {
            assert!(z.contains(&x), "{x:?} outside {z:?} from {comp:?}");
            if !truth.contains(&x) {
                assert!(
                    linset_member(ls, x).is_some(),
                    "unsound point {x:?} from {comp:?} for {ls:?}"
                );
            }
        }
        // structural bullets: base and periods carry witnesses in the set
        let bound = coefficient_bound(ls.period_norm());
        let wit = linset_member(ls, comp.base).expect("base in set");
        assert!(z.contains(&comp.base));
        assert!(wit.iter().all(|&w| BigUint::from(w) <= bound), "base witness too large");
        for p in &comp.periods {
            assert!(z.contains(p), "period {p:?} outside {z:?}");
            if ls.periods.contains(p) {
                continue;
            }
            let w = linset_member(ls, *p).expect("period in set");
            assert!(w.iter().all(|&w| BigUint::from(w) <= bound), "period witness too large");
        }
    }
}

#[test]
fn decompose_agrees_with_enumeration_randomized() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for round in 0..120 {
        let n = rng.gen_range(1..=4);
        let mut periods: Vec<[i64; 2]> =
            (0..n).map(|_| [rng.gen_range(-4..=4), rng.gen_range(-4..=4)]).collect();
        let base = periods[rng.gen_range(0..n)];
        periods.sort();
        periods.dedup();
        let ls = LinearSet::new(base, periods);
        let z = Quadrant::ALL[round % 4];
        let sl = decompose_quadrant(&ls, z).unwrap();
        check_decomposition(&ls, z, &sl);
    }
}

#[test]
fn decompose_idempotent_on_single_quadrant_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..40 {
        let n = rng.gen_range(1..=3);
        let mut periods: Vec<[i64; 2]> =
            (0..n).map(|_| [rng.gen_range(0..=4), rng.gen_range(0..=4)]).collect();
        let base = periods[rng.gen_range(0..n)];
        periods.sort();
        periods.dedup();
        let ls = LinearSet::new(base, periods);
        let sl = decompose_quadrant(&ls, Quadrant::PosPos).unwrap();
        // extensional equality on samples: the input is entirely inside N²
        for x in enumerate_linset(&ls, 10, 60) {
            assert!(in_union(&sl, x), "{x:?} lost from {ls:?}");
        }
        check_decomposition(&ls, Quadrant::PosPos, &sl);
    }
}

/// Displacement set of a scheme as a linear set over its cycle displacements.
fn scheme_delta_set(v: &Vass64, rho: &LinearPathScheme) -> LinearSet {
    let base = v.displacement(&v.instantiate_lps(rho, &vec![0; rho.cycle_count()]).unwrap());
    let base = base.unwrap();
    let periods = rho
        .cycles()
        .iter()
        .map(|c| {
            let d = v.displacement(c).unwrap();
            [d[0], d[1]]
        })
        .collect();
    LinearSet::new([base[0], base[1]], periods)
}

#[test]
fn zigzag_single_cycle_passthrough() {
    // zero-displacement connectors: extra whole-loop turns add nothing and the
    // zigzag-free input comes back unchanged
    let mut v = Vass64::new(2);
    let q = v.add_state("q");
    let r = v.add_state("r");
    let t1 = v.add_transition(q, vec![1, 0], r);
    let t2 = v.add_transition(r, vec![-1, 0], q);
    let c = v.add_transition(q, vec![1, 1], q);
    let rho = LinearPathScheme {
        segments: vec![
            Segment::Plain(vec![t1, t2]),
            Segment::Star(vec![c]),
            Segment::Plain(vec![t1, t2]),
        ],
    };
    let out = zigzag_decompose(&v, &rho).unwrap();
    assert_eq!(out, vec![rho]);
}

#[test]
fn zigzag_two_cycle_split() {
    // cycle displacements (2,−1) and (−1,2) span two quadrants: must split
    let mut v = Vass64::new(2);
    let q = v.add_state("q");
    let t1 = v.add_transition(q, vec![2, -1], q);
    let t2 = v.add_transition(q, vec![-1, 2], q);
    let rho =
        LinearPathScheme { segments: vec![Segment::Star(vec![t1]), Segment::Star(vec![t2])] };
    assert!(!v.is_zigzag_free(&rho).unwrap().0);
    let out = zigzag_decompose(&v, &rho).unwrap();
    check_zigzag_outputs(&v, &rho, &out, 15);
}

#[test]
fn zigzag_plain_loop_gains_whole_loop_star() {
    // no cycles at all: the whole loop itself becomes the only period
    let mut v = Vass64::new(2);
    let q = v.add_state("q");
    let t = v.add_transition(q, vec![1, 1], q);
    let rho = LinearPathScheme { segments: vec![Segment::Plain(vec![t])] };
    let out = zigzag_decompose(&v, &rho).unwrap();
    assert_eq!(out.len(), 1);
    let ds = scheme_delta_set(&v, &out[0]);
    // δ-set is {(1,1)} ∪ its positive multiples
    assert!(member2(&ds, [1, 1]));
    assert!(member2(&ds, [4, 4]));
    assert!(!member2(&ds, [0, 0]));
    assert!(!member2(&ds, [1, 2]));
    check_zigzag_outputs(&v, &rho, &out, 15);
}

#[test]
fn zigzag_rejects_open_schemes_and_wrong_dimension() {
    let mut v = Vass64::new(2);
    let a = v.add_state("a");
    let b = v.add_state("b");
    let t = v.add_transition(a, vec![1, 0], b);
    let rho = LinearPathScheme { segments: vec![Segment::Plain(vec![t])] };
    assert_eq!(zigzag_decompose(&v, &rho), Err(GeometryError::NotALoopScheme));

    let v1 = Vass64::new(1);
    assert_eq!(
        zigzag_decompose(&v1, &LinearPathScheme::default()),
        Err(GeometryError::Dimension(1))
    );
}

/// Shared output checks: well-formed, zigzag-free, ≤ 2 cycles, and sampled
/// δ-set equality against the whole-loop-closed displacement set of the input.
fn check_zigzag_outputs(
    v: &Vass64,
    rho: &LinearPathScheme,
    out: &[LinearPathScheme],
    coeff_cap: u64,
) {
    let mut closed = scheme_delta_set(v, rho);
    // closure under extra whole-loop traversals (the documented enlargement)
    if !closed.periods.contains(&closed.base) {
        closed.periods.push(closed.base);
    }
    let out_sets: Vec<LinearSet> = out
        .iter()
        .map(|s| {
            let info = v.validate_lps(s).unwrap();
            if let Some((start, end)) = info.endpoints {
                assert_eq!(start, end, "output scheme is not a loop");
            }
            assert!(s.cycle_count() <= 2);
            assert!(v.is_zigzag_free(s).unwrap().0);
            scheme_delta_set(v, s)
        })
        .collect();
    // forward: every sampled input displacement is realized by some output
    for x in enumerate_linset(&closed, coeff_cap, i64::MAX) {
        assert!(
            out_sets.iter().any(|s| member2(s, x)),
            "displacement {x:?} lost by zigzag decomposition"
        );
    }
    // backward: every sampled output displacement was available in the input
    for s in &out_sets {
        for x in enumerate_linset(s, coeff_cap, i64::MAX) {
            assert!(
                linset_member(&closed, x).is_some(),
                "displacement {x:?} invented by zigzag decomposition"
            );
        }
    }
}

#[test]
fn zigzag_randomized_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..60 {
        let mut v = Vass64::new(2);
        let q = v.add_state("q");
        let r = v.add_state("r");
        let span = 3i64;
        let mut segments = Vec::new();
        // optional opening connector hop q → r → q
        let connector = |v: &mut Vass64, rng: &mut ChaCha8Rng| {
            let a = v.add_transition(
                q,
                vec![rng.gen_range(-span..=span), rng.gen_range(-span..=span)],
                r,
            );
            let b = v.add_transition(
                r,
                vec![rng.gen_range(-span..=span), rng.gen_range(-span..=span)],
                q,
            );
            vec![a, b]
        };
        if rng.gen_bool(0.5) {
            segments.push(Segment::Plain(connector(&mut v, &mut rng)));
        }
        for _ in 0..rng.gen_range(1..=3) {
            let t = v.add_transition(
                q,
                vec![rng.gen_range(-span..=span), rng.gen_range(-span..=span)],
                q,
            );
            segments.push(Segment::Star(vec![t]));
            if rng.gen_bool(0.3) {
                segments.push(Segment::Plain(connector(&mut v, &mut rng)));
            }
        }
        let rho = LinearPathScheme { segments };
        let out = zigzag_decompose(&v, &rho).unwrap();
        check_zigzag_outputs(&v, &rho, &out, 6);
    }
}
