use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vassflat::core::{ExecOutcome, Interval, Region, Segment};
use vassflat::onedim::{
    band_product, belt_reach, lps_witness_1vass, shortest_run_1vass, unary_expand, BandSpec,
    BoundedAxis, OneDimError,
};
use vassflat::oracle::{bfs_reach, SearchCaps, SearchResult};
use vassflat::{Config64, Vass64};

fn random_1vass(rng: &mut ChaCha8Rng, max_states: usize, max_trans: usize, norm: i64) -> Vass64 {
    let nq = rng.gen_range(1..=max_states);
    let mut v = Vass64::new(1);
    for i in 0..nq {
        v.add_state(format!("q{i}"));
    }
    let nt = rng.gen_range(1..=max_trans);
    for _ in 0..nt {
        let src = rng.gen_range(0..nq);
        let dst = rng.gen_range(0..nq);
        v.add_transition(src, vec![rng.gen_range(-norm..=norm)], dst);
    }
    v
}

fn random_2vass(rng: &mut ChaCha8Rng, max_states: usize, max_trans: usize, norm: i64) -> Vass64 {
    let nq = rng.gen_range(1..=max_states);
    let mut v = Vass64::new(2);
    for i in 0..nq {
        v.add_state(format!("q{i}"));
    }
    let nt = rng.gen_range(1..=max_trans);
    for _ in 0..nt {
        let src = rng.gen_range(0..nq);
        let dst = rng.gen_range(0..nq);
        v.add_transition(
            src,
            vec![rng.gen_range(-norm..=norm), rng.gen_range(-norm..=norm)],
            dst,
        );
    }
    v
}

// ---------------------------------------------------------------------------
// Unary expansion
// ---------------------------------------------------------------------------

#[test]
fn unary_expand_chain_shapes() {
    let mut v = Vass64::new(1);
    let p = v.add_state("p");
    let q = v.add_state("q");
    let t3 = v.add_transition(p, vec![3], q);
    let t0 = v.add_transition(p, vec![0], q);
    let tm2 = v.add_transition(q, vec![-2], p);
    let exp = unary_expand(&v).unwrap();

    // (p, 3, q): a 0-step in, three +1 steps, a 0-step out.
    let chain = exp.chain(t3);
    assert_eq!(chain.len(), 5);
    let updates: Vec<i64> = chain.iter().map(|&t| exp.expanded.transition(t).update[0]).collect();
    assert_eq!(updates, vec![0, 1, 1, 1, 0]);
    assert_eq!(exp.expanded.transition(chain[0]).src, p);
    assert_eq!(exp.expanded.transition(chain[4]).dst, q);

    // (p, 0, q): two transitions, both 0-updates.
    let chain = exp.chain(t0);
    assert_eq!(chain.len(), 2);
    assert!(chain.iter().all(|&t| exp.expanded.transition(t).update[0] == 0));

    // (q, -2, p): decrement chain of length 4.
    let chain = exp.chain(tm2);
    let updates: Vec<i64> = chain.iter().map(|&t| exp.expanded.transition(t).update[0]).collect();
    assert_eq!(updates, vec![0, -1, -1, 0]);

    // Dimension precondition.
    let v2 = Vass64::new(2);
    assert!(matches!(
        unary_expand(&v2),
        Err(OneDimError::DimensionMismatch { expected: 1, found: 2 })
    ));
}

#[test]
fn unary_expand_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..100 {
        let v = random_1vass(&mut rng, 4, 6, 4);
        let exp = unary_expand(&v).unwrap();
        // Random original path, not necessarily a valid run: the round trip
        // is a statement about words.
        let mut path = Vec::new();
        let mut state = rng.gen_range(0..v.num_states());
        for _ in 0..rng.gen_range(0..12) {
            let outs: Vec<usize> = (0..v.num_transitions())
                .filter(|&t| v.transition(t).src == state)
                .collect();
            if outs.is_empty() {
                break;
            }
            let t = outs[rng.gen_range(0..outs.len())];
            path.push(t);
            state = v.transition(t).dst;
        }
        let image = exp.apply(&path);
        assert_eq!(exp.invert(&image).unwrap(), path);
    }
}

#[test]
fn unary_expand_preserves_reachability() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let caps1 = SearchCaps::uniform(1, 80, 400_000);
    let mut checked = 0;
    while checked < 200 {
        let v = random_1vass(&mut rng, 4, 6, 4);
        let exp = unary_expand(&v).unwrap();
        for _ in 0..4 {
            let from = Config64::new(rng.gen_range(0..v.num_states()), vec![rng.gen_range(0..=20)]);
            let to = Config64::new(rng.gen_range(0..v.num_states()), vec![rng.gen_range(0..=20)]);
            let before = bfs_reach(&v, &from, &to, &Region::NonNegative, &caps1);
            let after = bfs_reach(&exp.expanded, &from, &to, &Region::NonNegative, &caps1);
            // Chains interpolate monotonically between original counter
            // values, so the capped searches see the same reachability.
            assert_eq!(
                matches!(before, SearchResult::Found(_)),
                matches!(after, SearchResult::Found(_)),
                "expansion changed reachability verdict"
            );
            if let SearchResult::Found(image) = &after {
                let preimage = exp.invert(image).unwrap();
                assert_eq!(
                    v.execute(&from, &preimage, &Region::NonNegative).unwrap(),
                    ExecOutcome::Done(to.clone())
                );
            }
            checked += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Shortest runs
// ---------------------------------------------------------------------------

#[test]
fn shortest_run_examples() {
    // Single state, self-loop +1: p(0) -> p(5) has length 5.
    let mut v = Vass64::new(1);
    let p = v.add_state("p");
    v.add_transition(p, vec![1], p);
    let run = shortest_run_1vass(&v, &Config64::new(p, vec![0]), &Config64::new(p, vec![5]))
        .unwrap();
    assert_eq!(run.len(), 5);

    // Single state, self-loop -1 only: p(0) -> p(1) is unreachable.
    let mut v = Vass64::new(1);
    let p = v.add_state("p");
    v.add_transition(p, vec![-1], p);
    assert!(matches!(
        shortest_run_1vass(&v, &Config64::new(p, vec![0]), &Config64::new(p, vec![1])),
        Err(OneDimError::Unreachable)
    ));

    // Non-unary updates are rejected.
    let mut v = Vass64::new(1);
    let p = v.add_state("p");
    v.add_transition(p, vec![2], p);
    assert!(matches!(
        shortest_run_1vass(&v, &Config64::new(p, vec![0]), &Config64::new(p, vec![2])),
        Err(OneDimError::PreconditionViolated(_))
    ));
}

#[test]
fn shortest_run_matches_uncapped_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for _ in 0..300 {
        let v = random_1vass(&mut rng, 5, 7, 1);
        let from = Config64::new(rng.gen_range(0..v.num_states()), vec![rng.gen_range(0..=40)]);
        let to = Config64::new(rng.gen_range(0..v.num_states()), vec![rng.gen_range(0..=40)]);
        // Reference search with a far larger cap than the pinned window.
        let caps = SearchCaps::uniform(1, 600, 2_000_000);
        let reference = bfs_reach(&v, &from, &to, &Region::NonNegative, &caps);
        match shortest_run_1vass(&v, &from, &to) {
            Ok(run) => {
                let SearchResult::Found(oracle) = reference else {
                    panic!("capped search found a run the reference missed");
                };
                assert_eq!(run.len(), oracle.len(), "capped run is not shortest");
                assert_eq!(
                    v.execute(&from, &run, &Region::NonNegative).unwrap(),
                    ExecOutcome::Done(to.clone())
                );
                // Pinned length bound.
                let q = v.num_states() as i64;
                let d = (from.counters[0] - to.counters[0]).abs();
                assert!(run.len() as i64 <= 8 * q * (q + q * q) + q * d);
            }
            Err(OneDimError::Unreachable) => {
                assert!(
                    !matches!(reference, SearchResult::Found(_)),
                    "pinned counter cap missed a reachable pair"
                );
            }
            Err(e) => panic!("unexpected error: {e}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Single-cycle scheme witnesses
// ---------------------------------------------------------------------------

#[test]
fn lps_witness_examples() {
    // Self-loop +1: p(0) -> p(5) compresses to a single starred cycle with
    // exponent 5.
    let mut v = Vass64::new(1);
    let p = v.add_state("p");
    let t = v.add_transition(p, vec![1], p);
    let (scheme, exps) =
        lps_witness_1vass(&v, &Config64::new(p, vec![0]), &Config64::new(p, vec![5])).unwrap();
    assert_eq!(scheme.segments, vec![Segment::Star(vec![t])]);
    assert_eq!(exps, vec![5]);

    // Identical endpoints give the empty scheme.
    let (scheme, exps) =
        lps_witness_1vass(&v, &Config64::new(p, vec![3]), &Config64::new(p, vec![3])).unwrap();
    assert!(scheme.is_empty());
    assert!(exps.is_empty());

    // Two-state system, +3 / -1 alternation: p(0) -> p(4).
    let mut v = Vass64::new(1);
    let p = v.add_state("p");
    let q = v.add_state("q");
    v.add_transition(p, vec![3], q);
    v.add_transition(q, vec![-1], p);
    let from = Config64::new(p, vec![0]);
    let to = Config64::new(p, vec![4]);
    let (scheme, exps) = lps_witness_1vass(&v, &from, &to).unwrap();
    assert!(scheme.cycle_count() <= 1);
    // Pinned size bound P1(|Q|, norm) = (|Q|(norm+2))^2 + |Q|(norm+2).
    let m = 2 * (3 + 2);
    assert!(scheme.len() <= (m * m + m) as usize);
    let replay = v.instantiate_lps(&scheme, &exps).unwrap();
    assert_eq!(v.execute(&from, &replay, &Region::NonNegative).unwrap(), ExecOutcome::Done(to));
}

#[test]
fn lps_witness_randomized() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for _ in 0..150 {
        let v = random_1vass(&mut rng, 4, 6, 3);
        let from = Config64::new(rng.gen_range(0..v.num_states()), vec![rng.gen_range(0..=25)]);
        let to = Config64::new(rng.gen_range(0..v.num_states()), vec![rng.gen_range(0..=25)]);
        let caps = SearchCaps::uniform(1, 800, 2_000_000);
        let reference = bfs_reach(&v, &from, &to, &Region::NonNegative, &caps);
        match lps_witness_1vass(&v, &from, &to) {
            Ok((scheme, exps)) => {
                assert!(scheme.cycle_count() <= 1);
                let replay = v.instantiate_lps(&scheme, &exps).unwrap();
                assert_eq!(
                    v.execute(&from, &replay, &Region::NonNegative).unwrap(),
                    ExecOutcome::Done(to.clone())
                );
            }
            Err(OneDimError::Unreachable) => {
                assert!(
                    !matches!(reference, SearchResult::Found(_)),
                    "witness search missed a reachable pair"
                );
            }
            Err(e) => panic!("unexpected error: {e}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Band products
// ---------------------------------------------------------------------------

#[test]
fn band_product_examples() {
    let mut v = Vass64::new(2);
    let p = v.add_state("p");
    let q = v.add_state("q");
    v.add_transition(p, vec![1, -1], q);
    let bp = band_product(&v, BandSpec { axis: BoundedAxis::Second, bound: 2 }).unwrap();

    // Only levels 1 and 2 admit the -1 shift; the boundary copy at level 0
    // is dropped.
    assert_eq!(bp.product.num_transitions(), 2);
    let t0 = bp.product.transition(0);
    assert_eq!((t0.src, t0.update.clone(), t0.dst), (bp.state(p, 1), vec![1], bp.state(q, 0)));
    let t1 = bp.product.transition(1);
    assert_eq!((t1.src, t1.update.clone(), t1.dst), (bp.state(p, 2), vec![1], bp.state(q, 1)));

    // Embedding and projection are inverse on band configurations.
    let c = Config64::new(p, vec![7, 2]);
    let e = bp.embed(&c).unwrap();
    assert_eq!(e, Config64::new(bp.state(p, 2), vec![7]));
    assert_eq!(bp.project(&e), c);
    assert!(bp.embed(&Config64::new(p, vec![7, 3])).is_none());
}

#[test]
fn band_product_matches_band_restricted_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(59);
    let d = 3;
    let mut checked = 0;
    while checked < 200 {
        let v = random_2vass(&mut rng, 3, 5, 2);
        let axis = if rng.gen_bool(0.5) { BoundedAxis::First } else { BoundedAxis::Second };
        let bp = band_product(&v, BandSpec { axis, bound: d }).unwrap();
        let (bi, ui) = match axis {
            BoundedAxis::First => (0, 1),
            BoundedAxis::Second => (1, 0),
        };
        for _ in 0..4 {
            let mk = |rng: &mut ChaCha8Rng| {
                let mut counters = vec![0i64; 2];
                counters[bi] = rng.gen_range(0..=d);
                counters[ui] = rng.gen_range(0..=15);
                Config64::new(rng.gen_range(0..v.num_states()), counters)
            };
            let from = mk(&mut rng);
            let to = mk(&mut rng);
            // Identical finite search spaces on both sides: the unbounded
            // coordinate capped at 80, the banded one confined by the region.
            let cap = 80;
            let mut intervals = vec![
                Interval { lo: 0, hi: Some(cap) },
                Interval { lo: 0, hi: Some(cap) },
            ];
            intervals[bi].hi = Some(d);
            let band_region = Region::Box(intervals);
            let caps2 = SearchCaps::uniform(2, cap, 2_000_000);
            let direct = bfs_reach(&v, &from, &to, &band_region, &caps2);
            let caps1 = SearchCaps::uniform(1, cap, 2_000_000);
            let folded = bfs_reach(
                &bp.product,
                &bp.embed(&from).unwrap(),
                &bp.embed(&to).unwrap(),
                &Region::NonNegative,
                &caps1,
            );
            assert_eq!(
                matches!(direct, SearchResult::Found(_)),
                matches!(folded, SearchResult::Found(_)),
                "band product changed reachability"
            );
            if let SearchResult::Found(product_path) = &folded {
                // The mapped path replays in the original system and stays in
                // the band; cycles map to cycles.
                let mapped = bp.map_path(product_path);
                assert_eq!(
                    v.execute(&from, &mapped, &band_region).unwrap(),
                    ExecOutcome::Done(to.clone())
                );
                if let Some((s, e)) = bp.product.path_endpoints(product_path).unwrap() {
                    if s == e {
                        let (os, oe) = v.path_endpoints(&mapped).unwrap().unwrap();
                        assert_eq!(os, oe, "product cycle must map to a cycle");
                    }
                }
            }
            checked += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Belt reachability
// ---------------------------------------------------------------------------

#[test]
fn belt_examples() {
    let mut v = Vass64::new(2);
    let p = v.add_state("p");
    let q = v.add_state("q");
    v.add_transition(p, vec![2, 1], q);
    v.add_transition(q, vec![3, -1], p);
    let d = 2;

    // Identical endpoints give the empty scheme.
    let c = Config64::new(p, vec![4, 1]);
    let (scheme, exps) = belt_reach(&v, d, &c, &c).unwrap();
    assert!(scheme.is_empty() && exps.is_empty());

    // A run keeping the second coordinate small, far from the corner square:
    // a single band segment, identical to the one-counter witness through
    // the product.
    let from = Config64::new(p, vec![20, 0]);
    let to = Config64::new(p, vec![30, 0]);
    let (scheme, exps) = belt_reach(&v, d, &from, &to).unwrap();
    assert!(scheme.cycle_count() <= 2);
    let e = d + v.norm_t();
    let replay = v.instantiate_lps(&scheme, &exps).unwrap();
    assert_eq!(
        v.execute(&from, &replay, &Region::LShape(e)).unwrap(),
        ExecOutcome::Done(to.clone())
    );
    let bp = band_product(&v, BandSpec { axis: BoundedAxis::Second, bound: e }).unwrap();
    let (product_scheme, product_exps) =
        lps_witness_1vass(&bp.product, &bp.embed(&from).unwrap(), &bp.embed(&to).unwrap())
            .unwrap();
    let mapped: Vec<Segment> = product_scheme
        .segments
        .iter()
        .map(|s| match s {
            Segment::Plain(p) => Segment::Plain(bp.map_path(p)),
            Segment::Star(p) => Segment::Star(bp.map_path(p)),
        })
        .collect();
    assert_eq!(scheme.segments, mapped);
    assert_eq!(exps, product_exps);

    // Endpoints outside the L-shape are rejected.
    let high = Config64::new(p, vec![10, 10]);
    assert!(matches!(
        belt_reach(&v, d, &high, &to),
        Err(OneDimError::PreconditionViolated(_))
    ));
}

#[test]
fn belt_randomized() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let d = 3;
    let mut checked = 0;
    while checked < 120 {
        let v = random_2vass(&mut rng, 3, 5, 2);
        let e = d + v.norm_t();
        for _ in 0..3 {
            let mk = |rng: &mut ChaCha8Rng| {
                let mut counters = vec![rng.gen_range(0..=15), rng.gen_range(0..=15)];
                let small = rng.gen_range(0..2);
                counters[small] = rng.gen_range(0..=d);
                Config64::new(rng.gen_range(0..v.num_states()), counters)
            };
            let from = mk(&mut rng);
            let to = mk(&mut rng);
            let caps = SearchCaps::uniform(2, 2500, 4_000_000);
            let reference = bfs_reach(&v, &from, &to, &Region::LShape(d), &caps);
            match belt_reach(&v, d, &from, &to) {
                Ok((scheme, exps)) => {
                    assert!(scheme.cycle_count() <= 2);
                    let replay = v.instantiate_lps(&scheme, &exps).unwrap();
                    assert_eq!(
                        v.execute(&from, &replay, &Region::LShape(e)).unwrap(),
                        ExecOutcome::Done(to.clone()),
                        "belt witness must replay in the widened region"
                    );
                }
                Err(OneDimError::Unreachable) => {
                    assert!(
                        !matches!(reference, SearchResult::Found(_)),
                        "belt search missed a confined run"
                    );
                }
                Err(e) => panic!("unexpected error: {e}"),
            }
            checked += 1;
        }
    }
}
