//! Tests for the outside-region threshold and the symbolic procedures built
//! on the per-state witness families.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use vassflat::core::{Configuration, ExecOutcome, Region};
use vassflat::flatten::{
    compute_d, outside_reach, type1_reach, DStrategy, FlattenError, FlattenParams,
};
use vassflat::oracle::{bfs_reach, SearchCaps, SearchResult};
use vassflat::zreach::{z_reachable, ZOutcome};
use vassflat::Vass;

fn random_2vass(rng: &mut ChaCha8Rng, max_states: usize, max_trans: usize, norm: i64) -> Vass<i64> {
    let nq = rng.gen_range(1..=max_states);
    let nt = rng.gen_range(1..=max_trans);
    let mut v = Vass::new(2);
    for i in 0..nq {
        v.add_state(format!("q{i}"));
    }
    for _ in 0..nt {
        let src = rng.gen_range(0..nq);
        let dst = rng.gen_range(0..nq);
        let update = vec![rng.gen_range(-norm..=norm), rng.gen_range(-norm..=norm)];
        v.add_transition(src, update, dst);
    }
    v
}

fn replay(v: &Vass<i64>, from: &Configuration<i64>, scheme: &vassflat::LinearPathScheme, exps: &[u64], region: &Region<i64>) -> Configuration<i64> {
    let path = v.instantiate_lps(scheme, exps).expect("valid scheme");
    match v.execute(from, &path, region).expect("executes") {
        ExecOutcome::Done(c) => c,
        other => panic!("witness does not replay in {region:?}: {other:?}"),
    }
}

// --- threshold -------------------------------------------------------------

#[test]
fn threshold_examples() {
    // one monotone self-loop: a short family, a small exact threshold
    let mut v = Vass::new(2);
    let p = v.add_state("p");
    v.add_transition(p, vec![1, 1], p);
    let d = compute_d(&v, DStrategy::Exact).expect("exact");
    assert!(d >= 1 && d <= 4, "unexpectedly large threshold {d}");

    // all-zero updates have norm 0, so the threshold collapses to 0
    let mut z = Vass::new(2);
    let a = z.add_state("a");
    let b = z.add_state("b");
    z.add_transition(a, vec![0, 0], b);
    z.add_transition(b, vec![0, 0], a);
    assert_eq!(compute_d(&z, DStrategy::Exact).expect("exact"), 0);

    // the closed-form threshold is the pinned tenth power
    let mut f = Vass::new(2);
    let s = f.add_state("s");
    let t = f.add_state("t");
    f.add_transition(s, vec![2, 0], t);
    f.add_transition(t, vec![0, -2], s);
    f.add_transition(t, vec![1, 1], t);
    let base: i64 = 2 * 3 * 3; // |Q| * |T| * (norm + 1)
    assert_eq!(compute_d(&f, DStrategy::Formula).expect("formula"), base.pow(10));

    // a 1-dimensional system is rejected
    let mut one = Vass::new(1);
    one.add_state("o");
    assert!(matches!(compute_d(&one, DStrategy::Exact), Err(FlattenError::PreconditionViolated(_))));
}

/// Every scheme of the witness family is zigzag-free, has at most two cycles,
/// and, by the choice of the threshold, replays over `N²` from `(D, D)` with
/// small exponents.
#[test]
fn family_schemes_stay_nonnegative_from_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(1213);
    let mut families_seen = 0;
    for _ in 0..40 {
        let v = random_2vass(&mut rng, 4, 5, 3);
        let Ok(params) = FlattenParams::exact(&v) else {
            continue;
        };
        for q in 0..v.num_states() {
            for scheme in params.family(q) {
                families_seen += 1;
                assert!(scheme.cycle_count() <= 2, "family scheme with >2 cycles");
                let (free, _) = v.is_zigzag_free(scheme).expect("valid scheme");
                assert!(free, "family scheme with a zigzag");
                // one traversal of the concatenation dips at most |σ|·∥T∥ ≤ D
                let exps = vec![1u64; scheme.cycle_count()];
                let from = Configuration::new(q, vec![params.d, params.d]);
                replay(&v, &from, scheme, &exps, &Region::NonNegative);
            }
        }
    }
    assert!(families_seen > 100, "corpus produced too few family schemes");
}

// --- same-state jumps across the outside region ----------------------------

#[test]
fn type1_examples() {
    let mut v = Vass::new(2);
    let p = v.add_state("p");
    v.add_transition(p, vec![2, -1], p);
    v.add_transition(p, vec![-1, 2], p);
    let params = FlattenParams::exact(&v).expect("params");
    let d = params.d;

    // identity
    let u = Configuration::new(p, vec![d, d]);
    let (scheme, exps) = type1_reach(&v, &params, &u, &u).expect("identity");
    assert!(scheme.is_empty() && exps.is_empty());

    // the two loops combine into a (+1, +1) net effect
    let w = Configuration::new(p, vec![d + 1, d + 1]);
    let (scheme, exps) = type1_reach(&v, &params, &u, &w).expect("reachable jump");
    assert!(scheme.cycle_count() <= 2);
    assert_eq!(replay(&v, &u, &scheme, &exps, &Region::NonNegative), w);

    // a target outside the Z-span of the loop displacements
    let mut h = Vass::new(2);
    let q = h.add_state("q");
    h.add_transition(q, vec![2, 0], q);
    let hp = FlattenParams::exact(&h).expect("params");
    let a = Configuration::new(q, vec![hp.d, hp.d]);
    let b = Configuration::new(q, vec![hp.d, hp.d + 1]);
    assert!(matches!(type1_reach(&h, &hp, &a, &b), Err(FlattenError::Unreachable)));
    let c = Configuration::new(q, vec![hp.d + 1, hp.d]);
    assert!(matches!(type1_reach(&h, &hp, &a, &c), Err(FlattenError::Unreachable)));

    // preconditions: distinct states, endpoints below the threshold
    let mut two = Vass::new(2);
    let s0 = two.add_state("s0");
    let s1 = two.add_state("s1");
    two.add_transition(s0, vec![1, 0], s1);
    let tp = FlattenParams::exact(&two).expect("params");
    let x = Configuration::new(s0, vec![tp.d, tp.d]);
    let y = Configuration::new(s1, vec![tp.d, tp.d]);
    assert!(matches!(type1_reach(&two, &tp, &x, &y), Err(FlattenError::PreconditionViolated(_))));
    let low = Configuration::new(p, vec![d - 1, d]);
    assert!(matches!(
        type1_reach(&v, &params, &low, &u),
        Err(FlattenError::PreconditionViolated(_))
    ));
}

/// Above the threshold, same-state reachability over `N²` coincides with
/// reachability over `Z²`: the two procedures must agree on every sampled
/// pair where both are definitive.
#[test]
fn type1_matches_z_reachability_above_threshold() {
    let mut rng = ChaCha8Rng::seed_from_u64(4451);
    let mut checked = 0;
    let mut skipped = 0;
    while checked < 80 {
        let v = random_2vass(&mut rng, 3, 4, 2);
        let Ok(params) = FlattenParams::exact(&v) else {
            continue;
        };
        let q = rng.gen_range(0..v.num_states());
        let d = params.d;
        let from = Configuration::new(q, vec![d + rng.gen_range(0..=4), d + rng.gen_range(0..=4)]);
        let to = Configuration::new(q, vec![d + rng.gen_range(0..=4), d + rng.gen_range(0..=4)]);
        let z = match z_reachable(&v, &from, &to).expect("valid instance") {
            ZOutcome::Reachable(_) => true,
            ZOutcome::Unreachable => false,
            ZOutcome::GiveUp => {
                skipped += 1;
                continue;
            }
        };
        match type1_reach(&v, &params, &from, &to) {
            Ok((scheme, exps)) => {
                assert!(z, "jump witness where Z-reachability denies");
                assert!(scheme.cycle_count() <= 2);
                replay(&v, &from, &scheme, &exps, &Region::NonNegative);
            }
            Err(FlattenError::Unreachable) => assert!(!z, "jump denied on a Z-reachable pair"),
            Err(FlattenError::ResourceCap) => {
                skipped += 1;
                continue;
            }
            Err(e) => panic!("unexpected error: {e:?}"),
        }
        checked += 1;
    }
    assert!(skipped < checked, "too many non-definitive outcomes: {skipped}");
}

// --- runs confined to the outside region -----------------------------------

#[test]
fn outside_examples() {
    let mut v = Vass::new(2);
    let p = v.add_state("p");
    let q = v.add_state("q");
    v.add_transition(p, vec![1, 1], p);
    v.add_transition(p, vec![0, 0], q);
    let params = FlattenParams::exact(&v).expect("params");
    let d = params.d;

    // identity
    let u = Configuration::new(p, vec![d, d]);
    let (scheme, exps) = outside_reach(&v, &params, &u, &u).expect("identity");
    assert!(scheme.is_empty() && exps.is_empty());

    // pump the monotone loop, then move over
    let w = Configuration::new(q, vec![d + 7, d + 7]);
    let (scheme, exps) = outside_reach(&v, &params, &u, &w).expect("reachable");
    let end = replay(&v, &u, &scheme, &exps, &params.outside());
    assert_eq!(end, w);

    // endpoints below the threshold are rejected
    let low = Configuration::new(p, vec![d - 1, d - 1]);
    assert!(matches!(
        outside_reach(&v, &params, &low, &u),
        Err(FlattenError::PreconditionViolated(_))
    ));

    // the loop cannot shrink the counters inside the region
    let back = Configuration::new(p, vec![d, d]);
    let fwd = Configuration::new(p, vec![d + 3, d + 3]);
    assert!(matches!(
        outside_reach(&v, &params, &fwd, &back),
        Err(FlattenError::Unreachable)
    ));
}

/// Agreement with the exhaustive oracle restricted to the outside region, on
/// instances whose outside-confined reachable space is fully enumerable.
#[test]
fn outside_agrees_with_confined_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(90125);
    let mut checked = 0;
    while checked < 60 {
        let v = random_2vass(&mut rng, 3, 4, 2);
        let Ok(params) = FlattenParams::exact(&v) else {
            continue;
        };
        let d = params.d;
        let caps = SearchCaps {
            counter_caps: vec![Some(d + 48); 2],
            node_budget: Some(100_000),
            depth_budget: None,
        };
        let from = Configuration::new(
            rng.gen_range(0..v.num_states()),
            vec![d + rng.gen_range(0..=5), d + rng.gen_range(0..=5)],
        );
        let to = Configuration::new(
            rng.gen_range(0..v.num_states()),
            vec![d + rng.gen_range(0..=5), d + rng.gen_range(0..=5)],
        );
        let region = params.outside();
        // keep only instances the oracle can exhaust inside the region
        let sentinel = Configuration::new(from.state, vec![-1, -1]);
        if !matches!(
            bfs_reach(&v, &from, &sentinel, &region, &caps),
            SearchResult::ExhaustedComplete
        ) {
            continue;
        }
        let oracle =
            matches!(bfs_reach(&v, &from, &to, &region, &caps), SearchResult::Found(_));
        match outside_reach(&v, &params, &from, &to) {
            Ok((scheme, exps)) => {
                assert!(oracle, "outside witness the confined oracle denies");
                let end = replay(&v, &from, &scheme, &exps, &region);
                assert_eq!(end, to);
            }
            Err(FlattenError::Unreachable) => {
                assert!(!oracle, "outside denial on a pair the confined oracle reaches");
            }
            Err(FlattenError::ResourceCap) => continue,
            Err(e) => panic!("unexpected error: {e:?}"),
        }
        checked += 1;
    }
}
