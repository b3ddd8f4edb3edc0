//! Tests for the instance and certificate text formats: grammar examples,
//! error locations, and round-trip identity.

use num_bigint::BigUint;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use vassflat::core::{Configuration, Interval, LinearPathScheme, Region, Segment};
use vassflat::format::{
    parse_certificate, parse_instance, serialize_certificate, serialize_instance, CertificateFile,
};
use vassflat::gen::gen_random;

#[test]
fn instance_grammar_examples() {
    // minimal file: one state, no transitions
    let (v, q) = parse_instance("vass 2\nstate only\n").expect("valid");
    assert_eq!((v.dim(), v.num_states(), v.num_transitions()), (2, 1, 0));
    assert!(q.is_none());

    let text = "\
# a two-state system
vass 2
state p
state q
trans p q 2 -1
trans p q 2 -1   # duplicates are kept in order
query p 1 0 -> q 3 -1
";
    let (v, q) = parse_instance(text).expect("valid");
    assert_eq!(v.num_transitions(), 2);
    assert_eq!(v.transition(0).update, vec![2, -1]);
    assert_eq!(v.transition(1).update, vec![2, -1]);
    let (from, to) = q.expect("query present");
    assert_eq!(from, Configuration::new(0, vec![1, 0]));
    assert_eq!(to, Configuration::new(1, vec![3, -1]));
}

#[test]
fn instance_parse_errors_carry_line_numbers() {
    // update arity must match the header dimension
    let e = parse_instance("vass 2\nstate p\nstate q\ntrans p q 2\n").unwrap_err();
    assert_eq!(e.line, 4);
    assert!(e.reason.contains("2 update"), "unexpected reason: {}", e.reason);

    let e = parse_instance("state p\n").unwrap_err();
    assert_eq!(e.line, 1);

    let e = parse_instance("vass 2\nstate 0bad\n").unwrap_err();
    assert_eq!(e.line, 2);

    let e = parse_instance("vass 2\nstate p\ntrans p ghost 0 0\n").unwrap_err();
    assert_eq!(e.line, 3);
    assert!(e.reason.contains("ghost"));

    assert!(parse_instance("").is_err(), "missing header");
    assert!(parse_instance("vass 2\nstate p\nstate p\n").is_err(), "duplicate state");
}

#[test]
fn instance_roundtrip_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..40 {
        let v = gen_random(2, rng.gen_range(1..=5), rng.gen_range(0..=8).max(4), 3, trial)
            .expect("valid parameters");
        let query = (
            Configuration::new(rng.gen_range(0..v.num_states()), vec![1, 2]),
            Configuration::new(rng.gen_range(0..v.num_states()), vec![0, 7]),
        );
        let text = serialize_instance(&v, Some(&query));
        let (v2, q2) = parse_instance(&text).expect("serialized form parses");
        assert_eq!(v.states(), v2.states());
        assert_eq!(v.transitions(), v2.transitions());
        assert_eq!(q2, Some(query));
        // normalized text is a fixed point
        assert_eq!(text, serialize_instance(&v2, q2.as_ref()));
    }
}

#[test]
fn certificate_grammar_examples() {
    // the empty-run certificate
    let c = parse_certificate("cert N2\nseg\n").expect("valid");
    assert_eq!(c.region, Region::NonNegative);
    assert_eq!(c.scheme.segments, vec![Segment::Plain(vec![])]);
    assert!(c.exponents.is_empty());

    // one-cycle witness: three lines
    let c = parse_certificate("cert N2\nseg 0 1\ncyc 2 exp 5\nseg 3\n").expect("valid");
    assert_eq!(
        c.scheme.segments,
        vec![Segment::Plain(vec![0, 1]), Segment::Star(vec![2]), Segment::Plain(vec![3])]
    );
    assert_eq!(c.exponents, vec![BigUint::from(5u32)]);

    // unbounded decimal exponents
    let huge = BigUint::from(10u32).pow(100);
    let text = format!("cert N2\ncyc 0 exp {huge}\n");
    let c = parse_certificate(&text).expect("valid");
    assert_eq!(c.exponents, vec![huge]);
    assert_eq!(serialize_certificate(&c), text);
}

#[test]
fn certificate_parse_errors() {
    assert!(parse_certificate("").is_err(), "missing header");
    assert!(parse_certificate("cert N2\n").is_err(), "no segments");
    assert_eq!(parse_certificate("seg 0\n").unwrap_err().line, 1);
    assert_eq!(parse_certificate("cert N2\ncyc 0\n").unwrap_err().line, 2, "missing exp");
    assert_eq!(parse_certificate("cert N2\ncyc exp 3\n").unwrap_err().line, 2, "empty cycle");
    assert_eq!(parse_certificate("cert N2\ncyc 0 exp -1\n").unwrap_err().line, 2);
    assert!(parse_certificate("cert moon\nseg\n").is_err(), "unknown region");
}

#[test]
fn certificate_roundtrip_is_identity() {
    let regions = [
        Region::NonNegative,
        Region::All,
        Region::LShape(7),
        Region::Outside(13),
        Region::Box(vec![Interval { lo: 0, hi: Some(9) }, Interval { lo: -2, hi: None }]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..60 {
        let region = regions[trial % regions.len()].clone();
        let mut segments = Vec::new();
        let mut exponents = Vec::new();
        for _ in 0..rng.gen_range(1..=6) {
            let steps: Vec<usize> = (0..rng.gen_range(0..=4)).map(|_| rng.gen_range(0..30)).collect();
            if !steps.is_empty() && rng.gen_bool(0.5) {
                segments.push(Segment::Star(steps));
                // exercise exponents far beyond machine integers
                let mut e = BigUint::from(rng.gen::<u64>());
                e = e.pow(rng.gen_range(1..=4));
                exponents.push(e);
            } else {
                segments.push(Segment::Plain(steps));
            }
        }
        let c = CertificateFile { region, scheme: LinearPathScheme { segments }, exponents };
        let text = serialize_certificate(&c);
        let c2 = parse_certificate(&text).expect("serialized form parses");
        assert_eq!(c, c2);
        assert_eq!(text, serialize_certificate(&c2));
    }
}
