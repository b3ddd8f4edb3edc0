//! Line-based text formats for systems and certificates.
//!
//! Both formats are diff-friendly: one declaration per line, unbounded
//! decimal integers, `#` comments. Parsing and serialization are mutually
//! inverse — serializing a parsed file yields a normalized form that parses
//! back to the identical value.

use num_bigint::BigUint;

use crate::core::{Configuration, Interval, LinearPathScheme, Region, Segment, StateId, Vass};

/// A syntax or consistency error, located by 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    pub line: usize,
    pub reason: String,
}

fn err<T>(line: usize, reason: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, reason: reason.into() })
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// The optional `query` line of an instance file: claimed endpoints.
pub type Query = (Configuration<i64>, Configuration<i64>);

/// Parses an instance file.
///
/// Grammar, one declaration per line (`#` starts a comment, blank lines are
/// skipped):
///
/// ```text
/// vass <d>
/// state <name>
/// trans <src> <dst> <z1> ... <zd>
/// query <p> <u1> ... <ud> -> <q> <v1> ... <vd>
/// ```
///
/// The `vass` header comes first; state names match
/// `[A-Za-z_][A-Za-z0-9_]*`; transition updates are signed decimals of the
/// header's arity; duplicate transitions are kept in declaration order; at
/// most one `query`.
pub fn parse_instance(text: &str) -> Result<(Vass<i64>, Option<Query>), ParseError> {
    let mut v: Option<Vass<i64>> = None;
    let mut names: Vec<String> = Vec::new();
    let mut query = None;
    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let lookup = |name: &str| -> Result<StateId, ParseError> {
            match names.iter().position(|n| n == name) {
                Some(q) => Ok(q),
                None => err(ln, format!("unknown state `{name}`")),
            }
        };
        match tokens[0] {
            "vass" => {
                if v.is_some() {
                    return err(ln, "duplicate `vass` header");
                }
                if tokens.len() != 2 {
                    return err(ln, "expected `vass <d>`");
                }
                let d: usize = match tokens[1].parse() {
                    Ok(d) if d >= 1 => d,
                    _ => return err(ln, "dimension must be a positive integer"),
                };
                v = Some(Vass::new(d));
            }
            "state" => {
                let v = match v.as_mut() {
                    Some(v) => v,
                    None => return err(ln, "`state` before `vass` header"),
                };
                if tokens.len() != 2 {
                    return err(ln, "expected `state <name>`");
                }
                let name = tokens[1];
                if !valid_name(name) {
                    return err(ln, format!("invalid state name `{name}`"));
                }
                if names.iter().any(|n| n == name) {
                    return err(ln, format!("duplicate state `{name}`"));
                }
                v.add_state(name);
                names.push(name.to_string());
            }
            "trans" => {
                let dim = match v.as_ref() {
                    Some(v) => v.dim(),
                    None => return err(ln, "`trans` before `vass` header"),
                };
                if tokens.len() != 3 + dim {
                    return err(
                        ln,
                        format!("expected `trans <src> <dst>` and {dim} update entries"),
                    );
                }
                let src = lookup(tokens[1])?;
                let dst = lookup(tokens[2])?;
                let update = parse_ints(&tokens[3..], ln)?;
                v.as_mut().unwrap().add_transition(src, update, dst);
            }
            "query" => {
                let dim = match v.as_ref() {
                    Some(v) => v.dim(),
                    None => return err(ln, "`query` before `vass` header"),
                };
                if query.is_some() {
                    return err(ln, "duplicate `query`");
                }
                if tokens.len() != 4 + 2 * dim || tokens[2 + dim] != "->" {
                    return err(
                        ln,
                        format!("expected `query <p> <{dim} entries> -> <q> <{dim} entries>`"),
                    );
                }
                let p = lookup(tokens[1])?;
                let u = parse_ints(&tokens[2..2 + dim], ln)?;
                let q = lookup(tokens[3 + dim])?;
                let w = parse_ints(&tokens[4 + dim..], ln)?;
                query = Some((Configuration::new(p, u), Configuration::new(q, w)));
            }
            other => return err(ln, format!("unknown declaration `{other}`")),
        }
    }
    match v {
        Some(v) => Ok((v, query)),
        None => err(text.lines().count() + 1, "missing `vass` header"),
    }
}

fn parse_ints(tokens: &[&str], ln: usize) -> Result<Vec<i64>, ParseError> {
    tokens
        .iter()
        .map(|t| t.parse().or_else(|_| err(ln, format!("invalid integer `{t}`"))))
        .collect()
}

/// Normalized text form of an instance: header, states in declaration order,
/// transitions in declaration order, then the query if present.
pub fn serialize_instance(v: &Vass<i64>, query: Option<&Query>) -> String {
    let mut out = format!("vass {}\n", v.dim());
    for name in v.states() {
        out.push_str(&format!("state {name}\n"));
    }
    for t in v.transitions() {
        out.push_str(&format!("trans {} {}", v.states()[t.src], v.states()[t.dst]));
        for z in &t.update {
            out.push_str(&format!(" {z}"));
        }
        out.push('\n');
    }
    if let Some((from, to)) = query {
        out.push_str(&format!("query {}", v.states()[from.state]));
        for z in &from.counters {
            out.push_str(&format!(" {z}"));
        }
        out.push_str(&format!(" -> {}", v.states()[to.state]));
        for z in &to.counters {
            out.push_str(&format!(" {z}"));
        }
        out.push('\n');
    }
    out
}

/// The scheme part of a reachability certificate, as stored in a certificate
/// file: the endpoints come from the accompanying instance's `query` line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertificateFile {
    pub region: Region<i64>,
    pub scheme: LinearPathScheme,
    /// One unbounded decimal exponent per `cyc` line, in order.
    pub exponents: Vec<BigUint>,
}

/// Parses a certificate file.
///
/// Format: a `cert <region>` header, then one line per scheme segment —
/// `seg <t-index ...>` for a plain path, `cyc <t-index ...> exp <decimal>`
/// for a starred cycle with its exponent. Exponents are unbounded decimals.
/// The empty-run certificate is `cert N2` plus a single bare `seg`.
///
/// Regions: `N2` (nonnegative quadrant), `Z2` (unconstrained),
/// `box <lo> <hi> <lo> <hi>` (`inf` for an unbounded upper end),
/// `lshape <D>`, `outside <D>`.
pub fn parse_certificate(text: &str) -> Result<CertificateFile, ParseError> {
    let mut region = None;
    let mut segments = Vec::new();
    let mut exponents = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "cert" => {
                if region.is_some() {
                    return err(ln, "duplicate `cert` header");
                }
                region = Some(parse_region(&tokens[1..], ln)?);
            }
            "seg" => {
                if region.is_none() {
                    return err(ln, "`seg` before `cert` header");
                }
                segments.push(Segment::Plain(parse_indices(&tokens[1..], ln)?));
            }
            "cyc" => {
                if region.is_none() {
                    return err(ln, "`cyc` before `cert` header");
                }
                let exp_at = match tokens.iter().position(|&t| t == "exp") {
                    Some(i) => i,
                    None => return err(ln, "`cyc` line needs `exp <decimal>`"),
                };
                if exp_at + 2 != tokens.len() {
                    return err(ln, "expected a single decimal after `exp`");
                }
                let steps = parse_indices(&tokens[1..exp_at], ln)?;
                if steps.is_empty() {
                    return err(ln, "`cyc` needs at least one transition index");
                }
                let e: BigUint = match tokens[exp_at + 1].parse() {
                    Ok(e) => e,
                    Err(_) => return err(ln, format!("invalid exponent `{}`", tokens[exp_at + 1])),
                };
                segments.push(Segment::Star(steps));
                exponents.push(e);
            }
            other => return err(ln, format!("unknown declaration `{other}`")),
        }
    }
    match region {
        Some(region) if !segments.is_empty() => {
            Ok(CertificateFile { region, scheme: LinearPathScheme { segments }, exponents })
        }
        Some(_) => err(text.lines().count() + 1, "certificate needs at least one segment line"),
        None => err(text.lines().count() + 1, "missing `cert` header"),
    }
}

fn parse_indices(tokens: &[&str], ln: usize) -> Result<Vec<usize>, ParseError> {
    tokens
        .iter()
        .map(|t| t.parse().or_else(|_| err(ln, format!("invalid transition index `{t}`"))))
        .collect()
}

fn parse_region(tokens: &[&str], ln: usize) -> Result<Region<i64>, ParseError> {
    match tokens {
        ["N2"] => Ok(Region::NonNegative),
        ["Z2"] => Ok(Region::All),
        ["lshape", d] | ["outside", d] => {
            let d: i64 = match d.parse() {
                Ok(d) => d,
                Err(_) => return err(ln, format!("invalid threshold `{d}`")),
            };
            Ok(if tokens[0] == "lshape" { Region::LShape(d) } else { Region::Outside(d) })
        }
        ["box", rest @ ..] if rest.len() == 4 => {
            let mut ends = rest.iter();
            let mut next_interval = || -> Result<Interval<i64>, ParseError> {
                let lo = ends.next().unwrap();
                let hi = ends.next().unwrap();
                let lo: i64 = lo
                    .parse()
                    .or_else(|_| err(ln, format!("invalid bound `{lo}`")))?;
                let hi = match *hi {
                    "inf" => None,
                    h => Some(h.parse().or_else(|_| err(ln, format!("invalid bound `{h}`")))?),
                };
                Ok(Interval { lo, hi })
            };
            Ok(Region::Box(vec![next_interval()?, next_interval()?]))
        }
        _ => err(ln, "unknown region; expected N2, Z2, box, lshape or outside"),
    }
}

/// Inverse of [`parse_certificate`]; an empty scheme serializes as the
/// empty-run certificate (a single bare `seg` line, parsing back to one empty
/// plain segment).
pub fn serialize_certificate(c: &CertificateFile) -> String {
    let mut out = format!("cert {}\n", region_text(&c.region));
    if c.scheme.segments.is_empty() {
        out.push_str("seg\n");
        return out;
    }
    let mut exps = c.exponents.iter();
    for seg in &c.scheme.segments {
        match seg {
            Segment::Plain(steps) => {
                out.push_str("seg");
                for t in steps {
                    out.push_str(&format!(" {t}"));
                }
                out.push('\n');
            }
            Segment::Star(steps) => {
                out.push_str("cyc");
                for t in steps {
                    out.push_str(&format!(" {t}"));
                }
                let e = exps.next().expect("one exponent per starred cycle");
                out.push_str(&format!(" exp {e}\n"));
            }
        }
    }
    out
}

fn region_text(r: &Region<i64>) -> String {
    match r {
        Region::NonNegative => "N2".into(),
        Region::All => "Z2".into(),
        Region::LShape(d) => format!("lshape {d}"),
        Region::Outside(d) => format!("outside {d}"),
        Region::Box(iv) => {
            let end = |i: &Interval<i64>| match i.hi {
                Some(h) => format!("{} {h}", i.lo),
                None => format!("{} inf", i.lo),
            };
            assert_eq!(iv.len(), 2, "certificate regions are two-dimensional");
            format!("box {} {}", end(&iv[0]), end(&iv[1]))
        }
        Region::Intersection(_, _) => {
            panic!("intersection regions have no certificate syntax")
        }
    }
}
