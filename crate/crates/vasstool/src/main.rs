//! Command-line front end: decision procedures over instance files, with
//! verifiable certificate files and instance generators.
//!
//! Exit codes: `0` = reachable / true / verified, `1` = unreachable / false /
//! rejected, `2` = error, `3` = a resource cap was hit before a verdict.
//! Every command prints a report of `key: value` lines; `--json` prints the
//! same fields as one JSON object.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use vassflat::core::Region;
use vassflat::flatten::FlattenCaps;
use vassflat::format::{
    parse_certificate, parse_instance, serialize_certificate, serialize_instance, CertificateFile,
    Query,
};
use vassflat::gen::{gen_doubling_family, gen_random, graph_to_flat_2vass, Digraph};
use vassflat::solver::{
    big_config, bounded_with_pump, coverable, reach2_with, verify_report, Certificate, Decision,
    SolverCaps, SolverError, Strategy,
};
use vassflat::zreach::{z_reachable_with, ZOutcome, ZReachCaps};
use vassflat::Vass;

const YES: u8 = 0;
const NO: u8 = 1;
const ERROR: u8 = 2;
const GAVE_UP: u8 = 3;

#[derive(Parser)]
#[command(name = "vasstool", version, about = "Two-counter system analysis")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide reachability over the nonnegative quadrant for the instance's query.
    Reach {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
        strategy: StrategyArg,
        #[command(flatten)]
        common: Common,
        /// Where to write the certificate (default: instance path with `.cert`).
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Decide reachability over unrestricted integer counters.
    Zreach {
        instance: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Decide whether the query target is coverable from the query source.
    Cover {
        instance: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Decide whether the reachability set of the query source is finite.
    Bounded {
        instance: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Decide the query by flattening and report the witness scheme.
    Flatten {
        instance: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Check a certificate file against an instance and its query.
    Verify {
        instance: PathBuf,
        certificate: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Write generated instance files.
    Gen {
        #[command(subcommand)]
        what: GenCmd,
        /// Output path (default: stdout).
        #[arg(long, short, global = true)]
        out: Option<PathBuf>,
        #[arg(long, global = true)]
        json: bool,
    },
}

#[derive(clap::Args)]
struct Common {
    /// Override the node/candidate budgets of the decision procedure.
    #[arg(long)]
    caps: Option<usize>,
    /// Include the normalized instance in the report.
    #[arg(long)]
    dump_system: bool,
    /// Print the report as JSON instead of `key: value` lines.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Auto,
    BoundedSearch,
    Flatten,
}

#[derive(Subcommand)]
enum GenCmd {
    /// Random connected system.
    Random {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        states: usize,
        #[arg(long)]
        trans: usize,
        #[arg(long, default_value_t = 2)]
        norm: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Digraph-reachability instance: a random digraph with `m` vertices and
    /// `n` edges encoded as a flat two-counter system with a query.
    Graph {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Doubling-family instance: witnesses drive a counter to 2^n.
    Doubling {
        #[arg(long)]
        n: usize,
    },
}

/// Ordered report printed as text lines or mirrored field-for-field in JSON.
#[derive(Default)]
struct Report {
    fields: Vec<(&'static str, String)>,
}

impl Report {
    fn add(&mut self, key: &'static str, value: impl ToString) {
        self.fields.push((key, value.to_string()));
    }

    fn print(&self, json: bool) {
        if json {
            let mut obj = serde_json::Map::new();
            for (k, v) in &self.fields {
                obj.insert((*k).into(), serde_json::Value::String(v.clone()));
            }
            println!("{}", serde_json::Value::Object(obj));
        } else {
            for (k, v) in &self.fields {
                if v.contains('\n') {
                    println!("{k}:");
                    for line in v.lines() {
                        println!("  {line}");
                    }
                } else {
                    println!("{k}: {v}");
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(ERROR)
        }
    }
}

fn run(cmd: Cmd) -> Result<u8, String> {
    match cmd {
        Cmd::Reach { instance, strategy, common, cert } => {
            let (v, from, to, mut report) = load_with_query(&instance, &common, "reach")?;
            let caps = solver_caps(common.caps);
            let strategy = match strategy {
                StrategyArg::Auto => Strategy::Auto,
                StrategyArg::BoundedSearch => Strategy::BoundedSearch,
                StrategyArg::Flatten => Strategy::Flatten,
            };
            let outcome = reach2_with(&v, &from, &to, strategy, &caps);
            finish_reach(outcome, &instance, cert, &mut report, common.json)
        }
        Cmd::Zreach { instance, common, cert } => {
            let (v, from, to, mut report) = load_with_query(&instance, &common, "zreach")?;
            let caps = ZReachCaps {
                max_candidates: common.caps.map_or(ZReachCaps::default().max_candidates, |c| {
                    c as u64
                }),
            };
            let code = match z_reachable_with(&v, &from, &to, &caps).map_err(|e| e.to_string())? {
                ZOutcome::Reachable(zc) => {
                    let path = write_certificate(
                        &instance,
                        cert,
                        &CertificateFile {
                            region: Region::All,
                            scheme: zc.scheme,
                            exponents: zc.exponents.iter().map(|&e| BigUint::from(e)).collect(),
                        },
                    )?;
                    report.add("verdict", "reachable");
                    report.add("certificate", path.display());
                    YES
                }
                ZOutcome::Unreachable => {
                    report.add("verdict", "unreachable");
                    NO
                }
                ZOutcome::GiveUp => {
                    report.add("verdict", "resource-cap");
                    GAVE_UP
                }
            };
            report.print(common.json);
            Ok(code)
        }
        Cmd::Cover { instance, common } => {
            let (v, from, to, mut report) = load_with_query(&instance, &common, "cover")?;
            let (covered, witness) = coverable(&v, &from, &to).map_err(|e| e.to_string())?;
            let code = if covered {
                report.add("verdict", "coverable");
                let w = witness.expect("positive verdicts carry a witness path");
                report.add(
                    "witness",
                    w.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" "),
                );
                YES
            } else {
                report.add("verdict", "uncoverable");
                NO
            };
            report.print(common.json);
            Ok(code)
        }
        Cmd::Bounded { instance, common } => {
            let (v, from, _, mut report) = load_with_query(&instance, &common, "bounded")?;
            let code = match bounded_with_pump(&v, &from).map_err(|e| e.to_string())? {
                None => {
                    report.add("verdict", "bounded");
                    YES
                }
                Some(pump) => {
                    report.add("verdict", "unbounded");
                    let fmt = |p: &[usize]| {
                        p.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")
                    };
                    report.add("pump-prefix", fmt(&pump.prefix));
                    report.add("pump-cycle", fmt(&pump.cycle));
                    NO
                }
            };
            report.print(common.json);
            Ok(code)
        }
        Cmd::Flatten { instance, common, cert } => {
            let (v, from, to, mut report) = load_with_query(&instance, &common, "flatten")?;
            let caps = solver_caps(common.caps);
            let outcome = reach2_with(&v, &from, &to, Strategy::Flatten, &caps);
            finish_reach(outcome, &instance, cert, &mut report, common.json)
        }
        Cmd::Verify { instance, certificate, json } => {
            let text = read(&instance)?;
            let (v, query) = parse_instance(&text).map_err(|e| e.to_string())?;
            let (from, to) =
                query.ok_or_else(|| "instance has no `query` to verify against".to_string())?;
            let cf = parse_certificate(&read(&certificate)?).map_err(|e| e.to_string())?;
            let cert = Certificate {
                scheme: cf.scheme,
                exponents: cf.exponents,
                region: cf.region,
                from: big_config(&from),
                to: big_config(&to),
            };
            let mut report = Report::default();
            report.add("command", "verify");
            report.add("instance", instance.display());
            report.add("certificate", certificate.display());
            let code = match verify_report(&v, &cert) {
                Ok(()) => {
                    report.add("verdict", "verified");
                    YES
                }
                Err(f) => {
                    report.add("verdict", "rejected");
                    if let Some(seg) = f.segment {
                        report.add("segment", seg);
                    }
                    report.add("reason", f.reason);
                    NO
                }
            };
            report.print(json);
            Ok(code)
        }
        Cmd::Gen { what, out, json } => {
            let mut report = Report::default();
            report.add("command", "gen");
            let (text, label) = match what {
                GenCmd::Random { dim, states, trans, norm, seed } => {
                    let v = gen_random(dim, states, trans, norm, seed)
                        .map_err(|e| e.to_string())?;
                    (serialize_instance(&v, None), "random")
                }
                GenCmd::Graph { m, n, seed } => {
                    if m < 1 || n < 1 {
                        return Err("graph generation needs m >= 1 and n >= 1".into());
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let edges =
                        (0..n).map(|_| (rng.gen_range(0..m), rng.gen_range(0..m))).collect();
                    let g = Digraph { num_vertices: m, edges };
                    let (v, from, to) = graph_to_flat_2vass(&g);
                    (serialize_instance(&v, Some(&(from, to))), "graph")
                }
                GenCmd::Doubling { n } => {
                    if n < 1 {
                        return Err("doubling family needs n >= 1".into());
                    }
                    let inst = gen_doubling_family(n);
                    (serialize_instance(&inst.vass, Some(&(inst.from, inst.to))), "doubling")
                }
            };
            report.add("family", label);
            match out {
                Some(path) => {
                    std::fs::write(&path, &text)
                        .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
                    report.add("instance", path.display());
                    report.print(json);
                }
                None => {
                    report.print(json);
                    print!("{text}");
                }
            }
            Ok(YES)
        }
    }
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

/// Parses an instance that must carry a query and starts its report.
fn load_with_query(
    path: &Path,
    common: &Common,
    command: &'static str,
) -> Result<(Vass<i64>, vassflat::Config64, vassflat::Config64, Report), String> {
    let (v, query) = parse_instance(&read(path)?).map_err(|e| e.to_string())?;
    let (from, to) = query.ok_or_else(|| format!("{command} needs a `query` in the instance"))?;
    let mut report = Report::default();
    report.add("command", command);
    report.add("instance", path.display());
    if common.dump_system {
        let q: Query = (from.clone(), to.clone());
        report.add("system", serialize_instance(&v, Some(&q)).trim_end());
    }
    Ok((v, from, to, report))
}

fn solver_caps(budget: Option<usize>) -> SolverCaps {
    let mut caps = SolverCaps::default();
    if let Some(b) = budget {
        caps.search_nodes = b;
        caps.flatten = FlattenCaps {
            scheme_budget: b,
            flat_candidate_budget: b,
            quick_nodes: b,
            fallback_nodes: b,
            ..FlattenCaps::default()
        };
    }
    caps
}

fn finish_reach(
    outcome: Result<Decision, SolverError>,
    instance: &Path,
    cert: Option<PathBuf>,
    report: &mut Report,
    json: bool,
) -> Result<u8, String> {
    let code = match outcome {
        Ok(Decision::Reachable(c)) => {
            let path = write_certificate(
                instance,
                cert,
                &CertificateFile {
                    region: c.region.clone(),
                    scheme: c.scheme.clone(),
                    exponents: c.exponents.clone(),
                },
            )?;
            report.add("verdict", "reachable");
            report.add("cycles", c.scheme.cycle_count());
            report.add("certificate", path.display());
            YES
        }
        Ok(Decision::Unreachable) => {
            report.add("verdict", "unreachable");
            NO
        }
        Err(SolverError::ResourceCap) => {
            report.add("verdict", "resource-cap");
            GAVE_UP
        }
        Err(e) => return Err(e.to_string()),
    };
    report.print(json);
    Ok(code)
}

fn write_certificate(
    instance: &Path,
    explicit: Option<PathBuf>,
    cert: &CertificateFile,
) -> Result<PathBuf, String> {
    let path = explicit.unwrap_or_else(|| instance.with_extension("cert"));
    std::fs::write(&path, serialize_certificate(cert))
        .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    Ok(path)
}
