use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use ucalc_core::balls::{all_level_points, partition_of_unity, subordinate_partition};
use ucalc_core::calculus::{dq1, DqPoint};
use ucalc_core::cia::{alg_inverse, alg_mul};
use ucalc_core::diffeo::{induced_level_map, invert_at, try_certify_omega, CertifiedDiffeo, OmegaMethod, OmegaWitness};
use ucalc_core::json::{self as js, DiffeoTable, Located};
use ucalc_core::suites::{run_suite, SuiteConfig};
use ucalc_core::weakprod::{conjugate_global, wp_inv, wp_mul};
use ucalc_core::{Error, PadicContext};

#[derive(Parser)]
#[command(name = "ucalc", version, about = "p-adic difference-quotient calculus and ball diffeomorphisms")]
struct Cli {
    /// Prime; inferred from the inputs when omitted.
    #[arg(long, global = true)]
    p: Option<u32>,
    /// Relative precision in p-adic digits.
    #[arg(long = "N", global = true, default_value_t = 12)]
    n: u32,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Residue level for exhaustive checks and certificates.
    #[arg(long = "verify-level", global = true, default_value_t = 3)]
    verify_level: u32,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Subordinate partition of a region and its partition of unity.
    Partition {
        #[arg(long)]
        region: PathBuf,
        /// A JSON array of regions.
        #[arg(long)]
        cover: PathBuf,
    },
    /// First difference quotient f^[1](x, y, t).
    Dq {
        #[arg(long = "fn")]
        func: PathBuf,
        /// Vector, inline JSON or a file.
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Scalar, inline JSON or a file.
        #[arg(long)]
        t: String,
    },
    /// Runs a seeded verification suite.
    Verify(VerifyArgs),
    /// Structure-constant algebras.
    #[command(subcommand)]
    Alg(AlgCmd),
    /// Ball endomorphisms: certification, inversion, induced permutations.
    #[command(subcommand)]
    Diffeo(DiffeoCmd),
    /// Weak-product elements read from a bundle.
    #[command(subcommand)]
    Wp(WpCmd),
    /// Parses a document and prints it in canonical form.
    Convert {
        file: PathBuf,
        /// scalar, vector, ball, region, function, algebra, endo or perm.
        #[arg(long)]
        from: String,
        /// Defaults to the input format.
        #[arg(long)]
        to: Option<String>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct VerifyArgs {
    suite: String,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    e: Option<usize>,
    #[arg(long)]
    deg: Option<u32>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Include wall time in the JSON report.
    #[arg(long)]
    timed: bool,
}

#[derive(Subcommand)]
enum AlgCmd {
    /// Inverse of an element of a structure-constant algebra.
    Invert {
        #[arg(long)]
        alg: PathBuf,
        #[arg(long)]
        elt: String,
    },
}

#[derive(Subcommand)]
enum DiffeoCmd {
    /// Decides the displacement certificate of a ball endomorphism.
    Certify {
        #[arg(long)]
        endo: PathBuf,
        #[arg(long)]
        level: Option<u32>,
    },
    /// Solves γ(x) = y by contraction.
    Invert {
        #[arg(long)]
        endo: PathBuf,
        #[arg(long)]
        y: String,
        #[arg(long, default_value_t = 12)]
        prec: i64,
    },
    /// Permutation of the level-m cosets induced by γ.
    Induced {
        #[arg(long)]
        endo: PathBuf,
        #[arg(long)]
        m: u32,
    },
}

/// Bundles hold `diffeos` (id → endo or file path), `index` (balls) and the
/// operands `a`, `b`, `eta`, `gamma`.
#[derive(Subcommand)]
enum WpCmd {
    Mul {
        #[arg(long)]
        bundle: PathBuf,
    },
    Inv {
        #[arg(long)]
        bundle: PathBuf,
    },
    Conjugate {
        #[arg(long)]
        bundle: PathBuf,
    },
}

/// Outcome of a command: a JSON document and whether its checks held.
struct Outcome {
    doc: Value,
    ok: bool,
    summary: String,
}

impl Outcome {
    fn pass(doc: Value, summary: impl Into<String>) -> Self {
        Outcome { doc, ok: true, summary: summary.into() }
    }
}

enum Failure {
    Usage(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } | Error::Invalid(_) | Error::UnknownSuite(_) | Error::ConfigInvalid(_) => Failure::Usage(e.to_string()),
            other => Failure::Check(other.to_string()),
        }
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn read_json(path: &Path) -> Res<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Inline JSON when the argument parses as JSON, a file path otherwise.
fn json_arg(arg: &str) -> Res<Value> {
    match serde_json::from_str(arg) {
        Ok(v) => Ok(v),
        Err(_) if Path::new(arg).exists() => read_json(Path::new(arg)),
        Err(e) => Err(Failure::Usage(format!("\"{arg}\" is neither JSON nor a file: {e}"))),
    }
}

fn context(cli: &Cli, docs: &[&Value]) -> Res<PadicContext> {
    let p = cli
        .p
        .or_else(|| docs.iter().find_map(|d| js::detect_prime(d)))
        .ok_or_else(|| Failure::Usage("cannot infer the prime from the inputs; pass --p".into()))?;
    Ok(PadicContext::new(p, cli.n)?)
}

fn run(cli: &Cli) -> Res<Outcome> {
    match &cli.cmd {
        Cmd::Partition { region, cover } => partition(cli, &read_json(region)?, &read_json(cover)?),
        Cmd::Dq { func, x, y, t } => {
            let (f, x, y, t) = (read_json(func)?, json_arg(x)?, json_arg(y)?, json_arg(t)?);
            let ctx = context(cli, &[&f, &x, &y, &t])?;
            let f = js::function_from_json(&ctx, Located::root(&f).node())?;
            let pt = DqPoint {
                x: js::vector_from_json(&ctx, Located::root(&x).node())?,
                y: js::vector_from_json(&ctx, Located::root(&y).node())?,
                t: js::scalar_from_json(&ctx, Located::root(&t).node())?,
            };
            let v = dq1(&f, &pt)?;
            Ok(Outcome::pass(js::vector_to_json(&v), format!("f^[1](x, y, t) = {v}")))
        }
        Cmd::Verify(a) => verify(cli, a),
        Cmd::Alg(AlgCmd::Invert { alg, elt }) => {
            let (a, e) = (read_json(alg)?, json_arg(elt)?);
            let ctx = context(cli, &[&a, &e])?;
            let a = js::algebra_from_json(&ctx, Located::root(&a).node())?;
            let x = js::vector_from_json(&ctx, Located::root(&e).node())?;
            if x.dim() != a.dim() {
                return Err(Failure::Usage(format!("element has {} coordinates, algebra dimension is {}", x.dim(), a.dim())));
            }
            let inv = alg_inverse(&a, x.coords())?;
            let prod = alg_mul(&a, x.coords(), &inv)?;
            let ok = prod.iter().zip(a.one()).all(|(u, v)| u.agrees(v));
            let inv = ucalc_core::PadicVector(inv);
            let summary = format!("inverse {inv}; x·x⁻¹ = 1 {}", if ok { "holds" } else { "FAILS" });
            Ok(Outcome { doc: json!({"inverse": js::vector_to_json(&inv), "checked": ok}), ok, summary })
        }
        Cmd::Diffeo(c) => diffeo(cli, c),
        Cmd::Wp(c) => wp(cli, c),
        Cmd::Convert { file, from, to, out } => {
            let v = read_json(file)?;
            if to.as_deref().is_some_and(|t| t != from) {
                return Err(Failure::Usage(format!("no conversion from {from} to {}", to.as_deref().unwrap_or(""))));
            }
            let ctx = context(cli, &[&v])?;
            let canon = js::canonicalize(&ctx, from, &v)?;
            if let Some(path) = out {
                let text = serde_json::to_string_pretty(&canon).expect("serializable");
                std::fs::write(path, text + "\n").map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                return Ok(Outcome::pass(Value::Null, format!("wrote {}", path.display())));
            }
            Ok(Outcome::pass(canon, format!("canonical {from}")))
        }
    }
}

fn partition(cli: &Cli, region: &Value, cover: &Value) -> Res<Outcome> {
    let ctx = context(cli, &[region, cover])?;
    let region = js::region_from_json(&ctx, Located::root(region).node(), None)?;
    let root = Located::root(cover);
    let cover = root
        .node()
        .items()?
        .iter()
        .map(|c| js::region_from_json(&ctx, c.node(), Some(region.dim())))
        .collect::<ucalc_core::Result<Vec<_>>>()?;
    let parts = subordinate_partition(&region, &cover)?;
    let hs = partition_of_unity(&region, &cover)?;

    // exhaustive check over the level-m residues of the ambient space
    let m = cli.verify_level.max(parts.iter().map(|(b, _)| b.level()).max().unwrap_or(0));
    let (p, d) = (region.p(), region.dim());
    let mut violations = Vec::new();
    for (b, i) in &parts {
        if !cover[*i].contains_ball(b) {
            violations.push(format!("{b} is not inside cover member {i}"));
        }
    }
    for z in all_level_points(p, d, m) {
        let inside = region.contains_residue(&z) as u32;
        let hits = parts.iter().filter(|(b, _)| b.contains_residue(&z)).count() as u32;
        let total: u32 = hs.iter().map(|h| h.eval_residue(&z)).sum();
        if hits != inside || total != inside {
            violations.push(format!("at {z:?}: {hits} pieces, indicator sum {total}, expected {inside}"));
        }
    }
    let ok = violations.is_empty();
    let doc = json!({
        "partition": parts.iter().map(|(b, i)| json!({"ball": js::ball_to_json(b, &ctx), "member": i})).collect::<Vec<_>>(),
        "indicators": hs.iter().map(|h| js::region_to_json(&h.support, &ctx)).collect::<Vec<_>>(),
        "verified": {"level": m, "violations": violations.len(), "first": violations.first()},
    });
    let summary = format!("{} pieces; level-{m} verification: {} violations", parts.len(), violations.len());
    Ok(Outcome { doc, ok, summary })
}

fn verify(cli: &Cli, a: &VerifyArgs) -> Res<Outcome> {
    let mut cfg = SuiteConfig { seed: cli.seed, n: cli.n, m: cli.verify_level, k: a.k, ..Default::default() };
    if let Some(p) = cli.p {
        cfg.p = p;
    }
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = a.$f { cfg.$f = v; })* };
    }
    set!(samples, d, e, deg, m, points);
    let report = run_suite(&a.suite, &cfg)?;
    Ok(Outcome { doc: report.to_json(a.timed), ok: report.ok(), summary: report.summary() })
}

fn diffeo(cli: &Cli, c: &DiffeoCmd) -> Res<Outcome> {
    let (path, extra) = match c {
        DiffeoCmd::Certify { endo, .. } | DiffeoCmd::Induced { endo, .. } => (endo, None),
        DiffeoCmd::Invert { endo, y, .. } => (endo, Some(json_arg(y)?)),
    };
    let doc = read_json(path)?;
    let mut docs = vec![&doc];
    docs.extend(extra.as_ref());
    let ctx = context(cli, &docs)?;
    let endo = js::endo_from_json(&ctx, Located::root(&doc).node())?;
    match c {
        DiffeoCmd::Certify { level, .. } => {
            let level = level.unwrap_or(cli.verify_level);
            Ok(match try_certify_omega(&endo, level) {
                Ok(cert) => {
                    let method = match cert.method {
                        OmegaMethod::CoefficientBound => json!("coefficient-bound"),
                        OmegaMethod::Exhaustive { level } => json!({"exhaustive": level}),
                    };
                    Outcome::pass(json!({"certified": true, "v_min": cert.v_min, "method": method}), "certified")
                }
                Err(r) => {
                    let witness = r.witness.as_ref().map(|w| match w {
                        OmegaWitness::Quotient { x, y, t } => json!({"quotient": {
                            "x": js::vector_to_json(x), "y": js::vector_to_json(y), "t": js::scalar_to_json(t)}}),
                        OmegaWitness::Displacement { x } => json!({"displacement": {"x": js::vector_to_json(x)}}),
                    });
                    let summary = format!("rejected: {}", r.reason);
                    Outcome { doc: json!({"certified": false, "reason": r.reason, "witness": witness}), ok: false, summary }
                }
            })
        }
        DiffeoCmd::Invert { prec, .. } => {
            let g = CertifiedDiffeo::new(endo, cli.verify_level)?;
            let y = js::vector_from_json(&ctx, Located::root(extra.as_ref().expect("parsed above")).node())?;
            let (x, iterations) = invert_at(&g, &y, *prec)?;
            let residual = g.gamma_mod(&x, *prec)?.diff_valuation(&y);
            let ok = residual >= ucalc_core::Val::Fin(*prec);
            let summary = format!("x = {x} after {iterations} iterations; v(γ(x) - y) = {residual}");
            Ok(Outcome { doc: json!({"x": js::vector_to_json(&x), "iterations": iterations}), ok, summary })
        }
        DiffeoCmd::Induced { m, .. } => {
            let g = CertifiedDiffeo::new(endo, cli.verify_level)?;
            let perm = induced_level_map(&g, *m)?;
            let summary = format!("permutation of {} cosets at level {m}", perm.len());
            Ok(Outcome::pass(js::perm_to_json(&perm), summary))
        }
    }
}

fn wp(cli: &Cli, c: &WpCmd) -> Res<Outcome> {
    let (WpCmd::Mul { bundle } | WpCmd::Inv { bundle } | WpCmd::Conjugate { bundle }) = c;
    let doc = read_json(bundle)?;
    let ctx = context(cli, &[&doc])?;
    let level = cli.verify_level;
    let base = bundle.parent().map(Path::to_path_buf).unwrap_or_default();
    let load = |file: &str| -> ucalc_core::Result<Value> {
        let path = base.join(file);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
    };
    let root = Located::root(&doc);
    let node = root.node();
    let table = match node.opt_field("diffeos")? {
        Some(t) => DiffeoTable::from_json(&ctx, t.node(), level, &load)?,
        None => DiffeoTable { by_id: Default::default() },
    };
    let index = js::index_from_json(&ctx, node.field("index")?.node())?;
    let element = |key: &str| -> Res<_> { Ok(js::element_from_json(&ctx, node.field(key)?.node(), &index, &table, level)?) };
    let result = match c {
        WpCmd::Mul { .. } => wp_mul(&element("a")?, &element("b")?)?,
        WpCmd::Inv { .. } => wp_inv(&element("a")?)?,
        WpCmd::Conjugate { .. } => {
            let gamma = js::global_from_json(&ctx, node.field("gamma")?.node(), &table, level)?;
            conjugate_global(&gamma, &element("eta")?)?
        }
    };
    let summary = format!("result supported on {} of {} balls", result.support().len(), result.index().len());
    let doc = json!({"index": js::index_to_json(result.index(), &ctx), "element": js::element_to_json(&result, &ctx)});
    Ok(Outcome::pass(doc, summary))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            if !out.doc.is_null() {
                println!("{}", serde_json::to_string_pretty(&out.doc).expect("serializable"));
            }
            eprintln!("{}", out.summary);
            if out.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
