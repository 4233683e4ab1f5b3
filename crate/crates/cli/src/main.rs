//! `vlam`: typecheck, normalise, prove and model-check linear Vλ-theories.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use vlam_core::deduction::{self, Outcome, SearchBudget};
use vlam_core::models::{self, Model};
use vlam_core::theory::{parse_goal, parse_judgement};
use vlam_core::{load_theory, typecheck, FinVCat, QuantaleSpec, Theory};

#[derive(Parser)]
#[command(name = "vlam", version, about = "Linear λ-calculus with quantale-valued equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Quantale for files that do not declare one; must agree with those that do.
    #[arg(long, global = true)]
    quantale: Option<QuantaleSpec>,
    /// Maximum proof depth for `check` and `bound`.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Maximum rewrite steps when normalising.
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Print proof traces and rewrite steps.
    #[arg(long, global = true)]
    trace: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Typecheck a theory file, or one judgement `ctx |- v` against it.
    Typecheck {
        file: PathBuf,
        #[arg(allow_hyphen_values = true)]
        judgement: Option<String>,
    },
    /// Normalise `ctx |- v` with the βη and commuting conversions.
    Normalize {
        theory: PathBuf,
        #[arg(allow_hyphen_values = true)]
        judgement: String,
    },
    /// Search for a proof of `ctx |- v ={q} w` (or `v <= w`).
    Check {
        theory: PathBuf,
        #[arg(allow_hyphen_values = true)]
        goal: String,
    },
    /// The best label found for `ctx |- v ~ w`.
    Bound {
        theory: PathBuf,
        #[arg(allow_hyphen_values = true)]
        pair: String,
    },
    /// Check every axiom of a theory in a finite model.
    ModelCheck { theory: PathBuf, model: PathBuf },
    /// Print the denotation of `ctx |- v` in a model.
    Eval {
        theory: PathBuf,
        model: PathBuf,
        #[arg(allow_hyphen_values = true)]
        judgement: String,
    },
    /// Separated quotient of a finite V-category file.
    Quotient { file: PathBuf },
}

/// What a command prints, and whether it succeeded.
struct Report {
    text: String,
    json: Value,
    ok: bool,
}

type Res<T> = Result<T, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(r) => {
            match cli.format {
                Format::Text => print!("{}", r.text),
                Format::Json => println!("{}", serde_json::to_string_pretty(&r.json).expect("json")),
            }
            if r.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            match cli.format {
                Format::Text => eprintln!("error: {e}"),
                Format::Json => println!("{}", json!({ "status": "error", "error": e })),
            }
            ExitCode::from(2)
        }
    }
}

fn read(path: &Path) -> Res<String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn declares_quantale(text: &str) -> bool {
    text.lines()
        .any(|l| l.split('#').next().unwrap_or("").split_whitespace().next() == Some("quantale"))
}

/// Adds `quantale Q` from the flag when the file lacks one.
fn with_quantale(cli: &Cli, text: String) -> String {
    match cli.quantale {
        Some(q) if !declares_quantale(&text) => format!("quantale {q}\n{text}"),
        _ => text,
    }
}

fn theory(cli: &Cli, path: &Path) -> Res<Theory> {
    let text = with_quantale(cli, read(path)?);
    let t = load_theory(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(q) = cli.quantale {
        if q != t.quantale {
            return Err(format!("{}: theory is over {}, not {q}", path.display(), t.quantale));
        }
    }
    Ok(t)
}

fn model(cli: &Cli, t: &Theory, path: &Path) -> Res<Model> {
    let text = read(path)?;
    let text = if t.quantale != QuantaleSpec::Lawvere && !declares_quantale(&text) {
        format!("quantale {}\n{text}", t.quantale)
    } else {
        with_quantale(cli, text)
    };
    models::load_model(&text, &t.signature).map_err(|e| format!("{}: {e}", path.display()))
}

fn budget(cli: &Cli) -> SearchBudget {
    let mut b = SearchBudget::default();
    if let Some(d) = cli.depth {
        b.max_depth = d;
    }
    if let Some(s) = cli.steps {
        b.max_rewrite_steps = s;
    }
    b
}

fn run(cli: &Cli) -> Res<Report> {
    match &cli.command {
        Command::Typecheck { file, judgement } => typecheck_cmd(cli, file, judgement.as_deref()),
        Command::Normalize { theory: t, judgement } => normalize_cmd(cli, &theory(cli, t)?, judgement),
        Command::Check { theory: t, goal } => check_cmd(cli, &theory(cli, t)?, goal),
        Command::Bound { theory: t, pair } => bound_cmd(cli, &theory(cli, t)?, pair),
        Command::ModelCheck { theory: t, model: m } => {
            let t = theory(cli, t)?;
            let m = model(cli, &t, m)?;
            model_check_cmd(&t, &m)
        }
        Command::Eval { theory: t, model: m, judgement } => {
            let t = theory(cli, t)?;
            let m = model(cli, &t, m)?;
            eval_cmd(&t, &m, judgement)
        }
        Command::Quotient { file } => quotient_cmd(cli, file),
    }
}

fn typecheck_cmd(cli: &Cli, file: &Path, judgement: Option<&str>) -> Res<Report> {
    let t = theory(cli, file)?;
    let mut text = String::new();
    let mut derivs = Vec::new();
    let targets: Vec<(String, vlam_core::Context, vlam_core::Term)> = match judgement {
        Some(j) => {
            let (ctx, v) = parse_judgement(&t, j).map_err(|e| e.to_string())?;
            vec![(j.trim().to_string(), ctx, v)]
        }
        None => t
            .defs
            .iter()
            .map(|(name, (v, _))| (name.clone(), vlam_core::Context::empty(), v.clone()))
            .collect(),
    };
    for (name, ctx, v) in targets {
        let d = typecheck::infer(&t.signature, &ctx, &v).map_err(|e| format!("{name}: {e}"))?;
        let _ = writeln!(text, "{name} : {}", d.ty);
        text.push_str(&d.render());
        derivs.push(json!({ "name": name, "type": d.ty.to_string(), "derivation": d.render() }));
    }
    if judgement.is_none() {
        let _ = writeln!(
            text,
            "ok: {} operations, {} axioms, {} definitions",
            t.signature.ops().count(),
            t.axioms.len(),
            t.defs.len()
        );
    }
    Ok(Report {
        text,
        json: json!({
            "status": "ok",
            "quantale": t.quantale.to_string(),
            "operations": t.signature.ops().count(),
            "axioms": t.axioms.len(),
            "derivations": derivs,
        }),
        ok: true,
    })
}

fn normalize_cmd(cli: &Cli, t: &Theory, judgement: &str) -> Res<Report> {
    let (ctx, v) = parse_judgement(t, judgement).map_err(|e| e.to_string())?;
    let ty = typecheck::infer(&t.signature, &ctx, &v).map_err(|e| e.to_string())?.ty;
    let n = deduction::normalize(&v, budget(cli).max_rewrite_steps);
    let mut text = String::new();
    if cli.trace {
        for s in &n.steps {
            let _ = writeln!(text, "  {s}");
        }
    }
    let _ = writeln!(text, "{ctx} |- {} : {ty}", n.term);
    if n.exhausted {
        let _ = writeln!(text, "step budget exhausted after {} steps", n.steps.len());
    }
    Ok(Report {
        text,
        json: json!({
            "status": if n.exhausted { "exhausted" } else { "normal" },
            "term": n.term.to_string(),
            "type": ty.to_string(),
            "steps": n.steps.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        }),
        ok: !n.exhausted,
    })
}

fn check_cmd(cli: &Cli, t: &Theory, goal: &str) -> Res<Report> {
    let g = parse_goal(t, goal).map_err(|e| e.to_string())?;
    let eq = g.equation().ok_or("`check` needs a labelled goal `ctx |- v ={q} w`; use `bound` for `~`")?;
    let out = deduction::check_eq(t, &eq, budget(cli)).map_err(|e| e.to_string())?;
    let mut text = String::new();
    let json = match &out {
        Outcome::Proved(p) => {
            text.push_str("PROVED\n");
            if cli.trace {
                text.push_str(&p.render());
            }
            json!({
                "status": "proved",
                "label": eq.label.to_string(),
                "trace": cli.trace.then(|| p.render()),
                "size": p.size(),
            })
        }
        Outcome::Unknown => {
            text.push_str("UNKNOWN\n");
            json!({ "status": "unknown", "label": eq.label.to_string() })
        }
    };
    Ok(Report {
        text,
        json,
        ok: out.is_proved(),
    })
}

fn bound_cmd(cli: &Cli, t: &Theory, pair: &str) -> Res<Report> {
    let g = parse_goal(t, pair).map_err(|e| e.to_string())?;
    if g.label.is_some() {
        return Err("`bound` takes an unlabelled pair `ctx |- v ~ w`".into());
    }
    let p = deduction::best_bound_trace(t, &g.ctx, &g.lhs, &g.rhs, budget(cli)).map_err(|e| e.to_string())?;
    let mut text = format!("{}\n", p.label());
    if cli.trace {
        text.push_str(&p.render());
    }
    Ok(Report {
        text,
        json: json!({
            "status": "ok",
            "label": p.label().to_string(),
            "trace": cli.trace.then(|| p.render()),
        }),
        ok: true,
    })
}

fn model_check_cmd(t: &Theory, m: &Model) -> Res<Report> {
    let r = models::check_model(m, t).map_err(|e| e.to_string())?;
    let mut text = String::new();
    for c in r.failures() {
        let _ = writeln!(text, "FAIL #{} {}: distance {} above {}", c.index, c.axiom, c.distance, c.label);
    }
    for (i, syms) in &r.skipped {
        let _ = writeln!(text, "skip #{i}: uninterpreted {}", syms.join(", "));
    }
    let failed = r.failures().count();
    let _ = writeln!(
        text,
        "{}: {} checked, {} failed, {} skipped",
        if r.satisfied() { "SATISFIED" } else { "UNSATISFIED" },
        r.checked.len(),
        failed,
        r.skipped.len()
    );
    Ok(Report {
        text,
        json: json!({
            "status": if r.satisfied() { "satisfied" } else { "unsatisfied" },
            "backend": m.backend_name(),
            "checked": r.checked.len(),
            "failures": r.failures().map(|c| json!({
                "index": c.index,
                "axiom": c.axiom,
                "label": c.label.to_string(),
                "distance": c.distance.to_string(),
            })).collect::<Vec<_>>(),
            "skipped": r.skipped.iter().map(|(i, s)| json!({ "index": i, "symbols": s })).collect::<Vec<_>>(),
        }),
        ok: r.satisfied(),
    })
}

fn eval_cmd(t: &Theory, m: &Model, judgement: &str) -> Res<Report> {
    let (ctx, v) = parse_judgement(t, judgement).map_err(|e| e.to_string())?;
    let f = m.denote_judgement(&ctx, &v).map_err(|e| e.to_string())?;
    let shown = f.to_string();
    Ok(Report {
        text: format!("{shown}\n"),
        json: json!({ "status": "ok", "backend": m.backend_name(), "denotation": shown }),
        ok: true,
    })
}

/// `quantale Q`, `points a b c`, then `d a b = q` (one direction) or
/// `dist a b = q` (both); missing pairs are ⊥ and the diagonal is ⊤.
fn parse_vcat(text: &str) -> Res<FinVCat> {
    let mut spec = None;
    let mut points: Option<Vec<String>> = None;
    let mut entries = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let Some((kw, rest)) = line.split_once(char::is_whitespace).or((!line.is_empty()).then_some((line, ""))) else {
            continue;
        };
        let at = |m: String| format!("line {}: {m}", n + 1);
        match kw {
            "quantale" => spec = Some(rest.trim().parse::<QuantaleSpec>().map_err(|e| at(e.to_string()))?),
            "points" => points = Some(rest.split_whitespace().map(str::to_string).collect()),
            "d" | "dist" => {
                let (lhs, q) = rest.split_once('=').ok_or_else(|| at("expected `d a b = q`".into()))?;
                let w: Vec<&str> = lhs.split_whitespace().collect();
                let [a, b] = w.as_slice() else {
                    return Err(at("expected `d a b = q`".into()));
                };
                entries.push((n + 1, a.to_string(), b.to_string(), q.trim().to_string(), kw == "dist"));
            }
            other => return Err(at(format!("unknown directive `{other}`"))),
        }
    }
    let spec = spec.ok_or("missing `quantale`")?;
    let points = points.ok_or("missing `points`")?;
    let k = points.len();
    let mut table = vec![spec.bottom(); k * k];
    for i in 0..k {
        table[i * k + i] = spec.top();
    }
    for (line, a, b, q, sym) in entries {
        let pos = |p: &str| {
            points
                .iter()
                .position(|x| x == p)
                .ok_or_else(|| format!("line {line}: unknown point `{p}`"))
        };
        let (i, j) = (pos(&a)?, pos(&b)?);
        let q = spec.parse_value(&q).map_err(|e| format!("line {line}: {e}"))?;
        table[i * k + j] = q.clone();
        if sym {
            table[j * k + i] = q;
        }
    }
    FinVCat::new(spec, points, table).map_err(|e| e.to_string())
}

fn quotient_cmd(cli: &Cli, file: &Path) -> Res<Report> {
    let c = parse_vcat(&with_quantale(cli, read(file)?)).map_err(|e| format!("{}: {e}", file.display()))?;
    if let Some(q) = cli.quantale {
        if q != c.spec() {
            return Err(format!("{}: file is over {}, not {q}", file.display(), c.spec()));
        }
    }
    let (qc, proj) = c.separated_quotient();
    let classes: Vec<Vec<&str>> = (0..qc.len())
        .map(|k| {
            (0..c.len())
                .filter(|&x| proj.apply(x) == k)
                .map(|x| c.carrier()[x].as_str())
                .collect()
        })
        .collect();
    let mut text = String::new();
    for (k, cl) in classes.iter().enumerate() {
        let _ = writeln!(text, "[{}] = {{{}}}", qc.carrier()[k], cl.join(", "));
    }
    let mut dists = Vec::new();
    for x in 0..qc.len() {
        for y in 0..qc.len() {
            if x != y {
                let _ = writeln!(text, "d {} {} = {}", qc.carrier()[x], qc.carrier()[y], qc.dist(x, y));
                dists.push(json!([qc.carrier()[x], qc.carrier()[y], qc.dist(x, y).to_string()]));
            }
        }
    }
    Ok(Report {
        text,
        json: json!({
            "status": "ok",
            "quantale": c.spec().to_string(),
            "classes": classes,
            "distances": dists,
        }),
        ok: true,
    })
}
