//! The ASCII model format.
//!
//! ```text
//! backend finmet            # or finmeas
//! quantale metric           # finmet only; finmeas is always metric
//! let N = 32
//! ground X = line N         # points 0..N; |i - j|, or i <= j when bool
//! ground Y = points a b c   # discrete, refined by `dist`
//! dist Y a b = 1            # both directions; `arrow Y a b = q` for one
//! op wait_n = shift n for n in 0..N
//! op f = table 0 2 1        # target point per source point
//! op c = const b            # nullary
//!
//! ground Real = dim 4       # finmeas: a space of that dimension
//! ground unit = grid 10     # dimension 11, point i standing for i/10
//! op prob_n = dirac n for n in 0..10
//! op bernoulli = bernoulli
//! op m = matrix 1/2 1/2 ; 1/2 1/2
//! norm l1                   # finmeas distance convention; default eventsup
//! ```

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};

use super::{FinMeas, FinMet, Matrix, Model, ModelError, TvNorm, Val};
use crate::quantale::QuantaleSpec;
use crate::theory::{eval_expr, expand_schema, Bindings, Signature};
use crate::vcat::FinVCat;

fn err(line: usize, msg: impl Into<String>) -> ModelError {
    ModelError::File { line, msg: msg.into() }
}

fn at(line: usize) -> impl Fn(ModelError) -> ModelError {
    move |e| match e {
        ModelError::File { .. } => e,
        other => err(line, other.to_string()),
    }
}

enum GroundDecl {
    Line(usize),
    Points(Vec<String>),
    Dim(usize),
    Grid(usize),
}

struct Decls {
    backend: Option<String>,
    quantale: Option<QuantaleSpec>,
    norm: TvNorm,
    consts: Bindings,
    grounds: Vec<(usize, String, GroundDecl)>,
    dists: Vec<(usize, String, String, String, String, bool)>,
    ops: Vec<(usize, String)>,
}

fn index(line: usize, text: &str, vars: &Bindings) -> Result<usize, ModelError> {
    let v = eval_expr(text, vars).map_err(|e| err(line, e.to_string()))?;
    if !v.is_integer() || v.is_negative() {
        return Err(err(line, format!("`{text}` is not a natural number")));
    }
    v.to_integer()
        .to_usize()
        .ok_or_else(|| err(line, format!("`{text}` is too large")))
}

fn rational(line: usize, text: &str, vars: &Bindings) -> Result<BigRational, ModelError> {
    eval_expr(text, vars).map_err(|e| err(line, e.to_string()))
}

/// Loads a model of `sig` from its textual description.
pub fn load_model(text: &str, sig: &Signature) -> Result<Model, ModelError> {
    let mut d = Decls {
        backend: None,
        quantale: None,
        norm: TvNorm::default(),
        consts: Bindings::new(),
        grounds: Vec::new(),
        dists: Vec::new(),
        ops: Vec::new(),
    };
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let t = raw.split('#').next().unwrap_or("").trim();
        if t.is_empty() {
            continue;
        }
        let (kw, rest) = t.split_once(char::is_whitespace).unwrap_or((t, ""));
        let rest = rest.trim();
        match kw {
            "backend" => match rest {
                "finmet" | "finmeas" => d.backend = Some(rest.to_string()),
                other => return Err(err(line, format!("unknown backend `{other}`"))),
            },
            "quantale" => d.quantale = Some(rest.parse().map_err(|e: crate::quantale::QuantaleError| err(line, e.to_string()))?),
            "norm" => {
                d.norm = match rest {
                    "l1" => TvNorm::L1,
                    "eventsup" => TvNorm::EventSup,
                    other => return Err(err(line, format!("unknown norm `{other}`"))),
                }
            }
            "let" => {
                let (name, value) = rest.split_once('=').ok_or_else(|| err(line, "expected `let NAME = value`"))?;
                let v = rational(line, value.trim(), &d.consts)?;
                d.consts.insert(name.trim().to_string(), v);
            }
            "ground" => {
                let (name, body) = rest.split_once('=').ok_or_else(|| err(line, "expected `ground NAME = ...`"))?;
                let mut words = body.split_whitespace();
                let kind = words.next().unwrap_or("");
                let args: Vec<&str> = words.collect();
                let one = |args: &[&str]| -> Result<usize, ModelError> {
                    match args {
                        [a] => index(line, a, &d.consts),
                        _ => Err(err(line, format!("`{kind}` takes one argument"))),
                    }
                };
                let g = match kind {
                    "line" => GroundDecl::Line(one(&args)?),
                    "dim" => GroundDecl::Dim(one(&args)?),
                    "grid" => GroundDecl::Grid(one(&args)?),
                    "points" if !args.is_empty() => GroundDecl::Points(args.iter().map(|s| s.to_string()).collect()),
                    other => return Err(err(line, format!("unknown ground description `{other}`"))),
                };
                d.grounds.push((line, name.trim().to_string(), g));
            }
            "dist" | "arrow" => {
                let (lhs, q) = rest.split_once('=').ok_or_else(|| err(line, "expected `dist G a b = q`"))?;
                let w: Vec<&str> = lhs.split_whitespace().collect();
                let [g, a, b] = w.as_slice() else {
                    return Err(err(line, "expected `dist G a b = q`"));
                };
                d.dists.push((line, g.to_string(), a.to_string(), b.to_string(), q.trim().to_string(), kw == "dist"));
            }
            "op" => d.ops.push((line, rest.to_string())),
            other => return Err(err(line, format!("unknown directive `{other}`"))),
        }
    }
    match d.backend.as_deref() {
        Some("finmet") => finmet(d, sig).map(Model::FinMet),
        Some("finmeas") => finmeas(d, sig).map(Model::FinMeas),
        _ => Err(err(0, "missing `backend finmet|finmeas`")),
    }
}

/// Expanded op instances `(line, name, kind, args, bindings)`; generated
/// names outside the signature are dropped.
type OpInst = (usize, String, String, Vec<String>, Bindings);

fn op_instances(d: &Decls, sig: &Signature) -> Result<Vec<OpInst>, ModelError> {
    let mut out = Vec::new();
    for (line, text) in &d.ops {
        let line = *line;
        let insts = expand_schema(text, &d.consts).map_err(|e| err(line, e.to_string()))?;
        for (body, b, generated) in insts {
            let (name, def) = body.split_once('=').ok_or_else(|| err(line, "expected `op NAME = ...`"))?;
            let name = name.trim().to_string();
            if sig.sort(&name).is_none() {
                if generated {
                    continue;
                }
                return Err(err(line, format!("operation `{name}` is not in the signature")));
            }
            let mut words = def.split_whitespace().map(str::to_string);
            let kind = words.next().ok_or_else(|| err(line, "missing operation description"))?;
            out.push((line, name, kind, words.collect(), b));
        }
    }
    Ok(out)
}

fn finmet(d: Decls, sig: &Signature) -> Result<FinMet, ModelError> {
    let spec = d.quantale.unwrap_or(QuantaleSpec::Lawvere);
    let mut m = FinMet::new(spec, sig.clone());
    for (line, name, g) in &d.grounds {
        let line = *line;
        let c = match g {
            GroundDecl::Line(n) => {
                let carrier: Vec<String> = (0..=*n).map(|i| i.to_string()).collect();
                match spec {
                    QuantaleSpec::Lawvere => FinVCat::from_fn(spec, carrier, |i, j| {
                        spec.int(i.abs_diff(j) as i64).expect("non-negative")
                    }),
                    QuantaleSpec::Boolean => FinVCat::from_fn(spec, carrier, |i, j| {
                        if i <= j {
                            spec.top()
                        } else {
                            spec.bottom()
                        }
                    }),
                    other => return Err(err(line, format!("`line` needs the metric or bool quantale, not {other}"))),
                }
                .map_err(|e| err(line, e.to_string()))?
            }
            GroundDecl::Points(ps) => {
                let mut table = vec![spec.bottom(); ps.len() * ps.len()];
                for i in 0..ps.len() {
                    table[i * ps.len() + i] = spec.top();
                }
                for (l, g2, a, b, q, sym) in &d.dists {
                    if g2 != name {
                        continue;
                    }
                    let pos = |p: &str| {
                        ps.iter()
                            .position(|x| x == p)
                            .ok_or_else(|| err(*l, format!("`{p}` is not a point of {name}")))
                    };
                    let (i, j) = (pos(a)?, pos(b)?);
                    let q = spec.parse_value(q).map_err(|e| err(*l, e.to_string()))?;
                    table[i * ps.len() + j] = q.clone();
                    if *sym {
                        table[j * ps.len() + i] = q;
                    }
                }
                FinVCat::new(spec, ps.clone(), table).map_err(|e| err(line, e.to_string()))?
            }
            GroundDecl::Dim(_) | GroundDecl::Grid(_) => return Err(err(line, "`dim` and `grid` are finmeas grounds")),
        };
        m.set_ground(name, c).map_err(at(line))?;
    }
    for (line, name, kind, args, b) in op_instances(&d, sig)? {
        let (src, tgt) = m.op_objects(&name).map_err(at(line))?;
        let point = |a: &str| -> Result<usize, ModelError> {
            if let super::MetObj::Ground(_, c) = &tgt {
                if let Some(i) = c.index_of(a) {
                    return Ok(i);
                }
            }
            index(line, a, &b)
        };
        match (kind.as_str(), args.as_slice()) {
            ("shift", [k]) => {
                let k = index(line, k, &b)?;
                let n = tgt.size().map_err(at(line))?;
                if !matches!(src, super::MetObj::Ground(..)) || src.size().map_err(at(line))? != n {
                    return Err(err(line, "`shift` needs a sort `G -> G` on a ground"));
                }
                m.set_op(&name, move |v| match v {
                    Val::Atom(i) => Val::Atom((i + k).min(n - 1)),
                    _ => panic!("shift applied to a non-atom"),
                })
                .map_err(at(line))?;
            }
            ("table", entries) => {
                let t = entries.iter().map(|a| point(a)).collect::<Result<Vec<_>, _>>()?;
                m.set_op_table(&name, t).map_err(at(line))?;
            }
            ("const", [a]) => {
                let t = vec![point(a)?];
                m.set_op_table(&name, t).map_err(at(line))?;
            }
            (other, _) => return Err(err(line, format!("unknown or malformed finmet operation `{other}`"))),
        }
    }
    Ok(m)
}

fn finmeas(d: Decls, sig: &Signature) -> Result<FinMeas, ModelError> {
    if d.quantale.is_some_and(|q| q != QuantaleSpec::Lawvere) {
        return Err(err(0, "finmeas models are metric"));
    }
    let mut m = FinMeas::new(sig.clone());
    m.norm = d.norm;
    for (line, name, g) in &d.grounds {
        let (dim, grid) = match g {
            GroundDecl::Dim(n) => (*n, None),
            GroundDecl::Grid(n) => (n + 1, Some(*n)),
            _ => return Err(err(*line, "finmeas grounds are `dim n` or `grid n`")),
        };
        m.set_ground(name, dim, grid).map_err(at(*line))?;
    }
    for (line, name, kind, args, b) in op_instances(&d, sig)? {
        match (kind.as_str(), args.as_slice()) {
            ("dirac", [i]) => m.set_op_dirac(&name, index(line, i, &b)?).map_err(at(line))?,
            ("bernoulli", []) => m.set_op_bernoulli(&name).map_err(at(line))?,
            ("matrix", entries) => {
                let joined = entries.join(" ");
                let rows = joined
                    .split(';')
                    .map(|r| r.split_whitespace().map(|x| rational(line, x, &b)).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<Vec<_>, _>>()?;
                let mat = Matrix::from_rows(&rows).map_err(at(line))?;
                m.set_op_matrix(&name, mat).map_err(at(line))?;
            }
            (other, _) => return Err(err(line, format!("unknown or malformed finmeas operation `{other}`"))),
        }
    }
    Ok(m)
}
