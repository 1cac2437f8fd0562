//! The subcommands. Each returns an [`Output`]; `main` writes it and picks the exit status.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde_json::{json, Value};
use thetaforge::brokenlines::{chamber_point, enumerate_broken_lines, structure_constants, theta_in_chamber, ThetaExpansion};
use thetaforge::cluster::{build_cluster_diagram, cluster_chamber, mutate_sequence, ClusterDiagram, Seed, TorusKind, TorusPoly};
use thetaforge::dtwall::{extract_dt, kronecker_setup};
use thetaforge::lattice::LatticeVec;
use thetaforge::{ClusterFlavor, Error, QDiagram};

use crate::config::{read_json, Format, JobConfig, Source};
use crate::error::{CliError, CliResult};
use crate::render;

/// What a command produced.
#[derive(Debug, Default)]
pub struct Output {
    pub body: String,
    /// Extra files to write next to the main output.
    pub extra: Vec<(PathBuf, String)>,
    /// Set when the command ran but its verdict is negative; the process exits 1.
    pub failure: Option<String>,
    /// Diagnostic dump printed to stderr on failure.
    pub reproducer: Option<Value>,
}

impl Output {
    fn ok(body: String) -> Self {
        Output { body, ..Default::default() }
    }
}

fn unsupported(cfg: &JobConfig) -> CliError {
    CliError::Usage(format!("`{}` does not support --format {}", cfg.command, cfg.format.name()))
}

pub fn load_seed(cfg: &JobConfig) -> CliResult<Seed> {
    match &cfg.source {
        Source::Seed(path) => Ok(Seed::from_json(&read_json(path)?)?),
        _ => Err(CliError::Usage(format!("`{}` needs --seed FILE", cfg.command))),
    }
}

fn load_cluster(cfg: &JobConfig) -> CliResult<ClusterDiagram> {
    Ok(build_cluster_diagram(&load_seed(cfg)?, cfg.flavor, cfg.order)?)
}

/// Initial walls only, before completion.
fn load_initial(cfg: &JobConfig) -> CliResult<QDiagram> {
    match &cfg.source {
        Source::Init(path) => Ok(QDiagram::from_init_json(&read_json(path)?, cfg.order)?),
        Source::Seed(_) => Ok(load_cluster(cfg)?.diagram.incoming_part()?),
        Source::None => Err(CliError::Usage(format!("`{}` needs --init FILE or --seed FILE", cfg.command))),
    }
}

/// The completed diagram of the configured source.
pub fn load_diagram(cfg: &JobConfig) -> CliResult<QDiagram> {
    match &cfg.source {
        Source::Seed(_) => Ok(load_cluster(cfg)?.diagram),
        _ => Ok(load_initial(cfg)?.complete(cfg.order)?),
    }
}

fn lattice_vec(d: &QDiagram, v: &LatticeVec, flag: &str) -> CliResult<LatticeVec> {
    let rank = d.lattice().rank();
    if v.len() != rank {
        return Err(CliError::Usage(format!("{flag} {v} has {} coordinates, the lattice has rank {rank}", v.len())));
    }
    Ok(v.clone())
}

fn diagram_output(cfg: &JobConfig, d: &QDiagram) -> CliResult<String> {
    Ok(match cfg.format {
        Format::Json => render::json_text(&d.to_json()?),
        Format::Csv => render::diagram_csv(&d.to_ee_form()?),
        Format::Text => render::diagram_text(d, &d.to_ee_form()?),
        Format::Svg => d.svg(cfg.window),
    })
}

/// Completes the initial data; succeeds only when the loop product is trivial.
pub fn scatter(cfg: &JobConfig, svg: Option<PathBuf>) -> CliResult<Output> {
    let initial = load_initial(cfg)?;
    let d = match initial.complete(cfg.order) {
        Ok(d) => d,
        Err(Error::Inconsistent { order, detail }) => {
            return Ok(Output {
                failure: Some(format!("completion is inconsistent; first failing order {order}: {detail}")),
                reproducer: Some(json!({ "first_failing_order": order, "detail": detail })),
                ..Default::default()
            })
        }
        Err(e) => return Err(e.into()),
    };
    let report = d.check_consistent()?;
    let mut out = Output::ok(diagram_output(cfg, &d)?);
    if let Some(path) = svg {
        out.extra.push((path, d.svg(cfg.window)));
    }
    if !report.consistent {
        let order = report.first_failing_order.unwrap_or(0);
        out.failure = Some(format!("diagram is not consistent; first failing order {order}"));
        out.reproducer = Some(json!({ "first_failing_order": order, "loop_log": report.discrepancy.to_json() }));
    }
    Ok(out)
}

fn theta_at(cfg: &JobConfig, d: &QDiagram, p: &LatticeVec) -> CliResult<ThetaExpansion> {
    let q = match &cfg.q {
        Some(q) => q.clone(),
        None => chamber_point(d, 0)?,
    };
    Ok(theta_in_chamber(d, p, &q, cfg.order)?)
}

pub fn theta(cfg: &JobConfig, p: &LatticeVec, with_lines: bool) -> CliResult<Output> {
    let d = load_diagram(cfg)?;
    let p = lattice_vec(&d, p, "--p")?;
    let th = theta_at(cfg, &d, &p)?;
    let body = match cfg.format {
        Format::Text => format!("{}\n", th.terms),
        Format::Json => {
            let mut v = th.to_json();
            v["text"] = Value::String(th.terms.to_string());
            if with_lines {
                let lines = enumerate_broken_lines(&d, &p, &th.q, cfg.order)?;
                v["broken_lines"] = Value::Array(lines.iter().map(|l| l.to_json()).collect());
            }
            render::json_text(&v)
        }
        Format::Csv => {
            let mut s = String::from("exponent,coeff\n");
            for (m, c) in th.terms.terms() {
                s.push_str(&format!("\"{m}\",\"{c}\"\n"));
            }
            s
        }
        Format::Svg => {
            let lines = enumerate_broken_lines(&d, &p, &th.q, cfg.order)?;
            render::theta_svg(&d, &lines, cfg.window)?
        }
    };
    Ok(Output::ok(body))
}

pub fn product(cfg: &JobConfig, p1: &LatticeVec, p2: &LatticeVec) -> CliResult<Output> {
    let d = load_diagram(cfg)?;
    let p1 = lattice_vec(&d, p1, "--p1")?;
    let p2 = lattice_vec(&d, p2, "--p2")?;
    let alpha = structure_constants(&d, &p1, &p2, cfg.order)?;
    let omega = d.lattice().pair_omega(&p1, &p2)?;
    let body = match cfg.format {
        Format::Json => render::json_text(&json!({
            "p1": p1.to_json(),
            "p2": p2.to_json(),
            "omega": omega.to_string(),
            "order": cfg.order,
            "constants": alpha.iter().map(|(p, c)| json!({
                "p": p.to_json(),
                "coeff": c.to_json(),
                "text": c.to_string(),
            })).collect::<Vec<_>>(),
        })),
        Format::Text => {
            let mut s = format!("theta_{p1} * theta_{p2}, omega = {omega}, order {}\n", cfg.order);
            let width = alpha.keys().map(|p| p.to_string().len()).max().unwrap_or(1).max(1);
            for (p, c) in &alpha {
                s.push_str(&format!("{:<width$}  {c}\n", p.to_string()));
            }
            s
        }
        Format::Csv => {
            let mut s = String::from("p,coeff\n");
            for (p, c) in &alpha {
                s.push_str(&format!("\"{p}\",\"{c}\"\n"));
            }
            s
        }
        Format::Svg => return Err(unsupported(cfg)),
    };
    Ok(Output::ok(body))
}

fn torus_json(f: &TorusPoly) -> Value {
    json!({ "terms": f.to_json(), "text": f.to_string() })
}

pub fn mutate(cfg: &JobConfig, p: Option<&LatticeVec>) -> CliResult<Output> {
    let seed = load_seed(cfg)?;
    let kind = match cfg.flavor {
        ClusterFlavor::X => TorusKind::X,
        _ => TorusKind::A,
    };
    for &j in &cfg.jseq {
        if j >= seed.rank() {
            return Err(CliError::Usage(format!("mutation index {} exceeds the rank {}", j + 1, seed.rank())));
        }
    }
    // A-type mutation needs the compatible form carried by the diagram's seed.
    let cd = match cfg.flavor {
        ClusterFlavor::X => None,
        _ => Some(build_cluster_diagram(&seed, cfg.flavor, cfg.order)?),
    };
    let seed = cd.as_ref().map_or(seed, |cd| cd.seed.clone());
    let path = seed.mutation_path(&cfg.jseq)?;
    let last = path.last().expect("the path starts at the initial seed");
    let one_based: Vec<usize> = cfg.jseq.iter().map(|j| j + 1).collect();
    let mut v = json!({
        "jseq": one_based,
        "flavor": cfg.flavor.name(),
        "order": cfg.order,
        "seed": last.to_json(),
    });
    let mut text = format!("mutation sequence {one_based:?}\nB = {}\n", last.to_json()["B_numerators"]);
    if let Some(cd) = &cd {
        let chamber = cluster_chamber(cd, &cfg.jseq)?;
        let q0 = cluster_chamber(cd, &[])?.generic_point(&cd.diagram)?;
        let mut vars = Vec::new();
        for g in &chamber.gens {
            let th = theta_in_chamber(&cd.diagram, g, &q0, cfg.order)?;
            let f = TorusPoly::from_series(&th.terms);
            let top = th.terms.keyed_terms().keys().map(|key| key.iter().sum::<i64>()).max().unwrap_or(0);
            let complete = (top as u32) < cfg.order;
            text.push_str(&format!("theta_{g} = {f}{}\n", if complete { "" } else { "  (truncated)" }));
            vars.push(json!({ "g": g.to_json(), "expansion": torus_json(&f), "complete": complete }));
        }
        text.push_str(&format!("chamber rays {:?}\n", chamber.rays));
        v["chamber"] = chamber.to_json();
        v["cluster_variables"] = Value::Array(vars);
    }
    if let Some(p) = p {
        if p.len() != seed.rank() {
            return Err(CliError::Usage(format!("--p {p} has {} coordinates, the seed has rank {}", p.len(), seed.rank())));
        }
        let f = mutate_sequence(&seed, &cfg.jseq, kind, &TorusPoly::monomial(p.clone()), cfg.order)?;
        text.push_str(&format!("z^{p} -> {f}\n"));
        v["monomial"] = json!({ "p": p.to_json(), "image": torus_json(&f) });
    }
    let body = match cfg.format {
        Format::Json => render::json_text(&v),
        Format::Text => text,
        _ => return Err(unsupported(cfg)),
    };
    Ok(Output::ok(body))
}

pub fn dt(cfg: &JobConfig, n: Option<i64>, shifts: [i64; 2]) -> CliResult<Output> {
    let d = match (n, &cfg.source) {
        (Some(n), Source::None) => kronecker_setup(n, shifts[0], shifts[1], cfg.order)?.complete(cfg.order)?,
        (None, Source::None) => return Err(CliError::Usage("`dt` needs --n N or --init FILE".into())),
        (Some(_), _) => return Err(CliError::Usage("--n cannot be combined with --init or --seed".into())),
        (None, _) => load_diagram(cfg)?,
    };
    let r = extract_dt(&d)?;
    let body = match cfg.format {
        Format::Json => render::json_text(&r.to_json()),
        Format::Csv => r.to_csv(),
        Format::Text => r.to_text(),
        Format::Svg => d.svg(cfg.window),
    };
    Ok(Output::ok(body))
}

/// Re-serializes the completed diagram; `--classical` exports its `t = 1` limit.
pub fn export(cfg: &JobConfig, classical: bool) -> CliResult<Output> {
    let d = load_diagram(cfg)?;
    if !classical {
        let mut body = diagram_output(cfg, &d)?;
        if cfg.format == Format::Json {
            if let Source::Seed(_) = cfg.source {
                let mut v = d.to_json()?;
                v["seed"] = load_seed(cfg)?.to_json();
                body = render::json_text(&v);
            }
        }
        return Ok(Output::ok(body));
    }
    let c = d.classical_limit();
    let body = match cfg.format {
        Format::Json => render::json_text(&c.to_json()),
        Format::Csv | Format::Text => {
            let mut rows: BTreeMap<([i64; 2], [i64; 2]), Vec<String>> = BTreeMap::new();
            for r in c.rays() {
                for (j, v) in r.func.log() {
                    rows.entry((r.ray, r.ab)).or_default().push(format!("{j}:{v}"));
                }
            }
            let mut s = String::from(if cfg.format == Format::Csv { "ux,uy,a,b,log_terms\n" } else { "" });
            for ((u, ab), terms) in rows {
                if cfg.format == Format::Csv {
                    s.push_str(&format!("{},{},{},{},\"{}\"\n", u[0], u[1], ab[0], ab[1], terms.join(" ")));
                } else {
                    s.push_str(&format!("ray ({},{}) dir ({},{}): {}\n", u[0], u[1], ab[0], ab[1], terms.join(", ")));
                }
            }
            s
        }
        Format::Svg => c.to_svg(cfg.window, |r| format!("{:?}", r.ab)),
    };
    Ok(Output::ok(body))
}
