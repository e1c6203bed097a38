use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::{load_config, read_operator_json, DownfoldSection, DynamicsSection, Model, RunConfig};
use super::{Cli, Command, InspectArgs, TransformArgs};
use crate::algebra::{OperatorProduct, OperatorSum, ONE};
use crate::downfold::{run_adaptive, DownfoldConfig};
use crate::dynamics::{compare_exact, heisenberg_evolve, rank_norm_timeline, sudden_ionization_state, EvolveOptions};
use crate::error::{Error, Result};
use crate::models::{number_operator, parse_fcidump};
use crate::output::{self, fmt_num, json_num};
use crate::rotations::{analyze, rotate_sum, Generator, RotationKind};
use crate::states::{exact_heisenberg, ground_state, sector_of, Determinant, SectorBasis, MAX_DENSE_DIM};

pub(super) fn dispatch(cli: &Cli) -> Result<()> {
    let (cfg, base) = match &cli.common.config {
        Some(path) => (load_config(path)?, path.parent().map(Path::to_path_buf).unwrap_or_default()),
        None => (RunConfig::default(), PathBuf::new()),
    };
    let out = cli.common.out.as_deref();
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
    }
    let ctx = Context { cfg: &cfg, base: &base, out, seed: cli.common.seed };
    match &cli.command {
        Command::Transform(args) => transform(&ctx, args),
        Command::Downfold => downfold(&ctx),
        Command::Dynamics => dynamics(&ctx),
        Command::Inspect(args) => inspect(&ctx, args),
    }
}

struct Context<'a> {
    cfg: &'a RunConfig,
    /// Directory that relative paths in the config are resolved against.
    base: &'a Path,
    out: Option<&'a Path>,
    seed: Option<u64>,
}

impl Context<'_> {
    fn model(&self) -> Result<Model> {
        let m = self.cfg.model.as_ref().ok_or_else(|| Error::InvalidConfig("missing [model] section".into()))?;
        m.build(self.base, self.seed)
    }

    fn artifact(&self, name: &str) -> Option<PathBuf> {
        self.out.map(|d| d.join(name))
    }
}

/// Writes a line to stdout; a closed pipe is not an error.
fn emit(line: &str) -> Result<()> {
    use std::io::Write;
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(v: &Value) -> Result<()> {
    emit(&serde_json::to_string_pretty(&output::round_json(v.clone()))?)
}

fn parse_indices(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::InvalidConfig(format!("bad orbital index `{t}`"))))
        .collect()
}

/// `CREATORS:ANNIHILATORS` with ascending comma-separated lists.
pub fn parse_product(spec: &str) -> Result<OperatorProduct> {
    let (c, a) = spec
        .split_once(':')
        .ok_or_else(|| Error::InvalidConfig(format!("product `{spec}` must look like `0,1:2,3`")))?;
    OperatorProduct::new(&parse_indices(c)?, &parse_indices(a)?)
}

fn parse_kind(s: &str) -> Result<RotationKind> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "anti_hermitian" | "a" => Ok(RotationKind::AntiHermitian),
        "hermitian" | "h" => Ok(RotationKind::Hermitian),
        _ => Err(Error::InvalidConfig(format!("unknown generator kind `{s}`"))),
    }
}

fn sum_json(x: &OperatorSum) -> Result<Value> {
    output::operator_json(x)
}

fn transform(ctx: &Context, args: &TransformArgs) -> Result<()> {
    let sec = ctx.cfg.transform.clone().unwrap_or_default();
    let o = match args.operator.as_ref().or(sec.operator.as_ref()) {
        Some(spec) => OperatorSum::from_product(parse_product(spec)?, ONE),
        None => match &sec.operator_file {
            Some(p) => read_operator_json(&ctx.base.join(p))?,
            None => return Err(Error::InvalidConfig("no operator given (--operator or [transform] operator/operator_file)".into())),
        },
    };
    let t = args
        .generator
        .as_ref()
        .or(sec.generator.as_ref())
        .ok_or_else(|| Error::InvalidConfig("no generator given (--generator or [transform] generator)".into()))?;
    let kind = match &args.kind {
        Some(k) => parse_kind(k)?,
        None => sec.kind.unwrap_or(RotationKind::AntiHermitian),
    };
    let theta = args.theta.or(sec.theta).unwrap_or(0.0);
    let g = Generator { product: parse_product(t)?, kind, theta };

    let mut classes = Vec::new();
    let mut comm = Vec::new();
    let mut dcomm = Vec::new();
    for &(p, c) in o.iter() {
        let a = analyze(p, &g)?;
        classes.push(json!({ "product": p.to_string(), "class": a.class }));
        comm.extend(a.commutator.iter().map(|&(q, v)| (q, v * c)));
        dcomm.extend(a.double_commutator.iter().map(|&(q, v)| (q, v * c)));
    }
    let comm = OperatorSum::from_terms(comm);
    let dcomm = OperatorSum::from_terms(dcomm);
    let rotated = rotate_sum(&o, &g)?;
    let mut v = json!({
        "operator": sum_json(&o)?,
        "operator_text": o.to_string(),
        "generator": {
            "product": g.product.to_string(),
            "creators": g.product.creators(),
            "annihilators": g.product.annihilators(),
            "kind": g.kind,
            "theta": json_num(g.theta),
        },
        "classes": classes,
        "commutator": sum_json(&comm)?,
        "commutator_text": comm.to_string(),
        "double_commutator": sum_json(&dcomm)?,
        "double_commutator_text": dcomm.to_string(),
        "rotated": sum_json(&rotated)?,
        "rotated_text": rotated.to_string(),
    });
    if o.len() == 1 {
        v["class"] = v["classes"][0]["class"].clone();
    }
    print_json(&v)?;
    if let Some(path) = ctx.artifact("transform.json") {
        output::write_json(&path, v)?;
    }
    Ok(())
}

/// Every determinant on `active` with the given spin counts (even = up).
fn active_sector_dets(active: &[usize], n_up: u32, n_dn: u32) -> Vec<Determinant> {
    let mask = active.iter().fold(0u64, |m, &p| m | 1 << p);
    let mut out = Vec::new();
    let n = active.len();
    for sub in 0u64..(1u64 << n) {
        let bits = (0..n).filter(|k| sub >> k & 1 == 1).fold(0u64, |b, k| b | 1 << active[k]);
        let d = Determinant(bits & mask);
        if d.spin_counts() == (n_up, n_dn) {
            out.push(d);
        }
    }
    out.sort();
    out
}

fn downfold_config(sec: &DownfoldSection) -> Result<DownfoldConfig> {
    let dets = match (&sec.active_dets, sec.active_sector) {
        (Some(lists), None) => lists.iter().map(|occ| Determinant::from_occupied(occ)).collect(),
        (None, Some([u, d])) => {
            if sec.active.len() > 24 {
                return Err(Error::InvalidConfig("active_sector needs at most 24 active spinorbitals".into()));
            }
            active_sector_dets(&sec.active, u, d)
        }
        (Some(_), Some(_)) => return Err(Error::InvalidConfig("give either active_dets or active_sector, not both".into())),
        (None, None) => return Err(Error::InvalidConfig("[downfold] needs active_dets or active_sector".into())),
    };
    let mut cfg = DownfoldConfig::new(sec.active.clone(), sec.external.clone(), dets);
    if let Some(x) = sec.grad_tol {
        cfg.grad_tol = x;
    }
    if let Some(x) = sec.energy_tol {
        cfg.energy_tol = x;
    }
    if let Some(x) = sec.optimizer_tol {
        cfg.optimizer_tol = x;
    }
    cfg.max_operators = sec.max_operators;
    cfg.sweep = sec.sweep.into();
    cfg.sweep_to_convergence = sec.sweep_to_convergence;
    cfg.validate()?;
    Ok(cfg)
}

fn downfold(ctx: &Context) -> Result<()> {
    let sec = ctx.cfg.downfold.as_ref().ok_or_else(|| Error::InvalidConfig("missing [downfold] section".into()))?;
    let model = ctx.model()?;
    let mut cfg = downfold_config(sec)?;
    let (n_up, n_dn) = cfg.active_dets[0].spin_counts();
    let full = SectorBasis::spin_sector(model.n_orbitals, n_up, n_dn);
    let want_exact = sec.exact.unwrap_or(full.len() <= MAX_DENSE_DIM);
    if want_exact {
        cfg.exact_energy = Some(ground_state(&model.hamiltonian, &full)?.0);
    }
    let report = run_adaptive(&model.hamiltonian, &cfg)?;
    let last = report.iterations.last();
    let summary = json!({
        "stop": report.stop.to_string(),
        "pool_size": report.pool_size,
        "operators": report.sequence.len(),
        "final_energy": json_num(report.final_energy()),
        "exact_energy": cfg.exact_energy.map(json_num),
        "error": last.and_then(|r| r.error).map(json_num),
        "terms": report.hbar.len(),
        "hermiticity": json_num(report.hbar.hermiticity_residual()),
        "seed": model.seed,
        "sequence": report.sequence.0.iter().map(|(p, th)| json!({ "product": p.to_string(), "theta": json_num(*th) })).collect::<Vec<_>>(),
    });
    emit(&format!(
        "{}: {} operators, E = {}{}",
        report.stop,
        report.sequence.len(),
        fmt_num(report.final_energy()),
        last.and_then(|r| r.error).map(|e| format!(", |E - E_exact| = {}", fmt_num(e))).unwrap_or_default()
    ))?;
    if let Some(dir) = ctx.out {
        output::write_iterations_csv(&dir.join("iterations.csv"), &report.iterations)?;
        output::write_rank_matrix_csv(&dir.join("rank_matrix.csv"), &report.rank_matrix)?;
        output::write_json(&dir.join("hbar.json"), sum_json(&report.hbar)?)?;
        output::write_json(&dir.join("downfold.json"), summary)?;
    }
    Ok(())
}

fn dynamics(ctx: &Context) -> Result<()> {
    let sec: &DynamicsSection = ctx.cfg.dynamics.as_ref().ok_or_else(|| Error::InvalidConfig("missing [dynamics] section".into()))?;
    let model = ctx.model()?;
    let (n_up, n_dn) = match (sec.sector, model.default_sector) {
        (Some([u, d]), _) => (u, d),
        (None, Some(s)) => s,
        (None, None) => return Err(Error::InvalidConfig("[dynamics] needs sector = [n_up, n_dn]".into())),
    };
    let h = &model.hamiltonian;
    let (e0, gs) = ground_state(h, &SectorBasis::spin_sector(model.n_orbitals, n_up, n_dn))?;
    let psi0 = match sec.ionize {
        Some(p) => sudden_ionization_state(&gs, p)?,
        None => gs,
    };
    let orbital = sec.observable.or(sec.ionize).unwrap_or(0);
    let obs = number_operator(orbital);
    let opts = EvolveOptions { trunc: sec.trunc, ordering: sec.ordering, keep_snapshots: false };
    let report = heisenberg_evolve(&obs, h, &psi0, sec.total_time, sec.steps, &opts)?;
    let times = report.times();
    let want_exact = sec.exact.unwrap_or_else(|| sector_of(&psi0, model.n_orbitals).is_ok_and(|b| b.len() <= MAX_DENSE_DIM));
    let exact = if want_exact { Some(exact_heisenberg(&obs, h, &psi0, &times)?) } else { None };
    let devs = exact.as_ref().map(|ex| compare_exact(&report.expectations(), ex)).transpose()?;
    let rank_rows = rank_norm_timeline(&report.records);
    let k1: Vec<f64> = report.records.iter().map(|r| r.rank_norms.get(&2).copied().unwrap_or(0.0)).collect();
    let k1_spread = k1.iter().copied().fold(f64::NEG_INFINITY, f64::max) - k1.iter().copied().fold(f64::INFINITY, f64::min);
    let last = report.records.last().expect("at least the initial record");
    let summary = json!({
        "ground_energy": json_num(e0),
        "observable_orbital": orbital,
        "ionized_orbital": sec.ionize,
        "total_time": json_num(sec.total_time),
        "steps": sec.steps,
        "dt": json_num(sec.total_time / sec.steps as f64),
        "trunc": json_num(sec.trunc),
        "ordering": sec.ordering,
        "final_terms": last.terms,
        "max_terms": report.records.iter().map(|r| r.terms).max(),
        "dropped_weight": json_num(last.dropped_weight),
        "one_body_norm_spread": json_num(k1_spread),
        "max_deviation": devs.map(|d| json_num(d.0)),
        "mean_deviation": devs.map(|d| json_num(d.1)),
        "seed": model.seed,
    });
    emit(&format!(
        "{} steps to t = {}: {} terms{}",
        sec.steps,
        fmt_num(sec.total_time),
        last.terms,
        devs.map(|(mx, mean)| format!(", max deviation {}, mean deviation {}", fmt_num(mx), fmt_num(mean))).unwrap_or_default()
    ))?;
    if let Some(dir) = ctx.out {
        output::write_timeline_csv(&dir.join("timeline.csv"), &report.records, exact.as_deref())?;
        output::write_rank_norms_csv(&dir.join("rank_norms.csv"), &rank_rows)?;
        output::write_json(&dir.join("dynamics.json"), summary)?;
        if sec.svg {
            let mut series = vec![("Trotter", times.iter().zip(&report.records).map(|(&t, r)| (t, r.expectation.re)).collect())];
            if let Some(ex) = &exact {
                series.push(("exact", times.iter().zip(ex).map(|(&t, e)| (t, e.re)).collect()));
            }
            fs::write(dir.join("timeline.svg"), output::line_chart_svg(&format!("<n_{orbital}(t)>"), &series))?;
        }
    }
    Ok(())
}

fn inspect(ctx: &Context, args: &InspectArgs) -> Result<()> {
    let path = match (&args.path, ctx.cfg.inspect.as_ref().and_then(|s| s.path.as_ref())) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => ctx.base.join(p),
        (None, None) => return Err(Error::InvalidConfig("inspect needs a file path".into())),
    };
    let text = fs::read_to_string(&path)?;
    let mut extra = None;
    let x = if text.trim_start().starts_with('&') {
        let ints = parse_fcidump(&text, &path)?;
        extra = Some(json!({ "norb": ints.norb, "nelec": ints.nelec, "ms2": ints.ms2, "warnings": ints.warnings }));
        ints.hamiltonian()?
    } else {
        read_operator_json(&path)?
    };
    let ranks: Vec<Value> = x
        .rank_partition()
        .into_iter()
        .map(|(r, part)| json!({ "rank": r.to_string(), "terms": part.len(), "norm": json_num(part.euclidean_norm()) }))
        .collect();
    let mut blocks = std::collections::BTreeMap::<(u32, u32), (usize, f64)>::new();
    for (p, c) in x.iter() {
        let e = blocks.entry((p.n_creators(), p.n_annihilators())).or_default();
        e.0 += 1;
        e.1 += c.norm_sqr();
    }
    let blocks: Vec<Value> = blocks
        .into_iter()
        .map(|((n, m), (k, w))| json!({ "creators": n, "annihilators": m, "terms": k, "norm": json_num(w.sqrt()) }))
        .collect();
    let mut v = json!({
        "terms": x.len(),
        "max_index": x.max_index(),
        "hermiticity_residual": json_num(x.hermiticity_residual()),
        "particle_conserving": x.is_particle_conserving(),
        "norm": json_num(x.euclidean_norm()),
        "ranks": ranks,
        "blocks": blocks,
    });
    if let Some(e) = extra {
        v["fcidump"] = e;
    }
    print_json(&v)?;
    if let Some(p) = ctx.artifact("inspect.json") {
        output::write_json(&p, v)?;
    }
    Ok(())
}
