//! The `lanczos`, `agp` and `evolve` commands.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{CdChoice, Config, ModelSpec, TfimMethod};
use super::output::{config_hash, Cell, Provenance, Report, Table, VERSION};
use crate::agp::solve_alpha;
use crate::dynamics::{eigenstate, evolve, CdSource, EvolveOptions, TimeGrid};
use crate::error::{CdError, Result};
use crate::lanczos::{build_krylov_chain, KrylovChain, LanczosOptions, Parity};
use crate::measure::Measure;
use crate::models::ising_longitudinal::IsingLongitudinal;
use crate::models::tfim::Tfim;
use crate::models::xx::NormTraces;
use crate::models::{NormFraction, Protocol};
use crate::spectral::build_spectral_chain;
use crate::variational::truncated_cd_with_even_basis;
use crate::C64;

/// A config with its seed resolved, plus the text it was read from.
pub struct Experiment {
    pub config: Config,
    pub source_text: String,
    pub seed: Option<u64>,
    pub jobs: usize,
}

impl Experiment {
    pub fn new(mut config: Config, source_text: String, cli_seed: Option<u64>, jobs: usize) -> Result<Self> {
        config.model.validate()?;
        let seed = config.resolve_seed(cli_seed)?;
        Ok(Experiment { config, source_text, seed, jobs: jobs.max(1) })
    }

    pub fn from_text(text: &str, cli_seed: Option<u64>, jobs: usize) -> Result<Self> {
        Experiment::new(Config::parse(text)?, text.to_string(), cli_seed, jobs)
    }

    fn provenance(&self, command: &'static str) -> Result<Provenance> {
        let params = serde_json::to_value(&self.config.model).map_err(|e| CdError::Io(e.to_string()))?;
        Ok(Provenance {
            name: self.config.name.clone(),
            command,
            model: self.config.model.kind(),
            params,
            seed: self.seed,
            config_sha256: config_hash(&self.source_text),
            version: VERSION,
        })
    }

    /// Runs `f` over `items` on a pool of `jobs` threads, keeping the input order.
    fn map_parallel<T, R, F>(&self, items: &[T], f: F) -> Result<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> Result<R> + Sync + Send,
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| CdError::Config(format!("cannot start {} worker threads: {e}", self.jobs)))?;
        pool.install(|| items.par_iter().map(&f).collect())
    }

    fn protocol(&self) -> Result<Option<Box<dyn Protocol>>> {
        Ok(match &self.config.model {
            ModelSpec::TwoLevel(m) => Some(Box::new(m.clone())),
            ModelSpec::Stirap(m) => Some(Box::new(m.clone())),
            ModelSpec::TfimRamp(m) => Some(Box::new(m.clone())),
            ModelSpec::IsingLongitudinal(m) => Some(Box::new(m.clone())),
            ModelSpec::XxAnneal(m) => Some(Box::new(m.protocol()?)),
            ModelSpec::Toda(m) => Some(Box::new(m.clone())),
            ModelSpec::Oscillator(_) | ModelSpec::Tfim(_) | ModelSpec::Profiles(_) => None,
        })
    }

    fn measure_override(&self) -> Result<Option<Measure>> {
        let Some(measure) = self.config.measure else { return Ok(None) };
        measure.validate()?;
        match self.config.model {
            ModelSpec::Stirap(_) | ModelSpec::XxAnneal(_) | ModelSpec::Toda(_) | ModelSpec::Profiles(_) => {
                Err(CdError::Config(format!(
                    "the {} model runs in a fixed structured basis; `measure` cannot be overridden",
                    self.config.model.kind()
                )))
            }
            _ => Ok(Some(measure)),
        }
    }

    /// The points a chain is computed at: times along a protocol, field values for the
    /// static ring, profile shapes, or the single static oscillator.
    pub fn points(&self) -> Result<Vec<Point>> {
        let model = &self.config.model;
        if self.config.points.is_some() && !model.is_protocol() {
            return Err(CdError::Config(format!("[points] applies to protocols, not to the {} model", model.kind())));
        }
        Ok(match model {
            ModelSpec::Tfim(spec) => {
                spec.g.iter().map(|&g| Point { label: format!("g={g}"), time: None, parameter: Some(g) }).collect()
            }
            ModelSpec::Profiles(spec) => spec
                .profiles
                .iter()
                .map(|p| Point { label: p.name().to_string(), time: None, parameter: None })
                .collect(),
            ModelSpec::Oscillator(_) => vec![Point { label: "static".into(), time: None, parameter: None }],
            _ => {
                let t_final = self.protocol()?.expect("time-dependent model").t_final();
                self.config
                    .time_fractions()?
                    .into_iter()
                    .map(|f| Point { label: format!("t/t_f={f}"), time: Some(f * t_final), parameter: Some(f) })
                    .collect()
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Point {
    pub label: String,
    pub time: Option<f64>,
    /// Time fraction for protocols, field value for the static ring.
    pub parameter: Option<f64>,
}

/// Everything computed at one point.
#[derive(Clone, Debug, Default)]
pub struct PointResult {
    pub b: Vec<f64>,
    pub truncated: bool,
    pub alpha: Option<Vec<f64>>,
    /// Three-level model: per-term contributions and the closed-form totals.
    pub terms: Option<(Vec<[f64; 3]>, [f64; 3])>,
    pub fractions: Option<NormFraction>,
    pub traces: Option<NormTraces>,
    /// Annealing model: truncated CD coefficients in the plotting convention.
    pub truncated_coefficients: Option<[f64; 3]>,
}

impl PointResult {
    fn from_chain<V>(chain: &KrylovChain<V>) -> Self {
        PointResult { b: chain.b.clone(), truncated: chain.truncated, ..Default::default() }
    }

    fn parity(&self) -> &'static str {
        match crate::lanczos::krylov_dimension_parity(self.b.len()) {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

fn alpha_of(b: &[f64]) -> Result<Vec<f64>> {
    if b.len() < 2 {
        Ok(Vec::new())
    } else {
        solve_alpha(b)
    }
}

fn tfim_at(spec: &super::config::TfimSpec, g: f64) -> Result<Tfim> {
    Tfim::new(spec.n_sites, spec.v, g, spec.g_dot)
}

fn ising_truncated(
    model: &IsingLongitudinal,
    t: f64,
    measure: &Measure,
    opts: &LanczosOptions,
) -> Result<(Vec<f64>, [f64; 3])> {
    let fit = truncated_cd_with_even_basis(
        &model.hamiltonian(t)?,
        &model.derivative(t)?,
        &*model.even_basis()?,
        &*model.odd_basis()?,
        measure,
        opts,
    )?;
    Ok((fit.expansion.alpha.clone(), model.plotted_coefficients(&fit.coefficients)))
}

/// Computes the chain at `point` and, when `with_agp`, the AGP coefficients and the
/// requested decompositions.
pub fn compute_point(exp: &Experiment, point: &Point, with_agp: bool) -> Result<PointResult> {
    let opts = &exp.config.lanczos;
    let agp = &exp.config.agp;
    let overridden = exp.measure_override()?;
    let time = point.time.unwrap_or(0.0);
    let mut result = match &exp.config.model {
        ModelSpec::Profiles(spec) => {
            let profile = spec.profiles.iter().find(|p| p.name() == point.label).expect("point from this spec");
            PointResult { b: profile.coefficients(spec.d), ..Default::default() }
        }
        ModelSpec::Oscillator(m) => {
            let measure = overridden.unwrap_or(Measure::Gibbs { beta: 1.0 });
            PointResult::from_chain(&m.chain(&measure, opts)?)
        }
        ModelSpec::Tfim(spec) => {
            let model = tfim_at(spec, point.parameter.expect("field value"))?;
            let measure = overridden.unwrap_or_else(|| model.measure());
            match spec.method {
                TfimMethod::Analytic => {
                    let Measure::Uniform { scale } = measure else {
                        return Err(CdError::Config("the analytic ring coefficients need a uniform measure".into()));
                    };
                    PointResult { b: model.analytic_b(scale), ..Default::default() }
                }
                TfimMethod::Pauli => PointResult::from_chain(&build_krylov_chain(
                    &model.hamiltonian()?,
                    &model.derivative()?,
                    &measure,
                    opts,
                )?),
            }
        }
        ModelSpec::Stirap(m) => {
            let mut r = PointResult::from_chain(&m.chain(time, opts)?);
            if with_agp && agp.terms {
                let split = m.term_decomposition(time, opts)?;
                r.terms = Some((split.terms, m.reference_coefficients(time)));
            }
            r
        }
        ModelSpec::XxAnneal(_) | ModelSpec::Toda(_) => {
            let model = match &exp.config.model {
                ModelSpec::XxAnneal(spec) => spec.protocol()?.at(time)?,
                ModelSpec::Toda(flow) => flow.at(time)?,
                _ => unreachable!(),
            };
            let chain = model.chain(opts)?;
            let mut r = PointResult::from_chain(&chain);
            if with_agp && (agp.norm_fractions || agp.norm_traces) {
                let alpha = alpha_of(&chain.b)?;
                if agp.norm_fractions {
                    r.fractions = Some(model.norm_fractions(&chain, &alpha));
                }
                if agp.norm_traces {
                    r.traces = Some(model.norm_traces(&chain, &alpha));
                }
            }
            r
        }
        ModelSpec::IsingLongitudinal(m) => {
            let measure = overridden.unwrap_or_else(|| m.measure());
            if with_agp {
                // The AGP of the annealing model is the truncated one on the declared bases.
                let (alpha, coefficients) = ising_truncated(m, time, &measure, opts)?;
                let chain =
                    build_spectral_chain(&m.dense_hamiltonian(time)?, &m.dense_derivative(time)?, &measure, opts)?;
                let mut r = PointResult::from_chain(&chain.chain);
                r.alpha = Some(alpha);
                r.truncated_coefficients = Some(coefficients);
                r
            } else {
                let chain =
                    build_spectral_chain(&m.dense_hamiltonian(time)?, &m.dense_derivative(time)?, &measure, opts)?;
                PointResult::from_chain(&chain.chain)
            }
        }
        ModelSpec::TwoLevel(_) | ModelSpec::TfimRamp(_) => {
            let protocol = exp.protocol()?.expect("time-dependent model");
            let measure = overridden.unwrap_or_else(|| protocol.measure());
            PointResult::from_chain(&build_krylov_chain(
                &protocol.hamiltonian(time)?,
                &protocol.derivative(time)?,
                &measure,
                opts,
            )?)
        }
    };
    if with_agp && result.alpha.is_none() {
        result.alpha = Some(alpha_of(&result.b)?);
    }
    Ok(result)
}

fn point_cells(index: usize, point: &Point) -> Vec<Cell> {
    vec![Cell::from(index), Cell::Text(point.label.clone()), Cell::from(point.time)]
}

fn header(extra: &[&str]) -> Vec<String> {
    ["point", "label", "t"].iter().chain(extra).map(|s| s.to_string()).collect()
}

fn chain_metadata(points: &[Point], results: &[PointResult]) -> serde_json::Value {
    let entries: Vec<serde_json::Value> = points
        .iter()
        .zip(results)
        .map(|(p, r)| {
            serde_json::json!({
                "label": p.label,
                "t": p.time,
                "parameter": p.parameter,
                "d": r.b.len(),
                "parity": r.parity(),
                "truncated": r.truncated,
                "b": r.b,
            })
        })
        .collect();
    serde_json::Value::from(entries)
}

/// Lanczos coefficients at every point: table `b` with one row per `(point, n)`.
pub fn cmd_lanczos(exp: &Experiment) -> Result<Report> {
    let points = exp.points()?;
    let results = exp.map_parallel(&points, |p| compute_point(exp, p, false))?;
    let mut table = Table::with_header("b", header(&["n", "b_n"]));
    for (i, (p, r)) in points.iter().zip(&results).enumerate() {
        for (n, b) in r.b.iter().enumerate() {
            let mut row = point_cells(i, p);
            row.extend([Cell::from(n), Cell::from(*b)]);
            table.push(row);
        }
    }
    Ok(Report {
        provenance: exp.provenance("lanczos")?,
        metadata: serde_json::json!({ "lanczos": exp.config.lanczos, "points": chain_metadata(&points, &results) }),
        tables: vec![table],
    })
}

/// AGP coefficients at every point (table `alpha`) plus whichever decompositions the
/// `[agp]` section asks for.
pub fn cmd_agp(exp: &Experiment) -> Result<Report> {
    let agp = &exp.config.agp;
    match exp.config.model {
        ModelSpec::Stirap(_) => {}
        _ if agp.terms => {
            return Err(CdError::Config("`terms` is available for the stirap model only".into()));
        }
        _ => {}
    }
    if (agp.norm_fractions || agp.norm_traces)
        && !matches!(exp.config.model, ModelSpec::XxAnneal(_) | ModelSpec::Toda(_))
    {
        return Err(CdError::Config("norm fractions and traces are available for XX chains only".into()));
    }
    let points = exp.points()?;
    let results = exp.map_parallel(&points, |p| compute_point(exp, p, true))?;
    let mut tables = Vec::new();

    let mut alpha = Table::with_header("alpha", header(&["k", "alpha_k"]));
    for (i, (p, r)) in points.iter().zip(&results).enumerate() {
        for (k, a) in r.alpha.as_deref().unwrap_or(&[]).iter().enumerate() {
            let mut row = point_cells(i, p);
            row.extend([Cell::from(k + 1), Cell::from(*a)]);
            alpha.push(row);
        }
    }
    tables.push(alpha);

    if agp.terms {
        let mut terms = Table::with_header("terms", header(&["k", "a_1", "a_2", "a_3"]));
        let mut totals =
            Table::with_header("totals", header(&["a_1", "a_2", "a_3", "reference_1", "reference_2", "reference_3"]));
        for (i, (p, r)) in points.iter().zip(&results).enumerate() {
            let (rows, reference) = r.terms.as_ref().expect("terms requested");
            let mut sum = [0.0; 3];
            for (k, row) in rows.iter().enumerate() {
                let mut cells = point_cells(i, p);
                cells.push(Cell::from(k + 1));
                cells.extend(row.iter().map(|x| Cell::from(*x)));
                terms.push(cells);
                for mu in 0..3 {
                    sum[mu] += row[mu];
                }
            }
            let mut cells = point_cells(i, p);
            cells.extend(sum.iter().chain(reference).map(|x| Cell::from(*x)));
            totals.push(cells);
        }
        tables.push(terms);
        tables.push(totals);
    }
    if agp.norm_fractions {
        let mut q = Table::with_header("fractions", header(&["p", "q_per_term", "q_exact"]));
        for (i, (p, r)) in points.iter().zip(&results).enumerate() {
            let f = r.fractions.as_ref().expect("fractions requested");
            for (j, body) in f.bodies.iter().enumerate() {
                let mut row = point_cells(i, p);
                row.extend([Cell::from(*body), Cell::from(f.per_term[j]), Cell::from(f.exact[j])]);
                q.push(row);
            }
        }
        tables.push(q);
    }
    if agp.norm_traces {
        let mut t = Table::with_header("norms", header(&["exact", "two_body", "first_term", "nested_commutator"]));
        for (i, (p, r)) in points.iter().zip(&results).enumerate() {
            let n = r.traces.expect("traces requested");
            let mut row = point_cells(i, p);
            row.extend([n.exact, n.two_body, n.first_term, n.nested_commutator].map(Cell::from));
            t.push(row);
        }
        tables.push(t);
    }
    if matches!(exp.config.model, ModelSpec::IsingLongitudinal(_)) {
        let mut c = Table::with_header("coefficients", header(&["a_1", "a_2", "a_3"]));
        for (i, (p, r)) in points.iter().zip(&results).enumerate() {
            let mut row = point_cells(i, p);
            row.extend(r.truncated_coefficients.expect("annealing model").map(Cell::from));
            c.push(row);
        }
        tables.push(c);
    }
    let alphas: Vec<serde_json::Value> = points
        .iter()
        .zip(&results)
        .map(|(p, r)| serde_json::json!({ "label": p.label, "t": p.time, "d": r.b.len(), "parity": r.parity(), "truncated": r.truncated, "alpha": r.alpha }))
        .collect();
    Ok(Report {
        provenance: exp.provenance("agp")?,
        metadata: serde_json::json!({ "lanczos": exp.config.lanczos, "agp": exp.config.agp, "points": alphas }),
        tables,
    })
}

/// The protocol with its final time replaced.
fn with_final_time(exp: &Experiment, t_final: f64) -> Result<(Box<dyn Protocol>, Option<CdSource>)> {
    let truncated = |m: &IsingLongitudinal| -> Result<CdSource> {
        Ok(CdSource::Truncated { ansatz: m.odd_basis()?, even: Some(m.even_basis()?) })
    };
    Ok(match &exp.config.model {
        ModelSpec::TwoLevel(m) => (Box::new(crate::models::two_level::TwoLevelSweep { t_final, ..m.clone() }), None),
        ModelSpec::Stirap(m) => (Box::new(crate::models::stirap::Stirap { t_final, ..m.clone() }), None),
        ModelSpec::TfimRamp(m) => (Box::new(crate::models::tfim::TfimRamp { t_final, ..m.clone() }), None),
        ModelSpec::IsingLongitudinal(m) => {
            let m = IsingLongitudinal { t_final, ..m.clone() };
            let source = truncated(&m)?;
            (Box::new(m), Some(source))
        }
        ModelSpec::XxAnneal(spec) => {
            let mut p = spec.protocol()?;
            p.t_final = t_final;
            (Box::new(p), None)
        }
        ModelSpec::Toda(m) => (Box::new(crate::models::toda::TodaFlow { t_final, ..m.clone() }), None),
        other => {
            return Err(CdError::Config(format!("evolve needs a time-dependent model, not {}", other.kind())));
        }
    })
}

#[derive(Clone, Debug, Serialize)]
struct RunSummary {
    t_final: f64,
    cd: &'static str,
    final_fidelity: f64,
    step: f64,
    steps_per_interval: usize,
    refinement_change: f64,
    max_norm_deviation: f64,
}

/// Final fidelity against the tracked level for every final time and CD choice: table
/// `fidelity` with columns `t_f, f_<choice>...` and per-snapshot traces in `trace`.
pub fn cmd_evolve(exp: &Experiment) -> Result<Report> {
    let spec = exp.config.evolve.as_ref().ok_or_else(|| CdError::Config("evolve needs an [evolve] section".into()))?;
    if spec.cd.is_empty() {
        return Err(CdError::Config("[evolve] cd lists no CD choices".into()));
    }
    if exp.config.measure.is_some() {
        return Err(CdError::Config("evolve uses each model's own measure; remove `measure`".into()));
    }
    let finals = spec.t_final.values()?;
    let jobs: Vec<(usize, CdChoice)> = (0..finals.len()).flat_map(|i| spec.cd.iter().map(move |c| (i, *c))).collect();
    let opts = EvolveOptions { tolerance: spec.tolerance, target_level: Some(spec.level), ..EvolveOptions::default() };
    let runs = exp.map_parallel(&jobs, |&(i, choice)| {
        let (protocol, truncated) = with_final_time(exp, finals[i])?;
        let source = match choice {
            CdChoice::None => CdSource::None,
            CdChoice::Exact => CdSource::Exact,
            CdChoice::Krylov => CdSource::Krylov,
            CdChoice::FirstOrderNc => CdSource::FirstOrderNc,
            CdChoice::Truncated => truncated.ok_or_else(|| {
                CdError::Config(format!("no truncated basis is declared for the {} model", exp.config.model.kind()))
            })?,
        };
        let grid = TimeGrid::full(protocol.as_ref(), spec.intervals)?;
        let psi0: DVector<C64> = eigenstate(protocol.as_ref(), 0.0, spec.level)?;
        let run = evolve(protocol.as_ref(), &source, &psi0, &grid, &opts)?;
        Ok((source.name(), run))
    })?;

    let mut columns = vec!["t_f".to_string()];
    columns.extend(spec.cd.iter().map(|c| {
        format!("f_{}", serde_json::to_value(c).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default())
    }));
    let mut fidelity = Table::with_header("fidelity", columns);
    let mut trace = Table::new("trace", &["t_f", "cd", "t", "f"]);
    let mut summaries = Vec::new();
    for (i, tf) in finals.iter().enumerate() {
        let mut row = vec![Cell::from(*tf)];
        for (j, _) in spec.cd.iter().enumerate() {
            let (name, run) = &runs[i * spec.cd.len() + j];
            let f = run.final_fidelity().expect("target level set");
            row.push(Cell::from(f));
            for (t, fj) in run.times.iter().zip(&run.fidelity) {
                trace.push(vec![Cell::from(*tf), Cell::from(*name), Cell::from(*t), Cell::from(*fj)]);
            }
            summaries.push(RunSummary {
                t_final: *tf,
                cd: name,
                final_fidelity: f,
                step: run.step,
                steps_per_interval: run.steps_per_interval,
                refinement_change: run.refinement_change,
                max_norm_deviation: run.max_norm_deviation,
            });
        }
        fidelity.push(row);
    }
    Ok(Report {
        provenance: exp.provenance("evolve")?,
        metadata: serde_json::json!({ "evolve": spec, "runs": summaries }),
        tables: vec![fidelity, trace],
    })
}
