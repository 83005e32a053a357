use std::fs::File;
use std::io::{BufReader, BufWriter};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use vmot::certificates::{
    extract_certificate, verify_subhedge, verify_support_equality, DualCertificate, SubhedgeReport, SupportReport,
    TransportPlan,
};
use vmot::lp::{build, read_triplet, write_triplet, LinearProgram, Mode, RowTag};
use vmot::marginals::{validate_system, MarginalSystem, Witness};
use vmot::payoff::{CostTensor, Direction};
use vmot::pdhg::{solve, Solution, SolverConfig, Termination};

use crate::artifacts::{self as art, Layout};
use crate::config::{RunConfig, VerifyConfig};
use crate::RunError;

const DIRECTIONS: [Direction; 2] = [Direction::Min, Direction::Max];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub subhedge: SubhedgeReport<f64>,
    pub support: SupportReport<f64>,
    pub tol: f64,
    /// Duality gap magnitude added to the support tolerance.
    pub gap_allowance: f64,
    pub subhedge_ok: bool,
    pub support_ok: bool,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.subhedge_ok && self.support_ok
    }
}

#[derive(Clone, Debug)]
pub struct DirectionOutcome {
    pub direction: Direction,
    /// Primal objective in the user's direction.
    pub value: f64,
    pub solution: Solution<f64>,
    pub certificate: DualCertificate<f64>,
    pub verification: Verification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionSummary {
    pub value: f64,
    pub dual_value: f64,
    pub termination: Termination,
    pub iterations: usize,
    pub kkt_passes: usize,
    pub restarts: usize,
    pub duality_gap: f64,
    pub primal_infeasibility_linf: f64,
    pub dual_infeasibility_linf: f64,
    pub max_hedge_violation: f64,
    pub mean_support_gap: f64,
    pub verified: bool,
}

/// Contents of `bounds.json`; free of timing data so identical runs give
/// identical files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsSummary {
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
    /// `lower <= upper` up to twice the solver tolerance.
    pub ordered: bool,
    pub mode: Mode,
    pub n_paths: usize,
    pub theorem_hypotheses: bool,
    pub min: DirectionSummary,
    pub max: DirectionSummary,
}

#[derive(Clone, Debug)]
pub struct BoundsResult {
    pub summary: BoundsSummary,
    pub system: MarginalSystem<f64>,
    pub min: DirectionOutcome,
    pub max: DirectionOutcome,
}

impl BoundsResult {
    pub fn lower(&self) -> f64 {
        self.summary.lower
    }

    pub fn upper(&self) -> f64 {
        self.summary.upper
    }
}

/// One row of the convex-order table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub asset: usize,
    pub from_t: usize,
    pub to_t: usize,
    pub in_convex_order: bool,
    pub irreducible: bool,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationTable {
    pub feasible: bool,
    pub theorem_hypotheses: bool,
    pub dims: Vec<usize>,
    pub pairs: Vec<PairRow>,
}

impl ValidationTable {
    pub fn of(system: &MarginalSystem<f64>) -> Self {
        let v = system.validation.as_ref().expect("validated system");
        let pairs = v
            .pairs
            .iter()
            .enumerate()
            .flat_map(|(i, per)| {
                per.iter().enumerate().map(move |(t, p)| PairRow {
                    asset: i,
                    from_t: t,
                    to_t: t + 1,
                    in_convex_order: p.in_convex_order,
                    irreducible: p.irreducible,
                    witness: p.witness.map(|w| match w {
                        Witness::MeanMismatch { mean_mu, mean_nu } => {
                            format!("means differ: {mean_mu} vs {mean_nu}")
                        }
                        Witness::Potential { x, u_mu, u_nu } => {
                            format!("potential at {x}: {u_mu} > {u_nu}")
                        }
                    }),
                })
            })
            .collect();
        Self { feasible: v.feasible, theorem_hypotheses: v.theorem_hypotheses, dims: system.dims(), pairs }
    }

    pub fn render(&self) -> String {
        let mut out = String::from("asset  t -> t+1  convex_order  irreducible  witness\n");
        for p in &self.pairs {
            out.push_str(&format!(
                "{:>5}  {:>1} -> {:<3}  {:<12}  {:<11}  {}\n",
                p.asset,
                p.from_t,
                p.to_t,
                p.in_convex_order,
                p.irreducible,
                p.witness.as_deref().unwrap_or("-")
            ));
        }
        out.push_str(&format!("feasible: {}  irreducible: {}\n", self.feasible, self.theorem_hypotheses));
        out
    }
}

/// Loads and validates the marginals, writing `system.json` and
/// `validation.json`.
pub fn validate_stage(cfg: &RunConfig) -> Result<(MarginalSystem<f64>, ValidationTable), RunError> {
    let layout = Layout::new(cfg.output_dir());
    layout.create()?;
    let system = validate_system(cfg.load_marginals()?);
    let table = ValidationTable::of(&system);
    art::write_json(&layout.file(art::SYSTEM), &system)?;
    art::write_json(&layout.file(art::VALIDATION), &table)?;
    if !table.feasible {
        let why = table
            .pairs
            .iter()
            .filter(|p| !p.in_convex_order)
            .map(|p| format!("asset {} t={}->{}: {}", p.asset, p.from_t, p.to_t, p.witness.as_deref().unwrap_or("?")))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(RunError::InfeasibleMarginals(why));
    }
    Ok((system, table))
}

fn assemble(cfg: &RunConfig, system: &MarginalSystem<f64>, direction: Direction) -> anyhow::Result<LinearProgram<f64>> {
    let cost = cfg.cost_tensor(system, direction)?;
    build(system, &cost, cfg.mode, &cfg.delta).with_context(|| format!("assembling the {} LP", direction.as_str()))
}

fn write_lp(layout: &Layout, lp: &LinearProgram<f64>) -> anyhow::Result<()> {
    let path = layout.in_dir(lp.direction, art::LP);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_triplet(lp, BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read_lp(layout: &Layout, direction: Direction) -> Result<LinearProgram<f64>, RunError> {
    let path = layout.in_dir(direction, art::LP);
    art::require(&path)?;
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_triplet(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?)
}

/// Validates, assembles both directions and exports `{min,max}/lp.txt`.
pub fn build_stage(cfg: &RunConfig) -> Result<(MarginalSystem<f64>, [LinearProgram<f64>; 2]), RunError> {
    let (system, _) = validate_stage(cfg)?;
    let layout = Layout::new(cfg.output_dir());
    let min = assemble(cfg, &system, Direction::Min)?;
    let max = assemble(cfg, &system, Direction::Max)?;
    write_lp(&layout, &min)?;
    write_lp(&layout, &max)?;
    Ok((system, [min, max]))
}

fn cost_of(lp: &LinearProgram<f64>) -> anyhow::Result<CostTensor<f64>> {
    Ok(CostTensor::new(lp.cost(), lp.index_map.clone(), lp.direction)?)
}

fn verify(
    lp: &LinearProgram<f64>,
    solution: &Solution<f64>,
    certificate: &DualCertificate<f64>,
    system: &MarginalSystem<f64>,
    vc: &VerifyConfig,
) -> anyhow::Result<Verification> {
    let cost = cost_of(lp)?;
    let subhedge = verify_subhedge(certificate, &cost, system, vc.subhedge)?;
    let plan = TransportPlan::from_solution(&solution.x, lp)?;
    let support = verify_support_equality(&plan, certificate, &cost, system, vc.support_equality.mass_floor)?;
    let gap_allowance = solution.report.duality_gap.abs();
    Ok(Verification {
        subhedge_ok: subhedge.max_violation <= vc.tol,
        support_ok: support.mean_gap <= vc.tol + gap_allowance,
        subhedge,
        support,
        tol: vc.tol,
        gap_allowance,
    })
}

fn solve_one(
    lp: &LinearProgram<f64>,
    system: &MarginalSystem<f64>,
    solver: &SolverConfig,
    vc: &VerifyConfig,
) -> Result<DirectionOutcome, RunError> {
    let solution = solve(lp, solver).with_context(|| format!("{} solve", lp.direction.as_str()))?;
    let certificate = extract_certificate(&solution.y, lp, system).map_err(anyhow::Error::from)?;
    let verification = verify(lp, &solution, &certificate, system, vc)?;
    Ok(DirectionOutcome {
        direction: lp.direction,
        value: lp.user_objective(solution.report.primal_objective),
        solution,
        certificate,
        verification,
    })
}

fn write_outcome(layout: &Layout, lp: &LinearProgram<f64>, o: &DirectionOutcome) -> anyhow::Result<()> {
    let d = o.direction;
    let sol = &o.solution;
    art::write_json(&layout.in_dir(d, art::SOLUTION), sol)?;
    art::write_json(&layout.in_dir(d, art::REPORT), &sol.report)?;
    art::write_json(&layout.in_dir(d, art::CERTIFICATE), &o.certificate)?;
    art::write_json(&layout.in_dir(d, art::VERIFICATION), &o.verification)?;

    let mut w = csv::Writer::from_path(layout.in_dir(d, art::PRIMAL_CSV))?;
    w.write_record(["row", "kind", "sense", "violation"])?;
    for (r, v) in sol.report.primal_residuals.iter().enumerate() {
        let kind = lp.row_meta.get(r).map_or("other", RowTag::kind);
        let sense = lp.senses[r].symbol().to_string();
        w.write_record([r.to_string(), kind.to_string(), sense, format!("{v:e}")])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(layout.in_dir(d, art::DUAL_CSV))?;
    w.write_record(["column", "violation"])?;
    for (j, v) in sol.report.dual_residuals.iter().enumerate() {
        w.write_record([j.to_string(), format!("{v:e}")])?;
    }
    w.flush()?;

    let r = &sol.report;
    let mut lines: Vec<String> = sol.restarts.iter().map(|rec| rec.log_line()).collect();
    lines.push(format!(
        "done termination={} iterations={} kkt_passes={} primal_obj={:e} dual_obj={:e} gap={:e} primal_inf={:e} dual_inf={:e}",
        match sol.termination {
            Termination::Optimal => "optimal",
            Termination::KktPassLimit => "kkt_pass_limit",
        },
        r.iterations,
        sol.kkt_passes,
        r.primal_objective,
        r.dual_objective,
        r.duality_gap,
        r.primal_infeasibility.linf,
        r.dual_infeasibility.linf
    ));
    art::write_lines(&layout.in_dir(d, art::PROGRESS), lines)?;
    Ok(())
}

fn solve_both(
    lps: &[LinearProgram<f64>; 2],
    system: &MarginalSystem<f64>,
    cfg: &RunConfig,
) -> Result<(DirectionOutcome, DirectionOutcome), RunError> {
    // The two solves share only read-only data.
    let (min, max) = rayon::join(
        || solve_one(&lps[0], system, &cfg.solver, &cfg.verify),
        || solve_one(&lps[1], system, &cfg.solver, &cfg.verify),
    );
    let (min, max) = (min?, max?);
    let layout = Layout::new(cfg.output_dir());
    write_outcome(&layout, &lps[0], &min)?;
    write_outcome(&layout, &lps[1], &max)?;
    Ok((min, max))
}

fn convergence(o: &DirectionOutcome, lp: &LinearProgram<f64>) -> Result<(), RunError> {
    if o.solution.converged() {
        return Ok(());
    }
    let scale = vmot::certificates::metrics::ResidualScale::new(&lp.rhs, &lp.objective);
    Err(RunError::NotConverged {
        direction: o.direction.as_str(),
        kkt_passes: o.solution.kkt_passes,
        kkt_error: vmot::certificates::kkt_error(&o.solution.report, scale),
    })
}

fn verification(o: &DirectionOutcome) -> Result<(), RunError> {
    if o.verification.passed() {
        return Ok(());
    }
    let v = &o.verification;
    Err(RunError::Verification {
        direction: o.direction.as_str(),
        detail: format!(
            "max hedge violation {:e} at path {:?}; mean support gap {:e} (tolerance {:e} + gap {:e})",
            v.subhedge.max_violation, v.subhedge.worst_path, v.support.mean_gap, v.tol, v.gap_allowance
        ),
    })
}

/// Solves the LPs exported by [`build_stage`].
pub fn solve_stage(cfg: &RunConfig) -> Result<(DirectionOutcome, DirectionOutcome), RunError> {
    let layout = Layout::new(cfg.output_dir());
    let system: MarginalSystem<f64> = art::read_json(&layout.file(art::SYSTEM))?;
    let lps = [read_lp(&layout, Direction::Min)?, read_lp(&layout, Direction::Max)?];
    let (min, max) = solve_both(&lps, &system, cfg)?;
    convergence(&min, &lps[0])?;
    convergence(&max, &lps[1])?;
    Ok((min, max))
}

/// Re-checks the stored certificates against the stored solutions.
pub fn verify_stage(cfg: &RunConfig) -> Result<[Verification; 2], RunError> {
    let layout = Layout::new(cfg.output_dir());
    let system: MarginalSystem<f64> = art::read_json(&layout.file(art::SYSTEM))?;
    let mut out = Vec::with_capacity(2);
    let mut failure = None;
    for d in DIRECTIONS {
        let lp = read_lp(&layout, d)?;
        let solution: Solution<f64> = art::read_json(&layout.in_dir(d, art::SOLUTION))?;
        let certificate: DualCertificate<f64> = art::read_json(&layout.in_dir(d, art::CERTIFICATE))?;
        certificate.check_shape(&system).map_err(anyhow::Error::from)?;
        let mut v = verify(&lp, &solution, &certificate, &system, &cfg.verify)?;
        // Stored solutions carry no residual vectors; the gap is stored.
        v.gap_allowance = solution.report.duality_gap.abs();
        v.support_ok = v.support.mean_gap <= v.tol + v.gap_allowance;
        art::write_json(&layout.in_dir(d, art::VERIFICATION), &v)?;
        if !v.passed() && failure.is_none() {
            failure = Some(RunError::Verification {
                direction: d.as_str(),
                detail: format!(
                    "max hedge violation {:e} at path {:?}; mean support gap {:e}",
                    v.subhedge.max_violation, v.subhedge.worst_path, v.support.mean_gap
                ),
            });
        }
        out.push(v);
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok([out.remove(0), out.remove(0)])
}

fn summarize(o: &DirectionOutcome) -> DirectionSummary {
    let r = &o.solution.report;
    let sign = o.direction.sign::<f64>();
    DirectionSummary {
        value: o.value,
        dual_value: sign * r.dual_objective,
        termination: o.solution.termination,
        iterations: r.iterations,
        kkt_passes: o.solution.kkt_passes,
        restarts: o.solution.restarts.len(),
        duality_gap: r.duality_gap,
        primal_infeasibility_linf: r.primal_infeasibility.linf,
        dual_infeasibility_linf: r.dual_infeasibility.linf,
        max_hedge_violation: o.verification.subhedge.max_violation,
        mean_support_gap: o.verification.support.mean_gap,
        verified: o.verification.passed(),
    }
}

/// Full pipeline: validate, build, solve both directions concurrently,
/// verify, and write every artifact plus `bounds.json`.
pub fn run_bounds(cfg: &RunConfig) -> Result<BoundsResult, RunError> {
    let (system, lps) = build_stage(cfg)?;
    let (min, max) = solve_both(&lps, &system, cfg)?;
    let tol = cfg.solver.eps_abs.max(cfg.solver.eps_rel);
    let scale = 1.0 + min.value.abs().max(max.value.abs());
    let summary = BoundsSummary {
        lower: min.value,
        upper: max.value,
        width: max.value - min.value,
        ordered: min.value <= max.value + 2.0 * tol * scale,
        mode: cfg.mode,
        n_paths: lps[0].n_vars(),
        theorem_hypotheses: system.validation.as_ref().is_some_and(|v| v.theorem_hypotheses),
        min: summarize(&min),
        max: summarize(&max),
    };
    art::write_json(&Layout::new(cfg.output_dir()).file(art::BOUNDS), &summary)?;
    convergence(&min, &lps[0])?;
    convergence(&max, &lps[1])?;
    verification(&min)?;
    verification(&max)?;
    Ok(BoundsResult { summary, system, min, max })
}
