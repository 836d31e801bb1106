//! The experiment suites. Each one returns its records and writes its own
//! artifacts; a failed step becomes a failed record rather than an abort.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roughlayer::analytic::disk_np_eigenvalue;
use roughlayer::boundary::{
    contraction_constants, induced_norm, neumann_series_solve, np_spectrum, BoundaryOperators, InducedNorm, OperatorKind,
    SeriesSign,
};
use roughlayer::imaging::{monotone_experiment, multipole_data, representation_reconstruct, InclusionProblem};
use roughlayer::mesh::{build_dof_map, write_mesh, InterfaceShape, MeshBuilder, Polyline, Region, TriMesh};
use roughlayer::operators::SolveContext;
use roughlayer::render::{field_svg, mesh_svg, write_svg};
use roughlayer::report::{emit_report, Record, ReportFormat, Scope};
use roughlayer::spaces::{trace_gram, GramSide, TraceVector};
use roughlayer::Result;
use serde::Serialize;

use crate::config::{Config, Sign, Suite};

/// Run-wide settings that may be overridden on the command line.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub out_dir: PathBuf,
    pub seed: u64,
}

#[derive(Debug)]
pub struct SuiteOutcome {
    pub suite: Suite,
    pub records: Vec<Record>,
    pub seconds: f64,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }
}

pub fn run_suite(suite: Suite, cfg: &Config, run: &RunSettings) -> SuiteOutcome {
    let start = Instant::now();
    let scope = Scope::new(suite.name(), &cfg.shape.to_string(), cfg.h(), cfg.box_half_width());
    let mut records = Vec::new();
    let result = match suite {
        Suite::Mesh => mesh_suite(cfg, run, &scope, &mut records),
        Suite::Calderon => calderon_suite(cfg, run, &scope, &mut records),
        Suite::Spectrum => spectrum_suite(cfg, run, &scope, &mut records),
        Suite::Contraction => contraction_suite(cfg, &scope, &mut records),
        Suite::Series => series_suite(cfg, run, &scope, &mut records),
        Suite::Imaging => imaging_suite(cfg, run, &scope, &mut records),
        Suite::Convergence => convergence_suite(cfg, run, &scope, &mut records),
    };
    if let Err(e) = result {
        eprintln!("{}: {e}", suite.name());
        records.push(scope.failure(&format!("error: {e}")));
    }
    let seconds = start.elapsed().as_secs_f64();
    records.push(scope.info("runtime_s", seconds));
    if let Err(e) = write_reports(cfg, &run.out_dir, &format!("{}_report", suite.name()), &records) {
        eprintln!("{}: cannot write report: {e}", suite.name());
        records.push(scope.failure("report_written"));
    }
    SuiteOutcome { suite, records, seconds }
}

pub fn write_reports(cfg: &Config, dir: &Path, stem: &str, records: &[Record]) -> Result<()> {
    if cfg.output.csv {
        emit_report(records, ReportFormat::Csv, &dir.join(format!("{stem}.csv")))?;
    }
    if cfg.output.json {
        emit_report(records, ReportFormat::Json, &dir.join(format!("{stem}.json")))?;
    }
    Ok(())
}

fn builder(cfg: &Config, interface: &Polyline, h: f64) -> MeshBuilder {
    let mut b = MeshBuilder::new(interface.clone(), cfg.box_half_width()).h_target(h).grading(cfg.mesh.grading);
    if let Some(hm) = cfg.mesh.h_max {
        b = b.h_max(hm);
    }
    b
}

fn build_mesh(cfg: &Config) -> Result<TriMesh> {
    builder(cfg, &cfg.interface, cfg.h()).build()
}

fn operators(cfg: &Config) -> Result<(SolveContext, BoundaryOperators)> {
    let mesh = build_mesh(cfg)?;
    let ctx = SolveContext::new(&mesh, cfg.problem.k)?;
    let ops = BoundaryOperators::build(&ctx)?;
    Ok((ctx, ops))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    write_text(path, &(text + "\n"))
}

fn mesh_suite(cfg: &Config, run: &RunSettings, s: &Scope, out: &mut Vec<Record>) -> Result<()> {
    let mut b = builder(cfg, &cfg.interface, cfg.h());
    for c in &cfg.inclusions {
        b = b.inclusion(c.clone());
    }
    let mesh = b.build()?;
    mesh.validate()?;
    let dofs = build_dof_map(&mesh)?;
    let bw = mesh.box_half_width();
    let area = mesh.area_where(|_| true);
    out.push(s.info("vertices", mesh.num_vertices() as f64));
    out.push(s.info("triangles", mesh.num_triangles() as f64));
    out.push(s.info("interface_nodes", dofs.num_interface() as f64));
    out.push(s.info("dofs", dofs.num_dofs() as f64));
    out.push(s.at_least("min_angle_deg", mesh.min_angle_deg(), cfg.tolerances.min_angle));
    out.push(s.at_most("area_defect", (area - 4.0 * bw * bw).abs() / (4.0 * bw * bw), 1e-12));
    let inner = cfg.interface.signed_area().abs();
    out.push(s.at_most("inner_area_defect", (mesh.area_where(Region::is_interior) - inner).abs() / inner, 1e-12));
    write_mesh(&mesh, &run.out_dir.join("mesh.txt"))?;
    if cfg.output.render {
        write_svg(&mesh_svg(&mesh), &run.out_dir.join("mesh.svg"))?;
    }
    Ok(())
}

fn calderon_suite(cfg: &Config, run: &RunSettings, s: &Scope, out: &mut Vec<Record>) -> Result<()> {
    let t = &cfg.tolerances;
    let (ctx, ops) = operators(cfg)?;
    out.push(s.info("interface_nodes", ops.dim() as f64));
    let c = ops.calderon_residuals();
    out.push(s.at_most("m_squared", c.m_squared, t.calderon));
    for (name, v) in [
        ("kv_vkstar", c.kv_vkstar),
        ("wk_kstarw", c.wk_kstarw),
        ("k2_vw", c.k2_vw),
        ("kstar2_wv", c.kstar2_wv),
        ("ci_idempotent", c.ci_idempotent),
        ("ce_idempotent", c.ce_idempotent),
        ("sum_identity", c.sum_identity),
    ] {
        out.push(s.info(name, v));
    }
    let j = ops.jump_residuals();
    out.push(s.at_most("jump_trace_inner", j.tr_inner, t.jump_trace));
    out.push(s.at_most("jump_trace_outer", j.tr_outer, t.jump_trace));
    out.push(s.at_most("jump_flux_inner", j.dn_inner, t.jump_flux));
    out.push(s.at_most("jump_flux_outer", j.dn_outer, t.jump_flux));
    out.push(s.info("kstar_paths", j.k_star_paths));
    // the Steklov-Poincare identities need an invertible V
    if cfg.problem.k > 0.0 {
        let a1 = ctx.steklov_poincare()?;
        let gram = trace_gram(ctx.forms(), GramSide::Inner)?.matrix;
        out.push(s.at_most("steklov_gram_gap", (&a1 - &gram).amax(), t.steklov_gram));
        let (r1, r2) = ops.steklov_residuals(&a1)?;
        out.push(s.at_most("steklov_identity_v", r1, t.steklov_identity));
        out.push(s.at_most("steklov_identity_w", r2, t.steklov_identity));
    }
    if cfg.output.export_operators {
        for (kind, name) in [
            (OperatorKind::V, "V"),
            (OperatorKind::W, "W"),
            (OperatorKind::K, "K"),
            (OperatorKind::Kstar, "Kstar"),
        ] {
            ops.get(kind).write_csv(&run.out_dir.join(format!("operator_{name}.csv")))?;
        }
    }
    Ok(())
}

fn disk_radius(shape: &InterfaceShape) -> Option<f64> {
    match shape {
        InterfaceShape::Circle { radius, .. } => Some(*radius),
        _ => None,
    }
}

fn spectrum_suite(cfg: &Config, run: &RunSettings, s: &Scope, out: &mut Vec<Record>) -> Result<()> {
    let t = &cfg.tolerances;
    let (_, ops) = operators(cfg)?;
    let ev = np_spectrum(&ops)?;
    let mut csv = String::from("index,eigenvalue\n");
    for (i, l) in ev.iter().enumerate() {
        let _ = writeln!(csv, "{i},{l:.16e}");
    }
    write_text(&run.out_dir.join("spectrum.csv"), &csv)?;
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    out.push(s.info("count", ev.len() as f64));
    out.push(s.above("min_eigenvalue", lo, -0.5));
    out.push(s.below("max_eigenvalue", hi, 0.5));

    let Some(r) = disk_radius(&cfg.shape) else { return Ok(()) };
    if cfg.problem.k == 0.0 {
        // the homogeneous disk has a vanishing spectrum on mean-zero densities
        let m = ev.iter().fold(0.0f64, |a, l| a.max(l.abs()));
        out.push(s.at_most("homogeneous_max_abs", m, t.homogeneous_disk));
        return Ok(());
    }
    // mode n pairs with the eigenvalue nearest its oracle value, counted
    // once for n = 0 and twice for n >= 1
    let mut csv = String::from("mode,numeric,oracle,rel_err\n");
    for n in 0..=8u32 {
        let oracle = disk_np_eigenvalue(n, r)?;
        let mut near: Vec<f64> = ev.clone();
        near.sort_by(|a, b| (a - oracle).abs().total_cmp(&(b - oracle).abs()));
        let copies = if n == 0 { 1 } else { 2 };
        let mut worst = 0.0f64;
        for &l in &near[..copies.min(near.len())] {
            let e = ((l - oracle) / oracle).abs();
            worst = worst.max(e);
            let _ = writeln!(csv, "{n},{l:.16e},{oracle:.16e},{e:.6e}");
        }
        match n {
            0 => out.push(s.at_most("disk_lambda0_rel_err", worst, t.disk_lambda0)),
            1 => out.push(s.at_most("disk_lambda1_rel_err", worst, t.disk_lambda1)),
            _ => out.push(s.info(&format!("disk_lambda{n}_rel_err"), worst)),
        }
    }
    write_text(&run.out_dir.join("spectrum_modes.csv"), &csv)
}

fn contraction_suite(cfg: &Config, s: &Scope, out: &mut Vec<Record>) -> Result<()> {
    let (ctx, ops) = operators(cfg)?;
    let c = contraction_constants(&ctx, &ops)?;
    let slack = cfg.tolerances.contraction_slack;
    out.push(s.below("c_plus", c.c_plus, 1.0));
    out.push(s.below("c_minus", c.c_minus, 1.0));
    out.push(s.info("bound", c.bound));
    out.push(s.at_most("c_max_minus_bound", c.c_plus.max(c.c_minus) - c.bound, slack));
    out.push(s.info("s_plus", c.s_plus));
    out.push(s.info("s_minus", c.s_minus));
    out.push(s.info("alpha", c.alpha));
    out.push(s.info("beta", c.beta));
    Ok(())
}

fn series_suite(cfg: &Config, run: &RunSettings, s: &Scope, out: &mut Vec<Record>) -> Result<()> {
    let p = &cfg.problem;
    let (ctx, ops) = operators(cfg)?;
    let c = contraction_constants(&ctx, &ops)?;
    let (sign, contraction) = match p.series_sign {
        Sign::Plus => (SeriesSign::Plus, c.c_plus),
        Sign::Minus => (SeriesSign::Minus, c.c_minus),
    };
    let q = contraction + cfg.tolerances.series_ratio_slack;
    let budget = if q < 1.0 { ((p.series_tol.ln() / q.ln()).ceil() as usize).min(p.series_max_iter) } else { p.series_max_iter };
    out.push(s.info("contraction", contraction));
    out.push(s.info("budget", budget as f64));

    let n = ops.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let random = |rng: &mut ChaCha8Rng| TraceVector((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
    let mut history = String::from("trial,iteration,residual\n");
    let (mut worst, mut most) = (0.0f64, 0usize);
    for trial in 0..p.series_trials {
        let phi = random(&mut rng);
        let r = neumann_series_solve(&ops, &phi, sign, p.series_tol, p.series_max_iter)?;
        for (i, res) in r.residuals.iter().enumerate() {
            let _ = writeln!(history, "{trial},{i},{res:.6e}");
        }
        worst = r.ratios().into_iter().fold(worst, f64::max);
        most = most.max(r.iterations);
    }
    write_text(&run.out_dir.join("series_history.csv"), &history)?;
    if p.series_trials > 0 {
        out.push(s.at_most("worst_ratio", worst, q));
        out.push(s.at_most("max_iterations", most as f64, budget as f64));
    }

    // recover a known trace from its image under the complementary operator
    let f0 = random(&mut rng);
    let kf = ops.get(OperatorKind::K).apply(&f0);
    let ksign = if sign == SeriesSign::Plus { -1.0 } else { 1.0 };
    let phi = TraceVector(f0.iter().zip(&kf).map(|(a, b)| 0.5 * a + ksign * b).collect());
    let r = neumann_series_solve(&ops, &phi, sign, p.series_tol, p.series_max_iter)?;
    let e = TraceVector(r.solution.iter().zip(f0.iter()).map(|(a, b)| a - b).collect());
    let err = induced_norm(&ops, &e, InducedNorm::Vinv)? / induced_norm(&ops, &f0, InducedNorm::Vinv)?;
    out.push(s.at_most("recovery_rel_err", err, cfg.tolerances.series_recovery));
    Ok(())
}

#[derive(Serialize)]
struct ImagingDetails<'a> {
    geometry: String,
    inclusions: &'a [String],
    contrast: f64,
    multipole: u32,
    h: f64,
    #[serde(rename = "box")]
    box_half_width: f64,
    reconstruction: roughlayer::imaging::ReconstructionReport,
    monotone: Vec<roughlayer::imaging::MonotoneReport>,
}

fn imaging_suite(cfg: &Config, run: &RunSettings, s: &Scope, out: &mut Vec<Record>) -> Result<()> {
    let t = &cfg.tolerances;
    if cfg.inclusions.is_empty() {
        return Err(roughlayer::Error::InvalidArgument("the imaging suite needs [geometry] inclusions".into()));
    }
    let mut b = builder(cfg, &cfg.interface, cfg.h());
    for c in &cfg.inclusions {
        b = b.inclusion(c.clone());
    }
    let mesh = b.build()?;
    let dofs = build_dof_map(&mesh)?;
    let g = multipole_data(&mesh, &dofs, cfg.problem.multipole);
    let all: BTreeSet<Region> = (0..cfg.inclusions.len() as u16).map(Region::Inclusion).collect();
    let p = InclusionProblem::new(mesh, all.iter().copied(), cfg.problem.contrast, g)?;

    let rec = representation_reconstruct(&p)?;
    let r = &rec.report;
    out.push(s.at_most("relative_error", r.relative_error, t.imaging_error));
    out.push(s.at_most("exterior_spread_rel", r.exterior_spread / r.interior_range, t.exterior_spread));
    out.push(s.info("phi_residual", r.phi_residual));
    if cfg.output.render {
        write_svg(&field_svg(p.mesh(), p.dofs(), &rec.u_direct)?, &run.out_dir.join("imaging_direct.svg"))?;
        write_svg(&field_svg(p.mesh(), p.dofs(), &rec.u_rep)?, &run.out_dir.join("imaging_representation.svg"))?;
    }

    // the empty set and each single region inside the full inclusion
    let mut configs = vec![(BTreeSet::new(), all.clone())];
    if all.len() > 1 {
        configs.extend(all.iter().map(|&r| (BTreeSet::from([r]), all.clone())));
    }
    let mut monotone = Vec::new();
    for (d1, d2) in &configs {
        let m = monotone_experiment(&p, d1, d2)?;
        let tag = format!("{:?}_in_{:?}", m.d1, m.d2).replace(' ', "");
        out.push(s.at_most(&format!("monotone_residual_{tag}"), m.identity_residual, t.monotone_residual));
        out.push(s.above(&format!("monotone_gap_{tag}"), m.boundary_gap, t.monotone_gap));
        monotone.push(m);
    }
    let details = ImagingDetails {
        geometry: cfg.shape.to_string(),
        inclusions: &cfg.geometry.inclusions,
        contrast: cfg.problem.contrast,
        multipole: cfg.problem.multipole,
        h: cfg.h(),
        box_half_width: cfg.box_half_width(),
        reconstruction: rec.report.clone(),
        monotone,
    };
    write_json(&run.out_dir.join("imaging_details.json"), &details)
}

fn convergence_suite(cfg: &Config, run: &RunSettings, s: &Scope, out: &mut Vec<Record>) -> Result<()> {
    let radius = disk_radius(&cfg.shape).filter(|_| cfg.problem.k > 0.0);
    let mut csv = String::from("level,h,interface_nodes,m_squared,min_eigenvalue,max_eigenvalue,lambda0_rel_err\n");
    let mut errs = Vec::new();
    let mut mesh = build_mesh(cfg)?;
    for level in 0..cfg.mesh.levels {
        if level > 0 {
            mesh = mesh.refine_uniform();
        }
        let h = cfg.h() / 2f64.powi(level as i32);
        let ctx = SolveContext::new(&mesh, cfg.problem.k)?;
        let ops = BoundaryOperators::build(&ctx)?;
        let m2 = ops.calderon_residuals().m_squared;
        let ev = np_spectrum(&ops)?;
        let e0 = match radius {
            Some(r) => {
                let oracle = disk_np_eigenvalue(0, r)?;
                ev.iter().map(|l| ((l - oracle) / oracle).abs()).fold(f64::INFINITY, f64::min)
            }
            None => f64::NAN,
        };
        let _ = writeln!(csv, "{level},{h:.6e},{},{m2:.6e},{:.10e},{:.10e},{e0:.6e}", ops.dim(), ev[0], ev[ev.len() - 1]);
        out.push(s.at_most(&format!("m_squared_level{level}"), m2, cfg.tolerances.calderon));
        errs.push(e0);
    }
    write_text(&run.out_dir.join("convergence.csv"), &csv)?;
    if radius.is_some() {
        for (i, w) in errs.windows(2).enumerate() {
            out.push(s.below(&format!("lambda0_err_level{}_over_level{i}", i + 1), w[1] / w[0], 1.0));
        }
    }
    Ok(())
}
