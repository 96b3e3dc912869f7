use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use pfgamma_core::check::gradient_check;
use pfgamma_core::limit::{self, limsup_check, optimal_profile, LimitModel};
use pfgamma_core::operator::{
    classify_ellipticity, kappa_bounds, kernel_residual, KernelField, DEFAULT_WITNESS_TOL,
};
use pfgamma_core::solver::{alternate_minimize, eps_sweep_with, initialize, SweepRow};
use pfgamma_core::{snapshot, Error, FirstOrderOperator, Functional, PsiSpec, RhoRule, Scenario};

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Phase-field fracture experiments: operator classification, limit
/// constants, profiles, minimization, ε-sweeps and limsup checks.
#[derive(Parser, Debug)]
#[command(name = "pfgamma", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Report ℝ- and ℂ-ellipticity of an operator as JSON.
    Classify {
        #[arg(long)]
        op: String,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_WITNESS_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the constants `a` and `b` of the limit energy.
    LimitConstants {
        #[command(flatten)]
        phase: PhaseArgs,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
    /// Tabulate the optimal profile as CSV.
    Profile {
        #[command(flatten)]
        phase: PhaseArgs,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value = "geometric-mean")]
        rho_rule: RhoArg,
        /// Keep every `every`-th table row.
        #[arg(long, default_value_t = 256)]
        every: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Alternating minimization at a single ε.
    Minimize {
        #[command(flatten)]
        common: ScenarioArgs,
        /// Defaults to the last entry of the schedule.
        #[arg(long)]
        eps: Option<f64>,
        /// Start from this snapshot instead of the configured initializer.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// ε-continuation sweep; one CSV row per ε.
    Sweep {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Energy of the recovery pair against `D(u, 1)` for the configured template.
    Limsup {
        #[command(flatten)]
        common: ScenarioArgs,
        /// Exit with 1 when the last ratio leaves `[1 − tol, 1 + tol]`
        /// (tolerance from `limsup.assert_tol`, default 0.2).
        #[arg(long)]
        assert: bool,
    },
    /// Finite-difference check of both energy gradients.
    GradientCheck {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long, default_value_t = 20)]
        states: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Defaults to the first entry of the schedule.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, hide = true)]
        corrupt: bool,
    },
    /// Kernel residuals and `κ` bounds of an operator as JSON.
    KernelCheck {
        #[arg(long)]
        op: String,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug, Serialize)]
struct PhaseArgs {
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    #[arg(long, default_value_t = 1.0)]
    psi0: f64,
    #[arg(long, default_value_t = 2.0)]
    m: f64,
}

impl PhaseArgs {
    fn phase(&self) -> Result<limit::PhaseParams, Error> {
        let p = limit::PhaseParams {
            gamma: self.gamma,
            q: self.q,
            psi: PsiSpec::new(self.psi0, self.m)?,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, Serialize)]
enum RhoArg {
    GeometricMean,
    Product,
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides `solver.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; defaults to `output.csv` or stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario, Error> {
        let mut s = Scenario::load(&self.scenario).map_err(|e| match e {
            Error::Io(io) => Error::Config {
                key: "<file>".into(),
                reason: format!("{}: {io}", self.scenario.display()),
            },
            other => other,
        })?;
        if let Some(seed) = self.seed {
            s.solver.seed = seed;
        }
        if s.needs_ellipticity_warning()? {
            eprintln!("warning: the configured operator is not C-elliptic; proceeding because of the override flag");
        }
        Ok(s)
    }

    fn destination(&self, s: &Scenario) -> Option<PathBuf> {
        self.out.clone().or_else(|| s.output.csv.clone())
    }
}

enum Failure {
    Assertion(String),
    Failed(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Failed(e)
    }
}

fn header(seed: u64, hash: &str) -> String {
    format!("# pfgamma {VERSION} seed={seed} scenario={hash}\n")
}

fn digest_of<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("arguments serialize");
    hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
}

fn emit(dest: Option<&Path>, text: &str) -> Result<(), Error> {
    match dest {
        Some(path) => snapshot::write_atomic(path, text.as_bytes()),
        None => match std::io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        },
    }
}

fn csv_body<R: Serialize>(rows: &[R], columns: &[&str]) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(columns).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
}

const SWEEP_COLUMNS: [&str; 11] = [
    "eps",
    "eta",
    "E_total",
    "E_A",
    "E_rest",
    "E_psi",
    "E_gradv",
    "a_variation",
    "psi_mass",
    "D_limit_prediction",
    "runtime_s",
];

type SweepCsvRow = (
    f64,
    f64,
    f64,
    f64,
    f64,
    f64,
    f64,
    f64,
    f64,
    Option<f64>,
    f64,
);

fn sweep_record(r: &SweepRow, prediction: Option<f64>) -> SweepCsvRow {
    let e = &r.energy;
    let d = &r.diagnostics;
    (
        r.eps,
        r.eta,
        e.total,
        e.term_a,
        e.term_rest,
        e.term_psi,
        e.term_gradv,
        d.a_variation,
        d.psi_mass,
        prediction,
        r.runtime_s,
    )
}

const LIMSUP_COLUMNS: [&str; 8] = [
    "eps",
    "E_eps_total",
    "E_eps_A",
    "E_eps_rest",
    "E_eps_psi",
    "E_eps_gradv",
    "D_limit",
    "ratio",
];

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Classify {
            op,
            dim,
            samples,
            tol,
            seed,
        } => {
            let op = FirstOrderOperator::from_name(&op, dim)?;
            let report = classify_ellipticity(&op, samples, tol, seed)?;
            emit(
                None,
                &format!(
                    "{}\n",
                    serde_json::to_string_pretty(&report).expect("report serializes")
                ),
            )?;
        }
        Command::LimitConstants { phase, p } => {
            let ph = phase.phase()?;
            let k = limit::limit_constants(&ph, p)?;
            let kq = limit::limit_constants_quadrature(&ph, p, 1e-14)?;
            emit(
                None,
                &format!("a = {:?}\nb = {:?}\na_quadrature = {:?}\n", k.a, k.b, kq.a),
            )?;
        }
        Command::Profile {
            phase,
            eps,
            rho_rule,
            every,
            out,
        } => {
            let ph = phase.phase()?;
            let rule = match rho_rule {
                RhoArg::GeometricMean => RhoRule::GeometricMean,
                RhoArg::Product => RhoRule::Product,
            };
            let prof = optimal_profile(&ph, eps, rule)?;
            let hash = digest_of(&(&phase, eps, rho_rule, every));
            let mut text = header(0, &hash);
            text.push_str(&format!(
                "# rho={:?} tau={:?} t_end={:?}\n",
                prof.rho, prof.tau, prof.t_end
            ));
            let rows: Vec<(f64, f64, f64)> = prof.table().step_by(every.max(1)).collect();
            text.push_str(&csv_body(&rows, &["t", "w", "dw"]));
            emit(out.as_deref(), &text)?;
        }
        Command::Minimize {
            common,
            eps,
            init,
            snapshot: snap,
        } => {
            let s = common.load()?;
            let problem = s.problem()?;
            let eps = match eps {
                Some(e) => e,
                None => *s.eps_list()?.last().expect("validated nonempty"),
            };
            let params = problem.params(eps)?;
            let (grid, start) = match &init {
                Some(path) => {
                    let (g, mut f) = snapshot::load(path)?;
                    let pinned = problem.field(&g)?;
                    f.u_pinned = pinned.u_pinned;
                    f.u_values = pinned.u_values;
                    f.v_pinned = pinned.v_pinned;
                    f.enforce_pins();
                    (g, f)
                }
                None => {
                    let g = problem.grid(&s.schedule.grid.cells(&problem.extents, eps)?)?;
                    let template = problem.field(&g)?;
                    let func = Functional::new(&g, &params, &problem.op, &problem.density)?;
                    let f = initialize(&func, &template, s.initializer.start, &s.solver)?;
                    (g, f)
                }
            };
            let func = Functional::new(&grid, &params, &problem.op, &problem.density)?;
            let (field, hist) = alternate_minimize(&func, &start, &s.solver)?;
            if let Some(path) = snap.as_ref().or(s.output.snapshot.as_ref()) {
                snapshot::save(path, &grid, &field)?;
            }
            let text = header(s.solver.seed, &s.hash()) + &hist.to_csv();
            emit(common.destination(&s).as_deref(), &text)?;
            let e = hist.final_energy();
            eprintln!(
                "eps={eps:?} E_total={:?} outer={} converged={}",
                e.total,
                hist.records.len(),
                hist.converged
            );
        }
        Command::Sweep {
            common,
            snapshot: snap,
        } => {
            let s = common.load()?;
            let problem = s.problem()?;
            let prediction = s.prediction()?;
            let dest = common.destination(&s);
            let head = header(s.solver.seed, &s.hash());
            let mut rows = Vec::new();
            let result = eps_sweep_with(
                &problem,
                &s.eps_list()?,
                &s.sweep_options(),
                &s.solver,
                &mut |r| {
                    rows.push(sweep_record(r, prediction));
                },
            );
            let text = head + &csv_body(&rows, &SWEEP_COLUMNS);
            emit(dest.as_deref(), &text)?;
            let result = result?;
            if let Some(path) = snap.as_ref().or(s.output.snapshot.as_ref()) {
                snapshot::save(path, &result.grid, &result.field)?;
            }
        }
        Command::Limsup { common, assert } => {
            let s = common.load()?;
            let template = s.template.as_ref().ok_or_else(|| Error::Config {
                key: "template".into(),
                reason: "limsup needs a jump template".into(),
            })?;
            let model: LimitModel = s.limit_model()?;
            let rows = limsup_check(template, &model, &s.eps_list()?, &s.limsup_options())?;
            let records: Vec<_> = rows
                .iter()
                .map(|r| {
                    let e = &r.energy;
                    (
                        r.eps,
                        e.total,
                        e.term_a,
                        e.term_rest,
                        e.term_psi,
                        e.term_gradv,
                        r.limit.total,
                        r.ratio,
                    )
                })
                .collect();
            let text = header(s.solver.seed, &s.hash()) + &csv_body(&records, &LIMSUP_COLUMNS);
            emit(common.destination(&s).as_deref(), &text)?;
            if assert {
                let tol = s.limsup.assert_tol.unwrap_or(0.2);
                let last = rows.last().expect("nonempty schedule").ratio;
                if (last - 1.0).abs() > tol {
                    return Err(Failure::Assertion(format!(
                        "final ratio {last} deviates from 1 by more than {tol}"
                    )));
                }
            }
        }
        Command::GradientCheck {
            common,
            states,
            tol,
            eps,
            corrupt,
        } => {
            let s = common.load()?;
            let problem = s.problem()?;
            let eps = match eps {
                Some(e) => e,
                None => s.eps_list()?[0],
            };
            let params = problem.params(eps)?;
            let grid = problem.grid(&s.schedule.grid.cells(&problem.extents, eps)?)?;
            let func = Functional::new(&grid, &params, &problem.op, &problem.density)?;
            let scale = if corrupt { 1.0 + 1e-3 } else { 1.0 };
            let r = gradient_check(&func, states, s.solver.seed, scale);
            let verdict = |x: f64| if x <= tol { "PASS" } else { "FAIL" };
            emit(
                None,
                &format!(
                    "gradient_u states={} worst_rel={:e} {}\ngradient_v states={} worst_rel={:e} {}\n",
                    r.states,
                    r.worst_u,
                    verdict(r.worst_u),
                    r.states,
                    r.worst_v,
                    verdict(r.worst_v)
                ),
            )?;
            if !r.passes(tol) {
                return Err(Failure::Assertion("finite-difference check failed".into()));
            }
        }
        Command::KernelCheck {
            op,
            dim,
            samples,
            seed,
        } => {
            let op = FirstOrderOperator::from_name(&op, dim)?;
            let lo = vec![-1.0; dim];
            let hi = vec![1.0; dim];
            let skew = |w: f64| -> Vec<Vec<f64>> {
                (0..dim)
                    .map(|i| {
                        (0..dim)
                            .map(|j| {
                                if i == j {
                                    0.0
                                } else {
                                    w * (j as f64 - i as f64)
                                }
                            })
                            .collect()
                    })
                    .collect()
            };
            let translation: Vec<f64> = (0..dim).map(|i| 0.5 - i as f64).collect();
            let rigid = KernelField::RigidMotion {
                skew: skew(0.7),
                translation: translation.clone(),
            };
            let mut report = serde_json::Map::new();
            report.insert("operator".into(), op.name().into());
            report.insert("dim".into(), dim.into());
            report.insert(
                "rigid_residual".into(),
                kernel_residual(&op, &rigid, samples, &lo, &hi, seed)?.into(),
            );
            if dim >= 3 {
                let a: Vec<f64> = (0..dim).map(|i| 0.3 + 0.2 * i as f64).collect();
                let ck = KernelField::ConformalKilling {
                    skew: skew(0.4),
                    translation,
                    a,
                };
                report.insert(
                    "conformal_killing_residual".into(),
                    kernel_residual(&op, &ck, samples, &lo, &hi, seed)?.into(),
                );
            }
            let (k1, k2) = kappa_bounds(&op, samples, seed);
            report.insert("kappa".into(), serde_json::json!([k1, k2]));
            emit(
                None,
                &format!(
                    "{}\n",
                    serde_json::to_string_pretty(&report).expect("report serializes")
                ),
            )?;
        }
    }
    Ok(())
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("PFGAMMA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("PFGAMMA_THREADS must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        return Err("PFGAMMA_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Failed(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::NonFinite { .. } => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        x: f64,
        y: usize,
    }

    #[test]
    fn csv_body_writes_header_then_rows() {
        let text = csv_body(&[Row { x: 0.5, y: 2 }, Row { x: 1e-20, y: 0 }], &["x", "y"]);
        assert_eq!(text, "x,y\n0.5,2\n1e-20,0\n");
    }

    #[test]
    fn digest_is_stable_and_short() {
        let a = digest_of(&[1.0, 2.0]);
        assert_eq!(a.len(), 16);
        assert_eq!(a, digest_of(&[1.0, 2.0]));
        assert_ne!(a, digest_of(&[1.0, 2.5]));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
