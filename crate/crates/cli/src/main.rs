use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use padyn_core::borel::{default_ladder, BorelJ};
use padyn_core::flows::{AffineFlow, GroupTag};
use padyn_core::padic::{Config, Mat2};
use padyn_core::proj::ProjSpace;
use padyn_core::residues::{build_group, ResidueReport};
use padyn_core::sl2::{ellis_group, iwasawa, GFlow, Sl2Context};
use padyn_core::verify::{self, CRITERIA};
use padyn_core::{rng, Error};

#[derive(Parser)]
#[command(
    name = "padyn",
    version,
    about = "Finite-level type-space dynamics of p-adic groups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct Dials {
    /// Prime p.
    #[arg(long = "p", default_value_t = 5)]
    p: u64,
    /// Power-residue level n.
    #[arg(long = "n", default_value_t = 2)]
    n: u32,
    /// Congruence level m.
    #[arg(long = "m", default_value_t = 1)]
    m: u32,
    /// Valuation window w.
    #[arg(long = "w", default_value_t = 2)]
    w: u32,
    /// Separation between ladder rungs.
    #[arg(long = "gap", default_value_t = 8)]
    gap: u64,
}

impl Dials {
    fn config(&self) -> Result<Config, Error> {
        Config::new(self.p, self.n, self.m, self.w, self.gap)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Power-residue group table and induced valuation map.
    Residues(Dials),
    /// Truncated type space of an affine group.
    Flows {
        #[arg(long, value_enum)]
        group: Group,
        #[command(flatten)]
        dials: Dials,
    },
    /// Borel idempotent and the product table on J.
    Borel(Dials),
    /// Iwasawa factorization g = t h of a unimodular matrix.
    Iwasawa {
        /// Row-major JSON, e.g. '[["1","0"],["1/5","1"]]'.
        #[arg(long)]
        matrix: String,
        #[command(flatten)]
        dials: Dials,
    },
    /// Minimal SL(2) flow at levels (m, n).
    MinimalFlow {
        #[arg(long)]
        tower: bool,
        #[command(flatten)]
        dials: Dials,
    },
    /// Ellis group q0 * J.
    Ellis {
        #[arg(long)]
        tower: bool,
        #[command(flatten)]
        dials: Dials,
    },
    /// Projective line: collapse or minimality.
    Proj {
        #[arg(value_enum)]
        mode: ProjMode,
        #[command(flatten)]
        dials: Dials,
    },
    /// Acceptance suites.
    Verify {
        /// Run every suite.
        #[arg(long, conflicts_with = "criterion")]
        all: bool,
        /// Run a single suite by number.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=10))]
        criterion: Option<u8>,
        #[command(flatten)]
        dials: Dials,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Group {
    Ga,
    Gm,
    ZpAdd,
    ZpMul,
}

impl From<Group> for GroupTag {
    fn from(g: Group) -> Self {
        match g {
            Group::Ga => GroupTag::Ga,
            Group::Gm => GroupTag::Gm,
            Group::ZpAdd => GroupTag::ZpAdd,
            Group::ZpMul => GroupTag::ZpMul,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProjMode {
    Collapse,
    Minimal,
}

#[derive(Serialize)]
struct SuiteResult {
    id: u8,
    name: &'static str,
    passed: bool,
    checks: u64,
    detail: Value,
}

/// Consolidated output of `verify`. Timings go to stderr so the report is
/// byte-identical across runs.
#[derive(Serialize)]
struct RunReport {
    version: &'static str,
    seed: u64,
    config: Config,
    suites: Vec<SuiteResult>,
    passed: bool,
}

enum Failure {
    Usage(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NotPrime(_) | Error::LevelOutOfBounds(_) | Error::Parse(_) => Failure::Usage(e),
            other => Failure::Runtime(other),
        }
    }
}

/// JSON output plus whether every check in it held.
type Outcome = (Value, bool);

fn to_json<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn residues(d: &Dials) -> Result<Outcome, Failure> {
    let c = d.config()?;
    let report = ResidueReport::new(&build_group(c.prime, c.residue_level)?);
    eprintln!(
        "residue group at p = {}, n = {}: order {}, valuation map injective: {}",
        c.prime, c.residue_level, report.order, report.v_map_injective
    );
    let ok = report.axioms_hold;
    Ok((to_json(&report), ok))
}

fn flows(group: Group, d: &Dials) -> Result<Outcome, Failure> {
    let c = d.config()?;
    let report = AffineFlow::new(group.into(), &c)?.report()?;
    eprintln!(
        "{} flow: {} states, {} minimal subflows",
        report.group_tag,
        report.states,
        report.minimal_subflows.len()
    );
    Ok((to_json(&report), true))
}

fn borel(d: &Dials) -> Result<Outcome, Failure> {
    let c = d.config()?;
    let report = BorelJ::build(&c, &default_ladder(&c)?)?.report();
    eprintln!(
        "Borel J: order {}, idempotent {}, group {}",
        report.order, report.idempotent_check, report.is_group
    );
    let ok = report.idempotent_check && report.is_group && report.iso_to_residue_group;
    Ok((to_json(&report), ok))
}

fn iwasawa_cmd(matrix: &str, d: &Dials) -> Result<Outcome, Failure> {
    let c = d.config()?;
    let g = Mat2::from_json(c.prime, matrix)?;
    let (t, h) = iwasawa(&g)?;
    let h = h.to_matrix(c.prime);
    let reconstructs = t.mul(&h) == g;
    let t_integral = t.is_integral() && t.is_sl2();
    eprintln!("g = t h: {reconstructs}");
    let out = json!({
        "g": g,
        "t": t,
        "h": h,
        "reconstructs": reconstructs,
        "t_in_sl2_zp": t_integral,
    });
    Ok((out, reconstructs && t_integral))
}

fn minimal_flow(tower: bool, d: &Dials) -> Result<Outcome, Failure> {
    let c = d.config()?;
    let report = GFlow::new(Sl2Context::from_config(&c)?)?.report(tower)?;
    eprintln!(
        "SL(2) flow: {} points, strongly connected {}, idempotent {}, Ellis order {}",
        report.size, report.strongly_connected, report.idempotent, report.ellis.order
    );
    let ok = report.strongly_connected && report.idempotent && report.ellis.iso_checks.all();
    Ok((to_json(&report), ok))
}

fn ellis(tower: bool, d: &Dials) -> Result<Outcome, Failure> {
    let c = d.config()?;
    let report = ellis_group(&Sl2Context::from_config(&c)?, tower)?;
    eprintln!(
        "Ellis group: order {}, cyclic {}",
        report.order, report.cyclic
    );
    let ok = report.iso_checks.all() && report.tower_commutes;
    Ok((to_json(&report), ok))
}

fn proj(mode: ProjMode, d: &Dials) -> Result<Outcome, Failure> {
    let c = d.config()?;
    let space = ProjSpace::from_config(&c)?;
    match mode {
        ProjMode::Collapse => {
            let r = space.collapse_check()?;
            eprintln!("collapse over {} types: {}", r.states, r.collapses);
            let ok = r.collapses && r.p0_lands_at_infinity && r.q0_constant_at_infinity;
            Ok((to_json(&r), ok))
        }
        ProjMode::Minimal => {
            let r = space.minimality_report()?;
            eprintln!(
                "{} states, strongly connected {}, proximal {}",
                r.states, r.strongly_connected, r.proximal
            );
            let ok = r.strongly_connected && r.proximal;
            Ok((to_json(&r), ok))
        }
    }
}

fn verify_cmd(all: bool, criterion: Option<u8>, d: &Dials) -> Result<Outcome, Failure> {
    let c = d.config()?;
    let ids: Vec<u8> = match (all, criterion) {
        (_, Some(id)) => vec![id],
        _ => CRITERIA.iter().map(|(id, _)| *id).collect(),
    };
    let mut suites = Vec::new();
    for id in ids {
        let start = Instant::now();
        let r = verify::run(id, &c)?;
        eprintln!(
            "criterion {:>2} {}  {} ({} checks, {:.1}s)",
            r.id,
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.checks,
            start.elapsed().as_secs_f64()
        );
        suites.push(SuiteResult {
            id: r.id,
            name: r.name,
            passed: r.passed,
            checks: r.checks,
            detail: r.detail,
        });
    }
    let passed = suites.iter().all(|s| s.passed);
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION"),
        seed: rng::seed(),
        config: c,
        suites,
        passed,
    };
    Ok((to_json(&report), passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Residues(d) => residues(d),
        Command::Flows { group, dials } => flows(*group, dials),
        Command::Borel(d) => borel(d),
        Command::Iwasawa { matrix, dials } => iwasawa_cmd(matrix, dials),
        Command::MinimalFlow { tower, dials } => minimal_flow(*tower, dials),
        Command::Ellis { tower, dials } => ellis(*tower, dials),
        Command::Proj { mode, dials } => proj(*mode, dials),
        Command::Verify {
            all,
            criterion,
            dials,
        } => verify_cmd(*all, *criterion, dials),
    };
    match outcome {
        Ok((json, ok)) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&json).expect("valid JSON")
            );
            if ok {
                ExitCode::SUCCESS
            } else {
                eprintln!("check failed");
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
