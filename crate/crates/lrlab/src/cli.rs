//! Command-line front end: every verification as a named subcommand.
//!
//! Each subcommand runs one certification pipeline and emits a
//! machine-readable report, JSON (versioned with `"schema": 1`) or a
//! flat CSV of the main table. Reports are deterministic: identical
//! flags and seed give byte-identical output.
//!
//! Exit codes: 0 everything certified, 1 usage or validation problem,
//! 2 a certified violation (the mathematics would be falsified), 3
//! undecidable at the configured precision.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::Signed;
use serde::Serialize;

use crate::acr::{self, EtaSelection, SearchReport, ThresholdReport};
use crate::blowup::{self, DivergenceReport};
use crate::scalar::{
    compare, parse_rat, rat, rat_i, rat_pow_int, rat_str, CertifiedValue, Precision, Rat,
    Verdict,
};
use crate::scheme::{DescentPath, Scheme, DEFAULT_DEPTH_CAP};
use crate::series::{self, SeriesSpec};
use crate::stepfn::{MonotoneStep, StepFn};
use crate::{Error, Result};

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_FALSIFIED: u8 = 2;
const EXIT_UNDECIDED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "lrlab",
    version,
    about = "Certified checks for a Cantor-like step-function construction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Remaining-measure table and the removed-mass series identity.
    VerifyNullset(NullsetArgs),
    /// Integral of F^r computed by two independent routes.
    VerifyNorm(NormArgs),
    /// Rank selection for a tolerance plus a seeded adversarial stress
    /// of the bound chain.
    VerifyAcr(AcrArgs),
    /// Divergence table for the derivate probe at the origin.
    VerifyBlowup(BlowupArgs),
    /// Convergence threshold of the bound-chain tail in the mean
    /// exponent.
    Threshold(ThresholdArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    /// Demand end-to-end rational arithmetic (integer exponent only).
    Exact,
    /// Accept certified enclosures where exactness is impossible.
    Enclosure,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Enclosure => "enclosure",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Common {
    /// Construction exponent, a rational like 1, 2 or 5/4.
    #[arg(long, default_value = "1")]
    r: String,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    mode: Mode,
    #[arg(long, default_value_t = 256)]
    precision_bits: u32,
    #[arg(long, default_value_t = DEFAULT_DEPTH_CAP)]
    depth_cap: u32,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ConfigEcho {
    #[serde(with = "crate::scalar::rat_serde")]
    r: Rat,
    mode: &'static str,
    precision_bits: u32,
    depth_cap: u32,
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    schema: u32,
    command: &'static str,
    config: &'a ConfigEcho,
    data: &'a T,
}

impl Common {
    fn scheme(&self) -> Result<Scheme> {
        if self.precision_bits < 64 {
            return Err(Error::Validation(
                "precision must be at least 64 bits".into(),
            ));
        }
        let r = parse_rat(&self.r)?;
        if self.mode == Mode::Exact && !r.is_integer() {
            return Err(Error::Validation(format!(
                "exact mode requires an integer exponent, got {} (pass --mode enclosure)",
                rat_str(&r)
            )));
        }
        Scheme::new(r, Precision::new(self.precision_bits), self.depth_cap)
    }

    fn echo(&self, scheme: &Scheme) -> ConfigEcho {
        ConfigEcho {
            r: scheme.r().clone(),
            mode: self.mode.as_str(),
            precision_bits: self.precision_bits,
            depth_cap: self.depth_cap,
        }
    }

    fn render<T: Serialize>(
        &self,
        command: &'static str,
        scheme: &Scheme,
        data: &T,
        csv: String,
    ) -> Result<String> {
        match self.format {
            Format::Csv => Ok(csv),
            Format::Json => {
                let report = Report {
                    schema: 1,
                    command,
                    config: &self.echo(scheme),
                    data,
                };
                Ok(serde_json::to_string_pretty(&report)? + "\n")
            }
        }
    }
}

fn parse_positive(s: &str, what: &str) -> Result<Rat> {
    let v = parse_rat(s)?;
    if !v.is_positive() {
        return Err(Error::Validation(format!("{what} must be positive")));
    }
    Ok(v)
}

/// Runs the parsed command line and maps outcomes to exit codes.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (out, outcome) = match cli.command {
        Command::VerifyNullset(args) => (args.common.out.clone(), cmd_verify_nullset(&args)),
        Command::VerifyNorm(args) => (args.common.out.clone(), cmd_verify_norm(&args)),
        Command::VerifyAcr(args) => (args.common.out.clone(), cmd_verify_acr(&args)),
        Command::VerifyBlowup(args) => (args.common.out.clone(), cmd_verify_blowup(&args)),
        Command::Threshold(args) => (args.common.out.clone(), cmd_threshold(&args)),
    };
    match outcome {
        Ok((text, code)) => {
            let written = match out {
                Some(path) => fs::write(path, &text).map_err(Error::from),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_USAGE);
            }
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Undecidable(_) => EXIT_UNDECIDED,
                _ => EXIT_USAGE,
            })
        }
    }
}

#[derive(Args)]
struct NullsetArgs {
    #[command(flatten)]
    common: Common,
    /// Number of stages in the remaining-measure table.
    #[arg(long, default_value_t = 40)]
    ranks: u32,
    /// Radius demanded of the certified series enclosure.
    #[arg(long, default_value = "1/1000000000000000000000000000000")]
    tolerance: String,
}

#[derive(Serialize)]
struct NullsetRow {
    n: u32,
    survivor: CertifiedValue,
    /// Previous measure minus the stage's removed mass lands exactly
    /// on this measure.
    telescoping_ok: bool,
}

#[derive(Serialize)]
struct NullsetPayload {
    #[serde(with = "crate::scalar::rat_serde")]
    tolerance: Rat,
    rows: Vec<NullsetRow>,
    series: CertifiedValue,
    target: CertifiedValue,
    identity_certified: bool,
    rows_certified: bool,
}

fn cmd_verify_nullset(args: &NullsetArgs) -> Result<(String, u8)> {
    let scheme = args.common.scheme()?;
    let tol = parse_positive(&args.tolerance, "tolerance")?;
    if args.ranks == 0 {
        return Err(Error::Validation("need at least one stage".into()));
    }
    let mut rows = Vec::with_capacity(args.ranks as usize);
    let mut prev = CertifiedValue::one();
    for n in 1..=args.ranks {
        let survivor = scheme.survivor_measure(n)?;
        let stage_removed = scheme
            .removed_mass(n)?
            .mul_rat(&rat_pow_int(&rat_i(2), n as i64 - 1)?);
        let telescoped = prev.sub(&stage_removed);
        let telescoping_ok = if survivor.is_exact() && telescoped.is_exact() {
            survivor.lo() == telescoped.lo()
        } else {
            matches!(compare(&survivor, &telescoped), Verdict::Overlapping)
        };
        rows.push(NullsetRow {
            n,
            survivor: survivor.clone(),
            telescoping_ok,
        });
        prev = survivor;
    }
    let series = scheme.removed_series(&tol)?;
    let target = scheme.removed_series_target()?;
    let identity_certified = series.encloses(&target) && series.radius() <= tol;
    let rows_certified = rows.iter().all(|row| row.telescoping_ok);
    let code = if identity_certified && rows_certified {
        EXIT_OK
    } else if !matches!(compare(&series, &target), Verdict::Overlapping) {
        EXIT_FALSIFIED
    } else {
        EXIT_UNDECIDED
    };
    let mut csv = String::from("n,survivor_lo,survivor_hi,telescoping_ok\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.n,
            rat_str(row.survivor.lo()),
            rat_str(row.survivor.hi()),
            row.telescoping_ok,
        ));
    }
    let payload = NullsetPayload {
        tolerance: tol,
        rows,
        series,
        target,
        identity_certified,
        rows_certified,
    };
    let text = args
        .common
        .render("verify-nullset", &scheme, &payload, csv)?;
    Ok((text, code))
}

#[derive(Args)]
struct NormArgs {
    #[command(flatten)]
    common: Common,
    /// Largest enclosure width accepted from either route.
    #[arg(long, default_value = "1/1000000000000")]
    tolerance: String,
}

#[derive(Serialize)]
struct NormPayload {
    #[serde(with = "crate::scalar::rat_serde")]
    tolerance: Rat,
    direct: CertifiedValue,
    series: CertifiedValue,
    /// Both routes landed on the same exact rational.
    exact_equal: bool,
    /// Equal within combined enclosure radii.
    routes_overlap: bool,
    within_tolerance: bool,
}

fn cmd_verify_norm(args: &NormArgs) -> Result<(String, u8)> {
    let scheme = args.common.scheme()?;
    let tol = parse_positive(&args.tolerance, "tolerance")?;
    let prec = scheme.precision();
    let r = scheme.r().clone();
    let f = StepFn::new(scheme);
    let direct = f.integral_pow(&rat_i(0), &rat_i(1), &r, &tol)?;
    // sum n^r 2^(n-1) v_n = ((4^r - 2)/2) sum n^r (2/12^r)^n
    let four_r = CertifiedValue::exact_int(4).pow(&r, prec)?;
    let twelve_r = four_r.mul(&CertifiedValue::exact_int(3).pow(&r, prec)?);
    let spec = SeriesSpec {
        power: r.clone(),
        ratio: CertifiedValue::exact_int(2).div(&twelve_r)?,
        scale: four_r
            .sub(&CertifiedValue::exact_int(2))
            .mul_rat(&rat(1, 2)),
    };
    let series_val = series::sum_from(&spec, 1, &tol, prec)?;
    let exact_equal =
        direct.is_exact() && series_val.is_exact() && direct.lo() == series_val.lo();
    let routes_overlap = matches!(compare(&direct, &series_val), Verdict::Overlapping);
    let within_tolerance = direct.width() <= tol && series_val.width() <= tol;
    let code = if !(exact_equal || routes_overlap) {
        EXIT_FALSIFIED
    } else if within_tolerance {
        EXIT_OK
    } else {
        EXIT_UNDECIDED
    };
    let csv = format!(
        "route,lo,hi\ndirect,{},{}\nseries,{},{}\n",
        rat_str(direct.lo()),
        rat_str(direct.hi()),
        rat_str(series_val.lo()),
        rat_str(series_val.hi()),
    );
    let scheme = f.scheme();
    let payload = NormPayload {
        tolerance: tol,
        direct,
        series: series_val,
        exact_equal,
        routes_overlap,
        within_tolerance,
    };
    let text = args.common.render("verify-norm", scheme, &payload, csv)?;
    Ok((text, code))
}

#[derive(Args)]
struct AcrArgs {
    #[command(flatten)]
    common: Common,
    /// Bound the adversary has to beat.
    #[arg(long, default_value = "1/10")]
    epsilon: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    budget: u64,
}

#[derive(Serialize)]
struct AcrPayload {
    #[serde(with = "crate::scalar::rat_serde")]
    epsilon: Rat,
    seed: u64,
    budget: u64,
    selection: EtaSelection,
    search: SearchReport,
    /// Every evaluated sum certifiably stays below epsilon.
    certified_below_epsilon: bool,
}

fn cmd_verify_acr(args: &AcrArgs) -> Result<(String, u8)> {
    let scheme = args.common.scheme()?;
    let epsilon = parse_positive(&args.epsilon, "epsilon")?;
    let r = scheme.r().clone();
    let selection = acr::epsilon_to_eta(&scheme, &epsilon)?;
    let f = StepFn::new(scheme);
    let search = acr::adversarial_search(&f, selection.n, &r, args.budget, args.seed)?;
    let certified_below_epsilon = search.max_upper < epsilon && search.all_chains_certified;
    let code = if *search.best_sum.lo() >= epsilon {
        EXIT_FALSIFIED
    } else if certified_below_epsilon {
        EXIT_OK
    } else {
        EXIT_UNDECIDED
    };
    let csv = format!(
        "n,eta_lo,eta_hi,evaluated,best_sum_lo,best_sum_hi,max_upper,all_chains_certified\n{},{},{},{},{},{},{},{}\n",
        selection.n,
        rat_str(selection.eta.lo()),
        rat_str(selection.eta.hi()),
        search.evaluated,
        rat_str(search.best_sum.lo()),
        rat_str(search.best_sum.hi()),
        rat_str(&search.max_upper),
        search.all_chains_certified,
    );
    let scheme = f.scheme();
    let payload = AcrPayload {
        epsilon,
        seed: args.seed,
        budget: args.budget,
        selection,
        search,
        certified_below_epsilon,
    };
    let text = args.common.render("verify-acr", scheme, &payload, csv)?;
    Ok((text, code))
}

#[derive(Args)]
struct BlowupArgs {
    #[command(flatten)]
    common: Common,
    /// Slope parameter; repeat the flag to probe several slopes.
    #[arg(long = "alpha", default_value = "0")]
    alpha: Vec<String>,
    /// JSON file with a nondecreasing step to subtract:
    /// {"breakpoints": [...], "values": [...]}, rationals as "p/q".
    #[arg(long = "R-file")]
    r_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    n_from: u32,
    #[arg(long, default_value_t = 25)]
    n_to: u32,
    #[arg(long, default_value = "1/1000000000")]
    tolerance: String,
}

#[derive(Serialize)]
struct BlowupPayload {
    #[serde(with = "crate::scalar::rat_serde")]
    tolerance: Rat,
    rank_from: u32,
    rank_to: u32,
    step_file: Option<String>,
    probes: Vec<DivergenceReport>,
}

fn cmd_verify_blowup(args: &BlowupArgs) -> Result<(String, u8)> {
    let scheme = args.common.scheme()?;
    let tol = parse_positive(&args.tolerance, "tolerance")?;
    let r_step = match &args.r_file {
        Some(path) => serde_json::from_str::<MonotoneStep>(&fs::read_to_string(path)?)?,
        None => MonotoneStep::flat_zero(),
    };
    let f = StepFn::new(scheme);
    let mut probes = Vec::with_capacity(args.alpha.len());
    for alpha_text in &args.alpha {
        let alpha = parse_rat(alpha_text)?;
        probes.push(blowup::divergence_report(
            &f,
            &DescentPath::root(),
            &alpha,
            &r_step,
            args.n_from,
            args.n_to,
            &tol,
        )?);
    }
    let all_rows_certified = probes
        .iter()
        .all(|p| p.rows.iter().all(|row| row.certified));
    let falsified = probes.iter().any(|p| {
        p.rows
            .iter()
            .any(|row| row.quantity.hi() < row.closed_bound.lo())
    });
    let code = if falsified {
        EXIT_FALSIFIED
    } else if all_rows_certified {
        EXIT_OK
    } else {
        EXIT_UNDECIDED
    };
    let mut csv = String::from(
        "alpha,n,h_n,quantity_lower,quantity_upper,v_n_over_hn2,closed_bound,certified\n",
    );
    for probe in &probes {
        for row in &probe.rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                rat_str(&probe.alpha),
                row.n,
                rat_str(&row.h),
                rat_str(row.quantity.lo()),
                rat_str(row.quantity.hi()),
                rat_str(row.core_over_h2.lo()),
                rat_str(row.closed_bound.lo()),
                row.certified,
            ));
        }
    }
    let scheme = f.scheme();
    let payload = BlowupPayload {
        tolerance: tol,
        rank_from: args.n_from,
        rank_to: args.n_to,
        step_file: args
            .r_file
            .as_ref()
            .map(|p| p.to_string_lossy().into_owned()),
        probes,
    };
    let text = args.common.render("verify-blowup", scheme, &payload, csv)?;
    Ok((text, code))
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    common: Common,
    /// Mean exponent; repeat the flag to probe several values.
    #[arg(long = "s", default_values_t = default_s_probes())]
    s: Vec<String>,
}

fn default_s_probes() -> Vec<String> {
    vec!["1".into(), "1.585".into(), "2".into()]
}

#[derive(Serialize)]
struct ThresholdPayload {
    s_star: CertifiedValue,
    probes: Vec<ThresholdReport>,
}

fn cmd_threshold(args: &ThresholdArgs) -> Result<(String, u8)> {
    let scheme = args.common.scheme()?;
    let mut probes = Vec::with_capacity(args.s.len());
    for s_text in &args.s {
        let s = parse_rat(s_text)?;
        probes.push(acr::acs_threshold(&scheme, &s)?);
    }
    let s_star = match probes.first() {
        Some(first) => first.s_star.clone(),
        None => return Err(Error::Validation("need at least one exponent".into())),
    };
    let mut csv = String::from("s,ratio_lo,ratio_hi,verdict\n");
    for probe in &probes {
        csv.push_str(&format!(
            "{},{},{},{:?}\n",
            rat_str(&probe.s),
            rat_str(probe.ratio_limit.lo()),
            rat_str(probe.ratio_limit.hi()),
            probe.verdict,
        ));
    }
    let payload = ThresholdPayload { s_star, probes };
    let text = args.common.render("threshold", &scheme, &payload, csv)?;
    Ok((text, EXIT_OK))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common(r: &str) -> Common {
        Common {
            r: r.into(),
            mode: if r.contains('/') || r.contains('.') {
                Mode::Enclosure
            } else {
                Mode::Exact
            },
            precision_bits: 256,
            depth_cap: DEFAULT_DEPTH_CAP,
            format: Format::Json,
            out: None,
        }
    }

    #[test]
    fn config_validation_guards_mode_and_precision() {
        let mut c = common("5/4");
        c.mode = Mode::Exact;
        assert!(matches!(c.scheme(), Err(Error::Validation(_))));
        c.mode = Mode::Enclosure;
        assert!(c.scheme().is_ok());

        let mut c = common("1");
        c.precision_bits = 32;
        assert!(matches!(c.scheme(), Err(Error::Validation(_))));

        let c = common("not-a-number");
        assert!(matches!(c.scheme(), Err(Error::Parse(_))));
    }

    #[test]
    fn nullset_certifies_and_reports() {
        let args = NullsetArgs {
            common: common("1"),
            ranks: 10,
            tolerance: "1/1000000000000000000000000000000".into(),
        };
        let (text, code) = cmd_verify_nullset(&args).unwrap();
        assert_eq!(code, EXIT_OK);
        assert!(text.contains("\"schema\": 1"));
        assert!(text.contains("\"command\": \"verify-nullset\""));
        // (2/4)^10
        assert!(text.contains("1/1024"));
        assert!(text.contains("\"identity_certified\": true"));

        let args = NullsetArgs {
            common: Common {
                format: Format::Csv,
                ..common("2")
            },
            ranks: 5,
            tolerance: "1/1000000000000000000000000000000".into(),
        };
        let (text, code) = cmd_verify_nullset(&args).unwrap();
        assert_eq!(code, EXIT_OK);
        assert_eq!(text.lines().count(), 6);
        // (2/16)^5
        assert!(text.contains("1/32768"));
    }

    #[test]
    fn norm_routes_agree_exactly_for_integer_exponent() {
        let args = NormArgs {
            common: common("1"),
            tolerance: "1/1000000000000".into(),
        };
        let (text, code) = cmd_verify_norm(&args).unwrap();
        assert_eq!(code, EXIT_OK);
        assert!(text.contains("\"exact_equal\": true"));
        assert!(text.contains("6/25"));

        let args = NormArgs {
            common: common("2"),
            tolerance: "1/1000000000000".into(),
        };
        let (_, code) = cmd_verify_norm(&args).unwrap();
        assert_eq!(code, EXIT_OK);
    }

    #[test]
    fn acr_stress_is_deterministic_and_certifies() {
        let args = AcrArgs {
            common: common("1"),
            epsilon: "1/10".into(),
            seed: 42,
            budget: 60,
        };
        let (first, code) = cmd_verify_acr(&args).unwrap();
        assert_eq!(code, EXIT_OK);
        assert!(first.contains("\"certified_below_epsilon\": true"));
        let (second, _) = cmd_verify_acr(&args).unwrap();
        assert_eq!(first, second);

        let bad = AcrArgs {
            common: common("1"),
            epsilon: "1/10".into(),
            seed: 42,
            budget: 0,
        };
        assert!(matches!(cmd_verify_acr(&bad), Err(Error::Validation(_))));
    }

    #[test]
    fn blowup_reports_certify_over_a_range() {
        let args = BlowupArgs {
            common: common("1"),
            alpha: vec!["0".into(), "1".into()],
            r_file: None,
            n_from: 1,
            n_to: 8,
            tolerance: "1/1000000000".into(),
        };
        let (text, code) = cmd_verify_blowup(&args).unwrap();
        assert_eq!(code, EXIT_OK);
        assert!(text.contains("\"verdict\": \"diverges\""));

        let args = BlowupArgs {
            common: Common {
                format: Format::Csv,
                ..common("1")
            },
            alpha: vec!["0".into()],
            r_file: None,
            n_from: 2,
            n_to: 6,
            tolerance: "1/1000000000".into(),
        };
        let (text, code) = cmd_verify_blowup(&args).unwrap();
        assert_eq!(code, EXIT_OK);
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("alpha,n,h_n,"));
    }

    #[test]
    fn blowup_rejects_bad_step_files() {
        let dir = std::env::temp_dir();
        let good = dir.join("lrlab_cli_step_good.json");
        let bad = dir.join("lrlab_cli_step_bad.json");
        fs::write(&good, r#"{"breakpoints": ["1/2"], "values": ["0/1", "3/1"]}"#).unwrap();
        fs::write(&bad, r#"{"breakpoints": ["1/2"], "values": ["3/1", "0/1"]}"#).unwrap();

        let args = BlowupArgs {
            common: common("1"),
            alpha: vec!["0".into()],
            r_file: Some(good.clone()),
            n_from: 1,
            n_to: 6,
            tolerance: "1/1000000000".into(),
        };
        let (text, code) = cmd_verify_blowup(&args).unwrap();
        assert_eq!(code, EXIT_OK);
        // rows only above the floor R(1) + 1 = 4
        assert!(text.contains("\"n\": 5"));
        assert!(text.contains("rank 4 is not above the eligibility floor"));

        let args = BlowupArgs {
            r_file: Some(bad.clone()),
            ..args
        };
        assert!(matches!(cmd_verify_blowup(&args), Err(Error::Json(_))));
        fs::remove_file(good).ok();
        fs::remove_file(bad).ok();
    }

    #[test]
    fn threshold_probes_flip_across_the_star_exponent() {
        let args = ThresholdArgs {
            common: common("1"),
            s: vec!["1".into(), "2".into()],
        };
        let (text, code) = cmd_threshold(&args).unwrap();
        assert_eq!(code, EXIT_OK);
        assert!(text.contains("\"verdict\": \"Convergent\""));
        assert!(text.contains("\"verdict\": \"Divergent\""));
        assert!(text.contains("2/3"));

        let args = ThresholdArgs {
            common: common("1"),
            s: vec!["1/2".into()],
        };
        assert!(matches!(cmd_threshold(&args), Err(Error::Domain(_))));
    }
}
