//! `pfp`: compute private-communication rate regions for wiretap channels
//! and simulate the finite-blocklength key-assisted coding protocol.
//!
//! Exit codes: 0 success, 2 parse error, 3 resource-budget error,
//! 4 invariant violation. Every artifact embeds its full configuration and
//! seed; re-running a logged configuration reproduces the artifact
//! byte-identically.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use pfp_core::budget::Budget;
use pfp_core::channels::{parse_channel, CqWiretapChannel};
use pfp_core::error::Error;
use pfp_core::protocol::{covering_concentration, run_protocol, CodeSpec};
use pfp_core::region::{corner_points, region_boundary, tensor_power_max_rate, OptimizerConfig};
use pfp_core::ri::{appending_rule, compose_catalytic, instantiate_father};
use pfp_core::typicality::{verify_four_properties, TypicalityParams};

#[derive(Parser)]
#[command(name = "pfp", version, about = "Private wiretap-coding toolbox")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Channel-spec JSON file.
    #[arg(long)]
    channel: PathBuf,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Memory budget override in MiB (also via PFP_BUDGET_MB).
    #[arg(long)]
    budget_mb: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the private-rate vs key-rate region boundary.
    Region {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of boundary samples.
        #[arg(long, default_value_t = 25)]
        samples: usize,
        /// Evaluate the n-fold tensor power (n <= 3; joint input
        /// distributions for n = 2, i.i.d. products for n = 3).
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Output format.
        #[arg(long, default_value = "csv")]
        format: String,
        /// Shorthand for --format json.
        #[arg(long, default_value_t = false)]
        json: bool,
    },
    /// Run one finite-blocklength protocol instance.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Blocklength.
        #[arg(long)]
        n: usize,
        /// Message rate R (bits per channel use).
        #[arg(long)]
        rate: f64,
        /// Secret-key rate R_s (bits per channel use).
        #[arg(long, default_value_t = 0.0)]
        key_rate: f64,
        /// Output format (json report or csv per-trial trace).
        #[arg(long, default_value = "json")]
        format: String,
    },
    /// Monte Carlo concentration of the covering-code obfuscation error.
    Covering {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        key_rate: f64,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        /// The ε in the exceedance threshold 2ε + 19√ε.
        #[arg(long, default_value_t = 6.9e-4)]
        threshold_eps: f64,
    },
    /// Verify the four typicality-projector properties on the receiver
    /// marginals of a channel.
    Typicality {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        n: usize,
        /// Typicality width δ.
        #[arg(long)]
        delta: f64,
        /// Typical input sequences to sample.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Deviation bound the checks are judged against.
        #[arg(long, default_value_t = 0.2)]
        epsilon_target: f64,
    },
    /// Resource-inequality derivations.
    Ri {
        #[command(subcommand)]
        command: RiCommand,
    },
}

#[derive(Subcommand)]
enum RiCommand {
    /// Derive the unassisted child protocol for a channel from the corner
    /// point of its region.
    Derive {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } | Error::Io(_) => 2,
        Error::Budget { .. } => 3,
        _ => 4,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Region {
            common,
            samples,
            n,
            format,
            json,
        } => cmd_region(common, samples, n, &format, json),
        Command::Simulate {
            common,
            n,
            rate,
            key_rate,
            format,
        } => cmd_simulate(common, n, rate, key_rate, &format),
        Command::Covering {
            common,
            n,
            key_rate,
            trials,
            threshold_eps,
        } => cmd_covering(common, n, key_rate, trials, threshold_eps),
        Command::Typicality {
            common,
            n,
            delta,
            samples,
            epsilon_target,
        } => cmd_typicality(common, n, delta, samples, epsilon_target),
        Command::Ri { command } => match command {
            RiCommand::Derive { common } => cmd_ri_derive(common),
        },
    }
}

fn load_cq_channel(common: &CommonArgs) -> Result<CqWiretapChannel, Error> {
    let text = std::fs::read_to_string(&common.channel)?;
    parse_channel(&text)?.into_cq()
}

fn budget_of(common: &CommonArgs) -> Budget {
    match common.budget_mb {
        Some(mb) => Budget::from_mb(mb),
        None => Budget::from_env(),
    }
}

fn emit(common: &CommonArgs, content: &str) -> Result<(), Error> {
    match &common.out {
        Some(path) => std::fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

/// Format a float with 12 significant digits (stable across runs).
fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

/// Serialize JSON with every float at 12 significant digits.
fn to_json_12<T: Serialize>(value: &T) -> String {
    struct Sci12;
    impl serde_json::ser::Formatter for Sci12 {
        fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
        where
            W: ?Sized + std::io::Write,
        {
            write!(writer, "{value:.11e}")
        }
    }
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sci12);
    value.serialize(&mut ser).expect("in-memory serialization");
    let mut s = String::from_utf8(buf).expect("utf-8");
    s.push('\n');
    s
}

fn cmd_region(
    common: CommonArgs,
    samples: usize,
    n: usize,
    format: &str,
    json_flag: bool,
) -> Result<(), Error> {
    let channel = load_cq_channel(&common)?;
    let budget = budget_of(&common);
    let config = OptimizerConfig {
        seed: common.seed,
        ..OptimizerConfig::default()
    };
    let as_json = json_flag || format.eq_ignore_ascii_case("json");

    let config_json = json!({
        "subcommand": "region",
        "channel": common.channel.display().to_string(),
        "samples": samples,
        "n": n,
        "seed": common.seed,
        "format": if as_json { "json" } else { "csv" },
    });

    // Boundary samples: (key rate, max private rate, optimizing p) per use.
    let rows: Vec<(f64, f64, Vec<f64>, bool)> = if n <= 1 {
        let boundary = region_boundary(&channel, samples, &config)?;
        boundary
            .samples
            .iter()
            .map(|s| (s.key_rate, s.max_rate, s.distribution.clone(), s.converged))
            .collect()
    } else {
        let (_, q) = corner_points(&channel, &config)?;
        let top = 1.25 * q.point.key_rate;
        let joint = n == 2;
        (0..samples)
            .map(|i| {
                let key_rate = if samples == 1 {
                    0.0
                } else {
                    top * i as f64 / (samples - 1) as f64
                };
                let r = tensor_power_max_rate(&channel, n, joint, key_rate, &config, &budget)?;
                Ok((key_rate, r.value, r.argmax, r.converged))
            })
            .collect::<Result<Vec<_>, Error>>()?
    };

    if as_json {
        let (p_corner, q_corner) = corner_points(&channel, &config)?;
        let envelope = pfp_core::region::upper_concave_envelope(
            &rows.iter().map(|r| (r.0, r.1)).collect::<Vec<_>>(),
        );
        let doc = json!({
            "config": config_json,
            "corner_p": {
                "R": p_corner.point.private_rate,
                "Rs": p_corner.point.key_rate,
                "p": p_corner.distribution,
            },
            "corner_q": {
                "R": q_corner.point.private_rate,
                "Rs": q_corner.point.key_rate,
                "p": q_corner.distribution,
            },
            "boundary_raw": rows
                .iter()
                .map(|(rs, rmax, p, converged)| json!({
                    "Rs": rs, "Rmax": rmax, "p": p, "converged": converged,
                }))
                .collect::<Vec<_>>(),
            "boundary_envelope": envelope
                .iter()
                .map(|(rs, rmax)| json!({"Rs": rs, "Rmax": rmax}))
                .collect::<Vec<_>>(),
        });
        emit(&common, &to_json_12(&doc))
    } else {
        let mut out = String::new();
        writeln!(out, "# config: {config_json}").unwrap();
        let width = rows.first().map_or(0, |r| r.2.len());
        let p_cols: Vec<String> = (0..width).map(|i| format!("p_{i}")).collect();
        writeln!(out, "Rs,Rmax,{}", p_cols.join(",")).unwrap();
        for (rs, rmax, p, _) in &rows {
            let ps: Vec<String> = p.iter().map(|&x| fmt12(x)).collect();
            writeln!(out, "{},{},{}", fmt12(*rs), fmt12(*rmax), ps.join(",")).unwrap();
        }
        emit(&common, &out)
    }
}

fn cmd_simulate(
    common: CommonArgs,
    n: usize,
    rate: f64,
    key_rate: f64,
    format: &str,
) -> Result<(), Error> {
    let channel = load_cq_channel(&common)?;
    let budget = budget_of(&common);
    let spec = CodeSpec::new(n, rate, key_rate, common.seed)?;
    let p = channel.default_distribution();
    let report = run_protocol(&channel, &p, &spec, &budget)?;

    let config_json = json!({
        "subcommand": "simulate",
        "channel": common.channel.display().to_string(),
        "n": n,
        "rate": rate,
        "key_rate": key_rate,
        "seed": common.seed,
        "format": format,
        "p": p,
    });

    if format.eq_ignore_ascii_case("csv") {
        let mut out = String::new();
        writeln!(out, "# config: {config_json}").unwrap();
        writeln!(out, "kind,index,value").unwrap();
        for (k, v) in report.decode_error_per_index.iter().enumerate() {
            writeln!(out, "decode_error,{k},{}", fmt12(*v)).unwrap();
        }
        for (m, v) in report.oe_per_message.iter().enumerate() {
            writeln!(out, "obfuscation_error,{m},{}", fmt12(*v)).unwrap();
        }
        writeln!(out, "security_distance,0,{}", fmt12(report.security_distance)).unwrap();
        emit(&common, &out)
    } else {
        let doc = json!({
            "config": config_json,
            "spec": report.spec,
            "avg_error": report.avg_error,
            "oe_per_message": report.oe_per_message,
            "security_distance": report.security_distance,
            "seed": report.seed,
            "ideal_decoding_gap": report.ideal_decoding_gap,
            "triangle_bound": report.triangle_bound,
            "povm_completeness_residual": report.povm_completeness_residual,
            "povm_min_eigenvalue": report.povm_min_eigenvalue,
            "fano": report.fano,
        });
        emit(&common, &to_json_12(&doc))
    }
}

fn cmd_covering(
    common: CommonArgs,
    n: usize,
    key_rate: f64,
    trials: usize,
    threshold_eps: f64,
) -> Result<(), Error> {
    let channel = load_cq_channel(&common)?;
    let budget = budget_of(&common);
    let p = channel.default_distribution();
    let report =
        covering_concentration(&channel, &p, n, key_rate, trials, threshold_eps, common.seed, &budget)?;
    let doc = json!({
        "config": {
            "subcommand": "covering",
            "channel": common.channel.display().to_string(),
            "n": n,
            "key_rate": key_rate,
            "trials": trials,
            "threshold_eps": threshold_eps,
            "seed": common.seed,
            "p": p,
        },
        "report": report,
    });
    emit(&common, &to_json_12(&doc))
}

fn cmd_typicality(
    common: CommonArgs,
    n: usize,
    delta: f64,
    samples: usize,
    epsilon_target: f64,
) -> Result<(), Error> {
    let channel = load_cq_channel(&common)?;
    let p = channel.default_distribution();
    let states: Vec<_> = (0..channel.alphabet_len())
        .map(|x| channel.bob_state(x).clone())
        .collect();
    let params = TypicalityParams::new(n, delta, epsilon_target)?;
    let report = verify_four_properties(&states, &p, &params, samples, common.seed)?;
    let doc = json!({
        "config": {
            "subcommand": "typicality",
            "channel": common.channel.display().to_string(),
            "n": n,
            "delta": delta,
            "samples": samples,
            "epsilon_target": epsilon_target,
            "seed": common.seed,
            "p": p,
        },
        "n": report.n,
        "delta": report.delta,
        "delta_wide": report.delta_wide,
        "eps_hat": report.eps_hat,
        "alpha_hat": report.alpha_hat,
        "beta_hat": report.beta_hat,
        "c_min": report.c_min,
        "pass": report.pass,
    });
    emit(&common, &to_json_12(&doc))
}

fn cmd_ri_derive(common: CommonArgs) -> Result<(), Error> {
    let channel = load_cq_channel(&common)?;
    let config = OptimizerConfig {
        seed: common.seed,
        ..OptimizerConfig::default()
    };
    let (_, q) = corner_points(&channel, &config)?;
    let father = instantiate_father(q.point.private_rate, q.point.key_rate)?;
    let rule = appending_rule();
    let child = compose_catalytic(&father, &rule)?;

    let mut out = String::new();
    writeln!(out, "premise: {father}").unwrap();
    writeln!(out, "premise: {rule}").unwrap();
    writeln!(out, "conclusion: {child}").unwrap();
    for line in &child.provenance {
        writeln!(out, "# {line}").unwrap();
    }
    emit(&common, &out)
}
