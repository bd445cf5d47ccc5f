use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ivfalsify::config::{ChecksDoc, DgpDoc, Format, RestrictionDoc, RunConfig};
use ivfalsify::report::{render_text, run, EXIT_INPUT};
use ivfalsify::selfcheck::run_selfcheck;
use ivfalsify::simulate::{appendix_b_break_dgp, appendix_b_dgp, exact_records, generate_observed, random_valid_dgp};
use ivfalsify::typespace::{Preset, RestrictionSpec};
use ivfalsify::{Error, Rational, Result};

#[derive(Parser)]
#[command(name = "ivfalsify", version, about = "Exact falsification tests for instrument validity")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Structured,
}

#[derive(Clone, Copy, ValueEnum)]
enum DgpPreset {
    AppendixB,
    AppendixBBreak,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the configured checks on an observed law.
    Test {
        #[arg(long)]
        config: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        cap_types: Option<usize>,
        #[arg(long)]
        cap_subsets: Option<usize>,
    },
    /// Emit the exact law (and a record multiset) of a response-type population.
    Simulate {
        #[arg(long, value_enum, conflicts_with = "config")]
        preset: Option<DgpPreset>,
        /// A population document; without it and without --preset, a random valid one is drawn.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        treatments: usize,
        #[arg(long, default_value_t = 2)]
        instruments: usize,
        #[arg(long, default_value_t = 2)]
        bins: usize,
        /// Restriction preset for random populations.
        #[arg(long, default_value = "ordered-monotone")]
        restriction: String,
        /// Table document path; records go to the `.records.csv` sibling.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        cap_types: Option<usize>,
    },
    /// Cross-validate the solvers on seeded random instances.
    Selfcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// List the shipped restriction presets.
    Presets,
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn records_path(out: &Path) -> PathBuf {
    out.with_extension("records.csv")
}

fn cmd_test(
    config: &Path,
    out: Option<&Path>,
    format: Option<FormatArg>,
    cap_types: Option<usize>,
    cap_subsets: Option<usize>,
) -> Result<i32> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(n) = cap_types {
        cfg.caps.types = n;
    }
    if let Some(n) = cap_subsets {
        cfg.caps.subsets = n;
    }
    let format = match format {
        Some(FormatArg::Text) => Format::Text,
        Some(FormatArg::Structured) => Format::Structured,
        None => cfg.output.format,
    };
    let report = run(&cfg)?;
    let text = match format {
        Format::Text => render_text(&report),
        Format::Structured => report.to_json(),
    };
    write_or_print(out, &text)?;
    Ok(report.verdict.exit_status)
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    preset: Option<DgpPreset>,
    config: Option<&Path>,
    seed: u64,
    l: usize,
    k: usize,
    bins: usize,
    restriction: &str,
    out: Option<&Path>,
    cap_types: Option<usize>,
) -> Result<i32> {
    let all = ChecksDoc { feasibility: true, flow: true, fosd: true, corollary1: true, ..ChecksDoc::default() };
    let ordered = RestrictionDoc { preset: Some("ordered-monotone".into()), ..RestrictionDoc::default() };
    let (dgp, restriction_doc, checks) = match (preset, config) {
        (Some(DgpPreset::AppendixB), _) => (appendix_b_dgp::<Rational>(), ordered, all),
        (Some(DgpPreset::AppendixBBreak), _) => (appendix_b_break_dgp::<Rational>(), ordered, all),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
            let doc = DgpDoc::parse(&text)?;
            let checks = if doc.support.instruments.len() == 2 { all } else { ChecksDoc::default() };
            (doc.build()?, doc.restriction.clone(), checks)
        }
        (None, None) => {
            if !Preset::NAMES.contains(&restriction) || restriction == "custom" || restriction == "unordered-monotone" {
                return Err(Error::Input(format!("random populations take none, no-defiers or ordered-monotone, not `{restriction}`")));
            }
            let doc = RestrictionDoc { preset: Some(restriction.to_string()), ..RestrictionDoc::default() };
            let spec = match restriction {
                "no-defiers" => RestrictionSpec::preset(Preset::NoDefiers),
                "ordered-monotone" => RestrictionSpec::preset(Preset::OrderedMonotone),
                _ => RestrictionSpec::default(),
            };
            let cap = cap_types.unwrap_or(ivfalsify::DEFAULT_TYPE_CAP);
            let checks = if k == 2 { all } else { ChecksDoc::default() };
            (random_valid_dgp(seed, l, k, bins, &spec, cap)?, doc, checks)
        }
    };
    let d = generate_observed(&dgp)?;
    let mut table = RunConfig::from_distribution(&d);
    table.restriction = restriction_doc;
    table.checks = checks;
    // Ordered-treatment bounds need a declared order.
    table.checks.corollary1 &= d.support.treatment_order.is_some();
    write_or_print(out, &table.to_toml())?;
    if let Some(out) = out {
        let path = records_path(out);
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        for r in exact_records(&d)? {
            w.serialize(&r).map_err(|e| Error::Input(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Input(e.to_string()))?;
    }
    Ok(0)
}

fn cmd_presets() -> i32 {
    for name in Preset::NAMES {
        println!("{name:20} {}", Preset::describe(name));
    }
    0
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    let result = match &cli.cmd {
        Cmd::Test { config, out, format, cap_types, cap_subsets } => {
            cmd_test(config, out.as_deref(), *format, *cap_types, *cap_subsets)
        }
        Cmd::Simulate { preset, config, seed, treatments, instruments, bins, restriction, out, cap_types } => cmd_simulate(
            *preset,
            config.as_deref(),
            *seed,
            *treatments,
            *instruments,
            *bins,
            restriction,
            out.as_deref(),
            *cap_types,
        ),
        Cmd::Selfcheck { seed, trials } => run_selfcheck(*seed, *trials).map(|r| {
            print!("{}", r.summary());
            if r.passed() {
                0
            } else {
                1
            }
        }),
        Cmd::Presets => Ok(cmd_presets()),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT as u8)
        }
    }
}
