use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use sqsieve_core::accept::{run_acceptance, AcceptConfig, Suite};
use sqsieve_core::arith::factorize;
use sqsieve_core::charsum::{
    cubic_form_charsum, s4_closed, s4_direct, weighted_energy, S4Input, TrigWeight,
};
use sqsieve_core::energy::{self, point_cost, EnergyKind, JSample, Method, RangeRule};
use sqsieve_core::error::check_budget;
use sqsieve_core::expsum::{
    esum_jh, gauss_sum_closed, gauss_sum_direct, gcal, EsumForm, ExpSumValue, GcalParams,
};
use sqsieve_core::record::{write_records, Format, ResultRecord};
use sqsieve_core::scan::{run_scan, ScanGrid, ScanSpec};
use sqsieve_core::sieve::{
    dirichlet_approx, ls_bound_table, ls_lhs, parse_rational, px_monitor, Moduli, NumeratorRange,
    SieveInstance,
};
use sqsieve_core::sqrt::sqrt_mod_all;
use sqsieve_core::{Error, DEFAULT_BUDGET};

const EXIT_TEST_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "sqsieve",
    version,
    about = "Verification workbench for the large sieve with square moduli"
)]
struct Cli {
    /// Seed for every sampled grid and instance.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Work budget in abstract operations.
    #[arg(long, global = true, env = "SQSIEVE_BUDGET", default_value_t = DEFAULT_BUDGET)]
    budget: u128,
    /// Output file (default: standard output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "json", value_parser = parse_format)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Subcommand, Debug)]
enum Command {
    /// All square roots of m modulo r.
    Sqrt {
        #[arg(long, allow_hyphen_values = true)]
        m: i64,
        #[arg(long)]
        r: u64,
    },
    /// One additive energy E2, E4 or F2.
    Energy {
        #[arg(long)]
        kind: EnergyKind,
        #[arg(long)]
        r: u64,
        #[arg(long, allow_hyphen_values = true)]
        j: i64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
        h: i64,
        #[arg(long = "R")]
        range: u64,
        #[arg(long, default_value = "auto")]
        method: Method,
    },
    /// Grid scan of a hypothesis ratio or bound margin.
    Scan(ScanArgs),
    /// Complete exponential sums.
    Expsum {
        #[command(subcommand)]
        which: ExpsumCommand,
    },
    /// Large-sieve left-hand side for seeded or file coefficients.
    Sieve {
        #[command(subcommand)]
        which: SieveCommand,
    },
    /// Count of fractions a/q² near x, against the known bounds.
    Px {
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long = "Q")]
        q: u64,
        #[arg(long = "N")]
        n: u64,
        /// Count numerators a ≤ q instead of a ≤ q².
        #[arg(long)]
        paper_literal_range: bool,
    },
    /// Approximation x ≈ b/r + z with r ≤ τ.
    Approx {
        #[arg(long, allow_hyphen_values = true)]
        x: String,
        #[arg(long)]
        tau: u64,
    },
    /// Character-sum side computations.
    Charsum {
        #[command(subcommand)]
        which: CharsumCommand,
    },
    /// Run an acceptance suite.
    Accept {
        /// oracles, identities, constants, monitors or all.
        suite: Suite,
        /// Shrink every grid for a fast smoke run.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Args, Debug)]
struct ScanArgs {
    /// h1, h2, h3, kssz, esum or theorem.
    #[arg(long, visible_alias = "op")]
    hypothesis: String,
    #[arg(long)]
    rmin: u64,
    #[arg(long)]
    rmax: u64,
    #[arg(long)]
    primes_only: bool,
    #[arg(long)]
    odd_only: bool,
    /// cbrt, sqrt, r^a/b, r^x or const:n.
    #[arg(long = "R-rule", default_value = "cbrt")]
    rule: RangeRule,
    /// Explicit multipliers j (comma separated); overrides --j-count.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    j: Vec<i64>,
    /// Number of seeded units j per modulus.
    #[arg(long, default_value_t = 3)]
    j_count: usize,
    /// Shifts h for h3 and esum.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "1"
    )]
    h: Vec<i64>,
    /// Skip points whose work estimate exceeds this (default: --budget).
    #[arg(long)]
    point_budget: Option<u128>,
    /// Record wall-clock time per point (output is then not reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Subcommand, Debug)]
enum ExpsumCommand {
    /// ℰ_{j,h}(l, n) modulo r.
    Jh {
        #[arg(long, allow_hyphen_values = true)]
        l: i64,
        #[arg(long, allow_hyphen_values = true)]
        n: i64,
        #[arg(long, allow_hyphen_values = true)]
        j: i64,
        #[arg(long, allow_hyphen_values = true)]
        h: i64,
        #[arg(long)]
        r: u64,
        #[arg(long, default_value = "paired")]
        form: EsumForm,
    },
    /// Quadratic Gauss sum G(q; a, b).
    Gauss {
        #[arg(long)]
        q: u64,
        #[arg(long, allow_hyphen_values = true)]
        a: i64,
        #[arg(long, allow_hyphen_values = true)]
        b: i64,
        /// Use the closed form instead of direct summation.
        #[arg(long)]
        closed: bool,
    },
    /// 𝒢(q; a, b, j, k, u, s).
    Gcal {
        #[arg(long)]
        q: u64,
        #[arg(long, allow_hyphen_values = true)]
        a: i64,
        #[arg(long, allow_hyphen_values = true)]
        b: i64,
        #[arg(long, allow_hyphen_values = true)]
        j: i64,
        #[arg(long, allow_hyphen_values = true)]
        k: i64,
        #[arg(long, allow_hyphen_values = true)]
        u: i64,
        #[arg(long, allow_hyphen_values = true)]
        s: i64,
    },
}

#[derive(Subcommand, Debug)]
enum SieveCommand {
    Lhs {
        #[arg(long, default_value = "classical")]
        moduli: Moduli,
        #[arg(long = "N")]
        n: usize,
        #[arg(long = "Q")]
        q: u64,
        /// First index M of the coefficient block.
        #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
        offset: i64,
        /// One `re im` pair per line instead of seeded coefficients.
        #[arg(long)]
        coeff_file: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum CharsumCommand {
    /// S₄(j; h₁, h₂, h₃, h₄) modulo an odd prime.
    S4 {
        #[arg(long)]
        r: u64,
        #[arg(long, allow_hyphen_values = true)]
        j: i64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
        h: Vec<i64>,
        #[arg(long)]
        closed: bool,
    },
    /// Weighted cubic-form character sum.
    Cubic {
        #[arg(long)]
        r: u64,
        #[arg(long = "M")]
        m: u64,
        #[arg(long, default_value = "fejer:2")]
        weight: String,
    },
    /// Smoothed energy by direct summation and through S₄.
    Energy {
        #[arg(long)]
        r: u64,
        #[arg(long = "R")]
        range: u64,
        #[arg(long, allow_hyphen_values = true)]
        j: i64,
        #[arg(long, default_value = "fejer:2")]
        weight: String,
    },
}

fn parse_weight(spec: &str) -> Result<TrigWeight> {
    let width = spec
        .strip_prefix("fejer:")
        .with_context(|| format!("weight {spec:?} must look like fejer:<width>"))?;
    let width: f64 = width
        .parse()
        .with_context(|| format!("bad Fejér width {width:?}"))?;
    Ok(TrigWeight::fejer(width)?)
}

fn expsum_record(operation: &str, v: &ExpSumValue) -> ResultRecord {
    ResultRecord::new(operation)
        .complex("value", v.value)
        .output("abs", v.abs())
        .output("terms", v.terms)
        .maybe_output("margin", v.margin)
}

fn energy_record(rep: &energy::EnergyReport) -> ResultRecord {
    ResultRecord::new("energy")
        .param("kind", rep.kind.as_str())
        .param("r", rep.modulus)
        .param("j", rep.j)
        .maybe_output("h", rep.h)
        .param("R", rep.range)
        .param("method", rep.method.as_str())
        .output("energy", rep.energy)
        .output("bound", rep.hyp_bound)
        .output("ratio", rep.ratio)
        .output("zero_class", rep.includes_zero_class)
}

enum Outcome {
    Records(Vec<ResultRecord>),
    Acceptance {
        records: Vec<ResultRecord>,
        code: i32,
    },
}

fn run(cli: &Cli) -> Result<Outcome> {
    let budget = cli.budget;
    let records = match &cli.command {
        Command::Sqrt { m, r } => {
            let f = factorize(*r)?;
            let m_red = sqsieve_core::arith::reduce(*m, *r);
            let set = sqrt_mod_all(m_red, &f);
            let list = set
                .roots
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(",");
            vec![ResultRecord::new("sqrt")
                .param("m", *m)
                .param("r", *r)
                .output("count", set.len())
                .output("roots", format!("[{list}]"))]
        }
        Command::Energy {
            kind,
            r,
            j,
            h,
            range,
            method,
        } => {
            let f = factorize(*r)?;
            let cost = match method {
                Method::Brute => energy::brute_cost(*kind, *range),
                _ => point_cost(*kind, *r, *range),
            };
            check_budget(cost, budget)?;
            vec![energy_record(&energy::energy(
                *kind, *range, *j, *h, &f, *method,
            )?)]
        }
        Command::Scan(args) => {
            let j_sample = if args.j.is_empty() {
                JSample::Random {
                    count: args.j_count,
                }
            } else {
                JSample::Values(args.j.clone())
            };
            let spec = ScanSpec {
                seed: cli.seed,
                budget,
                point_budget: args.point_budget.unwrap_or(budget),
                timing: args.timing,
                output: cli.out.clone(),
                format: cli.format,
                ..ScanSpec::new(
                    args.hypothesis.clone(),
                    ScanGrid {
                        r_min: args.rmin,
                        r_max: args.rmax,
                        primes_only: args.primes_only,
                        odd_only: args.odd_only,
                        rule: args.rule,
                        j_sample,
                        h_values: args.h.clone(),
                    },
                )
            };
            run_scan(&spec)?
        }
        Command::Expsum { which } => match which {
            ExpsumCommand::Jh {
                l,
                n,
                j,
                h,
                r,
                form,
            } => {
                check_budget(4 * *r as u128, budget)?;
                let v = esum_jh(*l, *n, *j, *h, *r, *form)?;
                vec![expsum_record("expsum.jh", &v)
                    .param("l", *l)
                    .param("n", *n)
                    .param("j", *j)
                    .param("h", *h)
                    .param("r", *r)
                    .param("form", format!("{form:?}").to_ascii_lowercase())]
            }
            ExpsumCommand::Gauss { q, a, b, closed } => {
                let v = if *closed {
                    gauss_sum_closed(*q, *a, *b)?
                } else {
                    check_budget(*q as u128, budget)?;
                    gauss_sum_direct(*q, *a, *b)?
                };
                vec![expsum_record("expsum.gauss", &v)
                    .param("q", *q)
                    .param("a", *a)
                    .param("b", *b)
                    .param("closed", *closed)]
            }
            ExpsumCommand::Gcal {
                q,
                a,
                b,
                j,
                k,
                u,
                s,
            } => {
                check_budget(*q as u128, budget)?;
                let p = GcalParams {
                    a: *a,
                    b: *b,
                    j: *j,
                    k: *k,
                    u: *u,
                    s: *s,
                };
                let v = gcal(*q, &p)?;
                vec![expsum_record("expsum.gcal", &v)
                    .param("q", *q)
                    .param("a", *a)
                    .param("b", *b)
                    .param("j", *j)
                    .param("k", *k)
                    .param("u", *u)
                    .param("s", *s)
                    .output("bound", sqsieve_core::expsum::gcal_bound(*q, &p))]
            }
        },
        Command::Sieve {
            which:
                SieveCommand::Lhs {
                    moduli,
                    n,
                    q,
                    offset,
                    coeff_file,
                },
        } => {
            let inst = match coeff_file {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    SieveInstance::parse_coefficients(&text, *offset, *n)?
                }
                None => SieveInstance::seeded(*offset, *n, cli.seed)?,
            };
            let lhs = ls_lhs(&inst, *q, *moduli, budget)?;
            let table = ls_bound_table(*q, *n as u64)?;
            let classical = (*q * *q + *n as u64 - 1) as f64 * lhs.z;
            let mut rec = ResultRecord::new("sieve.lhs")
                .param("moduli", moduli.to_string())
                .param("N", *n)
                .param("Q", *q)
                .param("M", *offset)
                .output("lhs", lhs.lhs)
                .output("z", lhs.z)
                .output("fractions", lhs.fractions)
                .output("lhs_over_z", lhs.lhs / lhs.z);
            rec = match moduli {
                Moduli::Classical => rec
                    .output("bound", classical)
                    .output("ratio", lhs.lhs / classical),
                Moduli::Squares => rec
                    .output("best_known", table.best_known)
                    .output("conjecture", table.conjecture)
                    .output("ratio", lhs.lhs / (table.best_known * lhs.z)),
            };
            if coeff_file.is_none() {
                rec = rec.param("seed", cli.seed);
            }
            vec![rec]
        }
        Command::Px {
            x,
            q,
            n,
            paper_literal_range,
        } => {
            let x = parse_rational(x)?;
            let range = if *paper_literal_range {
                NumeratorRange::UpToQ
            } else {
                NumeratorRange::UpToQSquared
            };
            let m = px_monitor(x, *q, *n, range, budget)?;
            let mut rec = ResultRecord::new("px")
                .param("x", x)
                .param("Q", *q)
                .param("N", *n)
                .param(
                    "range",
                    if *paper_literal_range {
                        "a<=q"
                    } else {
                        "a<=q^2"
                    },
                )
                .output("count", m.count)
                .output("reflected", m.frame.reflected)
                .output("b", m.frame.b)
                .output("r", m.frame.r)
                .output("z", m.frame.z)
                .output("qn_cond", m.qn_cond)
                .output("regime_applicable", m.regime_applicable)
                .maybe_output("previous_bound", m.previous_bound)
                .maybe_output("previous_ratio", m.previous_ratio)
                .output("conjecture_bound", 1.0 + (*q as f64).powi(3) / *n as f64)
                .output("regime", m.regime.as_str())
                .output("regime_bound", m.regime_bound)
                .output("regime_ratio", m.regime_ratio);
            if let Some(c) = m.critical {
                rec = rec
                    .output("critical_regime", c.regime.as_str())
                    .output("critical_bound", c.bound)
                    .output("critical_ratio", c.ratio)
                    .output("exponent_bound", c.exponent_bound)
                    .output("exponent_ratio", c.exponent_ratio)
                    .output("corollary_bound", c.corollary_bound)
                    .output("corollary_ratio", c.corollary_ratio);
            }
            vec![rec]
        }
        Command::Approx { x, tau } => {
            let xr = parse_rational(x)?;
            let a = dirichlet_approx(xr, *tau)?;
            vec![ResultRecord::new("approx")
                .param("x", xr)
                .param("tau", *tau)
                .output("b", a.b)
                .output("r", a.r)
                .output("z", a.z)]
        }
        Command::Charsum { which } => match which {
            CharsumCommand::S4 { r, j, h, closed } => {
                let h: [i64; 4] = h.as_slice().try_into().map_err(|_| {
                    Error::Invalid(format!("--h needs exactly 4 values, got {}", h.len()))
                })?;
                let input = S4Input::new(*j, h, *r)?;
                let v = if *closed {
                    s4_closed(&input)?
                } else {
                    s4_direct(&input, budget)?
                };
                vec![expsum_record("charsum.s4", &v)
                    .param("r", *r)
                    .param("j", *j)
                    .param(
                        "h",
                        h.iter().map(i64::to_string).collect::<Vec<_>>().join(","),
                    )
                    .param("closed", *closed)]
            }
            CharsumCommand::Cubic { r, m, weight } => {
                let w = parse_weight(weight)?;
                let rep = cubic_form_charsum(*m, *r, &w, budget)?;
                vec![ResultRecord::new("charsum.cubic")
                    .param("r", *r)
                    .param("M", *m)
                    .param("weight", weight.as_str())
                    .output("value", rep.value)
                    .output("terms", rep.terms)
                    .output("bound", rep.bound)
                    .output("margin", rep.margin)
                    .maybe_output("corollary_bound", rep.corollary_bound)
                    .maybe_output("corollary_margin", rep.corollary_margin)]
            }
            CharsumCommand::Energy {
                r,
                range,
                j,
                weight,
            } => {
                let w = parse_weight(weight)?;
                let rep = weighted_energy(*range, *j, *r, &w, budget)?;
                vec![ResultRecord::new("charsum.energy")
                    .param("r", *r)
                    .param("R", *range)
                    .param("j", *j)
                    .param("weight", weight.as_str())
                    .output("direct", rep.direct)
                    .output("poisson", rep.poisson)
                    .output("relative_gap", rep.relative_gap)
                    .output("e2", rep.e2)
                    .output("e2_prime", rep.e2_prime)
                    .output("sandwich_holds", rep.sandwich_holds)
                    .output("prime_over_tilde", rep.prime_over_tilde)]
            }
        },
        Command::Accept { suite, quick } => {
            let cfg = AcceptConfig {
                seed: if cli.seed == 0 {
                    AcceptConfig::default().seed
                } else {
                    cli.seed
                },
                scale: if *quick {
                    sqsieve_core::accept::Scale::Quick
                } else {
                    sqsieve_core::accept::Scale::Full
                },
            };
            let report = run_acceptance(*suite, &cfg);
            for o in &report.outcomes {
                eprintln!("{}", o.line());
            }
            return Ok(Outcome::Acceptance {
                records: report.records(),
                code: report.exit_code(),
            });
        }
    };
    Ok(Outcome::Records(records))
}

fn emit(cli: &Cli, records: &[ResultRecord]) -> Result<()> {
    match &cli.out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut w = BufWriter::new(file);
            write_records(records, cli.format, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            write_records(records, cli.format, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Budget { .. }) => EXIT_BUDGET,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = sqsieve_core::par::install(cli.jobs, || run(&cli));
    let (records, code) = match result {
        Ok(Outcome::Records(r)) => (r, 0),
        Ok(Outcome::Acceptance { records, code }) => (records, code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code_for(&e));
        }
    };
    if let Err(e) = emit(&cli, &records) {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_USAGE);
    }
    if code != 0 {
        return ExitCode::from(EXIT_TEST_FAILURE);
    }
    ExitCode::SUCCESS
}
