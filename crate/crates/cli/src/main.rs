use std::fs;
use std::io::{self, Read};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use maltsev::algebras::{describe_satisfaction, ClosureError, DEFAULT_BUDGET};
use maltsev::construction::{certify, extend, ConstructionError};
use maltsev::cube::check_condition;
use maltsev::entailment::weak_closure;
use maltsev::interp::{interpret, InterpretationReport};
use maltsev::random::{random_condition, ConditionShape};
use maltsev::terms::{
    cube_condition, hagemann_mitschke_condition, jonsson_condition, union_conditions, CubeLetter,
    VariableSet,
};
use maltsev::{
    parse_algebra, parse_condition, parse_instance, render_algebra, satisfies, smp_decide,
    ClosureConfig, FiniteAlgebra, MaltsevCondition, SmpInstance,
};

const EXIT_NO: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "maltsev", version, about = "Strong linear Maltsev conditions and subpower membership")]
struct Cli {
    /// Emit `key=value` lines instead of the human readable report.
    #[arg(long, global = true)]
    machine: bool,
    /// Worker threads for subpower closures.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a condition file and print it in normal form.
    Parse { condition: String },
    /// Report consistency and per-symbol cube identities.
    Check { condition: String },
    /// Print the classes of the weak closure, one per line.
    Closure {
        condition: String,
        /// Size of the variable set (defaults to the smallest that suffices).
        #[arg(long)]
        vars: Option<usize>,
    },
    /// Write a condition file to standard output.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Build the absorbing extension of an algebra by a condition.
    Extend {
        algebra: String,
        condition: String,
        /// Output file; standard output when absent.
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Check whether an algebra satisfies a condition.
    ModelCheck { algebra: String, condition: String },
    /// Decide subpower membership.
    Smp {
        algebra: String,
        instance: String,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
        /// Print a term over the generators producing the target.
        #[arg(long)]
        witness: bool,
    },
    /// Search for an interpretation in the dual implication algebra.
    Interpret { condition: String },
    /// Solve an instance over an algebra and over its extension and compare.
    Reduce {
        algebra: String,
        condition: String,
        instance: String,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: usize,
    },
}

#[derive(Subcommand)]
enum GenKind {
    /// Jónsson terms d_0..d_k.
    Jonsson { k: usize },
    /// Hagemann-Mitschke terms p_0..p_k.
    Hm { k: usize },
    /// Cube identities, one row of `x`/`y` letters per identity.
    Cube {
        rows: Vec<String>,
        #[arg(long, default_value = "c")]
        symbol: String,
    },
    /// Union of condition files with disjoint signatures.
    Union { conditions: Vec<String> },
    /// A small random condition.
    Random {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn read_input(path: &str) -> Result<String> {
    if path == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).context("reading standard input")?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("cannot read {path}"))
    }
}

fn display_name(path: &str) -> &str {
    if path == "-" {
        "<stdin>"
    } else {
        path
    }
}

fn load_condition(path: &str) -> Result<MaltsevCondition> {
    let text = read_input(path)?;
    parse_condition(&text).map_err(|e| anyhow!("{}: {e}", display_name(path)))
}

fn load_algebra(path: &str) -> Result<FiniteAlgebra> {
    let text = read_input(path)?;
    parse_algebra(&text).map_err(|e| anyhow!("{}: {e}", display_name(path)))
}

fn load_instance(path: &str) -> Result<SmpInstance> {
    let text = read_input(path)?;
    parse_instance(&text).map_err(|e| anyhow!("{}: {e}", display_name(path)))
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn decided(yes: bool) -> ExitCode {
    if yes {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NO)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let machine = cli.machine;
    let closure_config = |budget: usize| ClosureConfig::default().with_budget(budget).with_threads(cli.threads);
    match cli.command {
        Command::Parse { condition } => {
            print!("{}", load_condition(&condition)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { condition } => {
            let report = check_condition(&load_condition(&condition)?)?;
            if machine {
                print!("{}", report.machine());
            } else {
                print!("{report}");
            }
            Ok(decided(report.applicable()))
        }
        Command::Closure { condition, vars } => {
            let m = load_condition(&condition)?;
            let vars = match vars {
                Some(n) => VariableSet::new(n),
                None => maltsev::terms::canonical_variable_set(&m, None),
            };
            let index = weak_closure(&m, vars)?;
            if machine {
                println!("variables={}", vars.len());
                println!("terms={}", index.universe().len());
                println!("classes={}", index.classes().len());
                println!("consistent={}", index.is_consistent());
            }
            print!("{}", index.dump());
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen { kind } => {
            let m = match kind {
                GenKind::Jonsson { k } => jonsson_condition(k)?,
                GenKind::Hm { k } => hagemann_mitschke_condition(k)?,
                GenKind::Cube { rows, symbol } => {
                    let rows = rows
                        .iter()
                        .map(|r| {
                            r.chars()
                                .map(|c| CubeLetter::from_char(c).ok_or_else(|| anyhow!("bad cube letter `{c}` in `{r}`")))
                                .collect::<Result<Vec<_>>>()
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let width = rows.first().map_or(0, Vec::len);
                    if rows.iter().any(|r| r.len() != width) {
                        bail!("cube rows must all have the same length");
                    }
                    let columns: Vec<Vec<CubeLetter>> =
                        (0..width).map(|i| rows.iter().map(|r| r[i]).collect()).collect();
                    cube_condition(&columns, &symbol)?
                }
                GenKind::Union { conditions } => {
                    let parts = conditions.iter().map(|p| load_condition(p)).collect::<Result<Vec<_>>>()?;
                    union_conditions(&parts)?
                }
                GenKind::Random { seed } => random_condition(seed, &ConditionShape::default()),
            };
            print!("{m}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Extend {
            algebra,
            condition,
            output,
        } => {
            let ext = extend(&load_algebra(&algebra)?, &load_condition(&condition)?)?;
            let text = render_algebra(&ext.extended, &ext.header_comments());
            match output {
                Some(path) => fs::write(&path, text).with_context(|| format!("cannot write {path}"))?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ModelCheck { algebra, condition } => {
            let m = load_condition(&condition)?;
            let s = satisfies(&load_algebra(&algebra)?, &m)?;
            if machine {
                println!("satisfied={}", s.holds());
            } else {
                print!("{}", describe_satisfaction(&m, &s));
            }
            Ok(decided(s.holds()))
        }
        Command::Smp {
            algebra,
            instance,
            budget,
            witness,
        } => {
            let a = load_algebra(&algebra)?;
            let inst = load_instance(&instance)?;
            let mut config = closure_config(budget);
            config.record_witnesses = witness;
            let answer = smp_decide(&a, &inst, &config)?;
            if machine {
                println!("member={}", yes_no(answer.member));
                println!("members={}", answer.stats.members);
                println!("rounds={}", answer.stats.rounds);
                println!("applications={}", answer.stats.applications);
                if let Some(w) = &answer.witness {
                    println!("witness={w}");
                }
            } else {
                println!("{}", yes_no(answer.member));
                if let Some(w) = &answer.witness {
                    println!("witness: {w}");
                }
                println!("closure: {}", answer.stats);
            }
            Ok(decided(answer.member))
        }
        Command::Interpret { condition } => {
            let report = interpret(&load_condition(&condition)?)?;
            if machine {
                match &report {
                    InterpretationReport::Found(i) => {
                        for (_, name, e) in &i.assignment {
                            println!("{name}={}", maltsev::interp::render_term(&e.defining_term));
                        }
                    }
                    InterpretationReport::None(_) => {
                        println!("interpretation=none");
                    }
                }
            } else {
                print!("{report}");
            }
            Ok(decided(report.found()))
        }
        Command::Reduce {
            algebra,
            condition,
            instance,
            budget,
        } => {
            let a = load_algebra(&algebra)?;
            let m = load_condition(&condition)?;
            let inst = load_instance(&instance)?;
            let ext = extend(&a, &m)?;
            let cert = certify(&ext, &inst, &closure_config(budget))?;
            if machine {
                print!("{}", cert.machine());
            } else {
                print!("{cert}");
            }
            Ok(decided(cert.ok()))
        }
    }
}

fn budget_exhausted(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        matches!(c.downcast_ref::<ClosureError>(), Some(ClosureError::BudgetExceeded { .. }))
            || matches!(
                c.downcast_ref::<ConstructionError>(),
                Some(ConstructionError::Closure(ClosureError::BudgetExceeded { .. }))
            )
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if budget_exhausted(&e) {
                ExitCode::from(EXIT_BUDGET)
            } else {
                ExitCode::from(EXIT_INPUT)
            }
        }
    }
}
