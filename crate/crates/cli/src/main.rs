//! Command-line front end: tree calculus, Hopf checks, series operations,
//! multimap verification, algebra demos and the verification suites.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or parse errors.

use clap::{Args, Parser, Subcommand};
use relmc_core::algebra::{
    algebra_from_json, algebra_to_json, check_algebra, make_holomorphic_algebra, ope_extract,
    CommDiffAlgebra,
};
use relmc_core::hopf::{act_on_k, hopf_axiom_report, parse_helem, parse_kelem, Window};
use relmc_core::multimap::{compose, full_invariance_filter, refine, MultiMap};
use relmc_core::series::{
    act_variable, agree_after_expansion, expand, ExpansionOrder, SeriesWindow, SingularSeries,
    Var,
};
use relmc_core::tree::{
    augment, enumerate_refining_trees, graft, internal_poset, linear_extensions, parse_tree,
    render_dot, render_text,
};
use relmc_core::verify::run_suite;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "relmc", version, about = "Exact tree-indexed multimap calculus")]
struct Cli {
    #[command(flatten)]
    config: Config,
    #[command(subcommand)]
    command: Command,
}

/// Global configuration; every flag can also come from the environment.
#[derive(Args, Clone)]
struct Config {
    /// Module degree bound for derivation tables.
    #[arg(long, global = true, env = "RELMC_DEGREE_BOUND", default_value_t = 4)]
    degree_bound: u32,
    /// Total-degree ceiling for series windows.
    #[arg(long, global = true, env = "RELMC_SERIES_CEIL", default_value_t = 12)]
    series_ceil: i64,
    /// Laurent depth (largest allowed pole order).
    #[arg(long, global = true, env = "RELMC_LAURENT_DEPTH", default_value_t = 8)]
    laurent_depth: u32,
    /// Degree up to which invariance flags are verified.
    #[arg(long, global = true, env = "RELMC_INVARIANCE_DEGREE", default_value_t = 6)]
    invariance_degree: u32,
    /// Output format: text or json.
    #[arg(long, global = true, env = "RELMC_FORMAT", default_value = "text")]
    format: String,
    /// Seed for the randomized suites.
    #[arg(long, global = true, env = "RELMC_SEED", default_value_t = 7)]
    seed: u64,
}

impl Config {
    fn series_window(&self) -> SeriesWindow {
        SeriesWindow::new(self.laurent_depth, self.series_ceil)
    }

    fn k_window(&self) -> Window {
        Window::new(self.laurent_depth, self.series_ceil)
    }

    fn json(&self) -> bool {
        self.format == "json"
    }
}

#[derive(Subcommand)]
enum Command {
    /// Tree grammar, grafting, refinements, extensions, DOT output.
    Trees {
        #[command(subcommand)]
        cmd: TreesCmd,
    },
    /// Divided-power algebra checks and actions.
    Hopf {
        #[command(subcommand)]
        cmd: HopfCmd,
    },
    /// Singular series operations.
    Series {
        #[command(subcommand)]
        cmd: SeriesCmd,
    },
    /// Multimap verification, composition, refinement, invariance.
    Multi {
        #[command(subcommand)]
        cmd: MultiCmd,
    },
    /// Algebra demos, checks and operator product expansions.
    Algebra {
        #[command(subcommand)]
        cmd: AlgebraCmd,
    },
    /// Deterministic verification suites.
    Verify {
        /// Suite: trees, hopf, series, multi, algebra, ord or all.
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

#[derive(Subcommand)]
enum TreesCmd {
    /// Parse a tree and print its canonical form and leaf count.
    Parse { text: String },
    /// Graft the second tree onto the given leaf of the first.
    Graft {
        #[arg(long)]
        at: usize,
        host: String,
        guest: String,
    },
    /// Refining trees: same leaves, no unary vertices, bounded height.
    Refinements { text: String },
    /// Linear extensions of the augmented internal-vertex poset.
    Extensions { text: String },
    /// DOT rendering, root at the bottom.
    Dot { text: String },
}

#[derive(Subcommand)]
enum HopfCmd {
    /// Verify the Hopf laws up to a generator degree.
    Check {
        #[arg(long, default_value_t = 6)]
        max_degree: u32,
    },
    /// Apply an H element to a Laurent element.
    Act {
        #[arg(long)]
        h: String,
        #[arg(long)]
        k: String,
    },
}

#[derive(Subcommand)]
enum SeriesCmd {
    /// Expand every pole under a variable order (dominant first).
    Expand {
        #[arg(long)]
        order: String,
        #[arg(long)]
        input: PathBuf,
    },
    /// Compare two series under one or more orders (separated by `;`).
    Agree {
        #[arg(long)]
        orders: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        input2: PathBuf,
    },
    /// Apply an H element in one variable.
    Act {
        #[arg(long)]
        h: String,
        #[arg(long)]
        var: String,
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum MultiCmd {
    /// Re-verify a multimap document.
    Check {
        #[arg(long)]
        input: PathBuf,
    },
    /// Compose an inner multimap into a leaf of an outer one.
    Compose {
        #[arg(long)]
        at: usize,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        inner: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Refinement image over a target tree.
    Refine {
        #[arg(long)]
        to: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Full invariance filter: leaves and root.
    Invariance {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum AlgebraCmd {
    /// Built-in examples: `rationals` or `q-u`.
    Demo {
        #[arg(long, default_value = "q-u")]
        example: String,
        #[arg(long, default_value_t = 3)]
        max_leaves: usize,
    },
    /// Check an algebra document.
    Check {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 3)]
        max_leaves: usize,
    },
    /// Operator product expansion of the binary generator.
    Ope {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Serialize a built-in example to a document.
    Export {
        #[arg(long, default_value = "q-u")]
        example: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.config, cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn read_json(path: &PathBuf) -> Result<Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_or_print(output: &Option<PathBuf>, value: &Value) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_order(text: &str) -> ExpansionOrder {
    ExpansionOrder::new(
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(Var::new)
            .collect(),
    )
}

fn run(config: &Config, command: Command) -> Result<ExitCode, String> {
    match command {
        Command::Trees { cmd } => trees(config, cmd),
        Command::Hopf { cmd } => hopf(config, cmd),
        Command::Series { cmd } => series(config, cmd),
        Command::Multi { cmd } => multi(config, cmd),
        Command::Algebra { cmd } => algebra(config, cmd),
        Command::Verify { suite } => {
            let report = run_suite(&suite, config.seed);
            if config.json() {
                let entries: Vec<Value> = report
                    .results
                    .iter()
                    .map(|r| json!({ "name": r.name, "passed": r.passed, "detail": r.detail }))
                    .collect();
                println!(
                    "{}",
                    serde_json::to_string_pretty(&json!({
                        "suite": suite,
                        "seed": config.seed,
                        "passed": report.all_passed(),
                        "criteria": entries,
                    }))
                    .map_err(|e| e.to_string())?
                );
            } else {
                print!("{report}");
            }
            Ok(if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn trees(config: &Config, cmd: TreesCmd) -> Result<ExitCode, String> {
    match cmd {
        TreesCmd::Parse { text } => {
            let tree = parse_tree(&text).map_err(|e| e.to_string())?;
            if config.json() {
                println!(
                    "{}",
                    json!({
                        "tree": render_text(&tree),
                        "leaves": tree.leaf_count(),
                        "height": tree.height(),
                        "flat": tree.is_flat(),
                    })
                );
            } else {
                println!("{} leaves={}", render_text(&tree), tree.leaf_count());
            }
        }
        TreesCmd::Graft { at, host, guest } => {
            let q = parse_tree(&host).map_err(|e| e.to_string())?;
            let p = parse_tree(&guest).map_err(|e| e.to_string())?;
            let grafted = graft(&q, at, &p).map_err(|e| e.to_string())?;
            println!("{}", render_text(&grafted));
        }
        TreesCmd::Refinements { text } => {
            let tree = parse_tree(&text).map_err(|e| e.to_string())?;
            let refinements = enumerate_refining_trees(&tree).map_err(|e| e.to_string())?;
            if config.json() {
                let list: Vec<String> = refinements.iter().map(render_text).collect();
                println!("{}", json!({ "refining": list }));
            } else {
                for r in refinements {
                    println!("{}", render_text(&r));
                }
            }
        }
        TreesCmd::Extensions { text } => {
            let tree = parse_tree(&text).map_err(|e| e.to_string())?;
            let poset = internal_poset(&augment(&tree));
            for ext in linear_extensions(&poset) {
                let names: Vec<String> = ext.0.iter().map(|v| v.to_string()).collect();
                println!("{}", names.join(" < "));
            }
        }
        TreesCmd::Dot { text } => {
            let tree = parse_tree(&text).map_err(|e| e.to_string())?;
            print!("{}", render_dot(&tree));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn hopf(config: &Config, cmd: HopfCmd) -> Result<ExitCode, String> {
    match cmd {
        HopfCmd::Check { max_degree } => {
            let report = hopf_axiom_report(max_degree);
            if config.json() {
                let entries: Vec<Value> = report
                    .checks
                    .iter()
                    .map(|c| json!({ "law": c.law, "passed": c.passed, "witness": c.witness }))
                    .collect();
                println!("{}", json!({ "passed": report.all_passed(), "laws": entries }));
            } else {
                print!("{report}");
            }
            Ok(if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        HopfCmd::Act { h, k } => {
            let h = parse_helem(&h).map_err(|e| e.to_string())?;
            let k = parse_kelem(config.k_window(), &k).map_err(|e| e.to_string())?;
            println!("{}", act_on_k(&h, &k));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn series(config: &Config, cmd: SeriesCmd) -> Result<ExitCode, String> {
    match cmd {
        SeriesCmd::Expand { order, input } => {
            let s = SingularSeries::from_json(&read_json(&input)?).map_err(|e| e.to_string())?;
            let expanded = expand(&s, &parse_order(&order)).map_err(|e| e.to_string())?;
            if config.json() {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&expanded.to_json()).map_err(|e| e.to_string())?
                );
            } else {
                println!("{expanded}");
            }
            Ok(ExitCode::SUCCESS)
        }
        SeriesCmd::Agree {
            orders,
            input,
            input2,
        } => {
            let s1 = SingularSeries::from_json(&read_json(&input)?).map_err(|e| e.to_string())?;
            let s2 = SingularSeries::from_json(&read_json(&input2)?).map_err(|e| e.to_string())?;
            let orders: Vec<ExpansionOrder> = orders.split(';').map(parse_order).collect();
            let agree = agree_after_expansion(&s1, &s2, &orders).map_err(|e| e.to_string())?;
            println!("{}", if agree { "agree" } else { "disagree" });
            Ok(if agree {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        SeriesCmd::Act { h, var, input } => {
            let s = SingularSeries::from_json(&read_json(&input)?).map_err(|e| e.to_string())?;
            let h = parse_helem(&h).map_err(|e| e.to_string())?;
            let acted =
                act_variable(&h, &Var::new(var.as_str()), &s).map_err(|e| e.to_string())?;
            if config.json() {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&acted.to_json()).map_err(|e| e.to_string())?
                );
            } else {
                println!("{acted}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn multi(config: &Config, cmd: MultiCmd) -> Result<ExitCode, String> {
    match cmd {
        MultiCmd::Check { input } => match MultiMap::from_json(&read_json(&input)?) {
            Ok(m) => {
                if config.json() {
                    println!(
                        "{}",
                        json!({
                            "valid": true,
                            "tree": m.tree().tree().to_string(),
                            "arity": m.arity(),
                        })
                    );
                } else {
                    println!(
                        "valid multimap over {} ({} inputs)",
                        m.tree().tree(),
                        m.arity()
                    );
                }
                Ok(ExitCode::SUCCESS)
            }
            Err(e) => {
                if config.json() {
                    println!("{}", json!({ "valid": false, "witness": e.to_string() }));
                } else {
                    println!("invalid: {e}");
                }
                Ok(ExitCode::from(1))
            }
        },
        MultiCmd::Compose {
            at,
            input,
            inner,
            output,
        } => {
            let g = MultiMap::from_json(&read_json(&input)?).map_err(|e| e.to_string())?;
            let f = MultiMap::from_json(&read_json(&inner)?).map_err(|e| e.to_string())?;
            let composed = compose(&g, at, &f).map_err(|e| e.to_string())?;
            write_or_print(&output, &composed.to_json())?;
            Ok(ExitCode::SUCCESS)
        }
        MultiCmd::Refine { to, input, output } => {
            let m = MultiMap::from_json(&read_json(&input)?).map_err(|e| e.to_string())?;
            let target = parse_tree(&to).map_err(|e| e.to_string())?;
            let refined = refine(&m, &target).map_err(|e| e.to_string())?;
            write_or_print(&output, &refined.to_json())?;
            Ok(ExitCode::SUCCESS)
        }
        MultiCmd::Invariance { input } => {
            let m = MultiMap::from_json(&read_json(&input)?).map_err(|e| e.to_string())?;
            match full_invariance_filter(&m) {
                Ok(()) => {
                    println!("fully invariant");
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    println!("not invariant: {e}");
                    Ok(ExitCode::from(1))
                }
            }
        }
    }
}

fn built_in(
    config: &Config,
    example: &str,
) -> Result<relmc_core::algebra::AlgebraStructure, String> {
    let window = SeriesWindow::new(config.laurent_depth, config.series_ceil.max(24));
    let b = match example {
        "rationals" => CommDiffAlgebra::rationals(config.degree_bound.max(4)),
        "q-u" => CommDiffAlgebra::truncated_polynomial(4, 6),
        other => return Err(format!("unknown example {other:?}; try rationals or q-u")),
    };
    make_holomorphic_algebra(&b, window, config.invariance_degree).map_err(|e| e.to_string())
}

fn algebra(config: &Config, cmd: AlgebraCmd) -> Result<ExitCode, String> {
    match cmd {
        AlgebraCmd::Demo {
            example,
            max_leaves,
        } => {
            let alg = built_in(config, &example)?;
            let report = check_algebra(&alg, max_leaves);
            if config.json() {
                let entries: Vec<Value> = report
                    .checks
                    .iter()
                    .map(|c| {
                        json!({
                            "axiom": c.axiom,
                            "subject": c.subject,
                            "passed": c.passed,
                            "witness": c.witness,
                        })
                    })
                    .collect();
                println!(
                    "{}",
                    serde_json::to_string_pretty(&json!({
                        "example": example,
                        "passed": report.all_passed(),
                        "commutative": report.commutative(),
                        "checks": entries,
                    }))
                    .map_err(|e| e.to_string())?
                );
            } else {
                print!("{report}");
                println!(
                    "commutative: {}",
                    if report.commutative() { "yes" } else { "no" }
                );
            }
            Ok(if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        AlgebraCmd::Check { input, max_leaves } => {
            let alg = algebra_from_json(
                &read_json(&input)?,
                config.series_window(),
                config.invariance_degree,
            )
            .map_err(|e| e.to_string())?;
            let report = check_algebra(&alg, max_leaves);
            print!("{report}");
            Ok(if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        AlgebraCmd::Ope { a, b, input } => {
            let alg = match input {
                Some(path) => algebra_from_json(
                    &read_json(&path)?,
                    config.series_window(),
                    config.invariance_degree,
                )
                .map_err(|e| e.to_string())?,
                None => built_in(config, "q-u")?,
            };
            let index = |name: &str| -> Result<usize, String> {
                if let Some(alg_data) = alg.algebra() {
                    if let Some(i) = alg_data.basis_index(name) {
                        return Ok(i);
                    }
                }
                name.parse::<usize>()
                    .map_err(|_| format!("unknown basis element {name:?}"))
            };
            let entries = ope_extract(&alg, index(&a)?, index(&b)?).map_err(|e| e.to_string())?;
            if entries.is_empty() {
                println!("zero");
            }
            for (order, coeff) in entries {
                println!("pole order {order}: {coeff}");
            }
            Ok(ExitCode::SUCCESS)
        }
        AlgebraCmd::Export { example, output } => {
            let alg = built_in(config, &example)?;
            write_or_print(&output, &algebra_to_json(&alg))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
