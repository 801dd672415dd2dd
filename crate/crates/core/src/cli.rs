//! The `btl` command line.
//!
//! Exit codes: 0 SAT (or success), 1 UNSAT within the branching cap,
//! 2 UNKNOWN, 3 input or configuration error.

use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::compile::{compile_pectl_keys, compile_pectlplusn_keys};
use crate::formula::{classify, format_file, parse, parse_file, print, StateFormula};
use crate::normalform::normalize;
use crate::pipeline::{decide, SolverConfig, Verdict};
use crate::random::{props, state_formula, FormulaShape};
use crate::tiling::{
    encode_ubplus, encode_ubpn, solve_game, strategy_model, ubplus_props, ubpn_props, Encoding,
    TilingInstance, UbplusVariant, Winner,
};
use crate::tree_model::{check_regular, evaluate_state, FiniteTree, KripkeModel};

pub const EXIT_SAT: i32 = 0;
pub const EXIT_UNSAT: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

/// Version of the JSON reports.
pub const SCHEMA: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "btl", version, about = "Satisfiability and model checking for branching-time logic with past")]
pub struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Human, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Branching cap of the symmetric-to-explicit translation.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub d_max: u64,
    /// Maximal number of explored automaton states.
    #[arg(long, default_value_t = 1_000_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub state_cap: u64,
    /// Node bound of the candidate-tree search.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub oracle_nodes: u64,
    /// Degree bound of the candidate-tree search.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    pub oracle_degree: u64,
    /// Maximal number of candidate trees.
    #[arg(long, default_value_t = 200_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub oracle_cap: u64,
    /// Tree JSON files tried as candidate models first.
    #[arg(long = "seed-model")]
    pub seed_models: Vec<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide satisfiability of a formula file.
    Sat {
        file: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the witness model (Kripke JSON) here on SAT.
        #[arg(long)]
        emit_witness: Option<PathBuf>,
    },
    /// Evaluate a formula (text or file) on a tree or Kripke JSON file.
    Mc {
        formula: String,
        model: PathBuf,
        /// Tree node to evaluate at (trees only).
        #[arg(long, default_value_t = 0)]
        node: usize,
    },
    /// Dump the compiled automaton.
    Compile {
        file: PathBuf,
        #[arg(long, value_enum)]
        emit: Emit,
        #[command(flatten)]
        solver: SolverArgs,
        /// Maximal number of Rabin states dumped.
        #[arg(long, default_value_t = 200)]
        node_cap: usize,
    },
    /// Print the normal form and its renaming table.
    Normalize { file: PathBuf },
    /// Print a random formula file.
    Random {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        connectives: usize,
        #[arg(long, default_value_t = 2)]
        props: usize,
        #[arg(long, value_enum, default_value_t = Shape::Pectl)]
        shape: Shape,
    },
    /// Tiling games.
    Tiling {
        #[command(subcommand)]
        command: TilingCommand,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Haa,
    Nra,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Shape {
    Future,
    Pectl,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EncodingArg {
    Ubpn,
    Ubplus,
    UbplusPrinted,
}

#[derive(Subcommand, Debug)]
pub enum TilingCommand {
    /// Print the formula file encoding an instance.
    Gen {
        instance: PathBuf,
        #[arg(long, value_enum)]
        encoding: EncodingArg,
        /// Pad instances violating the move assumption with a sink tile.
        #[arg(long)]
        pad: bool,
        /// Write the strategy tree of E (tree JSON) here when E wins.
        #[arg(long)]
        emit_seed: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        max_rows: usize,
    },
    /// Solve the game exhaustively.
    Solve {
        instance: PathBuf,
        #[arg(long)]
        pad: bool,
        #[arg(long, default_value_t = 8)]
        max_rows: usize,
    },
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

/// Output of one command: exit code, human text and JSON report.
struct Report {
    code: i32,
    human: String,
    json: Value,
}

/// Runs the command line on `args` (including the program name), writing to
/// `out`; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_INPUT,
            };
            let _ = write!(out, "{e}");
            return code;
        }
    };
    let format = cli.format;
    let (code, text) = match dispatch(cli.command) {
        Ok(r) => match format {
            Format::Human => (r.code, r.human),
            Format::Json => {
                let mut j = r.json;
                j["schema"] = json!(SCHEMA);
                (r.code, format!("{j:#}\n"))
            }
        },
        Err(Failure(msg)) => match format {
            Format::Human => (EXIT_INPUT, format!("error: {msg}\n")),
            Format::Json => (
                EXIT_INPUT,
                format!("{:#}\n", json!({"schema": SCHEMA, "error": msg})),
            ),
        },
    };
    let _ = out.write_all(text.as_bytes());
    code
}

fn read(path: &Path) -> Result<String, Failure> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn config(s: &SolverArgs) -> Result<SolverConfig, Failure> {
    let mut seeds = Vec::new();
    for p in &s.seed_models {
        seeds.push(FiniteTree::from_json(&read(p)?)?);
    }
    Ok(SolverConfig {
        d_max: s.d_max as usize,
        state_cap: s.state_cap as usize,
        oracle_nodes: s.oracle_nodes as usize,
        oracle_degree: s.oracle_degree as usize,
        oracle_cap: s.oracle_cap as usize,
        seeds,
    })
}

fn instance(path: &Path, pad: bool) -> Result<(TilingInstance, Vec<String>), Failure> {
    let i = TilingInstance::from_json(&read(path)?)?;
    let problems = i.validate();
    if problems.is_empty() {
        return Ok((i, Vec::new()));
    }
    if !pad {
        return Err(Failure(format!(
            "{} (use --pad to add a sink tile)",
            problems.join("; ")
        )));
    }
    let (p, note) = i.pad();
    Ok((p, vec![note]))
}

fn dispatch(cmd: Command) -> Result<Report, Failure> {
    match cmd {
        Command::Sat {
            file,
            solver,
            emit_witness,
        } => cmd_sat(&file, &solver, emit_witness.as_deref()),
        Command::Mc {
            formula,
            model,
            node,
        } => cmd_mc(&formula, &model, node),
        Command::Compile {
            file,
            emit,
            solver,
            node_cap,
        } => cmd_compile(&file, emit, &solver, node_cap),
        Command::Normalize { file } => cmd_normalize(&file),
        Command::Random {
            seed,
            connectives,
            props: n,
            shape,
        } => {
            let shape = match shape {
                Shape::Future => FormulaShape::FUTURE_CTL,
                Shape::Pectl => FormulaShape::PECTL,
                Shape::Full => FormulaShape::FULL,
            };
            let ps = props(n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = state_formula(&mut rng, &ps, connectives, shape);
            Ok(Report {
                code: 0,
                human: format_file(&ps, &f),
                json: json!({"props": ps, "formula": print(&f)}),
            })
        }
        Command::Tiling { command } => cmd_tiling(command),
    }
}

fn cmd_sat(file: &Path, s: &SolverArgs, emit: Option<&Path>) -> Result<Report, Failure> {
    let ff = parse_file(&read(file)?)?;
    let cfg = config(s)?;
    let r = decide(&ff.formula, &cfg)?;
    let n = r.stats.automaton_states;
    let exponent = n * n * (r.stats.pebbles + 1);
    let (code, verdict) = match r.verdict {
        Verdict::Nonempty => (EXIT_SAT, "SAT".to_string()),
        Verdict::Empty => (EXIT_UNSAT, format!("UNSAT(branching <= {})", cfg.d_max)),
        Verdict::Unknown => (EXIT_UNKNOWN, "UNKNOWN".to_string()),
    };
    let mut human = format!("{verdict}\n");
    if r.verdict == Verdict::Empty {
        let _ = writeln!(
            human,
            "note: no model of branching degree at most {}; models of higher degree are not excluded (completeness needs degree 2^{exponent})",
            cfg.d_max
        );
    }
    if !r.scope.is_empty() {
        let _ = writeln!(human, "scope: {}", r.scope);
    }
    if let Some(c) = r.witness_check {
        let _ = writeln!(human, "witness check: {}", serde_json::to_value(c)?.as_str().unwrap_or(""));
    }
    let st = &r.stats;
    let _ = writeln!(
        human,
        "stats: generator={} automaton_states={} pebbles={} rabin_states={} moves={} game_positions={} millis={}",
        st.generator, st.automaton_states, st.pebbles, st.states, st.moves, st.game_positions, st.millis
    );
    let mut witness = Value::Null;
    if let Some(w) = &r.witness {
        witness = w.to_json();
        if let Some(p) = emit {
            write(p, &format!("{witness:#}\n"))?;
            let _ = writeln!(human, "witness written to {}", p.display());
        }
    }
    let json = json!({
        "command": "sat",
        "verdict": verdict,
        "d_max": cfg.d_max,
        "branching_bound_exponent": exponent,
        "scope": r.scope,
        "witness_check": r.witness_check,
        "witness": witness,
        "stats": r.stats,
    });
    Ok(Report { code, human, json })
}

enum Model {
    Tree(FiniteTree),
    Kripke(KripkeModel),
}

fn load_model(path: &Path) -> Result<Model, Failure> {
    let text = read(path)?;
    let v: Value = serde_json::from_str(&text)?;
    if v.get("edges").is_some() {
        Ok(Model::Kripke(KripkeModel::from_json(&text)?))
    } else {
        Ok(Model::Tree(FiniteTree::from_json(&text)?))
    }
}

fn formula_arg(arg: &str, alphabet: &[String]) -> Result<StateFormula, Failure> {
    let p = Path::new(arg);
    if p.is_file() {
        return Ok(parse_file(&read(p)?)?.formula);
    }
    Ok(parse(arg, alphabet)?)
}

fn cmd_mc(formula: &str, model: &Path, node: usize) -> Result<Report, Failure> {
    let m = load_model(model)?;
    let (value, kind) = match &m {
        Model::Tree(t) => {
            let f = formula_arg(formula, &t.props)?;
            (evaluate_state(t, node, &f)?, "tree")
        }
        Model::Kripke(k) => {
            if node != 0 {
                return Err(Failure("--node applies to trees only".into()));
            }
            let f = formula_arg(formula, &k.props)?;
            (check_regular(k, &f)?, "kripke")
        }
    };
    Ok(Report {
        code: 0,
        human: format!("{value}\n"),
        json: json!({"command": "mc", "model": kind, "node": node, "value": value}),
    })
}

fn cmd_compile(file: &Path, emit: Emit, s: &SolverArgs, cap: usize) -> Result<Report, Failure> {
    let ff = parse_file(&read(file)?)?;
    match emit {
        Emit::Haa => {
            let f = &ff.formula;
            let compiled = if classify(f).is_pectl() {
                compile_pectl_keys(f)?
            } else {
                compile_pectlplusn_keys(&normalize(f).formula)?
            };
            let j = compiled.automaton.to_json();
            Ok(Report {
                code: 0,
                human: format!("{j:#}\n"),
                json: json!({"command": "compile", "emit": "haa", "automaton": j}),
            })
        }
        Emit::Nra => {
            let r = decide(&ff.formula, &config(s)?)?;
            let shown: Vec<Value> = r
                .visited
                .iter()
                .take(cap)
                .map(|t| serde_json::to_value(t).expect("serializable"))
                .collect();
            let j = json!({
                "command": "compile",
                "emit": "nra",
                "generator": r.stats.generator,
                "reachable": r.visited.len(),
                "shown": shown.len(),
                "states": shown,
            });
            Ok(Report {
                code: 0,
                human: format!("{j:#}\n"),
                json: j,
            })
        }
    }
}

fn cmd_normalize(file: &Path) -> Result<Report, Failure> {
    let ff = parse_file(&read(file)?)?;
    let cert = normalize(&ff.formula);
    let mut all = ff.props.clone();
    all.extend(cert.fresh_props());
    let text = format_file(&all, &cert.formula);
    let human = format!("{text}\n{}", cert.table());
    let defs: Vec<Value> = cert
        .definitions
        .iter()
        .map(|d| json!({"name": d.name, "polarity": format!("{:?}", d.polarity), "definition": print(&d.definition)}))
        .collect();
    Ok(Report {
        code: 0,
        human,
        json: json!({
            "command": "normalize",
            "props": all,
            "formula": print(&cert.formula),
            "definitions": defs,
            "ratio": cert.ratio(),
        }),
    })
}

fn cmd_tiling(cmd: TilingCommand) -> Result<Report, Failure> {
    match cmd {
        TilingCommand::Gen {
            instance: path,
            encoding,
            pad,
            emit_seed,
            max_rows,
        } => {
            let (i, notes) = instance(&path, pad)?;
            let (props, f, enc) = match encoding {
                EncodingArg::Ubpn => (ubpn_props(&i), encode_ubpn(&i), Encoding::Ubpn),
                EncodingArg::Ubplus => (
                    ubplus_props(&i),
                    encode_ubplus(&i, UbplusVariant::Repaired),
                    Encoding::Ubplus,
                ),
                EncodingArg::UbplusPrinted => (
                    ubplus_props(&i),
                    encode_ubplus(&i, UbplusVariant::Printed),
                    Encoding::Ubplus,
                ),
            };
            let mut seed_written = false;
            if let Some(p) = emit_seed {
                let sol = solve_game(&i, max_rows)?;
                if sol.winner == Winner::E {
                    let t = strategy_model(&i, &sol, enc)?;
                    write(&p, &format!("{:#}\n", t.to_json()))?;
                    seed_written = true;
                }
            }
            let text = format_file(&props, &f);
            Ok(Report {
                code: 0,
                human: text,
                json: json!({
                    "command": "tiling gen",
                    "props": props,
                    "formula": print(&f),
                    "notes": notes,
                    "seed_written": seed_written,
                }),
            })
        }
        TilingCommand::Solve {
            instance: path,
            pad,
            max_rows,
        } => {
            let (i, notes) = instance(&path, pad)?;
            let s = solve_game(&i, max_rows)?;
            let winner = match s.winner {
                Winner::E => "E",
                Winner::A => "A",
                Winner::Undecided => "UNDECIDED",
            };
            let mut human = format!("{winner}\n");
            for n in &notes {
                let _ = writeln!(human, "note: {n}");
            }
            if s.a_stuck > 0 || s.a_outside_f > 0 {
                let _ = writeln!(
                    human,
                    "note: A can get stuck or leave F in the first row; the encodings assume neither"
                );
            }
            Ok(Report {
                code: 0,
                human,
                json: json!({
                    "command": "tiling solve",
                    "winner": winner,
                    "rows_needed": s.rows_needed,
                    "positions": s.positions,
                    "a_stuck": s.a_stuck,
                    "a_outside_f": s.a_outside_f,
                    "notes": notes,
                }),
            })
        }
    }
}
