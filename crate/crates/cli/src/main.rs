use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use stc_core::extension::ExtensionError;
use stc_core::generate::{generate, GeneratorParams, TargetAnswer};
use stc_core::io::{
    parse_edgelist, parse_enewick, parse_extension, serialize_edgelist, serialize_extension, EdgeListDocument,
};
use stc_core::oracle::{firm_display, soft_display, OracleConfig};
use stc_core::reduction::ReductionError;
use stc_core::solver::SolveError;
use stc_core::{default_extension, preprocess, solve, Digraph, SolveOptions, TreeExtension, Verdict};

const EX_USAGE: u8 = 64;
const EX_DATAERR: u8 = 65;
const EX_SEMANTIC: u8 = 66;
const EX_SOFTWARE: u8 = 70;

#[derive(Parser)]
#[command(name = "stc", version, about = "Soft tree containment in phylogenetic networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the network softly displays the tree.
    Solve {
        #[command(flatten)]
        pair: Pair,
        /// Extension file; the default extension is used when absent.
        #[arg(short = 'x', long)]
        extension: Option<PathBuf>,
        /// Print the reduced network and an embedding of the tree on YES.
        #[arg(long, conflicts_with = "decision_only")]
        witness: bool,
        /// Keep only the tables needed for the verdict (the default).
        #[arg(long)]
        decision_only: bool,
        /// Print per-vertex table sizes to stderr.
        #[arg(long)]
        stats: bool,
    },
    /// Write the preprocessed network, extension and (with -t) tree.
    Reduce {
        #[arg(short = 'n', long)]
        network: PathBuf,
        #[arg(short = 't', long)]
        tree: Option<PathBuf>,
        #[arg(short = 'x', long)]
        extension: Option<PathBuf>,
        /// Output prefix: PREFIX.net, PREFIX.ext and PREFIX.tree.
        #[arg(short = 'o', long)]
        out: PathBuf,
    },
    /// Tree extension utilities.
    #[command(subcommand)]
    Extension(ExtensionCommand),
    /// Brute-force reference answers for small instances.
    Oracle {
        #[command(subcommand)]
        kind: OracleCommand,
    },
    /// Generate a seeded random instance.
    Gen(GenArgs),
    /// Convert other formats to the edge-list format.
    #[command(subcommand)]
    Import(ImportCommand),
    /// Solve every NAME.net / NAME.tree pair (with optional NAME.ext) in a directory.
    Batch {
        dir: PathBuf,
        #[arg(short = 'j', long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Args)]
struct Pair {
    #[arg(short = 'n', long)]
    network: PathBuf,
    #[arg(short = 't', long)]
    tree: PathBuf,
}

#[derive(Args)]
struct WithExtension {
    #[arg(short = 'n', long)]
    network: PathBuf,
    #[arg(short = 'x', long)]
    extension: PathBuf,
}

#[derive(Subcommand)]
enum ExtensionCommand {
    /// Check an extension and report its width.
    Validate(WithExtension),
    /// Print the width of an extension.
    Width(WithExtension),
    /// Print the canonical form of an extension.
    Canonicalize(WithExtension),
    /// Print the default extension of a network.
    Default {
        #[arg(short = 'n', long)]
        network: PathBuf,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    Firm {
        #[command(flatten)]
        pair: Pair,
        /// Largest network accepted, in arcs.
        #[arg(long)]
        cap: Option<usize>,
    },
    Soft {
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        cap: Option<usize>,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    leaves: usize,
    #[arg(long, default_value_t = 0)]
    reticulations: usize,
    /// Probability of contracting each inner tree arc.
    #[arg(long, default_value_t = 0.0)]
    polytomy: f64,
    /// Probability of contracting each eligible network arc.
    #[arg(long, default_value_t = 0.0)]
    network_polytomy: f64,
    #[arg(long, default_value_t = 0)]
    drop_taxa: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Read the tree off the network; otherwise its labels are also shuffled.
    #[arg(long)]
    yes_biased: bool,
    /// Also emit a random linear extension.
    #[arg(long)]
    extension: bool,
    /// Write PREFIX.net, PREFIX.tree (and PREFIX.ext) instead of printing.
    #[arg(short = 'o', long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ImportCommand {
    /// Convert one extended Newick string.
    Enewick { file: PathBuf },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<ReductionError> for Failure {
    fn from(e: ReductionError) -> Self {
        let code = match e {
            ReductionError::NotNetwork(_)
            | ReductionError::NotTree(_)
            | ReductionError::TaxaNotContained(_)
            | ReductionError::TooFewTaxa(_)
            | ReductionError::ForeignExtension => EX_SEMANTIC,
            _ => EX_SOFTWARE,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        Failure::new(EX_SOFTWARE, e.to_string())
    }
}

impl From<ExtensionError> for Failure {
    fn from(e: ExtensionError) -> Self {
        Failure::new(EX_SEMANTIC, e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new(EX_SEMANTIC, format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<Digraph, Failure> {
    let text = read(path)?;
    parse_edgelist(&text).map(|d| d.graph).map_err(|e| Failure::new(EX_DATAERR, format!("{}: {e}", path.display())))
}

fn load_extension(path: &Path, host: Arc<Digraph>) -> Result<TreeExtension, Failure> {
    let text = read(path)?;
    parse_extension(&text, host).map_err(|e| {
        let code = if e.pos.is_some() { EX_DATAERR } else { EX_SEMANTIC };
        Failure::new(code, format!("{}: {e}", path.display()))
    })
}

fn verdict_code(yes: bool) -> u8 {
    println!("{}", if yes { "YES" } else { "NO" });
    u8::from(!yes)
}

fn run_solve(pair: &Pair, extension: Option<&Path>, witness: bool, stats: bool) -> Outcome {
    let n = load_graph(&pair.network)?;
    let t = load_graph(&pair.tree)?;
    let ext = match extension {
        Some(p) => Some(load_extension(p, Arc::new(n.clone()))?),
        None => None,
    };
    let inst = preprocess(&n, &t, ext.as_ref())?;
    let report = solve(&inst, SolveOptions { witness, audit: false })?;
    if stats {
        for s in &report.stats {
            eprintln!("STATS {} gw={} hw={} gws={} hws={}", s.vertex, s.gw, s.hw, s.gws, s.hws);
        }
    }
    let yes = report.verdict == Verdict::Yes;
    let code = verdict_code(yes);
    if let Some(w) = report.witness.filter(|_| witness) {
        println!("REDUCED-INSTANCE");
        print!("{}", serialize_edgelist(&EdgeListDocument { name: None, graph: (*inst.network).clone() }));
        for ((x, y), path) in &w.phi {
            let verts: Vec<&str> = path.iter().map(|v| v.as_str()).collect();
            println!("EMBED {x} {y} : {}", verts.join(" "));
        }
    }
    Ok(code)
}

fn run_reduce(network: &Path, tree: Option<&Path>, extension: Option<&Path>, out: &Path) -> Outcome {
    let n = load_graph(network)?;
    let t = match tree {
        Some(p) => load_graph(p)?,
        None => star_tree(&n),
    };
    let ext = match extension {
        Some(p) => Some(load_extension(p, Arc::new(n.clone()))?),
        None => None,
    };
    let inst = preprocess(&n, &t, ext.as_ref())?;
    let with = |suffix: &str| {
        let mut p = out.as_os_str().to_owned();
        p.push(suffix);
        PathBuf::from(p)
    };
    let write = |path: PathBuf, text: String| {
        fs::write(&path, text).map_err(|e| Failure::new(EX_SOFTWARE, format!("{}: {e}", path.display())))
    };
    write(with(".net"), serialize_edgelist(&EdgeListDocument { name: None, graph: (*inst.network).clone() }))?;
    write(with(".ext"), serialize_extension(&inst.extension))?;
    if tree.is_some() {
        write(with(".tree"), serialize_edgelist(&EdgeListDocument { name: None, graph: inst.tree.clone() }))?;
    }
    println!("width {}", inst.extension.width());
    Ok(0)
}

/// A star on all taxa of `n`: keeps every taxon, so only the network side of
/// the preprocessing has an effect.
fn star_tree(n: &Digraph) -> Digraph {
    let mut t = Digraph::new();
    for (i, taxon) in n.taxa().into_iter().enumerate() {
        let leaf = stc_core::VertexId::new(format!("leaf{i}"));
        t.add_arc("root".into(), leaf.clone()).expect("fresh ids");
        t.set_label(leaf, taxon).expect("leaf");
    }
    t
}

fn run_extension(cmd: &ExtensionCommand) -> Outcome {
    match cmd {
        ExtensionCommand::Validate(a) | ExtensionCommand::Width(a) | ExtensionCommand::Canonicalize(a) => {
            let host = Arc::new(load_graph(&a.network)?);
            let ext = load_extension(&a.extension, host)?;
            match cmd {
                ExtensionCommand::Validate(_) => {
                    let canon = if ext.is_canonical() { "canonical" } else { "not canonical" };
                    println!("valid, width {}, {canon}", ext.width());
                    for v in ext.canonicality_violations() {
                        println!("  {v:?}");
                    }
                }
                ExtensionCommand::Width(_) => println!("{}", ext.width()),
                _ => print!("{}", serialize_extension(&ext.canonicalize()?)),
            }
        }
        ExtensionCommand::Default { network } => {
            let host = Arc::new(load_graph(network)?);
            print!("{}", serialize_extension(&default_extension(host)?));
        }
    }
    Ok(0)
}

fn run_oracle(cmd: &OracleCommand) -> Outcome {
    let (pair, cap, soft) = match cmd {
        OracleCommand::Firm { pair, cap } => (pair, cap, false),
        OracleCommand::Soft { pair, cap } => (pair, cap, true),
    };
    let mut cfg = OracleConfig::from_env();
    if let Some(c) = cap {
        cfg.max_arcs = *c;
    }
    let n = load_graph(&pair.network)?;
    let t = load_graph(&pair.tree)?;
    let answer = if soft { soft_display(&n, &t, &cfg) } else { firm_display(&n, &t, &cfg) };
    let yes = answer.map_err(|e| Failure::new(EX_SEMANTIC, e.to_string()))?;
    Ok(verdict_code(yes))
}

fn run_gen(a: &GenArgs) -> Outcome {
    let params = GeneratorParams {
        leaves: a.leaves,
        reticulations: a.reticulations,
        polytomy_rate: a.polytomy,
        network_polytomy_rate: a.network_polytomy,
        drop_taxa: a.drop_taxa,
        max_tree_out_degree: None,
        target: if a.yes_biased { TargetAnswer::YesBiased } else { TargetAnswer::Unlabeled },
        extension: a.extension,
        seed: a.seed,
    };
    let g = generate(&params).map_err(|e| Failure::new(EX_USAGE, e.to_string()))?;
    let net = serialize_edgelist(&EdgeListDocument { name: Some(format!("gen-{}", a.seed)), graph: g.network });
    let tree = serialize_edgelist(&EdgeListDocument { name: None, graph: g.tree });
    let ext = g.extension.as_ref().map(serialize_extension);
    match &a.out {
        Some(prefix) => {
            for (suffix, text) in [(".net", Some(net)), (".tree", Some(tree)), (".ext", ext)] {
                let Some(text) = text else { continue };
                let mut p = prefix.as_os_str().to_owned();
                p.push(suffix);
                fs::write(&p, text).map_err(|e| Failure::new(EX_SOFTWARE, format!("{p:?}: {e}")))?;
            }
        }
        None => {
            print!("# network\n{net}# tree\n{tree}");
            if let Some(ext) = ext {
                print!("# extension\n{ext}");
            }
        }
    }
    Ok(0)
}

fn run_import(cmd: &ImportCommand) -> Outcome {
    let ImportCommand::Enewick { file } = cmd;
    let text = read(file)?;
    let g = parse_enewick(&text).map_err(|e| Failure::new(EX_DATAERR, format!("{}: {e}", file.display())))?;
    print!("{}", serialize_edgelist(&EdgeListDocument { name: None, graph: g }));
    Ok(0)
}

fn batch_one(net: &Path) -> Result<Verdict, Failure> {
    let n = load_graph(net)?;
    let t = load_graph(&net.with_extension("tree"))?;
    let ext_path = net.with_extension("ext");
    let ext = if ext_path.exists() { Some(load_extension(&ext_path, Arc::new(n.clone()))?) } else { None };
    let inst = preprocess(&n, &t, ext.as_ref())?;
    Ok(solve(&inst, SolveOptions::default())?.verdict)
}

fn run_batch(dir: &Path, jobs: usize) -> Outcome {
    let entries = fs::read_dir(dir).map_err(|e| Failure::new(EX_SEMANTIC, format!("{}: {e}", dir.display())))?;
    let mut nets: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "net"))
        .collect();
    nets.sort();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Failure::new(EX_SOFTWARE, e.to_string()))?;
    let results: Vec<Result<Verdict, Failure>> = pool.install(|| nets.par_iter().map(|p| batch_one(p)).collect());
    let mut worst = 0;
    for (p, r) in nets.iter().zip(results) {
        let name = p.file_stem().unwrap_or_default().to_string_lossy();
        match r {
            Ok(v) => println!("{name} {}", if v == Verdict::Yes { "YES" } else { "NO" }),
            Err(f) => {
                println!("{name} ERROR {}", f.message);
                worst = worst.max(f.code);
            }
        }
    }
    Ok(worst)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EX_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Solve { pair, extension, witness, decision_only: _, stats } => {
            run_solve(pair, extension.as_deref(), *witness, *stats)
        }
        Command::Reduce { network, tree, extension, out } => {
            run_reduce(network, tree.as_deref(), extension.as_deref(), out)
        }
        Command::Extension(cmd) => run_extension(cmd),
        Command::Oracle { kind } => run_oracle(kind),
        Command::Gen(a) => run_gen(a),
        Command::Import(cmd) => run_import(cmd),
        Command::Batch { dir, jobs } => run_batch(dir, *jobs),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
