//! The `dynrank` command line.
//!
//! Every command computes its complete output in memory and then writes it either to stdout or,
//! with `--out`, atomically to a file. Exit status is 0 on success, 1 on usage errors and 2 on
//! data or runtime errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::baselines::{compare_report, cross_optimize_table, width_sweep, Method};
use crate::error::{Error, Result};
use crate::features::FeatureTemplate;
use crate::gains::{dynamic_utility_expected, ConcaveGain, GainSpec};
use crate::greedy::{brute_force_optimal, greedy_two_level, GreedyOptions};
use crate::io::{self, LoadOptions, ProbMode};
use crate::learn::{self, Model, Termination, TrainJob, DEFAULT_C_GRID, DEFAULT_EPSILON};
use crate::ranking::{validate_ranking, QueryCase, ShapeParams, TwoLevelRanking};
use crate::synth::{gen_synthetic, SynthParams};
use crate::usermodel::{truncated_metric, user_path};

#[derive(Debug, Parser)]
#[command(
    name = "dynrank",
    version,
    about = "Two-level dynamic rankings for ambiguous queries"
)]
struct Cli {
    /// Worker threads for --parallel (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Greedy (or baseline) rankings for every query of a corpus.
    Rank(RankArgs),
    /// Truncated metrics and expected utilities of rankings.
    Evaluate(EvalArgs),
    /// Per-intent user paths through rankings.
    Simulate(EvalArgs),
    /// Mean utility under each evaluation gain when optimizing for each gain.
    Crosstab(CrosstabArgs),
    /// Static and dynamic methods side by side.
    Compare(CompareArgs),
    /// Mean truncated metric of the greedy ranking as the tail width grows (CSV).
    SweepWidth(SweepArgs),
    /// Structural SVM training on queries with text.
    Train(TrainArgs),
    /// Rankings predicted by a trained model.
    Predict(PredictArgs),
    /// Seeded synthetic corpus.
    Gen(GenArgs),
    /// Greedy against the exhaustive optimum on small instances.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProbArg {
    Auto,
    Explicit,
    Proportional,
    Uniform,
}

#[derive(Debug, Args)]
struct Input {
    /// Corpus file.
    #[arg(long, conflicts_with = "qrels", required_unless_present = "qrels")]
    corpus: Option<PathBuf>,
    /// Tab-separated `topic intent doc grade` judgments instead of a corpus.
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// Map every positive grade to 1.
    #[arg(long)]
    binarize: bool,
    /// Intent probabilities.
    #[arg(long, value_enum, default_value = "auto")]
    probs: ProbArg,
}

impl Input {
    fn load(&self) -> Result<Vec<QueryCase>> {
        let opts = LoadOptions {
            binarize: self.binarize,
            prob_mode: match self.probs {
                ProbArg::Auto => ProbMode::Auto,
                ProbArg::Explicit => ProbMode::Explicit,
                ProbArg::Proportional => ProbMode::Proportional,
                ProbArg::Uniform => ProbMode::Uniform,
            },
        };
        let cases = match (&self.corpus, &self.qrels) {
            (Some(p), _) => io::load_corpus(p, &opts)?,
            (None, Some(p)) => {
                let text = read(p)?;
                io::parse_qrels(&text, &opts)?
            }
            (None, None) => unreachable!("clap requires an input"),
        };
        if cases.is_empty() {
            return Err(Error::InvalidParameter("input contains no queries".into()));
        }
        Ok(cases)
    }
}

#[derive(Debug, Args)]
struct Shape {
    /// Number of rows.
    #[arg(long = "L", default_value_t = 5)]
    length: usize,
    /// Maximum tail length per row.
    #[arg(long = "W", default_value_t = 2)]
    width: usize,
}

impl Shape {
    fn params(&self) -> Result<ShapeParams> {
        ShapeParams::new(self.length, self.width)
    }
}

#[derive(Debug, Args)]
struct Output {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Evaluate queries concurrently.
    #[arg(long)]
    parallel: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Dyn,
    StatUtil,
    StatDepth,
    StatDiv,
    DynRand,
    DynDiv,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Dyn => Method::Dyn,
            MethodArg::StatUtil => Method::StatUtil,
            MethodArg::StatDepth => Method::StatDepth,
            MethodArg::StatDiv => Method::StatDiv,
            MethodArg::DynRand => Method::DynRand,
            MethodArg::DynDiv => Method::DynDiv,
        }
    }
}

#[derive(Debug, Args)]
struct RankArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    output: Output,
    /// Concave gain: prec, sqrt, log, sat1, sat2 or sat:<k>.
    #[arg(long, default_value = "sqrt")]
    g: String,
    #[arg(long, value_enum, default_value = "dyn")]
    method: MethodArg,
    /// Seed for dyn-rand.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// End tails and the ranking once no extension adds utility.
    #[arg(long)]
    stop_on_zero: bool,
    /// Lazy row evaluation.
    #[arg(long)]
    lazy: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    output: Output,
    /// Rankings file; without it the greedy rankings for --g are used.
    #[arg(long)]
    rankings: Option<PathBuf>,
    #[arg(long, default_value = "sqrt")]
    g: String,
    /// Path cutoff.
    #[arg(long, default_value_t = 5)]
    k: usize,
}

#[derive(Debug, Args)]
struct CrosstabArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    output: Output,
    #[arg(long, default_value = "sqrt")]
    g: String,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Seed for dyn-rand.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated output instead of tab-separated.
    #[arg(long)]
    csv: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    output: Output,
    #[arg(long, default_value = "sqrt")]
    g: String,
    #[arg(long = "L", default_value_t = 5)]
    length: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    widths: Vec<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    output: Output,
    /// Where to write the model.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "sqrt")]
    g: String,
    /// Regularization constant; ignored with --select-c.
    #[arg(long = "C", default_value_t = 0.01)]
    c: f64,
    /// Choose C from the default grid by validation utility.
    #[arg(long)]
    select_c: bool,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Feature template (TOML); defaults to the built-in thresholds.
    #[arg(long)]
    template: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    output: Output,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    template: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 50)]
    n_queries: usize,
    #[arg(long, default_value_t = 4)]
    n_intents: usize,
    #[arg(long, default_value_t = 20)]
    n_docs: usize,
    /// Zipf exponent of the intent distribution.
    #[arg(long, default_value_t = 1.0)]
    zipf: f64,
    /// Probability that a relevant document has a second intent.
    #[arg(long, default_value_t = 0.3)]
    overlap: f64,
    /// Fraction of documents relevant to no intent.
    #[arg(long, default_value_t = 0.2)]
    irrelevant: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Judgments only.
    #[arg(long)]
    no_text: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    shape: Shape,
    #[command(flatten)]
    output: Output,
    #[arg(long, default_value = "sqrt")]
    g: String,
    /// Maximum number of rankings to enumerate per query.
    #[arg(long, default_value_t = crate::greedy::DEFAULT_ENUMERATION_LIMIT)]
    limit: u128,
}

/// Shortest decimal with at most nine fractional digits.
pub fn fmt_num(x: f64) -> String {
    let s = format!("{x:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str, stdout: &mut String) -> Result<()> {
    match out {
        Some(p) => io::write_atomic(p, text),
        None => {
            stdout.push_str(text);
            Ok(())
        }
    }
}

fn per_query<T, F>(cases: &[QueryCase], parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&QueryCase) -> Result<T> + Sync,
{
    use rayon::prelude::*;
    let wrap = |c: &QueryCase| {
        f(c).map_err(|e| Error::InvalidParameter(format!("query {}: {e}", c.query_id())))
    };
    if parallel {
        cases.par_iter().map(wrap).collect()
    } else {
        cases.iter().map(wrap).collect()
    }
}

fn load_template(path: &Option<PathBuf>) -> Result<FeatureTemplate> {
    match path {
        Some(p) => FeatureTemplate::from_config(&read(p)?),
        None => Ok(FeatureTemplate::default()),
    }
}

fn gain_name(g: &ConcaveGain) -> String {
    g.to_string().to_uppercase()
}

fn cmd_rank(a: &RankArgs, stdout: &mut String) -> Result<()> {
    let cases = a.input.load()?;
    let spec: GainSpec = a.g.parse()?;
    let shape = a.shape.params()?;
    let method = Method::from(a.method);
    let opts = GreedyOptions {
        stop_on_zero: a.stop_on_zero,
        lazy: a.lazy,
        parallel: false,
    };
    let rankings = per_query(&cases, a.output.parallel, |c| match method {
        Method::Dyn => greedy_two_level(c, &spec, &shape, opts),
        m => m.rank(c, &spec, &shape, a.seed),
    })?;
    emit(
        &a.output.out,
        &io::format_rankings(&cases, &rankings)?,
        stdout,
    )
}

/// The cases and rankings to evaluate: those listed in the rankings file, in file order, or
/// every case with its greedy ranking.
fn eval_inputs(a: &EvalArgs) -> Result<(Vec<QueryCase>, Vec<TwoLevelRanking>, GainSpec)> {
    let cases = a.input.load()?;
    let spec: GainSpec = a.g.parse()?;
    match &a.rankings {
        Some(p) => {
            let listed = io::parse_rankings(&read(p)?, &cases)?;
            let mut sel_cases = Vec::with_capacity(listed.len());
            let mut rankings = Vec::with_capacity(listed.len());
            for (i, r) in listed {
                let width = r.rows.iter().map(|row| row.tail.len()).max().unwrap_or(0);
                let shape = ShapeParams::new(r.len().max(1), width)?;
                validate_ranking(&r, &cases[i], &shape)?;
                sel_cases.push(cases[i].clone());
                rankings.push(r);
            }
            if sel_cases.is_empty() {
                return Err(Error::InvalidParameter(
                    "rankings file lists no queries".into(),
                ));
            }
            Ok((sel_cases, rankings, spec))
        }
        None => {
            let shape = a.shape.params()?;
            let rankings = per_query(&cases, a.output.parallel, |c| {
                greedy_two_level(c, &spec, &shape, GreedyOptions::default())
            })?;
            Ok((cases, rankings, spec))
        }
    }
}

fn cmd_evaluate(a: &EvalArgs, stdout: &mut String) -> Result<()> {
    let (cases, rankings, spec) = eval_inputs(a)?;
    let pairs: Vec<(usize, &QueryCase)> = cases.iter().enumerate().collect();
    let rows = {
        use rayon::prelude::*;
        let f = |&(i, c): &(usize, &QueryCase)| -> Result<(f64, f64)> {
            Ok((
                truncated_metric(&rankings[i], c, &spec, a.k)?,
                dynamic_utility_expected(&rankings[i], c, &spec)?,
            ))
        };
        if a.output.parallel {
            pairs.par_iter().map(f).collect::<Result<Vec<_>>>()?
        } else {
            pairs.iter().map(f).collect::<Result<Vec<_>>>()?
        }
    };
    let name = gain_name(&spec.gain);
    let mut out = format!("query\t{name}@{}\t{name}_utility\n", a.k);
    for (c, (m, u)) in cases.iter().zip(&rows) {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            c.query_id(),
            fmt_num(*m),
            fmt_num(*u)
        ));
    }
    let n = rows.len() as f64;
    let mean_m = rows.iter().map(|r| r.0).sum::<f64>() / n;
    let mean_u = rows.iter().map(|r| r.1).sum::<f64>() / n;
    out.push_str(&format!("mean\t{}\t{}\n", fmt_num(mean_m), fmt_num(mean_u)));
    emit(&a.output.out, &out, stdout)
}

fn cmd_simulate(a: &EvalArgs, stdout: &mut String) -> Result<()> {
    let (cases, rankings, _) = eval_inputs(a)?;
    let mut out = String::from("query\tintent\tpath\n");
    for (c, r) in cases.iter().zip(&rankings) {
        for t in 0..c.n_intents() {
            let path: Vec<&str> = user_path(r, t, c)
                .viewed
                .iter()
                .map(|&d| c.document(d).label.as_str())
                .collect();
            out.push_str(&format!(
                "{}\t{}\t{}\n",
                c.query_id(),
                c.intents().label(t),
                path.join(" ")
            ));
        }
    }
    emit(&a.output.out, &out, stdout)
}

fn cmd_crosstab(a: &CrosstabArgs, stdout: &mut String) -> Result<()> {
    let cases = a.input.load()?;
    let table = cross_optimize_table(&cases, &a.shape.params()?, a.output.parallel)?;
    let names: Vec<String> = ConcaveGain::standard_four().iter().map(gain_name).collect();
    let mut out = format!("eval\\opt\t{}\n", names.join("\t"));
    for (name, row) in names.iter().zip(&table) {
        let cells: Vec<String> = row.iter().map(|&v| fmt_num(v)).collect();
        out.push_str(&format!("{name}\t{}\n", cells.join("\t")));
    }
    emit(&a.output.out, &out, stdout)
}

fn cmd_compare(a: &CompareArgs, stdout: &mut String) -> Result<()> {
    let cases = a.input.load()?;
    let spec: GainSpec = a.g.parse()?;
    let rows = compare_report(
        &cases,
        &spec,
        &a.shape.params()?,
        a.k,
        a.seed,
        a.output.parallel,
    )?;
    let sep = if a.csv { "," } else { "\t" };
    let name = gain_name(&spec.gain);
    let mut out = format!("method{sep}{name}@{}{sep}{name}_utility\n", a.k);
    for r in rows {
        out.push_str(&format!(
            "{}{sep}{}{sep}{}\n",
            r.method,
            fmt_num(r.truncated),
            fmt_num(r.utility)
        ));
    }
    emit(&a.output.out, &out, stdout)
}

fn cmd_sweep(a: &SweepArgs, stdout: &mut String) -> Result<()> {
    let cases = a.input.load()?;
    let spec: GainSpec = a.g.parse()?;
    if a.widths.is_empty() {
        return Err(Error::InvalidParameter("no widths given".into()));
    }
    let points = width_sweep(&cases, &spec, a.length, &a.widths, a.k, a.output.parallel)?;
    let mut out = format!("width,{}@{}\n", gain_name(&spec.gain), a.k);
    for (w, m) in points {
        out.push_str(&format!("{w},{}\n", fmt_num(m)));
    }
    emit(&a.output.out, &out, stdout)
}

fn cmd_train(a: &TrainArgs, stdout: &mut String) -> Result<()> {
    let cases = a.input.load()?;
    let spec: GainSpec = a.g.parse()?;
    let shape = a.shape.params()?;
    let mut job = TrainJob::from_cases(&cases, spec.clone(), shape)?;
    job.template = load_template(&a.template)?;
    job.epsilon = a.epsilon;
    job.max_iters = a.max_iters;
    job.parallel = a.output.parallel;
    job.c = a.c;
    let mut out = String::new();
    if a.select_c {
        let sel = learn::select_c(&job, &DEFAULT_C_GRID)?;
        for (c, s) in &sel.scores {
            out.push_str(&format!("validation\t{c:e}\t{}\n", fmt_num(*s)));
        }
        job.c = sel.c;
    }
    let report = learn::train(&job)?;
    let ratio = learn::utility_ratio(&report.weights, &job.examples, &job.template, &spec, &shape)?;
    let model = Model::new(job.template.clone(), spec.gain.clone(), report.weights)?;
    out.push_str(&format!("C\t{:e}\n", job.c));
    out.push_str(&format!(
        "terminated\t{}\n",
        match report.terminated_by {
            Termination::Tolerance => "tolerance",
            Termination::MaxIters => "max-iters",
        }
    ));
    out.push_str(&format!(
        "passes\t{}\n",
        report.dual_objective_trace.len() + 1
    ));
    out.push_str(&format!("constraints\t{}\n", report.constraints.len()));
    if let Some(d) = report.dual_objective_trace.last() {
        out.push_str(&format!("dual_objective\t{}\n", fmt_num(*d)));
    }
    out.push_str(&format!("train_utility_ratio\t{}\n", fmt_num(ratio)));
    io::write_atomic(&a.model, &model.to_text())?;
    emit(&a.output.out, &out, stdout)
}

fn cmd_predict(a: &PredictArgs, stdout: &mut String) -> Result<()> {
    let cases = a.input.load()?;
    let template = load_template(&a.template)?;
    let model = Model::from_text(&read(&a.model)?, &template)?;
    let spec = GainSpec::new(model.gain.clone());
    let shape = a.shape.params()?;
    let rankings = per_query(&cases, a.output.parallel, |c| {
        learn::predict_case(&model.weights, c, &model.template, &spec, &shape)
    })?;
    emit(
        &a.output.out,
        &io::format_rankings(&cases, &rankings)?,
        stdout,
    )
}

fn cmd_gen(a: &GenArgs, stdout: &mut String) -> Result<()> {
    let cases = gen_synthetic(&SynthParams {
        n_queries: a.n_queries,
        n_intents: a.n_intents,
        n_docs: a.n_docs,
        zipf_s: a.zipf,
        overlap: a.overlap,
        irrelevant: a.irrelevant,
        seed: a.seed,
        text: !a.no_text,
    })?;
    emit(&a.out, &io::format_corpus(&cases), stdout)
}

fn cmd_oracle(a: &OracleArgs, stdout: &mut String) -> Result<()> {
    let cases = a.input.load()?;
    let spec: GainSpec = a.g.parse()?;
    let shape = a.shape.params()?;
    let rows = per_query(&cases, a.output.parallel, |c| {
        let g = greedy_two_level(c, &spec, &shape, GreedyOptions::default())?;
        let gu = dynamic_utility_expected(&g, c, &spec)?;
        let (best, bu) = brute_force_optimal(c, &spec, &shape, a.limit)?;
        Ok((gu, bu, io::format_ranking(&best, c)?))
    })?;
    let mut out = String::from("query\tgreedy\toptimum\tratio\toptimal_ranking\n");
    let mut min_ratio = f64::INFINITY;
    for (c, (gu, bu, r)) in cases.iter().zip(&rows) {
        let ratio = if *bu > 0.0 { gu / bu } else { 1.0 };
        min_ratio = min_ratio.min(ratio);
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{r}\n",
            c.query_id(),
            fmt_num(*gu),
            fmt_num(*bu),
            fmt_num(ratio)
        ));
    }
    out.push_str(&format!("min_ratio\t{}\n", fmt_num(min_ratio)));
    emit(&a.output.out, &out, stdout)
}

fn dispatch(cmd: &Command, stdout: &mut String) -> Result<()> {
    match cmd {
        Command::Rank(a) => cmd_rank(a, stdout),
        Command::Evaluate(a) => cmd_evaluate(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::Crosstab(a) => cmd_crosstab(a, stdout),
        Command::Compare(a) => cmd_compare(a, stdout),
        Command::SweepWidth(a) => cmd_sweep(a, stdout),
        Command::Train(a) => cmd_train(a, stdout),
        Command::Predict(a) => cmd_predict(a, stdout),
        Command::Gen(a) => cmd_gen(a, stdout),
        Command::Oracle(a) => cmd_oracle(a, stdout),
    }
}

/// Runs the command line `args` (including the program name) and returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };
    let mut buffer = String::new();
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command, &mut buffer)),
            Err(e) => Err(Error::InvalidParameter(format!("thread pool: {e}"))),
        },
        None => dispatch(&cli.command, &mut buffer),
    };
    match result.and_then(|()| {
        stdout.write_all(buffer.as_bytes())?;
        stdout.flush()?;
        Ok(())
    }) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "dynrank: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_path() -> String {
        concat!(env!("CARGO_MANIFEST_DIR"), "/data/toy.corpus").to_string()
    }

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("dynrank").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(1.75), "1.75");
        assert_eq!(fmt_num(2.0), "2");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
    }

    #[test]
    fn rank_toy_sat1() {
        let toy = toy_path();
        let (code, out, _) = call(&[
            "rank", "--corpus", &toy, "--g", "sat1", "--L", "3", "--W", "2",
        ]);
        assert_eq!(code, 0);
        assert_eq!(out, "toy\td7:d1,d2 d3:d4,d5 d6:d8,d9\n");
    }

    #[test]
    fn evaluate_toy_theta() {
        let dir = tempfile::tempdir().unwrap();
        let r = dir.path().join("theta.txt");
        std::fs::write(&r, "toy\td7:d8,d9 d1:d2,d3 d4:d5,d6\n").unwrap();
        let toy = toy_path();
        let rs = r.to_str().unwrap();
        let (code, out, _) = call(&[
            "evaluate",
            "--corpus",
            &toy,
            "--rankings",
            rs,
            "--k",
            "3",
            "--g",
            "prec",
        ]);
        assert_eq!(code, 0);
        assert_eq!(
            out,
            "query\tPREC@3\tPREC_utility\ntoy\t1.75\t2.5\nmean\t1.75\t2.5\n"
        );
        let (_, out, _) = call(&["simulate", "--corpus", &toy, "--rankings", rs]);
        assert!(out.contains("toy\tt3\td7 d8 d9 d1 d4\n"));
    }

    #[test]
    fn usage_and_runtime_errors() {
        assert_eq!(call(&["rank"]).0, 1);
        assert_eq!(call(&["frobnicate"]).0, 1);
        assert_eq!(call(&["--help"]).0, 0);
        let toy = toy_path();
        let (code, _, err) = call(&["rank", "--corpus", &toy, "--g", "cubic"]);
        assert_eq!(code, 2);
        assert!(err.contains("cubic"));
        assert_eq!(call(&["rank", "--corpus", "/nonexistent/x.corpus"]).0, 2);
    }

    #[test]
    fn failed_command_leaves_no_output_file() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.txt");
        let toy = toy_path();
        let o = out.to_str().unwrap();
        let (code, _, _) = call(&["rank", "--corpus", &toy, "--L", "0", "--out", o]);
        assert_eq!(code, 2);
        assert!(!out.exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn gen_then_train_and_predict() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("s.corpus");
        let model = dir.path().join("m.model");
        let (c, m) = (corpus.to_str().unwrap(), model.to_str().unwrap());
        let gen = [
            "gen",
            "--n-queries",
            "4",
            "--n-intents",
            "2",
            "--n-docs",
            "8",
            "--seed",
            "3",
            "--out",
            c,
        ];
        assert_eq!(call(&gen).0, 0);
        let (code, out, err) = call(&[
            "train", "--corpus", c, "--C", "0.01", "--g", "sqrt", "--L", "3", "--model", m,
        ]);
        assert_eq!(code, 0, "{err}");
        assert!(out.contains("terminated\t"));
        assert!(model.exists());
        let (code, out, _) = call(&["predict", "--corpus", c, "--model", m, "--L", "3"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 4);
    }

    #[test]
    fn oracle_and_tables() {
        let toy = toy_path();
        let (code, out, _) = call(&[
            "oracle", "--corpus", &toy, "--g", "sat2", "--L", "2", "--W", "1",
        ]);
        assert_eq!(code, 0);
        assert!(out.starts_with("query\tgreedy\toptimum"));
        let (code, out, _) = call(&["crosstab", "--corpus", &toy, "--L", "3"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 5);
        let (code, out, _) = call(&["sweep-width", "--corpus", &toy, "--L", "3", "--k", "3"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 6);
        let (code, out, _) = call(&["compare", "--corpus", &toy, "--L", "3", "--k", "3", "--csv"]);
        assert_eq!(code, 0);
        assert!(out.contains("Stat-Div,"));
    }
}
