//! The `bytevct` command line. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code:
//!
//! * `0` success
//! * `1` a verification suite failed, or the computation itself failed
//!   (dead tree, replay miss)
//! * `2` usage error or a file that could not be loaded
//!
//! With `--format json` every result is one JSON object per line; each
//! carries a `"kind"` field naming its shape (see the README).

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::lm::{LanguageModel, ReplayLM, TabularLM, UniformLM};
use crate::sampler::{ByteSampler, Composite, Level, SamplerConfig};
use crate::tokenizer::{load_tokenizer_file, Tokenizer};
use crate::verify::{run_suite, Fault, Suite, VerifyConfig};
use crate::vct::Vct;
use crate::{escape_bytes, unescape_bytes, Error, TokenId};

/// Directory searched for tokenizer files when `--tokenizer` is a bare name
/// or absent (then `tokenizer.json` inside it is used).
pub const TOKENIZER_DIR_ENV: &str = "BYTEVCT_TOKENIZER_DIR";

#[derive(Parser, Debug)]
#[command(name = "bytevct", version, about = "Exact byte-level conditioning of BPE language models")]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    /// Newline-delimited JSON records.
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Encode text and print token ids.
    Tokenize(TokenizeArgs),
    /// Show the covering tree of a prompt.
    Vct(VctArgs),
    /// Probability that generated text starts with the prompt.
    PrefixProb(ProbArgs),
    /// Sample a continuation of the prompt.
    Sample(SampleArgs),
    /// Run the randomized differential suites.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
pub struct TokenizerArg {
    /// tokenizer.json (optionally gzipped) or an overlay file.
    #[arg(long, short = 't')]
    pub tokenizer: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct PromptArgs {
    /// Prompt bytes; `\xNN`, `\n`, `\t`, `\r` and `\\` are escapes.
    /// Without a prompt, a prompt file or `--stdin`, stdin is read.
    pub prompt: Option<String>,
    /// Read the prompt verbatim from a file.
    #[arg(long, conflicts_with = "prompt")]
    pub prompt_file: Option<PathBuf>,
    /// Read the prompt verbatim from stdin.
    #[arg(long, conflicts_with_all = ["prompt", "prompt_file"])]
    pub stdin: bool,
}

#[derive(Args, Debug)]
pub struct TokenizeArgs {
    #[command(flatten)]
    pub tk: TokenizerArg,
    #[command(flatten)]
    pub prompt: PromptArgs,
    /// Feed the text incrementally and print tokens as they become certain.
    #[arg(long)]
    pub stream: bool,
    /// Bytes per feed in stream mode.
    #[arg(long, default_value_t = 1, requires = "stream")]
    pub chunk: usize,
    /// Also print each token's bytes.
    #[arg(long)]
    pub pieces: bool,
}

#[derive(Args, Debug)]
pub struct VctArgs {
    #[command(flatten)]
    pub tk: TokenizerArg,
    #[command(flatten)]
    pub prompt: PromptArgs,
}

/// `uniform`, `tabular:PATH` or `replay:PATH`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LmSpec {
    Uniform,
    Tabular(PathBuf),
    Replay(PathBuf),
}

impl FromStr for LmSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "uniform" => Ok(LmSpec::Uniform),
            Some(("tabular", p)) => Ok(LmSpec::Tabular(p.into())),
            Some(("replay", p)) => Ok(LmSpec::Replay(p.into())),
            _ => Err(format!("expected uniform, tabular:PATH or replay:PATH, got `{s}`")),
        }
    }
}

#[derive(Args, Debug)]
pub struct ProbArgs {
    #[command(flatten)]
    pub tk: TokenizerArg,
    #[command(flatten)]
    pub prompt: PromptArgs,
    /// Model: uniform, tabular:PATH or replay:PATH.
    #[arg(long, default_value = "uniform")]
    pub lm: LmSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Resolve the prompt boundary once, then sample tokens.
    Pbp,
    /// Sample byte by byte.
    Bytes,
}

/// `TOKENIZER::LM`, one member of a composite.
#[derive(Clone, Debug)]
pub struct Member {
    pub tokenizer: PathBuf,
    pub lm: LmSpec,
}

impl FromStr for Member {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (t, l) = s.split_once("::").ok_or_else(|| format!("expected TOKENIZER::LM, got `{s}`"))?;
        Ok(Member { tokenizer: t.into(), lm: l.parse()? })
    }
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub tk: TokenizerArg,
    #[command(flatten)]
    pub prompt: PromptArgs,
    #[arg(long, default_value = "uniform")]
    pub lm: LmSpec,
    #[arg(long, value_enum, default_value_t = Mode::Bytes)]
    pub mode: Mode,
    /// Bytes to generate in bytes mode.
    #[arg(short = 'n', long, default_value_t = 32)]
    pub bytes: usize,
    /// Token budget after the prompt in pbp mode.
    #[arg(long, default_value_t = 64)]
    pub max_tokens: usize,
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub top_p: Option<f64>,
    /// Where the transform applies.
    #[arg(long, value_enum, default_value_t = Level::Byte)]
    pub level: Level,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Offer special tokens as events at token boundaries.
    #[arg(long)]
    pub specials: bool,
    /// Ensemble member `TOKENIZER::LM`; repeat for each model.
    #[arg(long, conflicts_with = "proxy")]
    pub ensemble: Vec<Member>,
    /// Ensemble weights, comma separated; uniform when absent.
    #[arg(long, value_delimiter = ',', requires = "ensemble")]
    pub weights: Vec<f64>,
    /// Proxy member `TOKENIZER::LM`, given three times: base, expert, anti-expert.
    #[arg(long)]
    pub proxy: Vec<Member>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Multiplier on each suite's case count; 0 runs nothing.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Suites to run; all when absent.
    #[arg(long, value_enum)]
    pub suite: Vec<Suite>,
    /// Break the pair check on purpose to see the suites fail.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

enum Fail {
    Usage(String),
    Run(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Run(e.to_string())
    }
}

impl From<std::io::Error> for Fail {
    fn from(e: std::io::Error) -> Self {
        Fail::Run(e.to_string())
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(&cli, &mut out) {
        Ok(code) => code,
        Err(Fail::Usage(m)) => {
            eprintln!("error: {m}");
            2
        }
        Err(Fail::Run(m)) => {
            eprintln!("error: {m}");
            1
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, Fail> {
    let f = cli.format;
    match &cli.command {
        Command::Tokenize(a) => tokenize(a, f, out),
        Command::Vct(a) => vct(a, f, out),
        Command::PrefixProb(a) => prefix_prob(a, f, out),
        Command::Sample(a) => sample(a, f, out),
        Command::Verify(a) => verify(a, f, out),
    }
}

/// Resolves a tokenizer argument against [`TOKENIZER_DIR_ENV`].
pub fn resolve_tokenizer(arg: Option<&Path>) -> Result<PathBuf, String> {
    let dir = std::env::var_os(TOKENIZER_DIR_ENV).map(PathBuf::from);
    match (arg, dir) {
        (Some(p), _) if p.exists() => Ok(p.to_path_buf()),
        (Some(p), Some(d)) if p.is_relative() && d.join(p).exists() => Ok(d.join(p)),
        (Some(p), _) => Err(format!("tokenizer file {} not found", p.display())),
        (None, Some(d)) => Ok(d.join("tokenizer.json")),
        (None, None) => Err(format!("no --tokenizer given and {TOKENIZER_DIR_ENV} is not set")),
    }
}

fn load_tk(arg: &TokenizerArg) -> Result<Tokenizer, Fail> {
    load_tk_path(arg.tokenizer.as_deref())
}

fn load_tk_path(p: Option<&Path>) -> Result<Tokenizer, Fail> {
    let path = resolve_tokenizer(p).map_err(Fail::Usage)?;
    load_tokenizer_file(&path).map_err(|e| Fail::Usage(format!("{}: {e}", path.display())))
}

fn load_lm(spec: &LmSpec, tk: &Tokenizer) -> Result<Box<dyn LanguageModel>, Fail> {
    let lm: Box<dyn LanguageModel> = match spec {
        LmSpec::Uniform => Box::new(UniformLM::new(tk.vocab_size())),
        LmSpec::Tabular(p) => Box::new(TabularLM::load(p).map_err(|e| Fail::Usage(format!("{}: {e}", p.display())))?),
        LmSpec::Replay(p) => Box::new(ReplayLM::load(p).map_err(|e| Fail::Usage(format!("{}: {e}", p.display())))?),
    };
    if lm.vocab_size() != tk.vocab_size() {
        return Err(Fail::Usage(format!("model has {} tokens but the tokenizer has {}", lm.vocab_size(), tk.vocab_size())));
    }
    Ok(lm)
}

fn read_prompt(p: &PromptArgs) -> Result<Vec<u8>, Fail> {
    if let Some(s) = &p.prompt {
        return unescape_bytes(s).map_err(Fail::Usage);
    }
    if let Some(f) = &p.prompt_file {
        return std::fs::read(f).map_err(|e| Fail::Usage(format!("{}: {e}", f.display())));
    }
    let mut buf = Vec::new();
    std::io::stdin().read_to_end(&mut buf).map_err(|e| Fail::Usage(format!("stdin: {e}")))?;
    Ok(buf)
}

fn record(out: &mut dyn Write, v: serde_json::Value) -> Result<(), Fail> {
    writeln!(out, "{v}")?;
    Ok(())
}

fn ids_line(ids: &[TokenId]) -> String {
    ids.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")
}

fn pieces(tk: &Tokenizer, ids: &[TokenId]) -> Vec<String> {
    ids.iter().map(|&t| escape_bytes(tk.token_bytes(t))).collect()
}

fn tokenize(a: &TokenizeArgs, f: Format, out: &mut dyn Write) -> Result<i32, Fail> {
    let tk = load_tk(&a.tk)?;
    let text = read_prompt(&a.prompt)?;
    let ids = if a.stream {
        if a.chunk == 0 {
            return Err(Fail::Usage("--chunk must be positive".into()));
        }
        let mut v = Vct::new(&tk);
        let mut all = Vec::new();
        for c in text.chunks(a.chunk) {
            let e = v.feed(c)?;
            emit(out, f, &tk, &e, v.consumed(), all.is_empty())?;
            all.extend(e);
        }
        let e = v.finish()?;
        emit(out, f, &tk, &e, v.consumed(), all.is_empty())?;
        all.extend(e);
        if f == Format::Text && !all.is_empty() {
            writeln!(out)?;
        }
        all
    } else {
        let ids = tk.try_encode(&text)?;
        if f == Format::Text && !ids.is_empty() {
            writeln!(out, "{}", ids_line(&ids))?;
        }
        ids
    };
    match f {
        Format::Json => record(out, json!({"kind": "tokens", "ids": ids, "pieces": pieces(&tk, &ids), "bytes": text.len()}))?,
        Format::Text if a.pieces => {
            for (t, p) in ids.iter().zip(pieces(&tk, &ids)) {
                writeln!(out, "{t}\t{p}")?;
            }
        }
        Format::Text => {}
    }
    Ok(0)
}

/// One stream emission: ids appended to the running line in text mode, a
/// record per non-empty emission in JSON mode.
fn emit(out: &mut dyn Write, f: Format, tk: &Tokenizer, ids: &[TokenId], offset: usize, first: bool) -> Result<(), Fail> {
    if ids.is_empty() {
        return Ok(());
    }
    match f {
        Format::Text => {
            write!(out, "{}{}", if first { "" } else { " " }, ids_line(ids))?;
            out.flush()?;
        }
        Format::Json => record(out, json!({"kind": "emit", "offset": offset, "ids": ids, "pieces": pieces(tk, ids)}))?,
    }
    Ok(())
}

fn vct(a: &VctArgs, f: Format, out: &mut dyn Write) -> Result<i32, Fail> {
    let tk = load_tk(&a.tk)?;
    let prompt = read_prompt(&a.prompt)?;
    let mut v = Vct::new(&tk);
    v.feed(&prompt)?;
    match f {
        Format::Text => write!(out, "{}", v.dump())?,
        Format::Json => {
            let st = v.branch_stats();
            let leaves: Vec<_> = v.leaves().iter().map(|l| json!({"path": l.path, "overhang": escape_bytes(&l.overhang)})).collect();
            record(
                out,
                json!({
                    "kind": "vct",
                    "consumed": v.consumed(),
                    "trunk": v.trunk(),
                    "leaves": leaves,
                    "non_trunk_edges": st.non_trunk_edges,
                    "live_hypotheses": st.live_hypotheses,
                    "deepest_branch": st.deepest_branch,
                }),
            )?
        }
    }
    Ok(0)
}

fn prefix_prob(a: &ProbArgs, f: Format, out: &mut dyn Write) -> Result<i32, Fail> {
    let tk = load_tk(&a.tk)?;
    let lm = load_lm(&a.lm, &tk)?;
    let prompt = read_prompt(&a.prompt)?;
    let mut s = ByteSampler::new(&tk, lm);
    s.feed(&prompt)?;
    let lp = s.prefix_logprob()?;
    let leaves = s.vct().leaves().len();
    let st = s.vct().branch_stats();
    let (trunk, calls) = (s.vct().trunk().len(), s.lm_calls());
    match f {
        Format::Text => {
            writeln!(out, "logprob\t{lp}")?;
            writeln!(out, "prob\t{:.6e}", lp.exp())?;
            writeln!(out, "leaves\t{leaves}")?;
            writeln!(out, "trunk_tokens\t{trunk}")?;
            writeln!(out, "branch_nodes\t{}", st.non_trunk_edges)?;
            writeln!(out, "lm_calls\t{calls}")?;
        }
        Format::Json => record(
            out,
            json!({
                "kind": "prefix_prob",
                "prompt": escape_bytes(&prompt),
                "logprob": finite_or_null(lp),
                "prob": lp.exp(),
                "leaves": leaves,
                "trunk_tokens": trunk,
                "branch_nodes": st.non_trunk_edges,
                "lm_calls": calls,
            }),
        )?,
    }
    Ok(0)
}

/// JSON has no infinities; a zero probability reports a null logprob.
fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

fn sample(a: &SampleArgs, f: Format, out: &mut dyn Write) -> Result<i32, Fail> {
    let cfg = SamplerConfig { temperature: a.temperature, top_k: a.top_k, top_p: a.top_p, level: a.level, seed: a.seed };
    cfg.validate().map_err(|e| Fail::Usage(e.to_string()))?;
    let prompt = read_prompt(&a.prompt)?;
    let mut rng = cfg.rng();
    let members = if !a.ensemble.is_empty() { &a.ensemble } else { &a.proxy };
    if !members.is_empty() {
        if a.mode != Mode::Bytes {
            return Err(Fail::Usage("composites sample in bytes mode only".into()));
        }
        if !a.proxy.is_empty() && a.proxy.len() != 3 {
            return Err(Fail::Usage("--proxy needs exactly three members: base, expert, anti-expert".into()));
        }
        let tks: Vec<Tokenizer> = members.iter().map(|m| load_tk_path(Some(&m.tokenizer))).collect::<Result<_, _>>()?;
        let mut samplers = Vec::new();
        for (m, tk) in members.iter().zip(&tks) {
            let lm = load_lm(&m.lm, tk)?;
            samplers.push(ByteSampler::new(tk, lm).configured(&cfg)?);
        }
        let mut comp = if a.proxy.is_empty() {
            let w = if a.weights.is_empty() { vec![1.0 / samplers.len() as f64; samplers.len()] } else { a.weights.clone() };
            Composite::ensemble(samplers, w).map_err(|e| Fail::Usage(e.to_string()))?
        } else {
            let mut it = samplers.into_iter();
            Composite::proxy(it.next().unwrap(), it.next().unwrap(), it.next().unwrap())
        };
        comp.feed(&prompt)?;
        let bytes = comp.sample_bytes(a.bytes, &cfg, &mut rng)?;
        let mode = if a.proxy.is_empty() { "ensemble" } else { "proxy" };
        return bytes_result(out, f, mode, &prompt, &bytes, a.bytes, comp.lm_calls());
    }
    let tk = load_tk(&a.tk)?;
    let lm = load_lm(&a.lm, &tk)?;
    let mut s = ByteSampler::new(&tk, lm).configured(&cfg)?.with_specials(a.specials);
    s.feed(&prompt)?;
    match a.mode {
        Mode::Bytes => {
            let bytes = s.sample_bytes(a.bytes, &cfg, &mut rng)?;
            bytes_result(out, f, "bytes", &prompt, &bytes, a.bytes, s.lm_calls())
        }
        Mode::Pbp => {
            let ids = s.sample_completion(&cfg, &mut rng, a.max_tokens)?;
            let text = tk.decode(&ids)?;
            let cont = text.get(prompt.len()..).unwrap_or_default();
            match f {
                Format::Text => writeln!(out, "{}", escape_bytes(cont))?,
                Format::Json => record(
                    out,
                    json!({
                        "kind": "sample",
                        "mode": "pbp",
                        "prompt": escape_bytes(&prompt),
                        "ids": ids,
                        "output": escape_bytes(cont),
                        "lm_calls": s.lm_calls(),
                    }),
                )?,
            }
            Ok(0)
        }
    }
}

fn bytes_result(out: &mut dyn Write, f: Format, mode: &str, prompt: &[u8], bytes: &[u8], asked: usize, calls: usize) -> Result<i32, Fail> {
    match f {
        Format::Text => writeln!(out, "{}", escape_bytes(bytes))?,
        Format::Json => record(
            out,
            json!({
                "kind": "sample",
                "mode": mode,
                "prompt": escape_bytes(prompt),
                "output": escape_bytes(bytes),
                "ended": bytes.len() < asked,
                "lm_calls": calls,
            }),
        )?,
    }
    Ok(0)
}

fn verify(a: &VerifyArgs, f: Format, out: &mut dyn Write) -> Result<i32, Fail> {
    if !(a.scale >= 0.0) {
        return Err(Fail::Usage("--scale must be non-negative".into()));
    }
    let cfg = VerifyConfig { scale: a.scale, seed: a.seed, jobs: a.jobs, fault: if a.inject_fault { Fault::PairsAlwaysValid } else { Fault::None } };
    let suites = if a.suite.is_empty() { Suite::ALL.to_vec() } else { a.suite.clone() };
    let mut failed = 0;
    for s in suites {
        let r = run_suite(s, &cfg);
        failed += (!r.passed()) as usize;
        match f {
            Format::Text => {
                let verdict = if r.passed() { "pass" } else { "FAIL" };
                writeln!(out, "{verdict}\t{}\tcases={}\tfailures={}\t{:.2}s", r.suite, r.cases, r.failures, r.seconds)?;
                if let Some(m) = &r.first_failure {
                    writeln!(out, "\t{m}")?;
                }
            }
            Format::Json => {
                let mut v = serde_json::to_value(&r).expect("report serializes");
                v["kind"] = json!("suite");
                v["passed"] = json!(r.passed());
                record(out, v)?;
            }
        }
    }
    if f == Format::Json {
        record(out, json!({"kind": "summary", "failed_suites": failed, "seed": a.seed, "scale": a.scale}))?;
    }
    Ok(if failed > 0 { 1 } else { 0 })
}
