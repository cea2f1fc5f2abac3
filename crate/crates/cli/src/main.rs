use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use gomcts::bench::{run_tournament, TournamentResult};
use gomcts::game::{GameConfig, GameState};
use gomcts::model::{GenerativeModel, OutcomeSpace, OutcomeValueFn};
use gomcts::policy::{build_agent, Agent, PolicyConfig, PolicyKind, ScriptedAgent};
use gomcts::search::{go_mcts, HeartsAdapter, SearchParams};
use gomcts::selfplay::{
    generate_bootstrap, run_selfplay, Bootstrap, Dataset, IterationConfig, Learner, TrainedModel,
};
use gomcts::tokenizer::{
    verify_history, HistoryRecorder, ObservationHistory, Token, TokenKind, Verdict, Vocabulary,
};

#[derive(Parser)]
#[command(
    name = "gomcts",
    version,
    about = "Observation-sequence search for Hearts-family card games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
struct Common {
    /// Base seed; takes precedence over the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Play bootstrap games and write their histories as a dataset.
    GenData {
        #[command(flatten)]
        common: Common,
    },
    /// Fit a model to one or more datasets.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset files.
        #[arg(required = true)]
        data: Vec<PathBuf>,
        /// Model to continue from.
        #[arg(long)]
        warm: Option<PathBuf>,
    },
    /// Run the bootstrap and the self-play iterations.
    Selfplay {
        #[command(flatten)]
        common: Common,
    },
    /// Search one decision and write the run trace.
    Search {
        #[command(flatten)]
        common: Common,
        /// Model file; overrides `search.model`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Observation history as space-separated token ids. Without it the
        /// deal drawn from the seed is played by the scripted policy up to
        /// the first real choice.
        #[arg(long)]
        history: Option<String>,
    },
    /// Play a seating-permutation tournament between two policies.
    Tournament {
        #[command(flatten)]
        common: Common,
    },
    /// Check every record of a dataset against the rules.
    Verify {
        #[command(flatten)]
        common: Common,
        dataset: PathBuf,
    },
    /// Render a tournament result file as a table.
    Report {
        #[command(flatten)]
        common: Common,
        result: PathBuf,
        #[arg(long, default_value = "A")]
        name_a: String,
        #[arg(long, default_value = "B")]
        name_b: String,
    },
}

/// Whole-run configuration file. Every section is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    game: Option<String>,
    seed: Option<u64>,
    gen_data: GenDataSection,
    train: Learner,
    selfplay: IterationConfig,
    search: SearchSection,
    tournament: TournamentSection,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GenDataSection {
    games: usize,
    bootstrap: Bootstrap,
}

impl Default for GenDataSection {
    fn default() -> GenDataSection {
        GenDataSection {
            games: 1000,
            bootstrap: Bootstrap::UniformRandom,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct SearchSection {
    model: Option<PathBuf>,
    value_fn: Option<OutcomeValueFn>,
    #[serde(flatten)]
    params: SearchParams,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TournamentSection {
    num_matches: usize,
    measure_time: bool,
    player_a: PlayerSpec,
    player_b: PlayerSpec,
}

impl Default for TournamentSection {
    fn default() -> TournamentSection {
        TournamentSection {
            num_matches: 100,
            measure_time: false,
            player_a: PlayerSpec::default(),
            player_b: PlayerSpec::default(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct PlayerSpec {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    model: Option<PathBuf>,
    #[serde(flatten)]
    policy: PolicyConfig,
}

impl Default for PlayerSpec {
    fn default() -> PlayerSpec {
        PlayerSpec {
            name: None,
            model: None,
            policy: PolicyConfig::new(PolicyKind::UniformRandom),
        }
    }
}

/// Exit status 1 for problems with the invocation or its inputs, 2 for
/// failures inside a pipeline.
enum Failure {
    User(anyhow::Error),
    Internal(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Failure {
        Failure::Internal(e.into())
    }
}

trait UserError<T> {
    fn user(self, what: impl FnOnce() -> String) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> UserError<T> for Result<T, E> {
    fn user(self, what: impl FnOnce() -> String) -> Result<T, Failure> {
        self.map_err(|e| Failure::User(e.into().context(what())))
    }
}

fn user_err(msg: String) -> Failure {
    Failure::User(anyhow!(msg))
}

/// The parsed config plus the directory its relative paths start from.
struct Run {
    file: FileConfig,
    base: PathBuf,
    seed: u64,
    out: PathBuf,
}

impl Run {
    fn load(common: &Common) -> Result<Run, Failure> {
        let (file, base) = match &common.config {
            Some(path) => {
                let text =
                    fs::read_to_string(path).user(|| format!("reading {}", path.display()))?;
                let file: FileConfig =
                    toml::from_str(&text).user(|| format!("parsing {}", path.display()))?;
                let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
                (file, base)
            }
            None => (FileConfig::default(), PathBuf::new()),
        };
        let seed = common.seed.or(file.seed).unwrap_or(0);
        Ok(Run {
            file,
            base,
            seed,
            out: common.out.clone(),
        })
    }

    fn game(&self) -> Result<GameConfig, Failure> {
        let id = self.file.game.as_deref().unwrap_or("mini3");
        id.parse().user(|| format!("game {id:?}"))
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base.join(path)
        }
    }

    fn out_dir(&self) -> Result<&Path, Failure> {
        fs::create_dir_all(&self.out).user(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }

    fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf, Failure> {
        let path = self.out_dir()?.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn load_model(path: &Path, game: &GameConfig) -> Result<Arc<TrainedModel>, Failure> {
    let model =
        TrainedModel::load_file(path).user(|| format!("loading model {}", path.display()))?;
    if model.game() != game {
        return Err(user_err(format!(
            "{} was trained for {}, not {}",
            path.display(),
            model.game().id(),
            game.id()
        )));
    }
    Ok(Arc::new(model))
}

fn gen_data(common: &Common) -> Result<(), Failure> {
    let run = Run::load(common)?;
    let game = run.game()?;
    let section = &run.file.gen_data;
    if section.games == 0 {
        return Err(user_err("gen_data.games must be at least 1".into()));
    }
    let data = generate_bootstrap(&game, section.bootstrap, section.games, run.seed)?;
    let mut text = Vec::new();
    data.write(&mut text)?;
    let path = run.write("dataset.txt", text)?;
    run.write("tokens.tsv", Vocabulary::new(&game).manifest())?;
    run.write("outcomes.tsv", OutcomeSpace::new(&game).manifest())?;
    println!(
        "{} records from {} games -> {}",
        data.len(),
        section.games,
        path.display()
    );
    Ok(())
}

fn train(common: &Common, data: &[PathBuf], warm: Option<&Path>) -> Result<(), Failure> {
    let run = Run::load(common)?;
    let mut records = Vec::new();
    let mut game = None;
    for path in data {
        let d = Dataset::load_file(path).user(|| format!("loading dataset {}", path.display()))?;
        match &game {
            None => game = Some(d.game.clone()),
            Some(g) if *g != d.game => {
                return Err(user_err(format!(
                    "{} holds games of a different config",
                    path.display()
                )))
            }
            Some(_) => {}
        }
        records.extend(d.labeled());
    }
    let game = game.expect("at least one dataset");
    if records.is_empty() {
        return Err(user_err("the datasets hold no records".into()));
    }
    let warm = warm.map(|p| load_model(p, &game)).transpose()?;
    let (model, log) = run
        .file
        .train
        .fit(&game, &records, warm.as_deref(), run.seed)
        .map_err(|e| Failure::Internal(anyhow!(e).context("training")))?;
    let path = run.out_dir()?.join("model.bin");
    model.save_file(&path)?;
    let mut summary = format!("records\t{}\n", records.len());
    if let Some(log) = log {
        summary.push_str("epoch\tloss\tnext_token_ce\toutcome_ce\n");
        for e in &log.epochs {
            let _ = writeln!(
                summary,
                "{}\t{:.6}\t{:.6}\t{:.6}",
                e.epoch, e.loss, e.next_token_ce, e.outcome_ce
            );
        }
    }
    run.write("train_log.txt", &summary)?;
    print!("{summary}");
    println!("model -> {}", path.display());
    Ok(())
}

fn selfplay(common: &Common) -> Result<(), Failure> {
    let run = Run::load(common)?;
    let game = run.game()?;
    let config = IterationConfig {
        seed: run.seed,
        ..run.file.selfplay.clone()
    };
    config.validate().user(|| "selfplay section".into())?;
    let out = run.out_dir()?.to_path_buf();
    let mut log = String::new();
    run_selfplay(&game, &config, Some(&out), &mut |r| {
        let line = match &r.train_log {
            Some(t) => {
                let last = t.epochs.last();
                format!(
                    "iteration {}\trecords {}\tloss {:.6}",
                    r.iteration,
                    r.records,
                    last.map_or(f64::NAN, |e| e.loss)
                )
            }
            None if r.resumed => format!("iteration {}\tresumed", r.iteration),
            None => format!("iteration {}\trecords {}", r.iteration, r.records),
        };
        eprintln!("{line}");
        log.push_str(&line);
        log.push('\n');
    })?;
    run.write("selfplay_log.txt", &log)?;
    println!("{} iterations -> {}", config.num_iterations, out.display());
    Ok(())
}

/// Plays the seeded deal with the scripted policy until some seat has more
/// than one legal action, and returns that seat's history.
fn first_choice(game: &GameConfig, seed: u64) -> Result<ObservationHistory, Failure> {
    let mut state = GameState::new_deal(game.clone(), seed)?;
    let mut recorder = HistoryRecorder::new(&state);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if state.is_terminal() {
            return Err(Failure::Internal(anyhow!(
                "the deal ended without a real choice"
            )));
        }
        let seat = state.to_move();
        if state.legal_actions()?.len() > 1 {
            return Ok(recorder.history(seat).clone());
        }
        let action = ScriptedAgent.act(&state, recorder.history(seat), &mut rng)?;
        let next = state.apply_action(action)?;
        recorder.record(&state, action, &next);
        state = next;
    }
}

fn parse_history(text: &str, game: &GameConfig) -> Result<ObservationHistory, Failure> {
    let vocab = Vocabulary::new(game);
    let tokens = text
        .split_whitespace()
        .map(|t| t.parse::<Token>().user(|| format!("token {t:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    let viewer = match tokens.first().map(|&t| vocab.kind(t)) {
        Some(TokenKind::Position(p)) => p as usize,
        _ => {
            return Err(user_err(
                "a history starts with the viewer's seat token".into(),
            ))
        }
    };
    Ok(ObservationHistory::new(viewer, tokens))
}

fn search(common: &Common, model: Option<&Path>, history: Option<&str>) -> Result<(), Failure> {
    let run = Run::load(common)?;
    let game = run.game()?;
    let section = &run.file.search;
    let model_path = match (model, &section.model) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => run.resolve(p),
        (None, None) => return Err(user_err("no model given (--model or search.model)".into())),
    };
    let model = load_model(&model_path, &game)?;
    let root = match history {
        Some(text) => parse_history(text, &game)?,
        None => first_choice(&game, run.seed)?,
    };
    let params = SearchParams {
        seed: run.seed,
        ..section.params.clone()
    };
    params.validate().user(|| "search section".into())?;
    let v = section
        .value_fn
        .clone()
        .unwrap_or_else(|| OutcomeValueFn::for_config(&game));
    let adapter = HeartsAdapter::new(&game);
    let result = go_mcts(&root, model.as_ref(), &adapter, &params, &v)
        .user(|| "searching the history".into())?;
    let vocab = Vocabulary::new(&game);
    let mut summary = String::new();
    let names: Vec<String> = root.tokens().iter().map(|&t| vocab.name(t)).collect();
    let _ = writeln!(summary, "history\t{}", names.join(" "));
    let _ = writeln!(summary, "action\t{}", vocab.name(result.action));
    if let Some(node) = result.root_node() {
        let _ = writeln!(summary, "card\tvisits\tmean");
        for &(a, stats) in &node.children {
            let _ = writeln!(
                summary,
                "{}\t{}\t{:.6}",
                vocab.name(a),
                stats.visits,
                stats.mean()
            );
        }
    }
    let trace: String = result.trace.iter().map(|r| format!("{r}\n")).collect();
    run.write("search.txt", &summary)?;
    run.write("trace.txt", trace)?;
    print!("{summary}");
    Ok(())
}

fn player(run: &Run, spec: &PlayerSpec, game: &GameConfig) -> Result<Box<dyn Agent>, Failure> {
    let model: Option<Arc<dyn GenerativeModel>> = match &spec.model {
        Some(p) => Some(load_model(&run.resolve(p), game)?),
        None => None,
    };
    build_agent(&spec.policy, game, model).user(|| "player config".into())
}

fn tournament(common: &Common) -> Result<(), Failure> {
    let run = Run::load(common)?;
    let game = run.game()?;
    let section = &run.file.tournament;
    if section.num_matches == 0 {
        return Err(user_err("tournament.num_matches must be at least 1".into()));
    }
    let a = player(&run, &section.player_a, &game)?;
    let b = player(&run, &section.player_b, &game)?;
    let result = run_tournament(
        &game,
        a.as_ref(),
        b.as_ref(),
        section.num_matches,
        run.seed,
        section.measure_time,
    );
    let mut bytes = Vec::new();
    result.write(&mut bytes)?;
    run.write("result.bin", bytes)?;
    let name_a = section.player_a.name.as_deref().unwrap_or("A");
    let name_b = section.player_b.name.as_deref().unwrap_or("B");
    let report = result.report(name_a, name_b);
    run.write("result.txt", &report)?;
    print!("{report}");
    for (m, e) in &result.failures {
        eprintln!("match {m} failed: {e}");
    }
    Ok(())
}

fn verify(common: &Common, path: &Path) -> Result<(), Failure> {
    let data = Dataset::load_file(path).user(|| format!("loading dataset {}", path.display()))?;
    let (mut legal, mut illegal) = (0usize, 0usize);
    for (i, record) in data.records.iter().enumerate() {
        match verify_history(&record.history(&data.game), &data.game)? {
            Verdict::Legal => legal += 1,
            Verdict::Illegal(reason) => {
                illegal += 1;
                eprintln!("record {i}: {reason:?}");
            }
        }
    }
    let summary = format!("legal\t{legal}\nillegal\t{illegal}\n");
    if common.config.is_some() || common.out != Path::new(".") {
        Run::load(common)?.write("verify.txt", &summary)?;
    }
    print!("{summary}");
    Ok(())
}

fn report(common: &Common, path: &Path, name_a: &str, name_b: &str) -> Result<(), Failure> {
    let result = TournamentResult::load_file(path)
        .map_err(|e| anyhow!(e))
        .user(|| format!("loading result {}", path.display()))?;
    let text = result.report(name_a, name_b);
    if common.out != Path::new(".") {
        Run::load(common)?.write("report.txt", &text)?;
    }
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match &cli.command {
        Command::GenData { common } => gen_data(common),
        Command::Train { common, data, warm } => train(common, data, warm.as_deref()),
        Command::Selfplay { common } => selfplay(common),
        Command::Search {
            common,
            model,
            history,
        } => search(common, model.as_deref(), history.as_deref()),
        Command::Tournament { common } => tournament(common),
        Command::Verify { common, dataset } => verify(common, dataset),
        Command::Report {
            common,
            result,
            name_a,
            name_b,
        } => report(common, result, name_a, name_b),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}
