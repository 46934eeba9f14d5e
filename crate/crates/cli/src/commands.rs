use std::collections::VecDeque;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use gamebot_core::boxes::{self, BoxParams, SweepRow};
use gamebot_core::exact::{build_dictionary, Solver};
use gamebot_core::training::{
    run_training, winning_start_cases, Heuristic, ReseededDataset, TrainingError, UpdateRule,
};
use gamebot_core::{Agent, AgentDescriptor, GameKind, GameSpec};
use gamebot_llm::LlmContext;
use gamebot_service::service::resolve_spec;
use gamebot_service::{Service, ServiceConfig};
use serde_json::{Map, Value};

use crate::cli::{
    CurriculumArgs, GameArgs, LoopArgs, PlayArgs, ServeArgs, SolveArgs, Tier, TrainArgs, UpdateKind,
};
use crate::play::{self, Log};
use crate::UsageError;

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// Parameters given on the command line, checked against the game they belong to.
fn params(args: &GameArgs, kind: GameKind) -> Result<Map<String, Value>> {
    let given: [(&str, Option<Value>, GameKind); 6] = [
        ("n", args.n.map(Value::from), GameKind::Nim),
        ("k", args.k.map(Value::from), GameKind::Nim),
        ("a", args.a.map(Value::from), GameKind::Euclid),
        ("b", args.b.map(Value::from), GameKind::Euclid),
        (
            "pits_per_side",
            args.pits.map(Value::from),
            GameKind::Mancala,
        ),
        (
            "seeds_per_pit",
            args.stones.map(Value::from),
            GameKind::Mancala,
        ),
    ];
    let mut out = Map::new();
    for (key, value, owner) in given {
        let Some(v) = value else { continue };
        if owner != kind {
            let flag = match key {
                "pits_per_side" => "pits",
                "seeds_per_pit" => "stones",
                k => k,
            };
            return Err(usage(format!("--{flag} does not apply to {kind}")));
        }
        out.insert(key.to_string(), v);
    }
    Ok(out)
}

fn kind_of(args: &GameArgs) -> Result<GameKind> {
    args.game
        .parse()
        .map_err(|e: gamebot_core::GameError| usage(e.to_string()))
}

pub fn spec_of(args: &GameArgs) -> Result<GameSpec> {
    let kind = kind_of(args)?;
    let p = params(args, kind)?;
    resolve_spec(kind.name(), Some(&Value::Object(p))).map_err(|e| usage(e.to_string()))
}

fn descriptor(s: &str) -> Result<AgentDescriptor> {
    s.parse()
        .map_err(|e: gamebot_core::agent::AgentError| usage(e.to_string()))
}

fn build(ctx: &LlmContext, desc: &str, spec: &GameSpec) -> Result<Box<dyn Agent>> {
    ctx.build_agent(&descriptor(desc)?, spec)
        .map_err(|e| match e {
            gamebot_core::agent::AgentError::UnknownAgent(_) => usage(e.to_string()),
            other => anyhow!(other),
        })
}

/// Writes `text` to `out`, or to stdout when no path is given.
fn emit(out: Option<&Path>, text: &str, append: bool) -> Result<()> {
    match out {
        Some(path) => {
            let mut f = OpenOptions::new()
                .create(true)
                .write(true)
                .append(append)
                .truncate(!append)
                .open(path)
                .with_context(|| format!("cannot open {}", path.display()))?;
            f.write_all(text.as_bytes())?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

pub fn play(args: PlayArgs) -> Result<()> {
    let spec = spec_of(&args.game)?;
    let ctx = LlmContext::from_backend_name(&args.llm);
    let opponent = build(&ctx, &args.agent, &spec)?;
    let log: Log = Arc::new(Mutex::new(Box::new(std::io::stderr())));
    let input = Box::new(std::io::BufReader::new(std::io::stdin()));
    let mut record = play::play(
        &spec,
        opponent,
        args.seat.into(),
        &args.name,
        args.seed.unwrap_or(0),
        input,
        log,
    )?;
    if args.seed.is_none() {
        record.created_at = chrono::Utc::now();
    }
    emit(
        args.out.as_deref(),
        &format!("{}\n", record.to_json_line()),
        true,
    )
}

pub fn solve(args: SolveArgs) -> Result<()> {
    let spec = spec_of(&args.game)?;
    let initial = spec.initial();
    let states = gamebot_core::exact::reachable_states(&spec, &initial, args.cap)?;
    let in_play = states.iter().filter(|s| !spec.is_terminal(s)).count();
    let mut solver = Solver::new(spec);
    let (value, depth) = solver.solve(&initial);
    let best = solver.optimal_actions(&initial);
    let best: Vec<String> = best.iter().map(|a| a.to_string()).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "game",
        "reachable_states",
        "in_play_states",
        "root_value",
        "plies_to_end",
        "optimal_moves",
    ])?;
    w.write_record([
        spec.id(),
        states.len().to_string(),
        in_play.to_string(),
        value.to_string(),
        depth.to_string(),
        best.join(" "),
    ])?;
    let text = String::from_utf8(w.into_inner()?)?;
    emit(args.out.as_deref(), &text, false)?;
    if let Some(path) = &args.export {
        let table = build_dictionary(&spec)?;
        std::fs::write(path, table.to_tsv())
            .with_context(|| format!("cannot write {}", path.display()))?;
        eprintln!(
            "wrote {} dictionary entries to {}",
            table.len(),
            path.display()
        );
    }
    Ok(())
}

/// `key=v1,v2,...` over one game parameter.
fn parse_sweep(text: &str) -> Result<(String, Vec<u64>)> {
    let (key, values) = text
        .split_once('=')
        .ok_or_else(|| usage(format!("--sweep expects key=v1,v2,..., got {text:?}")))?;
    let values = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<u64>()
                .map_err(|_| usage(format!("bad sweep value {v:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(usage("--sweep needs at least one value"));
    }
    Ok((key.trim().to_string(), values))
}

fn with_param(args: &GameArgs, key: &str, v: u64) -> Result<GameArgs> {
    let mut a = args.clone();
    let small = || u32::try_from(v).map_err(|_| usage(format!("{key}={v} is out of range")));
    match key {
        "n" => a.n = Some(small()?),
        "k" => a.k = Some(small()?),
        "a" => a.a = Some(v),
        "b" => a.b = Some(v),
        "pits" | "pits_per_side" => a.pits = Some(small()?),
        "stones" | "seeds_per_pit" => a.stones = Some(small()?),
        other => return Err(usage(format!("cannot sweep over {other:?}"))),
    }
    Ok(a)
}

pub fn train(args: TrainArgs) -> Result<()> {
    let seeds: Vec<u64> = match (args.seed, args.seeds) {
        (Some(s), _) => vec![s],
        (None, Some(n)) => (0..n).collect(),
        (None, None) => (0..100).collect(),
    };
    let configs = match &args.sweep {
        Some(s) => {
            let (key, values) = parse_sweep(s)?;
            values
                .into_iter()
                .map(|v| with_param(&args.game, &key, v))
                .collect::<Result<Vec<_>>>()?
        }
        None => vec![args.game.clone()],
    };
    let specs = configs.iter().map(spec_of).collect::<Result<Vec<_>>>()?;
    let opponent = descriptor(&args.opponent)?;
    let ctx = LlmContext::default();
    for spec in &specs {
        build(&ctx, &args.opponent, spec)?;
    }
    let params = BoxParams {
        initial_weight: args.initial_weight,
        win_delta: args.win_delta,
        loss_delta: args.loss_delta,
        floor: args.floor,
        mastery_window: args.window.max(1),
    };
    let nim = specs.iter().all(|s| s.kind() == GameKind::Nim);
    let mut generic = csv::Writer::from_writer(Vec::new());
    generic.write_record(["game", "seed", "L", "mastered"])?;
    let mut rows = Vec::new();
    let mut last_table = None;
    for spec in &specs {
        let mut ls = Vec::new();
        let mut mastered = 0;
        for &seed in &seeds {
            let agent = ctx.build_agent(&opponent, spec)?;
            let run = boxes::train(spec, agent, params, seed, args.max_rounds);
            ls.push(run.rounds_played);
            mastered += usize::from(run.mastered);
            match spec.config() {
                gamebot_core::GameConfig::Nim { n, k } => rows.push(SweepRow {
                    n,
                    k,
                    seed,
                    rounds: run.rounds_played,
                    mastered: run.mastered,
                }),
                _ => generic.write_record([
                    spec.id(),
                    seed.to_string(),
                    run.rounds_played.to_string(),
                    run.mastered.to_string(),
                ])?,
            }
            last_table = Some(run.table);
        }
        eprintln!(
            "{}: median L {} over {} seeds, {}/{} mastered within {} rounds",
            spec.id(),
            boxes::median(&mut ls),
            seeds.len(),
            mastered,
            seeds.len(),
            args.max_rounds
        );
    }
    let csv = if nim {
        boxes::sweep_csv(&rows)
    } else {
        String::from_utf8(generic.into_inner()?)?
    };
    emit(args.out.as_deref(), &csv, false)?;
    if let (Some(path), Some(table)) = (&args.table_out, last_table) {
        std::fs::write(path, table.to_tsv())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

pub fn refine(args: LoopArgs) -> Result<()> {
    let spec = spec_of(&args.game)?;
    let ctx = LlmContext::from_backend_name(&args.llm);
    let opponent = descriptor(&args.opponent)?;
    let cases = winning_start_cases(&spec, opponent.clone(), args.seed);
    if cases.is_empty() {
        bail!(
            "{} has no decided start positions to evaluate on",
            spec.id()
        );
    }
    let heuristic = |desc: &str| -> Result<Heuristic> {
        let agent = build(&ctx, desc, &spec)?;
        Ok(Heuristic::new(desc, format!("agent {desc}"), agent))
    };
    let (h0, mut update) = match args.update {
        UpdateKind::Boxes => {
            if args.h0.is_some() {
                return Err(usage(
                    "the boxes update starts from an empty table; drop --h0",
                ));
            }
            let trainer_opponent = build(&ctx, &args.opponent, &spec)?;
            let update = UpdateRule::boxes(spec, trainer_opponent, BoxParams::default(), args.seed);
            let UpdateRule::Boxes(trainer) = &update else {
                unreachable!()
            };
            (UpdateRule::boxes_heuristic(trainer), update)
        }
        UpdateKind::Identity => (
            heuristic(args.h0.as_deref().unwrap_or("random"))?,
            UpdateRule::Identity,
        ),
        UpdateKind::Scripted => {
            if args.script.is_empty() {
                return Err(usage("the scripted update needs --script"));
            }
            let script = args
                .script
                .iter()
                .map(|d| heuristic(d))
                .collect::<Result<VecDeque<_>>>()?;
            (
                heuristic(args.h0.as_deref().unwrap_or("random"))?,
                UpdateRule::Scripted(script),
            )
        }
    };
    let mut data = ReseededDataset(cases);
    let history = match run_training(h0, &mut data, &mut update, args.tau, args.max_k) {
        Ok(r) => {
            eprintln!(
                "loss {} <= {} after {} evaluations; final heuristic {}",
                r.history.final_loss().unwrap_or(f64::NAN),
                args.tau,
                r.history.len(),
                r.heuristic.id
            );
            r.history
        }
        Err(TrainingError::MaxIterations { max_k, history }) => {
            eprintln!(
                "stopped after {max_k} evaluations with loss {} > {}",
                history.final_loss().unwrap_or(f64::NAN),
                args.tau
            );
            history
        }
        Err(e @ (TrainingError::InvalidThreshold(_) | TrainingError::NoIterations)) => {
            return Err(usage(e.to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    emit(args.out.as_deref(), &history.to_csv(), false)
}

pub fn serve(args: ServeArgs) -> Result<()> {
    if !(args.flush_interval > 0.0 && args.flush_interval.is_finite()) {
        return Err(usage("--flush-interval must be positive"));
    }
    let llm = match args.llm.as_str() {
        "none" => LlmContext::unavailable("LLM agents are disabled"),
        name => LlmContext::from_backend_name(name),
    };
    if let Err(reason) = llm.backend() {
        eprintln!("llm agents unavailable: {reason}");
    }
    let mut config = ServiceConfig::new(&args.store);
    config.flush_interval = Duration::from_secs_f64(args.flush_interval);
    config.batch_size = args.batch_size.max(1);
    config.llm = llm;
    let service = Service::open(config)
        .with_context(|| format!("cannot open store {}", args.store.display()))?;
    let audit = service.audit();
    eprintln!(
        "store {}: {} records, {} failed replay",
        args.store.display(),
        audit.records,
        audit.failures.len()
    );
    for (id, reason) in &audit.failures {
        eprintln!("  {id}: {reason}");
    }
    let addr: std::net::SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| usage(format!("bad address: {e}")))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let service = Arc::new(service);
        gamebot_service::bind_and_serve(
            service.clone(),
            addr,
            |bound| eprintln!("listening on http://{bound}"),
            async {
                let _ = tokio::signal::ctrl_c().await;
            },
        )
        .await
        .with_context(|| format!("cannot serve on {addr}"))?;
        eprintln!("stopped; {} records pending", service.queue().len());
        if !service.queue().is_empty() {
            bail!("{} records could not be persisted", service.queue().len());
        }
        Ok(())
    })
}

struct Preset {
    tier: Tier,
    name: &'static str,
    command: &'static str,
    about: &'static str,
}

const PRESETS: &[Preset] = &[
    Preset {
        tier: Tier::Foundational,
        name: "tictactoe-dictionary",
        command: "gamebot play tictactoe --agent dictionary",
        about: "play the full lookup table",
    },
    Preset {
        tier: Tier::Foundational,
        name: "tictactoe-table",
        command: "gamebot solve tictactoe --export tictactoe.tsv",
        about: "build and export the dictionary",
    },
    Preset {
        tier: Tier::Foundational,
        name: "nim-exact",
        command: "gamebot play nim --n 21 --k 3 --agent exact",
        about: "play the closed-form Nim strategy",
    },
    Preset {
        tier: Tier::Intermediate,
        name: "mancala-minimax",
        command: "gamebot play mancala --agent minimax:Medium",
        about: "play depth-limited search with the store heuristic",
    },
    Preset {
        tier: Tier::Intermediate,
        name: "nim-heuristic-edit",
        command: "gamebot loop nim --n 21 --k 3 --update scripted --h0 heuristic:h0 --script exact",
        about: "replace a hand-written rule and watch the loss",
    },
    Preset {
        tier: Tier::Advanced,
        name: "nim-boxes-sweep",
        command: "gamebot train nim --sweep n=5,9,13,17,21 --k 3 --seeds 100",
        about: "rounds to mastery across pile sizes",
    },
    Preset {
        tier: Tier::Advanced,
        name: "nim-boxes-loop",
        command: "gamebot loop nim --n 5 --k 3 --update boxes --tau 0.05",
        about: "refinement loop with Boxes updates",
    },
    Preset {
        tier: Tier::Advanced,
        name: "nim-llm",
        command: "gamebot play nim --n 21 --k 3 --agent llm:nim_move --llm oracle",
        about: "play a gated LLM function",
    },
];

pub fn curriculum(args: CurriculumArgs) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["tier", "preset", "command", "about"])?;
    for p in PRESETS
        .iter()
        .filter(|p| args.tier.is_none_or(|t| t == p.tier))
    {
        let tier = format!("{:?}", p.tier).to_lowercase();
        w.write_record([tier.as_str(), p.name, p.command, p.about])?;
    }
    let text = String::from_utf8(w.into_inner()?)?;
    emit(None, &text, false)
}
