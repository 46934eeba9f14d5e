use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use gamebot_core::agent::AgentError;
use gamebot_core::exact::{reachable_states, Solver, STATE_CAP};
use gamebot_core::games::{MancalaBoard, TicTacToeBoard};
use gamebot_core::{
    rng_from_seed, AgentDescriptor, GameSpec, GameState, PlayerId, Position, RandomAgent,
    TurnContext,
};
use gamebot_llm::backend::BackendError;
use gamebot_llm::prompt::NIM;
use gamebot_llm::{
    invoke, parse_move, serialize_critique, serialize_state, Backend, BackendKind, BagOfWords,
    CacheOutcome, LlmContext, LlmFunction, MemoCache, OracleBackend, RemoteBackend, RemoteConfig,
    ReplayBackend, Request,
};
use rand::seq::SliceRandom;
use rand::Rng;

fn golden(name: &str) -> String {
    let path = format!("{}/fixtures/v1/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn tictactoe_golden() {
    let spec = GameSpec::tictactoe();
    let board = TicTacToeBoard::parse("X...O....").unwrap();
    // X on 0 and O on 4 leaves X to move; the prompt asks for O, so O is the mover here.
    let s = GameState::new(PlayerId::Second, Position::TicTacToe(board));
    let text = serialize_state(&spec, &s);
    assert_eq!(text, golden("tictactoe_x0_o4.txt"));
    assert!(
        text.contains("Cell 0 (Top-Left) is occupied by 'X'. Cell 4 (Center) is occupied by 'O'.")
    );
}

#[test]
fn nim_golden() {
    let spec = GameSpec::nim(8, 3).unwrap();
    let text = serialize_state(&spec, &spec.initial());
    assert_eq!(text, golden("nim_8_3.txt"));
    assert!(text.contains("A single pile remains containing 8 stones"));
    assert!(text.contains("remove 1, 2, or 3 stones"));
}

#[test]
fn mancala_golden() {
    let spec = GameSpec::mancala(3, 4).unwrap();
    let board = MancalaBoard::from_slots(vec![4, 1, 3, 8, 2, 0, 4, 6]).unwrap();
    let s = GameState::new(PlayerId::Second, Position::Mancala(board));
    let text = serialize_state(&spec, &s);
    assert_eq!(text, golden("mancala_3pit.txt"));
    assert!(text.contains("Pit 0: 4 seeds, Pit 1: 1 seed, Pit 2: 3 seeds. Store: 8."));
}

#[test]
fn critique_golden() {
    let board = MancalaBoard::from_slots(vec![2, 2, 0, 2, 2, 0]).unwrap();
    let s = GameState::new(PlayerId::Second, Position::Mancala(board));
    assert_eq!(
        serialize_critique(&s).unwrap(),
        golden("mancala_critique_2pit.txt")
    );
    assert_eq!(serialize_critique(&GameSpec::tictactoe().initial()), None);
}

fn ctx_rng(seed: u64) -> gamebot_core::GameRng {
    rng_from_seed(seed)
}

#[test]
fn oracle_invoke_then_exact_hit() {
    let spec = GameSpec::nim(8, 3).unwrap();
    let mut f = LlmFunction::for_spec(&spec);
    let cache = MemoCache::exact_only();
    let backend = OracleBackend::new();
    let mut rng = ctx_rng(0);
    let mut ctx = TurnContext {
        history: &[],
        rng: &mut rng,
    };
    let s = spec.initial();
    let (a, t) = invoke(&mut f, &spec, &s, &backend, &cache, &mut ctx);
    assert_eq!(a, 3);
    assert_eq!(t.cache, CacheOutcome::Miss);
    assert_eq!(t.backend, BackendKind::Oracle);
    assert!(!t.fallback_used);
    assert_eq!(cache.stats().backend_calls, 1);

    let (a2, t2) = invoke(&mut f, &spec, &s, &backend, &cache, &mut ctx);
    assert_eq!(a2, 3);
    assert_eq!(t2.cache, CacheOutcome::ExactHit);
    assert_eq!(cache.stats().backend_calls, 1);
}

struct Counting<B> {
    inner: B,
    calls: AtomicUsize,
}

impl<B: Backend> Backend for Counting<B> {
    fn kind(&self) -> BackendKind {
        self.inner.kind()
    }
    fn complete(&self, r: &Request<'_>) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(r)
    }
}

#[test]
fn identical_invocations_call_the_backend_once() {
    for spec in [
        GameSpec::nim(21, 3).unwrap(),
        GameSpec::mancala(6, 4).unwrap(),
    ] {
        let mut f = LlmFunction::for_spec(&spec);
        let cache = MemoCache::exact_only();
        let backend = Counting {
            inner: OracleBackend::new(),
            calls: AtomicUsize::new(0),
        };
        let mut rng = ctx_rng(0);
        let mut ctx = TurnContext {
            history: &[],
            rng: &mut rng,
        };
        let n = 25;
        let first = invoke(&mut f, &spec, &spec.initial(), &backend, &cache, &mut ctx).0;
        for _ in 1..n {
            assert_eq!(
                invoke(&mut f, &spec, &spec.initial(), &backend, &cache, &mut ctx).0,
                first
            );
        }
        assert_eq!(backend.calls.load(Ordering::SeqCst), 1);
        let stats = cache.stats();
        assert_eq!(stats.backend_calls, 1);
        assert_eq!(stats.hits() + stats.backend_calls, n);
        assert_eq!(stats.invocations, n);
    }
}

#[test]
fn garbage_transcript_falls_back() {
    let spec = GameSpec::nim(8, 3).unwrap();
    let mut f = LlmFunction::for_spec(&spec);
    let cache = MemoCache::exact_only();
    let backend = ReplayBackend::from_ndjson("%%% not a record\n");
    let mut rng = ctx_rng(0);
    let mut ctx = TurnContext {
        history: &[],
        rng: &mut rng,
    };
    let (a, t) = invoke(&mut f, &spec, &spec.initial(), &backend, &cache, &mut ctx);
    assert!(t.fallback_used);
    assert_eq!(a, 3, "the exact fallback plays the formula");
    assert_eq!(t.errors.len(), 3);
    assert!(t.errors[0].starts_with("malformed"));
    assert!(t.errors[1].starts_with("transcript exhausted"));
}

#[test]
fn replay_answers_in_order() {
    let spec = GameSpec::nim(8, 3).unwrap();
    let mut f = LlmFunction::for_spec(&spec);
    let cache = MemoCache::exact_only();
    let backend = ReplayBackend::from_ndjson(
        "{\"prompt\":\"x\",\"response\":\"I would take 5\"}\n{\"prompt\":\"x\",\"response\":\"Take 2 stones.\"}\n",
    );
    let mut rng = ctx_rng(0);
    let mut ctx = TurnContext {
        history: &[],
        rng: &mut rng,
    };
    let (a, t) = invoke(&mut f, &spec, &spec.initial(), &backend, &cache, &mut ctx);
    assert_eq!(a, 2);
    assert_eq!(t.retries_used, 1);
    assert!(!t.fallback_used);
    assert_eq!(
        cache.exact_lookup(&f.name, &t.prompt).as_deref(),
        Some("Take 2 stones.")
    );
}

/// Always answers with numbers that are not legal moves.
struct Adversary;

impl Backend for Adversary {
    fn kind(&self) -> BackendKind {
        BackendKind::Remote
    }
    fn complete(&self, r: &Request<'_>) -> Result<String, BackendError> {
        let legal = r.spec.legal_actions(r.state);
        let illegal: Vec<String> = (0..20u32)
            .chain([999, u32::MAX])
            .filter(|a| !legal.contains(a))
            .map(|a| a.to_string())
            .collect();
        Ok(format!(
            "Cell {} pit {} take {}",
            illegal[0],
            illegal[1],
            illegal.join(" ")
        ))
    }
}

fn random_state(spec: &GameSpec, rng: &mut gamebot_core::GameRng) -> Option<GameState> {
    let mut s = spec.initial();
    let plies = rng.gen_range(0..40);
    for _ in 0..plies {
        let legal = spec.legal_actions(&s);
        let next = spec.apply(&s, *legal.choose(rng)?).unwrap();
        if spec.is_terminal(&next) {
            break;
        }
        s = next;
    }
    (!spec.is_terminal(&s)).then_some(s)
}

#[test]
fn gate_never_returns_an_illegal_move() {
    let specs = [
        GameSpec::tictactoe(),
        GameSpec::nim(21, 3).unwrap(),
        GameSpec::euclid(89, 55).unwrap(),
        GameSpec::mancala(6, 4).unwrap(),
    ];
    let mut functions: Vec<LlmFunction> = specs
        .iter()
        .map(|s| {
            let mut f = LlmFunction::for_spec(s);
            f.fallback = Box::new(RandomAgent);
            f
        })
        .collect();
    let cache = MemoCache::exact_only();
    let mut rng = ctx_rng(7);
    let mut checked = 0;
    while checked < 10_000 {
        let i = rng.gen_range(0..specs.len());
        let Some(s) = random_state(&specs[i], &mut rng) else {
            continue;
        };
        let mut agent_rng = ctx_rng(checked as u64);
        let mut ctx = TurnContext {
            history: &[],
            rng: &mut agent_rng,
        };
        let (a, t) = invoke(
            &mut functions[i],
            &specs[i],
            &s,
            &Adversary,
            &cache,
            &mut ctx,
        );
        assert!(specs[i].is_legal(&s, a), "{}", specs[i].canonical_key(&s));
        assert!(t.fallback_used);
        checked += 1;
    }
    assert!(cache.is_empty());
}

#[test]
fn oracle_responses_round_trip() {
    let backend = OracleBackend::new();
    for spec in [
        GameSpec::tictactoe(),
        GameSpec::nim(21, 3).unwrap(),
        GameSpec::mancala(2, 2).unwrap(),
        GameSpec::euclid(34, 21).unwrap(),
    ] {
        let states = reachable_states(&spec, &spec.initial(), STATE_CAP).unwrap();
        let mut solver = Solver::new(spec);
        for s in states.iter().filter(|s| !spec.is_terminal(s)) {
            let prompt = serialize_state(&spec, s);
            let req = Request {
                function: "round-trip",
                prompt: &prompt,
                spec: &spec,
                state: s,
            };
            let text = backend.complete(&req).unwrap();
            let a = parse_move(&spec, &text, s).unwrap_or_else(|e| panic!("{text}: {e}"));
            assert!(spec.legal_actions(s).contains(&a));
            if spec.kind() != gamebot_core::GameKind::Mancala {
                assert!(solver.optimal_actions(s).contains(&a), "{text}");
            }
        }
    }
}

#[test]
fn oracle_round_trip_on_full_mancala() {
    let spec = GameSpec::mancala(6, 4).unwrap();
    let backend = OracleBackend::new();
    let mut rng = ctx_rng(3);
    for _ in 0..100 {
        let Some(s) = random_state(&spec, &mut rng) else {
            continue;
        };
        let prompt = serialize_state(&spec, &s);
        let req = Request {
            function: "round-trip",
            prompt: &prompt,
            spec: &spec,
            state: &s,
        };
        let text = backend.complete(&req).unwrap();
        assert!(spec.is_legal(&s, parse_move(&spec, &text, &s).unwrap()));
    }
}

/// Word-count cosine computed directly, as the reference for the semantic tier.
fn reference_cosine(a: &str, b: &str) -> f64 {
    let counts = |t: &str| {
        let mut m: HashMap<String, f64> = HashMap::new();
        for w in t
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
        {
            *m.entry(w.to_lowercase()).or_default() += 1.0;
        }
        m
    };
    let (x, y) = (counts(a), counts(b));
    let dot: f64 = x.iter().map(|(k, v)| v * y.get(k).unwrap_or(&0.0)).sum();
    let norm = |m: &HashMap<String, f64>| m.values().map(|v| v * v).sum::<f64>().sqrt();
    dot / (norm(&x) * norm(&y))
}

#[test]
fn semantic_tier_follows_cosine() {
    let spec = GameSpec::nim(8, 3).unwrap();
    let stored = serialize_state(&spec, &spec.initial());
    let variants = [
        stored.replace(
            "A single pile remains containing 8 stones",
            "One pile remains, holding 8 stones",
        ),
        stored.replace(
            "A single pile remains containing 8 stones",
            "The only pile left has 8 stones in it",
        ),
        "How many stones should I take from a pile of 8?".to_string(),
    ];
    let cache = MemoCache::with_semantic(0.9, Box::new(BagOfWords::new()));
    cache.insert(NIM.name, &stored, "Take 3 stones.");
    let mut hits = 0;
    for v in &variants {
        let expected = reference_cosine(&stored, v) >= 0.9;
        let got = cache.semantic_lookup(NIM.name, v).is_some();
        assert_eq!(
            got,
            expected,
            "cosine {} for {v:?}",
            reference_cosine(&stored, v)
        );
        hits += got as usize;
    }
    assert!(hits >= 1);
    assert!(hits < variants.len());
    assert_eq!(cache.semantic_lookup("other_function", &variants[0]), None);

    let strict = MemoCache::with_semantic(1.0, Box::new(BagOfWords::new()));
    strict.insert(NIM.name, &stored, "Take 3 stones.");
    assert!(strict.semantic_lookup(NIM.name, &stored).is_some());
    assert!(variants
        .iter()
        .all(|v| strict.semantic_lookup(NIM.name, v).is_none()));
}

#[test]
fn semantic_hit_is_revalidated() {
    // A similar cached answer that is illegal in the new state goes back to the backend.
    let spec = GameSpec::nim(8, 3).unwrap();
    let mut f = LlmFunction::for_spec(&spec);
    let cache = MemoCache::with_semantic(0.5, Box::new(BagOfWords::new()));
    let backend = OracleBackend::new();
    let mut rng = ctx_rng(0);
    let mut ctx = TurnContext {
        history: &[],
        rng: &mut rng,
    };
    let pile_of = |r: u32| {
        let Position::Nim(mut pile) = spec.initial().payload else {
            unreachable!()
        };
        pile.remaining = r;
        GameState::new(PlayerId::First, Position::Nim(pile))
    };
    cache.insert(
        &f.name,
        &serialize_state(&spec, &pile_of(7)),
        "Take 3 stones.",
    );
    let (a, t) = invoke(&mut f, &spec, &pile_of(6), &backend, &cache, &mut ctx);
    assert_eq!((a, t.cache), (3, CacheOutcome::SemanticHit));
    let (a, t) = invoke(&mut f, &spec, &pile_of(2), &backend, &cache, &mut ctx);
    assert_eq!((a, t.cache), (1, CacheOutcome::Miss));
    let stats = cache.stats();
    assert_eq!((stats.semantic_hits, stats.backend_calls), (1, 1));
}

struct MockServer {
    url: String,
    requests: Arc<Mutex<Vec<(String, String, String)>>>,
    max_in_flight: Arc<AtomicUsize>,
}

/// Minimal HTTP/1.1 server answering every POST with a fixed completion.
fn mock_server(reply: &'static str, status: u16, delay: Duration) -> MockServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let in_flight = Arc::new(AtomicUsize::new(0));
    let max_in_flight = Arc::new(AtomicUsize::new(0));
    let (log, cur, max) = (requests.clone(), in_flight, max_in_flight.clone());
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let (log, cur, max) = (log.clone(), cur.clone(), max.clone());
            std::thread::spawn(move || loop {
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    return;
                }
                let path = line.split_whitespace().nth(1).unwrap_or("").to_string();
                let mut auth = String::new();
                let mut length = 0;
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    let h = h.trim_end();
                    if h.is_empty() {
                        break;
                    }
                    let (name, value) = h.split_once(':').unwrap();
                    match name.to_ascii_lowercase().as_str() {
                        "authorization" => auth = value.trim().to_string(),
                        "content-length" => length = value.trim().parse().unwrap(),
                        _ => {}
                    }
                }
                let mut body = vec![0; length];
                reader.read_exact(&mut body).unwrap();
                let now = cur.fetch_add(1, Ordering::SeqCst) + 1;
                max.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(delay);
                log.lock()
                    .unwrap()
                    .push((path, auth, String::from_utf8(body).unwrap()));
                cur.fetch_sub(1, Ordering::SeqCst);
                let payload = serde_json::json!({
                    "choices": [{"index": 0, "message": {"role": "assistant", "content": reply}}]
                })
                .to_string();
                let reason = if status == 200 { "OK" } else { "Error" };
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                    payload.len()
                );
                return;
            });
        }
    });
    MockServer {
        url,
        requests,
        max_in_flight,
    }
}

#[test]
fn remote_backend_speaks_chat_completions() {
    let server = mock_server("Take 3 stones, leaving 5.", 200, Duration::ZERO);
    let backend = RemoteBackend::new(RemoteConfig::new(&server.url, "test-model", "sk-test"));
    let spec = GameSpec::nim(8, 3).unwrap();
    let mut f = LlmFunction::for_spec(&spec);
    let cache = MemoCache::exact_only();
    let mut rng = ctx_rng(0);
    let mut ctx = TurnContext {
        history: &[],
        rng: &mut rng,
    };
    let (a, t) = invoke(&mut f, &spec, &spec.initial(), &backend, &cache, &mut ctx);
    assert_eq!(a, 3);
    assert!(!t.fallback_used);
    let requests = server.requests.lock().unwrap();
    assert_eq!(requests.len(), 1);
    let (path, auth, body) = &requests[0];
    assert_eq!(path, "/v1/chat/completions");
    assert_eq!(auth, "Bearer sk-test");
    let body: serde_json::Value = serde_json::from_str(body).unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.0);
    let messages = body["messages"].as_array().unwrap();
    assert_eq!(messages.last().unwrap()["content"], t.prompt.as_str());
}

#[test]
fn remote_failure_falls_back() {
    let server = mock_server("unused", 503, Duration::ZERO);
    let backend = RemoteBackend::new(RemoteConfig::new(&server.url, "m", "k"));
    let spec = GameSpec::nim(8, 3).unwrap();
    let mut f = LlmFunction::for_spec(&spec);
    let cache = MemoCache::exact_only();
    let mut rng = ctx_rng(0);
    let mut ctx = TurnContext {
        history: &[],
        rng: &mut rng,
    };
    let (a, t) = invoke(&mut f, &spec, &spec.initial(), &backend, &cache, &mut ctx);
    assert_eq!(a, 3);
    assert!(t.fallback_used);
    assert_eq!(t.errors.len(), 3);
    assert!(t
        .errors
        .iter()
        .all(|e| e.starts_with("backend unavailable")));

    // Nothing listens on a closed port.
    let closed = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap();
    let backend = RemoteBackend::new(RemoteConfig::new(format!("http://{closed}"), "m", "k"));
    let (a, t) = invoke(&mut f, &spec, &spec.initial(), &backend, &cache, &mut ctx);
    assert_eq!(a, 3);
    assert!(t.fallback_used);
}

#[test]
fn remote_concurrency_is_bounded() {
    let server = mock_server("Take 1 stone.", 200, Duration::from_millis(60));
    let mut cfg = RemoteConfig::new(&server.url, "m", "k");
    cfg.max_concurrency = 2;
    let backend = Arc::new(RemoteBackend::new(cfg));
    let spec = GameSpec::nim(8, 3).unwrap();
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let backend = backend.clone();
            std::thread::spawn(move || {
                let s = spec.initial();
                let req = Request {
                    function: "f",
                    prompt: "p",
                    spec: &spec,
                    state: &s,
                };
                backend.complete(&req).unwrap()
            })
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), "Take 1 stone.");
    }
    assert_eq!(server.requests.lock().unwrap().len(), 8);
    assert!(server.max_in_flight.load(Ordering::SeqCst) <= 2);
}

#[test]
fn llm_descriptors_build_agents() {
    let spec = GameSpec::tictactoe();
    let ctx = LlmContext::default();
    let mut oracle = ctx
        .build_agent(&"llm:tictactoe_move".parse().unwrap(), &spec)
        .unwrap();
    let mut dict = ctx
        .build_agent(&AgentDescriptor::Dictionary, &spec)
        .unwrap();
    let rec = gamebot_core::play_match(&spec, oracle.as_mut(), dict.as_mut(), 0);
    assert_eq!(rec.outcome.result, gamebot_core::GameResult::Draw);
    assert_eq!(rec.agents.first, "llm:tictactoe_move");
    assert!(oracle.reasoning().unwrap().starts_with("Play Cell"));
    assert!(ctx
        .build_agent(&"llm:oracle".parse().unwrap(), &spec)
        .is_ok());
    assert!(matches!(
        ctx.build_agent(&"llm:nim_move".parse().unwrap(), &spec),
        Err(AgentError::UnknownAgent(_))
    ));

    // Without a usable backend only llm agents are refused.
    let off = LlmContext::unavailable("NEMO_LLM_API_KEY is not set");
    assert!(matches!(
        off.build_agent(&"llm:move".parse().unwrap(), &spec),
        Err(AgentError::Unsupported { .. })
    ));
    assert!(off.build_agent(&AgentDescriptor::Exact, &spec).is_ok());
}
