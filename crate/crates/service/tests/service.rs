use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::Duration;

use gamebot_core::exact::ExactAgent;
use gamebot_core::{
    play_match, rng_from_seed, Agent, GameRecord, GameSpec, PlayerId, Position, RandomAgent, Seats,
};
use gamebot_llm::LlmContext;
use gamebot_service::store::Fault;
use gamebot_service::{
    CreateSession, FileStore, Leaderboard, RecordStore, Service, ServiceConfig, ServiceError,
    SessionStatus,
};
use rand::Rng;
use serde_json::json;
use tempfile::TempDir;

fn service_in(dir: &TempDir) -> Service {
    Service::open(ServiceConfig::new(dir.path())).unwrap()
}

fn service_with_faults(dir: &TempDir, faults: &[Fault]) -> Service {
    let mut store = FileStore::open(dir.path()).unwrap();
    for f in faults {
        store.inject(*f);
    }
    Service::with_store(ServiceConfig::new(dir.path()), Box::new(store)).unwrap()
}

/// A finished nim game between `first` and `second` seat names; the winner is decided by
/// which seat plays the exact agent.
fn nim_record(id: &str, first: &str, second: &str, first_wins: bool, seed: u64) -> GameRecord {
    let spec = GameSpec::nim(9, 3).unwrap();
    let (mut a, mut b): (Box<dyn Agent>, Box<dyn Agent>) = if first_wins {
        (Box::new(ExactAgent), Box::new(RandomAgent))
    } else {
        (Box::new(RandomAgent), Box::new(ExactAgent))
    };
    // 9 mod 4 = 1: the first player loses under optimal play, so a winning first seat
    // needs a sloppy opponent. Start from 10 instead.
    let spec = if first_wins {
        GameSpec::nim(10, 3).unwrap()
    } else {
        spec
    };
    let mut rec = play_match(&spec, a.as_mut(), b.as_mut(), seed);
    assert_eq!(
        rec.outcome.winner(),
        Some(if first_wins {
            PlayerId::First
        } else {
            PlayerId::Second
        })
    );
    rec.record_id = id.to_string();
    rec.agents = Seats::new(first, second);
    rec
}

fn drawn_tictactoe(id: &str, first: &str, second: &str) -> GameRecord {
    let spec = GameSpec::tictactoe();
    let mut rec = play_match(&spec, &mut ExactAgent, &mut ExactAgent, 0);
    assert_eq!(rec.outcome.winner(), None);
    rec.record_id = id.to_string();
    rec.agents = Seats::new(first, second);
    rec
}

fn elo_oracle(r: f64, opp: f64, score: f64) -> f64 {
    let expected = 1.0 / (1.0 + 10f64.powf((opp - r) / 400.0));
    32.0 * (score - expected)
}

#[test]
fn elo_examples() {
    let dir = TempDir::new().unwrap();
    let svc = service_in(&dir);

    let out = svc
        .record_result(nim_record("hard", "human:ada", "minimax:Hard", true, 1))
        .unwrap();
    let want = elo_oracle(1200.0, 1800.0, 1.0);
    assert!((out.rating_delta[0].delta - want).abs() < 1e-9);
    assert!((out.rating_delta[0].delta - 31.02).abs() < 0.01);
    assert_eq!(out.rating_delta[0].before, 1200.0);

    let out = svc
        .record_result(nim_record("even", "human:bo", "boxes:t", true, 2))
        .unwrap();
    assert_eq!(out.rating_delta[0].delta, 16.0);

    let out = svc
        .record_result(nim_record("hh", "human:cy", "human:di", true, 3))
        .unwrap();
    let d: HashMap<_, _> = out
        .rating_delta
        .iter()
        .map(|d| (d.participant.as_str(), d.delta))
        .collect();
    assert_eq!(d["cy"], 16.0);
    assert_eq!(d["di"], -16.0);

    let out = svc
        .record_result(drawn_tictactoe("draw", "human:ed", "human:fa"))
        .unwrap();
    assert!(out.rating_delta.iter().all(|d| d.delta == 0.0));

    // Agent-only games and anchors never move.
    let out = svc
        .record_result(nim_record("bots", "exact", "random", true, 4))
        .unwrap();
    assert!(out.rating_delta.is_empty());
    assert!(svc.rating_of("exact").is_none());

    let ada = svc.rating_of("ada").unwrap();
    assert_eq!((ada.games, ada.wins, ada.draws, ada.losses), (1, 1, 0, 0));
    assert!(ada.rating > 1200.0);
}

#[test]
fn human_rating_depends_only_on_result_sequence() {
    let recs: Vec<GameRecord> = (0..12)
        .map(|i| {
            let opp = ["minimax:Easy", "minimax:Medium", "minimax:Hard", "exact"][i % 4];
            nim_record(&format!("r{i}"), "human:ada", opp, i % 3 != 0, i as u64)
        })
        .collect();
    let dir = TempDir::new().unwrap();
    let svc = service_in(&dir);
    let mut expected = 1200.0;
    for r in &recs {
        svc.record_result(r.clone()).unwrap();
        let opp = match r.agents.second.as_str() {
            "minimax:Easy" => 1000.0,
            "minimax:Medium" => 1400.0,
            "minimax:Hard" => 1800.0,
            _ => 2000.0,
        };
        let score = if r.outcome.winner() == Some(PlayerId::First) {
            1.0
        } else {
            0.0
        };
        expected += elo_oracle(expected, opp, score);
    }
    assert!((svc.rating_of("ada").unwrap().rating - expected).abs() < 1e-9);
}

#[test]
fn invalid_record_rejected() {
    let dir = TempDir::new().unwrap();
    let svc = service_in(&dir);
    let mut rec = nim_record("bad", "human:ada", "exact", true, 0);
    rec.moves[0].action = 7;
    assert!(matches!(
        svc.record_result(rec),
        Err(ServiceError::InvalidRecord(_))
    ));
    assert!(svc.leaderboard(10).is_empty());
    assert!(svc.queue().is_empty());
}

#[test]
fn leaderboard_order_and_limit() {
    let dir = TempDir::new().unwrap();
    let svc = service_in(&dir);
    assert!(svc.leaderboard(10).is_empty());
    for i in 0..10 {
        let win = i % 2 == 0;
        svc.record_result(nim_record(
            &format!("g{i}"),
            &format!("human:p{i}"),
            "minimax:Medium",
            win,
            i,
        ))
        .unwrap();
    }
    assert_eq!(svc.leaderboard(3).len(), 3);
    let all = svc.leaderboard(100);
    assert_eq!(all.len(), 10);
    for w in all.windows(2) {
        let key =
            |e: &gamebot_service::LeaderboardEntry| (-e.rating, e.games, e.participant.clone());
        assert!(key(&w[0]).partial_cmp(&key(&w[1])) != Some(std::cmp::Ordering::Greater));
    }
    // Equal ratings fall back to name order.
    assert_eq!(all[0].participant, "p0");
    assert_eq!(all[1].participant, "p2");
}

/// Misère nim values by brute force: taking the last object loses.
fn nim_wins(r: u32, k: u32) -> bool {
    (1..=k.min(r)).any(|t| r - t > 0 && !nim_wins(r - t, k))
}

#[test]
fn nim_session_follows_oracle_line() {
    let dir = TempDir::new().unwrap();
    let svc = service_in(&dir);
    let (view, report) = svc
        .create_session(&CreateSession {
            game: "nim".into(),
            config: Some(json!({"n": 8, "k": 3})),
            agent: "exact".into(),
            participant: Some("ada".into()),
            ..Default::default()
        })
        .unwrap();
    assert!(report.agent_moves.is_empty());
    assert_eq!(view.to_move, PlayerId::First);
    let id = view.session_id.clone();
    let remaining = |p: &Position| match p {
        Position::Nim(pile) => pile.remaining,
        _ => unreachable!(),
    };
    let mut r = 8;
    let mut replies = Vec::new();
    loop {
        let (view, report, rated) = svc.submit_move(&id, 1).unwrap();
        r -= 1;
        for &t in &report.agent_moves {
            // From a winning position the agent always leaves a losing one.
            if nim_wins(r, 3) {
                assert!(!nim_wins(r - t, 3) && r - t > 0, "r={r} t={t}");
            }
            r -= t;
            replies.push(t);
        }
        assert_eq!(remaining(&view.state), r);
        if view.status == SessionStatus::Finished {
            assert_eq!(view.outcome.unwrap().winner(), Some(PlayerId::Second));
            let rated = rated.unwrap();
            assert_eq!(rated.rating_delta[0].participant, "ada");
            assert!(rated.rating_delta[0].delta < 0.0);
            break;
        }
        assert_eq!(view.to_move, PlayerId::First);
    }
    assert_eq!(replies[0], 2);
    assert_eq!(svc.queue().len(), 1);
    assert!(matches!(
        svc.submit_move(&id, 1),
        Err(ServiceError::Session(
            gamebot_service::session::SessionError::Closed(SessionStatus::Finished)
        ))
    ));
}

#[test]
fn mancala_free_turn_keeps_human_to_move() {
    let dir = TempDir::new().unwrap();
    let svc = service_in(&dir);
    let (view, _) = svc
        .create_session(&CreateSession {
            game: "mancala".into(),
            agent: "minimax:Hard".into(),
            ..Default::default()
        })
        .unwrap();
    let Position::Mancala(board) = &view.state else {
        panic!()
    };
    assert_eq!(board.pits.iter().sum::<u32>(), 48);
    let p = 6;
    let free = (0..p)
        .find(|&a| board.pits[a] as usize == p - a)
        .expect("a pit reaching the store");
    let (after, report, _) = svc.submit_move(&view.session_id, free as u32).unwrap();
    assert!(report.agent_moves.is_empty());
    assert_eq!(after.to_move, PlayerId::First);
    let Position::Mancala(b) = &after.state else {
        panic!()
    };
    assert_eq!(b.pits[p], 1);
}

#[test]
fn illegal_move_leaves_session_unchanged() {
    let dir = TempDir::new().unwrap();
    let svc = service_in(&dir);
    let (view, _) = svc
        .create_session(&CreateSession {
            game: "tictactoe".into(),
            agent: "dictionary".into(),
            ..Default::default()
        })
        .unwrap();
    assert_eq!(view.legal_actions, (0..9).collect::<Vec<_>>());
    let id = view.session_id;
    let (v1, report, _) = svc.submit_move(&id, 4).unwrap();
    assert_eq!(report.agent_moves.len(), 1);
    for bad in [4, report.agent_moves[0], 9, 100] {
        let err = svc.submit_move(&id, bad).unwrap_err();
        assert!(matches!(
            err,
            ServiceError::Session(gamebot_service::session::SessionError::IllegalMove { .. })
        ));
        assert_eq!(svc.view(&id).unwrap(), v1);
    }
}

#[test]
fn session_creation_errors() {
    let dir = TempDir::new().unwrap();
    let svc = service_in(&dir);
    let req = |game: &str, agent: &str, config| CreateSession {
        game: game.into(),
        agent: agent.into(),
        config,
        ..Default::default()
    };
    assert!(matches!(
        svc.create_session(&req("chess", "exact", None)),
        Err(ServiceError::InvalidConfig(_))
    ));
    assert!(matches!(
        svc.create_session(&req("nim", "exact", Some(json!({"k": 0})))),
        Err(ServiceError::InvalidConfig(_))
    ));
    assert!(matches!(
        svc.create_session(&req("nim", "oracle", None)),
        Err(ServiceError::UnknownAgent(_))
    ));
    assert!(matches!(
        svc.create_session(&req("nim", "llm:chess_move", None)),
        Err(ServiceError::UnknownAgent(_))
    ));
    assert!(matches!(
        svc.create_session(&req("nim", "missing", None)),
        Err(ServiceError::UnknownAgent(_))
    ));
    assert!(matches!(
        svc.create_session(&req("mancala", "exact", None)),
        Err(ServiceError::AgentUnavailable(_))
    ));
    assert!(svc.sessions().is_empty());
}

#[test]
fn llm_sessions_follow_backend_availability() {
    let dir = TempDir::new().unwrap();
    let svc = service_in(&dir);
    let (view, _) = svc
        .create_session(&CreateSession {
            game: "nim".into(),
            config: Some(json!({"n": 8, "k": 3})),
            agent: "llm:nim_move".into(),
            ..Default::default()
        })
        .unwrap();
    assert_eq!(view.status, SessionStatus::Active);
    let (_, report, _) = svc.submit_move(&view.session_id, 1).unwrap();
    assert_eq!(report.agent_moves, vec![2]);
    assert!(report.reasoning.unwrap().starts_with("Take 2"));

    let mut config = ServiceConfig::new(dir.path().join("other"));
    config.llm = LlmContext::unavailable("NEMO_LLM_API_KEY is not set");
    let svc = Service::open(config).unwrap();
    let req = |agent: &str| CreateSession {
        game: "nim".into(),
        agent: agent.into(),
        ..Default::default()
    };
    assert!(matches!(
        svc.create_session(&req("llm:nim_move")),
        Err(ServiceError::AgentUnavailable(_))
    ));
    assert!(svc.create_session(&req("exact")).is_ok());
}

#[test]
fn agent_opens_for_second_seat_human() {
    let dir = TempDir::new().unwrap();
    let svc = service_in(&dir);
    let (view, report) = svc
        .create_session(&CreateSession {
            game: "tictactoe".into(),
            agent: "dictionary".into(),
            human_seat: Some(PlayerId::Second),
            ..Default::default()
        })
        .unwrap();
    assert_eq!(report.agent_moves.len(), 1);
    assert_eq!(view.to_move, PlayerId::Second);
    assert_eq!(view.legal_actions.len(), 8);
}

#[test]
fn full_batch_is_one_write() {
    let dir = TempDir::new().unwrap();
    let svc = service_in(&dir);
    for i in 0..50 {
        svc.record_result(nim_record(
            &format!("b{i}"),
            "human:ada",
            "minimax:Easy",
            i % 2 == 0,
            i,
        ))
        .unwrap();
    }
    assert_eq!(svc.queue().len(), 50);
    assert_eq!(svc.flush().unwrap(), 50);
    assert!(svc.queue().is_empty());
    let segments: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".ndjson"))
        .collect();
    assert_eq!(segments.len(), 1);
    assert!(dir
        .path()
        .join(gamebot_service::store::SNAPSHOT_FILE)
        .exists());
}

#[test]
fn duplicate_record_persisted_and_rated_once() {
    let dir = TempDir::new().unwrap();
    let svc = service_in(&dir);
    let rec = nim_record("dup", "human:ada", "minimax:Hard", true, 0);
    let first = svc.record_result(rec.clone()).unwrap();
    let second = svc.record_result(rec.clone()).unwrap();
    assert!(!first.duplicate && second.duplicate);
    assert_eq!(first.rating_delta, second.rating_delta);
    assert_eq!(svc.rating_of("ada").unwrap().games, 1);
    svc.flush().unwrap();
    assert!(svc.record_result(rec.clone()).unwrap().duplicate);
    assert_eq!(svc.flush().unwrap(), 0);
    drop(svc);

    let svc = service_in(&dir);
    assert!(svc.record_result(rec).unwrap().duplicate);
    assert_eq!(svc.flush().unwrap(), 0);
    let store = FileStore::open(dir.path()).unwrap();
    assert_eq!(store.records().unwrap().len(), 1);
    assert_eq!(svc.rating_of("ada").unwrap().games, 1);
}

#[test]
fn store_failure_keeps_records_queued() {
    let dir = TempDir::new().unwrap();
    for fault in [Fault::BeforeWrite, Fault::BeforeRename, Fault::AfterRename] {
        let sub = TempDir::new_in(dir.path()).unwrap();
        let svc = service_with_faults(&sub, &[fault]);
        for i in 0..5 {
            svc.record_result(nim_record(&format!("q{i}"), "human:ada", "exact", false, i))
                .unwrap();
        }
        assert!(matches!(
            svc.flush(),
            Err(gamebot_service::StoreError::Unavailable(_))
        ));
        assert_eq!(svc.queue().len(), 5, "{fault:?}");
        let persisted = svc.flush().unwrap();
        assert_eq!(persisted, if fault == Fault::AfterRename { 0 } else { 5 });
        assert!(svc.queue().is_empty());
        let ids: Vec<String> = FileStore::open(sub.path())
            .unwrap()
            .records()
            .unwrap()
            .into_iter()
            .map(|r| r.record_id)
            .collect();
        assert_eq!(
            ids,
            (0..5).map(|i| format!("q{i}")).collect::<Vec<_>>(),
            "{fault:?}"
        );
    }
}

/// Drives a random interleaving of submissions, client retries, flushes, injected store
/// faults and process crashes, then checks that the store holds every acknowledged record
/// exactly once and that ratings equal a replay of the stored sequence.
fn crash_schedule(seed: u64) {
    let dir = TempDir::new().unwrap();
    let mut rng = rng_from_seed(seed);
    let mut svc = service_in(&dir);
    let mut submitted: Vec<GameRecord> = Vec::new();
    let faults = [Fault::BeforeWrite, Fault::BeforeRename, Fault::AfterRename];
    let mut crashes = 0;
    for step in 0..60 {
        match rng.gen_range(0..10) {
            0..=4 => {
                let rec = nim_record(
                    &format!("s{seed}-{step}"),
                    &format!("human:p{}", rng.gen_range(0..4)),
                    ["minimax:Easy", "minimax:Hard", "exact"][rng.gen_range(0..3)],
                    rng.gen_bool(0.5),
                    step,
                );
                svc.record_result(rec.clone()).unwrap();
                submitted.push(rec);
            }
            5 => {
                if let Some(rec) = submitted.get(rng.gen_range(0..submitted.len().max(1))) {
                    assert!(svc.record_result(rec.clone()).unwrap().duplicate);
                }
            }
            6 | 7 => {
                let _ = svc.flush();
            }
            8 => {
                let mut store = FileStore::open(dir.path()).unwrap();
                store.inject(faults[rng.gen_range(0..3)]);
                // A crash followed by a restart onto a flaky store.
                drop(svc);
                svc = Service::with_store(ServiceConfig::new(dir.path()), Box::new(store)).unwrap();
                crashes += 1;
                resubmit(&svc, &submitted);
            }
            _ => {
                drop(svc);
                svc = service_in(&dir);
                crashes += 1;
                resubmit(&svc, &submitted);
            }
        }
    }
    while svc.flush().is_err() {}
    let stored = FileStore::open(dir.path()).unwrap().records().unwrap();
    let mut seen = HashSet::new();
    for r in &stored {
        assert!(
            seen.insert(r.record_id.clone()),
            "seed {seed}: {} stored twice",
            r.record_id
        );
        assert!(r.replay().is_ok());
    }
    let expected: HashSet<String> = submitted.iter().map(|r| r.record_id.clone()).collect();
    assert_eq!(seen, expected, "seed {seed} after {crashes} crashes");

    let mut board = Leaderboard::new();
    for r in &stored {
        board.apply(r);
    }
    assert_eq!(
        svc.leaderboard(usize::MAX),
        board.ranked(usize::MAX),
        "seed {seed}"
    );
    let reopened = service_in(&dir);
    assert_eq!(reopened.leaderboard(usize::MAX), board.ranked(usize::MAX));
    assert_eq!(reopened.audit().records, stored.len());
    assert!(reopened.audit().failures.is_empty());
}

/// A client that never got a durable acknowledgement resends everything it submitted.
fn resubmit(svc: &Service, submitted: &[GameRecord]) {
    for rec in submitted {
        svc.record_result(rec.clone()).unwrap();
    }
}

#[test]
fn exactly_once_under_crash_schedules() {
    for seed in 0..40 {
        crash_schedule(seed);
    }
}

#[test]
fn audit_flags_records_that_fail_replay() {
    let dir = TempDir::new().unwrap();
    let svc = service_in(&dir);
    svc.record_result(nim_record("ok", "human:ada", "exact", false, 0))
        .unwrap();
    svc.flush().unwrap();
    drop(svc);
    let mut bad = nim_record("bad", "human:bo", "exact", false, 1);
    bad.moves[0].action = 9;
    std::fs::write(
        dir.path().join("records-00000099.ndjson"),
        format!("{}\n", bad.to_json_line()),
    )
    .unwrap();
    let svc = service_in(&dir);
    assert_eq!(svc.audit().records, 2);
    assert_eq!(svc.audit().failures.len(), 1);
    assert_eq!(svc.audit().failures[0].0, "bad");
    assert!(svc.rating_of("bo").is_none());
    assert!(svc.rating_of("ada").is_some());
}

#[test]
fn concurrent_submits_on_one_session_stay_legal() {
    let dir = TempDir::new().unwrap();
    let svc = Arc::new(service_in(&dir));
    for round in 0..20u64 {
        let (view, _) = svc
            .create_session(&CreateSession {
                game: "tictactoe".into(),
                agent: "random".into(),
                seed: Some(round),
                ..Default::default()
            })
            .unwrap();
        let id = view.session_id;
        let threads: Vec<_> = (0..8u64)
            .map(|t| {
                let svc = svc.clone();
                let id = id.clone();
                std::thread::spawn(move || {
                    let mut rng = rng_from_seed(round * 100 + t);
                    for _ in 0..30 {
                        let _ = svc.submit_move(&id, rng.gen_range(0..9));
                    }
                })
            })
            .collect();
        for t in threads {
            t.join().unwrap();
        }
        let handle = svc.sessions().get(&id).unwrap();
        let s = handle.lock().unwrap();
        let spec = s.spec;
        let mut state = spec.initial();
        for m in &s.moves {
            assert_eq!(m.key, spec.canonical_key(&state));
            assert_eq!(m.player, state.to_move);
            state = spec.apply(&state, m.action).unwrap();
        }
        assert_eq!(state, s.state);
        if let Some(rec) = &s.record {
            assert_eq!(rec.replay().unwrap(), s.state);
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn worker_drains_on_shutdown_and_on_full_batch() {
    let dir = TempDir::new().unwrap();
    let mut config = ServiceConfig::new(dir.path());
    config.flush_interval = Duration::from_secs(3600);
    config.batch_size = 4;
    let svc = Arc::new(Service::open(config).unwrap());
    let worker = svc.spawn_worker();
    for i in 0..4 {
        svc.record_result(nim_record(&format!("w{i}"), "human:ada", "exact", false, i))
            .unwrap();
    }
    let deadline = tokio::time::Instant::now() + Duration::from_secs(10);
    while !svc.queue().is_empty() {
        assert!(
            tokio::time::Instant::now() < deadline,
            "full batch not flushed"
        );
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    for i in 4..7 {
        svc.record_result(nim_record(&format!("w{i}"), "human:ada", "exact", false, i))
            .unwrap();
    }
    assert_eq!(svc.queue().len(), 3);
    worker.shutdown().await;
    assert!(svc.queue().is_empty());
    let stored = FileStore::open(dir.path()).unwrap().records().unwrap();
    assert_eq!(stored.len(), 7);
    let ids: Vec<_> = stored.iter().map(|r| r.record_id.as_str()).collect();
    assert_eq!(ids, ["w0", "w1", "w2", "w3", "w4", "w5", "w6"]);
}
