use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use maple_cli::server::{render_view, router, AppState, ServerSettings};
use maple_core::game::{GameSpec, ObservationHistory, PlayerId};
use maple_core::nn::{checkpoint, NetConfig, Network};
use maple_core::search::{SamplerKind, SearchConfig};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

fn state(max_games: usize, idle_limit: Duration) -> Arc<AppState> {
    AppState::new(ServerSettings {
        game: GameSpec::dark_hex(3),
        search: SearchConfig { simulations: 8, k: 2, m: 4, noise_eps: 0.0, sampler: SamplerKind::Random, ..Default::default() },
        max_games,
        idle_limit,
        seed: 0,
    })
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let text = body.map(|b| b.to_string());
    let (status, bytes) = call(app, method, uri, text.as_deref()).await;
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn create(app: &Router, body: Value) -> u64 {
    let (status, v) = call_json(app, Method::POST, "/games", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["game_id"].as_u64().unwrap()
}

fn cells(v: &Value) -> Vec<usize> {
    v.as_array().unwrap().iter().map(|c| c.as_u64().unwrap() as usize).collect()
}

#[tokio::test]
async fn error_statuses() {
    let app = router(state(8, Duration::from_secs(60)));
    assert_eq!(call(&app, Method::GET, "/games/99/view", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, Method::POST, "/games", Some("{not json")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, Method::POST, "/games", Some(r#"{"agent_ckpt":"random","colour":1}"#)).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, Method::POST, "/games", Some(r#"{"agent_ckpt":"rollout:x"}"#)).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, Method::POST, "/games", Some(r#"{"agent_ckpt":"/no/such.maplenet"}"#)).await.0, StatusCode::BAD_REQUEST);

    let id = create(&app, json!({"agent_ckpt": "random", "human_seat": "second", "seed": 1})).await;
    let base = format!("/games/{id}");
    // The agent moves first, so the human is out of turn.
    let (s, _) = call_json(&app, Method::POST, &format!("{base}/attempt"), Some(json!({"cell": 0}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(call(&app, Method::POST, &format!("{base}/attempt"), Some("[]")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, Method::POST, &format!("{base}/attempt"), Some(r#"{"cell":1,"pass":true}"#)).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, Method::POST, &format!("{base}/attempt"), Some(r#"{"pass":true}"#)).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, Method::POST, &format!("{base}/attempt"), Some(r#"{"cell":9}"#)).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, Method::GET, &format!("{base}/record"), None).await.0, StatusCode::CONFLICT);
    let (s, v) = call_json(&app, Method::POST, &format!("{base}/agent-move"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["view"]["your_turn"], json!(true));
    assert_eq!(call(&app, Method::POST, &format!("{base}/agent-move"), None).await.0, StatusCode::CONFLICT);
    assert_eq!(call(&app, Method::DELETE, &base, None).await.0, StatusCode::NO_CONTENT);
    assert_eq!(call(&app, Method::DELETE, &base, None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, Method::GET, &format!("{base}/view"), None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn occupied_attempt_marks_the_cell_and_keeps_the_turn() {
    let st = state(8, Duration::from_secs(60));
    let app = router(Arc::clone(&st));
    let id = create(&app, json!({"agent_ckpt": "random", "human_seat": "second", "game": "darkhex", "size": 4})).await;
    call_json(&app, Method::POST, &format!("/games/{id}/agent-move"), None).await;
    let agent_cell = st.inspect(id, |g| g.session.world().stones(PlayerId::First).to_vec()[0]).await.unwrap();
    let (s, v) =
        call_json(&app, Method::POST, &format!("/games/{id}/attempt"), Some(json!({"cell": agent_cell}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["feedback"], json!("occupied"));
    assert!(cells(&v["view"]["tried_cells"]).contains(&agent_cell));
    assert_eq!(v["view"]["your_turn"], json!(true));
    assert_eq!(v["view"]["to_move"], json!("second"));
}

#[tokio::test]
async fn finished_games_expose_records_and_refuse_moves() {
    let app = router(state(8, Duration::from_secs(60)));
    let id = create(&app, json!({"agent_ckpt": "random", "game": "phantomgo", "size": 3})).await;
    let base = format!("/games/{id}");
    call_json(&app, Method::POST, &format!("{base}/attempt"), Some(json!({"pass": true}))).await;
    let (_, v) = call_json(&app, Method::POST, &format!("{base}/agent-move"), None).await;
    // Keep passing until the agent passes back.
    let mut view = v["view"].clone();
    while view["result"].is_null() {
        let (_, v) = call_json(&app, Method::POST, &format!("{base}/attempt"), Some(json!({"pass": true}))).await;
        view = v["view"].clone();
        if view["result"].is_null() {
            view = call_json(&app, Method::POST, &format!("{base}/agent-move"), None).await.1["view"].clone();
        }
    }
    assert!(["win", "loss", "draw"].contains(&view["result"]["outcome"].as_str().unwrap()));
    assert!(view["result"]["score_margin"].is_number());
    let (s, record) = call(&app, Method::GET, &format!("{base}/record"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(String::from_utf8(record).unwrap().starts_with("game=phantomgo\nsize=3\n"));
    assert_eq!(call(&app, Method::POST, &format!("{base}/agent-move"), None).await.0, StatusCode::CONFLICT);
    assert_eq!(call(&app, Method::POST, &format!("{base}/attempt"), Some(r#"{"pass":true}"#)).await.0, StatusCode::CONFLICT);
}

#[tokio::test]
async fn capacity_and_idle_eviction() {
    let st = state(2, Duration::from_secs(3600));
    let app = router(Arc::clone(&st));
    create(&app, json!({"agent_ckpt": "random"})).await;
    create(&app, json!({"agent_ckpt": "random"})).await;
    let (s, _) = call_json(&app, Method::POST, "/games", Some(json!({"agent_ckpt": "random"}))).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(st.evict_idle(Instant::now()), 0);
    assert_eq!(st.evict_idle(Instant::now() + Duration::from_secs(7200)), 2);
    assert_eq!(st.game_count(), 0);

    let st = state(1, Duration::ZERO);
    let app = router(Arc::clone(&st));
    create(&app, json!({"agent_ckpt": "random"})).await;
    // Creation sweeps the idle game first.
    create(&app, json!({"agent_ckpt": "random"})).await;
    assert_eq!(st.game_count(), 1);
}

#[tokio::test]
async fn checkpoint_agents_must_match_the_board() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.maplenet");
    let spec = GameSpec::dark_hex(3);
    let net = Network::new_random(NetConfig::for_game(&spec, 1, 4, 8), &mut ChaCha8Rng::seed_from_u64(0));
    checkpoint::save(&path, &net, None).unwrap();
    let app = router(state(8, Duration::from_secs(60)));
    let ckpt = path.to_str().unwrap();
    let (s, v) = call_json(&app, Method::POST, "/games", Some(json!({"agent_ckpt": ckpt, "size": 4}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{v}");
    let id = create(&app, json!({"agent_ckpt": ckpt, "human_seat": "second", "search": {"k": 3, "simulations": 4}})).await;
    let (s, v) = call_json(&app, Method::POST, &format!("/games/{id}/agent-move"), None).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["view"]["hidden_opponent_stones"], json!(1));
}

/// Checks a view against the referee: nothing the human cannot know is
/// present, and the bytes depend only on the human's history.
fn check_view(bytes: &[u8], history: &ObservationHistory, truth: [Vec<usize>; 2], human: PlayerId) {
    let fresh = ObservationHistory::replay(history.spec(), human, history.events(), history.outcome());
    assert_eq!(bytes, render_view(&fresh).as_slice());
    let v: Value = serde_json::from_slice(bytes).unwrap();
    let own = cells(&v["own_stones"]);
    let known = cells(&v["known_opponent_stones"]);
    assert_eq!(own, truth[human.index()]);
    let opp = &truth[human.opponent().index()];
    assert!(known.iter().all(|c| opp.contains(c)), "leaked {known:?} vs {opp:?}");
    assert_eq!(v["hidden_opponent_stones"].as_u64().unwrap() as usize, opp.len() - known.len());
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    for forbidden in ["stones\":{", "first\":[", "world", "sampled"] {
        assert!(!text.contains(forbidden), "{text}");
    }
}

#[tokio::test]
async fn hundred_game_information_hygiene_fuzz() {
    let st = state(200, Duration::from_secs(3600));
    let app = router(Arc::clone(&st));
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut hidden_refusals = 0;
    for game in 0..100u64 {
        let (name, size) = [("darkhex", 3), ("darkhex", 4), ("phantomgo", 3), ("phantomgo", 4)][game as usize % 4];
        let seat = if rng.random_bool(0.5) { "first" } else { "second" };
        let agent = if game % 5 == 0 { "rollout:8" } else { "random" };
        let id = create(&app, json!({"agent_ckpt": agent, "human_seat": seat, "game": name, "size": size, "seed": game}))
            .await;
        let base = format!("/games/{id}");
        loop {
            let (status, bytes) = call(&app, Method::GET, &format!("{base}/view"), None).await;
            assert_eq!(status, StatusCode::OK);
            let (history, truth, human, agent_refusals) = st
                .inspect(id, |g| {
                    let w = g.session.world();
                    let refusals = g
                        .session
                        .attempts()
                        .iter()
                        .filter(|a| a.actor != g.human && !a.feedback.is_legal())
                        .count();
                    (
                        g.session.history(g.human).clone(),
                        [w.stones(PlayerId::First).to_vec(), w.stones(PlayerId::Second).to_vec()],
                        g.human,
                        refusals,
                    )
                })
                .await
                .unwrap();
            check_view(&bytes, &history, truth, human);
            let v: Value = serde_json::from_slice(&bytes).unwrap();
            if !v["result"].is_null() {
                hidden_refusals += agent_refusals;
                break;
            }
            if v["your_turn"] == json!(true) {
                let area = size * size;
                let blocked: Vec<usize> =
                    [cells(&v["own_stones"]), cells(&v["tried_this_turn"])].concat();
                let mut options: Vec<Value> =
                    (0..area).filter(|c| !blocked.contains(c)).map(|c| json!({"cell": c})).collect();
                if name == "phantomgo" && rng.random_bool(0.05) || options.is_empty() {
                    options = vec![json!({"pass": true})];
                }
                let body = options.choose(&mut rng).unwrap().clone();
                let (s, r) = call_json(&app, Method::POST, &format!("{base}/attempt"), Some(body)).await;
                assert_eq!(s, StatusCode::OK, "{r}");
            } else {
                let (s, r) = call_json(&app, Method::POST, &format!("{base}/agent-move"), None).await;
                assert_eq!(s, StatusCode::OK, "{r}");
                for a in r["attempts"].as_array().unwrap() {
                    assert_eq!(a["actor"], json!("opponent"));
                    assert_eq!(a["feedback"], json!("legal"));
                    assert!(a["cell"].is_null(), "agent placement leaked: {a}");
                }
                assert!(r["attempts"].as_array().unwrap().len() <= 1);
            }
        }
        let (s, _) = call(&app, Method::GET, &format!("{base}/record"), None).await;
        assert_eq!(s, StatusCode::OK);
    }
    // The agent was refused at times, and none of it reached the human.
    assert!(hidden_refusals > 0);
}
