//! HTTP match service: one human against one agent per game, with the
//! human served only their own fog-of-war view.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use maple_core::agent::{play_turn, Agent};
use maple_core::game::{
    Action, CellSet, GameKind, GameResult, GameSession, GameSpec, ObservationHistory, PlayerId,
};
use maple_core::search::{Algorithm, SamplerKind, SearchConfig};
use maple_core::seeds::derive_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex as GameLock;

use crate::agents::{parse_agent, NetCache};

pub const IDLE_LIMIT: Duration = Duration::from_secs(24 * 60 * 60);

pub struct ServerSettings {
    pub game: GameSpec,
    pub search: SearchConfig,
    pub max_games: usize,
    pub idle_limit: Duration,
    pub seed: u64,
}

pub struct GameEntry {
    pub session: GameSession,
    pub human: PlayerId,
    agent: Agent,
    rng: ChaCha8Rng,
    touched: Instant,
}

pub struct AppState {
    settings: ServerSettings,
    games: Mutex<HashMap<u64, Arc<GameLock<GameEntry>>>>,
    next_id: AtomicU64,
    nets: NetCache,
}

impl AppState {
    pub fn new(settings: ServerSettings) -> Arc<AppState> {
        Arc::new(AppState {
            settings,
            games: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            nets: NetCache::default(),
        })
    }

    fn entry(&self, id: u64) -> Result<Arc<GameLock<GameEntry>>, ApiError> {
        self.games.lock().unwrap().get(&id).cloned().ok_or(ApiError::NotFound(id))
    }

    /// Runs `f` on a game's referee state. For tests and tooling.
    pub async fn inspect<T>(&self, id: u64, f: impl FnOnce(&GameEntry) -> T) -> Option<T> {
        let entry = self.entry(id).ok()?;
        let guard = entry.lock().await;
        Some(f(&guard))
    }

    pub fn game_count(&self) -> usize {
        self.games.lock().unwrap().len()
    }

    /// Drops games untouched for longer than the idle limit. Games whose
    /// lock is held are in use and kept.
    pub fn evict_idle(&self, now: Instant) -> usize {
        let mut games = self.games.lock().unwrap();
        let before = games.len();
        games.retain(|_, g| match g.try_lock() {
            Ok(entry) => now.duration_since(entry.touched) < self.settings.idle_limit,
            Err(_) => true,
        });
        before - games.len()
    }
}

#[derive(Debug)]
enum ApiError {
    NotFound(u64),
    BadRequest(String),
    Conflict(String),
    Full(usize),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::NotFound(id) => (StatusCode::NOT_FOUND, format!("no game {id}")),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Full(n) => (StatusCode::SERVICE_UNAVAILABLE, format!("server holds its maximum of {n} games")),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({ "error": message }))).into_response()
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("malformed body: {e}")))
}

fn seat_name(p: PlayerId) -> &'static str {
    match p {
        PlayerId::First => "first",
        PlayerId::Second => "second",
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchOverrides {
    algorithm: Option<String>,
    sampler: Option<String>,
    simulations: Option<u32>,
    k: Option<usize>,
    m: Option<usize>,
    c_puct: Option<f64>,
    temperature_moves: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateGame {
    game: Option<String>,
    size: Option<usize>,
    komi: Option<f64>,
    human_seat: Option<String>,
    /// `random`, `rollout:<n>` or a checkpoint path.
    agent_ckpt: String,
    search: Option<SearchOverrides>,
    seed: Option<u64>,
}

fn apply_overrides(base: &SearchConfig, o: Option<SearchOverrides>) -> Result<SearchConfig, ApiError> {
    let mut c = base.clone();
    let Some(o) = o else { return Ok(c) };
    if let Some(a) = o.algorithm {
        c.algorithm = match a.as_str() {
            "maple" => Algorithm::Maple,
            "pimc" => Algorithm::Pimc,
            _ => return Err(ApiError::BadRequest(format!("unknown algorithm `{a}`"))),
        };
    }
    if let Some(s) = o.sampler {
        c.sampler = match s.as_str() {
            "random" => SamplerKind::Random,
            "siamese" => SamplerKind::Siamese,
            _ => return Err(ApiError::BadRequest(format!("unknown sampler `{s}`"))),
        };
    }
    c.simulations = o.simulations.unwrap_or(c.simulations);
    c.k = o.k.unwrap_or(c.k);
    c.m = o.m.unwrap_or(c.m.max(c.k));
    c.c_puct = o.c_puct.unwrap_or(c.c_puct);
    c.temperature_moves = o.temperature_moves.or(c.temperature_moves);
    c.validate().map_err(ApiError::BadRequest)?;
    Ok(c)
}

#[derive(Serialize)]
struct EventView {
    actor: &'static str,
    /// The attempted cell when the viewer is entitled to see it.
    cell: Option<usize>,
    pass: bool,
    feedback: Option<&'static str>,
    captured: Vec<usize>,
}

#[derive(Serialize)]
struct ResultView {
    winner: Option<&'static str>,
    outcome: &'static str,
    score_margin: Option<f64>,
}

/// The human's view. Built from their observation history alone.
#[derive(Serialize)]
struct View {
    game: &'static str,
    size: usize,
    seat: &'static str,
    to_move: &'static str,
    your_turn: bool,
    move_number: u32,
    own_stones: Vec<usize>,
    known_opponent_stones: Vec<usize>,
    hidden_opponent_stones: usize,
    tried_cells: Vec<usize>,
    tried_this_turn: Vec<usize>,
    revealed_captures: Vec<usize>,
    last_feedback: Option<EventView>,
    result: Option<ResultView>,
}

fn cells(set: CellSet) -> Vec<usize> {
    set.to_vec()
}

fn event_view(h: &ObservationHistory, e: &maple_core::game::ObservationEvent) -> EventView {
    EventView {
        actor: if e.actor == h.viewer() { "you" } else { "opponent" },
        cell: e.visible_action.and_then(Action::cell),
        pass: e.visible_action == Some(Action::Pass),
        feedback: e.feedback.as_ref().map(|f| f.token()),
        captured: e.feedback.as_ref().map(|f| f.captured().to_vec()).unwrap_or_default(),
    }
}

fn view_of(h: &ObservationHistory) -> View {
    let spec = h.spec();
    View {
        game: spec.kind.name(),
        size: spec.size,
        seat: seat_name(h.viewer()),
        to_move: seat_name(h.to_play()),
        your_turn: !h.is_over() && h.to_play() == h.viewer(),
        move_number: h.move_number(),
        own_stones: cells(h.own_stones()),
        known_opponent_stones: cells(h.known_opponent_stones()),
        hidden_opponent_stones: h.hidden_opponent_count(),
        tried_cells: cells(h.tried_cells()),
        tried_this_turn: cells(h.tried_this_turn()),
        revealed_captures: cells(h.revealed_captures()),
        last_feedback: h.events().last().map(|e| event_view(h, e)),
        result: h.outcome().map(|o| ResultView {
            winner: o.winner().map(seat_name),
            outcome: match o.result {
                GameResult::Draw => "draw",
                GameResult::Win(p) if p == h.viewer() => "win",
                GameResult::Win(_) => "loss",
            },
            score_margin: o.score_margin,
        }),
    }
}

/// JSON bytes of the view for `history`.
pub fn render_view(history: &ObservationHistory) -> Vec<u8> {
    serde_json::to_vec(&view_of(history)).expect("views serialize")
}

fn view_response(h: &ObservationHistory) -> serde_json::Value {
    serde_json::to_value(view_of(h)).expect("views serialize")
}

async fn create_game(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateGame = parse_body(&body)?;
    let s = &state.settings;
    let kind = match &req.game {
        Some(name) => name.parse::<GameKind>().map_err(ApiError::BadRequest)?,
        None => s.game.kind,
    };
    let mut game = match kind {
        GameKind::DarkHex => GameSpec::dark_hex(s.game.size),
        GameKind::PhantomGo => GameSpec::phantom_go(s.game.size),
    };
    if kind == s.game.kind {
        game = s.game;
    }
    if let Some(size) = req.size {
        game.size = size;
    }
    if let Some(komi) = req.komi {
        if kind != GameKind::PhantomGo {
            return Err(ApiError::BadRequest("komi applies to phantomgo only".into()));
        }
        game.komi = komi;
    }
    game.validate().map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let human = match req.human_seat.as_deref() {
        None | Some("first") => PlayerId::First,
        Some("second") => PlayerId::Second,
        Some(other) => return Err(ApiError::BadRequest(format!("human_seat `{other}` is not first or second"))),
    };
    let search = apply_overrides(&s.search, req.search)?;
    let agent =
        parse_agent(&req.agent_ckpt, &game, &search, &state.nets).map_err(|e| ApiError::BadRequest(e.to_string()))?;

    state.evict_idle(Instant::now());
    let id = state.next_id.fetch_add(1, Ordering::Relaxed);
    let seed = req.seed.unwrap_or_else(|| derive_seed(s.seed, &[id]));
    let session = GameSession::new(game, seed).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let entry = GameEntry {
        session,
        human,
        agent,
        rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1])),
        touched: Instant::now(),
    };
    {
        let mut games = state.games.lock().unwrap();
        if games.len() >= s.max_games {
            return Err(ApiError::Full(s.max_games));
        }
        games.insert(id, Arc::new(GameLock::new(entry)));
    }
    Ok((StatusCode::CREATED, Json(json!({ "game_id": id }))).into_response())
}

async fn get_view(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    let entry = state.entry(id)?;
    let mut g = entry.lock().await;
    g.touched = Instant::now();
    let bytes = render_view(g.session.history(g.human));
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AttemptBody {
    cell: Option<usize>,
    pass: Option<bool>,
}

async fn attempt(State(state): State<Arc<AppState>>, Path(id): Path<u64>, body: Bytes) -> Result<Response, ApiError> {
    let req: AttemptBody = parse_body(&body)?;
    let action = match (req.cell, req.pass) {
        (Some(cell), None | Some(false)) => Action::Place(cell),
        (None, Some(true)) => Action::Pass,
        _ => return Err(ApiError::BadRequest("give exactly one of `cell` or `pass: true`".into())),
    };
    let entry = state.entry(id)?;
    let mut g = entry.lock().await;
    g.touched = Instant::now();
    let spec = g.session.spec();
    match action {
        Action::Place(cell) if cell >= spec.area() => {
            return Err(ApiError::BadRequest(format!("cell {cell} is outside a board of {} cells", spec.area())))
        }
        Action::Pass if spec.kind == GameKind::DarkHex => {
            return Err(ApiError::BadRequest("pass is not an action in dark hex".into()))
        }
        _ => {}
    }
    if g.session.is_over() {
        return Err(ApiError::Conflict("the game is over".into()));
    }
    if g.session.to_play() != g.human {
        return Err(ApiError::Conflict("it is the agent's turn".into()));
    }
    let human = g.human;
    let feedback = g.session.attempt(human, action).map_err(|e| ApiError::Internal(e.to_string()))?;
    let h = g.session.history(human);
    Ok(Json(json!({
        "feedback": feedback.token(),
        "captured": feedback.captured(),
        "view": view_response(h),
    }))
    .into_response())
}

async fn agent_move(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    let entry = state.entry(id)?;
    let mut g = entry.lock_owned().await;
    g.touched = Instant::now();
    if g.session.is_over() {
        return Err(ApiError::Conflict("the game is over".into()));
    }
    if g.session.to_play() == g.human {
        return Err(ApiError::Conflict("it is the human's turn".into()));
    }
    let body = tokio::task::spawn_blocking(move || {
        let GameEntry { session, human, agent, rng, .. } = &mut *g;
        let seen = session.history(*human).events().len();
        play_turn(session, agent, rng, |_, _| {}).map_err(|e| ApiError::Internal(e.to_string()))?;
        // The human hears about the agent's turn only through their own
        // observation events: refused attempts stay silent.
        let h = session.history(*human);
        let attempts: Vec<EventView> = h.events()[seen..].iter().map(|e| event_view(h, e)).collect();
        Ok::<_, ApiError>(json!({ "attempts": attempts, "view": view_response(h) }))
    })
    .await
    .map_err(|e| ApiError::Internal(format!("agent task failed: {e}")))??;
    Ok(Json(body).into_response())
}

async fn get_record(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<Response, ApiError> {
    let entry = state.entry(id)?;
    let mut g = entry.lock().await;
    g.touched = Instant::now();
    if !g.session.is_over() {
        return Err(ApiError::Conflict("the record is available once the game ends".into()));
    }
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], g.session.record().to_string()).into_response())
}

async fn delete_game(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> Result<StatusCode, ApiError> {
    match state.games.lock().unwrap().remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT),
        None => Err(ApiError::NotFound(id)),
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/games", post(create_game))
        .route("/games/{id}", axum::routing::delete(delete_game))
        .route("/games/{id}/view", get(get_view))
        .route("/games/{id}/attempt", post(attempt))
        .route("/games/{id}/agent-move", post(agent_move))
        .route("/games/{id}/record", get(get_record))
        .with_state(state)
}

/// Serves until ctrl-c, sweeping idle games once a minute.
pub async fn serve(settings: ServerSettings, port: u16) -> std::io::Result<()> {
    let state = AppState::new(settings);
    let sweeper = Arc::clone(&state);
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(60));
        loop {
            tick.tick().await;
            sweeper.evict_idle(Instant::now());
        }
    });
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
