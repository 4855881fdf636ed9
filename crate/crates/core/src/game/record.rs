use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use super::{
    Action, BoardKey, CellSet, GameError, GameKind, GameOutcome, GameResult, GameSpec, MoveFeedback,
    ObservationHistory, PlayerId, WorldState,
};

/// One adjudicated attempt.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttemptLine {
    pub turn: u32,
    pub actor: PlayerId,
    pub action: Action,
    pub feedback: MoveFeedback,
}

/// Omniscient referee for one game: the true world plus both players' views.
#[derive(Clone, Debug)]
pub struct GameSession {
    spec: GameSpec,
    seed: u64,
    world: WorldState,
    histories: [ObservationHistory; 2],
    attempts: Vec<AttemptLine>,
    outcome: Option<GameOutcome>,
    forfeit: bool,
}

impl GameSession {
    pub fn new(spec: GameSpec, seed: u64) -> Result<Self, GameError> {
        Ok(GameSession {
            spec,
            seed,
            world: spec.initial_world()?,
            histories: [
                ObservationHistory::new(spec, PlayerId::First),
                ObservationHistory::new(spec, PlayerId::Second),
            ],
            attempts: Vec::new(),
            outcome: None,
            forfeit: false,
        })
    }

    pub fn spec(&self) -> GameSpec {
        self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn history(&self, player: PlayerId) -> &ObservationHistory {
        &self.histories[player.index()]
    }

    pub fn attempts(&self) -> &[AttemptLine] {
        &self.attempts
    }

    pub fn outcome(&self) -> Option<GameOutcome> {
        self.outcome
    }

    pub fn is_over(&self) -> bool {
        self.outcome.is_some()
    }

    /// True when the game ended because a player exhausted their attempts.
    pub fn forfeited(&self) -> bool {
        self.forfeit
    }

    pub fn to_play(&self) -> PlayerId {
        self.world.to_play()
    }

    /// Adjudicates one attempt and delivers the events. A player refused
    /// `area` times in one turn forfeits.
    pub fn attempt(&mut self, actor: PlayerId, action: Action) -> Result<MoveFeedback, GameError> {
        if self.is_over() {
            return Err(GameError::GameOver);
        }
        let turn = self.world.move_number();
        let result = self.world.apply_attempt(actor, action)?;
        for (h, e) in self.histories.iter_mut().zip(result.events) {
            if let Some(e) = e {
                h.push(e);
            }
        }
        self.attempts.push(AttemptLine { turn, actor, action, feedback: result.feedback.clone() });
        self.world = result.next;
        if let Some(outcome) = self.world.terminal_outcome() {
            self.finish(outcome);
        } else if self.histories[actor.index()].attempts_this_turn() as usize >= self.spec.area() {
            self.forfeit = true;
            self.finish(GameOutcome::win(actor.opponent()));
        }
        Ok(result.feedback)
    }

    fn finish(&mut self, outcome: GameOutcome) {
        self.outcome = Some(outcome);
        for h in &mut self.histories {
            h.set_outcome(outcome);
        }
    }

    pub fn record(&self) -> GameRecord {
        GameRecord {
            spec: self.spec,
            seed: self.seed,
            attempts: self.attempts.clone(),
            sampled: Vec::new(),
            outcome: self.outcome,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RecordError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing `{0}` header")]
    MissingHeader(&'static str),
    #[error("line {line}: recorded feedback `{recorded}` but the referee says `{actual}`")]
    FeedbackMismatch { line: usize, recorded: String, actual: String },
    #[error("replay failed: {0}")]
    Game(#[from] GameError),
}

/// Text form of a finished (or unfinished) game.
#[derive(Clone, Debug, PartialEq)]
pub struct GameRecord {
    pub spec: GameSpec,
    pub seed: u64,
    pub attempts: Vec<AttemptLine>,
    /// Logged determinizations: (candidate index, stones).
    pub sampled: Vec<(usize, BoardKey)>,
    pub outcome: Option<GameOutcome>,
}

fn cells_text(cells: impl IntoIterator<Item = usize>) -> String {
    cells.into_iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_cells(text: &str) -> Result<Vec<usize>, String> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|c| c.parse::<usize>().map_err(|_| format!("bad cell `{c}`")))
        .collect()
}

/// `sampled=` lines for a candidate set.
pub fn format_candidates(worlds: &[WorldState]) -> String {
    let mut out = String::new();
    for (i, w) in worlds.iter().enumerate() {
        let BoardKey([first, second]) = w.board_key();
        let _ = writeln!(out, "sampled={i} first={} second={}", cells_text(first.iter()), cells_text(second.iter()));
    }
    out
}

impl GameRecord {
    /// Re-adjudicates every attempt, checking the recorded feedback.
    pub fn replay(&self) -> Result<GameSession, RecordError> {
        let mut session = GameSession::new(self.spec, self.seed)?;
        for (i, a) in self.attempts.iter().enumerate() {
            let actual = session.attempt(a.actor, a.action)?;
            if actual != a.feedback {
                return Err(RecordError::FeedbackMismatch {
                    line: i + 1,
                    recorded: a.feedback.token().to_string(),
                    actual: actual.token().to_string(),
                });
            }
        }
        Ok(session)
    }
}

impl fmt::Display for GameRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "game={}", self.spec.kind)?;
        writeln!(f, "size={}", self.spec.size)?;
        if self.spec.kind == GameKind::PhantomGo && self.spec.komi != GameSpec::phantom_go(self.spec.size).komi {
            writeln!(f, "komi={}", self.spec.komi)?;
        }
        writeln!(f, "seed={}", self.seed)?;
        for a in &self.attempts {
            writeln!(
                f,
                "t={} actor={} action={} feedback={} captured={}",
                a.turn,
                a.actor.index(),
                a.action,
                a.feedback.token(),
                cells_text(a.feedback.captured().iter().copied())
            )?;
        }
        for (i, BoardKey([first, second])) in &self.sampled {
            writeln!(f, "sampled={i} first={} second={}", cells_text(first.iter()), cells_text(second.iter()))?;
        }
        if let Some(outcome) = &self.outcome {
            let result = match outcome.result {
                GameResult::Win(PlayerId::First) => "first",
                GameResult::Win(PlayerId::Second) => "second",
                GameResult::Draw => "draw",
            };
            writeln!(f, "result={result} margin={}", outcome.score_margin.unwrap_or(0.0))?;
        }
        Ok(())
    }
}

fn fields(line: &str) -> impl Iterator<Item = (&str, &str)> {
    line.split_whitespace().map(|tok| tok.split_once('=').unwrap_or((tok, "")))
}

impl FromStr for GameRecord {
    type Err = RecordError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut kind = None;
        let mut size = None;
        let mut komi = None;
        let mut seed = None;
        let mut attempts = Vec::new();
        let mut sampled = Vec::new();
        let mut outcome = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let syntax = |message: String| RecordError::Syntax { line: line_no, message };
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let map: Vec<(&str, &str)> = fields(line).collect();
            let get = |key: &str| {
                map.iter()
                    .find(|(k, _)| *k == key)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| syntax(format!("missing `{key}=`")))
            };
            match map[0].0 {
                "game" => kind = Some(map[0].1.parse::<GameKind>().map_err(syntax)?),
                "size" => size = Some(map[0].1.parse::<usize>().map_err(|e| syntax(e.to_string()))?),
                "komi" => komi = Some(map[0].1.parse::<f64>().map_err(|e| syntax(e.to_string()))?),
                "seed" => seed = Some(map[0].1.parse::<u64>().map_err(|e| syntax(e.to_string()))?),
                "t" => {
                    let turn = get("t")?.parse::<u32>().map_err(|e| syntax(e.to_string()))?;
                    let actor = match get("actor")? {
                        "0" => PlayerId::First,
                        "1" => PlayerId::Second,
                        other => return Err(syntax(format!("bad actor `{other}`"))),
                    };
                    let action = get("action")?.parse::<Action>().map_err(syntax)?;
                    let captured = parse_cells(get("captured")?).map_err(syntax)?;
                    let feedback = match get("feedback")? {
                        "legal" => MoveFeedback::Legal { captured },
                        "occupied" => MoveFeedback::IllegalOccupied,
                        "suicide" => MoveFeedback::IllegalSuicide,
                        "ko" => MoveFeedback::IllegalKo,
                        other => return Err(syntax(format!("bad feedback `{other}`"))),
                    };
                    attempts.push(AttemptLine { turn, actor, action, feedback });
                }
                "sampled" => {
                    let i = get("sampled")?.parse::<usize>().map_err(|e| syntax(e.to_string()))?;
                    let first: CellSet = parse_cells(get("first")?).map_err(syntax)?.into_iter().collect();
                    let second: CellSet = parse_cells(get("second")?).map_err(syntax)?.into_iter().collect();
                    sampled.push((i, BoardKey([first, second])));
                }
                "result" => {
                    let result = match get("result")? {
                        "first" => GameResult::Win(PlayerId::First),
                        "second" => GameResult::Win(PlayerId::Second),
                        "draw" => GameResult::Draw,
                        other => return Err(syntax(format!("bad result `{other}`"))),
                    };
                    let margin = get("margin")?.parse::<f64>().map_err(|e| syntax(e.to_string()))?;
                    outcome = Some((result, margin));
                }
                other => return Err(syntax(format!("unknown field `{other}`"))),
            }
        }
        let kind = kind.ok_or(RecordError::MissingHeader("game"))?;
        let size = size.ok_or(RecordError::MissingHeader("size"))?;
        let seed = seed.ok_or(RecordError::MissingHeader("seed"))?;
        let mut spec = match kind {
            GameKind::DarkHex => GameSpec::dark_hex(size),
            GameKind::PhantomGo => GameSpec::phantom_go(size),
        };
        if let Some(komi) = komi {
            spec.komi = komi;
        }
        let outcome = outcome.map(|(result, margin)| GameOutcome {
            result,
            score_margin: (kind == GameKind::PhantomGo).then_some(margin),
        });
        Ok(GameRecord { spec, seed, attempts, sampled, outcome })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_record_round_trip_and_replay() {
        let mut s = GameSession::new(GameSpec::dark_hex(3), 7).unwrap();
        use PlayerId::*;
        for (p, c) in [(First, 1), (Second, 1), (Second, 0), (First, 4), (Second, 3), (First, 7)] {
            s.attempt(p, Action::Place(c)).unwrap();
        }
        assert_eq!(s.outcome().unwrap().winner(), Some(First));
        let text = s.record().to_string();
        assert!(text.starts_with("game=darkhex\nsize=3\nseed=7\n"));
        assert!(text.contains("t=1 actor=1 action=1 feedback=occupied captured=\n"));
        assert!(text.ends_with("result=first margin=0\n"));
        let parsed: GameRecord = text.parse().unwrap();
        assert_eq!(parsed, s.record());
        let replayed = parsed.replay().unwrap();
        assert_eq!(replayed.world(), s.world());
        assert_eq!(replayed.history(Second), s.history(Second));
    }

    #[test]
    fn go_record_keeps_captures_and_margin() {
        let mut s = GameSession::new(GameSpec::phantom_go(3), 1).unwrap();
        use PlayerId::*;
        for (p, a) in [
            (First, Action::Place(1)),
            (Second, Action::Place(0)),
            (First, Action::Place(3)),
            (Second, Action::Pass),
            (First, Action::Pass),
        ] {
            s.attempt(p, a).unwrap();
        }
        let rec = s.record();
        let text = rec.to_string();
        assert!(text.contains("action=3 feedback=legal captured=0\n"));
        let parsed: GameRecord = text.parse().unwrap();
        assert_eq!(parsed, rec);
        assert_eq!(parsed.outcome.unwrap().score_margin, Some(8.0));
    }

    #[test]
    fn tampered_feedback_is_caught() {
        let text = "game=darkhex\nsize=2\nseed=0\nt=0 actor=0 action=0 feedback=occupied captured=\n";
        let rec: GameRecord = text.parse().unwrap();
        assert!(matches!(rec.replay(), Err(RecordError::FeedbackMismatch { line: 1, .. })));
        assert!(matches!("size=2\nseed=0\n".parse::<GameRecord>(), Err(RecordError::MissingHeader("game"))));
        assert!(matches!("game=chess\n".parse::<GameRecord>(), Err(RecordError::Syntax { line: 1, .. })));
    }

    #[test]
    fn sampled_lines_round_trip() {
        let w = GameSpec::dark_hex(2).initial_world().unwrap().play(Action::Place(2)).unwrap();
        let text = format!("game=darkhex\nsize=2\nseed=3\n{}", format_candidates(std::slice::from_ref(&w)));
        let rec: GameRecord = text.parse().unwrap();
        assert_eq!(rec.sampled, vec![(0, w.board_key())]);
        assert_eq!(rec.to_string(), text);
    }
}
