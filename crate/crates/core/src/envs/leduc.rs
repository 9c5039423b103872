//! Leduc Hold'em.
//!
//! Six-card deck (J, Q, K in two suits), 1-chip ante per player, two
//! betting rounds with fixed bet sizes 2 then 4 and at most two raises per
//! round. One public card is revealed before round two. At showdown a pair
//! with the public card beats everything, otherwise the higher private
//! rank wins and equal ranks split. Payoffs are signed chips won; the big
//! blind unit is 2 chips.
//!
//! The betting tree lives in [`HandState`] as a pure value type so that
//! tournaments, the training wrapper, and exhaustive tree walks all share
//! one rule set.
//!
//! Observation encoding (36 dims, from the acting player's view):
//!   - `[0..6)`   one-hot private card identity;
//!   - `[6..13)`  one-hot public card, index 12 = not yet revealed;
//!   - `[13..15)` one-hot betting round;
//!   - `[15..36)` pot-contribution bucket: own total contribution `c`
//!     (always odd, 1..=13) and outstanding amount to call
//!     `t in {0, 2, 4}` give bucket `((c - 1) / 2) * 3 + t / 2`,
//!     a single one-hot among 21.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Action, ActionSpace, Env, EnvId, EnvState, StepResult};
use crate::error::{Error, Result};

pub const NUM_CARDS: usize = 6;
pub const OBS_DIM: usize = 36;
pub const NUM_ACTIONS: usize = 3;
pub const ACT_FOLD: usize = 0;
pub const ACT_CALL: usize = 1;
pub const ACT_RAISE: usize = 2;
pub const ANTE: u32 = 1;
pub const BET_SIZES: [u32; 2] = [2, 4];
pub const MAX_RAISES_PER_ROUND: u32 = 2;
/// The big blind unit used by the mbb/h metric.
pub const BIG_BLIND_CHIPS: f64 = 2.0;

/// Card rank: 0 = J, 1 = Q, 2 = K (card identity / 2).
pub fn card_rank(card: usize) -> usize {
    card / 2
}

/// The dealt cards of one hand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Deal {
    pub private: [usize; 2],
    pub public: usize,
}

impl Deal {
    /// Draws a deal by shuffling the 6-card deck.
    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Deal {
        let mut deck: Vec<usize> = (0..NUM_CARDS).collect();
        deck.shuffle(rng);
        Deal { private: [deck[0], deck[1]], public: deck[2] }
    }

    /// The same physical cards with the two private holdings swapped,
    /// used for duplicate-style mirrored tournaments.
    pub fn mirrored(&self) -> Deal {
        Deal { private: [self.private[1], self.private[0]], public: self.public }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Fold { folder: usize },
    Showdown,
}

/// Full state of one hand; a pure value (no RNG inside).
#[derive(Debug, Clone, PartialEq)]
pub struct HandState {
    pub deal: Deal,
    pub round: usize,
    pub to_act: usize,
    /// Total chips contributed by each player, antes included.
    pub contributions: [u32; 2],
    /// Chips contributed in the current betting round.
    round_bets: [u32; 2],
    raises_this_round: u32,
    /// True once the first player of the round has checked.
    checked_once: bool,
    pub public_revealed: bool,
    pub terminal: Option<Terminal>,
}

impl HandState {
    pub fn new(deal: Deal) -> HandState {
        HandState {
            deal,
            round: 0,
            to_act: 0,
            contributions: [ANTE, ANTE],
            round_bets: [0, 0],
            raises_this_round: 0,
            checked_once: false,
            public_revealed: false,
            terminal: None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal.is_some()
    }

    /// Outstanding chips the acting player must add to continue.
    pub fn to_call(&self) -> u32 {
        let me = self.to_act;
        self.round_bets[1 - me] - self.round_bets[me]
    }

    /// Legal-action mask over [fold, call/check, raise]. Folding with no
    /// outstanding bet is illegal (that situation is a check).
    pub fn legal_mask(&self) -> Vec<bool> {
        if self.is_terminal() {
            return vec![false; NUM_ACTIONS];
        }
        let facing_bet = self.to_call() > 0;
        let can_raise = self.raises_this_round < MAX_RAISES_PER_ROUND;
        vec![facing_bet, true, can_raise]
    }

    /// Applies `action` for the acting player. Illegal actions error and
    /// are never remapped.
    pub fn apply(&self, action: usize) -> Result<HandState> {
        if self.is_terminal() {
            return Err(Error::state("action on a finished hand"));
        }
        if action >= NUM_ACTIONS || !self.legal_mask()[action] {
            return Err(Error::config(format!(
                "illegal action {action} (mask {:?})",
                self.legal_mask()
            )));
        }
        let mut next = self.clone();
        let me = self.to_act;
        match action {
            ACT_FOLD => {
                next.terminal = Some(Terminal::Fold { folder: me });
            }
            ACT_CALL => {
                let call = self.to_call();
                next.round_bets[me] += call;
                next.contributions[me] += call;
                let closes = if call > 0 {
                    true // calling a bet always closes the round
                } else if self.checked_once {
                    true // second check closes the round
                } else {
                    next.checked_once = true;
                    false
                };
                if closes {
                    next.advance_round();
                } else {
                    next.to_act = 1 - me;
                }
            }
            ACT_RAISE => {
                let call = self.to_call();
                let add = call + BET_SIZES[self.round];
                next.round_bets[me] += add;
                next.contributions[me] += add;
                next.raises_this_round += 1;
                next.to_act = 1 - me;
            }
            _ => unreachable!(),
        }
        Ok(next)
    }

    fn advance_round(&mut self) {
        if self.round == 0 {
            self.round = 1;
            self.public_revealed = true;
            self.round_bets = [0, 0];
            self.raises_this_round = 0;
            self.checked_once = false;
            self.to_act = 0;
        } else {
            self.terminal = Some(Terminal::Showdown);
        }
    }

    /// Signed chip payoffs for both players at a terminal state.
    pub fn payoffs(&self) -> Result<[f64; 2]> {
        let terminal = self
            .terminal
            .ok_or_else(|| Error::state("payoffs requested before the hand ended"))?;
        let win = |w: usize| -> [f64; 2] {
            let mut p = [0.0; 2];
            p[w] = f64::from(self.contributions[1 - w]);
            p[1 - w] = -f64::from(self.contributions[1 - w]);
            p
        };
        match terminal {
            Terminal::Fold { folder } => Ok(win(1 - folder)),
            Terminal::Showdown => {
                let pub_rank = card_rank(self.deal.public);
                let ranks = [card_rank(self.deal.private[0]), card_rank(self.deal.private[1])];
                let paired = [ranks[0] == pub_rank, ranks[1] == pub_rank];
                match (paired[0], paired[1]) {
                    (true, false) => Ok(win(0)),
                    (false, true) => Ok(win(1)),
                    // Both pairing is impossible with one public card; equal
                    // ranks split the pot.
                    _ => {
                        if ranks[0] > ranks[1] {
                            Ok(win(0))
                        } else if ranks[1] > ranks[0] {
                            Ok(win(1))
                        } else {
                            Ok([0.0, 0.0])
                        }
                    }
                }
            }
        }
    }

    /// Encodes the state from `player`'s perspective (36 dims).
    pub fn encode(&self, player: usize) -> Vec<f64> {
        let mut obs = vec![0.0; OBS_DIM];
        obs[self.deal.private[player]] = 1.0;
        if self.public_revealed {
            obs[6 + self.deal.public] = 1.0;
        } else {
            obs[12] = 1.0;
        }
        obs[13 + self.round] = 1.0;
        let own = self.contributions[player];
        let to_call = if self.is_terminal() || self.to_act != player {
            0
        } else {
            self.to_call()
        };
        let bucket = ((own - 1) / 2) * 3 + to_call / 2;
        obs[15 + bucket.min(20) as usize] = 1.0;
        obs
    }
}

/// Single-agent training wrapper: the agent owns one seat, the other seat
/// is played by a uniform-random legal opponent. Reward is the agent's
/// signed chip payoff, delivered only at the terminal step.
pub struct LeducEnv {
    hand: HandState,
    agent_seat: usize,
    opponent_rng: rand_chacha::ChaCha8Rng,
    done: bool,
}

impl LeducEnv {
    pub fn new() -> Self {
        LeducEnv {
            hand: HandState::new(Deal { private: [0, 1], public: 2 }),
            agent_seat: 0,
            opponent_rng: crate::rng::stream(0, "env.leduc.opponent"),
            done: true,
        }
    }

    pub fn agent_seat(&self) -> usize {
        self.agent_seat
    }

    /// Chooses which seat the agent occupies for subsequent hands.
    pub fn set_agent_seat(&mut self, seat: usize) {
        self.agent_seat = seat % 2;
    }

    fn state(&self) -> EnvState {
        EnvState {
            obs: self.hand.encode(self.agent_seat),
            done: self.done,
            legal_mask: if self.done { vec![false; NUM_ACTIONS] } else { self.hand.legal_mask() },
            current_player: Some(self.hand.to_act),
        }
    }

    /// Plays the opponent until it is the agent's turn or the hand ends.
    fn run_opponent(&mut self) {
        while !self.hand.is_terminal() && self.hand.to_act != self.agent_seat {
            let mask = self.hand.legal_mask();
            let legal: Vec<usize> =
                (0..NUM_ACTIONS).filter(|&a| mask[a]).collect();
            let pick = legal[self.opponent_rng.gen_range(0..legal.len())];
            self.hand = self.hand.apply(pick).expect("legal action");
        }
    }
}

impl Default for LeducEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for LeducEnv {
    fn id(&self) -> EnvId {
        EnvId::Leduc
    }

    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    fn action_space(&self) -> ActionSpace {
        ActionSpace::Discrete { n: NUM_ACTIONS }
    }

    fn reset(&mut self, seed: u64) -> EnvState {
        let mut deal_rng = crate::rng::stream(seed, "env.leduc.deal");
        self.opponent_rng = crate::rng::stream(seed, "env.leduc.opponent");
        self.hand = HandState::new(Deal::draw(&mut deal_rng));
        self.done = false;
        self.run_opponent();
        debug_assert!(!self.hand.is_terminal());
        self.state()
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::state("step after hand end"));
        }
        let a = action.discrete()?;
        if self.hand.to_act != self.agent_seat {
            return Err(Error::state("not the agent's turn"));
        }
        self.hand = self.hand.apply(a)?;
        self.run_opponent();
        let reward = if self.hand.is_terminal() {
            self.done = true;
            self.hand.payoffs()?[self.agent_seat]
        } else {
            0.0
        };
        Ok(StepResult { state: self.state(), reward })
    }

    fn max_episode_steps(&self) -> usize {
        // At most 2 raises + closing actions per round from one seat.
        8
    }

    fn set_agent_seat(&mut self, seat: usize) {
        LeducEnv::set_agent_seat(self, seat);
    }
}
