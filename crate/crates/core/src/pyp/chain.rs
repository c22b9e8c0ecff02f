//! Seating operations along a back-off chain of restaurants.
//!
//! A chain is given leaf first; the last level backs off to a terminal base
//! probability supplied by the caller. Opening a table at one level sends a
//! customer with the same dish to the next level.

use rand::Rng;
use smallvec::SmallVec;

use super::restaurant::{level_predictive, Dish};
use super::store::{Move, RestId, SeatingDelta, SeatingStore};
use super::PypParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub rest: RestId,
    pub params: PypParams,
}

impl Level {
    pub fn new(rest: RestId, params: PypParams) -> Self {
        Level { rest, params }
    }
}

/// Predictive probability of `dish` at the leaf of `chain`.
pub fn predictive<D: Dish, S: SeatingStore<D>>(
    store: &S,
    chain: &[Level],
    dish: D,
    base: f64,
) -> f64 {
    chain.iter().rev().fold(base, |parent, lvl| {
        let (n, k) = store.totals(lvl.rest);
        let (nd, td) = store.dish_counts(lvl.rest, dish);
        level_predictive(n, k, nd, td, lvl.params, parent)
    })
}

/// Result of seating one customer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seated {
    /// A new table was opened at the last level, so the terminal base
    /// distribution must absorb a draw of the dish.
    pub opened_root: bool,
    /// Log probability of the chosen seating path (specific table at every
    /// level, terminal base draw included when `opened_root`).
    pub log_prob: f64,
    /// Log predictive probability of the dish just before seating.
    pub log_predictive: f64,
}

/// Decides where a customer sits at one level of a chain.
pub trait Chooser<D> {
    /// `n` customers are seated in `rest`; `join` is the total weight of the
    /// dish's existing tables (sizes in `sizes`, discount `discount`) and
    /// `open` the weight of a new table. Returns the size of the table to
    /// join, or `None` to open a new one.
    #[allow(clippy::too_many_arguments)]
    fn choose(
        &mut self,
        rest: RestId,
        dish: D,
        n: u32,
        sizes: &[(u32, u32)],
        discount: f64,
        join: f64,
        open: f64,
    ) -> Option<u32>;
}

/// Samples seating decisions from their conditional probabilities.
pub struct Sampling<'r, R: ?Sized>(pub &'r mut R);

impl<D, R: Rng + ?Sized> Chooser<D> for Sampling<'_, R> {
    fn choose(
        &mut self,
        _rest: RestId,
        _dish: D,
        n: u32,
        sizes: &[(u32, u32)],
        discount: f64,
        join: f64,
        open: f64,
    ) -> Option<u32> {
        if n == 0 {
            return None;
        }
        let u = self.0.random::<f64>() * (join + open);
        (u < join).then(|| pick_size(sizes, u, |s| f64::from(s) - discount))
    }
}

/// Re-enacts recorded seating decisions. Each query consumes the first
/// unused move with the same restaurant and dish, so a journal whose
/// customers are in seating order replays exactly even if the levels of one
/// customer appear in reverse.
pub struct Replay<'m, D> {
    moves: &'m [Move<D>],
    used: Vec<bool>,
}

impl<'m, D: Dish> Replay<'m, D> {
    pub fn new(moves: &'m [Move<D>]) -> Self {
        Replay {
            moves,
            used: vec![false; moves.len()],
        }
    }

    /// True once every recorded move has been replayed.
    pub fn is_exhausted(&self) -> bool {
        self.used.iter().all(|&u| u)
    }
}

impl<D: Dish> Chooser<D> for Replay<'_, D> {
    fn choose(
        &mut self,
        rest: RestId,
        dish: D,
        _n: u32,
        _sizes: &[(u32, u32)],
        _discount: f64,
        _join: f64,
        _open: f64,
    ) -> Option<u32> {
        let i = (0..self.moves.len())
            .find(|&i| !self.used[i] && self.moves[i].rest == rest && self.moves[i].dish == dish)
            .unwrap_or_else(|| panic!("no recorded seating for {dish:?} in restaurant {rest}"));
        self.used[i] = true;
        let mv = self.moves[i];
        assert_eq!(mv.to, mv.from + 1, "replayed move is not a seating");
        (mv.from > 0).then_some(mv.from)
    }
}

/// Seats one customer eating `dish`: an existing table of the dish is chosen
/// with weight `c_k − a`, a new table with `(K·a + b)·P_parent(dish)`.
pub fn seat<D: Dish, S: SeatingStore<D>, R: Rng + ?Sized>(
    store: &mut S,
    chain: &[Level],
    dish: D,
    base: f64,
    rng: &mut R,
    journal: &mut SeatingDelta<D>,
) -> Seated {
    seat_with(store, chain, dish, base, &mut Sampling(rng), journal)
}

/// [`seat`] with the decisions delegated to `chooser`.
pub fn seat_with<D: Dish, S: SeatingStore<D>, C: Chooser<D> + ?Sized>(
    store: &mut S,
    chain: &[Level],
    dish: D,
    base: f64,
    chooser: &mut C,
    journal: &mut SeatingDelta<D>,
) -> Seated {
    let mut parents: SmallVec<[f64; 4]> = SmallVec::from_elem(0.0, chain.len());
    let mut p = base;
    for (i, lvl) in chain.iter().enumerate().rev() {
        parents[i] = p;
        let (n, k) = store.totals(lvl.rest);
        let (nd, td) = store.dish_counts(lvl.rest, dish);
        p = level_predictive(n, k, nd, td, lvl.params, p);
    }
    let log_predictive = p.ln();
    let mut log_prob = 0.0;
    for (i, lvl) in chain.iter().enumerate() {
        let (a, b) = (lvl.params.discount, lvl.params.strength);
        let (n, k) = store.totals(lvl.rest);
        let (nd, td) = store.dish_counts(lvl.rest, dish);
        let join = f64::from(nd) - a * f64::from(td);
        let open = (f64::from(k) * a + b) * parents[i];
        debug_assert!(n == 0 || join + open > 0.0, "dish {dish:?} has zero probability");
        let sizes = store.dish(lvl.rest, dish).map_or(&[][..], |t| t.sizes());
        let choice = chooser.choose(lvl.rest, dish, n, sizes, a, join, open);
        if let Some(size) = choice {
            log_prob += ((f64::from(size) - a) / (f64::from(n) + b)).ln();
            let mv = Move {
                rest: lvl.rest,
                dish,
                from: size,
                to: size + 1,
            };
            store.apply(mv);
            journal.push(mv);
            return Seated {
                opened_root: false,
                log_prob,
                log_predictive,
            };
        }
        if n > 0 {
            log_prob += ((f64::from(k) * a + b) / (f64::from(n) + b)).ln();
        }
        let mv = Move {
            rest: lvl.rest,
            dish,
            from: 0,
            to: 1,
        };
        store.apply(mv);
        journal.push(mv);
    }
    Seated {
        opened_root: true,
        log_prob: log_prob + base.ln(),
        log_predictive,
    }
}

/// Removes one customer eating `dish`, choosing its table with probability
/// proportional to table size. Returns true when the last level closed a
/// table, i.e. the terminal base must give up a draw of the dish.
///
/// Panics if the dish is not served at the leaf.
pub fn unseat<D: Dish, S: SeatingStore<D>, R: Rng + ?Sized>(
    store: &mut S,
    chain: &[Level],
    dish: D,
    rng: &mut R,
    journal: &mut SeatingDelta<D>,
) -> bool {
    for lvl in chain {
        let tables = store
            .dish(lvl.rest, dish)
            .unwrap_or_else(|| panic!("unseat of unserved dish {dish:?} in restaurant {}", lvl.rest));
        let u = rng.random::<f64>() * f64::from(tables.customers());
        let size = pick_size(tables.sizes(), u, f64::from);
        let mv = Move {
            rest: lvl.rest,
            dish,
            from: size,
            to: size - 1,
        };
        store.apply(mv);
        journal.push(mv);
        if size > 1 {
            return false;
        }
    }
    true
}

/// Picks a table-size class by weight `w(size)·count`, given `u` uniform on
/// the total weight.
fn pick_size(sizes: &[(u32, u32)], mut u: f64, w: impl Fn(u32) -> f64) -> u32 {
    for &(s, c) in sizes {
        let mass = w(s) * f64::from(c);
        if u < mass {
            return s;
        }
        u -= mass;
    }
    sizes.last().expect("non-empty size histogram").0
}
