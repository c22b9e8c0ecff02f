//! Chinese restaurant franchise machinery for hierarchical Pitman-Yor
//! processes.
//!
//! Restaurants store, per dish, a histogram of table sizes; the seating
//! probabilities depend only on table sizes, so table identities are not
//! kept. A [`Franchise`] is an arena of restaurants; an [`Overlay`] layers
//! private changes over a frozen franchise, and every change is journaled as
//! a [`SeatingDelta`] that can be replayed or reverted exactly.

mod chain;
mod restaurant;
mod store;

pub use chain::{predictive, seat, seat_with, unseat, Chooser, Level, Replay, Sampling, Seated};
pub use restaurant::{Dish, DishTables, Restaurant, SeatingStats};
pub use store::{Franchise, Move, Overlay, RestId, SeatingDelta, SeatingStore};

use serde::{Deserialize, Serialize};

/// Discount `a ∈ [0, 1)` and strength `b > −a` of a Pitman-Yor process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PypParams {
    pub discount: f64,
    pub strength: f64,
}

impl PypParams {
    pub fn new(discount: f64, strength: f64) -> Option<Self> {
        ((0.0..1.0).contains(&discount) && strength > -discount).then_some(PypParams {
            discount,
            strength,
        })
    }
}

impl Default for PypParams {
    fn default() -> Self {
        PypParams {
            discount: 0.5,
            strength: 1.0,
        }
    }
}
