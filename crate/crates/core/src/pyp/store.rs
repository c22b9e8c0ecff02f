use rustc_hash::FxHashMap;

use super::restaurant::{Dish, DishTables, Restaurant};

/// Index of a restaurant inside a [`Franchise`].
pub type RestId = u32;

/// One customer moving between table sizes in one restaurant: `from == 0`
/// opens a table, `to == 0` closes one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move<D> {
    pub rest: RestId,
    pub dish: D,
    pub from: u32,
    pub to: u32,
}

impl<D: Copy> Move<D> {
    pub fn inverse(self) -> Self {
        Move {
            from: self.to,
            to: self.from,
            ..self
        }
    }
}

/// Journal of seating changes. Replaying it applies the changes; reverting
/// undoes them in reverse order, restoring the exact prior counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeatingDelta<D> {
    moves: Vec<Move<D>>,
}

impl<D> Default for SeatingDelta<D> {
    fn default() -> Self {
        SeatingDelta { moves: Vec::new() }
    }
}

impl<D: Dish> SeatingDelta<D> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn moves(&self) -> &[Move<D>] {
        &self.moves
    }

    pub fn push(&mut self, mv: Move<D>) {
        self.moves.push(mv);
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn extend(&mut self, other: SeatingDelta<D>) {
        self.moves.extend(other.moves);
    }

    pub fn apply_to<S: SeatingStore<D>>(&self, store: &mut S) {
        for &mv in &self.moves {
            store.apply(mv);
        }
    }

    pub fn revert_on<S: SeatingStore<D>>(&self, store: &mut S) {
        for &mv in self.moves.iter().rev() {
            store.apply(mv.inverse());
        }
    }

    /// The delta that undoes this one.
    pub fn inverted(&self) -> SeatingDelta<D> {
        SeatingDelta {
            moves: self.moves.iter().rev().map(|m| m.inverse()).collect(),
        }
    }
}

/// Read/write access to seating counts, implemented by the shared model
/// state and by per-particle overlays on top of it.
pub trait SeatingStore<D: Dish> {
    fn dish(&self, rest: RestId, dish: D) -> Option<&DishTables>;

    /// `(customers, tables)` of a restaurant.
    fn totals(&self, rest: RestId) -> (u32, u32);

    /// Applies one move. Panics if the move is inconsistent with the counts.
    fn apply(&mut self, mv: Move<D>);

    fn dish_counts(&self, rest: RestId, dish: D) -> (u32, u32) {
        self.dish(rest, dish)
            .map_or((0, 0), |t| (t.customers(), t.tables()))
    }
}

/// An arena of restaurants addressed by [`RestId`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Franchise<D: Dish> {
    restaurants: Vec<Restaurant<D>>,
}

impl<D: Dish> Franchise<D> {
    pub fn new(size: usize) -> Self {
        Franchise {
            restaurants: (0..size).map(|_| Restaurant::new()).collect(),
        }
    }

    pub(crate) fn from_restaurants(restaurants: Vec<Restaurant<D>>) -> Self {
        Franchise { restaurants }
    }

    pub fn len(&self) -> usize {
        self.restaurants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.restaurants.is_empty()
    }

    pub fn restaurant(&self, rest: RestId) -> &Restaurant<D> {
        &self.restaurants[rest as usize]
    }

    pub fn restaurants(&self) -> &[Restaurant<D>] {
        &self.restaurants
    }

    pub fn overlay(&self) -> Overlay<'_, D> {
        Overlay::new(self)
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        for (i, r) in self.restaurants.iter().enumerate() {
            r.check_invariants()
                .map_err(|e| format!("restaurant {i}: {e}"))?;
        }
        Ok(())
    }
}

impl<D: Dish> SeatingStore<D> for Franchise<D> {
    fn dish(&self, rest: RestId, dish: D) -> Option<&DishTables> {
        self.restaurants[rest as usize].dish(dish)
    }

    fn totals(&self, rest: RestId) -> (u32, u32) {
        let r = &self.restaurants[rest as usize];
        (r.customers(), r.tables())
    }

    fn apply(&mut self, mv: Move<D>) {
        self.restaurants[mv.rest as usize].apply(mv.dish, mv.from, mv.to);
    }
}

/// Copy-on-write view of a frozen [`Franchise`]: reads see the base state
/// plus every move applied through the overlay, the base is never touched.
#[derive(Debug, Clone)]
pub struct Overlay<'a, D: Dish> {
    base: &'a Franchise<D>,
    dishes: FxHashMap<(RestId, D), DishTables>,
    totals: FxHashMap<RestId, (u32, u32)>,
}

impl<'a, D: Dish> Overlay<'a, D> {
    pub fn new(base: &'a Franchise<D>) -> Self {
        Overlay {
            base,
            dishes: FxHashMap::default(),
            totals: FxHashMap::default(),
        }
    }

    pub fn base(&self) -> &'a Franchise<D> {
        self.base
    }

    pub fn touched(&self) -> usize {
        self.dishes.len()
    }
}

impl<D: Dish> SeatingStore<D> for Overlay<'_, D> {
    fn dish(&self, rest: RestId, dish: D) -> Option<&DishTables> {
        match self.dishes.get(&(rest, dish)) {
            Some(t) if t.is_empty() => None,
            Some(t) => Some(t),
            None => self.base.dish(rest, dish),
        }
    }

    fn totals(&self, rest: RestId) -> (u32, u32) {
        self.totals
            .get(&rest)
            .copied()
            .unwrap_or_else(|| self.base.totals(rest))
    }

    fn apply(&mut self, mv: Move<D>) {
        let base = self.base;
        let entry = self
            .dishes
            .entry((mv.rest, mv.dish))
            .or_insert_with(|| base.dish(mv.rest, mv.dish).cloned().unwrap_or_default());
        entry.move_customer(mv.from, mv.to);
        let (n, k) = self
            .totals
            .entry(mv.rest)
            .or_insert_with(|| base.totals(mv.rest));
        if mv.to > mv.from {
            *n += 1;
        } else {
            *n -= 1;
        }
        match (mv.from, mv.to) {
            (0, _) => *k += 1,
            (_, 0) => *k -= 1,
            _ => {}
        }
    }
}
