use std::collections::BTreeMap;
use std::fmt::Debug;
use std::hash::Hash;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use statrs::function::gamma::ln_gamma;

use super::PypParams;

/// Anything that can be served at a table.
pub trait Dish: Copy + Eq + Hash + Ord + Debug + Send + Sync {}
impl<T: Copy + Eq + Hash + Ord + Debug + Send + Sync> Dish for T {}

/// Tables serving one dish, kept as a histogram of table sizes.
///
/// Invariants: `sizes` is sorted by size, holds no zero counts, and
/// `customers == Σ size·count`, `tables == Σ count`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DishTables {
    customers: u32,
    tables: u32,
    sizes: SmallVec<[(u32, u32); 2]>,
}

impl DishTables {
    pub fn customers(&self) -> u32 {
        self.customers
    }

    pub fn tables(&self) -> u32 {
        self.tables
    }

    /// `(table size, number of tables of that size)`, ascending by size.
    pub fn sizes(&self) -> &[(u32, u32)] {
        &self.sizes
    }

    pub fn is_empty(&self) -> bool {
        self.customers == 0
    }

    fn add_table(&mut self, size: u32) {
        match self.sizes.binary_search_by_key(&size, |&(s, _)| s) {
            Ok(i) => self.sizes[i].1 += 1,
            Err(i) => self.sizes.insert(i, (size, 1)),
        }
    }

    fn remove_table(&mut self, size: u32) {
        let i = self
            .sizes
            .binary_search_by_key(&size, |&(s, _)| s)
            .unwrap_or_else(|_| panic!("no table of size {size} to move a customer from"));
        self.sizes[i].1 -= 1;
        if self.sizes[i].1 == 0 {
            self.sizes.remove(i);
        }
    }

    /// Moves one customer: a table of size `from` becomes size `to`, where
    /// `from == 0` opens a table and `to == 0` closes one.
    pub(crate) fn move_customer(&mut self, from: u32, to: u32) {
        debug_assert!(from.abs_diff(to) == 1);
        if from > 0 {
            self.remove_table(from);
        } else {
            self.tables += 1;
        }
        if to > 0 {
            self.add_table(to);
        } else {
            self.tables -= 1;
        }
        if to > from {
            self.customers += 1;
        } else {
            self.customers -= 1;
        }
    }

    fn check(&self) -> Result<(), String> {
        let mut n = 0;
        let mut k = 0;
        let mut last = 0;
        for &(s, c) in &self.sizes {
            if s == 0 || c == 0 || s <= last {
                return Err(format!("malformed size histogram {:?}", self.sizes));
            }
            last = s;
            n += s * c;
            k += c;
        }
        if n != self.customers || k != self.tables {
            return Err(format!(
                "dish totals ({}, {}) disagree with histogram ({n}, {k})",
                self.customers, self.tables
            ));
        }
        Ok(())
    }
}

/// One Chinese restaurant: dish → table-size histogram plus totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Restaurant<D: Dish> {
    dishes: FxHashMap<D, DishTables>,
    customers: u32,
    tables: u32,
}

impl<D: Dish> Default for Restaurant<D> {
    fn default() -> Self {
        Restaurant {
            dishes: FxHashMap::default(),
            customers: 0,
            tables: 0,
        }
    }
}

impl<D: Dish> Restaurant<D> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn customers(&self) -> u32 {
        self.customers
    }

    pub fn tables(&self) -> u32 {
        self.tables
    }

    pub fn dish(&self, dish: D) -> Option<&DishTables> {
        self.dishes.get(&dish)
    }

    pub fn is_empty(&self) -> bool {
        self.customers == 0
    }

    pub fn num_dishes(&self) -> usize {
        self.dishes.len()
    }

    /// Dishes in ascending order.
    pub fn sorted_dishes(&self) -> Vec<(D, &DishTables)> {
        let mut v: Vec<_> = self.dishes.iter().map(|(d, t)| (*d, t)).collect();
        v.sort_unstable_by_key(|(d, _)| *d);
        v
    }

    pub(crate) fn apply(&mut self, dish: D, from: u32, to: u32) {
        let entry = self.dishes.entry(dish).or_default();
        entry.move_customer(from, to);
        if entry.is_empty() {
            self.dishes.remove(&dish);
        }
        if to > from {
            self.customers += 1;
        } else {
            self.customers -= 1;
        }
        match (from, to) {
            (0, _) => self.tables += 1,
            (_, 0) => self.tables -= 1,
            _ => {}
        }
    }

    pub(crate) fn from_parts(dishes: Vec<(D, DishTables)>) -> Result<Self, String> {
        let mut r = Restaurant::new();
        for (d, t) in dishes {
            t.check()?;
            if t.is_empty() {
                return Err("stored dish without customers".into());
            }
            r.customers += t.customers;
            r.tables += t.tables;
            if r.dishes.insert(d, t).is_some() {
                return Err(format!("duplicate dish {d:?}"));
            }
        }
        Ok(r)
    }

    /// Predictive probability of `dish` given the parent's probability for it.
    pub fn predictive(&self, dish: D, params: PypParams, parent: f64) -> f64 {
        let (nd, td) = self
            .dish(dish)
            .map_or((0, 0), |t| (t.customers, t.tables));
        level_predictive(self.customers, self.tables, nd, td, params, parent)
    }

    pub fn stats(&self) -> SeatingStats {
        let mut s = SeatingStats::default();
        s.add(self);
        s
    }

    /// Log probability of the seating arrangement, excluding the base
    /// distribution's draws for each table's dish.
    pub fn log_seating_prob(&self, params: PypParams) -> f64 {
        self.stats().log_prob(params)
    }

    /// Log probability of the seating arrangement including the base draw of
    /// every table's dish: the product of the sequential seating factors of
    /// any insertion order that produces this arrangement.
    pub fn joint_log_prob(&self, params: PypParams, base: impl Fn(D) -> f64) -> f64 {
        let mut lp = self.log_seating_prob(params);
        for (d, t) in self.sorted_dishes() {
            lp += f64::from(t.tables) * base(d).ln();
        }
        lp
    }

    /// Bookkeeping invariants: histograms well formed and totals consistent.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut n = 0;
        let mut k = 0;
        for (d, t) in &self.dishes {
            t.check().map_err(|e| format!("dish {d:?}: {e}"))?;
            if t.is_empty() {
                return Err(format!("dish {d:?} kept without customers"));
            }
            n += t.customers;
            k += t.tables;
        }
        if n != self.customers || k != self.tables {
            return Err(format!(
                "restaurant totals ({}, {}) disagree with dishes ({n}, {k})",
                self.customers, self.tables
            ));
        }
        Ok(())
    }
}

pub(crate) fn level_predictive(
    n: u32,
    k: u32,
    nd: u32,
    td: u32,
    params: PypParams,
    parent: f64,
) -> f64 {
    if n == 0 {
        return parent;
    }
    let (a, b) = (params.discount, params.strength);
    (f64::from(nd) - a * f64::from(td) + (f64::from(k) * a + b) * parent) / (f64::from(n) + b)
}

/// Sufficient statistics of one or more restaurants' seating arrangements
/// for evaluating their likelihood under varying `(a, b)`.
#[derive(Debug, Clone, Default)]
pub struct SeatingStats {
    /// `(customers, tables)` per non-empty restaurant.
    totals: Vec<(u32, u32)>,
    /// table size → number of tables, merged over restaurants.
    sizes: BTreeMap<u32, u64>,
}

impl SeatingStats {
    pub fn add<D: Dish>(&mut self, r: &Restaurant<D>) {
        if r.customers == 0 {
            return;
        }
        self.totals.push((r.customers, r.tables));
        for t in r.dishes.values() {
            for &(s, c) in t.sizes() {
                *self.sizes.entry(s).or_default() += u64::from(c);
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn log_prob(&self, params: PypParams) -> f64 {
        let (a, b) = (params.discount, params.strength);
        let mut lp = 0.0;
        for &(n, k) in &self.totals {
            for j in 1..k {
                lp += (b + f64::from(j) * a).ln();
            }
            lp -= rising_log(b + 1.0, n - 1);
        }
        for (&s, &count) in &self.sizes {
            if s > 1 {
                lp += count as f64 * rising_log(1.0 - a, s - 1);
            }
        }
        lp
    }
}

/// `ln Π_{i=0}^{m-1} (x + i)`.
fn rising_log(x: f64, m: u32) -> f64 {
    if m <= 64 {
        (0..m).map(|i| (x + f64::from(i)).ln()).sum()
    } else {
        ln_gamma(x + f64::from(m)) - ln_gamma(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn move_customer_maintains_histogram() {
        let mut t = DishTables::default();
        t.move_customer(0, 1);
        t.move_customer(1, 2);
        t.move_customer(0, 1);
        assert_eq!(t.sizes(), &[(1, 1), (2, 1)]);
        assert_eq!((t.customers(), t.tables()), (3, 2));
        t.move_customer(2, 1);
        assert_eq!(t.sizes(), &[(1, 2)]);
        t.move_customer(1, 0);
        t.move_customer(1, 0);
        assert!(t.is_empty());
        assert!(t.sizes().is_empty());
        t.check().unwrap();
    }

    #[test]
    #[should_panic]
    fn removing_missing_size_panics() {
        let mut t = DishTables::default();
        t.move_customer(0, 1);
        t.move_customer(3, 2);
    }

    #[test]
    fn rising_log_branches_agree() {
        let direct: f64 = (0..200).map(|i| (0.7 + f64::from(i)).ln()).sum();
        assert!((rising_log(0.7, 200) - direct).abs() < 1e-9);
    }

    #[test]
    fn predictive_of_worked_example() {
        // one table of dish 0 with 3 customers, a=0.5, b=1, base 1/2
        let mut r = Restaurant::<u32>::new();
        r.apply(0, 0, 1);
        r.apply(0, 1, 2);
        r.apply(0, 2, 3);
        let p = PypParams::new(0.5, 1.0).unwrap();
        assert!((r.predictive(0, p, 0.5) - 0.8125).abs() < 1e-15);
        assert!((r.predictive(1, p, 0.5) - 0.1875).abs() < 1e-15);
    }
}
