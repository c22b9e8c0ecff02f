//! The lexicon prior: every word type carries an ambiguity class drawn from
//! a Pitman-Yor process whose base prefers small classes.

use rand::Rng;

use super::class::AmbiguityClass;
use super::ModelError;
use crate::corpus::{Tag, TypeId};
use crate::pyp::{self, Franchise, Level, PypParams, SeatingDelta};

/// Base probability of an ambiguity class: class size is geometric with
/// success probability `p_geom`, truncated to `1..=num_tags`, and classes of
/// equal size are equally likely.
pub fn geometric_base_prob(
    class: AmbiguityClass,
    num_tags: usize,
    p_geom: f64,
) -> Result<f64, ModelError> {
    if class.is_empty() {
        return Err(ModelError::EmptyClass);
    }
    if class.len() > num_tags || !class.is_subset(AmbiguityClass::full(num_tags)) {
        return Err(ModelError::TagOutOfRange);
    }
    Ok(log_geometric_base(class.len(), num_tags, p_geom).exp())
}

/// `ln G(s)` for a class of the given size.
pub(crate) fn log_geometric_base(size: usize, num_tags: usize, p_geom: f64) -> f64 {
    let q = 1.0 - p_geom;
    // Z = Σ_{m=1..|T|} p q^{m-1} = 1 − q^{|T|}
    let z = 1.0 - q.powi(num_tags as i32);
    p_geom.ln() + (size as f64 - 1.0) * q.ln() - z.ln() - ln_binomial(num_tags, size)
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// Ambiguity-class assignments plus the restaurant over classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    classes: Vec<AmbiguityClass>,
    attached: Vec<bool>,
    crp: Franchise<AmbiguityClass>,
    /// `e_t`: number of attached word types whose class contains `t`.
    counts: Vec<u32>,
    params: PypParams,
    p_geom: f64,
    num_tags: usize,
}

const CLASS_REST: pyp::RestId = 0;

impl Lexicon {
    /// A lexicon with no word type attached yet.
    pub fn new(num_types: usize, num_tags: usize, params: PypParams, p_geom: f64) -> Self {
        assert!(num_tags <= AmbiguityClass::MAX_TAGS);
        assert!(p_geom > 0.0 && p_geom <= 1.0);
        Lexicon {
            classes: vec![AmbiguityClass::empty(); num_types],
            attached: vec![false; num_types],
            crp: Franchise::new(1),
            counts: vec![0; num_tags],
            params,
            p_geom,
            num_tags,
        }
    }

    pub(crate) fn from_parts(
        classes: Vec<AmbiguityClass>,
        crp: Franchise<AmbiguityClass>,
        num_tags: usize,
        params: PypParams,
        p_geom: f64,
    ) -> Result<Self, ModelError> {
        let mut lex = Lexicon::new(classes.len(), num_tags, params, p_geom);
        for (w, c) in classes.iter().enumerate() {
            if c.is_empty() || !c.is_subset(AmbiguityClass::full(num_tags)) {
                return Err(ModelError::Corrupt(format!("bad class for type {w}")));
            }
            for t in c.iter() {
                lex.counts[t as usize] += 1;
            }
        }
        lex.classes = classes;
        lex.attached = vec![true; lex.classes.len()];
        lex.crp = crp;
        lex.check_invariants().map_err(ModelError::Corrupt)?;
        Ok(lex)
    }

    pub fn num_tags(&self) -> usize {
        self.num_tags
    }

    pub fn params(&self) -> PypParams {
        self.params
    }

    pub fn p_geom(&self) -> f64 {
        self.p_geom
    }

    pub fn class_of(&self, w: TypeId) -> AmbiguityClass {
        self.classes[w as usize]
    }

    pub fn classes(&self) -> &[AmbiguityClass] {
        &self.classes
    }

    pub fn is_attached(&self, w: TypeId) -> bool {
        self.attached[w as usize]
    }

    /// `e_t` over attached types.
    pub fn type_count(&self, tag: Tag) -> u32 {
        self.counts[tag as usize]
    }

    pub fn restaurant(&self) -> &pyp::Restaurant<AmbiguityClass> {
        self.crp.restaurant(CLASS_REST)
    }

    fn chain(&self) -> [Level; 1] {
        [Level::new(CLASS_REST, self.params)]
    }

    pub fn base_prob(&self, class: AmbiguityClass) -> f64 {
        log_geometric_base(class.len(), self.num_tags, self.p_geom).exp()
    }

    /// Predictive probability of `class` given the currently attached types.
    /// To condition on every type except `W`, detach `W` first.
    pub fn class_prior_prob(&self, class: AmbiguityClass) -> f64 {
        pyp::predictive(&self.crp, &self.chain(), class, self.base_prob(class))
    }

    /// Assigns `class` to a detached type and seats its customer.
    pub fn attach<R: Rng + ?Sized>(
        &mut self,
        w: TypeId,
        class: AmbiguityClass,
        rng: &mut R,
    ) -> SeatingDelta<AmbiguityClass> {
        assert!(!self.attached[w as usize], "type {w} already attached");
        assert!(!class.is_empty());
        let mut delta = SeatingDelta::new();
        let base = self.base_prob(class);
        let chain = self.chain();
        pyp::seat(&mut self.crp, &chain, class, base, rng, &mut delta);
        self.set_attached(w, class);
        delta
    }

    /// Removes a type's customer from the class restaurant. The class
    /// assignment is kept so the type can be restored with [`Self::reattach`].
    pub fn detach<R: Rng + ?Sized>(&mut self, w: TypeId, rng: &mut R) -> SeatingDelta<AmbiguityClass> {
        assert!(self.attached[w as usize], "type {w} not attached");
        let class = self.classes[w as usize];
        let mut delta = SeatingDelta::new();
        let chain = self.chain();
        pyp::unseat(&mut self.crp, &chain, class, rng, &mut delta);
        for t in class.iter() {
            self.counts[t as usize] -= 1;
        }
        self.attached[w as usize] = false;
        delta
    }

    /// Undoes a [`Self::detach`] exactly.
    pub fn reattach(&mut self, w: TypeId, delta: &SeatingDelta<AmbiguityClass>) {
        assert!(!self.attached[w as usize]);
        delta.revert_on(&mut self.crp);
        let class = self.classes[w as usize];
        self.set_attached(w, class);
    }

    fn set_attached(&mut self, w: TypeId, class: AmbiguityClass) {
        for t in class.iter() {
            self.counts[t as usize] += 1;
        }
        self.classes[w as usize] = class;
        self.attached[w as usize] = true;
    }

    /// Log probability of the class seating arrangement including the base
    /// draws.
    pub fn log_prob(&self) -> f64 {
        let r = self.restaurant();
        let mut lp = r.log_seating_prob(self.params);
        let mut tables_by_size = vec![0u64; self.num_tags + 1];
        for (class, t) in r.sorted_dishes() {
            tables_by_size[class.len()] += u64::from(t.tables());
        }
        for (size, &k) in tables_by_size.iter().enumerate().skip(1) {
            if k > 0 {
                lp += k as f64 * log_geometric_base(size, self.num_tags, self.p_geom);
            }
        }
        lp
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        self.crp.check_invariants()?;
        let mut counts = vec![0u32; self.num_tags];
        let mut attached = 0;
        let mut per_class = rustc_hash::FxHashMap::default();
        for (w, (&c, &a)) in self.classes.iter().zip(&self.attached).enumerate() {
            if !a {
                continue;
            }
            if c.is_empty() {
                return Err(format!("type {w} has an empty class"));
            }
            attached += 1;
            *per_class.entry(c).or_insert(0u32) += 1;
            for t in c.iter() {
                counts[t as usize] += 1;
            }
        }
        if counts != self.counts {
            return Err("type counts e_t out of sync with assignments".into());
        }
        let r = self.restaurant();
        if r.customers() != attached {
            return Err(format!(
                "class restaurant has {} customers for {attached} attached types",
                r.customers()
            ));
        }
        for (c, n) in per_class {
            if r.dish(c).map_or(0, |t| t.customers()) != n {
                return Err(format!("class {c:?} customer count mismatch"));
            }
        }
        Ok(())
    }
}
