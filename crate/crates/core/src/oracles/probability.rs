//! Probabilities of membership events for a uniformly random subset `S`
//! of size `s` drawn from `{0, …, n−1}`.
//!
//! The closed forms below only cover the event shapes that appear in the
//! LIME analysis; enumeration answers any event and is the reference.

use num_rational::Ratio;

use super::subsets::{binomial_u128, SizedSubsets};
use crate::error::{Error, Result};

pub type Rational = Ratio<i128>;

/// Largest ground set the enumerators accept.
pub const MAX_GROUND_SET: usize = 20;

/// Uniform law over the `s`-subsets of `{0, …, n−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetLaw {
    pub n: usize,
    pub s: usize,
}

impl SubsetLaw {
    /// `s = 0` is accepted: the empty set is a legitimate (degenerate) draw.
    pub fn new(n: usize, s: usize) -> Result<Self> {
        if n == 0 || s > n {
            return Err(Error::invalid(format!("need 0 <= s <= n and n >= 1, got n={n}, s={s}")));
        }
        Ok(Self { n, s })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Membership {
    In,
    NotIn,
}

/// A conjunction of membership constraints on distinct elements.
pub type Event = [(usize, Membership)];

fn check_event(law: SubsetLaw, event: &Event) -> Result<()> {
    for (i, &(a, _)) in event.iter().enumerate() {
        if a >= law.n {
            return Err(Error::invalid(format!("element {a} outside [0, {})", law.n)));
        }
        if event[..i].iter().any(|&(b, _)| b == a) {
            return Err(Error::invalid(format!("element {a} listed twice")));
        }
    }
    Ok(())
}

fn counts(event: &Event) -> (usize, usize) {
    let ins = event.iter().filter(|(_, m)| *m == Membership::In).count();
    (ins, event.len() - ins)
}

fn r(num: i128, den: i128) -> Rational {
    Rational::new(num, den)
}

/// Closed-form probability of `event`.
pub fn proba_formula(law: SubsetLaw, event: &Event) -> Result<Rational> {
    check_event(law, event)?;
    let (n, s) = (law.n as i128, law.s as i128);
    let need = |k: i128| {
        if n < k {
            Err(Error::invalid(format!("event on {k} distinct elements needs n >= {k}")))
        } else {
            Ok(())
        }
    };
    match counts(event) {
        (0, 0) => Ok(r(1, 1)),
        (0, 1) => Ok(r(n - s, n)),
        (1, 0) => Ok(r(1, 1) - r(n - s, n)),
        (0, 2) => {
            need(2)?;
            Ok(r((n - s) * (n - 1 - s), n * (n - 1)))
        }
        (1, 1) => {
            need(2)?;
            Ok(r(s * (n - s), n * (n - 1)))
        }
        (0, 3) => {
            need(3)?;
            Ok(r((n - s) * (n - s - 1) * (n - s - 2), n * (n - 1) * (n - 2)))
        }
        (1, 2) => {
            need(3)?;
            Ok(r(s * (n - s - 1) * (n - s), n * (n - 1) * (n - 2)))
        }
        (ins, outs) => Err(Error::invalid(format!(
            "no closed form for {ins} inclusions and {outs} exclusions"
        ))),
    }
}

/// Closed-form probability of `event` given `ell ∉ S`.
pub fn cond_proba_formula(law: SubsetLaw, event: &Event, ell: usize) -> Result<Rational> {
    check_event(law, event)?;
    if ell >= law.n || event.iter().any(|&(a, _)| a == ell) {
        return Err(Error::invalid("conditioning element must be distinct from the event's elements"));
    }
    if law.s == law.n {
        return Err(Error::invalid("conditioning event is impossible when s = n"));
    }
    let (n, s) = (law.n as i128, law.s as i128);
    match counts(event) {
        (0, 1) => Ok(r(n - 1 - s, n - 1)),
        (1, 0) => Ok(r(s, n - 1)),
        (0, 2) if n >= 3 => Ok(r((n - s - 1) * (n - s - 2), (n - 1) * (n - 2))),
        (ins, outs) => Err(Error::invalid(format!(
            "no conditional closed form for {ins} inclusions and {outs} exclusions at n={n}"
        ))),
    }
}

fn holds(mask: u64, event: &Event) -> bool {
    event.iter().all(|&(a, m)| (mask >> a & 1 == 1) == (m == Membership::In))
}

fn guard(law: SubsetLaw) -> Result<()> {
    if law.n > MAX_GROUND_SET {
        return Err(Error::EnumerationLimit {
            d: law.n,
            limit: MAX_GROUND_SET,
        });
    }
    Ok(())
}

/// Exact probability by counting all `C(n, s)` subsets.
pub fn proba_enumerate(law: SubsetLaw, event: &Event) -> Result<Rational> {
    check_event(law, event)?;
    guard(law)?;
    let hits = SizedSubsets::new(law.n, law.s).filter(|&m| holds(m, event)).count();
    Ok(Rational::new(hits as i128, binomial_u128(law.n, law.s) as i128))
}

/// Exact conditional probability given `ell ∉ S` by counting.
pub fn cond_proba_enumerate(law: SubsetLaw, event: &Event, ell: usize) -> Result<Rational> {
    check_event(law, event)?;
    guard(law)?;
    if ell >= law.n {
        return Err(Error::invalid(format!("element {ell} outside [0, {})", law.n)));
    }
    let (mut hits, mut total) = (0i128, 0i128);
    for m in SizedSubsets::new(law.n, law.s).filter(|m| m >> ell & 1 == 0) {
        total += 1;
        if holds(m, event) {
            hits += 1;
        }
    }
    if total == 0 {
        return Err(Error::invalid("conditioning event is impossible when s = n"));
    }
    Ok(Rational::new(hits, total))
}

/// The event shapes with a closed form, instantiated on `0, 1, 2` in every
/// order the closed forms must be symmetric under.
pub fn lemma_events() -> Vec<Vec<(usize, Membership)>> {
    use Membership::*;
    vec![
        vec![(0, NotIn)],
        vec![(0, In)],
        vec![(0, NotIn), (1, NotIn)],
        vec![(0, NotIn), (1, In)],
        vec![(1, In), (0, NotIn)],
        vec![(0, NotIn), (1, NotIn), (2, NotIn)],
        vec![(0, NotIn), (1, In), (2, NotIn)],
        vec![(1, In), (2, NotIn), (0, NotIn)],
    ]
}

/// Conditional event shapes with a closed form, on elements other than the
/// conditioning one.
pub fn conditional_lemma_events() -> Vec<Vec<(usize, Membership)>> {
    use Membership::*;
    vec![
        vec![(0, NotIn)],
        vec![(0, In)],
        vec![(0, NotIn), (1, NotIn)],
    ]
}
