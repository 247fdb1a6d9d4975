//! Threshold payments for binary-outcome, weakly monotone algorithms.
//!
//! A packed bidder pays the smallest packed-value at which the algorithm
//! would still pack it, holding everybody else fixed. Unpacked bidders pay
//! nothing.

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::alloc::{Allocation, AllocationAlgorithm, AllocationInstance, ValueProfile};
use crate::error::{domain, Error, Result};

/// Target precision of the bisection.
pub const PRICE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConfig {
    /// Upper end of the bracket; `None` means 10x the largest value present
    /// (at least 1).
    pub upper: Option<f64>,
    pub iterations: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            upper: None,
            iterations: 60,
        }
    }
}

impl ThresholdConfig {
    fn bracket_top(&self, instance: &AllocationInstance) -> f64 {
        self.upper
            .unwrap_or_else(|| (10.0 * instance.profile().max_value()).max(1.0))
    }
}

fn packed_at<A: AllocationAlgorithm + ?Sized>(
    x: &A,
    instance: &AllocationInstance,
    bidder: usize,
    value: f64,
) -> Result<bool> {
    let probe = instance.with_packed_value(bidder, value)?;
    Ok(x.allocate(&probe)?.is_packed(bidder))
}

/// Infimum packed-value that gets `bidder` packed, or `f64::INFINITY` if it
/// stays unpacked across the whole bracket.
pub fn threshold_price<A: AllocationAlgorithm + ?Sized>(
    x: &A,
    instance: &AllocationInstance,
    bidder: usize,
) -> Result<f64> {
    threshold_price_with(x, instance, bidder, &ThresholdConfig::default())
}

pub fn threshold_price_with<A: AllocationAlgorithm + ?Sized>(
    x: &A,
    instance: &AllocationInstance,
    bidder: usize,
    config: &ThresholdConfig,
) -> Result<f64> {
    if !instance.is_binary() {
        return Err(domain("threshold prices need binary outcomes"));
    }
    if bidder >= instance.bidder_count() {
        return Err(domain("bidder out of range"));
    }
    let top = config.bracket_top(instance);
    let own = instance.profile().packed_value(bidder);
    let own_packed = x.allocate(instance)?.is_packed(bidder);
    let violation = |packed_at: f64, unpacked_at: f64| Error::MonotonicityViolation {
        bidder,
        packed_at,
        unpacked_at,
    };

    let packed_top = packed_at(x, instance, bidder, top)?;
    if packed_at(x, instance, bidder, 0.0)? {
        if !packed_top {
            return Err(violation(0.0, top));
        }
        if !own_packed {
            return Err(violation(0.0, own));
        }
        return Ok(0.0);
    }
    if !packed_top {
        if own_packed {
            return Err(violation(own, top));
        }
        return Ok(f64::INFINITY);
    }

    let (mut lo, mut hi) = (0.0, top);
    for _ in 0..config.iterations {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if packed_at(x, instance, bidder, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if own_packed && own < lo {
        return Err(violation(own, lo));
    }
    if !own_packed && own > hi {
        return Err(violation(hi, own));
    }
    Ok(hi)
}

/// The mechanism's charge to `bidder` under `allocation`.
pub fn payment<A: AllocationAlgorithm + ?Sized>(
    x: &A,
    instance: &AllocationInstance,
    allocation: &Allocation,
    bidder: usize,
) -> Result<f64> {
    if !allocation.is_packed(bidder) {
        return Ok(0.0);
    }
    let price = threshold_price(x, instance, bidder)?;
    debug_assert!(price.is_finite());
    Ok(price)
}

/// Payment per bidder, by bidder index.
#[derive(Debug, Clone, PartialEq)]
pub struct PaymentProfile(pub Vec<f64>);

impl PaymentProfile {
    pub fn of(&self, bidder: usize) -> f64 {
        self.0[bidder]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MechanismOutcome {
    bidders: Vec<String>,
    outcome_labels: Vec<String>,
    pub allocation: Allocation,
    pub payments: PaymentProfile,
}

impl MechanismOutcome {
    pub fn bidders(&self) -> &[String] {
        &self.bidders
    }
}

/// `{"allocation": {bidder: outcome}, "payments": {bidder: number}}`.
impl Serialize for MechanismOutcome {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct ByBidder<'a, T: Serialize>(&'a [String], Vec<T>);
        impl<T: Serialize> Serialize for ByBidder<'_, T> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut m = s.serialize_map(Some(self.0.len()))?;
                for (b, v) in self.0.iter().zip(&self.1) {
                    m.serialize_entry(b, v)?;
                }
                m.end()
            }
        }
        let labels: Vec<&str> = self
            .allocation
            .as_slice()
            .iter()
            .map(|&o| self.outcome_labels[o].as_str())
            .collect();
        let mut m = serializer.serialize_map(Some(2))?;
        m.serialize_entry("allocation", &ByBidder(&self.bidders, labels))?;
        m.serialize_entry("payments", &ByBidder(&self.bidders, self.payments.0.clone()))?;
        m.end()
    }
}

/// Allocates with `x` and charges every packed bidder its threshold price.
pub fn run_mechanism<A: AllocationAlgorithm + ?Sized>(
    x: &A,
    instance: &AllocationInstance,
) -> Result<MechanismOutcome> {
    let allocation = x.allocate(instance)?;
    let payments = (0..instance.bidder_count())
        .map(|n| payment(x, instance, &allocation, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(MechanismOutcome {
        bidders: instance.profile().bidders().to_vec(),
        outcome_labels: instance.outcomes().labels().to_vec(),
        allocation,
        payments: PaymentProfile(payments),
    })
}

/// Value at the assigned outcome minus payment.
pub fn bidder_utility(outcome: &MechanismOutcome, profile: &ValueProfile, bidder: usize) -> f64 {
    profile.value(bidder, outcome.allocation.outcome(bidder)) - outcome.payments.of(bidder)
}
