//! Finite unions of disjoint, possibly unbounded real intervals.

use std::fmt;

use serde::{Deserialize, Serialize};

/// One interval. Infinite endpoints are always open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "crate::serde_ext")]
    pub lo: f64,
    #[serde(with = "crate::serde_ext")]
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Self {
        Interval {
            lo,
            hi,
            lo_closed: lo_closed && lo.is_finite(),
            hi_closed: hi_closed && hi.is_finite(),
        }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Interval::new(lo, hi, true, true)
    }

    pub fn point(x: f64) -> Self {
        Interval::closed(x, x)
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed {
            x >= self.lo
        } else {
            x > self.lo
        };
        let below = if self.hi_closed {
            x <= self.hi
        } else {
            x < self.hi
        };
        above && below
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_closed) = if self.lo > other.lo {
            (self.lo, self.lo_closed)
        } else if other.lo > self.lo {
            (other.lo, other.lo_closed)
        } else {
            (self.lo, self.lo_closed && other.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < other.hi {
            (self.hi, self.hi_closed)
        } else if other.hi < self.hi {
            (other.hi, other.hi_closed)
        } else {
            (self.hi, self.hi_closed && other.hi_closed)
        };
        Interval::new(lo, hi, lo_closed, hi_closed)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_closed { '[' } else { '(' };
        let r = if self.hi_closed { ']' } else { ')' };
        let show = |x: f64| {
            if x == f64::INFINITY {
                "+inf".to_string()
            } else if x == f64::NEG_INFINITY {
                "-inf".to_string()
            } else {
                crate::fmt_sig(x, 6)
            }
        };
        write!(f, "{l}{}, {}{r}", show(self.lo), show(self.hi))
    }
}

/// Sorted, pairwise disjoint, non-adjacent intervals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalUnion {
    intervals: Vec<Interval>,
}

impl IntervalUnion {
    pub fn empty() -> Self {
        IntervalUnion::default()
    }

    pub fn point(x: f64) -> Self {
        IntervalUnion {
            intervals: vec![Interval::point(x)],
        }
    }

    pub fn from_interval(i: Interval) -> Self {
        Self::from_intervals(vec![i])
    }

    /// Normalize an arbitrary collection: drop empties, sort, and merge
    /// anything overlapping or touching.
    pub fn from_intervals(mut v: Vec<Interval>) -> Self {
        v.retain(|i| !i.is_empty());
        v.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(b.lo_closed.cmp(&a.lo_closed)));
        let mut out: Vec<Interval> = Vec::with_capacity(v.len());
        for i in v {
            if let Some(last) = out.last_mut() {
                let touches =
                    i.lo < last.hi || (i.lo == last.hi && (i.lo_closed || last.hi_closed));
                if touches {
                    if i.hi > last.hi {
                        last.hi = i.hi;
                        last.hi_closed = i.hi_closed;
                    } else if i.hi == last.hi {
                        last.hi_closed |= i.hi_closed;
                    }
                    continue;
                }
            }
            out.push(i);
        }
        IntervalUnion { intervals: out }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(x))
    }

    pub fn union(&self, other: &IntervalUnion) -> IntervalUnion {
        let mut v = self.intervals.clone();
        v.extend_from_slice(&other.intervals);
        Self::from_intervals(v)
    }

    pub fn intersect_interval(&self, with: &Interval) -> IntervalUnion {
        Self::from_intervals(self.intervals.iter().map(|i| i.intersect(with)).collect())
    }

    pub fn intersect(&self, other: &IntervalUnion) -> IntervalUnion {
        let mut v = Vec::new();
        for a in &self.intervals {
            for b in &other.intervals {
                v.push(a.intersect(b));
            }
        }
        Self::from_intervals(v)
    }

    /// Whether every point of `self` lies in `other`.
    pub fn is_subset_of(&self, other: &IntervalUnion) -> bool {
        self.intersect(other) == *self
    }

    /// Smallest single interval containing the union.
    pub fn convex_hull(&self) -> Option<Interval> {
        let first = self.intervals.first()?;
        let last = self.intervals.last()?;
        Some(Interval::new(
            first.lo,
            last.hi,
            first.lo_closed,
            last.hi_closed,
        ))
    }

    pub fn inf(&self) -> Option<f64> {
        self.intervals.first().map(|i| i.lo)
    }

    pub fn sup(&self) -> Option<f64> {
        self.intervals.last().map(|i| i.hi)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("interval union serializes")
    }

    pub fn from_json(s: &str) -> crate::Result<Self> {
        let v: Vec<Interval> = serde_json::from_str(s)?;
        Ok(Self::from_intervals(v))
    }
}

impl fmt::Display for IntervalUnion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "∅");
        }
        for (k, i) in self.intervals.iter().enumerate() {
            if k > 0 {
                write!(f, " ∪ ")?;
            }
            write!(f, "{i}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merges_overlapping_and_touching() {
        let u = IntervalUnion::from_intervals(vec![
            Interval::closed(3.0, 4.0),
            Interval::new(0.0, 1.0, true, false),
            Interval::closed(1.0, 2.0),
            Interval::new(5.0, 6.0, false, true),
            Interval::new(4.0, 5.0, false, false),
        ]);
        // [0,1) ∪ [1,2] merge; [3,4] ∪ (4,5) merge; (5,6] stays apart since 5 is in neither
        assert_eq!(u.intervals().len(), 3);
        assert_eq!(u.intervals()[0], Interval::closed(0.0, 2.0));
        assert!(!u.contains(5.0));
        assert!(u.contains(4.0));
    }

    #[test]
    fn open_endpoints_do_not_merge() {
        let u = IntervalUnion::from_intervals(vec![
            Interval::new(0.0, 1.0, true, false),
            Interval::new(1.0, 2.0, false, true),
        ]);
        assert_eq!(u.intervals().len(), 2);
        assert!(!u.contains(1.0));
    }

    #[test]
    fn unbounded_intervals_and_json() {
        let u = IntervalUnion::from_intervals(vec![
            Interval::new(f64::NEG_INFINITY, -0.0855, false, true),
            Interval::closed(0.0432, 1.8947),
        ]);
        let s = u.to_json();
        assert!(s.contains("\"-inf\""));
        assert_eq!(IntervalUnion::from_json(&s).unwrap(), u);
        assert!(u.contains(-1e300));
        assert!(!u.contains(0.0));
        let hull = u.convex_hull().unwrap();
        assert_eq!(hull.lo, f64::NEG_INFINITY);
        assert_eq!(hull.hi, 1.8947);
        assert_eq!(u.to_string(), "(-inf, -0.0855] ∪ [0.0432, 1.8947]");
    }

    #[test]
    fn subset() {
        let a = IntervalUnion::from_intervals(vec![Interval::closed(0.0, 1.0)]);
        let b =
            IntervalUnion::from_intervals(vec![Interval::closed(-1.0, 1.0), Interval::point(5.0)]);
        assert!(a.is_subset_of(&b));
        assert!(!b.is_subset_of(&a));
        assert!(IntervalUnion::empty().is_subset_of(&a));
    }
}
