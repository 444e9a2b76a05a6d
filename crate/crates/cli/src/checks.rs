//! Pass/fail checks on command results, used for exit-code gating.

use hybridpnt::gmp::CombinedParams;
use hybridpnt::{BimSequence, BoundsCase};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            pass,
            detail,
        }
    }
}

/// Reference cooperative bias parameters `(τ s, σ m)`.
pub const REFERENCE_AVERAGE: (f64, f64) = (5.5, 0.22);
pub const REFERENCE_WORST: (f64, f64) = (8.8, 0.62);
pub const PARAMETER_TOLERANCE: f64 = 0.2;

fn within(value: f64, reference: f64) -> bool {
    ((value - reference) / reference).abs() <= PARAMETER_TOLERANCE
}

/// Fitted average/worst-case parameters within ±20% of the reference set.
pub fn coop_parameters(c: &CombinedParams) -> Vec<Check> {
    [
        ("average-case", c.average, REFERENCE_AVERAGE),
        ("worst-case", c.worst, REFERENCE_WORST),
    ]
    .into_iter()
    .map(|(name, p, (tau, sigma))| {
        Check::new(
            name,
            within(p.tau, tau) && within(p.sigma(), sigma),
            format!("tau {:.3} s (ref {tau}), sigma {:.4} m (ref {sigma})", p.tau, p.sigma()),
        )
    })
    .collect()
}

fn curve<'a>(results: &'a [(String, BimSequence)], name: &str) -> &'a BimSequence {
    &results
        .iter()
        .find(|(n, _)| n == name)
        .unwrap_or_else(|| panic!("case result without `{name}`"))
        .1
}

/// Fraction of the window treated as steady state.
pub const STEADY_STATE_FRACTION: f64 = 0.1;

/// Relative slack for orderings that hold with equality in exact arithmetic.
const ORDER_SLACK: f64 = 1e-9;

/// Expected orderings between the curves of a bound case.
pub fn case_orderings(case: BoundsCase, results: &[(String, BimSequence)]) -> Vec<Check> {
    match case {
        BoundsCase::SiseModels => {
            let (w, g) = (curve(results, "wgn"), curve(results, "gmp1"));
            let n = w.peb.len();
            let from = n - ((n as f64 * STEADY_STATE_FRACTION).ceil() as usize).max(1);
            let bad = (from..n).filter(|&k| w.peb[k] > g.peb[k]).count();
            vec![Check::new(
                "wgn <= gmp1 at steady state",
                bad == 0,
                format!(
                    "{bad} of {} final epochs violate; final wgn {:.3} m, gmp1 {:.3} m",
                    n - from,
                    w.peb[n - 1],
                    g.peb[n - 1]
                ),
            )]
        }
        BoundsCase::SatVsHybrid => {
            let (s, h, hs) = (curve(results, "satellite"), curve(results, "hybrid"), curve(results, "hybrid_static"));
            let n = s.peb.len();
            let bad_h = (0..n).filter(|&k| h.peb[k] > s.peb[k] * (1.0 + ORDER_SLACK)).count();
            let bad_s = (0..n).filter(|&k| !(hs.peb[k] < h.peb[k])).count();
            vec![
                Check::new("hybrid <= satellite", bad_h == 0, format!("{bad_h} of {n} epochs violate")),
                Check::new("one static < all moving", bad_s == 0, format!("{bad_s} of {n} epochs violate")),
            ]
        }
        BoundsCase::ReferenceStation => {
            let (d, h) = (curve(results, "differential"), curve(results, "hybrid"));
            let n = d.peb.len();
            let both: Vec<usize> = (0..n).filter(|&k| d.is_defined(k) && h.is_defined(k)).collect();
            let bad = both.iter().filter(|&&k| !(h.peb[k] < d.peb[k])).count();
            let two: Vec<usize> = (0..n).filter(|&k| h.visible_sats[k] == 2).collect();
            let undefined = two.iter().filter(|&&k| !(h.peb[k].is_finite() && h.is_defined(k))).count();
            let worst = two.iter().map(|&k| h.peb[k]).fold(0.0, f64::max);
            vec![
                Check::new(
                    "hybrid < differential where both defined",
                    !both.is_empty() && bad == 0,
                    format!("{bad} of {} epochs violate", both.len()),
                ),
                Check::new(
                    "hybrid finite with 2 visible satellites",
                    !two.is_empty() && undefined == 0,
                    format!("{} epochs with 2 visible, {undefined} undefined, max PEB {worst:.3} m", two.len()),
                ),
            ]
        }
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}
