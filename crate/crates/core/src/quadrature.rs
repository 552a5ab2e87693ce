//! Adaptive Gauss–Legendre integration with known breakpoints.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

const COARSE_ORDER: usize = 10;
const FINE_ORDER: usize = 20;
const MAX_INTERVALS: usize = 20_000;

fn rules() -> &'static (GaussLegendre, GaussLegendre) {
    static RULES: OnceLock<(GaussLegendre, GaussLegendre)> = OnceLock::new();
    RULES.get_or_init(|| {
        (
            GaussLegendre::new(NonZeroUsize::new(COARSE_ORDER).unwrap()),
            GaussLegendre::new(NonZeroUsize::new(FINE_ORDER).unwrap()),
        )
    })
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

/// Integrates `f` over `[a, b]`, splitting first at every breakpoint inside
/// the interval. The panel with the largest disagreement between the 10-
/// and 20-point rules is bisected until the summed disagreement meets the
/// tolerance, which also copes with integrable endpoint singularities.
pub(crate) fn integrate<F>(f: F, a: f64, b: f64, breakpoints: &[f64], tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(0.0);
    }
    let (coarse, fine) = rules();
    let panel = |lo: f64, hi: f64| {
        let value = fine.integrate(lo, hi, &f);
        let err = (value - coarse.integrate(lo, hi, &f)).abs();
        Panel { lo, hi, value, err }
    };
    let mut edges = vec![a];
    edges.extend(breakpoints.iter().copied().filter(|&t| t > a && t < b));
    edges.push(b);

    let mut heap: BinaryHeap<Panel> = edges.windows(2).map(|w| panel(w[0], w[1])).collect();
    let sums = |heap: &BinaryHeap<Panel>| {
        heap.iter().fold((0.0, 0.0, 0.0), |(t, e, m), p| {
            (t + p.value, e + p.err, m + p.value.abs())
        })
    };
    let budget = |total: f64, magnitude: f64| {
        tol.abs
            .max(tol.rel * total.abs())
            .max(8.0 * f64::EPSILON * magnitude)
    };
    let mut panels = heap.len();
    let (mut total, mut err, mut magnitude) = sums(&heap);
    loop {
        if err <= budget(total, magnitude) {
            // running sums drift; confirm before stopping
            (total, err, magnitude) = sums(&heap);
            if err <= budget(total, magnitude) {
                break;
            }
        }
        let worst = heap.pop().expect("at least one panel");
        let mid = 0.5 * (worst.lo + worst.hi);
        if panels >= MAX_INTERVALS || !(mid > worst.lo && mid < worst.hi) {
            return Err(Error::NoConvergence {
                iterations: panels,
                achieved: err,
            });
        }
        let (left, right) = (panel(worst.lo, mid), panel(mid, worst.hi));
        total += left.value + right.value - worst.value;
        err += left.err + right.err - worst.err;
        magnitude += left.value.abs() + right.value.abs() - worst.value.abs();
        heap.push(left);
        heap.push(right);
        panels += 1;
    }

    let mut ordered = heap.into_vec();
    ordered.sort_by(|x, y| x.lo.total_cmp(&y.lo));
    // Kahan summation in abscissa order keeps the result independent of
    // the refinement history.
    let (mut sum, mut compensation) = (0.0f64, 0.0f64);
    for p in &ordered {
        let y = p.value - compensation;
        let t = sum + y;
        compensation = (t - sum) - y;
        sum = t;
    }
    if !sum.is_finite() {
        return Err(Error::NoConvergence {
            iterations: panels,
            achieved: f64::NAN,
        });
    }
    Ok(sum)
}
