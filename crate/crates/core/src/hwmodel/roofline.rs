//! Four-regime piecewise-linear rooflines and their least-squares fit.

use std::collections::BinaryHeap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One linear piece `a * κ + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: f64,
    pub b: f64,
}

impl Segment {
    pub fn at(&self, kappa: f64) -> f64 {
        self.a * kappa + self.b
    }
}

/// Maps operational intensity κ to attainable performance (η, instructions
/// per second) or energy efficiency (ζ, instructions per joule).
///
/// Regimes: `κ ≤ κ_L1`, `κ ≤ κ_L2`, `κ ≤ κ_roof`, then a flat plateau.
/// Construction enforces continuity at every boundary and nonnegative slopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RooflineParams {
    boundaries: [f64; 3],
    plateau: f64,
    segments: [Segment; 3],
}

/// Relative tolerance for the continuity check.
const CONTINUITY_TOL: f64 = 1e-6;

impl RooflineParams {
    pub fn new(boundaries: [f64; 3], segments: [Segment; 3], plateau: f64) -> Result<Self> {
        let [k1, k2, k3] = boundaries;
        if !(k1 > 0.0 && k1 < k2 && k2 < k3 && k3.is_finite()) {
            return Err(Error::Cost(format!(
                "roofline boundaries must satisfy 0 < κL1 < κL2 < κroof, got {boundaries:?}"
            )));
        }
        for s in &segments {
            if !(s.a.is_finite() && s.b.is_finite()) {
                return Err(Error::Cost("roofline coefficients must be finite".into()));
            }
            if s.a < 0.0 {
                return Err(Error::Cost(format!(
                    "roofline slope {} would make it decreasing",
                    s.a
                )));
            }
        }
        if !plateau.is_finite() {
            return Err(Error::Cost("roofline plateau must be finite".into()));
        }
        let joints = [
            (segments[0].at(k1), segments[1].at(k1)),
            (segments[1].at(k2), segments[2].at(k2)),
            (segments[2].at(k3), plateau),
        ];
        for (i, (left, right)) in joints.into_iter().enumerate() {
            if (left - right).abs() > CONTINUITY_TOL * left.abs().max(right.abs()).max(1.0) {
                return Err(Error::Cost(format!(
                    "roofline discontinuous at boundary {}: {left} vs {right}",
                    i + 1
                )));
            }
        }
        Ok(Self {
            boundaries,
            segments,
            plateau,
        })
    }

    /// Builds the roofline through `(0, y0)`, `(κL1, y1)`, `(κL2, y2)`,
    /// `(κroof, y3)` with plateau `y3`.
    pub fn from_knots(boundaries: [f64; 3], knots: [f64; 4]) -> Result<Self> {
        let xs = [0.0, boundaries[0], boundaries[1], boundaries[2]];
        let seg = |i: usize| {
            let a = (knots[i + 1] - knots[i]) / (xs[i + 1] - xs[i]);
            Segment {
                a,
                b: knots[i] - a * xs[i],
            }
        };
        Self::new(boundaries, [seg(0), seg(1), seg(2)], knots[3])
    }

    pub fn boundaries(&self) -> [f64; 3] {
        self.boundaries
    }

    pub fn segments(&self) -> [Segment; 3] {
        self.segments
    }

    pub fn plateau(&self) -> f64 {
        self.plateau
    }

    /// Values at `0, κL1, κL2, κroof`.
    pub fn knots(&self) -> [f64; 4] {
        let [k1, k2, k3] = self.boundaries;
        [
            self.segments[0].b,
            self.segments[0].at(k1),
            self.segments[1].at(k2),
            self.segments[2].at(k3),
        ]
    }

    pub fn eval(&self, kappa: f64) -> Result<f64> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::Cost(format!(
                "operational intensity must be positive, got {kappa}"
            )));
        }
        Ok(self.eval_unchecked(kappa))
    }

    fn eval_unchecked(&self, kappa: f64) -> f64 {
        let [k1, k2, k3] = self.boundaries;
        if kappa <= k1 {
            self.segments[0].at(kappa)
        } else if kappa <= k2 {
            self.segments[1].at(kappa)
        } else if kappa <= k3 {
            self.segments[2].at(kappa)
        } else {
            self.plateau
        }
    }

    /// Multiplies every output by `factor` (frequency scaling of η).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let seg = |s: Segment| Segment {
            a: s.a * factor,
            b: s.b * factor,
        };
        Self::new(
            self.boundaries,
            self.segments.map(seg),
            self.plateau * factor,
        )
    }
}

/// Accepts either explicit segments or knot values.
#[derive(Deserialize)]
#[serde(untagged)]
enum RooflineRepr {
    Segments {
        boundaries: [f64; 3],
        segments: [Segment; 3],
        plateau: f64,
    },
    Knots {
        boundaries: [f64; 3],
        knots: [f64; 4],
    },
}

impl<'de> Deserialize<'de> for RooflineParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = RooflineRepr::deserialize(d)?;
        let built = match repr {
            RooflineRepr::Segments {
                boundaries,
                segments,
                plateau,
            } => RooflineParams::new(boundaries, segments, plateau),
            RooflineRepr::Knots { boundaries, knots } => {
                RooflineParams::from_knots(boundaries, knots)
            }
        };
        built.map_err(serde::de::Error::custom)
    }
}

/// Minimum number of calibration samples.
pub const MIN_FIT_SAMPLES: usize = 8;
/// Minimum samples in each regime.
const MIN_PER_REGIME: usize = 2;
/// Candidate partitions re-scored with the continuous model.
const RESCORE: usize = 64;
/// Upper bound on split positions examined per boundary.
const MAX_SPLITS: usize = 240;

/// Running sums over a prefix of sorted samples.
#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    n: f64,
    x: f64,
    y: f64,
    xx: f64,
    xy: f64,
    yy: f64,
}

impl Sums {
    fn minus(&self, o: &Sums) -> Sums {
        Sums {
            n: self.n - o.n,
            x: self.x - o.x,
            y: self.y - o.y,
            xx: self.xx - o.xx,
            xy: self.xy - o.xy,
            yy: self.yy - o.yy,
        }
    }

    /// Least-squares line and its residual, if the x spread allows one.
    fn line(&self) -> Option<(Segment, f64)> {
        let sxx = self.xx - self.x * self.x / self.n;
        if sxx <= 1e-12 * self.xx.max(1.0) {
            return None;
        }
        let sxy = self.xy - self.x * self.y / self.n;
        let syy = self.yy - self.y * self.y / self.n;
        let a = sxy / sxx;
        let b = (self.y - a * self.x) / self.n;
        Some((Segment { a, b }, (syy - a * sxy).max(0.0)))
    }

    fn constant(&self) -> (f64, f64) {
        let mean = self.y / self.n;
        (mean, (self.yy - self.y * mean).max(0.0))
    }
}

/// Fits a continuous four-regime roofline to `(κ, y)` samples.
///
/// The sorted samples are split into four contiguous groups; the first three
/// get independent least-squares lines and the last a constant. Boundaries
/// are the intersections of adjacent pieces, which makes the model
/// continuous. The best splits by piecewise residual are re-scored with the
/// continuous model, then boundaries are polished by a local search with
/// knot values refitted by least squares.
pub fn fit_roofline(samples: &[(f64, f64)]) -> Result<RooflineParams> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "need at least {MIN_FIT_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if samples
        .iter()
        .any(|&(k, y)| !(k > 0.0 && k.is_finite() && y.is_finite()))
    {
        return Err(Error::Fit("samples need positive κ and finite values".into()));
    }
    let mut pts = samples.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pts.len();

    let mut prefix = vec![Sums::default(); n + 1];
    for (i, &(x, y)) in pts.iter().enumerate() {
        let p = prefix[i];
        prefix[i + 1] = Sums {
            n: p.n + 1.0,
            x: p.x + x,
            y: p.y + y,
            xx: p.xx + x * x,
            xy: p.xy + x * y,
            yy: p.yy + y * y,
        };
    }
    let group = |lo: usize, hi: usize| prefix[hi].minus(&prefix[lo]);

    let stride = n.div_ceil(MAX_SPLITS).max(1);
    let splits: Vec<usize> = (MIN_PER_REGIME..=n - MIN_PER_REGIME).step_by(stride).collect();
    // max-heap on residual keeps the RESCORE smallest
    let mut best: BinaryHeap<(OrdF64, usize, usize, usize)> = BinaryHeap::new();
    for (i1, &s1) in splits.iter().enumerate() {
        let Some((_, r1)) = group(0, s1).line() else { continue };
        for (i2, &s2) in splits.iter().enumerate().skip(i1 + 1) {
            if s2 - s1 < MIN_PER_REGIME {
                continue;
            }
            let Some((_, r2)) = group(s1, s2).line() else { continue };
            for &s3 in &splits[i2 + 1..] {
                if s3 - s2 < MIN_PER_REGIME || n - s3 < MIN_PER_REGIME {
                    continue;
                }
                let Some((_, r3)) = group(s2, s3).line() else { continue };
                let (_, r4) = group(s3, n).constant();
                let total = r1 + r2 + r3 + r4;
                if best.len() < RESCORE {
                    best.push((OrdF64(total), s1, s2, s3));
                } else if total < best.peek().expect("heap is full").0 .0 {
                    best.pop();
                    best.push((OrdF64(total), s1, s2, s3));
                }
            }
        }
    }

    let mut chosen: Option<(f64, RooflineParams)> = None;
    for (_, s1, s2, s3) in best.into_sorted_vec() {
        let (g1, _) = group(0, s1).line().expect("scored groups have lines");
        let (g2, _) = group(s1, s2).line().expect("scored groups have lines");
        let (g3, _) = group(s2, s3).line().expect("scored groups have lines");
        let (top, _) = group(s3, n).constant();
        let Some(k1) = intersect(g1, g2) else { continue };
        let Some(k2) = intersect(g2, g3) else { continue };
        let Some(k3) = intersect(g3, Segment { a: 0.0, b: top }) else { continue };
        let Ok(params) = RooflineParams::new([k1, k2, k3], [g1, g2, g3], g3.at(k3)) else {
            continue;
        };
        let sse = residual(&params, &pts);
        if chosen.as_ref().is_none_or(|(s, _)| sse < *s) {
            chosen = Some((sse, params));
        }
    }
    let (mut sse, mut params) = chosen.ok_or_else(|| {
        Error::Fit("samples do not span four increasing regimes".into())
    })?;

    if let Some((s, p)) = knot_fit(&pts, params.boundaries) {
        if s < sse {
            (sse, params) = (s, p);
        }
    }
    let mut step = 0.05;
    for _ in 0..40 {
        let mut improved = false;
        for idx in 0..3 {
            for dir in [-1.0, 1.0] {
                let mut b = params.boundaries;
                b[idx] *= 1.0 + dir * step;
                if let Some((s, p)) = knot_fit(&pts, b) {
                    if s < sse {
                        (sse, params) = (s, p);
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step /= 2.0;
            if step < 1e-7 {
                break;
            }
        }
    }
    Ok(params)
}

fn intersect(l: Segment, r: Segment) -> Option<f64> {
    let da = l.a - r.a;
    if da.abs() < f64::EPSILON * l.a.abs().max(r.a.abs()).max(1e-300) {
        return None;
    }
    let x = (r.b - l.b) / da;
    x.is_finite().then_some(x)
}

fn residual(params: &RooflineParams, pts: &[(f64, f64)]) -> f64 {
    pts.iter()
        .map(|&(k, y)| (params.eval_unchecked(k) - y).powi(2))
        .sum()
}

/// Least-squares knot values for fixed boundaries.
fn knot_fit(pts: &[(f64, f64)], b: [f64; 3]) -> Option<(f64, RooflineParams)> {
    if !(b[0] > 0.0 && b[0] < b[1] && b[1] < b[2]) {
        return None;
    }
    let xs = [0.0, b[0], b[1], b[2]];
    let mut design = DMatrix::<f64>::zeros(pts.len(), 4);
    let mut target = DVector::<f64>::zeros(pts.len());
    for (row, &(k, y)) in pts.iter().enumerate() {
        target[row] = y;
        match (0..3).find(|&i| k <= xs[i + 1]) {
            Some(i) => {
                let t = (k - xs[i]) / (xs[i + 1] - xs[i]);
                design[(row, i)] = 1.0 - t;
                design[(row, i + 1)] = t;
            }
            None => design[(row, 3)] = 1.0,
        }
    }
    let knots = design.svd(true, true).solve(&target, 1e-12).ok()?;
    let params = RooflineParams::from_knots(b, [knots[0], knots[1], knots[2], knots[3]]).ok()?;
    Some((residual(&params, pts), params))
}

#[derive(Debug, Clone, Copy)]
struct OrdF64(f64);

impl PartialEq for OrdF64 {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}
