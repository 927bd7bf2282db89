//! Convex piecewise-linear functions on a closed interval.

/// Slopes closer than this are merged into one segment.
const SLOPE_EPS: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Segment {
    pub len: f64,
    pub slope: f64,
}

/// A convex piecewise-linear function on `[x0, x0 + Σ len]`, stored as its
/// value at the left end plus segments of nondecreasing slope.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ConvexPwl {
    pub x0: f64,
    pub y0: f64,
    pub segs: Vec<Segment>,
}

impl ConvexPwl {
    pub fn constant(lo: f64, hi: f64, value: f64) -> Self {
        let mut segs = Vec::new();
        if hi > lo {
            segs.push(Segment { len: hi - lo, slope: 0.0 });
        }
        Self { x0: lo, y0: value, segs }
    }

    /// Builds from vertices sorted by `x`. Consecutive slopes must be
    /// nondecreasing up to rounding.
    pub fn from_vertices(points: &[(f64, f64)]) -> Self {
        debug_assert!(!points.is_empty());
        let (x0, y0) = points[0];
        let mut out = Self { x0, y0, segs: Vec::with_capacity(points.len()) };
        for pair in points.windows(2) {
            let len = pair[1].0 - pair[0].0;
            if len <= 0.0 {
                continue;
            }
            out.push(Segment { len, slope: (pair[1].1 - pair[0].1) / len });
        }
        out
    }

    fn push(&mut self, seg: Segment) {
        if seg.len <= 0.0 {
            return;
        }
        if let Some(last) = self.segs.last_mut() {
            if (last.slope - seg.slope).abs() <= SLOPE_EPS * (1.0 + seg.slope.abs()) {
                last.len += seg.len;
                return;
            }
            // rounding can produce a marginally smaller slope; keep convexity
            if seg.slope < last.slope {
                let slope = last.slope;
                self.segs.push(Segment { len: seg.len, slope });
                return;
            }
        }
        self.segs.push(seg);
    }

    pub fn x_end(&self) -> f64 {
        self.x0 + self.segs.iter().map(|s| s.len).sum::<f64>()
    }

    /// Value at `x`, clamping `x` into the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let mut pos = self.x0;
        let mut value = self.y0;
        for seg in &self.segs {
            if x <= pos {
                break;
            }
            let step = (x - pos).min(seg.len);
            value += step * seg.slope;
            pos += seg.len;
        }
        value
    }

    /// `g(w) = f(-w)`.
    pub fn reflect(&self) -> Self {
        Self {
            x0: -self.x_end(),
            y0: self.eval(self.x_end()),
            segs: self.segs.iter().rev().map(|s| Segment { len: s.len, slope: -s.slope }).collect(),
        }
    }

    /// Infimal convolution `(f □ g)(z) = min_{x + y = z} f(x) + g(y)`.
    pub fn inf_conv(&self, other: &Self) -> Self {
        let mut out = Self {
            x0: self.x0 + other.x0,
            y0: self.y0 + other.y0,
            segs: Vec::with_capacity(self.segs.len() + other.segs.len()),
        };
        let (mut i, mut j) = (0, 0);
        while i < self.segs.len() || j < other.segs.len() {
            let take_self = match (self.segs.get(i), other.segs.get(j)) {
                (Some(a), Some(b)) => a.slope <= b.slope,
                (Some(_), None) => true,
                _ => false,
            };
            if take_self {
                out.push(self.segs[i]);
                i += 1;
            } else {
                out.push(other.segs[j]);
                j += 1;
            }
        }
        out
    }

    /// Restriction to `[lo, hi]`; `None` if the intersection is empty.
    pub fn restrict(&self, lo: f64, hi: f64) -> Option<Self> {
        let end = self.x_end();
        let lo = lo.max(self.x0);
        let hi = hi.min(end);
        if lo > hi {
            return None;
        }
        let mut out = Self { x0: lo, y0: self.eval(lo), segs: Vec::new() };
        let mut pos = self.x0;
        for seg in &self.segs {
            let a = pos.max(lo);
            let b = (pos + seg.len).min(hi);
            if b > a {
                out.segs.push(Segment { len: b - a, slope: seg.slope });
            }
            pos += seg.len;
            if pos >= hi {
                break;
            }
        }
        Some(out)
    }

    /// Vertices including both ends.
    pub fn vertices(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mut x = self.x0;
        let mut y = self.y0;
        std::iter::once((x, y)).chain(self.segs.iter().map(move |s| {
            x += s.len;
            y += s.len * s.slope;
            (x, y)
        }))
    }

    /// One-sided slopes at `x` (−∞/+∞ outside the domain edges). Points within
    /// `tol` of a breakpoint see both adjacent slopes.
    pub fn subgradient(&self, x: f64, tol: f64) -> (f64, f64) {
        let end = self.x_end();
        let mut left = if x <= self.x0 + tol { f64::NEG_INFINITY } else { f64::NAN };
        let mut right = if x >= end - tol { f64::INFINITY } else { f64::NAN };
        let mut pos = self.x0;
        for seg in &self.segs {
            let next = pos + seg.len;
            if left.is_nan() && x > pos + tol && x <= next + tol {
                left = seg.slope;
            }
            if right.is_nan() && x < next - tol && x >= pos - tol {
                right = seg.slope;
            }
            pos = next;
        }
        if left.is_nan() {
            left = self.segs.first().map_or(f64::NEG_INFINITY, |s| s.slope);
        }
        if right.is_nan() {
            right = self.segs.last().map_or(f64::INFINITY, |s| s.slope);
        }
        (left, right)
    }

    /// Minimum of `f(x) + λ·x` over the domain.
    pub fn min_tilted(&self, lambda: f64) -> f64 {
        self.vertices()
            .map(|(x, y)| y + lambda * x)
            .fold(f64::INFINITY, f64::min)
    }
}
