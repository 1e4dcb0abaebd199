use serde::{Deserialize, Serialize};

/// Ordinary least-squares fit `y ≈ intercept + slope · x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub n: u64,
    pub slope: f64,
    pub intercept: f64,
    /// `1 - SS_res / SS_tot`; `None` when `x` or `y` is constant.
    pub r2: Option<f64>,
}

/// Streaming co-moments for simple linear regression.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Regression {
    n: u64,
    mean_x: f64,
    mean_y: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl Regression {
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let n = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        self.sxx += dx * (x - self.mean_x);
        self.syy += dy * (y - self.mean_y);
        self.sxy += dx * (y - self.mean_y);
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn fit(&self) -> LinearFit {
        let slope = if self.sxx > 0.0 { self.sxy / self.sxx } else { 0.0 };
        let r2 = (self.sxx > 0.0 && self.syy > 0.0)
            .then(|| (self.sxy * self.sxy / (self.sxx * self.syy)).min(1.0));
        LinearFit {
            n: self.n,
            slope,
            intercept: self.mean_y - slope * self.mean_x,
            r2,
        }
    }
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> LinearFit {
    let mut r = Regression::default();
    for (&x, &y) in xs.iter().zip(ys) {
        r.push(x, y);
    }
    r.fit()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMean {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMean {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation (`n - 1` denominator); zero for fewer than two values.
    pub fn std_dev(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt()
        }
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Exact counts of a small set of discrete values, e.g. accuracies over a
/// fixed test set. Gives exact quartiles without storing every record.
#[derive(Debug, Clone, Default)]
pub struct ValueCounts {
    counts: std::collections::BTreeMap<u64, u64>,
    total: u64,
}

impl ValueCounts {
    pub fn push(&mut self, x: f64) {
        *self.counts.entry(order_key(x)).or_default() += 1;
        self.total += 1;
    }

    pub fn count_at_least(&self, x: f64) -> u64 {
        self.counts.range(order_key(x)..).map(|(_, c)| c).sum()
    }

    /// Same interpolation as [`quantile_sorted`].
    pub fn quantile(&self, q: f64) -> Option<f64> {
        if self.total == 0 {
            return None;
        }
        let pos = q.clamp(0.0, 1.0) * (self.total - 1) as f64;
        let (lo, hi) = (pos.floor() as u64, pos.ceil() as u64);
        let (a, b) = (self.nth(lo), self.nth(hi));
        Some(a + (pos - lo as f64) * (b - a))
    }

    fn nth(&self, rank: u64) -> f64 {
        let mut seen = 0;
        for (&key, &c) in &self.counts {
            seen += c;
            if rank < seen {
                return from_order_key(key);
            }
        }
        unreachable!("rank below total")
    }
}

/// Monotone map from finite floats to integers.
fn order_key(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | 1 << 63
    }
}

fn from_order_key(k: u64) -> f64 {
    f64::from_bits(if k >> 63 == 1 { k & !(1 << 63) } else { !k })
}

/// One cell of a 2-D histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityBin {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub count: u64,
}

/// `bins × bins` histogram over the data's bounding box, row-major in `x`.
pub fn density_bins(xs: &[f64], ys: &[f64], bins: usize) -> Vec<DensityBin> {
    if xs.is_empty() || bins == 0 {
        return Vec::new();
    }
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, if hi > lo { hi } else { lo + 1.0 })
    };
    let (x0, x1) = range(xs);
    let (y0, y1) = range(ys);
    let cell = |v: f64, lo: f64, hi: f64| (((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1);
    let mut counts = vec![0u64; bins * bins];
    for (&x, &y) in xs.iter().zip(ys) {
        counts[cell(x, x0, x1) * bins + cell(y, y0, y1)] += 1;
    }
    let wx = (x1 - x0) / bins as f64;
    let wy = (y1 - y0) / bins as f64;
    counts
        .iter()
        .enumerate()
        .map(|(i, &count)| {
            let (bx, by) = ((i / bins) as f64, (i % bins) as f64);
            DensityBin {
                x_lo: x0 + bx * wx,
                x_hi: x0 + (bx + 1.0) * wx,
                y_lo: y0 + by * wy,
                y_hi: y0 + (by + 1.0) * wy,
                count,
            }
        })
        .collect()
}
