//! Synthetic layout-pattern generator.
//!
//! Non-hotspot clips contain 2-3 solid axis-aligned rectangles, every side at
//! least 2 px wide and pairwise separated by at least 2 empty cells. Hotspot
//! clips take the same base layout and inject exactly one defect motif:
//!
//! - `bridge`: a 1-px-wide connector drawn across the gap between the two
//!   facing rectangles;
//! - `necking`: one rectangle pinched to 1-px width at an interior row;
//! - `shorten`: one rectangle truncated by blanking a full 1-px slice,
//!   leaving a 1-px gap between the halves.
//!
//! The base construction guarantees all three motifs are always applicable:
//! rectangle A is at least 5 px long on its facing axis and 2-3 px wide, and
//! rectangle B faces it across a 2-3 px gap with overlapping span. An
//! optional third rectangle is placed at least 2 cells away from A, B and the
//! bridge corridor. The canonical layout faces horizontally; the finished
//! grid is transposed with probability 1/2.
//!
//! A rule-based scan ([`rule_based_label`]) inverts the construction: a clip
//! is a hotspot iff it contains a 1-px-wide structure (min-width violation:
//! some lit pixel whose horizontal or vertical run of lit pixels has length
//! 1) or a 1-px gap (min-spacing violation: a dark cell lit on both sides
//! horizontally or vertically). Generated samples agree with their labels by
//! construction.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Sample, GRID};
use crate::error::{Error, Result};
use crate::rng::{domains, stream};

#[derive(Clone, Copy, Debug)]
struct Rect {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
}

impl Rect {
    fn x_end(&self) -> usize {
        self.x + self.w
    }
    fn y_end(&self) -> usize {
        self.y + self.h
    }
}

/// Axis gap between spans; negative means overlap.
fn span_gap(a0: usize, a1: usize, b0: usize, b1: usize) -> isize {
    if b0 >= a1 {
        b0 as isize - a1 as isize
    } else if a0 >= b1 {
        a0 as isize - b1 as isize
    } else {
        -1
    }
}

/// True when the rectangles keep at least `min` empty cells between them in
/// some axis (the rule that forbids 1-px gaps and any adjacency).
fn well_separated(a: &Rect, b: &Rect, min: isize) -> bool {
    let gx = span_gap(a.x, a.x_end(), b.x, b.x_end());
    let gy = span_gap(a.y, a.y_end(), b.y, b.y_end());
    gx.max(gy) >= min
}

fn fill(grid: &mut [f64], r: &Rect) {
    for y in r.y..r.y_end() {
        for x in r.x..r.x_end() {
            grid[y * GRID + x] = 1.0;
        }
    }
}

struct Layout {
    grid: Vec<f64>,
    a: Rect,
    b: Rect,
}

/// Canonical base: A on the left (tall, >= 5 rows), B facing it across a
/// 2-3 px horizontal gap with at least one shared row, optional C clear of
/// both and of the corridor between them.
fn sample_base(rng: &mut ChaCha8Rng) -> Layout {
    let ah = rng.gen_range(5..=8usize);
    let aw = rng.gen_range(2..=3usize);
    let gap = rng.gen_range(2..=3usize);
    let ax = rng.gen_range(0..=GRID - aw - gap - 2);
    let ay = rng.gen_range(0..=GRID - ah);
    let a = Rect {
        x: ax,
        y: ay,
        w: aw,
        h: ah,
    };

    let bx = ax + aw + gap;
    let bw = rng.gen_range(2..=3usize.min(GRID - bx));
    let bh = rng.gen_range(2..=6usize);
    let by_lo = ay.saturating_sub(bh - 1);
    let by_hi = (ay + ah - 1).min(GRID - bh);
    let by = rng.gen_range(by_lo..=by_hi);
    let b = Rect {
        x: bx,
        y: by,
        w: bw,
        h: bh,
    };

    let mut grid = vec![0.0; GRID * GRID];
    fill(&mut grid, &a);
    fill(&mut grid, &b);

    if rng.gen_bool(0.5) {
        // corridor between A and B (bridge drawing zone), padded like a rect
        let ov_lo = ay.max(by);
        let ov_hi = (ay + ah).min(by + bh);
        let corridor = Rect {
            x: a.x_end(),
            y: ov_lo,
            w: gap,
            h: ov_hi - ov_lo,
        };
        let cw = rng.gen_range(2..=3usize);
        let ch = rng.gen_range(2..=3usize);
        let mut feasible = Vec::new();
        for cy in 0..=GRID - ch {
            for cx in 0..=GRID - cw {
                let c = Rect {
                    x: cx,
                    y: cy,
                    w: cw,
                    h: ch,
                };
                if well_separated(&c, &a, 2)
                    && well_separated(&c, &b, 2)
                    && well_separated(&c, &corridor, 2)
                {
                    feasible.push(c);
                }
            }
        }
        if !feasible.is_empty() {
            let c = feasible[rng.gen_range(0..feasible.len())];
            fill(&mut grid, &c);
        }
    }

    Layout { grid, a, b }
}

fn apply_motif(layout: &mut Layout, rng: &mut ChaCha8Rng) {
    match rng.gen_range(0..3u8) {
        // bridge: 1-px connector across the gap at a shared row
        0 => {
            let a = layout.a;
            let b = layout.b;
            let ov_lo = a.y.max(b.y);
            let ov_hi = (a.y_end()).min(b.y_end());
            let row = rng.gen_range(ov_lo..ov_hi);
            for x in a.x_end()..b.x {
                layout.grid[row * GRID + x] = 1.0;
            }
        }
        // necking: pinch A to a single pixel at an interior row
        1 => {
            let a = layout.a;
            let row = rng.gen_range(a.y + 1..a.y_end() - 1);
            let keep = rng.gen_range(a.x..a.x_end());
            for x in a.x..a.x_end() {
                if x != keep {
                    layout.grid[row * GRID + x] = 0.0;
                }
            }
        }
        // shorten: blank a full slice of A, both halves stay >= 2 rows
        _ => {
            let a = layout.a;
            let row = rng.gen_range(a.y + 2..=a.y_end() - 3);
            for x in a.x..a.x_end() {
                layout.grid[row * GRID + x] = 0.0;
            }
        }
    }
}

fn transpose(grid: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; GRID * GRID];
    for y in 0..GRID {
        for x in 0..GRID {
            out[x * GRID + y] = grid[y * GRID + x];
        }
    }
    out
}

fn make_sample(label: u8, rng: &mut ChaCha8Rng) -> Sample {
    let mut layout = sample_base(rng);
    if label == 1 {
        apply_motif(&mut layout, rng);
    }
    let grid = if rng.gen_bool(0.5) {
        transpose(&layout.grid)
    } else {
        layout.grid
    };
    Sample { grid, label }
}

/// Rule-based min-width / min-spacing scan; returns the class the scan
/// assigns (1 when a defect signature is present).
pub fn rule_based_label(grid: &[f64]) -> u8 {
    let lit = |x: isize, y: isize| -> bool {
        x >= 0 && y >= 0 && x < GRID as isize && y < GRID as isize && grid[y as usize * GRID + x as usize] == 1.0
    };
    for y in 0..GRID as isize {
        for x in 0..GRID as isize {
            if lit(x, y) {
                // run lengths through this pixel
                let mut hrun = 1;
                let mut t = x - 1;
                while lit(t, y) {
                    hrun += 1;
                    t -= 1;
                }
                t = x + 1;
                while lit(t, y) {
                    hrun += 1;
                    t += 1;
                }
                let mut vrun = 1;
                t = y - 1;
                while lit(x, t) {
                    vrun += 1;
                    t -= 1;
                }
                t = y + 1;
                while lit(x, t) {
                    vrun += 1;
                    t += 1;
                }
                if hrun.min(vrun) == 1 {
                    return 1; // 1-px-wide structure
                }
            } else if (lit(x - 1, y) && lit(x + 1, y)) || (lit(x, y - 1) && lit(x, y + 1)) {
                return 1; // 1-px gap
            }
        }
    }
    0
}

fn round_half_up(v: f64) -> usize {
    (v + 0.5).floor() as usize
}

/// Generate `n` samples with approximately `hotspot_rate` positives
/// (`round_half_up(n * rate)` clamped so each class has at least one
/// sample), then shuffle the class sequence with the same seeded stream.
pub fn generate_synthetic(n: usize, hotspot_rate: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::Data(
            "need at least 2 samples to honor the hotspot rate (one per class)".into(),
        ));
    }
    if !(hotspot_rate > 0.0 && hotspot_rate < 1.0) {
        return Err(Error::Data(format!(
            "hotspot_rate must be in (0, 1), got {hotspot_rate}"
        )));
    }
    let hotspots = round_half_up(n as f64 * hotspot_rate).clamp(1, n - 1);

    let mut rng = stream(seed, domains::GENERATE, 0);
    let mut labels: Vec<u8> = vec![1; hotspots];
    labels.extend(std::iter::repeat(0u8).take(n - hotspots));
    // Fisher-Yates over the label sequence
    for i in (1..labels.len()).rev() {
        let j = rng.gen_range(0..=i);
        labels.swap(i, j);
    }

    let samples = labels
        .into_iter()
        .map(|label| make_sample(label, &mut rng))
        .collect();
    Ok(Dataset::new(format!("synthetic-{seed}"), samples))
}
