#![allow(dead_code)]

use std::collections::HashMap;

use evqa::{Point, QuadBox};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

pub fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    (unit(rng) * n as f64) as usize % n
}

/// Edit distance straight from the recurrence, memoized on suffix pairs.
pub fn levenshtein_recursive(a: &str, b: &str) -> usize {
    fn go(a: &[char], b: &[char], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&d) = memo.get(&(i, j)) {
            return d;
        }
        let d = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo.insert((i, j), d);
        d
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    go(&a, &b, 0, 0, &mut HashMap::new())
}

const MIXED: &[char] = &[
    'a', 'b', 'c', 'e', 'x', 'Z', '0', '7', ' ', '/', 'é', '中', '路', '河', '南', '业', '水', '电',
];

/// Short string over a small Latin/CJK alphabet so that pairs share symbols.
pub fn mixed_string(rng: &mut ChaCha8Rng, max_len: usize) -> String {
    let len = below(rng, max_len + 1);
    (0..len).map(|_| MIXED[below(rng, MIXED.len())]).collect()
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Random strictly convex quadrilateral around `(cx, cy)`.
pub fn convex_quad(rng: &mut ChaCha8Rng, cx: f64, cy: f64, size: f64) -> QuadBox {
    loop {
        let pts: Vec<Point> = (0..4)
            .map(|_| Point::new(cx + size * (unit(rng) - 0.5), cy + size * (unit(rng) - 0.5)))
            .collect();
        let h = hull(pts);
        if h.len() != 4 {
            continue;
        }
        let area: f64 = (0..4).map(|i| cross(Point::new(0.0, 0.0), h[i], h[(i + 1) % 4])).sum::<f64>() / 2.0;
        if area < size * size * 0.02 {
            continue;
        }
        if let Ok(q) = QuadBox::new([h[0], h[1], h[2], h[3]]) {
            return q;
        }
    }
}

/// A pair of convex quads whose centres are close enough to overlap often.
pub fn convex_pair(rng: &mut ChaCha8Rng) -> (QuadBox, QuadBox) {
    let a = convex_quad(rng, 50.0, 50.0, 10.0);
    let (cx, cy) = (50.0 + 6.0 * (unit(rng) - 0.5), 50.0 + 6.0 * (unit(rng) - 0.5));
    let size = 4.0 + 8.0 * unit(rng);
    let b = convex_quad(rng, cx, cy, size);
    (a, b)
}

fn inside_convex(q: &QuadBox, p: Point) -> bool {
    let v = q.vertices();
    let sign = (0..4).map(|i| cross(v[i], v[(i + 1) % 4], p));
    let mut pos = false;
    let mut neg = false;
    for s in sign {
        pos |= s > 0.0;
        neg |= s < 0.0;
    }
    !(pos && neg)
}

/// IoU estimated by jittered grid sampling over the joint bounding box.
pub fn monte_carlo_iou(a: &QuadBox, b: &QuadBox, samples: usize, rng: &mut ChaCha8Rng) -> f64 {
    let all = a.vertices().iter().chain(b.vertices().iter());
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in all {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    let side = (samples as f64).sqrt().ceil() as usize;
    let (dx, dy) = ((x1 - x0) / side as f64, (y1 - y0) / side as f64);
    let (mut both, mut either) = (0usize, 0usize);
    for i in 0..side {
        for j in 0..side {
            let p = Point::new(x0 + (i as f64 + unit(rng)) * dx, y0 + (j as f64 + unit(rng)) * dy);
            let (ia, ib) = (inside_convex(a, p), inside_convex(b, p));
            both += usize::from(ia && ib);
            either += usize::from(ia || ib);
        }
    }
    if either == 0 {
        0.0
    } else {
        both as f64 / either as f64
    }
}
