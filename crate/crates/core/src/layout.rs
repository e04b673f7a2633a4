//! Planar layout of embedding spaces from their pairwise RPD matrix.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairwise::DistanceMatrix;

pub const REFINE_ITERATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutMap {
    pub names: Vec<String>,
    pub coords: Vec<(f64, f64)>,
    pub anchors: (String, String),
    /// Root-mean-square relative error between target and realized distances.
    pub stress: f64,
    /// Set when some point's circles did not intersect and it was projected.
    pub projected: bool,
}

impl LayoutMap {
    pub fn coord(&self, name: &str) -> Option<(f64, f64)> {
        self.names.iter().position(|n| n == name).map(|i| self.coords[i])
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.coords[i], self.coords[j]);
        (a.0 - b.0).hypot(a.1 - b.1)
    }

    /// `name x y` rows under a header, stress in a trailing comment.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("name\tx\ty\n");
        for (name, (x, y)) in self.names.iter().zip(&self.coords) {
            let _ = writeln!(out, "{name}\t{x:?}\t{y:?}");
        }
        let _ = writeln!(out, "# stress\t{:?}", self.stress);
        out
    }
}

/// Squared-residual weights `1 / D_ij^2`. Pairs at distance zero use the
/// mean target distance instead so that collocation is still enforced.
struct Objective {
    target: Vec<Vec<f64>>,
    weight: Vec<Vec<f64>>,
    pairs: usize,
}

impl Objective {
    fn new(dist: &DistanceMatrix) -> Self {
        let k = dist.len();
        let off: Vec<f64> = (0..k)
            .flat_map(|i| ((i + 1)..k).map(move |j| (i, j)))
            .map(|(i, j)| dist.get(i, j))
            .collect();
        let mean = off.iter().sum::<f64>() / off.len().max(1) as f64;
        let weight = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        let d = dist.get(i, j);
                        let scale = if d > 0.0 { d } else { mean };
                        if scale > 0.0 { 1.0 / (scale * scale) } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        Objective {
            target: dist.rows().to_vec(),
            weight,
            pairs: off.len(),
        }
    }

    fn value(&self, x: &[(f64, f64)]) -> f64 {
        let mut f = 0.0;
        for i in 0..x.len() {
            for j in (i + 1)..x.len() {
                let r = (x[i].0 - x[j].0).hypot(x[i].1 - x[j].1) - self.target[i][j];
                f += self.weight[i][j] * r * r;
            }
        }
        f
    }

    fn stress(&self, x: &[(f64, f64)]) -> f64 {
        if self.pairs == 0 {
            return 0.0;
        }
        (self.value(x) / self.pairs as f64).sqrt()
    }

    fn gradient(&self, x: &[(f64, f64)], fixed: &[bool]) -> Vec<(f64, f64)> {
        let mut g = vec![(0.0, 0.0); x.len()];
        for i in 0..x.len() {
            for j in 0..x.len() {
                if i == j || fixed[i] {
                    continue;
                }
                let (dx, dy) = (x[i].0 - x[j].0, x[i].1 - x[j].1);
                let len = dx.hypot(dy);
                if len == 0.0 {
                    continue;
                }
                let c = 2.0 * self.weight[i][j] * (len - self.target[i][j]) / len;
                g[i].0 += c * dx;
                g[i].1 += c * dy;
            }
        }
        g
    }
}

/// Backtracking gradient descent with the fixed points held in place.
/// Returns the objective after every iteration; it never increases.
fn refine(obj: &Objective, x: &mut [(f64, f64)], fixed: &[bool], iterations: usize) -> Vec<f64> {
    let mut f = obj.value(x);
    let mut step = 1.0;
    let mut history = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let g = obj.gradient(x, fixed);
        let g2: f64 = g.iter().map(|(a, b)| a * a + b * b).sum();
        if g2 == 0.0 || !g2.is_finite() {
            history.push(f);
            continue;
        }
        step *= 2.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<(f64, f64)> = x
                .iter()
                .zip(&g)
                .map(|(p, d)| (p.0 - step * d.0, p.1 - step * d.1))
                .collect();
            let fc = obj.value(&cand);
            if fc <= f - 1e-4 * step * g2 {
                x.copy_from_slice(&cand);
                f = fc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            step = 1.0;
        }
        history.push(f);
    }
    history
}

/// Intersection of circles of radius `ra` around the origin and `rb` around
/// `(base, 0)`, upper half-plane. `None` when the circles miss each other;
/// the point on the line of centres is returned alongside.
fn circle_point(base: f64, ra: f64, rb: f64) -> ((f64, f64), bool) {
    let x = (ra * ra - rb * rb + base * base) / (2.0 * base);
    let h2 = ra * ra - x * x;
    if h2 >= 0.0 {
        ((x, h2.sqrt()), true)
    } else {
        ((x, 0.0), false)
    }
}

/// Least-squares position from distances to already placed points, by
/// linearizing against the first placed point. `None` when the placed
/// points are collinear.
fn trilaterate(placed: &[(f64, f64)], radii: &[f64]) -> Option<(f64, f64)> {
    let (p0, r0) = (placed[0], radii[0]);
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (p, r) in placed.iter().zip(radii).skip(1) {
        let (ax, ay) = (2.0 * (p.0 - p0.0), 2.0 * (p.1 - p0.1));
        let rhs = r0 * r0 - r * r + (p.0 * p.0 + p.1 * p.1) - (p0.0 * p0.0 + p0.1 * p0.1);
        a11 += ax * ax;
        a12 += ax * ay;
        a22 += ay * ay;
        b1 += ax * rhs;
        b2 += ay * rhs;
    }
    let det = a11 * a22 - a12 * a12;
    let scale = (a11 + a22).powi(2);
    if !(det > 1e-12 * scale) {
        return None;
    }
    Some(((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det))
}

/// Places every space in the plane with `anchor_a` at the origin and
/// `anchor_b` on the positive x-axis at their target distance.
///
/// The first other point goes to the upper intersection of its circles
/// around the anchors; later points are trilaterated against all placed
/// points. A fixed number of backtracking gradient steps on the weighted
/// squared residuals then refines the free points.
pub fn layout_from_distances(dist: &DistanceMatrix, anchor_a: &str, anchor_b: &str) -> Result<LayoutMap> {
    let k = dist.len();
    if k < 2 {
        return Err(Error::Precondition("layout needs at least two points".into()));
    }
    let find = |name: &str| {
        dist.position(name)
            .ok_or_else(|| Error::Precondition(format!("unknown anchor {name:?}")))
    };
    let (a, b) = (find(anchor_a)?, find(anchor_b)?);
    let base = dist.get(a, b);
    if a == b || !(base > 0.0) {
        return Err(Error::Precondition(
            "anchors must be distinct and at positive distance".into(),
        ));
    }

    let mut coords = vec![(0.0, 0.0); k];
    coords[b] = (base, 0.0);
    let mut placed = vec![a, b];
    let mut projected = false;
    for i in (0..k).filter(|&i| i != a && i != b) {
        let (circle, ok) = circle_point(base, dist.get(i, a), dist.get(i, b));
        let point = if placed.len() == 2 {
            projected |= !ok;
            circle
        } else {
            let pts: Vec<(f64, f64)> = placed.iter().map(|&p| coords[p]).collect();
            let radii: Vec<f64> = placed.iter().map(|&p| dist.get(i, p)).collect();
            trilaterate(&pts, &radii).unwrap_or_else(|| {
                projected |= !ok;
                // collinear reference points: pick the mirror image that
                // fits the non-anchor points better
                let misfit = |c: (f64, f64)| -> f64 {
                    pts.iter()
                        .zip(&radii)
                        .map(|(p, r)| ((c.0 - p.0).hypot(c.1 - p.1) - r).powi(2))
                        .sum()
                };
                let mirror = (circle.0, -circle.1);
                if misfit(mirror) < misfit(circle) { mirror } else { circle }
            })
        };
        coords[i] = point;
        placed.push(i);
    }

    let obj = Objective::new(dist);
    let mut fixed = vec![false; k];
    fixed[a] = true;
    fixed[b] = true;
    refine(&obj, &mut coords, &fixed, REFINE_ITERATIONS);
    Ok(LayoutMap {
        names: dist.names().to_vec(),
        stress: obj.stress(&coords),
        coords,
        anchors: (anchor_a.to_string(), anchor_b.to_string()),
        projected,
    })
}
