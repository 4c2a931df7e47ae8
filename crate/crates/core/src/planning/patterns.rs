//! Aerial search patterns over a rectangular ground area.

use serde::{Deserialize, Serialize};

use super::Path;
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Expanding,
    ParallelTrack,
    CreepingLine,
}

/// Ground rectangle, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { min: [x0.min(x1), y0.min(y1)], max: [x0.max(x1), y0.max(y1)] }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn center(&self) -> [f64; 2] {
        [(self.min[0] + self.max[0]) / 2.0, (self.min[1] + self.max[1]) / 2.0]
    }

    pub fn clamp(&self, x: f64, y: f64) -> [f64; 2] {
        [x.clamp(self.min[0], self.max[0]), y.clamp(self.min[1], self.max[1])]
    }

    /// The square of side `side` centred on `(x, y)`, shifted to lie inside `outer`.
    pub fn block_around(x: f64, y: f64, side: f64, outer: &Rect) -> Rect {
        let w = side.min(outer.width());
        let h = side.min(outer.height());
        let x0 = (x - w / 2.0).clamp(outer.min[0], outer.max[0] - w);
        let y0 = (y - h / 2.0).clamp(outer.min[1], outer.max[1] - h);
        Rect::new(x0, y0, x0 + w, y0 + h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchPatternSpec {
    pub kind: PatternKind,
    pub area: Rect,
    pub spacing: f64,
    pub altitude: f64,
    /// Where the drone enters the pattern; the spiral centre for Expanding.
    pub entry: [f64; 2],
}

/// Lateral offsets of the legs across an extent of `width`.
fn offsets(width: f64, spacing: f64) -> Vec<f64> {
    if width <= spacing {
        return vec![width / 2.0];
    }
    let count = (width / spacing).ceil() as usize;
    (0..count)
        .map(|i| (spacing / 2.0 + i as f64 * spacing).min(width - spacing / 2.0))
        .collect()
}

/// Back-and-forth legs along axis `along`, stepped across the other axis.
fn lawnmower(s: &SearchPatternSpec, along: usize) -> Vec<[f64; 2]> {
    let across = 1 - along;
    let a = &s.area;
    let mut steps = offsets(a.max[across] - a.min[across], s.spacing);
    // start on the side of the area nearest the entry point
    let near_far = (s.entry[across] - a.min[across]) > (a.max[across] - s.entry[across]);
    if near_far {
        steps.reverse();
    }
    let mut forward = (s.entry[along] - a.min[along]) <= (a.max[along] - s.entry[along]);
    let mut pts = Vec::new();
    for off in steps {
        let c = a.min[across] + off;
        let (from, to) = if forward { (a.min[along], a.max[along]) } else { (a.max[along], a.min[along]) };
        for v in [from, to] {
            let mut p = [0.0; 2];
            p[along] = v;
            p[across] = c;
            pts.push(p);
        }
        forward = !forward;
    }
    pts
}

fn spiral(s: &SearchPatternSpec) -> Vec<[f64; 2]> {
    let a = &s.area;
    let [cx, cy] = a.clamp(s.entry[0], s.entry[1]);
    // half-extent the spiral must reach to cover every corner
    let reach = [a.min[0], a.max[0]]
        .iter()
        .flat_map(|x| [a.min[1], a.max[1]].map(|y| ((x - cx).abs()).max((y - cy).abs())))
        .fold(0.0_f64, f64::max)
        + s.spacing / 2.0;
    let dirs = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];
    let mut pts = vec![[cx, cy]];
    let (mut x, mut y) = (cx, cy);
    let mut k = 0usize;
    loop {
        let len = (k / 2 + 1) as f64 * s.spacing;
        let (dx, dy) = dirs[k % 4];
        x += dx * len;
        y += dy * len;
        pts.push([x, y]);
        k += 1;
        // after an even number of legs the ring around the centre is closed
        if k % 2 == 0 && len / 2.0 >= reach {
            break;
        }
    }
    pts
}

/// Unclamped spiral leg lengths for an expanding search, for reference.
pub fn expanding_leg_lengths(spacing: f64, legs: usize) -> Vec<f64> {
    (0..legs).map(|k| (k / 2 + 1) as f64 * spacing).collect()
}

pub fn generate_pattern(s: &SearchPatternSpec) -> Path {
    let pts = match s.kind {
        PatternKind::ParallelTrack => {
            let along = if s.area.width() >= s.area.height() { 0 } else { 1 };
            lawnmower(s, along)
        }
        PatternKind::CreepingLine => {
            let along = if s.area.width() >= s.area.height() { 1 } else { 0 };
            lawnmower(s, along)
        }
        PatternKind::Expanding => spiral(s)
            .into_iter()
            .map(|[x, y]| s.area.clamp(x, y))
            .collect(),
    };
    let mut waypoints: Vec<Vec3> = Vec::with_capacity(pts.len());
    for [x, y] in pts {
        let p = Vec3::new(x, y, s.altitude);
        if waypoints.last().is_none_or(|q| (p - q).norm() > 1e-9) {
            waypoints.push(p);
        }
    }
    Path::new(waypoints)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: PatternKind, area: Rect, spacing: f64) -> SearchPatternSpec {
        SearchPatternSpec { kind, area, spacing, altitude: 20.0, entry: area.min }
    }

    #[test]
    fn parallel_track_leg_count() {
        let p = generate_pattern(&spec(PatternKind::ParallelTrack, Rect::new(0.0, 0.0, 100.0, 60.0), 20.0));
        // three legs: six waypoints, legs along x
        assert_eq!(p.waypoints.len(), 6);
        let ys: Vec<f64> = p.waypoints.iter().map(|w| w.y).collect();
        assert_eq!(ys, vec![10.0, 10.0, 30.0, 30.0, 50.0, 50.0]);
        assert!(p.waypoints.iter().all(|w| w.z == 20.0));
    }

    #[test]
    fn expanding_first_legs() {
        let area = Rect::new(-500.0, -500.0, 500.0, 500.0);
        let s = SearchPatternSpec { kind: PatternKind::Expanding, area, spacing: 10.0, altitude: 20.0, entry: [0.0, 0.0] };
        let p = generate_pattern(&s);
        let legs: Vec<f64> = p.waypoints.windows(2).take(6).map(|w| (w[1] - w[0]).norm()).collect();
        assert_eq!(legs, vec![10.0, 10.0, 20.0, 20.0, 30.0, 30.0]);
        assert_eq!(expanding_leg_lengths(10.0, 6), legs);
    }

    #[test]
    fn creeping_line_on_square_is_rotated_parallel_track() {
        let area = Rect::new(0.0, 0.0, 60.0, 60.0);
        let pt = generate_pattern(&spec(PatternKind::ParallelTrack, area, 20.0));
        let cl = generate_pattern(&spec(PatternKind::CreepingLine, area, 20.0));
        assert_eq!(pt.waypoints.len(), cl.waypoints.len());
        for (a, b) in pt.waypoints.iter().zip(&cl.waypoints) {
            assert_eq!((a.x, a.y), (b.y, b.x));
        }
    }

    #[test]
    fn narrow_area_single_centre_leg() {
        let p = generate_pattern(&spec(PatternKind::ParallelTrack, Rect::new(0.0, 0.0, 50.0, 8.0), 20.0));
        assert_eq!(p.waypoints.len(), 2);
        assert_eq!(p.waypoints[0].y, 4.0);
    }
}
