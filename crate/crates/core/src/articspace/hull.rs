//! Convex hull with exact orientation tests.

use super::Point;

/// Coordinates are snapped to multiples of 2⁻¹⁶ before orientation tests so
/// that every predicate is evaluated exactly in integer arithmetic.
pub const COORD_SCALE: f64 = 65_536.0;

fn snap(p: &Point) -> (i64, i64) {
    ((p[0] * COORD_SCALE).round() as i64, (p[1] * COORD_SCALE).round() as i64)
}

/// Twice the signed area of (o, a, b); positive for a counter-clockwise turn.
#[inline]
fn orient(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i128 {
    let (ax, ay) = (i128::from(a.0 - o.0), i128::from(a.1 - o.1));
    let (bx, by) = (i128::from(b.0 - o.0), i128::from(b.1 - o.1));
    ax * by - ay * bx
}

/// Andrew's monotone chain. Returns hull vertices counter-clockwise (in a
/// y-up frame) starting from the lowest-x point; collinear boundary points
/// and duplicates are dropped. Fewer than three distinct non-collinear points
/// yield a one- or two-vertex result.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<((i64, i64), usize)> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p[0].is_finite() && p[1].is_finite())
        .map(|(i, p)| (snap(p), i))
        .collect();
    pts.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    pts.dedup_by(|a, b| a.0 == b.0);
    if pts.len() <= 2 {
        return pts.iter().map(|&(_, i)| points[i]).collect();
    }
    let mut hull: Vec<((i64, i64), usize)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && orient(hull[hull.len() - 2].0, hull[hull.len() - 1].0, p.0) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && orient(hull[hull.len() - 2].0, hull[hull.len() - 1].0, p.0) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull.iter().map(|&(_, i)| points[i]).collect()
}

/// Shoelace area of a simple polygon; zero for fewer than three vertices.
pub fn polygon_area(vertices: &[Point]) -> f64 {
    if vertices.len() < 3 {
        return 0.0;
    }
    let n = vertices.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    twice.abs() / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn square_with_center() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let h = convex_hull(&pts);
        assert_eq!(h, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]);
        assert_eq!(polygon_area(&h), 1.0);
    }

    #[test]
    fn collinear_points_give_endpoints() {
        let pts: Vec<Point> = (0..10).map(|i| [i as f64 * 0.25, 1.0 + i as f64 * 0.5]).collect();
        let mut h = convex_hull(&pts);
        h.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(h, vec![pts[0], pts[9]]);
        assert_eq!(polygon_area(&h), 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(convex_hull(&[]).is_empty());
        assert_eq!(convex_hull(&[[2.0, 3.0], [2.0, 3.0]]), vec![[2.0, 3.0]]);
    }

    #[test]
    fn triangle_area() {
        assert_eq!(polygon_area(&[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]), 2.0);
    }

    #[test]
    fn collinear_edge_points_are_excluded() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [4.0, 0.0], [4.0, 4.0], [0.0, 4.0], [0.0, 2.0]];
        assert_eq!(convex_hull(&pts).len(), 4);
    }

    proptest! {
        #[test]
        fn hull_is_permutation_invariant_and_area_monotone(
            pts in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..40),
            extra in (-80.0f64..80.0, -80.0f64..80.0),
            rot in 0usize..40,
        ) {
            let pts: Vec<Point> = pts.into_iter().map(|(x, y)| [x, y]).collect();
            let a = polygon_area(&convex_hull(&pts));
            let mut rotated = pts.clone();
            rotated.rotate_left(rot % pts.len());
            rotated.reverse();
            let mut h1 = convex_hull(&pts);
            let mut h2 = convex_hull(&rotated);
            h1.sort_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])));
            h2.sort_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])));
            prop_assert_eq!(h1, h2);
            let mut more = pts.clone();
            more.push([extra.0, extra.1]);
            prop_assert!(polygon_area(&convex_hull(&more)) >= a - 1e-9);
        }
    }
}
