//! Incremental Bowyer–Watson triangulation of a point set in the plane.

use std::collections::HashMap;

#[derive(Clone, Copy, Debug)]
struct Tri {
    v: [usize; 3],
    center: [f64; 2],
    radius2: f64,
}

fn circumcircle(p: &[[f64; 2]], v: [usize; 3]) -> ([f64; 2], f64) {
    let [a, b, c] = [p[v[0]], p[v[1]], p[v[2]]];
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    let a2 = a[0] * a[0] + a[1] * a[1];
    let b2 = b[0] * b[0] + b[1] * b[1];
    let c2 = c[0] * c[0] + c[1] * c[1];
    let ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d;
    let uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d;
    let dx = a[0] - ux;
    let dy = a[1] - uy;
    ([ux, uy], dx * dx + dy * dy)
}

pub(crate) fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Delaunay triangles of `points`, counterclockwise, as index triples.
pub(crate) fn triangulate(points: &[[f64; 2]]) -> Vec<[usize; 3]> {
    let n = points.len();
    if n < 3 {
        return Vec::new();
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let mut pts = points.to_vec();
    pts.push([mid[0] - 100.0 * span, mid[1] - 100.0 * span]);
    pts.push([mid[0] + 100.0 * span, mid[1] - 100.0 * span]);
    pts.push([mid[0], mid[1] + 100.0 * span]);

    let make = |pts: &[[f64; 2]], v: [usize; 3]| {
        let (center, radius2) = circumcircle(pts, v);
        Tri { v, center, radius2 }
    };
    let mut tris = vec![make(&pts, [n, n + 1, n + 2])];
    let mut bad = Vec::new();
    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();

    for i in 0..n {
        let p = pts[i];
        bad.clear();
        for (t, tri) in tris.iter().enumerate() {
            let dx = p[0] - tri.center[0];
            let dy = p[1] - tri.center[1];
            if dx * dx + dy * dy < tri.radius2 {
                bad.push(t);
            }
        }
        edge_count.clear();
        for &t in &bad {
            let v = tris[t].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut boundary = Vec::new();
        for &t in &bad {
            let v = tris[t].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                if edge_count[&(a.min(b), a.max(b))] == 1 {
                    boundary.push((a, b));
                }
            }
        }
        for &t in bad.iter().rev() {
            tris.swap_remove(t);
        }
        for (a, b) in boundary {
            tris.push(make(&pts, [a, b, i]));
        }
    }

    tris.into_iter()
        .map(|t| t.v)
        .filter(|v| v.iter().all(|&x| x < n))
        .map(|v| if orient(points[v[0]], points[v[1]], points[v[2]]) < 0.0 { [v[0], v[2], v[1]] } else { v })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gives_two_triangles() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.1], [0.0, 1.0]];
        let t = triangulate(&pts);
        assert_eq!(t.len(), 2);
        for v in &t {
            assert!(orient(pts[v[0]], pts[v[1]], pts[v[2]]) > 0.0);
        }
    }

    #[test]
    fn empty_circumcircle_property() {
        let pts: Vec<[f64; 2]> = (0..60)
            .map(|i| {
                let x = ((i * 37) % 61) as f64 / 61.0;
                let y = ((i * 53 + 7) % 59) as f64 / 59.0;
                [x + 1e-3 * (i as f64).sin(), y]
            })
            .collect();
        let tris = triangulate(&pts);
        for v in &tris {
            let (c, r2) = circumcircle(&pts, *v);
            for (i, p) in pts.iter().enumerate() {
                if v.contains(&i) {
                    continue;
                }
                let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
                assert!(d2 >= r2 * (1.0 - 1e-9), "point {i} inside circumcircle");
            }
        }
    }
}
