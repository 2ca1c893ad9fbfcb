//! Density-based clustering with an ε-neighborhood and a minimum-points core
//! rule.
//!
//! Conventions (pinned so results are order-independent and comparable to a
//! brute-force oracle): the ε-neighborhood of a point includes the point
//! itself; clusters are the connected components of core points; a non-core
//! point joins the cluster of its lowest-indexed core neighbor (noise if it
//! has none); cluster ids are ordered by each cluster's lowest core index.

/// Cluster labels per point; `None` marks noise.
pub fn dbscan(points: &[[f64; 3]], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let eps2 = eps * eps;
    if n == 0 {
        return Vec::new();
    }

    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        neighbors[i].push(i);
        for j in (i + 1)..n {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            let dz = points[i][2] - points[j][2];
            if dx * dx + dy * dy + dz * dz <= eps2 {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();

    // Connected components over core points, seeded in index order so every
    // cluster id equals the rank of its smallest core index.
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut cluster = 0usize;
    let mut queue = Vec::new();
    for i in 0..n {
        if !core[i] || labels[i].is_some() {
            continue;
        }
        labels[i] = Some(cluster);
        queue.push(i);
        while let Some(p) = queue.pop() {
            for &q in &neighbors[p] {
                if core[q] && labels[q].is_none() {
                    labels[q] = Some(cluster);
                    queue.push(q);
                }
            }
        }
        cluster += 1;
    }

    // Border points: lowest-indexed core neighbor wins.
    for i in 0..n {
        if core[i] {
            continue;
        }
        let mut sorted = neighbors[i].clone();
        sorted.sort_unstable();
        labels[i] = sorted.iter().find(|&&q| core[q]).and_then(|&q| labels[q]);
    }
    labels
}
