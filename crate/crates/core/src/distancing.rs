//! Social-distancing checks: DBSCAN over person centroids, turned into a
//! safe/violator partition plus the close pairs to draw between violators.

use serde::{Deserialize, Serialize};

use crate::geometry::{BoundingBox, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    /// Neighborhood radius in pixels.
    pub eps: f64,
    /// Neighbors within `eps` needed for a core point, the point itself included.
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        Self {
            eps: 200.0,
            min_pts: 2,
        }
    }
}

impl DbscanParams {
    pub fn is_valid(&self) -> bool {
        self.eps > 0.0 && self.eps.is_finite() && self.min_pts >= 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClusterLabel {
    Noise,
    Cluster(usize),
}

impl ClusterLabel {
    pub fn cluster(self) -> Option<usize> {
        match self {
            ClusterLabel::Noise => None,
            ClusterLabel::Cluster(id) => Some(id),
        }
    }
}

/// DBSCAN with Euclidean distance.
///
/// Points are scanned by index, so cluster ids follow the order in which each
/// cluster is first reached. Border points go to the first cluster that
/// reaches them.
pub fn dbscan(points: &[Point], params: &DbscanParams) -> Vec<ClusterLabel> {
    let n = points.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| points[i].distance(&points[j]) <= params.eps)
                .collect()
        })
        .collect();
    let is_core = |i: usize| neighbors[i].len() >= params.min_pts;

    let mut labels: Vec<Option<ClusterLabel>> = vec![None; n];
    let mut next_id = 0;
    let mut queue = Vec::new();
    for start in 0..n {
        if labels[start].is_some() {
            continue;
        }
        if !is_core(start) {
            labels[start] = Some(ClusterLabel::Noise);
            continue;
        }
        let id = next_id;
        next_id += 1;
        labels[start] = Some(ClusterLabel::Cluster(id));
        queue.clear();
        queue.push(start);
        while let Some(p) = queue.pop() {
            for &q in &neighbors[p] {
                match labels[q] {
                    Some(ClusterLabel::Cluster(_)) => {}
                    // Noise becomes a border point; it was already found non-core.
                    Some(ClusterLabel::Noise) => labels[q] = Some(ClusterLabel::Cluster(id)),
                    None => {
                        labels[q] = Some(ClusterLabel::Cluster(id));
                        if is_core(q) {
                            queue.push(q);
                        }
                    }
                }
            }
        }
    }
    labels
        .into_iter()
        .map(|l| l.expect("every point is labelled"))
        .collect()
}

/// Who is keeping their distance and who is not.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub safe_indices: Vec<usize>,
    pub clusters: Vec<Vec<usize>>,
    /// Index pairs `(i, j)`, `i < j`, in one cluster and at most `eps` apart.
    pub edges: Vec<(usize, usize)>,
}

impl ViolationReport {
    pub fn violator_count(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    pub fn is_violator(&self, index: usize) -> bool {
        self.clusters.iter().any(|c| c.contains(&index))
    }
}

pub fn assess(person_boxes: &[BoundingBox], params: &DbscanParams) -> ViolationReport {
    let centroids: Vec<Point> = person_boxes.iter().map(BoundingBox::centroid).collect();
    let labels = dbscan(&centroids, params);

    let cluster_count = labels.iter().filter_map(|l| l.cluster()).max().map_or(0, |m| m + 1);
    let mut clusters = vec![Vec::new(); cluster_count];
    let mut safe_indices = Vec::new();
    for (i, label) in labels.iter().enumerate() {
        match label {
            ClusterLabel::Noise => safe_indices.push(i),
            ClusterLabel::Cluster(id) => clusters[*id].push(i),
        }
    }

    let mut edges = Vec::new();
    for i in 0..centroids.len() {
        let Some(ci) = labels[i].cluster() else { continue };
        for j in i + 1..centroids.len() {
            if labels[j].cluster() == Some(ci) && centroids[i].distance(&centroids[j]) <= params.eps {
                edges.push((i, j));
            }
        }
    }

    ViolationReport {
        safe_indices,
        clusters,
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(coords: &[(f64, f64)]) -> Vec<Point> {
        coords.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    fn boxes_at(centers: &[(f64, f64)]) -> Vec<BoundingBox> {
        centers
            .iter()
            .map(|&(x, y)| BoundingBox::new(x - 10.0, y - 20.0, 20.0, 40.0))
            .collect()
    }

    #[test]
    fn dbscan_examples() {
        let p = DbscanParams::default();
        assert!(dbscan(&[], &p).is_empty());
        assert_eq!(
            dbscan(&pts(&[(0.0, 0.0), (150.0, 0.0)]), &p),
            vec![ClusterLabel::Cluster(0); 2]
        );
        assert_eq!(
            dbscan(&pts(&[(0.0, 0.0), (150.0, 0.0), (300.0, 0.0)]), &p),
            vec![ClusterLabel::Cluster(0); 3]
        );
        let labels = dbscan(&pts(&[(0.0, 0.0), (100.0, 0.0), (600.0, 0.0)]), &p);
        assert_eq!(labels[2], ClusterLabel::Noise);
    }

    #[test]
    fn eps_boundary_is_inclusive() {
        let labels = dbscan(&pts(&[(0.0, 0.0), (200.0, 0.0)]), &DbscanParams::default());
        assert_eq!(labels, vec![ClusterLabel::Cluster(0); 2]);
    }

    #[test]
    fn border_point_joins_first_cluster() {
        // min_pts 4, eps 10: B at (10,0) is within reach of cores P0 and Q0 but
        // has only three neighbors itself.
        use ClusterLabel::{Cluster, Noise};
        let p = DbscanParams { eps: 10.0, min_pts: 4 };
        let ps = [(0.0, 0.0), (-5.0, 0.0), (-10.0, 0.0)];
        let b = (10.0, 0.0);
        let qs = [(20.0, 0.0), (25.0, 0.0), (30.0, 0.0)];

        let mut order: Vec<_> = ps.to_vec();
        order.push(b);
        order.extend(qs);
        let labels = dbscan(&pts(&order), &p);
        assert_eq!(labels, [Cluster(0), Cluster(0), Cluster(0), Cluster(0), Cluster(1), Cluster(1), Cluster(1)]);

        // Scanned first, B starts as noise and is promoted to a border point.
        let mut order = vec![b];
        order.extend(qs);
        order.extend(ps);
        let labels = dbscan(&pts(&order), &p);
        assert_eq!(labels[0], Cluster(0));
        assert_eq!(&labels[1..4], &[Cluster(0); 3]);
        assert_eq!(&labels[4..], &[Cluster(1); 3]);

        let lone = dbscan(&pts(&[b]), &p);
        assert_eq!(lone, vec![Noise]);
    }

    #[test]
    fn min_pts_one_makes_every_point_a_cluster() {
        let labels = dbscan(&pts(&[(0.0, 0.0), (1000.0, 0.0)]), &DbscanParams { eps: 1.0, min_pts: 1 });
        assert_eq!(labels, vec![ClusterLabel::Cluster(0), ClusterLabel::Cluster(1)]);
    }

    #[test]
    fn assess_examples() {
        let p = DbscanParams::default();
        let one = assess(&boxes_at(&[(50.0, 50.0)]), &p);
        assert_eq!(one.safe_indices, vec![0]);
        assert!(one.clusters.is_empty() && one.edges.is_empty());

        let two = assess(&boxes_at(&[(0.0, 0.0), (100.0, 0.0)]), &p);
        assert_eq!(two.clusters, vec![vec![0, 1]]);
        assert_eq!(two.edges, vec![(0, 1)]);
        assert!(two.safe_indices.is_empty());

        let chain = assess(&boxes_at(&[(0.0, 0.0), (150.0, 0.0), (300.0, 0.0)]), &p);
        assert_eq!(chain.clusters, vec![vec![0, 1, 2]]);
        assert_eq!(chain.edges, vec![(0, 1), (1, 2)]);
        assert!(chain.safe_indices.is_empty());
        assert_eq!(chain.violator_count(), 3);
    }

    proptest! {
        #[test]
        fn translation_invariant(
            coords in prop::collection::vec((0.0..1000.0f64, 0.0..1000.0f64), 0..30),
            dx in -500i32..500, dy in -500i32..500,
        ) {
            // Integer coordinates keep distances exact under translation.
            let a: Vec<Point> = coords.iter().map(|&(x, y)| Point::new(x.round(), y.round())).collect();
            let b: Vec<Point> = a.iter().map(|p| Point::new(p.x + dx as f64, p.y + dy as f64)).collect();
            let params = DbscanParams::default();
            prop_assert_eq!(dbscan(&a, &params), dbscan(&b, &params));
        }

        #[test]
        fn report_partitions_people(
            coords in prop::collection::vec((0.0..1000.0f64, 0.0..1000.0f64), 0..30),
        ) {
            let boxes = boxes_at(&coords);
            let params = DbscanParams::default();
            let r = assess(&boxes, &params);
            let mut all: Vec<usize> = r.safe_indices.iter().copied()
                .chain(r.clusters.iter().flatten().copied()).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..boxes.len()).collect::<Vec<_>>());
            let c: Vec<Point> = boxes.iter().map(BoundingBox::centroid).collect();
            for &(i, j) in &r.edges {
                prop_assert!(i < j);
                prop_assert!(c[i].distance(&c[j]) <= params.eps);
                prop_assert!(r.clusters.iter().any(|cl| cl.contains(&i) && cl.contains(&j)));
            }
            for &s in &r.safe_indices {
                prop_assert!((0..c.len()).all(|j| j == s || c[s].distance(&c[j]) > params.eps));
            }
            for cluster in &r.clusters {
                prop_assert!(cluster.len() >= 2);
            }
        }
    }
}
