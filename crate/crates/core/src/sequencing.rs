//! Paint order for vector regions.
//!
//! Regions of one segment are grouped by agglomerative clustering of their
//! centroids. Groups are visited along an open travelling-salesman path over
//! group centroids, and regions inside a group along a path over region
//! centroids. Segments are painted in ascending id order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point, Polygon};
use crate::vectorization::VectorRegion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Single,
    Complete,
    #[default]
    Average,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequencingConfig {
    pub linkage: Linkage,
    /// Dendrogram cut height in px. `None` means 15% of the image diagonal
    /// once resolved; unresolved it never cuts.
    pub cluster_distance_cutoff: Option<f64>,
    pub tsp_two_opt_max_passes: usize,
}

impl Default for SequencingConfig {
    fn default() -> Self {
        Self { linkage: Linkage::Average, cluster_distance_cutoff: None, tsp_two_opt_max_passes: 50 }
    }
}

impl SequencingConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(c) = self.cluster_distance_cutoff {
            if !(c > 0.0) {
                return Err(Error::Config(format!("sequencing.cluster_distance_cutoff must be positive, got {c}")));
            }
        }
        Ok(())
    }

    pub fn resolved_for(&self, width: u32, height: u32) -> Self {
        let diag = (width as f64).hypot(height as f64);
        Self { cluster_distance_cutoff: Some(self.cluster_distance_cutoff.unwrap_or(0.15 * diag)), ..self.clone() }
    }

    fn cutoff(&self) -> f64 {
        self.cluster_distance_cutoff.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGroup {
    pub id: usize,
    pub segment_id: usize,
    /// Region ids in paint order.
    pub members: Vec<usize>,
    /// Area-weighted mean of member centroids.
    pub centroid: Point,
}

pub fn centroid(poly: &Polygon) -> Result<Point> {
    poly.centroid()
}

/// Condensed symmetric distance matrix.
struct Distances {
    n: usize,
    d: Vec<f64>,
}

impl Distances {
    fn new(points: &[Point]) -> Self {
        let n = points.len();
        let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                d.push(points[i].distance(points[j]));
            }
        }
        Self { n, d }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        a * (2 * self.n - a - 1) / 2 + (b - a - 1)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[self.idx(i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.d[k] = v;
    }
}

/// Flat clusters of `points`: agglomerative clustering by the
/// nearest-neighbour chain, cut at `cutoff`. Clusters are listed by their
/// smallest member index; members ascend.
pub fn cluster_points(points: &[Point], linkage: Linkage, cutoff: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    if n <= 1 {
        return (0..n).map(|i| vec![i]).collect();
    }
    let mut dist = Distances::new(points);
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::new();

    for _ in 0..n - 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).unwrap());
        }
        loop {
            let a = *chain.last().unwrap();
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| dist.get(a, p));
            for k in (0..n).filter(|&k| active[k] && k != a) {
                let d = dist.get(a, k);
                if d < best_d {
                    best = Some(k);
                    best_d = d;
                }
            }
            let b = best.unwrap();
            if Some(b) == prev {
                chain.truncate(chain.len() - 2);
                let (keep, gone) = (a.min(b), a.max(b));
                let (na, nb) = (size[keep] as f64, size[gone] as f64);
                for k in (0..n).filter(|&k| active[k] && k != keep && k != gone) {
                    let (dk, dg) = (dist.get(keep, k), dist.get(gone, k));
                    let v = match linkage {
                        Linkage::Single => dk.min(dg),
                        Linkage::Complete => dk.max(dg),
                        Linkage::Average => (na * dk + nb * dg) / (na + nb),
                    };
                    dist.set(keep, k, v);
                }
                size[keep] += size[gone];
                active[gone] = false;
                merges.push((keep, gone, best_d));
                break;
            }
            chain.push(b);
        }
    }

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b, h) in &merges {
        if h <= cutoff {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[slot[r]].push(i);
    }
    clusters
}

/// Clusters the regions of each segment separately. Returned groups follow
/// ascending segment id; `members` are region ids in input order, and group
/// ids are positions in the returned list.
pub fn cluster_regions(regions: &[VectorRegion], cfg: &SequencingConfig) -> Vec<RegionGroup> {
    let mut groups = Vec::new();
    for (segment_id, members) in by_segment(regions) {
        let pts: Vec<Point> = members.iter().map(|r| r.centroid).collect();
        for cluster in cluster_points(&pts, cfg.linkage, cfg.cutoff()) {
            let rs: Vec<&VectorRegion> = cluster.iter().map(|&i| members[i]).collect();
            groups.push(RegionGroup {
                id: groups.len(),
                segment_id,
                members: rs.iter().map(|r| r.id).collect(),
                centroid: weighted_centroid(&rs),
            });
        }
    }
    groups
}

fn by_segment(regions: &[VectorRegion]) -> Vec<(usize, Vec<&VectorRegion>)> {
    let mut map: std::collections::BTreeMap<usize, Vec<&VectorRegion>> = Default::default();
    for r in regions {
        map.entry(r.source_segment_id).or_default().push(r);
    }
    map.into_iter().collect()
}

fn weighted_centroid(regions: &[&VectorRegion]) -> Point {
    let total: f64 = regions.iter().map(|r| r.area).sum();
    if total > 0.0 {
        regions.iter().fold(Point::default(), |acc, r| acc + r.centroid * (r.area / total))
    } else {
        let n = regions.len().max(1) as f64;
        regions.iter().fold(Point::default(), |acc, r| acc + r.centroid * (1.0 / n))
    }
}

pub fn path_length(points: &[Point], tour: &[usize]) -> f64 {
    tour.windows(2).map(|w| points[w[0]].distance(points[w[1]])).sum()
}

/// Greedy open path from the point nearest the origin.
pub fn nearest_neighbor_tour(points: &[Point]) -> Vec<usize> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let origin = Point::default();
    let start = (0..n).min_by(|&a, &b| points[a].distance(origin).total_cmp(&points[b].distance(origin))).unwrap();
    let mut visited = vec![false; n];
    let mut tour = Vec::with_capacity(n);
    let mut cur = start;
    visited[cur] = true;
    tour.push(cur);
    for _ in 1..n {
        let next = (0..n)
            .filter(|&k| !visited[k])
            .min_by(|&a, &b| points[cur].distance(points[a]).total_cmp(&points[cur].distance(points[b])))
            .unwrap();
        visited[next] = true;
        tour.push(next);
        cur = next;
    }
    tour
}

/// Improves an open path with 2-opt moves, prefix and suffix reversals
/// included, until a pass finds nothing or `max_passes` run out.
pub fn two_opt(points: &[Point], tour: &mut [usize], max_passes: usize) {
    let n = tour.len();
    if n < 3 {
        return;
    }
    let d = |a: usize, b: usize| points[a].distance(points[b]);
    for _ in 0..max_passes {
        let mut improved = false;
        for i in 0..n - 1 {
            for j in i + 1..n {
                let mut before = 0.0;
                let mut after = 0.0;
                if i > 0 {
                    before += d(tour[i - 1], tour[i]);
                    after += d(tour[i - 1], tour[j]);
                }
                if j + 1 < n {
                    before += d(tour[j], tour[j + 1]);
                    after += d(tour[i], tour[j + 1]);
                }
                if after < before - 1e-9 {
                    tour[i..=j].reverse();
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Open-path tour: nearest neighbour from the point closest to the canvas
/// top-left, then 2-opt. The result starts at whichever end lies nearer the
/// top-left.
pub fn solve_tsp(points: &[Point], cfg: &SequencingConfig) -> Vec<usize> {
    let mut tour = nearest_neighbor_tour(points);
    two_opt(points, &mut tour, cfg.tsp_two_opt_max_passes);
    if let (Some(&first), Some(&last)) = (tour.first(), tour.last()) {
        let origin = Point::default();
        if points[last].distance(origin) < points[first].distance(origin) {
            tour.reverse();
        }
    }
    tour
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequencedRegion {
    pub region: VectorRegion,
    pub group_id: usize,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub regions: Vec<SequencedRegion>,
    /// Groups in visit order; `id` equals the position here.
    pub groups: Vec<RegionGroup>,
}

/// Orders regions segment by segment (ascending segment id), group by group
/// within a segment, region by region within a group.
pub fn sequence_regions(regions: Vec<VectorRegion>, cfg: &SequencingConfig) -> Sequence {
    let per_segment: Vec<Vec<(Vec<usize>, Point)>> = by_segment(&regions)
        .par_iter()
        .map(|(_, members)| {
            let pts: Vec<Point> = members.iter().map(|r| r.centroid).collect();
            let clusters = cluster_points(&pts, cfg.linkage, cfg.cutoff());
            let centroids: Vec<Point> = clusters
                .iter()
                .map(|c| weighted_centroid(&c.iter().map(|&i| members[i]).collect::<Vec<_>>()))
                .collect();
            solve_tsp(&centroids, cfg)
                .into_iter()
                .map(|g| {
                    let cpts: Vec<Point> = clusters[g].iter().map(|&i| pts[i]).collect();
                    let order = solve_tsp(&cpts, cfg).into_iter().map(|k| members[clusters[g][k]].id).collect();
                    (order, centroids[g])
                })
                .collect()
        })
        .collect();

    let mut by_id: std::collections::HashMap<usize, VectorRegion> = regions.into_iter().map(|r| (r.id, r)).collect();
    let mut out = Sequence { regions: Vec::new(), groups: Vec::new() };
    for groups in per_segment {
        for (members, centroid) in groups {
            let group_id = out.groups.len();
            let mut segment_id = 0;
            for &id in &members {
                let region = by_id.remove(&id).expect("region ids are unique");
                segment_id = region.source_segment_id;
                out.regions.push(SequencedRegion { region, group_id, rank: out.regions.len() });
            }
            out.groups.push(RegionGroup { id: group_id, segment_id, members, centroid });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn region(id: usize, segment: usize, x: f64, y: f64, area: f64) -> VectorRegion {
        VectorRegion {
            id,
            source_segment_id: segment,
            fill: [0, 0, 0],
            outline: vec![],
            holes: vec![],
            centroid: Point::new(x, y),
            area,
        }
    }

    fn pts(v: &[(f64, f64)]) -> Vec<Point> {
        v.iter().map(|&(x, y)| Point::new(x, y)).collect()
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn polygon_centroids() {
        let sq = Polygon::new(pts(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])).unwrap();
        assert_eq!(centroid(&sq).unwrap(), Point::new(0.5, 0.5));
        let tri = Polygon::new(pts(&[(0.0, 0.0), (3.0, 0.0), (0.0, 3.0)])).unwrap();
        let c = centroid(&tri).unwrap();
        assert!((c.x - 1.0).abs() < 1e-12 && (c.y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l_shape_centroid_matches_sampling() {
        let l = Polygon::new(pts(&[(0.0, 0.0), (4.0, 0.0), (4.0, 1.0), (1.0, 1.0), (1.0, 3.0), (0.0, 3.0)])).unwrap();
        let inside = |x: f64, y: f64| (y < 1.0) || (x < 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for _ in 0..1_000_000 {
            let (x, y) = (rng.gen::<f64>() * 4.0, rng.gen::<f64>() * 3.0);
            if inside(x, y) {
                sx += x;
                sy += y;
                n += 1;
            }
        }
        let c = centroid(&l).unwrap();
        assert!((c.x - sx / n as f64).abs() < 0.01 && (c.y - sy / n as f64).abs() < 0.01, "{c:?}");
    }

    #[test]
    fn degenerate_polygon_has_no_centroid() {
        assert!(Polygon::new(pts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)])).is_err());
    }

    #[test]
    fn clustering_examples() {
        let cfg = SequencingConfig { cluster_distance_cutoff: Some(100.0), ..Default::default() };
        let one = cluster_regions(&[region(0, 0, 3.0, 4.0, 1.0)], &cfg);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].members, vec![0]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut regions = Vec::new();
        for i in 0..20 {
            let cx = if i % 2 == 0 { 50.0 } else { 550.0 };
            regions.push(region(i, 0, cx + rng.gen_range(-20.0..20.0), 60.0 + rng.gen_range(-20.0..20.0), 1.0));
        }
        let groups = cluster_regions(&regions, &cfg);
        assert_eq!(groups.len(), 2);
        for g in &groups {
            let parity = g.members[0] % 2;
            assert!(g.members.iter().all(|m| m % 2 == parity));
            assert_eq!(g.members.len(), 10);
        }

        let all = cluster_regions(&regions, &SequencingConfig { cluster_distance_cutoff: None, ..Default::default() });
        assert_eq!(all.len(), 1);
    }

    #[test]
    fn linkages_on_a_chain() {
        // Evenly spaced points 10 apart: single linkage chains them, complete does not.
        let p: Vec<Point> = (0..6).map(|i| Point::new(i as f64 * 10.0, 0.0)).collect();
        assert_eq!(cluster_points(&p, Linkage::Single, 10.0).len(), 1);
        assert!(cluster_points(&p, Linkage::Complete, 10.0).len() >= 3);
        assert_eq!(cluster_points(&p, Linkage::Average, 1.0).len(), 6);
    }

    #[test]
    fn area_weighted_group_centroid() {
        let g = cluster_regions(&[region(0, 0, 0.0, 0.0, 3.0), region(1, 0, 4.0, 0.0, 1.0)], &SequencingConfig::default());
        assert_eq!(g[0].centroid, Point::new(1.0, 0.0));
    }

    #[test]
    fn segments_never_share_groups() {
        let r = vec![region(0, 0, 0.0, 0.0, 1.0), region(1, 1, 1.0, 0.0, 1.0)];
        assert_eq!(cluster_regions(&r, &SequencingConfig::default()).len(), 2);
    }

    #[test]
    fn tsp_examples() {
        let cfg = SequencingConfig::default();
        assert_eq!(solve_tsp(&pts(&[(0.0, 0.0), (5.0, 0.0), (10.0, 0.0)]), &cfg), vec![0, 1, 2]);
        assert_eq!(solve_tsp(&pts(&[(10.0, 0.0), (0.0, 0.0), (5.0, 0.0)]), &cfg), vec![1, 2, 0]);
        assert_eq!(solve_tsp(&pts(&[(7.0, 7.0)]), &cfg), vec![0]);
        assert!(solve_tsp(&[], &cfg).is_empty());
    }

    #[test]
    fn square_corners_in_crossing_order() {
        let p = pts(&[(0.0, 0.0), (10.0, 10.0), (10.0, 0.0), (0.0, 10.0)]);
        let tour = solve_tsp(&p, &SequencingConfig::default());
        let best = permutations(4).iter().map(|t| path_length(&p, t)).fold(f64::INFINITY, f64::min);
        assert_eq!(best, 30.0);
        assert!((path_length(&p, &tour) - best).abs() < 1e-9);
    }

    #[test]
    fn sequence_one_group_is_tsp_order() {
        let r: Vec<VectorRegion> = [(30.0, 0.0), (0.0, 0.0), (20.0, 0.0), (10.0, 0.0)]
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| region(i, 0, x, y, 1.0))
            .collect();
        let s = sequence_regions(r, &SequencingConfig::default());
        let ids: Vec<usize> = s.regions.iter().map(|r| r.region.id).collect();
        assert_eq!(ids, vec![1, 3, 2, 0]);
        assert_eq!(s.groups.len(), 1);
        assert!(s.regions.iter().enumerate().all(|(i, r)| r.rank == i && r.group_id == 0));
    }

    #[test]
    fn sequence_segments_in_order() {
        let r = vec![region(0, 1, 0.0, 0.0, 1.0), region(1, 0, 99.0, 99.0, 1.0), region(2, 1, 5.0, 5.0, 1.0), region(3, 0, 1.0, 1.0, 1.0)];
        let s = sequence_regions(r, &SequencingConfig::default());
        let segs: Vec<usize> = s.regions.iter().map(|r| r.region.source_segment_id).collect();
        assert_eq!(segs, vec![0, 0, 1, 1]);
    }

    #[test]
    fn planted_groups_nearer_first() {
        let cfg = SequencingConfig { cluster_distance_cutoff: Some(50.0), ..Default::default() };
        let mut r = Vec::new();
        for (i, &(x, y)) in [(400.0, 400.0), (410.0, 405.0), (20.0, 30.0), (25.0, 20.0), (405.0, 395.0)].iter().enumerate() {
            r.push(region(i, 0, x, y, 1.0));
        }
        let s = sequence_regions(r, &cfg);
        assert_eq!(s.groups.len(), 2);
        let mut first = s.groups[0].members.clone();
        first.sort();
        assert_eq!(first, vec![2, 3]);
        // Brute force over the 2 group orders agrees.
        let c: Vec<Point> = s.groups.iter().map(|g| g.centroid).collect();
        assert!(c[0].norm() < c[1].norm());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn two_opt_never_worse_than_nn(seed in any::<u64>(), n in 1usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p: Vec<Point> = (0..n).map(|_| Point::new(rng.gen_range(0.0..500.0), rng.gen_range(0.0..500.0))).collect();
            let nn = path_length(&p, &nearest_neighbor_tour(&p));
            let tour = solve_tsp(&p, &SequencingConfig::default());
            prop_assert!(path_length(&p, &tour) <= nn + 1e-9);
            let mut sorted = tour.clone();
            sorted.sort();
            prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn sequence_is_permutation_and_deterministic(seed in any::<u64>(), n in 1usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r: Vec<VectorRegion> = (0..n)
                .map(|i| region(i, rng.gen_range(0..3), rng.gen_range(0.0..200.0), rng.gen_range(0.0..200.0), rng.gen_range(1.0..50.0)))
                .collect();
            let cfg = SequencingConfig::default().resolved_for(200, 200);
            let a = sequence_regions(r.clone(), &cfg);
            let b = sequence_regions(r, &cfg);
            prop_assert_eq!(&a, &b);
            let mut ids: Vec<usize> = a.regions.iter().map(|s| s.region.id).collect();
            ids.sort();
            prop_assert_eq!(ids, (0..n).collect::<Vec<_>>());
            let segs: Vec<usize> = a.regions.iter().map(|s| s.region.source_segment_id).collect();
            prop_assert!(segs.windows(2).all(|w| w[0] <= w[1]));
            let groups: Vec<usize> = a.regions.iter().map(|s| s.group_id).collect();
            prop_assert!(groups.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn cut_matches_single_linkage_components(seed in any::<u64>(), n in 2usize..25, cut in 5.0f64..80.0) {
            // Single linkage at height c equals connected components of the
            // graph joining points within distance c.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p: Vec<Point> = (0..n).map(|_| Point::new(rng.gen_range(0.0..200.0), rng.gen_range(0.0..200.0))).collect();
            let mut comp: Vec<usize> = (0..n).collect();
            loop {
                let mut changed = false;
                for i in 0..n {
                    for j in 0..n {
                        if p[i].distance(p[j]) <= cut && comp[j] > comp[i] {
                            comp[j] = comp[i];
                            changed = true;
                        }
                    }
                }
                if !changed { break; }
            }
            let clusters = cluster_points(&p, Linkage::Single, cut);
            for c in &clusters {
                prop_assert!(c.iter().all(|&i| comp[i] == comp[c[0]]));
            }
            let mut distinct = comp.clone();
            distinct.sort();
            distinct.dedup();
            prop_assert_eq!(clusters.len(), distinct.len());
        }
    }
}
