//! Density-based significant-place detection on haversine distance.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

/// Great-circle distance in meters.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaceParams {
    pub eps_m: f64,
    pub min_samples: usize,
}

impl Default for PlaceParams {
    fn default() -> Self {
        Self { eps_m: 30.0, min_samples: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Place {
    pub centroid: GeoPoint,
    pub members: usize,
}

/// Clusters fitted over one participant's full study period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificantPlaces {
    pub places: Vec<Place>,
    /// Cluster label of each fitted fix, `None` for noise.
    pub labels: Vec<Option<usize>>,
    pub eps_m: f64,
}

impl SignificantPlaces {
    pub fn len(&self) -> usize {
        self.places.len()
    }

    pub fn is_empty(&self) -> bool {
        self.places.is_empty()
    }

    /// Nearest centroid within `eps_m`, else noise.
    pub fn label(&self, p: GeoPoint) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, place) in self.places.iter().enumerate() {
            let d = haversine_m(p, place.centroid);
            if d <= self.eps_m && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Cluster with the most members; ties go to the lower index.
    pub fn top_place(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, p) in self.places.iter().enumerate() {
            if best.is_none_or(|b| p.members > self.places[b].members) {
                best = Some(i);
            }
        }
        best
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Neighbor lookup. Uses a local equirectangular grid when the fixes span a
/// small area, otherwise scans all pairs.
enum Index {
    Grid { cells: HashMap<(i64, i64), Vec<usize>>, cell_of: Vec<(i64, i64)>, reach: i64 },
    Flat,
}

const GRID_MAX_EXTENT_M: f64 = 50_000.0;

impl Index {
    fn build(points: &[GeoPoint], eps_m: f64) -> Self {
        let n = points.len() as f64;
        let lat0 = points.iter().map(|p| p.lat).sum::<f64>() / n;
        let lon0 = points.iter().map(|p| p.lon).sum::<f64>() / n;
        let coslat = lat0.to_radians().cos();
        let proj: Vec<(f64, f64)> = points
            .iter()
            .map(|p| {
                (
                    EARTH_RADIUS_M * (p.lon - lon0).to_radians() * coslat,
                    EARTH_RADIUS_M * (p.lat - lat0).to_radians(),
                )
            })
            .collect();
        let extent = proj.iter().fold(0.0f64, |m, (x, y)| m.max(x.abs()).max(y.abs()));
        if !(eps_m > 0.0) || lat0.abs() > 80.0 || extent > GRID_MAX_EXTENT_M {
            return Index::Flat;
        }
        // Cells of side eps/2: any two points sharing a cell are within eps.
        let side = eps_m / 2.0;
        let cell_of: Vec<(i64, i64)> =
            proj.iter().map(|(x, y)| ((x / side).floor() as i64, (y / side).floor() as i64)).collect();
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, c) in cell_of.iter().enumerate() {
            cells.entry(*c).or_default().push(i);
        }
        Index::Grid { cells, cell_of, reach: 3 }
    }

    fn for_each_candidate(&self, n: usize, i: usize, mut f: impl FnMut(usize) -> bool) {
        match self {
            Index::Flat => {
                for j in 0..n {
                    if !f(j) {
                        return;
                    }
                }
            }
            Index::Grid { cells, cell_of, reach } => {
                let (cx, cy) = cell_of[i];
                for dx in -reach..=*reach {
                    for dy in -reach..=*reach {
                        if let Some(members) = cells.get(&(cx + dx, cy + dy)) {
                            for &j in members {
                                if !f(j) {
                                    return;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

/// DBSCAN over haversine distance.
///
/// A core fix has at least `min_samples` fixes (itself included) within
/// `eps_m`. Clusters are connected components of core fixes; a border fix
/// joins the cluster of its lowest-index core neighbor. Clusters are numbered
/// by their lowest member index.
pub fn fit_significant_places(fixes: &[GeoPoint], params: &PlaceParams) -> SignificantPlaces {
    let n = fixes.len();
    let eps = params.eps_m;
    if n == 0 {
        return SignificantPlaces { places: Vec::new(), labels: Vec::new(), eps_m: eps };
    }
    let index = Index::build(fixes, eps);
    let within = |i: usize, j: usize| haversine_m(fixes[i], fixes[j]) <= eps;

    let mut core = vec![false; n];
    for i in 0..n {
        let mut count = 0;
        index.for_each_candidate(n, i, |j| {
            if within(i, j) {
                count += 1;
            }
            count < params.min_samples
        });
        core[i] = count >= params.min_samples;
    }

    let mut uf = UnionFind::new(n);
    for i in (0..n).filter(|&i| core[i]) {
        index.for_each_candidate(n, i, |j| {
            if j > i && core[j] && uf.find(i) != uf.find(j) && within(i, j) {
                uf.union(i, j);
            }
            true
        });
    }

    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for i in (0..n).filter(|&i| core[i]) {
        root_of[i] = Some(uf.find(i));
    }
    for i in (0..n).filter(|&i| !core[i]) {
        let mut best: Option<usize> = None;
        index.for_each_candidate(n, i, |j| {
            if core[j] && best.is_none_or(|b| j < b) && within(i, j) {
                best = Some(j);
            }
            true
        });
        root_of[i] = best.map(|j| uf.find(j));
    }

    // Number clusters by first appearance in input order.
    let mut number: HashMap<usize, usize> = HashMap::new();
    let mut labels = Vec::with_capacity(n);
    for r in &root_of {
        labels.push(r.map(|root| {
            let next = number.len();
            *number.entry(root).or_insert(next)
        }));
    }
    let k = number.len();
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); k];
    for (p, l) in fixes.iter().zip(&labels) {
        if let Some(c) = l {
            sums[*c].0 += p.lat;
            sums[*c].1 += p.lon;
            sums[*c].2 += 1;
        }
    }
    let places = sums
        .into_iter()
        .map(|(la, lo, m)| Place { centroid: GeoPoint::new(la / m as f64, lo / m as f64), members: m })
        .collect();
    SignificantPlaces { places, labels, eps_m: eps }
}
