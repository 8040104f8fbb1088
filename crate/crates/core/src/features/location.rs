//! Location and mobility features.

use serde::{Deserialize, Serialize};

use super::places::{haversine_m, GeoPoint, SignificantPlaces};
use super::{Feature, FeatureValues};
use crate::ingest::{DayWindow, Payload};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationParams {
    pub occupancy_cap_min: f64,
}

impl Default for LocationParams {
    fn default() -> Self {
        Self { occupancy_cap_min: 10.0 }
    }
}

/// Minutes each fix represents: half the gap to each neighbor, each side
/// capped at `cap_min`.
pub(crate) fn occupancy_weights(times_ms: &[i64], cap_min: f64) -> Vec<f64> {
    let n = times_ms.len();
    (0..n)
        .map(|i| {
            let side = |a: i64, b: i64| ((b - a) as f64 / 60_000.0 / 2.0).min(cap_min);
            let before = if i > 0 { side(times_ms[i - 1], times_ms[i]) } else { 0.0 };
            let after = if i + 1 < n { side(times_ms[i], times_ms[i + 1]) } else { 0.0 };
            before + after
        })
        .collect()
}

/// Root-mean-square haversine distance of points from their lat/lon centroid.
pub fn radius_of_gyration_m(points: &[GeoPoint]) -> f64 {
    let n = points.len() as f64;
    let o = points[0];
    let c = GeoPoint::new(
        o.lat + points.iter().map(|p| p.lat - o.lat).sum::<f64>() / n,
        o.lon + points.iter().map(|p| p.lon - o.lon).sum::<f64>() / n,
    );
    (points.iter().map(|p| haversine_m(*p, c).powi(2)).sum::<f64>() / n).sqrt()
}

/// Location features for one day. All features are missing when the day has
/// no fixes.
pub fn location_features(window: &DayWindow, places: &SignificantPlaces, params: &LocationParams) -> FeatureValues {
    let mut v = FeatureValues::default();
    let (times, points): (Vec<i64>, Vec<GeoPoint>) = window
        .events
        .iter()
        .filter_map(|e| match e.payload {
            Payload::LocationFix { latitude, longitude, .. } => Some((e.timestamp_ms, GeoPoint::new(latitude, longitude))),
            _ => None,
        })
        .unzip();
    let n = points.len();
    if n == 0 {
        return v;
    }

    let lats: Vec<f64> = points.iter().map(|p| p.lat).collect();
    let lons: Vec<f64> = points.iter().map(|p| p.lon).collect();
    // shifted by the first fix so identical coordinates give exactly zero
    let pvar = |xs: &[f64]| {
        let shifted: Vec<f64> = xs.iter().map(|x| x - xs[0]).collect();
        crate::numeric::population_std(&shifted).map_or(0.0, |s| s * s)
    };
    let variance = pvar(&lats) + pvar(&lons);
    v.set(Feature::LocVariance, Some(variance));
    v.set(Feature::LocLogVariance, (variance > 0.0).then(|| variance.ln()));

    let distance: f64 = points.windows(2).map(|w| haversine_m(w[0], w[1])).sum();
    v.set(Feature::LocTotalDistanceM, Some(distance));
    v.set(Feature::LocRadiusGyrationM, Some(radius_of_gyration_m(&points)));
    let elapsed_s = (times[n - 1] - times[0]) as f64 / 1000.0;
    v.set(Feature::LocAvgSpeedMps, (elapsed_s > 0.0).then(|| distance / elapsed_s));

    let labels: Vec<Option<usize>> = points.iter().map(|p| places.label(*p)).collect();
    let weights = occupancy_weights(&times, params.occupancy_cap_min);

    let mut visited: Vec<usize> = labels.iter().flatten().copied().collect();
    visited.sort_unstable();
    visited.dedup();
    v.set(Feature::LocNumSignificantPlaces, Some(visited.len() as f64));

    let clustered: Vec<usize> = labels.iter().flatten().copied().collect();
    let transitions = clustered.windows(2).filter(|w| w[0] != w[1]).count();
    v.set(Feature::LocNumTransitions, Some(transitions as f64));

    let mut time_at = vec![0.0; places.len()];
    for (l, w) in labels.iter().zip(&weights) {
        if let Some(c) = l {
            time_at[*c] += w;
        }
    }
    let mut max_stay = 0.0f64;
    let mut run: Option<(usize, f64)> = None;
    for (l, w) in labels.iter().zip(&weights) {
        run = match (run, l) {
            (Some((c, acc)), Some(cur)) if c == *cur => Some((c, acc + w)),
            (_, Some(cur)) => Some((*cur, *w)),
            (_, None) => None,
        };
        if let Some((_, acc)) = run {
            max_stay = max_stay.max(acc);
        }
    }
    v.set(Feature::LocMaxStayAtClusterMin, Some(max_stay));
    let top = places.top_place().map_or(0.0, |t| time_at[t]);
    v.set(Feature::LocTimeAtTopClusterMin, Some(top));

    let total: f64 = time_at.iter().sum();
    if n == 1 {
        v.set(Feature::LocEntropy, None);
        v.set(Feature::LocNormalizedEntropy, None);
    } else if total <= 0.0 {
        v.set(Feature::LocEntropy, Some(0.0));
        v.set(Feature::LocNormalizedEntropy, Some(0.0));
    } else {
        let probs: Vec<f64> = time_at.iter().filter(|t| **t > 0.0).map(|t| t / total).collect();
        let entropy = -probs.iter().map(|p| p * p.ln()).sum::<f64>();
        let k = probs.len();
        let normalized = if k > 1 { (entropy / (k as f64).ln()).clamp(0.0, 1.0) } else { 0.0 };
        v.set(Feature::LocEntropy, Some(entropy.max(0.0)));
        v.set(Feature::LocNormalizedEntropy, Some(normalized));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::places::{fit_significant_places, PlaceParams};
    use crate::ingest::SensorEvent;
    use chrono::NaiveDate;

    const MIN: i64 = 60_000;

    fn window(fixes: &[(i64, f64, f64)]) -> DayWindow {
        DayWindow {
            participant_id: "p".into(),
            local_date: NaiveDate::from_ymd_opt(2019, 4, 1).unwrap(),
            start_ms: 0,
            end_ms: 24 * 60 * MIN,
            events: fixes
                .iter()
                .map(|(t, lat, lon)| SensorEvent {
                    participant_id: "p".into(),
                    timestamp_ms: *t,
                    payload: Payload::LocationFix { latitude: *lat, longitude: *lon, accuracy_m: 5.0 },
                })
                .collect(),
        }
    }

    fn places_for(w: &DayWindow, min_samples: usize) -> SignificantPlaces {
        let pts: Vec<GeoPoint> = w
            .events
            .iter()
            .map(|e| match e.payload {
                Payload::LocationFix { latitude, longitude, .. } => GeoPoint::new(latitude, longitude),
                _ => unreachable!(),
            })
            .collect();
        fit_significant_places(&pts, &PlaceParams { eps_m: 30.0, min_samples })
    }

    #[test]
    fn stationary_day() {
        let fixes: Vec<_> = (0..12).map(|i| (i * 30 * MIN, 47.6, -122.3)).collect();
        let w = window(&fixes);
        let v = location_features(&w, &places_for(&w, 5), &LocationParams::default());
        assert_eq!(v.get(Feature::LocVariance), Some(0.0));
        assert_eq!(v.get(Feature::LocLogVariance), None);
        assert_eq!(v.get(Feature::LocRadiusGyrationM), Some(0.0));
        assert_eq!(v.get(Feature::LocTotalDistanceM), Some(0.0));
        assert_eq!(v.get(Feature::LocNumTransitions), Some(0.0));
        assert_eq!(v.get(Feature::LocNumSignificantPlaces), Some(1.0));
        assert_eq!(v.get(Feature::LocEntropy), Some(0.0));
        assert_eq!(v.get(Feature::LocNormalizedEntropy), Some(0.0));
        // 12 fixes at 30 min spacing: interior fixes claim 10 + 10, ends 10
        assert_eq!(v.get(Feature::LocMaxStayAtClusterMin), Some(220.0));
        assert_eq!(v.get(Feature::LocTimeAtTopClusterMin), Some(220.0));
    }

    #[test]
    fn two_fix_distance() {
        let w = window(&[(0, 47.0, -122.0), (10 * MIN, 47.01, -122.0)]);
        let v = location_features(&w, &places_for(&w, 5), &LocationParams::default());
        let d = v.get(Feature::LocTotalDistanceM).unwrap();
        assert!((d - 1111.949).abs() < 1e-3);
        assert!((v.get(Feature::LocAvgSpeedMps).unwrap() - d / 600.0).abs() < 1e-12);
        // both fixes are noise at min_samples 5
        assert_eq!(v.get(Feature::LocEntropy), Some(0.0));
        assert_eq!(v.get(Feature::LocNumSignificantPlaces), Some(0.0));
    }

    #[test]
    fn equal_time_in_two_clusters() {
        let mut fixes = Vec::new();
        for i in 0..6 {
            fixes.push((i * 20 * MIN, 47.60, -122.30));
        }
        for i in 6..12 {
            fixes.push((i * 20 * MIN, 47.61, -122.30));
        }
        // mirror the edge weights so both clusters hold identical time
        let w = window(&fixes);
        let v = location_features(&w, &places_for(&w, 3), &LocationParams::default());
        assert_eq!(v.get(Feature::LocNumSignificantPlaces), Some(2.0));
        assert_eq!(v.get(Feature::LocNumTransitions), Some(1.0));
        assert!((v.get(Feature::LocEntropy).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!((v.get(Feature::LocNormalizedEntropy).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_fix() {
        let w = window(&[(5 * MIN, 47.0, -122.0)]);
        let v = location_features(&w, &places_for(&w, 1), &LocationParams::default());
        assert_eq!(v.get(Feature::LocTotalDistanceM), Some(0.0));
        assert_eq!(v.get(Feature::LocVariance), Some(0.0));
        assert_eq!(v.get(Feature::LocEntropy), None);
        assert_eq!(v.get(Feature::LocNormalizedEntropy), None);
        assert_eq!(v.get(Feature::LocAvgSpeedMps), None);
    }

    #[test]
    fn no_fixes_all_missing() {
        let w = window(&[]);
        let v = location_features(&w, &places_for(&w, 1), &LocationParams::default());
        assert!(v.0.iter().all(Option::is_none));
    }

    #[test]
    fn occupancy_caps() {
        assert_eq!(occupancy_weights(&[0, 4 * MIN, 64 * MIN], 10.0), vec![2.0, 12.0, 10.0]);
    }
}
