//! Daily digital-biomarker extraction and per-participant aggregation.

mod daily;
mod io;
mod location;
mod phone;
pub mod places;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use daily::{bluetooth_features, call_features, sleep_features, steps_features};
pub use io::{read_participant_csv, write_daily_csv, write_participant_csv, FeatureIoError};
pub use location::{location_features, LocationParams};
pub use phone::{phone_features, PhoneDay};
pub use places::{fit_significant_places, haversine_m, GeoPoint, PlaceParams, SignificantPlaces};

use crate::ingest::{segment_days, DayWindow, IngestError, Payload, SensorEvent};

/// Canonical daily features, in output column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(usize)]
pub enum Feature {
    LocVariance,
    LocLogVariance,
    LocTotalDistanceM,
    LocRadiusGyrationM,
    LocNumSignificantPlaces,
    LocNumTransitions,
    LocEntropy,
    LocNormalizedEntropy,
    LocMaxStayAtClusterMin,
    LocTimeAtTopClusterMin,
    LocAvgSpeedMps,
    PhoneCountEpisodes,
    PhoneSumDurationMin,
    PhoneMaxDurationMin,
    PhoneAvgDurationMin,
    PhoneStdDurationMin,
    PhoneFirstUseAfterWakeMin,
    BtCountScans,
    BtUniqueDevices,
    CallMissedCount,
    CallUniqueContacts,
    StepsSum,
    StepsMaxInterval,
    StepsAvgInterval,
    StepsStdInterval,
    SleepSumAsleepMin,
    SleepSumAwakeMin,
    SleepAvgEfficiency,
    SleepAvgInBedMin,
}

pub const N_DAILY: usize = 29;

impl Feature {
    pub const ALL: [Feature; N_DAILY] = [
        Feature::LocVariance,
        Feature::LocLogVariance,
        Feature::LocTotalDistanceM,
        Feature::LocRadiusGyrationM,
        Feature::LocNumSignificantPlaces,
        Feature::LocNumTransitions,
        Feature::LocEntropy,
        Feature::LocNormalizedEntropy,
        Feature::LocMaxStayAtClusterMin,
        Feature::LocTimeAtTopClusterMin,
        Feature::LocAvgSpeedMps,
        Feature::PhoneCountEpisodes,
        Feature::PhoneSumDurationMin,
        Feature::PhoneMaxDurationMin,
        Feature::PhoneAvgDurationMin,
        Feature::PhoneStdDurationMin,
        Feature::PhoneFirstUseAfterWakeMin,
        Feature::BtCountScans,
        Feature::BtUniqueDevices,
        Feature::CallMissedCount,
        Feature::CallUniqueContacts,
        Feature::StepsSum,
        Feature::StepsMaxInterval,
        Feature::StepsAvgInterval,
        Feature::StepsStdInterval,
        Feature::SleepSumAsleepMin,
        Feature::SleepSumAwakeMin,
        Feature::SleepAvgEfficiency,
        Feature::SleepAvgInBedMin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::LocVariance => "loc_variance",
            Feature::LocLogVariance => "loc_log_variance",
            Feature::LocTotalDistanceM => "loc_total_distance_m",
            Feature::LocRadiusGyrationM => "loc_radius_gyration_m",
            Feature::LocNumSignificantPlaces => "loc_num_significant_places",
            Feature::LocNumTransitions => "loc_num_transitions",
            Feature::LocEntropy => "loc_entropy",
            Feature::LocNormalizedEntropy => "loc_normalized_entropy",
            Feature::LocMaxStayAtClusterMin => "loc_max_stay_at_cluster_min",
            Feature::LocTimeAtTopClusterMin => "loc_time_at_top_cluster_min",
            Feature::LocAvgSpeedMps => "loc_avg_speed_mps",
            Feature::PhoneCountEpisodes => "phone_count_episodes",
            Feature::PhoneSumDurationMin => "phone_sum_duration_min",
            Feature::PhoneMaxDurationMin => "phone_max_duration_min",
            Feature::PhoneAvgDurationMin => "phone_avg_duration_min",
            Feature::PhoneStdDurationMin => "phone_std_duration_min",
            Feature::PhoneFirstUseAfterWakeMin => "phone_first_use_after_wake_min",
            Feature::BtCountScans => "bt_count_scans",
            Feature::BtUniqueDevices => "bt_unique_devices",
            Feature::CallMissedCount => "call_missed_count",
            Feature::CallUniqueContacts => "call_unique_contacts",
            Feature::StepsSum => "steps_sum",
            Feature::StepsMaxInterval => "steps_max_interval",
            Feature::StepsAvgInterval => "steps_avg_interval",
            Feature::StepsStdInterval => "steps_std_interval",
            Feature::SleepSumAsleepMin => "sleep_sum_asleep_min",
            Feature::SleepSumAwakeMin => "sleep_sum_awake_min",
            Feature::SleepAvgEfficiency => "sleep_avg_efficiency",
            Feature::SleepAvgInBedMin => "sleep_avg_in_bed_min",
        }
    }

    pub fn from_name(name: &str) -> Option<Feature> {
        Feature::ALL.iter().copied().find(|f| f.name() == name)
    }

    pub fn mean_column(self) -> String {
        format!("{}_mean", self.name())
    }

    pub fn std_column(self) -> String {
        format!("{}_std", self.name())
    }
}

/// Feature values for part or all of the catalogue; `None` is missing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureValues(pub [Option<f64>; N_DAILY]);

impl FeatureValues {
    pub fn get(&self, f: Feature) -> Option<f64> {
        self.0[f as usize]
    }

    pub fn set(&mut self, f: Feature, v: Option<f64>) {
        self.0[f as usize] = v;
    }

    /// Copies every present value of `other` into `self`.
    pub fn merge(&mut self, other: &FeatureValues) {
        for (dst, src) in self.0.iter_mut().zip(other.0.iter()) {
            if src.is_some() {
                *dst = *src;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailyFeatureRow {
    pub participant_id: String,
    pub local_date: NaiveDate,
    pub values: FeatureValues,
}

/// One participant's study-period summary: mean and population std of every
/// daily feature over the days on which it was present.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantFeatureVector {
    pub participant_id: String,
    pub days_observed: usize,
    /// `[f0_mean, f0_std, f1_mean, f1_std, ...]` in catalogue order.
    pub values: Vec<Option<f64>>,
}

impl ParticipantFeatureVector {
    pub fn get(&self, column: &str) -> Option<f64> {
        participant_feature_names().iter().position(|c| c == column).and_then(|i| self.values[i])
    }
}

/// Column names of [`ParticipantFeatureVector::values`].
pub fn participant_feature_names() -> Vec<String> {
    Feature::ALL.iter().flat_map(|f| [f.mean_column(), f.std_column()]).collect()
}

/// Aggregates one participant's daily rows.
///
/// Panics if `rows` is empty.
pub fn aggregate_participant(rows: &[DailyFeatureRow]) -> ParticipantFeatureVector {
    assert!(!rows.is_empty(), "aggregate_participant needs at least one row");
    let mut values = Vec::with_capacity(2 * N_DAILY);
    for f in Feature::ALL {
        let present: Vec<f64> = rows.iter().filter_map(|r| r.values.get(f)).collect();
        values.push(crate::numeric::mean(&present));
        values.push(crate::numeric::population_std(&present));
    }
    ParticipantFeatureVector { participant_id: rows[0].participant_id.clone(), days_observed: rows.len(), values }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureParams {
    pub utc_offset_minutes: i32,
    pub places: PlaceParams,
    /// An `on` followed by `unlock` within this many seconds starts a usage
    /// episode at the `on`; a lone `on` is a glance.
    pub glance_pairing_s: f64,
    /// Cap on the time a single location fix claims on each side.
    pub occupancy_cap_min: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self { utc_offset_minutes: -420, places: PlaceParams::default(), glance_pairing_s: 30.0, occupancy_cap_min: 10.0 }
    }
}

/// Data-quality counters accumulated during extraction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct QualityCounters {
    /// Screen episodes still open at local midnight.
    pub unclosed_episodes: usize,
}

#[derive(Debug, Clone)]
pub struct ParticipantFeatures {
    pub daily: Vec<DailyFeatureRow>,
    pub vector: ParticipantFeatureVector,
    pub places: SignificantPlaces,
    pub quality: QualityCounters,
}

/// Extracts features for one participant from their windows (ascending date).
pub fn extract_participant(windows: &[DayWindow], params: &FeatureParams) -> Option<ParticipantFeatures> {
    let first = windows.first()?;
    let fixes: Vec<GeoPoint> = windows
        .iter()
        .flat_map(|w| w.events.iter())
        .filter_map(|e| match e.payload {
            Payload::LocationFix { latitude, longitude, .. } => Some(GeoPoint::new(latitude, longitude)),
            _ => None,
        })
        .collect();
    let places = fit_significant_places(&fixes, &params.places);
    let loc_params = LocationParams { occupancy_cap_min: params.occupancy_cap_min };
    let mut quality = QualityCounters::default();
    let mut carry = false;
    let mut daily = Vec::with_capacity(windows.len());
    for w in windows {
        let mut values = FeatureValues::default();
        let phone = phone_features(w, carry, params.glance_pairing_s);
        carry = phone.open_at_end;
        if phone.open_at_end {
            quality.unclosed_episodes += 1;
        }
        values.merge(&phone.values);
        values.merge(&location_features(w, &places, &loc_params));
        values.merge(&bluetooth_features(w));
        values.merge(&call_features(w));
        values.merge(&steps_features(w));
        values.merge(&sleep_features(w));
        daily.push(DailyFeatureRow { participant_id: w.participant_id.clone(), local_date: w.local_date, values });
    }
    let vector = aggregate_participant(&daily);
    debug_assert_eq!(vector.participant_id, first.participant_id);
    Some(ParticipantFeatures { daily, vector, places, quality })
}

/// Segments all events and extracts every participant, ordered by id.
pub fn extract_all(events: &[SensorEvent], params: &FeatureParams) -> Result<Vec<ParticipantFeatures>, IngestError> {
    let windows = segment_days(events, params.utc_offset_minutes)?;
    let mut grouped: BTreeMap<String, Vec<DayWindow>> = BTreeMap::new();
    for w in windows {
        grouped.entry(w.participant_id.clone()).or_default().push(w);
    }
    let groups: Vec<Vec<DayWindow>> = grouped.into_values().collect();
    Ok(groups.par_iter().filter_map(|ws| extract_participant(ws, params)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[(Feature, Option<f64>)]) -> DailyFeatureRow {
        let mut values = FeatureValues::default();
        for (f, x) in v {
            values.set(*f, *x);
        }
        DailyFeatureRow { participant_id: "p".into(), local_date: NaiveDate::from_ymd_opt(2019, 4, 1).unwrap(), values }
    }

    #[test]
    fn catalogue_is_consistent() {
        for (i, f) in Feature::ALL.iter().enumerate() {
            assert_eq!(*f as usize, i);
            assert_eq!(Feature::from_name(f.name()), Some(*f));
        }
        assert_eq!(participant_feature_names().len(), 58);
    }

    #[test]
    fn aggregate_mean_std() {
        let rows = [
            row(&[(Feature::StepsSum, Some(1000.0)), (Feature::BtCountScans, Some(4.0))]),
            row(&[(Feature::StepsSum, Some(3000.0))]),
        ];
        let v = aggregate_participant(&rows);
        assert_eq!(v.days_observed, 2);
        assert_eq!(v.get("steps_sum_mean"), Some(2000.0));
        assert_eq!(v.get("steps_sum_std"), Some(1000.0));
        assert_eq!(v.get("bt_count_scans_mean"), Some(4.0));
        assert_eq!(v.get("bt_count_scans_std"), Some(0.0));
        assert_eq!(v.get("sleep_avg_efficiency_mean"), None);
        assert_eq!(v.get("sleep_avg_efficiency_std"), None);
    }
}
