//! Seeded synthetic cohorts: raw sensor streams plus UCLA responses with
//! planted per-category behavioral differences.
//!
//! Default category parameters follow a two-factor design. A social factor
//! (socially and both lonely) lengthens the one long daily phone session from
//! 90 to 120 minutes, the dominant signal, and moderately shrinks mobility,
//! Bluetooth contact and steps. An emotional factor (emotionally and both
//! lonely) raises phone use, wake-to-phone latency and time awake in bed and
//! lowers time asleep. Not-lonely participants get the base values.
//!
//! Every participant draws their own parameters from the category values
//! (multiplicative between-participant noise), then every day draws around
//! those (additive within-participant noise of one cohort-wide size). Zero noise scales make each day an exact
//! copy of the category values.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};
use thiserror::Error;

use crate::features::{extract_all, FeatureParams};
use crate::ingest::{read_dir, CallDirection, IngestError, Payload, ScreenState, SensorEvent, SensorKind, MS_PER_DAY};
use crate::labeling::{read_ucla_csv, responses_for_scores, write_ucla_csv, Category, LabelError};
use crate::rng::stream;
use crate::stats::{compare_groups, CompareParams, StatsError, ALPHA};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid cohort config: {0}")]
    Config(String),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io { path: path.display().to_string(), source }
}

/// Coefficient of variation of participant draws at `between = 1`.
pub const BETWEEN_CV: f64 = 0.05;
/// Coefficient of variation of daily draws at `within = 1`.
pub const WITHIN_CV: f64 = 0.2;

/// Generative parameters of one category (or one participant's draw).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryParams {
    /// Daily minutes inside unlock episodes.
    pub phone_minutes: f64,
    /// Unlock episodes per day, including the long session.
    pub phone_episodes: f64,
    /// One daily session of this length, carved out of `phone_minutes`; 0 disables it.
    pub long_session_min: f64,
    pub first_use_after_wake_min: f64,
    /// Rounded and clamped to 3..=6.
    pub location_clusters: f64,
    pub hops_per_day: f64,
    /// Typical distance of non-home clusters from home.
    pub cluster_spread_m: f64,
    pub bt_device_pool: f64,
    pub bt_scans_per_day: f64,
    pub steps_mean: f64,
    /// Day-to-day standard deviation of the daily step total at `within = 1`.
    pub steps_sd: f64,
    pub sleep_asleep_min: f64,
    pub sleep_awake_min: f64,
    pub missed_calls_per_day: f64,
    pub calls_per_day: f64,
    pub contact_pool: f64,
}

impl CategoryParams {
    /// Not-lonely base values.
    pub fn base() -> Self {
        Self {
            phone_minutes: 400.0,
            phone_episodes: 25.0,
            long_session_min: 90.0,
            first_use_after_wake_min: 20.0,
            location_clusters: 5.0,
            hops_per_day: 4.0,
            cluster_spread_m: 3000.0,
            bt_device_pool: 12.0,
            bt_scans_per_day: 30.0,
            steps_mean: 7000.0,
            steps_sd: 1500.0,
            sleep_asleep_min: 450.0,
            sleep_awake_min: 50.0,
            missed_calls_per_day: 1.0,
            calls_per_day: 3.0,
            contact_pool: 8.0,
        }
    }

    fn with_social(mut self) -> Self {
        self.long_session_min += 30.0;
        self.hops_per_day -= 0.4;
        self.cluster_spread_m -= 300.0;
        self.bt_device_pool -= 1.0;
        self.bt_scans_per_day -= 2.0;
        self.steps_mean -= 500.0;
        self
    }

    fn with_emotional(mut self) -> Self {
        self.phone_minutes += 95.0;
        self.phone_episodes += 3.0;
        self.first_use_after_wake_min += 8.0;
        self.sleep_asleep_min -= 40.0;
        self.sleep_awake_min += 15.0;
        self
    }

    fn fields(&self) -> [(&'static str, f64); 16] {
        [
            ("phone_minutes", self.phone_minutes),
            ("phone_episodes", self.phone_episodes),
            ("long_session_min", self.long_session_min),
            ("first_use_after_wake_min", self.first_use_after_wake_min),
            ("location_clusters", self.location_clusters),
            ("hops_per_day", self.hops_per_day),
            ("cluster_spread_m", self.cluster_spread_m),
            ("bt_device_pool", self.bt_device_pool),
            ("bt_scans_per_day", self.bt_scans_per_day),
            ("steps_mean", self.steps_mean),
            ("steps_sd", self.steps_sd),
            ("sleep_asleep_min", self.sleep_asleep_min),
            ("sleep_awake_min", self.sleep_awake_min),
            ("missed_calls_per_day", self.missed_calls_per_day),
            ("calls_per_day", self.calls_per_day),
            ("contact_pool", self.contact_pool),
        ]
    }

    fn from_values(v: [f64; 16]) -> Self {
        Self {
            phone_minutes: v[0],
            phone_episodes: v[1],
            long_session_min: v[2],
            first_use_after_wake_min: v[3],
            location_clusters: v[4],
            hops_per_day: v[5],
            cluster_spread_m: v[6],
            bt_device_pool: v[7],
            bt_scans_per_day: v[8],
            steps_mean: v[9],
            steps_sd: v[10],
            sleep_asleep_min: v[11],
            sleep_awake_min: v[12],
            missed_calls_per_day: v[13],
            calls_per_day: v[14],
            contact_pool: v[15],
        }
    }

    fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self::from_values(self.fields().map(|(_, v)| f(v)))
    }
}

/// Participant-level features moved by each parameter, when it differs
/// between the two compared categories.
const PLANT_MAP: [(&str, &[&str]); 13] = [
    ("phone_minutes", &["phone_sum_duration_min_mean"]),
    ("phone_episodes", &["phone_count_episodes_mean"]),
    ("long_session_min", &["phone_max_duration_min_mean"]),
    ("first_use_after_wake_min", &["phone_first_use_after_wake_min_mean"]),
    ("location_clusters", &["loc_num_significant_places_mean"]),
    ("hops_per_day", &["loc_num_transitions_mean", "loc_num_significant_places_mean"]),
    ("cluster_spread_m", &["loc_variance_mean"]),
    ("bt_device_pool", &["bt_unique_devices_mean"]),
    ("bt_scans_per_day", &["bt_count_scans_mean"]),
    ("steps_mean", &["steps_sum_mean", "steps_avg_interval_mean", "steps_max_interval_mean"]),
    ("sleep_asleep_min", &["sleep_sum_asleep_min_mean"]),
    ("sleep_awake_min", &["sleep_sum_awake_min_mean"]),
    ("missed_calls_per_day", &["call_missed_count_mean"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerCategory<T> {
    pub socially_lonely: T,
    pub emotionally_lonely: T,
    pub both_lonely: T,
    pub not_lonely: T,
}

impl<T: Copy> PerCategory<T> {
    pub fn uniform(v: T) -> Self {
        Self { socially_lonely: v, emotionally_lonely: v, both_lonely: v, not_lonely: v }
    }

    pub fn get(&self, c: Category) -> T {
        match c {
            Category::SociallyLonely => self.socially_lonely,
            Category::EmotionallyLonely => self.emotionally_lonely,
            Category::BothLonely => self.both_lonely,
            Category::NotLonely => self.not_lonely,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseScales {
    /// Multiplier on [`BETWEEN_CV`].
    pub between: f64,
    /// Multiplier on [`WITHIN_CV`] and on `steps_sd`; also randomizes event
    /// timing and choice.
    pub within: f64,
    /// Standard deviation of fix positions around a cluster center.
    pub gps_jitter_m: f64,
}

impl Default for NoiseScales {
    fn default() -> Self {
        Self { between: 1.0, within: 1.0, gps_jitter_m: 8.0 }
    }
}

impl NoiseScales {
    pub fn zero() -> Self {
        Self { between: 0.0, within: 0.0, gps_jitter_m: 0.0 }
    }
}

/// Inclusive subscale-score ranges targeted for the low (not lonely on that
/// subscale) and high sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRanges {
    pub low: [u8; 2],
    pub high: [u8; 2],
}

impl Default for ScoreRanges {
    fn default() -> Self {
        Self { low: [5, 10], high: [11, 20] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortConfig {
    pub n_per_category: PerCategory<usize>,
    pub days: usize,
    pub start_date: NaiveDate,
    pub utc_offset_minutes: i32,
    pub fix_interval_min: u32,
    pub params: PerCategory<CategoryParams>,
    pub noise: NoiseScales,
    pub scores: ScoreRanges,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        let base = CategoryParams::base();
        Self {
            n_per_category: PerCategory { socially_lonely: 24, emotionally_lonely: 19, both_lonely: 87, not_lonely: 75 },
            days: 70,
            start_date: NaiveDate::from_ymd_opt(2019, 4, 1).expect("valid date"),
            utc_offset_minutes: -420,
            fix_interval_min: 20,
            params: PerCategory {
                socially_lonely: base.with_social(),
                emotionally_lonely: base.with_emotional(),
                both_lonely: base.with_social().with_emotional(),
                not_lonely: base,
            },
            noise: NoiseScales::default(),
            scores: ScoreRanges::default(),
            seed: 1,
        }
    }
}

impl CohortConfig {
    /// Same counts and noise, every category on the base parameters.
    pub fn null() -> Self {
        Self { params: PerCategory::uniform(CategoryParams::base()), ..Self::default() }
    }

    pub fn total(&self) -> usize {
        Category::ALL.iter().map(|c| self.n_per_category.get(*c)).sum()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.days == 0 {
            return bad("days must be at least 1".into());
        }
        if self.fix_interval_min == 0 || self.fix_interval_min > 24 * 60 {
            return bad("fix_interval_min must be in 1..=1440".into());
        }
        if self.utc_offset_minutes.abs() > crate::ingest::MAX_UTC_OFFSET_MINUTES {
            return bad(format!("utc offset {} out of range", self.utc_offset_minutes));
        }
        for c in Category::ALL {
            for (name, v) in self.params.get(c).fields() {
                if !v.is_finite() || v < 0.0 {
                    return bad(format!("{c}.{name} = {v} must be finite and >= 0"));
                }
            }
        }
        let n = self.noise;
        for (name, v) in [("between", n.between), ("within", n.within), ("gps_jitter_m", n.gps_jitter_m)] {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("noise.{name} = {v} must be finite and >= 0"));
            }
        }
        let [lo0, lo1] = self.scores.low;
        let [hi0, hi1] = self.scores.high;
        if lo0 > lo1 || hi0 > hi1 {
            return bad("score ranges must be ordered".into());
        }
        // scores outside 5..=20 are reported by the back-solver
        for s in [lo0, lo1, hi0, hi1] {
            responses_for_scores(s, 5)?;
        }
        if lo1 > crate::labeling::SUBSCALE_CUTOFF || hi0 <= crate::labeling::SUBSCALE_CUTOFF {
            return bad("low range must stay at or below the cutoff and high range above it".into());
        }
        Ok(())
    }

    /// Features whose SL-minus-EL difference is planted, with its sign.
    pub fn planted(&self) -> Vec<PlantedDifference> {
        let sl = self.params.socially_lonely.fields();
        let el = self.params.emotionally_lonely.fields();
        let mut by_feature: BTreeMap<&str, Vec<(&str, i8)>> = BTreeMap::new();
        for (param, features) in PLANT_MAP {
            let a = sl.iter().find(|f| f.0 == param).map(|f| f.1).unwrap_or(0.0);
            let b = el.iter().find(|f| f.0 == param).map(|f| f.1).unwrap_or(0.0);
            if a == b {
                continue;
            }
            let sign = if a < b { -1 } else { 1 };
            for f in features {
                by_feature.entry(f).or_default().push((param, sign));
            }
        }
        by_feature
            .into_iter()
            .filter(|(_, v)| v.iter().all(|(_, s)| *s == v[0].1))
            .map(|(f, v)| PlantedDifference {
                feature: f.to_string(),
                parameters: v.iter().map(|(p, _)| p.to_string()).collect(),
                sign: v[0].1,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedDifference {
    pub feature: String,
    pub parameters: Vec<String>,
    /// Sign of the socially-minus-emotionally-lonely mean difference.
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantTruth {
    pub participant_id: String,
    pub category: Category,
    pub social_score: u8,
    pub emotional_score: u8,
    pub params: CategoryParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthManifest {
    pub config: CohortConfig,
    pub participants: Vec<ParticipantTruth>,
    pub planted: Vec<PlantedDifference>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedCohort {
    /// Sorted by participant, then timestamp.
    pub events: Vec<SensorEvent>,
    pub ucla: Vec<(String, [u8; 10])>,
    pub manifest: GroundTruthManifest,
}

fn normal(g: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(g)
}

/// `day(g, x, scale, cv)`: `max(0, x + cv * scale * N(0,1))`. The spread does
/// not depend on `x`, so day-to-day variability carries no category signal.
fn day(g: &mut ChaCha8Rng, x: f64, scale: f64, cv: f64) -> f64 {
    if cv == 0.0 {
        x
    } else {
        (x + cv * scale * normal(g)).max(0.0)
    }
}

/// `x * max(0, 1 + cv * N(0,1))`; no draw when `cv == 0`.
fn jitter(g: &mut ChaCha8Rng, x: f64, cv: f64) -> f64 {
    if cv == 0.0 {
        x
    } else {
        x * (1.0 + cv * normal(g)).max(0.0)
    }
}

fn count(x: f64) -> usize {
    x.round().max(0.0) as usize
}

/// Splits `total` by positive weights into integer parts that sum exactly to
/// the rounded total.
fn split_integer(total: f64, weights: &[f64]) -> Vec<i64> {
    let sum: f64 = weights.iter().sum();
    let total = total.round() as i64;
    let mut acc = 0.0;
    let mut prev = 0i64;
    weights
        .iter()
        .map(|w| {
            acc += w;
            let edge = ((acc / sum) * total as f64).round() as i64;
            let part = edge - prev;
            prev = edge;
            part
        })
        .collect()
}

/// Log-normal weights with log-sd `spread / 2`; equal weights at zero spread.
fn weights(g: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<f64> {
    (0..n).map(|_| if spread == 0.0 { 1.0 } else { (0.5 * spread * normal(g)).exp() }).collect()
}

/// Sorted event offsets in `[lo, hi)`: evenly centered without noise, uniform
/// with it.
fn times_in(g: &mut ChaCha8Rng, n: usize, lo: i64, hi: i64, within: f64) -> Vec<i64> {
    let span = (hi - lo) as f64;
    let mut t: Vec<i64> = if within == 0.0 {
        (0..n).map(|i| lo + ((i as f64 + 0.5) * span / n as f64) as i64).collect()
    } else {
        (0..n).map(|_| lo + g.gen_range(0.0..span) as i64).collect()
    };
    t.sort_unstable();
    t
}

const MIN_MS: i64 = 60_000;
const HOME_LAT: f64 = 33.42;
const HOME_LON: f64 = -111.93;
const M_PER_DEG_LAT: f64 = 111_320.0;

fn offset_m(lat: f64, lon: f64, north_m: f64, east_m: f64) -> (f64, f64) {
    (lat + north_m / M_PER_DEG_LAT, lon + east_m / (M_PER_DEG_LAT * lat.to_radians().cos()))
}

struct Participant<'a> {
    id: String,
    params: CategoryParams,
    /// Cohort-wide scale of daily noise.
    scale: CategoryParams,
    config: &'a CohortConfig,
}

impl Participant<'_> {
    fn event(&self, t: i64, payload: Payload) -> SensorEvent {
        SensorEvent { participant_id: self.id.clone(), timestamp_ms: t, payload }
    }

    fn simulate(&self, g: &mut ChaCha8Rng) -> Vec<SensorEvent> {
        let p = &self.params;
        let within = self.config.noise.within;
        let cv = within * WITHIN_CV;
        let jit = self.config.noise.gps_jitter_m;

        let n_clusters = p.location_clusters.round().clamp(3.0, 6.0) as usize;
        let (home_lat, home_lon) = if within == 0.0 {
            (HOME_LAT, HOME_LON)
        } else {
            offset_m(HOME_LAT, HOME_LON, g.gen_range(-5000.0..5000.0), g.gen_range(-5000.0..5000.0))
        };
        let mut centers = vec![(home_lat, home_lon)];
        for i in 1..n_clusters {
            let frac = (i - 1) as f64 / (n_clusters - 1) as f64;
            let mut angle = std::f64::consts::TAU * frac;
            let mut dist = p.cluster_spread_m * (0.6 + 0.8 * frac);
            if within > 0.0 {
                angle += g.gen_range(-0.3..0.3);
                dist *= g.gen_range(0.85..1.15);
            }
            // keep clusters far enough apart to stay distinct places
            let dist = dist.max(300.0 * i as f64);
            centers.push(offset_m(home_lat, home_lon, dist * angle.sin(), dist * angle.cos()));
        }
        let pool_bt = count(p.bt_device_pool).max(1);
        let pool_contacts = count(p.contact_pool).max(1);
        // personal spread of ordinary episode lengths, unrelated to category
        let dispersion = if within == 0.0 { 0.0 } else { within * g.gen_range(0.4..2.0) };

        let start_local = self.config.start_date.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp_millis();
        let to_utc = -(self.config.utc_offset_minutes as i64) * MIN_MS;
        let mut out = Vec::new();
        for d in 0..self.config.days as i64 {
            let day0 = start_local + d * MS_PER_DAY + to_utc;

            // sleep, ending at wake on this day
            let wake_min = if within == 0.0 { 420.0 } else { (420.0 + within * 30.0 * normal(g)).clamp(300.0, 600.0) };
            let wake = day0 + (wake_min * MIN_MS as f64) as i64;
            let asleep = day(g, p.sleep_asleep_min, self.scale.sleep_asleep_min, cv).max(1.0);
            let awake = day(g, p.sleep_awake_min, self.scale.sleep_awake_min, cv);
            let bed_ms = ((asleep + awake) * MIN_MS as f64).ceil() as i64;
            out.push(self.event(
                wake,
                Payload::Sleep {
                    start_ms: wake - bed_ms,
                    end_ms: wake,
                    minutes_asleep: asleep,
                    minutes_awake: awake,
                    efficiency: 100.0 * asleep / (asleep + awake),
                },
            ));

            // phone episodes between first use and 23:30
            let first = wake + (day(g, p.first_use_after_wake_min, self.scale.first_use_after_wake_min, cv) * MIN_MS as f64) as i64;
            let last = day0 + (23 * 60 + 30) * MIN_MS;
            if first < last - MIN_MS {
                let span_min = (last - first) as f64 / MIN_MS as f64;
                let n = count(day(g, p.phone_episodes, self.scale.phone_episodes, cv)).max(1);
                let total = day(g, p.phone_minutes, self.scale.phone_minutes, cv).min(0.8 * span_min);
                let long = if p.long_session_min > 0.0 { day(g, p.long_session_min, self.scale.long_session_min, cv).min(total) } else { 0.0 };
                let mut durations: Vec<i64> = if long > 0.0 && n > 1 {
                    let rest = split_integer((total - long) * MIN_MS as f64, &weights(g, n - 1, dispersion));
                    let at = if within == 0.0 { (n - 1) / 2 } else { g.gen_range(0..n) };
                    let mut v = rest;
                    v.insert(at, (long * MIN_MS as f64).round() as i64);
                    v
                } else if long > 0.0 {
                    vec![(long * MIN_MS as f64).round() as i64]
                } else {
                    split_integer(total * MIN_MS as f64, &weights(g, n, dispersion))
                };
                durations.iter_mut().for_each(|x| *x = (*x).max(1000));
                let used: i64 = durations.iter().sum();
                let gap_total = ((last - first) - used).max(0) as f64;
                let gaps = if durations.len() > 1 {
                    split_integer(gap_total, &weights(g, durations.len() - 1, within))
                } else {
                    vec![]
                };
                let mut t = first;
                for (i, dur) in durations.iter().enumerate() {
                    out.push(self.event(t, Payload::Screen { state: ScreenState::Unlock }));
                    out.push(self.event(t + dur, Payload::Screen { state: ScreenState::Lock }));
                    t += dur + gaps.get(i).copied().unwrap_or(0);
                }
            }

            // location itinerary: home, then hops between 08:00 and 20:00
            let hops = count(day(g, p.hops_per_day, self.scale.hops_per_day, cv));
            let hop_times = times_in(g, hops, day0 + 8 * 60 * MIN_MS, day0 + 20 * 60 * MIN_MS, within);
            let mut stops = Vec::with_capacity(hops);
            let mut here = 0usize;
            for _ in 0..hops {
                here = if within == 0.0 {
                    (here + 1) % n_clusters
                } else {
                    let next = g.gen_range(0..n_clusters - 1);
                    if next >= here { next + 1 } else { next }
                };
                stops.push(here);
            }
            let step = self.config.fix_interval_min as i64 * MIN_MS;
            let mut k = 0usize;
            let mut at = 0usize;
            let mut t = day0;
            while t < day0 + MS_PER_DAY {
                while k < hops && hop_times[k] <= t {
                    at = stops[k];
                    k += 1;
                }
                let (lat, lon) = centers[at];
                let (lat, lon) = if jit > 0.0 { offset_m(lat, lon, jit * normal(g), jit * normal(g)) } else { (lat, lon) };
                out.push(self.event(t, Payload::LocationFix { latitude: lat, longitude: lon, accuracy_m: 10.0 }));
                t += step;
            }

            // bluetooth sightings 08:00-22:00
            let scans = count(day(g, p.bt_scans_per_day, self.scale.bt_scans_per_day, cv));
            for (i, ts) in times_in(g, scans, day0 + 8 * 60 * MIN_MS, day0 + 22 * 60 * MIN_MS, within).into_iter().enumerate() {
                let dev = if within == 0.0 { i % pool_bt } else { g.gen_range(0..pool_bt) };
                out.push(self.event(ts, Payload::Bluetooth { device_hash: format!("{}-bt{dev}", self.id), rssi: -70 }));
            }

            // calls 09:00-21:00
            let answered = count(day(g, p.calls_per_day, self.scale.calls_per_day, cv));
            let missed = count(day(g, p.missed_calls_per_day, self.scale.missed_calls_per_day, cv));
            let call_times = times_in(g, answered + missed, day0 + 9 * 60 * MIN_MS, day0 + 21 * 60 * MIN_MS, within);
            let mut kinds: Vec<bool> = (0..answered + missed).map(|i| i >= answered).collect();
            if within > 0.0 {
                kinds.shuffle(g);
            }
            for (i, (ts, is_missed)) in call_times.into_iter().zip(kinds).enumerate() {
                let contact = if within == 0.0 { i % pool_contacts } else { g.gen_range(0..pool_contacts) };
                let (direction, duration_s) = if is_missed {
                    (CallDirection::Missed, 0)
                } else if i % 2 == 0 {
                    (CallDirection::Incoming, count(jitter(g, 180.0, cv)) as u64)
                } else {
                    (CallDirection::Outgoing, count(jitter(g, 180.0, cv)) as u64)
                };
                out.push(self.event(
                    ts,
                    Payload::Call { direction, contact_hash: format!("{}-c{contact}", self.id), duration_s },
                ));
            }

            // fourteen hourly step samples from 08:30
            let total_steps = if within == 0.0 { p.steps_mean } else { (p.steps_mean + within * p.steps_sd * normal(g)).max(0.0) };
            for (i, s) in split_integer(total_steps, &weights(g, 14, within)).into_iter().enumerate() {
                let ts = day0 + (8 * 60 + 30 + 60 * i as i64) * MIN_MS;
                out.push(self.event(ts, Payload::Steps { step_count: s.max(0) as u64 }));
            }
        }
        out
    }
}

/// Generates the cohort in memory. Participant `i` (in id order) draws from
/// stream `i + 1` of the seed; stream 0 assigns categories to ids.
pub fn generate(config: &CohortConfig) -> Result<GeneratedCohort, SynthError> {
    config.validate()?;
    let mut cats: Vec<Category> =
        Category::ALL.iter().flat_map(|c| std::iter::repeat_n(*c, config.n_per_category.get(*c))).collect();
    cats.shuffle(&mut stream(config.seed, 0));
    let width = cats.len().max(1).to_string().len().max(3);
    let mut avg = [0.0; 16];
    for c in Category::ALL {
        for (a, (_, v)) in avg.iter_mut().zip(config.params.get(c).fields()) {
            *a += v / Category::COUNT as f64;
        }
    }
    let scale = CategoryParams::from_values(avg);

    let results: Vec<(ParticipantTruth, [u8; 10], Vec<SensorEvent>)> = cats
        .par_iter()
        .enumerate()
        .map(|(i, &category)| {
            let mut g = stream(config.seed, i as u64 + 1);
            let id = format!("p{:0width$}", i + 1);
            let bcv = config.noise.between * BETWEEN_CV;
            let params = config.params.get(category).map(|v| jitter(&mut g, v, bcv));
            let pick = |g: &mut ChaCha8Rng, [lo, hi]: [u8; 2]| {
                if config.noise.between == 0.0 && config.noise.within == 0.0 {
                    lo + (hi - lo) / 2
                } else {
                    g.gen_range(lo..=hi)
                }
            };
            let social_high = matches!(category, Category::SociallyLonely | Category::BothLonely);
            let emotional_high = matches!(category, Category::EmotionallyLonely | Category::BothLonely);
            let r = config.scores;
            let social_score = pick(&mut g, if social_high { r.high } else { r.low });
            let emotional_score = pick(&mut g, if emotional_high { r.high } else { r.low });
            let responses = responses_for_scores(social_score, emotional_score)?;
            let events = Participant { id: id.clone(), params, scale, config }.simulate(&mut g);
            Ok((ParticipantTruth { participant_id: id, category, social_score, emotional_score, params }, responses, events))
        })
        .collect::<Result<_, SynthError>>()?;

    let mut events = Vec::new();
    let mut ucla = Vec::new();
    let mut participants = Vec::new();
    for (truth, responses, mut ev) in results {
        ev.sort_by_key(|e| e.timestamp_ms);
        events.extend(ev);
        ucla.push((truth.participant_id.clone(), responses));
        participants.push(truth);
    }
    Ok(GeneratedCohort {
        events,
        ucla,
        manifest: GroundTruthManifest { config: config.clone(), participants, planted: config.planted() },
    })
}

pub const UCLA_FILE: &str = "ucla_post.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes the six sensor files, `ucla_post.csv` and `manifest.json`.
pub fn write_cohort(cohort: &GeneratedCohort, dir: &Path) -> Result<(), SynthError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for kind in SensorKind::ALL {
        let path = dir.join(kind.file_name());
        let f = File::create(&path).map_err(io_err(&path))?;
        crate::ingest::write_sensor_csv(BufWriter::new(f), kind, &cohort.events)?;
    }
    let path = dir.join(UCLA_FILE);
    write_ucla_csv(BufWriter::new(File::create(&path).map_err(io_err(&path))?), &cohort.ucla)?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, serde_json::to_string_pretty(&cohort.manifest)? + "\n").map_err(io_err(&path))?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<GroundTruthManifest, SynthError> {
    let path = dir.join(MANIFEST_FILE);
    Ok(serde_json::from_str(&fs::read_to_string(&path).map_err(io_err(&path))?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantCheck {
    pub feature: String,
    pub expected_sign: i8,
    pub mean_diff: f64,
    pub p_value: f64,
    pub recovered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantReport {
    pub checks: Vec<PlantCheck>,
    pub label_mismatches: usize,
    pub n_features_tested: usize,
    pub n_significant: usize,
    /// Binomial 99% upper bound on significant features at alpha under no effect.
    pub null_bound: usize,
}

impl PlantReport {
    pub fn all_recovered(&self) -> bool {
        self.label_mismatches == 0 && self.checks.iter().all(|c| c.recovered)
    }

    pub fn within_null_bound(&self) -> bool {
        self.n_significant <= self.null_bound
    }
}

/// Smallest k with P(Binomial(n, alpha) <= k) >= 0.99.
pub fn binomial_upper_bound(n: usize, alpha: f64) -> usize {
    if n == 0 {
        return 0;
    }
    let b = Binomial::new(alpha, n as u64).expect("valid binomial");
    (0..=n as u64).find(|k| b.cdf(*k) >= 0.99).unwrap_or(n as u64) as usize
}

/// Runs ingest, feature extraction, labeling and the SL-vs-EL comparison on a
/// generated directory and checks each planted difference.
pub fn verify_plant(dir: &Path, resamples: usize, seed: u64) -> Result<PlantReport, SynthError> {
    let manifest = read_manifest(dir)?;
    let ingested = read_dir(dir)?;
    let params = FeatureParams { utc_offset_minutes: manifest.config.utc_offset_minutes, ..FeatureParams::default() };
    let vectors: Vec<_> = extract_all(&ingested.events, &params)?.into_iter().map(|p| p.vector).collect();
    let path = dir.join(UCLA_FILE);
    let (assessments, _) = read_ucla_csv(File::open(&path).map_err(io_err(&path))?, UCLA_FILE)?;
    let labels: BTreeMap<String, Category> =
        assessments.iter().map(|a| (a.participant_id.clone(), a.category)).collect();
    let label_mismatches = manifest
        .participants
        .iter()
        .filter(|t| labels.get(&t.participant_id) != Some(&t.category))
        .count();
    let cmp = compare_groups(&vectors, &labels, &CompareParams { resamples, seed, ..CompareParams::default() })?;
    let checks = manifest
        .planted
        .iter()
        .map(|pd| {
            let row = cmp.rows.iter().find(|r| r.feature_name == pd.feature);
            let (mean_diff, p_value) = row.map_or((f64::NAN, 1.0), |r| (r.mean_diff, r.p_value));
            PlantCheck {
                feature: pd.feature.clone(),
                expected_sign: pd.sign,
                mean_diff,
                p_value,
                recovered: p_value < ALPHA && mean_diff.signum() == f64::from(pd.sign),
            }
        })
        .collect();
    let tested = cmp.rows.iter().filter(|r| r.note != "feature constant across both groups").count();
    Ok(PlantReport {
        checks,
        label_mismatches,
        n_features_tested: tested,
        n_significant: cmp.rows.iter().filter(|r| r.significant).count(),
        null_bound: binomial_upper_bound(tested, ALPHA),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{extract_participant, Feature};
    use crate::ingest::segment_days;
    use crate::labeling::score_ucla;

    fn small(n: usize, days: usize) -> CohortConfig {
        CohortConfig {
            n_per_category: PerCategory::uniform(n),
            days,
            ..CohortConfig::default()
        }
    }

    #[test]
    fn zero_noise_days_equal_category_values() {
        let cfg = CohortConfig { noise: NoiseScales::zero(), ..small(1, 3) };
        let cohort = generate(&cfg).unwrap();
        let windows = segment_days(&cohort.events, cfg.utc_offset_minutes).unwrap();
        for truth in &cohort.manifest.participants {
            let p = cfg.params.get(truth.category);
            assert_eq!(truth.params, p);
            let ws: Vec<_> = windows.iter().filter(|w| w.participant_id == truth.participant_id).cloned().collect();
            assert_eq!(ws.len(), 3);
            let pf = extract_participant(&ws, &FeatureParams::default()).unwrap();
            for day in &pf.daily {
                let v = |f: Feature| day.values.get(f).unwrap();
                assert!((v(Feature::PhoneSumDurationMin) - p.phone_minutes).abs() < 1e-9);
                assert_eq!(v(Feature::PhoneCountEpisodes), p.phone_episodes.round());
                assert_eq!(v(Feature::PhoneFirstUseAfterWakeMin), p.first_use_after_wake_min);
                assert_eq!(v(Feature::BtCountScans), p.bt_scans_per_day.round());
                assert_eq!(v(Feature::BtUniqueDevices), p.bt_device_pool.min(p.bt_scans_per_day).round());
                assert_eq!(v(Feature::StepsSum), p.steps_mean);
                assert_eq!(v(Feature::SleepSumAsleepMin), p.sleep_asleep_min);
                assert_eq!(v(Feature::SleepSumAwakeMin), p.sleep_awake_min);
                assert_eq!(v(Feature::CallMissedCount), p.missed_calls_per_day.round());
                // counts are rounded per day
                assert_eq!(v(Feature::LocNumTransitions), p.hops_per_day.round());
                if p.long_session_min > 0.0 {
                    assert_eq!(v(Feature::PhoneMaxDurationMin), p.long_session_min);
                }
            }
            // every day is an exact copy, so day-to-day spread is zero
            for f in [Feature::PhoneSumDurationMin, Feature::LocVariance, Feature::StepsMaxInterval] {
                assert!(pf.vector.get(&f.std_column()).unwrap() < 1e-9, "{f:?}");
            }
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = small(2, 2);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_cohort(&generate(&cfg).unwrap(), a.path()).unwrap();
        write_cohort(&generate(&cfg).unwrap(), b.path()).unwrap();
        for name in SensorKind::ALL.iter().map(|k| k.file_name()).chain([UCLA_FILE, MANIFEST_FILE]) {
            assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
        }
        let other = generate(&CohortConfig { seed: 2, ..cfg }).unwrap();
        assert_ne!(other.events, generate(&small(2, 2)).unwrap().events);
    }

    #[test]
    fn ucla_reproduces_categories() {
        let cohort = generate(&small(5, 1)).unwrap();
        for ((pid, r), truth) in cohort.ucla.iter().zip(&cohort.manifest.participants) {
            let raw: Vec<i64> = r.iter().map(|v| i64::from(*v)).collect();
            let a = score_ucla(pid, &raw).unwrap();
            assert_eq!(a.category, truth.category);
            assert_eq!((a.social_score, a.emotional_score), (truth.social_score, truth.emotional_score));
        }
    }

    #[test]
    fn infeasible_scores_and_negative_rates_rejected() {
        let cfg = CohortConfig { scores: ScoreRanges { low: [4, 10], high: [11, 20] }, ..small(1, 1) };
        assert!(matches!(generate(&cfg), Err(SynthError::Label(LabelError::InfeasibleScore(4)))));
        let cfg = CohortConfig { scores: ScoreRanges { low: [5, 10], high: [11, 21] }, ..small(1, 1) };
        assert!(generate(&cfg).is_err());
        let mut cfg = small(1, 1);
        cfg.params.not_lonely.hops_per_day = -1.0;
        assert!(matches!(generate(&cfg), Err(SynthError::Config(_))));
        assert!(matches!(generate(&CohortConfig { days: 0, ..small(1, 1) }), Err(SynthError::Config(_))));
    }

    #[test]
    fn planted_signs_follow_the_design() {
        let planted = CohortConfig::default().planted();
        let sign = |f: &str| planted.iter().find(|p| p.feature == f).map(|p| p.sign);
        assert_eq!(sign("phone_sum_duration_min_mean"), Some(-1));
        assert_eq!(sign("loc_variance_mean"), Some(-1));
        assert_eq!(sign("sleep_sum_asleep_min_mean"), Some(1));
        assert_eq!(sign("sleep_sum_awake_min_mean"), Some(-1));
        assert_eq!(sign("phone_max_duration_min_mean"), Some(1));
        assert_eq!(sign("call_missed_count_mean"), None);
        assert!(CohortConfig::null().planted().is_empty());
    }

    #[test]
    fn binomial_bound() {
        // Binomial(58, 0.05): P(X <= 6) = 0.9748, P(X <= 7) = 0.9920
        assert_eq!(binomial_upper_bound(58, 0.05), 7);
        assert_eq!(binomial_upper_bound(0, 0.05), 0);
    }

    #[test]
    fn split_integer_is_exact() {
        let parts = split_integer(1000.0, &[1.0, 2.0, 3.0, 0.5]);
        assert_eq!(parts.iter().sum::<i64>(), 1000);
        assert_eq!(split_integer(10.0, &[1.0; 3]), vec![3, 4, 3]);
    }
}
