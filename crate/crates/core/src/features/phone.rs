//! Screen-usage episodes.

use super::{Feature, FeatureValues};
use crate::ingest::{DayWindow, Payload, ScreenState};

#[derive(Debug, Clone, PartialEq)]
pub struct PhoneDay {
    pub values: FeatureValues,
    /// Usage episodes as (start_ms, end_ms), clipped to the window.
    pub episodes: Vec<(i64, i64)>,
    /// An episode was still open at the end of the window and was closed there.
    pub open_at_end: bool,
}

/// Phone-usage features for one day.
///
/// An episode opens at `unlock`, or at an `on` that is followed by `unlock`
/// within `glance_pairing_s`, and closes at the next `lock` or `off`. With
/// `open_at_start` the day begins inside an episode carried over from the
/// previous window.
pub fn phone_features(window: &DayWindow, open_at_start: bool, glance_pairing_s: f64) -> PhoneDay {
    let pairing_ms = (glance_pairing_s * 1000.0).round() as i64;
    let mut open: Option<i64> = open_at_start.then_some(window.start_ms);
    let mut pending_on: Option<i64> = None;
    let mut episodes = Vec::new();
    for ev in &window.events {
        let Payload::Screen { state } = ev.payload else { continue };
        let t = ev.timestamp_ms;
        match state {
            ScreenState::On => {
                if open.is_none() {
                    pending_on = Some(t);
                }
            }
            ScreenState::Unlock => {
                if open.is_none() {
                    let start = match pending_on {
                        Some(on) if t - on <= pairing_ms => on,
                        _ => t,
                    };
                    open = Some(start);
                }
                pending_on = None;
            }
            ScreenState::Lock | ScreenState::Off => {
                if let Some(start) = open.take() {
                    episodes.push((start, t));
                }
                pending_on = None;
            }
        }
    }
    let open_at_end = open.is_some();
    if let Some(start) = open {
        episodes.push((start, window.end_ms));
    }

    let durations: Vec<f64> = episodes.iter().map(|(s, e)| (e - s) as f64 / 60_000.0).collect();
    let mut values = FeatureValues::default();
    values.set(Feature::PhoneCountEpisodes, Some(durations.len() as f64));
    values.set(Feature::PhoneSumDurationMin, Some(durations.iter().sum()));
    values.set(Feature::PhoneMaxDurationMin, durations.iter().copied().reduce(f64::max));
    values.set(Feature::PhoneAvgDurationMin, crate::numeric::mean(&durations));
    values.set(Feature::PhoneStdDurationMin, crate::numeric::population_std(&durations));

    let wake = window
        .events
        .iter()
        .filter_map(|e| match e.payload {
            Payload::Sleep { end_ms, .. } => Some(end_ms),
            _ => None,
        })
        .max();
    let first_use = wake.and_then(|w| {
        episodes.iter().map(|(s, _)| *s).filter(|s| *s >= w).min().map(|s| (s - w) as f64 / 60_000.0)
    });
    values.set(Feature::PhoneFirstUseAfterWakeMin, first_use);

    PhoneDay { values, episodes, open_at_end }
}
