//! Bluetooth, call, step and sleep features.

use std::collections::BTreeSet;

use super::{Feature, FeatureValues};
use crate::ingest::{CallDirection, DayWindow, Payload};
use crate::numeric::{mean, population_std};

pub fn bluetooth_features(window: &DayWindow) -> FeatureValues {
    let mut count = 0usize;
    let mut devices = BTreeSet::new();
    for e in &window.events {
        if let Payload::Bluetooth { device_hash, .. } = &e.payload {
            count += 1;
            devices.insert(device_hash.as_str());
        }
    }
    let mut v = FeatureValues::default();
    v.set(Feature::BtCountScans, Some(count as f64));
    v.set(Feature::BtUniqueDevices, Some(devices.len() as f64));
    v
}

pub fn call_features(window: &DayWindow) -> FeatureValues {
    let mut missed = 0usize;
    let mut contacts = BTreeSet::new();
    for e in &window.events {
        if let Payload::Call { direction, contact_hash, .. } = &e.payload {
            if *direction == CallDirection::Missed {
                missed += 1;
            }
            contacts.insert(contact_hash.as_str());
        }
    }
    let mut v = FeatureValues::default();
    v.set(Feature::CallMissedCount, Some(missed as f64));
    v.set(Feature::CallUniqueContacts, Some(contacts.len() as f64));
    v
}

pub fn steps_features(window: &DayWindow) -> FeatureValues {
    let samples: Vec<f64> = window
        .events
        .iter()
        .filter_map(|e| match e.payload {
            Payload::Steps { step_count } => Some(step_count as f64),
            _ => None,
        })
        .collect();
    let mut v = FeatureValues::default();
    v.set(Feature::StepsSum, Some(samples.iter().sum()));
    v.set(Feature::StepsMaxInterval, samples.iter().copied().reduce(f64::max));
    v.set(Feature::StepsAvgInterval, mean(&samples));
    v.set(Feature::StepsStdInterval, population_std(&samples));
    v
}

/// Sleep episodes are attributed to the local day on which they end.
pub fn sleep_features(window: &DayWindow) -> FeatureValues {
    let mut asleep = 0.0;
    let mut awake = 0.0;
    let mut efficiency = Vec::new();
    let mut in_bed = Vec::new();
    for e in &window.events {
        if let Payload::Sleep { start_ms, end_ms, minutes_asleep, minutes_awake, efficiency: eff } = e.payload {
            asleep += minutes_asleep;
            awake += minutes_awake;
            efficiency.push(eff);
            in_bed.push((end_ms - start_ms) as f64 / 60_000.0);
        }
    }
    let mut v = FeatureValues::default();
    v.set(Feature::SleepSumAsleepMin, Some(asleep));
    v.set(Feature::SleepSumAwakeMin, Some(awake));
    v.set(Feature::SleepAvgEfficiency, mean(&efficiency));
    v.set(Feature::SleepAvgInBedMin, mean(&in_bed));
    v
}
