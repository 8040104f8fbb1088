//! UCLA-10 scoring, social/emotional subscales and loneliness categories.
//!
//! Items 1-5 form the emotional subscale and items 6-10 the social subscale,
//! in file column order. Emotional items 2, 3 and 4 and social items 1 and 4
//! (columns 6 and 9) are reverse scored.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::RowError;
use crate::numeric::{mean, percent_half_up, population_std, quantile};

#[derive(Debug, Error, PartialEq)]
pub enum LabelError {
    #[error("item {item} response {value} outside 1..=4")]
    OutOfRange { item: usize, value: i64 },
    #[error("expected 10 responses, found {0}")]
    ItemCount(usize),
    #[error("subscale score {0} outside 5..=20")]
    InfeasibleScore(u8),
    #[error("cohort summary needs at least one assessment")]
    EmptyCohort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subscale {
    Emotional,
    Social,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UclaItemSpec {
    /// 1-based column position.
    pub item_id: usize,
    pub subscale: Subscale,
    pub reverse_scored: bool,
}

const fn item(item_id: usize, subscale: Subscale, reverse_scored: bool) -> UclaItemSpec {
    UclaItemSpec { item_id, subscale, reverse_scored }
}

pub const UCLA_ITEMS: [UclaItemSpec; 10] = [
    item(1, Subscale::Emotional, false),
    item(2, Subscale::Emotional, true),
    item(3, Subscale::Emotional, true),
    item(4, Subscale::Emotional, true),
    item(5, Subscale::Emotional, false),
    item(6, Subscale::Social, true),
    item(7, Subscale::Social, false),
    item(8, Subscale::Social, false),
    item(9, Subscale::Social, true),
    item(10, Subscale::Social, false),
];

/// Scores at or below this value indicate little or no loneliness.
pub const SUBSCALE_CUTOFF: u8 = 10;
/// Totals at or below this value are "low" overall loneliness.
pub const TOTAL_CUTOFF: u8 = 20;

/// Four-way loneliness category. The discriminant is the class index used by
/// the classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SociallyLonely = 0,
    EmotionallyLonely = 1,
    BothLonely = 2,
    NotLonely = 3,
}

impl Category {
    pub const ALL: [Category; 4] =
        [Category::SociallyLonely, Category::EmotionallyLonely, Category::BothLonely, Category::NotLonely];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Category> {
        Category::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::SociallyLonely => "socially_lonely",
            Category::EmotionallyLonely => "emotionally_lonely",
            Category::BothLonely => "both_lonely",
            Category::NotLonely => "not_lonely",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Category::SociallyLonely => "Socially Lonely",
            Category::EmotionallyLonely => "Emotionally Lonely",
            Category::BothLonely => "Both Lonely",
            Category::NotLonely => "Not Lonely",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| format!("unknown category {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverallLevel {
    Low,
    High,
}

impl OverallLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            OverallLevel::Low => "low",
            OverallLevel::High => "high",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UclaAssessment {
    pub participant_id: String,
    pub responses: [u8; 10],
    pub social_score: u8,
    pub emotional_score: u8,
    pub total_score: u8,
    pub category: Category,
    pub overall_binary: OverallLevel,
}

fn transformed(spec: &UclaItemSpec, raw: u8) -> u8 {
    if spec.reverse_scored {
        5 - raw
    } else {
        raw
    }
}

/// Scores one complete set of raw 1..=4 responses.
pub fn score_ucla(participant_id: &str, responses: &[i64]) -> Result<UclaAssessment, LabelError> {
    if responses.len() != UCLA_ITEMS.len() {
        return Err(LabelError::ItemCount(responses.len()));
    }
    let mut raw = [0u8; 10];
    for (i, v) in responses.iter().enumerate() {
        if !(1..=4).contains(v) {
            return Err(LabelError::OutOfRange { item: i + 1, value: *v });
        }
        raw[i] = *v as u8;
    }
    let mut social = 0u8;
    let mut emotional = 0u8;
    for (spec, r) in UCLA_ITEMS.iter().zip(raw) {
        match spec.subscale {
            Subscale::Social => social += transformed(spec, r),
            Subscale::Emotional => emotional += transformed(spec, r),
        }
    }
    let total = social + emotional;
    Ok(UclaAssessment {
        participant_id: participant_id.to_string(),
        responses: raw,
        social_score: social,
        emotional_score: emotional,
        total_score: total,
        category: categorize(social, emotional),
        overall_binary: overall_binary(total),
    })
}

pub fn categorize(social_score: u8, emotional_score: u8) -> Category {
    match (social_score > SUBSCALE_CUTOFF, emotional_score > SUBSCALE_CUTOFF) {
        (true, false) => Category::SociallyLonely,
        (false, true) => Category::EmotionallyLonely,
        (true, true) => Category::BothLonely,
        (false, false) => Category::NotLonely,
    }
}

pub fn overall_binary(total_score: u8) -> OverallLevel {
    if total_score <= TOTAL_CUTOFF {
        OverallLevel::Low
    } else {
        OverallLevel::High
    }
}

/// Lexicographically smallest raw responses reaching the target subscale
/// scores.
pub fn responses_for_scores(social_score: u8, emotional_score: u8) -> Result<[u8; 10], LabelError> {
    for s in [social_score, emotional_score] {
        if !(5..=20).contains(&s) {
            return Err(LabelError::InfeasibleScore(s));
        }
    }
    let mut raw = [0u8; 10];
    for subscale in [Subscale::Emotional, Subscale::Social] {
        let target = if subscale == Subscale::Social { social_score } else { emotional_score };
        let items: Vec<(usize, &UclaItemSpec)> =
            UCLA_ITEMS.iter().enumerate().filter(|(_, s)| s.subscale == subscale).collect();
        let mut remaining = target;
        for (k, (pos, spec)) in items.iter().enumerate() {
            let left = (items.len() - k - 1) as u8;
            let choice = (1..=4u8)
                .find(|&r| {
                    let t = transformed(spec, r);
                    t <= remaining && remaining - t >= left && remaining - t <= 4 * left
                })
                .expect("feasible target always has a choice");
            raw[*pos] = choice;
            remaining -= transformed(spec, choice);
        }
    }
    Ok(raw)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Descriptives {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Population standard deviation.
    pub sd: f64,
}

impl Descriptives {
    pub fn of(xs: &[f64]) -> Option<Self> {
        Some(Self {
            mean: mean(xs)?,
            median: quantile(xs, 0.5)?,
            q1: quantile(xs, 0.25)?,
            q3: quantile(xs, 0.75)?,
            sd: population_std(xs)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountShare {
    pub label: String,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortSummary {
    pub n: usize,
    pub total: Descriptives,
    pub social: Descriptives,
    pub emotional: Descriptives,
    pub categories: Vec<CountShare>,
    pub overall: Vec<CountShare>,
}

pub fn cohort_summary(assessments: &[UclaAssessment]) -> Result<CohortSummary, LabelError> {
    let n = assessments.len();
    if n == 0 {
        return Err(LabelError::EmptyCohort);
    }
    let col = |f: fn(&UclaAssessment) -> u8| -> Vec<f64> { assessments.iter().map(|a| f64::from(f(a))).collect() };
    let share = |label: &str, count: usize| CountShare {
        label: label.to_string(),
        count,
        percent: percent_half_up(count as u64, n as u64),
    };
    let categories = Category::ALL
        .iter()
        .map(|c| share(c.as_str(), assessments.iter().filter(|a| a.category == *c).count()))
        .collect();
    let overall = [OverallLevel::Low, OverallLevel::High]
        .iter()
        .map(|l| share(l.as_str(), assessments.iter().filter(|a| a.overall_binary == *l).count()))
        .collect();
    Ok(CohortSummary {
        n,
        total: Descriptives::of(&col(|a| a.total_score)).expect("non-empty"),
        social: Descriptives::of(&col(|a| a.social_score)).expect("non-empty"),
        emotional: Descriptives::of(&col(|a| a.emotional_score)).expect("non-empty"),
        categories,
        overall,
    })
}

pub const UCLA_HEADER: [&str; 11] =
    ["participant_id", "item_1", "item_2", "item_3", "item_4", "item_5", "item_6", "item_7", "item_8", "item_9", "item_10"];

/// Reads `ucla_post.csv`. Incomplete or out-of-range rows are rejected and
/// reported; they never yield partial scores.
pub fn read_ucla_csv<R: Read>(reader: R, source: &str) -> Result<(Vec<UclaAssessment>, Vec<RowError>), csv::Error> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let mut out = Vec::new();
    let mut rejected = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let reject = |reason: String| RowError { file: source.to_string(), line, reason };
        if rec.len() != UCLA_HEADER.len() {
            rejected.push(reject(format!("expected 11 fields, found {}", rec.len())));
            continue;
        }
        let pid = rec[0].trim();
        let parsed: Result<Vec<i64>, String> = (1..=10)
            .map(|i| {
                let s = rec[i].trim();
                if s.is_empty() {
                    Err(format!("item_{i} missing"))
                } else {
                    s.parse::<i64>().map_err(|_| format!("item_{i} is not an integer"))
                }
            })
            .collect();
        match parsed.map_err(|e| e.to_string()).and_then(|r| score_ucla(pid, &r).map_err(|e| e.to_string())) {
            Ok(a) if !pid.is_empty() => out.push(a),
            Ok(_) => rejected.push(reject("empty participant_id".into())),
            Err(reason) => rejected.push(reject(reason)),
        }
    }
    out.sort_by(|a, b| a.participant_id.cmp(&b.participant_id));
    Ok((out, rejected))
}

pub fn write_ucla_csv<W: Write>(writer: W, rows: &[(String, [u8; 10])]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(UCLA_HEADER)?;
    for (pid, r) in rows {
        let mut rec = vec![pid.clone()];
        rec.extend(r.iter().map(u8::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub const LABELS_HEADER: [&str; 6] =
    ["participant_id", "social_score", "emotional_score", "total_score", "category", "overall_binary"];

pub fn write_labels_csv<W: Write>(writer: W, assessments: &[UclaAssessment]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LABELS_HEADER)?;
    for a in assessments {
        w.write_record([
            a.participant_id.clone(),
            a.social_score.to_string(),
            a.emotional_score.to_string(),
            a.total_score.to_string(),
            a.category.as_str().to_string(),
            a.overall_binary.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Participant labels as read back from `labels.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRow {
    pub participant_id: String,
    pub social_score: u8,
    pub emotional_score: u8,
    pub total_score: u8,
    pub category: Category,
}

pub fn read_labels_csv<R: Read>(reader: R) -> Result<Vec<LabelRow>, String> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    if header != LABELS_HEADER {
        return Err("unexpected labels.csv header".into());
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let num = |i: usize| rec[i].parse::<u8>().map_err(|_| format!("bad score {:?}", &rec[i]));
        out.push(LabelRow {
            participant_id: rec[0].to_string(),
            social_score: num(1)?,
            emotional_score: num(2)?,
            total_score: num(3)?,
            category: rec[4].parse()?,
        });
    }
    Ok(out)
}
