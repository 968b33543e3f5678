//! Minute-resolution time on a year-less calendar.
//!
//! Every [`TimePoint`] counts minutes since 00:00 of a declared start date.
//! The surface form is `"MM-DD HH:MM"`; dates are interpreted on a 365-day
//! (non-leap) calendar and may wrap past 12-31 into the next January.

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MINUTES_PER_DAY: u32 = 1440;
const DAYS_PER_YEAR: u32 = 365;
const MONTH_DAYS: [u32; 12] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimeError {
    #[error("malformed date `{0}` (expected MM-DD)")]
    BadDate(String),
    #[error("malformed time `{0}` (expected MM-DD HH:MM)")]
    BadTime(String),
}

/// Minutes since 00:00 of the start date.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TimePoint(pub u32);

impl TimePoint {
    pub const ZERO: TimePoint = TimePoint(0);

    pub fn minutes(self) -> u32 {
        self.0
    }

    pub fn day(self) -> u32 {
        self.0 / MINUTES_PER_DAY
    }

    pub fn minute_of_day(self) -> u32 {
        self.0 % MINUTES_PER_DAY
    }

    pub fn at(day: u32, hour: u32, minute: u32) -> TimePoint {
        TimePoint(day * MINUTES_PER_DAY + hour * 60 + minute)
    }

    pub fn saturating_sub(self, other: TimePoint) -> u32 {
        self.0.saturating_sub(other.0)
    }
}

impl Add<u32> for TimePoint {
    type Output = TimePoint;
    fn add(self, rhs: u32) -> TimePoint {
        TimePoint(self.0 + rhs)
    }
}

impl Sub for TimePoint {
    type Output = i64;
    fn sub(self, rhs: TimePoint) -> i64 {
        i64::from(self.0) - i64::from(rhs.0)
    }
}

/// A closed interval `[start, end]` of time points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Window {
    pub start: TimePoint,
    pub end: TimePoint,
}

impl Window {
    pub fn new(start: TimePoint, end: TimePoint) -> Self {
        Window { start, end }
    }

    pub fn len(&self) -> u32 {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// True when `[start, end]` lies inside this window.
    pub fn contains_span(&self, start: TimePoint, end: TimePoint) -> bool {
        self.start <= start && end <= self.end
    }

    pub fn contains(&self, t: TimePoint) -> bool {
        self.start <= t && t <= self.end
    }

    /// True when the open interval `(start, end)` meets this window's interior.
    pub fn overlaps_span(&self, start: TimePoint, end: TimePoint) -> bool {
        start < self.end && self.start < end
    }
}

/// Calendar anchor: the month/day that minute 0 falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Calendar {
    month: u32,
    day: u32,
}

impl Default for Calendar {
    fn default() -> Self {
        Calendar { month: 1, day: 1 }
    }
}

fn day_of_year(month: u32, day: u32) -> u32 {
    MONTH_DAYS[..(month - 1) as usize].iter().sum::<u32>() + day - 1
}

fn month_day(doy: u32) -> (u32, u32) {
    let mut rest = doy % DAYS_PER_YEAR;
    for (i, len) in MONTH_DAYS.iter().enumerate() {
        if rest < *len {
            return (i as u32 + 1, rest + 1);
        }
        rest -= len;
    }
    unreachable!("day of year out of range")
}

fn parse_two(s: &str) -> Option<u32> {
    if s.len() != 2 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

impl Calendar {
    pub fn new(month: u32, day: u32) -> Result<Self, TimeError> {
        if !(1..=12).contains(&month) || day == 0 || day > MONTH_DAYS[(month - 1) as usize] {
            return Err(TimeError::BadDate(format!("{month:02}-{day:02}")));
        }
        Ok(Calendar { month, day })
    }

    pub fn parse_date(s: &str) -> Result<Self, TimeError> {
        let bad = || TimeError::BadDate(s.to_string());
        let (m, d) = s.trim().split_once('-').ok_or_else(bad)?;
        let month = parse_two(m).ok_or_else(bad)?;
        let day = parse_two(d).ok_or_else(bad)?;
        Calendar::new(month, day).map_err(|_| bad())
    }

    pub fn render_date(&self) -> String {
        format!("{:02}-{:02}", self.month, self.day)
    }

    /// Renders `t` as `"MM-DD HH:MM"`.
    pub fn render(&self, t: TimePoint) -> String {
        let (m, d) = month_day(day_of_year(self.month, self.day) + t.day());
        let mod_ = t.minute_of_day();
        format!("{:02}-{:02} {:02}:{:02}", m, d, mod_ / 60, mod_ % 60)
    }

    /// Parses `"MM-DD HH:MM"`; whitespace around and between the parts is tolerated.
    pub fn parse(&self, s: &str) -> Result<TimePoint, TimeError> {
        let bad = || TimeError::BadTime(s.to_string());
        let mut parts = s.split_whitespace();
        let date = parts.next().ok_or_else(bad)?;
        let clock = parts.next().ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        let date = Calendar::parse_date(date).map_err(|_| bad())?;
        let (h, m) = clock.split_once(':').ok_or_else(bad)?;
        let (h, m) = (parse_two(h).ok_or_else(bad)?, parse_two(m).ok_or_else(bad)?);
        if h > 23 || m > 59 {
            return Err(bad());
        }
        let start = day_of_year(self.month, self.day);
        let target = day_of_year(date.month, date.day);
        let days = (target + DAYS_PER_YEAR - start) % DAYS_PER_YEAR;
        Ok(TimePoint(days * MINUTES_PER_DAY + h * 60 + m))
    }
}

impl fmt::Display for Calendar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_date())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn renders_relative_to_start_date() {
        let cal = Calendar::parse_date("07-01").unwrap();
        assert_eq!(cal.render(TimePoint::at(0, 14, 40)), "07-01 14:40");
        assert_eq!(cal.render(TimePoint::at(30, 8, 5)), "07-31 08:05");
        assert_eq!(cal.render(TimePoint::at(31, 0, 0)), "08-01 00:00");
    }

    #[test]
    fn wraps_year_end() {
        let cal = Calendar::parse_date("12-31").unwrap();
        assert_eq!(cal.render(TimePoint::at(1, 9, 0)), "01-01 09:00");
        assert_eq!(cal.parse("01-01 09:00").unwrap(), TimePoint::at(1, 9, 0));
    }

    #[test]
    fn rejects_malformed() {
        let cal = Calendar::default();
        for s in ["", "07-01", "7-01 10:00", "07-01 24:00", "07-01 10:60", "13-01 10:00", "02-30 00:00", "07-01 10:00 x"] {
            assert!(cal.parse(s).is_err(), "{s}");
        }
    }

    #[test]
    fn window_relations() {
        let w = Window::new(TimePoint(100), TimePoint(200));
        assert!(w.contains_span(TimePoint(100), TimePoint(200)));
        assert!(!w.contains_span(TimePoint(99), TimePoint(150)));
        assert!(w.overlaps_span(TimePoint(150), TimePoint(250)));
        assert!(!w.overlaps_span(TimePoint(200), TimePoint(250)));
        assert!(!w.overlaps_span(TimePoint(50), TimePoint(100)));
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(month in 1u32..=12, day in 1u32..=28, t in 0u32..(364 * MINUTES_PER_DAY)) {
            let cal = Calendar::new(month, day).unwrap();
            let text = cal.render(TimePoint(t));
            prop_assert_eq!(cal.parse(&text).unwrap(), TimePoint(t));
        }
    }
}
