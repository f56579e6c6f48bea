use chrono::{NaiveDateTime, Timelike};

use crate::error::{Error, Result};

/// One-minute log returns with strictly increasing timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct ReturnSeries {
    timestamps: Vec<NaiveDateTime>,
    returns: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(timestamps: Vec<NaiveDateTime>, returns: Vec<f64>) -> Result<Self> {
        if timestamps.len() != returns.len() {
            return Err(Error::DimensionMismatch {
                expected: timestamps.len(),
                got: returns.len(),
            });
        }
        if let Some(index) = timestamps.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::UnsortedTimestamps { index: index + 1 });
        }
        Ok(Self { timestamps, returns })
    }

    pub fn timestamps(&self) -> &[NaiveDateTime] {
        &self.timestamps
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }
}

/// Realized variance per intraday bar.
///
/// `bar_of_day` is the slot of each bar counted from the first observed slot
/// of its calendar date.
#[derive(Clone, Debug, PartialEq)]
pub struct RvSeries {
    pub bar_timestamps: Vec<NaiveDateTime>,
    pub rv: Vec<f64>,
    pub bar_of_day: Vec<u32>,
}

impl RvSeries {
    pub fn len(&self) -> usize {
        self.rv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rv.is_empty()
    }

    /// Recomputes `bar_of_day` from timestamps for bars `bar_minutes` long.
    pub fn from_bars(bar_timestamps: Vec<NaiveDateTime>, rv: Vec<f64>, bar_minutes: u32) -> Result<Self> {
        if bar_timestamps.len() != rv.len() {
            return Err(Error::DimensionMismatch {
                expected: bar_timestamps.len(),
                got: rv.len(),
            });
        }
        if let Some(index) = bar_timestamps.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::UnsortedTimestamps { index: index + 1 });
        }
        let bar_of_day = slots_of_day(&bar_timestamps, bar_minutes.max(1));
        Ok(Self {
            bar_timestamps,
            rv,
            bar_of_day,
        })
    }
}

fn slot(ts: &NaiveDateTime, bar_minutes: u32) -> u32 {
    (ts.hour() * 60 + ts.minute()) / bar_minutes
}

fn slots_of_day(stamps: &[NaiveDateTime], bar_minutes: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(stamps.len());
    let mut first: Option<(chrono::NaiveDate, u32)> = None;
    for ts in stamps {
        let s = slot(ts, bar_minutes);
        let base = match first {
            Some((date, base)) if date == ts.date() => base,
            _ => {
                first = Some((ts.date(), s));
                s
            }
        };
        out.push(s - base);
    }
    out
}

/// Sums squared returns inside each `bar_minutes` window of the trading day.
/// Windows are aligned to midnight; bars without any return are omitted and
/// each bar is stamped with its window start.
pub fn compute_rv(returns: &ReturnSeries, bar_minutes: u32) -> Result<RvSeries> {
    if bar_minutes == 0 {
        return Err(Error::config("bar length must be at least one minute"));
    }
    if returns.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(index) = returns.timestamps.windows(2).position(|w| w[0] >= w[1]) {
        return Err(Error::UnsortedTimestamps { index: index + 1 });
    }
    let mut stamps = Vec::new();
    let mut rv = Vec::new();
    let mut current: Option<(chrono::NaiveDate, u32)> = None;
    for (ts, r) in returns.timestamps.iter().zip(&returns.returns) {
        let key = (ts.date(), slot(ts, bar_minutes));
        if current != Some(key) {
            current = Some(key);
            let start = key.0.and_hms_opt(0, 0, 0).expect("midnight exists")
                + chrono::Duration::minutes(i64::from(key.1 * bar_minutes));
            stamps.push(start);
            rv.push(0.0);
        }
        *rv.last_mut().expect("bar opened above") += r * r;
    }
    let bar_of_day = slots_of_day(&stamps, bar_minutes);
    Ok(RvSeries {
        bar_timestamps: stamps,
        rv,
        bar_of_day,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn at(day: u32, h: u32, m: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2018, 7, day).unwrap().and_hms_opt(h, m, 0).unwrap()
    }

    #[test]
    fn single_bar_sum_of_squares() {
        let s = ReturnSeries::new(vec![at(2, 8, 1), at(2, 8, 2), at(2, 8, 3)], vec![0.01, -0.01, 0.02]).unwrap();
        let rv = compute_rv(&s, 30).unwrap();
        assert_eq!(rv.len(), 1);
        assert!((rv.rv[0] - 0.0006).abs() < 1e-18);
        assert_eq!(rv.bar_timestamps[0], at(2, 8, 0));
    }

    #[test]
    fn zero_returns_give_zero_rv() {
        let stamps: Vec<_> = (0..120).map(|m| at(3, 9 + m / 60, m % 60)).collect();
        let rv = compute_rv(&ReturnSeries::new(stamps, vec![0.0; 120]).unwrap(), 30).unwrap();
        assert_eq!(rv.rv, vec![0.0; 4]);
        assert_eq!(rv.bar_of_day, vec![0, 1, 2, 3]);
    }

    #[test]
    fn empty_bars_are_skipped_and_days_restart() {
        let s = ReturnSeries::new(
            vec![at(2, 8, 5), at(2, 9, 10), at(3, 8, 40)],
            vec![0.1, 0.2, 0.3],
        )
        .unwrap();
        let rv = compute_rv(&s, 30).unwrap();
        assert_eq!(rv.bar_timestamps, vec![at(2, 8, 0), at(2, 9, 0), at(3, 8, 30)]);
        assert_eq!(rv.bar_of_day, vec![0, 2, 0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            compute_rv(&ReturnSeries::new(vec![], vec![]).unwrap(), 30),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            ReturnSeries::new(vec![at(2, 8, 5), at(2, 8, 5)], vec![0.0, 0.0]),
            Err(Error::UnsortedTimestamps { index: 1 })
        ));
    }

    proptest! {
        /// Shuffling returns inside one bar leaves its variance unchanged, and
        /// splitting the series between bars splits the output the same way.
        #[test]
        fn permutation_invariant_and_additive(
            rs in proptest::collection::vec(-0.05f64..0.05, 60),
            cut in 1usize..4,
            rot in 0usize..15,
        ) {
            let stamps: Vec<_> = (0..60).map(|m| at(4, 10 + m as u32 / 60, m as u32 % 60)).collect();
            let base = compute_rv(&ReturnSeries::new(stamps.clone(), rs.clone()).unwrap(), 15).unwrap();
            let mut perm = rs.clone();
            perm[..15].rotate_left(rot);
            perm[15..30].rotate_right(rot);
            let shuffled = compute_rv(&ReturnSeries::new(stamps.clone(), perm).unwrap(), 15).unwrap();
            for (a, b) in base.rv.iter().zip(&shuffled.rv) {
                prop_assert!((a - b).abs() < 1e-15);
            }
            let k = cut * 15;
            let left = compute_rv(&ReturnSeries::new(stamps[..k].to_vec(), rs[..k].to_vec()).unwrap(), 15).unwrap();
            let right = compute_rv(&ReturnSeries::new(stamps[k..].to_vec(), rs[k..].to_vec()).unwrap(), 15).unwrap();
            let joined: Vec<f64> = left.rv.iter().chain(&right.rv).copied().collect();
            prop_assert_eq!(joined, base.rv);
        }
    }
}
