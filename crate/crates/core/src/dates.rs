//! Calendar helpers. Snapshots live on the first day of a month, and
//! "twelve months later" means the same cadence point one year on.

use chrono::{Datelike, Months, NaiveDate};

pub fn ymd(year: i32, month: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, month, day).expect("valid calendar date")
}

pub fn month_start(date: NaiveDate) -> NaiveDate {
    ymd(date.year(), date.month(), 1)
}

pub fn add_months(date: NaiveDate, months: i32) -> NaiveDate {
    if months >= 0 {
        date.checked_add_months(Months::new(months as u32))
    } else {
        date.checked_sub_months(Months::new(months.unsigned_abs()))
    }
    .expect("date within chrono range")
}

/// Number of whole months elapsed from `from` to `to` (0 if `to` precedes `from`).
pub fn whole_months_between(from: NaiveDate, to: NaiveDate) -> u32 {
    if to <= from {
        return 0;
    }
    let mut months = (to.year() - from.year()) * 12 + to.month() as i32 - from.month() as i32;
    if to.day() < from.day() {
        months -= 1;
    }
    months.max(0) as u32
}

/// Age in fractional years, using 365.25-day years.
pub fn age_years(birth: NaiveDate, on: NaiveDate) -> f64 {
    (on - birth).num_days() as f64 / 365.25
}

/// Iterates month starts in `[from, to]`.
pub fn month_starts(from: NaiveDate, to: NaiveDate) -> impl Iterator<Item = NaiveDate> {
    let mut cur = if from.day() == 1 {
        from
    } else {
        add_months(month_start(from), 1)
    };
    std::iter::from_fn(move || {
        if cur > to {
            None
        } else {
            let out = cur;
            cur = add_months(cur, 1);
            Some(out)
        }
    })
}
