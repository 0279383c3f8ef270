//! Dates, day counts, payment schedules and raw market quotes.
//!
//! No holiday calendars and no business-day adjustment: dates roll on the
//! plain calendar. Schedules are generated backwards from the end date with a
//! short initial stub.

use std::fmt;
use std::str::FromStr;

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::currency::Currency;
use crate::error::{Error, Result};

/// A calendar date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DateStamp(NaiveDate);

impl DateStamp {
    pub fn from_ymd(year: i32, month: u32, day: u32) -> Result<Self> {
        NaiveDate::from_ymd_opt(year, month, day)
            .map(DateStamp)
            .ok_or_else(|| Error::Domain(format!("invalid date {year}-{month}-{day}")))
    }

    pub fn naive(&self) -> NaiveDate {
        self.0
    }

    /// Signed number of calendar days from `self` to `other`.
    pub fn days_until(&self, other: DateStamp) -> i64 {
        (other.0 - self.0).num_days()
    }

    pub fn add_months(&self, months: u32) -> Result<Self> {
        self.0
            .checked_add_months(Months::new(months))
            .map(DateStamp)
            .ok_or_else(|| Error::Range(format!("{self} + {months}m overflows")))
    }

    pub fn sub_months(&self, months: u32) -> Result<Self> {
        self.0
            .checked_sub_months(Months::new(months))
            .map(DateStamp)
            .ok_or_else(|| Error::Range(format!("{self} - {months}m overflows")))
    }

    pub fn add_days(&self, days: u32) -> Result<Self> {
        self.0
            .checked_add_days(chrono::Days::new(days as u64))
            .map(DateStamp)
            .ok_or_else(|| Error::Range(format!("{self} + {days}d overflows")))
    }

    pub fn add_tenor(&self, tenor: Tenor) -> Result<Self> {
        match tenor {
            Tenor::Spot => Ok(*self),
            Tenor::Days(n) => self.add_days(n),
            Tenor::Months(n) => self.add_months(n),
            Tenor::Years(n) => self.add_months(n * 12),
        }
    }

    /// Model time in years from `asof`, ACT/365F.
    pub fn time_from(&self, asof: DateStamp) -> f64 {
        asof.days_until(*self) as f64 / 365.0
    }
}

impl fmt::Display for DateStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

impl FromStr for DateStamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
            .map(DateStamp)
            .map_err(|e| Error::Parse { line: 0, message: format!("bad date {s:?}: {e}") })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DayCount {
    #[serde(rename = "ACT/360")]
    Act360,
    #[serde(rename = "ACT/365F")]
    Act365F,
}

impl DayCount {
    fn denominator(self) -> f64 {
        match self {
            DayCount::Act360 => 360.0,
            DayCount::Act365F => 365.0,
        }
    }
}

/// Accrual fraction between two dates under `convention`.
pub fn year_fraction(d1: DateStamp, d2: DateStamp, convention: DayCount) -> Result<f64> {
    if d1 > d2 {
        return Err(Error::Ordering(format!("year_fraction({d1}, {d2})")));
    }
    Ok(d1.days_until(d2) as f64 / convention.denominator())
}

/// Quote maturity, written `<n>d`, `<n>m`, `<n>y` or `spot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tenor {
    Spot,
    Days(u32),
    Months(u32),
    Years(u32),
}

impl Tenor {
    pub fn is_zero(&self) -> bool {
        matches!(self, Tenor::Spot | Tenor::Days(0) | Tenor::Months(0) | Tenor::Years(0))
    }

    /// Tenor length in whole months, if it is month-based.
    pub fn months(&self) -> Option<u32> {
        match *self {
            Tenor::Months(m) => Some(m),
            Tenor::Years(y) => Some(12 * y),
            _ => None,
        }
    }

    /// Nominal length in years (months/12, days/365); used as a spline abscissa.
    pub fn nominal_years(&self) -> f64 {
        match *self {
            Tenor::Spot => 0.0,
            Tenor::Days(d) => d as f64 / 365.0,
            Tenor::Months(m) => m as f64 / 12.0,
            Tenor::Years(y) => y as f64,
        }
    }
}

impl fmt::Display for Tenor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tenor::Spot => f.write_str("spot"),
            Tenor::Days(n) => write!(f, "{n}d"),
            Tenor::Months(n) => write!(f, "{n}m"),
            Tenor::Years(n) => write!(f, "{n}y"),
        }
    }
}

impl FromStr for Tenor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "spot" {
            return Ok(Tenor::Spot);
        }
        let bad = || Error::Parse { line: 0, message: format!("bad tenor {s:?}") };
        if s.len() < 2 {
            return Err(bad());
        }
        let (num, unit) = s.split_at(s.len() - 1);
        let n: u32 = num.parse().map_err(|_| bad())?;
        match unit {
            "d" => Ok(Tenor::Days(n)),
            "m" => Ok(Tenor::Months(n)),
            "y" => Ok(Tenor::Years(n)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Tenor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Tenor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One accrual period expressed in model time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Period {
    /// Period start, years from the valuation date.
    pub start: f64,
    /// Period end (payment), years from the valuation date.
    pub end: f64,
    /// Accrual fraction used for coupons.
    pub accrual: f64,
}

impl Period {
    /// Consecutive periods over `times` with accrual equal to the time span.
    pub fn chain(times: &[f64]) -> Result<Vec<Period>> {
        let mut out = Vec::with_capacity(times.len().saturating_sub(1));
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Ordering(format!("period {} -> {}", w[0], w[1])));
            }
            out.push(Period { start: w[0], end: w[1], accrual: w[1] - w[0] });
        }
        Ok(out)
    }
}

/// Dated payment schedule `T_0 < T_1 < ... < T_N` with accrual fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    dates: Vec<DateStamp>,
    accruals: Vec<f64>,
    day_count: DayCount,
}

impl Schedule {
    pub fn from_dates(dates: Vec<DateStamp>, day_count: DayCount) -> Result<Self> {
        if dates.len() < 2 {
            return Err(Error::Ordering("schedule needs at least two dates".into()));
        }
        let accruals = dates
            .windows(2)
            .map(|w| {
                if w[1] <= w[0] {
                    Err(Error::Ordering(format!("schedule dates {} >= {}", w[0], w[1])))
                } else {
                    year_fraction(w[0], w[1], day_count)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Schedule { dates, accruals, day_count })
    }

    pub fn dates(&self) -> &[DateStamp] {
        &self.dates
    }

    pub fn accruals(&self) -> &[f64] {
        &self.accruals
    }

    pub fn day_count(&self) -> DayCount {
        self.day_count
    }

    pub fn len(&self) -> usize {
        self.accruals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accruals.is_empty()
    }

    pub fn start(&self) -> DateStamp {
        self.dates[0]
    }

    pub fn end(&self) -> DateStamp {
        *self.dates.last().expect("non-empty schedule")
    }

    /// Periods in model time (ACT/365F from `asof`).
    pub fn periods(&self, asof: DateStamp) -> Vec<Period> {
        self.dates
            .windows(2)
            .zip(&self.accruals)
            .map(|(w, &accrual)| Period { start: w[0].time_from(asof), end: w[1].time_from(asof), accrual })
            .collect()
    }
}

/// Builds a schedule rolling backwards from `end` every `frequency_months`,
/// leaving any remainder as a short initial stub.
pub fn build_schedule(
    start: DateStamp,
    end: DateStamp,
    frequency_months: u32,
    day_count: DayCount,
) -> Result<Schedule> {
    if start >= end {
        return Err(Error::Ordering(format!("schedule start {start} >= end {end}")));
    }
    if frequency_months == 0 {
        return Err(Error::Domain("schedule frequency must be positive".into()));
    }
    let mut dates = vec![end];
    let mut k = 1u32;
    loop {
        // roll from the end date each time so month-end clamping never drifts
        let d = end.sub_months(k * frequency_months)?;
        if d <= start {
            break;
        }
        dates.push(d);
        k += 1;
    }
    dates.push(start);
    dates.reverse();
    Schedule::from_dates(dates, day_count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuoteKind {
    FxSpot,
    FxSwap,
    OisSwap,
    LiborSwap,
    CnCcs,
    MtmCcs,
}

impl QuoteKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            QuoteKind::FxSpot => "fx-spot",
            QuoteKind::FxSwap => "fx-swap",
            QuoteKind::OisSwap => "ois-swap",
            QuoteKind::LiborSwap => "libor-swap",
            QuoteKind::CnCcs => "cn-ccs",
            QuoteKind::MtmCcs => "mtm-ccs",
        }
    }

    fn is_pair_quote(&self) -> bool {
        !matches!(self, QuoteKind::OisSwap | QuoteKind::LiborSwap)
    }
}

impl FromStr for QuoteKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "fx-spot" => QuoteKind::FxSpot,
            "fx-swap" => QuoteKind::FxSwap,
            "ois-swap" => QuoteKind::OisSwap,
            "libor-swap" => QuoteKind::LiborSwap,
            "cn-ccs" => QuoteKind::CnCcs,
            "mtm-ccs" => QuoteKind::MtmCcs,
            other => return Err(Error::Parse { line: 0, message: format!("unknown quote kind {other:?}") }),
        })
    }
}

/// What a quote refers to: a currency pair or a single currency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuoteSubject {
    Pair(Currency, Currency),
    Single(Currency),
}

impl fmt::Display for QuoteSubject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuoteSubject::Pair(a, b) => write!(f, "{a}{b}"),
            QuoteSubject::Single(c) => write!(f, "{c}"),
        }
    }
}

/// A raw market quote.
///
/// Values are decimals: FX spot and FX swap points (`X - spot`) in units of
/// the second currency per unit of the first, swap rates and par spreads as
/// plain rates (-0.2650% is `-0.002650`). For CCS pairs the first currency
/// is the major (renotioning) leg and the second carries the spread.
#[derive(Debug, Clone, PartialEq)]
pub struct Quote {
    pub kind: QuoteKind,
    pub subject: QuoteSubject,
    pub maturity: Tenor,
    pub value: f64,
    pub collateral: Option<Currency>,
}

impl Quote {
    fn validate(&self) -> std::result::Result<(), String> {
        if !self.value.is_finite() {
            return Err("non-finite value".into());
        }
        match (self.kind.is_pair_quote(), &self.subject) {
            (true, QuoteSubject::Single(_)) => {
                return Err(format!("{} quotes need a currency pair", self.kind.as_str()))
            }
            (false, QuoteSubject::Pair(..)) => {
                return Err(format!("{} quotes need a single currency", self.kind.as_str()))
            }
            _ => {}
        }
        if let QuoteSubject::Pair(a, b) = self.subject {
            if a == b {
                return Err(format!("degenerate pair {a}{b}"));
            }
        }
        match self.kind {
            QuoteKind::FxSpot => {
                if self.maturity != Tenor::Spot {
                    return Err("fx-spot maturity must be 'spot'".into());
                }
                if self.value <= 0.0 {
                    return Err("fx-spot must be positive".into());
                }
            }
            _ => {
                if self.maturity.is_zero() {
                    return Err(format!("maturity {} is not after the valuation date", self.maturity));
                }
            }
        }
        Ok(())
    }
}

/// Parses the quote CSV: `kind,pair_or_ccy,maturity,value[,collateral_ccy]`.
///
/// A leading header row starting with `kind` and `#` comment lines are skipped.
pub fn parse_quotes(text: &str) -> Result<Vec<Quote>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let perr = |message: String| Error::Parse { line, message };

        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if out.is_empty() && record.get(0) == Some("kind") {
            continue;
        }
        if record.len() < 4 || record.len() > 5 {
            return Err(perr(format!("expected 4 or 5 fields, found {}", record.len())));
        }
        let kind: QuoteKind = record[0].parse().map_err(|e: Error| perr(strip(e)))?;
        let subject = if kind.is_pair_quote() {
            let (a, b) = Currency::parse_pair(&record[1]).map_err(|e| perr(strip(e)))?;
            QuoteSubject::Pair(a, b)
        } else {
            QuoteSubject::Single(Currency::new(&record[1]).map_err(|e| perr(strip(e)))?)
        };
        let maturity: Tenor = record[2].parse().map_err(|e: Error| perr(strip(e)))?;
        let value: f64 = record[3].parse().map_err(|_| perr(format!("bad value {:?}", &record[3])))?;
        let collateral = match record.get(4) {
            Some(c) if !c.is_empty() => Some(Currency::new(c).map_err(|e| perr(strip(e)))?),
            _ => None,
        };
        let quote = Quote { kind, subject, maturity, value, collateral };
        quote.validate().map_err(perr)?;
        out.push(quote);
    }
    Ok(out)
}

fn strip(e: Error) -> String {
    match e {
        Error::Parse { message, .. } => message,
        other => other.to_string(),
    }
}

/// Inverse of [`parse_quotes`]; writes a header row.
pub fn serialize_quotes(quotes: &[Quote]) -> String {
    let mut s = String::from("kind,pair_or_ccy,maturity,value,collateral_ccy\n");
    for q in quotes {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            q.kind.as_str(),
            q.subject,
            q.maturity,
            q.value,
            q.collateral.map(|c| c.to_string()).unwrap_or_default()
        ));
    }
    s
}
