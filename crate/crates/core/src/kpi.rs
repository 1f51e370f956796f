//! Service-state signals and the availability / crossing-rate KPIs.
//!
//! A [`BinarySignal`] is a right-continuous piecewise-constant 0/1 function on
//! `[0, horizon_end]`, stored as its breakpoints. All KPIs are computed by exact
//! breakpoint integration; nothing is sampled.
//!
//! Windows are half-open `[start, end)`: a 1→0 transition exactly at a window
//! boundary belongs to the later window.

use std::io::{Read, Write};

use thiserror::Error;

use crate::scalar::TimeScalar;

#[derive(Debug, Error, PartialEq)]
pub enum KpiError {
    #[error("signal has no breakpoints")]
    Empty,
    #[error("first breakpoint must be at time 0")]
    NotAnchored,
    #[error("breakpoint times must be strictly increasing (index {0})")]
    NonMonotone(usize),
    #[error("consecutive breakpoints must alternate in value (index {0})")]
    Redundant(usize),
    #[error("breakpoint beyond horizon end")]
    BeyondHorizon,
    #[error("survival time must be non-negative")]
    NegativeSurvivalTime,
    #[error("window must satisfy start < end")]
    EmptyWindow,
    #[error("window lies outside the signal domain")]
    WindowOutsideDomain,
    #[error("trace csv: {0}")]
    Csv(String),
}

/// Piecewise-constant binary signal (`Y(t)` network state or `Z(t)` service state).
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySignal<T> {
    points: Vec<(T, bool)>,
    horizon_end: T,
}

impl<T: TimeScalar> BinarySignal<T> {
    pub fn new(points: Vec<(T, bool)>, horizon_end: T) -> Result<Self, KpiError> {
        let first = points.first().ok_or(KpiError::Empty)?;
        if !first.0.is_zero() {
            return Err(KpiError::NotAnchored);
        }
        for (i, pair) in points.windows(2).enumerate() {
            if pair[1].0 <= pair[0].0 {
                return Err(KpiError::NonMonotone(i + 1));
            }
            if pair[1].1 == pair[0].1 {
                return Err(KpiError::Redundant(i + 1));
            }
        }
        if points.last().map(|p| p.0 > horizon_end).unwrap_or(false) {
            return Err(KpiError::BeyondHorizon);
        }
        Ok(Self { points, horizon_end })
    }

    /// Build from an arbitrary change list, dropping redundant points.
    pub fn from_changes<I>(initial: bool, changes: I, horizon_end: T) -> Result<Self, KpiError>
    where
        I: IntoIterator<Item = (T, bool)>,
    {
        let mut b = SignalBuilder::new(initial);
        for (t, v) in changes {
            if t < b.last_time() {
                return Err(KpiError::NonMonotone(b.points.len()));
            }
            b.set(t, v);
        }
        b.snapshot(horizon_end)
    }

    pub fn constant(value: bool, horizon_end: T) -> Self {
        Self { points: vec![(T::zero(), value)], horizon_end }
    }

    pub fn breakpoints(&self) -> &[(T, bool)] {
        &self.points
    }

    pub fn horizon_end(&self) -> T {
        self.horizon_end
    }

    pub fn value_at(&self, t: T) -> bool {
        let idx = self.points.partition_point(|p| p.0 <= t);
        self.points[idx.saturating_sub(1)].1
    }

    /// Segments `(start, end, value)` covering the domain.
    fn segments(&self) -> impl Iterator<Item = (T, T, bool)> + '_ {
        self.points.iter().enumerate().map(move |(i, &(t, v))| {
            let end = self.points.get(i + 1).map(|p| p.0).unwrap_or(self.horizon_end);
            (t, end, v)
        })
    }

    fn check_window(&self, w: &KpiWindow<T>) -> Result<(), KpiError> {
        if w.start < T::zero() || w.end > self.horizon_end {
            return Err(KpiError::WindowOutsideDomain);
        }
        Ok(())
    }

    /// Measure of `{t in w : signal(t) = 1}`.
    pub fn uptime(&self, w: &KpiWindow<T>) -> Result<T, KpiError> {
        self.check_window(w)?;
        Ok(tally_points(&self.points, w).0)
    }

    /// Number of 1→0 transitions at times in `[w.start, w.end)`.
    pub fn downward_crossings(&self, w: &KpiWindow<T>) -> Result<usize, KpiError> {
        self.check_window(w)?;
        Ok(tally_points(&self.points, w).1)
    }

    pub fn full_window(&self) -> Result<KpiWindow<T>, KpiError> {
        KpiWindow::new(T::zero(), self.horizon_end)
    }
}

/// Uptime and downward crossings of a breakpoint list over `w`; the list must
/// describe the signal at least up to `w.end`.
fn tally_points<T: TimeScalar>(points: &[(T, bool)], w: &KpiWindow<T>) -> (T, usize) {
    let first = points.partition_point(|p| p.0 <= w.start).saturating_sub(1);
    let mut up = T::zero();
    let mut crossings = 0;
    for i in first..points.len() {
        let (t, v) = points[i];
        if t >= w.end {
            break;
        }
        if i > 0 && !v && t >= w.start {
            crossings += 1;
        }
        if v {
            let end = points.get(i + 1).map(|p| p.0).unwrap_or(w.end).min_of(w.end);
            up = up + (end - t.max_of(w.start));
        }
    }
    (up, crossings)
}

/// Incremental construction of a signal in time order, as the simulator emits it.
#[derive(Debug, Clone)]
pub struct SignalBuilder<T> {
    points: Vec<(T, bool)>,
}

impl<T: TimeScalar> SignalBuilder<T> {
    pub fn new(initial: bool) -> Self {
        Self { points: vec![(T::zero(), initial)] }
    }

    pub fn current(&self) -> bool {
        self.points.last().map(|p| p.1).unwrap_or(true)
    }

    fn last_time(&self) -> T {
        self.points.last().map(|p| p.0).unwrap_or_else(T::zero)
    }

    /// Record the value from time `t` on. Times must be non-decreasing.
    pub fn set(&mut self, t: T, value: bool) {
        debug_assert!(t >= self.last_time());
        if self.current() == value {
            return;
        }
        let last = self.points.len() - 1;
        if self.points[last].0 == t && last > 0 {
            // value flipped back at the same instant: the earlier point is void
            self.points.pop();
            return;
        }
        if self.points[last].0 == t {
            self.points[last].1 = value;
            return;
        }
        self.points.push((t, value));
    }

    pub fn snapshot(&self, horizon_end: T) -> Result<BinarySignal<T>, KpiError> {
        BinarySignal::new(self.points.clone(), horizon_end)
    }

    pub fn points(&self) -> &[(T, bool)] {
        &self.points
    }

    /// Tally over `w`, treating the current value as holding up to `w.end`.
    pub fn tally(&self, w: KpiWindow<T>) -> WindowTally<T> {
        let (uptime, crossings) = tally_points(&self.points, &w);
        WindowTally { uptime, crossings, window: w }
    }
}

/// Half-open estimation window `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpiWindow<T> {
    pub start: T,
    pub end: T,
}

impl<T: TimeScalar> KpiWindow<T> {
    pub fn new(start: T, end: T) -> Result<Self, KpiError> {
        if !(end > start) {
            return Err(KpiError::EmptyWindow);
        }
        Ok(Self { start, end })
    }

    pub fn length(&self) -> T {
        self.end - self.start
    }
}

/// Windowed availability and crossing-rate estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KpiEstimate<T> {
    pub availability: T,
    /// Downward crossings per second.
    pub crossing_rate: T,
    /// Mean outage length in the window: `(|w| - uptime) / max(F, 1)`.
    pub downtime_mean: T,
    pub window: KpiWindow<T>,
}

impl<T: TimeScalar> KpiEstimate<T> {
    pub fn to_f64(&self) -> KpiEstimate<f64> {
        KpiEstimate {
            availability: self.availability.to_f64_lossy(),
            crossing_rate: self.crossing_rate.to_f64_lossy(),
            downtime_mean: self.downtime_mean.to_f64_lossy(),
            window: KpiWindow { start: self.window.start.to_f64_lossy(), end: self.window.end.to_f64_lossy() },
        }
    }
}

/// Raw exact sums behind a [`KpiEstimate`]. Tallies of adjacent windows merge exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowTally<T> {
    pub uptime: T,
    pub crossings: usize,
    pub window: KpiWindow<T>,
}

impl<T: TimeScalar> WindowTally<T> {
    pub fn measure(z: &BinarySignal<T>, window: KpiWindow<T>) -> Result<Self, KpiError> {
        Ok(Self { uptime: z.uptime(&window)?, crossings: z.downward_crossings(&window)?, window })
    }

    /// Combine tallies of contiguous windows, in time order.
    pub fn merge(tallies: &[WindowTally<T>]) -> Option<Self> {
        let first = tallies.first()?;
        let last = tallies.last()?;
        let mut uptime = T::zero();
        let mut crossings = 0;
        for (i, t) in tallies.iter().enumerate() {
            if i > 0 && t.window.start != tallies[i - 1].window.end {
                return None;
            }
            uptime = uptime + t.uptime;
            crossings += t.crossings;
        }
        Some(Self { uptime, crossings, window: KpiWindow { start: first.window.start, end: last.window.end } })
    }

    pub fn estimate(&self) -> KpiEstimate<T> {
        let len = self.window.length();
        let f = T::from_count(self.crossings);
        KpiEstimate {
            availability: self.uptime / len,
            crossing_rate: f / len,
            downtime_mean: (len - self.uptime) / T::from_count(self.crossings.max(1)),
            window: self.window,
        }
    }
}

/// Application-layer service state: `Z(t) = max Y(τ)` over `τ in [max(0, t - survival), t]`.
///
/// A zero run `[a, b)` of `Y` maps to a zero run `[a + survival, b)` of `Z`
/// (empty when the outage is not longer than the survival time). A zero run
/// starting at 0 is not shortened, since the look-back window is clipped at 0.
pub fn survival_filter<T: TimeScalar>(y: &BinarySignal<T>, survival_time: T) -> Result<BinarySignal<T>, KpiError> {
    if survival_time < T::zero() {
        return Err(KpiError::NegativeSurvivalTime);
    }
    let mut out = SignalBuilder::new(y.points[0].1);
    for (start, end, v) in y.segments() {
        if v {
            out.set(start, true);
            continue;
        }
        let down_from = if start.is_zero() { start } else { start + survival_time };
        if down_from < end {
            out.set(down_from, false);
        }
    }
    out.snapshot(y.horizon_end)
}

/// Time average of `z` over `w`.
pub fn availability<T: TimeScalar>(z: &BinarySignal<T>, w: &KpiWindow<T>) -> Result<T, KpiError> {
    Ok(z.uptime(w)? / w.length())
}

/// Downward crossings in `w` divided by `|w|`.
pub fn crossing_rate<T: TimeScalar>(z: &BinarySignal<T>, w: &KpiWindow<T>) -> Result<T, KpiError> {
    Ok(T::from_count(z.downward_crossings(w)?) / w.length())
}

pub fn estimate<T: TimeScalar>(z: &BinarySignal<T>, w: KpiWindow<T>) -> Result<KpiEstimate<T>, KpiError> {
    Ok(WindowTally::measure(z, w)?.estimate())
}

/// Whole-horizon availability and mean uptime `∫Z / max(F, 1)`.
pub fn long_run_kpis<T: TimeScalar>(z: &BinarySignal<T>) -> Result<(T, T), KpiError> {
    let w = z.full_window()?;
    let up = z.uptime(&w)?;
    let f = z.downward_crossings(&w)?;
    Ok((up / w.length(), up / T::from_count(f.max(1))))
}

/// Write breakpoints as `time_s,value`. The final row repeats the last value at
/// the horizon end so the domain survives a round trip.
pub fn write_trace_csv<T: TimeScalar, W: Write>(signal: &BinarySignal<T>, out: W) -> Result<(), KpiError> {
    let mut wtr = csv::Writer::from_writer(out);
    let err = |e: csv::Error| KpiError::Csv(e.to_string());
    wtr.write_record(["time_s", "value"]).map_err(err)?;
    for &(t, v) in &signal.points {
        wtr.write_record([t.to_decimal(), u8::from(v).to_string()]).map_err(err)?;
    }
    let last = signal.points.last().map(|p| p.1).unwrap_or(true);
    wtr.write_record([signal.horizon_end.to_decimal(), u8::from(last).to_string()]).map_err(err)?;
    wtr.flush().map_err(|e| KpiError::Csv(e.to_string()))
}

pub fn read_trace_csv<T: TimeScalar, R: Read>(input: R) -> Result<BinarySignal<T>, KpiError> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers().map_err(|e| KpiError::Csv(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time_s", "value"] {
        return Err(KpiError::Csv(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| KpiError::Csv(e.to_string()))?;
        let t = T::from_decimal(&rec[0]).ok_or_else(|| KpiError::Csv(format!("row {}: bad time", line + 1)))?;
        let v = match rec[1].trim() {
            "0" => false,
            "1" => true,
            other => return Err(KpiError::Csv(format!("row {}: bad value {other:?}", line + 1))),
        };
        rows.push((t, v));
    }
    if rows.len() < 2 {
        return Err(KpiError::Csv("need at least one breakpoint and the horizon row".into()));
    }
    let (end, end_v) = rows.pop().expect("len checked");
    if rows.last().map(|p| p.1) != Some(end_v) {
        return Err(KpiError::Csv("horizon row must repeat the last value".into()));
    }
    BinarySignal::new(rows, end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use proptest::prelude::*;

    fn ms(v: i64) -> Rational {
        Rational::new(v, 1000)
    }

    fn w(a: Rational, b: Rational) -> KpiWindow<Rational> {
        KpiWindow::new(a, b).unwrap()
    }

    fn outage(from: i64, to: i64, end: i64) -> BinarySignal<Rational> {
        BinarySignal::new(vec![(ms(0), true), (ms(from), false), (ms(to), true)], ms(end)).unwrap()
    }

    #[test]
    fn all_ones_stay_up() {
        let y = BinarySignal::constant(true, Rational::from_integer(1));
        let z = survival_filter(&y, ms(5)).unwrap();
        assert_eq!(z, y);
    }

    #[test]
    fn short_outage_is_absorbed() {
        let z = survival_filter(&outage(10, 13, 100), ms(5)).unwrap();
        assert_eq!(z.breakpoints(), &[(ms(0), true)]);
    }

    #[test]
    fn outage_longer_than_survival_time() {
        let z = survival_filter(&outage(10, 16, 100), ms(5)).unwrap();
        assert_eq!(z.breakpoints(), &[(ms(0), true), (ms(15), false), (ms(16), true)]);
        let full = w(ms(0), ms(100));
        assert_eq!(availability(&z, &full).unwrap(), Rational::new(99, 100));
        assert_eq!(crossing_rate(&z, &full).unwrap(), Rational::from_integer(10));
        let (a, up) = long_run_kpis(&z).unwrap();
        assert_eq!((a, up), (Rational::new(99, 100), ms(99)));
    }

    #[test]
    fn outage_equal_to_survival_time_is_absorbed() {
        let z = survival_filter(&outage(10, 15, 100), ms(5)).unwrap();
        assert_eq!(z, BinarySignal::constant(true, ms(100)));
    }

    #[test]
    fn leading_outage_is_not_shortened() {
        let y = BinarySignal::new(vec![(ms(0), false), (ms(3), true)], ms(10)).unwrap();
        let z = survival_filter(&y, ms(5)).unwrap();
        assert_eq!(z, y);
    }

    #[test]
    fn availability_examples() {
        let z = BinarySignal::constant(true, ms(100));
        assert_eq!(availability(&z, &w(ms(0), ms(100))).unwrap(), Rational::from_integer(1));
        let z = outage(40, 50, 100);
        assert_eq!(availability(&z, &w(ms(0), ms(100))).unwrap(), Rational::new(9, 10));
    }

    #[test]
    fn crossing_rate_examples() {
        let z = BinarySignal::constant(true, ms(100));
        assert_eq!(crossing_rate(&z, &w(ms(0), ms(100))).unwrap(), Rational::from_integer(0));
        let z = BinarySignal::from_changes(
            true,
            [(ms(10), false), (ms(20), true), (ms(50), false), (ms(60), true)],
            ms(100),
        )
        .unwrap();
        assert_eq!(crossing_rate(&z, &w(ms(0), ms(100))).unwrap(), Rational::from_integer(20));
    }

    #[test]
    fn boundary_crossing_goes_to_later_window() {
        let z = outage(50, 60, 100);
        assert_eq!(z.downward_crossings(&w(ms(0), ms(50))).unwrap(), 0);
        assert_eq!(z.downward_crossings(&w(ms(50), ms(100))).unwrap(), 1);
    }

    #[test]
    fn long_run_edge_cases() {
        let ten = Rational::from_integer(10);
        let up = BinarySignal::constant(true, ten);
        assert_eq!(long_run_kpis(&up).unwrap(), (Rational::from_integer(1), ten));
        let down = BinarySignal::constant(false, ten);
        assert_eq!(long_run_kpis(&down).unwrap(), (Rational::from_integer(0), Rational::from_integer(0)));
    }

    #[test]
    fn invalid_signals_are_rejected() {
        assert_eq!(BinarySignal::<f64>::new(vec![], 1.0), Err(KpiError::Empty));
        assert_eq!(BinarySignal::new(vec![(0.1, true)], 1.0), Err(KpiError::NotAnchored));
        assert_eq!(
            BinarySignal::new(vec![(0.0, true), (0.5, false), (0.5, true)], 1.0),
            Err(KpiError::NonMonotone(2))
        );
        assert_eq!(BinarySignal::new(vec![(0.0, true), (0.5, true)], 1.0), Err(KpiError::Redundant(1)));
        assert_eq!(BinarySignal::new(vec![(0.0, true), (2.0, false)], 1.0), Err(KpiError::BeyondHorizon));
        let y = BinarySignal::constant(true, 1.0);
        assert_eq!(survival_filter(&y, -1.0), Err(KpiError::NegativeSurvivalTime));
        assert_eq!(KpiWindow::new(1.0, 1.0), Err(KpiError::EmptyWindow));
        assert_eq!(availability(&y, &KpiWindow::new(0.5, 1.5).unwrap()), Err(KpiError::WindowOutsideDomain));
    }

    #[test]
    fn tallies_merge_exactly() {
        let z = BinarySignal::from_changes(true, [(ms(30), false), (ms(55), true), (ms(70), false)], ms(100)).unwrap();
        let parts: Vec<_> =
            (0..4).map(|i| WindowTally::measure(&z, w(ms(25 * i), ms(25 * (i + 1)))).unwrap()).collect();
        let merged = WindowTally::merge(&parts).unwrap();
        assert_eq!(merged, WindowTally::measure(&z, w(ms(0), ms(100))).unwrap());
        assert!(WindowTally::merge(&[parts[0], parts[2]]).is_none());
    }

    #[test]
    fn builder_collapses_same_instant_flips() {
        let mut b = SignalBuilder::<Rational>::new(true);
        b.set(ms(1), false);
        b.set(ms(1), true);
        b.set(ms(2), true);
        assert_eq!(b.points(), &[(ms(0), true)]);
        b.set(ms(0), true);
        let mut b = SignalBuilder::<Rational>::new(true);
        b.set(ms(0), false);
        assert_eq!(b.points(), &[(ms(0), false)]);
    }

    #[test]
    fn csv_round_trip() {
        let z = outage(10, 16, 100);
        let mut buf = Vec::new();
        write_trace_csv(&z, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time_s,value\n0,1\n0.01,0\n0.016,1\n0.1,1"));
        let back: BinarySignal<Rational> = read_trace_csv(&buf[..]).unwrap();
        assert_eq!(back, z);
        let as_float: BinarySignal<f64> = read_trace_csv(&buf[..]).unwrap();
        assert_eq!(as_float.breakpoints()[1], (0.01, false));
    }

    fn arb_signal() -> impl Strategy<Value = BinarySignal<Rational>> {
        (any::<bool>(), proptest::collection::vec(1i64..400, 0..12)).prop_map(|(init, gaps)| {
            let mut t = 0;
            let mut v = init;
            let mut changes = Vec::new();
            for g in gaps {
                t += g;
                v = !v;
                changes.push((Rational::new(t, 100), v));
            }
            BinarySignal::from_changes(init, changes, Rational::new(t + 50, 100)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn filter_dominates_and_is_valid(y in arb_signal(), ts in 0i64..300) {
            let ts = Rational::new(ts, 100);
            let z = survival_filter(&y, ts).unwrap();
            prop_assert!(BinarySignal::new(z.breakpoints().to_vec(), z.horizon_end()).is_ok());
            for i in 0..=(y.horizon_end() * Rational::from_integer(100)).to_integer() {
                let t = Rational::new(i, 100);
                prop_assert!(z.value_at(t) >= y.value_at(t));
            }
        }

        #[test]
        fn zero_survival_time_is_identity(y in arb_signal()) {
            prop_assert_eq!(survival_filter(&y, Rational::from_integer(0)).unwrap(), y);
        }

        #[test]
        fn availability_monotone_in_survival_time(y in arb_signal(), a in 0i64..200, b in 0i64..200, s in 0i64..100) {
            let (lo, hi) = (a.min(b), a.max(b));
            let z1 = survival_filter(&y, Rational::new(lo, 100)).unwrap();
            let z2 = survival_filter(&y, Rational::new(hi, 100)).unwrap();
            let end = y.horizon_end();
            let start = (end * Rational::new(s, 100)).min(end - Rational::new(1, 100));
            let win = KpiWindow::new(start, end).unwrap();
            let a1 = availability(&z1, &win).unwrap();
            let a2 = availability(&z2, &win).unwrap();
            prop_assert!(a1 <= a2);
            prop_assert!(a1 >= Rational::from_integer(0) && a2 <= Rational::from_integer(1));
            prop_assert!(crossing_rate(&z1, &win).unwrap() >= Rational::from_integer(0));
        }

        #[test]
        fn filters_compose_additively(y in arb_signal(), a in 0i64..150, b in 0i64..150) {
            let (a, b) = (Rational::new(a, 100), Rational::new(b, 100));
            let twice = survival_filter(&survival_filter(&y, a).unwrap(), b).unwrap();
            prop_assert_eq!(twice, survival_filter(&y, a + b).unwrap());
        }
    }
}
