//! Evaluation quantities computed from telemetry: phase separations,
//! pairwise distances, convergence time, steady-state oscillation and the
//! Lyapunov value.

use std::f64::consts::TAU;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::harness::telemetry::{format_g, TelemetryRecord, SIGNIFICANT_DIGITS};
use crate::phase::{lyapunov_value, ring_errors, wrap_to_pi};
use crate::so3::Vec3;

/// Default hold window for [`convergence_time`] (s).
pub const DEFAULT_HOLD_S: f64 = 2.0;

/// Convergence band: tight for large swarms, loose for small ones.
pub fn default_band_deg(n: usize) -> f64 {
    if n >= 10 {
        1.0
    } else {
        5.0
    }
}

fn sorted_phases(phases: &[f64]) -> Vec<f64> {
    let mut p: Vec<f64> = phases.iter().map(|&x| wrap_to_pi(x)).collect();
    p.sort_by(f64::total_cmp);
    p
}

/// Adjacent differences of the sorted phases in degrees; element `r` is the
/// gap from rank `r` to rank `r+1`, the last one wrapping around.
pub fn separations(phases: &[f64]) -> Vec<f64> {
    let p = sorted_phases(phases);
    let n = p.len();
    if n < 2 {
        return vec![360.0; n];
    }
    let mut out: Vec<f64> = p.windows(2).map(|w| (w[1] - w[0]).to_degrees()).collect();
    // Close the circle so the total is 360 regardless of rounding above.
    let partial: f64 = out.iter().sum();
    out.push(360.0 - partial);
    out
}

fn pairwise(positions: &[Vec3]) -> impl Iterator<Item = f64> + '_ {
    (0..positions.len()).flat_map(move |i| (0..i).map(move |j| positions[i].distance(positions[j])))
}

pub fn min_pairwise_distance(positions: &[Vec3]) -> f64 {
    pairwise(positions).fold(f64::INFINITY, f64::min)
}

pub fn max_pairwise_distance(positions: &[Vec3]) -> f64 {
    pairwise(positions).fold(0.0, f64::max)
}

/// Lyapunov value of the sorted ring; NaN when two phases coincide.
pub fn lyapunov(phases: &[f64]) -> f64 {
    lyapunov_value(&ring_errors(&sorted_phases(phases))).unwrap_or(f64::NAN)
}

/// Largest `|separation − 360/n|` in degrees.
pub fn separation_error(seps: &[f64]) -> f64 {
    let target = 360.0 / seps.len() as f64;
    seps.iter().map(|s| (s - target).abs()).fold(0.0, f64::max)
}

/// First time from which every separation stays within `band` degrees of
/// `360/n` for `hold` seconds. `series` is `(t, separations)` in time order.
pub fn convergence_time(series: &[(f64, Vec<f64>)], band: f64, hold: f64) -> Option<f64> {
    let eps = 1e-9 * hold.max(1.0);
    let mut start: Option<f64> = None;
    for (t, seps) in series {
        if !seps.is_empty() && separation_error(seps) <= band {
            let s = *start.get_or_insert(*t);
            if t - s >= hold - eps {
                return Some(s);
            }
        } else {
            start = None;
        }
    }
    None
}

/// All agents at one tick.
#[derive(Debug, Clone)]
pub struct Tick {
    pub t: f64,
    pub ids: Vec<u32>,
    pub positions: Vec<Vec3>,
    pub phases: Vec<f64>,
    pub tracking: Vec<f64>,
}

/// Groups records (ordered by tick) into ticks.
pub fn ticks(records: &[TelemetryRecord]) -> Vec<Tick> {
    let mut out: Vec<Tick> = Vec::new();
    for r in records {
        if out.last().is_none_or(|k| k.t != r.t) {
            out.push(Tick { t: r.t, ids: vec![], positions: vec![], phases: vec![], tracking: vec![] });
        }
        let k = out.last_mut().expect("just pushed");
        k.ids.push(r.id);
        k.positions.push(r.x);
        k.phases.push(r.phi);
        k.tracking.push(r.x.distance(r.x_d));
    }
    out
}

/// Per-tick derived values.
#[derive(Debug, Clone, PartialEq)]
pub struct TickMetrics {
    pub t: f64,
    pub n: usize,
    /// `(lower-rank agent id, separation in degrees)` in sorted-ring order.
    pub separations: Vec<(u32, f64)>,
    pub min_distance: f64,
    pub max_distance: f64,
    pub lyapunov: f64,
    pub max_tracking_error: f64,
}

pub fn tick_metrics(k: &Tick) -> TickMetrics {
    let mut by_phase: Vec<(f64, u32)> = k.phases.iter().map(|&p| wrap_to_pi(p)).zip(k.ids.iter().copied()).collect();
    by_phase.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let seps = separations(&k.phases);
    TickMetrics {
        t: k.t,
        n: k.ids.len(),
        separations: by_phase.iter().map(|p| p.1).zip(seps).collect(),
        min_distance: min_pairwise_distance(&k.positions),
        max_distance: max_pairwise_distance(&k.positions),
        lyapunov: lyapunov(&k.phases),
        max_tracking_error: k.tracking.iter().copied().fold(0.0, f64::max),
    }
}

/// A stretch of the run with a constant agent count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
    pub n: usize,
    pub band_deg: f64,
    /// Absolute time at which the band was entered for good.
    pub convergence_time_s: Option<f64>,
    /// `convergence_time_s − start_s`.
    pub settle_s: Option<f64>,
    pub steady_oscillation_deg: Option<f64>,
    pub steady_min_distance_m: Option<f64>,
    pub min_distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    /// From the first segment.
    pub convergence_time_s: Option<f64>,
    pub steady_oscillation_deg: Option<f64>,
    pub steady_min_distance_m: Option<f64>,
    /// Over the whole run.
    pub min_distance_m: f64,
    pub max_distance_m: f64,
    pub final_separations_deg: Vec<f64>,
    pub lyapunov_final: f64,
    pub band_deg: f64,
    pub hold_s: f64,
    pub segments: Vec<Segment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separations_csv: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricsOptions {
    /// Band override; by default chosen per segment from its agent count.
    pub band_deg: Option<f64>,
    pub hold_s: Option<f64>,
}

fn segment(ticks: &[TickMetrics], band: f64, hold: f64) -> Segment {
    let series: Vec<(f64, Vec<f64>)> = ticks.iter().map(|k| (k.t, k.separations.iter().map(|s| s.1).collect())).collect();
    let conv = convergence_time(&series, band, hold);
    let steady: Vec<&TickMetrics> = match conv {
        Some(c) => ticks.iter().filter(|k| k.t >= c).collect(),
        None => vec![],
    };
    let start = ticks[0].t;
    Segment {
        start_s: start,
        end_s: ticks[ticks.len() - 1].t,
        n: ticks[0].n,
        band_deg: band,
        convergence_time_s: conv,
        settle_s: conv.map(|c| c - start),
        steady_oscillation_deg: conv.map(|_| steady.iter().map(|k| separation_error(&series_of(k))).fold(0.0, f64::max)),
        steady_min_distance_m: conv.map(|_| steady.iter().map(|k| k.min_distance).fold(f64::INFINITY, f64::min)),
        min_distance_m: ticks.iter().map(|k| k.min_distance).fold(f64::INFINITY, f64::min),
    }
}

fn series_of(k: &TickMetrics) -> Vec<f64> {
    k.separations.iter().map(|s| s.1).collect()
}

/// Splits at every change of the agent count (insertions, removals).
pub fn segments(ticks: &[TickMetrics], opts: MetricsOptions) -> Vec<Segment> {
    let hold = opts.hold_s.unwrap_or(DEFAULT_HOLD_S);
    ticks
        .chunk_by(|a, b| a.n == b.n)
        .map(|chunk| segment(chunk, opts.band_deg.unwrap_or_else(|| default_band_deg(chunk[0].n)), hold))
        .collect()
}

/// Per-tick metrics and the summary. `None` for empty telemetry.
pub fn summarize(records: &[TelemetryRecord], opts: MetricsOptions) -> Option<(Vec<TickMetrics>, MetricsSummary)> {
    let per_tick: Vec<TickMetrics> = ticks(records).iter().map(tick_metrics).collect();
    let last = per_tick.last()?;
    let segs = segments(&per_tick, opts);
    let first = &segs[0];
    let summary = MetricsSummary {
        convergence_time_s: first.convergence_time_s,
        steady_oscillation_deg: first.steady_oscillation_deg,
        steady_min_distance_m: first.steady_min_distance_m,
        min_distance_m: per_tick.iter().map(|k| k.min_distance).fold(f64::INFINITY, f64::min),
        max_distance_m: per_tick.iter().map(|k| k.max_distance).fold(0.0, f64::max),
        final_separations_deg: series_of(last),
        lyapunov_final: last.lyapunov,
        band_deg: first.band_deg,
        hold_s: opts.hold_s.unwrap_or(DEFAULT_HOLD_S),
        segments: segs,
        series_csv: None,
        separations_csv: None,
    };
    Some((per_tick, summary))
}

/// `t,n,min_distance,max_distance,lyapunov,max_separation_error_deg,max_tracking_error`
pub fn write_series_csv<W: Write>(w: W, ticks: &[TickMetrics]) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["t", "n", "min_distance", "max_distance", "lyapunov", "max_separation_error_deg", "max_tracking_error"])?;
    let g = |v: f64| format_g(v, SIGNIFICANT_DIGITS);
    for k in ticks {
        out.write_record([
            g(k.t),
            k.n.to_string(),
            g(k.min_distance),
            g(k.max_distance),
            g(k.lyapunov),
            g(separation_error(&series_of(k))),
            g(k.max_tracking_error),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Long format: `t,rank,id,separation_deg`.
pub fn write_separations_csv<W: Write>(w: W, ticks: &[TickMetrics]) -> csv::Result<()> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(["t", "rank", "id", "separation_deg"])?;
    for k in ticks {
        for (rank, (id, sep)) in k.separations.iter().enumerate() {
            out.write_record([format_g(k.t, SIGNIFICANT_DIGITS), rank.to_string(), id.to_string(), format_g(*sep, SIGNIFICANT_DIGITS)])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Uniform phases for `n` agents starting at `offset`.
pub fn uniform_phases(n: usize, offset: f64) -> Vec<f64> {
    (0..n).map(|i| wrap_to_pi(offset + TAU * i as f64 / n as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn uniform_separations() {
        for n in [2, 3, 50] {
            let s = separations(&uniform_phases(n, 0.3));
            assert_eq!(s.len(), n);
            for v in &s {
                assert!((v - 360.0 / n as f64).abs() < 1e-9, "{n}: {v}");
            }
        }
        assert_eq!(separations(&[0.0, PI]), vec![180.0, 180.0]);
    }

    #[test]
    fn separations_sum_to_full_turn() {
        let s = separations(&[3.0, -2.0, 0.1, 0.10000001, -3.1]);
        assert!((s.iter().sum::<f64>() - 360.0).abs() < 1e-9);
        assert!(s.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn distances() {
        let tri: Vec<Vec3> = uniform_phases(3, 0.0).iter().map(|p| Vec3::new(p.cos(), p.sin(), 0.0)).collect();
        assert!((min_pairwise_distance(&tri) - 3f64.sqrt()).abs() < 1e-12);
        assert!((max_pairwise_distance(&tri) - 3f64.sqrt()).abs() < 1e-12);
        let pair = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.54, 0.0, 0.0)];
        assert_eq!(min_pairwise_distance(&pair), 0.54);
        assert_eq!(min_pairwise_distance(&[Vec3::ZERO, Vec3::ZERO]), 0.0);
    }

    #[test]
    fn lyapunov_zero_at_uniform() {
        assert_eq!(lyapunov(&[-PI / 2.0, 0.0, PI / 2.0, PI]), 0.0);
        assert!(lyapunov(&[0.0, 1.0, 2.5]) > 0.0);
        assert!(lyapunov(&[0.0, 0.0, 2.5]).is_nan());
    }

    #[test]
    fn convergence_examples() {
        let uniform: Vec<(f64, Vec<f64>)> = (0..60).map(|k| (k as f64 * 0.1, vec![120.0; 3])).collect();
        assert_eq!(convergence_time(&uniform, 5.0, 2.0), Some(0.0));
        let mut late = uniform.clone();
        for sample in late.iter_mut().take(25) {
            sample.1 = vec![100.0, 140.0, 120.0];
        }
        late[27].1 = vec![110.0, 130.0, 120.0];
        assert_eq!(convergence_time(&late, 5.0, 2.0), Some(late[28].0));
        // Not held long enough before the data ends.
        assert_eq!(convergence_time(&late[..47], 5.0, 2.0), None);
        assert_eq!(convergence_time(&late, 25.0, 2.0), Some(0.0));
    }

    fn rec(t: f64, id: u32, phi: f64) -> TelemetryRecord {
        let x = Vec3::new(phi.cos(), phi.sin(), 0.0);
        TelemetryRecord { t, id, x, x_d: x, phi, omega_zdi: 1.0, flags: 0 }
    }

    #[test]
    fn segments_split_on_agent_count() {
        let mut records = Vec::new();
        for k in 0..55 {
            let t = k as f64 * 0.1;
            let n = if k < 25 { 3 } else { 4 };
            for (i, p) in uniform_phases(n, 0.01 * k as f64).iter().enumerate() {
                records.push(rec(t, i as u32, *p));
            }
        }
        let (per_tick, summary) = summarize(&records, MetricsOptions::default()).unwrap();
        assert_eq!(per_tick.len(), 55);
        assert_eq!(summary.segments.len(), 2);
        assert_eq!(summary.segments[1].n, 4);
        assert_eq!(summary.segments[1].settle_s, Some(0.0));
        assert_eq!(summary.convergence_time_s, Some(0.0));
        assert_eq!(summary.final_separations_deg.len(), 4);
        assert!(summary.lyapunov_final.abs() < 1e-9);
        assert_eq!(summary.band_deg, 5.0);
        assert!((summary.min_distance_m - 2f64.sqrt()).abs() < 1e-9);
        let json = serde_json::to_value(&summary).unwrap();
        for key in
            ["convergence_time_s", "steady_oscillation_deg", "min_distance_m", "max_distance_m", "final_separations_deg", "lyapunov_final"]
        {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn series_files() {
        let records: Vec<_> = uniform_phases(3, 0.0).iter().enumerate().map(|(i, p)| rec(0.0, i as u32, *p)).collect();
        let (per_tick, _) = summarize(&records, MetricsOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_separations_csv(&mut buf, &per_tick).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("t,rank,id,separation_deg\n0,0,"));
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &per_tick).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
        assert!(summarize(&[], MetricsOptions::default()).is_none());
    }
}
