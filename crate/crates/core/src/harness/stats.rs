use serde::{Deserialize, Serialize};

use super::{HarnessError, LapRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StdConvention {
    #[default]
    Population,
    Sample,
}

/// Mean and standard deviation.
pub fn mean_std(xs: &[f64], conv: StdConvention) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ss = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    let denom = match conv {
        StdConvention::Population => n as f64,
        StdConvention::Sample if n > 1 => (n - 1) as f64,
        StdConvention::Sample => return (mean, 0.0),
    };
    (mean, (ss / denom).sqrt())
}

/// Summary of consecutive laps; times in seconds, deviations in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LapStats {
    pub t_mean: f64,
    pub t_std: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub d_mean: f64,
    pub d_std: f64,
    pub cpu_mean: f64,
    pub cpu_std: f64,
    pub n_laps: usize,
    pub n_violations: usize,
}

pub fn lap_statistics(records: &[LapRecord], conv: StdConvention) -> Result<LapStats, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::NoLaps);
    }
    let times: Vec<f64> = records.iter().map(|r| r.lap_time).collect();
    let d: Vec<f64> = records.iter().flat_map(|r| r.telemetry.iter().map(|t| t.d.abs())).collect();
    let cpu: Vec<f64> = records.iter().flat_map(|r| r.cpu_times.iter().copied()).collect();
    let (t_mean, t_std) = mean_std(&times, conv);
    let (d_mean, d_std) = mean_std(&d, conv);
    let (cpu_mean, cpu_std) = mean_std(&cpu, conv);
    Ok(LapStats {
        t_mean,
        t_std,
        t_min: times.iter().copied().fold(f64::INFINITY, f64::min),
        t_max: times.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        d_mean,
        d_std,
        cpu_mean,
        cpu_std,
        n_laps: records.len(),
        n_violations: records.iter().filter(|r| r.violation).count(),
    })
}

/// Lap-time improvement from `t_a` to `t_b` in percent of `t_a`.
pub fn improvement(t_a: f64, t_b: f64) -> Result<f64, HarnessError> {
    positive(&[t_a, t_b])?;
    Ok((t_a - t_b) / t_a * 100.0)
}

/// `|t_sim - t_real| / t_real` in percent.
pub fn sim_gap(t_sim: f64, t_real: f64) -> Result<f64, HarnessError> {
    positive(&[t_sim, t_real])?;
    Ok((t_sim - t_real).abs() / t_real * 100.0)
}

/// Share of the deficit `base - reference` removed by `new`, in percent.
pub fn gap_closure(base: f64, new: f64, reference: f64) -> Result<f64, HarnessError> {
    positive(&[base, new, reference])?;
    if base <= reference {
        return Err(HarnessError::DegenerateGap { base, reference });
    }
    Ok(((base - reference) - (new - reference)) / (base - reference) * 100.0)
}

fn positive(ts: &[f64]) -> Result<(), HarnessError> {
    match ts.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        Some(&t) => Err(HarnessError::NonPositiveTime(t)),
        None => Ok(()),
    }
}

/// Improvement, sim gap and gap closure in one record; absent inputs give `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub improvement: f64,
    pub sim_gap_a: Option<f64>,
    pub sim_gap_b: Option<f64>,
    pub gap_closure: Option<f64>,
}

/// Compare mean lap times `a` (baseline) and `b`. `real` holds measured
/// counterparts for the sim gap, which is taken relative to the simulated
/// time; `reference` is the controller whose gap `b` should close.
pub fn compare_metrics(a: f64, b: f64, real: Option<(f64, f64)>, reference: Option<f64>) -> Result<Comparison, HarnessError> {
    Ok(Comparison {
        improvement: improvement(a, b)?,
        sim_gap_a: real.map(|(ra, _)| sim_gap(ra, a)).transpose()?,
        sim_gap_b: real.map(|(_, rb)| sim_gap(rb, b)).transpose()?,
        gap_closure: reference.map(|r| gap_closure(a, b, r)).transpose()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lap(t: f64) -> LapRecord {
        LapRecord { lap: 0, lap_time: t, telemetry: vec![], violation: false, mean_abs_d: 0.0, cpu_times: vec![1e-5] }
    }

    #[test]
    fn two_lap_table() {
        let s = lap_statistics(&[lap(10.0), lap(12.0)], StdConvention::Population).unwrap();
        assert_eq!((s.t_mean, s.t_std, s.t_min, s.t_max), (11.0, 1.0, 10.0, 12.0));
        let s = lap_statistics(&[lap(10.0), lap(12.0)], StdConvention::Sample).unwrap();
        assert!((s.t_std - 2f64.sqrt()).abs() < 1e-15);
        let s = lap_statistics(&[lap(13.2)], StdConvention::Population).unwrap();
        assert_eq!(s.t_std, 0.0);
        assert!(matches!(lap_statistics(&[], StdConvention::Population), Err(HarnessError::NoLaps)));
    }

    #[test]
    fn reference_figures() {
        assert!((sim_gap(14.95, 14.3464).unwrap() - 4.207).abs() < 0.01);
        assert!((sim_gap(13.890, 13.6023).unwrap() - 2.115).abs() < 0.01);
        assert!((gap_closure(14.2831, 13.3665, 12.5587).unwrap() - 52.9).abs() < 1.0);
        assert!((improvement(14.3464, 13.6023).unwrap() - 5.23).abs() < 0.1);
        // cross-check of the table rows against each other
        assert!((improvement(14.3464, 13.60).unwrap() - 5.2).abs() < 0.1);
        assert!((improvement(14.2831, 13.37).unwrap() - 6.39).abs() < 0.1);
        let c = compare_metrics(14.3464, 13.6023, Some((14.95, 13.890)), None).unwrap();
        assert!((c.sim_gap_a.unwrap() - 4.207).abs() < 0.01 && (c.sim_gap_b.unwrap() - 2.115).abs() < 0.01);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(gap_closure(12.0, 11.0, 12.0), Err(HarnessError::DegenerateGap { .. })));
        assert!(matches!(improvement(0.0, 1.0), Err(HarnessError::NonPositiveTime(_))));
        assert!(sim_gap(-1.0, 1.0).is_err());
        let c = compare_metrics(14.0, 13.0, Some((14.5, 13.2)), Some(12.0)).unwrap();
        assert_eq!(c.gap_closure, Some(50.0));
        assert!(compare_metrics(14.0, 13.0, None, None).unwrap().sim_gap_a.is_none());
    }

    proptest! {
        #[test]
        fn identities(t in 0.1f64..100.0, base in 1.0f64..100.0, gap in 0.01f64..10.0) {
            prop_assert_eq!(improvement(t, t).unwrap(), 0.0);
            prop_assert_eq!(sim_gap(t, t).unwrap(), 0.0);
            let r = base;
            prop_assert!((gap_closure(r + gap, r, r).unwrap() - 100.0).abs() < 1e-9);
            prop_assert!(gap_closure(r + gap, r + gap, r).unwrap().abs() < 1e-9);
        }

        #[test]
        fn stats_ordering(ts in proptest::collection::vec(1.0f64..30.0, 1..20)) {
            let recs: Vec<LapRecord> = ts.iter().map(|&t| lap(t)).collect();
            let s = lap_statistics(&recs, StdConvention::Population).unwrap();
            prop_assert!(s.t_min <= s.t_mean + 1e-12 && s.t_mean <= s.t_max + 1e-12);
            prop_assert!(s.t_std >= 0.0 && s.cpu_std >= 0.0);
        }
    }
}
