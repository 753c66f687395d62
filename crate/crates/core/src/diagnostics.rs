//! Entropy-law and martingale diagnostics, plus the small curve fits they use.

use serde::Serialize;

use crate::ensemble::EnsembleRecord;
use crate::error::{Error, Result};
use crate::montecarlo::{Moment, TrajectoryEnsemble};

/// Least-squares `y ≈ slope·x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "linear fit needs ≥ 2 paired points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("linear fit with constant abscissa".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Decay rate `γ` of `y ≈ c·e^{−γt}` from a log-linear fit over `t ∈ window`.
pub fn log_decay_rate(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<f64> {
    let (t, ly): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(&t, &v)| t >= window.0 && t <= window.1 && v > 0.0)
        .map(|(&t, &v)| (t, v.ln()))
        .unzip();
    Ok(-linear_fit(&t, &ly)?.0)
}

/// Local maxima of `|y|`, refined by a parabola through the three samples
/// around each peak. Endpoints are never peaks.
pub fn envelope_peaks(times: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    let a: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let mut peaks = Vec::new();
    for k in 1..a.len().saturating_sub(1) {
        if a[k] > a[k - 1] && a[k] >= a[k + 1] {
            let (y0, y1, y2) = (a[k - 1], a[k], a[k + 1]);
            let denom = y0 - 2.0 * y1 + y2;
            let (shift, height) = if denom < 0.0 {
                let s = 0.5 * (y0 - y2) / denom;
                (s, y1 - 0.25 * (y0 - y2) * s)
            } else {
                (0.0, y1)
            };
            let h = times[k + 1] - times[k];
            peaks.push((times[k] + shift * h, height));
        }
    }
    peaks
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeFit {
    pub rate: f64,
    pub peaks: usize,
    /// `(max − min)/max` of the peak heights.
    pub spread: f64,
}

/// Exponential envelope of an oscillating signal, fitted on peaks with `t ≤ t_max`.
pub fn envelope_decay(times: &[f64], values: &[f64], t_max: f64) -> Result<EnvelopeFit> {
    let peaks: Vec<(f64, f64)> = envelope_peaks(times, values)
        .into_iter()
        .filter(|&(t, h)| t <= t_max && h > 0.0)
        .collect();
    if peaks.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "envelope fit found {} peaks; need ≥ 3",
            peaks.len()
        )));
    }
    let t: Vec<f64> = peaks.iter().map(|p| p.0).collect();
    let ly: Vec<f64> = peaks.iter().map(|p| p.1.ln()).collect();
    let (hi, lo) = peaks
        .iter()
        .fold((f64::MIN, f64::MAX), |(hi, lo), p| (hi.max(p.1), lo.min(p.1)));
    Ok(EnvelopeFit {
        rate: -linear_fit(&t, &ly)?.0,
        peaks: peaks.len(),
        spread: (hi - lo) / hi,
    })
}

/// Shared relaxation rate `γ` for several series `z_j(t) ≈ z∞_j + (z0_j − z∞_j)e^{−γt}`.
///
/// For a fixed `γ` each series is linear in `(z∞_j, z0_j)`, so those are solved
/// exactly and `γ` is found by golden-section search on the pooled residual
/// within `[lo, hi]`.
pub fn pooled_relaxation_rate(times: &[f64], series: &[Vec<f64>], lo: f64, hi: f64) -> Result<f64> {
    if series.is_empty() || times.len() < 3 {
        return Err(Error::InsufficientData("relaxation fit needs ≥ 1 series and ≥ 3 times".into()));
    }
    let cost = |g: f64| -> f64 {
        let u: Vec<f64> = times.iter().map(|t| (-g * t).exp()).collect();
        series
            .iter()
            .map(|z| match linear_fit(&u, z) {
                Ok((b, a)) => z.iter().zip(&u).map(|(zi, ui)| (zi - a - b * ui).powi(2)).sum::<f64>(),
                Err(_) => f64::INFINITY,
            })
            .sum()
    };
    // Coarse log-spaced scan, then golden-section refinement around the best node.
    let nodes: usize = 200;
    let ratio = (hi / lo).powf(1.0 / nodes as f64);
    let grid: Vec<f64> = (0..=nodes).map(|k| lo * ratio.powi(k as i32)).collect();
    let best = (0..grid.len())
        .min_by(|&a, &b| cost(grid[a]).total_cmp(&cost(grid[b])))
        .unwrap_or(0);
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(nodes)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - phi * (b - a), a + phi * (b - a));
    for _ in 0..100 {
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    Ok(0.5 * (a + b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DifferenceScheme {
    /// `(S_{k+1} − S_k)/Δt` compared at `t_k`; first order in `Δt`.
    Forward,
    /// `(S_{k+1} − S_{k−1})/2Δt` at `t_k`; second order.
    Central,
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyLawReport {
    pub scheme: DifferenceScheme,
    pub window: (f64, f64),
    /// `max_k |lhs_k − rhs_k| / max_k |rhs_k|` over the window.
    pub max_relative_error: f64,
    /// `max_k |lhs_k − rhs_k| / |rhs_k|`; large where the predicted rate crosses zero.
    pub max_pointwise_error: f64,
    /// `max_k |rhs_k|`.
    pub rate_scale: f64,
    pub checked: usize,
    /// Samples where the predicted rate is infinite (support mismatch).
    pub flagged_infinite: usize,
}

/// Compare the finite-difference entropy rate of an OQT-only record with
/// `α̃·(D[χ‖ρ] + ln Ω − S)` at samples with `t ∈ window`.
///
/// The record must carry relative entropies and be sampled every step.
pub fn entropy_law_check(
    rec: &EnsembleRecord,
    omega: usize,
    scheme: DifferenceScheme,
    window: (f64, f64),
) -> Result<EntropyLawReport> {
    if rec.j_eff != 0.0 {
        return Err(Error::contract("entropy law applies to thermalization-only records"));
    }
    let rel = rec
        .relative_entropy
        .as_ref()
        .ok_or_else(|| Error::contract("record lacks relative entropy samples"))?;
    let (t, s) = (&rec.times, &rec.entropy);
    let log_omega = (omega as f64).ln();
    let mut report = EntropyLawReport {
        scheme,
        window,
        max_relative_error: 0.0,
        max_pointwise_error: 0.0,
        rate_scale: 0.0,
        checked: 0,
        flagged_infinite: 0,
    };
    let mut worst_abs = 0.0f64;
    for k in 1..t.len().saturating_sub(1) {
        if t[k] < window.0 || t[k] > window.1 {
            continue;
        }
        let rhs = rec.alpha_eff * (rel[k] + log_omega - s[k]);
        if !rhs.is_finite() {
            report.flagged_infinite += 1;
            continue;
        }
        let lhs = match scheme {
            DifferenceScheme::Forward => (s[k + 1] - s[k]) / (t[k + 1] - t[k]),
            DifferenceScheme::Central => (s[k + 1] - s[k - 1]) / (t[k + 1] - t[k - 1]),
        };
        let err = (lhs - rhs).abs();
        worst_abs = worst_abs.max(err);
        report.rate_scale = report.rate_scale.max(rhs.abs());
        if rhs != 0.0 {
            report.max_pointwise_error = report.max_pointwise_error.max(err / rhs.abs());
        }
        report.checked += 1;
    }
    if report.checked == 0 {
        return Err(Error::InsufficientData("no interior samples inside the entropy window".into()));
    }
    report.max_relative_error = if report.rate_scale > 0.0 { worst_abs / report.rate_scale } else { worst_abs };
    Ok(report)
}

/// Minimum number of trajectories behind a martingale verdict.
pub const MIN_MARTINGALE_SAMPLES: usize = 100;
/// Drift threshold in standard errors.
pub const MARTINGALE_SIGMAS: f64 = 3.0;
/// Standard-error floor for exact (deterministic) series.
pub const EXACT_ERROR_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MartingaleBasis {
    Energy,
    Sector,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "MARTINGALE-CONSISTENT")]
    MartingaleConsistent,
    #[serde(rename = "DRIFTING")]
    Drifting,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::MartingaleConsistent => "MARTINGALE-CONSISTENT",
            Verdict::Drifting => "DRIFTING",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentDrift {
    pub index: usize,
    pub initial: f64,
    pub terminal_mean: f64,
    pub drift: f64,
    pub std_error: f64,
    pub sigmas: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MartingaleReport {
    pub basis: MartingaleBasis,
    pub samples: usize,
    pub components: Vec<ComponentDrift>,
    pub verdict: Verdict,
    /// Shared relaxation rate of the drifting components.
    pub relaxation_rate: Option<f64>,
}

/// Diagonal time series to judge: trajectory moments or an exact master record.
pub enum MartingaleInput<'a> {
    Trajectories(&'a TrajectoryEnsemble),
    /// A master record (exact series) with an explicit sector map for [`MartingaleBasis::Sector`].
    Master(&'a EnsembleRecord, Option<&'a [usize]>),
}

pub fn martingale_report(input: MartingaleInput<'_>, basis: MartingaleBasis) -> Result<MartingaleReport> {
    let (times, series, n): (Vec<f64>, Vec<Vec<Moment>>, usize) = match input {
        MartingaleInput::Trajectories(e) => {
            if e.trajectories < MIN_MARTINGALE_SAMPLES {
                return Err(Error::InsufficientData(format!(
                    "martingale verdict needs ≥ {MIN_MARTINGALE_SAMPLES} trajectories, got {}",
                    e.trajectories
                )));
            }
            let rows = match basis {
                MartingaleBasis::Energy => &e.populations,
                MartingaleBasis::Sector => &e.sectors,
            };
            if rows.first().is_none_or(Vec::is_empty) {
                return Err(Error::contract("ensemble has no samples in the requested basis"));
            }
            let comps = rows[0].len();
            let series = (0..comps).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
            (e.times.clone(), series, e.trajectories)
        }
        MartingaleInput::Master(rec, sectors) => {
            let diag = &rec.diagonals;
            let rows: Vec<Vec<f64>> = match basis {
                MartingaleBasis::Energy => diag.clone(),
                MartingaleBasis::Sector => {
                    let map = sectors.ok_or_else(|| Error::contract("sector basis needs a sector map"))?;
                    let count = map.iter().max().map_or(0, |m| m + 1);
                    diag.iter()
                        .map(|p| {
                            let mut w = vec![0.0; count];
                            for (i, x) in p.iter().enumerate() {
                                w[map[i]] += x;
                            }
                            w
                        })
                        .collect()
                }
            };
            if rows.len() < 2 {
                return Err(Error::InsufficientData("master record has fewer than 2 samples".into()));
            }
            let comps = rows[0].len();
            let series = (0..comps)
                .map(|j| rows.iter().map(|r| Moment { mean: r[j], variance: 0.0 }).collect())
                .collect();
            (rec.times.clone(), series, 1)
        }
    };

    let mut components = Vec::new();
    let mut drifting = Vec::new();
    for (j, s) in series.iter().enumerate() {
        let (first, last) = (s[0], s[s.len() - 1]);
        let drift = last.mean - first.mean;
        let se = last.std_error(n).max(EXACT_ERROR_FLOOR);
        let sigmas = drift.abs() / se;
        if sigmas > MARTINGALE_SIGMAS {
            drifting.push(j);
        }
        components.push(ComponentDrift {
            index: j,
            initial: first.mean,
            terminal_mean: last.mean,
            drift,
            std_error: se,
            sigmas,
        });
    }
    let verdict = if drifting.is_empty() {
        Verdict::MartingaleConsistent
    } else {
        Verdict::Drifting
    };
    let relaxation_rate = if drifting.is_empty() {
        None
    } else {
        let span = times.last().copied().unwrap_or(1.0) - times[0];
        let z: Vec<Vec<f64>> = drifting.iter().map(|&j| series[j].iter().map(|m| m.mean).collect()).collect();
        let t0: Vec<f64> = times.iter().map(|t| t - times[0]).collect();
        Some(pooled_relaxation_rate(&t0, &z, 1e-3 / span, 1e3 / span)?)
    };
    Ok(MartingaleReport {
        basis,
        samples: n,
        components,
        verdict,
        relaxation_rate,
    })
}

/// Signed bias of the per-step norm residual across independent runs.
///
/// With a correct fluctuation–dissipation pairing the expected residual is
/// `E‖drift‖²dt² ≤ 4(α̃ + J̃)²dt²`; a broken pairing leaves an `O(dt)` bias.
#[derive(Clone, Debug, Serialize)]
pub struct ResidualBias {
    pub runs: usize,
    pub mean_signed: f64,
    pub std_error: f64,
    pub allowance: f64,
    pub mean_abs: f64,
    pub consistent: bool,
}

pub fn residual_bias(residuals: &[crate::trajectory::ResidualStats], total_rate: f64, dt: f64) -> Result<ResidualBias> {
    if residuals.len() < 2 {
        return Err(Error::InsufficientData("residual bias needs ≥ 2 runs".into()));
    }
    let n = residuals.len() as f64;
    let mean = residuals.iter().map(|r| r.mean_signed).sum::<f64>() / n;
    let var = residuals.iter().map(|r| (r.mean_signed - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let allowance = 4.0 * (total_rate * dt).powi(2);
    Ok(ResidualBias {
        runs: residuals.len(),
        mean_signed: mean,
        std_error: se,
        allowance,
        mean_abs: residuals.iter().map(|r| r.mean_abs).sum::<f64>() / n,
        consistent: mean.abs() <= MARTINGALE_SIGMAS * se + allowance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 2.0).collect();
        let (m, c) = linear_fit(&x, &y).unwrap();
        assert!((m - 3.0).abs() < 1e-12 && (c + 2.0).abs() < 1e-12);
    }

    #[test]
    fn envelope_of_damped_cosine() {
        let t: Vec<f64> = (0..20000).map(|k| k as f64 * 1e-3).collect();
        let y: Vec<f64> = t.iter().map(|&s| (-0.7 * s).exp() * (5.3 * s + 0.2).cos()).collect();
        let fit = envelope_decay(&t, &y, 15.0).unwrap();
        assert!((fit.rate - 0.7).abs() < 1e-3, "{}", fit.rate);
    }

    #[test]
    fn pooled_rate_recovers_exponential() {
        let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let s = vec![
            t.iter().map(|x| 0.25 + 0.5 * (-1.7 * x).exp()).collect(),
            t.iter().map(|x| 0.25 - 0.2 * (-1.7 * x).exp()).collect(),
        ];
        let g = pooled_relaxation_rate(&t, &s, 1e-3, 1e3).unwrap();
        assert!((g - 1.7).abs() < 1e-6, "{g}");
    }

    #[test]
    fn small_ensembles_are_rejected() {
        let e = TrajectoryEnsemble {
            seed: 0,
            trajectories: 10,
            dt: 1.0,
            times: vec![0.0, 1.0],
            populations: vec![vec![Moment::default()]; 2],
            sectors: Vec::new(),
            energy: Vec::new(),
            observables: Vec::new(),
            projector_mean: Vec::new(),
            projector_var: Vec::new(),
            residuals: Vec::new(),
            terminal_sectors: Vec::new(),
        };
        assert!(matches!(
            martingale_report(MartingaleInput::Trajectories(&e), MartingaleBasis::Energy),
            Err(Error::InsufficientData(_))
        ));
    }
}
