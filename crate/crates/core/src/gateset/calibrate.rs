//! Simulated calibration: Rabi sweep, fit, amplitude interpolation and the
//! fine-tuning amplitude sweep.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    sigma_of_duration, DurationPolicy, GateImpl, GateSet, GateSetError, Mode, RabiTable,
    ECR_DURATION,
};
use crate::circuit::GateKind;
use crate::linalg::{self, C64};
use crate::pulse::{synthesize, Shape, ShapeSpec, DEFAULT_DRAG_BETA};
use crate::sim::{propagate_waveform, simulate_rabi, subspace_fidelity, NoiseModel, QubitParams};

/// Least-squares parameters of `y(t) = 𝒜·cos²(2πΩt + Φ) + δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiFit {
    pub omega_hz: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    pub rms_residual: f64,
}

impl RabiFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (2.0 * PI * self.omega_hz * t + self.phase).cos().powi(2) + self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiPoint {
    pub amplitude: f64,
    pub omega_hz: f64,
}

/// Default residual bound for [`fit_rabi`].
pub const FIT_MAX_RMS: f64 = 0.02;

/// Linear part of the fit at fixed Ω: `y ≈ c0 + c1·cos(4πΩt) + c2·sin(4πΩt)`.
fn linear_fit(t: &[f64], y: &[f64], omega: f64) -> Option<(Vector3<f64>, f64)> {
    let w = 4.0 * PI * omega;
    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for (&ti, &yi) in t.iter().zip(y) {
        let row = Vector3::new(1.0, (w * ti).cos(), (w * ti).sin());
        ata += row * row.transpose();
        aty += row * yi;
    }
    let c = ata.lu().solve(&aty)?;
    let rss = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| {
            let f = c[0] + c[1] * (w * ti).cos() + c[2] * (w * ti).sin();
            (yi - f).powi(2)
        })
        .sum();
    Some((c, rss))
}

fn rss_at(t: &[f64], y: &[f64], omega: f64) -> f64 {
    linear_fit(t, y, omega).map_or(f64::INFINITY, |(_, r)| r)
}

pub fn fit_rabi(t: &[f64], y: &[f64]) -> Result<RabiFit, GateSetError> {
    fit_rabi_with(t, y, FIT_MAX_RMS)
}

/// Variable-projection fit: a grid over Ω up to the sampling limit, refined
/// by golden-section search, with the three linear coefficients solved
/// exactly at every trial Ω.
pub fn fit_rabi_with(t: &[f64], y: &[f64], max_rms: f64) -> Result<RabiFit, GateSetError> {
    if t.len() != y.len() || t.len() < 8 {
        return Err(GateSetError::Fit(format!(
            "need at least 8 samples, got {}",
            t.len().min(y.len())
        )));
    }
    let span = t[t.len() - 1] - t[0];
    if !(span > 0.0) {
        return Err(GateSetError::Fit("samples span no time".into()));
    }
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if hi - lo < 1e-9 {
        return Err(GateSetError::Fit(
            "degenerate signal: no oscillation".into(),
        ));
    }
    let spacing = span / (t.len() - 1) as f64;
    let omega_max = 1.0 / (4.0 * spacing);
    let step = 1.0 / (16.0 * span);
    let mut best = (f64::INFINITY, step);
    let mut k = 1usize;
    loop {
        let om = step * k as f64;
        if om > omega_max {
            break;
        }
        let r = rss_at(t, y, om);
        if r < best.0 {
            best = (r, om);
        }
        k += 1;
    }
    let (mut a, mut b) = ((best.1 - step).max(step * 1e-3), best.1 + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (rss_at(t, y, x1), rss_at(t, y, x2));
    for _ in 0..200 {
        if (b - a) <= 1e-14 * b {
            break;
        }
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = rss_at(t, y, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = rss_at(t, y, x2);
        }
    }
    let omega = 0.5 * (a + b);
    let (c, rss) = linear_fit(t, y, omega)
        .ok_or_else(|| GateSetError::Fit("singular normal equations".into()))?;
    let r = c[1].hypot(c[2]);
    if r < 1e-6 {
        return Err(GateSetError::Fit("degenerate amplitude".into()));
    }
    let rms = (rss / t.len() as f64).sqrt();
    if rms > max_rms {
        return Err(GateSetError::Fit(format!(
            "residual rms {rms:.4} exceeds {max_rms}"
        )));
    }
    if span * omega < 0.5 {
        return Err(GateSetError::Fit(format!(
            "window covers {:.2} of one period",
            2.0 * span * omega
        )));
    }
    Ok(RabiFit {
        omega_hz: omega,
        amplitude: 2.0 * r,
        phase: (-c[2]).atan2(c[1]) / 2.0,
        offset: c[0] - r,
        rms_residual: rms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interpolated {
    pub amplitude: f64,
    /// Target lay outside the sampled Ω range.
    pub extrapolated: bool,
}

/// Piecewise-linear inverse of the amplitude↦Ω response. Negative targets
/// map to negative amplitudes.
pub fn interpolate_amplitude(
    points: &[RabiPoint],
    target_omega_hz: f64,
) -> Result<Interpolated, GateSetError> {
    if points.len() < 2 {
        return Err(GateSetError::Config(
            "interpolation needs at least two Rabi points".into(),
        ));
    }
    if target_omega_hz < 0.0 {
        let r = interpolate_amplitude(points, -target_omega_hz)?;
        return Ok(Interpolated {
            amplitude: -r.amplitude,
            ..r
        });
    }
    let mut pts: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.omega_hz, p.amplitude.abs()))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pts.len();
    let extrapolated = target_omega_hz < pts[0].0 || target_omega_hz > pts[n - 1].0;
    let i = pts
        .partition_point(|p| p.0 < target_omega_hz)
        .clamp(1, n - 1);
    let ((x0, y0), (x1, y1)) = (pts[i - 1], pts[i]);
    let amplitude = if x1 == x0 {
        y0
    } else {
        y0 + (y1 - y0) * (target_omega_hz - x0) / (x1 - x0)
    };
    Ok(Interpolated {
        amplitude,
        extrapolated,
    })
}

/// Amplitude for which a `d`-dt pulse of the gate set's envelope rotates by
/// `θ`: the target Rabi rate is `θ / (4π·Σ env·dt)`.
pub fn dynamic_amplitude(
    gs: &GateSet,
    qubit: usize,
    theta: f64,
    d: u64,
) -> Result<f64, GateSetError> {
    if theta == 0.0 {
        return Ok(0.0);
    }
    let env = synthesize(&gs.envelope(theta, d)?)?;
    let area: f64 = env.samples.iter().map(|s| s.re).sum::<f64>() * gs.dt_ns * 1e-9;
    let target = theta / (4.0 * PI * area);
    let amplitude = interpolate_amplitude(gs.rabi_table(qubit)?, target)?.amplitude;
    if amplitude.abs() > 1.0 {
        return Err(GateSetError::Infeasible {
            theta,
            duration: d,
            amplitude,
        });
    }
    Ok(amplitude)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    /// Rabi sweep amplitudes.
    pub amplitudes: Vec<f64>,
    pub samples_per_trace: usize,
    pub max_fit_rms: f64,
    /// Fine-tune sweep half-width, as a fraction of the starting amplitude.
    pub sweep_fraction: f64,
    pub sweep_steps: usize,
    pub fidelity_floor: f64,
    pub shape: Shape,
    pub beta: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let n = 16;
        let (lo, hi) = (1e-3f64, 0.5f64);
        let amplitudes = (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect();
        CalibrationConfig {
            amplitudes,
            samples_per_trace: 64,
            max_fit_rms: FIT_MAX_RMS,
            sweep_fraction: 0.1,
            sweep_steps: 41,
            fidelity_floor: 0.9,
            shape: Shape::Gaussian,
            beta: DEFAULT_DRAG_BETA,
        }
    }
}

/// Runs the Rabi sweep on one qubit and fits every trace. Traces whose fit
/// fails (typically strongly leaking high amplitudes) are dropped.
pub fn calibrate_rabi(
    p: &QubitParams,
    dt_ns: f64,
    cfg: &CalibrationConfig,
) -> Result<Vec<(RabiPoint, RabiFit)>, GateSetError> {
    let traces = simulate_rabi(&cfg.amplitudes, None, cfg.samples_per_trace, p, dt_ns);
    let fits: Vec<(RabiPoint, RabiFit)> = traces
        .iter()
        .filter_map(|tr| {
            fit_rabi_with(&tr.times_s, &tr.p0, cfg.max_fit_rms)
                .ok()
                .map(|f| {
                    (
                        RabiPoint {
                            amplitude: tr.amplitude,
                            omega_hz: f.omega_hz,
                        },
                        f,
                    )
                })
        })
        .collect();
    if fits.len() < 2 {
        return Err(GateSetError::Fit(format!(
            "only {} of {} Rabi traces fitted",
            fits.len(),
            traces.len()
        )));
    }
    Ok(fits)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineTuned {
    pub spec: ShapeSpec,
    pub fidelity: f64,
    /// Index of the chosen point in the sweep.
    pub index: usize,
}

/// Sweeps the amplitude of `spec` over `±sweep_fraction` and keeps the point
/// with the highest noiseless three-level fidelity to `target`.
pub fn fine_tune(
    spec: &ShapeSpec,
    target: &Matrix2<C64>,
    p: &QubitParams,
    dt_ns: f64,
    cfg: &CalibrationConfig,
) -> Result<FineTuned, GateSetError> {
    let n = cfg.sweep_steps.max(1);
    let mut best: Option<FineTuned> = None;
    for i in 0..n {
        let x = if n == 1 {
            0.0
        } else {
            -cfg.sweep_fraction + 2.0 * cfg.sweep_fraction * i as f64 / (n - 1) as f64
        };
        let a = spec.amplitude * (1.0 + x);
        if a.abs() > 1.0 {
            continue;
        }
        let trial = spec.clone().with_amplitude(a);
        let mut w = synthesize(&trial)?;
        w.dt_ns = dt_ns;
        let u = propagate_waveform(&w, p);
        let f = subspace_fidelity(&u, target);
        if best.as_ref().is_none_or(|b| f > b.fidelity) {
            best = Some(FineTuned {
                spec: trial,
                fidelity: f,
                index: i,
            });
        }
    }
    match best {
        Some(b) if b.fidelity >= cfg.fidelity_floor => Ok(b),
        Some(b) => Err(GateSetError::CalibrationFailure {
            best: b.fidelity,
            floor: cfg.fidelity_floor,
        }),
        None => Err(GateSetError::CalibrationFailure {
            best: 0.0,
            floor: cfg.fidelity_floor,
        }),
    }
}

fn empty_set(
    policy: DurationPolicy,
    width: usize,
    nm: &NoiseModel,
    cfg: &CalibrationConfig,
) -> GateSet {
    GateSet {
        policy,
        width,
        shape: cfg.shape,
        beta: cfg.beta,
        ecr_duration: ECR_DURATION,
        dt_ns: nm.dt_ns,
        impls: Vec::new(),
        rabi: Vec::new(),
    }
}

fn rabi_tables(
    width: usize,
    nm: &NoiseModel,
    cfg: &CalibrationConfig,
) -> Result<Vec<RabiTable>, GateSetError> {
    (0..width)
        .into_par_iter()
        .map(|q| {
            let fits = calibrate_rabi(nm.qubit(q), nm.dt_ns, cfg)?;
            Ok(RabiTable {
                qubit: q,
                points: fits.into_iter().map(|(p, _)| p).collect(),
            })
        })
        .collect()
}

/// Calibrates a fine-tuned Sx at every duration on every qubit.
pub fn build_static_gateset(
    durations: &[u64],
    width: usize,
    nm: &NoiseModel,
    cfg: &CalibrationConfig,
) -> Result<GateSet, GateSetError> {
    nm.validate(width)?;
    if durations.is_empty() {
        return Err(GateSetError::Config("no durations given".into()));
    }
    for &d in durations {
        sigma_of_duration(d as f64)?;
    }
    let mut list = durations.to_vec();
    list.sort_unstable();
    list.dedup();
    let policy = DurationPolicy {
        mode: Mode::Static,
        min_dt: list[0],
        max_dt: *list.last().unwrap(),
        static_durations: list.clone(),
    };
    let mut gs = empty_set(policy, width, nm, cfg);
    gs.rabi = rabi_tables(width, nm, cfg)?;
    let target = linalg::sx();
    let rows: Result<Vec<Vec<GateImpl>>, GateSetError> = (0..width)
        .into_par_iter()
        .map(|q| {
            list.iter()
                .map(|&d| {
                    let start = gs
                        .envelope(FRAC_PI_2, d)?
                        .with_amplitude(dynamic_amplitude(&gs, q, FRAC_PI_2, d)?);
                    let tuned = fine_tune(&start, &target, nm.qubit(q), nm.dt_ns, cfg)?;
                    Ok(GateImpl {
                        mode: Mode::Static,
                        qubit: q,
                        kind: GateKind::Sx,
                        angle: FRAC_PI_2,
                        duration_dt: d,
                        sigma: tuned.spec.sigma,
                        amplitude: tuned.spec.amplitude,
                        fidelity: Some(tuned.fidelity),
                    })
                })
                .collect()
        })
        .collect();
    gs.impls = rows?.into_iter().flatten().collect();
    Ok(gs)
}

/// Dynamic sets carry only the Rabi tables; pulses are generated on demand.
pub fn build_dynamic_gateset(
    policy: DurationPolicy,
    width: usize,
    nm: &NoiseModel,
    cfg: &CalibrationConfig,
) -> Result<GateSet, GateSetError> {
    nm.validate(width)?;
    policy.validate()?;
    let mut gs = empty_set(
        DurationPolicy {
            mode: Mode::Dynamic,
            ..policy
        },
        width,
        nm,
        cfg,
    );
    gs.rabi = rabi_tables(width, nm, cfg)?;
    Ok(gs)
}
