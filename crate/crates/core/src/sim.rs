//! Deterministic ODE integration with stepped parameter schedules,
//! time-average and power traces.
//!
//! The integrator is an embedded Dormand–Prince 5(4) pair with PI step
//! control and 4th-order dense output. Integration restarts at every
//! schedule event with the updated parameter set, so parameter steps are
//! never smeared across a step. Output is resampled from the dense
//! solution onto a fixed grid; the raw accepted steps can be kept on
//! request.

use nalgebra::{DMatrix, DVector};

use crate::analysis::MetabolicCosts;
use crate::controller::ClosedLoop;
use crate::error::{Error, Result};
use crate::network::Network;

/// Integration options. Tolerances follow the usual mixed error measure
/// `sc_i = atol + rtol·|y_i|`.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Number of fixed-grid output samples over `[0, t_end]`.
    pub samples: usize,
    /// Keep the raw accepted steps alongside the fixed grid.
    pub keep_raw: bool,
    pub max_steps: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            samples: 1000,
            keep_raw: false,
            max_steps: 20_000_000,
        }
    }
}

impl SimOptions {
    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0) || !(self.atol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerances must be positive (rtol = {}, atol = {})",
                self.rtol, self.atol
            )));
        }
        if self.samples < 2 {
            return Err(Error::InvalidParameter(
                "at least 2 output samples are required".into(),
            ));
        }
        Ok(())
    }
}

/// What a schedule event changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// Controller reference μ.
    Mu,
    /// Controller stability coefficient α.
    Alpha,
    /// Controller gain k.
    Gain,
    /// Hill saturation scale θ (practical controller only).
    Theta,
    /// Rate constant of a reaction, by index. For closed-loop runs the
    /// index addresses the plant reaction list; for raw network runs it
    /// addresses the network's own reactions.
    RateConstant(usize),
    /// Amplitude `d_i` of a disturbance channel.
    DisturbanceAmplitude(usize),
}

/// One stepped parameter change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub target: Target,
    pub value: f64,
}

/// An ordered list of parameter steps.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schedule {
    events: Vec<Event>,
}

impl Schedule {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Events at strictly increasing positive times.
    pub fn new(events: Vec<Event>) -> Result<Self> {
        Self::check_times(&events, true)?;
        Ok(Self { events })
    }

    /// Events at nondecreasing times; simultaneous events are applied in
    /// list order before integration resumes. Used by compiled circuits
    /// where one formal parameter maps to several expanded rates.
    pub fn with_simultaneous(events: Vec<Event>) -> Result<Self> {
        Self::check_times(&events, false)?;
        Ok(Self { events })
    }

    fn check_times(events: &[Event], strict: bool) -> Result<()> {
        for e in events {
            if !(e.time > 0.0) || !e.time.is_finite() {
                return Err(Error::Schedule(format!(
                    "event times must be positive and finite, got {}",
                    e.time
                )));
            }
            if !e.value.is_finite() {
                return Err(Error::Schedule(format!(
                    "event value must be finite, got {}",
                    e.value
                )));
            }
        }
        for w in events.windows(2) {
            let ok = if strict {
                w[1].time > w[0].time
            } else {
                w[1].time >= w[0].time
            };
            if !ok {
                return Err(Error::Schedule(format!(
                    "event times must be {} (got {} then {})",
                    if strict {
                        "strictly increasing"
                    } else {
                        "nondecreasing"
                    },
                    w[0].time,
                    w[1].time
                )));
            }
        }
        Ok(())
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Constant input disturbance `E d` acting on the plant states.
#[derive(Debug, Clone)]
pub struct InputDisturbance {
    pub e: DMatrix<f64>,
    pub d: DVector<f64>,
}

impl InputDisturbance {
    pub fn new(e: DMatrix<f64>, d: DVector<f64>) -> Result<Self> {
        if e.ncols() != d.len() {
            return Err(Error::DimensionMismatch(format!(
                "E has {} columns but d has {} entries",
                e.ncols(),
                d.len()
            )));
        }
        if e.iter().any(|&v| v < 0.0) || d.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidParameter(
                "disturbance E and d must be entrywise nonnegative".into(),
            ));
        }
        Ok(Self { e, d })
    }

    fn forcing(&self) -> DVector<f64> {
        &self.e * &self.d
    }
}

/// Raw accepted integrator steps.
#[derive(Debug, Clone)]
pub struct RawTrace {
    pub times: Vec<f64>,
    pub data: Vec<f64>,
}

/// A solution sampled on a fixed time grid. Rows are sample times, columns
/// follow the network's species order (plant species then `v` for
/// closed-loop runs).
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    names: Vec<String>,
    data: Vec<f64>,
    raw: Option<RawTrace>,
}

impl Trajectory {
    /// Assemble a trajectory from an explicit grid (used for synthetic
    /// traces and tests). `data` is row-major with one row per time.
    pub fn from_grid(times: Vec<f64>, names: Vec<String>, data: Vec<f64>) -> Result<Self> {
        if data.len() != times.len() * names.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} data entries for {} times × {} columns",
                data.len(),
                times.len(),
                names.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "trajectory times must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            times,
            names,
            data,
            raw: None,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.times.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_cols();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn last_row(&self) -> &[f64] {
        self.row(self.n_rows() - 1)
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.value(i, j)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Smallest value attained in column `j` over the grid.
    pub fn column_min(&self, j: usize) -> f64 {
        self.column(j).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Linear interpolation between grid rows.
    pub fn sample_at(&self, t: f64) -> Vec<f64> {
        let times = &self.times;
        if t <= times[0] {
            return self.row(0).to_vec();
        }
        if t >= *times.last().unwrap() {
            return self.last_row().to_vec();
        }
        let mut hi = times.partition_point(|&x| x < t);
        if hi == 0 {
            hi = 1;
        }
        let lo = hi - 1;
        let w = (t - times[lo]) / (times[hi] - times[lo]);
        self.row(lo)
            .iter()
            .zip(self.row(hi))
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    pub fn raw(&self) -> Option<&RawTrace> {
        self.raw.as_ref()
    }
}

// Dormand–Prince 5(4) coefficients.
const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

// PI step-size controller constants (Hairer's defaults for DOPRI5).
const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_SHRINK: f64 = 5.0; // max shrink per step: h/5
const FAC_GROW: f64 = 0.1; // max growth per step: h/0.1 = 10h

/// Collects fixed-grid samples (via dense output) and optional raw steps.
struct SampleSink {
    grid: Vec<f64>,
    next: usize,
    rows: Vec<f64>,
    raw_times: Vec<f64>,
    raw_rows: Vec<f64>,
    keep_raw: bool,
}

impl SampleSink {
    fn new(t_end: f64, samples: usize, keep_raw: bool) -> Self {
        let grid = (0..samples)
            .map(|i| t_end * i as f64 / (samples - 1) as f64)
            .collect();
        Self {
            grid,
            next: 0,
            rows: Vec::new(),
            raw_times: Vec::new(),
            raw_rows: Vec::new(),
            keep_raw,
        }
    }

    fn start(&mut self, t0: f64, y: &[f64]) {
        while self.next < self.grid.len() && self.grid[self.next] <= t0 {
            self.rows.extend_from_slice(y);
            self.next += 1;
        }
        if self.keep_raw {
            self.raw_times.push(t0);
            self.raw_rows.extend_from_slice(y);
        }
    }

    /// Record an accepted step `t -> t + h` with dense coefficients.
    #[allow(clippy::too_many_arguments)]
    fn after_step(&mut self, t: f64, h: f64, cont: &[Vec<f64>; 5], y_new: &[f64], t_scale: f64) {
        let t_new = t + h;
        while self.next < self.grid.len() && self.grid[self.next] <= t_new + 1e-12 * t_scale {
            let ts = self.grid[self.next];
            let theta = ((ts - t) / h).clamp(0.0, 1.0);
            let theta1 = 1.0 - theta;
            for ((((&c0, &c1), &c2), &c3), &c4) in cont[0]
                .iter()
                .zip(&cont[1])
                .zip(&cont[2])
                .zip(&cont[3])
                .zip(&cont[4])
            {
                self.rows
                    .push(c0 + theta * (c1 + theta1 * (c2 + theta * (c3 + theta1 * c4))));
            }
            self.next += 1;
        }
        if self.keep_raw {
            self.raw_times.push(t_new);
            self.raw_rows.extend_from_slice(y_new);
        }
    }
}

/// Hairer's starting-step heuristic.
fn initial_step<F: Fn(&[f64], &mut [f64])>(
    rhs: &F,
    t0: f64,
    t1: f64,
    y: &[f64],
    f0: &[f64],
    rtol: f64,
    atol: f64,
) -> f64 {
    let n = y.len();
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..n {
        let sc = atol + rtol * y[i].abs();
        dnf += (f0[i] / sc) * (f0[i] / sc);
        dny += (y[i] / sc) * (y[i] / sc);
    }
    let span = t1 - t0;
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(span);

    let y1: Vec<f64> = (0..n).map(|i| y[i] + h * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    rhs(&y1, &mut f1);
    let mut der2 = 0.0;
    for i in 0..n {
        let sc = atol + rtol * y[i].abs();
        der2 += ((f1[i] - f0[i]) / sc) * ((f1[i] - f0[i]) / sc);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(span)
}

/// Integrate one schedule-free segment, mutating `y` and feeding the sink.
fn dopri5_segment<F: Fn(&[f64], &mut [f64])>(
    rhs: F,
    y: &mut [f64],
    t0: f64,
    t1: f64,
    opts: &SimOptions,
    sink: &mut SampleSink,
    steps_taken: &mut usize,
) -> Result<()> {
    let n = y.len();
    let t_scale = t1.abs().max(1.0);
    let mut t = t0;

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    rhs(y, &mut k1);
    let mut h = initial_step(&rhs, t0, t1, y, &k1, opts.rtol, opts.atol);
    let mut facold = 1e-4_f64;
    let mut rejected = false;

    while t < t1 {
        if *steps_taken > opts.max_steps {
            return Err(Error::TooManySteps(opts.max_steps));
        }
        if h < 1e-14 * t_scale {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }

        for i in 0..n {
            stage[i] = y[i] + h * A21 * k1[i];
        }
        rhs(&stage, &mut k2);
        for i in 0..n {
            stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(&stage, &mut k3);
        for i in 0..n {
            stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(&stage, &mut k4);
        for i in 0..n {
            stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(&stage, &mut k5);
        for i in 0..n {
            stage[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(&stage, &mut k6);
        for i in 0..n {
            y_new[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs(&y_new, &mut k7);

        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = (err / n as f64).sqrt();

        let fac11 = err.powf(EXPO1);
        let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(FAC_GROW, FAC_SHRINK);

        if err <= 1.0 {
            *steps_taken += 1;
            facold = err.max(1e-4);
            if y_new.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { t: t + h });
            }
            let mut clipped = false;
            for (i, v) in y_new.iter_mut().enumerate() {
                if *v < 0.0 {
                    if *v < -opts.atol {
                        return Err(Error::NegativeState {
                            index: i,
                            value: *v,
                        });
                    }
                    *v = 0.0;
                    clipped = true;
                }
            }
            let cont = [
                y.to_vec(),
                (0..n).map(|i| y_new[i] - y[i]).collect(),
                (0..n).map(|i| h * k1[i] - (y_new[i] - y[i])).collect(),
                (0..n)
                    .map(|i| (y_new[i] - y[i]) - h * k7[i] - (h * k1[i] - (y_new[i] - y[i])))
                    .collect(),
                (0..n)
                    .map(|i| {
                        h * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i])
                    })
                    .collect(),
            ];
            sink.after_step(t, h, &cont, &y_new, t_scale);

            // Land exactly on the segment end so roundoff cannot leave a
            // 1-ulp residual step behind.
            t = if last { t1 } else { t + h };
            y.copy_from_slice(&y_new);
            if clipped {
                rhs(y, &mut k1);
            } else {
                k1.copy_from_slice(&k7);
            }
            let mut h_new = h / fac;
            if rejected {
                h_new = h_new.min(h);
            }
            rejected = false;
            h = h_new;
        } else {
            h /= (fac11 / SAFE).min(FAC_SHRINK);
            rejected = true;
        }
    }
    Ok(())
}

/// Group schedule events by identical time, keeping only those before `t_end`.
fn event_groups(schedule: &Schedule, t_end: f64) -> Vec<(f64, Vec<Event>)> {
    let mut groups: Vec<(f64, Vec<Event>)> = Vec::new();
    for &e in schedule.events() {
        if e.time >= t_end {
            continue;
        }
        match groups.last_mut() {
            Some((t, g)) if *t == e.time => g.push(e),
            _ => groups.push((e.time, vec![e])),
        }
    }
    groups
}

fn apply_closed_event(
    closed: &ClosedLoop,
    dist: &mut Option<InputDisturbance>,
    event: &Event,
) -> Result<ClosedLoop> {
    let mut params = *closed.params();
    match event.target {
        Target::Mu => {
            params.mu = event.value;
            closed.with_params(params)
        }
        Target::Alpha => {
            params.alpha = event.value;
            closed.with_params(params)
        }
        Target::Gain => {
            params.k = event.value;
            closed.with_params(params)
        }
        Target::Theta => closed.with_theta(event.value),
        Target::RateConstant(i) => closed.with_plant_rate(i, event.value),
        Target::DisturbanceAmplitude(i) => {
            let dd = dist.as_mut().ok_or_else(|| {
                Error::Schedule("disturbance event on a run without a disturbance model".into())
            })?;
            if i >= dd.d.len() {
                return Err(Error::Schedule(format!(
                    "disturbance channel {i} out of range"
                )));
            }
            if event.value < 0.0 {
                return Err(Error::Schedule(format!(
                    "disturbance amplitude must be nonnegative, got {}",
                    event.value
                )));
            }
            dd.d[i] = event.value;
            Ok(closed.clone())
        }
    }
}

/// Integrate a closed loop under a parameter schedule.
///
/// The initial state is the plant's initial concentrations with `v0`
/// appended. Negative undershoot within `atol` of zero is clipped to zero;
/// anything larger is an error.
pub fn integrate(
    closed: &ClosedLoop,
    disturbance: Option<&InputDisturbance>,
    schedule: &Schedule,
    t_end: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    opts.validate()?;
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "t_end must be positive and finite, got {t_end}"
        )));
    }
    if let Some(d) = disturbance {
        if d.e.nrows() != closed.plant().dim() {
            return Err(Error::DimensionMismatch(format!(
                "disturbance E has {} rows, plant has {} states",
                d.e.nrows(),
                closed.plant().dim()
            )));
        }
    }

    let mut current = closed.clone();
    let mut dist = disturbance.cloned();
    let mut state: Vec<f64> = current.initial_state().iter().copied().collect();
    let names = current.state_names();
    let plant_dim = current.plant().dim();

    let mut sink = SampleSink::new(t_end, opts.samples, opts.keep_raw);
    sink.start(0.0, &state);
    let mut steps = 0usize;

    let groups = event_groups(schedule, t_end);
    let mut t = 0.0;
    let mut boundaries: Vec<f64> = groups.iter().map(|(t, _)| *t).collect();
    boundaries.push(t_end);

    for (seg, &t_next) in boundaries.iter().enumerate() {
        if t_next > t {
            let net = current.network().clone();
            let forcing = dist.as_ref().map(InputDisturbance::forcing);
            let rhs = |x: &[f64], out: &mut [f64]| {
                net.rhs_into_unchecked(x, out);
                if let Some(f) = &forcing {
                    for i in 0..plant_dim {
                        out[i] += f[i];
                    }
                }
            };
            dopri5_segment(rhs, &mut state, t, t_next, opts, &mut sink, &mut steps)?;
            t = t_next;
        }
        if seg < groups.len() {
            for e in &groups[seg].1 {
                current = apply_closed_event(&current, &mut dist, e)?;
            }
        }
    }

    debug_assert_eq!(sink.next, sink.grid.len());
    Ok(Trajectory {
        times: sink.grid,
        names,
        data: sink.rows,
        raw: opts.keep_raw.then_some(RawTrace {
            times: sink.raw_times,
            data: sink.raw_rows,
        }),
    })
}

/// Integrate a plain network (no controller structure). Only
/// `Target::RateConstant` events are meaningful here; the rate index
/// addresses the network's own reaction list.
pub fn integrate_network(
    network: &Network,
    schedule: &Schedule,
    t_end: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    opts.validate()?;
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "t_end must be positive and finite, got {t_end}"
        )));
    }
    let mut net = network.clone();
    let mut state: Vec<f64> = net.initial_state().iter().copied().collect();
    let names = net.species_names();

    let mut sink = SampleSink::new(t_end, opts.samples, opts.keep_raw);
    sink.start(0.0, &state);
    let mut steps = 0usize;

    let groups = event_groups(schedule, t_end);
    let mut t = 0.0;
    let mut boundaries: Vec<f64> = groups.iter().map(|(t, _)| *t).collect();
    boundaries.push(t_end);

    for (seg, &t_next) in boundaries.iter().enumerate() {
        if t_next > t {
            let frozen = net.clone();
            let rhs = |x: &[f64], out: &mut [f64]| frozen.rhs_into_unchecked(x, out);
            dopri5_segment(rhs, &mut state, t, t_next, opts, &mut sink, &mut steps)?;
            t = t_next;
        }
        if seg < groups.len() {
            for e in &groups[seg].1 {
                match e.target {
                    Target::RateConstant(i) => net.set_rate_constant(i, e.value)?,
                    other => {
                        return Err(Error::Schedule(format!(
                            "target {other:?} is not applicable to a plain network run"
                        )))
                    }
                }
            }
        }
    }

    debug_assert_eq!(sink.next, sink.grid.len());
    Ok(Trajectory {
        times: sink.grid,
        names,
        data: sink.rows,
        raw: opts.keep_raw.then_some(RawTrace {
            times: sink.raw_times,
            data: sink.raw_rows,
        }),
    })
}

/// Running averages `(1/t)∫₀ᵗ x ds` of every column, by trapezoidal
/// accumulation on the output grid. The row at `t = 0` is the initial state.
pub fn time_average(traj: &Trajectory) -> Trajectory {
    let n = traj.n_cols();
    let rows = traj.n_rows();
    let mut data = Vec::with_capacity(n * rows);
    data.extend_from_slice(traj.row(0));
    let mut acc = vec![0.0; n];
    for i in 1..rows {
        let dt = traj.times()[i] - traj.times()[i - 1];
        let prev = traj.row(i - 1);
        let cur = traj.row(i);
        for j in 0..n {
            acc[j] += 0.5 * dt * (prev[j] + cur[j]);
        }
        let t = traj.times()[i];
        for j in 0..n {
            data.push(if t > 0.0 { acc[j] / t } else { cur[j] });
        }
    }
    Trajectory {
        times: traj.times().to_vec(),
        names: traj.names().to_vec(),
        data,
        raw: None,
    }
}

/// Instantaneous controller power, its integral, and running average.
#[derive(Debug, Clone)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    /// `P(t) = κ_r·(reference propensity) + κ_m·αvy + κ_a·kv`.
    pub power: Vec<f64>,
    /// `E(t) = ∫₀ᵗ P ds` (trapezoidal).
    pub cumulative: Vec<f64>,
}

impl EnergyTrace {
    /// `E(t)/t` trace; the value at `t = 0` is `P(0)`.
    pub fn running_average(&self) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.cumulative)
            .enumerate()
            .map(|(i, (&t, &e))| if t > 0.0 { e / t } else { self.power[i] })
            .collect()
    }

    /// Average power over the trailing `fraction` of the horizon — the
    /// long-run average estimator used to compare against the stationary
    /// power formula.
    pub fn tail_average(&self, fraction: f64) -> f64 {
        let t_end = *self.times.last().unwrap();
        let t_start = t_end * (1.0 - fraction.clamp(1e-6, 1.0));
        let i = self.times.partition_point(|&t| t < t_start);
        let i = i.min(self.times.len() - 2);
        let span = t_end - self.times[i];
        if span <= 0.0 {
            return *self.power.last().unwrap();
        }
        (self.cumulative.last().unwrap() - self.cumulative[i]) / span
    }
}

/// Power trace of a simulated closed loop under its (constant) parameter
/// set. For scheduled runs evaluate segment by segment with the parameters
/// in force there.
pub fn power_trace(
    closed: &ClosedLoop,
    traj: &Trajectory,
    costs: &MetabolicCosts,
) -> Result<EnergyTrace> {
    let v_col = closed.v_index();
    let y_col = closed.output_index();
    if traj.n_cols() != closed.dim() {
        return Err(Error::DimensionMismatch(format!(
            "trajectory has {} columns, closed loop has {} states",
            traj.n_cols(),
            closed.dim()
        )));
    }
    let p = closed.params();
    let reference_rate = |v: f64| -> f64 {
        match closed.hill() {
            None => p.alpha * p.mu * v,
            Some(h) => p.alpha * h.theta * p.mu * v / (h.theta + v),
        }
    };
    let mut power = Vec::with_capacity(traj.n_rows());
    for i in 0..traj.n_rows() {
        let row = traj.row(i);
        let (v, y) = (row[v_col], row[y_col]);
        power.push(
            costs.kappa_r * reference_rate(v)
                + costs.kappa_m * p.alpha * v * y
                + costs.kappa_a * p.k * v,
        );
    }
    let mut cumulative = Vec::with_capacity(power.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for i in 1..power.len() {
        let dt = traj.times()[i] - traj.times()[i - 1];
        acc += 0.5 * dt * (power[i] + power[i - 1]);
        cumulative.push(acc);
    }
    Ok(EnergyTrace {
        times: traj.times().to_vec(),
        power,
        cumulative,
    })
}
