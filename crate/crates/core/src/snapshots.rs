//! Excitation signals and snapshot trajectories.
//!
//! A [`SnapshotEnsemble`] holds `N_d + 1` states, `N_d` inputs and `N_d`
//! scheduling-parameter samples: the final state is the successor of the last
//! input, which is what the shifted-state matrix needs.
//!
//! On disk an ensemble is a CSV file:
//!
//! ```text
//! # dt=0.001
//! k,theta,u_1,x_1,x_2
//! 0,<theta_0>,<u_0>,<x_0 1>,<x_0 2>
//! ...
//! N_d,,,<x_N 1>,<x_N 2>
//! ```
//!
//! `#` comment lines may precede the header. The sampling time is carried in a
//! `# dt=<value>` comment because the column layout has no slot for it.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::warn;
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::plants::Dynamics;
use crate::scalar::Real;

/// Default magnitude bound used by [`collect_from_plant`] to abort runaway runs.
pub const DEFAULT_DIVERGENCE_BOUND: f64 = 1e6;

/// Uniformly sampled vector-valued signal.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal<T> {
    dt: T,
    samples: Vec<DVector<T>>,
}

impl<T: Real> Signal<T> {
    pub fn new(dt: T, samples: Vec<DVector<T>>) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite_value() {
            return Err(Error::InvalidArgument(format!("signal dt must be positive and finite, got {dt}")));
        }
        let Some(first) = samples.first() else {
            return Err(Error::InvalidArgument("signal has no samples".into()));
        };
        let n_u = first.len();
        if n_u == 0 {
            return Err(Error::InvalidArgument("signal samples must have dimension >= 1".into()));
        }
        for (k, s) in samples.iter().enumerate() {
            if s.len() != n_u {
                return Err(Error::DimensionMismatch(format!(
                    "signal sample {k} has dimension {}, expected {n_u}",
                    s.len()
                )));
            }
            if s.iter().any(|v| !v.is_finite_value()) {
                return Err(Error::NonFinite(format!("signal sample {k}")));
            }
        }
        Ok(Self { dt, samples })
    }

    /// Builds a single-channel signal from scalar samples.
    pub fn from_scalars(dt: T, values: &[T]) -> Result<Self> {
        Self::new(dt, values.iter().map(|&v| DVector::from_element(1, v)).collect())
    }

    pub fn zeros(dt: T, len: usize, n_u: usize) -> Result<Self> {
        Self::new(dt, vec![DVector::zeros(n_u); len])
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn samples(&self) -> &[DVector<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_u(&self) -> usize {
        self.samples[0].len()
    }

    /// Adds a constant vector to every sample (e.g. a trim input).
    pub fn offset(mut self, bias: &DVector<T>) -> Result<Self> {
        if bias.len() != self.n_u() {
            return Err(Error::DimensionMismatch(format!(
                "offset has dimension {}, signal has {}",
                bias.len(),
                self.n_u()
            )));
        }
        for s in &mut self.samples {
            *s += bias;
        }
        Ok(self)
    }

    pub fn scaled(mut self, factor: T) -> Self {
        for s in &mut self.samples {
            *s *= factor;
        }
        self
    }

    /// Elementwise sum of two signals of equal length, dimension and dt.
    pub fn add(&self, other: &Signal<T>) -> Result<Self> {
        if self.len() != other.len() || self.n_u() != other.n_u() {
            return Err(Error::DimensionMismatch("signals differ in length or dimension".into()));
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect();
        Ok(Self { dt: self.dt, samples })
    }
}

/// Linear-frequency sweep `amplitude * sin(2 pi (f0 t + (f1 - f0) t^2 / (2 duration)))`
/// sampled at `t = k dt` for `k = 0..=floor(duration / dt)`.
pub fn generate_chirp<T: Real>(f0: f64, f1: f64, duration: f64, dt: f64, amplitude: f64) -> Result<Signal<T>> {
    generate_chirp_with_phase(f0, f1, duration, dt, amplitude, 0.0)
}

/// Chirp with an additional constant phase offset in radians.
pub fn generate_chirp_with_phase<T: Real>(
    f0: f64,
    f1: f64,
    duration: f64,
    dt: f64,
    amplitude: f64,
    phase: f64,
) -> Result<Signal<T>> {
    for (name, v) in [("f0", f0), ("f1", f1), ("duration", duration), ("dt", dt), ("amplitude", amplitude), ("phase", phase)] {
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("chirp {name} must be finite, got {v}")));
        }
    }
    if f0 <= 0.0 {
        return Err(Error::InvalidArgument(format!("chirp f0 must be positive, got {f0}")));
    }
    if f1 < f0 {
        return Err(Error::InvalidArgument(format!("chirp f1 ({f1}) must be >= f0 ({f0})")));
    }
    if duration <= 0.0 || dt <= 0.0 {
        return Err(Error::InvalidArgument("chirp duration and dt must be positive".into()));
    }
    if dt >= 1.0 / (2.0 * f1) {
        return Err(Error::InvalidArgument(format!(
            "chirp dt = {dt} violates the Nyquist limit 1/(2 f1) = {}",
            1.0 / (2.0 * f1)
        )));
    }
    // Guard the floor against quotients like 10/0.001 = 9999.999...
    let steps = (duration / dt * (1.0 + 1e-12)).floor() as usize;
    let sweep = (f1 - f0) / (2.0 * duration);
    let values: Vec<T> = (0..=steps)
        .map(|k| {
            let t = k as f64 * dt;
            let v = amplitude * (2.0 * std::f64::consts::PI * (f0 * t + sweep * t * t) + phase).sin();
            T::lit(v)
        })
        .collect();
    Signal::from_scalars(T::lit(dt), &values)
}

/// Time-indexed snapshots `{u_k, x_k, theta_k}` plus the terminal state.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotEnsemble<T> {
    dt: T,
    states: Vec<DVector<T>>,
    inputs: Vec<DVector<T>>,
    theta: Vec<T>,
}

impl<T: Real> SnapshotEnsemble<T> {
    pub fn new(dt: T, states: Vec<DVector<T>>, inputs: Vec<DVector<T>>, theta: Vec<T>) -> Result<Self> {
        if !(dt > T::zero()) || !dt.is_finite_value() {
            return Err(Error::InvalidArgument(format!("ensemble dt must be positive, got {dt}")));
        }
        if inputs.is_empty() {
            return Err(Error::InvalidArgument("ensemble needs at least one input sample".into()));
        }
        if states.len() != inputs.len() + 1 {
            return Err(Error::DimensionMismatch(format!(
                "ensemble has {} states and {} inputs; expected exactly one more state than inputs",
                states.len(),
                inputs.len()
            )));
        }
        if theta.len() != inputs.len() {
            return Err(Error::DimensionMismatch(format!(
                "ensemble has {} theta samples and {} inputs",
                theta.len(),
                inputs.len()
            )));
        }
        let n_x = states[0].len();
        let n_u = inputs[0].len();
        if n_x == 0 || n_u == 0 {
            return Err(Error::InvalidArgument("state and input dimensions must be >= 1".into()));
        }
        for (k, x) in states.iter().enumerate() {
            if x.len() != n_x {
                return Err(Error::DimensionMismatch(format!("state {k} has dimension {}, expected {n_x}", x.len())));
            }
            if x.iter().any(|v| !v.is_finite_value()) {
                return Err(Error::NonFinite(format!("state {k}")));
            }
        }
        for (k, u) in inputs.iter().enumerate() {
            if u.len() != n_u {
                return Err(Error::DimensionMismatch(format!("input {k} has dimension {}, expected {n_u}", u.len())));
            }
            if u.iter().any(|v| !v.is_finite_value()) {
                return Err(Error::NonFinite(format!("input {k}")));
            }
        }
        if let Some(k) = theta.iter().position(|t| !t.is_finite_value()) {
            return Err(Error::NonFinite(format!("theta {k}")));
        }
        Ok(Self { dt, states, inputs, theta })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    /// `N_d + 1` states.
    pub fn states(&self) -> &[DVector<T>] {
        &self.states
    }

    /// `N_d` inputs.
    pub fn inputs(&self) -> &[DVector<T>] {
        &self.inputs
    }

    pub fn theta(&self) -> &[T] {
        &self.theta
    }

    /// Number of transitions `N_d`.
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn n_x(&self) -> usize {
        self.states[0].len()
    }

    pub fn n_u(&self) -> usize {
        self.inputs[0].len()
    }

    /// Splits into transitions `0..k` and `k..N_d`; state `k` is shared.
    pub fn split_at(&self, k: usize) -> Result<(Self, Self)> {
        if k == 0 || k >= self.len() {
            return Err(Error::InvalidArgument(format!("split index {k} must lie in 1..{}", self.len())));
        }
        let head = Self {
            dt: self.dt,
            states: self.states[..=k].to_vec(),
            inputs: self.inputs[..k].to_vec(),
            theta: self.theta[..k].to_vec(),
        };
        let tail = Self {
            dt: self.dt,
            states: self.states[k..].to_vec(),
            inputs: self.inputs[k..].to_vec(),
            theta: self.theta[k..].to_vec(),
        };
        Ok((head, tail))
    }

    /// Returns a copy with every theta sample replaced by `f(theta)`.
    pub fn map_theta(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            dt: self.dt,
            states: self.states.clone(),
            inputs: self.inputs.clone(),
            theta: self.theta.iter().map(|&t| f(t)).collect(),
        }
    }
}

fn parse_dt_comment(line: &str) -> Option<f64> {
    let body = line.trim_start_matches('#').trim();
    let value = body.strip_prefix("dt")?.trim_start().strip_prefix('=')?;
    value.trim().parse().ok()
}

fn parse_field<T: Real>(path: &Path, line: usize, column: &str, raw: &str) -> Result<T> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::format(path, line, format!("column {column}: cannot parse {raw:?} as a number")))?;
    if !v.is_finite() {
        return Err(Error::format(path, line, format!("column {column}: non-finite value {raw:?}")));
    }
    Ok(T::lit(v))
}

/// Reads a snapshot CSV file.
pub fn load_snapshots<T: Real>(path: impl AsRef<Path>) -> Result<SnapshotEnsemble<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);

    // Leading comments carry metadata; everything after them is CSV.
    let mut dt = None;
    let mut skipped = 0usize;
    let mut body = String::new();
    loop {
        let mut line = String::new();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        if line.trim_start().starts_with('#') {
            skipped += 1;
            if let Some(v) = parse_dt_comment(&line) {
                dt = Some(v);
            }
            continue;
        }
        body = line;
        break;
    }
    reader.read_to_string(&mut body).map_err(|e| Error::io(path, e))?;

    let dt = match dt {
        Some(v) => v,
        None => {
            warn!("{}: no `# dt=` comment, assuming dt = 1", path.display());
            1.0
        }
    };

    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let header = csv
        .headers()
        .map_err(|e| Error::format(path, skipped + 1, e.to_string()))?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 4 || names[0] != "k" || names[1] != "theta" {
        return Err(Error::format(path, skipped + 1, "header must start with `k,theta` followed by u_* and x_* columns"));
    }
    let n_u = names[2..].iter().take_while(|n| n.starts_with("u_")).count();
    let n_x = names.len() - 2 - n_u;
    for (j, name) in names[2..2 + n_u].iter().enumerate() {
        if *name != format!("u_{}", j + 1) {
            return Err(Error::format(path, skipped + 1, format!("expected column u_{}, found {name}", j + 1)));
        }
    }
    for (j, name) in names[2 + n_u..].iter().enumerate() {
        if *name != format!("x_{}", j + 1) {
            return Err(Error::format(path, skipped + 1, format!("expected column x_{}, found {name}", j + 1)));
        }
    }
    if n_u == 0 || n_x == 0 {
        return Err(Error::format(path, skipped + 1, "need at least one u_* and one x_* column"));
    }

    let mut states = Vec::new();
    let mut inputs = Vec::new();
    let mut theta = Vec::new();
    let mut terminal_seen = false;
    for (idx, record) in csv.records().enumerate() {
        let line = skipped + 2 + idx;
        let record = record.map_err(|e| Error::format(path, line, e.to_string()))?;
        if terminal_seen {
            return Err(Error::format(path, line, "rows after the terminal state row"));
        }
        let k: usize = record[0]
            .parse()
            .map_err(|_| Error::format(path, line, format!("bad time index {:?}", &record[0])))?;
        if k != idx {
            return Err(Error::format(path, line, format!("time index {k} out of sequence, expected {idx}")));
        }
        let x = (0..n_x)
            .map(|j| parse_field::<T>(path, line, names[2 + n_u + j], &record[2 + n_u + j]))
            .collect::<Result<Vec<_>>>()?;
        states.push(DVector::from_vec(x));

        let theta_raw = &record[1];
        let u_empty = (0..n_u).all(|j| record[2 + j].is_empty());
        if theta_raw.is_empty() && u_empty {
            terminal_seen = true;
            continue;
        }
        if theta_raw.is_empty() || (0..n_u).any(|j| record[2 + j].is_empty()) {
            return Err(Error::format(path, line, "theta and input fields must be all present or all empty"));
        }
        theta.push(parse_field::<T>(path, line, "theta", theta_raw)?);
        let u = (0..n_u)
            .map(|j| parse_field::<T>(path, line, names[2 + j], &record[2 + j]))
            .collect::<Result<Vec<_>>>()?;
        inputs.push(DVector::from_vec(u));
    }
    if !terminal_seen {
        return Err(Error::format(path, skipped + 2 + states.len(), "missing terminal state row with empty theta/u fields"));
    }
    SnapshotEnsemble::new(T::lit(dt), states, inputs, theta).map_err(|e| Error::format(path, 0, e.to_string()))
}

/// Formats a value with 17 significant digits, enough to round-trip an `f64`.
pub(crate) fn fmt_num<T: Real>(v: T) -> String {
    format!("{:.16e}", v.as_f64())
}

/// Writes an ensemble to CSV, creating or truncating `path`.
pub fn save_snapshots<T: Real>(ensemble: &SnapshotEnsemble<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);

    writeln!(out, "# dt={}", fmt_num(ensemble.dt)).map_err(io)?;
    let mut header = vec!["k".to_string(), "theta".to_string()];
    header.extend((1..=ensemble.n_u()).map(|j| format!("u_{j}")));
    header.extend((1..=ensemble.n_x()).map(|j| format!("x_{j}")));
    writeln!(out, "{}", header.join(",")).map_err(io)?;

    for (k, x) in ensemble.states.iter().enumerate() {
        let mut row = vec![k.to_string()];
        if k < ensemble.len() {
            row.push(fmt_num(ensemble.theta[k]));
            row.extend(ensemble.inputs[k].iter().map(|&v| fmt_num(v)));
        } else {
            row.push(String::new());
            row.extend(std::iter::repeat_n(String::new(), ensemble.n_u()));
        }
        row.extend(x.iter().map(|&v| fmt_num(v)));
        writeln!(out, "{}", row.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// State-derived scheduling rule `theta = -asin(x[state_index] / reference_speed)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcsinRule<T> {
    pub state_index: usize,
    pub reference_speed: T,
}

impl<T: Real> ArcsinRule<T> {
    pub fn eval(&self, x: &DVector<T>) -> Result<T> {
        let v = *x.get(self.state_index).ok_or_else(|| {
            Error::DimensionMismatch(format!(
                "theta rule reads state {} but the state has dimension {}",
                self.state_index,
                x.len()
            ))
        })?;
        let ratio = v / self.reference_speed;
        if !(ratio.abs() <= T::one()) {
            return Err(Error::InvalidArgument(format!(
                "arcsin argument {ratio} outside [-1, 1] (state {} = {v})",
                self.state_index
            )));
        }
        Ok(-ratio.asin())
    }
}

/// Where the scheduling parameter comes from while collecting data.
#[derive(Clone, Debug, PartialEq)]
pub enum ThetaSource<T> {
    Fixed(T),
    /// Evaluated from the current state at every step.
    Rule(ArcsinRule<T>),
    /// Prescribed trajectory; must cover every transition.
    Sequence(Vec<T>),
}

/// Simulates `plant` under `input` from `x0` and records the snapshots.
///
/// Uses the first `input.len() - 1` samples as inputs, so an input signal of
/// length `N_d + 1` yields `N_d` transitions.
pub fn collect_from_plant<T: Real, P: Dynamics<T> + ?Sized>(
    plant: &P,
    input: &Signal<T>,
    x0: &DVector<T>,
    theta_source: &ThetaSource<T>,
) -> Result<SnapshotEnsemble<T>> {
    collect_from_plant_bounded(plant, input, x0, theta_source, T::lit(DEFAULT_DIVERGENCE_BOUND))
}

pub fn collect_from_plant_bounded<T: Real, P: Dynamics<T> + ?Sized>(
    plant: &P,
    input: &Signal<T>,
    x0: &DVector<T>,
    theta_source: &ThetaSource<T>,
    divergence_bound: T,
) -> Result<SnapshotEnsemble<T>> {
    if input.n_u() != plant.n_u() {
        return Err(Error::DimensionMismatch(format!(
            "input has dimension {}, plant expects {}",
            input.n_u(),
            plant.n_u()
        )));
    }
    if x0.len() != plant.n_x() {
        return Err(Error::DimensionMismatch(format!(
            "x0 has dimension {}, plant expects {}",
            x0.len(),
            plant.n_x()
        )));
    }
    let rel = ((input.dt() - plant.dt()) / plant.dt()).abs();
    if rel > T::lit(1e-9) {
        return Err(Error::InvalidArgument(format!(
            "input dt {} differs from plant dt {}",
            input.dt(),
            plant.dt()
        )));
    }
    let n_d = input.len().saturating_sub(1);
    if n_d == 0 {
        return Err(Error::InvalidArgument("input signal needs at least two samples".into()));
    }
    if let ThetaSource::Sequence(seq) = theta_source {
        if seq.len() < n_d {
            return Err(Error::DimensionMismatch(format!(
                "theta sequence has {} samples, need {n_d}",
                seq.len()
            )));
        }
    }

    let mut states = Vec::with_capacity(n_d + 1);
    let mut theta = Vec::with_capacity(n_d);
    let mut x = x0.clone();
    for k in 0..n_d {
        let th = match theta_source {
            ThetaSource::Fixed(v) => *v,
            ThetaSource::Rule(rule) => rule.eval(&x)?,
            ThetaSource::Sequence(seq) => seq[k],
        };
        let next = plant.step(&x, &input.samples()[k], th)?;
        if let Some(v) = next.iter().find(|v| !(v.abs() <= divergence_bound)) {
            return Err(Error::Diverged {
                step: k + 1,
                detail: format!("state entry {v} exceeds bound {divergence_bound}"),
            });
        }
        states.push(std::mem::replace(&mut x, next));
        theta.push(th);
    }
    states.push(x);
    let inputs = input.samples()[..n_d].to_vec();
    SnapshotEnsemble::new(plant.dt(), states, inputs, theta)
}
