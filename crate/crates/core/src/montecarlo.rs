//! Quantum-jump unraveling of a Lindblad model and coincidence counting on
//! the resulting click records.
//!
//! Between jumps the unnormalized state evolves under
//! `H_eff = H − (i/2) Σ rate·C†C`. A jump happens when `‖ψ‖²` falls below a
//! uniform random threshold; the channel is drawn with probability
//! proportional to `rate·‖Cψ‖²`.
//!
//! The no-jump propagator `exp(−i H_eff h)` is precomputed exactly for the
//! coarse step `h = dt` and for the dyadic substeps `dt/2ᵏ`. A step whose end
//! state falls below the threshold is split in halves recursively, so jump
//! times are located to `dt/2ᴷ` without any time-discretization error in the
//! evolution itself.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::{build_liouvillian, steady_state, CollapseTerm, LindbladModel};
use crate::linalg::expm;
use crate::opalg::{annihilation, embed, sigma_minus, trace_of_product, HilbertSpace, OperatorMatrix};
use crate::sensors::{DriveConfig, MIN_POPULATION};

/// Default coarse step. The evolution is exact, so this only sets how often
/// observables are sampled and how much refinement a jump costs.
pub const DEFAULT_DT: f64 = 0.05;

/// Default number of dyadic refinements of a step when locating a jump.
pub const DEFAULT_REFINEMENTS: u32 = 16;

/// Default zero-delay coincidence window in units of `1/Γ`.
pub const DEFAULT_BIN_WIDTH: f64 = 0.05;

/// Clicks per channel below which a coincidence estimate is flagged.
pub const MIN_CLICKS: usize = 1000;

/// One detection event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickEvent {
    pub time: f64,
    /// Index into [`ClickStream::channels`].
    pub channel: usize,
}

/// Time-ordered record of the jumps of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClickStream {
    pub events: Vec<ClickEvent>,
    /// Labels of the model's collapse terms.
    pub channels: Vec<String>,
    pub duration: f64,
    pub seed: u64,
    pub fingerprint: String,
}

impl ClickStream {
    pub fn label(&self, event: &ClickEvent) -> &str {
        &self.channels[event.channel]
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == label)
    }

    /// Click times on one channel.
    pub fn times(&self, label: &str) -> Result<Vec<f64>> {
        let k = self
            .channel_index(label)
            .ok_or_else(|| Error::InvalidConfig(format!("no channel named {label:?}")))?;
        Ok(self.events.iter().filter(|e| e.channel == k).map(|e| e.time).collect())
    }

    pub fn count(&self, label: &str) -> Result<usize> {
        Ok(self.times(label)?.len())
    }

    /// Writes `time,channel` rows with 12 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time,channel")?;
        for e in &self.events {
            writeln!(out, "{:.11e},{}", e.time, self.label(e))?;
        }
        Ok(())
    }
}

/// Settings of a trajectory beyond `(duration, dt, seed)`.
#[derive(Debug, Clone)]
pub struct TrajectoryOptions {
    /// Initial state; the first basis state when `None`.
    pub initial: Option<Array1<Complex64>>,
    /// Evolution time discarded before recording starts.
    pub burn_in: f64,
    /// Operators whose expectation is averaged over the recorded time.
    pub observables: Vec<OperatorMatrix>,
    /// Channels to record; all when `None`.
    pub record: Option<Vec<String>>,
    pub refinements: u32,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self { initial: None, burn_in: 0.0, observables: Vec::new(), record: None, refinements: DEFAULT_REFINEMENTS }
    }
}

/// Click stream plus observable time averages.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub stream: ClickStream,
    pub averages: Vec<Complex64>,
}

/// Dense row-major complex matrix acting on state vectors.
#[derive(Debug, Clone)]
struct Dense {
    d: usize,
    data: Vec<Complex64>,
}

impl Dense {
    fn from(a: &Array2<Complex64>) -> Self {
        Self { d: a.nrows(), data: a.iter().copied().collect() }
    }

    fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.d)) {
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *o = acc;
        }
    }
}

fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

/// Precomputed propagators and jump operators of a model.
#[derive(Debug, Clone)]
pub struct Unraveling {
    dim: usize,
    dt: f64,
    /// `steps[k] = exp(−i H_eff dt/2ᵏ)` for `k = 0..=refinements`.
    steps: Vec<Dense>,
    jumps: Vec<Dense>,
    rates: Vec<f64>,
    labels: Vec<String>,
    fingerprint: String,
}

impl Unraveling {
    pub fn new(model: &LindbladModel, dt: f64, refinements: u32) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("time step must be positive, got {dt}")));
        }
        if refinements > 40 {
            return Err(Error::InvalidConfig(format!("at most 40 refinements, got {refinements}")));
        }
        let d = model.dim();
        let mut h_eff = model.hamiltonian().data().clone();
        for term in model.collapse_terms() {
            let c = term.operator.data();
            let cdc = c.t().mapv(|z| z.conj()).dot(c);
            h_eff = h_eff - cdc.mapv(|z| z * Complex64::new(0.0, 0.5 * term.rate));
        }
        let steps = (0..=refinements)
            .map(|k| {
                let h = dt / 2f64.powi(k as i32);
                Dense::from(&expm(&h_eff.mapv(|z| z * Complex64::new(0.0, -h))))
            })
            .collect();
        Ok(Self {
            dim: d,
            dt,
            steps,
            jumps: model.collapse_terms().iter().map(|t| Dense::from(t.operator.data())).collect(),
            rates: model.collapse_terms().iter().map(|t| t.rate).collect(),
            labels: model.collapse_terms().iter().map(|t| t.label.clone()).collect(),
            fingerprint: fingerprint(model),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn refinements(&self) -> u32 {
        self.steps.len() as u32 - 1
    }

    /// Runs one trajectory of `burn_in + duration`.
    pub fn run(&self, duration: f64, seed: u64, opts: &TrajectoryOptions) -> Result<Trajectory> {
        if !(duration > 0.0 && duration.is_finite()) || !(opts.burn_in >= 0.0 && opts.burn_in.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "duration must be positive and burn-in non-negative, got {duration} and {}",
                opts.burn_in
            )));
        }
        if opts.refinements != self.refinements() {
            return Err(Error::InvalidConfig(format!(
                "options ask for {} refinements but the propagators were built for {}",
                opts.refinements,
                self.refinements()
            )));
        }
        let record: Vec<bool> = match &opts.record {
            None => vec![true; self.labels.len()],
            Some(list) => {
                for l in list {
                    if !self.labels.contains(l) {
                        return Err(Error::InvalidConfig(format!("no channel named {l:?}")));
                    }
                }
                self.labels.iter().map(|l| list.contains(l)).collect()
            }
        };
        let observables: Vec<Dense> = opts
            .observables
            .iter()
            .map(|o| {
                if o.dim() == self.dim {
                    Ok(Dense::from(o.data()))
                } else {
                    Err(Error::DimensionMismatch { expected: self.dim, found: o.dim() })
                }
            })
            .collect::<Result<_>>()?;
        let mut psi: Vec<Complex64> = match &opts.initial {
            Some(v) if v.len() != self.dim => return Err(Error::DimensionMismatch { expected: self.dim, found: v.len() }),
            Some(v) => v.to_vec(),
            None => {
                let mut v = vec![Complex64::new(0.0, 0.0); self.dim];
                v[0] = Complex64::new(1.0, 0.0);
                v
            }
        };
        let n0 = norm_sqr(&psi).sqrt();
        if !(n0 > 0.0 && n0.is_finite()) {
            return Err(Error::InvalidConfig("initial state must have a finite nonzero norm".into()));
        }
        psi.iter_mut().for_each(|z| *z /= n0);

        let burn_steps = (opts.burn_in / self.dt).ceil() as u64;
        let rec_steps = (duration / self.dt).ceil() as u64;
        let mut run = Run {
            u: self,
            psi,
            scratch: vec![Complex64::new(0.0, 0.0); self.dim],
            rng: ChaCha8Rng::seed_from_u64(seed),
            threshold: 0.0,
            tick: 0,
            record_from: burn_steps << self.refinements(),
            record: &record,
            events: Vec::new(),
        };
        run.threshold = run.draw_threshold();
        let mut sums = vec![Complex64::new(0.0, 0.0); observables.len()];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.dim];
        for step in 0..burn_steps + rec_steps {
            run.advance(0)?;
            if step >= burn_steps && !observables.is_empty() {
                let n = norm_sqr(&run.psi);
                for (s, o) in sums.iter_mut().zip(&observables) {
                    o.apply(&run.psi, &mut buf);
                    let v: Complex64 = run.psi.iter().zip(&buf).map(|(a, b)| a.conj() * b).sum();
                    *s += v / n;
                }
            }
        }
        let offset = burn_steps as f64 * self.dt;
        let events = run.events.into_iter().map(|e| ClickEvent { time: e.time - offset, channel: e.channel }).collect();
        Ok(Trajectory {
            stream: ClickStream {
                events,
                channels: self.labels.clone(),
                duration: rec_steps as f64 * self.dt,
                seed,
                fingerprint: self.fingerprint.clone(),
            },
            averages: sums.into_iter().map(|s| s / rec_steps as f64).collect(),
        })
    }
}

struct Run<'a> {
    u: &'a Unraveling,
    psi: Vec<Complex64>,
    scratch: Vec<Complex64>,
    rng: ChaCha8Rng,
    threshold: f64,
    /// Elapsed time in units of the finest substep.
    tick: u64,
    record_from: u64,
    record: &'a [bool],
    events: Vec<ClickEvent>,
}

impl Run<'_> {
    fn draw_threshold(&mut self) -> f64 {
        loop {
            let r: f64 = self.rng.random();
            if r > 0.0 {
                return r;
            }
        }
    }

    fn time(&self) -> f64 {
        self.tick as f64 * self.u.dt / 2f64.powi(self.u.refinements() as i32)
    }

    /// Advances by `dt/2^level`, splitting the interval when the threshold
    /// is crossed inside it.
    fn advance(&mut self, level: u32) -> Result<()> {
        self.u.steps[level as usize].apply(&self.psi, &mut self.scratch);
        let n = norm_sqr(&self.scratch);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::StepSize { time: self.time() });
        }
        let finest = self.u.refinements();
        if n > self.threshold || level == finest {
            std::mem::swap(&mut self.psi, &mut self.scratch);
            self.tick += 1 << (finest - level);
            if n <= self.threshold {
                self.jump()?;
            }
            return Ok(());
        }
        self.advance(level + 1)?;
        self.advance(level + 1)
    }

    fn jump(&mut self) -> Result<()> {
        let d = self.u.dim;
        let mut weights = Vec::with_capacity(self.u.jumps.len());
        let mut images = Vec::with_capacity(self.u.jumps.len());
        for (c, &rate) in self.u.jumps.iter().zip(&self.u.rates) {
            let mut out = vec![Complex64::new(0.0, 0.0); d];
            c.apply(&self.psi, &mut out);
            weights.push(rate * norm_sqr(&out));
            images.push(out);
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::StepSize { time: self.time() });
        }
        let mut pick = self.rng.random::<f64>() * total;
        let mut k = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if pick < *w {
                k = i;
                break;
            }
            pick -= w;
        }
        let norm = norm_sqr(&images[k]).sqrt();
        self.psi = images.swap_remove(k);
        self.psi.iter_mut().for_each(|z| *z /= norm);
        if self.tick > self.record_from && self.record[k] {
            self.events.push(ClickEvent { time: self.time(), channel: k });
        }
        self.threshold = self.draw_threshold();
        Ok(())
    }
}

fn fingerprint(model: &LindbladModel) -> String {
    let mut h = DefaultHasher::new();
    model.space().dims().hash(&mut h);
    for z in model.hamiltonian().data() {
        z.re.to_bits().hash(&mut h);
        z.im.to_bits().hash(&mut h);
    }
    for t in model.collapse_terms() {
        t.label.hash(&mut h);
        t.rate.to_bits().hash(&mut h);
        for z in t.operator.data() {
            z.re.to_bits().hash(&mut h);
            z.im.to_bits().hash(&mut h);
        }
    }
    format!("{:016x}", h.finish())
}

/// Single trajectory from the first basis state.
pub fn run_trajectory(model: &LindbladModel, duration: f64, dt: f64, seed: u64) -> Result<ClickStream> {
    Ok(Unraveling::new(model, dt, DEFAULT_REFINEMENTS)?.run(duration, seed, &TrajectoryOptions::default())?.stream)
}

/// Independent trajectories, one per seed, returned in seed order.
pub fn run_trajectories(
    model: &LindbladModel,
    duration: f64,
    dt: f64,
    seeds: &[u64],
    opts: &TrajectoryOptions,
) -> Result<Vec<Trajectory>> {
    let u = Unraveling::new(model, dt, opts.refinements)?;
    seeds.par_iter().map(|&s| u.run(duration, s, opts)).collect()
}

/// Duration needed for `target` clicks at `rate`.
pub fn duration_for_clicks(rate: f64, target: usize) -> Result<f64> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidConfig(format!("click rate must be positive, got {rate}")));
    }
    Ok(target as f64 / rate)
}

/// Which delays count as a zero-delay coincidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoincidenceWindow {
    /// `t_b − t_a ∈ [0, w)`.
    Forward,
    /// `|t_b − t_a| < w/2`. Removes the linear slope of `g⁽²⁾(τ)` at zero.
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_pairs: usize,
    pub bin_width: f64,
    pub clicks_a: usize,
    pub clicks_b: usize,
    /// False when either channel has fewer than [`MIN_CLICKS`] clicks.
    pub sufficient: bool,
}

/// Zero-delay `g⁽²⁾` between two channels with a forward window.
pub fn g2_estimate(streams: &[ClickStream], channel_a: &str, channel_b: &str, bin_width: f64) -> Result<CoincidenceEstimate> {
    g2_estimate_with(streams, channel_a, channel_b, bin_width, CoincidenceWindow::Forward)
}

/// Ordered pairs `(a, b)`, `a ≠ b` as events, whose delay falls in the window.
fn count_pairs(ta: &[f64], tb: &[f64], lo: f64, hi: f64, same: bool) -> usize {
    let mut pairs = 0;
    let mut start = 0;
    for (i, &a) in ta.iter().enumerate() {
        while start < tb.len() && tb[start] - a < lo {
            start += 1;
        }
        let mut j = start;
        while j < tb.len() && tb[j] - a < hi {
            if !(same && j == i) {
                pairs += 1;
            }
            j += 1;
        }
    }
    pairs
}

/// Number of batches the record is cut into for error estimation.
const MIN_BATCHES: usize = 16;

/// Zero-delay `g⁽²⁾` from coincidence counting, normalized by
/// `rate_a·rate_b·bin_width·duration`. The standard error comes from the
/// spread of the per-batch ratio; streams are cut into time blocks when
/// there are fewer than 16 of them.
pub fn g2_estimate_with(
    streams: &[ClickStream],
    channel_a: &str,
    channel_b: &str,
    bin_width: f64,
    window: CoincidenceWindow,
) -> Result<CoincidenceEstimate> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::InvalidConfig(format!("bin width must be positive, got {bin_width}")));
    }
    if streams.is_empty() {
        return Err(Error::InvalidConfig("no click streams given".into()));
    }
    let (lo, hi) = match window {
        CoincidenceWindow::Forward => (0.0, bin_width),
        CoincidenceWindow::Centered => (-0.5 * bin_width, 0.5 * bin_width),
    };
    let same = channel_a == channel_b;
    let blocks = MIN_BATCHES.div_ceil(streams.len());
    // Per batch: observed pairs and pairs expected without correlation.
    let mut batches: Vec<(f64, f64)> = Vec::new();
    let (mut clicks_a, mut clicks_b, mut n_pairs) = (0, 0, 0);
    for s in streams {
        let ta = s.times(channel_a)?;
        let tb = s.times(channel_b)?;
        clicks_a += ta.len();
        clicks_b += tb.len();
        let len = s.duration / blocks as f64;
        for k in 0..blocks {
            let (t0, t1) = (k as f64 * len, (k + 1) as f64 * len);
            let slice = |t: &[f64]| {
                let i0 = t.partition_point(|&x| x < t0);
                let i1 = t.partition_point(|&x| x < t1);
                (i0, i1)
            };
            let (a0, a1) = slice(&ta);
            let (b0, b1) = slice(&tb);
            let pairs = if same {
                count_pairs(&ta[a0..a1], &ta[a0..a1], lo, hi, true)
            } else {
                count_pairs(&ta[a0..a1], &tb[b0..b1], lo, hi, false)
            };
            n_pairs += pairs;
            let expected = (a1 - a0) as f64 * (b1 - b0) as f64 * bin_width / len;
            batches.push((pairs as f64, expected));
        }
    }
    let observed: f64 = batches.iter().map(|b| b.0).sum();
    let expected: f64 = batches.iter().map(|b| b.1).sum();
    if expected <= MIN_POPULATION {
        return Err(Error::UndefinedCorrelation(format!("no time batch has clicks on both {channel_a:?} and {channel_b:?}")));
    }
    let value = observed / expected;
    let n = batches.len() as f64;
    let spread: f64 = batches.iter().map(|(o, e)| (o - value * e).powi(2)).sum();
    let mut std_error = (n / (n - 1.0) * spread).sqrt() / expected;
    if std_error == 0.0 && n_pairs > 1 {
        std_error = value / (n_pairs as f64).sqrt();
    }
    Ok(CoincidenceEstimate {
        value,
        std_error,
        n_pairs,
        bin_width,
        clicks_a,
        clicks_b,
        sufficient: clicks_a >= MIN_CLICKS && clicks_b >= MIN_CLICKS,
    })
}

/// Emitter whose output is split evenly and sent through two Lorentzian
/// filter cavities, with the filter outputs detected as `filter_1` and
/// `filter_2`.
///
/// Each filter is two-sided with total linewidth `Γ`, half of it through the
/// input mirror facing the emitter. The cascaded coupling has no back-action
/// on the emitter, so the normalized filter correlations equal those of the
/// sensors at any coupling, while click rates stay of order `γ_σ`.
#[derive(Debug, Clone)]
pub struct FilterDetection {
    pub model: LindbladModel,
    pub filters: [OperatorMatrix; 2],
}

pub fn filter_detection_model(drive: &DriveConfig, omega1: f64, omega2: f64, gamma: f64, n_max: usize) -> Result<FilterDetection> {
    drive.validate()?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidConfig(format!("filter linewidth must be positive, got {gamma}")));
    }
    if !(omega1.is_finite() && omega2.is_finite()) {
        return Err(Error::InvalidConfig("filter frequencies must be finite".into()));
    }
    if n_max < 2 {
        return Err(Error::InvalidConfig(format!("filter truncation n_max must be ≥ 2, got {n_max}")));
    }
    let levels = n_max + 1;
    let space = HilbertSpace::new(vec![2, levels, levels])?;
    let sigma = embed(&sigma_minus(), 0, &space)?;
    let sigma_dag = sigma.dagger();
    let a = annihilation(levels)?;
    let filters = [embed(&a, 1, &space)?, embed(&a, 2, &space)?];
    let r = |x: f64| Complex64::new(x, 0.0);

    let share = 0.5 * drive.gamma_sigma();
    let (k_in, k_out) = (0.5 * gamma, 0.5 * gamma);
    let mut h = sigma_dag.matmul(&sigma)?.scale(r(drive.delta_sigma));
    h = h.add(&sigma_dag.add(&sigma)?.scale(r(drive.omega)))?;
    let mut collapse = Vec::new();
    for (k, (f, w)) in filters.iter().zip([omega1, omega2]).enumerate() {
        let f_dag = f.dagger();
        h = h.add(&f_dag.matmul(f)?.scale(r(w)))?;
        // (i/2)√(ηγκ)(σ†a − a†σ) drives the filter without feeding back.
        let g = (share * k_in).sqrt();
        let cascade = sigma_dag.matmul(f)?.sub(&f_dag.matmul(&sigma)?)?;
        h = h.add(&cascade.scale(Complex64::new(0.0, 0.5 * g)))?;
        let reflected = sigma.scale(r(share.sqrt())).add(&f.scale(r(k_in.sqrt())))?;
        collapse.push(CollapseTerm::new(reflected, 1.0, format!("reflected_{}", k + 1)));
        collapse.push(CollapseTerm::new(f.clone(), k_out, format!("filter_{}", k + 1)));
    }
    if drive.pump > 0.0 {
        collapse.push(CollapseTerm::new(sigma_dag, drive.pump, "pump"));
    }
    Ok(FilterDetection { model: LindbladModel::new(h, collapse)?, filters })
}

/// Deterministic steady-state values of a [`FilterDetection`] model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSteadyState {
    /// Click rates `κ_out⟨a_i†a_i⟩`.
    pub rates: [f64; 2],
    /// `⟨a₁†a₂†a₂a₁⟩ / (⟨a₁†a₁⟩⟨a₂†a₂⟩)`.
    pub g2_cross: f64,
}

pub fn filter_steady_state(det: &FilterDetection) -> Result<FilterSteadyState> {
    let rho = steady_state(&build_liouvillian(&det.model))?;
    let [a1, a2] = [det.filters[0].data(), det.filters[1].data()];
    let dag = |x: &Array2<Complex64>| x.t().mapv(|z| z.conj());
    let n1 = trace_of_product(&dag(a1).dot(a1), rho.data()).re;
    let n2 = trace_of_product(&dag(a2).dot(a2), rho.data()).re;
    if n1 <= MIN_POPULATION || n2 <= MIN_POPULATION {
        return Err(Error::UndefinedCorrelation("a filter receives no light".into()));
    }
    let pair = a2.dot(a1);
    let g = trace_of_product(&dag(&pair).dot(&pair), rho.data()).re;
    let k_out = det.model.channel("filter_1").map(|t| t.rate).unwrap_or(0.0);
    Ok(FilterSteadyState { rates: [k_out * n1, k_out * n2], g2_cross: g / (n1 * n2) })
}
