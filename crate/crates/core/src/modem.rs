//! Constellations, bit mapping and soft-symbol arithmetic.
//!
//! Square QAM constellations with Gray labeling, normalized to unit average
//! power. Labels are read MSB first; the first half of a symbol's bits selects
//! the in-phase level, the second half the quadrature level. Within one axis
//! the levels run from the most positive amplitude downwards and carry a
//! binary-reflected Gray code, so bit pattern 0…0 always maps to the most
//! positive corner point.
//!
//! Soft decisions are represented by [`SymbolBelief`] (a normalized discrete
//! distribution over constellation points). Posterior moments under a
//! Gaussian observation are evaluated in the log domain with max-subtraction
//! so that no operating point can underflow all masses at once.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Magnitude used to clamp log-likelihood ratios.
pub const LLR_CLAMP: f64 = 50.0;

/// Supported constellations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstellationKind {
    Qpsk,
    Qam16,
}

impl ConstellationKind {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            ConstellationKind::Qpsk => 2,
            ConstellationKind::Qam16 => 4,
        }
    }

    pub fn modulation_order(self) -> usize {
        1 << self.bits_per_symbol()
    }
}

impl std::str::FromStr for ConstellationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qpsk" | "4qam" => Ok(ConstellationKind::Qpsk),
            "16qam" | "qam16" => Ok(ConstellationKind::Qam16),
            other => Err(Error::Argument(format!(
                "unsupported constellation \"{other}\" (expected qpsk or 16qam)"
            ))),
        }
    }
}

impl std::fmt::Display for ConstellationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConstellationKind::Qpsk => write!(f, "qpsk"),
            ConstellationKind::Qam16 => write!(f, "16qam"),
        }
    }
}

/// A unit-average-power constellation with Gray bit labels.
#[derive(Clone, Debug)]
pub struct Constellation {
    kind: ConstellationKind,
    points: Vec<Complex64>,
    point_power: Vec<f64>,
    labels: Vec<u32>,
    point_of_label: Vec<usize>,
    bits_per_symbol: usize,
}

/// Builds the constellation for `kind`.
pub fn build_constellation(kind: ConstellationKind) -> Constellation {
    let bits = kind.bits_per_symbol();
    let half = bits / 2;
    let levels = 1usize << half; // amplitude levels per axis
    // Unit average power: E[i² + q²] over all points equals 2(L²-1)/3 before
    // scaling, e.g. 2 for QPSK and 10 for 16QAM.
    let scale = 1.0 / ((2 * (levels * levels - 1)) as f64 / 3.0).sqrt();
    // Rank r along one axis runs over amplitudes L-1, L-3, …, -(L-1) and is
    // labeled with the binary-reflected Gray code of r.
    let amp = |rank: usize| ((levels - 1) as f64 - 2.0 * rank as f64) * scale;
    let gray = |rank: usize| (rank ^ (rank >> 1)) as u32;

    let m = 1usize << bits;
    let mut points = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for ri in 0..levels {
        for rq in 0..levels {
            points.push(Complex64::new(amp(ri), amp(rq)));
            labels.push((gray(ri) << half) | gray(rq));
        }
    }
    let mut point_of_label = vec![0usize; m];
    for (p, &label) in labels.iter().enumerate() {
        point_of_label[label as usize] = p;
    }
    let point_power = points.iter().map(|p| p.norm_sqr()).collect();
    Constellation {
        kind,
        points,
        point_power,
        labels,
        point_of_label,
        bits_per_symbol: bits,
    }
}

/// Parses a constellation name and builds it.
pub fn constellation_from_name(name: &str) -> Result<Constellation> {
    Ok(build_constellation(name.parse()?))
}

impl Constellation {
    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, idx: usize) -> Complex64 {
        self.points[idx]
    }

    /// Squared magnitudes of all points (cached).
    pub fn point_power(&self) -> &[f64] {
        &self.point_power
    }

    /// Gray label of a point index.
    pub fn label(&self, idx: usize) -> u32 {
        self.labels[idx]
    }

    /// Writes the label bits of point `idx`, MSB first, into `out`.
    pub fn write_label_bits(&self, idx: usize, out: &mut [u8]) {
        debug_assert_eq!(out.len(), self.bits_per_symbol);
        let label = self.labels[idx];
        for (b, slot) in out.iter_mut().enumerate() {
            *slot = ((label >> (self.bits_per_symbol - 1 - b)) & 1) as u8;
        }
    }

    /// Point index carrying the given label bits (MSB first).
    pub fn point_of_bits(&self, bits: &[u8]) -> Result<usize> {
        if bits.len() != self.bits_per_symbol {
            return Err(Error::Argument(format!(
                "expected {} bits, got {}",
                self.bits_per_symbol,
                bits.len()
            )));
        }
        let mut label = 0u32;
        for &b in bits {
            if b > 1 {
                return Err(Error::Argument(format!("bit value {b} is not 0/1")));
            }
            label = (label << 1) | b as u32;
        }
        Ok(self.point_of_label[label as usize])
    }
}

/// Maps a bit sequence to symbols. The length must be a multiple of the
/// constellation's bits per symbol.
pub fn map_bits(bits: &[u8], constellation: &Constellation) -> Result<Vec<Complex64>> {
    let bps = constellation.bits_per_symbol();
    if bits.len() % bps != 0 {
        return Err(Error::Argument(format!(
            "bit count {} is not a multiple of {bps}",
            bits.len()
        )));
    }
    bits.chunks(bps)
        .map(|chunk| Ok(constellation.point(constellation.point_of_bits(chunk)?)))
        .collect()
}

/// Normalized discrete distribution over constellation points.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolBelief {
    masses: Vec<f64>,
}

impl SymbolBelief {
    /// Uniform distribution over `m` points.
    pub fn uniform(m: usize) -> Self {
        Self {
            masses: vec![1.0 / m as f64; m],
        }
    }

    /// Point mass on index `idx`.
    pub fn delta(m: usize, idx: usize) -> Self {
        let mut masses = vec![0.0; m];
        masses[idx] = 1.0;
        Self { masses }
    }

    /// Wraps masses after validating they form a distribution.
    pub fn from_masses(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::Argument("belief must have at least one mass".into()));
        }
        if masses.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::Argument("belief masses must be finite and non-negative".into()));
        }
        let sum: f64 = masses.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Argument(format!(
                "belief masses sum to {sum}, expected 1 within 1e-12"
            )));
        }
        Ok(Self { masses })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Mean and variance of the distribution over the given points.
    pub fn moments(&self, constellation: &Constellation) -> (Complex64, f64) {
        let mut mean = Complex64::new(0.0, 0.0);
        let mut power = 0.0;
        for ((&mass, &p), &pw) in self
            .masses
            .iter()
            .zip(constellation.points())
            .zip(constellation.point_power())
        {
            mean += mass * p;
            power += mass * pw;
        }
        (mean, (power - mean.norm_sqr()).max(0.0))
    }
}

/// Log-domain moment matching against a Gaussian observation.
///
/// Given log-prior terms (`None` means uniform), evaluates the posterior
/// masses `w[p] ∝ exp(log_prior[p] - |points[p] - z|² / gamma)` into `w`
/// using max-subtraction, and returns the posterior mean and variance.
/// `gamma = +∞` is the no-evidence limit and reproduces the prior moments.
pub(crate) fn moment_match_into(
    z: Complex64,
    gamma: f64,
    points: &[Complex64],
    point_power: &[f64],
    log_prior: Option<&[f64]>,
    w: &mut [f64],
) -> (Complex64, f64) {
    debug_assert!(gamma > 0.0);
    debug_assert_eq!(points.len(), w.len());
    let inv_gamma = if gamma.is_finite() { 1.0 / gamma } else { 0.0 };
    let mut max_lw = f64::NEG_INFINITY;
    for (p, slot) in w.iter_mut().enumerate() {
        let d = points[p] - z;
        let mut lw = -d.norm_sqr() * inv_gamma;
        if let Some(lp) = log_prior {
            lw += lp[p];
        }
        *slot = lw;
        if lw > max_lw {
            max_lw = lw;
        }
    }
    let mut sum = 0.0;
    for slot in w.iter_mut() {
        *slot = (*slot - max_lw).exp();
        sum += *slot;
    }
    let inv_sum = 1.0 / sum;
    let mut mean = Complex64::new(0.0, 0.0);
    let mut power = 0.0;
    for (p, slot) in w.iter_mut().enumerate() {
        *slot *= inv_sum;
        mean += *slot * points[p];
        power += *slot * point_power[p];
    }
    (mean, (power - mean.norm_sqr()).max(0.0))
}

/// Posterior over constellation points given the Gaussian observation model
/// `z = x + e`, `e ~ CN(0, gamma)`, and a prior over points.
///
/// Returns the posterior mean, variance and the full posterior distribution.
pub fn posterior_moments(
    z: Complex64,
    gamma: f64,
    prior: &SymbolBelief,
    constellation: &Constellation,
) -> Result<(Complex64, f64, SymbolBelief)> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Argument(format!("observation must be finite, got {z}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::Argument(format!(
            "observation variance must be positive, got {gamma}"
        )));
    }
    if prior.len() != constellation.len() {
        return Err(Error::Argument(format!(
            "prior has {} masses for {} points",
            prior.len(),
            constellation.len()
        )));
    }
    if prior.masses().iter().all(|&m| m == 0.0) {
        return Err(Error::Numerical("prior assigns zero mass everywhere".into()));
    }
    let log_prior: Vec<f64> = prior.masses().iter().map(|&m| m.ln()).collect();
    let mut w = vec![0.0; constellation.len()];
    let (mean, var) = moment_match_into(
        z,
        gamma,
        constellation.points(),
        constellation.point_power(),
        Some(&log_prior),
        &mut w,
    );
    Ok((mean, var, SymbolBelief { masses: w }))
}

/// Index of the most probable point; ties break toward the lowest index.
pub fn hard_decision(belief: &SymbolBelief, constellation: &Constellation) -> usize {
    debug_assert_eq!(belief.len(), constellation.len());
    let mut best = 0;
    let mut best_mass = belief.masses()[0];
    for (p, &m) in belief.masses().iter().enumerate().skip(1) {
        if m > best_mass {
            best = p;
            best_mass = m;
        }
    }
    best
}

/// Index of the constellation point closest to `x` in Euclidean distance;
/// ties break toward the lowest index.
pub fn nearest_point(x: Complex64, constellation: &Constellation) -> usize {
    let mut best = 0;
    let mut best_d = (constellation.point(0) - x).norm_sqr();
    for (p, &pt) in constellation.points().iter().enumerate().skip(1) {
        let d = (pt - x).norm_sqr();
        if d < best_d {
            best = p;
            best_d = d;
        }
    }
    best
}

/// Per-bit log-likelihood ratios `ln P(bit=0) - ln P(bit=1)` of a posterior,
/// MSB first, clamped to ±[`LLR_CLAMP`].
pub fn bit_llrs(posterior: &SymbolBelief, constellation: &Constellation) -> Vec<f64> {
    let bps = constellation.bits_per_symbol();
    let mut llrs = Vec::with_capacity(bps);
    for b in 0..bps {
        let shift = bps - 1 - b;
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for (p, &m) in posterior.masses().iter().enumerate() {
            if (constellation.label(p) >> shift) & 1 == 0 {
                s0 += m;
            } else {
                s1 += m;
            }
        }
        let llr = s0.ln() - s1.ln();
        llrs.push(llr.clamp(-LLR_CLAMP, LLR_CLAMP));
    }
    llrs
}
