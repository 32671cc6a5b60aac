//! Symbol-level Monte Carlo of `y = η·h·x + n` with Gray-mapped M-PAM and
//! ML detection under perfect CSI.
//!
//! Symbols are drawn in fixed-size batches. Batch `b` uses ChaCha8 seeded
//! with the run seed on stream `b`, so an estimate depends only on
//! `(seed, n_symbols, batch_size, min_errors)` and never on the number of
//! worker threads. Early stopping is decided in batch order for the same
//! reason.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::{ModulationOrder, OperatingPoint};
use crate::{Error, Result};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Early stopping is never allowed before this many symbols.
pub const MIN_SYMBOLS_BEFORE_STOP: u64 = 100_000;

/// Wilson intervals replace the normal approximation below this error count.
const WILSON_BELOW: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_symbols: u64,
    pub seed: u64,
    pub batch_size: u64,
    /// Stop once this many symbol errors are seen (and at least
    /// [`MIN_SYMBOLS_BEFORE_STOP`] symbols were simulated); `None` runs all.
    pub min_errors: Option<u64>,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_symbols: 1_000_000,
            seed: 0,
            batch_size: 1 << 16,
            min_errors: Some(100),
        }
    }
}

impl McConfig {
    pub fn new(n_symbols: u64, seed: u64) -> Self {
        McConfig {
            n_symbols,
            seed,
            ..Self::default()
        }
    }

    /// Runs every requested symbol.
    pub fn exhaustive(mut self) -> Self {
        self.min_errors = None;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_symbols == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter(format!(
                "n_symbols and batch_size must be ≥ 1, got {} and {}",
                self.n_symbols, self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub ser_hat: f64,
    pub ber_hat: f64,
    pub symbol_errors: u64,
    pub bit_errors: u64,
    pub n_symbols: u64,
    pub ci95_ser: f64,
    pub ci95_ber: f64,
    pub seed: u64,
}

impl McEstimate {
    fn from_counts(counts: Counts, bits: u32, seed: u64) -> Self {
        let n = counts.symbols;
        let n_bits = n * bits as u64;
        McEstimate {
            ser_hat: counts.symbol_errors as f64 / n as f64,
            ber_hat: counts.bit_errors as f64 / n_bits as f64,
            symbol_errors: counts.symbol_errors,
            bit_errors: counts.bit_errors,
            n_symbols: n,
            ci95_ser: ci95_half_width(counts.symbol_errors, n),
            ci95_ber: ci95_half_width(counts.bit_errors, n_bits),
            seed,
        }
    }

    /// Standard error of the SER estimate for a true rate `p`.
    pub fn ser_standard_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.n_symbols as f64).sqrt()
    }
}

/// 95% half-width: normal approximation, or Wilson for few errors.
pub fn ci95_half_width(errors: u64, trials: u64) -> f64 {
    if trials == 0 {
        return f64::NAN;
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    if errors >= WILSON_BELOW {
        Z95 * (p * (1.0 - p) / n).sqrt()
    } else {
        let z2 = Z95 * Z95;
        Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n)
    }
}

fn gray(j: u32) -> u32 {
    j ^ (j >> 1)
}

/// BRGC label of symbol `j` as `m` bits, most significant first.
pub fn brgc_encode(j: u32, m: u32) -> Result<Vec<bool>> {
    if m == 0 || m > 31 || j >= 1 << m {
        return Err(Error::Domain(format!(
            "symbol index {j} out of range for {m} bits"
        )));
    }
    let g = gray(j);
    Ok((0..m).rev().map(|b| (g >> b) & 1 == 1).collect())
}

/// Inverse of [`brgc_encode`].
pub fn brgc_decode(bits: &[bool]) -> u32 {
    let g = bits.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
    let mut j = g;
    let mut shift = g >> 1;
    while shift != 0 {
        j ^= shift;
        shift >>= 1;
    }
    j
}

/// Nearest level among `η·h·j·2P/(M−1)`, ties to the lower index.
pub fn ml_detect(y: f64, eta_h: f64, order: ModulationOrder, power: f64) -> u32 {
    let top = order.get() - 1;
    let step = eta_h * 2.0 * power / top as f64;
    let k = (y / step - 0.5).ceil();
    if k <= 0.0 {
        0
    } else if k >= top as f64 {
        top
    } else {
        k as u32
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    symbols: u64,
    symbol_errors: u64,
    bit_errors: u64,
}

impl Counts {
    fn add(&mut self, other: Counts) {
        self.symbols += other.symbols;
        self.symbol_errors += other.symbol_errors;
        self.bit_errors += other.bit_errors;
    }
}

/// Channel realisation per symbol.
#[derive(Clone, Copy)]
enum Gain {
    Faded,
    Fixed(f64),
}

fn run_batch(op: &OperatingPoint, gain: Gain, seed: u64, batch: u64, len: u64) -> Counts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    let m = op.order.get();
    let eta = op.geometry.eta();
    let sigma_n = op.geometry.noise_sigma();
    let spacing = 2.0 * op.power / (m - 1) as f64;
    let mut c = Counts {
        symbols: len,
        ..Counts::default()
    };
    for _ in 0..len {
        let j = rng.random_range(0..m);
        let h = match gain {
            Gain::Faded => op.fading.sample(&mut rng),
            Gain::Fixed(h) => h,
        };
        let n: f64 = rng.sample(StandardNormal);
        let y = eta * h * (j as f64 * spacing) + sigma_n * n;
        let k = ml_detect(y, eta * h, op.order, op.power);
        if k != j {
            c.symbol_errors += 1;
            c.bit_errors += (gray(j) ^ gray(k)).count_ones() as u64;
        }
    }
    c
}

/// Batches evaluated in parallel before the stopping rule is consulted.
const BATCHES_PER_ROUND: u64 = 16;

fn run(op: &OperatingPoint, gain: Gain, mc: &McConfig) -> Result<McEstimate> {
    mc.validate()?;
    let n_batches = mc.n_symbols.div_ceil(mc.batch_size);
    let batch_len = |b: u64| mc.batch_size.min(mc.n_symbols - b * mc.batch_size);
    let mut total = Counts::default();
    let mut next = 0;
    'rounds: while next < n_batches {
        let end = (next + BATCHES_PER_ROUND).min(n_batches);
        let round: Vec<Counts> = (next..end)
            .into_par_iter()
            .map(|b| run_batch(op, gain, mc.seed, b, batch_len(b)))
            .collect();
        for c in round {
            total.add(c);
            if let Some(min) = mc.min_errors {
                if total.symbol_errors >= min && total.symbols >= MIN_SYMBOLS_BEFORE_STOP {
                    break 'rounds;
                }
            }
        }
        next = end;
    }
    Ok(McEstimate::from_counts(total, op.order.bits(), mc.seed))
}

/// Monte Carlo SER/BER with i.i.d. composite fading per symbol.
pub fn simulate(op: &OperatingPoint, mc: &McConfig) -> Result<McEstimate> {
    run(op, Gain::Faded, mc)
}

/// [`simulate`] on a dedicated pool of `workers` threads.
pub fn simulate_with_workers(
    op: &OperatingPoint,
    mc: &McConfig,
    workers: usize,
) -> Result<McEstimate> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    pool.install(|| simulate(op, mc))
}

/// Monte Carlo with the channel frozen at gain `h`.
pub fn simulate_fixed_gain(op: &OperatingPoint, h: f64, mc: &McConfig) -> Result<McEstimate> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("fixed gain must be > 0, got {h}")));
    }
    run(op, Gain::Fixed(h), mc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{FadingModel, LinkGeometry, LinkParams};
    use crate::errorrates::conditional_ser_pam;
    use proptest::prelude::*;

    fn order(m: u32) -> ModulationOrder {
        ModulationOrder::new(m).unwrap()
    }

    #[test]
    fn brgc_examples() {
        let words: Vec<Vec<bool>> = (0..4).map(|j| brgc_encode(j, 2).unwrap()).collect();
        assert_eq!(
            words,
            vec![
                vec![false, false],
                vec![false, true],
                vec![true, true],
                vec![true, false]
            ]
        );
        assert!(brgc_encode(4, 2).is_err());
        assert!(brgc_encode(0, 0).is_err());
    }

    #[test]
    fn brgc_gray_property_and_bijection() {
        for m in 1..=10 {
            for j in 0..(1u32 << m) {
                let w = brgc_encode(j, m).unwrap();
                assert_eq!(brgc_decode(&w), j);
                if j + 1 < 1 << m {
                    let next = brgc_encode(j + 1, m).unwrap();
                    assert_eq!(w.iter().zip(&next).filter(|(a, b)| a != b).count(), 1);
                }
            }
        }
    }

    #[test]
    fn detector_levels_and_ties() {
        let (m, p, eh) = (order(8), 2.0, 0.7);
        let step = eh * 2.0 * p / 7.0;
        for k in 0..8 {
            assert_eq!(ml_detect(k as f64 * step, eh, m, p), k);
        }
        for k in 0..7 {
            assert_eq!(ml_detect((k as f64 + 0.5) * step, eh, m, p), k);
        }
        assert_eq!(ml_detect(-5.0, eh, m, p), 0);
        assert_eq!(ml_detect(1e9, eh, m, p), 7);
    }

    #[test]
    fn noiseless_detection_recovers_symbols() {
        let geom = LinkGeometry::reference();
        let fm = FadingModel::new(&geom, 0.5, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in [2, 4, 16, 64] {
            let p = 0.01;
            for _ in 0..200 {
                let h = fm.sample(&mut rng);
                for j in 0..m {
                    let y = geom.eta() * h * (j as f64 * 2.0 * p / (m - 1) as f64);
                    assert_eq!(ml_detect(y, geom.eta() * h, order(m), p), j);
                }
            }
        }
    }

    #[test]
    fn noiseless_and_zero_power_limits() {
        let params = LinkParams {
            noise_sigma: 1e-30,
            ..LinkParams::reference()
        };
        let geom = LinkGeometry::new(params).unwrap();
        let fm = FadingModel::new(&geom, 0.1, 0.35).unwrap();
        let op = OperatingPoint::new(geom, fm, order(4), 1e-3).unwrap();
        let est = simulate(&op, &McConfig::new(50_000, 1)).unwrap();
        assert_eq!(est.symbol_errors, 0);

        let op = OperatingPoint::reference(0.35, 0.1, 4, 0.0)
            .unwrap()
            .with_power(1e-30);
        let est = simulate(&op, &McConfig::new(200_000, 2).exhaustive()).unwrap();
        assert!((est.ser_hat - 0.75).abs() <= est.ci95_ser * 1.5, "{est:?}");
    }

    #[test]
    fn fixed_gain_matches_conditional_ser() {
        let op = OperatingPoint::reference(0.35, 0.1, 4, 6.0).unwrap();
        let h = 3e-4;
        let exact = conditional_ser_pam(op.order, op.snr_scale(h));
        let est = simulate_fixed_gain(&op, h, &McConfig::new(1_000_000, 11).exhaustive()).unwrap();
        let se = est.ser_standard_error(exact);
        assert!(
            (est.ser_hat - exact).abs() <= 3.0 * se,
            "{} vs {exact}",
            est.ser_hat
        );
        assert!(simulate_fixed_gain(&op, 0.0, &McConfig::default()).is_err());
    }

    #[test]
    fn estimates_are_consistent() {
        let op = OperatingPoint::reference(0.25, 0.5, 16, 10.0).unwrap();
        let est = simulate(&op, &McConfig::new(200_000, 5).exhaustive()).unwrap();
        assert!(est.ber_hat <= est.ser_hat);
        assert!(est.ser_hat <= 4.0 * est.ber_hat);
        assert!(est.bit_errors <= 4 * est.n_symbols);
        assert_eq!(est.n_symbols, 200_000);
        assert_eq!(est.seed, 5);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let op = OperatingPoint::reference(0.2, 0.9, 8, 8.0).unwrap();
        let mc = McConfig {
            n_symbols: 300_001,
            seed: 42,
            batch_size: 10_000,
            min_errors: Some(1_000),
        };
        let one = simulate_with_workers(&op, &mc, 1).unwrap();
        let four = simulate_with_workers(&op, &mc, 4).unwrap();
        assert_eq!(one, four);
        assert_eq!(simulate(&op, &mc).unwrap(), one);
    }

    #[test]
    fn early_stop_respects_floor() {
        let op = OperatingPoint::reference(0.35, 0.1, 4, 0.0).unwrap();
        let mc = McConfig {
            n_symbols: 10_000_000,
            seed: 9,
            batch_size: 1_000,
            min_errors: Some(100),
        };
        let est = simulate(&op, &mc).unwrap();
        assert_eq!(est.n_symbols, MIN_SYMBOLS_BEFORE_STOP);
        assert!(McConfig { n_symbols: 0, ..mc }.validate().is_err());
        assert!(McConfig {
            batch_size: 0,
            ..mc
        }
        .validate()
        .is_err());
    }

    #[test]
    fn wilson_interval_at_zero_errors() {
        let w = ci95_half_width(0, 1000);
        assert!(w > 0.0 && w < 0.004);
        assert!((ci95_half_width(500, 1000) - Z95 * (0.25f64 / 1000.0).sqrt()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn detector_is_nearest_level(y in -1.0f64..3.0, bits in 1u32..7, eh in 0.1f64..2.0) {
            let m = ModulationOrder::from_bits(bits).unwrap();
            let p = 1.0;
            let k = ml_detect(y, eh, m, p);
            let level = |j: u32| eh * j as f64 * 2.0 * p / (m.get() - 1) as f64;
            let best = (0..m.get()).map(|j| (y - level(j)).abs()).fold(f64::INFINITY, f64::min);
            prop_assert!(((y - level(k)).abs() - best).abs() <= 1e-12);
        }
    }
}
