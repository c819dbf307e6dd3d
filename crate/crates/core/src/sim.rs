//! Monte Carlo oracles for the retransmission and queueing models.
//!
//! Every simulator owns a [`ChaCha8Rng`] seeded from a `u64`, so results are
//! reproducible bit for bit given the seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Geometric};

use crate::error::{domain, Error, Result};

/// Number of batches used for batch-means standard errors.
pub const DEFAULT_BATCHES: u64 = 64;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

impl Estimate {
    /// `|mean − target|` in units of the standard error. Infinite when the
    /// error is zero and the mean misses the target.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        self.z_score(target) <= sigmas
    }
}

/// Empirical `Pr{X ≤ L}` for the geometric transmission count `X` with
/// per-attempt success probability `psr`.
pub fn simulate_retransmissions(
    psr: f64,
    max_transmissions: u32,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    if !(psr > 0.0 && psr <= 1.0) {
        return Err(domain("f", psr, "success probability must lie in (0, 1]"));
    }
    if samples == 0 {
        return Err(domain("n_samples", 0.0, "need at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Geometric counts failures before the first success, i.e. X − 1.
    let failures = Geometric::new(psr).expect("psr validated above");
    let hits = (0..samples)
        .filter(|_| failures.sample(&mut rng) < max_transmissions as u64)
        .count() as u64;
    let p = hits as f64 / samples as f64;
    Ok(Estimate {
        mean: p,
        std_error: (p * (1.0 - p) / samples as f64).sqrt(),
        samples,
        seed,
    })
}

/// Timeline of one packet through the queue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketEvent {
    pub arrival: f64,
    pub service_start: f64,
    pub departure: f64,
    pub transmissions: u64,
}

impl PacketEvent {
    pub fn sojourn(&self) -> f64 {
        self.departure - self.arrival
    }
}

/// FIFO single-server queue with Poisson arrivals and service lasting a
/// geometric number of fixed-length transmission slots.
#[derive(Debug, Clone)]
pub struct Mg1Queue {
    slot: f64,
    interarrival: Option<Exp<f64>>,
    service: Geometric,
    rng: ChaCha8Rng,
    seed: u64,
    last_arrival: f64,
    server_free_at: f64,
    stats: BatchMeans,
    log: Option<Vec<PacketEvent>>,
}

impl Mg1Queue {
    /// `batch_size` packets make up one batch of the batch-means estimator.
    pub fn new(arrival_rate: f64, slot: f64, psr: f64, seed: u64, batch_size: u64) -> Result<Self> {
        if !(arrival_rate.is_finite() && arrival_rate >= 0.0) {
            return Err(domain("lambda", arrival_rate, "arrival rate must be >= 0"));
        }
        if !(slot > 0.0 && slot.is_finite()) {
            return Err(domain("tau", slot, "transmission time must be positive"));
        }
        if !(psr > 0.0 && psr <= 1.0) {
            return Err(domain("f", psr, "success probability must lie in (0, 1]"));
        }
        let load = arrival_rate * slot;
        if psr <= load {
            return Err(Error::Unstable { psr, load });
        }
        Ok(Self {
            slot,
            interarrival: (arrival_rate > 0.0)
                .then(|| Exp::new(arrival_rate).expect("rate validated above")),
            service: Geometric::new(psr).expect("psr validated above"),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            last_arrival: 0.0,
            server_free_at: 0.0,
            stats: BatchMeans::new(batch_size.max(1)),
            log: None,
        })
    }

    /// Keep every [`PacketEvent`] in memory.
    pub fn with_event_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    /// Advances by one packet arrival and returns its timeline.
    pub fn step(&mut self) -> PacketEvent {
        let arrival = match &self.interarrival {
            Some(exp) => self.last_arrival + exp.sample(&mut self.rng),
            // No arrival process: each packet finds an idle server.
            None => self.server_free_at,
        };
        let transmissions = 1 + self.service.sample(&mut self.rng);
        let service_start = arrival.max(self.server_free_at);
        let departure = service_start + transmissions as f64 * self.slot;

        self.last_arrival = arrival;
        self.server_free_at = departure;

        let event = PacketEvent {
            arrival,
            service_start,
            departure,
            transmissions,
        };
        self.stats.push(event.sojourn());
        if let Some(log) = &mut self.log {
            log.push(event);
        }
        event
    }

    pub fn run(&mut self, packets: u64) {
        for _ in 0..packets {
            self.step();
        }
    }

    pub fn events(&self) -> &[PacketEvent] {
        self.log.as_deref().unwrap_or(&[])
    }

    pub fn packets(&self) -> u64 {
        self.stats.count
    }

    /// Mean sojourn time with a batch-means standard error.
    pub fn estimate(&self) -> Estimate {
        let (mean, std_error) = self.stats.mean_and_error();
        Estimate {
            mean,
            std_error,
            samples: self.stats.count,
            seed: self.seed,
        }
    }
}

/// Runs `packets` packets through a fresh [`Mg1Queue`] and returns the mean
/// sojourn time. Consecutive waits are correlated, so the standard error comes
/// from [`DEFAULT_BATCHES`] non-overlapping batch means.
pub fn simulate_mg1(
    arrival_rate: f64,
    slot: f64,
    psr: f64,
    packets: u64,
    seed: u64,
) -> Result<Estimate> {
    if packets == 0 {
        return Err(domain("n_packets", 0.0, "need at least one packet"));
    }
    let batch = (packets / DEFAULT_BATCHES).max(1);
    let mut q = Mg1Queue::new(arrival_rate, slot, psr, seed, batch)?;
    q.run(packets);
    Ok(q.estimate())
}

#[derive(Debug, Clone)]
struct BatchMeans {
    batch_size: u64,
    count: u64,
    total: f64,
    current: f64,
    in_batch: u64,
    // Welford accumulators over completed batch means.
    batches: u64,
    batch_mean: f64,
    batch_m2: f64,
}

impl BatchMeans {
    fn new(batch_size: u64) -> Self {
        Self {
            batch_size,
            count: 0,
            total: 0.0,
            current: 0.0,
            in_batch: 0,
            batches: 0,
            batch_mean: 0.0,
            batch_m2: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        self.count += 1;
        self.total += x;
        self.current += x;
        self.in_batch += 1;
        if self.in_batch == self.batch_size {
            let m = self.current / self.batch_size as f64;
            self.batches += 1;
            let delta = m - self.batch_mean;
            self.batch_mean += delta / self.batches as f64;
            self.batch_m2 += delta * (m - self.batch_mean);
            self.current = 0.0;
            self.in_batch = 0;
        }
    }

    fn mean_and_error(&self) -> (f64, f64) {
        let mean = if self.count == 0 {
            f64::NAN
        } else {
            self.total / self.count as f64
        };
        let err = if self.batches < 2 {
            f64::INFINITY
        } else {
            let var = self.batch_m2 / (self.batches - 1) as f64;
            (var / self.batches as f64).sqrt()
        };
        (mean, err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::mg1_mean_wait;

    #[test]
    fn perfect_link_always_within_bound() {
        let e = simulate_retransmissions(1.0, 1, 1000, 7).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.std_error, 0.0);
        assert!(e.within(1.0, 3.0));
    }

    #[test]
    fn half_success_two_attempts() {
        let e = simulate_retransmissions(0.5, 2, 400_000, 11).unwrap();
        assert!(e.within(0.75, 3.0), "{e:?}");
    }

    #[test]
    fn retransmission_domain() {
        assert!(simulate_retransmissions(0.0, 1, 10, 0).is_err());
        assert!(simulate_retransmissions(1.1, 1, 10, 0).is_err());
        assert!(simulate_retransmissions(0.5, 1, 0, 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let a = simulate_mg1(50.0, 0.001, 0.3, 20_000, 99).unwrap();
        let b = simulate_mg1(50.0, 0.001, 0.3, 20_000, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate_mg1(50.0, 0.001, 0.3, 20_000, 100).unwrap();
        assert_ne!(a.mean, c.mean);
        let r1 = simulate_retransmissions(0.4, 3, 10_000, 5).unwrap();
        let r2 = simulate_retransmissions(0.4, 3, 10_000, 5).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn unstable_queue_rejected() {
        assert!(matches!(
            simulate_mg1(50.0, 0.001, 0.05, 10, 0),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn fifo_and_nonnegative_waits() {
        let mut q = Mg1Queue::new(300.0, 0.001, 0.5, 3, 100)
            .unwrap()
            .with_event_log();
        q.run(5_000);
        let ev = q.events();
        assert_eq!(ev.len(), 5_000);
        for w in ev.windows(2) {
            assert!(w[1].arrival >= w[0].arrival);
            assert!(w[1].service_start >= w[0].departure);
        }
        for e in ev {
            assert!(e.service_start >= e.arrival);
            assert!(e.transmissions >= 1);
            assert!(e.sojourn() > 0.0);
        }
    }

    #[test]
    fn no_arrivals_means_service_only() {
        let e = simulate_mg1(0.0, 0.002, 1.0, 1000, 1).unwrap();
        assert!((e.mean - 0.002).abs() < 1e-15);
    }

    #[test]
    fn matches_closed_form_reference_case() {
        let target = mg1_mean_wait(50.0, 0.001, 0.245).unwrap();
        let e = simulate_mg1(50.0, 0.001, 0.245, 2_000_000, 2024).unwrap();
        assert!(e.within(target, 3.0), "{e:?} vs {target}");
    }

    #[test]
    fn deterministic_service_matches_md1() {
        let (lambda, tau) = (200.0, 0.001);
        let md1 = tau * (1.0 - lambda * tau / 2.0) / (1.0 - lambda * tau);
        let e = simulate_mg1(lambda, tau, 1.0, 1_000_000, 8).unwrap();
        assert!(e.within(md1, 3.0), "{e:?} vs {md1}");
    }
}
