//! Client shard construction: IID round-robin or Dirichlet label skew.
//!
//! The Dirichlet draw uses an explicitly documented construction so an
//! independent reference sampler can reproduce it from this comment alone:
//!
//! - uniforms are 53-bit: `u = (next_u64 >> 11) * 2^-53` ([`crate::rng::uniform53`]);
//! - standard normals come from Box-Muller, cosine branch only:
//!   `z = sqrt(-2 ln u1) * cos(2 pi u2)` with `u1` redrawn while zero;
//! - `Gamma(alpha)` for `alpha >= 1` is Marsaglia-Tsang: `d = alpha - 1/3`,
//!   `c = 1 / sqrt(9 d)`; repeat { draw `z` until `v = (1 + c z)^3 > 0`, draw
//!   `u`, accept `d * v` when `ln u < z^2 / 2 + d - d v + d ln v` };
//! - for `alpha < 1`: `Gamma(alpha + 1) * u^(1 / alpha)` with a fresh
//!   uniform `u` (redrawn while zero);
//! - a symmetric `Dirichlet(alpha)` over C classes is C gamma draws
//!   normalized by their sum.
//!
//! Stream consumption order: per client (ascending id) one Dirichlet vector
//! (class-ascending gamma draws), then per class (ascending) a Fisher-Yates
//! shuffle of that class's sample indices.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{domains, stream, uniform53};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PartitionMode {
    Iid,
    /// Dirichlet concentration alpha > 0; smaller alpha = stronger skew.
    Dirichlet(f64),
}

/// Assignment of every sample of a dataset to exactly one client.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionPlan {
    pub client_count: usize,
    /// `assignment[sample_index] = client id`.
    pub assignment: Vec<usize>,
    pub mode: PartitionMode,
}

impl PartitionPlan {
    pub fn client_indices(&self, client: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == client)
            .map(|(i, _)| i)
            .collect()
    }

    /// Materialize a client's shard, preserving source order.
    pub fn shard(&self, d: &Dataset, client: usize) -> Result<Dataset> {
        d.subset(
            format!("{}-client{}", d.name, client),
            &self.client_indices(client),
        )
    }

    pub fn shard_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.client_count];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }
}

fn box_muller_normal(rng: &mut ChaCha8Rng) -> f64 {
    let mut u1 = uniform53(rng);
    while u1 == 0.0 {
        u1 = uniform53(rng);
    }
    let u2 = uniform53(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn gamma_sample(alpha: f64, rng: &mut ChaCha8Rng) -> f64 {
    if alpha < 1.0 {
        let boost = gamma_sample(alpha + 1.0, rng);
        let mut u = uniform53(rng);
        while u == 0.0 {
            u = uniform53(rng);
        }
        return boost * u.powf(1.0 / alpha);
    }
    let d = alpha - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let (z, v) = loop {
            let z = box_muller_normal(rng);
            let t = 1.0 + c * z;
            if t > 0.0 {
                break (z, t * t * t);
            }
        };
        let u = uniform53(rng);
        if u > 0.0 && u.ln() < 0.5 * z * z + d - d * v + d * v.ln() {
            return d * v;
        }
    }
}

fn dirichlet(alpha: f64, classes: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let draws: Vec<f64> = (0..classes).map(|_| gamma_sample(alpha, rng)).collect();
    let sum: f64 = draws.iter().sum();
    draws.into_iter().map(|g| g / sum).collect()
}

/// Largest-remainder rounding of `weights * total` to integer counts that
/// sum to `total`; ties resolve to the lower index.
fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = weights
        .iter()
        .map(|w| (w * total as f64).floor() as usize)
        .collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = weights[a] * total as f64 - (weights[a] * total as f64).floor();
        let fb = weights[b] * total as f64 - (weights[b] * total as f64).floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Partition `d` across `n_clients`.
///
/// IID: Fisher-Yates shuffle of all indices, then round-robin (`shuffled[j]`
/// goes to client `j mod N`). Dirichlet: each client draws class proportions
/// `q_i ~ Dirichlet(alpha)`; class `c`'s samples are dealt to clients in
/// ascending order with counts `largest_remainder(q[:][c] / sum, m_c)`. Any
/// client left empty steals one sample from the largest shard (deterministic
/// tie-break to the lowest id).
pub fn partition(
    d: &Dataset,
    n_clients: usize,
    mode: PartitionMode,
    seed: u64,
) -> Result<PartitionPlan> {
    if n_clients == 0 {
        return Err(Error::Data("client count must be >= 1".into()));
    }
    if d.len() < n_clients {
        return Err(Error::Data(format!(
            "cannot partition {} samples across {n_clients} clients",
            d.len()
        )));
    }
    let mut rng = stream(seed, domains::PARTITION, 0);
    let mut assignment = vec![0usize; d.len()];

    match mode {
        PartitionMode::Iid => {
            let mut idx: Vec<usize> = (0..d.len()).collect();
            for i in (1..idx.len()).rev() {
                let j = rng.gen_range(0..=i);
                idx.swap(i, j);
            }
            for (pos, &sample) in idx.iter().enumerate() {
                assignment[sample] = pos % n_clients;
            }
        }
        PartitionMode::Dirichlet(alpha) => {
            if alpha <= 0.0 {
                return Err(Error::Data(format!(
                    "dirichlet alpha must be > 0, got {alpha}"
                )));
            }
            let classes = 2usize;
            let q: Vec<Vec<f64>> = (0..n_clients)
                .map(|_| dirichlet(alpha, classes, &mut rng))
                .collect();
            for class in 0..classes {
                let mut idx: Vec<usize> = d
                    .samples
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.label as usize == class)
                    .map(|(i, _)| i)
                    .collect();
                for i in (1..idx.len()).rev() {
                    let j = rng.gen_range(0..=i);
                    idx.swap(i, j);
                }
                let col_sum: f64 = q.iter().map(|row| row[class]).sum();
                let weights: Vec<f64> = q.iter().map(|row| row[class] / col_sum).collect();
                let counts = largest_remainder(&weights, idx.len());
                let mut cursor = 0;
                for (client, &count) in counts.iter().enumerate() {
                    for &sample in &idx[cursor..cursor + count] {
                        assignment[sample] = client;
                    }
                    cursor += count;
                }
            }
            rebalance_empty_clients(&mut assignment, n_clients);
        }
    }

    Ok(PartitionPlan {
        client_count: n_clients,
        assignment,
        mode,
    })
}

fn rebalance_empty_clients(assignment: &mut [usize], n_clients: usize) {
    loop {
        let mut sizes = vec![0usize; n_clients];
        for &c in assignment.iter() {
            sizes[c] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let donor = sizes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .expect("at least one client");
        let moved = assignment
            .iter()
            .position(|&c| c == donor)
            .expect("donor has samples");
        assignment[moved] = empty;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate::generate_synthetic;

    #[test]
    fn single_client_takes_everything() {
        let d = generate_synthetic(37, 0.3, 1).unwrap();
        let plan = partition(&d, 1, PartitionMode::Iid, 2).unwrap();
        assert!(plan.assignment.iter().all(|&c| c == 0));
        assert_eq!(plan.shard(&d, 0).unwrap().len(), 37);
    }

    #[test]
    fn iid_round_robin_gives_equal_shards() {
        let d = generate_synthetic(100, 0.3, 4).unwrap();
        let plan = partition(&d, 4, PartitionMode::Iid, 5).unwrap();
        assert_eq!(plan.shard_sizes(), vec![25, 25, 25, 25]);
    }

    #[test]
    fn plans_are_exhaustive_and_disjoint() {
        let d = generate_synthetic(211, 0.25, 6).unwrap();
        for mode in [PartitionMode::Iid, PartitionMode::Dirichlet(0.3)] {
            let plan = partition(&d, 7, mode, 8).unwrap();
            assert_eq!(plan.assignment.len(), d.len());
            assert_eq!(plan.shard_sizes().iter().sum::<usize>(), d.len());
            for (client, size) in plan.shard_sizes().iter().enumerate() {
                assert!(*size > 0, "client {client} is empty");
            }
        }
    }

    #[test]
    fn more_clients_than_samples_is_an_error() {
        let d = generate_synthetic(3, 0.4, 1).unwrap();
        assert!(partition(&d, 4, PartitionMode::Iid, 1).is_err());
    }

    /// Independent reference sampler following the documented
    /// Dirichlet-via-Gamma construction, written from the module doc rather
    /// than the implementation.
    mod reference {
        use crate::rng::uniform53;
        use rand_chacha::ChaCha8Rng;

        fn normal(rng: &mut ChaCha8Rng) -> f64 {
            let mut u1 = uniform53(rng);
            while u1 == 0.0 {
                u1 = uniform53(rng);
            }
            let u2 = uniform53(rng);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        }

        pub fn gamma(alpha: f64, rng: &mut ChaCha8Rng) -> f64 {
            if alpha < 1.0 {
                let g = gamma(alpha + 1.0, rng);
                let mut u = uniform53(rng);
                while u == 0.0 {
                    u = uniform53(rng);
                }
                return g * u.powf(1.0 / alpha);
            }
            let d = alpha - 1.0 / 3.0;
            let c = 1.0 / (9.0 * d).sqrt();
            loop {
                let mut z;
                let mut v;
                loop {
                    z = normal(rng);
                    v = 1.0 + c * z;
                    if v > 0.0 {
                        v = v * v * v;
                        break;
                    }
                }
                let u = uniform53(rng);
                if u > 0.0 && u.ln() < 0.5 * z * z + d - d * v + d * v.ln() {
                    return d * v;
                }
            }
        }
    }

    #[test]
    fn dirichlet_counts_match_reference_sampler() {
        let d = generate_synthetic(200, 0.35, 17).unwrap();
        let alpha = 0.1;
        let n = 2usize;
        let plan = partition(&d, n, PartitionMode::Dirichlet(alpha), 23).unwrap();

        // replay the documented stream consumption with the reference gamma
        let mut rng = crate::rng::stream(23, crate::rng::domains::PARTITION, 0);
        let mut q = Vec::new();
        for _ in 0..n {
            let g0 = reference::gamma(alpha, &mut rng);
            let g1 = reference::gamma(alpha, &mut rng);
            q.push(vec![g0 / (g0 + g1), g1 / (g0 + g1)]);
        }
        use rand::Rng;
        let mut expected = vec![0usize; n];
        let mut per_class_counts: Vec<Vec<usize>> = vec![vec![0; n]; 2];
        for class in 0..2usize {
            let mut idx: Vec<usize> = d
                .samples
                .iter()
                .enumerate()
                .filter(|(_, s)| s.label as usize == class)
                .map(|(i, _)| i)
                .collect();
            for i in (1..idx.len()).rev() {
                let j = rng.gen_range(0..=i);
                idx.swap(i, j);
            }
            let col: f64 = q.iter().map(|r| r[class]).sum();
            let weights: Vec<f64> = q.iter().map(|r| r[class] / col).collect();
            let counts = super::largest_remainder(&weights, idx.len());
            for (client, c) in counts.iter().enumerate() {
                expected[client] += c;
                per_class_counts[class][client] = *c;
            }
        }
        // empty-client rebalance not expected for this seed; sizes match
        assert_eq!(plan.shard_sizes(), expected);

        // per-class counts match as well
        for class in 0..2usize {
            for client in 0..n {
                let got = plan
                    .shard(&d, client)
                    .unwrap()
                    .samples
                    .iter()
                    .filter(|s| s.label as usize == class)
                    .count();
                assert_eq!(got, per_class_counts[class][client]);
            }
        }
    }

    #[test]
    fn low_alpha_skews_harder_than_high_alpha() {
        let d = generate_synthetic(400, 0.5, 3).unwrap();
        let skew = |alpha: f64| -> f64 {
            let plan = partition(&d, 4, PartitionMode::Dirichlet(alpha), 11).unwrap();
            (0..4)
                .map(|c| {
                    let shard = plan.shard(&d, c).unwrap();
                    (shard.hotspot_rate() - 0.5).abs()
                })
                .sum::<f64>()
        };
        assert!(skew(0.1) > skew(100.0));
    }
}
