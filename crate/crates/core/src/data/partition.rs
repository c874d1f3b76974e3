use std::fs;
use std::path::Path;

use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::Dataset;

/// Upper bound on Dirichlet redraws when a client ends up below the minimum size.
pub const MAX_PARTITION_RETRIES: usize = 10_000;

/// Assignment of sample indices to clients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub beta: f64,
    pub seed: u64,
    /// Number of samples in the partitioned dataset.
    pub total: usize,
    pub min_client_size: usize,
    /// Dirichlet redraws needed to satisfy `min_client_size`.
    pub retries: usize,
    /// `proportions[k][j]`: share of class `k` assigned to client `j`.
    pub proportions: Vec<Vec<f64>>,
    /// Sorted sample indices owned by each client.
    pub client_indices: Vec<Vec<usize>>,
}

impl PartitionSpec {
    pub fn clients(&self) -> usize {
        self.client_indices.len()
    }

    pub fn client_sizes(&self) -> Vec<usize> {
        self.client_indices.iter().map(Vec::len).collect()
    }

    /// FedAvg weights `|D^m| / |D|`.
    pub fn weights(&self) -> Vec<f64> {
        self.client_indices
            .iter()
            .map(|c| c.len() as f64 / self.total as f64)
            .collect()
    }

    /// Checks disjointness, coverage and the proportion rows.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.total];
        for (m, idx) in self.client_indices.iter().enumerate() {
            for &i in idx {
                if i >= self.total || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Partition(format!(
                        "client {m} holds index {i} that is out of range or already assigned"
                    )));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::Partition(format!(
                "sample {i} is not assigned to any client"
            )));
        }
        for (k, row) in self.proportions.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if row.len() != self.clients() || (s - 1.0).abs() > 1e-6 {
                return Err(Error::Partition(format!("proportion row {k} sums to {s}")));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: PartitionSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn summary(&self, dataset: &Dataset) -> PartitionSummary {
        let k = dataset.class_count();
        let histograms: Vec<Vec<usize>> = self
            .client_indices
            .iter()
            .map(|idx| {
                let mut h = vec![0; k];
                for &i in idx {
                    h[dataset.label(i)] += 1;
                }
                h
            })
            .collect();
        let max_class_share = (0..k)
            .map(|c| {
                let total: usize = histograms.iter().map(|h| h[c]).sum();
                let max = histograms.iter().map(|h| h[c]).max().unwrap_or(0);
                if total == 0 {
                    0.0
                } else {
                    max as f64 / total as f64
                }
            })
            .collect();
        PartitionSummary {
            clients: self.clients(),
            beta: self.beta,
            seed: self.seed,
            retries: self.retries,
            client_sizes: self.client_sizes(),
            histograms,
            max_class_share,
        }
    }
}

/// Per-client sizes and class histograms of a partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionSummary {
    pub clients: usize,
    pub beta: f64,
    pub seed: u64,
    pub retries: usize,
    pub client_sizes: Vec<usize>,
    /// `histograms[m][k]`: samples of class `k` held by client `m`.
    pub histograms: Vec<Vec<usize>>,
    /// Per class, the largest share any single client holds.
    pub max_class_share: Vec<f64>,
}

impl PartitionSummary {
    pub fn mean_max_class_share(&self) -> f64 {
        self.max_class_share.iter().sum::<f64>() / self.max_class_share.len().max(1) as f64
    }
}

impl std::fmt::Display for PartitionSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{} clients, beta={}, seed={}, redraws={}",
            self.clients, self.beta, self.seed, self.retries
        )?;
        for (m, (size, h)) in self.client_sizes.iter().zip(&self.histograms).enumerate() {
            let cells: Vec<String> = h.iter().map(|c| format!("{c:5}")).collect();
            writeln!(f, "client {m:3} size {size:6} | {}", cells.join(""))?;
        }
        let shares: Vec<String> = self
            .max_class_share
            .iter()
            .map(|s| format!("{s:.2}"))
            .collect();
        write!(f, "max class share: {}", shares.join(" "))
    }
}

/// One draw from a symmetric `Dir_n(beta)` via normalised gamma variates.
fn sample_dirichlet<R: Rng>(rng: &mut R, n: usize, beta: f64) -> Vec<f64> {
    let gamma = Gamma::new(beta, 1.0).expect("beta validated positive");
    loop {
        let draws: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|d| d / total).collect();
        }
    }
}

/// Integer split of `count` items by `shares` that preserves the total:
/// floors first, then one extra item to the largest remainders (ties to the
/// lower index).
pub fn largest_remainder(count: usize, shares: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = shares.iter().map(|p| p * count as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &j in order.iter().take(count.saturating_sub(assigned)) {
        counts[j] += 1;
    }
    counts
}

/// Splits every class across `clients` by proportions drawn from
/// `Dir_clients(beta)`.
///
/// Draws are repeated with a fresh sub-stream until every client holds at
/// least `min_client_size` samples.
pub fn dirichlet_partition(
    dataset: &Dataset,
    clients: usize,
    beta: f64,
    seed: u64,
    min_client_size: usize,
) -> Result<PartitionSpec> {
    if clients == 0 {
        return Err(Error::Partition("need at least one client".into()));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Partition(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if dataset.len() < clients || dataset.len() < clients * min_client_size {
        return Err(Error::Partition(format!(
            "{} samples cannot give {clients} clients at least {} each",
            dataset.len(),
            min_client_size.max(1)
        )));
    }
    let by_class = dataset.class_indices();
    for attempt in 0..MAX_PARTITION_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let mut proportions = Vec::with_capacity(by_class.len());
        let mut client_indices = vec![Vec::new(); clients];
        for members in &by_class {
            let p = if clients == 1 {
                vec![1.0]
            } else {
                sample_dirichlet(&mut rng, clients, beta)
            };
            let mut shuffled = members.clone();
            shuffled.shuffle(&mut rng);
            let mut start = 0;
            for (j, n) in largest_remainder(shuffled.len(), &p)
                .into_iter()
                .enumerate()
            {
                client_indices[j].extend_from_slice(&shuffled[start..start + n]);
                start += n;
            }
            proportions.push(p);
        }
        if client_indices
            .iter()
            .all(|c| c.len() >= min_client_size.max(1))
        {
            for c in &mut client_indices {
                c.sort_unstable();
            }
            if attempt > 0 {
                info!("dirichlet partition needed {attempt} redraws to give every client {min_client_size} samples");
            }
            return Ok(PartitionSpec {
                beta,
                seed,
                total: dataset.len(),
                min_client_size,
                retries: attempt,
                proportions,
                client_indices,
            });
        }
    }
    Err(Error::Partition(format!(
        "no Dirichlet draw in {MAX_PARTITION_RETRIES} attempts gave every one of {clients} clients \
         {min_client_size} samples (beta={beta})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(per_class: usize, classes: usize) -> Dataset {
        let labels: Vec<usize> = (0..classes).flat_map(|k| vec![k; per_class]).collect();
        Dataset::new((1, 1, 1), classes, vec![0.5; labels.len()], labels).unwrap()
    }

    #[test]
    fn largest_remainder_preserves_totals() {
        assert_eq!(largest_remainder(10, &[0.25, 0.25, 0.5]), vec![3, 2, 5]);
        assert_eq!(
            largest_remainder(7, &[1.0 / 3.0; 3]).iter().sum::<usize>(),
            7
        );
        assert_eq!(largest_remainder(0, &[0.5, 0.5]), vec![0, 0]);
    }

    #[test]
    fn single_client_owns_everything() {
        let d = balanced(20, 3);
        let p = dirichlet_partition(&d, 1, 0.5, 3, 1).unwrap();
        assert_eq!(p.client_indices, vec![(0..60).collect::<Vec<_>>()]);
        assert!(p.proportions.iter().all(|row| row == &vec![1.0]));
        p.validate().unwrap();
    }

    #[test]
    fn deterministic_and_covering() {
        let d = balanced(100, 10);
        let a = dirichlet_partition(&d, 5, 0.5, 11, 32).unwrap();
        let b = dirichlet_partition(&d, 5, 0.5, 11, 32).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
        assert_eq!(a.client_sizes().iter().sum::<usize>(), d.len());
        assert!(a.client_sizes().iter().all(|&s| s >= 32));
    }

    #[test]
    fn too_small_dataset_rejected() {
        let d = balanced(1, 3);
        assert!(dirichlet_partition(&d, 4, 0.5, 0, 1).is_err());
        assert!(dirichlet_partition(&d, 2, 0.0, 0, 1).is_err());
    }
}
