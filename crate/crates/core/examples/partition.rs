//! Dirichlet label-skew partitions at several concentrations.
//!
//! Run with `cargo run --example partition`.

use fedx::data::{dirichlet_partition, SyntheticConfig, SyntheticImages};

fn main() -> fedx::Result<()> {
    let data = SyntheticImages::new(SyntheticConfig::default()).generate(100, 0)?;
    for beta in [0.1, 0.5, 100.0] {
        let spec = dirichlet_partition(&data, 5, beta, 42, 16)?;
        println!("{}\n", spec.summary(&data));
    }
    Ok(())
}
