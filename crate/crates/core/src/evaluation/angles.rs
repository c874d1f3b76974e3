use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::encoder::{Head, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::{Real, Tensor};

const EVAL_CHUNK: usize = 512;

/// Angle between `a` and `b` in degrees, as `2·atan2(|â − b̂|, |â + b̂|)`.
///
/// Equal to `arccos` of the cosine similarity but accurate near 0° and 180°,
/// where `arccos` turns a rounding error of 1e-16 into 1e-6 degrees.
fn angle_deg(a: &[f64], b: &[f64], what: &'static str) -> Result<f64> {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm(what));
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    Ok((2.0 * diff.sqrt().atan2(sum.sqrt()))
        .to_degrees()
        .clamp(0.0, 180.0))
}

/// Backbone embeddings of every sample, as `f64` rows.
pub(crate) fn backbone_rows<T: Real>(
    model: &ModelParams<T>,
    dataset: &Dataset,
) -> Result<Vec<Vec<f64>>> {
    let all: Vec<usize> = (0..dataset.len()).collect();
    let mut rows = Vec::with_capacity(dataset.len());
    for chunk in all.chunks(EVAL_CHUNK) {
        let z: Tensor<T> = model.embed(&dataset.batch(chunk), Head::None)?;
        for r in 0..z.rows() {
            rows.push(z.row(r).iter().map(|v| v.as_f64()).collect());
        }
    }
    Ok(rows)
}

/// Angle in degrees between `local(x)` and `global(x)` for every sample.
pub fn embedding_angles<T: Real>(
    local: &ModelParams<T>,
    global: &ModelParams<T>,
    dataset: &Dataset,
) -> Result<Vec<f64>> {
    if local.descriptor().input_dim != global.descriptor().input_dim {
        return Err(Error::DescriptorMismatch(format!(
            "local encoder takes {} inputs, global {}",
            local.descriptor().input_dim,
            global.descriptor().input_dim
        )));
    }
    let a = backbone_rows(local, dataset)?;
    let b = backbone_rows(global, dataset)?;
    a.iter()
        .zip(&b)
        .map(|(x, y)| angle_deg(x, y, "embedding"))
        .collect()
}

/// Angle in degrees between two embeddings.
pub fn embedding_angle(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!("{} vs {}", a.len(), b.len())));
    }
    angle_deg(a, b, "embedding")
}

/// `K × K` angles between class-mean embeddings of `model`.
pub fn inter_class_angles<T: Real>(
    model: &ModelParams<T>,
    dataset: &Dataset,
) -> Result<Vec<Vec<f64>>> {
    prototype_angles(&backbone_rows(model, dataset)?, dataset)
}

fn prototype_angles(rows: &[Vec<f64>], dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
    let k = dataset.class_count();
    let dim = rows.first().map_or(0, Vec::len);
    let mut protos = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (row, &label) in rows.iter().zip(dataset.labels()) {
        counts[label] += 1;
        protos[label].iter_mut().zip(row).for_each(|(p, v)| *p += v);
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Dataset(format!(
            "class {c} has no samples to form a prototype"
        )));
    }
    for (p, &n) in protos.iter_mut().zip(&counts) {
        p.iter_mut().for_each(|v| *v /= n as f64);
    }
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let a = angle_deg(&protos[i], &protos[j], "class prototype")?;
            m[i][j] = a;
            m[j][i] = a;
        }
    }
    Ok(m)
}

/// Summary of one class's angle distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleStats {
    pub class: usize,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl AngleStats {
    fn of(class: usize, values: &mut [f64]) -> Self {
        values.sort_by(f64::total_cmp);
        let n = values.len();
        if n == 0 {
            return AngleStats {
                class,
                count: 0,
                mean: f64::NAN,
                std: f64::NAN,
                min: f64::NAN,
                median: f64::NAN,
                max: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let median = if n % 2 == 1 {
            values[n / 2]
        } else {
            0.5 * (values[n / 2 - 1] + values[n / 2])
        };
        AngleStats {
            class,
            count: n,
            mean,
            std: var.sqrt(),
            min: values[0],
            median,
            max: values[n - 1],
        }
    }
}

/// Local-vs-global angles plus the local model's inter-class geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleReport {
    /// Per test sample, degrees between `f(x)` and `F(x)`.
    pub per_sample: Vec<f64>,
    pub per_class: Vec<AngleStats>,
    pub mean_angle_deg: f64,
    /// Prototype angles of the local model, in degrees.
    pub inter_class: Vec<Vec<f64>>,
    /// Mean over the off-diagonal pairs of `inter_class`.
    pub mean_inter_class_deg: f64,
}

pub fn angle_report<T: Real>(
    local: &ModelParams<T>,
    global: &ModelParams<T>,
    dataset: &Dataset,
) -> Result<AngleReport> {
    let per_sample = embedding_angles(local, global, dataset)?;
    let mut by_class = vec![Vec::new(); dataset.class_count()];
    for (&a, &label) in per_sample.iter().zip(dataset.labels()) {
        by_class[label].push(a);
    }
    let per_class = by_class
        .iter_mut()
        .enumerate()
        .map(|(c, v)| AngleStats::of(c, v))
        .collect();
    let inter_class = inter_class_angles(local, dataset)?;
    let k = inter_class.len();
    let pairs = (k * k.saturating_sub(1)) as f64;
    let mean_inter_class_deg = if pairs > 0.0 {
        inter_class.iter().flatten().sum::<f64>() / pairs
    } else {
        0.0
    };
    Ok(AngleReport {
        mean_angle_deg: per_sample.iter().sum::<f64>() / per_sample.len().max(1) as f64,
        per_sample,
        per_class,
        inter_class,
        mean_inter_class_deg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn canonical_angles() {
        assert_abs_diff_eq!(
            embedding_angle(&[1.0, 2.0], &[2.0, 4.0]).unwrap(),
            0.0,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            embedding_angle(&[1.0, 2.0], &[-1.0, -2.0]).unwrap(),
            180.0,
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(
            embedding_angle(&[1.0, 0.0], &[0.0, 3.0]).unwrap(),
            90.0,
            epsilon = 1e-9
        );
        assert!(matches!(
            embedding_angle(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroNorm(_))
        ));
    }

    #[test]
    fn prototypes_on_orthogonal_axes() {
        let d = Dataset::new((1, 1, 1), 3, vec![0.0; 4], vec![0, 0, 1, 2]).unwrap();
        let rows = vec![
            vec![1.0, 0.0],
            vec![3.0, 0.0],
            vec![0.0, 5.0],
            vec![-1.0, 0.0],
        ];
        let m = prototype_angles(&rows, &d).unwrap();
        assert_abs_diff_eq!(m[0][1], 90.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m[0][2], 180.0, epsilon = 1e-9);
        for (i, row) in m.iter().enumerate() {
            assert_eq!(row[i], 0.0);
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, m[j][i]);
            }
        }
    }

    #[test]
    fn empty_class_rejected() {
        let d = Dataset::new((1, 1, 1), 3, vec![0.0; 2], vec![0, 1]).unwrap();
        assert!(prototype_angles(&[vec![1.0], vec![2.0]], &d).is_err());
    }
}
