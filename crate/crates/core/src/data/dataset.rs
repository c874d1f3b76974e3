use crate::error::{Error, Result};
use crate::numerics::{Real, Tensor};

/// Labelled image set, stored instance-major as `count × channels × height × width`.
///
/// Labels are only used for partitioning and evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    channels: usize,
    height: usize,
    width: usize,
    class_count: usize,
    samples: Vec<f32>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        (channels, height, width): (usize, usize, usize),
        class_count: usize,
        samples: Vec<f32>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        let dim = channels * height * width;
        if dim == 0 {
            return Err(Error::Dataset(format!(
                "sample shape {channels}x{height}x{width} is empty"
            )));
        }
        if samples.len() != labels.len() * dim {
            return Err(Error::Dataset(format!(
                "{} labels need {} pixel values of {dim} each, got {}",
                labels.len(),
                labels.len() * dim,
                samples.len()
            )));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(Error::Dataset(format!(
                "label {l} of sample {i} is out of range for {class_count} classes"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Dataset(format!(
                "pixel {i} = {} lies outside [0, 1]",
                samples[i]
            )));
        }
        Ok(Dataset {
            channels,
            height,
            width,
            class_count,
            samples,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    /// Flattened length of one sample.
    pub fn sample_dim(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> &[f32] {
        let d = self.sample_dim();
        &self.samples[i * d..(i + 1) * d]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Sample indices grouped by class.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut samples = Vec::with_capacity(indices.len() * self.sample_dim());
        for &i in indices {
            samples.extend_from_slice(self.sample(i));
        }
        Dataset {
            samples,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> Dataset {
        Dataset {
            channels: self.channels,
            height: self.height,
            width: self.width,
            class_count: self.class_count,
            samples: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// `indices.len() × sample_dim` batch matrix.
    pub fn batch<T: Real>(&self, indices: &[usize]) -> Tensor<T> {
        let mut data = Vec::with_capacity(indices.len() * self.sample_dim());
        for &i in indices {
            data.extend(self.sample(i).iter().map(|&v| T::of(v as f64)));
        }
        Tensor::new(vec![indices.len(), self.sample_dim()], data).expect("batch shape")
    }

    /// Whole dataset as one matrix.
    pub fn matrix<T: Real>(&self) -> Tensor<T> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.batch(&all)
    }
}
