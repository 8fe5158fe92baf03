use crate::microdoppler::Spectrogram;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Row-major (rows × cols) preprocessed spectrogram.
    pub values: Vec<f64>,
    pub label: usize,
}

/// Equal-shape labelled spectrograms.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub rows: usize,
    pub cols: usize,
    pub label_names: Vec<String>,
    pub samples: Vec<Sample>,
}

impl LabeledDataset {
    pub fn new(rows: usize, cols: usize, label_names: Vec<String>) -> Self {
        Self {
            rows,
            cols,
            label_names,
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, values: Vec<f64>, label: usize) -> Result<()> {
        if values.len() != self.rows * self.cols {
            return Err(Error::invalid(format!(
                "sample has {} values, dataset expects {}x{}",
                values.len(),
                self.rows,
                self.cols
            )));
        }
        if label >= self.label_names.len() {
            return Err(Error::invalid(format!("label {label} out of range")));
        }
        self.samples.push(Sample { values, label });
        Ok(())
    }

    pub fn push_spectrogram(&mut self, spec: &Spectrogram, label: usize) -> Result<()> {
        if spec.rows != self.rows || spec.cols != self.cols {
            return Err(Error::invalid(format!(
                "spectrogram is {}x{}, dataset expects {}x{}",
                spec.rows, spec.cols, self.rows, self.cols
            )));
        }
        self.push(spec.values.clone(), label)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.samples {
            if s.values.len() != self.rows * self.cols || s.label >= self.label_names.len() {
                return Err(Error::invalid(
                    "dataset sample violates its shape or label range",
                ));
            }
        }
        Ok(())
    }

    /// Samples per label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_classes()];
        for s in &self.samples {
            c[s.label] += 1;
        }
        c
    }
}
