use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

/// Samples with class labels and real targets (the label as a float for
/// classification data).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Split {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub targets: Vec<f64>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Samples as rows, in the CSV matrix format.
    pub fn features_csv(&self) -> Result<String> {
        let dim = self.features.first().map_or(0, Vec::len);
        let flat: Vec<f64> = self.features.iter().flatten().copied().collect();
        Ok(Matrix::from_row_major(self.len(), dim, &flat)?.to_csv_string())
    }

    /// One `label,target` line per sample.
    pub fn labels_csv(&self) -> String {
        self.labels.iter().zip(&self.targets).map(|(l, t)| format!("{l},{t}\n")).collect()
    }

    pub fn from_csv(features: &str, labels: &str) -> Result<Self> {
        let m = Matrix::from_csv_str(features)?;
        let features: Vec<Vec<f64>> = (0..m.rows()).map(|r| (0..m.cols()).map(|c| m[(r, c)]).collect()).collect();
        let mut out = Split { features, ..Default::default() };
        for (k, line) in labels.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let (l, t) = line.split_once(',').unwrap_or((line, line));
            let label = l.trim().parse().map_err(|_| Error::Parse(format!("labels line {}: bad label {l:?}", k + 1)))?;
            let target = t.trim().parse().map_err(|_| Error::Parse(format!("labels line {}: bad target {t:?}", k + 1)))?;
            out.labels.push(label);
            out.targets.push(target);
        }
        if out.labels.len() != out.len() {
            return Err(Error::DimensionMismatch(format!("{} labels for {} samples", out.labels.len(), out.len())));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Split,
    pub test: Split,
    pub dim: usize,
    pub classes: usize,
}

fn split_80_20(mut samples: Vec<(Vec<f64>, usize, f64)>, seed: u64) -> (Split, Split) {
    samples.shuffle(&mut rng::stream(seed, &[0x5111]));
    let n_train = samples.len() * 4 / 5;
    let mut train = Split::default();
    let mut test = Split::default();
    for (k, (x, l, t)) in samples.into_iter().enumerate() {
        let s = if k < n_train { &mut train } else { &mut test };
        s.features.push(x);
        s.labels.push(l);
        s.targets.push(t);
    }
    (train, test)
}

/// Gaussian clusters around standard-normal centers, shuffled and split 80/20.
pub fn make_blobs(dim: usize, classes: usize, samples_per_class: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if dim < 2 {
        return Err(Error::InvalidInput(format!("blobs need dim >= 2, got {dim}")));
    }
    if classes < 2 || samples_per_class == 0 {
        return Err(Error::InvalidInput("blobs need at least 2 classes and 1 sample per class".into()));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::InvalidInput(format!("spread {spread} must be nonnegative")));
    }
    let mut r = rng::stream(seed, &[0xB10B]);
    let centers: Vec<Vec<f64>> =
        (0..classes).map(|_| (0..dim).map(|_| StandardNormal.sample(&mut r)).collect()).collect();
    let mut samples = Vec::with_capacity(classes * samples_per_class);
    for (label, c) in centers.iter().enumerate() {
        for _ in 0..samples_per_class {
            let x: Vec<f64> = c
                .iter()
                .map(|v| {
                    let e: f64 = StandardNormal.sample(&mut r);
                    v + spread * e
                })
                .collect();
            samples.push((x, label, label as f64));
        }
    }
    let (train, test) = split_80_20(samples, seed);
    Ok(Dataset { train, test, dim, classes })
}

/// Noisy linear targets `t = w*.x + b* + noise e` with standard-normal features.
pub fn make_regression(dim: usize, samples: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if dim == 0 || samples < 2 {
        return Err(Error::InvalidInput("regression needs dim >= 1 and at least 2 samples".into()));
    }
    let mut r = rng::stream(seed, &[0x4E6]);
    let w: Vec<f64> = (0..=dim).map(|_| StandardNormal.sample(&mut r)).collect();
    let rows = (0..samples)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut r)).collect();
            let e: f64 = StandardNormal.sample(&mut r);
            let t = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + w[dim] + noise * e;
            (x, 0, t)
        })
        .collect();
    let (train, test) = split_80_20(rows, seed);
    Ok(Dataset { train, test, dim, classes: 1 })
}
