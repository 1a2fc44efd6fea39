use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Which phase a dataset may feed. Only `Train` data may reach a parameter update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub role: Role,
}

impl Dataset {
    pub fn new(features: Tensor, labels: Vec<usize>, role: Role) -> Result<Self> {
        if features.shape().len() != 2 {
            return Err(Error::InvalidInput(format!("features must be N×d, got {:?}", features.shape())));
        }
        if features.rows() != labels.len() {
            return Err(Error::LengthMismatch(features.rows(), labels.len()));
        }
        Ok(Dataset { features, labels, role })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, idx: &[usize], role: Role) -> Result<Dataset> {
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(self.features.select_rows(idx)?, labels, role)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub num_classes: usize,
}

impl DatasetSplit {
    pub fn new(train: Dataset, validation: Dataset, test: Dataset, num_classes: usize) -> Result<Self> {
        for (ds, role) in [(&train, Role::Train), (&validation, Role::Validation), (&test, Role::Test)] {
            if ds.role != role {
                return Err(Error::InvalidInput(format!("expected {role:?} data, got {:?}", ds.role)));
            }
            if let Some(&l) = ds.labels.iter().find(|&&l| l >= num_classes) {
                return Err(Error::LabelOutOfRange { label: l, classes: num_classes });
            }
        }
        if train.dim() != validation.dim() || train.dim() != test.dim() {
            return Err(Error::InvalidInput("splits differ in feature width".into()));
        }
        Ok(DatasetSplit { train, validation, test, num_classes })
    }

    /// Stratified split with per-class shares `train`/`validation` and the remainder for test.
    pub fn stratified(data: &Dataset, train: f64, validation: f64, seed: u64) -> Result<Self> {
        if !(train > 0.0 && validation >= 0.0 && train + validation < 1.0) {
            return Err(Error::Config(format!("bad split fractions {train}/{validation}")));
        }
        let num_classes = data.labels.iter().max().map_or(0, |m| m + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut tr, mut va, mut te) = (Vec::new(), Vec::new(), Vec::new());
        for c in 0..num_classes {
            let mut members: Vec<usize> = (0..data.len()).filter(|&i| data.labels[i] == c).collect();
            members.shuffle(&mut rng);
            let n = members.len();
            let n_tr = (n as f64 * train).floor() as usize;
            let n_va = (n as f64 * validation).floor() as usize;
            tr.extend_from_slice(&members[..n_tr]);
            va.extend_from_slice(&members[n_tr..n_tr + n_va]);
            te.extend_from_slice(&members[n_tr + n_va..]);
        }
        for part in [&mut tr, &mut va, &mut te] {
            if part.is_empty() {
                return Err(Error::InvalidInput("a split came out empty".into()));
            }
            part.shuffle(&mut rng);
        }
        DatasetSplit::new(
            data.subset(&tr, Role::Train)?,
            data.subset(&va, Role::Validation)?,
            data.subset(&te, Role::Test)?,
            num_classes,
        )
    }

    /// Stratified train/validation split of `train_pool` paired with a separate test set.
    pub fn with_holdout(train_pool: &Dataset, test: Dataset, validation: f64, seed: u64) -> Result<Self> {
        if !(validation > 0.0 && validation < 1.0) {
            return Err(Error::Config(format!("validation fraction {validation} outside (0, 1)")));
        }
        let num_classes = train_pool.labels.iter().chain(&test.labels).max().map_or(0, |m| m + 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut tr, mut va) = (Vec::new(), Vec::new());
        for c in 0..num_classes {
            let mut members: Vec<usize> = (0..train_pool.len()).filter(|&i| train_pool.labels[i] == c).collect();
            members.shuffle(&mut rng);
            let n_va = (members.len() as f64 * validation).floor() as usize;
            va.extend_from_slice(&members[..n_va]);
            tr.extend_from_slice(&members[n_va..]);
        }
        if tr.is_empty() || va.is_empty() {
            return Err(Error::InvalidInput("a split came out empty".into()));
        }
        tr.shuffle(&mut rng);
        va.shuffle(&mut rng);
        let test = Dataset { role: Role::Test, ..test };
        DatasetSplit::new(train_pool.subset(&tr, Role::Train)?, train_pool.subset(&va, Role::Validation)?, test, num_classes)
    }
}

/// Isotropic Gaussian classes around fixed means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBlobSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub means: Vec<Vec<f64>>,
    pub stddev: f64,
    pub samples_per_class: usize,
    pub seed: u64,
}

impl SyntheticBlobSpec {
    /// Means `(separation/√2)·e_c`, so every pair of class means is `separation` apart.
    pub fn separated(
        num_classes: usize,
        dim: usize,
        separation: f64,
        stddev: f64,
        samples_per_class: usize,
        seed: u64,
    ) -> Result<Self> {
        if num_classes > dim {
            return Err(Error::Config(format!("{num_classes} orthogonal means need dim ≥ classes, got {dim}")));
        }
        let r = separation / std::f64::consts::SQRT_2;
        let means = (0..num_classes)
            .map(|c| (0..dim).map(|j| if j == c { r } else { 0.0 }).collect())
            .collect();
        Ok(SyntheticBlobSpec { num_classes, dim, means, stddev, samples_per_class, seed })
    }
}

/// Samples the blobs and splits them 70/15/15 per class.
pub fn generate_blobs(spec: &SyntheticBlobSpec) -> Result<DatasetSplit> {
    if spec.num_classes < 2 {
        return Err(Error::Config("need at least 2 classes".into()));
    }
    if !(spec.stddev > 0.0) || !spec.stddev.is_finite() {
        return Err(Error::Config(format!("stddev must be positive, got {}", spec.stddev)));
    }
    if spec.means.len() != spec.num_classes || spec.means.iter().any(|m| m.len() != spec.dim) {
        return Err(Error::Config("means must be num_classes vectors of length dim".into()));
    }
    if spec.dim == 0 || spec.samples_per_class < 7 {
        return Err(Error::Config("need dim ≥ 1 and at least 7 samples per class".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.stddev).map_err(|e| Error::Config(e.to_string()))?;
    let n = spec.num_classes * spec.samples_per_class;
    let mut data = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for (c, mean) in spec.means.iter().enumerate() {
        for _ in 0..spec.samples_per_class {
            data.extend(mean.iter().map(|m| m + noise.sample(&mut rng)));
            labels.push(c);
        }
    }
    let all = Dataset::new(Tensor::matrix(n, spec.dim, data)?, labels, Role::Train)?;
    DatasetSplit::stratified(&all, 0.70, 0.15, spec.seed.wrapping_add(1))
}
