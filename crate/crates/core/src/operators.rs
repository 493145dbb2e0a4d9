//! Linear measurement operators on flat signals: dense Gaussian compressed
//! sensing, partial circulant with random signs, inpainting masks, and
//! block-average downsampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{gaussian_matrix, Matrix, RandomStream};

#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementOperator {
    Gaussian(Matrix),
    /// Rows `rows` of `Circ(kernel) · diag(signs)`, where `Circ(kernel)` has
    /// `kernel` as its first column.
    PartialCirculant {
        kernel: Vec<f64>,
        signs: Vec<f64>,
        rows: Vec<usize>,
    },
    Mask {
        keep: Vec<bool>,
    },
    Downsample {
        factor: usize,
        input_len: usize,
    },
}

impl MeasurementOperator {
    /// `m x n` matrix with i.i.d. `N(0, 1/m)` entries.
    pub fn gaussian(m: usize, n: usize, stream: &mut RandomStream) -> Self {
        let scale = 1.0 / (m as f64).sqrt();
        MeasurementOperator::Gaussian(gaussian_matrix(m, n, stream).scale(scale))
    }

    /// Gaussian kernel (`N(0, 1/m)`), Rademacher signs, and `m` distinct rows
    /// drawn uniformly without replacement, kept in increasing order.
    pub fn partial_circulant(m: usize, n: usize, stream: &mut RandomStream) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::contract(format!(
                "circulant needs 1 <= m <= n, got m={m}, n={n}"
            )));
        }
        let scale = 1.0 / (m as f64).sqrt();
        let kernel = (0..n).map(|_| scale * stream.normal()).collect();
        let signs = (0..n).map(|_| stream.sign()).collect();
        let mut rows = rand::seq::index::sample(stream, n, m).into_vec();
        rows.sort_unstable();
        Self::circulant_from_parts(kernel, signs, rows)
    }

    pub fn circulant_from_parts(
        kernel: Vec<f64>,
        signs: Vec<f64>,
        rows: Vec<usize>,
    ) -> Result<Self> {
        let n = kernel.len();
        if signs.len() != n {
            return Err(Error::contract("kernel and signs lengths differ"));
        }
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::contract("signs must be ±1"));
        }
        let mut seen = vec![false; n];
        for &r in &rows {
            if r >= n || std::mem::replace(&mut seen[r], true) {
                return Err(Error::contract(format!(
                    "row subset index {r} invalid or repeated"
                )));
            }
        }
        Ok(MeasurementOperator::PartialCirculant {
            kernel,
            signs,
            rows,
        })
    }

    /// Keeps `round(keep_ratio · n)` entries (at least one), chosen uniformly
    /// without replacement.
    pub fn random_mask(n: usize, keep_ratio: f64, stream: &mut RandomStream) -> Result<Self> {
        if !(keep_ratio > 0.0 && keep_ratio <= 1.0) {
            return Err(Error::contract(format!(
                "keep ratio {keep_ratio} outside (0, 1]"
            )));
        }
        let m = measurement_count(n, keep_ratio);
        let mut keep = vec![false; n];
        for i in rand::seq::index::sample(stream, n, m) {
            keep[i] = true;
        }
        Ok(MeasurementOperator::Mask { keep })
    }

    pub fn downsample(factor: usize, input_len: usize) -> Result<Self> {
        if factor == 0 || !input_len.is_multiple_of(factor) {
            return Err(Error::contract(format!(
                "downsample factor {factor} does not divide length {input_len}"
            )));
        }
        Ok(MeasurementOperator::Downsample { factor, input_len })
    }

    pub fn input_len(&self) -> usize {
        match self {
            MeasurementOperator::Gaussian(a) => a.cols(),
            MeasurementOperator::PartialCirculant { kernel, .. } => kernel.len(),
            MeasurementOperator::Mask { keep } => keep.len(),
            MeasurementOperator::Downsample { input_len, .. } => *input_len,
        }
    }

    pub fn output_len(&self) -> usize {
        match self {
            MeasurementOperator::Gaussian(a) => a.rows(),
            MeasurementOperator::PartialCirculant { rows, .. } => rows.len(),
            MeasurementOperator::Mask { keep } => keep.iter().filter(|&&k| k).count(),
            MeasurementOperator::Downsample { factor, input_len } => input_len / factor,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_len() {
            return Err(Error::contract(format!(
                "operator input has length {}, expected {}",
                x.len(),
                self.input_len()
            )));
        }
        Ok(match self {
            MeasurementOperator::Gaussian(a) => a.matvec(x),
            MeasurementOperator::PartialCirculant {
                kernel,
                signs,
                rows,
            } => {
                let n = kernel.len();
                let signed: Vec<f64> = x.iter().zip(signs).map(|(v, s)| v * s).collect();
                rows.iter()
                    .map(|&i| (0..n).map(|j| kernel[(i + n - j) % n] * signed[j]).sum())
                    .collect()
            }
            MeasurementOperator::Mask { keep } => x
                .iter()
                .zip(keep)
                .filter_map(|(&v, &k)| k.then_some(v))
                .collect(),
            MeasurementOperator::Downsample { factor, .. } => x
                .chunks_exact(*factor)
                .map(|block| block.iter().sum::<f64>() / *factor as f64)
                .collect(),
        })
    }

    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.output_len() {
            return Err(Error::contract(format!(
                "adjoint input has length {}, expected {}",
                y.len(),
                self.output_len()
            )));
        }
        Ok(match self {
            MeasurementOperator::Gaussian(a) => a.tr_matvec(y),
            MeasurementOperator::PartialCirculant {
                kernel,
                signs,
                rows,
            } => {
                let n = kernel.len();
                let mut out = vec![0.0; n];
                for (&i, &yi) in rows.iter().zip(y) {
                    for (j, o) in out.iter_mut().enumerate() {
                        *o += kernel[(i + n - j) % n] * yi;
                    }
                }
                out.iter().zip(signs).map(|(v, s)| v * s).collect()
            }
            MeasurementOperator::Mask { keep } => {
                let mut it = y.iter();
                keep.iter()
                    .map(|&k| {
                        if k {
                            *it.next().expect("count matches")
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            MeasurementOperator::Downsample { factor, .. } => {
                let w = 1.0 / *factor as f64;
                y.iter()
                    .flat_map(|&v| std::iter::repeat_n(v * w, *factor))
                    .collect()
            }
        })
    }

    /// Explicit matrix, built by applying the operator to basis vectors.
    pub fn as_dense(&self) -> Matrix {
        let n = self.input_len();
        let mut d = Matrix::zeros(self.output_len(), n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply(&e).expect("basis vector has input length");
            for (i, v) in col.into_iter().enumerate() {
                d[(i, j)] = v;
            }
            e[j] = 0.0;
        }
        d
    }
}

/// Number of kept measurements for an undersampling ratio: `round(ratio·n)`,
/// clamped to `[1, n]`.
pub fn measurement_count(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).round() as usize).clamp(1, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Cs,
    Circulant,
    Inpaint,
    Sr,
}

/// Operator description as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    /// Undersampling ratio `m / n` (cs, circulant, inpaint).
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    /// Downsampling factor (sr).
    #[serde(default = "default_factor")]
    pub factor: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_ratio() -> f64 {
    0.5
}

fn default_factor() -> usize {
    2
}

impl OperatorSpec {
    pub fn build(&self, n: usize) -> Result<MeasurementOperator> {
        let mut stream = RandomStream::new(self.seed, 0);
        let check_ratio = || {
            if self.ratio > 0.0 && self.ratio <= 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "ratio {} outside (0, 1]",
                    self.ratio
                )))
            }
        };
        match self.kind {
            OperatorKind::Cs => {
                check_ratio()?;
                Ok(MeasurementOperator::gaussian(
                    measurement_count(n, self.ratio),
                    n,
                    &mut stream,
                ))
            }
            OperatorKind::Circulant => {
                check_ratio()?;
                MeasurementOperator::partial_circulant(
                    measurement_count(n, self.ratio),
                    n,
                    &mut stream,
                )
            }
            OperatorKind::Inpaint => {
                check_ratio()?;
                MeasurementOperator::random_mask(n, self.ratio, &mut stream)
            }
            OperatorKind::Sr => MeasurementOperator::downsample(self.factor, n)
                .map_err(|e| Error::Config(e.to_string())),
        }
    }
}
