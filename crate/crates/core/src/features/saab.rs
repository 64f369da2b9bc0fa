//! Single-channel Saab transform over 8-dimensional octant vectors.
//!
//! The first kernel is the constant DC vector `(1, …, 1)/√8`. The remaining
//! kernels are the principal components of the data restricted to the
//! orthogonal complement of DC, in decreasing-variance order. Each output
//! component carries an energy: the parent channel's energy times the share
//! of total variance that component explains.

use nalgebra::{SMatrix, SVector, SymmetricEigen};

use super::FeatureError;

pub const OCTANTS: usize = 8;
const AC: usize = OCTANTS - 1;

/// Channels whose total variance is at or below this yield a DC-only filter.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

pub type Octants = [f64; OCTANTS];

pub(crate) const INV_SQRT_8: f64 = 0.353_553_390_593_273_8;
pub(crate) const SQRT_8: f64 = 2.828_427_124_746_190_3;

pub fn dc_kernel() -> Octants {
    [INV_SQRT_8; OCTANTS]
}

fn pairwise_sum(x: &Octants) -> f64 {
    ((x[0] + x[1]) + (x[2] + x[3])) + ((x[4] + x[5]) + (x[6] + x[7]))
}

/// DC coefficient, evaluated as `mean · √8` so a constant vector `v·1` maps
/// to exactly `√8·v`.
#[inline]
pub fn dc_coefficient(x: &Octants) -> f64 {
    pairwise_sum(x) / 8.0 * SQRT_8
}

/// Orthonormal basis of the zero-sum subspace (Helmert contrasts), one
/// basis vector per row.
fn helmert_basis() -> [Octants; AC] {
    let mut rows = [[0.0; OCTANTS]; AC];
    for (k, row) in rows.iter_mut().enumerate() {
        let m = (k + 1) as f64;
        let scale = 1.0 / (m * (m + 1.0)).sqrt();
        for v in row.iter_mut().take(k + 1) {
            *v = scale;
        }
        row[k + 1] = -m * scale;
    }
    rows
}

/// Streaming first and second moments of octant vectors. Merging is
/// associative, so shards may be accumulated independently and combined in a
/// fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    count: u64,
    mean: SVector<f64, OCTANTS>,
    scatter: SMatrix<f64, OCTANTS, OCTANTS>,
    max_norm: f64,
}

impl Default for ChannelStats {
    fn default() -> Self {
        Self {
            count: 0,
            mean: SVector::zeros(),
            scatter: SMatrix::zeros(),
            max_norm: 0.0,
        }
    }
}

impl ChannelStats {
    pub fn from_vectors<'a>(vectors: impl IntoIterator<Item = &'a Octants>) -> Self {
        let mut s = Self::default();
        for v in vectors {
            s.push(v);
        }
        s
    }

    pub fn push(&mut self, x: &Octants) {
        let x = SVector::<f64, OCTANTS>::from_column_slice(x);
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        self.mean += delta / n;
        let delta2 = x - self.mean;
        self.scatter += delta * delta2.transpose();
        self.max_norm = self.max_norm.max(x.norm());
    }

    pub fn merge(&mut self, other: &ChannelStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        self.scatter += other.scatter + delta * delta.transpose() * (na * nb / n);
        self.mean += delta * (nb / n);
        self.count += other.count;
        self.max_norm = self.max_norm.max(other.max_norm);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Population covariance.
    pub fn covariance(&self) -> SMatrix<f64, OCTANTS, OCTANTS> {
        if self.count == 0 {
            return SMatrix::zeros();
        }
        self.scatter / self.count as f64
    }

    pub fn max_norm(&self) -> f64 {
        self.max_norm
    }
}

/// Learned Saab kernels for one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SaabChannelFilter {
    /// Kernel columns; `kernels[0]` is the DC kernel.
    kernels: Vec<Octants>,
    bias: f64,
    /// Energy of each output component, DC first.
    energies: Vec<f64>,
}

impl SaabChannelFilter {
    /// Fits DC + seven AC kernels. Fails with `DegenerateTraining` when the
    /// channel has no variance.
    pub fn fit(stats: &ChannelStats, parent_energy: f64) -> Result<Self, FeatureError> {
        let cov = stats.covariance();
        let total = cov.trace();
        if stats.count == 0 || total <= DEGENERATE_VARIANCE {
            return Err(FeatureError::DegenerateTraining { variance: total });
        }
        let dc = SVector::<f64, OCTANTS>::from_element(INV_SQRT_8);
        let dc_var = (dc.transpose() * cov * dc)[(0, 0)].max(0.0);

        let basis = helmert_basis();
        let q = SMatrix::<f64, OCTANTS, AC>::from_fn(|r, c| basis[c][r]);
        let reduced = q.transpose() * cov * q;
        let eig = SymmetricEigen::new(reduced);
        let mut order: Vec<usize> = (0..AC).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

        let mut kernels = vec![dc_kernel()];
        let mut energies = vec![parent_energy * dc_var / total];
        for &i in &order {
            let mut k = q * eig.eigenvectors.column(i);
            k /= k.norm();
            // sign convention: largest-magnitude entry positive
            let lead = k.iter().copied().fold(0.0f64, |acc, v| if v.abs() > acc.abs() + 1e-12 { v } else { acc });
            if lead < 0.0 {
                k = -k;
            }
            let mut col = [0.0; OCTANTS];
            col.copy_from_slice(k.as_slice());
            kernels.push(col);
            energies.push(parent_energy * eig.eigenvalues[i].max(0.0) / total);
        }
        Ok(Self {
            kernels,
            bias: stats.max_norm(),
            energies,
        })
    }

    /// A filter that keeps only the DC component, carrying all of the
    /// parent's energy.
    pub fn dc_only(parent_energy: f64, bias: f64) -> Self {
        Self {
            kernels: vec![dc_kernel()],
            bias,
            energies: vec![parent_energy],
        }
    }

    /// Rebuilds a filter from stored parts (model deserialization).
    pub fn from_parts(kernels: Vec<Octants>, bias: f64, energies: Vec<f64>) -> Result<Self, FeatureError> {
        if kernels.is_empty() || kernels.len() > OCTANTS || kernels.len() != energies.len() {
            return Err(FeatureError::ModelFormat(format!(
                "filter with {} kernels and {} energies",
                kernels.len(),
                energies.len()
            )));
        }
        Ok(Self { kernels, bias, energies })
    }

    pub fn kernels(&self) -> &[Octants] {
        &self.kernels
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn output_count(&self) -> usize {
        self.kernels.len()
    }

    /// Raw projection `Kᵀx`.
    pub fn project(&self, x: &Octants, out: &mut [f64]) {
        out[0] = dc_coefficient(x);
        for (o, k) in out[1..].iter_mut().zip(&self.kernels[1..]) {
            *o = k.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// Saab response `Kᵀ(x + b·1)`. The bias only moves the DC coefficient,
    /// by `b·√8`, since every AC kernel sums to zero.
    pub fn transform(&self, x: &Octants, out: &mut [f64]) {
        self.project(x, out);
        out[0] += self.bias * SQRT_8;
    }
}
