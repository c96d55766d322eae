//! Embedding matrices: one unit vector per constraint-graph node.

use serde::{Deserialize, Serialize};

use crate::rng::tags;
use crate::scalar::{dot, norm};
use crate::{Error, Result, Rng, Scalar};

/// Rows with a norm below this are treated as degenerate and resampled.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// `rows × rank` matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding<T> {
    rows: usize,
    rank: usize,
    data: Vec<T>,
}

impl<T: Scalar> Embedding<T> {
    pub fn zeros(rows: usize, rank: usize) -> Self {
        Embedding {
            rows,
            rank,
            data: vec![T::zero(); rows * rank],
        }
    }

    pub fn from_vec(rows: usize, rank: usize, data: Vec<T>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::InvalidArgument("embedding rank must be positive".into()));
        }
        if data.len() != rows * rank {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{rank} embedding",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("embedding has non-finite entries".into()));
        }
        Ok(Embedding { rows, rank, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let rank = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != rank) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Embedding::from_vec(rows.len(), rank, rows.concat())
    }

    /// Rows i.i.d. uniform on the unit sphere (Gaussian draw, normalized).
    pub fn init_uniform_sphere(rows: usize, rank: usize, rng: &mut Rng) -> Result<Self> {
        if rank == 0 || rows == 0 {
            return Err(Error::InvalidArgument(format!(
                "embedding needs rows >= 1 and rank >= 1 (got {rows}x{rank})"
            )));
        }
        let mut e = Embedding::zeros(rows, rank);
        for i in 0..rows {
            sample_sphere(e.row_mut(i), rng);
        }
        Ok(e)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.rank..(i + 1) * self.rank]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.rank..(i + 1) * self.rank]
    }

    /// Inner product of rows `i` and `j`.
    pub fn inner(&self, i: usize, j: usize) -> Result<T> {
        if i >= self.rows || j >= self.rows {
            return Err(Error::InvalidArgument(format!(
                "row index ({i}, {j}) out of range for {} rows",
                self.rows
            )));
        }
        Ok(dot(self.row(i), self.row(j)))
    }

    #[inline]
    pub(crate) fn ip(&self, i: usize, j: usize) -> T {
        dot(self.row(i), self.row(j))
    }

    /// Gram matrix `V Vᵀ`, row-major `rows × rows`.
    pub fn gram(&self) -> Vec<T> {
        let n = self.rows;
        let mut g = vec![T::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let x = self.ip(i, j);
                g[i * n + j] = x;
                g[j * n + i] = x;
            }
        }
        g
    }

    /// Projects every row onto the unit sphere. Rows with norm below
    /// [`DEGENERATE_NORM`] are replaced by a sphere sample from the fixed
    /// rescue stream. Returns the number of rescued rows.
    pub fn normalize_rows(&mut self) -> usize {
        let mut rescue = Rng::new(0).split(tags::RESCUE);
        self.normalize_rows_with(&mut rescue)
    }

    /// Like [`normalize_rows`](Self::normalize_rows) with a caller-owned rescue stream.
    pub fn normalize_rows_with(&mut self, rescue: &mut Rng) -> usize {
        let mut rescued = 0;
        for i in 0..self.rows {
            let row = self.row_mut(i);
            let nrm = norm(row);
            if nrm.as_f64() < DEGENERATE_NORM || !nrm.is_finite() {
                sample_sphere(row, rescue);
                rescued += 1;
            } else {
                for x in row.iter_mut() {
                    *x /= nrm;
                }
            }
        }
        rescued
    }

    /// Largest `| ‖v_i‖ − 1 |` over rows.
    pub fn max_norm_error(&self) -> T {
        (0..self.rows)
            .map(|i| (norm(self.row(i)) - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    pub fn frobenius_distance(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }

    pub fn to_json(&self) -> String {
        let file = EmbeddingFile {
            rows: self.rows,
            rank: self.rank,
            data: self.data.iter().map(|x| x.as_f64()).collect(),
        };
        serde_json::to_string(&file).expect("embedding serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: EmbeddingFile =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("embedding file: {e}")))?;
        let data = file.data.into_iter().map(T::lit).collect();
        Embedding::from_vec(file.rows, file.rank, data)
    }
}

/// On-disk embedding checkpoint `{rows, rank, data}` with `data` flat row-major.
#[derive(Serialize, Deserialize)]
struct EmbeddingFile {
    rows: usize,
    rank: usize,
    data: Vec<f64>,
}

pub(crate) fn sample_sphere<T: Scalar>(row: &mut [T], rng: &mut Rng) {
    loop {
        rng.fill_gaussian(row);
        let nrm = norm(row);
        if nrm.as_f64() >= DEGENERATE_NORM {
            for x in row.iter_mut() {
                *x /= nrm;
            }
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, proptest};

    #[test]
    fn rank_one_sphere_is_sign() {
        let e = Embedding::<f64>::init_uniform_sphere(1, 1, &mut Rng::new(4)).unwrap();
        assert_eq!(e.row(0)[0].abs(), 1.0);
        assert!(Embedding::<f64>::init_uniform_sphere(3, 0, &mut Rng::new(4)).is_err());
    }

    #[test]
    fn init_rows_are_unit() {
        let e = Embedding::<f64>::init_uniform_sphere(100, 8, &mut Rng::new(9)).unwrap();
        assert!(e.max_norm_error() <= 1e-12);
    }

    #[test]
    fn init_rows_are_nearly_orthogonal_in_high_rank() {
        // E<u, v> = 0 for independent uniform u, v; sd per pair is 1/sqrt(64).
        let e = Embedding::<f64>::init_uniform_sphere(2000, 64, &mut Rng::new(17)).unwrap();
        let mean: f64 = (0..1000).map(|k| e.ip(2 * k, 2 * k + 1)).sum::<f64>() / 1000.0;
        assert!(mean.abs() <= 0.05, "{mean}");
    }

    #[test]
    fn normalize_examples() {
        let mut e = Embedding::<f64>::from_rows(&[vec![3.0, 4.0], vec![0.6, 0.8], vec![0.0, 0.0]]).unwrap();
        let rescued = e.normalize_rows();
        assert_eq!(rescued, 1);
        assert_eq!(e.row(0), &[0.6, 0.8]);
        assert!((e.row(1)[0] - 0.6).abs() < 1e-15 && (e.row(1)[1] - 0.8).abs() < 1e-15);
        assert!((norm(e.row(2)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inner_products() {
        let e = Embedding::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(e.inner(0, 0).unwrap(), 1.0);
        assert_eq!(e.inner(0, 1).unwrap(), 0.0);
        assert!(e.inner(0, 2).is_err());

        // three planar unit vectors 120° apart
        let s = 3f64.sqrt() / 2.0;
        let k3 = Embedding::from_rows(&[vec![1.0, 0.0], vec![-0.5, s], vec![-0.5, -s]]).unwrap();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            assert!((k3.inner(i, j).unwrap() + 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn json_round_trip() {
        let e = Embedding::<f64>::init_uniform_sphere(7, 3, &mut Rng::new(1)).unwrap();
        assert_eq!(Embedding::<f64>::from_json(&e.to_json()).unwrap(), e);
        assert!(Embedding::<f64>::from_json("{\"rows\": 2, \"rank\": 2, \"data\": [1.0]}").is_err());
        assert!(Embedding::<f64>::from_json("{\"rows\": 2").is_err());
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(seed in any::<u64>(), rows in 1usize..12, rank in 1usize..6) {
            let mut r = Rng::new(seed);
            let mut data = vec![0.0f64; rows * rank];
            r.fill_gaussian(&mut data);
            let mut e = Embedding::from_vec(rows, rank, data).unwrap();
            e.normalize_rows();
            let once = e.clone();
            e.normalize_rows();
            prop_assert!(e.frobenius_distance(&once) <= 1e-15 * (rows as f64).sqrt() * 4.0);
        }

        #[test]
        fn gram_is_psd_with_unit_diagonal(seed in any::<u64>(), rows in 1usize..10, rank in 1usize..6) {
            let e = Embedding::<f64>::init_uniform_sphere(rows, rank, &mut Rng::new(seed)).unwrap();
            let g = e.gram();
            for i in 0..rows {
                prop_assert!((g[i * rows + i] - 1.0).abs() <= 1e-9);
            }
            let m = nalgebra::DMatrix::from_row_slice(rows, rows, &g);
            let min = m.symmetric_eigenvalues().min();
            prop_assert!(min >= -1e-8);
        }
    }
}
