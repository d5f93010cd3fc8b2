use crate::error::{Error, Result};

/// An `N x T` array of intensities: one row per sample, one column per probe.
///
/// Values are stored row-major. Construction rejects ragged input,
/// non-finite entries, `N = 0` and `T < 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMatrix {
    n_samples: usize,
    n_probes: usize,
    values: Vec<f64>,
    sample_ids: Vec<String>,
    probe_positions: Vec<i64>,
    probe_ids: Option<Vec<String>>,
}

impl IntensityMatrix {
    /// Builds a matrix from rows, labelling samples `s0, s1, ...` and probes `1..=T`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..rows.len()).map(|i| format!("s{i}")).collect();
        Self::with_ids(rows, ids)
    }

    pub fn with_ids(rows: Vec<Vec<f64>>, sample_ids: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidMatrix("matrix has no rows".into()));
        }
        if sample_ids.len() != rows.len() {
            return Err(Error::InvalidMatrix(format!(
                "{} sample ids for {} rows",
                sample_ids.len(),
                rows.len()
            )));
        }
        let n_probes = rows[0].len();
        let mut values = Vec::with_capacity(rows.len() * n_probes);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_probes {
                return Err(Error::InvalidMatrix(format!(
                    "row {i} has {} values, expected {n_probes}",
                    row.len()
                )));
            }
            values.extend(row);
        }
        Self::from_flat(sample_ids.len(), n_probes, values, sample_ids)
    }

    /// Builds a matrix from row-major values.
    pub fn from_flat(
        n_samples: usize,
        n_probes: usize,
        values: Vec<f64>,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::InvalidMatrix("matrix has no rows".into()));
        }
        if n_probes < 2 {
            return Err(Error::InvalidMatrix(format!(
                "need at least 2 probes, got {n_probes}"
            )));
        }
        if values.len() != n_samples * n_probes || sample_ids.len() != n_samples {
            return Err(Error::InvalidMatrix("dimension mismatch".into()));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix(format!(
                "non-finite value at row {}, column {}",
                k / n_probes,
                k % n_probes
            )));
        }
        Ok(Self {
            n_samples,
            n_probes,
            values,
            sample_ids,
            probe_positions: (1..=n_probes as i64).collect(),
            probe_ids: None,
        })
    }

    /// Attaches monotone probe positions (for example genomic coordinates).
    pub fn with_positions(mut self, positions: Vec<i64>) -> Result<Self> {
        if positions.len() != self.n_probes {
            return Err(Error::InvalidMatrix(format!(
                "{} positions for {} probes",
                positions.len(),
                self.n_probes
            )));
        }
        if positions.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidMatrix("probe positions are not monotone".into()));
        }
        self.probe_positions = positions;
        Ok(self)
    }

    pub fn with_probe_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_probes {
            return Err(Error::InvalidMatrix(format!(
                "{} probe ids for {} probes",
                ids.len(),
                self.n_probes
            )));
        }
        self.probe_ids = Some(ids);
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_probes(&self) -> usize {
        self.n_probes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_probes..(i + 1) * self.n_probes]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.n_probes..(i + 1) * self.n_probes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_probes)
    }

    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.values[i * self.n_probes + t]
    }

    pub fn column(&self, t: usize) -> Vec<f64> {
        (0..self.n_samples).map(|i| self.get(i, t)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn probe_positions(&self) -> &[i64] {
        &self.probe_positions
    }

    pub fn probe_ids(&self) -> Option<&[String]> {
        self.probe_ids.as_deref()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Returns a copy with the same labels and new values of identical shape.
    pub(crate) fn replace_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            ..self.clone()
        }
    }

    /// Returns the matrix with rows reordered by `order`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        let rows = order.iter().map(|&i| self.row(i).to_vec()).collect();
        let ids = order.iter().map(|&i| self.sample_ids[i].clone()).collect();
        let mut m = Self::with_ids(rows, ids)?;
        m.probe_positions = self.probe_positions.clone();
        m.probe_ids = self.probe_ids.clone();
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_short() {
        assert!(IntensityMatrix::from_rows(vec![vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(IntensityMatrix::from_rows(vec![vec![1.0]]).is_err());
        assert!(IntensityMatrix::from_rows(vec![]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let err = IntensityMatrix::from_rows(vec![vec![1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::InvalidMatrix(_)));
    }

    #[test]
    fn default_positions_are_one_based() {
        let m = IntensityMatrix::from_rows(vec![vec![0.0; 4]]).unwrap();
        assert_eq!(m.probe_positions(), &[1, 2, 3, 4]);
        assert!(m.clone().with_positions(vec![4, 3, 2, 1]).is_err());
    }
}
