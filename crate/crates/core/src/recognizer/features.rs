use crate::corpus::{read_artf, write_artf, Dtype};
use crate::error::{Error, Result};
use std::path::Path;

/// Frame-major T×d feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!("{} values do not form rows of width {dim}", data.len())));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(dim * rows.len());
        for r in rows {
            if r.len() != dim {
                return Err(Error::Shape(format!("row of width {} in a width-{dim} matrix", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn map_rows(&self, out_dim: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> FeatureMatrix {
        let mut data = vec![0.0; out_dim * self.len()];
        for (src, dst) in self.rows().zip(data.chunks_exact_mut(out_dim)) {
            f(src, dst);
        }
        FeatureMatrix { dim: out_dim, data }
    }

    /// Reads an ARTF feature file (f32, height 1, width = dimension).
    pub fn read(path: &Path) -> Result<Self> {
        let (h, data) = read_artf(path)?;
        if h.height != 1 {
            return Err(Error::parse(path.display().to_string(), "feature files must have height 1"));
        }
        Self::new(h.width as usize, data.into_iter().map(f64::from).collect())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let data: Vec<f32> = self.data.iter().map(|&v| v as f32).collect();
        write_artf(path, Dtype::F32, 1, self.dim, &data)
    }
}
