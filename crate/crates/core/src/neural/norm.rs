use crate::scalar::Real;

/// Per-feature affine standardisation `(x - mean) / std`.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Real> Standardizer<T> {
    pub fn identity(n: usize) -> Self {
        Self { mean: vec![T::zero(); n], std: vec![T::one(); n] }
    }

    /// Fits per-feature statistics; `rows` yields one slice per feature.
    /// Features with (near) zero spread keep unit scale.
    pub fn fit<I>(rows: I) -> Self
    where
        I: IntoIterator<Item = Vec<T>>,
    {
        let mut mean = Vec::new();
        let mut std = Vec::new();
        for row in rows {
            let n = T::from_usize_lossy(row.len().max(1));
            let m = row.iter().copied().sum::<T>() / n;
            let v = row.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / n;
            let s = v.sqrt();
            mean.push(m);
            std.push(if s > T::lit(1e-12) { s } else { T::one() });
        }
        Self { mean, std }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: usize, x: T) -> T {
        (x - self.mean[i]) / self.std[i]
    }

    #[inline]
    pub fn invert(&self, i: usize, z: T) -> T {
        z * self.std[i] + self.mean[i]
    }

    pub fn apply_vec(&self, x: &[T]) -> Vec<T> {
        x.iter().enumerate().map(|(i, &v)| self.apply(i, v)).collect()
    }

    pub fn invert_vec(&self, z: &[T]) -> Vec<T> {
        z.iter().enumerate().map(|(i, &v)| self.invert(i, v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let s = Standardizer::fit(vec![vec![1.0, 2.0, 6.0], vec![-3.0, 0.5, 0.25], vec![4.0; 3]]);
        assert_eq!(s.std[2], 1.0);
        let y = [0.123456789f64, -7.5, 4.0];
        let back = s.invert_vec(&s.apply_vec(&y));
        for (a, b) in y.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
