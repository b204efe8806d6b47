//! Dense tensors in the fixed `(out, in, h, w)` / `(channel, h, w)` layouts.
//!
//! Every tensor in the crate uses row-major storage over these dimension
//! orders; there is deliberately no transposition machinery.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense 4-D tensor with dimensions ordered `(out, in, h, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTensor<T> {
    dims: [usize; 4],
    values: Vec<T>,
}

/// Integer tensor holding per-element sampling repetition counts.
pub type CountTensor = WeightTensor<u64>;

impl<T: Scalar> WeightTensor<T> {
    pub fn new(dims: [usize; 4], values: Vec<T>) -> Result<Self> {
        let expect = dims.iter().product::<usize>();
        if values.len() != expect {
            return Err(Error::Dimension(format!(
                "value count {} does not match dims {:?} (expected {})",
                values.len(),
                dims,
                expect
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        Self {
            dims,
            values: vec![T::zero(); dims.iter().product()],
        }
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut([usize; 4]) -> T) -> Self {
        let mut values = Vec::with_capacity(dims.iter().product());
        for o in 0..dims[0] {
            for i in 0..dims[1] {
                for y in 0..dims[2] {
                    for x in 0..dims[3] {
                        values.push(f([o, i, y, x]));
                    }
                }
            }
        }
        Self { dims, values }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn offset(&self, idx: [usize; 4]) -> usize {
        debug_assert!(idx.iter().zip(&self.dims).all(|(i, d)| i < d));
        ((idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]) * self.dims[3] + idx[3]
    }

    #[inline]
    pub fn get(&self, idx: [usize; 4]) -> T {
        self.values[self.offset(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: [usize; 4], value: T) {
        let at = self.offset(idx);
        self.values[at] = value;
    }

    fn check_region(&self, start: [usize; 4], extent: [usize; 4]) -> Result<()> {
        for d in 0..4 {
            if extent[d] == 0 {
                return Err(Error::Dimension(format!(
                    "zero extent along dim {d} of region {start:?}+{extent:?}"
                )));
            }
            if start[d] + extent[d] > self.dims[d] {
                return Err(Error::Dimension(format!(
                    "region {start:?}+{extent:?} exceeds tensor dims {:?} along dim {d}",
                    self.dims
                )));
            }
        }
        Ok(())
    }

    /// Copies out the contiguous sub-tensor at `start` with the given extent.
    pub fn sub_tensor(&self, start: [usize; 4], extent: [usize; 4]) -> Result<Self> {
        self.check_region(start, extent)?;
        let mut values = Vec::with_capacity(extent.iter().product());
        for o in 0..extent[0] {
            for i in 0..extent[1] {
                for y in 0..extent[2] {
                    for x in 0..extent[3] {
                        values.push(self.get([
                            start[0] + o,
                            start[1] + i,
                            start[2] + y,
                            start[3] + x,
                        ]));
                    }
                }
            }
        }
        Ok(Self {
            dims: extent,
            values,
        })
    }

    /// Writes `block` into this tensor with its origin at `start`.
    pub fn write_block(&mut self, start: [usize; 4], block: &Self) -> Result<()> {
        self.check_region(start, block.dims)?;
        for o in 0..block.dims[0] {
            for i in 0..block.dims[1] {
                for y in 0..block.dims[2] {
                    for x in 0..block.dims[3] {
                        self.set(
                            [start[0] + o, start[1] + i, start[2] + y, start[3] + x],
                            block.get([o, i, y, x]),
                        );
                    }
                }
            }
        }
        Ok(())
    }
}

/// Dense 3-D feature map with dimensions ordered `(channel, h, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap<T> {
    dims: [usize; 3],
    values: Vec<T>,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn new(dims: [usize; 3], values: Vec<T>) -> Result<Self> {
        let expect = dims.iter().product::<usize>();
        if values.len() != expect {
            return Err(Error::Dimension(format!(
                "value count {} does not match dims {:?} (expected {})",
                values.len(),
                dims,
                expect
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            values: vec![T::zero(); dims.iter().product()],
        }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut([usize; 3]) -> T) -> Self {
        let mut values = Vec::with_capacity(dims.iter().product());
        for c in 0..dims[0] {
            for y in 0..dims[1] {
                for x in 0..dims[2] {
                    values.push(f([c, y, x]));
                }
            }
        }
        Self { dims, values }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn offset(&self, idx: [usize; 3]) -> usize {
        debug_assert!(idx.iter().zip(&self.dims).all(|(i, d)| i < d));
        (idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]
    }

    #[inline]
    pub fn get(&self, idx: [usize; 3]) -> T {
        self.values[self.offset(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: [usize; 3], value: T) {
        let at = self.offset(idx);
        self.values[at] = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_are_row_major() {
        let t = WeightTensor::from_fn([2, 3, 4, 5], |[o, i, y, x]| {
            (((o * 3 + i) * 4 + y) * 5 + x) as i64
        });
        assert_eq!(t.get([1, 2, 3, 4]), 119);
        assert_eq!(t.get([0, 0, 0, 1]), 1);
        let f = FeatureMap::from_fn([2, 3, 4], |[c, y, x]| ((c * 3 + y) * 4 + x) as i64);
        assert_eq!(f.get([1, 2, 3]), 23);
    }

    #[test]
    fn sub_tensor_rejects_out_of_bounds() {
        let t = WeightTensor::<i64>::zeros([2, 2, 2, 2]);
        assert!(t.sub_tensor([1, 0, 0, 0], [2, 1, 1, 1]).is_err());
        assert!(t.sub_tensor([0, 0, 0, 0], [2, 2, 2, 2]).is_ok());
    }

    #[test]
    fn write_block_round_trips() {
        let mut t = WeightTensor::<i64>::zeros([3, 1, 1, 3]);
        let block = WeightTensor::new([2, 1, 1, 2], vec![1, 2, 3, 4]).unwrap();
        t.write_block([1, 0, 0, 1], &block).unwrap();
        assert_eq!(t.get([1, 0, 0, 1]), 1);
        assert_eq!(t.get([2, 0, 0, 2]), 4);
        assert_eq!(t.sub_tensor([1, 0, 0, 1], [2, 1, 1, 2]).unwrap(), block);
    }

    #[test]
    fn value_count_must_match_dims() {
        assert!(WeightTensor::new([2, 2, 1, 1], vec![0i64; 3]).is_err());
        assert!(FeatureMap::new([2, 2, 2], vec![0i64; 7]).is_err());
    }
}
