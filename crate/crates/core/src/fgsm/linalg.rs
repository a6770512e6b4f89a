//! Dense row-major kernels. Blocks address a `cols`-wide window starting at
//! column `offset` of a matrix whose rows are `stride` long.

use crate::Scalar;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Block {
    pub rows: usize,
    pub cols: usize,
    pub stride: usize,
    pub offset: usize,
}

impl Block {
    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            stride: cols,
            offset: 0,
        }
    }

    #[inline]
    fn row<'a, T>(&self, w: &'a [T], r: usize) -> &'a [T] {
        let start = r * self.stride + self.offset;
        &w[start..start + self.cols]
    }

    #[inline]
    fn row_mut<'a, T>(&self, w: &'a mut [T], r: usize) -> &'a mut [T] {
        let start = r * self.stride + self.offset;
        &mut w[start..start + self.cols]
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `out += W x`
pub(crate) fn matvec_acc<T: Scalar>(w: &[T], block: Block, x: &[T], out: &mut [T]) {
    debug_assert_eq!(x.len(), block.cols);
    debug_assert_eq!(out.len(), block.rows);
    for (r, o) in out.iter_mut().enumerate() {
        *o += dot(block.row(w, r), x);
    }
}

/// `out += Wᵀ y`
pub(crate) fn matvec_t_acc<T: Scalar>(w: &[T], block: Block, y: &[T], out: &mut [T]) {
    debug_assert_eq!(y.len(), block.rows);
    debug_assert_eq!(out.len(), block.cols);
    for (r, &yr) in y.iter().enumerate() {
        if yr == T::zero() {
            continue;
        }
        for (o, &wv) in out.iter_mut().zip(block.row(w, r)) {
            *o += wv * yr;
        }
    }
}

/// `G += y xᵀ`
pub(crate) fn outer_acc<T: Scalar>(g: &mut [T], block: Block, y: &[T], x: &[T]) {
    debug_assert_eq!(y.len(), block.rows);
    debug_assert_eq!(x.len(), block.cols);
    for (r, &yr) in y.iter().enumerate() {
        if yr == T::zero() {
            continue;
        }
        for (gv, &xv) in block.row_mut(g, r).iter_mut().zip(x) {
            *gv += yr * xv;
        }
    }
}

pub(crate) fn add_assign<T: Scalar>(acc: &mut [T], x: &[T]) {
    for (a, &b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}
