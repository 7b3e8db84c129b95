//! Index maps for rearranging row-major tensors through gather nodes.
//!
//! The model moves data between three layouts constantly: feature blocks
//! (D×T×N), per-time node matrices (N×D), and per-pedestrian time matrices
//! (T×D). Each helper returns the gather index vector plus the resulting
//! shape, so rearrangements stay single tape nodes.

/// Flat offset of element (i, j, k) in a row-major (d0, d1, d2) block.
pub fn idx3(shape: [usize; 3], i: usize, j: usize, k: usize) -> usize {
    (i * shape[1] + j) * shape[2] + k
}

/// Axis permutation of a rank-3 block: output axis a takes source axis
/// `perm[a]`. `permute3(s, [2,0,1])` turns (T,N,D) into (D,T,N).
pub fn permute3(shape: [usize; 3], perm: [usize; 3]) -> (Vec<usize>, Vec<usize>) {
    let out_shape = [shape[perm[0]], shape[perm[1]], shape[perm[2]]];
    let mut index = Vec::with_capacity(shape.iter().product());
    for a in 0..out_shape[0] {
        for b in 0..out_shape[1] {
            for c in 0..out_shape[2] {
                let mut src = [0usize; 3];
                src[perm[0]] = a;
                src[perm[1]] = b;
                src[perm[2]] = c;
                index.push(idx3(shape, src[0], src[1], src[2]));
            }
        }
    }
    (index, out_shape.to_vec())
}

/// 2-D transpose of an (m×n) matrix.
pub fn transpose2(m: usize, n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut index = Vec::with_capacity(m * n);
    for j in 0..n {
        for i in 0..m {
            index.push(i * n + j);
        }
    }
    (index, vec![n, m])
}

/// Time slice t of a (D×T×N) block, transposed to node-major (N×D) so
/// pedestrian rows can enter matrix products directly.
pub fn time_slice_rows(d: usize, t_len: usize, n_len: usize, t: usize) -> (Vec<usize>, Vec<usize>) {
    let mut index = Vec::with_capacity(n_len * d);
    for n in 0..n_len {
        for f in 0..d {
            index.push(idx3([d, t_len, n_len], f, t, n));
        }
    }
    (index, vec![n_len, d])
}

/// Pedestrian slice n of a (D×T×N) block, transposed to time-major (T×D).
pub fn node_slice_rows(d: usize, t_len: usize, n_len: usize, n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut index = Vec::with_capacity(t_len * d);
    for t in 0..t_len {
        for f in 0..d {
            index.push(idx3([d, t_len, n_len], f, t, n));
        }
    }
    (index, vec![t_len, d])
}

/// Channel c of a (D×T×N) block as a (T×N) matrix.
pub fn channel_plane(d: usize, t_len: usize, n_len: usize, c: usize) -> (Vec<usize>, Vec<usize>) {
    let mut index = Vec::with_capacity(t_len * n_len);
    for t in 0..t_len {
        for n in 0..n_len {
            index.push(idx3([d, t_len, n_len], c, t, n));
        }
    }
    (index, vec![t_len, n_len])
}

/// Broadcast of a length-m column vector across n columns, giving (m×n).
pub fn broadcast_col(m: usize, n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut index = Vec::with_capacity(m * n);
    for i in 0..m {
        for _ in 0..n {
            index.push(i);
        }
    }
    (index, vec![m, n])
}

/// Broadcast of a length-n row vector across m rows, giving (m×n).
pub fn broadcast_row(m: usize, n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut index = Vec::with_capacity(m * n);
    for _ in 0..m {
        for j in 0..n {
            index.push(j);
        }
    }
    (index, vec![m, n])
}

/// Pairs two stacked length-m vectors [xs..., ys...] into (m×2) rows.
pub fn interleave_pairs(m: usize) -> (Vec<usize>, Vec<usize>) {
    let mut index = Vec::with_capacity(2 * m);
    for i in 0..m {
        index.push(i);
        index.push(m + i);
    }
    (index, vec![m, 2])
}
