//! Direct NCHW convolution kernels, forward and backward.
//!
//! Same-size convolution with zero padding: output spatial dims equal input
//! dims, pad = (S-1)/2. The loops are ordered so the inner body is a
//! scale-and-add over contiguous row slices, which the compiler vectorizes.
//! Border handling is done by clamping the valid output range per kernel
//! offset instead of materializing a padded buffer.

use crate::tensor::{Element, Tensor};

/// Valid output range along one axis for kernel offset `d = k - pad`:
/// output index y is valid iff 0 <= y + d < extent.
fn valid_range(extent: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi_signed = (extent as isize - d).min(extent as isize);
    let hi = hi_signed.max(0) as usize;
    (lo.min(hi), hi)
}

/// out[b,o,y,x] = bias[o] + sum_{c,i,j} in[b,c,y+i-pad,x+j-pad] * w[o,c,i,j]
pub fn forward<T: Element>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    pad: usize,
) -> Tensor<T> {
    let [b, cin, h, w]: [usize; 4] = input.shape().try_into().unwrap();
    let [cout, _, s, _]: [usize; 4] = weight.shape().try_into().unwrap();
    let plane = h * w;
    let mut out = vec![T::zero(); b * cout * plane];

    for bi in 0..b {
        for o in 0..cout {
            let out_plane = &mut out[(bi * cout + o) * plane..][..plane];
            out_plane.fill(bias.data()[o]);
            for c in 0..cin {
                let in_plane = &input.data()[(bi * cin + c) * plane..][..plane];
                let w_base = (o * cin + c) * s * s;
                for ky in 0..s {
                    let dy = ky as isize - pad as isize;
                    let (y0, y1) = valid_range(h, dy);
                    for kx in 0..s {
                        let wv = weight.data()[w_base + ky * s + kx];
                        let dx = kx as isize - pad as isize;
                        let (x0, x1) = valid_range(w, dx);
                        if x0 >= x1 {
                            continue;
                        }
                        for y in y0..y1 {
                            let iy = (y as isize + dy) as usize;
                            let src = &in_plane[iy * w + ((x0 as isize + dx) as usize)..]
                                [..x1 - x0];
                            let dst = &mut out_plane[y * w + x0..][..x1 - x0];
                            for (d, s_) in dst.iter_mut().zip(src) {
                                *d += wv * *s_;
                            }
                        }
                    }
                }
            }
        }
    }

    Tensor::new(vec![b, cout, h, w], out).unwrap()
}

/// Gradient with respect to the input: the correlation of the output
/// gradient with the kernel, scattered through the same index map as the
/// forward pass.
pub fn backward_input<T: Element>(
    grad_out: &[T],
    weight: &Tensor<T>,
    input_shape: &[usize],
    pad: usize,
    grad_in: &mut [T],
) {
    let [b, cin, h, w]: [usize; 4] = input_shape.try_into().unwrap();
    let [cout, _, s, _]: [usize; 4] = weight.shape().try_into().unwrap();
    let plane = h * w;

    for bi in 0..b {
        for o in 0..cout {
            let go_plane = &grad_out[(bi * cout + o) * plane..][..plane];
            for c in 0..cin {
                let gi_plane = &mut grad_in[(bi * cin + c) * plane..][..plane];
                let w_base = (o * cin + c) * s * s;
                for ky in 0..s {
                    let dy = ky as isize - pad as isize;
                    let (y0, y1) = valid_range(h, dy);
                    for kx in 0..s {
                        let wv = weight.data()[w_base + ky * s + kx];
                        let dx = kx as isize - pad as isize;
                        let (x0, x1) = valid_range(w, dx);
                        if x0 >= x1 {
                            continue;
                        }
                        for y in y0..y1 {
                            let iy = (y as isize + dy) as usize;
                            let src = &go_plane[y * w + x0..][..x1 - x0];
                            let dst = &mut gi_plane
                                [iy * w + ((x0 as isize + dx) as usize)..][..x1 - x0];
                            for (d, s_) in dst.iter_mut().zip(src) {
                                *d += wv * *s_;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Gradients with respect to the weight and bias.
pub fn backward_weight_bias<T: Element>(
    grad_out: &[T],
    input: &Tensor<T>,
    weight_shape: &[usize],
    pad: usize,
    grad_weight: &mut [T],
    grad_bias: &mut [T],
) {
    let [b, cin, h, w]: [usize; 4] = input.shape().try_into().unwrap();
    let [cout, _, s, _]: [usize; 4] = weight_shape.try_into().unwrap();
    let plane = h * w;

    for bi in 0..b {
        for o in 0..cout {
            let go_plane = &grad_out[(bi * cout + o) * plane..][..plane];
            let mut bias_acc = T::zero();
            for g in go_plane {
                bias_acc += *g;
            }
            grad_bias[o] += bias_acc;

            for c in 0..cin {
                let in_plane = &input.data()[(bi * cin + c) * plane..][..plane];
                let w_base = (o * cin + c) * s * s;
                for ky in 0..s {
                    let dy = ky as isize - pad as isize;
                    let (y0, y1) = valid_range(h, dy);
                    for kx in 0..s {
                        let dx = kx as isize - pad as isize;
                        let (x0, x1) = valid_range(w, dx);
                        if x0 >= x1 {
                            continue;
                        }
                        let mut acc = T::zero();
                        for y in y0..y1 {
                            let iy = (y as isize + dy) as usize;
                            let go_row = &go_plane[y * w + x0..][..x1 - x0];
                            let in_row = &in_plane
                                [iy * w + ((x0 as isize + dx) as usize)..][..x1 - x0];
                            for (g, i) in go_row.iter().zip(in_row) {
                                acc += *g * *i;
                            }
                        }
                        grad_weight[w_base + ky * s + kx] += acc;
                    }
                }
            }
        }
    }
}
