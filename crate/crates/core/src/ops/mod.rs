//! Neural building blocks on [`Tensor`](crate::Tensor).
//!
//! Every forward kernel has a matching adjoint kernel (`*_backward`) that the
//! reverse-mode tape calls. Forward kernels are pure functions of their
//! arguments.

mod activation;
mod conv;
mod norm;
mod patch;
mod resample;

pub use activation::{geglu, geglu_backward, gelu, gelu_grad, softmax, softmax_backward};
pub use conv::{
    conv_depthwise3x3, conv_depthwise3x3_backward, conv_pointwise, conv_pointwise_backward,
    ConvGrads, ConvParams,
};
pub use norm::{layer_norm, layer_norm_backward, LAYER_NORM_EPS};
pub use patch::{
    crop, crop_backward, fold_patches, fold_patches_backward, reflect_pad, reflect_pad_backward,
    unfold_patches, unfold_patches_backward, PatchLayout,
};
pub use resample::{
    concat_channels, depth_to_space, downsample, space_to_depth, split_channels, upsample,
};

/// Maps a possibly out-of-range coordinate onto `0..n` by mirror reflection
/// without repeating the edge sample (`-1 -> 1`, `n -> n - 2`).
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

#[cfg(test)]
mod tests {
    use super::reflect_index;

    #[test]
    fn reflect_index_mirrors_without_edge_repeat() {
        assert_eq!(reflect_index(-1, 5), 1);
        assert_eq!(reflect_index(-2, 5), 2);
        assert_eq!(reflect_index(5, 5), 3);
        assert_eq!(reflect_index(6, 5), 2);
        assert_eq!(reflect_index(9, 3), 1);
        assert_eq!(reflect_index(-1, 1), 0);
        for i in 0..7 {
            assert_eq!(reflect_index(i, 7), i as usize);
        }
    }
}
