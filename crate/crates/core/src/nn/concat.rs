use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Stacks `C_i × T` maps along the channel axis in argument order.
pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::shape("concat of zero tensors"))?;
    if parts.iter().any(|p| p.ndim() != 2) {
        return Err(Error::shape("concat expects [channels, time] tensors"));
    }
    let len = first.cols();
    if let Some(bad) = parts.iter().find(|p| p.cols() != len) {
        return Err(Error::shape(format!(
            "concat time lengths differ: {len} vs {}",
            bad.cols()
        )));
    }
    let channels: usize = parts.iter().map(|p| p.rows()).sum();
    let mut data = Vec::with_capacity(channels * len);
    for p in parts {
        data.extend_from_slice(p.data());
    }
    Tensor::from_vec(&[channels, len], data)
}

/// Inverse of [`concat_channels`]: splits rows at the given channel counts.
/// Used to route an upstream gradient back to each concatenated part.
pub fn split_channels(upstream: &Tensor, sizes: &[usize]) -> Result<Vec<Tensor>> {
    if upstream.ndim() != 2 || sizes.iter().sum::<usize>() != upstream.rows() {
        return Err(Error::shape(format!(
            "cannot split {:?} into channel groups {sizes:?}",
            upstream.shape()
        )));
    }
    let len = upstream.cols();
    let mut offset = 0;
    sizes
        .iter()
        .map(|&c| {
            let slice = &upstream.data()[offset * len..(offset + c) * len];
            offset += c;
            Tensor::from_vec(&[c, len], slice.to_vec())
        })
        .collect()
}
