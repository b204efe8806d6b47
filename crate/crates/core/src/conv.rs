//! Reference dense convolution, used as the numerical oracle the simulated
//! datapath is checked against.

use crate::epitome::ConvSpec;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{FeatureMap, WeightTensor};

/// Plain cross-correlation with the layer's stride and zero padding.
/// Deterministic, and exact when instantiated with integer scalars.
pub fn conv2d_reference<T: Scalar>(
    input: &FeatureMap<T>,
    weight: &WeightTensor<T>,
    conv: &ConvSpec,
) -> Result<FeatureMap<T>> {
    conv.validate()?;
    if input.dims() != [conv.c_in, conv.input_h, conv.input_w] {
        return Err(Error::Dimension(format!(
            "input dims {:?} do not match layer `{}` ({:?})",
            input.dims(),
            conv.name,
            [conv.c_in, conv.input_h, conv.input_w]
        )));
    }
    if weight.dims() != conv.weight_dims() {
        return Err(Error::Dimension(format!(
            "weight dims {:?} do not match layer `{}` ({:?})",
            weight.dims(),
            conv.name,
            conv.weight_dims()
        )));
    }

    let (out_h, out_w) = conv.out_dims();
    let pad = conv.padding as isize;
    let mut out = FeatureMap::zeros([conv.c_out, out_h, out_w]);
    for oc in 0..conv.c_out {
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut acc = T::zero();
                for ic in 0..conv.c_in {
                    for ky in 0..conv.k_h {
                        for kx in 0..conv.k_w {
                            let iy = (oy * conv.stride + ky) as isize - pad;
                            let ix = (ox * conv.stride + kx) as isize - pad;
                            if iy < 0
                                || ix < 0
                                || iy >= conv.input_h as isize
                                || ix >= conv.input_w as isize
                            {
                                continue;
                            }
                            acc += input.get([ic, iy as usize, ix as usize])
                                * weight.get([oc, ic, ky, kx]);
                        }
                    }
                }
                out.set([oc, oy, ox], acc);
            }
        }
    }
    Ok(out)
}
