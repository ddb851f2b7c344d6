use crate::error::Result;
use crate::nn::{Activation, ConvSpec, LayerKind};
use crate::tensor::Shape3;

use super::{Genome, LayerGene};

/// Decoder layers plus, for each, the index of the encoder gene it mirrors.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderPlan {
    pub layers: Vec<LayerKind>,
    pub origin: Vec<usize>,
}

/// Mirrors an encoder: genes are visited in reverse, pooling becomes
/// nearest-neighbour up-sampling and strided convolution becomes
/// up-sampling followed by a stride-1 convolution back to the gene's input
/// channel count. Every up-sampling is followed by a crop to the exact
/// pre-gene shape, so the decoder output shape equals the encoder input.
/// The last decoder convolution uses a sigmoid.
pub fn derive_decoder(g: &Genome, input: Shape3) -> Result<DecoderPlan> {
    let trace = g.infer_shapes(input)?;
    let mut layers = Vec::new();
    let mut origin = Vec::new();
    for (j, gene) in g.layers.iter().enumerate().rev() {
        let before = trace.0[j];
        match *gene {
            LayerGene::Pool { ph, pw } => {
                layers.push(LayerKind::Upsample { fh: ph, fw: pw });
                layers.push(LayerKind::Crop {
                    h: before.h,
                    w: before.w,
                });
                origin.extend([j, j]);
            }
            LayerGene::Conv {
                filters,
                kh,
                kw,
                stride,
            } => {
                if stride > 1 {
                    layers.push(LayerKind::Upsample {
                        fh: stride,
                        fw: stride,
                    });
                    layers.push(LayerKind::Crop {
                        h: before.h,
                        w: before.w,
                    });
                    origin.extend([j, j]);
                }
                layers.push(LayerKind::Conv(ConvSpec {
                    in_channels: filters,
                    filters: before.c,
                    kh,
                    kw,
                    stride: 1,
                    activation: Activation::Relu,
                }));
                origin.push(j);
            }
        }
    }
    if let Some(LayerKind::Conv(spec)) = layers
        .iter_mut()
        .rev()
        .find(|l| matches!(l, LayerKind::Conv(_)))
    {
        spec.activation = Activation::Sigmoid;
    }
    Ok(DecoderPlan { layers, origin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{GenomeKind, IndividualId};

    fn encoder(layers: Vec<LayerGene>) -> Genome {
        Genome {
            id: IndividualId::new("e").unwrap(),
            kind: GenomeKind::Encoder,
            layers,
            learning_rate: 0.01,
            parent_id: None,
            generation: 0,
            mutation: None,
        }
    }

    fn conv_spec(c: usize, f: usize, k: usize, act: Activation) -> LayerKind {
        LayerKind::Conv(ConvSpec {
            in_channels: c,
            filters: f,
            kh: k,
            kw: k,
            stride: 1,
            activation: act,
        })
    }

    #[test]
    fn pool_mirrors_to_upsample_and_crop() {
        let g = encoder(vec![
            LayerGene::Conv {
                filters: 8,
                kh: 3,
                kw: 3,
                stride: 1,
            },
            LayerGene::Pool { ph: 2, pw: 2 },
        ]);
        let plan = derive_decoder(&g, Shape3::new(3, 32, 32)).unwrap();
        assert_eq!(
            plan.layers,
            vec![
                LayerKind::Upsample { fh: 2, fw: 2 },
                LayerKind::Crop { h: 32, w: 32 },
                conv_spec(8, 3, 3, Activation::Sigmoid),
            ]
        );
        assert_eq!(plan.origin, vec![1, 1, 0]);
    }

    #[test]
    fn stride_mirrors_to_upsample() {
        let g = encoder(vec![LayerGene::Conv {
            filters: 8,
            kh: 3,
            kw: 3,
            stride: 2,
        }]);
        let plan = derive_decoder(&g, Shape3::new(3, 32, 32)).unwrap();
        assert_eq!(
            plan.layers,
            vec![
                LayerKind::Upsample { fh: 2, fw: 2 },
                LayerKind::Crop { h: 32, w: 32 },
                conv_spec(8, 3, 3, Activation::Sigmoid),
            ]
        );
    }

    #[test]
    fn odd_sizes_crop_back_exactly() {
        let g = encoder(vec![
            LayerGene::Conv {
                filters: 5,
                kh: 2,
                kw: 4,
                stride: 3,
            },
            LayerGene::Pool { ph: 3, pw: 2 },
            LayerGene::Conv {
                filters: 2,
                kh: 1,
                kw: 1,
                stride: 1,
            },
        ]);
        let input = Shape3::new(3, 13, 11);
        let plan = g.network_plan(input, 0).unwrap();
        let mut s = input;
        for (i, k) in plan.iter().enumerate() {
            s = k.output_shape(s, i).unwrap();
        }
        assert_eq!(s, input);
    }
}
