//! Network DNA: an ordered list of convolution and pooling genes.
//!
//! Encoder genomes describe only the encoding half of an autoencoder; the
//! decoder is derived by mirroring (see [`derive_decoder`]). Classifier
//! genomes get an implicit flatten + dense softmax head at build time.

mod decoder;
mod format;
mod inherit;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mutation::MutationKind;
use crate::nn::train::Objective;
use crate::nn::{Activation, ConvSpec, LayerKind, Network};
use crate::tensor::Shape3;

pub use decoder::{derive_decoder, DecoderPlan};
pub use format::GENOME_VERSION;
pub use inherit::{align_genes, inherit_weights};

pub const MAX_STRIDE: usize = 4;
pub const MIN_POOL: usize = 2;
pub const MAX_POOL: usize = 4;
pub const MAX_FILTER_DIM: usize = 9;
pub const MAX_FILTERS: usize = 256;

/// Identifier of an individual; also its directory name in a population.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndividualId(String);

impl IndividualId {
    pub fn new(s: impl Into<String>) -> Result<Self> {
        let s = s.into();
        let ok = !s.is_empty()
            && s != "-"
            && s.len() <= 128
            && s.bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
        if ok {
            Ok(IndividualId(s))
        } else {
            Err(Error::Precondition(format!("invalid individual id {s:?}")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for IndividualId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for IndividualId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IndividualId::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GenomeKind {
    Encoder,
    Classifier,
}

impl GenomeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GenomeKind::Encoder => "Encoder",
            GenomeKind::Classifier => "Classifier",
        }
    }

    pub fn objective(self, classes: usize) -> Objective {
        match self {
            GenomeKind::Encoder => Objective::Reconstruct,
            GenomeKind::Classifier => Objective::Classify { classes },
        }
    }
}

impl FromStr for GenomeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Encoder" => Ok(GenomeKind::Encoder),
            "Classifier" => Ok(GenomeKind::Classifier),
            _ => Err(Error::Precondition(format!("unknown genome kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerGene {
    Conv {
        filters: usize,
        kh: usize,
        kw: usize,
        stride: usize,
    },
    Pool {
        ph: usize,
        pw: usize,
    },
}

impl LayerGene {
    pub fn is_conv(&self) -> bool {
        matches!(self, LayerGene::Conv { .. })
    }

    pub fn is_pool(&self) -> bool {
        matches!(self, LayerGene::Pool { .. })
    }

    /// Checks the search-space caps.
    pub fn check_caps(&self, layer: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Validity { layer, msg });
        match *self {
            LayerGene::Conv {
                filters,
                kh,
                kw,
                stride,
            } => {
                if !(1..=MAX_FILTERS).contains(&filters) {
                    return bad(format!("filter count {filters} outside 1..={MAX_FILTERS}"));
                }
                if !(1..=MAX_FILTER_DIM).contains(&kh) || !(1..=MAX_FILTER_DIM).contains(&kw) {
                    return bad(format!(
                        "filter size {kh}x{kw} outside 1..={MAX_FILTER_DIM}"
                    ));
                }
                if !(1..=MAX_STRIDE).contains(&stride) {
                    return bad(format!("stride {stride} outside 1..={MAX_STRIDE}"));
                }
            }
            LayerGene::Pool { ph, pw } => {
                if !(MIN_POOL..=MAX_POOL).contains(&ph) || !(MIN_POOL..=MAX_POOL).contains(&pw) {
                    return bad(format!("pool {ph}x{pw} outside {MIN_POOL}..={MAX_POOL}"));
                }
            }
        }
        Ok(())
    }

    /// Engine layer for this gene given its input channel count.
    pub fn layer_kind(&self, in_channels: usize) -> LayerKind {
        match *self {
            LayerGene::Conv {
                filters,
                kh,
                kw,
                stride,
            } => LayerKind::Conv(ConvSpec {
                in_channels,
                filters,
                kh,
                kw,
                stride,
                activation: Activation::Relu,
            }),
            LayerGene::Pool { ph, pw } => LayerKind::MaxPool { ph, pw },
        }
    }

    fn output_shape(&self, s: Shape3) -> Shape3 {
        match *self {
            LayerGene::Conv {
                filters, stride, ..
            } => Shape3::new(filters, s.h.div_ceil(stride), s.w.div_ceil(stride)),
            LayerGene::Pool { ph, pw } => Shape3::new(s.c, s.h.div_ceil(ph), s.w.div_ceil(pw)),
        }
    }
}

/// Per-sample shapes from the input through each gene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeTrace(pub Vec<Shape3>);

impl ShapeTrace {
    pub fn input(&self) -> Shape3 {
        self.0[0]
    }

    pub fn output(&self) -> Shape3 {
        *self.0.last().expect("trace holds at least the input")
    }
}

/// Why an encoder genome is not acceptable.
#[derive(Debug, Clone, PartialEq)]
pub enum EncoderViolation {
    NotAnEncoder,
    Degenerate { layer: usize, msg: String },
    NotCompressing { encoded: usize, input: usize },
}

impl fmt::Display for EncoderViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EncoderViolation::NotAnEncoder => f.write_str("genome is not an encoder"),
            EncoderViolation::Degenerate { layer, msg } => {
                write!(f, "degenerate shape at layer {layer}: {msg}")
            }
            EncoderViolation::NotCompressing { encoded, input } => write!(
                f,
                "encoded size {encoded} is not smaller than input size {input}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Genome {
    pub id: IndividualId,
    pub kind: GenomeKind,
    pub layers: Vec<LayerGene>,
    pub learning_rate: f64,
    pub parent_id: Option<IndividualId>,
    pub generation: u64,
    /// Mutation that produced this genome; `None` for seeds.
    pub mutation: Option<MutationKind>,
}

impl Genome {
    /// A generation-0 genome with no parent.
    pub fn seed(id: IndividualId, kind: GenomeKind, learning_rate: f64) -> Self {
        let mut layers = vec![LayerGene::Conv {
            filters: 8,
            kh: 3,
            kw: 3,
            stride: 1,
        }];
        if kind == GenomeKind::Encoder {
            layers.push(LayerGene::Pool { ph: 2, pw: 2 });
        }
        Genome {
            id,
            kind,
            layers,
            learning_rate,
            parent_id: None,
            generation: 0,
            mutation: None,
        }
    }

    /// [`Genome::seed`] with the first conv's filter count halved until the
    /// genome is valid for `input` (few-channel inputs cannot afford 8).
    pub fn seed_for(
        id: IndividualId,
        kind: GenomeKind,
        learning_rate: f64,
        input: Shape3,
    ) -> Result<Self> {
        let mut g = Genome::seed(id, kind, learning_rate);
        loop {
            if g.is_valid_for(input) {
                return Ok(g);
            }
            match &mut g.layers[0] {
                LayerGene::Conv { filters, .. } if *filters > 1 => *filters /= 2,
                _ => {
                    return Err(Error::Validity {
                        layer: 0,
                        msg: format!("no seed {} genome fits input {input}", kind.as_str()),
                    })
                }
            }
        }
    }

    pub fn conv_count(&self) -> usize {
        self.layers.iter().filter(|g| g.is_conv()).count()
    }

    pub fn pool_count(&self) -> usize {
        self.layers.iter().filter(|g| g.is_pool()).count()
    }

    /// Shapes through every gene. A pooling window larger than its input
    /// dim is degenerate: it would only re-pool an exhausted dimension.
    pub fn infer_shapes(&self, input: Shape3) -> Result<ShapeTrace> {
        if input.c == 0 || input.h == 0 || input.w == 0 {
            return Err(Error::Validity {
                layer: 0,
                msg: format!("input shape {input} has a zero dim"),
            });
        }
        if self.layers.is_empty() {
            return Err(Error::Validity {
                layer: 0,
                msg: "genome has no layers".into(),
            });
        }
        let mut trace = Vec::with_capacity(self.layers.len() + 1);
        trace.push(input);
        let mut s = input;
        for (i, gene) in self.layers.iter().enumerate() {
            gene.check_caps(i)?;
            if let LayerGene::Pool { ph, pw } = *gene {
                if ph > s.h || pw > s.w {
                    return Err(Error::Validity {
                        layer: i,
                        msg: format!("pool {ph}x{pw} on exhausted {}x{} map", s.h, s.w),
                    });
                }
            }
            s = gene.output_shape(s);
            if s.h == 0 || s.w == 0 {
                return Err(Error::Validity {
                    layer: i,
                    msg: "spatial dim reached zero".into(),
                });
            }
            trace.push(s);
        }
        Ok(ShapeTrace(trace))
    }

    /// `1 - encoded/input` element counts.
    pub fn compression_ratio(&self, input: Shape3) -> Result<f64> {
        let trace = self.infer_shapes(input)?;
        Ok(1.0 - trace.output().len() as f64 / input.len() as f64)
    }

    /// Accepts an encoder iff its shapes are valid and it strictly shrinks
    /// the sample.
    pub fn validate_encoder(
        &self,
        input: Shape3,
    ) -> std::result::Result<ShapeTrace, EncoderViolation> {
        if self.kind != GenomeKind::Encoder {
            return Err(EncoderViolation::NotAnEncoder);
        }
        let trace = self.infer_shapes(input).map_err(|e| match e {
            Error::Validity { layer, msg } => EncoderViolation::Degenerate { layer, msg },
            other => EncoderViolation::Degenerate {
                layer: 0,
                msg: other.to_string(),
            },
        })?;
        let (encoded, input) = (trace.output().len(), input.len());
        if encoded >= input {
            return Err(EncoderViolation::NotCompressing { encoded, input });
        }
        Ok(trace)
    }

    /// Validity check appropriate to the genome kind.
    pub fn is_valid_for(&self, input: Shape3) -> bool {
        match self.kind {
            GenomeKind::Encoder => self.validate_encoder(input).is_ok(),
            GenomeKind::Classifier => self.infer_shapes(input).is_ok(),
        }
    }

    /// Engine layers for the encoding trunk (one per gene).
    fn trunk(&self, trace: &ShapeTrace) -> Vec<LayerKind> {
        self.layers
            .iter()
            .zip(&trace.0)
            .map(|(g, s)| g.layer_kind(s.c))
            .collect()
    }

    /// Full engine layer plan: encoder + mirrored decoder, or trunk +
    /// flatten + dense head.
    pub fn network_plan(&self, input: Shape3, classes: usize) -> Result<Vec<LayerKind>> {
        let trace = self.infer_shapes(input)?;
        let mut plan = self.trunk(&trace);
        match self.kind {
            GenomeKind::Encoder => plan.extend(derive_decoder(self, input)?.layers),
            GenomeKind::Classifier => {
                if classes == 0 {
                    return Err(Error::Precondition(
                        "classifier needs at least one class".into(),
                    ));
                }
                plan.push(LayerKind::Flatten);
                plan.push(LayerKind::Dense {
                    inputs: trace.output().len(),
                    units: classes,
                });
            }
        }
        Ok(plan)
    }

    /// Fresh network for this genome.
    pub fn build_network<R: Rng + ?Sized>(
        &self,
        input: Shape3,
        classes: usize,
        rng: &mut R,
    ) -> Result<Network> {
        Network::new(input, &self.network_plan(input, classes)?, rng)
    }

    /// Layer count of the encoding trunk inside a built network.
    pub fn trunk_len(&self) -> usize {
        self.layers.len()
    }
}
