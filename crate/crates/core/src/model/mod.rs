//! Base encoders, the shared projection head and training.
//!
//! Every pathway maps an input through its own base encoder to an
//! intermediate `h ∈ ℝ^d` and then through the one projection head `g` to a
//! latent `z ∈ ℝ^s`. Pathways `0..M` read single modalities; the complete
//! pathway reads the concatenation of all of them.

mod optim;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, keyed};
use crate::tensor::{Tape, Tensor, Var};

pub(crate) use optim::build as optim_build;
pub use optim::{Adam, Optimizer, OptimizerKind, Sgd};
pub use train::{
    check_pipeline_gradients, record_loss, train, EpochRecord, StepOutcome, TrainConfig,
    TrainOutcome, Trainer,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Swish,
}

impl Activation {
    fn apply(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Relu => tape.relu(x),
            Activation::Swish => tape.swish(x),
        }
    }
}

/// Shape of a multilayer perceptron: `widths[0]` is the input width, the last
/// entry the output width, and `activations[l]` follows hidden layer `l`.
/// The output layer is affine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl EncoderSpec {
    pub fn uniform(widths: Vec<usize>, activation: Activation) -> Self {
        let hidden = widths.len().saturating_sub(2);
        EncoderSpec {
            widths,
            activations: vec![activation; hidden],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::contract("an MLP needs an input and an output width"));
        }
        if self.widths.contains(&0) {
            return Err(Error::contract(format!(
                "MLP widths must be positive, got {:?}",
                self.widths
            )));
        }
        if self.activations.len() != self.widths.len() - 2 {
            return Err(Error::contract(format!(
                "{} hidden layers need as many activations, got {}",
                self.widths.len() - 2,
                self.activations.len()
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("validated spec")
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// One affine layer, `y = x · W + b` with `W: [in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// Uniform initialisation in `±1/√fan_in` for weights and bias.
    fn init(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Result<Self> {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut draw = |n: usize| {
            (0..n)
                .map(|_| rng.random_range(-bound..bound))
                .collect::<Vec<_>>()
        };
        let weight = Tensor::matrix(fan_in, fan_out, draw(fan_in * fan_out))?;
        let bias = Tensor::vector(draw(fan_out))?;
        Ok(Linear { weight, bias })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    spec: EncoderSpec,
    layers: Vec<Linear>,
}

impl Mlp {
    pub fn init(spec: EncoderSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .widths
            .windows(2)
            .map(|w| Linear::init(w[0], w[1], rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Mlp { spec, layers })
    }

    /// Rebuilds an MLP from stored layers, checking them against `spec`.
    pub fn from_layers(spec: EncoderSpec, layers: Vec<Linear>) -> Result<Self> {
        spec.validate()?;
        if layers.len() != spec.widths.len() - 1 {
            return Err(Error::contract("layer count does not match the spec"));
        }
        for (l, (layer, w)) in layers.iter().zip(spec.widths.windows(2)).enumerate() {
            if layer.weight.shape() != [w[0], w[1]] || layer.bias.shape() != [w[1]] {
                return Err(Error::contract(format!(
                    "layer {l} has weight {:?} and bias {:?}, spec wants [{}, {}]",
                    layer.weight.shape(),
                    layer.bias.shape(),
                    w[0],
                    w[1]
                )));
            }
        }
        Ok(Mlp { spec, layers })
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Linear] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub(crate) fn bind(&self, tape: &mut Tape) -> Vec<(Var, Var)> {
        self.layers
            .iter()
            .map(|l| (tape.param(l.weight.clone()), tape.param(l.bias.clone())))
            .collect()
    }

    pub(crate) fn forward(&self, tape: &mut Tape, vars: &[(Var, Var)], x: Var) -> Result<Var> {
        let mut h = x;
        for (l, &(w, b)) in vars.iter().enumerate() {
            let lin = tape.matmul(h, w)?;
            h = tape.add(lin, b)?;
            if let Some(&act) = self.spec.activations.get(l) {
                h = act.apply(tape, h);
            }
        }
        Ok(h)
    }

    /// Runs the network on `x` without recording gradients.
    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::without_grad();
        let vars = self.bind(&mut tape);
        let x = tape.constant(x.clone());
        let out = self.forward(&mut tape, &vars, x)?;
        Ok(tape.value(out).clone())
    }
}

/// An input route through the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pathway {
    /// Zero-based modality index.
    Modality(usize),
    Complete,
}

impl std::fmt::Display for Pathway {
    /// `complete`, or the one-based modality number.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Pathway::Modality(m) => write!(f, "{}", m + 1),
            Pathway::Complete => f.write_str("complete"),
        }
    }
}

impl std::str::FromStr for Pathway {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("complete") {
            return Ok(Pathway::Complete);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Pathway::Modality(n - 1)),
            _ => Err(Error::config(
                "pathway",
                format!("expected `complete` or a modality number from 1, got `{s}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Width `d` of the intermediate representations.
    pub intermediate_dim: usize,
    /// Width `s` of the latent representations.
    pub latent_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            intermediate_dim: 64,
            latent_dim: 64,
            encoder_hidden: vec![64],
            head_hidden: vec![64],
            activation: Activation::Swish,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.intermediate_dim == 0 {
            return Err(Error::config("intermediate_dim", "must be positive"));
        }
        if self.latent_dim == 0 {
            return Err(Error::config("latent_dim", "must be positive"));
        }
        if let Some(pos) = self.encoder_hidden.iter().position(|&w| w == 0) {
            return Err(Error::config(
                format!("encoder_hidden[{pos}]"),
                "must be positive",
            ));
        }
        if let Some(pos) = self.head_hidden.iter().position(|&w| w == 0) {
            return Err(Error::config(
                format!("head_hidden[{pos}]"),
                "must be positive",
            ));
        }
        Ok(())
    }

    pub fn encoder_spec(&self, input_dim: usize) -> EncoderSpec {
        let mut widths = vec![input_dim];
        widths.extend(&self.encoder_hidden);
        widths.push(self.intermediate_dim);
        EncoderSpec::uniform(widths, self.activation)
    }

    pub fn head_spec(&self) -> EncoderSpec {
        let mut widths = vec![self.intermediate_dim];
        widths.extend(&self.head_hidden);
        widths.push(self.latent_dim);
        EncoderSpec::uniform(widths, self.activation)
    }
}

/// Tape handles for every parameter of a [`GmcModel`].
#[derive(Debug, Clone)]
pub struct ModelVars {
    encoders: Vec<Vec<(Var, Var)>>,
    head: Vec<(Var, Var)>,
}

impl ModelVars {
    /// Handles in [`GmcModel::params`] order.
    pub fn params(&self) -> Vec<Var> {
        self.encoders
            .iter()
            .chain(std::iter::once(&self.head))
            .flatten()
            .flat_map(|&(w, b)| [w, b])
            .collect()
    }
}

/// The two-level model. Encoder `m < M` reads modality `m`; encoder `M` reads
/// the complete observation.
#[derive(Debug, Clone, PartialEq)]
pub struct GmcModel {
    encoders: Vec<Mlp>,
    head: Mlp,
}

impl GmcModel {
    pub fn new(input_dims: &[usize], config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if input_dims.is_empty() {
            return Err(Error::contract("model needs at least one modality"));
        }
        let complete: usize = input_dims.iter().sum();
        let mut encoders = Vec::with_capacity(input_dims.len() + 1);
        for (p, &dim) in input_dims
            .iter()
            .chain(std::iter::once(&complete))
            .enumerate()
        {
            let mut rng = keyed(seed, domain::PARAM_INIT, p as u64, 0);
            encoders.push(Mlp::init(config.encoder_spec(dim), &mut rng)?);
        }
        let mut rng = keyed(seed, domain::PARAM_INIT, u64::MAX, 0);
        let head = Mlp::init(config.head_spec(), &mut rng)?;
        Self::from_parts(encoders, head)
    }

    /// Assembles a model, checking that every encoder feeds the head and that
    /// the complete encoder reads the concatenation of all modalities.
    pub fn from_parts(encoders: Vec<Mlp>, head: Mlp) -> Result<Self> {
        if encoders.len() < 2 {
            return Err(Error::contract(
                "need at least one modality encoder and the complete encoder",
            ));
        }
        let d = head.input_dim();
        if let Some(p) = encoders.iter().position(|e| e.output_dim() != d) {
            return Err(Error::contract(format!(
                "encoder {p} outputs {} but the head reads {d}",
                encoders[p].output_dim()
            )));
        }
        let m = encoders.len() - 1;
        let sum: usize = encoders[..m].iter().map(Mlp::input_dim).sum();
        if encoders[m].input_dim() != sum {
            return Err(Error::contract(format!(
                "complete encoder reads {} but modalities total {sum}",
                encoders[m].input_dim()
            )));
        }
        Ok(GmcModel { encoders, head })
    }

    pub fn modality_count(&self) -> usize {
        self.encoders.len() - 1
    }

    pub fn intermediate_dim(&self) -> usize {
        self.head.input_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.head.output_dim()
    }

    pub fn input_dims(&self) -> Vec<usize> {
        self.encoders[..self.modality_count()]
            .iter()
            .map(Mlp::input_dim)
            .collect()
    }

    pub fn pathways(&self) -> Vec<Pathway> {
        let mut p = vec![Pathway::Complete];
        p.extend((0..self.modality_count()).map(Pathway::Modality));
        p
    }

    fn encoder_index(&self, pathway: Pathway) -> Result<usize> {
        match pathway {
            Pathway::Complete => Ok(self.modality_count()),
            Pathway::Modality(m) if m < self.modality_count() => Ok(m),
            Pathway::Modality(m) => Err(Error::contract(format!(
                "unknown modality {} (model has {})",
                m + 1,
                self.modality_count()
            ))),
        }
    }

    /// Encoders `0..M` then the complete encoder.
    pub fn encoders(&self) -> &[Mlp] {
        &self.encoders
    }

    pub fn encoder(&self, pathway: Pathway) -> Result<&Mlp> {
        Ok(&self.encoders[self.encoder_index(pathway)?])
    }

    pub fn encoder_mut(&mut self, pathway: Pathway) -> Result<&mut Mlp> {
        let i = self.encoder_index(pathway)?;
        Ok(&mut self.encoders[i])
    }

    pub fn head(&self) -> &Mlp {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut Mlp {
        &mut self.head
    }

    /// Every parameter tensor in declaration order: each encoder (modalities,
    /// then complete) followed by the head, each layer as weight then bias.
    pub fn params(&self) -> Vec<&Tensor> {
        self.encoders
            .iter()
            .chain(std::iter::once(&self.head))
            .flat_map(|mlp| mlp.layers.iter())
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.encoders
            .iter_mut()
            .chain(std::iter::once(&mut self.head))
            .flat_map(|mlp| mlp.layers.iter_mut())
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    /// Records every parameter on `tape` as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> ModelVars {
        ModelVars {
            encoders: self.encoders.iter().map(|e| e.bind(tape)).collect(),
            head: self.head.bind(tape),
        }
    }

    /// Wraps handles already on a tape, given in [`GmcModel::params`] order.
    pub fn vars_from(&self, handles: &[Var]) -> Result<ModelVars> {
        let expect = self.params().len();
        if handles.len() != expect {
            return Err(Error::contract(format!(
                "expected {expect} parameter handles, got {}",
                handles.len()
            )));
        }
        let mut it = handles.chunks_exact(2).map(|p| (p[0], p[1]));
        let mut take = |mlp: &Mlp| it.by_ref().take(mlp.layers.len()).collect::<Vec<_>>();
        let encoders = self.encoders.iter().map(&mut take).collect();
        let head = take(&self.head);
        Ok(ModelVars { encoders, head })
    }

    /// Records `x → h → z` for one pathway and returns `(h, z)`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &ModelVars,
        pathway: Pathway,
        x: Var,
    ) -> Result<(Var, Var)> {
        let p = self.encoder_index(pathway)?;
        let width = tape.value(x).dims2()?.1;
        let expect = self.encoders[p].input_dim();
        if width != expect {
            return Err(Error::ShapeMismatch {
                op: "encode",
                lhs: tape.value(x).shape().to_vec(),
                rhs: vec![expect],
            });
        }
        let h = self.encoders[p].forward(tape, &vars.encoders[p], x)?;
        let z = self.head.forward(tape, &vars.head, h)?;
        Ok((h, z))
    }

    /// `(h, z)` for a batch of inputs on `pathway`.
    pub fn encode_with_intermediate(
        &self,
        pathway: Pathway,
        x: &Tensor,
    ) -> Result<(Tensor, Tensor)> {
        let mut tape = Tape::without_grad();
        let vars = self.bind(&mut tape);
        let x = tape.constant(x.clone());
        let (h, z) = self.forward(&mut tape, &vars, pathway, x)?;
        Ok((tape.value(h).clone(), tape.value(z).clone()))
    }

    pub fn encode(&self, pathway: Pathway, x: &Tensor) -> Result<Tensor> {
        Ok(self.encode_with_intermediate(pathway, x)?.1)
    }

    /// `z_m = g(f_m(x_m))` for zero-based modality `m`.
    pub fn encode_modality(&self, m: usize, x: &Tensor) -> Result<Tensor> {
        self.encode(Pathway::Modality(m), x)
    }

    /// `z_{1:M} = g(f_{1:M}(x_{1:M}))`.
    pub fn encode_complete(&self, x: &Tensor) -> Result<Tensor> {
        self.encode(Pathway::Complete, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> GmcModel {
        let cfg = ModelConfig {
            intermediate_dim: 4,
            latent_dim: 3,
            encoder_hidden: vec![5],
            head_hidden: vec![6],
            activation: Activation::Swish,
        };
        GmcModel::new(&[3, 2], &cfg, 11).unwrap()
    }

    fn inputs(rows: usize, cols: usize, offset: f64) -> Tensor {
        let data = (0..rows * cols)
            .map(|i| ((i as f64) * 0.37 + offset).sin())
            .collect();
        Tensor::matrix(rows, cols, data).unwrap()
    }

    #[test]
    fn param_count_matches_closed_form() {
        let m = tiny();
        // encoders: (3·5+5 + 5·4+4), (2·5+5 + 5·4+4), (5·5+5 + 5·4+4); head: 4·6+6 + 6·3+3.
        let expect = (20 + 24) + (15 + 24) + (30 + 24) + (30 + 21);
        assert_eq!(m.param_count(), expect);
        let cfg = ModelConfig::default();
        let dims = [20, 16, 12];
        let big = GmcModel::new(&dims, &cfg, 0).unwrap();
        let closed: usize = dims
            .iter()
            .chain(std::iter::once(&48))
            .map(|&i| i * 64 + 64 + 64 * 64 + 64)
            .sum::<usize>()
            + 2 * (64 * 64 + 64);
        assert_eq!(big.param_count(), closed);
    }

    #[test]
    fn zero_final_head_layer_gives_zero_latents() {
        let mut m = tiny();
        let last = m.head_mut().layers_mut().last_mut().unwrap();
        last.weight.data_mut().fill(0.0);
        last.bias.data_mut().fill(0.0);
        let z = m.encode_modality(0, &inputs(4, 3, 0.0)).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
        let z = m.encode_complete(&inputs(4, 5, 0.0)).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_rows_encode_identically() {
        let m = tiny();
        let row = [0.3, -1.2, 0.7];
        let x = Tensor::from_rows(&[row, row, row]).unwrap();
        let z = m.encode_modality(0, &x).unwrap();
        assert_eq!(z.row(0), z.row(1));
        assert_eq!(z.row(1), z.row(2));
        let row = [0.1, 0.2, -0.3, 0.4, 0.5];
        let z = m
            .encode_complete(&Tensor::from_rows(&[row, row]).unwrap())
            .unwrap();
        assert_eq!(z.row(0), z.row(1));
    }

    #[test]
    fn seeded_encoding_is_reproducible() {
        let x = inputs(3, 3, 0.5);
        assert_eq!(
            tiny().encode_modality(0, &x).unwrap(),
            tiny().encode_modality(0, &x).unwrap()
        );
        let xc = inputs(3, 5, 0.5);
        assert_eq!(
            tiny().encode_complete(&xc).unwrap(),
            tiny().encode_complete(&xc).unwrap()
        );
    }

    #[test]
    fn head_is_shared_by_every_pathway() {
        let m = tiny();
        let mut bumped = m.clone();
        bumped.head_mut().layers_mut()[0].bias.data_mut()[0] += 0.5;
        let cases = [
            (Pathway::Modality(0), inputs(2, 3, 0.1)),
            (Pathway::Modality(1), inputs(2, 2, 0.2)),
            (Pathway::Complete, inputs(2, 5, 0.3)),
        ];
        for (p, x) in cases {
            assert_ne!(
                m.encode(p, &x).unwrap(),
                bumped.encode(p, &x).unwrap(),
                "{p}"
            );
        }
    }

    #[test]
    fn rejects_wrong_width_and_unknown_modality() {
        let m = tiny();
        assert!(matches!(
            m.encode_modality(0, &inputs(2, 2, 0.0)),
            Err(Error::ShapeMismatch { op: "encode", .. })
        ));
        assert!(matches!(
            m.encode_modality(2, &inputs(2, 3, 0.0)),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn exposes_intermediate_representation() {
        let m = tiny();
        let (h, z) = m
            .encode_with_intermediate(Pathway::Modality(1), &inputs(3, 2, 0.0))
            .unwrap();
        assert_eq!(h.shape(), [3, 4]);
        assert_eq!(z.shape(), [3, 3]);
        assert_eq!(m.head().apply(&h).unwrap(), z);
    }

    #[test]
    fn pathway_names_round_trip() {
        for p in [
            Pathway::Complete,
            Pathway::Modality(0),
            Pathway::Modality(6),
        ] {
            assert_eq!(p.to_string().parse::<Pathway>().unwrap(), p);
        }
        assert!("0".parse::<Pathway>().is_err());
        assert!("image".parse::<Pathway>().is_err());
    }

    #[test]
    fn from_parts_checks_wiring() {
        let m = tiny();
        let mut encoders = m.encoders().to_vec();
        encoders.swap(0, 1);
        assert!(GmcModel::from_parts(encoders, m.head().clone()).is_ok());
        let mut encoders = m.encoders().to_vec();
        encoders.pop();
        encoders.push(m.encoders()[0].clone());
        assert!(GmcModel::from_parts(encoders, m.head().clone()).is_err());
    }
}
