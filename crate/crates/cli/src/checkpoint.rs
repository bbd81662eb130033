//! Binary model checkpoints.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! magic      4 bytes   "GMC1"
//! version    u32       1
//! modalities u32       M
//! M + 2 network descriptors, in the order encoder 1..M, complete encoder, head:
//!   layers   u32       L
//!   widths   (L + 1) × u32
//!   acts     (L - 1) × u8   0 = relu, 1 = swish
//! params     u64       total parameter count P
//! values     P × f64   every weight then bias, layer by layer, network by network
//! ```

use std::path::Path;

use gmc::model::{Activation, EncoderSpec, GmcModel, Linear, Mlp};
use gmc::Tensor;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"GMC1";
pub const VERSION: u32 = 1;

fn act_code(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Swish => 1,
    }
}

fn networks(model: &GmcModel) -> Vec<&Mlp> {
    model
        .encoders()
        .iter()
        .chain(std::iter::once(model.head()))
        .collect()
}

pub fn to_bytes(model: &GmcModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * model.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(model.modality_count() as u32).to_le_bytes());
    for net in networks(model) {
        let spec = net.spec();
        out.extend_from_slice(&((spec.widths.len() - 1) as u32).to_le_bytes());
        for &w in &spec.widths {
            out.extend_from_slice(&(w as u32).to_le_bytes());
        }
        out.extend(spec.activations.iter().map(|&a| act_code(a)));
    }
    out.extend_from_slice(&(model.param_count() as u64).to_le_bytes());
    for p in model.params() {
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn parse(bytes: &[u8]) -> std::result::Result<GmcModel, String> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4).map_err(|_| "not a checkpoint".to_string())? != MAGIC {
        return Err("bad magic, not a checkpoint".into());
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let m = c.u32()? as usize;
    if m == 0 || m > 1 << 16 {
        return Err(format!("implausible modality count {m}"));
    }
    let mut specs = Vec::with_capacity(m + 2);
    for _ in 0..m + 2 {
        let layers = c.u32()? as usize;
        if layers == 0 || layers > 1 << 12 {
            return Err(format!("implausible layer count {layers}"));
        }
        let widths = (0..=layers)
            .map(|_| c.u32().map(|w| w as usize))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let activations = c
            .take(layers - 1)?
            .iter()
            .map(|&b| match b {
                0 => Ok(Activation::Relu),
                1 => Ok(Activation::Swish),
                other => Err(format!("unknown activation code {other}")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let spec = EncoderSpec {
            widths,
            activations,
        };
        spec.validate().map_err(|e| e.to_string())?;
        specs.push(spec);
    }
    let expected: usize = specs.iter().map(EncoderSpec::param_count).sum();
    let declared = c.u64()?;
    if declared != expected as u64 {
        return Err(format!(
            "declares {declared} parameters but the shapes need {expected}"
        ));
    }
    if bytes.len() - c.pos != expected * 8 {
        return Err(format!(
            "{} bytes of parameters, expected {}",
            bytes.len() - c.pos,
            expected * 8
        ));
    }
    let mut read = |n: usize| -> std::result::Result<Vec<f64>, String> {
        Ok(c.take(8 * n)?
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    };
    let mut nets = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut layers = Vec::new();
        for win in spec.widths.windows(2) {
            let (fan_in, fan_out) = (win[0], win[1]);
            let weight = Tensor::matrix(fan_in, fan_out, read(fan_in * fan_out)?)
                .map_err(|e| e.to_string())?;
            let bias = Tensor::vector(read(fan_out)?).map_err(|e| e.to_string())?;
            layers.push(Linear { weight, bias });
        }
        nets.push(Mlp::from_layers(spec, layers).map_err(|e| e.to_string())?);
    }
    let head = nets.pop().expect("head descriptor");
    GmcModel::from_parts(nets, head).map_err(|e| e.to_string())
}

pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<GmcModel> {
    parse(bytes).map_err(|reason| CliError::format(origin, reason))
}

pub fn save(path: &Path, model: &GmcModel) -> Result<()> {
    std::fs::write(path, to_bytes(model)).map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> Result<GmcModel> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    from_bytes(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gmc::model::ModelConfig;

    fn small() -> GmcModel {
        let cfg = ModelConfig {
            intermediate_dim: 3,
            latent_dim: 2,
            encoder_hidden: vec![4],
            head_hidden: vec![],
            ..ModelConfig::default()
        };
        GmcModel::new(&[2, 5], &cfg, 11).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let m = small();
        let bytes = to_bytes(&m);
        let back = from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(to_bytes(&back), bytes);
        for (a, b) in m.params().iter().zip(back.params()) {
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
        assert_eq!(back.input_dims(), [2, 5]);
    }

    #[test]
    fn header_layout() {
        let bytes = to_bytes(&small());
        assert_eq!(&bytes[..4], b"GMC1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        // First encoder: 2 layers, widths 2, 4, 3, one swish code.
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(bytes[28], 1);
    }

    #[test]
    fn corruption_is_a_format_error() {
        let good = to_bytes(&small());
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        let mut bad_version = good.clone();
        bad_version[4] = 2;
        let truncated = &good[..good.len() - 1];
        let mut extended = good.clone();
        extended.push(0);
        for bytes in [
            &bad_magic[..],
            &bad_version,
            truncated,
            &extended,
            &good[..2],
            &[],
        ] {
            let err = from_bytes(bytes, Path::new("ckpt")).unwrap_err();
            assert!(matches!(err, CliError::Format { .. }), "{err}");
            assert_eq!(err.exit_code(), 3);
        }
    }
}
