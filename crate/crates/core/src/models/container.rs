//! Model container file.
//!
//! Layout: the magic bytes `MCAE1`, a little-endian `u32` header length, a
//! JSON header describing the architecture, then every parameter tensor as
//! little-endian `f32` values in layer order (weight before bias).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::autoencoder::{reference_architecture, AutoencoderModel};
use super::mlp::MlpModel;
use crate::error::{PadError, Result};
use crate::tensorcore::{Layer, LayerSpec, ParamTensor, TensorND};

pub const MAGIC: &[u8; 5] = b"MCAE1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Autoencoder,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Section {
    Encoder,
    Decoder,
    Mlp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerEntry {
    section: Section,
    #[serde(flatten)]
    spec: LayerSpec,
    trainable: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    kind: ModelKind,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    latent_shape: Option<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    latent_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_dim: Option<usize>,
    layers: Vec<LayerEntry>,
}

fn format_err(msg: impl Into<String>) -> PadError {
    PadError::Format(msg.into())
}

fn entries<'a>(section: Section, layers: &'a [Layer]) -> impl Iterator<Item = LayerEntry> + 'a {
    layers.iter().map(move |l| LayerEntry {
        section,
        spec: l.spec,
        trainable: l.params.first().is_none_or(|p| p.trainable),
    })
}

fn write(header: &Header, layers: &[&Layer]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(MAGIC.len() + 4 + json.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for layer in layers {
        for p in &layer.params {
            for &v in p.value.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn read(bytes: &[u8]) -> Result<(Header, Vec<(Section, Layer)>)> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(format_err("missing MCAE1 magic bytes"));
    }
    let mut pos = MAGIC.len();
    let header_len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().expect("4 bytes")) as usize;
    pos += 4;
    let header_bytes = bytes
        .get(pos..pos + header_len)
        .ok_or_else(|| format_err("truncated header"))?;
    let version: serde_json::Value = serde_json::from_slice(header_bytes)
        .map_err(|e| format_err(format!("unreadable header: {e}")))?;
    match version.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(v) => {
            return Err(format_err(format!(
                "unsupported format_version {v}, this build reads version {FORMAT_VERSION}"
            )))
        }
        None => return Err(format_err("header has no format_version")),
    }
    let header: Header = serde_json::from_value(version)
        .map_err(|e| format_err(format!("invalid header: {e}")))?;
    pos += header_len;

    let mut layers = Vec::with_capacity(header.layers.len());
    for entry in &header.layers {
        let mut params = Vec::new();
        for shape in entry.spec.param_shapes() {
            let n: usize = shape.iter().product();
            let raw = bytes
                .get(pos..pos + 4 * n)
                .ok_or_else(|| format_err("truncated parameter data"))?;
            pos += 4 * n;
            let data = raw
                .chunks_exact(4)
                .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
                .collect();
            let mut p = ParamTensor::new(TensorND::new(shape, data)?);
            p.trainable = entry.trainable;
            params.push(p);
        }
        layers.push((entry.section, Layer::from_params(entry.spec, params)?));
    }
    if pos != bytes.len() {
        return Err(format_err(format!(
            "{} trailing bytes after parameter data",
            bytes.len() - pos
        )));
    }
    Ok((header, layers))
}

impl AutoencoderModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format_version: FORMAT_VERSION,
            kind: ModelKind::Autoencoder,
            seed: self.seed,
            input_size: Some(self.input_size),
            latent_shape: Some(self.latent_shape),
            latent_dim: Some(self.latent_dim()),
            input_dim: None,
            layers: entries(Section::Encoder, &self.encoder)
                .chain(entries(Section::Decoder, &self.decoder))
                .collect(),
        };
        let layers: Vec<&Layer> = self.encoder.iter().chain(&self.decoder).collect();
        write(&header, &layers)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, layers) = read(bytes)?;
        if header.kind != ModelKind::Autoencoder {
            return Err(format_err(format!("expected an autoencoder, found {:?}", header.kind)));
        }
        let input_size = header.input_size.ok_or_else(|| format_err("missing input_size"))?;
        let latent_shape = header.latent_shape.ok_or_else(|| format_err("missing latent_shape"))?;
        let (enc_ref, dec_ref, latent_ref) = reference_architecture(input_size)?;
        let mut encoder = Vec::new();
        let mut decoder = Vec::new();
        for (section, layer) in layers {
            match section {
                Section::Encoder => encoder.push(layer),
                Section::Decoder => decoder.push(layer),
                Section::Mlp => return Err(format_err("MLP layer inside an autoencoder file")),
            }
        }
        let specs = |ls: &[Layer]| ls.iter().map(|l| l.spec).collect::<Vec<_>>();
        if specs(&encoder) != enc_ref || specs(&decoder) != dec_ref || latent_shape != latent_ref {
            return Err(format_err(format!(
                "layer chain does not match the {input_size}-input architecture"
            )));
        }
        if header.latent_dim.is_some_and(|d| d != latent_shape.iter().product::<usize>()) {
            return Err(format_err("latent_dim disagrees with latent_shape"));
        }
        Ok(AutoencoderModel {
            input_size,
            latent_shape,
            seed: header.seed,
            encoder,
            decoder,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| PadError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| format_err(format!("{}: {e}", path.display())))
    }
}

impl MlpModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format_version: FORMAT_VERSION,
            kind: ModelKind::Mlp,
            seed: self.seed,
            input_size: None,
            latent_shape: None,
            latent_dim: None,
            input_dim: Some(self.input_dim),
            layers: entries(Section::Mlp, &self.layers).collect(),
        };
        let layers: Vec<&Layer> = self.layers.iter().collect();
        write(&header, &layers)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, layers) = read(bytes)?;
        if header.kind != ModelKind::Mlp {
            return Err(format_err(format!("expected an MLP, found {:?}", header.kind)));
        }
        let input_dim = header.input_dim.ok_or_else(|| format_err("missing input_dim"))?;
        let layers: Vec<Layer> = layers.into_iter().map(|(_, l)| l).collect();
        match layers.first().map(|l| l.spec) {
            Some(LayerSpec::Linear { inputs, .. }) if inputs == input_dim => {}
            _ => return Err(format_err("MLP layers do not start with a matching linear layer")),
        }
        Ok(MlpModel {
            input_dim,
            seed: header.seed,
            layers,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| PadError::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| format_err(format!("{}: {e}", path.display())))
    }
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| PadError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| PadError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| PadError::io(path, e))
}
