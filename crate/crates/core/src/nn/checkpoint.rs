//! Binary checkpoint format.
//!
//! Little-endian throughout:
//!
//! ```text
//! "PCNN" u32:format
//! u8:variant u64:input u64:hidden u64:steps f64:dropout f64:bn_eps f64:bn_momentum
//! u64:version
//! u32:n  n × tensor            (weights, in Weights::tensors order)
//! tensor:running_mean tensor:running_var
//! u8:has_optimizer [u64:steps u32:n n × tensor]
//! u32:n  n × (string, u64:len, len × f64)   extras
//! tensor = string:name u32:ndim ndim × u64 f64 data
//! string = u32:len utf-8 bytes
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::network::{NetworkConfig, NetworkParams, Variant};
use super::rmsprop::RmsPropState;
use super::tensor::Tensor;
use super::{NnError, Result};

const MAGIC: &[u8; 4] = b"PCNN";
const FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParams,
    pub optimizer: Option<RmsPropState>,
    /// Named auxiliary vectors, e.g. the feature scaler.
    pub extras: BTreeMap<String, Vec<f64>>,
}

fn corrupt(msg: impl Into<String>) -> NnError {
    NnError::Checkpoint(msg.into())
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn tensor(&mut self, name: &str, t: &Tensor) {
        self.str(name);
        self.u32(t.shape().len() as u32);
        for d in t.shape() {
            self.u64(*d as u64);
        }
        for v in t.data() {
            self.f64(*v);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| corrupt("truncated file"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| corrupt("size out of range"))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| corrupt("invalid utf-8 name"))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| corrupt("size out of range"))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }
    fn tensor(&mut self) -> Result<(String, Tensor)> {
        let name = self.str()?;
        let ndim = self.u32()? as usize;
        let shape = (0..ndim).map(|_| self.usize()).collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |a, d| a.checked_mul(*d))
            .ok_or_else(|| corrupt("tensor too large"))?;
        let data = self.f64s(n)?;
        Ok((name, Tensor::from_vec(&shape, data)?))
    }
    /// Reads a tensor and checks it against the expected name and shape.
    fn expect(&mut self, name: &str, like: &Tensor) -> Result<Tensor> {
        let (got, t) = self.tensor()?;
        if got != name || t.shape() != like.shape() {
            return Err(corrupt(format!(
                "expected tensor {name} {:?}, found {got} {:?}",
                like.shape(),
                t.shape()
            )));
        }
        Ok(t)
    }
}

impl Checkpoint {
    pub fn new(params: NetworkParams) -> Self {
        Self {
            params,
            optimizer: None,
            extras: BTreeMap::new(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT);
        let c = &self.params.config;
        w.u8(c.variant.tag());
        w.u64(c.input_dim as u64);
        w.u64(c.hidden as u64);
        w.u64(c.steps as u64);
        w.f64(c.dropout_rate);
        w.f64(c.bn_eps);
        w.f64(c.bn_momentum);
        w.u64(self.params.version);

        let names = self.params.weights.tensor_names();
        w.u32(names.len() as u32);
        for (name, t) in names.iter().zip(self.params.weights.tensors()) {
            w.tensor(name, t);
        }
        w.tensor("bn.running_mean", &self.params.bn_running.mean);
        w.tensor("bn.running_var", &self.params.bn_running.var);

        match &self.optimizer {
            Some(opt) => {
                w.u8(1);
                w.u64(opt.steps);
                w.u32(opt.r.len() as u32);
                for (name, t) in names.iter().zip(&opt.r) {
                    w.tensor(&format!("rmsprop.{name}"), t);
                }
            }
            None => w.u8(0),
        }

        w.u32(self.extras.len() as u32);
        for (k, v) in &self.extras {
            w.str(k);
            w.u64(v.len() as u64);
            v.iter().for_each(|x| w.f64(*x));
        }
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(corrupt("not a checkpoint (bad magic)"));
        }
        let format = r.u32()?;
        if format != FORMAT {
            return Err(corrupt(format!("unsupported format version {format}")));
        }
        let tag = r.u8()?;
        let variant = Variant::from_tag(tag).ok_or_else(|| corrupt(format!("unknown variant tag {tag}")))?;
        let config = NetworkConfig {
            variant,
            input_dim: r.usize()?,
            hidden: r.usize()?,
            steps: r.usize()?,
            dropout_rate: r.f64()?,
            bn_eps: r.f64()?,
            bn_momentum: r.f64()?,
        };
        let mut params = NetworkParams::zeros(config)?;
        params.version = r.u64()?;

        let names = params.weights.tensor_names();
        if r.u32()? as usize != names.len() {
            return Err(corrupt("tensor count does not match the variant"));
        }
        for (name, slot) in names.iter().zip(params.weights.tensors_mut()) {
            *slot = r.expect(name, slot)?;
        }
        params.bn_running.mean = r.expect("bn.running_mean", &params.bn_running.mean)?;
        params.bn_running.var = r.expect("bn.running_var", &params.bn_running.var)?;

        let optimizer = match r.u8()? {
            0 => None,
            1 => {
                let mut opt = RmsPropState::new(&params.weights);
                opt.steps = r.u64()?;
                if r.u32()? as usize != opt.r.len() {
                    return Err(corrupt("optimizer tensor count mismatch"));
                }
                for (name, slot) in names.iter().zip(opt.r.iter_mut()) {
                    *slot = r.expect(&format!("rmsprop.{name}"), slot)?;
                }
                Some(opt)
            }
            other => return Err(corrupt(format!("bad optimizer flag {other}"))),
        };

        let mut extras = BTreeMap::new();
        for _ in 0..r.u32()? {
            let key = r.str()?;
            let n = r.usize()?;
            extras.insert(key, r.f64s(n)?);
        }
        if r.pos != buf.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Self {
            params,
            optimizer,
            extras,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| corrupt(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let buf = fs::read(path).map_err(|e| corrupt(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&buf)
    }
}
