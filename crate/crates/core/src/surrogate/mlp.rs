//! Fully connected network with tanh hidden layers, parameters in one flat
//! vector (per layer: row-major weights, then biases).

use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation value.
    #[inline]
    fn slope(self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    output: Activation,
    params: Vec<f64>,
}

const MAGIC: &str = "WOSNO-MODEL";
const FORMAT_VERSION: u32 = 1;

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// All-zero network. `sizes` lists input, hidden and output widths; the
    /// output width must be 1.
    pub fn zeros(sizes: &[usize], output: Activation) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidConfig(format!("bad layer sizes {sizes:?}")));
        }
        if *sizes.last().unwrap() != 1 {
            return Err(Error::InvalidConfig(
                "surrogate output must be scalar".into(),
            ));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            output,
            params: vec![0.0; param_count(sizes)],
        })
    }

    /// Glorot-uniform weights, zero biases, identity output.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut m = Self::zeros(sizes, Activation::Identity)?;
        let mut off = 0;
        for w in sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            for p in &mut m.params[off..off + n_in * n_out] {
                *p = rng.random_range(-limit..limit);
            }
            off += n_in * n_out + n_out;
        }
        Ok(m)
    }

    pub fn from_params(sizes: &[usize], output: Activation, params: Vec<f64>) -> Result<Self> {
        let mut m = Self::zeros(sizes, output)?;
        if params.len() != m.params.len() {
            return Err(Error::ShapeMismatch {
                expected: m.params.len(),
                actual: params.len(),
            });
        }
        m.params = params;
        Ok(m)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::ShapeMismatch {
                expected: self.input_len(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn layer_activation(&self, layer: usize) -> Activation {
        if layer + 2 == self.sizes.len() {
            self.output
        } else {
            Activation::Tanh
        }
    }

    /// Activations of every layer, input first.
    fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        let mut off = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[off..off + n_in * n_out];
            let bias = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let act = self.layer_activation(l);
            let prev = acts.last().unwrap();
            let next: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    let z = bias[o] + row.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>();
                    act.apply(z)
                })
                .collect();
            acts.push(next);
            off += n_in * n_out + n_out;
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.forward_all(x).last().unwrap()[0])
    }

    pub fn predict_batch(&self, features: &[f64]) -> Result<Vec<f64>> {
        let n_in = self.input_len();
        if !features.len().is_multiple_of(n_in) {
            return Err(Error::ShapeMismatch {
                expected: n_in,
                actual: features.len() % n_in,
            });
        }
        features.chunks(n_in).map(|x| self.forward(x)).collect()
    }

    fn check_batch(&self, features: &[f64], targets: &[f64]) -> Result<()> {
        let n_in = self.input_len();
        if !features.len().is_multiple_of(n_in) {
            return Err(Error::ShapeMismatch {
                expected: n_in,
                actual: features.len() % n_in,
            });
        }
        if features.len() / n_in != targets.len() {
            return Err(Error::CountMismatch {
                predictions: features.len() / n_in,
                targets: targets.len(),
            });
        }
        if targets.is_empty() {
            return Err(Error::CountMismatch {
                predictions: 0,
                targets: 0,
            });
        }
        Ok(())
    }

    /// Mean squared deviation between predictions and targets over a batch of
    /// row-major feature vectors.
    pub fn loss(&self, features: &[f64], targets: &[f64]) -> Result<f64> {
        self.check_batch(features, targets)?;
        let n_in = self.input_len();
        let sse: f64 = features
            .chunks(n_in)
            .zip(targets)
            .map(|(x, t)| (self.forward_all(x).last().unwrap()[0] - t).powi(2))
            .sum();
        Ok(sse / targets.len() as f64)
    }

    /// Loss and its exact gradient with respect to [`Mlp::params`].
    pub fn loss_and_grad(&self, features: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_batch(features, targets)?;
        let n_in = self.input_len();
        let n = targets.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut sse = 0.0;
        let offsets: Vec<usize> = self
            .sizes
            .windows(2)
            .scan(0, |off, w| {
                let o = *off;
                *off += w[0] * w[1] + w[1];
                Some(o)
            })
            .collect();
        for (x, t) in features.chunks(n_in).zip(targets) {
            let acts = self.forward_all(x);
            let y = acts.last().unwrap()[0];
            sse += (y - t).powi(2);
            let mut delta = vec![2.0 * (y - t) / n * self.output.slope(y)];
            for l in (0..self.sizes.len() - 1).rev() {
                let (n_in_l, n_out) = (self.sizes[l], self.sizes[l + 1]);
                let off = offsets[l];
                let prev = &acts[l];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let g = &mut grad[off + o * n_in_l..off + (o + 1) * n_in_l];
                    g.iter_mut().zip(prev).for_each(|(g, a)| *g += d * a);
                    grad[off + n_in_l * n_out + o] += d;
                }
                if l > 0 {
                    let weights = &self.params[off..off + n_in_l * n_out];
                    let act = self.layer_activation(l - 1);
                    delta = (0..n_in_l)
                        .map(|i| {
                            let s: f64 =
                                (0..n_out).map(|o| weights[o * n_in_l + i] * delta[o]).sum();
                            s * act.slope(prev[i])
                        })
                        .collect();
                }
            }
        }
        Ok((sse / n, grad))
    }

    /// Versioned binary checkpoint: header line, layer sizes, parameters.
    pub fn write_to<W: Write>(&self, mut w: W, provenance: &str) -> Result<()> {
        if provenance.contains('\n') {
            return Err(Error::Format("provenance must be a single line".into()));
        }
        writeln!(w, "{MAGIC} {FORMAT_VERSION} {provenance}")?;
        w.write_all(&(self.sizes.len() as u32).to_le_bytes())?;
        for s in &self.sizes {
            w.write_all(&(*s as u64).to_le_bytes())?;
        }
        w.write_all(&[match self.output {
            Activation::Identity => 0u8,
            Activation::Tanh => 1,
        }])?;
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<(Self, String)> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let mut parts = line.trim_end_matches('\n').splitn(3, ' ');
        if parts.next() != Some(MAGIC) {
            return Err(Error::Format("not a model checkpoint".into()));
        }
        match parts.next().and_then(|v| v.parse::<u32>().ok()) {
            Some(FORMAT_VERSION) => {}
            v => {
                return Err(Error::Format(format!(
                    "unsupported checkpoint version {v:?}"
                )))
            }
        }
        let provenance = parts.next().unwrap_or("").to_string();
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let n_layers = u32::from_le_bytes(b4) as usize;
        if n_layers > 1024 {
            return Err(Error::Format(format!("implausible layer count {n_layers}")));
        }
        let mut sizes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            r.read_exact(&mut b8)?;
            sizes.push(u64::from_le_bytes(b8) as usize);
        }
        let mut b1 = [0u8; 1];
        r.read_exact(&mut b1)?;
        let output = match b1[0] {
            0 => Activation::Identity,
            1 => Activation::Tanh,
            x => return Err(Error::Format(format!("unknown activation tag {x}"))),
        };
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let mut model = Self::zeros(&sizes, output)?;
        if n != model.params.len() {
            return Err(Error::ShapeMismatch {
                expected: model.params.len(),
                actual: n,
            });
        }
        for p in &mut model.params {
            r.read_exact(&mut b8)?;
            *p = f64::from_le_bytes(b8);
        }
        if !model.params.iter().all(|p| p.is_finite()) {
            return Err(Error::Format("checkpoint has non-finite parameters".into()));
        }
        Ok((model, provenance))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn zero_network_outputs_zero() {
        let m = Mlp::zeros(&[4, 8, 8, 1], Activation::Identity).unwrap();
        assert_eq!(m.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn single_layer_examples() {
        let w = vec![1.0, 0.0, 0.0, 0.0];
        let lin = Mlp::from_params(&[3, 1], Activation::Identity, w.clone()).unwrap();
        assert_eq!(lin.forward(&[3.5, 2.0, -1.0]).unwrap(), 3.5);
        let th = Mlp::from_params(&[3, 1], Activation::Tanh, w).unwrap();
        assert!((th.forward(&[3.5, 2.0, -1.0]).unwrap() - 0.998_177_897_611_199).abs() < 1e-12);
    }

    #[test]
    fn wrong_input_length() {
        let m = Mlp::zeros(&[3, 1], Activation::Identity).unwrap();
        assert!(matches!(
            m.forward(&[1.0]),
            Err(Error::ShapeMismatch {
                expected: 3,
                actual: 1
            })
        ));
        assert!(matches!(
            m.loss(&[1.0, 2.0, 3.0], &[0.0, 1.0]),
            Err(Error::CountMismatch { .. })
        ));
    }

    #[test]
    fn loss_examples() {
        let m = Mlp::from_params(&[1, 1], Activation::Identity, vec![0.0, 1.0]).unwrap();
        assert_eq!(m.loss(&[0.3], &[0.0]).unwrap(), 1.0);
        assert_eq!(m.loss(&[0.3], &[1.0]).unwrap(), 0.0);
        let (l, g) = m.loss_and_grad(&[0.3], &[1.0]).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn checkpoint_roundtrip() {
        let m = Mlp::init(&[5, 7, 3, 1], &mut substream(1, 0, 0, 0)).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf, "seed=1").unwrap();
        let (back, prov) = Mlp::read_from(&buf[..]).unwrap();
        assert_eq!(back, m);
        assert_eq!(prov, "seed=1");
        assert!(Mlp::read_from(&buf[..buf.len() - 1]).is_err());
    }
}
