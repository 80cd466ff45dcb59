use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::quantum::{CircuitParams, ANGLES};

/// Lower bound kept on every Gaussian MF width.
pub const MIN_MF_WIDTH: f64 = 0.05;
/// Deep-space dimension fed to the circuit.
pub const DEEP_DIM: usize = 4;
/// Hidden width of the convolutional MFs.
pub const CONV_HIDDEN: usize = 4;

/// Position of each tensor in [`NetworkParams::values`].
pub mod slot {
    /// Six centres: (M, 1-M, G, 1-G, S, 1-S).
    pub const MF_CENTER: usize = 0;
    pub const MF_WIDTH: usize = 6;
    /// Hesitancy logits for M, G, S.
    pub const TOKENS: usize = 12;
    /// `w1 [4,1], b1 [4], w2 [1,4], b2 [1]` of the all-properties conv MF.
    pub const CONV_ALL: usize = 15;
    /// Same layout for the no-property conv MF.
    pub const CONV_NONE: usize = 19;
    pub const PROJ_A: usize = 23;
    pub const PROJ_B: usize = 25;
    pub const PROJ_H: usize = 27;
    /// `[4, 5]` weight and `[4]` bias of the final projector.
    pub const PROJ_OUT: usize = 29;
    /// Depthwise scale `[C]`, depthwise bias `[C]`, channel map `[4, C]`, bias `[4]`.
    pub const BSM: usize = 31;
    pub const ANGLES: usize = 35;
    pub const SCALE: usize = 36;
    pub const OFFSET: usize = 37;
    pub const COUNT: usize = 38;
}

const MAGIC: &[u8; 4] = b"HFQN";
const VERSION: u32 = 1;

/// Every trainable quantity of the quantum decision network, as a flat list
/// of tensors addressed through [`slot`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub shapes: Vec<Vec<usize>>,
    pub values: Vec<Vec<f64>>,
}

fn layout(height: usize, width: usize, bands: usize) -> Vec<Vec<usize>> {
    let mut s: Vec<Vec<usize>> = Vec::with_capacity(slot::COUNT);
    s.extend((0..12).map(|_| vec![1]));
    s.extend((0..3).map(|_| vec![height, width, 1]));
    for _ in 0..2 {
        s.extend([vec![CONV_HIDDEN, 1], vec![CONV_HIDDEN], vec![1, CONV_HIDDEN], vec![1]]);
    }
    for _ in 0..3 {
        s.extend([vec![1, 3], vec![1]]);
    }
    s.extend([vec![DEEP_DIM, 5], vec![DEEP_DIM]]);
    s.extend([vec![bands], vec![bands], vec![DEEP_DIM, bands], vec![DEEP_DIM]]);
    s.extend([vec![ANGLES], vec![1], vec![1]]);
    debug_assert_eq!(s.len(), slot::COUNT);
    s
}

/// `(weight, bias)` slots initialised with the uniform fan-in rule.
const LINEAR_LAYERS: [(usize, usize); 9] = [
    (slot::CONV_ALL, 1),
    (slot::CONV_ALL + 2, CONV_HIDDEN),
    (slot::CONV_NONE, 1),
    (slot::CONV_NONE + 2, CONV_HIDDEN),
    (slot::PROJ_A, 3),
    (slot::PROJ_B, 3),
    (slot::PROJ_H, 3),
    (slot::PROJ_OUT, 5),
    (slot::BSM + 2, 0),
];

impl NetworkParams {
    /// Seeded initialisation: uniform `±1/sqrt(fan_in)` for 1x1 layers,
    /// Gaussian MF and circuit parameters, zero tokens.
    pub fn init(height: usize, width: usize, bands: usize, seed: u64) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::Argument(format!(
                "network dimensions must be positive, got {height}x{width}x{bands}"
            )));
        }
        let shapes = layout(height, width, bands);
        let mut values: Vec<Vec<f64>> = shapes.iter().map(|s| vec![0.0; s.iter().product()]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centre = Normal::new(0.5f64, 0.1).expect("valid normal");
        let spread = Normal::new(0.3f64, 0.05).expect("valid normal");
        for k in 0..6 {
            values[slot::MF_CENTER + k][0] = centre.sample(&mut rng);
            values[slot::MF_WIDTH + k][0] = spread.sample(&mut rng).max(MIN_MF_WIDTH);
        }
        let mut uniform = |slot: usize, fan_in: usize, values: &mut Vec<Vec<f64>>| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in values[slot].iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        };
        for (w, fan_in) in LINEAR_LAYERS {
            let fan_in = if fan_in == 0 { bands } else { fan_in };
            uniform(w, fan_in, &mut values);
            uniform(w + 1, fan_in, &mut values);
        }
        // depthwise: one input per group
        uniform(slot::BSM, 1, &mut values);
        uniform(slot::BSM + 1, 1, &mut values);
        let angle = Normal::new(0.0f64, 0.1).expect("valid normal");
        for v in values[slot::ANGLES].iter_mut() {
            *v = angle.sample(&mut rng);
        }
        values[slot::SCALE][0] = 1.0;
        values[slot::OFFSET][0] = 0.0;
        Ok(Self {
            height,
            width,
            bands,
            shapes,
            values,
        })
    }

    /// Trainable scalars excluding the per-pixel hesitancy tokens.
    pub fn count_without_tokens(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| !(slot::TOKENS..slot::TOKENS + 3).contains(i))
            .map(|(_, v)| v.len())
            .sum()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.values.iter().map(Vec::len).collect()
    }

    pub fn circuit(&self) -> CircuitParams<f64> {
        let mut angles = [0.0; ANGLES];
        angles.copy_from_slice(&self.values[slot::ANGLES]);
        CircuitParams {
            angles,
            scale: self.values[slot::SCALE][0],
            offset: self.values[slot::OFFSET][0],
        }
    }

    /// Keeps every MF width at or above [`MIN_MF_WIDTH`].
    pub fn clamp_widths(&mut self) {
        for k in 0..6 {
            let s = &mut self.values[slot::MF_WIDTH + k][0];
            *s = s.max(MIN_MF_WIDTH);
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        for v in [VERSION, self.height as u32, self.width as u32, self.bands as u32, self.values.len() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for (shape, data) in self.shapes.iter().zip(&self.values) {
            out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for &d in shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(Error::Parse("not a network parameter blob (bad magic)".into()));
        }
        let version = cur.u32()?;
        if version != VERSION {
            return Err(Error::Parse(format!("unsupported parameter blob version {version}")));
        }
        let (height, width, bands) = (cur.u32()? as usize, cur.u32()? as usize, cur.u32()? as usize);
        let count = cur.u32()? as usize;
        let expected = layout(height, width, bands);
        if count != expected.len() {
            return Err(Error::Structure(format!("expected {} tensors, blob holds {count}", expected.len())));
        }
        let mut shapes = Vec::with_capacity(count);
        let mut values = Vec::with_capacity(count);
        for want in &expected {
            let ndim = cur.u32()? as usize;
            let shape: Vec<usize> = (0..ndim).map(|_| cur.u32().map(|d| d as usize)).collect::<Result<_>>()?;
            if &shape != want {
                return Err(Error::Structure(format!("tensor shape {shape:?} where {want:?} was expected")));
            }
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|_| cur.take(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))))
                .collect::<Result<Vec<f64>>>()?;
            shapes.push(shape);
            values.push(data);
        }
        if cur.pos != bytes.len() {
            return Err(Error::Structure(format!("{} trailing bytes after parameters", bytes.len() - cur.pos)));
        }
        Ok(Self {
            height,
            width,
            bands,
            shapes,
            values,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut buf = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Parse("parameter blob truncated".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
