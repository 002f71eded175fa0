//! Flat trainable parameter storage with the slot-sharing map.
//!
//! One table backs both circuits: slot ids are global, with circuit 1
//! occupying the first `L*n*3` entries and circuit 2 the second block. The
//! bias vector (one entry per class) is stored separately but updated
//! together with theta by the optimizer.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{AngleBinding, CircuitProgram};
use crate::error::{Error, Result};

/// One place a slot's value is consumed: (circuit index, gate index, angle
/// position).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Occurrence {
    pub circuit: usize,
    pub gate: usize,
    pub angle: usize,
}

/// Trainable parameters for the circuit pair plus the class bias.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterTable {
    theta: Vec<f64>,
    bias: Vec<f64>,
    sharing: Vec<Vec<Occurrence>>,
}

impl ParameterTable {
    /// Raw constructor for tests and small hand-built circuits; the sharing
    /// map is left empty.
    pub fn with_values(theta: Vec<f64>, bias: Vec<f64>) -> Self {
        let sharing = vec![Vec::new(); theta.len()];
        ParameterTable { theta, bias, sharing }
    }

    /// Build the layout for a circuit pair by scanning their slot bindings.
    /// Theta starts at zero (use [`randomize`](Self::randomize) for the
    /// uniform init) and the bias starts at zero.
    ///
    /// Every slot referenced by either program must fit the combined slot
    /// count, and every slot must be referenced at least once.
    pub fn layout(programs: &[&CircuitProgram], n_classes: usize) -> Result<Self> {
        let n_slots = programs
            .iter()
            .filter_map(|p| p.max_slot())
            .map(|m| m + 1)
            .max()
            .unwrap_or(0);
        let mut sharing = vec![Vec::new(); n_slots];
        for (ci, program) in programs.iter().enumerate() {
            for (gi, gate) in program.gates().iter().enumerate() {
                for (ai, binding) in gate.angles.iter().enumerate() {
                    if let AngleBinding::Slot(s) = binding {
                        sharing[*s].push(Occurrence { circuit: ci, gate: gi, angle: ai });
                    }
                }
            }
        }
        if let Some(unused) = sharing.iter().position(|occ| occ.is_empty()) {
            return Err(Error::Structural(format!(
                "parameter slot {unused} is never referenced by any program"
            )));
        }
        Ok(ParameterTable {
            theta: vec![0.0; n_slots],
            bias: vec![0.0; n_classes],
            sharing,
        })
    }

    /// Draw every theta uniformly from [0, 2*pi); the bias stays zero.
    pub fn randomize(&mut self, rng: &mut ChaCha8Rng) {
        for t in &mut self.theta {
            *t = rng.random_range(0.0..std::f64::consts::TAU);
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn n_slots(&self) -> usize {
        self.theta.len()
    }

    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    /// Total trainable value count (theta plus bias).
    pub fn trainable_count(&self) -> usize {
        self.theta.len() + self.bias.len()
    }

    /// Where slot `slot` is consumed.
    pub fn occurrences(&self, slot: usize) -> Result<&[Occurrence]> {
        self.sharing
            .get(slot)
            .map(|v| v.as_slice())
            .ok_or(Error::UnboundSlot { slot })
    }

    /// Flatten theta followed by bias (the optimizer's parameter order).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.trainable_count());
        out.extend_from_slice(&self.theta);
        out.extend_from_slice(&self.bias);
        out
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.trainable_count() {
            return Err(Error::Usage(format!(
                "expected {} values, got {}",
                self.trainable_count(),
                flat.len()
            )));
        }
        let split = self.theta.len();
        self.theta.copy_from_slice(&flat[..split]);
        self.bias.copy_from_slice(&flat[split..]);
        Ok(())
    }

    /// Write the table in the binary parameter format: the 8-byte magic
    /// `PQCPARAM`, a little-endian u32 version (1), u32 theta length, u32
    /// bias length, then theta and bias as little-endian f64.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(PARAMS_MAGIC)?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.theta.len() as u32).to_le_bytes())?;
        w.write_all(&(self.bias.len() as u32).to_le_bytes())?;
        for v in self.theta.iter().chain(&self.bias) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a table written by [`save`](Self::save). The sharing map is not
    /// stored; re-attach it with [`layout`](Self::layout)-built tables via
    /// [`assign_flat`](Self::assign_flat) when occurrence data is needed.
    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != PARAMS_MAGIC {
            return Err(Error::Data(format!(
                "{} is not a parameter file (bad magic)",
                path.display()
            )));
        }
        let version = read_u32(&mut r)?;
        if version != 1 {
            return Err(Error::Data(format!("unsupported parameter file version {version}")));
        }
        let theta_len = read_u32(&mut r)? as usize;
        let bias_len = read_u32(&mut r)? as usize;
        let mut values = vec![0.0f64; theta_len + bias_len];
        let mut buf = [0u8; 8];
        for v in &mut values {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        let bias = values.split_off(theta_len);
        Ok(ParameterTable::with_values(values, bias))
    }
}

const PARAMS_MAGIC: &[u8; 8] = b"PQCPARAM";

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
