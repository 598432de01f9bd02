//! Little-endian binary containers.
//!
//! Realization blob: `"AGNR"`, version, then for every layer its hops with
//! their gain matrices and receiver noise.
//!
//! Dataset file: `"AGND"`, version, task tag, a header, then 64-bit floats.
//! Source-localization files carry the operator and every sample; flocking
//! files carry swarm states only, and graphs, features and oracle actions
//! are recomputed on load.

use crate::channel::{ChannelRealization, FadingMatrix, HopRealization, LayerRealization};
use crate::data::Splits;
use crate::error::{Error, Result};
use crate::graphs::{GraphShiftOperator, GraphSignal, MAX_NODES};
use crate::tasks::diffusion::{DiffusionDataset, DiffusionSample};
use crate::tasks::flocking::{FlockDataset, FlockTrajectory, FlockingConfig, SwarmState};

pub const REALIZATION_MAGIC: &[u8; 4] = b"AGNR";
pub const DATASET_MAGIC: &[u8; 4] = b"AGND";
pub const VERSION: u32 = 1;

const TASK_DIFFUSION: u8 = 0;
const TASK_FLOCKING: u8 = 1;

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: usize) {
        self.buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|&v| self.f64(v));
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Decode(format!("truncated input at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| Error::Decode(format!("count {v} too large")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    /// `count` floats, checking the input is long enough before allocating.
    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = count.checked_mul(8).ok_or_else(|| Error::Decode("length overflow".into()))?;
        let raw = self.take(bytes)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    /// Guards a declared element count against the bytes left.
    fn expect_at_least(&self, count: usize, bytes_each: usize) -> Result<()> {
        match count.checked_mul(bytes_each) {
            Some(b) if b <= self.remaining() => Ok(()),
            _ => Err(Error::Decode(format!("declared count {count} exceeds input"))),
        }
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(Error::Decode("bad magic".into()));
        }
        let v = self.u32()?;
        if v != VERSION as usize {
            return Err(Error::Decode(format!("unsupported version {v}")));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Decode(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

pub fn encode_realization(r: &ChannelRealization) -> Vec<u8> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(REALIZATION_MAGIC);
    w.u32(VERSION as usize);
    w.u32(r.layers.len());
    for layer in &r.layers {
        w.u32(layer.hops.len());
        for hop in &layer.hops {
            let nnz = hop.fading.first().map_or(0, |m| m.gains.len());
            w.u32(hop.fading.len());
            w.u32(nnz);
            w.u32(hop.noise.n());
            w.u32(hop.noise.features());
            for m in &hop.fading {
                w.f64s(&m.gains);
            }
            w.f64s(hop.noise.as_slice());
        }
    }
    w.buf
}

pub fn decode_realization(bytes: &[u8]) -> Result<ChannelRealization> {
    let mut r = Reader::new(bytes);
    r.header(REALIZATION_MAGIC)?;
    let num_layers = r.u32()?;
    r.expect_at_least(num_layers, 4)?;
    let mut layers = Vec::with_capacity(num_layers);
    for _ in 0..num_layers {
        let num_hops = r.u32()?;
        r.expect_at_least(num_hops, 16)?;
        let mut hops = Vec::with_capacity(num_hops);
        for _ in 0..num_hops {
            let (mats, nnz, n, f) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
            if n == 0 || (mats != 1 && mats != f) {
                return Err(Error::Decode(format!("hop with {mats} gain matrices for {f} features")));
            }
            let cells = n.checked_mul(f).ok_or_else(|| Error::Decode("length overflow".into()))?;
            r.expect_at_least(cells, 8)?;
            let mut fading = Vec::with_capacity(mats);
            for _ in 0..mats {
                fading.push(FadingMatrix { gains: r.f64s(nnz)? });
            }
            let noise = GraphSignal::from_rows(n, f, r.f64s(cells)?)?;
            hops.push(HopRealization { fading, noise });
        }
        layers.push(LayerRealization { hops });
    }
    r.finish()?;
    Ok(ChannelRealization { layers })
}

/// Dataset contents as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredDataset {
    Diffusion(DiffusionDataset),
    Flocking(FlockDataset),
}

fn write_gso(w: &mut Writer, s: &GraphShiftOperator) {
    w.u32(s.n());
    w.u64(s.nnz());
    for e in s.entries() {
        w.u32(e.row);
        w.u32(e.col);
        w.f64(e.value);
    }
}

fn read_gso(r: &mut Reader<'_>) -> Result<GraphShiftOperator> {
    let n = r.u32()?;
    if n > MAX_NODES {
        return Err(Error::Decode(format!("{n} nodes exceeds the limit of {MAX_NODES}")));
    }
    let nnz = r.u64()?;
    r.expect_at_least(nnz, 16)?;
    let mut triplets = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        triplets.push((r.u32()?, r.u32()?, r.f64()?));
    }
    GraphShiftOperator::from_triplets(n, &triplets)
}

pub fn encode_dataset(d: &StoredDataset) -> Vec<u8> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(DATASET_MAGIC);
    w.u32(VERSION as usize);
    match d {
        StoredDataset::Diffusion(d) => {
            w.u8(TASK_DIFFUSION);
            write_gso(&mut w, &d.gso);
            w.u32(d.sources.len());
            d.sources.iter().for_each(|&s| w.u32(s));
            w.u64(d.samples.len());
            for part in [&d.splits.train, &d.splits.val, &d.splits.test] {
                w.u64(part.len());
            }
            w.f64(d.reference_power);
            for s in &d.samples {
                w.u32(s.label);
                w.u32(s.tau);
                w.f64s(s.x.as_slice());
            }
        }
        StoredDataset::Flocking(d) => {
            w.u8(TASK_FLOCKING);
            let c = &d.config;
            for v in [c.n, c.steps, c.trajectories, c.splits.0, c.splits.1, c.splits.2, c.max_attempts] {
                w.u32(v);
            }
            w.f64s(&[
                c.comm_radius,
                c.potential_cutoff,
                c.u_max,
                c.dt,
                c.max_init_speed,
                c.mean_degree,
                c.min_distance,
            ]);
            w.u8(c.normalize_gso as u8);
            w.f64(d.reference_power);
            for traj in &d.trajectories {
                w.u32(traj.steps.len());
                for step in &traj.steps {
                    for p in &step.state.positions {
                        w.f64s(p);
                    }
                    for v in &step.state.velocities {
                        w.f64s(v);
                    }
                }
            }
        }
    }
    w.buf
}

fn pairs(flat: Vec<f64>) -> Vec<[f64; 2]> {
    flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

pub fn decode_dataset(bytes: &[u8]) -> Result<StoredDataset> {
    let mut r = Reader::new(bytes);
    r.header(DATASET_MAGIC)?;
    let out = match r.u8()? {
        TASK_DIFFUSION => {
            let gso = read_gso(&mut r)?;
            let n = gso.n();
            let num_sources = r.u32()?;
            r.expect_at_least(num_sources, 4)?;
            let sources = (0..num_sources).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            if let Some(&bad) = sources.iter().find(|&&s| s >= n) {
                return Err(Error::IndexOutOfRange { index: bad, n });
            }
            let count = r.u64()?;
            let (a, b, c) = (r.u64()?, r.u64()?, r.u64()?);
            if a.checked_add(b).and_then(|s| s.checked_add(c)) != Some(count) {
                return Err(Error::Decode("split sizes do not match the sample count".into()));
            }
            let reference_power = r.f64()?;
            let per_sample = n.checked_mul(8).and_then(|b| b.checked_add(8));
            r.expect_at_least(count, per_sample.ok_or_else(|| Error::Decode("length overflow".into()))?)?;
            let mut samples = Vec::with_capacity(count);
            for _ in 0..count {
                let (label, tau) = (r.u32()?, r.u32()?);
                if label >= num_sources {
                    return Err(Error::Decode(format!("label {label} without a source")));
                }
                samples.push(DiffusionSample { x: GraphSignal::from_rows(n, 1, r.f64s(n)?)?, label, tau });
            }
            StoredDataset::Diffusion(DiffusionDataset {
                gso,
                sources,
                samples,
                splits: Splits::contiguous(a, b, c),
                reference_power,
            })
        }
        TASK_FLOCKING => {
            let mut ints = [0usize; 7];
            for v in ints.iter_mut() {
                *v = r.u32()?;
            }
            let fl = r.f64s(7)?;
            let config = FlockingConfig {
                n: ints[0],
                steps: ints[1],
                trajectories: ints[2],
                splits: (ints[3], ints[4], ints[5]),
                max_attempts: ints[6],
                comm_radius: fl[0],
                potential_cutoff: fl[1],
                u_max: fl[2],
                dt: fl[3],
                max_init_speed: fl[4],
                mean_degree: fl[5],
                min_distance: fl[6],
                normalize_gso: match r.u8()? {
                    0 => false,
                    1 => true,
                    v => return Err(Error::Decode(format!("bad flag {v}"))),
                },
            };
            config.validate()?;
            let stored_power = r.f64()?;
            let n = config.n;
            r.expect_at_least(config.trajectories, 4)?;
            let mut trajectories = Vec::with_capacity(config.trajectories);
            for _ in 0..config.trajectories {
                let len = r.u32()?;
                let per_step = n.checked_mul(32).ok_or_else(|| Error::Decode("length overflow".into()))?;
                r.expect_at_least(len, per_step)?;
                let mut states = Vec::with_capacity(len);
                for t in 0..len {
                    let positions = pairs(r.f64s(2 * n)?);
                    let velocities = pairs(r.f64s(2 * n)?);
                    let mut s = SwarmState::new(positions, velocities)?;
                    s.time = t;
                    states.push(s);
                }
                trajectories.push(FlockTrajectory::from_states(states, &config)?);
            }
            let d = FlockDataset::from_trajectories(config, trajectories)?;
            if d.reference_power.to_bits() != stored_power.to_bits() {
                return Err(Error::Decode("reference power does not match the stored states".into()));
            }
            StoredDataset::Flocking(d)
        }
        t => return Err(Error::Decode(format!("unknown task tag {t}"))),
    };
    r.finish()?;
    Ok(out)
}
