//! Per-node execution of a trained network in synchronized broadcast rounds.
//!
//! Each node holds a copy of the coefficients and only its own signal. In
//! round `(layer, hop)` every node broadcasts its latest shifted values; a
//! receiver gets each neighbor's payload scaled by that link's gain and adds
//! its own receiver noise. After the layer's last round every node mixes its
//! local stack with the filter coefficients.

use std::io::Write;

use rand::seq::SliceRandom;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::graphs::{GraphShiftOperator, GraphSignal};
use crate::model::{AirGnnParameters, Architecture};
use crate::rng::substream;

/// One broadcast round per hop of every layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundSchedule {
    /// `(layer, hop)` with hops numbered from 1.
    pub rounds: Vec<(usize, usize)>,
    /// Values each node sends per round.
    pub widths: Vec<usize>,
}

impl RoundSchedule {
    pub fn new(arch: &Architecture) -> Self {
        let mut rounds = Vec::new();
        let mut widths = Vec::new();
        for (l, sh) in arch.layers.iter().enumerate() {
            for k in 1..=sh.order {
                rounds.push((l, k));
                widths.push(sh.f_in);
            }
        }
        Self { rounds, widths }
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }
}

/// Scalar transmissions over a schedule: every directed link carries one
/// value per feature per round.
pub fn count_transmissions(schedule: &RoundSchedule, s: &GraphShiftOperator) -> usize {
    let links: usize = s.out_degrees().iter().sum();
    schedule.widths.iter().map(|w| w * links).sum()
}

/// Where a value a node computed with came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadSource {
    Own,
    /// A delivery from `src` received this round.
    Inbox { src: usize },
    /// Direct access to another node's memory.
    Foreign { owner: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadEvent {
    pub round: usize,
    pub node: usize,
    pub source: ReadSource,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transmission {
    pub round: usize,
    pub src: usize,
    pub dst: usize,
    pub feature: usize,
    pub value_sent: f64,
    pub gain: f64,
    /// Receiver noise `dst` adds for this feature in this round.
    pub noise_applied: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub reads: Vec<ReadEvent>,
    pub transmissions: Vec<Transmission>,
}

impl RunLog {
    /// CSV with header `round,src,dst,feature,value_sent,gain,noise_applied`.
    pub fn write_transmit_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "round,src,dst,feature,value_sent,gain,noise_applied")?;
        for t in &self.transmissions {
            writeln!(
                w,
                "{},{},{},{},{:e},{:e},{:e}",
                t.round, t.src, t.dst, t.feature, t.value_sent, t.gain, t.noise_applied
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Record reads and transmissions.
    pub audit: bool,
    /// Shuffle node order within every round with this seed.
    pub shuffle_seed: Option<u64>,
    /// Test hook: `(reader, owner)` makes `reader` peek at `owner`'s state
    /// in the first round.
    pub inject_nonlocal_read: Option<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Delivery {
    src: usize,
    feature: usize,
    value: f64,
}

/// State held by one node.
#[derive(Debug, Clone)]
pub struct NodeRuntime {
    pub id: usize,
    params: AirGnnParameters,
    /// Own values of the current layer's shifted stack, each `F_in` long.
    stack: Vec<Vec<f64>>,
    inbox: Vec<Delivery>,
    output: Vec<f64>,
}

impl NodeRuntime {
    fn new(id: usize, params: AirGnnParameters, input: &[f64]) -> Self {
        Self { id, params, stack: Vec::new(), inbox: Vec::new(), output: input.to_vec() }
    }
}

/// Network output computed node by node.
pub fn run_decentralized(
    s: &GraphShiftOperator,
    x: &GraphSignal,
    arch: &Architecture,
    params: &AirGnnParameters,
    realization: &ChannelRealization,
) -> Result<GraphSignal> {
    run_decentralized_with(s, x, arch, params, realization, RunOptions::default()).map(|(y, _)| y)
}

pub fn run_decentralized_with(
    s: &GraphShiftOperator,
    x: &GraphSignal,
    arch: &Architecture,
    params: &AirGnnParameters,
    realization: &ChannelRealization,
    opts: RunOptions,
) -> Result<(GraphSignal, RunLog)> {
    arch.validate()?;
    if params.shapes() != arch.layers.as_slice() {
        return Err(Error::DimensionMismatch("parameters do not match the architecture".into()));
    }
    if x.n() != s.n() || x.features() != arch.input_width() {
        return Err(Error::DimensionMismatch(format!(
            "input is {}x{}, expected {}x{}",
            x.n(),
            x.features(),
            s.n(),
            arch.input_width()
        )));
    }
    realization.check_shape(s, &arch.layers)?;
    let n = s.n();
    let cols = s.cols();
    // receivers[j]: (i, p) for every link i <- j, p the nonzero index.
    let mut receivers: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for i in 0..n {
        for p in s.row_range(i) {
            if cols[p] != i {
                receivers[cols[p]].push((i, p));
            }
        }
    }
    let mut nodes: Vec<NodeRuntime> = (0..n).map(|i| NodeRuntime::new(i, params.clone(), x.node(i))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut shuffler = opts.shuffle_seed.map(|seed| substream(seed, "schedule", &[]));
    let mut log = RunLog::default();
    let mut round = 0usize;

    for (l, sh) in arch.layers.iter().enumerate() {
        for node in nodes.iter_mut() {
            node.stack = vec![std::mem::take(&mut node.output)];
        }
        for hop in &realization.layers[l].hops {
            if let Some(rng) = shuffler.as_mut() {
                order.shuffle(rng);
            }
            // Broadcast phase.
            for &j in &order {
                let payload = nodes[j].stack.last().expect("stack is never empty").clone();
                if opts.audit {
                    log.reads.push(ReadEvent { round, node: j, source: ReadSource::Own });
                }
                for &(i, p) in &receivers[j] {
                    for (g, &v) in payload.iter().enumerate() {
                        let gain = hop.gains_for(g)[p];
                        nodes[i].inbox.push(Delivery { src: j, feature: g, value: gain * v });
                        if opts.audit {
                            log.transmissions.push(Transmission {
                                round,
                                src: j,
                                dst: i,
                                feature: g,
                                value_sent: v,
                                gain,
                                noise_applied: hop.noise.get(i, g),
                            });
                        }
                    }
                }
            }
            if round == 0 {
                if let Some((reader, owner)) = opts.inject_nonlocal_read {
                    let _peek = nodes[owner].stack.last().map(|v| v.first().copied());
                    log.reads.push(ReadEvent { round, node: reader, source: ReadSource::Foreign { owner } });
                }
            }
            // Receive phase.
            for &i in &order {
                let node = &mut nodes[i];
                node.inbox.sort_by_key(|d| (d.src, d.feature));
                let own = node.stack.last().expect("stack is never empty");
                let mut next: Vec<f64> = (0..sh.f_in).map(|g| hop.noise.get(i, g)).collect();
                let mut cursor = 0;
                for p in s.row_range(i) {
                    let j = cols[p];
                    if j == i {
                        for (g, o) in next.iter_mut().enumerate() {
                            *o += hop.gains_for(g)[p] * own[g];
                        }
                        if opts.audit {
                            log.reads.push(ReadEvent { round, node: i, source: ReadSource::Own });
                        }
                    } else {
                        for o in next.iter_mut() {
                            let d = node.inbox[cursor];
                            debug_assert_eq!(d.src, j);
                            *o += d.value;
                            cursor += 1;
                        }
                        if opts.audit {
                            log.reads.push(ReadEvent { round, node: i, source: ReadSource::Inbox { src: j } });
                        }
                    }
                }
                node.inbox.clear();
                node.stack.push(next);
            }
            round += 1;
        }
        // Local filtering and activation.
        let act = arch.activations[l];
        for &i in &order {
            let node = &mut nodes[i];
            let bank = node.params.bank(l);
            let mut u = vec![0.0; sh.f_out];
            for (k, z) in node.stack.iter().enumerate() {
                for (g, &zv) in z.iter().enumerate() {
                    for (f, uf) in u.iter_mut().enumerate() {
                        *uf += bank.coeff(g, f, k) * zv;
                    }
                }
            }
            node.output = u.into_iter().map(|v| act.apply(v)).collect();
            if opts.audit {
                log.reads.push(ReadEvent { round, node: i, source: ReadSource::Own });
            }
        }
    }
    let width = arch.output_width();
    let data = nodes.into_iter().flat_map(|nd| nd.output).collect();
    Ok((GraphSignal::from_rows(n, width, data)?, log))
}

/// True iff every value a node used was its own or arrived over one of its
/// incoming links in the same round.
pub fn locality_audit(log: &RunLog, s: &GraphShiftOperator) -> bool {
    let mut delivered = std::collections::HashSet::new();
    for t in &log.transmissions {
        if !s.contains(t.dst, t.src) || t.dst == t.src {
            return false;
        }
        delivered.insert((t.round, t.src, t.dst));
    }
    log.reads.iter().all(|r| match r.source {
        ReadSource::Own => true,
        ReadSource::Inbox { src } => delivered.contains(&(r.round, src, r.node)),
        ReadSource::Foreign { owner } => owner == r.node,
    })
}

/// Transmissions in a log, for cross-checking [`count_transmissions`].
pub fn logged_transmissions(log: &RunLog) -> usize {
    log.transmissions.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_realization, ChannelModel};
    use crate::model::{forward, init_parameters, InitScheme, LayerShape, Nonlinearity};

    fn path3() -> GraphShiftOperator {
        GraphShiftOperator::from_undirected_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn path_transmission_count() {
        let arch = Architecture::new(vec![LayerShape::new(1, 1, 1)], vec![Nonlinearity::Identity]).unwrap();
        let sched = RoundSchedule::new(&arch);
        assert_eq!(count_transmissions(&sched, &path3()), 4);
        let arch2 = Architecture::new(vec![LayerShape::new(2, 1, 1)], vec![Nonlinearity::Identity]).unwrap();
        assert_eq!(count_transmissions(&RoundSchedule::new(&arch2), &path3()), 8);
    }

    #[test]
    fn order_zero_needs_no_rounds() {
        let s = path3();
        let arch = Architecture::new(vec![LayerShape::new(1, 2, 0)], vec![Nonlinearity::Relu]).unwrap();
        assert!(RoundSchedule::new(&arch).is_empty());
        let params = AirGnnParameters::from_flat(&arch.layers, vec![1.0, -1.0]).unwrap();
        let x = GraphSignal::from_column(vec![1.0, -2.0, 3.0]).unwrap();
        let real = ChannelRealization::ideal(&s, &arch.layers);
        let opts = RunOptions { audit: true, ..Default::default() };
        let (y, log) = run_decentralized_with(&s, &x, &arch, &params, &real, opts).unwrap();
        assert!(log.transmissions.is_empty());
        assert_eq!(y.as_slice(), &[1.0, 0.0, 0.0, 2.0, 3.0, 0.0]);
    }

    #[test]
    fn matches_centralized_and_audits_clean() {
        let s = GraphShiftOperator::from_undirected_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)])
            .unwrap()
            .normalize_by_spectral_radius()
            .unwrap();
        let arch = Architecture::chain(&[2, 3, 2], &[3, 2], &[Nonlinearity::Tanh, Nonlinearity::Relu]).unwrap();
        let params = init_parameters(&arch.layers, InitScheme::UniformFanin, &mut substream(1, "p", &[]));
        let x = GraphSignal::from_rows(5, 2, (0..10).map(|v| v as f64 * 0.1 - 0.4).collect()).unwrap();
        let ch = ChannelModel::rayleigh(1.0, 10.0, 1.0).unwrap();
        let real = sample_realization(&s, &arch.layers, &ch, 3, "c", &[]);
        let central = forward(&s, &x, &arch, &params, &real).unwrap().output;
        for shuffle in [None, Some(7)] {
            let opts = RunOptions { audit: true, shuffle_seed: shuffle, ..Default::default() };
            let (y, log) = run_decentralized_with(&s, &x, &arch, &params, &real, opts).unwrap();
            assert!(y.max_abs_diff(&central) <= 1e-12);
            assert!(locality_audit(&log, &s));
            assert_eq!(logged_transmissions(&log), count_transmissions(&RoundSchedule::new(&arch), &s));
        }
        let opts = RunOptions { audit: true, inject_nonlocal_read: Some((0, 2)), ..Default::default() };
        let (_, log) = run_decentralized_with(&s, &x, &arch, &params, &real, opts).unwrap();
        assert!(!locality_audit(&log, &s));
    }

    #[test]
    fn transmit_csv_has_one_row_per_transmission() {
        let s = path3();
        let arch = Architecture::new(vec![LayerShape::new(1, 1, 2)], vec![Nonlinearity::Identity]).unwrap();
        let params = AirGnnParameters::from_flat(&arch.layers, vec![0.5, 0.25, 0.125]).unwrap();
        let x = GraphSignal::from_column(vec![1.0, 2.0, 3.0]).unwrap();
        let real = ChannelRealization::ideal(&s, &arch.layers);
        let opts = RunOptions { audit: true, ..Default::default() };
        let (_, log) = run_decentralized_with(&s, &x, &arch, &params, &real, opts).unwrap();
        let mut buf = Vec::new();
        log.write_transmit_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 8);
        assert!(text.starts_with("round,src,dst,feature,value_sent,gain,noise_applied\n"));
    }

    #[test]
    fn mismatched_realization_is_rejected() {
        let s = path3();
        let arch = Architecture::new(vec![LayerShape::new(1, 1, 2)], vec![Nonlinearity::Identity]).unwrap();
        let other = Architecture::new(vec![LayerShape::new(1, 1, 1)], vec![Nonlinearity::Identity]).unwrap();
        let params = AirGnnParameters::zeros(&arch.layers);
        let x = GraphSignal::from_column(vec![1.0, 2.0, 3.0]).unwrap();
        let real = ChannelRealization::ideal(&s, &other.layers);
        assert!(run_decentralized(&s, &x, &arch, &params, &real).is_err());
    }
}
