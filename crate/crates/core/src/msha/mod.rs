//! Multi-source hybrid-attention policy: CNN encoders for the uncertainty
//! and SINR windows, a recurrent encoder for the vehicle history, an
//! attention encoder for the passenger rows, map-aligned fusion, hybrid
//! local/global attention and the policy and value heads.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Observation, PASSENGER_FEATURES, UAM_FEATURES};
use crate::error::{Error, Result};
use crate::nn::{read_checkpoint, write_checkpoint, Conv2d, Graph, Linear, Lstm, MultiHeadAttention, NodeId, ParamStore, Tensor};

/// Which parts of the network are enabled, following the ablation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Model 1: one linear layer on the flattened raw inputs.
    Linear,
    /// Model 2: designed encoders, outputs flattened and concatenated.
    Encoders,
    /// Model 3: encoders plus multi-source fusion.
    Fused,
    /// Model 4: the full network with hybrid attention.
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Linear, Variant::Encoders, Variant::Fused, Variant::Full];

    /// Ablation flags `(LE, DE, MSFea, HAF)`.
    pub fn flags(self) -> [bool; 4] {
        match self {
            Variant::Linear => [true, false, false, false],
            Variant::Encoders => [false, true, false, false],
            Variant::Fused => [false, true, true, false],
            Variant::Full => [false, true, true, true],
        }
    }

    pub fn model_number(self) -> usize {
        Variant::ALL.iter().position(|&v| v == self).unwrap() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MshaConfig {
    pub variant: Variant,
    /// Map-feature channels (`C1`).
    pub c1: usize,
    /// Entity embedding width (`C2`).
    pub c2: usize,
    /// Hybrid-attention heads (`H_head`), half local and half global.
    pub heads: usize,
    /// Windows per side in the local branch.
    pub n_win: usize,
    /// Per-head attention width; `None` means `C3 / H_head`.
    pub d_k: Option<usize>,
    /// Trunk output width (`C`).
    pub output: usize,
    pub entity_heads: usize,
    pub kernel: usize,
    pub window_side: usize,
    /// Vehicle history rows (`N1`).
    pub history_len: usize,
    /// Passenger rows (`N2`).
    pub passengers: usize,
    /// Action count (`k + 1`).
    pub actions: usize,
    pub head_hidden: usize,
    /// Feed pickup and drop-off coordinates relative to the current vehicle
    /// position instead of absolute.
    pub relative_positions: bool,
    /// Train the value head on a gradient-free copy of the trunk feature, so
    /// that only the policy objective shapes the shared trunk.
    pub detach_value: bool,
}

impl Default for MshaConfig {
    fn default() -> Self {
        MshaConfig {
            variant: Variant::Full,
            c1: 8,
            c2: 16,
            heads: 4,
            n_win: 2,
            d_k: None,
            output: 64,
            entity_heads: 2,
            kernel: 3,
            window_side: 10,
            history_len: 8,
            passengers: 3,
            actions: 16,
            head_hidden: 64,
            relative_positions: false,
            detach_value: false,
        }
    }
}

impl MshaConfig {
    pub fn c3(&self) -> usize {
        self.c1 + self.c2
    }

    pub fn head_width(&self) -> usize {
        self.c3() / self.heads.max(1)
    }

    pub fn d_k(&self) -> usize {
        self.d_k.unwrap_or_else(|| self.head_width())
    }

    pub fn tokens(&self) -> usize {
        self.window_side * self.window_side
    }

    pub fn entities(&self) -> usize {
        self.history_len + self.passengers
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.heads == 0 || !self.heads.is_multiple_of(2) {
            return bad(format!("head count {} must be even and positive", self.heads));
        }
        if !self.c3().is_multiple_of(self.heads) {
            return bad(format!("C3 = {} not divisible by {} heads", self.c3(), self.heads));
        }
        if self.n_win == 0 || !self.window_side.is_multiple_of(self.n_win) {
            return bad(format!("{} windows per side do not divide side {}", self.n_win, self.window_side));
        }
        if self.entity_heads == 0 || !self.c2.is_multiple_of(self.entity_heads) {
            return bad(format!("C2 = {} not divisible by {} entity heads", self.c2, self.entity_heads));
        }
        if self.kernel.is_multiple_of(2) {
            return bad(format!("kernel size {} must be odd", self.kernel));
        }
        let positive = [
            ("c1", self.c1),
            ("c2", self.c2),
            ("d_k", self.d_k()),
            ("output", self.output),
            ("window_side", self.window_side),
            ("history_len", self.history_len),
            ("actions", self.actions),
            ("head_hidden", self.head_hidden),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be positive"));
        }
        Ok(())
    }

    /// Number of scalar parameters of the network this config builds.
    pub fn param_count(&self) -> usize {
        let lin = Linear::param_count;
        let t = self.tokens();
        let encoders = 2 * Conv2d::param_count(self.kernel, 1, self.c1)
            + Lstm::param_count(UAM_FEATURES, self.c2)
            + MultiHeadAttention::param_count(PASSENGER_FEATURES, self.c2);
        let trunk = match self.variant {
            Variant::Linear => lin(2 * t + self.history_len * UAM_FEATURES + self.passengers * PASSENGER_FEATURES, self.output),
            Variant::Encoders => encoders + lin(2 * t * self.c1 + self.entities() * self.c2, self.output),
            Variant::Fused => encoders + lin(t * self.c3(), self.output),
            Variant::Full => {
                encoders
                    + lin(self.c3(), self.c3())
                    + 3 * self.heads * lin(self.head_width(), self.d_k())
                    + lin(t * self.heads * self.d_k(), self.output)
            }
        };
        let h = self.head_hidden;
        let head = |out: usize| lin(self.output, h) + lin(h, h) + lin(h, out);
        trunk + head(self.actions) + head(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Encoders {
    conv_e: Conv2d,
    conv_r: Conv2d,
    lstm: Lstm,
    mha: MultiHeadAttention,
}

#[derive(Debug, Clone, PartialEq)]
struct HeadProj {
    query: Linear,
    key: Linear,
    value: Linear,
}

#[derive(Debug, Clone, PartialEq)]
struct Hybrid {
    mix: Linear,
    heads: Vec<HeadProj>,
}

#[derive(Debug, Clone, PartialEq)]
struct Layers {
    encoders: Option<Encoders>,
    hybrid: Option<Hybrid>,
    readout: Linear,
    policy: [Linear; 3],
    value: [Linear; 3],
}

/// Outputs of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct PolicyOutput {
    /// `1 x actions` log-probabilities.
    pub log_probs: NodeId,
    /// `1 x 1` state value.
    pub value: NodeId,
}

/// Network inputs as tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput {
    /// `side² x 1` uncertainty window.
    pub uncertainty: Tensor,
    /// `side² x 1` SINR window, `(dB - threshold) / 10` clamped to `±6`.
    pub sinr: Tensor,
    pub uam: Tensor,
    pub passengers: Tensor,
    pub mask: Vec<bool>,
}

impl NetInput {
    pub fn from_observation(obs: &Observation) -> Result<Self> {
        let side = obs.window_side;
        let col = |v: Vec<f64>| Tensor::new(side * side, 1, v);
        Ok(NetInput {
            uncertainty: col(obs.uncertainty_window.clone())?,
            sinr: col(
                obs.sinr_window
                    .iter()
                    .map(|s| ((s - obs.sinr_threshold_db) / 10.0).clamp(-6.0, 6.0))
                    .collect(),
            )?,
            uam: Tensor::new(obs.uam_rows.len(), UAM_FEATURES, obs.uam_rows.concat())?,
            passengers: Tensor::new(obs.passenger_rows.len(), PASSENGER_FEATURES, obs.passenger_rows.concat())?,
            mask: obs.passenger_mask.clone(),
        })
    }
}

/// Passenger rows with `S` and `D` shifted by the current position.
fn relative_passengers(x: &NetInput) -> Tensor {
    let last = x.uam.rows - 1;
    let (px, py) = (x.uam.at(last, 0), x.uam.at(last, 1));
    let mut p = x.passengers.clone();
    for (r, &known) in x.mask.iter().enumerate() {
        if known {
            let row = &mut p.data[r * PASSENGER_FEATURES..(r + 1) * PASSENGER_FEATURES];
            row[0] -= px;
            row[1] -= py;
            row[2] -= px;
            row[3] -= py;
        }
    }
    p
}

fn finite(g: &Graph, id: NodeId, layer: &str) -> Result<NodeId> {
    if g.value(id).is_finite() {
        Ok(id)
    } else {
        Err(Error::Numeric(layer.to_string()))
    }
}

/// Token order of the local branch: window by window, row-major inside each
/// window. Returns the permutation and its inverse.
pub fn window_partition(side: usize, n_win: usize) -> (Vec<usize>, Vec<usize>) {
    let s = side / n_win;
    let mut perm = Vec::with_capacity(side * side);
    for wr in 0..n_win {
        for wc in 0..n_win {
            for r in 0..s {
                for c in 0..s {
                    perm.push((wr * s + r) * side + wc * s + c);
                }
            }
        }
    }
    let mut inv = vec![0; perm.len()];
    for (k, &t) in perm.iter().enumerate() {
        inv[t] = k;
    }
    (perm, inv)
}

/// `softmax(q kᵀ / √d_k) v`.
pub fn attend(g: &mut Graph, q: NodeId, k: NodeId, v: NodeId) -> Result<NodeId> {
    let dk = g.value(q).cols as f64;
    let s = g.matmul_nt(q, k)?;
    let s = g.scale(s, 1.0 / dk.sqrt());
    let a = g.softmax(s);
    g.matmul(a, v)
}

/// Policy and value network with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MshaPolicy {
    pub config: MshaConfig,
    pub store: ParamStore,
    layers: Layers,
}

impl MshaPolicy {
    pub fn new(config: MshaConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new();
        let c = &config;
        let t = c.tokens();
        let encoders = (c.variant != Variant::Linear).then(|| -> Result<Encoders> {
            Ok(Encoders {
                conv_e: Conv2d::new(&mut store, "enc.uncertainty", c.kernel, 1, c.c1, rng),
                conv_r: Conv2d::new(&mut store, "enc.sinr", c.kernel, 1, c.c1, rng),
                lstm: Lstm::new(&mut store, "enc.uam", UAM_FEATURES, c.c2, rng),
                mha: MultiHeadAttention::new(&mut store, "enc.passengers", PASSENGER_FEATURES, c.c2, c.entity_heads, rng)?,
            })
        });
        let encoders = encoders.transpose()?;
        let hybrid = (c.variant == Variant::Full).then(|| Hybrid {
            mix: Linear::new(&mut store, "haf.mix", c.c3(), c.c3(), rng),
            heads: (0..c.heads)
                .map(|h| {
                    let kind = if h < c.heads / 2 { "local" } else { "global" };
                    let name = format!("haf.{kind}{h}");
                    HeadProj {
                        query: Linear::new(&mut store, &format!("{name}.query"), c.head_width(), c.d_k(), rng),
                        key: Linear::new(&mut store, &format!("{name}.key"), c.head_width(), c.d_k(), rng),
                        value: Linear::new(&mut store, &format!("{name}.value"), c.head_width(), c.d_k(), rng),
                    }
                })
                .collect(),
        });
        let readout_in = match c.variant {
            Variant::Linear => 2 * t + c.history_len * UAM_FEATURES + c.passengers * PASSENGER_FEATURES,
            Variant::Encoders => 2 * t * c.c1 + c.entities() * c.c2,
            Variant::Fused => t * c.c3(),
            Variant::Full => t * c.heads * c.d_k(),
        };
        let readout = Linear::new(&mut store, "trunk.readout", readout_in, c.output, rng);
        let h = c.head_hidden;
        let policy = [
            Linear::new(&mut store, "policy.0", c.output, h, rng),
            Linear::new(&mut store, "policy.1", h, h, rng),
            Linear::new(&mut store, "policy.2", h, c.actions, rng),
        ];
        let value = [
            Linear::new(&mut store, "value.0", c.output, h, rng),
            Linear::new(&mut store, "value.1", h, h, rng),
            Linear::new(&mut store, "value.2", h, 1, rng),
        ];
        Ok(MshaPolicy {
            config,
            store,
            layers: Layers {
                encoders,
                hybrid,
                readout,
                policy,
                value,
            },
        })
    }

    fn check_input(&self, x: &NetInput) -> Result<()> {
        let c = &self.config;
        let expect = |op, got: [usize; 2], want: [usize; 2]| {
            if got == want {
                Ok(())
            } else {
                Err(Error::shape(op, &got, &want))
            }
        };
        expect("uncertainty window", x.uncertainty.shape(), [c.tokens(), 1])?;
        expect("sinr window", x.sinr.shape(), [c.tokens(), 1])?;
        expect("uam rows", x.uam.shape(), [c.history_len, UAM_FEATURES])?;
        expect("passenger rows", x.passengers.shape(), [c.passengers, PASSENGER_FEATURES])?;
        expect("passenger mask", [x.mask.len(), 1], [c.passengers, 1])
    }

    /// Map encoders: `(v_E, v_R)`, each `side² x C1`.
    pub fn encode_maps(&self, g: &mut Graph, store: &ParamStore, e: NodeId, r: NodeId) -> Result<(NodeId, NodeId)> {
        let enc = self.encoders()?;
        let side = self.config.window_side;
        let ve = enc.conv_e.forward(g, store, e, side, side)?;
        let ve = g.relu(ve);
        let vr = enc.conv_r.forward(g, store, r, side, side)?;
        let vr = g.relu(vr);
        Ok((finite(g, ve, "uncertainty encoder")?, finite(g, vr, "sinr encoder")?))
    }

    /// Entity encoders: `e_UP`, `(N1 + N2) x C2`.
    pub fn encode_entities(&self, g: &mut Graph, store: &ParamStore, u: NodeId, p: NodeId, mask: &[bool]) -> Result<NodeId> {
        let enc = self.encoders()?;
        let (eu, _) = enc.lstm.forward(g, store, u)?;
        let ep = enc.mha.forward(g, store, p, mask)?;
        let eup = g.concat_rows(&[eu, ep])?;
        finite(g, eup, "entity encoder")
    }

    /// Multi-source fusion: every entity row broadcast over the map and
    /// channel-concatenated with `v_E` and with `v_R`, then averaged over the
    /// `2N` stacked items. The mean factors into the entity mean next to
    /// `(v_E + v_R) / 2`.
    pub fn fuse(&self, g: &mut Graph, eup: NodeId, ve: NodeId, vr: NodeId) -> Result<NodeId> {
        let t = self.config.tokens();
        let e = g.mean_rows(eup);
        let e = g.repeat_rows(e, t)?;
        let v = g.add(ve, vr)?;
        let v = g.scale(v, 0.5);
        g.concat_cols(&[e, v])
    }

    /// Hybrid attention over the fused map: `tokens x (H_head · d_k)` before
    /// the readout.
    pub fn hybrid_attention(&self, g: &mut Graph, store: &ParamStore, fm: NodeId) -> Result<NodeId> {
        let c = &self.config;
        let hy = self
            .layers
            .hybrid
            .as_ref()
            .ok_or_else(|| Error::Config("variant has no hybrid attention".into()))?;
        let mixed = hy.mix.forward(g, store, fm)?;
        let dh = c.head_width();
        let (perm, inv) = window_partition(c.window_side, c.n_win);
        let per_window = c.tokens() / (c.n_win * c.n_win);
        let mut outs = Vec::with_capacity(c.heads);
        for (h, proj) in hy.heads.iter().enumerate() {
            let x = g.slice_cols(mixed, h * dh, dh)?;
            let q = proj.query.forward(g, store, x)?;
            let k = proj.key.forward(g, store, x)?;
            let v = proj.value.forward(g, store, x)?;
            let out = if h < c.heads / 2 {
                let mut parts = Vec::with_capacity(c.n_win * c.n_win);
                for idx in perm.chunks(per_window) {
                    let qw = g.gather_rows(q, idx)?;
                    let kw = g.gather_rows(k, idx)?;
                    let vw = g.gather_rows(v, idx)?;
                    parts.push(attend(g, qw, kw, vw)?);
                }
                let cat = g.concat_rows(&parts)?;
                g.gather_rows(cat, &inv)?
            } else {
                attend(g, q, k, v)?
            };
            outs.push(out);
        }
        let cat = g.concat_cols(&outs)?;
        finite(g, cat, "hybrid attention")
    }

    fn encoders(&self) -> Result<&Encoders> {
        self.layers
            .encoders
            .as_ref()
            .ok_or_else(|| Error::Config("variant has no encoders".into()))
    }

    fn flatten(g: &mut Graph, x: NodeId) -> Result<NodeId> {
        let n = g.value(x).len();
        g.reshape(x, 1, n)
    }

    /// Trunk feature `f_output`, `1 x C`, after the relu.
    pub fn trunk(&self, g: &mut Graph, store: &ParamStore, x: &NetInput) -> Result<NodeId> {
        self.check_input(x)?;
        let e = g.input(x.uncertainty.clone());
        let r = g.input(x.sinr.clone());
        let u = g.input(x.uam.clone());
        let p = if self.config.relative_positions {
            g.input(relative_passengers(x))
        } else {
            g.input(x.passengers.clone())
        };
        let features = match self.config.variant {
            Variant::Linear => {
                let parts = [e, r, u, p].map(|n| Self::flatten(g, n));
                let parts: Vec<NodeId> = parts.into_iter().collect::<Result<_>>()?;
                g.concat_cols(&parts)?
            }
            Variant::Encoders => {
                let (ve, vr) = self.encode_maps(g, store, e, r)?;
                let eup = self.encode_entities(g, store, u, p, &x.mask)?;
                let parts = [ve, vr, eup].map(|n| Self::flatten(g, n));
                let parts: Vec<NodeId> = parts.into_iter().collect::<Result<_>>()?;
                g.concat_cols(&parts)?
            }
            Variant::Fused | Variant::Full => {
                let (ve, vr) = self.encode_maps(g, store, e, r)?;
                let eup = self.encode_entities(g, store, u, p, &x.mask)?;
                let fm = self.fuse(g, eup, ve, vr)?;
                let fm = if self.config.variant == Variant::Full {
                    self.hybrid_attention(g, store, fm)?
                } else {
                    fm
                };
                Self::flatten(g, fm)?
            }
        };
        let out = self.layers.readout.forward(g, store, features)?;
        let out = g.relu(out);
        finite(g, out, "trunk readout")
    }

    fn mlp(g: &mut Graph, store: &ParamStore, layers: &[Linear; 3], x: NodeId) -> Result<NodeId> {
        let h = layers[0].forward(g, store, x)?;
        let h = g.relu(h);
        let h = layers[1].forward(g, store, h)?;
        let h = g.relu(h);
        layers[2].forward(g, store, h)
    }

    /// Forward pass with an explicit parameter set (used for perturbation
    /// checks); [`MshaPolicy::forward`] uses the policy's own parameters.
    pub fn forward_with(&self, g: &mut Graph, store: &ParamStore, x: &NetInput) -> Result<PolicyOutput> {
        let f = self.trunk(g, store, x)?;
        let logits = Self::mlp(g, store, &self.layers.policy, f)?;
        let logits = finite(g, logits, "policy head")?;
        let log_probs = g.log_softmax(logits);
        let vf = if self.config.detach_value {
            g.input(g.value(f).clone())
        } else {
            f
        };
        let value = Self::mlp(g, store, &self.layers.value, vf)?;
        let value = finite(g, value, "value head")?;
        Ok(PolicyOutput { log_probs, value })
    }

    pub fn forward(&self, g: &mut Graph, x: &NetInput) -> Result<PolicyOutput> {
        self.forward_with(g, &self.store, x)
    }

    /// Action probabilities and value for one observation.
    pub fn evaluate(&self, obs: &Observation) -> Result<(Vec<f64>, f64)> {
        let x = NetInput::from_observation(obs)?;
        let mut g = Graph::new();
        let out = self.forward(&mut g, &x)?;
        let probs = g.value(out.log_probs).data.iter().map(|l| l.exp()).collect();
        Ok((probs, g.value(out.value).item()))
    }

    pub fn param_count(&self) -> usize {
        self.store.scalar_count()
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn write<W: std::io::Write>(&self, w: W) -> Result<()> {
        let cfg = serde_json::to_string(&self.config).map_err(|e| Error::Format(e.to_string()))?;
        write_checkpoint(w, &cfg, &self.store)
    }

    pub fn read<R: std::io::Read>(r: R) -> Result<Self> {
        let ck = read_checkpoint(r)?;
        let config: MshaConfig = serde_json::from_str(&ck.config_json).map_err(|e| Error::Format(e.to_string()))?;
        // Rebuild the layer layout, then adopt the stored values.
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let mut policy = MshaPolicy::new(config, &mut rng)?;
        if policy.store.names() != ck.params.names()
            || policy.store.tensors().iter().zip(ck.params.tensors()).any(|(a, b)| a.shape() != b.shape())
        {
            return Err(Error::Format("checkpoint parameters do not match its config".into()));
        }
        policy.store = ck.params;
        Ok(policy)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }
}
