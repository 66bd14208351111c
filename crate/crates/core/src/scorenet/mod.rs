//! Compact conditional score network `s(x, y, t)`.
//!
//! A convolutional encoder/decoder over `depth` resolutions (channels
//! `c, 2c, 4c, ...`), with skip connections, SiLU activations, and a
//! per-block additive projection of a sinusoidal time embedding. Condition
//! channels are concatenated with the (rescaled) state at the input.
//!
//! The network predicts the noise
//! `eps(x, y, t) = F(c_in x, y, t) + a(t) (x - y_p) / sigma(t)`
//! where `F` is the convolutional trunk, `y_p` the normalized coarse
//! precipitation channel (zero when absent), `a(t)` a scalar head on the
//! time embedding and `c_in = 1 / sqrt(sigma^2 + data_scale^2)`. The
//! score is `-eps / sigma(t)`. Both `F`'s final layer and `a` start at
//! zero, so a fresh model outputs the zero field.
//!
//! Gradients are hand-derived reverse mode; [`ScoreModel::forward_recorded`]
//! fills a [`Tape`] which [`ScoreModel::backward`] consumes.

mod checkpoint;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ConditionTensor, GridField, Space, DEFAULT_PRECIP_SCALE};
use crate::rng::{self, streams};
use crate::sde::{NoiseSchedule, ScoreFn};
use tensor::{
    avg_pool2, avg_pool2_backward, concat, conv3x3, conv3x3_backward, silu, silu_grad, split,
    upsample2, upsample2_backward, Tensor4,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    /// Channels at full resolution; doubled at every coarser level.
    pub hidden_channels: usize,
    /// Number of resolutions.
    pub depth: usize,
    /// Width of the sinusoidal time embedding and of the time MLP.
    pub time_embed_dim: usize,
    pub condition_channels: usize,
    /// Typical spread of normalized data; sets the input rescaling.
    pub data_scale: f64,
    /// Used to normalize a physical coarse-precipitation channel.
    pub precip_scale: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden_channels: 16,
            depth: 3,
            time_embed_dim: 32,
            condition_channels: 3,
            data_scale: 0.5,
            precip_scale: DEFAULT_PRECIP_SCALE,
        }
    }
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_channels == 0 || self.depth == 0 {
            return Err(Error::Config("hidden_channels and depth must be positive".into()));
        }
        if self.time_embed_dim == 0 || !self.time_embed_dim.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "time_embed_dim must be even and positive, got {}",
                self.time_embed_dim
            )));
        }
        if !(self.data_scale > 0.0 && self.precip_scale > 0.0) {
            return Err(Error::Config("data_scale and precip_scale must be positive".into()));
        }
        Ok(())
    }

    fn channels(&self, level: usize) -> usize {
        self.hidden_channels << level
    }

    /// Field sides must be divisible by this.
    pub fn size_multiple(&self) -> usize {
        1 << (self.depth - 1)
    }
}

/// Sinusoidal features of `t` on a geometric frequency ladder from 1 to 100.
pub fn time_features(t: f64, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = Vec::with_capacity(dim);
    for k in 0..half {
        let f = if half > 1 {
            100f64.powf(k as f64 / (half - 1) as f64)
        } else {
            1.0
        };
        out.push((f * t).sin());
    }
    for k in 0..half {
        let f = if half > 1 {
            100f64.powf(k as f64 / (half - 1) as f64)
        } else {
            1.0
        };
        out.push((f * t).cos());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dense {
    nin: usize,
    nout: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Conv {
    cin: usize,
    cout: usize,
    w: usize,
    b: usize,
    /// Time-embedding projection added per output channel.
    temb: Option<Dense>,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    time_mlp: Dense,
    a_head: Dense,
    conv_in: Conv,
    enc: Vec<Conv>,
    down: Vec<Conv>,
    dec: Vec<Conv>,
    conv_out: Conv,
    total: usize,
}

struct LayoutBuilder {
    next: usize,
}

impl LayoutBuilder {
    fn dense(&mut self, nin: usize, nout: usize) -> Dense {
        let w = self.next;
        let b = w + nin * nout;
        self.next = b + nout;
        Dense { nin, nout, w, b }
    }

    fn conv(&mut self, cin: usize, cout: usize, temb: Option<usize>) -> Conv {
        let w = self.next;
        let b = w + cout * cin * 9;
        self.next = b + cout;
        let temb = temb.map(|e| self.dense(e, cout));
        Conv { cin, cout, w, b, temb }
    }
}

impl Layout {
    fn new(arch: &Architecture) -> Self {
        let e = arch.time_embed_dim;
        let mut lb = LayoutBuilder { next: 0 };
        let time_mlp = lb.dense(e, e);
        let a_head = lb.dense(e, 1);
        let conv_in = lb.conv(1 + arch.condition_channels, arch.channels(0), Some(e));
        let mut enc = Vec::new();
        let mut down = Vec::new();
        for l in 0..arch.depth {
            enc.push(lb.conv(arch.channels(l), arch.channels(l), Some(e)));
            if l + 1 < arch.depth {
                down.push(lb.conv(arch.channels(l), arch.channels(l + 1), Some(e)));
            }
        }
        let mut dec = vec![None; arch.depth.saturating_sub(1)];
        for l in (0..arch.depth.saturating_sub(1)).rev() {
            let cin = arch.channels(l + 1) + arch.channels(l);
            dec[l] = Some(lb.conv(cin, arch.channels(l), Some(e)));
        }
        let conv_out = lb.conv(arch.channels(0), 1, None);
        Self {
            time_mlp,
            a_head,
            conv_in,
            enc,
            down,
            dec: dec.into_iter().map(|c| c.expect("decoder layer")).collect(),
            conv_out,
            total: lb.next,
        }
    }
}

/// A minibatch as the network sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
    /// `batch` normalized states, row-major.
    pub x: Vec<f64>,
    /// `batch × condition_channels` planes in network space.
    pub cond: Vec<f64>,
    /// Index of the coarse precipitation channel in `cond`.
    pub coarse_channel: Option<usize>,
    /// Per-member diffusion time.
    pub t: Vec<f64>,
}

impl NetInput {
    /// Replicates one condition across `members` states at a shared time.
    pub fn broadcast(
        x: &[f64],
        members: usize,
        y: &ConditionTensor,
        t: f64,
        precip_scale: f64,
    ) -> Result<Self> {
        let y = y.to_network_space(precip_scale)?;
        let (height, width) = y
            .dims()
            .ok_or_else(|| Error::Dimension("condition has no channels".into()))?;
        if x.len() != members * height * width {
            return Err(Error::Dimension(format!(
                "{members} states of {height}x{width} need {} values, got {}",
                members * height * width,
                x.len()
            )));
        }
        let one = y.flat_values();
        let mut cond = Vec::with_capacity(one.len() * members);
        for _ in 0..members {
            cond.extend_from_slice(&one);
        }
        Ok(Self {
            batch: members,
            height,
            width,
            x: x.to_vec(),
            cond,
            coarse_channel: y.coarse_precip_index(),
            t: vec![t; members],
        })
    }

    fn plane(&self) -> usize {
        self.height * self.width
    }
}

/// Intermediate state of one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    recorded: bool,
    batch: usize,
    features: Vec<f64>,
    temb_pre: Vec<f64>,
    temb: Vec<f64>,
    residual: Vec<f64>,
    /// Per conv block, in forward order: (input, pre-activation).
    blocks: Vec<(Tensor4, Tensor4)>,
    out_input: Option<Tensor4>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_recorded(&self) -> bool {
        self.recorded
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreModel {
    arch: Architecture,
    schedule: NoiseSchedule,
    layout: Layout,
    params: Vec<f64>,
}

impl ScoreModel {
    /// Fan-in scaled uniform initialization; the output conv and the skip
    /// head `a(t)` start at zero.
    pub fn new(arch: Architecture, schedule: NoiseSchedule, seed: u64) -> Result<Self> {
        arch.validate()?;
        schedule.validate()?;
        let layout = Layout::new(&arch);
        let mut params = vec![0.0; layout.total];
        let mut r = rng::stream(seed, streams::INIT);
        let mut fill = |off: usize, len: usize, fan_in: usize, params: &mut Vec<f64>| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[off..off + len] {
                *p = r.gen_range(-bound..bound);
            }
        };
        let d = layout.time_mlp;
        fill(d.w, d.nin * d.nout, d.nin, &mut params);
        let mut convs: Vec<Conv> = vec![layout.conv_in];
        convs.extend(layout.enc.iter().copied());
        convs.extend(layout.down.iter().copied());
        convs.extend(layout.dec.iter().copied());
        for c in convs {
            fill(c.w, c.cout * c.cin * 9, c.cin * 9, &mut params);
            if let Some(t) = c.temb {
                fill(t.w, t.nin * t.nout, t.nin, &mut params);
            }
        }
        Ok(Self {
            arch,
            schedule,
            layout,
            params,
        })
    }

    pub fn from_params(arch: Architecture, schedule: NoiseSchedule, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        schedule.validate()?;
        let layout = Layout::new(&arch);
        if params.len() != layout.total {
            return Err(Error::Format(format!(
                "architecture needs {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        Ok(Self {
            arch,
            schedule,
            layout,
            params,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check_input(&self, input: &NetInput) -> Result<()> {
        let plane = input.plane();
        let m = self.arch.size_multiple();
        if input.batch == 0 || plane == 0 {
            return Err(Error::Dimension("empty network input".into()));
        }
        if !input.height.is_multiple_of(m) || !input.width.is_multiple_of(m) {
            return Err(Error::Dimension(format!(
                "{}x{} field is not divisible by {m} (depth {})",
                input.height, input.width, self.arch.depth
            )));
        }
        if input.x.len() != input.batch * plane
            || input.cond.len() != input.batch * self.arch.condition_channels * plane
            || input.t.len() != input.batch
        {
            return Err(Error::Dimension(format!(
                "network input does not match batch {} of {}x{} with {} condition channels",
                input.batch, input.height, input.width, self.arch.condition_channels
            )));
        }
        if input.x.iter().chain(&input.cond).any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                step: 0,
                message: "non-finite network input".into(),
            });
        }
        if let Some(t) = input.t.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(Error::Domain(format!("t must lie in [0, 1], got {t}")));
        }
        Ok(())
    }

    /// Predicted noise for each member; see the module docs.
    pub fn predict_noise(&self, input: &NetInput) -> Result<Vec<f64>> {
        self.run(input, None)
    }

    /// As [`Self::predict_noise`], recording what [`Self::backward`] needs.
    pub fn forward_recorded(&self, input: &NetInput, tape: &mut Tape) -> Result<Vec<f64>> {
        self.run(input, Some(tape))
    }

    fn dense(&self, d: Dense, x: &[f64], out: &mut [f64]) {
        let w = &self.params[d.w..d.w + d.nin * d.nout];
        let b = &self.params[d.b..d.b + d.nout];
        for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(d.nin).zip(b)) {
            *o = bias + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        }
    }

    fn block(&self, c: Conv, x: &Tensor4, temb: &[f64], tape: Option<&mut Tape>) -> Tensor4 {
        let mut pre = conv3x3(
            x,
            &self.params[c.w..c.w + c.cout * c.cin * 9],
            &self.params[c.b..c.b + c.cout],
            c.cout,
        );
        if let Some(d) = c.temb {
            let e = self.arch.time_embed_dim;
            let hw = pre.plane();
            let mut proj = vec![0.0; d.nout];
            for bi in 0..pre.b {
                self.dense(d, &temb[bi * e..(bi + 1) * e], &mut proj);
                for (co, p) in proj.iter().enumerate() {
                    for v in &mut pre.data[(bi * c.cout + co) * hw..][..hw] {
                        *v += p;
                    }
                }
            }
        }
        let out = Tensor4 {
            data: pre.data.iter().map(|&v| silu(v)).collect(),
            ..pre
        };
        if let Some(tape) = tape {
            tape.blocks.push((x.clone(), pre));
        }
        out
    }

    fn run(&self, input: &NetInput, mut tape: Option<&mut Tape>) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let (b, h, w) = (input.batch, input.height, input.width);
        let hw = h * w;
        let e = self.arch.time_embed_dim;
        let k = self.arch.condition_channels;
        let sigmas: Vec<f64> = input.t.iter().map(|&t| self.schedule.sigma(t)).collect();

        let mut features = Vec::with_capacity(b * e);
        for &t in &input.t {
            features.extend(time_features(t, e));
        }
        let mut temb_pre = vec![0.0; b * e];
        for bi in 0..b {
            self.dense(self.layout.time_mlp, &features[bi * e..][..e], &mut temb_pre[bi * e..][..e]);
        }
        let temb: Vec<f64> = temb_pre.iter().map(|&v| silu(v)).collect();

        let mut x_in = Tensor4::zeros(b, 1 + k, h, w);
        for bi in 0..b {
            let c_in = 1.0 / (sigmas[bi].powi(2) + self.arch.data_scale.powi(2)).sqrt();
            let dst = &mut x_in.data[bi * (1 + k) * hw..][..(1 + k) * hw];
            for (d, s) in dst[..hw].iter_mut().zip(&input.x[bi * hw..][..hw]) {
                *d = c_in * s;
            }
            dst[hw..].copy_from_slice(&input.cond[bi * k * hw..][..k * hw]);
        }

        if let Some(t) = tape.as_deref_mut() {
            *t = Tape::default();
        }

        let depth = self.arch.depth;
        let mut hcur = self.block(self.layout.conv_in, &x_in, &temb, tape.as_deref_mut());
        let mut skips = Vec::with_capacity(depth);
        for l in 0..depth {
            hcur = self.block(self.layout.enc[l], &hcur, &temb, tape.as_deref_mut());
            if l + 1 < depth {
                skips.push(hcur.clone());
                let pooled = avg_pool2(&hcur);
                hcur = self.block(self.layout.down[l], &pooled, &temb, tape.as_deref_mut());
            }
        }
        for l in (0..depth - 1).rev() {
            let joined = concat(&upsample2(&hcur), &skips[l]);
            hcur = self.block(self.layout.dec[l], &joined, &temb, tape.as_deref_mut());
        }
        let co = self.layout.conv_out;
        let trunk = conv3x3(
            &hcur,
            &self.params[co.w..co.w + co.cin * 9],
            &self.params[co.b..co.b + 1],
            1,
        );

        let mut residual = vec![0.0; b * hw];
        let mut eps = trunk.data;
        let mut a = [0.0];
        for bi in 0..b {
            self.dense(self.layout.a_head, &temb[bi * e..][..e], &mut a);
            let xs = &input.x[bi * hw..][..hw];
            let r = &mut residual[bi * hw..][..hw];
            match input.coarse_channel {
                Some(c) => {
                    let yp = &input.cond[(bi * k + c) * hw..][..hw];
                    for ((ri, xi), yi) in r.iter_mut().zip(xs).zip(yp) {
                        *ri = (xi - yi) / sigmas[bi];
                    }
                }
                None => {
                    for (ri, xi) in r.iter_mut().zip(xs) {
                        *ri = xi / sigmas[bi];
                    }
                }
            }
            for (o, ri) in eps[bi * hw..][..hw].iter_mut().zip(r.iter()) {
                *o += a[0] * ri;
            }
        }

        if let Some(t) = tape {
            t.recorded = true;
            t.batch = b;
            t.features = features;
            t.temb_pre = temb_pre;
            t.temb = temb;
            t.residual = residual;
            t.out_input = Some(hcur);
        }
        Ok(eps)
    }

    fn dense_backward(&self, d: Dense, x: &[f64], dy: &[f64], grad: &mut [f64], dx: Option<&mut [f64]>) {
        for (o, g) in dy.iter().enumerate() {
            grad[d.b + o] += g;
            let row = &mut grad[d.w + o * d.nin..][..d.nin];
            for (r, xi) in row.iter_mut().zip(x) {
                *r += g * xi;
            }
        }
        if let Some(dx) = dx {
            let w = &self.params[d.w..d.w + d.nin * d.nout];
            for (g, row) in dy.iter().zip(w.chunks_exact(d.nin)) {
                for (dxi, wi) in dx.iter_mut().zip(row) {
                    *dxi += g * wi;
                }
            }
        }
    }

    /// Gradient of a block's output w.r.t. its input, accumulating
    /// parameter gradients and time-embedding gradients on the way.
    fn block_backward(
        &self,
        c: Conv,
        cache: &(Tensor4, Tensor4),
        dout: &Tensor4,
        temb: &[f64],
        dtemb: &mut [f64],
        grad: &mut [f64],
        want_input: bool,
    ) -> Option<Tensor4> {
        let (input, pre) = cache;
        let dpre = Tensor4 {
            data: dout
                .data
                .iter()
                .zip(&pre.data)
                .map(|(g, p)| g * silu_grad(*p))
                .collect(),
            ..pre.clone()
        };
        if let Some(d) = c.temb {
            let e = self.arch.time_embed_dim;
            let hw = dpre.plane();
            let mut dproj = vec![0.0; c.cout];
            for bi in 0..dpre.b {
                for (co, dp) in dproj.iter_mut().enumerate() {
                    *dp = dpre.data[(bi * c.cout + co) * hw..][..hw].iter().sum();
                }
                self.dense_backward(
                    d,
                    &temb[bi * e..][..e],
                    &dproj,
                    grad,
                    Some(&mut dtemb[bi * e..][..e]),
                );
            }
        }
        let (gw, rest) = grad[c.w..].split_at_mut(c.cout * c.cin * 9);
        conv3x3_backward(
            input,
            &self.params[c.w..c.w + c.cout * c.cin * 9],
            &dpre,
            gw,
            &mut rest[..c.cout],
            want_input,
        )
    }

    /// Parameter gradient of a scalar loss given its gradient with respect
    /// to the predicted noise of the recorded forward pass.
    pub fn backward(&self, tape: &Tape, d_eps: &[f64]) -> Result<Vec<f64>> {
        if !tape.recorded {
            return Err(Error::State("backward called without a recorded forward pass".into()));
        }
        let b = tape.batch;
        let out_input = tape.out_input.as_ref().expect("recorded tape has trunk input");
        let hw = out_input.plane();
        if d_eps.len() != b * hw {
            return Err(Error::Dimension(format!(
                "upstream gradient has {} entries, expected {}",
                d_eps.len(),
                b * hw
            )));
        }
        let e = self.arch.time_embed_dim;
        let mut grad = vec![0.0; self.params.len()];
        let mut dtemb = vec![0.0; b * e];

        // skip head
        let ah = self.layout.a_head;
        for bi in 0..b {
            let da: f64 = d_eps[bi * hw..][..hw]
                .iter()
                .zip(&tape.residual[bi * hw..][..hw])
                .map(|(g, r)| g * r)
                .sum();
            self.dense_backward(ah, &tape.temb[bi * e..][..e], &[da], &mut grad, Some(&mut dtemb[bi * e..][..e]));
        }

        let co = self.layout.conv_out;
        let dtrunk = Tensor4 {
            b,
            c: 1,
            h: out_input.h,
            w: out_input.w,
            data: d_eps.to_vec(),
        };
        let (gw, rest) = grad[co.w..].split_at_mut(co.cin * 9);
        let mut dh = conv3x3_backward(
            out_input,
            &self.params[co.w..co.w + co.cin * 9],
            &dtrunk,
            gw,
            &mut rest[..1],
            true,
        )
        .expect("input gradient requested");

        // tape.blocks order: conv_in, then per level enc[l] (+ down[l]), then dec[depth-2..=0]
        let depth = self.arch.depth;
        let enc_index = |l: usize| 1 + 2 * l;
        let down_index = |l: usize| 2 + 2 * l;
        let n_encoder = 1 + depth + (depth - 1);
        let dec_index = |l: usize| n_encoder + (depth - 2 - l);

        let mut dskips: Vec<Option<Tensor4>> = vec![None; depth.saturating_sub(1)];
        for l in 0..depth - 1 {
            let dcat = self
                .block_backward(self.layout.dec[l], &tape.blocks[dec_index(l)], &dh, &tape.temb, &mut dtemb, &mut grad, true)
                .expect("input gradient requested");
            let (dup, dskip) = split(&dcat, self.arch.channels(l + 1));
            dskips[l] = Some(dskip);
            dh = upsample2_backward(&dup);
        }
        for l in (0..depth).rev() {
            if l + 1 < depth {
                let dpooled = self
                    .block_backward(self.layout.down[l], &tape.blocks[down_index(l)], &dh, &tape.temb, &mut dtemb, &mut grad, true)
                    .expect("input gradient requested");
                dh = avg_pool2_backward(&dpooled);
                dh.add_assign(dskips[l].as_ref().expect("skip gradient"));
            }
            dh = self
                .block_backward(self.layout.enc[l], &tape.blocks[enc_index(l)], &dh, &tape.temb, &mut dtemb, &mut grad, true)
                .expect("input gradient requested");
        }
        self.block_backward(self.layout.conv_in, &tape.blocks[0], &dh, &tape.temb, &mut dtemb, &mut grad, false);

        let tm = self.layout.time_mlp;
        for bi in 0..b {
            let dpre: Vec<f64> = dtemb[bi * e..][..e]
                .iter()
                .zip(&tape.temb_pre[bi * e..][..e])
                .map(|(g, p)| g * silu_grad(*p))
                .collect();
            self.dense_backward(tm, &tape.features[bi * e..][..e], &dpre, &mut grad, None);
        }
        Ok(grad)
    }

    /// Score estimate `-eps / sigma(t)` for a single field.
    pub fn forward(&self, x: &GridField, y: &ConditionTensor, t: f64) -> Result<GridField> {
        if x.iter_nan() {
            return Err(Error::Numeric {
                step: 0,
                message: "NaN in model input".into(),
            });
        }
        if y.dims() != Some(x.dims()) {
            return Err(Error::Dimension("state and condition dimensions differ".into()));
        }
        let s = self.score(x.values(), 1, y, t)?;
        let (h, w) = x.dims();
        GridField::new(h, w, s, Space::Normalized, x.cell_km())
    }
}

impl GridField {
    fn iter_nan(&self) -> bool {
        self.values().iter().any(|v| v.is_nan())
    }
}

impl ScoreFn for ScoreModel {
    fn score(&self, x: &[f64], members: usize, y: &ConditionTensor, t: f64) -> Result<Vec<f64>> {
        if y.num_channels() != self.arch.condition_channels {
            return Err(Error::Dimension(format!(
                "model expects {} condition channels, got {}",
                self.arch.condition_channels,
                y.num_channels()
            )));
        }
        let input = NetInput::broadcast(x, members, y, t, self.arch.precip_scale)?;
        let sigma = self.schedule.sigma(t);
        let mut eps = self.predict_noise(&input)?;
        for v in &mut eps {
            *v = -*v / sigma;
        }
        Ok(eps)
    }
}
