use super::{Activation, DenseBlockParams, Linear, NetConfig, NetworkParams, UnitParams};
use crate::diffcore::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::geom::{bilateral_interpolate_var, knn, PointSet};

/// Tape variables of one unit, as returned by [`NetworkParams::bind`].
#[derive(Clone, Copy)]
pub struct UnitVars<'a> {
    pub vars: &'a [Option<Var>],
    pub layout: &'a UnitParams,
    pub config: &'a NetConfig,
}

impl<'a> UnitVars<'a> {
    /// Unit `u` of `params` over `vars`. Panics if the unit was not bound.
    pub fn new(params: &'a NetworkParams, vars: &'a [Option<Var>], u: usize) -> Self {
        let layout = params.unit(u);
        assert!(
            vars.get(layout.range.start).is_some_and(Option::is_some),
            "unit {u} is not bound on this tape"
        );
        UnitVars {
            vars,
            layout,
            config: params.config(),
        }
    }

    fn linear(&self, tape: &mut Tape, x: Var, lin: Linear) -> Result<Var> {
        let w = self.vars[lin.weight].expect("bound weight");
        let b = self.vars[lin.bias].expect("bound bias");
        let y = tape.matmul(x, w)?;
        tape.add_bias(y, b)
    }

    fn act(&self, tape: &mut Tape, x: Var) -> Var {
        match self.config.activation {
            Activation::Relu => tape.relu(x),
            Activation::LeakyRelu(s) => tape.leaky_relu(x, s),
        }
    }

    fn dense(&self, tape: &mut Tape, x: Var, lin: Linear) -> Result<Var> {
        let y = self.linear(tape, x, lin)?;
        Ok(self.act(tape, y))
    }
}

/// Previous-level points (in the current patch frame) and their features.
pub struct Context {
    pub points: PointSet,
    pub feats: Var,
}

/// One dense block: compress to `C′`, refine through the densely connected
/// layers, group each point's `k` nearest neighbors and max-pool over the
/// group. `coords` supplies the neighborhoods when feature-space grouping
/// is disabled.
///
/// The layers act row by row, so they run once per point and the grouping
/// gathers their outputs; this equals applying them to every gathered
/// neighbor row.
pub fn dense_block_forward(
    tape: &mut Tape,
    input: Var,
    coords: &PointSet,
    block: &DenseBlockParams,
    unit: UnitVars<'_>,
) -> Result<Var> {
    let cfg = unit.config;
    let x = unit.dense(tape, input, block.compress)?;
    let n = tape.tensor(x).rows();
    let k = cfg.feature_k;
    if n < k {
        return Err(Error::InsufficientPoints {
            needed: k,
            available: n,
        });
    }
    let groups = if cfg.use_feature_knn {
        let t = tape.tensor(x);
        knn(t, t, k)?
    } else {
        knn(coords, coords, k)?
    };
    let mut outs = vec![x];
    for &lin in &block.layers {
        let inp = if cfg.use_dense_links {
            tape.concat_columns(&outs)?
        } else {
            *outs.last().expect("nonempty")
        };
        let h = unit.dense(tape, inp, lin)?;
        outs.push(h);
    }
    let per_point = if cfg.use_dense_links {
        tape.concat_columns(&outs)?
    } else {
        *outs.last().expect("nonempty")
    };
    let grouped = tape.gather_rows(per_point, groups.as_flat(), &[n, k])?;
    tape.max_over_group(grouped)
}

/// Per-point features `[n, C]` of a normalized patch `[n, d]`.
pub fn extract_features(tape: &mut Tape, points: Var, unit: UnitVars<'_>) -> Result<Var> {
    let cfg = unit.config;
    let coords = PointSet::from_tensor(tape.tensor(points))?;
    if coords.dim() != cfg.dim {
        return Err(Error::shape(format!(
            "patch dimension {} but network expects {}",
            coords.dim(),
            cfg.dim
        )));
    }
    let init = unit.dense(tape, points, unit.layout.init)?;
    let mut outputs = vec![init];
    for block in &unit.layout.blocks {
        let input = if cfg.use_dense_links {
            let mut parts = vec![points];
            parts.extend(&outputs);
            tape.concat_columns(&parts)?
        } else {
            let last = *outputs.last().expect("nonempty");
            tape.concat_columns(&[points, last])?
        };
        let out = dense_block_forward(tape, input, &coords, block, unit)?;
        outputs.push(out);
    }
    tape.concat_columns(&outputs)
}

/// Doubles `n` points: features get a −1 code for the first copy and +1
/// for the second, the MLP maps each row to a residual, and the output is
/// `[points; points] + residual` with all first copies before all second.
pub fn expand_features(
    tape: &mut Tape,
    points: Var,
    feats: Var,
    unit: UnitVars<'_>,
) -> Result<Var> {
    let n = tape.tensor(feats).rows();
    if tape.tensor(points).rows() != n {
        return Err(Error::shape(format!(
            "{} points but {n} feature rows",
            tape.tensor(points).rows()
        )));
    }
    let code_a = tape.constant(Tensor::full([n, 1], -1.0));
    let code_b = tape.constant(Tensor::full([n, 1], 1.0));
    let fa = tape.concat_columns(&[feats, code_a])?;
    let fb = tape.concat_columns(&[feats, code_b])?;
    let mut x = tape.concat_rows(&[fa, fb])?;
    let (head, hidden) = unit
        .layout
        .expand
        .split_last()
        .expect("expansion has a head");
    for &lin in hidden {
        x = unit.dense(tape, x, lin)?;
    }
    let residual = unit.linear(tape, x, *head)?;
    let dup = tape.concat_rows(&[points, points])?;
    tape.add(dup, residual)
}

/// One 2× unit: features, optional skip from the previous level, expansion.
/// Returns the `2n` upsampled points and the post-skip features.
pub fn unit_forward(
    tape: &mut Tape,
    points: Var,
    context: Option<&Context>,
    unit: UnitVars<'_>,
) -> Result<(Var, Var)> {
    let mut feats = extract_features(tape, points, unit)?;
    if let Some(ctx) = context {
        let query = PointSet::from_tensor(tape.tensor(points))?;
        let k = unit.config.interp_k.min(ctx.points.len());
        let skip = bilateral_interpolate_var(tape, &query, feats, &ctx.points, ctx.feats, k)?;
        feats = tape.add(skip, feats)?;
    }
    let out = expand_features(tape, points, feats, unit)?;
    Ok((out, feats))
}
