use std::collections::BTreeMap;

use super::BlockMap;
use crate::error::{FsiError, Result};
use crate::fem::{newton_solve, FieldVec, LuCache, NewtonOptions, NewtonReport};
use crate::offline_monolithic::{Lifting, MonoField, MonolithicProblem, MonolithicSpaces, MonolithicState, SUPREMIZER, U0};
use crate::reduction::{build_monolithic_velocity_basis, pod, InnerProduct, NormKind, PodSelect, ReducedBasis, SnapshotSet};

/// Reduced dimensions of the monolithic ROM. `n_sup = 0` disables supremizer enrichment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonoSizes {
    pub n_u: usize,
    pub n_sup: usize,
    pub n_p: usize,
    pub n_df: usize,
    pub n_ds: usize,
    pub n_lu: usize,
    pub n_ld: usize,
}

impl MonoSizes {
    /// `n` modes for every field (and `n` supremizers), `n_lambda` per multiplier.
    pub fn uniform(n: usize, n_lambda: usize) -> Self {
        MonoSizes { n_u: n, n_sup: n, n_p: n, n_df: n, n_ds: n, n_lu: n_lambda, n_ld: n_lambda }
    }

    pub fn without_supremizers(self) -> Self {
        MonoSizes { n_sup: 0, ..self }
    }

    /// Everything available.
    pub fn all() -> Self {
        Self::uniform(usize::MAX, usize::MAX)
    }
}

impl Default for MonoSizes {
    fn default() -> Self {
        Self::uniform(21, 5)
    }
}

/// Norm of each monolithic snapshot field.
pub fn monolithic_norm(name: &str) -> Option<NormKind> {
    Some(match name {
        U0 | SUPREMIZER | "d_f" | "d_s" | "lift" => NormKind::H1Seminorm,
        "p" => NormKind::L2Volume,
        "lambda_u" | "lambda_d" => NormKind::L2Interface,
        _ => return None,
    })
}

/// Per-field bases of the monolithic ROM with their Gram operators.
#[derive(Debug, Clone)]
pub struct MonolithicBases {
    /// Velocity modes followed by (orthonormalized) supremizers.
    pub u: ReducedBasis,
    pub p: ReducedBasis,
    pub d_f: ReducedBasis,
    pub d_s: ReducedBasis,
    pub l_u: ReducedBasis,
    pub l_d: ReducedBasis,
    /// Gram operators in `MonoField` order.
    pub norms: Vec<InnerProduct>,
}

impl MonolithicBases {
    /// Full POD of every snapshot field (`u0`, `s`, `p`, `d_f`, `d_s`, `lambda_u`, `lambda_d`).
    pub fn full_pods(snaps: &BTreeMap<String, SnapshotSet>) -> Result<BTreeMap<String, ReducedBasis>> {
        let mut out = BTreeMap::new();
        for name in [U0, SUPREMIZER, "p", "d_f", "d_s", "lambda_u", "lambda_d"] {
            let s = snaps.get(name).ok_or_else(|| FsiError::Invalid(format!("missing snapshot field {name}")))?;
            let ip = InnerProduct::new(s.space(), monolithic_norm(name).expect("known field"))?;
            out.insert(name.to_string(), pod(s, &ip, PodSelect::All)?);
        }
        Ok(out)
    }

    /// Truncates the full PODs to `sizes` and enriches the velocity basis.
    pub fn build(pods: &BTreeMap<String, ReducedBasis>, sizes: MonoSizes, spaces: &MonolithicSpaces) -> Result<Self> {
        let get = |name: &str, n: usize| -> Result<ReducedBasis> {
            Ok(pods.get(name).ok_or_else(|| FsiError::Invalid(format!("missing basis {name}")))?.truncated(n))
        };
        let norms = MonoField::ALL
            .iter()
            .map(|&f| {
                let kind = match f {
                    MonoField::U | MonoField::Df | MonoField::Ds => NormKind::H1Seminorm,
                    MonoField::P => NormKind::L2Volume,
                    MonoField::Lu | MonoField::Ld => NormKind::L2Interface,
                };
                InnerProduct::new(spaces.space(f), kind)
            })
            .collect::<Result<Vec<_>>>()?;
        let u0 = get(U0, sizes.n_u)?;
        let u = if sizes.n_sup > 0 {
            build_monolithic_velocity_basis(&u0, &get(SUPREMIZER, sizes.n_sup)?, &norms[0])?
        } else {
            u0
        };
        let d_f = get("d_f", sizes.n_df)?;
        let d_s = get("d_s", sizes.n_ds)?;
        // A multiplier block wider than the block it constrains makes the reduced system
        // singular: lambda_d ties d_f to the solid trace, lambda_u ties the velocity trace to
        // the solid velocity.
        let n_ld = sizes.n_ld.min(d_f.n());
        let n_lu = sizes.n_lu.min(d_s.n());
        if n_ld < sizes.n_ld.min(get("lambda_d", usize::MAX)?.n()) || n_lu < sizes.n_lu.min(get("lambda_u", usize::MAX)?.n()) {
            log::warn!("multiplier modes capped to lambda_u {n_lu}, lambda_d {n_ld}");
        }
        let b = MonolithicBases {
            u,
            p: get("p", sizes.n_p)?,
            d_f,
            d_s,
            l_u: get("lambda_u", n_lu)?,
            l_d: get("lambda_d", n_ld)?,
            norms,
        };
        for f in MonoField::ALL {
            if !b.basis(f).space().same_as(spaces.space(f)) {
                return Err(FsiError::Invalid(format!("basis {} lives on the wrong space", f.name())));
            }
        }
        Ok(b)
    }

    pub fn basis(&self, f: MonoField) -> &ReducedBasis {
        match f {
            MonoField::U => &self.u,
            MonoField::P => &self.p,
            MonoField::Df => &self.d_f,
            MonoField::Ds => &self.d_s,
            MonoField::Lu => &self.l_u,
            MonoField::Ld => &self.l_d,
        }
    }

    pub fn dims(&self) -> [usize; 6] {
        MonoField::ALL.map(|f| self.basis(f).n())
    }
}

/// Reduced coefficients (stacked in `MonoField` order) and the reconstructed full state.
#[derive(Debug, Clone)]
pub struct MonolithicRomState {
    pub coeffs: Vec<f64>,
    pub full: MonolithicState,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RomStepReport {
    pub newton: NewtonReport,
    pub pressure_norm: f64,
}

#[derive(Debug)]
pub struct RomRun {
    /// Initial state followed by one state per step.
    pub states: Vec<MonolithicRomState>,
    pub reports: Vec<RomStepReport>,
}

/// Online monolithic solver.
#[derive(Debug)]
pub struct MonolithicRom<'a> {
    pub prob: &'a MonolithicProblem,
    pub bases: MonolithicBases,
    pub lifting: Lifting,
    pub newton: NewtonOptions,
    /// Abort with `Diverged` once the pressure norm exceeds this value.
    pub pressure_limit: Option<f64>,
    map: BlockMap,
}

impl<'a> MonolithicRom<'a> {
    pub fn new(prob: &'a MonolithicProblem, bases: MonolithicBases) -> Result<Self> {
        let sp = &prob.spaces;
        let lifting = Lifting::new(&sp.v, &sp.q, prob.phys.u_bar)?;
        let off = sp.offsets();
        let map = BlockMap::new(
            sp.n_dofs(),
            MonoField::ALL.iter().map(|&f| (off[f.index()], bases.basis(f).modes.clone())).collect(),
        );
        let newton = NewtonOptions { tol: prob.time.newton_tol, max_iters: prob.time.max_newton_iters, ..Default::default() };
        Ok(MonolithicRom { prob, bases, lifting, newton, pressure_limit: None, map })
    }

    pub fn n_reduced(&self) -> usize {
        self.map.n_reduced()
    }

    /// Coefficient slice of field `f`.
    pub fn field_coeffs<'s>(&self, s: &'s MonolithicRomState, f: MonoField) -> &'s [f64] {
        let o = self.map.offsets();
        &s.coeffs[o[f.index()]..o[f.index() + 1]]
    }

    /// Full vector with the lifting at `t` in the velocity block and zeros elsewhere.
    fn shift(&self, t: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.prob.spaces.n_dofs()];
        let l = self.lifting.at(t);
        x[..l.len()].copy_from_slice(&l.values);
        x
    }

    fn project_field(&self, f: MonoField, x: &FieldVec, t: f64) -> Result<(Vec<f64>, FieldVec)> {
        let b = self.bases.basis(f);
        let ip = &self.bases.norms[f.index()];
        let lift = (f == MonoField::U).then(|| self.lifting.at(t));
        let mut v = x.values.clone();
        if let Some(l) = &lift {
            v.iter_mut().zip(&l.values).for_each(|(a, b)| *a -= b);
        }
        let c = b.project(&v, ip);
        let back = super::reconstruct_field(&c, b, lift.as_ref())?;
        Ok((c, back))
    }

    /// Reduced state obtained by projecting a full-order state (and its histories).
    pub fn restart(&self, fe: &MonolithicState) -> Result<MonolithicRomState> {
        let mut full = fe.clone();
        let mut coeffs = Vec::with_capacity(self.n_reduced());
        for f in MonoField::ALL {
            let (c, back) = self.project_field(f, fe.field(f), fe.t)?;
            coeffs.extend(c);
            match f {
                MonoField::U => full.u = back,
                MonoField::P => full.p = back,
                MonoField::Df => full.d_f = back,
                MonoField::Ds => full.d_s = back,
                MonoField::Lu => full.l_u = back,
                MonoField::Ld => full.l_d = back,
            }
        }
        let t_prev = fe.t - self.prob.time.dt;
        if let Some(up) = &fe.u_prev {
            full.u_prev = Some(self.project_field(MonoField::U, up, t_prev)?.1);
        }
        if let Some(dp) = &fe.d_f_prev {
            full.d_f_prev = Some(self.project_field(MonoField::Df, dp, t_prev)?.1);
        }
        full.v_s = self.project_field(MonoField::Ds, &fe.v_s, fe.t)?.1;
        full.a_s = self.project_field(MonoField::Ds, &fe.a_s, fe.t)?.1;
        Ok(MonolithicRomState { coeffs, full })
    }

    /// Galerkin step: `Phi^T R(l + Phi c) = 0` solved by Newton on the reduced Jacobian.
    pub fn step(&self, s: &MonolithicRomState) -> Result<(MonolithicRomState, RomStepReport)> {
        let sys = self.prob.step_system(&s.full)?;
        let shift = self.shift(sys.t_next);
        let mut c = s.coeffs.clone();
        let mut cache = LuCache::default();
        let newton = newton_solve(&mut c, &self.newton, &mut cache, |c, jac| {
            let x = self.map.expand(c, &shift);
            let (r, j) = sys.eval(&x, jac)?;
            Ok((self.map.restrict(&r), j.map(|j| self.map.galerkin(&j))))
        })?;
        let x = self.map.expand(&c, &shift);
        let full = sys.advance(&x)?;
        let pressure_norm = self.bases.norms[MonoField::P.index()].norm(&full.p.values);
        if let Some(limit) = self.pressure_limit {
            if !(pressure_norm <= limit) {
                return Err(FsiError::Diverged {
                    step: full.step,
                    reason: format!("pressure norm {pressure_norm:e} exceeds {limit:e}"),
                });
            }
        }
        Ok((MonolithicRomState { coeffs: c, full }, RomStepReport { newton, pressure_norm }))
    }

    /// Marches `n_steps` from `start`. With a pressure limit set, any numerical failure is
    /// reported as `Diverged`.
    pub fn run(
        &self,
        start: MonolithicRomState,
        n_steps: usize,
        mut observe: impl FnMut(&MonolithicRomState, &RomStepReport),
    ) -> Result<RomRun> {
        let mut states = vec![start];
        let mut reports = Vec::with_capacity(n_steps);
        for _ in 0..n_steps {
            let cur = states.last().unwrap();
            let step = cur.full.step + 1;
            let (next, rep) = match self.step(cur) {
                Ok(v) => v,
                Err(e @ FsiError::Diverged { .. }) => return Err(e),
                Err(e) if self.pressure_limit.is_some() && e.is_numerical() => {
                    return Err(FsiError::Diverged { step, reason: e.to_string() });
                }
                Err(e) => return Err(e.at_step(step)),
            };
            observe(&next, &rep);
            states.push(next);
            reports.push(rep);
        }
        Ok(RomRun { states, reports })
    }
}
