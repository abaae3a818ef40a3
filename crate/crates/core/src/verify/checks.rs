use crate::approx::{best_approx_upper, spectrum, vp_apply, VpMethod, VpParams};
use crate::error::{invalid, Error, Result};
use crate::frac::{frac_difference, frac_difference_terms};
use crate::grid::{Grid, GridBox, GridFunction, QuadratureRule};
use crate::io::{write_intermediate_csv, write_spectrum_csv};
use crate::measure::WeightedMeasure;
use crate::ops::{box_average, operator_norm_estimate, r_operator, steklov, steklov_bound, weighted_steklov, BoxSpec, Operator};
use crate::par;
use crate::report::{InequalityReport, ReportParams};
use crate::transference::{lsm_norm, normalizer_estimate, sandwich, sandwich_constant, UGrid};
use crate::weights::{ap_constant, select_q, ApEstimate, CubeFamily, Weight};

use super::{Artifact, CheckOutput, CheckParams, Context};

const STABILITY_LIMIT: f64 = 0.2;

/// Runs one theorem check against the shared context.
pub fn dispatch(id: &str, params: &CheckParams, ctx: &Context) -> Result<CheckOutput> {
    let c = Check { id, params, ctx };
    match id {
        "suf" => c.suf(),
        "suwf" => c.suwf(),
        "ruwf" => c.ruwf(),
        "commute" => c.commute(),
        "frac" => c.frac(),
        "sduf" => c.sduf(),
        "dela" => c.dela(),
        "jackson" => c.jackson(),
        "marchaud" => c.marchaud(),
        "sandwich" => c.sandwich(),
        "trver" => c.trver(),
        "holder" => c.holder(),
        other => Err(Error::UnknownTheorem(other.to_string())),
    }
}

fn only(reports: Vec<InequalityReport>) -> Result<CheckOutput> {
    Ok(CheckOutput {
        reports,
        artifacts: Vec::new(),
    })
}

fn csv(name: String, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Artifact> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(Artifact {
        name,
        contents: String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))?,
    })
}

fn measure(grid: &Grid, w: &Weight) -> Result<WeightedMeasure> {
    WeightedMeasure::new(grid, w, &QuadratureRule::midpoint())
}

fn fmt_num(v: f64) -> String {
    format!("{v}").replace('.', "p")
}

struct Check<'a> {
    id: &'a str,
    params: &'a CheckParams,
    ctx: &'a Context,
}

impl Check<'_> {
    fn d(&self) -> usize {
        self.ctx.grid.dim()
    }

    fn weight(&self) -> Weight {
        self.params.weight.as_ref().map(|w| w.0.clone()).unwrap_or_else(|| self.ctx.weight.clone())
    }

    fn p(&self, default: f64) -> f64 {
        self.params.p.unwrap_or(default)
    }

    fn base(&self, grid: &Grid, p: f64, w: &Weight) -> ReportParams {
        ReportParams {
            d: Some(grid.dim()),
            p: Some(p),
            weight: Some(w.to_string()),
            n_grid: Some(grid.n().to_vec()),
            ..Default::default()
        }
    }

    fn u_list(&self) -> Vec<Vec<f64>> {
        let d = self.d();
        self.params
            .u
            .clone()
            .unwrap_or_else(|| [0.0, 0.25, 0.5, 1.0].iter().map(|&t| vec![t; d]).collect())
    }

    fn depth(&self) -> usize {
        self.params.depth.unwrap_or(match self.d() {
            1 => 8,
            2 => 5,
            _ => 3,
        })
    }

    fn cubes(&self) -> Result<CubeFamily> {
        CubeFamily::unit(self.d(), self.depth())
    }

    /// `Some(report)` when the `A_p` premise fails.
    fn ap_premise(&self, w: &Weight, p: f64, rp: &ReportParams) -> Result<(Option<InequalityReport>, Option<ApEstimate>)> {
        if p < 1.0 {
            return Ok((None, None));
        }
        if w.in_ap_theory(self.d(), p) == Some(false) {
            let note = format!("{w} is outside A_p for p = {p}");
            return Ok((Some(InequalityReport::inconclusive(self.id, rp.clone(), note)), None));
        }
        let est = ap_constant(w, p, &self.cubes()?, &QuadratureRule::midpoint())?;
        if est.diverging {
            let note = format!("A_p estimate diverges (last value {:.4e})", est.value);
            return Ok((Some(InequalityReport::inconclusive(self.id, rp.clone(), note)), Some(est)));
        }
        Ok((None, Some(est)))
    }

    /// Ensemble sampled on the context grid and on its 2x refinement.
    fn grids(&self) -> Result<Vec<(Grid, Vec<GridFunction>)>> {
        let fine = self.ctx.grid.refined(2)?;
        let members = self.ctx.ensemble.resample(&fine)?.members;
        Ok(vec![(self.ctx.grid.clone(), self.ctx.ensemble.members.clone()), (fine, members)])
    }

    /// `max_{f,u} ‖T_u f‖ / ‖f‖`.
    fn max_ratio(
        &self,
        members: &[GridFunction],
        m: &WeightedMeasure,
        p: f64,
        us: &[Vec<f64>],
        op: impl Fn(&GridFunction, &[f64]) -> Result<GridFunction> + Sync + Send,
    ) -> Result<f64> {
        let rs = par::map_slice(members, |f| -> Result<f64> {
            let nf = m.norm(f, p)?;
            if nf == 0.0 {
                return Ok(0.0);
            }
            let mut best = 0.0f64;
            for u in us {
                best = best.max(m.norm(&op(f, u)?, p)? / nf);
            }
            Ok(best)
        });
        rs.into_iter().try_fold(0.0f64, |a, r| Ok(a.max(r?)))
    }

    fn suf(&self) -> Result<CheckOutput> {
        let (w, p, grid) = (self.weight(), self.p(2.0), &self.ctx.grid);
        let rp = self.base(grid, p, &w);
        if p < 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        let (bad, est) = self.ap_premise(&w, p, &rp)?;
        if let Some(r) = bad {
            return only(vec![r]);
        }
        let ap = est.map(|e| e.value).unwrap_or(1.0);
        let m = measure(grid, &w)?;
        let ratio = self.max_ratio(&self.ctx.ensemble.members, &m, p, &self.u_list(), |f, u| steklov(f, u))?;
        let bound = steklov_bound(grid.dim(), p, ap);
        let mut out = vec![InequalityReport::evaluate(self.id, rp.clone().claim("bound"), ratio, 1.0, bound, 1e-9).observe("ap", ap)];
        if w.is_constant() {
            out.push(InequalityReport::evaluate(self.id, rp.claim("contraction"), ratio, 1.0, 1.0, 1e-9));
        }
        only(out)
    }

    fn suwf(&self) -> Result<CheckOutput> {
        let (w, p) = (self.weight(), self.p(2.0));
        let rp = self.base(&self.ctx.grid, p, &w);
        if let (Some(r), _) = self.ap_premise(&w, p, &rp)? {
            return only(vec![r]);
        }
        let us = self.u_list();
        let mut cs = Vec::new();
        for (grid, members) in self.grids()? {
            let m = measure(&grid, &w)?;
            cs.push(self.max_ratio(&members, &m, p, &us, |f, u| weighted_steklov(f, u, &w))?);
        }
        only(vec![InequalityReport::stability(self.id, rp.claim("stability"), &cs, STABILITY_LIMIT)])
    }

    fn ruwf(&self) -> Result<CheckOutput> {
        let (w, p, grid) = (self.weight(), self.p(2.0), &self.ctx.grid);
        let mut rp = self.base(grid, p, &w);
        if let (Some(r), _) = self.ap_premise(&w, p, &rp)? {
            return only(vec![r]);
        }
        let members = &self.ctx.ensemble.members;
        let us = self.u_list();
        let n = match self.params.normalizer {
            Some(n) => n,
            None => {
                let mut best = 0.0f64;
                for u in &us {
                    let op = Operator::WeightedSteklov {
                        u: u.clone(),
                        weight: w.clone(),
                    };
                    best = best.max(operator_norm_estimate(&op, p, &w, members, None)?.value);
                }
                best
            }
        };
        rp.normalizer = Some(n);
        let m = measure(grid, &w)?;
        let ratio = self.max_ratio(members, &m, p, &us, |f, u| r_operator(f, u, &w, n))?;
        only(vec![InequalityReport::evaluate(self.id, rp, ratio, 1.0, sandwich_constant(p), 1e-9)])
    }

    fn commute(&self) -> Result<CheckOutput> {
        let (w, grid) = (self.weight(), &self.ctx.grid);
        let d = grid.dim();
        let delta = self.params.delta.unwrap_or(0.25);
        let v = self.params.v.clone().unwrap_or_else(|| vec![0.125; d]);
        let u = self.u_list().into_iter().nth(2).unwrap_or_else(|| vec![0.5; d]);
        let n = self.params.normalizer.unwrap_or(1.0);
        let spec = BoxSpec::shifted(delta, &v)?;
        let members = &self.ctx.ensemble.members;
        let diff = |op: &(dyn Fn(&GridFunction) -> Result<GridFunction> + Sync)| -> Result<f64> {
            let rs = par::map_slice(members, |f| -> Result<f64> {
                let a = op(&box_average(f, &spec)?)?;
                let b = box_average(&op(f)?, &spec)?;
                Ok(a.max_abs_diff(&b)? / f.sup_abs().max(f64::MIN_POSITIVE))
            });
            rs.into_iter().try_fold(0.0f64, |a, r| Ok(a.max(r?)))
        };
        let s = diff(&|f| weighted_steklov(f, &u, &w))?;
        let r = diff(&|f| r_operator(f, &u, &w, n))?;
        let mut rp = self.base(grid, f64::INFINITY, &w);
        rp.p = None;
        rp.delta = Some(delta);
        let mut rr = rp.clone().claim("R");
        rr.normalizer = Some(n);
        only(vec![
            InequalityReport::evaluate(self.id, rp.claim("S_uw"), s, 1.0, 1e-10, 0.0),
            InequalityReport::evaluate(self.id, rr, r, 1.0, 1e-10, 0.0),
        ])
    }

    fn frac(&self) -> Result<CheckOutput> {
        let (w, p) = (self.weight(), self.p(2.0));
        let k = self.params.k.unwrap_or(0.5);
        let delta = self.params.delta.unwrap_or(0.25);
        let tol = self.params.tol.unwrap_or(1e-8);
        let mut rp = self.base(&self.ctx.grid, p, &w);
        rp.k = Some(k);
        rp.delta = Some(delta);
        let ratio_on = |grid: &Grid, members: &[GridFunction]| -> Result<(f64, f64, f64)> {
            let m = measure(grid, &w)?;
            let rs = par::map_slice(members, |f| -> Result<(f64, f64, f64)> {
                let r = frac_difference(f, k, delta, tol)?;
                let twice = frac_difference_terms(f, k, delta, 2 * r.series.n)?;
                let gap = r.value.max_abs_diff(&twice.value)? / f.sup_abs().max(f64::MIN_POSITIVE);
                Ok((m.norm(&r.value, p)? / m.norm(f, p)?, r.series.abs_sum(p), gap))
            });
            rs.into_iter().try_fold((0.0f64, 0.0f64, 0.0f64), |a, r| {
                let r = r?;
                Ok((a.0.max(r.0), a.1.max(r.1), a.2.max(r.2)))
            })
        };
        let (ratio, coeff_sum, gap) = ratio_on(&self.ctx.grid, &self.ctx.ensemble.members)?;
        let mut out = vec![InequalityReport::evaluate(self.id, rp.clone().claim("truncation"), gap, 1.0, tol, 0.0)];
        if w.is_constant() && p >= 1.0 {
            out.push(
                InequalityReport::evaluate(self.id, rp.claim("bound"), ratio, 1.0, coeff_sum + tol, 0.0).observe("coeff_sum", coeff_sum),
            );
        } else {
            let mut cs = vec![ratio];
            let [_, (fine, members)] = <[_; 2]>::try_from(self.grids()?).map_err(|_| invalid("refinement"))?;
            cs.push(ratio_on(&fine, &members)?.0);
            out.push(InequalityReport::stability(self.id, rp.claim("stability"), &cs, STABILITY_LIMIT));
        }
        only(out)
    }

    fn sduf(&self) -> Result<CheckOutput> {
        let (w, p) = (self.weight(), self.p(2.0));
        let d = self.d();
        let delta = self.params.delta.unwrap_or(0.25);
        let v = self.params.v.clone().unwrap_or_else(|| vec![0.125; d]);
        let spec = BoxSpec::shifted(delta, &v)?;
        let mut rp = self.base(&self.ctx.grid, p, &w);
        rp.delta = Some(delta);
        let mut cs = Vec::new();
        for (grid, members) in self.grids()? {
            let m = measure(&grid, &w)?;
            cs.push(self.max_ratio(&members, &m, p, &[v.clone()], |f, _| box_average(f, &spec))?);
        }
        only(vec![InequalityReport::stability(self.id, rp.claim("stability"), &cs, STABILITY_LIMIT)
            .with_note("boundedness of S_{delta,v}; the intermediate-function identity is not checked")])
    }

    fn dela(&self) -> Result<CheckOutput> {
        let (w, p) = (self.weight(), self.p(2.0));
        let d = self.d();
        let (half, n) = match d {
            1 => (16.0, 2048),
            2 => (8.0, 512),
            _ => (4.0, 128),
        };
        let half = self.params.half_width.unwrap_or(half);
        let n = self.params.n.unwrap_or(n);
        let grid = Grid::new(GridBox::centered_cube(d, half)?, vec![n; d])?;
        let sigmas = self.params.sigmas.clone().unwrap_or_else(|| vec![4.0, 8.0, 16.0]);
        let method = self.params.method.unwrap_or(if d == 1 { VpMethod::DirectQuadrature } else { VpMethod::Spectral });
        let members = self.ctx.ensemble.resample(&grid)?.members;
        let m = measure(&grid, &w)?;
        let step = 2.0 * std::f64::consts::PI / (2.0 * half);
        let mut reports = Vec::new();
        let mut artifacts = Vec::new();
        let mut norm_consts = Vec::new();
        for (i, &sigma) in sigmas.iter().enumerate() {
            let vp = VpParams::new(sigma, method);
            let mut rp = self.base(&grid, p, &w);
            rp.sigma = Some(sigma);
            let g = GridFunction::from_fn(grid.clone(), |x| {
                x.iter()
                    .map(|&t| {
                        let s = sigma * t / 4.0;
                        if s == 0.0 { 1.0 } else { (s.sin() / s).powi(4) }
                    })
                    .product()
            })?;
            let rep = vp_apply(&g, &vp)?.max_abs_diff(&g)? / g.sup_abs();
            reports.push(InequalityReport::evaluate(self.id, rp.clone().claim("reproduction"), rep, 1.0, 1e-3, 0.0));
            let rs = par::map_slice(&members, |f| -> Result<(f64, f64)> {
                let j = vp_apply(f, &vp)?;
                let s = spectrum(&j);
                let e = s.energy();
                let out = if e > 0.0 { s.energy_outside_cube(2.0 * sigma * 1.05 + step) / e } else { 0.0 };
                Ok((out, m.norm(&j, p)? / m.norm(f, p)?))
            });
            let (mut band, mut c) = (0.0f64, 0.0f64);
            for r in rs {
                let r = r?;
                band = band.max(r.0);
                c = c.max(r.1);
            }
            reports.push(InequalityReport::evaluate(self.id, rp.claim("band"), band, 1.0, 1e-6, 0.0));
            norm_consts.push(c);
            if i == 0 && d == 1 {
                let s = spectrum(&vp_apply(&members[0], &vp)?);
                artifacts.push(csv(format!("dela_spectrum_sigma{}.csv", fmt_num(sigma)), |b| write_spectrum_csv(&s, b))?);
            }
        }
        reports.push(InequalityReport::stability(
            self.id,
            self.base(&grid, p, &w).claim("norm_bound"),
            &norm_consts,
            STABILITY_LIMIT,
        ));
        Ok(CheckOutput { reports, artifacts })
    }

    fn jackson(&self) -> Result<CheckOutput> {
        let (w, p) = (self.weight(), self.p(2.0));
        let r = self.params.r.unwrap_or(1);
        let sigmas = self.params.sigmas.clone().unwrap_or_else(|| vec![8.0, 16.0]);
        let method = self.params.method.unwrap_or_default();
        let grids = self.grids()?;
        let mut out = Vec::new();
        for &sigma in &sigmas {
            let mut cs = Vec::new();
            for (grid, members) in &grids {
                let m = measure(grid, &w)?;
                let rs = par::map_slice(members, |f| -> Result<f64> {
                    let a = best_approx_upper(f, sigma, p, &w, method)?;
                    let diff = frac_difference_terms(f, r as f64, 1.0 / sigma, r as usize)?.value;
                    Ok(a / m.norm(&diff, p)?)
                });
                cs.push(rs.into_iter().try_fold(0.0f64, |a, v| Ok::<_, Error>(a.max(v?)))?);
            }
            let mut rp = self.base(&self.ctx.grid, p, &w);
            rp.r = Some(r);
            rp.sigma = Some(sigma);
            out.push(InequalityReport::stability(self.id, rp.claim("stability"), &cs, STABILITY_LIMIT));
        }
        only(out)
    }

    fn marchaud(&self) -> Result<CheckOutput> {
        let (w, p) = (self.weight(), self.p(2.0));
        let r = self.params.r.unwrap_or(1);
        let mm = self.params.m.unwrap_or(3);
        let a = self.params.a.unwrap_or(2.0);
        let s = self.params.s.unwrap_or(a.max(2.0));
        let deltas = self.params.deltas.clone().unwrap_or_else(|| vec![1.0 / 16.0, 1.0 / 8.0]);
        let grids = self.grids()?;
        let mut out = Vec::new();
        for &delta in &deltas {
            let mut cs = Vec::new();
            for (grid, members) in &grids {
                let m = measure(grid, &w)?;
                let diff_norm = |f: &GridFunction, k: u32, dl: f64| -> Result<f64> {
                    m.norm(&frac_difference_terms(f, k as f64, dl, k as usize)?.value, p)
                };
                let rs = par::map_slice(members, |f| -> Result<f64> {
                    let lhs = diff_norm(f, r, delta)?.powf(s);
                    let mut rhs = 0.0;
                    for j in 0..=mm {
                        let scale = 2f64.powi(j as i32);
                        rhs += scale.powf(-2.0 * r as f64 * s) * diff_norm(f, r + 1, scale * delta)?.powf(s);
                    }
                    Ok(lhs / rhs)
                });
                cs.push(rs.into_iter().try_fold(f64::INFINITY, |acc, v| Ok::<_, Error>(acc.min(v?)))?);
            }
            let mut rp = self.base(&self.ctx.grid, p, &w);
            rp.r = Some(r);
            rp.m = Some(mm);
            rp.s = Some(s);
            rp.a = Some(a);
            rp.delta = Some(delta);
            out.push(
                InequalityReport::evaluate(self.id, rp.clone().claim("positivity"), 1e-12, cs[0].min(cs[1]), 1.0, 0.0).observe("c_hat", cs[0]),
            );
            out.push(InequalityReport::stability(self.id, rp.claim("stability"), &cs, STABILITY_LIMIT));
        }
        only(out)
    }

    fn u_grid(&self) -> Result<UGrid> {
        let d = self.d();
        let per = self.params.u_per_axis.unwrap_or(match d {
            1 => 64,
            2 => 16,
            _ => 8,
        });
        UGrid::unit_cube(d, self.ctx.grid.h()[0], per)
    }

    fn nonneg_members(&self) -> Result<Vec<GridFunction>> {
        Ok(self.ctx.ensemble.members.iter().map(|f| f.abs()).collect())
    }

    fn sandwich(&self) -> Result<CheckOutput> {
        let (w, p, grid) = (self.weight(), self.p(2.0), &self.ctx.grid);
        let mut rp = self.base(grid, p, &w);
        let q = if p >= 1.0 {
            1.0
        } else if let Some(q) = self.params.q {
            q
        } else {
            match select_q(&w, p, &self.cubes()?) {
                Ok(sel) => sel.q,
                Err(Error::AinftyNotConfirmed) => {
                    return only(vec![InequalityReport::inconclusive(self.id, rp, "A_inf membership not confirmed")]);
                }
                Err(e) => return Err(e),
            }
        };
        rp.q = Some(q);
        let members = self.nonneg_members()?;
        let ug = self.u_grid()?;
        let m = measure(grid, &w)?;
        let n = match self.params.normalizer {
            Some(n) => n,
            None => normalizer_estimate(&members, p, &w, &ug, &m)?,
        };
        rp.normalizer = Some(n);
        let rs = par::map_slice(&members, |f| sandwich(f, p, q, &w, &ug, n, &m, None));
        let (mut lower, mut upper, mut lip) = (0.0f64, 0.0f64, 0.0f64);
        let mut artifacts = Vec::new();
        for (i, r) in rs.into_iter().enumerate() {
            let (sw, big_f) = r?;
            lower = lower.max(sw.norm / sw.sup);
            upper = upper.max(sw.sup / sw.norm);
            lip = lip.max(sw.modulus / ug.step);
            if i == 0 && grid.dim() == 1 {
                artifacts.push(csv(format!("sandwich_F_p{}.csv", fmt_num(p)), |b| write_intermediate_csv(&big_f, b))?);
            }
        }
        let c = sandwich_constant(p);
        Ok(CheckOutput {
            reports: vec![
                InequalityReport::evaluate(self.id, rp.clone().claim("lower"), lower, 1.0, 1.0, 1e-8),
                InequalityReport::evaluate(self.id, rp.claim("upper"), upper, 1.0, c, 1e-8 * c).observe("lipschitz", lip),
            ],
            artifacts,
        })
    }

    fn trver(&self) -> Result<CheckOutput> {
        let (w, p, grid) = (self.weight(), self.p(2.0), &self.ctx.grid);
        if p <= 1.0 {
            return Err(Error::InvalidExponent(p));
        }
        let a = self.params.a.unwrap_or(2.0);
        let s = self.params.s.unwrap_or(3.0);
        let mm = self.params.m.unwrap_or(2);
        if !(a > 1.0 && s > 2.0) {
            return Err(invalid("trver needs a > 1 and s > 2"));
        }
        let members = self.nonneg_members()?;
        let ug = self.u_grid()?;
        let m = measure(grid, &w)?;
        let n = match self.params.normalizer {
            Some(n) => n,
            None => normalizer_estimate(&members, p, &w, &ug, &m)?,
        };
        let rs = par::map_slice(&members, |f| sandwich(f, p, 1.0, &w, &ug, n, &m, Some(a)));
        let mut pairs = Vec::with_capacity(members.len());
        for r in rs {
            let sw = r?.0;
            pairs.push((sw.norm, sw.la_unit_cube.unwrap_or(0.0)));
        }
        let lower = pairs.iter().map(|(nf, la)| nf / la).fold(0.0, f64::max);
        let len = pairs.len();
        let mut upper = 0.0f64;
        for i in 0..len {
            let window: Vec<usize> = (1..=mm + 1).map(|j| (i + j) % len).collect();
            let la: Vec<f64> = window.iter().map(|&j| pairs[j].1).collect();
            let nr: Vec<f64> = window.iter().map(|&j| pairs[j].0).collect();
            upper = upper.max(lsm_norm(&la, s)? / lsm_norm(&nr, s)?);
        }
        let mut rp = self.base(grid, p, &w);
        rp.a = Some(a);
        rp.s = Some(s);
        rp.m = Some(mm);
        rp.normalizer = Some(n);
        let c = sandwich_constant(p);
        only(vec![
            InequalityReport::evaluate(self.id, rp.clone().claim("lower"), lower, 1.0, 1.0, 1e-8),
            InequalityReport::evaluate(self.id, rp.claim("upper"), upper, 1.0, c, 1e-8 * c),
        ])
    }

    fn holder(&self) -> Result<CheckOutput> {
        let (w, grid) = (self.weight(), &self.ctx.grid);
        let ps = self.params.ps.clone().unwrap_or_else(|| vec![1.5, 2.0, 3.0]);
        let members: Vec<GridFunction> = self.ctx.ensemble.members.iter().map(|f| f.abs()).collect();
        let m = measure(grid, &w)?;
        let mut out = Vec::new();
        for &p in &ps {
            if p <= 1.0 {
                return Err(Error::InvalidExponent(p));
            }
            let pp = p / (p - 1.0);
            let norms: Vec<(f64, f64)> = members
                .iter()
                .map(|f| Ok((m.norm(f, p)?, m.norm(f, pp)?)))
                .collect::<Result<_>>()?;
            let rs = par::map_range(members.len(), |i| -> Result<f64> {
                let mut best = 0.0f64;
                for (j, g) in members.iter().enumerate() {
                    let rhs = norms[i].0 * norms[j].1;
                    if rhs > 0.0 {
                        best = best.max(m.pairing(&members[i], g)? / rhs);
                    }
                }
                Ok(best)
            });
            let ratio = rs.into_iter().try_fold(0.0f64, |a, v| Ok::<_, Error>(a.max(v?)))?;
            out.push(InequalityReport::evaluate(self.id, self.base(grid, p, &w), ratio, 1.0, 1.0, 1e-10));
        }
        only(out)
    }
}
