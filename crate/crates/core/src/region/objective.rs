//! Allocation-free evaluation of the forward rate, distortions and cost
//! directly on flat kernel tables, with the analytic gradient used by the
//! optimizer. Agrees with [`super::evaluate_point`] to rounding.

use alloc::vec;
use alloc::vec::Vec;

use super::evaluate::argmin_first;
use super::policy::Dims;
use crate::math::log2;
use crate::prob::clamp_rounding;
use crate::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Metrics {
    pub r1: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub gamma: f64,
}

/// Multipliers of the distortion and cost terms in a gradient request.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Weights {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub gamma: f64,
}

pub(crate) struct FastEval<'a> {
    d: Dims,
    src: &'a [f64],
    vend: &'a [f64],
    cost: &'a [f64],
    nk1: usize,
    nk2: usize,
    m1: Vec<f64>,
    m2: Vec<f64>,
    m3: Option<Vec<f64>>,
    // q6[x][z][a][u][w][y]
    q6: Vec<f64>,
    // pzauwy[z][a][u][w][y]
    pzauwy: Vec<f64>,
    pxyzu: Vec<f64>,
    pxyzv: Vec<f64>,
    f1: Vec<usize>,
    f2: Vec<usize>,
    pz: Vec<f64>,
    pa: Vec<f64>,
    pza: Vec<f64>,
    paw: Vec<f64>,
    pzaw: Vec<f64>,
    pawy: Vec<f64>,
    pzawy: Vec<f64>,
    pauwy: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'a> FastEval<'a> {
    /// With `surrogate = Some(big)`, infinite metric entries are replaced by
    /// `big` so that penalties stay differentiable.
    pub fn new(spec: &'a ProblemSpec, nu: usize, nv: usize, surrogate: Option<f64>) -> Self {
        let d = Dims::new(spec, nu, nv);
        let fix = |t: &[f64]| -> Vec<f64> {
            t.iter()
                .map(|&v| match surrogate {
                    Some(big) if v.is_infinite() => big,
                    _ => v,
                })
                .collect()
        };
        let nk1 = spec.xhat1().len();
        let nk2 = spec.xhat2().len();
        let cells = d.nx * d.nz * d.na * d.nu * d.nw * d.ny;
        Self {
            d,
            src: spec.source().table(),
            vend: spec.vending().table(),
            cost: spec.cost(),
            nk1,
            nk2,
            m1: fix(spec.d1().values()),
            m2: fix(spec.d2().values()),
            m3: spec.d3().map(|t| fix(t.values())),
            q6: vec![0.0; cells],
            pzauwy: vec![0.0; cells / d.nx],
            pxyzu: vec![0.0; d.nx * d.ny * d.nz * d.nu],
            pxyzv: vec![0.0; d.nx * d.ny * d.nz * d.nv],
            f1: vec![0; d.nv * d.nz],
            f2: vec![0; d.nu * d.ny],
            pz: vec![0.0; d.nz],
            pa: vec![0.0; d.na],
            pza: vec![0.0; d.nz * d.na],
            paw: vec![0.0; d.na * d.nw],
            pzaw: vec![0.0; d.nz * d.na * d.nw],
            pawy: vec![0.0; d.na * d.nw * d.ny],
            pzawy: vec![0.0; d.nz * d.na * d.nw * d.ny],
            pauwy: vec![0.0; d.na * d.nu * d.nw * d.ny],
            scratch: vec![0.0; nk1.max(nk2)],
        }
    }

    /// Surrogate for infinite metric entries: ten times the largest finite
    /// entry (at least 10).
    pub fn surrogate_for(spec: &ProblemSpec) -> f64 {
        let m = spec
            .d1()
            .max_finite()
            .max(spec.d2().max_finite())
            .max(spec.d3().map_or(0.0, |d| d.max_finite()));
        10.0 * m.max(1.0)
    }

    #[inline]
    fn vend(&self, a: usize, x: usize, z: usize, y: usize) -> f64 {
        let d = &self.d;
        self.vend[((a * d.nx + x) * d.nz + z) * d.ny + y]
    }

    #[inline]
    fn metric(t: &[f64], nk: usize, d: &Dims, x: usize, y: usize, z: usize, k: usize) -> f64 {
        t[((x * d.ny + y) * d.nz + z) * nk + k]
    }

    /// Evaluates `fwd` laid out `[z][a][u][w]` and `bwd` laid out
    /// `[a][u][y][w][v]`, leaving intermediate tables for [`Self::gradient`].
    pub fn evaluate(&mut self, fwd: &[f64], bwd: &[f64]) -> Metrics {
        let d = self.d;
        let (nx, nz, na, nu, nw, ny, nv) = (d.nx, d.nz, d.na, d.nu, d.nw, d.ny, d.nv);
        self.pzauwy.iter_mut().for_each(|p| *p = 0.0);
        self.pxyzu.iter_mut().for_each(|p| *p = 0.0);
        self.pxyzv.iter_mut().for_each(|p| *p = 0.0);
        let mut d3 = 0.0;
        let mut i = 0;
        for x in 0..nx {
            for z in 0..nz {
                let pxz = self.src[x * nz + z];
                for a in 0..na {
                    for u in 0..nu {
                        for w in 0..nw {
                            let pf = pxz * fwd[((z * na + a) * nu + u) * nw + w];
                            for y in 0..ny {
                                let q = pf * self.vend(a, x, z, y);
                                self.q6[i] = q;
                                i += 1;
                                if q <= 0.0 {
                                    continue;
                                }
                                self.pzauwy[(((z * na + a) * nu + u) * nw + w) * ny + y] += q;
                                self.pxyzu[((x * ny + y) * nz + z) * nu + u] += q;
                                let row = ((a * nu + u) * ny + y) * nw + w;
                                let base = ((x * ny + y) * nz + z) * nv;
                                for v in 0..nv {
                                    self.pxyzv[base + v] += q * bwd[row * nv + v];
                                }
                                if let Some(m3) = &self.m3 {
                                    d3 += q * Self::metric(m3, nw, &d, x, y, z, w);
                                }
                            }
                        }
                    }
                }
            }
        }

        let r1 = self.forward_rate();

        // Node 2 decodes from (U, Y).
        let mut d2 = 0.0;
        for u in 0..nu {
            for y in 0..ny {
                let s = &mut self.scratch[..self.nk2];
                s.iter_mut().for_each(|v| *v = 0.0);
                for x in 0..nx {
                    for z in 0..nz {
                        let p = self.pxyzu[((x * ny + y) * nz + z) * nu + u];
                        if p > 0.0 {
                            for (k, sk) in s.iter_mut().enumerate() {
                                *sk += p * Self::metric(&self.m2, self.nk2, &d, x, y, z, k);
                            }
                        }
                    }
                }
                let k = argmin_first(s);
                self.f2[u * ny + y] = k;
                d2 += s[k];
            }
        }

        // Node 1 decodes from (V, Z).
        let mut d1 = 0.0;
        for v in 0..nv {
            for z in 0..nz {
                let s = &mut self.scratch[..self.nk1];
                s.iter_mut().for_each(|v| *v = 0.0);
                for x in 0..nx {
                    for y in 0..ny {
                        let p = self.pxyzv[((x * ny + y) * nz + z) * nv + v];
                        if p > 0.0 {
                            for (k, sk) in s.iter_mut().enumerate() {
                                *sk += p * Self::metric(&self.m1, self.nk1, &d, x, y, z, k);
                            }
                        }
                    }
                }
                let k = argmin_first(s);
                self.f1[v * nz + z] = k;
                d1 += s[k];
            }
        }

        let gamma = self.pa.iter().zip(self.cost).map(|(p, c)| p * c).sum();
        Metrics {
            r1,
            d1,
            d2,
            d3,
            gamma,
        }
    }

    /// `I(Z;A) + I(Z;W|A) + I(Z;U|A,Y,W)` from `pzauwy`, refreshing the
    /// marginals the gradient reuses.
    fn forward_rate(&mut self) -> f64 {
        let d = self.d;
        let (nz, na, nu, nw, ny) = (d.nz, d.na, d.nu, d.nw, d.ny);
        for t in [
            &mut self.pz,
            &mut self.pa,
            &mut self.pza,
            &mut self.paw,
            &mut self.pzaw,
            &mut self.pawy,
            &mut self.pzawy,
            &mut self.pauwy,
        ] {
            t.iter_mut().for_each(|p| *p = 0.0);
        }
        for z in 0..nz {
            for a in 0..na {
                for u in 0..nu {
                    for w in 0..nw {
                        for y in 0..ny {
                            let p = self.pzauwy[(((z * na + a) * nu + u) * nw + w) * ny + y];
                            self.pz[z] += p;
                            self.pa[a] += p;
                            self.pza[z * na + a] += p;
                            self.paw[a * nw + w] += p;
                            self.pzaw[(z * na + a) * nw + w] += p;
                            self.pawy[(a * nw + w) * ny + y] += p;
                            self.pzawy[((z * na + a) * nw + w) * ny + y] += p;
                            self.pauwy[((a * nu + u) * nw + w) * ny + y] += p;
                        }
                    }
                }
            }
        }
        let mut r = 0.0;
        for z in 0..nz {
            for a in 0..na {
                let p = self.pza[z * na + a];
                if p > 0.0 {
                    r += p * (log2(p) - log2(self.pz[z]) - log2(self.pa[a]));
                }
                for w in 0..nw {
                    let p = self.pzaw[(z * na + a) * nw + w];
                    if nw > 1 && p > 0.0 {
                        r += p * (log2(p) + log2(self.pa[a]) - log2(self.pza[z * na + a]) - log2(self.paw[a * nw + w]));
                    }
                    for y in 0..ny {
                        let pzawy = self.pzawy[((z * na + a) * nw + w) * ny + y];
                        let pawy = self.pawy[(a * nw + w) * ny + y];
                        for u in 0..nu {
                            let p = self.pzauwy[(((z * na + a) * nu + u) * nw + w) * ny + y];
                            if p > 0.0 {
                                let pauwy = self.pauwy[((a * nu + u) * nw + w) * ny + y];
                                r += p * (log2(p) + log2(pawy) - log2(pzawy) - log2(pauwy));
                            }
                        }
                    }
                }
            }
        }
        clamp_rounding(r)
    }

    #[cfg(test)]
    /// `I(Y;V|A,Z,U,W)` for the tables passed to the last
    /// [`Self::evaluate`].
    pub fn backward_rate(&self, bwd: &[f64]) -> f64 {
        let d = self.d;
        let (nz, na, nu, nw, ny, nv) = (d.nz, d.na, d.nu, d.nw, d.ny, d.nv);
        let mut pcv = vec![0.0; nv];
        let mut r = 0.0;
        for z in 0..nz {
            for a in 0..na {
                for u in 0..nu {
                    for w in 0..nw {
                        let base = (((z * na + a) * nu + u) * nw + w) * ny;
                        let pc: f64 = self.pzauwy[base..base + ny].iter().sum();
                        if pc <= 0.0 {
                            continue;
                        }
                        pcv.iter_mut().for_each(|p| *p = 0.0);
                        for y in 0..ny {
                            let row = ((a * nu + u) * ny + y) * nw + w;
                            for v in 0..nv {
                                pcv[v] += self.pzauwy[base + y] * bwd[row * nv + v];
                            }
                        }
                        for y in 0..ny {
                            let pcy = self.pzauwy[base + y];
                            if pcy <= 0.0 {
                                continue;
                            }
                            let row = ((a * nu + u) * ny + y) * nw + w;
                            for v in 0..nv {
                                let p = pcy * bwd[row * nv + v];
                                if p > 0.0 {
                                    r += p * (log2(p) + log2(pc) - log2(pcy) - log2(pcv[v]));
                                }
                            }
                        }
                    }
                }
            }
        }
        clamp_rounding(r)
    }

    /// Gradient of `R1 + w.d1 D1 + w.d2 D2 + w.d3 D3 + w.gamma Γ` with respect
    /// to the entries of `fwd` and `bwd`, at the point of the last
    /// [`Self::evaluate`]. Decoders are held fixed (Danskin).
    pub fn gradient(&self, bwd: &[f64], wt: Weights, g_fwd: &mut [f64], g_bwd: &mut [f64]) {
        let d = self.d;
        let (nx, nz, na, nu, nw, ny, nv) = (d.nx, d.nz, d.na, d.nu, d.nw, d.ny, d.nv);
        g_fwd.iter_mut().for_each(|g| *g = 0.0);
        g_bwd.iter_mut().for_each(|g| *g = 0.0);
        let mut i = 0;
        for x in 0..nx {
            for z in 0..nz {
                let pxz = self.src[x * nz + z];
                for a in 0..na {
                    let g_za = {
                        let p = self.pza[z * na + a];
                        if p > 0.0 {
                            log2(p) - log2(self.pz[z]) - log2(self.pa[a])
                        } else {
                            0.0
                        }
                    };
                    for u in 0..nu {
                        for w in 0..nw {
                            let g_zaw = {
                                let p = self.pzaw[(z * na + a) * nw + w];
                                if nw > 1 && p > 0.0 {
                                    log2(p) + log2(self.pa[a]) - log2(self.pza[z * na + a]) - log2(self.paw[a * nw + w])
                                } else {
                                    0.0
                                }
                            };
                            let fi = ((z * na + a) * nu + u) * nw + w;
                            for y in 0..ny {
                                let q = self.q6[i];
                                i += 1;
                                let wv = pxz * self.vend(a, x, z, y);
                                if wv <= 0.0 {
                                    continue;
                                }
                                let p = self.pzauwy[(((z * na + a) * nu + u) * nw + w) * ny + y];
                                let mut g = g_za + g_zaw;
                                if p > 0.0 {
                                    let pawy = self.pawy[(a * nw + w) * ny + y];
                                    let pzawy = self.pzawy[((z * na + a) * nw + w) * ny + y];
                                    let pauwy = self.pauwy[((a * nu + u) * nw + w) * ny + y];
                                    g += log2(p) + log2(pawy) - log2(pzawy) - log2(pauwy);
                                }
                                g += wt.gamma * self.cost[a];
                                g += wt.d2 * Self::metric(&self.m2, self.nk2, &d, x, y, z, self.f2[u * ny + y]);
                                if let Some(m3) = &self.m3 {
                                    g += wt.d3 * Self::metric(m3, nw, &d, x, y, z, w);
                                }
                                let row = ((a * nu + u) * ny + y) * nw + w;
                                if wt.d1 != 0.0 {
                                    let mut t1 = 0.0;
                                    for v in 0..nv {
                                        let m = Self::metric(&self.m1, self.nk1, &d, x, y, z, self.f1[v * nz + z]);
                                        t1 += bwd[row * nv + v] * m;
                                        g_bwd[row * nv + v] += wt.d1 * q * m;
                                    }
                                    g += wt.d1 * t1;
                                }
                                g_fwd[fi] += wv * g;
                            }
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{hb_policy, CaseTag, ExampleCase};
    use crate::model::binary_erasure_spec;
    use crate::region::{evaluate_point, Policy};
    use crate::ErasureParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_against_generic(spec: &ProblemSpec, p: &Policy) {
        let (nu, nv) = (p.u().len(), p.v().len());
        let mut ev = FastEval::new(spec, nu, nv, None);
        let m = ev.evaluate(p.forward().table(), p.backward().table());
        let pt = evaluate_point(spec, p).unwrap();
        assert!((m.r1 - pt.r1).abs() < 1e-12, "{} vs {}", m.r1, pt.r1);
        assert!((ev.backward_rate(p.backward().table()) - pt.r2).abs() < 1e-12);
        assert!((m.d1 - pt.d1).abs() < 1e-12);
        assert!((m.d2 - pt.d2).abs() < 1e-12);
        assert!((m.gamma - pt.gamma).abs() < 1e-12);
        if let Some(d3) = pt.d3 {
            assert!((m.d3 - d3).abs() < 1e-12 || m.d3 == d3);
        }
    }

    #[test]
    fn agrees_with_the_joint_table_path() {
        let spec = binary_erasure_spec(ErasureParams::new(0.25).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (nu, nv) in [(1, 1), (3, 2), (9, 16)] {
            for _ in 0..5 {
                check_against_generic(&spec, &Policy::random(&spec, nu, nv, &mut rng).unwrap());
            }
        }
    }

    #[test]
    fn agrees_in_heegard_berger_mode() {
        let spec = ExampleCase::new(CaseTag::HbCase2, 0.2, 0.5, Some(0.6)).unwrap().spec().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            check_against_generic(&spec, &Policy::random(&spec, 2, 3, &mut rng).unwrap());
        }
        check_against_generic(&spec, &hb_policy(0.2, 0.5, 0.3, 0.1, 0.7).unwrap());
    }

    fn objective(ev: &mut FastEval<'_>, f: &[f64], b: &[f64], w: Weights) -> f64 {
        let m = ev.evaluate(f, b);
        m.r1 + w.d1 * m.d1 + w.d2 * m.d2 + w.d3 * m.d3 + w.gamma * m.gamma
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let spec = binary_erasure_spec(ErasureParams::new(0.2).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = Policy::random(&spec, 3, 2, &mut rng).unwrap();
        let (mut f, mut b) = (p.forward().table().to_vec(), p.backward().table().to_vec());
        let w = Weights {
            d1: 0.7,
            d2: 1.3,
            d3: 0.0,
            gamma: 0.4,
        };
        let mut ev = FastEval::new(&spec, 3, 2, None);
        ev.evaluate(&f, &b);
        let (mut gf, mut gb) = (vec![0.0; f.len()], vec![0.0; b.len()]);
        ev.gradient(&b, w, &mut gf, &mut gb);
        // Directional derivatives along in-simplex perturbations, so the
        // per-row constants of the entropy terms drop out.
        let h = 1e-6;
        let row = 6;
        for i in [0, 7, 13] {
            let j = (i / row) * row + (i + 1) % row;
            let g = gf[i] - gf[j];
            f[i] += h;
            f[j] -= h;
            let up = objective(&mut ev, &f, &b, w);
            f[i] -= 2.0 * h;
            f[j] += 2.0 * h;
            let down = objective(&mut ev, &f, &b, w);
            f[i] += h;
            f[j] -= h;
            assert!(((up - down) / (2.0 * h) - g).abs() < 1e-5, "forward {i}");
        }
        for i in [0, 4, 9] {
            let j = i ^ 1;
            let g = gb[i] - gb[j];
            b[i] += h;
            b[j] -= h;
            let up = objective(&mut ev, &f, &b, w);
            b[i] -= 2.0 * h;
            b[j] += 2.0 * h;
            let down = objective(&mut ev, &f, &b, w);
            b[i] += h;
            b[j] -= h;
            assert!(((up - down) / (2.0 * h) - g).abs() < 1e-5, "backward {i}");
        }
    }
}
