//! Allocation-free evaluation of the master-equation right-hand side on the
//! packed integrator vector.

use num_complex::Complex64;

use crate::model::{CMatrix, Model};

type Entries = Vec<(usize, usize, Complex64)>;

fn nonzeros(m: &CMatrix) -> Entries {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != Complex64::new(0.0, 0.0) {
                out.push((i, j, m[(i, j)]));
            }
        }
    }
    out
}

pub(crate) struct Kernel {
    d: usize,
    detuning: Entries,
    cavity: Entries,
    pump: Entries,
    damping: Entries,
    collapse: Vec<Entries>,
    number_diag: Vec<f64>,
    excited_diag: Vec<f64>,
    two_kappa: f64,
    gamma: f64,
    rho: Vec<Complex64>,
    gen: Vec<Complex64>,
    out: Vec<Complex64>,
}

impl Kernel {
    pub(crate) fn new(model: &Model) -> Self {
        let d = model.dim();
        Self {
            d,
            detuning: nonzeros(&model.h.detuning),
            cavity: nonzeros(&model.h.cavity),
            pump: nonzeros(&model.h.pump),
            damping: nonzeros(&model.damping),
            collapse: model
                .collapse
                .iter()
                .map(|c| nonzeros(&c.op))
                .filter(|e| !e.is_empty())
                .collect(),
            number_diag: (0..d).map(|i| model.ops.number[(i, i)].re).collect(),
            excited_diag: (0..d).map(|i| model.ops.proj_e[(i, i)].re).collect(),
            two_kappa: 2.0 * model.params.kappa,
            gamma: model.params.gamma,
            rho: vec![Complex64::default(); d * d],
            gen: vec![Complex64::default(); d * d],
            out: vec![Complex64::default(); d * d],
        }
    }

    /// `y` holds Re ρ, Im ρ (column-major) and the two accumulators.
    pub(crate) fn rhs(&mut self, g: f64, omega: f64, y: &[f64], dy: &mut [f64]) {
        let d = self.d;
        let dd = d * d;
        for k in 0..dd {
            self.rho[k] = Complex64::new(y[k], y[dd + k]);
        }

        // gen = −i H_eff, H_eff = H(t) − (i/2) Σ c†c
        self.gen.fill(Complex64::default());
        let mi = Complex64::new(0.0, -1.0);
        for &(i, j, v) in &self.detuning {
            self.gen[i + j * d] += mi * v;
        }
        for &(i, j, v) in &self.cavity {
            self.gen[i + j * d] += mi * v * g;
        }
        for &(i, j, v) in &self.pump {
            self.gen[i + j * d] += mi * v * omega;
        }
        for &(i, j, v) in &self.damping {
            self.gen[i + j * d] += mi * v;
        }

        // out = gen ρ + ρ gen†
        for j in 0..d {
            for i in 0..d {
                let mut s = Complex64::default();
                for k in 0..d {
                    s += self.gen[i + k * d] * self.rho[k + j * d]
                        + self.rho[i + k * d] * self.gen[j + k * d].conj();
                }
                self.out[i + j * d] = s;
            }
        }
        for c in &self.collapse {
            for &(k, j, ckj) in c {
                for &(l, m, clm) in c {
                    self.out[k + l * d] += ckj * self.rho[j + m * d] * clm.conj();
                }
            }
        }

        for k in 0..dd {
            dy[k] = self.out[k].re;
            dy[dd + k] = self.out[k].im;
        }
        let mut n = 0.0;
        let mut pe = 0.0;
        for i in 0..d {
            let p = y[i + i * d];
            n += self.number_diag[i] * p;
            pe += self.excited_diag[i] * p;
        }
        dy[2 * dd] = self.two_kappa * n;
        dy[2 * dd + 1] = self.gamma * pe;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SystemParams;
    use rand::SeedableRng;

    #[test]
    fn matches_dense_liouvillian() {
        for n_max in [1, 2] {
            let p = SystemParams {
                delta_p: 2e7,
                delta_c: -1e7,
                n_max,
                ..Default::default()
            };
            let model = Model::new(p).unwrap();
            let d = model.dim();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
            let rho = crate::engine::tests::random_density(d, &mut rng);
            let dense = model.liouvillian_apply(&rho, 1.7e7, 9.0e7);
            let mut y = vec![0.0; 2 * d * d + 2];
            for (k, z) in rho.iter().enumerate() {
                y[k] = z.re;
                y[d * d + k] = z.im;
            }
            let mut dy = vec![0.0; y.len()];
            Kernel::new(&model).rhs(1.7e7, 9.0e7, &y, &mut dy);
            for (k, z) in dense.iter().enumerate() {
                assert!((z.re - dy[k]).abs() < 1e-6 && (z.im - dy[d * d + k]).abs() < 1e-6);
            }
        }
    }
}
