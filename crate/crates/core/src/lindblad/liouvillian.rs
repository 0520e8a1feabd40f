use nalgebra::{DVector, Schur};

use super::density::DensityOperator;
use super::operators::{dimension, lowering, number};
use crate::error::{Error, Result};
use crate::model::{DriveParams, SystemModel};
use crate::units::mhz_to_angular;
use crate::{CMatrix, C64};

/// Largest cluster the dense generator is built for (4^6 = 4096 rows).
pub const MAX_EMITTERS: usize = 6;

/// Lindblad generator in the frame rotating at the laser frequency.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    generator: CMatrix,
    n_emitters: usize,
    frame_mhz: f64,
}

impl Liouvillian {
    /// Wraps a raw generator; `generator` must be `4^n x 4^n`.
    pub fn from_generator(generator: CMatrix, n_emitters: usize, frame_mhz: f64) -> Result<Self> {
        let d = dimension(n_emitters);
        if generator.nrows() != d * d || generator.ncols() != d * d {
            return Err(Error::Shape(format!(
                "generator is {}x{}, expected {}x{}",
                generator.nrows(),
                generator.ncols(),
                d * d,
                d * d
            )));
        }
        Ok(Self { generator, n_emitters, frame_mhz })
    }

    /// Generator matrix in rad/ns acting on column-stacked density matrices.
    pub fn generator(&self) -> &CMatrix {
        &self.generator
    }

    pub fn n_emitters(&self) -> usize {
        self.n_emitters
    }

    /// Hilbert-space dimension 2^N.
    pub fn hilbert_dim(&self) -> usize {
        dimension(self.n_emitters)
    }

    /// Rotating-frame (laser) frequency, MHz.
    pub fn frame_mhz(&self) -> f64 {
        self.frame_mhz
    }

    /// L(rho) as a matrix.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let d = rho.nrows();
        let v = DVector::from_column_slice(rho.as_slice());
        let out = &self.generator * v;
        CMatrix::from_column_slice(d, d, out.as_slice())
    }

    /// Largest element of L(rho).
    pub fn residual(&self, rho: &DensityOperator) -> f64 {
        self.apply(rho.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// All generator eigenvalues (rad/ns) from a complex Schur decomposition.
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        let schur = Schur::try_new(self.generator.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Numerical("Schur decomposition failed".into()))?;
        let (_, t) = schur.unpack();
        Ok((0..t.nrows()).map(|k| t[(k, k)]).collect())
    }

    /// Largest real part of the spectrum.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
    }

    /// Largest absolute generator element, used to scale tolerances.
    pub fn scale(&self) -> f64 {
        self.generator.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Adds the superoperator rho -> c * A rho B to `gen`.
///
/// With column stacking vec(A X B) = (B^T kron A) vec(X), so the entry for
/// output (i, k) and input (j, l) is A[i, j] * B[l, k].
fn add_sandwich(gen: &mut CMatrix, c: C64, a: &CMatrix, b: &CMatrix) {
    let d = a.nrows();
    let nz = |m: &CMatrix| -> Vec<(usize, usize, C64)> {
        let mut out = Vec::new();
        for col in 0..m.ncols() {
            for row in 0..m.nrows() {
                let v = m[(row, col)];
                if v != C64::new(0.0, 0.0) {
                    out.push((row, col, v));
                }
            }
        }
        out
    };
    let a_nz = nz(a);
    let b_nz = nz(b);
    for &(l, k, bv) in &b_nz {
        for &(i, j, av) in &a_nz {
            gen[(k * d + i, l * d + j)] += c * av * bv;
        }
    }
}

/// Adds the dissipator rate * (A rho B^dag - 1/2 {B^dag A, rho}).
fn add_dissipator(gen: &mut CMatrix, rate: f64, a: &CMatrix, b: &CMatrix, identity: &CMatrix) {
    if rate == 0.0 {
        return;
    }
    let r = C64::new(rate, 0.0);
    let half = C64::new(-0.5 * rate, 0.0);
    let bdag = b.adjoint();
    let bda = &bdag * a;
    add_sandwich(gen, r, a, &bdag);
    add_sandwich(gen, half, &bda, identity);
    add_sandwich(gen, half, identity, &bda);
}

/// System Hamiltonian in the laser frame, rad/ns.
pub(crate) fn hamiltonian(model: &SystemModel, drive: &DriveParams) -> CMatrix {
    let n = model.n_emitters();
    let d = dimension(n);
    let lowers: Vec<CMatrix> = (0..n).map(|i| lowering(n, i)).collect();
    let mut h = CMatrix::zeros(d, d);
    for i in 0..n {
        let detuning = mhz_to_angular(model.emitters[i].omega_mhz - drive.laser_mhz);
        h += number(n, i) * C64::new(detuning, 0.0);
        let half_rabi = 0.5 * mhz_to_angular(drive.rabi_mhz[i]);
        if half_rabi != 0.0 {
            h += (&lowers[i] + lowers[i].adjoint()) * C64::new(half_rabi, 0.0);
        }
        for j in 0..n {
            let jij = model.coupling_mhz[(i, j)];
            if i != j && jij != 0.0 {
                h += lowers[i].adjoint() * &lowers[j] * C64::new(mhz_to_angular(jij), 0.0);
            }
        }
    }
    h
}

/// Builds the Lindblad generator for `model` under `drive`.
///
/// Coherent part: detunings omega_i - omega_L on the number operators,
/// exchange J_ij sigma_i^dag sigma_j, and the drive (Omega_i/2)(sigma_i + h.c.).
/// Dissipation: the ZPL channel with the full Gamma_ij matrix, an independent
/// sideband channel of rate (1 - alpha) Gamma0 per emitter, and dephasing
/// with jump operator sqrt(2 gamma_phi) sigma_i^dag sigma_i so that optical
/// coherences decay at gamma_phi on top of the radiative rate.
pub fn build_liouvillian(model: &SystemModel, drive: &DriveParams) -> Result<Liouvillian> {
    let n = model.n_emitters();
    if n > MAX_EMITTERS {
        return Err(Error::Capacity { n, max: MAX_EMITTERS });
    }
    model.validate()?;
    drive.validate(n)?;
    let d = dimension(n);
    let identity = CMatrix::identity(d, d);
    let lowers: Vec<CMatrix> = (0..n).map(|i| lowering(n, i)).collect();
    let mut gen = CMatrix::zeros(d * d, d * d);

    let h = hamiltonian(model, drive);
    add_sandwich(&mut gen, C64::new(0.0, -1.0), &h, &identity);
    add_sandwich(&mut gen, C64::new(0.0, 1.0), &identity, &h);

    for i in 0..n {
        for j in 0..n {
            let g = mhz_to_angular(model.collective_mhz[(i, j)]);
            // Gamma_ij (sigma_j rho sigma_i^dag - 1/2 {sigma_i^dag sigma_j, rho})
            add_dissipator(&mut gen, g, &lowers[j], &lowers[i], &identity);
        }
    }
    let sideband = mhz_to_angular(model.sideband_rate_mhz());
    let dephase = 2.0 * mhz_to_angular(model.dephasing_mhz);
    for i in 0..n {
        add_dissipator(&mut gen, sideband, &lowers[i], &lowers[i], &identity);
        let ni = number(n, i);
        add_dissipator(&mut gen, dephase, &ni, &ni, &identity);
    }
    Ok(Liouvillian { generator: gen, n_emitters: n, frame_mhz: drive.laser_mhz })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemModel;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a.kronecker(b)
    }

    /// Reference generator assembled from explicit Kronecker products.
    fn kron_generator(h: &CMatrix, jumps: &[(f64, CMatrix)]) -> CMatrix {
        let d = h.nrows();
        let id = CMatrix::identity(d, d);
        let i = C64::new(0.0, 1.0);
        let mut gen = (kron(&id, h) - kron(&h.transpose(), &id)) * (-i);
        for (rate, l) in jumps {
            let ldl = l.adjoint() * l;
            let r = C64::new(*rate, 0.0);
            gen += (kron(&l.conjugate(), l) - (kron(&id, &ldl) + kron(&ldl.transpose(), &id)) * C64::new(0.5, 0.0)) * r;
        }
        gen
    }

    #[test]
    fn single_emitter_decay_spectrum() {
        let model = SystemModel::independent(&[1000.0], 33.0, 0.3, 0.0).unwrap();
        let l = build_liouvillian(&model, &DriveParams::uniform(1, 0.0, 1000.0)).unwrap();
        let mut ev = l.eigenvalues().unwrap();
        ev.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
        let gamma = mhz_to_angular(33.0);
        assert!(ev[0].norm() < 1e-12);
        assert!(ev.iter().any(|z| (z.re + gamma).abs() < 1e-12 && z.im.abs() < 1e-12));
        assert!(ev.iter().filter(|z| (z.re + 0.5 * gamma).abs() < 1e-12).count() == 2);
    }

    #[test]
    fn uncoupled_pair_is_tensor_sum() {
        let model = SystemModel::independent(&[1000.0, 1300.0], 33.0, 0.2, 2.0).unwrap();
        let drive = DriveParams { rabi_mhz: vec![10.0, 25.0], laser_mhz: 1100.0 };
        let pair = build_liouvillian(&model, &drive).unwrap();
        let singles: Vec<Liouvillian> = (0..2)
            .map(|k| {
                let m = SystemModel::independent(&[model.emitters[k].omega_mhz], 33.0, 0.2, 2.0).unwrap();
                build_liouvillian(&m, &DriveParams { rabi_mhz: vec![drive.rabi_mhz[k]], laser_mhz: 1100.0 }).unwrap()
            })
            .collect();
        // Column-stacked rho_A (x) rho_B with A most significant: the superoperator
        // index (j, i) = (jA jB, iA iB) maps to a permutation of L_A (+) L_B.
        let d = 4;
        let mut expect = CMatrix::zeros(16, 16);
        let a = singles[0].generator();
        let b = singles[1].generator();
        let idx = |ia: usize, ib: usize, ja: usize, jb: usize| (ja * 2 + jb) * d + (ia * 2 + ib);
        for ia in 0..2 {
            for ib in 0..2 {
                for ja in 0..2 {
                    for jb in 0..2 {
                        for ka in 0..2 {
                            for kb in 0..2 {
                                for la in 0..2 {
                                    for lb in 0..2 {
                                        let mut v = C64::new(0.0, 0.0);
                                        if ib == kb && jb == lb {
                                            v += a[(ja * 2 + ia, la * 2 + ka)];
                                        }
                                        if ia == ka && ja == la {
                                            v += b[(jb * 2 + ib, lb * 2 + kb)];
                                        }
                                        expect[(idx(ia, ib, ja, jb), idx(ka, kb, la, lb))] = v;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let diff = (pair.generator() - expect).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "max difference {diff}");
    }

    #[test]
    fn sparse_assembly_matches_kronecker_reference() {
        let model = SystemModel::dimer(1000.0, 1400.0, 150.0, 33.0, 0.3, 1.5).unwrap();
        let drive = DriveParams { rabi_mhz: vec![20.0, 20.0], laser_mhz: 1200.0 };
        let l = build_liouvillian(&model, &drive).unwrap();
        let h = hamiltonian(&model, &drive);
        let s0 = lowering(2, 0);
        let s1 = lowering(2, 1);
        // The aligned-dipole ZPL matrix has one bright jump (sigma_0 + sigma_1).
        let zpl = mhz_to_angular(model.zpl_rate_mhz());
        let sb = mhz_to_angular(model.sideband_rate_mhz());
        let dp = 2.0 * mhz_to_angular(1.5);
        let jumps = vec![(zpl, &s0 + &s1), (sb, s0.clone()), (sb, s1.clone()), (dp, number(2, 0)), (dp, number(2, 1))];
        let reference = kron_generator(&h, &jumps);
        let diff = (l.generator() - reference).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "max difference {diff}");
    }

    #[test]
    fn capacity_and_model_errors() {
        let model = SystemModel::independent(&[1000.0; 7], 33.0, 0.3, 0.0).unwrap();
        let drive = DriveParams::uniform(7, 1.0, 1000.0);
        assert!(matches!(build_liouvillian(&model, &drive), Err(Error::Capacity { n: 7, .. })));
        let mut m = SystemModel::dimer(1000.0, 1000.0, 10.0, 33.0, 0.3, 0.0).unwrap();
        let drive = DriveParams::uniform(2, 1.0, 1000.0);
        m.collective_mhz = DMatrix::from_row_slice(2, 2, &[9.9, -9.9, -9.9, 9.9]);
        assert!(build_liouvillian(&m, &drive).is_ok());
        m.collective_mhz = DMatrix::from_row_slice(2, 2, &[9.9, 9.95, 9.95, 9.9]);
        assert!(matches!(build_liouvillian(&m, &drive), Err(Error::Model(_))));
        let bad_drive = DriveParams::uniform(3, 1.0, 1000.0);
        assert!(matches!(
            build_liouvillian(&SystemModel::dimer(1e3, 1e3, 1.0, 33.0, 0.3, 0.0).unwrap(), &bad_drive),
            Err(Error::Shape(_))
        ));
    }

    fn random_density(d: usize, seed: &[f64]) -> CMatrix {
        let mut a = CMatrix::zeros(d, d);
        for (k, z) in a.iter_mut().enumerate() {
            *z = C64::new(
                seed[k % seed.len()] * (k as f64 + 1.0).sin(),
                seed[(k + 1) % seed.len()] * (k as f64 * 0.7).cos(),
            );
        }
        let rho = &a * a.adjoint();
        let tr = rho.trace();
        rho / tr
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn generator_preserves_trace(
            delta in -5000.0f64..5000.0, j in -2000.0f64..2000.0, s in 0.01f64..30.0,
            alpha in 0.0f64..1.0, deph in 0.0f64..50.0,
            seed in proptest::collection::vec(-1.0f64..1.0, 5),
        ) {
            let model = SystemModel::dimer(10_000.0 + delta, 10_000.0, j, 33.0, alpha, deph).unwrap();
            let drive = DriveParams::uniform(2, s * 33.0, 10_000.0);
            let l = build_liouvillian(&model, &drive).unwrap();
            let rho = random_density(4, &seed);
            let out = l.apply(&rho);
            prop_assert!(out.trace().norm() < 1e-10);
            let herm = (&out - out.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(herm < 1e-9);
        }
    }

    #[test]
    fn no_growing_modes() {
        let model = SystemModel::dimer(12_600.0, 10_000.0, 1020.0, 33.0, 0.11, 1.0).unwrap();
        let l = build_liouvillian(&model, &DriveParams::uniform(2, 100.0, 11_300.0)).unwrap();
        assert!(l.spectral_abscissa().unwrap() <= 1e-8);
    }
}
