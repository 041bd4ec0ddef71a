//! Random instances shared by unit tests.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{c, outer, CMat, CVec};
use crate::sinr::{RxDesign, TxDesign};

pub fn random_cvec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    })
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    });
    (&a + a.adjoint()) * c(0.5, 0.0)
}

/// Random PSD matrix of rank `rank`.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    for _ in 0..rank {
        let v = random_cvec(rng, n);
        m += outer(&v, &v);
    }
    m
}

/// Random transmit design with total BS power about `power`.
pub fn random_tx(rng: &mut ChaCha8Rng, nt: usize, l: usize, k: usize, power: f64) -> TxDesign {
    let share = power / (2.0 * nt as f64 * (l + 1) as f64);
    TxDesign {
        dl_beams: (0..l).map(|_| random_cvec(rng, nt) * c(share.sqrt(), 0.0)).collect(),
        radar_cov: random_psd(rng, nt, 2) * c(share / 2.0, 0.0),
        ul_powers: (0..k).map(|_| rng.gen_range(0.0..power)).collect(),
    }
}

pub fn random_rx(rng: &mut ChaCha8Rng, nr: usize, k: usize) -> RxDesign {
    RxDesign { radar_rx: random_cvec(rng, nr), ul_rx: (0..k).map(|_| random_cvec(rng, nr)).collect() }
}
