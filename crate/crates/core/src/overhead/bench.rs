use std::hint::black_box;
use std::time::Instant;

use serde::Serialize;

use super::{CostModel, OverheadError};
use crate::crypto::{hash, secp160k1, sym_decrypt, sym_encrypt, KeyPair, SymKey};
use crate::rng::rng_from;

/// The reference cost model next to medians measured on this machine.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub iterations: usize,
    pub reference: CostModel,
    pub measured: CostModel,
}

fn median_ms(iterations: usize, mut f: impl FnMut()) -> f64 {
    let mut t: Vec<f64> = (0..iterations)
        .map(|_| {
            let start = Instant::now();
            f();
            start.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    t.sort_by(f64::total_cmp);
    let mid = t.len() / 2;
    if t.len() % 2 == 1 {
        t[mid]
    } else {
        (t[mid - 1] + t[mid]) / 2.0
    }
}

/// Times one call of each primitive `iterations` times on a single thread.
pub fn bench_primitives(iterations: usize) -> Result<BenchReport, OverheadError> {
    if iterations == 0 {
        return Err(OverheadError::Input("iterations must be positive".into()));
    }
    let curve = secp160k1();
    let mut rng = rng_from(0xbe7c, &[]);
    let a = KeyPair::generate(&mut rng);
    let b = KeyPair::generate(&mut rng);
    let key = SymKey([7u8; 32]);
    let pt = [3u8; 20];
    let nonce = [5u8; 12];
    let ct = sym_encrypt(&key, &pt, &nonce);
    let msg = [0xabu8; 64];
    let measured = CostModel {
        t_ecc_mul: median_ms(iterations, || {
            black_box(curve.mul(black_box(a.secret()), black_box(&b.pk)).ok());
        }),
        t_ecc_add: median_ms(iterations, || {
            black_box(curve.add(black_box(&a.pk), black_box(&b.pk)).ok());
        }),
        t_h: median_ms(iterations, || {
            black_box(hash(black_box(&msg)));
        }),
        t_enc: median_ms(iterations, || {
            black_box(sym_encrypt(black_box(&key), black_box(&pt), &nonce));
        }),
        t_dec: median_ms(iterations, || {
            black_box(sym_decrypt(black_box(&key), black_box(&ct)));
        }),
    };
    Ok(BenchReport {
        iterations,
        reference: CostModel::default(),
        measured,
    })
}
