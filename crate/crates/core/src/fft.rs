//! Thin wrapper around rustfft: unnormalized complex transforms applied
//! along each axis of a flat d-dimensional array (x1 fastest).

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

type PlanCache = (FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>);

thread_local! {
    static PLANS: RefCell<PlanCache> = RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        cache
            .entry((n, forward))
            .or_insert_with(|| {
                if forward {
                    planner.plan_fft_forward(n)
                } else {
                    planner.plan_fft_inverse(n)
                }
            })
            .clone()
    })
}

/// Transform every line along `axis` of the n^d array in place.
pub fn transform_axis(data: &mut [Complex64], n: usize, d: usize, axis: usize, forward: bool) {
    debug_assert_eq!(data.len(), n.pow(d as u32));
    let fft = plan(n, forward);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let stride = n.pow(axis as u32);
    if axis == 0 {
        for chunk in data.chunks_exact_mut(n) {
            fft.process_with_scratch(chunk, &mut scratch);
        }
        return;
    }
    let block = stride * n;
    let mut line = vec![Complex64::default(); n];
    let total = data.len();
    let mut base = 0;
    while base < total {
        for off in 0..stride {
            for (t, l) in line.iter_mut().enumerate() {
                *l = data[base + off + t * stride];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (t, l) in line.iter().enumerate() {
                data[base + off + t * stride] = *l;
            }
        }
        base += block;
    }
}

/// Full d-dimensional unnormalized transform.
pub fn transform_all(data: &mut [Complex64], n: usize, d: usize, forward: bool) {
    for axis in 0..d {
        transform_axis(data, n, d, axis, forward);
    }
}
