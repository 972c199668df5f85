//! Projection of corrected probabilities onto valid CDFs, and blending.

use crate::cdf::{CdfForecast, Provenance};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::griddata::Variable;

/// Pool-adjacent-violators with unit weights: the L2 projection of `v` onto
/// nondecreasing sequences, in place.
pub fn pava(v: &mut [f64]) {
    // blocks as (sum, count), merged while the means decrease
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(v.len());
    for &x in v.iter() {
        blocks.push((x, 1));
        while blocks.len() > 1 {
            let (s2, n2) = blocks[blocks.len() - 1];
            let (s1, n1) = blocks[blocks.len() - 2];
            if s1 / n1 as f64 > s2 / n2 as f64 {
                blocks.pop();
                *blocks.last_mut().unwrap() = (s1 + s2, n1 + n2);
            } else {
                break;
            }
        }
    }
    let mut i = 0;
    for (s, n) in blocks {
        let mean = s / n as f64;
        v[i..i + n].iter_mut().for_each(|x| *x = mean);
        i += n;
    }
}

/// Projects one cell's `K` cumulative probabilities: PAVA on bins `1..K-1`,
/// clip to `[0, 1]`, and `F(K) = 1`. NaN rows are left untouched.
pub fn project_bins(f: &mut [f64]) {
    if f.is_empty() || f.iter().any(|x| x.is_nan()) {
        return;
    }
    let k = f.len();
    let free = &mut f[..k - 1];
    pava(free);
    free.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
    f[k - 1] = 1.0;
}

pub fn project_to_cdf(raw: &CdfForecast) -> CdfForecast {
    project_to_cdf_with(Exec::default(), raw)
}

pub fn project_to_cdf_with(exec: Exec, raw: &CdfForecast) -> CdfForecast {
    let mut out = raw.clone();
    let bins = raw.bins();
    let row_len = raw.grid().n_cells() * bins;
    exec.fill_chunks(out.values_mut(), row_len, |_, row| {
        row.chunks_mut(bins).for_each(project_bins);
    });
    out
}

/// Weighted elementwise blend `wa * a + (1 - wa) * b`.
fn blend(a: &CdfForecast, b: &CdfForecast, wa: f64, provenance: Provenance) -> Result<CdfForecast> {
    a.check_aligned(b)?;
    if a.variable() != b.variable() {
        return Err(Error::Misaligned(format!(
            "cannot blend {} with {}",
            a.variable(),
            b.variable()
        )));
    }
    let values = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| {
            if wa == 1.0 {
                *x
            } else if wa == 0.0 {
                *y
            } else {
                wa * x + (1.0 - wa) * y
            }
        })
        .collect();
    a.with_values(provenance, values)
}

/// The PBC forecast: the mean of two projected corrections.
pub fn pbc_combine(a: &CdfForecast, b: &CdfForecast) -> Result<CdfForecast> {
    blend(a, b, 0.5, Provenance::Pbc)
}

/// Weight given to the first (ECMWF-based) input.
pub fn microduet_weight(variable: Variable) -> f64 {
    match variable {
        Variable::Temperature => 0.5,
        Variable::Precipitation => 1.0,
        Variable::Mslp => 0.0,
    }
}

/// Variable-dependent blend of PBC-corrected ECMWF and PoET forecasts.
pub fn microduet(pbc_ecmwf: &CdfForecast, pbc_poet: &CdfForecast, variable: Variable) -> Result<CdfForecast> {
    if pbc_ecmwf.variable() != variable {
        return Err(Error::Misaligned(format!(
            "inputs hold {}, blend requested for {variable}",
            pbc_ecmwf.variable()
        )));
    }
    blend(pbc_ecmwf, pbc_poet, microduet_weight(variable), Provenance::Custom)
}

/// True if `f` is nondecreasing, within `[0, 1]`, and ends at 1.
pub fn is_valid_cdf(f: &[f64]) -> bool {
    f.windows(2).all(|w| w[0] <= w[1]) && f.iter().all(|x| (0.0..=1.0).contains(x)) && f.last() == Some(&1.0)
}
