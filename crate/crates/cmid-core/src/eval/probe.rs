use ndarray::Array2;

use crate::envs::Variant;
use crate::{Error, Result};

/// Ground-truth labels for one observation.
#[derive(Debug, Clone, Copy)]
pub struct FactorLabel {
    pub position: f64,
    pub variant: Variant,
    /// 0 = blue, 1 = green (or any small categorical coding).
    pub colour_class: usize,
}

/// Latent-feature / generative-factor association matrix.
///
/// Continuous factors use absolute Pearson correlation; categorical factors
/// use plug-in mutual information over 8 equal-mass latent bins, normalised
/// by the factor entropy so both kinds live on a comparable [0, 1] scale.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ProbeReport {
    /// `[latent_dim][factor]` association strengths.
    pub association: Vec<Vec<f64>>,
    pub factor_names: Vec<String>,
    /// Mean over factors of the top feature's share of the factor's total
    /// association; 1 when each factor loads on a single feature.
    pub modularity: f64,
    /// Latent dimensions with (numerically) no variation.
    pub constant_latents: Vec<usize>,
}

impl ProbeReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("latent");
        for f in &self.factor_names {
            out.push(',');
            out.push_str(f);
        }
        out.push('\n');
        for (i, row) in self.association.iter().enumerate() {
            out.push_str(&i.to_string());
            for v in row {
                out.push(',');
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        out
    }
}

const BINS: usize = 8;

fn pearson_abs(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 1e-24 || vb <= 1e-24 {
        return 0.0;
    }
    (cov / (va * vb).sqrt()).abs()
}

/// Equal-mass binning: rank-order the values and split into BINS groups.
fn equal_mass_bins(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap().then(i.cmp(&j)));
    let mut bins = vec![0usize; values.len()];
    for (rank, &idx) in order.iter().enumerate() {
        bins[idx] = rank * BINS / values.len();
    }
    bins
}

/// Plug-in mutual information between binned latents and a categorical
/// factor, normalised by the factor entropy.
fn normalised_mi(latent: &[f64], classes: &[usize], class_count: usize) -> f64 {
    let n = latent.len();
    let bins = equal_mass_bins(latent);
    let mut joint = vec![vec![0.0; class_count]; BINS];
    let mut pb = vec![0.0; BINS];
    let mut pc = vec![0.0; class_count];
    for i in 0..n {
        joint[bins[i]][classes[i]] += 1.0;
        pb[bins[i]] += 1.0;
        pc[classes[i]] += 1.0;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for b in 0..BINS {
        for c in 0..class_count {
            let pj = joint[b][c] / nf;
            if pj > 0.0 {
                mi += pj * (pj / (pb[b] / nf * pc[c] / nf)).ln();
            }
        }
    }
    let h: f64 = pc
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| {
            let p = v / nf;
            -p * p.ln()
        })
        .sum();
    if h <= 1e-12 {
        0.0
    } else {
        (mi / h).clamp(0.0, 1.0)
    }
}

/// Associates each latent dimension with each ground-truth factor
/// (position, variant, colour) and scores modularity.
///
/// Velocity is not probed: it is unobservable from a single frame.
pub fn latent_factor_probe(latents: &Array2<f64>, labels: &[FactorLabel]) -> Result<ProbeReport> {
    let n = latents.nrows();
    if n != labels.len() {
        return Err(Error::Config("latents and labels must align".into()));
    }
    if n < 32 {
        return Err(Error::Config(format!("too few samples for the probe: {n}")));
    }
    let dims = latents.ncols();
    let positions: Vec<f64> = labels.iter().map(|l| l.position).collect();
    let variants: Vec<usize> = labels.iter().map(|l| usize::from(l.variant == Variant::B)).collect();
    let colours: Vec<usize> = labels.iter().map(|l| l.colour_class).collect();
    let colour_count = colours.iter().max().copied().unwrap_or(0) + 1;

    let mut association = vec![vec![0.0; 3]; dims];
    let mut constant_latents = Vec::new();
    for d in 0..dims {
        let col: Vec<f64> = latents.column(d).to_vec();
        let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if (hi - lo).abs() < 1e-12 {
            constant_latents.push(d);
            continue;
        }
        association[d][0] = pearson_abs(&col, &positions);
        association[d][1] = normalised_mi(&col, &variants, 2);
        association[d][2] = normalised_mi(&col, &colours, colour_count.max(2));
    }

    let mut shares = Vec::new();
    for f in 0..3 {
        let total: f64 = association.iter().map(|row| row[f]).sum();
        if total > 1e-9 {
            let top = association.iter().map(|row| row[f]).fold(f64::MIN, f64::max);
            shares.push(top / total);
        }
    }
    let modularity = if shares.is_empty() {
        0.0
    } else {
        shares.iter().sum::<f64>() / shares.len() as f64
    };

    Ok(ProbeReport {
        association,
        factor_names: vec!["position".into(), "variant".into(), "colour".into()],
        modularity,
        constant_latents,
    })
}
