use rand::Rng;

/// Draws an index with probability proportional to `exp(log_w[i])` using
/// the Gumbel-max trick, so the weights never need normalising.
/// Entries equal to `-inf` are never chosen; returns `None` if all are.
pub fn sample_log_categorical<R: Rng + ?Sized>(log_w: &[f64], rng: &mut R) -> Option<usize> {
    let mut best = None;
    let mut best_key = f64::NEG_INFINITY;
    for (i, &lw) in log_w.iter().enumerate() {
        if lw == f64::NEG_INFINITY || lw.is_nan() {
            continue;
        }
        // u in (0, 1]: -ln(-ln u) is standard Gumbel.
        let u: f64 = 1.0 - rng.random::<f64>();
        let key = lw - (-u.ln()).ln();
        if best.is_none() || key > best_key {
            best = Some(i);
            best_key = key;
        }
    }
    best
}
