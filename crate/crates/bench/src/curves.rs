//! Smoothed training curves.

use std::io::Write;

use uwacr::agent::EpisodeLog;

/// Trailing moving average; the first `window - 1` points average what exists.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for (i, x) in xs.iter().enumerate() {
        sum += x;
        if i >= window {
            sum -= xs[i - window];
        }
        out.push(if window == 1 { *x } else { sum / (i + 1).min(window) as f64 });
    }
    out
}

/// `episode,reward,reward_ma,throughput,throughput_ma,success_rate,success_rate_ma,config_sha256`.
pub fn write_training_curves<W: Write>(out: W, log: &[EpisodeLog], window: usize, fingerprint: &str) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["episode", "reward", "reward_ma", "throughput", "throughput_ma", "success_rate", "success_rate_ma", "config_sha256"])?;
    let col = |f: fn(&EpisodeLog) -> f64| -> Vec<f64> { log.iter().map(f).collect() };
    let (r, t, s) = (col(|e| e.reward), col(|e| e.throughput), col(|e| e.success_rate));
    let (rm, tm, sm) = (moving_average(&r, window), moving_average(&t, window), moving_average(&s, window));
    for (i, e) in log.iter().enumerate() {
        w.write_record([
            e.episode.to_string(),
            r[i].to_string(),
            rm[i].to_string(),
            t[i].to_string(),
            tm[i].to_string(),
            s[i].to_string(),
            sm[i].to_string(),
            fingerprint.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
