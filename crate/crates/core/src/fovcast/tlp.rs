//! Truncated linear prediction of head orientation.

use crate::error::{Error, Result};
use crate::trace::{wrap_yaw, Orientation};

/// Least-squares slope and intercept of `ys` against `0..n`.
fn fit_line(ys: &[f64]) -> (f64, f64) {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return (0.0, ys.first().copied().unwrap_or(0.0));
    }
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    (slope, mean_y - slope * mean_x)
}

/// Start index of the longest suffix whose successive differences never
/// change sign. Zero steps are compatible with either direction.
pub fn monotone_suffix_start(ys: &[f64]) -> usize {
    let mut dir = 0.0f64;
    let mut start = ys.len().saturating_sub(1);
    while start > 0 {
        let step = ys[start] - ys[start - 1];
        let sign = if step > 0.0 {
            1.0
        } else if step < 0.0 {
            -1.0
        } else {
            0.0
        };
        if dir == 0.0 {
            dir = sign;
        } else if sign != 0.0 && sign != dir {
            break;
        }
        start -= 1;
    }
    start
}

/// Extrapolates `ys` (one sample per frame) by `ahead` frames using the fit
/// over its monotone suffix, anchored at the last sample index.
fn extrapolate(ys: &[f64], ahead: f64) -> f64 {
    let start = monotone_suffix_start(ys);
    let tail = &ys[start..];
    let (slope, intercept) = fit_line(tail);
    intercept + slope * ((tail.len() - 1) as f64 + ahead)
}

/// Predicts the pose `horizon_s` after the last sample of `history`.
///
/// Only the trailing `window` samples are used (one second of frames in the
/// simulator). Yaw is unwrapped over the window before fitting.
pub fn tlp_predict(history: &[Orientation], window: usize, fps: f64, horizon_s: f64) -> Result<Orientation> {
    let window = window.max(2);
    if history.len() < window {
        return Err(Error::InsufficientHistory {
            needed: window,
            available: history.len(),
        });
    }
    let recent = &history[history.len() - window..];
    let mut yaw = Vec::with_capacity(window);
    let mut acc = recent[0].yaw;
    yaw.push(acc);
    for pair in recent.windows(2) {
        acc += wrap_yaw(pair[1].yaw - pair[0].yaw);
        yaw.push(acc);
    }
    let pitch: Vec<f64> = recent.iter().map(|o| o.pitch).collect();
    let ahead = horizon_s * fps;
    Ok(Orientation::new(
        extrapolate(&yaw, ahead),
        extrapolate(&pitch, ahead),
        recent[window - 1].roll,
    ))
}
