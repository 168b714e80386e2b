use super::{DetectionSignal, DetectorConfig, RegionReport};

/// Persistence check over the last `history_len` reports (oldest first, the
/// current report last).
///
/// Nonzero only when the history is full, the current argmax region won in at
/// least `persistence_min` of those reports, the current maximum reaches the
/// threshold, and the current maximum is unique.
pub fn decide(history: &[RegionReport], cfg: &DetectorConfig) -> DetectionSignal {
    let Some(current) = history.last() else {
        return DetectionSignal::NONE;
    };
    let silent = DetectionSignal {
        value: 0,
        region: None,
        stat_at_max: current.max_stat(),
    };
    if history.len() < cfg.history_len {
        return silent;
    }
    let window = &history[history.len() - cfg.history_len..];
    let wins = window
        .iter()
        .filter(|r| r.argmax_region == current.argmax_region)
        .count();
    if wins < cfg.persistence_min
        || current.max_stat() < cfg.effective_threshold()
        || !current.argmax_unique
    {
        return silent;
    }
    DetectionSignal {
        value: region_sign(current),
        region: Some(current.argmax_region),
        stat_at_max: current.max_stat(),
    }
}

/// Regions 0-1 map to -1 (left), 3-4 to +1 (right). The center region takes
/// the side of its larger neighbor, ties going right.
pub fn region_sign(report: &RegionReport) -> i8 {
    match report.argmax_region {
        0 | 1 => -1,
        3 | 4 => 1,
        _ => {
            if report.region_stat[1] > report.region_stat[3] {
                -1
            } else {
                1
            }
        }
    }
}
