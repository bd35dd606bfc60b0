use super::StreamError;

/// Microseconds per millisecond; all simulator times are integer µs.
pub const US_PER_MS: u64 = 1_000;
pub const US_PER_S: u64 = 1_000_000;

/// Streaming and protocol parameters. Rates are in Kbps and sizes in Kb.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig {
    pub stream_rate_kbps: u32,
    pub block_size_kb: u32,
    pub buffer_seconds: u32,
    pub similar_view_size: usize,
    pub download_connections: usize,
    pub connection_kbps: u32,
    pub window_blocks: usize,
    pub in_order_probability: f64,
    /// Upload classes `1..=upload_classes`; class `i` has `2i` slots.
    pub upload_classes: u32,
    pub source_slots: usize,
    /// Peer-sampling batch size per refresh.
    pub sample_size: usize,
    pub refresh_ms: u64,
    /// A parent that delivers nothing for this long is dropped.
    pub silent_parent_ms: u64,
    /// How long a dropped parent is not bid on again.
    pub shun_ms: u64,
    pub step_ms: u64,
    pub latency_min_ms: u64,
    pub latency_max_ms: u64,
    pub continuity_window_s: u64,
    pub continuity_threshold: f64,
    /// Fraction of live nodes that must exceed the continuity threshold.
    pub target_fraction: f64,
    /// How long the target fraction must hold to count as reached.
    pub target_hold_ms: u64,
    pub sample_interval_ms: u64,
    /// Check capacity and conservation invariants after every step.
    pub check_invariants: bool,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            stream_rate_kbps: 512,
            block_size_kb: 16,
            buffer_seconds: 5,
            similar_view_size: 15,
            download_connections: 8,
            connection_kbps: 64,
            window_blocks: 32,
            in_order_probability: 0.9,
            upload_classes: 10,
            source_slots: 40,
            sample_size: 15,
            refresh_ms: 1_000,
            silent_parent_ms: 2_000,
            shun_ms: 5_000,
            step_ms: 10,
            latency_min_ms: 10,
            latency_max_ms: 200,
            continuity_window_s: 10,
            continuity_threshold: 0.99,
            target_fraction: 0.95,
            target_hold_ms: 1_000,
            sample_interval_ms: 100,
            check_invariants: false,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<(), StreamError> {
        let bad = |msg: String| Err(StreamError::Config(msg));
        if self.block_size_kb == 0 || !self.stream_rate_kbps.is_multiple_of(self.block_size_kb) {
            return bad(format!(
                "stream rate {} Kbps is not a whole number of {} Kb blocks per second",
                self.stream_rate_kbps, self.block_size_kb
            ));
        }
        if self.stream_rate_kbps == 0 || self.connection_kbps == 0 {
            return bad("rates must be positive".into());
        }
        if self.window_blocks < 2 || !self.window_blocks.is_multiple_of(2) {
            return bad(format!(
                "window of {} blocks does not split into in-order and rare halves",
                self.window_blocks
            ));
        }
        if !(0.0..=1.0).contains(&self.in_order_probability) {
            return bad(format!(
                "in-order probability {} outside [0, 1]",
                self.in_order_probability
            ));
        }
        if self.step_ms == 0 || self.refresh_ms == 0 || self.sample_interval_ms == 0 {
            return bad("step, refresh and sample intervals must be positive".into());
        }
        if self.latency_min_ms > self.latency_max_ms {
            return bad("latency range is empty".into());
        }
        if self.upload_classes == 0 || self.download_connections == 0 || self.source_slots == 0 {
            return bad("classes, download connections and source slots must be positive".into());
        }
        if self.similar_view_size == 0 || self.sample_size == 0 {
            return bad("view and sample sizes must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.continuity_threshold)
            || !(0.0..=1.0).contains(&self.target_fraction)
        {
            return bad("thresholds must lie in [0, 1]".into());
        }
        if self.continuity_window_s == 0 {
            return bad("continuity window must be positive".into());
        }
        Ok(())
    }

    pub fn blocks_per_second(&self) -> u32 {
        self.stream_rate_kbps / self.block_size_kb
    }

    /// Time between consecutive blocks at the source.
    pub fn block_period_us(&self) -> u64 {
        US_PER_S / self.blocks_per_second() as u64
    }

    /// Serialisation time of one block over one upload connection.
    pub fn transfer_us(&self) -> u64 {
        self.block_size_kb as u64 * US_PER_S / self.connection_kbps as u64
    }

    pub fn step_us(&self) -> u64 {
        self.step_ms * US_PER_MS
    }

    pub fn buffer_blocks(&self) -> u64 {
        self.buffer_seconds as u64 * self.blocks_per_second() as u64
    }

    pub fn in_order_blocks(&self) -> usize {
        self.window_blocks / 2
    }

    /// Utility level of the source, one above the top upload class.
    pub fn source_level(&self) -> u32 {
        self.upload_classes + 1
    }
}
