use std::fmt::Write as _;

pub const DEFAULT_BIN_WIDTH_MS: f64 = 0.5;
pub const DEFAULT_RANGE_MS: f64 = 50.0;

/// Fixed-width latency histogram with one overflow bin. Summary statistics
/// are computed from the raw samples, not the bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    /// `range / bin_width` regular bins followed by the overflow bin.
    pub bins: Vec<u64>,
    pub total: u64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub p99: f64,
}

/// Nearest-rank percentile of sorted data, `q` in (0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

impl Histogram {
    pub fn from_samples(samples_ms: &[f64]) -> Self {
        Self::with_bins(samples_ms, DEFAULT_BIN_WIDTH_MS, DEFAULT_RANGE_MS)
    }

    pub fn with_bins(samples_ms: &[f64], bin_width: f64, range: f64) -> Self {
        assert!(bin_width > 0.0 && range > 0.0);
        let n_regular = (range / bin_width).round() as usize;
        let mut bins = vec![0u64; n_regular + 1];
        let mut sorted: Vec<f64> = samples_ms.iter().copied().filter(|x| x.is_finite()).collect();
        sorted.sort_by(f64::total_cmp);
        for &x in &sorted {
            let i = ((x.max(0.0)) / bin_width).floor() as usize;
            bins[i.min(n_regular)] += 1;
        }
        let total = sorted.len() as u64;
        if sorted.is_empty() {
            return Self {
                bin_width,
                bins,
                total,
                min: 0.0,
                max: 0.0,
                mean: 0.0,
                median: 0.0,
                p99: 0.0,
            };
        }
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Self {
            bin_width,
            bins,
            total,
            min: sorted[0],
            max: sorted[n - 1],
            mean: sorted.iter().sum::<f64>() / n as f64,
            median,
            p99: percentile(&sorted, 0.99),
        }
    }

    pub fn overflow(&self) -> u64 {
        *self.bins.last().unwrap()
    }

    /// Minimal standalone SVG bar chart.
    pub fn to_svg(&self, title: &str) -> String {
        let (w, h, pad) = (640.0, 320.0, 40.0);
        let plot_w = w - 2.0 * pad;
        let plot_h = h - 2.0 * pad;
        let peak = self.bins.iter().copied().max().unwrap_or(0).max(1) as f64;
        let bar_w = plot_w / self.bins.len() as f64;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{pad}" y="20" font-family="sans-serif" font-size="13">{}</text>"#,
            escape(title)
        );
        for (i, &c) in self.bins.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let bh = plot_h * c as f64 / peak;
            let fill = if i + 1 == self.bins.len() { "#c0392b" } else { "#2e86c1" };
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                pad + i as f64 * bar_w,
                pad + plot_h - bh,
                bar_w.max(0.5),
                bh
            );
        }
        let _ = writeln!(
            s,
            r#"<line x1="{pad}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/>"#,
            y = pad + plot_h,
            x2 = pad + plot_w
        );
        let range = (self.bins.len() - 1) as f64 * self.bin_width;
        for k in 0..=5 {
            let v = range * k as f64 / 5.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{v:.0} ms</text>"#,
                pad + (v / self.bin_width) * bar_w,
                pad + plot_h + 14.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{pad}" y="{:.2}" font-family="sans-serif" font-size="10">n={} mean={:.3} ms median={:.3} ms p99={:.3} ms max={:.3} ms</text>"#,
            h - 6.0,
            self.total,
            self.mean,
            self.median,
            self.p99,
            self.max
        );
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn empty_histogram() {
        let h = Histogram::from_samples(&[]);
        assert_eq!((h.total, h.bins.len()), (0, 101));
    }

    #[test]
    fn binning_and_overflow() {
        let h = Histogram::from_samples(&[0.1, 0.49, 0.5, 49.99, 50.0, 120.0]);
        assert_eq!(h.bins[0], 2);
        assert_eq!(h.bins[1], 1);
        assert_eq!(h.bins[99], 1);
        assert_eq!(h.overflow(), 2);
        assert_eq!((h.min, h.max), (0.1, 120.0));
    }

    #[test]
    fn synthetic_injection_mean() {
        // Known offsets drawn around 4 ms; the analytic mean is the sample
        // mean of the injected values.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut recorder = crate::bench::LatencyRecorder::new();
        let mut injected = 0.0;
        for id in 0..10_000u64 {
            let offset_ns: u64 = rng.gen_range(1_000_000..7_000_000);
            let t0 = id * 10_000_000;
            recorder.record_ingress(id, "lidar", t0).unwrap();
            recorder.record_egress(id, t0 + offset_ns).unwrap();
            injected += offset_ns as f64 / 1e6;
        }
        let log = recorder.finish();
        let ms: Vec<f64> = log.records.iter().map(|r| r.latency_ms()).collect();
        let h = Histogram::from_samples(&ms);
        let analytic = injected / 10_000.0;
        assert!((h.mean - analytic).abs() < h.bin_width);
        assert!((analytic - 4.0).abs() < 0.1);
        // The bin-centre estimate must agree as well.
        let binned: f64 = h
            .bins
            .iter()
            .enumerate()
            .map(|(i, &c)| c as f64 * (i as f64 + 0.5) * h.bin_width)
            .sum::<f64>()
            / h.total as f64;
        assert!((binned - analytic).abs() < h.bin_width);
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let svg = Histogram::from_samples(&[1.0, 2.0, 2.2, 70.0]).to_svg("lidar <1>");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("lidar &lt;1&gt;"));
    }

    proptest! {
        #[test]
        fn invariants(samples in prop::collection::vec(0.0f64..80.0, 1..500)) {
            let h = Histogram::from_samples(&samples);
            prop_assert_eq!(h.bins.iter().sum::<u64>(), h.total);
            prop_assert_eq!(h.total as usize, samples.len());
            prop_assert!(h.min <= h.median && h.median <= h.max);
            prop_assert!(h.median <= h.p99);
            prop_assert!(h.p99 <= h.max);
        }
    }
}
