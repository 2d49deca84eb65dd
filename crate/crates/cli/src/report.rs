use serde::Serialize;
use voidmap::io::{Mode, RunConfig};
use voidmap::{Confusion, Metrics, OnlineOrder};

#[derive(Serialize)]
pub struct ParamsEcho {
    pub voxel_size: f64,
    pub d_s: f64,
    pub d_p: u32,
    pub max_range: Option<f64>,
    pub hit_extension: u32,
    pub mode: Mode,
    pub online_order: OnlineOrder,
}

impl From<&RunConfig> for ParamsEcho {
    fn from(cfg: &RunConfig) -> Self {
        let p = &cfg.params;
        Self {
            voxel_size: p.voxel_size,
            d_s: p.noise_margin,
            d_p: p.localization_radius,
            max_range: p.max_range,
            hit_extension: p.effective_hit_extension(),
            mode: cfg.mode,
            online_order: cfg.online_order,
        }
    }
}

#[derive(Serialize, Default, Clone, Copy)]
pub struct Counts {
    /// Points read from the scan files.
    pub points_in: usize,
    /// Finite points that received a label.
    pub retained: usize,
    /// Non-finite points, left unlabeled.
    pub dropped: usize,
    pub r#static: usize,
    pub dynamic: usize,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.points_in += o.points_in;
        self.retained += o.retained;
        self.dropped += o.dropped;
        self.r#static += o.r#static;
        self.dynamic += o.dynamic;
    }
}

#[derive(Serialize)]
pub struct ScanEntry {
    pub scan_id: u64,
    pub integrate_seconds: f64,
    pub new_voids: usize,
    #[serde(flatten)]
    pub counts: Counts,
}

#[derive(Serialize)]
pub struct Timing {
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub total_seconds: f64,
}

impl Timing {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len().max(1) as f64;
        let total: f64 = samples.iter().sum();
        let mean = total / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean_seconds: mean,
            std_seconds: var.sqrt(),
            total_seconds: total,
        }
    }
}

#[derive(Serialize)]
pub struct MetricsReport {
    #[serde(flatten)]
    pub metrics: Metrics,
    pub counts: Confusion,
}

impl From<Confusion> for MetricsReport {
    fn from(counts: Confusion) -> Self {
        Self {
            metrics: voidmap::compute_metrics(&counts),
            counts,
        }
    }
}

#[derive(Serialize)]
pub struct RunReport {
    pub params: ParamsEcho,
    pub scans: Vec<ScanEntry>,
    pub timing: Timing,
    pub totals: Counts,
    pub void_voxels: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
}

#[derive(Serialize)]
pub struct AblationRow {
    pub d_s: f64,
    pub d_p: u32,
    pub voxel_size: f64,
    #[serde(flatten)]
    pub result: MetricsReport,
}
