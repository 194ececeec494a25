use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::synth::SyntheticSpec;
use crate::cloud_io::{normalize_unit_cube, read_ply, PointCloud};
use crate::error::{Error, Result};
use crate::metrics::{metric_report, MetricOptions, MetricReport};
use crate::resample::{upsample_cloud, UpsampleConfig};

/// Benchmark manifest: reference clouds, scales and an optional sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(rename = "cloud")]
    pub clouds: Vec<ManifestCloud>,
    #[serde(default)]
    pub sweep: Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestCloud {
    pub name: String,
    /// PLY file, relative paths resolved against the manifest directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SyntheticSpec>,
    pub scales: Vec<f64>,
}

/// Parameter lists; an empty list keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    pub gamma: Vec<f64>,
    pub rho: Vec<f64>,
    pub rho_f: Vec<f64>,
    pub kmax: Vec<usize>,
    pub max_iter: Vec<usize>,
}

impl Manifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for c in &m.clouds {
            if c.path.is_some() == c.synth.is_some() {
                return Err(Error::Config(format!(
                    "cloud `{}` needs exactly one of `path` or `synth`",
                    c.name
                )));
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

impl Sweep {
    /// Cartesian product of the sweep lists applied to `base`, in the order
    /// gamma, rho, rho_f, kmax, max_iter (last varies fastest).
    pub fn expand(&self, base: &UpsampleConfig) -> Vec<UpsampleConfig> {
        fn or_base<T: Copy>(list: &[T], base: T) -> Vec<T> {
            if list.is_empty() {
                vec![base]
            } else {
                list.to_vec()
            }
        }
        let m = &base.model;
        let mut out = Vec::new();
        for &gamma in &or_base(&self.gamma, m.gamma) {
            for &rho in &or_base(&self.rho, m.rho) {
                for &rho_f in &or_base(&self.rho_f, m.rho_f) {
                    for &k_max in &or_base(&self.kmax, m.k_max) {
                        for &max_iter in &or_base(&self.max_iter, m.max_iter) {
                            let mut cfg = *base;
                            cfg.model.gamma = gamma;
                            cfg.model.rho = rho;
                            cfg.model.rho_f = rho_f;
                            cfg.model.k_max = k_max;
                            cfg.model.max_iter = max_iter;
                            out.push(cfg);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Every `scale`-th point by index: `floor(i·n/m)` for `m = round(n/scale)`.
pub fn stride_downsample(cloud: &PointCloud, scale: f64) -> PointCloud {
    let n = cloud.len();
    let m = ((n as f64 / scale).round() as usize).clamp(1, n.max(1));
    let pick = |i: usize| (i as u128 * n as u128 / m as u128) as usize;
    PointCloud {
        points: (0..m).map(|i| cloud.points[pick(i)]).collect(),
        normals: cloud
            .normals
            .as_ref()
            .map(|ns| (0..m).map(|i| ns[pick(i)]).collect()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub cloud: String,
    pub scale: f64,
    pub gamma: f64,
    pub rho: f64,
    pub rho_f: f64,
    pub kmax: usize,
    pub max_iter: usize,
    pub n_reference: usize,
    pub n_input: usize,
    pub n_output: usize,
    pub shortfall: usize,
    pub metrics: Option<MetricReport>,
    pub runtime_s: f64,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
struct CsvRow<'a> {
    cloud: &'a str,
    scale: f64,
    gamma: f64,
    rho: f64,
    rho_f: f64,
    kmax: usize,
    max_iter: usize,
    n_input: usize,
    n_output: usize,
    p2point: Option<f64>,
    p2plane: Option<f64>,
    runtime_s: f64,
    status: &'a str,
}

fn load_reference(cloud: &ManifestCloud, base_dir: &Path) -> Result<PointCloud> {
    match (&cloud.path, &cloud.synth) {
        (Some(p), _) => read_ply(base_dir.join(p)),
        (_, Some(spec)) => spec.generate(),
        _ => unreachable!("validated when the manifest was parsed"),
    }
}

fn run_row(
    name: &str,
    reference: &PointCloud,
    scale: f64,
    cfg: &UpsampleConfig,
    opts: &MetricOptions,
) -> Result<BenchRow> {
    let mut row = BenchRow {
        cloud: name.to_string(),
        scale,
        gamma: cfg.model.gamma,
        rho: cfg.model.rho,
        rho_f: cfg.model.rho_f,
        kmax: cfg.model.k_max,
        max_iter: cfg.model.max_iter,
        n_reference: reference.len(),
        n_input: 0,
        n_output: 0,
        shortfall: 0,
        metrics: None,
        runtime_s: 0.0,
        status: String::new(),
    };
    let (reference, _) = normalize_unit_cube(reference)?;
    let sparse = stride_downsample(&reference, scale);
    row.n_input = sparse.len();
    // the strided subset may have a smaller extent
    let (sparse_n, t) = normalize_unit_cube(&PointCloud::new(sparse.points))?;
    let cfg = UpsampleConfig { scale, ..*cfg };
    let start = Instant::now();
    let result = upsample_cloud(&sparse_n, &cfg)?;
    row.runtime_s = start.elapsed().as_secs_f64();
    row.n_output = result.cloud.len();
    row.shortfall = result.report.shortfall;
    let output = crate::cloud_io::denormalize(&result.cloud, &t);
    row.metrics = Some(metric_report(&output, &reference, opts)?);
    Ok(row)
}

/// Runs every (cloud, scale, sweep point) combination. Failures are recorded
/// in the row status and do not stop the run.
pub fn run_bench(
    manifest: &Manifest,
    base_dir: &Path,
    base: &UpsampleConfig,
    opts: &MetricOptions,
) -> Vec<BenchRow> {
    let configs = manifest.sweep.expand(base);
    let mut rows = Vec::new();
    for cloud in &manifest.clouds {
        let reference = load_reference(cloud, base_dir);
        for &scale in &cloud.scales {
            for cfg in &configs {
                let row = match &reference {
                    Ok(r) => run_row(&cloud.name, r, scale, cfg, opts),
                    Err(e) => Err(Error::Config(e.to_string())),
                };
                rows.push(match row {
                    Ok(mut r) => {
                        r.status = "ok".into();
                        r
                    }
                    Err(e) => {
                        log::warn!("bench row {} x{scale} failed: {e}", cloud.name);
                        BenchRow {
                            cloud: cloud.name.clone(),
                            scale,
                            gamma: cfg.model.gamma,
                            rho: cfg.model.rho,
                            rho_f: cfg.model.rho_f,
                            kmax: cfg.model.k_max,
                            max_iter: cfg.model.max_iter,
                            n_reference: reference.as_ref().map_or(0, |r| r.len()),
                            n_input: 0,
                            n_output: 0,
                            shortfall: 0,
                            metrics: None,
                            runtime_s: 0.0,
                            status: format!("error: {e}"),
                        }
                    }
                });
            }
        }
    }
    rows
}

/// CSV table with symmetric metric values, one row per bench row.
pub fn write_csv<W: std::io::Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CsvRow {
            cloud: &r.cloud,
            scale: r.scale,
            gamma: r.gamma,
            rho: r.rho,
            rho_f: r.rho_f,
            kmax: r.kmax,
            max_iter: r.max_iter,
            n_input: r.n_input,
            n_output: r.n_output,
            p2point: r.metrics.as_ref().map(|m| m.p2point_sym),
            p2plane: r.metrics.as_ref().map(|m| m.p2plane_sym),
            runtime_s: r.runtime_s,
            status: &r.status,
        })
        .map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::synth::Shape;

    #[test]
    fn stride_arithmetic() {
        let pts = (0..4000)
            .map(|i| nalgebra::Point3::new(i as f64, 0.0, 0.0))
            .collect();
        let down = stride_downsample(&PointCloud::new(pts), 4.0);
        assert_eq!(down.len(), 1000);
        assert_eq!(down.points[1].x, 4.0);
        assert_eq!(down.points[999].x, 3996.0);

        let pts = (0..10)
            .map(|i| nalgebra::Point3::new(i as f64, 0.0, 0.0))
            .collect();
        let down = stride_downsample(&PointCloud::new(pts), 3.0);
        let xs: Vec<f64> = down.points.iter().map(|p| p.x).collect();
        assert_eq!(xs, vec![0.0, 3.0, 6.0]);
    }

    #[test]
    fn sweep_is_cartesian() {
        let base = UpsampleConfig::default();
        assert_eq!(Sweep::default().expand(&base), vec![base]);
        let sweep = Sweep {
            gamma: vec![0.25, 0.5, 1.0],
            kmax: vec![4, 8],
            ..Default::default()
        };
        let cfgs = sweep.expand(&base);
        assert_eq!(cfgs.len(), 6);
        assert_eq!((cfgs[1].model.gamma, cfgs[1].model.k_max), (0.25, 8));
        assert!(cfgs.iter().all(|c| c.model.rho == base.model.rho));
    }

    #[test]
    fn manifest_parsing() {
        let text = r#"
            [[cloud]]
            name = "plane"
            synth = { shape = "plane", n_points = 500, seed = 1 }
            scales = [2, 4]

            [[cloud]]
            name = "scan"
            path = "scan.ply"
            scales = [2]

            [sweep]
            gamma = [0.5, 1.0]
        "#;
        let m = Manifest::from_toml(text).unwrap();
        assert_eq!(m.clouds.len(), 2);
        assert_eq!(m.clouds[0].synth.unwrap().shape, Shape::Plane);
        assert_eq!(m.sweep.gamma, vec![0.5, 1.0]);

        let both = "[[cloud]]\nname = \"x\"\npath = \"a.ply\"\nsynth = { shape = \"plane\" }\nscales = [2]";
        assert!(Manifest::from_toml(both).is_err());
        assert!(Manifest::from_toml("[[cloud]]\nname = \"x\"\nscales = [2]\nbogus = 1").is_err());
    }

    #[test]
    fn rows_and_failures() {
        let text = r#"
            [[cloud]]
            name = "a"
            synth = { shape = "plane", n_points = 800 }
            scales = [2, 4]

            [[cloud]]
            name = "missing"
            path = "does/not/exist.ply"
            scales = [2]
        "#;
        let m = Manifest::from_toml(text).unwrap();
        let rows = run_bench(
            &m,
            Path::new("."),
            &UpsampleConfig::default(),
            &MetricOptions::default(),
        );
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].status, "ok");
        assert_eq!(rows[0].n_input, 400);
        assert_eq!(rows[1].n_input, 200);
        assert!(rows[2].status.starts_with("error"));
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with(
            "cloud,scale,gamma,rho,rho_f,kmax,max_iter,n_input,n_output,p2point,p2plane,runtime_s,status\n"
        ));
    }
}
