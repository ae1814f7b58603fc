//! Data ingestion and synthetic generators: MNIST IDX files, the crop and
//! pixelate views of a digit, and the "Mickey" point cloud.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{McaError, Result};
use crate::mca::normalize;
use crate::numlin::{Matrix, DEFAULT_RANK_TOL};
use crate::rng::{random_rotation, seeded};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

pub const SIDE: usize = 28;
pub const HALF: usize = 14;
const CROP_OFFSET: usize = 7;

/// A stack of 8-bit grayscale images with digit labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSet {
    pub rows: usize,
    pub cols: usize,
    /// Row-major pixels, image after image.
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl ImageSet {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        let images = pixels.len() / (rows * cols).max(1);
        if images * rows * cols != pixels.len() || images != labels.len() {
            return Err(McaError::CountMismatch {
                images,
                labels: labels.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, index: usize) -> &[u8] {
        let size = self.rows * self.cols;
        &self.pixels[index * size..(index + 1) * size]
    }

    /// Pixel values scaled to `[0, 1]`.
    pub fn image_unit(&self, index: usize) -> Vec<f64> {
        self.image(index)
            .iter()
            .map(|&p| p as f64 / 255.0)
            .collect()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        let size = self.rows * self.cols;
        Self {
            rows: self.rows,
            cols: self.cols,
            pixels: self.pixels[range.start * size..range.end * size].to_vec(),
            labels: self.labels[range].to_vec(),
        }
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => McaError::MissingData(path.to_path_buf()),
        _ => McaError::Io(e),
    })?;
    let mut bytes = Vec::new();
    if path.extension().is_some_and(|ext| ext == "gz") {
        GzDecoder::new(BufReader::new(file)).read_to_end(&mut bytes)?;
    } else {
        BufReader::new(file).read_to_end(&mut bytes)?;
    }
    Ok(bytes)
}

fn be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let word = bytes
        .get(offset..offset + 4)
        .ok_or_else(|| McaError::Truncated {
            path: path.to_path_buf(),
            needed: offset + 4,
            available: bytes.len(),
        })?;
    Ok(u32::from_be_bytes(word.try_into().expect("4 bytes")))
}

fn check_magic(bytes: &[u8], expected: u32, path: &Path) -> Result<()> {
    let found = be_u32(bytes, 0, path)?;
    if found != expected {
        return Err(McaError::BadMagic {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    Ok(())
}

fn body(bytes: &[u8], header: usize, len: usize, path: &Path) -> Result<Vec<u8>> {
    let needed = header + len;
    if bytes.len() < needed {
        return Err(McaError::Truncated {
            path: path.to_path_buf(),
            needed,
            available: bytes.len(),
        });
    }
    Ok(bytes[header..needed].to_vec())
}

/// Parses an IDX image file (`.gz` is decompressed transparently).
/// Returns `(rows, cols, pixels)`.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = read_all(path)?;
    check_magic(&bytes, IDX_IMAGES_MAGIC, path)?;
    let count = be_u32(&bytes, 4, path)? as usize;
    let rows = be_u32(&bytes, 8, path)? as usize;
    let cols = be_u32(&bytes, 12, path)? as usize;
    let pixels = body(&bytes, 16, count * rows * cols, path)?;
    Ok((rows, cols, pixels))
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_all(path)?;
    check_magic(&bytes, IDX_LABELS_MAGIC, path)?;
    let count = be_u32(&bytes, 4, path)? as usize;
    body(&bytes, 8, count, path)
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<ImageSet> {
    let (rows, cols, pixels) = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    let images = pixels.len() / (rows * cols).max(1);
    if images != labels.len() {
        return Err(McaError::CountMismatch {
            images,
            labels: labels.len(),
        });
    }
    ImageSet::new(rows, cols, pixels, labels)
}

pub fn encode_idx_images(set: &ImageSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + set.pixels.len());
    for word in [
        IDX_IMAGES_MAGIC,
        set.len() as u32,
        set.rows as u32,
        set.cols as u32,
    ] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    out.extend_from_slice(&set.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_idx(set: &ImageSet, images_path: &Path, labels_path: &Path) -> Result<()> {
    File::create(images_path)?.write_all(&encode_idx_images(set))?;
    File::create(labels_path)?.write_all(&encode_idx_labels(&set.labels))?;
    Ok(())
}

/// The standard MNIST train and test splits.
#[derive(Debug, Clone)]
pub struct Mnist {
    pub train: ImageSet,
    pub test: ImageSet,
}

fn locate(dir: &Path, stem: &str) -> PathBuf {
    let plain = dir.join(stem);
    if plain.exists() {
        return plain;
    }
    let gz = dir.join(format!("{stem}.gz"));
    if gz.exists() {
        gz
    } else {
        plain
    }
}

impl Mnist {
    /// Loads `{train,t10k}-{images-idx3,labels-idx1}-ubyte[.gz]` from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let train = load_idx(
            &locate(dir, "train-images-idx3-ubyte"),
            &locate(dir, "train-labels-idx1-ubyte"),
        )?;
        let test = load_idx(
            &locate(dir, "t10k-images-idx3-ubyte"),
            &locate(dir, "t10k-labels-idx1-ubyte"),
        )?;
        for set in [&train, &test] {
            if set.rows != SIDE || set.cols != SIDE {
                return Err(McaError::InvalidArgument(format!(
                    "expected {SIDE}x{SIDE} MNIST images, found {}x{}",
                    set.rows, set.cols
                )));
            }
        }
        Ok(Self { train, test })
    }
}

/// The middle 14×14 window (rows and columns 7..21) of a 28×28 image.
pub fn crop14(img: &[f64]) -> Vec<f64> {
    assert_eq!(img.len(), SIDE * SIDE, "crop14 expects a 28x28 image");
    let mut out = Vec::with_capacity(HALF * HALF);
    for i in 0..HALF {
        let row = (i + CROP_OFFSET) * SIDE;
        out.extend_from_slice(&img[row + CROP_OFFSET..row + CROP_OFFSET + HALF]);
    }
    out
}

/// 2×2 block averages of a 28×28 image.
pub fn pixelate14(img: &[f64]) -> Vec<f64> {
    assert_eq!(img.len(), SIDE * SIDE, "pixelate14 expects a 28x28 image");
    let mut out = Vec::with_capacity(HALF * HALF);
    for i in 0..HALF {
        for j in 0..HALF {
            let (r, c) = (2 * i, 2 * j);
            let sum = img[r * SIDE + c]
                + img[r * SIDE + c + 1]
                + img[(r + 1) * SIDE + c]
                + img[(r + 1) * SIDE + c + 1];
            out.push(sum / 4.0);
        }
    }
    out
}

/// How a 28×28 digit is presented to a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    Full,
    Crop,
    Pixelate,
}

impl View {
    pub fn dim(self) -> usize {
        match self {
            View::Full => SIDE * SIDE,
            View::Crop | View::Pixelate => HALF * HALF,
        }
    }

    pub fn apply(self, img: &[f64]) -> Vec<f64> {
        match self {
            View::Full => img.to_vec(),
            View::Crop => crop14(img),
            View::Pixelate => pixelate14(img),
        }
    }
}

/// Columns are the selected images under `view`, scaled to `[0, 1]`.
pub fn images_matrix(set: &ImageSet, indices: &[usize], view: View) -> Matrix {
    let d = view.dim();
    let mut out = Matrix::zeros(d, indices.len());
    for (j, &idx) in indices.iter().enumerate() {
        let v = view.apply(&set.image_unit(idx));
        out.column_mut(j).copy_from_slice(&v);
    }
    out
}

pub fn labels_of(set: &ImageSet, indices: &[usize]) -> Vec<u32> {
    indices.iter().map(|&i| set.labels[i] as u32).collect()
}

/// The first and second 30 000 images of the 60 000-image training split, in
/// their original order.
pub fn split_mnist_halves(set: &ImageSet) -> Result<(ImageSet, ImageSet)> {
    const FULL: usize = 60_000;
    if set.len() != FULL {
        return Err(McaError::InvalidArgument(format!(
            "expected {FULL} training images, found {}",
            set.len()
        )));
    }
    Ok((set.slice(0..FULL / 2), set.slice(FULL / 2..FULL)))
}

/// Easily separable stand-ins for MNIST digits: class `c` is a bright
/// horizontal bar at rows `8 + 2c ..= 9 + 2c`, columns 7..21, over uniform
/// noise. Labels cycle through 0..10.
pub fn synthetic_digits(count: usize, seed: u64) -> ImageSet {
    let mut rng = seeded(seed, 0);
    let mut pixels = Vec::with_capacity(count * SIDE * SIDE);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let c = (i % 10) as u8;
        labels.push(c);
        for row in 0..SIDE {
            for col in 0..SIDE {
                let on =
                    row / 2 == c as usize + 4 && (CROP_OFFSET..CROP_OFFSET + HALF).contains(&col);
                let base: u8 = if on { 200 } else { 0 };
                pixels.push(base + rng.random_range(0..40u8));
            }
        }
    }
    ImageSet::new(SIDE, SIDE, pixels, labels).expect("consistent sizes")
}

/// Geometry and noise of the Mickey point cloud: three disks in the
/// `xy`-plane of `R^3` (a head at the origin and two ears).
#[derive(Debug, Clone, PartialEq)]
pub struct MickeyConfig {
    pub n_points: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub head_radius: f64,
    pub ear_radius: f64,
    /// Ear centers are `(±ear_center.0, ear_center.1, 0)`.
    pub ear_center: (f64, f64),
    /// Use the same random rotation for both copies.
    pub shared_rotation: bool,
}

impl Default for MickeyConfig {
    fn default() -> Self {
        Self {
            n_points: 300,
            noise_sigma: 0.1,
            seed: 0,
            head_radius: 1.0,
            ear_radius: 0.45,
            ear_center: (0.75, 0.90),
            shared_rotation: false,
        }
    }
}

impl MickeyConfig {
    fn validate(&self) -> Result<()> {
        if self.n_points < 3 {
            return Err(McaError::InvalidArgument(
                "Mickey needs at least 3 points".into(),
            ));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(McaError::InvalidArgument(
                "noise sigma must be nonnegative".into(),
            ));
        }
        if !(self.head_radius > 0.0 && self.ear_radius > 0.0) {
            return Err(McaError::InvalidArgument(
                "disk radii must be positive".into(),
            ));
        }
        Ok(())
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let (ex, ey) = self.ear_center;
        let in_disk = |cx: f64, cy: f64, r: f64| (x - cx).powi(2) + (y - cy).powi(2) <= r * r;
        in_disk(0.0, 0.0, self.head_radius)
            || in_disk(ex, ey, self.ear_radius)
            || in_disk(-ex, ey, self.ear_radius)
    }
}

#[derive(Debug, Clone)]
pub struct MickeyPair {
    /// The clean shape, `3 × n` with zero `z` coordinate.
    pub shape: Matrix,
    /// Whitened copies, `r_i × n`.
    pub z1: Matrix,
    pub z2: Matrix,
}

/// Uniform sample from the union of the three disks (rejection from the
/// bounding box, so overlapping regions are not double counted).
pub fn mickey_shape<R: Rng + ?Sized>(cfg: &MickeyConfig, rng: &mut R) -> Matrix {
    let (ex, ey) = cfg.ear_center;
    let x_max = cfg.head_radius.max(ex.abs() + cfg.ear_radius);
    let y_min = -cfg.head_radius.max(cfg.ear_radius - ey);
    let y_max = cfg.head_radius.max(ey + cfg.ear_radius);
    let mut out = Matrix::zeros(3, cfg.n_points);
    let mut j = 0;
    while j < cfg.n_points {
        let x = rng.random_range(-x_max..=x_max);
        let y = rng.random_range(y_min..=y_max);
        if cfg.contains(x, y) {
            out[(0, j)] = x;
            out[(1, j)] = y;
            j += 1;
        }
    }
    out
}

/// Two matched, independently deformed copies of a Mickey sample: each copy
/// gets its own spherical Gaussian noise and random rotation, then is
/// whitened.
pub fn mickey_pair(cfg: &MickeyConfig) -> Result<MickeyPair> {
    cfg.validate()?;
    let mut rng = seeded(cfg.seed, 0);
    let shape = mickey_shape(cfg, &mut rng);
    let noise =
        Normal::new(0.0, cfg.noise_sigma).map_err(|e| McaError::InvalidArgument(e.to_string()))?;
    let shared = random_rotation(&mut rng, 3);
    let deform = |rng: &mut crate::rng::StreamRng| -> Result<Matrix> {
        let noisy = &shape + Matrix::from_fn(3, cfg.n_points, |_, _| noise.sample(rng));
        let rotation = if cfg.shared_rotation {
            shared.clone()
        } else {
            random_rotation(rng, 3)
        };
        let (_, z) = normalize(&(rotation * noisy), DEFAULT_RANK_TOL)?;
        Ok(z)
    };
    let z1 = deform(&mut rng)?;
    let z2 = deform(&mut rng)?;
    Ok(MickeyPair { shape, z1, z2 })
}

/// Writes `m` as CSV, one row per matrix row.
pub fn write_matrix_csv<W: Write>(m: &Matrix, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlin::{max_abs_diff_identity, sample_covariance, sample_mean};
    use crate::procrustes::projection_procrustes;

    fn random_image(seed: u64) -> Vec<f64> {
        let mut rng = seeded(seed, 0);
        (0..SIDE * SIDE)
            .map(|_| rng.random_range(0.0..1.0))
            .collect()
    }

    #[test]
    fn crop_of_constant_image() {
        let out = crop14(&vec![0.25; SIDE * SIDE]);
        assert_eq!(out.len(), HALF * HALF);
        assert!(out.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn crop_moves_corner_pixel_to_origin() {
        let mut img = vec![0.0; SIDE * SIDE];
        img[7 * SIDE + 7] = 1.0;
        let out = crop14(&img);
        assert_eq!(out[0], 1.0);
        assert_eq!(out.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn crop_matches_index_arithmetic() {
        let img = random_image(81);
        let out = crop14(&img);
        for i in 0..HALF {
            for j in 0..HALF {
                assert_eq!(out[i * HALF + j], img[(i + 7) * SIDE + (j + 7)]);
            }
        }
    }

    #[test]
    fn pixelate_of_constant_and_checkerboard() {
        assert!(pixelate14(&vec![3.0; SIDE * SIDE])
            .iter()
            .all(|&v| v == 3.0));
        let board: Vec<f64> = (0..SIDE * SIDE)
            .map(|p| {
                if (p / SIDE + p % SIDE).is_multiple_of(2) {
                    0.0
                } else {
                    255.0
                }
            })
            .collect();
        assert!(pixelate14(&board).iter().all(|&v| v == 127.5));
    }

    #[test]
    fn pixelate_matches_double_loop() {
        let img = random_image(82);
        let out = pixelate14(&img);
        for i in 0..HALF {
            for j in 0..HALF {
                let mut acc = 0.0;
                for di in 0..2 {
                    for dj in 0..2 {
                        acc += img[(2 * i + di) * SIDE + 2 * j + dj];
                    }
                }
                assert!((out[i * HALF + j] - acc / 4.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn views_are_linear() {
        let (x, y) = (random_image(83), random_image(84));
        let (a, b) = (0.7, -1.3);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        for view in [View::Crop, View::Pixelate] {
            let lhs = view.apply(&mix);
            let (fx, fy) = (view.apply(&x), view.apply(&y));
            for t in 0..lhs.len() {
                assert!((lhs[t] - (a * fx[t] + b * fy[t])).abs() < 1e-12);
            }
        }
    }

    fn tiny_set() -> ImageSet {
        let pixels: Vec<u8> = (0..2 * 3 * 4).map(|v| (v * 7) as u8).collect();
        ImageSet::new(3, 4, pixels, vec![4, 9]).unwrap()
    }

    #[test]
    fn idx_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let set = tiny_set();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
        write_idx(&set, &ip, &lp).unwrap();
        let back = load_idx(&ip, &lp).unwrap();
        assert_eq!(back, set);
        assert_eq!(encode_idx_images(&back), std::fs::read(&ip).unwrap());
        assert_eq!(encode_idx_labels(&back.labels), std::fs::read(&lp).unwrap());
    }

    #[test]
    fn idx_reads_gzip() {
        use flate2::write::GzEncoder;
        let dir = tempfile::tempdir().unwrap();
        let set = tiny_set();
        let ip = dir.path().join("img.gz");
        let mut enc = GzEncoder::new(File::create(&ip).unwrap(), flate2::Compression::default());
        enc.write_all(&encode_idx_images(&set)).unwrap();
        enc.finish().unwrap();
        let lp = dir.path().join("lab");
        std::fs::write(&lp, encode_idx_labels(&set.labels)).unwrap();
        assert_eq!(load_idx(&ip, &lp).unwrap(), set);
    }

    #[test]
    fn idx_error_cases() {
        let dir = tempfile::tempdir().unwrap();
        let set = tiny_set();
        let ip = dir.path().join("img");
        std::fs::write(&ip, encode_idx_images(&set)).unwrap();

        let lp = dir.path().join("lab");
        std::fs::write(&lp, encode_idx_labels(&[1, 2, 3])).unwrap();
        assert!(matches!(
            load_idx(&ip, &lp),
            Err(McaError::CountMismatch {
                images: 2,
                labels: 3
            })
        ));

        // Swapped files: wrong magic.
        assert!(matches!(load_idx(&lp, &ip), Err(McaError::BadMagic { .. })));

        let bytes = encode_idx_images(&set);
        let short = dir.path().join("short");
        std::fs::write(&short, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(
            read_idx_images(&short),
            Err(McaError::Truncated { .. })
        ));
        std::fs::write(&short, &bytes[..6]).unwrap();
        assert!(matches!(
            read_idx_images(&short),
            Err(McaError::Truncated { .. })
        ));

        assert!(matches!(
            load_idx(&dir.path().join("nope"), &lp),
            Err(McaError::MissingData(_))
        ));
    }

    #[test]
    fn halves_preserve_order() {
        let pixels: Vec<u8> = (0..60_000u32).map(|i| (i % 251) as u8).collect();
        let labels: Vec<u8> = (0..60_000u32).map(|i| (i % 10) as u8).collect();
        let set = ImageSet::new(1, 1, pixels, labels).unwrap();
        let (a, b) = split_mnist_halves(&set).unwrap();
        assert_eq!((a.len(), b.len()), (30_000, 30_000));
        let mut joined = a.pixels.clone();
        joined.extend_from_slice(&b.pixels);
        assert_eq!(joined, set.pixels);
        assert_eq!(b.image(0), set.image(30_000));
        assert!(split_mnist_halves(&set.slice(0..100)).is_err());
    }

    #[test]
    fn mickey_outputs_are_white() {
        let pair = mickey_pair(&MickeyConfig::default()).unwrap();
        for z in [&pair.z1, &pair.z2] {
            assert_eq!(z.shape(), (3, 300));
            let mu = sample_mean(z).unwrap();
            assert!(mu.amax() < 1e-8);
            assert!(max_abs_diff_identity(&sample_covariance(z, &mu).unwrap()) < 1e-8);
        }
        assert!(pair.shape.row(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noiseless_shared_rotation_matches_exactly() {
        // Without noise the cloud is planar, so each whitened copy has rank 2.
        let cfg = MickeyConfig {
            noise_sigma: 0.0,
            shared_rotation: true,
            ..MickeyConfig::default()
        };
        let pair = mickey_pair(&cfg).unwrap();
        assert_eq!(pair.z1.nrows(), 2);
        let sol = projection_procrustes(&pair.z1, &pair.z2, 2).unwrap();
        assert!(sol.objective.abs() < 1e-8);
    }

    #[test]
    fn mickey_is_deterministic_and_validated() {
        let cfg = MickeyConfig {
            seed: 9,
            ..MickeyConfig::default()
        };
        assert_eq!(mickey_pair(&cfg).unwrap().z1, mickey_pair(&cfg).unwrap().z1);
        let bad = MickeyConfig {
            n_points: 2,
            ..MickeyConfig::default()
        };
        assert!(mickey_pair(&bad).is_err());
        let bad = MickeyConfig {
            noise_sigma: -1.0,
            ..MickeyConfig::default()
        };
        assert!(mickey_pair(&bad).is_err());
    }

    #[test]
    fn mickey_points_lie_in_the_shape() {
        let cfg = MickeyConfig::default();
        let pts = mickey_shape(&cfg, &mut seeded(3, 0));
        for col in pts.column_iter() {
            assert!(cfg.contains(col[0], col[1]));
        }
    }

    #[test]
    fn matrix_csv_layout() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.5, -2.0, 3.0]);
        let mut buf = Vec::new();
        write_matrix_csv(&m, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1,0.5\n-2,3\n");
    }
}
