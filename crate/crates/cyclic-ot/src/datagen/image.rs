//! Image-backed problems: pixel orderings that expose mirror or quarter-turn
//! symmetry as cyclic block structure, grid distance costs, and readers for
//! PGM (P2/P5) and CSV grids.

use std::path::Path;
use std::str::FromStr;

use crate::core::matrix::Mat;
use crate::core::problem::ProbabilityVector;
use crate::scalar::Real;

use super::DatagenError;

/// Non-negative intensity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage<T> {
    pixels: Mat<T>,
}

impl<T: Real> GrayImage<T> {
    pub fn new(pixels: Mat<T>) -> Result<Self, DatagenError> {
        if pixels.rows() == 0 || pixels.cols() == 0 {
            return Err(DatagenError::Image("image is empty".into()));
        }
        if pixels.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(DatagenError::Image("negative or non-finite intensity".into()));
        }
        Ok(Self { pixels })
    }

    pub fn height(&self) -> usize {
        self.pixels.rows()
    }

    pub fn width(&self) -> usize {
        self.pixels.cols()
    }

    pub fn pixels(&self) -> &Mat<T> {
        &self.pixels
    }

    /// Parses PGM, plain (P2) or raw (P5, 8- or 16-bit big-endian).
    pub fn from_pgm_bytes(bytes: &[u8]) -> Result<Self, DatagenError> {
        parse_pgm(bytes)
    }

    pub fn from_pgm_file(path: impl AsRef<Path>) -> Result<Self, DatagenError> {
        let bytes = std::fs::read(path.as_ref())
            .map_err(|e| DatagenError::Image(format!("read {}: {e}", path.as_ref().display())))?;
        parse_pgm(&bytes)
    }

    /// Parses a comma-separated grid of intensities, one image row per line.
    pub fn from_csv_str(text: &str) -> Result<Self, DatagenError> {
        let mut rows: Vec<Vec<T>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: Result<Vec<T>, _> = line
                .split(',')
                .map(|cell| {
                    cell.trim().parse::<f64>().map(T::of).map_err(|e| {
                        DatagenError::Image(format!("line {}: bad value '{cell}': {e}", lineno + 1))
                    })
                })
                .collect();
            rows.push(row?);
        }
        if rows.is_empty() {
            return Err(DatagenError::Image("csv grid is empty".into()));
        }
        let w = rows[0].len();
        if rows.iter().any(|r| r.len() != w) {
            return Err(DatagenError::Image("csv rows have unequal lengths".into()));
        }
        Self::new(Mat::from_rows(&rows))
    }

    pub fn from_csv_file(path: impl AsRef<Path>) -> Result<Self, DatagenError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| DatagenError::Image(format!("read {}: {e}", path.as_ref().display())))?;
        Self::from_csv_str(&text)
    }
}

/// The symmetry a pixel ordering exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    /// Mirror along the vertical axis; order 2.
    Mirror,
    /// Quarter-turn rotation; order 4.
    Rotation90,
}

impl Symmetry {
    pub fn order(&self) -> usize {
        match self {
            Symmetry::Mirror => 2,
            Symmetry::Rotation90 => 4,
        }
    }
}

impl FromStr for Symmetry {
    type Err = DatagenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mirror" => Ok(Symmetry::Mirror),
            "rotation90" | "rotation" | "rot90" => Ok(Symmetry::Rotation90),
            other => Err(DatagenError::BadParameter(format!("unknown symmetry '{other}'"))),
        }
    }
}

/// A bijection from vector index k to pixel coordinate (row, col) chosen so
/// that symmetric images vectorize to n-periodic marginals and grid distance
/// costs become block-circulant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelOrdering {
    symmetry: Symmetry,
    height: usize,
    width: usize,
    coords: Vec<(usize, usize)>,
}

impl PixelOrdering {
    /// Mirror ordering: the left half column-major, then the mirrored copy of
    /// the same sequence in the right half. Requires even width.
    pub fn mirror(height: usize, width: usize) -> Result<Self, DatagenError> {
        if height == 0 || width == 0 || width % 2 != 0 {
            return Err(DatagenError::BadParameter(format!(
                "mirror ordering needs even width, got {height}x{width}"
            )));
        }
        let half = height * width / 2;
        let coords = (0..height * width)
            .map(|k| {
                if k < half {
                    (k % height, k / height)
                } else {
                    (k % height, 3 * width / 2 - k / height - 1)
                }
            })
            .collect();
        Ok(Self { symmetry: Symmetry::Mirror, height, width, coords })
    }

    /// Quarter-turn ordering: block 0 walks the top-left quadrant
    /// column-major; block k walks the image of that sequence under k
    /// clockwise quarter turns. Requires a square image with even side.
    pub fn rotation90(height: usize, width: usize) -> Result<Self, DatagenError> {
        if height == 0 || height != width || height % 2 != 0 {
            return Err(DatagenError::BadParameter(format!(
                "rotation ordering needs a square even-sided image, got {height}x{width}"
            )));
        }
        let half = height / 2;
        let rotate = |(r, c): (usize, usize)| (c, height - 1 - r);
        let mut coords = Vec::with_capacity(height * width);
        for block in 0..4 {
            for t in 0..half * half {
                let mut p = (t % half, t / half);
                for _ in 0..block {
                    p = rotate(p);
                }
                coords.push(p);
            }
        }
        Ok(Self { symmetry: Symmetry::Rotation90, height, width, coords })
    }

    pub fn for_symmetry(
        symmetry: Symmetry,
        height: usize,
        width: usize,
    ) -> Result<Self, DatagenError> {
        match symmetry {
            Symmetry::Mirror => Self::mirror(height, width),
            Symmetry::Rotation90 => Self::rotation90(height, width),
        }
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// Symmetry order n of the problems this ordering produces.
    pub fn order(&self) -> usize {
        self.symmetry.order()
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coord(&self, k: usize) -> (usize, usize) {
        self.coords[k]
    }

    fn check_dims<T: Real>(&self, img: &GrayImage<T>) -> Result<(), DatagenError> {
        if img.height() != self.height || img.width() != self.width {
            return Err(DatagenError::Image(format!(
                "image is {}x{} but the ordering was built for {}x{}",
                img.height(),
                img.width(),
                self.height,
                self.width
            )));
        }
        Ok(())
    }
}

/// Reads intensities in ordering sequence and normalizes them to total mass
/// one. Exactly symmetric images produce exactly n-periodic output.
pub fn image_to_marginal<T: Real>(
    img: &GrayImage<T>,
    ordering: &PixelOrdering,
) -> Result<ProbabilityVector<T>, DatagenError> {
    ordering.check_dims(img)?;
    let weights: Vec<T> = (0..ordering.len())
        .map(|k| {
            let (r, c) = ordering.coord(k);
            img.pixels()[(r, c)]
        })
        .collect();
    let total: T = weights.iter().copied().sum();
    if total <= T::zero() {
        return Err(DatagenError::Image("image has zero total intensity".into()));
    }
    ProbabilityVector::new(weights.into_iter().map(|w| w / total).collect())
        .map_err(DatagenError::Core)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Manhattan,
    Euclidean,
    Chebyshev,
}

impl FromStr for Metric {
    type Err = DatagenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "manhattan" | "l1" => Ok(Metric::Manhattan),
            "euclidean" | "l2" => Ok(Metric::Euclidean),
            "chebyshev" | "linf" => Ok(Metric::Chebyshev),
            other => Err(DatagenError::BadParameter(format!("unknown metric '{other}'"))),
        }
    }
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Manhattan => "manhattan",
            Metric::Euclidean => "euclidean",
            Metric::Chebyshev => "chebyshev",
        }
    }

    fn distance<T: Real>(&self, p: (usize, usize), q: (usize, usize)) -> T {
        let dr = T::of(p.0.abs_diff(q.0) as f64);
        let dc = T::of(p.1.abs_diff(q.1) as f64);
        match self {
            Metric::Manhattan => dr + dc,
            Metric::Euclidean => (dr * dr + dc * dc).sqrt(),
            Metric::Chebyshev => dr.max(dc),
        }
    }
}

/// Pixel-position distance matrix in ordering sequence. Because every block
/// of the ordering is an isometric image of block zero, the result is
/// block-circulant at the ordering's symmetry order.
pub fn grid_cost<T: Real>(metric: Metric, ordering: &PixelOrdering) -> Mat<T> {
    let d = ordering.len();
    Mat::from_fn(d, d, |k, l| metric.distance(ordering.coord(k), ordering.coord(l)))
}

fn parse_pgm<T: Real>(bytes: &[u8]) -> Result<GrayImage<T>, DatagenError> {
    let err = |msg: &str| DatagenError::Image(format!("pgm: {msg}"));
    if bytes.len() < 2 {
        return Err(err("truncated header"));
    }
    let magic = &bytes[..2];
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        _ => return Err(err("expected P2 or P5 magic")),
    };

    // Header tokens (width, height, maxval) with '#' comments allowed.
    let mut pos = 2usize;
    let mut tokens: Vec<u64> = Vec::new();
    while tokens.len() < 3 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(err("truncated header"));
        }
        let tok = std::str::from_utf8(&bytes[start..pos]).unwrap();
        tokens.push(tok.parse().map_err(|_| err("bad header number"))?);
    }
    let (w, h, maxval) = (tokens[0] as usize, tokens[1] as usize, tokens[2]);
    if w == 0 || h == 0 {
        return Err(err("zero dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(err("maxval out of range"));
    }

    let mut values = Vec::with_capacity(w * h);
    if binary {
        pos += 1; // single whitespace byte after maxval
        let wide = maxval > 255;
        let need = w * h * if wide { 2 } else { 1 };
        if bytes.len() < pos + need {
            return Err(err("truncated raster"));
        }
        for i in 0..w * h {
            let v = if wide {
                u16::from_be_bytes([bytes[pos + 2 * i], bytes[pos + 2 * i + 1]]) as f64
            } else {
                bytes[pos + i] as f64
            };
            values.push(T::of(v));
        }
    } else {
        let text = std::str::from_utf8(&bytes[pos..]).map_err(|_| err("invalid ascii raster"))?;
        for tok in text.split_ascii_whitespace().take(w * h) {
            let v: f64 = tok.parse().map_err(|_| err("bad raster value"))?;
            values.push(T::of(v));
        }
        if values.len() != w * h {
            return Err(err("truncated raster"));
        }
    }
    GrayImage::new(Mat::from_vec(h, w, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::problem::{DenseProblem, ProbabilityVector};
    use crate::core::symmetry::{fold_average, validate_cyclic};

    #[test]
    fn mirror_ordering_matches_hand_evaluation() {
        let img: GrayImage<f64> = GrayImage::new(Mat::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]])).unwrap();
        let ordering = PixelOrdering::mirror(2, 2).unwrap();
        let marginal = image_to_marginal(&img, &ordering).unwrap();
        let expected = [1.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0, 2.0 / 6.0];
        for (got, want) in marginal.as_slice().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn mirror_symmetric_image_folds_exactly() {
        // Left half random-ish, right half its mirror.
        let left = [[3.0, 7.0], [1.0, 4.0], [9.0, 2.0]];
        let img = GrayImage::new(Mat::from_fn(3, 4, |r, c| {
            let cc = if c < 2 { c } else { 3 - c };
            left[r][cc]
        }))
        .unwrap();
        let ordering = PixelOrdering::mirror(3, 4).unwrap();
        let marginal = image_to_marginal(&img, &ordering).unwrap();
        let v = marginal.as_slice();
        let folded = fold_average(v, 2).unwrap();
        assert_eq!(&folded[..], &v[..6], "periodic marginal folds to its first half");
    }

    #[test]
    fn constant_image_gives_uniform_marginal() {
        let img: GrayImage<f64> = GrayImage::new(Mat::from_fn(4, 4, |_, _| 5.0)).unwrap();
        let ordering = PixelOrdering::rotation90(4, 4).unwrap();
        let marginal = image_to_marginal(&img, &ordering).unwrap();
        assert!(marginal.as_slice().iter().all(|&x| (x - 1.0 / 16.0).abs() < 1e-15));
    }

    #[test]
    fn zero_image_and_bad_dims_error() {
        let zeros = GrayImage::new(Mat::from_fn(2, 2, |_, _| 0.0)).unwrap();
        let ordering = PixelOrdering::mirror(2, 2).unwrap();
        assert!(image_to_marginal(&zeros, &ordering).is_err());
        assert!(PixelOrdering::mirror(2, 3).is_err());
        assert!(PixelOrdering::rotation90(4, 6).is_err());
        assert!(PixelOrdering::rotation90(3, 3).is_err());
        let img = GrayImage::new(Mat::from_fn(4, 4, |_, _| 1.0)).unwrap();
        assert!(image_to_marginal(&img, &PixelOrdering::mirror(2, 2).unwrap()).is_err());
    }

    #[test]
    fn metric_values_on_unit_steps() {
        assert_eq!(Metric::Euclidean.distance::<f64>((0, 0), (1, 0)), 1.0);
        assert_eq!(Metric::Manhattan.distance::<f64>((0, 0), (1, 1)), 2.0);
        assert_eq!(Metric::Euclidean.distance::<f64>((0, 0), (1, 1)), 2.0_f64.sqrt());
        assert_eq!(Metric::Chebyshev.distance::<f64>((0, 0), (1, 1)), 1.0);
    }

    #[test]
    fn grid_cost_is_symmetric_zero_diagonal() {
        let ordering = PixelOrdering::mirror(3, 4).unwrap();
        let cost: Mat<f64> = grid_cost(Metric::Euclidean, &ordering);
        for k in 0..cost.rows() {
            assert_eq!(cost[(k, k)], 0.0);
            for l in 0..cost.cols() {
                assert_eq!(cost[(k, l)], cost[(l, k)]);
            }
        }
    }

    #[test]
    fn grid_cost_is_block_circulant_for_all_small_grids() {
        let metrics = [Metric::Manhattan, Metric::Euclidean, Metric::Chebyshev];
        for metric in metrics {
            for h in 1..=6usize {
                for w in [2usize, 4, 6] {
                    let ordering = PixelOrdering::mirror(h, w).unwrap();
                    assert_block_circulant(metric, &ordering, 2);
                }
            }
            for side in [2usize, 4, 6] {
                let ordering = PixelOrdering::rotation90(side, side).unwrap();
                assert_block_circulant(metric, &ordering, 4);
            }
        }
    }

    fn assert_block_circulant(metric: Metric, ordering: &PixelOrdering, n: usize) {
        let cost: Mat<f64> = grid_cost(metric, ordering);
        let d = cost.rows();
        let dense = DenseProblem::new(
            ProbabilityVector::uniform(d),
            ProbabilityVector::uniform(d),
            cost,
        )
        .unwrap();
        validate_cyclic(&dense, n, 1e-12).unwrap_or_else(|e| {
            panic!("{:?} {}x{}: {e}", metric, ordering.height, ordering.width)
        });
    }

    #[test]
    fn ordering_is_a_bijection() {
        for ordering in [
            PixelOrdering::mirror(5, 6).unwrap(),
            PixelOrdering::rotation90(6, 6).unwrap(),
        ] {
            let mut seen = vec![false; ordering.len()];
            for k in 0..ordering.len() {
                let (r, c) = ordering.coord(k);
                let idx = r * ordering.width + c;
                assert!(!seen[idx], "pixel visited twice");
                seen[idx] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn pgm_roundtrip_ascii_and_binary() {
        let ascii = b"P2\n# comment\n3 2\n255\n0 10 20\n30 40 50\n";
        let img: GrayImage<f64> = GrayImage::from_pgm_bytes(ascii).unwrap();
        assert_eq!(img.height(), 2);
        assert_eq!(img.width(), 3);
        assert_eq!(img.pixels()[(1, 2)], 50.0);

        let mut raw = b"P5 3 2 255\n".to_vec();
        raw.extend_from_slice(&[0, 10, 20, 30, 40, 50]);
        let img2: GrayImage<f64> = GrayImage::from_pgm_bytes(&raw).unwrap();
        assert_eq!(img.pixels(), img2.pixels());

        let mut wide = b"P5 2 1 65535\n".to_vec();
        wide.extend_from_slice(&[0x01, 0x00, 0x00, 0xFF]);
        let img3: GrayImage<f64> = GrayImage::from_pgm_bytes(&wide).unwrap();
        assert_eq!(img3.pixels()[(0, 0)], 256.0);
        assert_eq!(img3.pixels()[(0, 1)], 255.0);

        assert!(GrayImage::<f64>::from_pgm_bytes(b"P6 1 1 255\n0").is_err());
    }

    #[test]
    fn csv_grid_parses() {
        let img: GrayImage<f64> = GrayImage::from_csv_str("1.0, 2.0\n3.5,4.25\n").unwrap();
        assert_eq!(img.pixels()[(1, 1)], 4.25);
        assert!(GrayImage::<f64>::from_csv_str("1.0,2.0\n3.0\n").is_err());
        assert!(GrayImage::<f64>::from_csv_str("").is_err());
    }
}
