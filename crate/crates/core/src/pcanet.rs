//! Two-stage PCA-Net feature extractor.
//!
//! A cascaded patch stacks the `h x h` neighbourhood from the first acquisition on
//! top of the same neighbourhood from the second, giving a `2h x h` map. Filters are
//! the leading eigenvectors of the covariance of normalized `k x k` sub-windows.
//! Stage-2 responses are binarized, hashed per stage-1 parent, and summarized by
//! non-overlapping block histograms.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::classifier::LinearModel;
use crate::error::{Error, Result};
use crate::raster::{Coord, TemporalPair};

/// Norms at or below this are treated as zero by [`normalize_vector`].
pub const NORM_EPS: f64 = 1e-12;

/// Dense row-major real matrix used for patches, filters and response maps.
#[derive(Debug, Clone, PartialEq)]
pub struct Map {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Map {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Map { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Map {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Applies [`normalize_vector`] to the flattened map.
    pub fn normalized(&self) -> Map {
        Map {
            rows: self.rows,
            cols: self.cols,
            data: normalize_vector(&self.data),
        }
    }
}

/// The `2h x h` stack of co-located neighbourhoods from both acquisitions.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedPatch {
    pub data: Map,
    pub center: Coord,
    pub h: usize,
}

/// Half-sample symmetric reflection: -1 -> 0, -2 -> 1, n -> n-1.
fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

pub fn cascade_patch(pair: &TemporalPair, center: Coord, h: usize) -> Result<CascadedPatch> {
    if h == 0 || h % 2 == 0 {
        return Err(Error::Parameter(format!("patch side must be odd, got {h}")));
    }
    let (w, ht) = (pair.width(), pair.height());
    if center.row >= ht || center.col >= w {
        return Err(Error::Parameter(format!(
            "center ({}, {}) outside {w}x{ht} image",
            center.row, center.col
        )));
    }
    let half = (h / 2) as isize;
    let mut data = Vec::with_capacity(2 * h * h);
    for img in [pair.t1(), pair.t2()] {
        for dr in -half..=half {
            let r = mirror(center.row as isize + dr, ht);
            for dc in -half..=half {
                let c = mirror(center.col as isize + dc, w);
                data.push(img.get(r, c));
            }
        }
    }
    Ok(CascadedPatch {
        data: Map {
            rows: 2 * h,
            cols: h,
            data,
        },
        center,
        h,
    })
}

/// Removes the mean and scales to unit l2 norm; near-constant input maps to zeros.
pub fn normalize_vector(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut y: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > NORM_EPS {
        y.iter_mut().for_each(|v| *v /= norm);
    } else {
        y.iter_mut().for_each(|v| *v = 0.0);
    }
    y
}

/// `k^2 x N` matrix whose columns are vectorized (column-major), normalized sub-windows.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchMatrix {
    k: usize,
    n: usize,
    /// Column-major: column `j` occupies `data[j*k*k..(j+1)*k*k]`.
    data: Vec<f64>,
}

impl PatchMatrix {
    /// Wraps already-vectorized columns. Columns are normalized on the way in.
    pub fn from_columns(k: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let dim = k * k;
        let mut data = Vec::with_capacity(dim * columns.len());
        for col in columns {
            if col.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: col.len(),
                });
            }
            data.extend(normalize_vector(col));
        }
        Ok(PatchMatrix {
            k,
            n: columns.len(),
            data,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let d = self.k * self.k;
        &self.data[j * d..(j + 1) * d]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.k * self.k)
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }
}

/// Draws `k x k` sub-windows round-robin over `patches` at uniformly random positions,
/// normalizes each and shuffles the column order.
///
/// The column count is `min(n_max, total number of valid window positions)`.
pub fn build_patch_matrix<R: Rng + ?Sized>(
    patches: &[Map],
    k: usize,
    n_max: usize,
    rng: &mut R,
) -> Result<PatchMatrix> {
    if k == 0 {
        return Err(Error::Parameter("filter side must be positive".into()));
    }
    if n_max == 0 {
        return Err(Error::Parameter("sub-window budget must be positive".into()));
    }
    if patches.is_empty() {
        return Err(Error::Parameter("no patches to draw sub-windows from".into()));
    }
    if let Some(p) = patches.iter().find(|p| p.rows < k || p.cols < k) {
        return Err(Error::Parameter(format!(
            "filter side {k} exceeds patch {}x{}",
            p.rows, p.cols
        )));
    }
    let available: usize = patches
        .iter()
        .map(|p| (p.rows - k + 1) * (p.cols - k + 1))
        .sum();
    let n = n_max.min(available);
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        let p = &patches[j % patches.len()];
        let r0 = rng.gen_range(0..=p.rows - k);
        let c0 = rng.gen_range(0..=p.cols - k);
        let mut v = Vec::with_capacity(k * k);
        for c in 0..k {
            for r in 0..k {
                v.push(p.get(r0 + r, c0 + c));
            }
        }
        columns.push(normalize_vector(&v));
    }
    columns.shuffle(rng);
    Ok(PatchMatrix {
        k,
        n,
        data: columns.concat(),
    })
}

/// Ordered filters with their covariance eigenvalues, non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    k: usize,
    filters: Vec<Map>,
    /// Empty for banks restored from a model file.
    eigenvalues: Vec<f64>,
}

impl FilterBank {
    pub fn from_filters(k: usize, filters: Vec<Map>, eigenvalues: Vec<f64>) -> Result<Self> {
        if filters.is_empty() {
            return Err(Error::Parameter("filter bank is empty".into()));
        }
        if let Some(f) = filters.iter().find(|f| f.rows != k || f.cols != k) {
            return Err(Error::Parameter(format!(
                "filter {}x{} does not match side {k}",
                f.rows, f.cols
            )));
        }
        Ok(FilterBank {
            k,
            filters,
            eigenvalues,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    pub fn filters(&self) -> &[Map] {
        &self.filters
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Filter `i` flattened column-major, the inverse of `mat(.)`.
    pub fn vectorized(&self, i: usize) -> Vec<f64> {
        let f = &self.filters[i];
        let mut v = Vec::with_capacity(self.k * self.k);
        for c in 0..self.k {
            for r in 0..self.k {
                v.push(f.get(r, c));
            }
        }
        v
    }
}

/// Top-`l` eigenpairs of `X Xᵀ` for a column-major `dim x n` matrix `X`.
///
/// Eigenvectors are sign-fixed so the largest-magnitude entry is positive (lowest
/// index wins ties). Returns `(vectors, eigenvalues)` with eigenvalues non-increasing.
pub fn leading_eigenvectors(
    columns: &[f64],
    dim: usize,
    l: usize,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if dim == 0 || columns.len() % dim != 0 {
        return Err(Error::Dimension {
            expected: dim,
            found: columns.len(),
        });
    }
    if l == 0 || l > dim {
        return Err(Error::Parameter(format!(
            "filter count {l} must lie in 1..={dim}"
        )));
    }
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for x in columns.chunks_exact(dim) {
        for i in 0..dim {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for j in i..dim {
                cov[(i, j)] += xi * x[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let top = eig.eigenvalues[order[0]].max(0.0);
    let tol = top * 1e-12 * dim as f64;
    let rank = order
        .iter()
        .filter(|&&i| eig.eigenvalues[i] > tol && top > 0.0)
        .count();
    if rank < l {
        return Err(Error::Degenerate(format!(
            "patch covariance has numeric rank {rank}, fewer than the {l} requested filters"
        )));
    }

    let mut vectors = Vec::with_capacity(l);
    let mut values = Vec::with_capacity(l);
    for &i in order.iter().take(l) {
        let mut u: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let mut pivot = 0;
        for (j, v) in u.iter().enumerate() {
            if v.abs() > u[pivot].abs() {
                pivot = j;
            }
        }
        if u[pivot] < 0.0 {
            u.iter_mut().for_each(|v| *v = -*v);
        }
        vectors.push(u);
        values.push(eig.eigenvalues[i]);
    }
    Ok((vectors, values))
}

/// Learns `l` filters as the leading eigenvectors of `X Xᵀ`, reshaped column-major.
pub fn learn_filters(x: &PatchMatrix, l: usize) -> Result<FilterBank> {
    let k = x.k;
    if l == 0 || l > k * k {
        return Err(Error::Parameter(format!(
            "filter count {l} must lie in 1..={}",
            k * k
        )));
    }
    let (vectors, eigenvalues) = leading_eigenvectors(&x.data, k * k, l)?;
    let filters = vectors
        .iter()
        .map(|u| {
            let mut f = Map::zeros(k, k);
            for c in 0..k {
                for r in 0..k {
                    f.set(r, c, u[c * k + r]);
                }
            }
            f
        })
        .collect();
    Ok(FilterBank {
        k,
        filters,
        eigenvalues,
    })
}

/// Zero-padded 2-D cross-correlation; output has the input's shape.
pub fn convolve_same(patch: &Map, filter: &Map) -> Map {
    let (rows, cols) = (patch.rows, patch.cols);
    let (kr, kc) = (filter.rows, filter.cols);
    let (pr, pc) = ((kr - 1) / 2, (kc - 1) / 2);
    let mut out = Map::zeros(rows, cols);
    for i in 0..rows {
        let a_lo = pr.saturating_sub(i);
        let a_hi = kr.min(rows + pr - i);
        for j in 0..cols {
            let b_lo = pc.saturating_sub(j);
            let b_hi = kc.min(cols + pc - j);
            let mut acc = 0.0;
            for a in a_lo..a_hi {
                let prow = &patch.data[(i + a - pr) * cols..];
                let frow = &filter.data[a * kc..];
                for b in b_lo..b_hi {
                    acc += prow[j + b - pc] * frow[b];
                }
            }
            out.data[i * cols + j] = acc;
        }
    }
    out
}

/// Normalizes `patch`, applies every stage-1 filter, re-normalizes each response and
/// applies every stage-2 filter. Output index is `parent * stage2.len() + child`.
pub fn run_cascade(stage1: &FilterBank, stage2: &FilterBank, patch: &Map) -> Vec<Map> {
    let input = patch.normalized();
    let mut out = Vec::with_capacity(stage1.len() * stage2.len());
    for f1 in &stage1.filters {
        let mid = convolve_same(&input, f1).normalized();
        for f2 in &stage2.filters {
            out.push(convolve_same(&mid, f2));
        }
    }
    out
}

/// Per-pixel binary code of a group of response maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashedMap {
    pub rows: usize,
    pub cols: usize,
    pub codes: Vec<u32>,
}

/// Bit `l` of each code is set where map `l` is strictly positive.
pub fn binary_hash(maps: &[Map]) -> Result<HashedMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::Parameter("no maps to hash".into()))?;
    if maps.len() > 31 {
        return Err(Error::Parameter(format!(
            "{} maps exceed the 31-bit hash width",
            maps.len()
        )));
    }
    let (rows, cols) = (first.rows, first.cols);
    if let Some(m) = maps.iter().find(|m| m.rows != rows || m.cols != cols) {
        return Err(Error::Parameter(format!(
            "map {}x{} differs from {rows}x{cols}",
            m.rows, m.cols
        )));
    }
    let mut codes = vec![0u32; rows * cols];
    for (bit, m) in maps.iter().enumerate() {
        for (code, &v) in codes.iter_mut().zip(&m.data) {
            if v > 0.0 {
                *code |= 1 << bit;
            }
        }
    }
    Ok(HashedMap { rows, cols, codes })
}

/// Histograms of non-overlapping `block_side` square blocks, concatenated in
/// row-major block order.
pub fn block_histogram(
    hashed: &HashedMap,
    block_side: usize,
    bins: usize,
    normalize: bool,
) -> Result<Vec<f64>> {
    if block_side == 0 || hashed.rows % block_side != 0 || hashed.cols % block_side != 0 {
        return Err(Error::Parameter(format!(
            "block side {block_side} does not tile a {}x{} map",
            hashed.rows, hashed.cols
        )));
    }
    let (br, bc) = (hashed.rows / block_side, hashed.cols / block_side);
    let mut hist = vec![0.0; br * bc * bins];
    for r in 0..hashed.rows {
        for c in 0..hashed.cols {
            let code = hashed.codes[r * hashed.cols + c] as usize;
            if code >= bins {
                return Err(Error::Parameter(format!(
                    "hash code {code} exceeds {bins} bins"
                )));
            }
            let block = (r / block_side) * bc + c / block_side;
            hist[block * bins + code] += 1.0;
        }
    }
    if normalize {
        let area = (block_side * block_side) as f64;
        hist.iter_mut().for_each(|v| *v /= area);
    }
    Ok(hist)
}

/// Network geometry and filter-training budget.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaNetConfig {
    /// Patch side (odd).
    pub h: usize,
    /// Filter side.
    pub k: usize,
    pub l1: usize,
    pub l2: usize,
    pub block_side: usize,
    pub normalize_hist: bool,
    /// Maximum sub-windows per filter-learning stage.
    pub n_max: usize,
}

impl Default for PcaNetConfig {
    fn default() -> Self {
        PcaNetConfig {
            h: 7,
            k: 5,
            l1: 8,
            l2: 8,
            block_side: 7,
            normalize_hist: true,
            n_max: 50_000,
        }
    }
}

/// Largest stage-2 filter count accepted; bins grow as `2^l2`.
pub const MAX_L2: usize = 16;

impl PcaNetConfig {
    pub fn with_patch(h: usize) -> Self {
        PcaNetConfig {
            h,
            block_side: h,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = |m: String| Err(Error::Parameter(m));
        if self.h == 0 || self.h % 2 == 0 {
            return p(format!("patch side must be odd, got {}", self.h));
        }
        if self.k == 0 || self.k % 2 == 0 {
            return p(format!("filter side must be odd, got {}", self.k));
        }
        if self.k > self.h {
            return p(format!(
                "filter side {} exceeds patch side {}",
                self.k, self.h
            ));
        }
        if self.l1 == 0 || self.l1 > self.k * self.k {
            return p(format!(
                "stage-1 filter count {} must lie in 1..={}",
                self.l1,
                self.k * self.k
            ));
        }
        if self.l2 == 0 || self.l2 > (self.k * self.k).min(MAX_L2) {
            return p(format!(
                "stage-2 filter count {} must lie in 1..={}",
                self.l2,
                (self.k * self.k).min(MAX_L2)
            ));
        }
        if self.block_side == 0 || self.h % self.block_side != 0 {
            return p(format!(
                "block side {} must divide patch side {}",
                self.block_side, self.h
            ));
        }
        if self.n_max == 0 {
            return p("sub-window budget must be positive".into());
        }
        Ok(())
    }

    /// Histogram blocks per cascaded patch.
    pub fn blocks(&self) -> usize {
        (2 * self.h / self.block_side) * (self.h / self.block_side)
    }

    pub fn feature_len(&self) -> usize {
        self.l1 * self.blocks() * (1 << self.l2)
    }
}

/// Learned stage banks plus encoding geometry; everything but the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    pub h: usize,
    pub block_side: usize,
    pub normalize_hist: bool,
    pub stage1: FilterBank,
    pub stage2: FilterBank,
}

impl FeatureExtractor {
    pub fn k(&self) -> usize {
        self.stage1.k
    }

    pub fn blocks(&self) -> usize {
        (2 * self.h / self.block_side) * (self.h / self.block_side)
    }

    pub fn feature_len(&self) -> usize {
        self.stage1.len() * self.blocks() * (1 << self.stage2.len())
    }

    /// Feature of an already-cascaded patch.
    pub fn encode(&self, patch: &Map) -> Result<FeatureVector> {
        let l2 = self.stage2.len();
        let maps = run_cascade(&self.stage1, &self.stage2, patch);
        let mut values = Vec::with_capacity(self.feature_len());
        for group in maps.chunks_exact(l2) {
            let hashed = binary_hash(group)?;
            values.extend(block_histogram(
                &hashed,
                self.block_side,
                1 << l2,
                self.normalize_hist,
            )?);
        }
        Ok(FeatureVector { values })
    }

    pub fn extract(&self, pair: &TemporalPair, center: Coord) -> Result<FeatureVector> {
        let patch = cascade_patch(pair, center, self.h)?;
        self.encode(&patch.data)
    }
}

/// Concatenated block histograms of one pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A trained network: feature extractor and terminal linear classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaNetModel {
    pub extractor: FeatureExtractor,
    pub classifier: LinearModel,
}

impl PcaNetModel {
    pub fn new(extractor: FeatureExtractor, classifier: LinearModel) -> Result<Self> {
        if classifier.weights.len() != extractor.feature_len() {
            return Err(Error::Dimension {
                expected: extractor.feature_len(),
                found: classifier.weights.len(),
            });
        }
        Ok(PcaNetModel {
            extractor,
            classifier,
        })
    }

    pub fn h(&self) -> usize {
        self.extractor.h
    }

    pub fn feature_len(&self) -> usize {
        self.extractor.feature_len()
    }

    pub fn predict_pixel(&self, pair: &TemporalPair, center: Coord) -> Result<u8> {
        let f = self.extractor.extract(pair, center)?;
        self.classifier.predict(&f)
    }
}

pub fn extract_feature(
    model: &PcaNetModel,
    pair: &TemporalPair,
    center: Coord,
) -> Result<FeatureVector> {
    model.extractor.extract(pair, center)
}

/// Training coordinates on one co-registered pair.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSource<'a> {
    pub pair: &'a TemporalPair,
    pub coords: &'a [Coord],
}

/// Diagnostic counts from [`fit_feature_extractor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitStats {
    pub stage1_patches: usize,
    pub stage1_columns: usize,
    pub stage2_patches: usize,
    pub stage2_columns: usize,
}

/// Learns both filter banks from the cascaded patches at the training coordinates.
pub fn fit_feature_extractor<R: Rng + ?Sized>(
    sources: &[TrainingSource<'_>],
    cfg: &PcaNetConfig,
    rng: &mut R,
) -> Result<(FeatureExtractor, FitStats)> {
    cfg.validate()?;
    let mut patches = Vec::new();
    for src in sources {
        for &c in src.coords {
            patches.push(cascade_patch(src.pair, c, cfg.h)?.data);
        }
    }
    if patches.is_empty() {
        return Err(Error::Parameter("no training coordinates".into()));
    }

    let x1 = build_patch_matrix(&patches, cfg.k, cfg.n_max, rng)?;
    let stage1 = learn_filters(&x1, cfg.l1)?;

    let mut pool = Vec::with_capacity(patches.len() * cfg.l1);
    for p in &patches {
        let input = p.normalized();
        for f in &stage1.filters {
            pool.push(convolve_same(&input, f).normalized());
        }
    }
    let x2 = build_patch_matrix(&pool, cfg.k, cfg.n_max, rng)?;
    let stage2 = learn_filters(&x2, cfg.l2)?;

    let stats = FitStats {
        stage1_patches: patches.len(),
        stage1_columns: x1.n,
        stage2_patches: pool.len(),
        stage2_columns: x2.n,
    };
    Ok((
        FeatureExtractor {
            h: cfg.h,
            block_side: cfg.block_side,
            normalize_hist: cfg.normalize_hist,
            stage1,
            stage2,
        },
        stats,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Raster;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn delta(k: usize) -> Map {
        let mut f = Map::zeros(k, k);
        f.set(k / 2, k / 2, 1.0);
        f
    }

    fn random_map(rows: usize, cols: usize, rng: &mut seed::Rng) -> Map {
        Map::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    fn nested_loop_correlate(p: &Map, f: &Map) -> Map {
        let k = f.rows() as isize;
        let pad = (k - 1) / 2;
        let mut out = Map::zeros(p.rows(), p.cols());
        for i in 0..p.rows() as isize {
            for j in 0..p.cols() as isize {
                let mut s = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        let (r, c) = (i + a - pad, j + b - pad);
                        if r >= 0 && c >= 0 && (r as usize) < p.rows() && (c as usize) < p.cols() {
                            s += p.get(r as usize, c as usize) * f.get(a as usize, b as usize);
                        }
                    }
                }
                out.set(i as usize, j as usize, s);
            }
        }
        out
    }

    #[test]
    fn cascade_constant_pair() {
        let pair = TemporalPair::new(
            Raster::filled(5, 5, 3.0).unwrap(),
            Raster::filled(5, 5, 5.0).unwrap(),
        )
        .unwrap();
        let p = cascade_patch(&pair, Coord::new(2, 2), 3).unwrap();
        assert_eq!((p.data.rows(), p.data.cols()), (6, 3));
        assert!(p.data.data()[..9].iter().all(|&v| v == 3.0));
        assert!(p.data.data()[9..].iter().all(|&v| v == 5.0));
        assert!(cascade_patch(&pair, Coord::new(2, 2), 4).is_err());
    }

    #[test]
    fn cascade_corner_matches_explicit_padding() {
        let mut rng = seed::rng(3);
        let (w, ht, h) = (4usize, 3usize, 5usize);
        let t1 = Raster::new(w, ht, (0..w * ht).map(|_| rng.gen_range(0.0..9.0)).collect()).unwrap();
        let t2 = Raster::new(w, ht, (0..w * ht).map(|_| rng.gen_range(0.0..9.0)).collect()).unwrap();
        let pair = TemporalPair::new(t1, t2).unwrap();

        // Build an explicitly padded image by repeated edge reflection, then crop.
        let pad = h / 2;
        let padded = |img: &Raster| {
            let mut rows: Vec<Vec<f64>> = (0..ht)
                .map(|r| (0..w).map(|c| img.get(r, c)).collect())
                .collect();
            for _ in 0..pad {
                for row in rows.iter_mut() {
                    let n = row.len();
                    let depth = (n - w) / 2;
                    let left = row[2 * depth];
                    let right = row[n - 1 - 2 * depth];
                    row.insert(0, left);
                    row.push(right);
                }
            }
            for d in 0..pad {
                let top = rows[2 * d].clone();
                let bottom = rows[rows.len() - 1 - 2 * d].clone();
                rows.insert(0, top);
                rows.push(bottom);
            }
            rows
        };
        let p1 = padded(pair.t1());
        let p2 = padded(pair.t2());
        for (row, col) in [(0, 0), (0, 3), (2, 0), (2, 3), (1, 1)] {
            let got = cascade_patch(&pair, Coord::new(row, col), h).unwrap();
            for r in 0..h {
                for c in 0..h {
                    assert_eq!(got.data.get(r, c), p1[row + r][col + c]);
                    assert_eq!(got.data.get(h + r, c), p2[row + r][col + c]);
                }
            }
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_vector(&[1.0, 1.0, 1.0, 1.0]), vec![0.0; 4]);
        let y = normalize_vector(&[2.0, 0.0]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((y[0] - s).abs() < 1e-15 && (y[1] + s).abs() < 1e-15);
    }

    #[test]
    fn patch_matrix_window_grid_and_determinism() {
        let mut rng = seed::rng(1);
        let p = random_map(6, 3, &mut rng);
        // (2h-k+1) x (h-k+1) = 4 x 1 positions.
        let x = build_patch_matrix(&[p.clone()], 3, 100, &mut seed::rng(5)).unwrap();
        assert_eq!(x.n(), 4);
        for col in x.columns() {
            let from_grid = (0..4).any(|r0| {
                let mut v = Vec::new();
                for c in 0..3 {
                    for r in 0..3 {
                        v.push(p.get(r0 + r, c));
                    }
                }
                normalize_vector(&v) == col
            });
            assert!(from_grid);
        }
        let y = build_patch_matrix(&[p.clone()], 3, 100, &mut seed::rng(5)).unwrap();
        assert_eq!(x, y);
        assert!(build_patch_matrix(&[p], 4, 10, &mut rng).is_err());
    }

    #[test]
    fn learn_axis_aligned() {
        let (u, lam) = leading_eigenvectors(&[1.0, 0.0, -1.0, 0.0], 2, 1).unwrap();
        assert_eq!(u[0], vec![1.0, 0.0]);
        assert!((lam[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn complete_basis_reconstructs_exactly() {
        let mut rng = seed::rng(11);
        let cols: Vec<f64> = (0..9 * 30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (u, _) = leading_eigenvectors(&cols, 9, 9).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let outer: f64 = (0..9).map(|m| u[m][i] * u[m][j]).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((outer - id).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let x = PatchMatrix::from_columns(2, &[vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        let err = learn_filters(&x, 2).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
        assert!(err.to_string().contains("rank 1"), "{err}");
        assert!(matches!(learn_filters(&x, 5), Err(Error::Parameter(_))));
    }

    #[test]
    fn sign_convention() {
        let mut rng = seed::rng(2);
        let p: Vec<Map> = (0..10).map(|_| random_map(6, 3, &mut rng)).collect();
        let x = build_patch_matrix(&p, 3, 40, &mut rng).unwrap();
        let bank = learn_filters(&x, 3).unwrap();
        for i in 0..3 {
            let v = bank.vectorized(i);
            let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let first = v.iter().position(|x| x.abs() == max).unwrap();
            assert!(v[first] > 0.0);
        }
    }

    #[test]
    fn convolve_identity_and_box() {
        let mut rng = seed::rng(4);
        let p = random_map(6, 3, &mut rng);
        assert_eq!(convolve_same(&p, &delta(3)), p);
        let c = Map::new(5, 5, vec![2.5; 25]).unwrap();
        let ones = Map::new(3, 3, vec![1.0; 9]).unwrap();
        assert_eq!(convolve_same(&c, &ones).get(2, 2), 22.5);
    }

    #[test]
    fn identity_cascade() {
        let mut rng = seed::rng(9);
        let p = random_map(6, 3, &mut rng);
        let bank = FilterBank::from_filters(3, vec![delta(3)], vec![1.0]).unwrap();
        let out = run_cascade(&bank, &bank, &p);
        assert_eq!(out.len(), 1);
        let expect = p.normalized().normalized();
        for (a, b) in out[0].data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn hash_examples() {
        let m = |v: f64| Map::new(1, 1, vec![v]).unwrap();
        assert_eq!(binary_hash(&[m(0.5), m(-0.2), m(0.1)]).unwrap().codes, vec![5]);
        assert_eq!(binary_hash(&[m(0.0), m(-1.0)]).unwrap().codes, vec![0]);
        let all: Vec<Map> = (0..8).map(|_| m(1e-9)).collect();
        assert_eq!(binary_hash(&all).unwrap().codes, vec![255]);
    }

    #[test]
    fn histogram_examples() {
        let hm = HashedMap {
            rows: 2,
            cols: 2,
            codes: vec![0, 0, 1, 3],
        };
        assert_eq!(block_histogram(&hm, 2, 4, false).unwrap(), vec![2.0, 1.0, 0.0, 1.0]);
        assert_eq!(
            block_histogram(&hm, 2, 4, true).unwrap().iter().sum::<f64>(),
            1.0
        );
        let constant = HashedMap {
            rows: 6,
            cols: 3,
            codes: vec![6; 18],
        };
        let h = block_histogram(&constant, 3, 8, false).unwrap();
        assert_eq!(h.len(), 16);
        for (i, v) in h.iter().enumerate() {
            let expect = if i % 8 == 6 { 9.0 } else { 0.0 };
            assert_eq!(*v, expect);
        }
        assert!(block_histogram(&constant, 2, 8, false).is_err());
    }

    #[test]
    fn default_dimensions() {
        let cfg = PcaNetConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.blocks(), 2);
        assert_eq!(cfg.feature_len(), 4096);
        assert_eq!(cfg.l1 * cfg.l2, 64);
        assert!(PcaNetConfig { k: 9, ..cfg.clone() }.validate().is_err());
        assert!(PcaNetConfig { block_side: 2, ..cfg.clone() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn normalize_property(x in prop::collection::vec(-1e3f64..1e3, 2..40)) {
            let y = normalize_vector(&x);
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(mean.abs() <= 1e-12);
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn convolve_matches_nested_loop(s in any::<u64>(), k in prop::sample::select(vec![1usize, 3, 5])) {
            let mut rng = seed::rng(s);
            let p = random_map(6, 3, &mut rng);
            let f = random_map(k, k, &mut rng);
            let a = convolve_same(&p, &f);
            let b = nested_loop_correlate(&p, &f);
            for (x, y) in a.data().iter().zip(b.data()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }
}
