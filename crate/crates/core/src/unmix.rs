//! Endmember extraction by vertex component analysis (VCA), non-negative least-squares
//! abundance regression, and maximum-abundance pixel classification.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hypercube::{AcquisitionMeta, HyperCube, Plane};

/// Relative singular-value threshold used for the rank guard. Cubes are stored
/// in `f32`, so exactly low-rank data carries rounding noise near 1e-8 relative.
pub const RANK_TOLERANCE: f64 = 1e-6;

/// B×K matrix of endmember spectra, one per column.
#[derive(Debug, Clone, PartialEq)]
pub struct EndmemberSet {
    spectra: DMatrix<f64>,
    names: Vec<String>,
}

impl EndmemberSet {
    pub fn new(spectra: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let k = spectra.ncols();
        if k == 0 {
            return Err(Error::Validation("endmember set needs at least one column".into()));
        }
        if names.len() != k {
            return Err(Error::Validation(format!("{} names for {k} endmembers", names.len())));
        }
        if spectra.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("endmember spectra contain non-finite values".into()));
        }
        if let Some(j) = (0..k).find(|&j| spectra.column(j).iter().all(|&v| v == 0.0)) {
            return Err(Error::Validation(format!("endmember {j} is all zero")));
        }
        Ok(Self { spectra, names })
    }

    /// Endmembers named `em0`, `em1`, ...
    pub fn unnamed(spectra: DMatrix<f64>) -> Result<Self> {
        let names = (0..spectra.ncols()).map(|j| format!("em{j}")).collect();
        Self::new(spectra, names)
    }

    pub fn spectra(&self) -> &DMatrix<f64> {
        &self.spectra
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn count(&self) -> usize {
        self.spectra.ncols()
    }

    pub fn bands(&self) -> usize {
        self.spectra.nrows()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.spectra.column(j).iter().copied().collect()
    }
}

/// Non-negative abundances, K planes over an H×W grid, stored (row, col, k).
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceCube {
    pub height: usize,
    pub width: usize,
    pub k: usize,
    values: Vec<f64>,
}

impl AbundanceCube {
    pub fn new(height: usize, width: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width * k {
            return Err(Error::Shape(format!(
                "abundance cube {height}x{width}x{k} needs {} values, got {}",
                height * width * k,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation("abundances must be finite and non-negative".into()));
        }
        Ok(Self {
            height,
            width,
            k,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pixel(&self, p: usize) -> &[f64] {
        &self.values[p * self.k..(p + 1) * self.k]
    }

    pub fn get(&self, row: usize, col: usize, j: usize) -> f64 {
        self.values[(row * self.width + col) * self.k + j]
    }

    pub fn plane(&self, j: usize) -> Plane {
        let data = (0..self.height * self.width).map(|p| self.values[p * self.k + j]).collect();
        Plane {
            height: self.height,
            width: self.width,
            data,
        }
    }

    /// Exports as a K-band cube (axis = endmember index) for `HRC1` storage.
    pub fn to_cube(&self, meta: AcquisitionMeta) -> Result<HyperCube> {
        let mut axis: Vec<f64> = (0..self.k).map(|j| j as f64).collect();
        let mut data: Vec<f32> = self.values.iter().map(|&v| v as f32).collect();
        if self.k == 1 {
            // HRC1 needs two bands; pad with a zero plane.
            axis.push(1.0);
            data = data.into_iter().flat_map(|v| [v, 0.0]).collect();
        }
        HyperCube::new(self.height, self.width, axis, data, meta)
    }
}

/// Per-pixel class labels in `[0, K)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<usize>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::Shape(format!(
                "label map {height}x{width} needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn get(&self, row: usize, col: usize) -> usize {
        self.labels[row * self.width + col]
    }
}

/// Angle between two spectra in radians, computed as 2·atan2(|â − b̂|, |â + b̂|).
pub fn spectral_angle(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Best assignment of estimated to reference endmembers by exhaustive search
/// (K ≤ 8). Returns `perm` with estimate `perm[j]` matched to reference `j`, and
/// the largest matched spectral angle.
pub fn match_endmembers(reference: &EndmemberSet, estimate: &EndmemberSet) -> Result<(Vec<usize>, f64)> {
    let k = reference.count();
    if estimate.count() != k || estimate.bands() != reference.bands() {
        return Err(Error::Shape("endmember sets differ in count or bands".into()));
    }
    if k > 8 {
        return Err(Error::Param("exhaustive matching supports at most 8 endmembers".into()));
    }
    let angles: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let r = reference.column(i);
            (0..k).map(|j| spectral_angle(&r, &estimate.column(j))).collect()
        })
        .collect();
    let mut best = (Vec::new(), f64::INFINITY);
    for perm in permutations(k) {
        let worst = (0..k).map(|i| angles[i][perm[i]]).fold(0.0, f64::max);
        if worst < best.1 {
            best = (perm, worst);
        }
    }
    Ok(best)
}

fn cube_matrix(cube: &HyperCube) -> DMatrix<f64> {
    let (b, n) = (cube.bands(), cube.pixels());
    DMatrix::from_fn(b, n, |i, j| f64::from(cube.data()[j * b + i]))
}

/// Left singular vectors sorted by decreasing singular value.
fn sorted_svd(m: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sorted_u = DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let sv = order.iter().map(|&j| svd.singular_values[j]).collect();
    (sorted_u, sv)
}

/// Numerical rank of the pixel matrix.
pub fn data_rank(cube: &HyperCube) -> usize {
    let (_, sv) = sorted_svd(&cube_matrix(cube));
    let top = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|&&s| s > top * RANK_TOLERANCE).count()
}

/// Signal-to-noise estimate (dB) from the full-data power and the power retained
/// in the p-dimensional projection.
fn estimate_snr(y: &DMatrix<f64>, mean: &DVector<f64>, x_proj: &DMatrix<f64>) -> f64 {
    let (l, n) = (y.nrows() as f64, y.ncols() as f64);
    let p = x_proj.nrows() as f64;
    let p_y = y.iter().map(|v| v * v).sum::<f64>() / n;
    let p_x = x_proj.iter().map(|v| v * v).sum::<f64>() / n + mean.dot(mean);
    let noise = p_y - p_x;
    if noise <= p_y * 1e-12 {
        return f64::INFINITY;
    }
    10.0 * ((p_x - p / l * p_y) / noise).log10()
}

/// Vertex component analysis. Picks `k` pixels as endmembers by repeatedly projecting
/// the data onto a random direction orthogonal to the endmembers already found.
pub fn vca(cube: &HyperCube, k: usize, seed: u64) -> Result<EndmemberSet> {
    let (l, n) = (cube.bands(), cube.pixels());
    if k == 0 || k > l.min(n) {
        return Err(Error::Param(format!(
            "endmember count {k} must lie in [1, min(bands {l}, pixels {n})]"
        )));
    }
    let y = cube_matrix(cube);
    let (u_full, sv) = sorted_svd(&y);
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > top * RANK_TOLERANCE).count();
    if rank < k {
        return Err(Error::Rank { rank, requested: k });
    }

    let mean = y.column_mean();
    let centered = DMatrix::from_fn(l, n, |i, j| y[(i, j)] - mean[i]);
    let (u_centered, _) = sorted_svd(&centered);
    let ud = u_centered.columns(0, k.min(u_centered.ncols())).into_owned();
    let x_p = ud.transpose() * &centered;
    let snr = estimate_snr(&y, &mean, &x_p);
    let snr_threshold = 15.0 + 10.0 * (k as f64).log10();

    // `proj` is the projected data used for selection, `denoised` the data the
    // endmembers are read from.
    let (proj, denoised) = if snr < snr_threshold && k > 1 {
        let d = k - 1;
        let ud = ud.columns(0, d).into_owned();
        let x = x_p.rows(0, d).into_owned();
        let mut denoised = &ud * &x;
        for j in 0..n {
            for i in 0..l {
                denoised[(i, j)] += mean[i];
            }
        }
        let c = (0..n).map(|j| x.column(j).norm()).fold(0.0, f64::max);
        let mut proj = DMatrix::zeros(k, n);
        proj.rows_mut(0, d).copy_from(&x);
        proj.row_mut(d).fill(c);
        (proj, denoised)
    } else {
        let ud = u_full.columns(0, k).into_owned();
        let x = ud.transpose() * &y;
        let denoised = &ud * &x;
        let u = x.column_mean();
        let mut proj = x.clone();
        for j in 0..n {
            let scale = u.dot(&x.column(j));
            if scale.abs() > f64::MIN_POSITIVE {
                proj.column_mut(j).scale_mut(1.0 / scale);
            } else {
                proj.column_mut(j).fill(0.0);
            }
        }
        (proj, denoised)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::<f64>::zeros(k, k);
    a[(k - 1, 0)] = 1.0;
    let mut picked = Vec::with_capacity(k);
    for i in 0..k {
        let w = DVector::<f64>::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
        let pinv = a
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Value(format!("pseudo-inverse failed: {e}")))?;
        let mut f = &w - &a * (pinv * &w);
        let norm = f.norm();
        f = if norm > 1e-12 * w.norm() { f / norm } else { &w / w.norm() };
        let v = f.transpose() * &proj;
        let idx = v
            .iter()
            .enumerate()
            .filter(|(j, _)| !picked.contains(j))
            .max_by(|(_, x), (_, y)| x.abs().total_cmp(&y.abs()))
            .map(|(j, _)| j)
            .unwrap_or(0);
        picked.push(idx);
        a.set_column(i, &proj.column(idx));
    }
    let spectra = DMatrix::from_fn(l, k, |i, j| denoised[(i, picked[j])]);
    EndmemberSet::unnamed(spectra)
}

/// Lawson-Hanson active-set NNLS: minimizes ‖Ax − b‖₂ subject to x ≥ 0.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, k) = a.shape();
    if k == 0 {
        return Err(Error::Value("NNLS needs at least one column".into()));
    }
    if b.len() != m {
        return Err(Error::Shape(format!("A has {m} rows but b has {}", b.len())));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Value("NNLS input contains non-finite values".into()));
    }
    let atb = a.transpose() * b;
    let scale = atb.amax();
    let mut x = DVector::zeros(k);
    if scale == 0.0 {
        return Ok(x);
    }
    let tol = 1e-10 * scale;
    let mut passive = vec![false; k];
    let mut rejected = vec![false; k];

    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let cols: Vec<usize> = (0..k).filter(|&j| passive[j]).collect();
        let sub = DMatrix::from_fn(m, cols.len(), |i, c| a[(i, cols[c])]);
        let sol = sub
            .svd(true, true)
            .solve(b, 1e-15)
            .unwrap_or_else(|_| DVector::zeros(cols.len()));
        let mut z = DVector::zeros(k);
        for (c, &j) in cols.iter().enumerate() {
            z[j] = sol[c];
        }
        z
    };

    for _ in 0..(3 * k + 10) {
        let w = &atb - a.transpose() * (a * &x);
        let candidate = (0..k)
            .filter(|&j| !passive[j] && !rejected[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate.filter(|&j| w[j] > tol) else {
            break;
        };
        passive[j] = true;
        let mut inner = 0;
        loop {
            inner += 1;
            let z = solve_passive(&passive);
            if (0..k).filter(|&i| passive[i]).all(|i| z[i] > 0.0) {
                x = z;
                break;
            }
            if inner > 3 * k + 10 {
                break;
            }
            let alpha = (0..k)
                .filter(|&i| passive[i] && z[i] <= 0.0)
                .map(|i| x[i] / (x[i] - z[i]))
                .fold(f64::INFINITY, f64::min);
            x = &x + (z - &x) * alpha;
            for i in 0..k {
                if passive[i] && x[i] <= 1e-14 * scale.max(1.0) {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
        if !passive[j] && x[j] == 0.0 {
            // The column was dropped straight away; numerically it cannot improve the fit.
            rejected[j] = true;
        } else {
            rejected.iter_mut().for_each(|r| *r = false);
        }
    }
    x.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(x)
}

/// Per-pixel NNLS of the cube against the endmember spectra.
pub fn abundance_map(cube: &HyperCube, ems: &EndmemberSet) -> Result<AbundanceCube> {
    if ems.bands() != cube.bands() {
        return Err(Error::Shape(format!(
            "endmembers have {} bands, cube has {}",
            ems.bands(),
            cube.bands()
        )));
    }
    let k = ems.count();
    let mut values = Vec::with_capacity(cube.pixels() * k);
    for p in 0..cube.pixels() {
        let b = DVector::from_iterator(cube.bands(), cube.pixel_at(p).iter().map(|&v| f64::from(v)));
        values.extend(nnls(ems.spectra(), &b)?.iter());
    }
    AbundanceCube::new(cube.height(), cube.width(), k, values)
}

/// Label = index of the largest abundance; ties go to the lowest index.
pub fn classify_pixels(ab: &AbundanceCube) -> LabelMap {
    let labels = (0..ab.height * ab.width)
        .map(|p| {
            let px = ab.pixel(p);
            let mut best = 0;
            for j in 1..px.len() {
                if px[j] > px[best] {
                    best = j;
                }
            }
            best
        })
        .collect();
    LabelMap {
        height: ab.height,
        width: ab.width,
        labels,
    }
}

/// Fraction of pixels whose labels agree.
pub fn classification_accuracy(pred: &LabelMap, reference: &LabelMap) -> Result<f64> {
    if (pred.height, pred.width) != (reference.height, reference.width) {
        return Err(Error::Shape(format!(
            "label maps differ: {}x{} vs {}x{}",
            pred.height, pred.width, reference.height, reference.width
        )));
    }
    let same = pred.labels.iter().zip(&reference.labels).filter(|(a, b)| a == b).count();
    Ok(same as f64 / pred.labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_from_pixels(h: usize, w: usize, pixels: &[Vec<f64>]) -> HyperCube {
        let b = pixels[0].len();
        let data = pixels.iter().flatten().map(|&v| v as f32).collect();
        HyperCube::new(h, w, (0..b).map(|i| i as f64).collect(), data, AcquisitionMeta::default()).unwrap()
    }

    #[test]
    fn nnls_identity_cases() {
        let a = DMatrix::identity(2, 2);
        let x = nnls(&a, &DVector::from_vec(vec![3.0, -2.0])).unwrap();
        assert_eq!(x.as_slice(), &[3.0, 0.0]);
        let x = nnls(&a, &DVector::from_vec(vec![1.5, 0.25])).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-14 && (x[1] - 0.25).abs() < 1e-14);
    }

    #[test]
    fn nnls_rejects_non_finite() {
        let a = DMatrix::from_vec(2, 1, vec![1.0, f64::NAN]);
        assert!(matches!(nnls(&a, &DVector::from_vec(vec![1.0, 1.0])), Err(Error::Value(_))));
    }

    #[test]
    fn nnls_zero_rhs() {
        let a = DMatrix::from_vec(3, 2, vec![1.0, 2.0, 3.0, -1.0, 0.5, 2.0]);
        let x = nnls(&a, &DVector::zeros(3)).unwrap();
        assert_eq!(x.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn vca_single_vertex_on_constant_cube() {
        let spec: Vec<f64> = (0..6).map(|i| 1.0 + i as f64).collect();
        let cube = cube_from_pixels(2, 3, &vec![spec.clone(); 6]);
        let ems = vca(&cube, 1, 0).unwrap();
        assert!(spectral_angle(&ems.column(0), &spec) < 1e-6);
        assert!(ems.column(0).iter().zip(&spec).all(|(a, b)| a / b > 0.0));
    }

    #[test]
    fn vca_rank_guard() {
        let e = [vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0, 0.0, 0.0, 2.0]];
        let pixels: Vec<Vec<f64>> = (0..9)
            .map(|p| {
                let w = [(p % 3) as f64 + 0.1, (p / 3) as f64 + 0.2, 0.5];
                (0..6).map(|i| w[0] * e[0][i] + w[1] * e[1][i] + w[2] * e[2][i]).collect()
            })
            .collect();
        let cube = cube_from_pixels(3, 3, &pixels);
        assert_eq!(data_rank(&cube), 3);
        assert!(matches!(vca(&cube, 5, 1), Err(Error::Rank { rank: 3, requested: 5 })));
        assert!(matches!(vca(&cube, 0, 1), Err(Error::Param(_))));
    }

    #[test]
    fn abundance_exact_membership_and_mixture() {
        let e1 = [1.0, 0.0, 0.0, 0.0];
        let e2 = vec![0.0, 1.0, 1.0, 0.0];
        let ems = EndmemberSet::unnamed(DMatrix::from_fn(4, 2, |i, j| if j == 0 { e1[i] } else { e2[i] })).unwrap();
        let mix: Vec<f64> = (0..4).map(|i| 0.3 * e1[i] + 0.7 * e2[i]).collect();
        let cube = cube_from_pixels(1, 2, &[e2.clone(), mix]);
        let ab = abundance_map(&cube, &ems).unwrap();
        assert!((ab.get(0, 0, 1) - 1.0).abs() < 1e-12 && ab.get(0, 0, 0).abs() < 1e-12);
        // f32 storage limits the mixture to ~1e-8.
        assert!((ab.get(0, 1, 0) - 0.3).abs() < 1e-7);
        assert!((ab.get(0, 1, 1) - 0.7).abs() < 1e-7);

        let zero = cube_from_pixels(1, 2, &[vec![0.0; 4], vec![0.0; 4]]);
        assert!(abundance_map(&zero, &ems).unwrap().values().iter().all(|&v| v == 0.0));

        let wrong = cube_from_pixels(1, 1, &[vec![1.0; 3]]);
        assert!(matches!(abundance_map(&wrong, &ems), Err(Error::Shape(_))));
    }

    #[test]
    fn classify_and_accuracy() {
        let ab = AbundanceCube::new(1, 3, 2, vec![0.1, 0.9, 0.5, 0.5, 0.7, 0.2]).unwrap();
        assert_eq!(classify_pixels(&ab).labels, vec![1, 0, 0]);
        let single = AbundanceCube::new(2, 1, 1, vec![0.3, 0.0]).unwrap();
        assert_eq!(classify_pixels(&single).labels, vec![0, 0]);

        let a = LabelMap::new(2, 2, vec![0, 1, 2, 3]).unwrap();
        let b = LabelMap::new(2, 2, vec![0, 1, 2, 0]).unwrap();
        let c = LabelMap::new(2, 2, vec![1, 0, 0, 1]).unwrap();
        assert_eq!(classification_accuracy(&a, &a).unwrap(), 1.0);
        assert_eq!(classification_accuracy(&a, &b).unwrap(), 0.75);
        assert_eq!(classification_accuracy(&a, &c).unwrap(), 0.0);
        let d = LabelMap::new(1, 4, vec![0; 4]).unwrap();
        assert!(matches!(classification_accuracy(&a, &d), Err(Error::Shape(_))));
    }

    #[test]
    fn endmember_set_validation() {
        assert!(EndmemberSet::unnamed(DMatrix::zeros(3, 0)).is_err());
        assert!(EndmemberSet::unnamed(DMatrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 0.0])).is_err());
        assert!(AbundanceCube::new(1, 1, 2, vec![0.5, -0.1]).is_err());
    }

    #[test]
    fn angle_basics() {
        assert!(spectral_angle(&[1.0, 2.0], &[2.0, 4.0]).abs() < 1e-15);
        assert!((spectral_angle(&[1.0, 0.0], &[0.0, 3.0]) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}
