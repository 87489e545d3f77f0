//! Independent reference implementations shared by the integration tests.
//! Nothing here calls into the code paths it is used to check.

#![allow(dead_code)]

use gmx::{DistanceMatrix, ImageTensor, NormalizedSaliency};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Symmetric matrix with uniform `[0, 1)` off-diagonal entries.
pub fn random_symmetric(m: usize, seed: u64) -> DistanceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let x: f64 = rng.random();
            v[i * m + j] = x;
            v[j * m + i] = x;
        }
    }
    DistanceMatrix::new(m, v).unwrap()
}

/// Every permutation of `0..m` in lexicographic order (no pruning).
pub fn all_permutations(m: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..rest.len() {
            let v = rest.remove(k);
            prefix.push(v);
            rec(prefix, rest, out);
            prefix.pop();
            rest.insert(k, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..m).collect(), &mut out);
    out
}

/// Permutations with no fixed point and no 2-cycle.
pub fn valid_covers(m: usize) -> Vec<Vec<usize>> {
    all_permutations(m)
        .into_iter()
        .filter(|p| (0..m).all(|i| p[i] != i && p[p[i]] != i))
        .collect()
}

pub fn cover_weight(w: &DistanceMatrix, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| w.get(i, j)).sum()
}

/// Optimal cover by enumeration; the first (lexicographically smallest)
/// maximizer wins ties.
pub fn brute_force_best(w: &DistanceMatrix) -> (Vec<usize>, f64) {
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for p in valid_covers(w.m()) {
        let v = cover_weight(w, &p);
        if v > best.1 {
            best = (p, v);
        }
    }
    best
}

/// Best single Hamiltonian cycle by enumeration.
pub fn best_hamiltonian(w: &DistanceMatrix) -> f64 {
    valid_covers(w.m())
        .into_iter()
        .filter(|p| cycle_count(p) == 1)
        .map(|p| cover_weight(w, &p))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn cycle_count(perm: &[usize]) -> usize {
    let mut seen = vec![false; perm.len()];
    let mut n = 0;
    for s in 0..perm.len() {
        if !seen[s] {
            n += 1;
            let mut v = s;
            while !seen[v] {
                seen[v] = true;
                v = perm[v];
            }
        }
    }
    n
}

/// Two heavy triangles {0,1,2} and {3,4,5}: intra-triangle edges 10,
/// cross edges 1.
pub fn two_triangles() -> DistanceMatrix {
    let m = 6;
    let v = (0..m * m)
        .map(|k| {
            let (i, j) = (k / m, k % m);
            if i == j {
                0.0
            } else if (i < 3) == (j < 3) {
                10.0
            } else {
                1.0
            }
        })
        .collect();
    DistanceMatrix::new(m, v).unwrap()
}

pub fn worked_example() -> DistanceMatrix {
    DistanceMatrix::from_rows(&[
        vec![0.0, 5.0, 2.0, 1.0],
        vec![5.0, 0.0, 3.0, 4.0],
        vec![2.0, 3.0, 0.0, 6.0],
        vec![1.0, 4.0, 6.0, 0.0],
    ])
    .unwrap()
}

// ---------------------------------------------------------------------------
// Spectral residual reference: naive DFT, explicit mirror padding.

#[derive(Clone, Copy, Debug)]
struct C(f64, f64);

impl C {
    fn mul(self, o: C) -> C {
        C(self.0 * o.0 - self.1 * o.1, self.0 * o.1 + self.1 * o.0)
    }
    fn add(self, o: C) -> C {
        C(self.0 + o.0, self.1 + o.1)
    }
    fn abs(self) -> f64 {
        self.0.hypot(self.1)
    }
}

fn dft_1d(x: &[C], inverse: bool) -> Vec<C> {
    let n = x.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    (0..n)
        .map(|k| {
            x.iter().enumerate().fold(C(0.0, 0.0), |acc, (t, &v)| {
                let ang = sign * 2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                acc.add(v.mul(C(ang.cos(), ang.sin())))
            })
        })
        .collect()
}

fn dft_2d(data: &[C], h: usize, w: usize, inverse: bool) -> Vec<C> {
    let mut rows: Vec<C> = Vec::with_capacity(h * w);
    for y in 0..h {
        rows.extend(dft_1d(&data[y * w..(y + 1) * w], inverse));
    }
    let mut out = rows.clone();
    for x in 0..w {
        let col: Vec<C> = (0..h).map(|y| rows[y * w + x]).collect();
        for (y, v) in dft_1d(&col, inverse).into_iter().enumerate() {
            out[y * w + x] = v;
        }
    }
    out
}

fn mirror(i: isize, n: usize) -> usize {
    // ... 2 1 | 0 1 2 ... n-1 | n-2 ...
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let mut i = i;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// Spectral residual of a single-channel image whose longer side already
/// equals the working size, so no resampling is involved.
pub fn reference_spectral_residual(gray: &[f64], h: usize, w: usize, eps_rel: f64) -> Vec<f64> {
    // phase of a numerically null bin is taken as 0
    let input: Vec<C> = gray.iter().map(|&v| C(v, 0.0)).collect();
    let f = dft_2d(&input, h, w, false);
    let peak = f.iter().map(|c| c.abs()).fold(0.0, f64::max);
    let l: Vec<f64> = f.iter().map(|c| (c.abs() + eps_rel * peak).ln()).collect();
    let mut rebuilt = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    s += l[mirror(y as isize + dy, h) * w + mirror(x as isize + dx, w)];
                }
            }
            let r = l[y * w + x] - s / 9.0;
            let c = f[y * w + x];
            let phase = if c.abs() <= 1e-10 * peak {
                0.0
            } else {
                c.1.atan2(c.0)
            };
            rebuilt.push(C(r.exp() * phase.cos(), r.exp() * phase.sin()));
        }
    }
    let n = (h * w) as f64;
    dft_2d(&rebuilt, h, w, true)
        .into_iter()
        .map(|c| {
            let a = c.abs() / n;
            a * a
        })
        .collect()
}

/// Separable Gaussian blur, kernel 7 / sigma 3, mirror padding.
pub fn reference_blur(map: &[f64], h: usize, w: usize) -> Vec<f64> {
    let k: Vec<f64> = (0..7)
        .map(|i| (-((i as f64 - 3.0).powi(2)) / 18.0).exp())
        .collect();
    let ks: f64 = k.iter().sum();
    let k: Vec<f64> = k.iter().map(|v| v / ks).collect();
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (a, ka) in k.iter().enumerate() {
                for (b, kb) in k.iter().enumerate() {
                    let yy = mirror(y as isize + a as isize - 3, h);
                    let xx = mirror(x as isize + b as isize - 3, w);
                    acc += ka * kb * map[yy * w + xx];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

pub fn blob_image(size: usize, lo: usize, hi: usize) -> ImageTensor {
    ImageTensor::from_fn(size, size, 1, |y, x, _| {
        if (lo..hi).contains(&y) && (lo..hi).contains(&x) {
            1.0
        } else {
            0.0
        }
    })
    .unwrap()
}

// ---------------------------------------------------------------------------
// Mixing reference: direct per-pair evaluation of the mixing formulas.

pub struct PairOracle {
    pub image: Vec<f64>,
    pub mask_src: Vec<f64>,
    pub lambda_src: f64,
    pub label: Vec<f64>,
}

pub fn per_pair_oracle(
    x_s: &ImageTensor,
    x_t: &ImageTensor,
    z_s: &NormalizedSaliency,
    z_t: &NormalizedSaliency,
    y_s: &[f64],
    y_t: &[f64],
) -> PairOracle {
    let n = z_s.len();
    let c = x_s.channels();
    let mask_src: Vec<f64> = (0..n)
        .map(|k| {
            let (a, b) = (z_s.values()[k], z_t.values()[k]);
            if a + b < 1e-12 {
                0.5
            } else {
                a / (a + b)
            }
        })
        .collect();
    let image = (0..n * c)
        .map(|k| {
            let m = mask_src[k / c];
            m * x_s.data()[k] as f64 + (1.0 - m) * x_t.data()[k] as f64
        })
        .collect();
    let lambda_src = mask_src.iter().sum::<f64>() / n as f64;
    let lambda_tgt = mask_src.iter().map(|m| 1.0 - m).sum::<f64>() / n as f64;
    let label = y_s
        .iter()
        .zip(y_t)
        .map(|(a, b)| lambda_src * a + lambda_tgt * b)
        .collect();
    PairOracle {
        image,
        mask_src,
        lambda_src,
        label,
    }
}

pub fn random_image(h: usize, w: usize, c: usize, rng: &mut ChaCha8Rng) -> ImageTensor {
    let data = (0..h * w * c).map(|_| rng.random::<f32>()).collect();
    ImageTensor::new(h, w, c, data).unwrap()
}

/// A random nonnegative map normalized to sum 1; some pixels are zero.
pub fn random_normalized(h: usize, w: usize, rng: &mut ChaCha8Rng) -> NormalizedSaliency {
    let mut v: Vec<f64> = (0..h * w)
        .map(|_| {
            if rng.random_bool(0.2) {
                0.0
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    let s: f64 = v.iter().sum();
    if s == 0.0 {
        v = vec![1.0; h * w];
    }
    let s: f64 = v.iter().sum();
    NormalizedSaliency::from_values_unnormalized(h, w, v.iter().map(|x| x / s).collect()).unwrap()
}

pub mod pipeline;
