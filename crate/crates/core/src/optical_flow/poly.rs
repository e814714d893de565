use crate::frame_io::FrameBuffer;

/// Per-pixel quadratic model `f(d) ≈ dᵀ A d + bᵀ d + c` of local intensity.
///
/// `A` is stored as its three distinct entries (`a11`, `a12`, `a22`);
/// `d = (dx, dy)` is measured in pixels from the pixel center.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyExpansion {
    pub width: usize,
    pub height: usize,
    pub a11: Vec<f64>,
    pub a12: Vec<f64>,
    pub a22: Vec<f64>,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub c: Vec<f64>,
}

impl PolyExpansion {
    pub fn a(&self, i: usize) -> [[f64; 2]; 2] {
        [[self.a11[i], self.a12[i]], [self.a12[i], self.a22[i]]]
    }

    pub fn b(&self, i: usize) -> [f64; 2] {
        [self.b1[i], self.b2[i]]
    }
}

/// Inverts a small dense matrix by Gauss-Jordan elimination with partial
/// pivoting.
fn invert<const N: usize>(mut m: [[f64; N]; N]) -> Option<[[f64; N]; N]> {
    let mut inv = [[0.0; N]; N];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..N {
        let pivot = (col..N).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let p = m[col][col];
        for j in 0..N {
            m[col][j] /= p;
            inv[col][j] /= p;
        }
        for row in 0..N {
            if row != col {
                let f = m[row][col];
                if f != 0.0 {
                    for j in 0..N {
                        m[row][j] -= f * m[col][j];
                        inv[row][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Fits a Gaussian-weighted quadratic over an `n`x`n` neighborhood of every
/// pixel, replicating border pixels.
///
/// The basis is `{1, x, y, x², y², xy}`. Weights are separable, so the six
/// correlations come from three horizontal and six vertical 1-D passes, and
/// the normal matrix is the same for every pixel.
pub fn polynomial_expansion(frame: &FrameBuffer, n: usize, sigma: f64) -> PolyExpansion {
    assert!(n % 2 == 1 && n >= 3, "poly_n must be odd and >= 3");
    let (w, h) = frame.dims();
    let r = (n / 2) as isize;
    let g: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let k0 = g.clone();
    let k1: Vec<f64> = (-r..=r).zip(&g).map(|(i, g)| i as f64 * g).collect();
    let k2: Vec<f64> = (-r..=r).zip(&g).map(|(i, g)| (i * i) as f64 * g).collect();

    let mut normal = [[0.0; 6]; 6];
    for (j, gy) in (-r..=r).zip(&g) {
        for (i, gx) in (-r..=r).zip(&g) {
            let (x, y) = (i as f64, j as f64);
            let phi = [1.0, x, y, x * x, y * y, x * y];
            let wgt = gx * gy;
            for a in 0..6 {
                for b in 0..6 {
                    normal[a][b] += wgt * phi[a] * phi[b];
                }
            }
        }
    }
    let inv = invert(normal).expect("normal matrix of a positive-weight fit is invertible");

    let data = frame.data();
    let len = w * h;
    let (mut h0, mut h1, mut h2) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for x in 0..w {
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for t in 0..n {
                let sx = (x as isize + t as isize - r).clamp(0, w as isize - 1) as usize;
                let v = row[sx] as f64;
                s0 += k0[t] * v;
                s1 += k1[t] * v;
                s2 += k2[t] * v;
            }
            let i = y * w + x;
            h0[i] = s0;
            h1[i] = s1;
            h2[i] = s2;
        }
    }

    let mut out = PolyExpansion {
        width: w,
        height: h,
        a11: vec![0.0; len],
        a12: vec![0.0; len],
        a22: vec![0.0; len],
        b1: vec![0.0; len],
        b2: vec![0.0; len],
        c: vec![0.0; len],
    };
    for y in 0..h {
        for x in 0..w {
            // r = [Σw·I, Σw·xI, Σw·yI, Σw·x²I, Σw·y²I, Σw·xyI]
            let mut rhs = [0.0; 6];
            for t in 0..n {
                let sy = (y as isize + t as isize - r).clamp(0, h as isize - 1) as usize;
                let j = sy * w + x;
                rhs[0] += k0[t] * h0[j];
                rhs[1] += k0[t] * h1[j];
                rhs[2] += k1[t] * h0[j];
                rhs[3] += k0[t] * h2[j];
                rhs[4] += k2[t] * h0[j];
                rhs[5] += k1[t] * h1[j];
            }
            let coef = |row: usize| -> f64 { inv[row].iter().zip(&rhs).map(|(a, b)| a * b).sum() };
            let i = y * w + x;
            out.c[i] = coef(0);
            out.b1[i] = coef(1);
            out.b2[i] = coef(2);
            out.a11[i] = coef(3);
            out.a22[i] = coef(4);
            out.a12[i] = coef(5) / 2.0;
        }
    }
    out
}
