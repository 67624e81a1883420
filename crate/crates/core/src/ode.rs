//! Shared numerics: adaptive Dormand–Prince 5(4) integration of complex
//! linear/nonlinear ODE systems, and the scaling-and-squaring matrix
//! exponential used for fixed-step propagation of correlations and
//! trajectory segments.

use ndarray::{Array1, Array2};
use ndarray_linalg::{FactorizeInto, Norm, Solve};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Tolerances shared by the density-matrix and amplitude integrators.
pub const DEFAULT_RTOL: f64 = 1e-9;
pub const DEFAULT_ATOL: f64 = 1e-12;

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrate dy/dt = f(t, y) from `t0` to each point of the increasing
/// `t_grid` (whose first entry must equal `t0`), returning the state at every
/// grid point. Step size adapts to the requested tolerances; steps are
/// clamped to land exactly on grid points.
pub fn integrate_to_grid<F>(
    mut f: F,
    t0: f64,
    y0: &Array1<C64>,
    t_grid: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Vec<Array1<C64>>>
where
    F: FnMut(f64, &Array1<C64>) -> Array1<C64>,
{
    if t_grid.is_empty() {
        return Err(Error::InvalidParam("empty time grid".into()));
    }
    if (t_grid[0] - t0).abs() > 1e-14 * (1.0 + t0.abs()) {
        return Err(Error::InvalidParam(format!(
            "time grid must start at t0 = {t0}, got {}",
            t_grid[0]
        )));
    }
    for w in t_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidParam("time grid must be strictly increasing".into()));
        }
    }

    let mut out = Vec::with_capacity(t_grid.len());
    out.push(y0.clone());

    let mut t = t0;
    let mut y = y0.clone();
    let mut k0 = f(t, &y);
    // initial step guess from the RHS magnitude
    let mut h = {
        let ynorm = y.norm_l2().max(atol);
        let fnorm = k0.norm_l2().max(1e-300);
        (0.01 * ynorm / fnorm).min(t_grid[t_grid.len() - 1] - t0)
    };

    for &t_target in &t_grid[1..] {
        while t < t_target {
            let h_try = h.min(t_target - t);
            if h_try < 1e-14 * (1.0 + t.abs()) {
                return Err(Error::StepSizeUnderflow { t });
            }
            let (y_new, k_new, err) = dp_step(&mut f, t, &y, &k0, h_try, rtol, atol);
            if err <= 1.0 {
                t += h_try;
                y = y_new;
                k0 = k_new;
                let scale = (SAFETY * err.powf(-0.2)).clamp(MIN_SCALE, MAX_SCALE);
                h = h_try * scale;
            } else {
                let scale = (SAFETY * err.powf(-0.2)).clamp(MIN_SCALE, 1.0);
                h = h_try * scale;
                if h < 1e-15 * (1.0 + t.abs()) {
                    return Err(Error::StepSizeUnderflow { t });
                }
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

/// One Dormand-Prince step; returns (y5, f(t+h, y5), scaled error norm).
fn dp_step<F>(
    f: &mut F,
    t: f64,
    y: &Array1<C64>,
    k0: &Array1<C64>,
    h: f64,
    rtol: f64,
    atol: f64,
) -> (Array1<C64>, Array1<C64>, f64)
where
    F: FnMut(f64, &Array1<C64>) -> Array1<C64>,
{
    let hc = C64::new(h, 0.0);
    let mut k: Vec<Array1<C64>> = Vec::with_capacity(7);
    k.push(k0.clone());
    for s in 0..6 {
        let mut ys = y.clone();
        for (j, kj) in k.iter().enumerate() {
            if A[s][j] != 0.0 {
                ys = ys + kj.mapv(|z| z * hc * C64::new(A[s][j], 0.0));
            }
        }
        k.push(f(t + C[s] * h, &ys));
    }

    let mut y5 = y.clone();
    let mut y4 = y.clone();
    for (j, kj) in k.iter().enumerate() {
        if B5[j] != 0.0 {
            y5 = y5 + kj.mapv(|z| z * hc * C64::new(B5[j], 0.0));
        }
        if B4[j] != 0.0 {
            y4 = y4 + kj.mapv(|z| z * hc * C64::new(B4[j], 0.0));
        }
    }

    // FSAL: k[6] = f(t+h, y5) already computed as the last stage
    let k_new = k.pop().unwrap();

    let mut err_sq = 0.0f64;
    for i in 0..y.len() {
        let sc = atol + rtol * y[i].norm().max(y5[i].norm());
        let e = (y5[i] - y4[i]).norm() / sc;
        err_sq += e * e;
    }
    let err = (err_sq / y.len() as f64).sqrt();
    (y5, k_new, err)
}

/// Matrix exponential exp(M) by Padé(13) with scaling and squaring.
pub fn expm(m: &Array2<C64>) -> Result<Array2<C64>> {
    let d = m.nrows();
    let id: Array2<C64> = Array2::eye(d).mapv(|x: f64| C64::new(x, 0.0));

    // 1-norm based scaling
    let norm1 = (0..d)
        .map(|j| (0..d).map(|i| m[[i, j]].norm()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let theta13 = 5.371920351148152;
    let s = if norm1 > theta13 {
        (norm1 / theta13).log2().ceil() as i32
    } else {
        0
    };
    let a = m.mapv(|z| z / C64::new(2f64.powi(s), 0.0));

    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];

    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let u_inner = a6.mapv(|z| z * C64::new(B[13], 0.0))
        + a4.mapv(|z| z * C64::new(B[11], 0.0))
        + a2.mapv(|z| z * C64::new(B[9], 0.0));
    let u = a.dot(
        &(a6.dot(&u_inner)
            + a6.mapv(|z| z * C64::new(B[7], 0.0))
            + a4.mapv(|z| z * C64::new(B[5], 0.0))
            + a2.mapv(|z| z * C64::new(B[3], 0.0))
            + id.mapv(|z| z * C64::new(B[1], 0.0))),
    );
    let v_inner = a6.mapv(|z| z * C64::new(B[12], 0.0))
        + a4.mapv(|z| z * C64::new(B[10], 0.0))
        + a2.mapv(|z| z * C64::new(B[8], 0.0));
    let v = a6.dot(&v_inner)
        + a6.mapv(|z| z * C64::new(B[6], 0.0))
        + a4.mapv(|z| z * C64::new(B[4], 0.0))
        + a2.mapv(|z| z * C64::new(B[2], 0.0))
        + id.mapv(|z| z * C64::new(B[0], 0.0));

    // solve (V - U) X = (V + U)
    let lhs = &v - &u;
    let rhs = &v + &u;
    let factored = lhs.factorize_into()?;
    let mut x = Array2::<C64>::zeros((d, d));
    for j in 0..d {
        let col = rhs.column(j).to_owned();
        let sol = factored.solve_into(col)?;
        x.column_mut(j).assign(&sol);
    }

    for _ in 0..s {
        x = x.dot(&x);
    }
    Ok(x)
}
