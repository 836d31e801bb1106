//! Closed-form oracles: modified Bessel functions, the disk spectra of the
//! layer operators, fundamental solutions and point-mass layer potentials.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{dist, Point, TwoSidedDofMap, TriMesh};
use crate::spaces::CotraceVector;

pub const MAX_ORDER: u32 = 20;
pub const MAX_ARG: f64 = 50.0;

fn check_domain(n: u32, x: f64) -> Result<()> {
    if n > MAX_ORDER || !(x > 0.0 && x <= MAX_ARG) {
        return Err(Error::InvalidArgument(format!(
            "Bessel evaluation needs order <= {MAX_ORDER} and 0 < x <= {MAX_ARG}, got n = {n}, x = {x}"
        )));
    }
    Ok(())
}

/// Modified Bessel function of the first kind, by its power series.
pub fn bessel_i(n: u32, x: f64) -> Result<f64> {
    check_domain(n, x)?;
    let q = 0.25 * x * x;
    let mut term = (0..n).fold(1.0, |t, j| t * (0.5 * x) / (j + 1) as f64);
    let mut sum = term;
    for k in 1.. {
        term *= q / (k as f64 * (k + n) as f64);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    Ok(sum)
}

/// Modified Bessel function of the second kind from
/// `K_n(x) = ∫₀^∞ exp(−x cosh t) cosh(nt) dt`, by the trapezoid rule (which
/// converges geometrically for this analytic, rapidly decaying integrand).
pub fn bessel_k(n: u32, x: f64) -> Result<f64> {
    check_domain(n, x)?;
    let h = 1.0 / 64.0;
    let nf = n as f64;
    let f = |t: f64| {
        let e = nf * t - x * t.cosh();
        0.5 * (e.exp() + (-nf * t - x * t.cosh()).exp())
    };
    let mut sum = 0.5 * f(0.0);
    let mut peaked = false;
    for i in 1.. {
        let t = i as f64 * h;
        let v = f(t);
        sum += v;
        // the integrand is unimodal; stop on the decreasing flank
        if nf - x * t.sinh() < 0.0 {
            peaked = true;
        }
        if peaked && v < 1e-18 * sum {
            break;
        }
    }
    Ok(h * sum)
}

fn bessel_pair(n: u32, x: f64) -> Result<(f64, f64, f64, f64)> {
    // I_{-1} = I_1 and K_{-1} = K_1
    let m = if n == 0 { 1 } else { n - 1 };
    let (i, k) = (bessel_i(n, x)?, bessel_k(n, x)?);
    let (im, km) = (bessel_i(m, x)?, bessel_k(m, x)?);
    let ip = im - n as f64 / x * i;
    let kp = -km - n as f64 / x * k;
    Ok((i, k, ip, kp))
}

/// Eigenvalue of the Neumann–Poincaré operator (`k = 1`) on the circle of
/// radius `r` for the Fourier modes `e^{±inθ}`.
pub fn disk_np_eigenvalue(n: u32, r: f64) -> Result<f64> {
    let (i, k, ip, kp) = bessel_pair(n, r)?;
    Ok(0.5 * r * (k * ip + kp * i))
}

/// Eigenvalue of the single layer operator (`k = 1`) on the same circle.
pub fn disk_v_eigenvalue(n: u32, r: f64) -> Result<f64> {
    Ok(r * bessel_i(n, r)? * bessel_k(n, r)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelSpec {
    /// `K₀(|x|)/2π`, fundamental solution of `Δ − 1`.
    Yukawa2d,
    /// `−log|x|/2π`, fundamental solution of `−Δ`.
    Laplace2d,
}

impl KernelSpec {
    pub fn eval(self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("kernel evaluated at distance {r}")));
        }
        match self {
            KernelSpec::Yukawa2d => Ok(bessel_k(0, r)? / (2.0 * PI)),
            KernelSpec::Laplace2d => Ok(-r.ln() / (2.0 * PI)),
        }
    }
}

/// Coordinates of the interface DOFs, in trace order.
pub fn interface_points(mesh: &TriMesh, dofs: &TwoSidedDofMap) -> Vec<Point> {
    dofs.interface_nodes().iter().map(|&v| mesh.vertices()[v]).collect()
}

/// Potential of the point masses `g_j` at `nodes[j]`: `Σ_j G(x − y_j) g_j`.
///
/// Points closer than `min_distance` to a node are rejected, since the
/// kernel singularity would dominate the comparison with a discrete field.
pub fn layer_convolution(
    g: &CotraceVector,
    nodes: &[Point],
    points: &[Point],
    kernel: KernelSpec,
    min_distance: f64,
) -> Result<Vec<f64>> {
    if g.len() != nodes.len() {
        return Err(Error::Dimension { expected: nodes.len(), got: g.len() });
    }
    points
        .iter()
        .map(|&x| {
            let mut sum = 0.0;
            for (&y, &gj) in nodes.iter().zip(g.iter()) {
                let r = dist(x, y);
                if r < min_distance {
                    return Err(Error::TooClose { x: x[0], y: x[1], distance: r });
                }
                if gj != 0.0 {
                    sum += kernel.eval(r)? * gj;
                }
            }
            Ok(sum)
        })
        .collect()
}

/// Twice the longest gap between consecutive nodes of a closed curve; the
/// default clearance for [`layer_convolution`].
pub fn two_cell_clearance(nodes: &[Point]) -> f64 {
    let n = nodes.len();
    2.0 * (0..n).map(|i| dist(nodes[i], nodes[(i + 1) % n])).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn bessel_values_against_high_precision_reference() {
        // (n, x, I_n(x), K_n(x)) evaluated in 30-digit arithmetic
        let table = [
            (0, 1.0, 1.2660658777520083356, 0.42102443824070833334),
            (1, 1.0, 0.56515910399248502721, 0.60190723019723457474),
            (0, 2.0, 2.2795853023360672674, 0.11389387274953343565),
            (5, 3.5, 0.22398495470190781504, 0.36482440208451965774),
            (20, 0.5, 3.7494538480790195278e-31, 6.6655498744171556352e+28),
            (3, 50.0, 2.6777641388839412724e+20, 3.7279367738262114317e-23),
            (0, 50.0, 2.9325537838493363267e+20, 3.4101677497894955139e-23),
            (20, 50.0, 5442008402752997526.5, 1.7061483797220350671e-21),
            (10, 0.01, 2.6911505717111425684e-30, 1.8579404390480636036e+28),
        ];
        for (n, x, i, k) in table {
            assert!(rel(bessel_i(n, x).unwrap(), i) < 1e-12, "I_{n}({x})");
            assert!(rel(bessel_k(n, x).unwrap(), k) < 1e-12, "K_{n}({x})");
        }
    }

    #[test]
    fn domain_is_enforced() {
        assert!(bessel_i(21, 1.0).is_err());
        assert!(bessel_k(0, 0.0).is_err());
        assert!(bessel_k(0, 50.5).is_err());
        assert!(bessel_i(0, f64::NAN).is_err());
    }

    #[test]
    fn disk_eigenvalues_against_reference() {
        let lambda = [
            -0.2620542057249419292,
            -0.078119145179925589873,
            -0.022843692388339412451,
            -0.0082915545329847245607,
            -0.0037147694355568809162,
            -0.0019449753476554792509,
            -0.00113711783197378242,
            -0.00071999487528575897322,
            -0.00048390612872465154068,
            -0.0003405735183079876934,
            -0.00024863300306126285912,
        ];
        let nu = [
            0.53304467495626862019,
            0.34017335090486751908,
            0.2205680942365662607,
            0.15742381179815221947,
            0.12106943984074956597,
            0.097987500829242124812,
            0.082169932887639980955,
            0.070696672861871346732,
            0.062010076379638729704,
            0.05521167674268249743,
            0.049749429720551172742,
        ];
        for n in 0..=10 {
            assert!(rel(disk_np_eigenvalue(n, 1.0).unwrap(), lambda[n as usize]) < 1e-10, "lambda_{n}");
            assert!(rel(disk_v_eigenvalue(n, 1.0).unwrap(), nu[n as usize]) < 1e-10, "nu_{n}");
        }
        let r2 = [-0.137672416974436, -0.0848034093492738, -0.0423755423204106];
        for n in 0..3 {
            assert!(rel(disk_np_eigenvalue(n, 2.0).unwrap(), r2[n as usize]) < 1e-12);
        }
    }

    #[test]
    fn unit_mass_yukawa_potential() {
        let g = CotraceVector(vec![1.0]);
        let v = layer_convolution(&g, &[[0.0, 0.0]], &[[2.0, 0.0]], KernelSpec::Yukawa2d, 0.1).unwrap();
        assert!(rel(v[0], 0.018126772835967562906) < 1e-12);
        let zero = layer_convolution(&CotraceVector(vec![0.0]), &[[0.0, 0.0]], &[[2.0, 0.0]], KernelSpec::Yukawa2d, 0.1);
        assert_eq!(zero.unwrap(), vec![0.0]);
        assert!(matches!(
            layer_convolution(&g, &[[0.0, 0.0]], &[[0.05, 0.0]], KernelSpec::Laplace2d, 0.1),
            Err(Error::TooClose { .. })
        ));
    }

    #[test]
    fn mean_zero_density_decays_like_a_dipole() {
        let m = 64;
        let nodes: Vec<Point> = (0..m)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / m as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        let g = CotraceVector(nodes.iter().map(|p| p[0] / m as f64).collect());
        let far = |r: f64| layer_convolution(&g, &nodes, &[[r, 0.0]], KernelSpec::Laplace2d, 0.1).unwrap()[0];
        // dipole moment Σ g_j y_j = 1/2 along x, potential (1/2π)(p·x)/|x|²
        for r in [50.0, 200.0, 800.0] {
            assert!(rel(r * far(r), 0.5 / (2.0 * PI)) < 2.0 / r);
        }
    }
}
