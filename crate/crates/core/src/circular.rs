//! Circular statistics: modified Bessel functions, the von Mises and Rayleigh
//! laws, the Rayleigh + von Mises (RVM) moments that define the anisotropic
//! Gaussian (AG) source model, samplers for both models, and the chi-squared
//! normalisation used to check model fit.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Largest argument accepted by [`bessel_i`]; `I_0(700)` is about `1.5e302`.
pub const BESSEL_MAX_ARG: f64 = 700.0;

/// Wraps an angle into `[0, 2 pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Modified Bessel function of the first kind, `I_n(x)` for `n` in {0, 1, 2}.
///
/// Summed from the power series `sum_k (x/2)^(2k+n) / (k! (k+n)!)`. Every
/// term is positive so the sum carries no cancellation.
pub fn bessel_i(n: u32, x: f64) -> Result<f64> {
    if n > 2 {
        return Err(Error::invalid("n", format!("order {n} not supported (0, 1, 2 only)")));
    }
    if !(0.0..=BESSEL_MAX_ARG).contains(&x) {
        return Err(Error::invalid(
            "x",
            format!("{x} outside [0, {BESSEL_MAX_ARG}]"),
        ));
    }
    let half = 0.5 * x;
    let q = half * half;
    let mut term = match n {
        0 => 1.0,
        1 => half,
        _ => 0.5 * q,
    };
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + n as f64));
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    Ok(sum)
}

/// `I_{nu+1}(x) / I_nu(x)` from the Gauss continued fraction
/// `1 / (2(nu+1)/x + 1 / (2(nu+2)/x + ...))`, evaluated with modified Lentz.
/// Stays finite for arguments where the raw functions overflow.
pub fn bessel_ratio(nu: u32, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    const TINY: f64 = 1e-300;
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    let mut k = 1u32;
    loop {
        let b = 2.0 * (nu + k) as f64 / x;
        d += b;
        if d == 0.0 {
            d = TINY;
        }
        d = 1.0 / d;
        c = b + 1.0 / c;
        if c == 0.0 {
            c = TINY;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 || k > 100_000 {
            return f;
        }
        k += 1;
    }
}

/// The `(lambda, rho)` pair derived from a von Mises concentration:
/// `lambda = sqrt(pi)/2 * I1/I0` scales the mean and `rho = I2/I0 - lambda^2`
/// scales the relation term. Both vanish at `kappa = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnisotropyCoefficients {
    kappa: f64,
    lambda: f64,
    rho: f64,
}

impl AnisotropyCoefficients {
    pub fn new(kappa: f64) -> Result<Self> {
        anisotropy_params(kappa)
    }

    pub fn isotropic() -> Self {
        AnisotropyCoefficients {
            kappa: 0.0,
            lambda: 0.0,
            rho: 0.0,
        }
    }

    /// Bypasses the Bessel computation; for tests that need round numbers.
    #[cfg(test)]
    pub(crate) fn from_parts(lambda: f64, rho: f64) -> Self {
        AnisotropyCoefficients {
            kappa: f64::NAN,
            lambda,
            rho,
        }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `(1 - lambda^2)^2 - rho^2`, the determinant of a unit-variance
    /// covariance block. Positive for every admissible kappa.
    pub fn determinant_factor(&self) -> f64 {
        let a = 1.0 - self.lambda * self.lambda;
        a * a - self.rho * self.rho
    }
}

pub fn anisotropy_params(kappa: f64) -> Result<AnisotropyCoefficients> {
    if !(kappa >= 0.0) || !kappa.is_finite() {
        return Err(Error::invalid("kappa", format!("{kappa} must be finite and >= 0")));
    }
    if kappa == 0.0 {
        return Ok(AnisotropyCoefficients::isotropic());
    }
    let r1 = bessel_ratio(0, kappa);
    let r2 = bessel_ratio(1, kappa) * r1;
    let lambda = 0.5 * PI.sqrt() * r1;
    let rho = r2 - lambda * lambda;
    let coeffs = AnisotropyCoefficients { kappa, lambda, rho };
    if 1.0 - lambda * lambda - rho.abs() <= 0.0 {
        return Err(Error::invalid(
            "kappa",
            format!("{kappa} gives a degenerate covariance (lambda {lambda}, rho {rho})"),
        ));
    }
    Ok(coeffs)
}

/// Location and concentration of a von Mises law. `mu` is kept in `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonMisesParams {
    mu: f64,
    kappa: f64,
}

impl VonMisesParams {
    pub fn new(mu: f64, kappa: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::invalid("kappa", format!("{kappa} must be finite and >= 0")));
        }
        Ok(VonMisesParams {
            mu: wrap_angle(mu),
            kappa,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// `log p(phi) = kappa cos(phi - mu) - log(2 pi I0(kappa))`.
pub fn vm_log_pdf(phi: f64, p: &VonMisesParams) -> f64 {
    p.kappa * ((phi - p.mu).cos() - 1.0) - (TAU * scaled_i0(p.kappa)).ln()
}

/// `exp(-x) I0(x)`, finite for all `x >= 0`.
fn scaled_i0(x: f64) -> f64 {
    if x <= BESSEL_MAX_ARG {
        bessel_i(0, x).unwrap() * (-x).exp()
    } else {
        // Hankel expansion, accurate far beyond double precision at this size.
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..30 {
            let odd = (2 * k - 1) as f64;
            term *= odd * odd / (8.0 * k as f64 * x);
            sum += term;
        }
        sum / (TAU * x).sqrt()
    }
}

/// First and second order statistics of `s = r e^{i phi}` with `r` Rayleigh
/// (`E r^2 = v`) and `phi` von Mises(`mu`, kappa).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RvmMoments {
    /// `E s = lambda sqrt(v) e^{i mu}`
    pub mean: Complex64,
    /// `E |s - m|^2 = (1 - lambda^2) v`
    pub variance: f64,
    /// `E (s - m)^2 = rho v e^{2 i mu}`
    pub relation: Complex64,
}

pub fn rvm_moments(v: f64, mu: f64, coeffs: &AnisotropyCoefficients) -> Result<RvmMoments> {
    if !(v >= 0.0) {
        return Err(Error::invalid("v", format!("{v} must be >= 0")));
    }
    let l = coeffs.lambda();
    Ok(RvmMoments {
        mean: Complex64::from_polar(l * v.sqrt(), mu),
        variance: (1.0 - l * l) * v,
        relation: Complex64::from_polar(coeffs.rho() * v, 2.0 * mu),
    })
}

/// One von Mises draw by Best & Fisher rejection.
pub fn sample_von_mises<R: Rng + ?Sized>(p: &VonMisesParams, rng: &mut R) -> f64 {
    let kappa = p.kappa();
    if kappa < 1e-8 {
        return rng.random::<f64>() * TAU;
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            let signed = if u3 > 0.5 { theta } else { -theta };
            return wrap_angle(p.mu() + signed);
        }
    }
}

/// Rayleigh magnitude with `E r^2 = v`, by inverse CDF.
pub fn sample_rayleigh<R: Rng + ?Sized>(v: f64, rng: &mut R) -> f64 {
    // 1 - U lies in (0, 1], keeping the log finite
    let u = 1.0 - rng.random::<f64>();
    (-v * u.ln()).sqrt()
}

/// `n` draws of `r e^{i phi}` from the RVM model.
pub fn sample_rvm<R: Rng + ?Sized>(
    v: f64,
    mu: f64,
    kappa: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if !(v >= 0.0) {
        return Err(Error::invalid("v", format!("{v} must be >= 0")));
    }
    let vm = VonMisesParams::new(mu, kappa)?;
    if v == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }
    Ok((0..n)
        .map(|_| {
            let r = sample_rayleigh(v, rng);
            let phi = sample_von_mises(&vm, rng);
            Complex64::from_polar(r, phi)
        })
        .collect())
}

/// `n` draws from the complex normal with mean `m`, variance `gamma` and
/// relation `c`, via the Cholesky factor of the equivalent real covariance
/// `[[(gamma + Re c)/2, Im c/2], [Im c/2, (gamma - Re c)/2]]`.
pub fn sample_ag<R: Rng + ?Sized>(
    m: Complex64,
    gamma: f64,
    c: Complex64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if !(gamma > 0.0) || gamma * gamma - c.norm_sqr() <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            gamma,
            relation_abs: c.norm(),
        });
    }
    let a = 0.5 * (gamma + c.re);
    let b = 0.5 * c.im;
    let d = 0.5 * (gamma - c.re);
    let l11 = a.sqrt();
    let l21 = b / l11;
    let l22 = (d - l21 * l21).max(0.0).sqrt();
    Ok((0..n)
        .map(|_| {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            m + Complex64::new(l11 * z1, l21 * z1 + l22 * z2)
        })
        .collect())
}

/// `(x - m)^H Gamma^{-1} (x - m)` on the augmented vector `(x, conj x)`,
/// which reduces to `2 (gamma |e|^2 - Re(conj(c) e^2)) / (gamma^2 - |c|^2)`.
/// Chi-squared with two degrees of freedom when `x` follows the model.
pub fn chi2_normalize(x: Complex64, m_x: Complex64, gamma_x: f64, c_x: Complex64) -> Result<f64> {
    let det = gamma_x * gamma_x - c_x.norm_sqr();
    if !(gamma_x > 0.0) || !(det > 0.0) {
        return Err(Error::NotPositiveDefinite {
            gamma: gamma_x,
            relation_abs: c_x.norm(),
        });
    }
    let e = x - m_x;
    let y = 2.0 * (gamma_x * e.norm_sqr() - (c_x.conj() * e * e).re) / det;
    Ok(y.max(0.0))
}

/// CDF of the chi-squared law with two degrees of freedom.
pub fn chi2_2_cdf(y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else {
        1.0 - (-0.5 * y).exp()
    }
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let f = cdf(y);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}
