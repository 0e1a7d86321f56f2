//! Log densities (log space throughout) and random draws for the
//! built-in distributions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;

use crate::ast::DistName;
use crate::runtime::scalar::Scalar;

const LN_2PI: f64 = 1.8378770664093453;
const LN_PI: f64 = 1.1447298858494002;

/// Validation failure for distribution parameters.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct BadParam(pub String);

fn require(ok: bool, dist: DistName, msg: &str) -> Result<(), BadParam> {
    if ok {
        Ok(())
    } else {
        Err(BadParam(format!("{}: {msg}", dist.name())))
    }
}

/// Log density of a real-valued distribution at `x`.
pub fn lpdf_real<T: Scalar>(dist: DistName, x: &T, args: &[T]) -> Result<T, BadParam> {
    match dist {
        DistName::Normal => {
            let (mu, sigma) = (&args[0], &args[1]);
            require(sigma.value() > 0.0, dist, "scale must be positive")?;
            let z = x.sub(mu).div(sigma);
            // -0.5 z^2 - ln sigma - 0.5 ln 2pi
            let half = T::from_f64(-0.5);
            Ok(half
                .mul(&z.mul(&z))
                .sub(&sigma.ln())
                .add(&T::from_f64(-0.5 * LN_2PI)))
        }
        DistName::Cauchy => {
            let (mu, sigma) = (&args[0], &args[1]);
            require(sigma.value() > 0.0, dist, "scale must be positive")?;
            let z = x.sub(mu).div(sigma);
            // -ln(pi sigma (1 + z^2))
            Ok(z.mul(&z)
                .ln_1p()
                .add(&sigma.ln())
                .add(&T::from_f64(LN_PI))
                .neg())
        }
        DistName::Logistic => {
            let (mu, s) = (&args[0], &args[1]);
            require(s.value() > 0.0, dist, "scale must be positive")?;
            let z = x.sub(mu).div(s);
            // -z - ln s - 2 ln(1 + exp(-z))
            let soft = z.neg().exp().ln_1p();
            Ok(z.neg()
                .sub(&s.ln())
                .sub(&soft.add(&soft)))
        }
        DistName::Uniform => {
            let (a, b) = (&args[0], &args[1]);
            require(b.value() > a.value(), dist, "upper bound must exceed lower")?;
            if x.value() < a.value() || x.value() > b.value() {
                Ok(T::from_f64(f64::NEG_INFINITY))
            } else {
                Ok(b.sub(a).ln().neg())
            }
        }
        DistName::Gamma => {
            let (alpha, beta) = (&args[0], &args[1]);
            require(alpha.value() > 0.0, dist, "shape must be positive")?;
            require(beta.value() > 0.0, dist, "rate must be positive")?;
            if x.value() <= 0.0 {
                return Ok(T::from_f64(f64::NEG_INFINITY));
            }
            // alpha ln beta - lnGamma(alpha) + (alpha - 1) ln x - beta x
            let one = T::from_f64(1.0);
            Ok(alpha
                .mul(&beta.ln())
                .sub(&alpha.ln_gamma())
                .add(&alpha.sub(&one).mul(&x.ln()))
                .sub(&beta.mul(x)))
        }
        _ => unreachable!("discrete distribution scored through lpmf_int"),
    }
}

/// Log mass of an integer-valued distribution at `k`.
pub fn lpmf_int<T: Scalar>(dist: DistName, k: i64, args: &[T]) -> Result<T, BadParam> {
    match dist {
        DistName::Bernoulli => {
            let p = &args[0];
            require((0.0..=1.0).contains(&p.value()), dist, "probability must lie in [0, 1]")?;
            match k {
                1 => Ok(p.ln()),
                0 => Ok(T::from_f64(1.0).sub(p).ln()),
                _ => Ok(T::from_f64(f64::NEG_INFINITY)),
            }
        }
        DistName::Binomial => {
            let n = args[0].value();
            let p = &args[1];
            require(n >= 0.0 && n.fract() == 0.0, dist, "count must be a non-negative int")?;
            require((0.0..=1.0).contains(&p.value()), dist, "probability must lie in [0, 1]")?;
            let n = n as i64;
            if k < 0 || k > n {
                return Ok(T::from_f64(f64::NEG_INFINITY));
            }
            let binom = statrs::function::gamma::ln_gamma(n as f64 + 1.0)
                - statrs::function::gamma::ln_gamma(k as f64 + 1.0)
                - statrs::function::gamma::ln_gamma((n - k) as f64 + 1.0);
            let kf = T::from_f64(k as f64);
            let nkf = T::from_f64((n - k) as f64);
            let one = T::from_f64(1.0);
            Ok(T::from_f64(binom)
                .add(&kf.mul(&p.ln()))
                .add(&nkf.mul(&one.sub(p).ln())))
        }
        DistName::Categorical => unreachable!("categorical is scored through lpmf_categorical"),
        _ => unreachable!("continuous distribution scored through lpdf_real"),
    }
}

/// Log mass of a categorical outcome `k` (1-based) under a weight vector.
/// Weights must be non-negative; they are normalised here.
pub fn lpmf_categorical<T: Scalar>(k: i64, weights: &[T]) -> Result<T, BadParam> {
    let mut total = T::from_f64(0.0);
    for w in weights {
        require(
            w.value() >= 0.0,
            DistName::Categorical,
            "weights must be non-negative",
        )?;
        total = total.add(w);
    }
    require(
        total.value() > 0.0,
        DistName::Categorical,
        "weights must not all be zero",
    )?;
    if k < 1 || k as usize > weights.len() {
        return Ok(T::from_f64(f64::NEG_INFINITY));
    }
    Ok(weights[k as usize - 1].ln().sub(&total.ln()))
}

/// Draws from a real-valued distribution. Parameters are assumed valid
/// (checked by the corresponding lpdf on the same arguments).
pub fn draw_real(dist: DistName, args: &[f64], rng: &mut ChaCha8Rng) -> Result<f64, BadParam> {
    match dist {
        DistName::Normal => {
            let z: f64 = rand_distr::StandardNormal.sample(rng);
            Ok(args[0] + args[1] * z)
        }
        DistName::Cauchy => {
            let u: f64 = rng.gen::<f64>();
            Ok(args[0] + args[1] * (std::f64::consts::PI * (u - 0.5)).tan())
        }
        DistName::Logistic => {
            let u: f64 = rng.gen::<f64>();
            Ok(args[0] + args[1] * (u / (1.0 - u)).ln())
        }
        DistName::Uniform => {
            let u: f64 = rng.gen::<f64>();
            Ok(args[0] + (args[1] - args[0]) * u)
        }
        DistName::Gamma => {
            let g = rand_distr::Gamma::new(args[0], 1.0 / args[1])
                .map_err(|e| BadParam(format!("gamma: {e}")))?;
            Ok(g.sample(rng))
        }
        _ => unreachable!(),
    }
}

/// Draws from an integer-valued distribution.
pub fn draw_int(dist: DistName, args: &[f64], rng: &mut ChaCha8Rng) -> Result<i64, BadParam> {
    match dist {
        DistName::Bernoulli => {
            let p = args[0];
            require((0.0..=1.0).contains(&p), dist, "probability must lie in [0, 1]")?;
            Ok(if rng.gen::<f64>() < p { 1 } else { 0 })
        }
        DistName::Binomial => {
            let n = args[0] as i64;
            let p = args[1];
            require(n >= 0, dist, "count must be non-negative")?;
            require((0.0..=1.0).contains(&p), dist, "probability must lie in [0, 1]")?;
            let mut k = 0;
            for _ in 0..n {
                if rng.gen::<f64>() < p {
                    k += 1;
                }
            }
            Ok(k)
        }
        _ => unreachable!(),
    }
}

/// Draws a 1-based categorical outcome from non-negative weights.
pub fn draw_categorical(weights: &[f64], rng: &mut ChaCha8Rng) -> Result<i64, BadParam> {
    let total: f64 = weights.iter().sum();
    require(
        total > 0.0 && weights.iter().all(|w| *w >= 0.0),
        DistName::Categorical,
        "weights must be non-negative and not all zero",
    )?;
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return Ok(i as i64 + 1);
        }
    }
    Ok(weights.len() as i64)
}

/// `log(sum(exp(xs)))` with the max shift for stability.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let max = xs
        .iter()
        .map(|x| x.value())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return T::from_f64(max);
    }
    let m = T::from_f64(max);
    let mut sum = T::from_f64(0.0);
    for x in xs {
        sum = sum.add(&x.sub(&m).exp());
    }
    m.add(&sum.ln())
}

/// Normalised exponentials of `xs`, computed with the max shift.
pub fn softmax<T: Scalar>(xs: &[T]) -> Vec<T> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|x| x.sub(&lse).exp()).collect()
}
