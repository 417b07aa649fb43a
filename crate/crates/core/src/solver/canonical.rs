//! Concave functions built from affine terms, negated weighted `2^(affine)`
//! terms and negated weighted `log2(sum 2^(affine))` terms.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;

/// Largest magnitude of a base-2 exponent before it is clamped.
pub const EXPONENT_CLAMP: f64 = 700.0 / LN_2;

/// Sparse affine form `sum_k c_k x_k + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineForm {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineForm {
    pub fn constant(c: f64) -> Self {
        AffineForm { coeffs: Vec::new(), constant: c }
    }

    pub fn var(index: usize) -> Self {
        AffineForm { coeffs: vec![(index, 1.0)], constant: 0.0 }
    }

    /// Builder: add `c * x_index`.
    pub fn plus(mut self, index: usize, c: f64) -> Self {
        self.add(index, c);
        self
    }

    /// Builder: add a constant offset.
    pub fn offset(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add(&mut self, index: usize, c: f64) {
        if let Some(entry) = self.coeffs.iter_mut().find(|(k, _)| *k == index) {
            entry.1 += c;
        } else {
            self.coeffs.push((index, c));
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().fold(self.constant, |acc, &(k, c)| acc + c * x[k])
    }

    fn max_index(&self) -> Option<usize> {
        self.coeffs.iter().map(|(k, _)| *k).max()
    }

    fn scaled(&self, s: f64) -> Self {
        AffineForm {
            coeffs: self.coeffs.iter().map(|&(k, c)| (k, c * s)).collect(),
            constant: self.constant * s,
        }
    }

    fn shifted(&self, offset: usize) -> Self {
        AffineForm {
            coeffs: self.coeffs.iter().map(|&(k, c)| (k + offset, c)).collect(),
            constant: self.constant,
        }
    }
}

/// Contributes `-weight * 2^(exponent)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpTerm {
    pub weight: f64,
    pub exponent: AffineForm,
}

/// Contributes `-weight * log2(sum_k 2^(exponents[k]))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LseTerm {
    pub weight: f64,
    pub exponents: Vec<AffineForm>,
}

/// Value, gradient and Hessian of a canonical function at a point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
    /// Some exponent hit [`EXPONENT_CLAMP`].
    pub clamped: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CanonicalFunction {
    pub affine: AffineForm,
    pub exp_terms: Vec<ExpTerm>,
    pub lse_terms: Vec<LseTerm>,
}

#[inline]
fn clamp_exponent(z: f64, clamped: &mut bool) -> f64 {
    if z > EXPONENT_CLAMP {
        *clamped = true;
        EXPONENT_CLAMP
    } else if z < -EXPONENT_CLAMP {
        *clamped = true;
        -EXPONENT_CLAMP
    } else {
        z
    }
}

#[inline]
fn pow2(z: f64) -> f64 {
    (z * LN_2).exp()
}

impl CanonicalFunction {
    pub fn from_affine(affine: AffineForm) -> Self {
        CanonicalFunction { affine, ..Default::default() }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_affine(AffineForm::constant(c))
    }

    /// Builder: subtract `weight * 2^(exponent)`. Zero weights are dropped.
    pub fn minus_exp(mut self, weight: f64, exponent: AffineForm) -> Self {
        if weight != 0.0 {
            self.exp_terms.push(ExpTerm { weight, exponent });
        }
        self
    }

    /// Builder: subtract `weight * log2(sum 2^(exponents))`.
    pub fn minus_lse(mut self, weight: f64, exponents: Vec<AffineForm>) -> Self {
        if weight != 0.0 {
            self.lse_terms.push(LseTerm { weight, exponents });
        }
        self
    }

    /// Builder: add another canonical function.
    pub fn plus(mut self, other: CanonicalFunction) -> Self {
        for &(k, c) in &other.affine.coeffs {
            self.affine.add(k, c);
        }
        self.affine.constant += other.affine.constant;
        self.exp_terms.extend(other.exp_terms);
        self.lse_terms.extend(other.lse_terms);
        self
    }

    /// Multiply by a non-negative scalar.
    pub fn scaled(&self, s: f64) -> Self {
        CanonicalFunction {
            affine: self.affine.scaled(s),
            exp_terms: self
                .exp_terms
                .iter()
                .map(|t| ExpTerm { weight: t.weight * s, exponent: t.exponent.clone() })
                .collect(),
            lse_terms: self
                .lse_terms
                .iter()
                .map(|t| LseTerm { weight: t.weight * s, exponents: t.exponents.clone() })
                .collect(),
        }
    }

    /// Renumber variables by `offset`, leaving room for new leading ones.
    pub fn shifted(&self, offset: usize) -> Self {
        CanonicalFunction {
            affine: self.affine.shifted(offset),
            exp_terms: self
                .exp_terms
                .iter()
                .map(|t| ExpTerm { weight: t.weight, exponent: t.exponent.shifted(offset) })
                .collect(),
            lse_terms: self
                .lse_terms
                .iter()
                .map(|t| LseTerm {
                    weight: t.weight,
                    exponents: t.exponents.iter().map(|e| e.shifted(offset)).collect(),
                })
                .collect(),
        }
    }

    /// All term weights are finite and non-negative, which makes the
    /// function concave.
    pub fn is_concave_form(&self) -> bool {
        self.exp_terms.iter().all(|t| t.weight.is_finite() && t.weight >= 0.0)
            && self
                .lse_terms
                .iter()
                .all(|t| t.weight.is_finite() && t.weight >= 0.0 && !t.exponents.is_empty())
    }

    /// Highest variable index referenced, if any.
    pub fn max_index(&self) -> Option<usize> {
        let a = self.affine.max_index();
        let e = self.exp_terms.iter().filter_map(|t| t.exponent.max_index()).max();
        let l = self
            .lse_terms
            .iter()
            .flat_map(|t| t.exponents.iter().filter_map(AffineForm::max_index))
            .max();
        [a, e, l].into_iter().flatten().max()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.value_clamped(x).0
    }

    pub fn value_clamped(&self, x: &[f64]) -> (f64, bool) {
        let mut clamped = false;
        let mut v = self.affine.eval(x);
        for t in &self.exp_terms {
            let z = clamp_exponent(t.exponent.eval(x), &mut clamped);
            v -= t.weight * pow2(z);
        }
        for t in &self.lse_terms {
            let zs: Vec<f64> = t.exponents.iter().map(|e| clamp_exponent(e.eval(x), &mut clamped)).collect();
            let m = zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = zs.iter().map(|z| pow2(z - m)).sum();
            v -= t.weight * (m + s.ln() / LN_2);
        }
        (v, clamped)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.evaluate(x).gradient
    }

    /// Value with exact gradient and Hessian.
    pub fn evaluate(&self, x: &[f64]) -> Evaluation {
        let n = x.len();
        let mut clamped = false;
        let mut value = self.affine.eval(x);
        let mut gradient = vec![0.0; n];
        let mut hessian = DMatrix::zeros(n, n);
        for &(k, c) in &self.affine.coeffs {
            gradient[k] += c;
        }
        for t in &self.exp_terms {
            let z = clamp_exponent(t.exponent.eval(x), &mut clamped);
            let e = t.weight * pow2(z);
            value -= e;
            let g = e * LN_2;
            let h = g * LN_2;
            for &(a, ca) in &t.exponent.coeffs {
                gradient[a] -= g * ca;
                for &(b, cb) in &t.exponent.coeffs {
                    hessian[(a, b)] -= h * ca * cb;
                }
            }
        }
        for t in &self.lse_terms {
            let zs: Vec<f64> = t.exponents.iter().map(|e| clamp_exponent(e.eval(x), &mut clamped)).collect();
            let m = zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = zs.iter().map(|z| pow2(z - m)).collect();
            let s: f64 = weights.iter().sum();
            value -= t.weight * (m + s.ln() / LN_2);
            // softmax-weighted mean of the exponent gradients
            let mut mean = vec![0.0; n];
            for (form, w) in t.exponents.iter().zip(&weights) {
                let pk = w / s;
                for &(a, ca) in &form.coeffs {
                    mean[a] += pk * ca;
                }
            }
            let scale = t.weight * LN_2;
            for (form, w) in t.exponents.iter().zip(&weights) {
                let pk = w / s;
                for &(a, ca) in &form.coeffs {
                    for &(b, cb) in &form.coeffs {
                        hessian[(a, b)] -= scale * pk * ca * cb;
                    }
                }
            }
            let support: Vec<usize> = (0..n).filter(|&a| mean[a] != 0.0).collect();
            for &a in &support {
                gradient[a] -= t.weight * mean[a];
                for &b in &support {
                    hessian[(a, b)] += scale * mean[a] * mean[b];
                }
            }
        }
        Evaluation { value, gradient, hessian, clamped }
    }
}
