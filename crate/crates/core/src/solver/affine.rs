use crate::scalar::Scalar;

/// `constant + Σ coeffs[j] · x_j` over a fixed number of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine<S> {
    pub constant: S,
    pub coeffs: Vec<S>,
}

impl<S: Scalar> Affine<S> {
    pub fn constant(c: S, dim: usize) -> Self {
        Affine { constant: c, coeffs: vec![S::zero(); dim] }
    }

    pub fn var(j: usize, dim: usize) -> Self {
        let mut a = Self::constant(S::zero(), dim);
        a.coeffs[j] = S::one();
        a
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, o: &Self) -> Self {
        Affine {
            constant: self.constant.clone() + o.constant.clone(),
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a.clone() + b.clone()).collect(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Affine {
            constant: self.constant.clone() - o.constant.clone(),
            coeffs: self.coeffs.iter().zip(&o.coeffs).map(|(a, b)| a.clone() - b.clone()).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(&-S::one())
    }

    pub fn scale(&self, k: &S) -> Self {
        Affine {
            constant: self.constant.clone() * k.clone(),
            coeffs: self.coeffs.iter().map(|c| c.clone() * k.clone()).collect(),
        }
    }

    pub fn div(&self, k: &S) -> Self {
        Affine {
            constant: self.constant.clone() / k.clone(),
            coeffs: self.coeffs.iter().map(|c| c.clone() / k.clone()).collect(),
        }
    }

    pub fn eval(&self, x: &[S]) -> S {
        self.coeffs.iter().zip(x).fold(self.constant.clone(), |acc, (c, v)| acc + c.clone() * v.clone())
    }

    /// Substitutes `x_j ↦ base_j + d_j`, giving a form over the `d_j`.
    pub fn shift(&self, base: &[S]) -> Self {
        Affine { constant: self.eval(base), coeffs: self.coeffs.clone() }
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Affine<T> {
        Affine { constant: f(&self.constant), coeffs: self.coeffs.iter().map(f).collect() }
    }
}
