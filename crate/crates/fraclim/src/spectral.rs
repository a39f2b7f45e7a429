//! Periodic spatial lattice and Fourier-coefficient fields.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub d: usize,
    /// Modes (and sample points) per axis.
    pub n: usize,
    /// Side length of the periodic box.
    pub length: f64,
}

impl Lattice {
    pub fn new(d: usize, n: usize, length: f64) -> Self {
        assert!(d == 1 || d == 2, "lattice dimension must be 1 or 2");
        assert!(n >= 2 && n % 2 == 0, "modes per axis must be even");
        Lattice { d, n, length }
    }

    pub fn periodic(d: usize, n: usize) -> Self {
        Lattice::new(d, n, 2.0 * std::f64::consts::PI)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.d as i32)
    }

    fn axis_index(&self, j: usize) -> i64 {
        if j < self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Integer wavenumbers of a mode.
    pub fn integer_mode(&self, idx: usize) -> [i64; 2] {
        if self.d == 1 {
            [self.axis_index(idx), 0]
        } else {
            [self.axis_index(idx / self.n), self.axis_index(idx % self.n)]
        }
    }

    /// Physical wave vector (first `d` components meaningful).
    pub fn wavevector(&self, idx: usize) -> [f64; 2] {
        let s = 2.0 * std::f64::consts::PI / self.length;
        let k = self.integer_mode(idx);
        [k[0] as f64 * s, k[1] as f64 * s]
    }

    pub fn wavenumber(&self, idx: usize) -> f64 {
        let k = self.wavevector(idx);
        (k[0] * k[0] + k[1] * k[1]).sqrt()
    }

    /// Mode index of the integer wavevector, if representable.
    pub fn index_of(&self, k: [i64; 2]) -> Option<usize> {
        let wrap = |x: i64| -> Option<usize> {
            let h = (self.n / 2) as i64;
            if x < -h || x >= h {
                None
            } else {
                Some(x.rem_euclid(self.n as i64) as usize)
            }
        };
        if self.d == 1 {
            if k[1] != 0 {
                return None;
            }
            wrap(k[0])
        } else {
            Some(wrap(k[0])? * self.n + wrap(k[1])?)
        }
    }

    /// Mode index of −k (the Nyquist index maps to itself).
    pub fn negated(&self, idx: usize) -> usize {
        let neg = |j: usize| (self.n - j) % self.n;
        if self.d == 1 {
            neg(idx)
        } else {
            neg(idx / self.n) * self.n + neg(idx % self.n)
        }
    }

    /// Physical coordinates of sample point `idx`.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let h = self.length / self.n as f64;
        if self.d == 1 {
            [idx as f64 * h, 0.0]
        } else {
            [(idx / self.n) as f64 * h, (idx % self.n) as f64 * h]
        }
    }
}

fn fft_in_place(lat: &Lattice, data: &mut [Complex64], inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(lat.n) } else { planner.plan_fft_forward(lat.n) };
    if lat.d == 1 {
        fft.process(data);
        return;
    }
    let n = lat.n;
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = data[r * n + c];
        }
        fft.process(&mut col);
        for r in 0..n {
            data[r * n + c] = col[r];
        }
    }
}

/// Fourier coefficients c_k of h(x) = Σ c_k e^{ik·x}.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub lattice: Lattice,
    pub coeffs: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(lattice: Lattice) -> Self {
        ScalarField { lattice, coeffs: vec![Complex64::new(0.0, 0.0); lattice.len()] }
    }

    pub fn from_samples(lattice: Lattice, samples: &[f64]) -> Self {
        assert_eq!(samples.len(), lattice.len());
        let mut data: Vec<Complex64> = samples.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        fft_in_place(&lattice, &mut data, false);
        let scale = 1.0 / lattice.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
        ScalarField { lattice, coeffs: data }
    }

    pub fn from_fn<F: Fn([f64; 2]) -> f64>(lattice: Lattice, f: F) -> Self {
        let samples: Vec<f64> = (0..lattice.len()).map(|i| f(lattice.point(i))).collect();
        ScalarField::from_samples(lattice, &samples)
    }

    /// Real part of the synthesized field at the lattice points.
    pub fn to_samples(&self) -> Vec<f64> {
        let mut data = self.coeffs.clone();
        fft_in_place(&self.lattice, &mut data, true);
        data.iter().map(|c| c.re).collect()
    }

    /// L²(box) norm via Parseval.
    pub fn l2_norm(&self) -> f64 {
        (self.lattice.volume() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        ScalarField { lattice: self.lattice, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        ScalarField { lattice: self.lattice, coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect() }
    }

    pub fn add(&self, other: &ScalarField) -> Self {
        ScalarField { lattice: self.lattice, coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() }
    }

    /// Largest deviation from the reality condition c_{−k} = conj(c_k).
    pub fn reality_defect(&self) -> f64 {
        (0..self.lattice.len())
            .map(|i| (self.coeffs[self.lattice.negated(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub lattice: Lattice,
    pub comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn zeros(lattice: Lattice) -> Self {
        VectorField { lattice, comps: vec![ScalarField::zeros(lattice); lattice.d] }
    }

    pub fn l2_norm(&self) -> f64 {
        self.comps.iter().map(|c| c.l2_norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &VectorField) -> Self {
        VectorField { lattice: self.lattice, comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a.sub(b)).collect() }
    }

    /// div m, spectrally.
    pub fn divergence(&self) -> ScalarField {
        let lat = self.lattice;
        let mut out = ScalarField::zeros(lat);
        for idx in 0..lat.len() {
            let k = lat.wavevector(idx);
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, comp) in self.comps.iter().enumerate() {
                acc += Complex64::new(0.0, k[j]) * comp.coeffs[idx];
            }
            out.coeffs[idx] = acc;
        }
        out
    }

    /// Velocity field (−∂_y ψ, ∂_x ψ) of a stream function.
    pub fn from_stream_function(psi: &ScalarField) -> Self {
        let lat = psi.lattice;
        assert_eq!(lat.d, 2, "stream functions need d = 2");
        let mut out = VectorField::zeros(lat);
        for idx in 0..lat.len() {
            let k = lat.wavevector(idx);
            let c = psi.coeffs[idx];
            out.comps[0].coeffs[idx] = -Complex64::new(0.0, k[1]) * c;
            out.comps[1].coeffs[idx] = Complex64::new(0.0, k[0]) * c;
        }
        out
    }

    /// Gradient of a scalar field.
    pub fn gradient(h: &ScalarField) -> Self {
        let lat = h.lattice;
        let mut out = VectorField::zeros(lat);
        for idx in 0..lat.len() {
            let k = lat.wavevector(idx);
            for j in 0..lat.d {
                out.comps[j].coeffs[idx] = Complex64::new(0.0, k[j]) * h.coeffs[idx];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_1d() {
        let lat = Lattice::periodic(1, 16);
        let f = ScalarField::from_fn(lat, |x| x[0].cos() + 0.3 * (2.0 * x[0]).sin());
        let i1 = lat.index_of([1, 0]).unwrap();
        assert!((f.coeffs[i1] - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        let i2 = lat.index_of([-2, 0]).unwrap();
        assert!((f.coeffs[i2] - Complex64::new(0.0, 0.15)).norm() < 1e-14);
        let s = f.to_samples();
        for (i, v) in s.iter().enumerate() {
            let x = lat.point(i)[0];
            assert!((v - (x.cos() + 0.3 * (2.0 * x).sin())).abs() < 1e-13);
        }
        assert!(f.reality_defect() < 1e-15);
        let norm = f.l2_norm();
        let expect = (std::f64::consts::PI * (1.0 + 0.09)).sqrt();
        assert!((norm - expect).abs() < 1e-12);
    }

    #[test]
    fn stream_function_is_solenoidal() {
        let lat = Lattice::periodic(2, 8);
        let psi = ScalarField::from_fn(lat, |x| x[0].sin() * x[1].sin());
        let m = VectorField::from_stream_function(&psi);
        assert!(m.divergence().l2_norm() < 1e-14);
        let s = m.comps[0].to_samples();
        for (i, v) in s.iter().enumerate() {
            let x = lat.point(i);
            assert!((v + x[0].sin() * x[1].cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn negation_and_indexing() {
        let lat = Lattice::periodic(2, 8);
        for i in 0..lat.len() {
            let k = lat.integer_mode(i);
            assert_eq!(lat.index_of(k), Some(i));
            assert_eq!(lat.negated(lat.negated(i)), i);
        }
    }
}
