//! Double-double complex arithmetic, used only as an independent
//! high-precision oracle for the Bessel power series.

use num_complex::Complex64;

#[derive(Clone, Copy, Debug)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub fn new(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = two_sum(s, e);
        Dd { hi, lo }
    }
    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }
    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + self.hi * o.lo + self.lo * o.hi;
        let (hi, lo) = two_sum(p, e);
        Dd { hi, lo }
    }
    pub fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let (p, e) = two_prod(q1, b);
        let r = self.sub(Dd { hi: p, lo: e });
        let q2 = r.hi / b;
        let (hi, lo) = two_sum(q1, q2);
        Dd { hi, lo }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DdComplex {
    re: Dd,
    im: Dd,
}

impl DdComplex {
    pub fn new(z: Complex64) -> Self {
        DdComplex { re: Dd::new(z.re), im: Dd::new(z.im) }
    }
    pub fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
    pub fn add(self, o: Self) -> Self {
        DdComplex { re: self.re.add(o.re), im: self.im.add(o.im) }
    }
    pub fn mul(self, o: Self) -> Self {
        DdComplex {
            re: self.re.mul(o.re).sub(self.im.mul(o.im)),
            im: self.re.mul(o.im).add(self.im.mul(o.re)),
        }
    }
    pub fn div_f64(self, b: f64) -> Self {
        DdComplex { re: self.re.div_f64(b), im: self.im.div_f64(b) }
    }
    pub fn neg(self) -> Self {
        DdComplex { re: self.re.neg(), im: self.im.neg() }
    }
}

/// `J_n(z)` from `terms` terms of the ascending series in double-double.
pub fn bessel_series_dd(n: usize, z: Complex64, terms: usize) -> Complex64 {
    let half = DdComplex::new(z).div_f64(2.0);
    let q = half.mul(half).neg();
    let mut lead = DdComplex::new(Complex64::new(1.0, 0.0));
    for j in 1..=n {
        lead = lead.mul(half).div_f64(j as f64);
    }
    let mut term = DdComplex::new(Complex64::new(1.0, 0.0));
    let mut sum = term;
    for k in 1..terms {
        term = term.mul(q).div_f64((k * (n + k)) as f64);
        sum = sum.add(term);
    }
    lead.mul(sum).to_c64()
}
