//! Univariate and tensor-product B-spline evaluation.
//!
//! Knot vectors are open (end knots repeated `p + 1` times) with simple
//! interior knots, so every basis is `C^{p-1}` across element boundaries.
//! Evaluation follows the Cox-de Boor recurrence with derivatives computed by
//! the classic triangular scheme (Piegl & Tiller, A2.3).

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SplineError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point {x} outside of domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
}

/// Largest supported spline degree.
pub const MAX_DEGREE: usize = 16;

/// Open knot vector of maximum smoothness.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    /// Validates and wraps an explicit knot sequence.
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self, SplineError> {
        if !(2..=MAX_DEGREE).contains(&degree) {
            return Err(SplineError::InvalidArgument(format!(
                "degree must lie in [2, {MAX_DEGREE}], got {degree}"
            )));
        }
        if knots.len() < 2 * (degree + 1) {
            return Err(SplineError::InvalidArgument(format!(
                "{} knots cannot hold an open knot vector of degree {degree}",
                knots.len()
            )));
        }
        if knots.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(SplineError::InvalidArgument(
                "knots must be nondecreasing".into(),
            ));
        }
        let first = knots[0];
        let last = knots[knots.len() - 1];
        let open = knots[..=degree].iter().all(|&k| k == first)
            && knots[knots.len() - degree - 1..].iter().all(|&k| k == last);
        if !open || !(first < last) {
            return Err(SplineError::InvalidArgument(
                "knot vector must be open with a nonempty domain".into(),
            ));
        }
        let interior = &knots[degree..knots.len() - degree];
        if interior.windows(2).any(|w| w[0] == w[1]) {
            return Err(SplineError::InvalidArgument(
                "repeated interior knots are not supported".into(),
            ));
        }
        Ok(Self { knots, degree })
    }

    /// Open knot vector with `n_elements` uniform spans on `[a, b]`.
    pub fn open_uniform(
        n_elements: usize,
        degree: usize,
        interval: (f64, f64),
    ) -> Result<Self, SplineError> {
        if n_elements < 1 {
            return Err(SplineError::InvalidArgument(
                "at least one element is required".into(),
            ));
        }
        if degree < 2 {
            return Err(SplineError::InvalidArgument(format!(
                "degree must be at least 2, got {degree}"
            )));
        }
        let (a, b) = interval;
        if !(a < b) {
            return Err(SplineError::InvalidArgument(format!(
                "empty interval [{a}, {b}]"
            )));
        }
        let mut knots = Vec::with_capacity(n_elements + 2 * degree + 1);
        knots.extend(std::iter::repeat_n(a, degree));
        for e in 0..=n_elements {
            let t = e as f64 / n_elements as f64;
            knots.push(if e == n_elements { b } else { a + (b - a) * t });
        }
        knots.extend(std::iter::repeat_n(b, degree));
        Self::new(knots, degree)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn num_elements(&self) -> usize {
        self.num_basis() - self.degree
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Distinct knot values, `num_elements() + 1` of them.
    pub fn breakpoints(&self) -> &[f64] {
        &self.knots[self.degree..self.knots.len() - self.degree]
    }

    /// Parametric bounds of element `e`.
    pub fn element_bounds(&self, e: usize) -> (f64, f64) {
        let bp = self.breakpoints();
        (bp[e], bp[e + 1])
    }

    /// Knot span index `s` with `knots[s] <= x < knots[s+1]`; the last span
    /// owns the right endpoint.
    pub fn find_span(&self, x: f64) -> Result<usize, SplineError> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(SplineError::OutOfDomain { x, lo, hi });
        }
        let n = self.num_basis();
        if x >= self.knots[n] {
            return Ok(n - 1);
        }
        // first index with knots[idx] > x, minus one
        let idx = self.knots.partition_point(|&k| k <= x);
        Ok(idx - 1)
    }

    /// Element containing `x` (closed-interval convention at the right end).
    pub fn element_of(&self, x: f64) -> Result<usize, SplineError> {
        Ok(self.find_span(x)? - self.degree)
    }

    /// Nonzero basis functions at `x` and their derivatives up to `max_der`.
    pub fn eval_ders(&self, x: f64, max_der: usize) -> Result<BasisEval, SplineError> {
        let span = self.find_span(x)?;
        Ok(self.eval_ders_in_span(span, x, max_der))
    }

    /// Same as [`eval_ders`](Self::eval_ders) but with the span fixed by the
    /// caller; at element boundaries this selects the one-sided limit from
    /// element `span - degree`.
    pub fn eval_ders_in_span(&self, span: usize, x: f64, max_der: usize) -> BasisEval {
        const N: usize = MAX_DEGREE + 1;
        let p = self.degree;
        let u = &self.knots;
        let mut ndu = [[0.0; N]; N];
        let mut left = [0.0; N];
        let mut right = [0.0; N];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = x - u[span + 1 - j];
            right[j] = u[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0; p + 1]; max_der + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let nd = max_der.min(p);
        let mut a = [[0.0; N]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=nd {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    let rk = rk as usize;
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                    d = a[s2][0] * ndu[rk][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for (k, row) in ders.iter_mut().enumerate().take(nd + 1).skip(1) {
            for v in row.iter_mut() {
                *v *= factor;
            }
            factor *= (p - k) as f64;
        }

        BasisEval {
            first_index: span - p,
            ders,
        }
    }

    /// Bisects every span.
    pub fn dyadic_refine(&self) -> KnotVector {
        let p = self.degree;
        let bp = self.breakpoints();
        let mut knots = Vec::with_capacity(self.knots.len() + bp.len() - 1);
        knots.extend(std::iter::repeat_n(bp[0], p));
        for w in bp.windows(2) {
            knots.push(w[0]);
            knots.push(0.5 * (w[0] + w[1]));
        }
        knots.push(bp[bp.len() - 1]);
        knots.extend(std::iter::repeat_n(bp[bp.len() - 1], p));
        KnotVector {
            knots,
            degree: p,
        }
    }
}

/// Nonzero univariate basis functions at a point.
///
/// `ders[k][r]` is the `k`-th derivative of function `first_index + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    pub first_index: usize,
    pub ders: Vec<Vec<f64>>,
}

impl BasisEval {
    pub fn values(&self) -> &[f64] {
        &self.ders[0]
    }

    pub fn d1(&self) -> &[f64] {
        &self.ders[1]
    }

    pub fn d2(&self) -> &[f64] {
        &self.ders[2]
    }

    pub fn der(&self, k: usize) -> &[f64] {
        &self.ders[k]
    }

    pub fn len(&self) -> usize {
        self.ders[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.ders[0].is_empty()
    }
}

/// Bernstein polynomials of degree `q` on `[0, 1]` and their derivatives in
/// the reference coordinate.
pub fn eval_bernstein_ders(q: usize, t: f64, max_der: usize) -> Result<BasisEval, SplineError> {
    if q < 1 {
        return Err(SplineError::InvalidArgument(
            "Bernstein degree must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(SplineError::OutOfDomain { x: t, lo: 0.0, hi: 1.0 });
    }
    // b[i] holds the degree-d Bernstein values after step d; the k-th
    // derivative row is the k-fold backward difference of degree q-k
    let mut ders = vec![vec![0.0; q + 1]; max_der + 1];
    let mut b = vec![0.0; q + 1];
    b[0] = 1.0;
    for d in 0..=q {
        if d > 0 {
            for i in (0..=d).rev() {
                let lo = if i > 0 { t * b[i - 1] } else { 0.0 };
                let hi = if i < d { (1.0 - t) * b[i] } else { 0.0 };
                b[i] = lo + hi;
            }
        }
        let k = q - d;
        if k > max_der {
            continue;
        }
        let row = &mut ders[k];
        row[..=d].copy_from_slice(&b[..=d]);
        for step in 0..k {
            let len = d + step + 2;
            for i in (0..len).rev() {
                let lo = if i > 0 { row[i - 1] } else { 0.0 };
                let hi = if i + 1 < len { row[i] } else { 0.0 };
                row[i] = lo - hi;
            }
        }
        let scale: f64 = ((d + 1)..=q).map(|v| v as f64).product();
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Ok(BasisEval {
        first_index: 0,
        ders,
    })
}

/// One nonzero tensor-product function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorValue {
    pub index: (usize, usize),
    pub value: f64,
    pub grad: [f64; 2],
    /// `[d_xx, d_xy, d_yy]`
    pub hessian: [f64; 3],
}

/// Values, gradients and Hessians of all tensor functions nonzero at `point`.
pub fn tensor_eval(
    kv_x: &KnotVector,
    kv_y: &KnotVector,
    point: (f64, f64),
) -> Result<Vec<TensorValue>, SplineError> {
    let ex = kv_x.eval_ders(point.0, 2)?;
    let ey = kv_y.eval_ders(point.1, 2)?;
    let mut out = Vec::with_capacity(ex.len() * ey.len());
    for b in 0..ey.len() {
        for a in 0..ex.len() {
            let (x0, x1, x2) = (ex.ders[0][a], ex.ders[1][a], ex.ders[2][a]);
            let (y0, y1, y2) = (ey.ders[0][b], ey.ders[1][b], ey.ders[2][b]);
            out.push(TensorValue {
                index: (ex.first_index + a, ey.first_index + b),
                value: x0 * y0,
                grad: [x1 * y0, x0 * y1],
                hessian: [x2 * y0, x1 * y1, x0 * y2],
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn binom(n: usize, k: usize) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn open_uniform_examples() {
        let kv = KnotVector::open_uniform(1, 3, (0.0, 1.0)).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(KnotVector::open_uniform(4, 3, (0.0, 1.0)).unwrap().num_basis(), 7);
        let kv = KnotVector::open_uniform(2, 4, (0.0, 2.0)).unwrap();
        assert_eq!(kv.num_basis(), 6);
        assert_eq!(kv.knots().iter().filter(|&&k| k == 1.0).count(), 1);
    }

    #[test]
    fn open_uniform_rejects_bad_input() {
        assert!(matches!(
            KnotVector::open_uniform(0, 3, (0.0, 1.0)),
            Err(SplineError::InvalidArgument(_))
        ));
        assert!(matches!(
            KnotVector::open_uniform(2, 1, (0.0, 1.0)),
            Err(SplineError::InvalidArgument(_))
        ));
        assert!(KnotVector::new(vec![0.0, 0.0, 0.0, 0.5, 0.5, 1.0, 1.0, 1.0], 2).is_err());
    }

    #[test]
    fn cubic_bernstein_values() {
        let kv = KnotVector::open_uniform(1, 3, (0.0, 1.0)).unwrap();
        let e = kv.eval_ders(0.0, 2).unwrap();
        assert_eq!(e.values(), &[1.0, 0.0, 0.0, 0.0]);
        let e = kv.eval_ders(0.5, 2).unwrap();
        for (i, v) in e.values().iter().enumerate() {
            let oracle = binom(3, i) * 0.5f64.powi(3);
            assert_abs_diff_eq!(*v, oracle, epsilon = 1e-15);
        }
        let e = kv.eval_ders(1.0, 0).unwrap();
        assert_eq!(e.values()[3], 1.0);
    }

    #[test]
    fn out_of_domain() {
        let kv = KnotVector::open_uniform(3, 3, (0.0, 1.0)).unwrap();
        assert!(matches!(kv.eval_ders(1.5, 1), Err(SplineError::OutOfDomain { .. })));
        assert!(matches!(
            eval_bernstein_ders(3, -0.1, 1),
            Err(SplineError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn bernstein_endpoint_derivatives() {
        let e = eval_bernstein_ders(4, 0.0, 2).unwrap();
        assert_eq!(e.values(), &[1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_abs_diff_eq!(e.d1()[0], -4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.d1()[1], 4.0, epsilon = 1e-14);
        let r = eval_bernstein_ders(4, 1.0, 2).unwrap();
        for i in 0..=4 {
            assert_abs_diff_eq!(r.values()[i], e.values()[4 - i], epsilon = 1e-15);
            assert_abs_diff_eq!(r.d1()[i], -e.d1()[4 - i], epsilon = 1e-13);
            assert_abs_diff_eq!(r.d2()[i], e.d2()[4 - i], epsilon = 1e-12);
        }
        let s: f64 = eval_bernstein_ders(5, 0.3, 0).unwrap().values().iter().sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn bernstein_matches_single_element_spline() {
        for q in 2..=6 {
            let kv = KnotVector::open_uniform(1, q, (0.0, 1.0)).unwrap();
            for k in 0..=10 {
                let t = k as f64 / 10.0;
                let a = eval_bernstein_ders(q, t, 2).unwrap();
                let b = kv.eval_ders(t, 2).unwrap();
                for d in 0..=2 {
                    for i in 0..=q {
                        assert_abs_diff_eq!(a.ders[d][i], b.ders[d][i], epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn tensor_eval_examples() {
        let kx = KnotVector::open_uniform(3, 3, (0.0, 1.0)).unwrap();
        let ky = KnotVector::open_uniform(2, 4, (0.0, 1.0)).unwrap();
        let corner = tensor_eval(&kx, &ky, (0.0, 0.0)).unwrap();
        let nonzero: Vec<_> = corner.iter().filter(|v| v.value != 0.0).collect();
        assert_eq!(nonzero.len(), 1);
        assert_eq!(nonzero[0].value, 1.0);
        assert_eq!(nonzero[0].index, (0, 0));

        let (x, y) = (0.37, 0.81);
        let vals = tensor_eval(&kx, &ky, (x, y)).unwrap();
        let sum: f64 = vals.iter().map(|v| v.value).sum();
        let gx: f64 = vals.iter().map(|v| v.grad[0]).sum();
        let gy: f64 = vals.iter().map(|v| v.grad[1]).sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gx, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(gy, 0.0, epsilon = 1e-10);

        // product rule oracle from the univariate tables
        let ex = kx.eval_ders(x, 1).unwrap();
        let ey = ky.eval_ders(y, 1).unwrap();
        for v in &vals {
            let a = v.index.0 - ex.first_index;
            let b = v.index.1 - ey.first_index;
            assert_abs_diff_eq!(v.hessian[1], ex.d1()[a] * ey.d1()[b], epsilon = 1e-12);
        }
    }

    #[test]
    fn dyadic_refine_examples() {
        let kv = KnotVector::open_uniform(1, 3, (0.0, 1.0)).unwrap();
        let r = kv.dyadic_refine();
        assert_eq!(r.knots(), &[0.0, 0.0, 0.0, 0.0, 0.5, 1.0, 1.0, 1.0, 1.0]);
        let rr = r.dyadic_refine();
        assert_eq!(rr.num_elements(), 4);
        assert_eq!(rr.num_basis(), 7);
        assert_eq!(kv.num_basis() + kv.num_elements(), r.num_basis());
    }

    /// Least-squares fit of every coarse function on the refined space.
    #[test]
    fn dyadic_refine_is_nested() {
        use faer::Mat;
        for (n, p) in [(1, 3), (3, 3), (2, 4), (5, 5)] {
            let coarse = KnotVector::open_uniform(n, p, (0.0, 1.0)).unwrap();
            let fine = coarse.dyadic_refine();
            let samples: Vec<f64> = (0..50).map(|k| k as f64 / 49.0).collect();
            let a = Mat::<f64>::from_fn(samples.len(), fine.num_basis(), |r, c| {
                let e = fine.eval_ders(samples[r], 0).unwrap();
                if c >= e.first_index && c < e.first_index + e.len() {
                    e.values()[c - e.first_index]
                } else {
                    0.0
                }
            });
            let qr = a.qr();
            for f in 0..coarse.num_basis() {
                let b = Mat::<f64>::from_fn(samples.len(), 1, |r, _| {
                    let e = coarse.eval_ders(samples[r], 0).unwrap();
                    if f >= e.first_index && f < e.first_index + e.len() {
                        e.values()[f - e.first_index]
                    } else {
                        0.0
                    }
                });
                use faer::linalg::solvers::SolveLstsq;
                let c = qr.solve_lstsq(&b);
                let resid = &a * &c - &b;
                assert!(resid.norm_max() <= 1e-10, "residual {}", resid.norm_max());
            }
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity_and_derivative_sums(
            n in 1usize..9, p in 2usize..7, xs in proptest::collection::vec(0.0f64..=1.0, 100)
        ) {
            let kv = KnotVector::open_uniform(n, p, (0.0, 1.0)).unwrap();
            for x in xs {
                let e = kv.eval_ders(x, 2).unwrap();
                let s0: f64 = e.values().iter().sum();
                let s1: f64 = e.d1().iter().sum();
                let s2: f64 = e.d2().iter().sum();
                prop_assert!((s0 - 1.0).abs() <= 1e-12);
                prop_assert!(s1.abs() <= 1e-10 * (n as f64).max(1.0));
                prop_assert!(s2.abs() <= 1e-10 * (n as f64).powi(2).max(1.0));
            }
        }

        #[test]
        fn derivatives_match_finite_differences(
            n in 1usize..6, p in 2usize..6, x in 0.01f64..0.99
        ) {
            let kv = KnotVector::open_uniform(n, p, (0.0, 1.0)).unwrap();
            let step = 1e-5;
            // stay inside one span so the one-sided tables are smooth
            let span = kv.find_span(x).unwrap();
            let (lo, hi) = (kv.knots()[span], kv.knots()[span + 1]);
            prop_assume!(x - lo > 2.0 * step && hi - x > 2.0 * step);
            let c = kv.eval_ders_in_span(span, x, 2);
            let l = kv.eval_ders_in_span(span, x - step, 2);
            let r = kv.eval_ders_in_span(span, x + step, 2);
            for i in 0..=p {
                let fd1 = (r.values()[i] - l.values()[i]) / (2.0 * step);
                let fd2 = (r.d1()[i] - l.d1()[i]) / (2.0 * step);
                let s1 = c.d1()[i].abs().max(1.0);
                let s2 = c.d2()[i].abs().max(1.0);
                prop_assert!((fd1 - c.d1()[i]).abs() <= 1e-5 * s1);
                prop_assert!((fd2 - c.d2()[i]).abs() <= 1e-5 * s2);
            }
        }
    }
}
