use crate::error::{Error, Result};
use crate::tensor::{BackwardOp, Real, Tensor};

/// Stride, zero padding and group count of a 1-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv1dSpec {
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl Default for Conv1dSpec {
    fn default() -> Self {
        Conv1dSpec {
            stride: 1,
            padding: 0,
            groups: 1,
        }
    }
}

impl Conv1dSpec {
    pub fn new(stride: usize, padding: usize, groups: usize) -> Self {
        Conv1dSpec {
            stride,
            padding,
            groups,
        }
    }
}

/// `floor((len + 2*padding - kernel) / stride) + 1`, or `None` when the
/// kernel does not fit.
pub fn conv_out_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = len + 2 * padding;
    if kernel == 0 || stride == 0 || kernel > padded {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    n: usize,
    cin: usize,
    len: usize,
    cout: usize,
    k: usize,
    lout: usize,
    stride: usize,
    pad: usize,
    groups: usize,
}

impl Geometry {
    fn cin_g(&self) -> usize {
        self.cin / self.groups
    }

    fn cout_g(&self) -> usize {
        self.cout / self.groups
    }

    /// Output positions `o` for which tap `kk` reads an in-bounds sample.
    #[inline]
    fn valid(&self, kk: usize) -> (usize, usize) {
        let lo = if self.pad > kk {
            (self.pad - kk).div_ceil(self.stride)
        } else {
            0
        };
        let last = self.len + self.pad;
        let hi = if last > kk {
            ((last - 1 - kk) / self.stride + 1).min(self.lout)
        } else {
            0
        };
        (lo, hi.max(lo))
    }
}

/// Grouped, strided, zero-padded 1-D convolution.
///
/// `input` is `N x Cin x L`, `weight` is `Cout x Cin/groups x k`, `bias`
/// (optional) is `Cout`. Output channel `oc` in group `g` sums over input
/// channels of group `g` only.
pub fn conv1d<T: Real>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    spec: Conv1dSpec,
) -> Result<Tensor<T>> {
    if input.rank() != 3 {
        return Err(Error::dim(
            "conv1d",
            format!("input must be N x C x L, got {:?}", input.shape()),
        ));
    }
    if weight.rank() != 3 {
        return Err(Error::dim(
            "conv1d",
            format!("weight must be Cout x Cin/g x k, got {:?}", weight.shape()),
        ));
    }
    let (n, cin, len) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (cout, wcin, k) = (weight.shape()[0], weight.shape()[1], weight.shape()[2]);
    let groups = spec.groups;
    if groups == 0 || cin % groups != 0 || cout % groups != 0 {
        return Err(Error::config(format!(
            "conv1d groups={groups} must divide Cin={cin} and Cout={cout}"
        )));
    }
    if spec.stride == 0 {
        return Err(Error::config("conv1d stride must be positive"));
    }
    if wcin != cin / groups {
        return Err(Error::dim(
            "conv1d",
            format!(
                "weight expects {wcin} input channels per group, input has {} (Cin={cin}, groups={groups})",
                cin / groups
            ),
        ));
    }
    if let Some(b) = bias {
        if b.shape() != [cout] {
            return Err(Error::dim(
                "conv1d",
                format!("bias must have shape [{cout}], got {:?}", b.shape()),
            ));
        }
    }
    let lout = conv_out_len(len, k, spec.stride, spec.padding).ok_or_else(|| {
        Error::dim(
            "conv1d",
            format!("kernel {k} exceeds padded length {}", len + 2 * spec.padding),
        )
    })?;
    let geo = Geometry {
        n,
        cin,
        len,
        cout,
        k,
        lout,
        stride: spec.stride,
        pad: spec.padding,
        groups,
    };

    let x = input.data();
    let w = weight.data();
    let mut out = vec![T::zero(); n * cout * lout];
    if let Some(b) = bias {
        let b = b.data();
        for (row_idx, row) in out.chunks_mut(lout).enumerate() {
            row.fill(b[row_idx % cout]);
        }
    }
    forward_kernel(&geo, &x, &w, &mut out);
    drop(x);
    drop(w);

    let mut inputs = vec![input.clone(), weight.clone()];
    if let Some(b) = bias {
        inputs.push(b.clone());
    }
    Ok(Tensor::from_op(
        vec![n, cout, lout],
        out,
        inputs,
        Conv1dBackward { geo },
    ))
}

fn forward_kernel<T: Real>(geo: &Geometry, x: &[T], w: &[T], out: &mut [T]) {
    let (cin_g, cout_g) = (geo.cin_g(), geo.cout_g());
    let k = geo.k;
    for n in 0..geo.n {
        for oc in 0..geo.cout {
            let g = oc / cout_g;
            let out_row = &mut out[(n * geo.cout + oc) * geo.lout..][..geo.lout];
            for icg in 0..cin_g {
                let ic = g * cin_g + icg;
                let in_row = &x[(n * geo.cin + ic) * geo.len..][..geo.len];
                let w_row = &w[(oc * cin_g + icg) * k..][..k];
                if geo.stride == 1 {
                    for (kk, &wv) in w_row.iter().enumerate() {
                        let (lo, hi) = geo.valid(kk);
                        if lo >= hi {
                            continue;
                        }
                        let start = lo + kk - geo.pad;
                        let src = &in_row[start..start + (hi - lo)];
                        for (o, &xv) in out_row[lo..hi].iter_mut().zip(src) {
                            *o = *o + wv * xv;
                        }
                    }
                } else {
                    for (o, acc) in out_row.iter_mut().enumerate() {
                        let begin = (o * geo.stride) as isize - geo.pad as isize;
                        let k_lo = (-begin).max(0) as usize;
                        let k_hi = ((geo.len as isize - begin).min(k as isize)).max(0) as usize;
                        if k_lo >= k_hi {
                            continue;
                        }
                        let s = (begin + k_lo as isize) as usize;
                        let mut sum = T::zero();
                        for (&wv, &xv) in w_row[k_lo..k_hi].iter().zip(&in_row[s..s + (k_hi - k_lo)]) {
                            sum = sum + wv * xv;
                        }
                        *acc = *acc + sum;
                    }
                }
            }
        }
    }
}

struct Conv1dBackward {
    geo: Geometry,
}

impl<T: Real> BackwardOp<T> for Conv1dBackward {
    fn name(&self) -> &'static str {
        "conv1d"
    }

    fn backward(&self, inputs: &[Tensor<T>], gout: &[T]) -> Vec<Option<Vec<T>>> {
        let geo = &self.geo;
        let (cin_g, cout_g) = (geo.cin_g(), geo.cout_g());
        let k = geo.k;
        let x = inputs[0].data();
        let w = inputs[1].data();
        let want_x = inputs[0].requires_grad();
        let want_w = inputs[1].requires_grad();
        let mut gx = if want_x {
            vec![T::zero(); x.len()]
        } else {
            Vec::new()
        };
        let mut gw = vec![T::zero(); w.len()];

        for n in 0..geo.n {
            for oc in 0..geo.cout {
                let g = oc / cout_g;
                let g_row = &gout[(n * geo.cout + oc) * geo.lout..][..geo.lout];
                for icg in 0..cin_g {
                    let ic = g * cin_g + icg;
                    let x_off = (n * geo.cin + ic) * geo.len;
                    let in_row = &x[x_off..][..geo.len];
                    let w_off = (oc * cin_g + icg) * k;
                    for kk in 0..k {
                        let (lo, hi) = geo.valid(kk);
                        if lo >= hi {
                            continue;
                        }
                        let wv = w[w_off + kk];
                        let mut acc = T::zero();
                        if geo.stride == 1 {
                            let start = lo + kk - geo.pad;
                            let src = &in_row[start..start + (hi - lo)];
                            for (&gv, &xv) in g_row[lo..hi].iter().zip(src) {
                                acc = acc + gv * xv;
                            }
                            if want_x {
                                let dst = &mut gx[x_off + start..x_off + start + (hi - lo)];
                                for (d, &gv) in dst.iter_mut().zip(&g_row[lo..hi]) {
                                    *d = *d + wv * gv;
                                }
                            }
                        } else {
                            for o in lo..hi {
                                let pos = o * geo.stride + kk - geo.pad;
                                acc = acc + g_row[o] * in_row[pos];
                                if want_x {
                                    gx[x_off + pos] = gx[x_off + pos] + wv * g_row[o];
                                }
                            }
                        }
                        gw[w_off + kk] = gw[w_off + kk] + acc;
                    }
                }
            }
        }

        let mut grads = vec![if want_x { Some(gx) } else { None }, want_w.then_some(gw)];
        if inputs.len() == 3 {
            let gb = if inputs[2].requires_grad() {
                let mut gb = vec![T::zero(); geo.cout];
                for (row_idx, row) in gout.chunks(geo.lout).enumerate() {
                    let s: T = row.iter().copied().sum();
                    gb[row_idx % geo.cout] = gb[row_idx % geo.cout] + s;
                }
                Some(gb)
            } else {
                None
            };
            grads.push(gb);
        }
        grads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(
        x: &[f64],
        (n, cin, len): (usize, usize, usize),
        w: &[f64],
        (cout, k): (usize, usize),
        b: &[f64],
        spec: Conv1dSpec,
    ) -> (Vec<f64>, usize) {
        // Slide the window over an explicitly zero-padded copy.
        let cin_g = cin / spec.groups;
        let cout_g = cout / spec.groups;
        let padded_len = len + 2 * spec.padding;
        let mut lout = 0;
        while lout * spec.stride + k <= padded_len {
            lout += 1;
        }
        let mut out = vec![0.0; n * cout * lout];
        for bi in 0..n {
            for oc in 0..cout {
                let g = oc / cout_g;
                for o in 0..lout {
                    let mut acc = b[oc];
                    for icg in 0..cin_g {
                        let ic = g * cin_g + icg;
                        for kk in 0..k {
                            let p = o * spec.stride + kk;
                            let xv = if p < spec.padding || p >= spec.padding + len {
                                0.0
                            } else {
                                x[(bi * cin + ic) * len + p - spec.padding]
                            };
                            acc += w[(oc * cin_g + icg) * k + kk] * xv;
                        }
                    }
                    out[(bi * cout + oc) * lout + o] = acc;
                }
            }
        }
        (out, lout)
    }

    fn lcg(seed: u64, n: usize) -> Vec<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn output_length_formula_matches_sliding_window() {
        assert_eq!(conv_out_len(64000, 7, 2, 3), Some(32000));
        let mut count = 0;
        let mut start = 0;
        while start + 7 <= 64000 + 6 {
            count += 1;
            start += 2;
        }
        assert_eq!(count, 32000);
        assert_eq!(conv_out_len(5, 8, 1, 1), None);
    }

    #[test]
    fn zero_kernel_gives_zero_output() {
        let x = Tensor::<f64>::from_vec(&[1, 2, 9], lcg(1, 18)).unwrap();
        let w = Tensor::zeros(&[3, 2, 3]);
        let b = Tensor::zeros(&[3]);
        let y = conv1d(&x, &w, Some(&b), Conv1dSpec::new(1, 1, 1)).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_naive_loop_over_strides_padding_groups() {
        let cases = [
            (2, 4, 13, 6, 3, 1, 1, 1),
            (1, 4, 16, 8, 5, 2, 2, 2),
            (2, 6, 11, 6, 4, 3, 0, 3),
            (1, 8, 20, 4, 7, 4, 3, 4),
            (1, 1, 30, 5, 9, 3, 4, 1),
        ];
        for (seed, &(n, cin, len, cout, k, stride, pad, groups)) in cases.iter().enumerate() {
            let spec = Conv1dSpec::new(stride, pad, groups);
            let xs = lcg(seed as u64 * 3 + 1, n * cin * len);
            let ws = lcg(seed as u64 * 3 + 2, cout * cin / groups * k);
            let bs = lcg(seed as u64 * 3 + 3, cout);
            let (expect, lout) = naive(&xs, (n, cin, len), &ws, (cout, k), &bs, spec);
            let x = Tensor::from_vec(&[n, cin, len], xs).unwrap();
            let w = Tensor::from_vec(&[cout, cin / groups, k], ws).unwrap();
            let b = Tensor::from_vec(&[cout], bs).unwrap();
            let y = conv1d(&x, &w, Some(&b), spec).unwrap();
            assert_eq!(y.shape(), &[n, cout, lout]);
            for (a, e) in y.data().iter().zip(&expect) {
                assert!((a - e).abs() < 1e-12, "{a} vs {e}");
            }
        }
    }

    #[test]
    fn rejects_bad_groups_and_shapes() {
        let x = Tensor::<f64>::zeros(&[1, 6, 10]);
        let w = Tensor::zeros(&[4, 3, 3]);
        assert!(matches!(
            conv1d(&x, &w, None, Conv1dSpec::new(1, 0, 4)),
            Err(Error::Config(_))
        ));
        let w = Tensor::zeros(&[4, 5, 3]);
        assert!(matches!(
            conv1d(&x, &w, None, Conv1dSpec::new(1, 0, 1)),
            Err(Error::Dimension { .. })
        ));
        let w = Tensor::zeros(&[4, 6, 13]);
        assert!(matches!(
            conv1d(&x, &w, None, Conv1dSpec::new(1, 1, 1)),
            Err(Error::Dimension { .. })
        ));
    }
}
