//! Reverse-mode automatic differentiation over small dense tensors, a
//! finite-difference gradient checker, and the Adam update rule.

mod adam;
mod grad_check;
mod tape;
mod tensor;

pub use adam::{AdamError, AdamState};
pub use grad_check::{grad_check, rel_err, GradCheckEntry, GradCheckReport};
pub use tape::{Gradients, Tape, TapeError, Var};
pub use tensor::{Tensor, TensorError};

#[cfg(test)]
mod prop_tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.gen_range(-1.2..1.2)).collect();
        Tensor::new(shape.to_vec(), data).unwrap()
    }

    /// Every op kind's backward matches central differences on random shapes.
    #[test]
    fn all_ops_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..4 {
            let m = rng.gen_range(1..4usize);
            let k = rng.gen_range(1..4usize);
            let n = rng.gen_range(1..4usize);
            let cases: Vec<(&str, Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var, TapeError>>, Vec<(String, Tensor)>)> = vec![
                (
                    "add",
                    Box::new(|t, v| {
                        let y = t.add(v[0], v[1])?;
                        let s = t.tanh(y)?;
                        t.sum(s)
                    }),
                    vec![
                        ("a".into(), rand_tensor(&mut rng, &[m, n])),
                        ("b".into(), rand_tensor(&mut rng, &[m, n])),
                    ],
                ),
                (
                    "add_broadcast",
                    Box::new(|t, v| {
                        let y = t.add(v[0], v[1])?;
                        let s = t.sigmoid(y)?;
                        t.mean(s)
                    }),
                    vec![
                        ("a".into(), rand_tensor(&mut rng, &[m, n])),
                        ("b".into(), rand_tensor(&mut rng, &[1, n])),
                    ],
                ),
                (
                    "sub_mul_square",
                    Box::new(|t, v| {
                        let d = t.sub(v[0], v[1])?;
                        let p = t.mul(d, v[0])?;
                        let q = t.square(p)?;
                        t.mean(q)
                    }),
                    vec![
                        ("a".into(), rand_tensor(&mut rng, &[m, n])),
                        ("b".into(), rand_tensor(&mut rng, &[m, n])),
                    ],
                ),
                (
                    "matmul_scale_relu",
                    Box::new(|t, v| {
                        let y = t.matmul(v[0], v[1])?;
                        let z = t.scale(y, 0.7)?;
                        let r = t.relu(z)?;
                        t.sum(r)
                    }),
                    vec![
                        ("a".into(), rand_tensor(&mut rng, &[m, k])),
                        ("b".into(), rand_tensor(&mut rng, &[k, n])),
                    ],
                ),
                (
                    "concat_slice",
                    Box::new(move |t, v| {
                        let c = t.concat(1, &[v[0], v[1]])?;
                        let s = t.slice(c, 1, 1, 1)?;
                        let y = t.tanh(s)?;
                        t.mean(y)
                    }),
                    vec![
                        ("a".into(), rand_tensor(&mut rng, &[m, 2])),
                        ("b".into(), rand_tensor(&mut rng, &[m, 3])),
                    ],
                ),
            ];
            for (name, f, params) in cases {
                let report = grad_check(f, &params, 1e-5, 1e-6).unwrap();
                assert!(
                    report.passed(),
                    "trial {trial} op {name}: max rel err {}",
                    report.max_rel_err
                );
            }
        }
    }

    /// Gradient of a sum of per-branch scalars equals the sum of per-branch
    /// gradients (linearity of the backward pass).
    #[test]
    fn gradient_of_sum_is_sum_of_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = rand_tensor(&mut rng, &[3, 3]);
        let xs: Vec<Tensor> = (0..4).map(|_| rand_tensor(&mut rng, &[3, 1])).collect();

        let branch = |w: &Tensor, x: &Tensor| -> Tensor {
            let mut tape = Tape::new();
            let wv = tape.param(w.clone()).unwrap();
            let xv = tape.input(x.clone()).unwrap();
            let h = tape.matmul(wv, xv).unwrap();
            let t = tape.tanh(h).unwrap();
            let s = tape.mean(t).unwrap();
            tape.backward(s).unwrap().wrt(wv).unwrap().clone()
        };

        let mut summed = Tensor::zeros(&[3, 3]);
        for x in &xs {
            let g = branch(&w, x);
            for (acc, v) in summed.data_mut().iter_mut().zip(g.data()) {
                *acc += v;
            }
        }

        let mut tape = Tape::new();
        let wv = tape.param(w.clone()).unwrap();
        let mut parts = Vec::new();
        for x in &xs {
            let xv = tape.input(x.clone()).unwrap();
            let h = tape.matmul(wv, xv).unwrap();
            let t = tape.tanh(h).unwrap();
            parts.push(tape.mean(t).unwrap());
        }
        let mut acc = parts[0];
        for &p in &parts[1..] {
            acc = tape.add(acc, p).unwrap();
        }
        let joint = tape.backward(acc).unwrap().wrt(wv).unwrap().clone();

        for (a, b) in joint.data().iter().zip(summed.data()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
