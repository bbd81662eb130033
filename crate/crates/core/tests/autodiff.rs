//! Every tape primitive against central finite differences.

use gmc::tensor::{grad_check_many, Tape, Tensor, Var};
use gmc::Result;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-6;
const TOL: f64 = 1e-6;

fn random(rng: &mut ChaCha8Rng, shape: Vec<usize>, lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Values bounded away from zero, for primitives with a kink there.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    let mut t = random(rng, shape, 1e-2, 2.0);
    for v in t.data_mut() {
        if rng.random_bool(0.5) {
            *v = -*v;
        }
    }
    t
}

/// Contracts `y` with fixed random weights so every output element matters.
fn project(tape: &mut Tape, y: Var, seed: u64) -> Result<Var> {
    let shape = tape.value(y).shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let w = tape.constant(random(&mut rng, shape, -1.0, 1.0));
    let p = tape.mul(y, w)?;
    Ok(tape.sum(p))
}

fn check<F>(inputs: &[Tensor], seed: u64, f: F)
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let report = grad_check_many(
        |tape, vars| {
            let y = f(tape, vars)?;
            if tape.value(y).is_scalar() {
                Ok(y)
            } else {
                project(tape, y, seed)
            }
        },
        inputs,
        STEP,
    )
    .unwrap();
    assert!(report.passed(TOL), "{report:?}");
}

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.random_range(1..=5), rng.random_range(1..=5))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matmul(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, k) = dims(&mut rng);
        let n = rng.random_range(1..=5);
        let a = random(&mut rng, vec![m, k], -2.0, 2.0);
        let b = random(&mut rng, vec![k, n], -2.0, 2.0);
        check(&[a, b], seed, |t, v| t.matmul(v[0], v[1]));
    }

    #[test]
    fn transpose(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = dims(&mut rng);
        check(&[random(&mut rng, vec![r, c], -2.0, 2.0)], seed, |t, v| t.transpose(v[0]));
    }

    #[test]
    fn add_sub_mul(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = dims(&mut rng);
        let a = random(&mut rng, vec![r, c], -2.0, 2.0);
        let b = random(&mut rng, vec![r, c], -2.0, 2.0);
        let ins = [a, b];
        check(&ins, seed, |t, v| t.add(v[0], v[1]));
        check(&ins, seed, |t, v| t.sub(v[0], v[1]));
        check(&ins, seed, |t, v| t.mul(v[0], v[1]));
    }

    #[test]
    fn bias_add(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = dims(&mut rng);
        let x = random(&mut rng, vec![r, c], -2.0, 2.0);
        let b = random(&mut rng, vec![c], -2.0, 2.0);
        check(&[x, b], seed, |t, v| t.add(v[0], v[1]));
    }

    #[test]
    fn scale_and_shift(seed in any::<u64>(), factor in -3.0f64..3.0, offset in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = dims(&mut rng);
        let x = [random(&mut rng, vec![r, c], -2.0, 2.0)];
        check(&x, seed, |t, v| Ok(t.scale(v[0], factor)));
        check(&x, seed, |t, v| Ok(t.shift(v[0], offset)));
    }

    #[test]
    fn activations(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = dims(&mut rng);
        let x = [away_from_zero(&mut rng, vec![r, c])];
        check(&x, seed, |t, v| Ok(t.relu(v[0])));
        check(&x, seed, |t, v| Ok(t.swish(v[0])));
        check(&x, seed, |t, v| Ok(t.exp(v[0])));
    }

    #[test]
    fn log(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = dims(&mut rng);
        check(&[random(&mut rng, vec![r, c], 0.5, 3.0)], seed, |t, v| t.log(v[0]));
    }

    #[test]
    fn reductions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = dims(&mut rng);
        let x = [random(&mut rng, vec![r, c], -2.0, 2.0)];
        check(&x, seed, |t, v| Ok(t.sum(v[0])));
        check(&x, seed, |t, v| Ok(t.mean(v[0])));
        check(&x, seed, |t, v| t.sum_rows(v[0]));
        check(&x, seed, |t, v| t.log_sum_exp_rows(v[0]));
    }

    #[test]
    fn diag(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=5);
        check(&[random(&mut rng, vec![n, n], -2.0, 2.0)], seed, |t, v| t.diag(v[0]));
    }

    #[test]
    fn concat_and_slice(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = dims(&mut rng);
        let a = random(&mut rng, vec![r, c], -2.0, 2.0);
        let b = random(&mut rng, vec![r, c + 1], -2.0, 2.0);
        let d = random(&mut rng, vec![r + 2, c], -2.0, 2.0);
        check(&[a.clone(), b], seed, |t, v| t.concat(&[v[0], v[1]], 1));
        check(&[a.clone(), d], seed, |t, v| t.concat(&[v[0], v[1]], 0));
        let end = rng.random_range(1..=c);
        let start = rng.random_range(0..end);
        check(std::slice::from_ref(&a), seed, |t, v| t.slice(v[0], 1, start, end));
        let end = rng.random_range(1..=r);
        check(&[a], seed, |t, v| t.slice(v[0], 0, 0, end));
    }

    #[test]
    fn norms_and_dot(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = dims(&mut rng);
        let n = rng.random_range(1..=8);
        let u = away_from_zero(&mut rng, vec![n]);
        let w = random(&mut rng, vec![n], -2.0, 2.0);
        check(std::slice::from_ref(&u), seed, |t, v| t.l2_norm(v[0]));
        check(&[u, w], seed, |t, v| t.dot(v[0], v[1]));
        check(&[away_from_zero(&mut rng, vec![r, c])], seed, |t, v| t.normalize_rows(v[0]));
    }

    #[test]
    fn fan_out_sums_contributions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = dims(&mut rng);
        let x = random(&mut rng, vec![r, c], -1.5, 1.5);
        let f = |t: &mut Tape, x: Var| -> Result<Var> {
            let e = t.swish(x);
            project(t, e, seed)
        };
        let g = |t: &mut Tape, x: Var| -> Result<Var> {
            let e = t.exp(x);
            let s = t.scale(e, 0.5);
            project(t, s, seed + 1)
        };
        let grad_of = |both: bool, use_f: bool| {
            let mut tape = Tape::new();
            let v = tape.param(x.clone());
            let root = if both {
                let a = f(&mut tape, v).unwrap();
                let b = g(&mut tape, v).unwrap();
                tape.add(a, b).unwrap()
            } else if use_f {
                f(&mut tape, v).unwrap()
            } else {
                g(&mut tape, v).unwrap()
            };
            tape.backward(root).unwrap();
            tape.grad(v).unwrap().to_vec()
        };
        let (sum, df, dg) = (grad_of(true, false), grad_of(false, true), grad_of(false, false));
        for i in 0..sum.len() {
            prop_assert!((sum[i] - (df[i] + dg[i])).abs() <= 1e-14 * (1.0 + sum[i].abs()));
        }
    }

    #[test]
    fn disabling_gradients_is_bit_identical(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (r, c) = dims(&mut rng);
        let x = random(&mut rng, vec![r, c], -2.0, 2.0);
        let w = random(&mut rng, vec![c, 3], -2.0, 2.0);
        let run = |mut tape: Tape| {
            let xv = tape.param(x.clone());
            let wv = tape.param(w.clone());
            let h = tape.matmul(xv, wv).unwrap();
            let h = tape.swish(h);
            let n = tape.normalize_rows(h).unwrap_or(h);
            let l = tape.log_sum_exp_rows(n).unwrap();
            let s = tape.sum(l);
            (tape.value(n).clone(), tape.item(s).unwrap())
        };
        let (a, sa) = run(Tape::new());
        let (b, sb) = run(Tape::without_grad());
        prop_assert_eq!(a.data(), b.data());
        prop_assert_eq!(sa.to_bits(), sb.to_bits());
    }
}

#[test]
fn dot_matches_scalar_loop() {
    let (a, b) = ([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]);
    let expect: f64 = (0..3).map(|i| a[i] * b[i]).sum();
    let mut tape = Tape::new();
    let u = tape.constant(Tensor::vector(a.to_vec()).unwrap());
    let v = tape.constant(Tensor::vector(b.to_vec()).unwrap());
    let d = tape.dot(u, v).unwrap();
    assert_eq!(tape.item(d).unwrap(), expect);
    assert_eq!(expect, 32.0);
}
