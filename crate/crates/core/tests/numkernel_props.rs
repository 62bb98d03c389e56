use proptest::prelude::*;
use textorder::numkernel::{Graph, ParamStore, Tensor};

fn naive_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            for t in 0..k {
                out[i * n + j] += a[i * k + t] * b[t * n + j];
            }
        }
    }
    out
}

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..5, 1usize..5, 1usize..5)
}

proptest! {
    #[test]
    fn softmax_sums_to_one(z in prop::collection::vec(-50.0f64..50.0, 1..12)) {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let zn = g.input(Tensor::vector(z.clone()));
        let p = g.softmax(zn).unwrap();
        let total: f64 = g.value(p).data().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let all = g.masked_softmax(zn, &vec![true; z.len()]).unwrap();
        prop_assert_eq!(g.value(p).data(), g.value(all).data());
    }

    #[test]
    fn masked_entries_get_zero(
        z in prop::collection::vec(-20.0f64..20.0, 2..10),
        seed in any::<u64>(),
    ) {
        let n = z.len();
        let mut live: Vec<bool> = (0..n).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        live[(seed as usize) % n] = true;
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let zn = g.input(Tensor::vector(z));
        let p = g.masked_softmax(zn, &live).unwrap();
        let v = g.value(p).data();
        for i in 0..n {
            if !live[i] {
                prop_assert_eq!(v[i], 0.0);
            }
        }
        prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matmul_matches_naive((m, k, n) in dims(), seed in any::<u32>()) {
        let a: Vec<f64> = (0..m * k).map(|i| ((i as u32 ^ seed) % 17) as f64 - 8.0).collect();
        let b: Vec<f64> = (0..k * n).map(|i| ((i as u32).wrapping_mul(seed | 1) % 13) as f64 * 0.5).collect();
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let an = g.input(Tensor::matrix(m, k, a.clone()).unwrap());
        let bn = g.input(Tensor::matrix(k, n, b.clone()).unwrap());
        let c = g.matmul(an, bn).unwrap();
        prop_assert_eq!(g.value(c).shape(), &[m, n][..]);
        prop_assert_eq!(g.value(c).data(), &naive_matmul(&a, &b, m, k, n)[..]);
    }

    #[test]
    fn backward_is_linear(
        w in prop::collection::vec(-2.0f64..2.0, 6),
        x in prop::collection::vec(-2.0f64..2.0, 3),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let mut store = ParamStore::new();
        let wid = store.add("w", Tensor::matrix(2, 3, w).unwrap()).unwrap();
        let build = |g: &mut Graph<'_>, which: u8| {
            let wn = g.param(wid);
            let xn = g.input(Tensor::vector(x.clone()));
            let y = g.matmul(wn, xn).unwrap();
            let l1 = { let t = g.tanh(y).unwrap(); g.sum(t).unwrap() };
            let l2 = g.sum_squares(y).unwrap();
            match which {
                1 => l1,
                2 => l2,
                _ => {
                    let s1 = g.scale(l1, a).unwrap();
                    let s2 = g.scale(l2, b).unwrap();
                    g.add(s1, s2).unwrap()
                }
            }
        };
        let grad = |which| {
            let mut g = Graph::new(&store);
            let l = build(&mut g, which);
            g.backward(l).unwrap().get(wid).data().to_vec()
        };
        let (g1, g2, gc) = (grad(1), grad(2), grad(0));
        for i in 0..6 {
            prop_assert!((gc[i] - (a * g1[i] + b * g2[i])).abs() < 1e-10);
        }
    }
}
