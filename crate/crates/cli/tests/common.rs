#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded m = 3 coefficient file: upper-triangular λ_s, remainders whose
/// 1-jets vanish and whose second component has no `t²` term.
pub fn general_coeffs_toml(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let e = [u(-0.5, 0.5), u(-0.5, 0.5)];
    let a = [u(-1.0, 1.0), u(-1.0, 1.0)];
    let b = u(1.0, 2.0);
    let c = [u(-1.0, 1.0), u(-1.0, 1.0)];
    let g = [u(-0.3, 0.3), u(-0.3, 0.3), u(-0.3, 0.3), u(-0.3, 0.3)];
    let l = [u(0.1, 0.4), u(-0.2, 0.2), u(0.1, 0.4)];
    let sigma = u(1.5, 1.7);
    let r = [u(-0.5, 0.5), u(-0.5, 0.5), u(-0.5, 0.5), u(-0.5, 0.5), u(-0.5, 0.5)];
    format!(
        r#"dim = 3
e = [{}, {}]
a = [{}, {}]
b = {}
c = [{}, {}]
gamma = [[{}, {}], [{}, {}]]
lambda_s = [[{}, {}], [0.0, {}]]
sigma = {}

[[rho1]]
terms = [{{ coeff = {}, powers = [0, 0, 2] }}]

[[rho1]]
terms = [{{ coeff = {}, powers = [1, 0, 1] }}]

[rho2]
terms = [{{ coeff = {}, powers = [0, 0, 3] }}, {{ coeff = {}, powers = [1, 1, 0] }}, {{ coeff = {}, powers = [0, 1, 1] }}]
"#,
        e[0], e[1], a[0], a[1], b, c[0], c[1], g[0], g[1], g[2], g[3], l[0], l[1], l[2], sigma, r[0], r[1], r[2],
        r[3], r[4]
    )
}
