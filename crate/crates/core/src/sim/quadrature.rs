//! Fixed-order Gauss-Legendre rules on [-1, 1].

use std::ops::{Add, Mul};

pub struct Rule {
    pub nodes: &'static [f64],
    pub weights: &'static [f64],
}

pub const GL4: Rule = Rule {
    nodes: &[-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6],
    weights: &[0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9],
};

pub const GL8: Rule = Rule {
    nodes: &[
        -0.960_289_856_497_536_3,
        -0.796_666_477_413_626_7,
        -0.525_532_409_916_329_0,
        -0.183_434_642_495_649_8,
        0.183_434_642_495_649_8,
        0.525_532_409_916_329_0,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ],
    weights: &[
        0.101_228_536_290_376_3,
        0.222_381_034_453_374_5,
        0.313_706_645_877_887_3,
        0.362_683_783_378_362_0,
        0.362_683_783_378_362_0,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ],
};

/// Integrates a pair of quantities over `[a, b]`.
pub fn gauss_legendre<A, B>(rule: &Rule, a: f64, b: f64, mut f: impl FnMut(f64) -> (A, B)) -> (A, B)
where
    A: Add<Output = A> + Mul<f64, Output = A> + Default,
    B: Add<Output = B> + Mul<f64, Output = B> + Default,
{
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut sa = A::default();
    let mut sb = B::default();
    for (x, w) in rule.nodes.iter().zip(rule.weights) {
        let (fa, fb) = f(mid + half * x);
        sa = sa + fa * (w * half);
        sb = sb + fb * (w * half);
    }
    (sa, sb)
}
