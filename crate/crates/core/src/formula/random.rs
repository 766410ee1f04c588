use rand::Rng;

use super::{Expr, Formula};

/// A random formula over exactly `var_count` variables, every one mentioned.
/// Trees have depth at most `max_depth` and mix AND, OR and NOT nodes.
pub fn random_formula<R: Rng + ?Sized>(rng: &mut R, var_count: usize, max_depth: u32) -> Formula {
    let mut body = random_expr(rng, var_count as u32, max_depth);
    let f = Formula::with_unused(var_count, body.clone()).expect("indices drawn in range");
    // Mention the stragglers inside a contradiction so semantics are unchanged.
    let missing: Vec<u32> = (1..=var_count as u32).filter(|&i| !mentions(&body, i)).collect();
    if missing.is_empty() {
        return f;
    }
    let mut alts = vec![body];
    alts.extend(missing.into_iter().map(|i| Expr::And(vec![Expr::var(i), Expr::neg(i)])));
    body = Expr::Or(alts);
    Formula::new(var_count, body).expect("all variables mentioned")
}

fn random_expr<R: Rng + ?Sized>(rng: &mut R, vars: u32, depth: u32) -> Expr {
    if vars == 0 {
        return if rng.gen() { Expr::And(vec![]) } else { Expr::Or(vec![]) };
    }
    if depth == 0 || rng.gen_bool(0.3) {
        let v = rng.gen_range(1..=vars);
        return if rng.gen() { Expr::var(v) } else { Expr::neg(v) };
    }
    match rng.gen_range(0..5) {
        0 => Expr::not(random_expr(rng, vars, depth - 1)),
        op => {
            let arity = rng.gen_range(1..=3);
            let children = (0..arity).map(|_| random_expr(rng, vars, depth - 1)).collect();
            if op % 2 == 0 {
                Expr::And(children)
            } else {
                Expr::Or(children)
            }
        }
    }
}

fn mentions(e: &Expr, i: u32) -> bool {
    match e {
        Expr::And(cs) | Expr::Or(cs) => cs.iter().any(|c| mentions(c, i)),
        Expr::Not(c) => mentions(c, i),
        Expr::Var(v) => *v == i,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mentions_every_variable() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for j in 0..9 {
            for _ in 0..20 {
                let f = random_formula(&mut rng, j, 4);
                assert_eq!(f.var_count(), j);
                assert!(f.mentions_all());
            }
        }
    }

    #[test]
    fn produces_both_outcomes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sat = (0..200).filter(|_| random_formula(&mut rng, 4, 4).is_satisfiable().unwrap()).count();
        assert!(sat > 20 && sat < 190, "{sat}");
    }
}
