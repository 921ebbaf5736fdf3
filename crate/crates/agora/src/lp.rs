//! Exact linear programming over rationals, and the incentive-constrained
//! upper bound on bilateral trade gains built on top of it.
//!
//! The solver is a dense primal simplex restricted to problems of the form
//! max c.x subject to Ax <= b, x >= 0 with b >= 0, where the slack basis
//! is feasible from the start. Bland's rule keeps it from cycling on the
//! heavily degenerate incentive polytopes it is used for.

use crate::dist::Distribution;
use crate::rat::Rat;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LpError {
    #[error("row {row} has {got} coefficients, expected {want}")]
    BadRow { row: usize, got: usize, want: usize },
    #[error("negative right-hand side {1} in row {0}")]
    NegativeRhs(usize, Rat),
    #[error("objective improves without bound")]
    Unbounded,
    #[error("law has infinite support")]
    InfiniteSupport,
}

/// max objective.x subject to each row a.x <= rhs, x >= 0. Right-hand
/// sides are nonnegative so the all-slack basis is feasible.
#[derive(Debug, Clone)]
pub struct SimplexProblem {
    objective: Vec<Rat>,
    rows: Vec<(Vec<Rat>, Rat)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LpSolution {
    pub value: Rat,
    pub x: Vec<Rat>,
}

impl SimplexProblem {
    pub fn new(objective: Vec<Rat>, rows: Vec<(Vec<Rat>, Rat)>) -> Result<Self, LpError> {
        let want = objective.len();
        for (r, (coeffs, rhs)) in rows.iter().enumerate() {
            if coeffs.len() != want {
                return Err(LpError::BadRow { row: r, got: coeffs.len(), want });
            }
            if rhs.is_negative() {
                return Err(LpError::NegativeRhs(r, rhs.clone()));
            }
        }
        Ok(SimplexProblem { objective, rows })
    }

    pub fn var_count(&self) -> usize {
        self.objective.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn maximize(&self) -> Result<LpSolution, LpError> {
        let n = self.objective.len();
        let m = self.rows.len();
        let width = n + m + 1;
        let mut tab: Vec<Vec<Rat>> = Vec::with_capacity(m);
        for (i, (coeffs, rhs)) in self.rows.iter().enumerate() {
            let mut row = Vec::with_capacity(width);
            row.extend(coeffs.iter().cloned());
            for k in 0..m {
                row.push(if k == i { Rat::one() } else { Rat::zero() });
            }
            row.push(rhs.clone());
            tab.push(row);
        }
        // reduced-cost row; entry j holds z_j - c_j, the rhs cell the
        // current objective value
        let mut obj: Vec<Rat> = self.objective.iter().map(|c| -c).collect();
        obj.resize(width, Rat::zero());
        let mut basis: Vec<usize> = (n..n + m).collect();

        loop {
            let Some(entering) = (0..n + m).find(|&j| obj[j].is_negative()) else {
                break;
            };
            let mut leaving: Option<(usize, Rat)> = None;
            for i in 0..m {
                if !tab[i][entering].is_positive() {
                    continue;
                }
                let ratio = &tab[i][width - 1] / &tab[i][entering];
                let better = match &leaving {
                    None => true,
                    Some((cur, best)) => {
                        ratio < *best || (ratio == *best && basis[i] < basis[*cur])
                    }
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
            let Some((pivot_row, _)) = leaving else {
                return Err(LpError::Unbounded);
            };
            let pivot = tab[pivot_row][entering].clone();
            for cell in tab[pivot_row].iter_mut() {
                *cell /= &pivot;
            }
            for i in 0..m {
                if i == pivot_row || tab[i][entering].is_zero() {
                    continue;
                }
                let factor = tab[i][entering].clone();
                for j in 0..width {
                    let delta = &factor * &tab[pivot_row][j];
                    tab[i][j] -= delta;
                }
            }
            if !obj[entering].is_zero() {
                let factor = obj[entering].clone();
                for j in 0..width {
                    let delta = &factor * &tab[pivot_row][j];
                    obj[j] -= delta;
                }
            }
            basis[pivot_row] = entering;
        }

        let mut x = vec![Rat::zero(); n];
        for (i, &var) in basis.iter().enumerate() {
            if var < n {
                x[var] = tab[i][width - 1].clone();
            }
        }
        Ok(LpSolution { value: obj[width - 1].clone(), x })
    }
}

fn finite_atoms(d: &Distribution) -> Result<&[(Rat, Rat)], LpError> {
    d.atoms().ok_or(LpError::InfiniteSupport)
}

/// Expected gains from always executing every beneficial trade between one
/// buyer and one seller with independent finite-support laws.
pub fn expected_first_best_bilateral(
    db: &Distribution,
    ds: &Distribution,
) -> Result<Rat, LpError> {
    let buyers = finite_atoms(db)?;
    let sellers = finite_atoms(ds)?;
    let mut total = Rat::zero();
    for (b, fb) in buyers {
        for (s, fs) in sellers {
            if b > s {
                total += fb * fs * (b - s);
            }
        }
    }
    Ok(total)
}

/// Best expected gains any single posted price achieves, trading exactly
/// when the value is weakly above and the cost weakly below the price.
/// Returns the lowest optimal price with its expected gains.
pub fn best_posted_price(db: &Distribution, ds: &Distribution) -> Result<(Rat, Rat), LpError> {
    let buyers = finite_atoms(db)?;
    let sellers = finite_atoms(ds)?;
    let mut candidates: Vec<Rat> =
        buyers.iter().chain(sellers).map(|(x, _)| x.clone()).collect();
    candidates.sort();
    candidates.dedup();
    let mut best: Option<(Rat, Rat)> = None;
    for p in candidates {
        let mut g = Rat::zero();
        for (b, fb) in buyers {
            if b < &p {
                continue;
            }
            for (s, fs) in sellers {
                if s <= &p {
                    g += fb * fs * (b - s);
                }
            }
        }
        if best.as_ref().is_none_or(|(_, bg)| g > *bg) {
            best = Some((p, g));
        }
    }
    Ok(best.expect("laws have nonempty support"))
}

/// The incentive-constrained second best for one buyer and one seller:
/// the largest expected gains from trade any mechanism can deliver that is
/// interim incentive compatible, interim individually rational, and runs
/// no expected deficit. Encoded as an LP over trade probabilities and
/// signed transfers per type profile.
pub fn second_best_lp(db: &Distribution, ds: &Distribution) -> Result<SimplexProblem, LpError> {
    let buyers = finite_atoms(db)?;
    let sellers = finite_atoms(ds)?;
    let nb = buyers.len();
    let ns = sellers.len();
    // variable layout: x | tB+ | tB- | tS+ | tS-, each an nb x ns block
    let block = nb * ns;
    let nvars = 5 * block;
    let x = |i: usize, j: usize| i * ns + j;
    let tbp = |i: usize, j: usize| block + i * ns + j;
    let tbm = |i: usize, j: usize| 2 * block + i * ns + j;
    let tsp = |i: usize, j: usize| 3 * block + i * ns + j;
    let tsm = |i: usize, j: usize| 4 * block + i * ns + j;

    let mut objective = vec![Rat::zero(); nvars];
    for (i, (b, fb)) in buyers.iter().enumerate() {
        for (j, (s, fs)) in sellers.iter().enumerate() {
            objective[x(i, j)] = fb * fs * (b - s);
        }
    }

    let mut rows: Vec<(Vec<Rat>, Rat)> = Vec::new();
    // trade probabilities are at most one
    for i in 0..nb {
        for j in 0..ns {
            let mut row = vec![Rat::zero(); nvars];
            row[x(i, j)] = Rat::one();
            rows.push((row, Rat::one()));
        }
    }
    // a buyer of type b must not prefer reporting b'
    for (i, (b, _)) in buyers.iter().enumerate() {
        for i2 in 0..nb {
            if i2 == i {
                continue;
            }
            let mut row = vec![Rat::zero(); nvars];
            for (j, (_, fs)) in sellers.iter().enumerate() {
                row[x(i2, j)] += b * fs;
                row[tbp(i2, j)] -= fs;
                row[tbm(i2, j)] += fs;
                row[x(i, j)] -= b * fs;
                row[tbp(i, j)] += fs;
                row[tbm(i, j)] -= fs;
            }
            rows.push((row, Rat::zero()));
        }
    }
    // a seller of type s must not prefer reporting s'
    for (j, (s, _)) in sellers.iter().enumerate() {
        for j2 in 0..ns {
            if j2 == j {
                continue;
            }
            let mut row = vec![Rat::zero(); nvars];
            for (i, (_, fb)) in buyers.iter().enumerate() {
                row[tsp(i, j2)] += fb;
                row[tsm(i, j2)] -= fb;
                row[x(i, j2)] -= s * fb;
                row[tsp(i, j)] -= fb;
                row[tsm(i, j)] += fb;
                row[x(i, j)] += s * fb;
            }
            rows.push((row, Rat::zero()));
        }
    }
    // participation: no interim expected loss on either side
    for (i, (b, _)) in buyers.iter().enumerate() {
        let mut row = vec![Rat::zero(); nvars];
        for (j, (_, fs)) in sellers.iter().enumerate() {
            row[tbp(i, j)] += fs;
            row[tbm(i, j)] -= fs;
            row[x(i, j)] -= b * fs;
        }
        rows.push((row, Rat::zero()));
    }
    for (j, (s, _)) in sellers.iter().enumerate() {
        let mut row = vec![Rat::zero(); nvars];
        for (i, (_, fb)) in buyers.iter().enumerate() {
            row[x(i, j)] += s * fb;
            row[tsp(i, j)] -= fb;
            row[tsm(i, j)] += fb;
        }
        rows.push((row, Rat::zero()));
    }
    // expected receipts must not exceed expected payments
    {
        let mut row = vec![Rat::zero(); nvars];
        for (i, (_, fb)) in buyers.iter().enumerate() {
            for (j, (_, fs)) in sellers.iter().enumerate() {
                let w = fb * fs;
                row[tsp(i, j)] += &w;
                row[tsm(i, j)] -= &w;
                row[tbp(i, j)] -= &w;
                row[tbm(i, j)] += &w;
            }
        }
        rows.push((row, Rat::zero()));
    }
    SimplexProblem::new(objective, rows)
}

/// Optimal value of `second_best_lp`.
pub fn second_best_bilateral(db: &Distribution, ds: &Distribution) -> Result<Rat, LpError> {
    Ok(second_best_lp(db, ds)?.maximize()?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(atoms: &[(i64, (i64, i64))]) -> Distribution {
        Distribution::discrete(
            atoms.iter().map(|&(v, (n, d))| (Rat::int(v), Rat::new(n, d))).collect(),
        )
        .unwrap()
    }

    #[test]
    fn simplex_solves_a_small_program() {
        // max x + y st x <= 3, y <= 2, x + y <= 4
        let problem = SimplexProblem::new(
            vec![Rat::one(), Rat::one()],
            vec![
                (vec![Rat::one(), Rat::zero()], Rat::int(3)),
                (vec![Rat::zero(), Rat::one()], Rat::int(2)),
                (vec![Rat::one(), Rat::one()], Rat::int(4)),
            ],
        )
        .unwrap();
        let sol = problem.maximize().unwrap();
        assert_eq!(sol.value, Rat::int(4));
        assert_eq!(&sol.x[0] + &sol.x[1], Rat::int(4));
        assert!(sol.x.iter().all(|v| !v.is_negative()));
    }

    #[test]
    fn simplex_handles_degenerate_ties() {
        // both rows bind at the same ratio; Bland's rule must still
        // terminate at the optimum
        let problem = SimplexProblem::new(
            vec![Rat::int(2), Rat::one()],
            vec![
                (vec![Rat::one(), Rat::one()], Rat::int(1)),
                (vec![Rat::one(), -Rat::one()], Rat::int(1)),
                (vec![Rat::one(), Rat::zero()], Rat::int(1)),
            ],
        )
        .unwrap();
        let sol = problem.maximize().unwrap();
        assert_eq!(sol.value, Rat::int(2));
    }

    #[test]
    fn simplex_reports_unbounded_programs() {
        let problem = SimplexProblem::new(
            vec![Rat::one(), Rat::zero()],
            vec![(vec![Rat::zero(), Rat::one()], Rat::int(1))],
        )
        .unwrap();
        assert_eq!(problem.maximize(), Err(LpError::Unbounded));
    }

    #[test]
    fn simplex_rejects_negative_rhs() {
        let r = SimplexProblem::new(vec![Rat::one()], vec![(vec![Rat::one()], Rat::int(-1))]);
        assert!(matches!(r, Err(LpError::NegativeRhs(0, _))));
    }

    #[test]
    fn point_laws_trade_exactly_when_beneficial() {
        let db = Distribution::point(Rat::int(7));
        let ds = Distribution::point(Rat::int(3));
        let v = second_best_bilateral(&db, &ds).unwrap();
        assert_eq!(v, Rat::int(4));
        let v = second_best_bilateral(&ds, &db).unwrap();
        assert_eq!(v, Rat::zero());
    }

    #[test]
    fn symmetric_two_point_laws_have_no_gap() {
        // values and costs both {1, 3}: a posted price of 2 (here realized
        // at the atom 1 on the cost side and 3 on the value side) already
        // captures the full first best of 1/2
        let d = disc(&[(1, (1, 2)), (3, (1, 2))]);
        let first = expected_first_best_bilateral(&d, &d).unwrap();
        assert_eq!(first, Rat::new(1, 2));
        let lp = second_best_bilateral(&d, &d).unwrap();
        assert_eq!(lp, first);
    }

    #[test]
    fn interleaved_laws_with_wide_overlap_have_a_strict_gap() {
        // values {1, 10}, costs {0, 9}: full efficiency would need more in
        // expected payments than interim rationality lets the mechanism
        // collect (the rents of the strong types eat 9/2 of the 3 in
        // gains), so the incentive bound sits strictly below first best
        let db = disc(&[(1, (1, 2)), (10, (1, 2))]);
        let ds = disc(&[(0, (1, 2)), (9, (1, 2))]);
        let first = expected_first_best_bilateral(&db, &ds).unwrap();
        assert_eq!(first, Rat::int(3));
        let (_, posted) = best_posted_price(&db, &ds).unwrap();
        assert_eq!(posted, Rat::new(11, 4));
        let lp = second_best_bilateral(&db, &ds).unwrap();
        assert!(lp >= posted);
        assert!(lp < first);
    }

    #[test]
    fn narrow_overlap_reaches_first_best_beyond_posted_prices() {
        // values {1, 3}, costs {0, 2}: every posted price stops at 1, yet
        // profile-dependent transfers cover all information rents and the
        // incentive bound reaches the full first best of 5/4
        let db = disc(&[(1, (1, 2)), (3, (1, 2))]);
        let ds = disc(&[(0, (1, 2)), (2, (1, 2))]);
        let first = expected_first_best_bilateral(&db, &ds).unwrap();
        assert_eq!(first, Rat::new(5, 4));
        let (_, posted) = best_posted_price(&db, &ds).unwrap();
        assert_eq!(posted, Rat::one());
        let lp = second_best_bilateral(&db, &ds).unwrap();
        assert_eq!(lp, first);
    }

    #[test]
    fn lp_shape_matches_the_constraint_census() {
        let db = disc(&[(1, (1, 3)), (2, (1, 3)), (4, (1, 3))]);
        let ds = disc(&[(0, (1, 2)), (3, (1, 2))]);
        let lp = second_best_lp(&db, &ds).unwrap();
        let (nb, ns) = (3, 2);
        assert_eq!(lp.var_count(), 5 * nb * ns);
        assert_eq!(
            lp.row_count(),
            nb * ns + nb * (nb - 1) + ns * (ns - 1) + nb + ns + 1
        );
    }

    #[test]
    fn posted_price_scan_returns_the_lowest_optimum() {
        // any price in [1, 2] trades the single beneficial pair; the scan
        // reports the lowest candidate doing so
        let db = disc(&[(2, (1, 2)), (3, (1, 2))]);
        let ds = disc(&[(1, (1, 2)), (5, (1, 2))]);
        let (p, g) = best_posted_price(&db, &ds).unwrap();
        assert_eq!(p, Rat::int(1));
        assert_eq!(g, &Rat::new(1, 4) * &Rat::int(1) + &Rat::new(1, 4) * &Rat::int(2));
    }
}
