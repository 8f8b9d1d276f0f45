use std::collections::HashMap;

use super::{Identity, LinearTerm, MaltsevCondition, OperationSymbol, SymbolId, TermError, Variable};

/// One entry of a cube-identity matrix.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CubeLetter {
    X,
    Y,
}

impl CubeLetter {
    pub fn variable(self) -> Variable {
        match self {
            CubeLetter::X => Variable::X,
            CubeLetter::Y => Variable::Y,
        }
    }

    pub fn from_char(c: char) -> Option<CubeLetter> {
        match c {
            'x' => Some(CubeLetter::X),
            'y' => Some(CubeLetter::Y),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            CubeLetter::X => 'x',
            CubeLetter::Y => 'y',
        }
    }
}

fn ternary_family(prefix: &str, k: usize) -> Vec<OperationSymbol> {
    (0..=k)
        .map(|i| OperationSymbol::new(format!("{prefix}_{i}"), 3))
        .collect()
}

fn app(i: usize, args: [Variable; 3]) -> LinearTerm {
    LinearTerm::app(SymbolId(i), args)
}

/// Jónsson terms `d_0, ..., d_k` (congruence distributivity):
///
/// ```text
/// d_0(x,y,z) = x        d_k(x,y,z) = z
/// d_i(x,y,x) = x                              0 <= i <= k
/// d_i(x,x,y) = d_{i+1}(x,x,y)                 i even
/// d_i(x,y,y) = d_{i+1}(x,y,y)                 i odd
/// ```
pub fn jonsson_condition(k: usize) -> Result<MaltsevCondition, TermError> {
    if k < 1 {
        return Err(TermError::Generator("Jónsson condition needs k >= 1".into()));
    }
    let (x, y, z) = (Variable::X, Variable::Y, Variable::Z);
    let mut ids = vec![
        Identity::new(app(0, [x, y, z]), LinearTerm::Var(x)),
        Identity::new(app(k, [x, y, z]), LinearTerm::Var(z)),
    ];
    for i in 0..=k {
        ids.push(Identity::new(app(i, [x, y, x]), LinearTerm::Var(x)));
    }
    for i in (0..k).step_by(2) {
        ids.push(Identity::new(app(i, [x, x, y]), app(i + 1, [x, x, y])));
    }
    for i in (1..k).step_by(2) {
        ids.push(Identity::new(app(i, [x, y, y]), app(i + 1, [x, y, y])));
    }
    MaltsevCondition::new(ternary_family("d", k), ids)
}

/// Hagemann–Mitschke terms `p_0, ..., p_k` (congruence k-permutability):
/// `p_0(x,y,z) = x`, `p_k(x,y,z) = z` and `p_i(x,x,y) = p_{i+1}(x,y,y)` for
/// `0 <= i < k`.
pub fn hagemann_mitschke_condition(k: usize) -> Result<MaltsevCondition, TermError> {
    if k < 1 {
        return Err(TermError::Generator(
            "Hagemann-Mitschke condition needs k >= 1".into(),
        ));
    }
    let (x, y, z) = (Variable::X, Variable::Y, Variable::Z);
    let mut ids = vec![
        Identity::new(app(0, [x, y, z]), LinearTerm::Var(x)),
        Identity::new(app(k, [x, y, z]), LinearTerm::Var(z)),
    ];
    for i in 0..k {
        ids.push(Identity::new(app(i, [x, x, y]), app(i + 1, [x, y, y])));
    }
    MaltsevCondition::new(ternary_family("p", k), ids)
}

/// Cube identities for a single symbol. Each column is an `m`-tuple over
/// `{x, y}` (one per argument of the symbol); row `j` of the matrix gives the
/// identity `c(row j) = y`.
pub fn cube_condition(
    columns: &[Vec<CubeLetter>],
    symbol: &str,
) -> Result<MaltsevCondition, TermError> {
    let m = columns.first().map(Vec::len).unwrap_or(0);
    if m < 2 {
        return Err(TermError::Generator(
            "cube identities need at least two rows".into(),
        ));
    }
    if let Some(i) = columns.iter().position(|c| c.len() != m) {
        return Err(TermError::Generator(format!(
            "column {} has length {}, expected {m}",
            i + 1,
            columns[i].len()
        )));
    }
    if let Some(i) = columns
        .iter()
        .position(|c| c.iter().all(|l| *l == CubeLetter::Y))
    {
        return Err(TermError::Generator(format!(
            "column {} consists of y only",
            i + 1
        )));
    }
    let ids = (0..m)
        .map(|j| {
            Identity::new(
                LinearTerm::app(SymbolId(0), columns.iter().map(|c| c[j].variable())),
                LinearTerm::Var(Variable::Y),
            )
        })
        .collect();
    MaltsevCondition::new(vec![OperationSymbol::new(symbol, columns.len())], ids)
}

/// Union of conditions over pairwise disjoint signatures.
pub fn union_conditions(parts: &[MaltsevCondition]) -> Result<MaltsevCondition, TermError> {
    let mut signature = Vec::new();
    let mut identities = Vec::new();
    let mut owner: HashMap<String, usize> = HashMap::new();
    for (p, m) in parts.iter().enumerate() {
        let offset = signature.len();
        for s in m.signature() {
            if owner.insert(s.name.clone(), p).is_some() {
                return Err(TermError::SymbolCollision(s.name.clone()));
            }
            signature.push(s.clone());
        }
        let shift = |t: &LinearTerm| match t {
            LinearTerm::Var(v) => LinearTerm::Var(*v),
            LinearTerm::App { symbol, args } => LinearTerm::App {
                symbol: SymbolId(symbol.0 + offset),
                args: args.clone(),
            },
        };
        identities.extend(
            m.identities()
                .iter()
                .map(|id| Identity::new(shift(&id.lhs), shift(&id.rhs))),
        );
    }
    MaltsevCondition::new(signature, identities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use CubeLetter::{X, Y};

    fn render(m: &MaltsevCondition) -> Vec<String> {
        m.identities()
            .iter()
            .map(|id| m.display_identity(id).to_string())
            .collect()
    }

    #[test]
    fn jonsson_three() {
        let m = jonsson_condition(3).unwrap();
        assert_eq!(m.signature().len(), 4);
        assert_eq!(
            render(&m),
            [
                "d_0(x,y,z) = x",
                "d_3(x,y,z) = z",
                "d_0(x,y,x) = x",
                "d_1(x,y,x) = x",
                "d_2(x,y,x) = x",
                "d_3(x,y,x) = x",
                "d_0(x,x,y) = d_1(x,x,y)",
                "d_2(x,x,y) = d_3(x,x,y)",
                "d_1(x,y,y) = d_2(x,y,y)",
            ]
        );
    }

    #[test]
    fn jonsson_small_cases() {
        let m = jonsson_condition(2).unwrap();
        assert!(render(&m).contains(&"d_1(x,y,x) = x".to_string()));
        let m = jonsson_condition(1).unwrap();
        assert_eq!(
            render(&m),
            [
                "d_0(x,y,z) = x",
                "d_1(x,y,z) = z",
                "d_0(x,y,x) = x",
                "d_1(x,y,x) = x",
                "d_0(x,x,y) = d_1(x,x,y)",
            ]
        );
        assert!(jonsson_condition(0).is_err());
    }

    #[test]
    fn hagemann_mitschke_three() {
        let m = hagemann_mitschke_condition(3).unwrap();
        assert_eq!(m.signature().len(), 4);
        assert_eq!(
            render(&m),
            [
                "p_0(x,y,z) = x",
                "p_3(x,y,z) = z",
                "p_0(x,x,y) = p_1(x,y,y)",
                "p_1(x,x,y) = p_2(x,y,y)",
                "p_2(x,x,y) = p_3(x,y,y)",
            ]
        );
        assert_eq!(hagemann_mitschke_condition(1).unwrap().identities().len(), 3);
        assert!(hagemann_mitschke_condition(0).is_err());
    }

    #[test]
    fn cube_rows() {
        let m = cube_condition(&[vec![X, Y], vec![X, X], vec![Y, X]], "c").unwrap();
        assert_eq!(render(&m), ["c(x,x,y) = y", "c(y,x,x) = y"]);
        let m = cube_condition(&[vec![X, Y], vec![Y, X]], "c").unwrap();
        assert_eq!(render(&m), ["c(x,y) = y", "c(y,x) = y"]);
        assert!(cube_condition(&[vec![Y, Y]], "c").is_err());
        assert!(cube_condition(&[vec![X]], "c").is_err());
        assert!(cube_condition(&[vec![X, Y], vec![X]], "c").is_err());
    }

    #[test]
    fn cube_rows_have_y_on_the_right() {
        // every nonempty set of columns without an all-y column, m = 2, 3
        for m in 2..=3usize {
            let cols: Vec<Vec<CubeLetter>> = (0..(1u32 << m) - 1)
                .map(|bits| (0..m).map(|j| if bits >> j & 1 == 1 { Y } else { X }).collect())
                .collect();
            for mask in 1u32..(1 << cols.len()) {
                let chosen: Vec<_> = (0..cols.len())
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| cols[i].clone())
                    .collect();
                let c = cube_condition(&chosen, "c").unwrap();
                for id in c.identities() {
                    assert_eq!(id.rhs, LinearTerm::Var(Variable::Y));
                    assert!(id.lhs.occurrences().iter().all(|v| v.0 <= 1));
                }
            }
        }
    }

    #[test]
    fn union_of_cd3_and_cp3() {
        let cd = jonsson_condition(3).unwrap();
        let cp = hagemann_mitschke_condition(3).unwrap();
        let u = union_conditions(&[cd.clone(), cp.clone()]).unwrap();
        assert_eq!(u.signature().len(), 8);
        assert_eq!(u.identities().len(), cd.identities().len() + cp.identities().len());
        let mut expected = render(&cd);
        expected.extend(render(&cp));
        assert_eq!(render(&u), expected);

        assert_eq!(union_conditions(std::slice::from_ref(&cd)).unwrap(), cd);
        assert_eq!(
            union_conditions(&[cd.clone(), cd]).unwrap_err(),
            TermError::SymbolCollision("d_0".into())
        );
    }
}
