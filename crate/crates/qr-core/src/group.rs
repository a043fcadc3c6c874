//! Concrete group families with exact multiplication, inverses and canonical
//! element forms.
//!
//! Every family stores elements in a unique normal form, so equal group
//! elements are bit-identical and hashable. Arithmetic is checked: overflow
//! is an error, never a wraparound. Downstream modules see groups only
//! through [`GroupSpec`].

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

/// Errors from parsing specs or operating on elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupError {
    /// Group-description string did not match the grammar.
    Syntax(String),
    /// Sol matrix must have |det| = 1 and |trace| > 2.
    NotAnosov { det: i64, trace: i64 },
    /// BS(m, n) is only supported for m = 1.
    BadBaumslagSolitar(String),
    /// Rank or dimension outside the supported range.
    BadRank(String),
    /// Element is not in canonical form for this spec.
    Malformed(String),
    /// Checked integer arithmetic overflowed.
    Overflow,
    /// No generator carries the requested label.
    UnknownLabel(String),
}

impl core::fmt::Display for GroupError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GroupError::Syntax(s) => write!(f, "group spec syntax error: {s}"),
            GroupError::NotAnosov { det, trace } => {
                write!(f, "sol matrix not Anosov: det={det}, trace={trace}")
            }
            GroupError::BadBaumslagSolitar(s) => write!(f, "bad Baumslag-Solitar parameters: {s}"),
            GroupError::BadRank(s) => write!(f, "bad rank: {s}"),
            GroupError::Malformed(s) => write!(f, "malformed element: {s}"),
            GroupError::Overflow => write!(f, "integer overflow in group arithmetic"),
            GroupError::UnknownLabel(s) => write!(f, "unknown generator label: {s}"),
        }
    }
}

/// 2x2 integer matrix acting on the `Z^2` fibre of a Sol lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SolMatrix {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl SolMatrix {
    pub fn det(&self) -> i64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> i64 {
        self.a + self.d
    }

    /// Integer inverse; valid because |det| = 1.
    fn inverse(&self) -> SolMatrix {
        let det = self.det();
        // adj / det with det = +-1.
        SolMatrix {
            a: self.d * det,
            b: -self.b * det,
            c: -self.c * det,
            d: self.a * det,
        }
    }
}

/// A 2x2 matrix with i128 entries, used for cached powers of a Sol matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Mat2 {
    a: i128,
    b: i128,
    c: i128,
    d: i128,
}

impl Mat2 {
    const IDENTITY: Mat2 = Mat2 { a: 1, b: 0, c: 0, d: 1 };

    fn from_sol(m: &SolMatrix) -> Mat2 {
        Mat2 { a: m.a as i128, b: m.b as i128, c: m.c as i128, d: m.d as i128 }
    }

    fn mul(&self, o: &Mat2) -> Option<Mat2> {
        Some(Mat2 {
            a: self.a.checked_mul(o.a)?.checked_add(self.b.checked_mul(o.c)?)?,
            b: self.a.checked_mul(o.b)?.checked_add(self.b.checked_mul(o.d)?)?,
            c: self.c.checked_mul(o.a)?.checked_add(self.d.checked_mul(o.c)?)?,
            d: self.c.checked_mul(o.b)?.checked_add(self.d.checked_mul(o.d)?)?,
        })
    }

    fn apply(&self, v: &[i128; 2]) -> Option<[i128; 2]> {
        Some([
            self.a.checked_mul(v[0])?.checked_add(self.b.checked_mul(v[1])?)?,
            self.c.checked_mul(v[0])?.checked_add(self.d.checked_mul(v[1])?)?,
        ])
    }
}

/// Which group family a spec describes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Family {
    /// `Z^d` with generators +-e_i.
    FreeAbelian(usize),
    /// Free group of rank k, elements as reduced words.
    Free(usize),
    /// Discrete Heisenberg group; generators X+-, Y+- only.
    Heisenberg,
    /// `Z^2 x|_A Z` with A Anosov; generators +-e1, +-e2, +-t.
    SolLattice(SolMatrix),
    /// BS(1, n) = <a, t | t a t^-1 = a^n>, n >= 2.
    BaumslagSolitar(u32),
    DirectProduct(Box<GroupSpec>, Box<GroupSpec>),
    FreeProduct(Box<GroupSpec>, Box<GroupSpec>),
}

/// Which factor of a product a letter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

/// One letter of a free-product normal form: a non-identity element of one
/// factor, with adjacent letters alternating sides.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FactorLetter {
    pub side: Side,
    pub elem: GroupElement,
}

/// Canonical element form, one variant per family.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupElement {
    /// Integer vector of length d.
    Vector(Vec<i64>),
    /// Reduced word; letter +i is generator i (1-based), -i its inverse.
    Word(Vec<i8>),
    /// Upper-triangular coordinates: (x, y, z) with group law
    /// (x,y,z)(x',y',z') = (x+x', y+y', z+z'+x*y').
    Heisenberg { x: i128, y: i128, z: i128 },
    /// Semidirect product coordinates (v, n) with (v,n)(w,m) = (v + A^n w, n+m).
    Sol { v: [i128; 2], n: i32 },
    /// Affine map x -> n^k x + b with b = num / n^exp in lowest terms.
    BaumslagSolitar { num: i128, exp: u32, k: i32 },
    /// Direct-product pair.
    Pair(Box<GroupElement>, Box<GroupElement>),
    /// Alternating normal-form word of a free product.
    Alternating(Vec<FactorLetter>),
}

impl GroupElement {
    /// Compact, comma-free text encoding (CSV safe). Independent of labels.
    pub fn encode(&self) -> String {
        match self {
            GroupElement::Vector(v) => {
                let parts: Vec<String> = v.iter().map(|c| c.to_string()).collect();
                parts.join(";")
            }
            GroupElement::Word(w) => {
                if w.is_empty() {
                    return "e".to_string();
                }
                let mut s = String::new();
                for &letter in w {
                    s.push(letter_char(letter));
                }
                s
            }
            GroupElement::Heisenberg { x, y, z } => format!("{x};{y};{z}"),
            GroupElement::Sol { v, n } => format!("{};{};{}", v[0], v[1], n),
            GroupElement::BaumslagSolitar { num, exp, k } => format!("{num};{exp};{k}"),
            GroupElement::Pair(l, r) => format!("({}|{})", l.encode(), r.encode()),
            GroupElement::Alternating(w) => {
                if w.is_empty() {
                    return "e".to_string();
                }
                let parts: Vec<String> = w
                    .iter()
                    .map(|l| {
                        let tag = match l.side {
                            Side::Left => "L",
                            Side::Right => "R",
                        };
                        format!("{tag}:{}", l.elem.encode())
                    })
                    .collect();
                parts.join("*")
            }
        }
    }
}

fn letter_char(letter: i8) -> char {
    let idx = (letter.unsigned_abs() - 1) as u8;
    if letter > 0 {
        (b'a' + idx) as char
    } else {
        (b'A' + idx) as char
    }
}

/// One labeled generator together with its element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generator {
    pub label: String,
    pub elem: GroupElement,
}

/// A symmetry of the labeled Cayley graph fixing the identity: generator
/// axis i maps to axis `perm[i].0`, inverted when `perm[i].1`.
#[derive(Debug, Clone)]
pub struct Symmetry {
    perm: Vec<(usize, bool)>,
}

/// A validated group description: family plus its symmetric generating set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec {
    family: Family,
    generators: Vec<Generator>,
    /// Cached powers A^0, A^1, ... and A^-1, A^-2, ... for Sol lattices,
    /// truncated at the first overflowing power.
    sol_pos: Vec<Mat2>,
    sol_neg: Vec<Mat2>,
}

const SOL_POWER_CACHE: usize = 96;

impl GroupSpec {
    pub fn new(family: Family) -> Result<GroupSpec, GroupError> {
        match &family {
            Family::FreeAbelian(d) => {
                if *d == 0 {
                    return Err(GroupError::BadRank("z^d needs d >= 1".to_string()));
                }
            }
            Family::Free(k) => {
                if *k == 0 || *k > 26 {
                    return Err(GroupError::BadRank("free:k needs 1 <= k <= 26".to_string()));
                }
            }
            Family::Heisenberg => {}
            Family::SolLattice(m) => {
                let det = m.det();
                let trace = m.trace();
                if det.abs() != 1 || trace.abs() <= 2 {
                    return Err(GroupError::NotAnosov { det, trace });
                }
            }
            Family::BaumslagSolitar(n) => {
                if *n < 2 {
                    return Err(GroupError::BadBaumslagSolitar(format!(
                        "bs:1,{n} needs n >= 2"
                    )));
                }
            }
            Family::DirectProduct(_, _) | Family::FreeProduct(_, _) => {}
        }
        let generators = build_generators(&family);
        let (sol_pos, sol_neg) = match &family {
            Family::SolLattice(m) => sol_power_caches(m),
            _ => (Vec::new(), Vec::new()),
        };
        Ok(GroupSpec { family, generators, sol_pos, sol_neg })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn generator_label(&self, i: usize) -> &str {
        &self.generators[i].label
    }

    pub fn generator_elem(&self, i: usize) -> &GroupElement {
        &self.generators[i].elem
    }

    pub fn generator_index(&self, label: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.label == label)
    }

    /// Index of the generator inverse to generator `i`.
    pub fn inverse_generator(&self, i: usize) -> usize {
        // Generators are listed in (g, g^-1) sibling pairs.
        i ^ 1
    }

    pub fn identity(&self) -> GroupElement {
        match &self.family {
            Family::FreeAbelian(d) => GroupElement::Vector(vec![0; *d]),
            Family::Free(_) => GroupElement::Word(Vec::new()),
            Family::Heisenberg => GroupElement::Heisenberg { x: 0, y: 0, z: 0 },
            Family::SolLattice(_) => GroupElement::Sol { v: [0, 0], n: 0 },
            Family::BaumslagSolitar(_) => GroupElement::BaumslagSolitar { num: 0, exp: 0, k: 0 },
            Family::DirectProduct(l, r) => {
                GroupElement::Pair(Box::new(l.identity()), Box::new(r.identity()))
            }
            Family::FreeProduct(_, _) => GroupElement::Alternating(Vec::new()),
        }
    }

    pub fn is_identity(&self, g: &GroupElement) -> bool {
        *g == self.identity()
    }

    /// Checks that `g` is a well-formed canonical element for this spec.
    pub fn validate(&self, g: &GroupElement) -> Result<(), GroupError> {
        match (&self.family, g) {
            (Family::FreeAbelian(d), GroupElement::Vector(v)) => {
                if v.len() != *d {
                    return Err(GroupError::Malformed(format!(
                        "vector length {} != dimension {d}",
                        v.len()
                    )));
                }
                Ok(())
            }
            (Family::Free(k), GroupElement::Word(w)) => {
                for (i, &letter) in w.iter().enumerate() {
                    if letter == 0 || letter.unsigned_abs() as usize > *k {
                        return Err(GroupError::Malformed(format!("letter {letter} out of range")));
                    }
                    if i + 1 < w.len() && w[i + 1] == -letter {
                        return Err(GroupError::Malformed("word not reduced".to_string()));
                    }
                }
                Ok(())
            }
            (Family::Heisenberg, GroupElement::Heisenberg { .. }) => Ok(()),
            (Family::SolLattice(_), GroupElement::Sol { .. }) => Ok(()),
            (Family::BaumslagSolitar(n), GroupElement::BaumslagSolitar { num, exp, .. }) => {
                if *exp > 0 && (*num == 0 || num % (*n as i128) == 0) {
                    return Err(GroupError::Malformed(
                        "BS numerator not in lowest terms".to_string(),
                    ));
                }
                Ok(())
            }
            (Family::DirectProduct(l, r), GroupElement::Pair(gl, gr)) => {
                l.validate(gl)?;
                r.validate(gr)
            }
            (Family::FreeProduct(l, r), GroupElement::Alternating(w)) => {
                let mut prev: Option<Side> = None;
                for letter in w {
                    if prev == Some(letter.side) {
                        return Err(GroupError::Malformed(
                            "free-product word not alternating".to_string(),
                        ));
                    }
                    let factor = match letter.side {
                        Side::Left => l,
                        Side::Right => r,
                    };
                    factor.validate(&letter.elem)?;
                    if factor.is_identity(&letter.elem) {
                        return Err(GroupError::Malformed(
                            "identity letter in free-product word".to_string(),
                        ));
                    }
                    prev = Some(letter.side);
                }
                Ok(())
            }
            _ => Err(GroupError::Malformed("element variant does not match family".to_string())),
        }
    }

    /// Canonical form of `g * h`.
    pub fn multiply(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement, GroupError> {
        match (&self.family, g, h) {
            (Family::FreeAbelian(_), GroupElement::Vector(a), GroupElement::Vector(b)) => {
                if a.len() != b.len() {
                    return Err(GroupError::Malformed("vector lengths differ".to_string()));
                }
                let mut out = Vec::with_capacity(a.len());
                for (x, y) in a.iter().zip(b.iter()) {
                    out.push(x.checked_add(*y).ok_or(GroupError::Overflow)?);
                }
                Ok(GroupElement::Vector(out))
            }
            (Family::Free(_), GroupElement::Word(a), GroupElement::Word(b)) => {
                let mut out = a.clone();
                for &letter in b {
                    if out.last() == Some(&-letter) {
                        out.pop();
                    } else {
                        out.push(letter);
                    }
                }
                Ok(GroupElement::Word(out))
            }
            (
                Family::Heisenberg,
                GroupElement::Heisenberg { x: x1, y: y1, z: z1 },
                GroupElement::Heisenberg { x: x2, y: y2, z: z2 },
            ) => {
                let x = x1.checked_add(*x2).ok_or(GroupError::Overflow)?;
                let y = y1.checked_add(*y2).ok_or(GroupError::Overflow)?;
                let cross = x1.checked_mul(*y2).ok_or(GroupError::Overflow)?;
                let z = z1
                    .checked_add(*z2)
                    .and_then(|s| s.checked_add(cross))
                    .ok_or(GroupError::Overflow)?;
                Ok(GroupElement::Heisenberg { x, y, z })
            }
            (
                Family::SolLattice(_),
                GroupElement::Sol { v, n },
                GroupElement::Sol { v: w, n: m },
            ) => {
                let aw = self.sol_power(*n)?.apply(w).ok_or(GroupError::Overflow)?;
                let v0 = v[0].checked_add(aw[0]).ok_or(GroupError::Overflow)?;
                let v1 = v[1].checked_add(aw[1]).ok_or(GroupError::Overflow)?;
                let nm = n.checked_add(*m).ok_or(GroupError::Overflow)?;
                Ok(GroupElement::Sol { v: [v0, v1], n: nm })
            }
            (
                Family::BaumslagSolitar(n),
                GroupElement::BaumslagSolitar { num: p1, exp: e1, k: k1 },
                GroupElement::BaumslagSolitar { num: p2, exp: e2, k: k2 },
            ) => {
                let n = *n as i128;
                // b = b1 + n^k1 * b2 as (num, exp) with exp >= 0.
                let (tp, te) = scale_bs(n, *p2, *e2, *k1)?;
                let (num, exp) = add_bs(n, *p1, *e1, tp, te)?;
                let k = k1.checked_add(*k2).ok_or(GroupError::Overflow)?;
                Ok(canonical_bs(n, num, exp, k))
            }
            (
                Family::DirectProduct(l, r),
                GroupElement::Pair(gl, gr),
                GroupElement::Pair(hl, hr),
            ) => Ok(GroupElement::Pair(
                Box::new(l.multiply(gl, hl)?),
                Box::new(r.multiply(gr, hr)?),
            )),
            (Family::FreeProduct(l, r), GroupElement::Alternating(a), GroupElement::Alternating(b)) => {
                let mut out = a.clone();
                for letter in b {
                    push_letter(l, r, &mut out, letter.clone())?;
                }
                Ok(GroupElement::Alternating(out))
            }
            _ => Err(GroupError::Malformed("element variant does not match family".to_string())),
        }
    }

    /// Canonical form of `g^-1`.
    pub fn inverse(&self, g: &GroupElement) -> Result<GroupElement, GroupError> {
        match (&self.family, g) {
            (Family::FreeAbelian(_), GroupElement::Vector(v)) => {
                let mut out = Vec::with_capacity(v.len());
                for x in v {
                    out.push(x.checked_neg().ok_or(GroupError::Overflow)?);
                }
                Ok(GroupElement::Vector(out))
            }
            (Family::Free(_), GroupElement::Word(w)) => {
                Ok(GroupElement::Word(w.iter().rev().map(|&l| -l).collect()))
            }
            (Family::Heisenberg, GroupElement::Heisenberg { x, y, z }) => {
                let xy = x.checked_mul(*y).ok_or(GroupError::Overflow)?;
                Ok(GroupElement::Heisenberg {
                    x: x.checked_neg().ok_or(GroupError::Overflow)?,
                    y: y.checked_neg().ok_or(GroupError::Overflow)?,
                    z: xy.checked_sub(*z).ok_or(GroupError::Overflow)?,
                })
            }
            (Family::SolLattice(_), GroupElement::Sol { v, n }) => {
                let minus_n = n.checked_neg().ok_or(GroupError::Overflow)?;
                let av = self.sol_power(minus_n)?.apply(v).ok_or(GroupError::Overflow)?;
                Ok(GroupElement::Sol {
                    v: [
                        av[0].checked_neg().ok_or(GroupError::Overflow)?,
                        av[1].checked_neg().ok_or(GroupError::Overflow)?,
                    ],
                    n: minus_n,
                })
            }
            (Family::BaumslagSolitar(n), GroupElement::BaumslagSolitar { num, exp, k }) => {
                let n = *n as i128;
                // (b, k)^-1 = (-b / n^k, -k).
                let neg = num.checked_neg().ok_or(GroupError::Overflow)?;
                let (p, e) = scale_bs(n, neg, *exp, k.checked_neg().ok_or(GroupError::Overflow)?)?;
                Ok(canonical_bs(n, p, e, -k))
            }
            (Family::DirectProduct(l, r), GroupElement::Pair(gl, gr)) => Ok(GroupElement::Pair(
                Box::new(l.inverse(gl)?),
                Box::new(r.inverse(gr)?),
            )),
            (Family::FreeProduct(l, r), GroupElement::Alternating(w)) => {
                let mut out = Vec::with_capacity(w.len());
                for letter in w.iter().rev() {
                    let factor = match letter.side {
                        Side::Left => l,
                        Side::Right => r,
                    };
                    out.push(FactorLetter { side: letter.side, elem: factor.inverse(&letter.elem)? });
                }
                Ok(GroupElement::Alternating(out))
            }
            _ => Err(GroupError::Malformed("element variant does not match family".to_string())),
        }
    }

    /// The multiset `{g * s : s generator}` in the fixed generator order.
    pub fn neighbors(&self, g: &GroupElement) -> Result<Vec<GroupElement>, GroupError> {
        let mut out = Vec::with_capacity(self.generators.len());
        for gen in &self.generators {
            out.push(self.multiply(g, &gen.elem)?);
        }
        Ok(out)
    }

    /// Whether `h` is adjacent to `g` in the Cayley graph.
    pub fn adjacent(&self, g: &GroupElement, h: &GroupElement) -> Result<bool, GroupError> {
        let u = self.multiply(&self.inverse(g)?, h)?;
        Ok(self.generators.iter().any(|gen| gen.elem == u))
    }

    fn sol_power(&self, n: i32) -> Result<Mat2, GroupError> {
        // Past the cache, entries grow like lambda^n and overflow within a
        // few extra multiplications, so the extension loop stays short.
        if n >= 0 {
            if let Some(m) = self.sol_pos.get(n as usize) {
                return Ok(*m);
            }
            let step = self.sol_pos[1];
            let mut acc = *self.sol_pos.last().unwrap();
            for _ in self.sol_pos.len()..=(n as usize) {
                acc = acc.mul(&step).ok_or(GroupError::Overflow)?;
            }
            Ok(acc)
        } else {
            let idx = (-(n as i64) - 1) as usize;
            if let Some(m) = self.sol_neg.get(idx) {
                return Ok(*m);
            }
            let step = self.sol_neg[0];
            let mut acc = *self.sol_neg.last().unwrap();
            for _ in self.sol_neg.len()..=idx {
                acc = acc.mul(&step).ok_or(GroupError::Overflow)?;
            }
            Ok(acc)
        }
    }

    /// Graph symmetries fixing the identity, used for pair-orbit reduction.
    /// Declared only for families where signed generator permutations are
    /// genuine automorphisms.
    pub fn symmetries(&self) -> Vec<Symmetry> {
        match &self.family {
            Family::FreeAbelian(d) if *d <= 4 => signed_permutations(*d),
            Family::Free(k) if *k <= 3 => signed_permutations(*k),
            _ => Vec::new(),
        }
    }

    /// Image of `g` under a symmetry from [`GroupSpec::symmetries`].
    pub fn apply_symmetry(&self, sym: &Symmetry, g: &GroupElement) -> GroupElement {
        match g {
            GroupElement::Vector(v) => {
                let mut out = vec![0i64; v.len()];
                for (i, &x) in v.iter().enumerate() {
                    let (axis, neg) = sym.perm[i];
                    out[axis] = if neg { -x } else { x };
                }
                GroupElement::Vector(out)
            }
            GroupElement::Word(w) => {
                let mapped: Vec<i8> = w
                    .iter()
                    .map(|&letter| {
                        let axis = (letter.unsigned_abs() - 1) as usize;
                        let (image, neg) = sym.perm[axis];
                        let mut l = (image + 1) as i8;
                        if letter < 0 {
                            l = -l;
                        }
                        if neg {
                            l = -l;
                        }
                        l
                    })
                    .collect();
                GroupElement::Word(mapped)
            }
            other => other.clone(),
        }
    }

    /// Packed image of an element under a symmetry: a u64 whose identity
    /// agrees with [`GroupSpec::apply_symmetry`] on the supported shapes
    /// (vectors of dimension <= 4 with coordinates within i16, words of
    /// length <= 8). Lets orbit canonicalization run allocation-free over
    /// large pair sets; None when no packing applies.
    pub fn packed_symmetry_image(&self, sym: &Symmetry, g: &GroupElement) -> Option<u64> {
        match g {
            GroupElement::Vector(v) if v.len() <= 4 => {
                let mut lanes = [0u16; 4];
                for (i, &x) in v.iter().enumerate() {
                    let (axis, neg) = sym.perm[i];
                    let val = if neg { -x } else { x };
                    let val = i16::try_from(val).ok()?;
                    lanes[axis] = (val as u16) ^ 0x8000;
                }
                Some(
                    (lanes[0] as u64) << 48
                        | (lanes[1] as u64) << 32
                        | (lanes[2] as u64) << 16
                        | lanes[3] as u64,
                )
            }
            GroupElement::Word(w) if w.len() <= 8 => {
                let mut packed = 0u64;
                for (pos, &letter) in w.iter().enumerate() {
                    let axis = (letter.unsigned_abs() - 1) as usize;
                    let (image, neg) = sym.perm[axis];
                    let mut l = (image + 1) as i8;
                    if letter < 0 {
                        l = -l;
                    }
                    if neg {
                        l = -l;
                    }
                    // Letter bytes are >= 5, so unused high bytes (0) never
                    // collide with a longer word.
                    packed |= ((l + 8) as u64 & 0xFF) << (8 * pos);
                }
                Some(packed)
            }
            _ => None,
        }
    }

    /// Renders this spec back into the grammar accepted by
    /// [`parse_group_spec`].
    pub fn to_spec_string(&self) -> String {
        match &self.family {
            Family::FreeAbelian(d) => format!("z^{d}"),
            Family::Free(k) => format!("free:{k}"),
            Family::Heisenberg => "heis".to_string(),
            Family::SolLattice(m) => format!("sol:{},{},{},{}", m.a, m.b, m.c, m.d),
            Family::BaumslagSolitar(n) => format!("bs:1,{n}"),
            Family::DirectProduct(l, r) => {
                format!("product({},{})", l.to_spec_string(), r.to_spec_string())
            }
            Family::FreeProduct(l, r) => {
                format!("freeprod({},{})", l.to_spec_string(), r.to_spec_string())
            }
        }
    }

    /// Parses the encoding produced by [`GroupElement::encode`].
    pub fn parse_element(&self, text: &str) -> Result<GroupElement, GroupError> {
        let elem = parse_element_inner(&self.family, text)?;
        self.validate(&elem)?;
        Ok(elem)
    }
}

fn signed_permutations(d: usize) -> Vec<Symmetry> {
    let mut perms: Vec<Vec<usize>> = Vec::new();
    permute(&mut (0..d).collect::<Vec<_>>(), 0, &mut perms);
    let mut out = Vec::new();
    for p in &perms {
        for mask in 0..(1u32 << d) {
            let perm = p
                .iter()
                .enumerate()
                .map(|(i, &axis)| (axis, mask & (1 << i) != 0))
                .collect();
            out.push(Symmetry { perm });
        }
    }
    out
}

fn permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == items.len() {
        out.push(items.clone());
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, out);
        items.swap(k, i);
    }
}

fn sol_power_caches(m: &SolMatrix) -> (Vec<Mat2>, Vec<Mat2>) {
    let a = Mat2::from_sol(m);
    let a_inv = Mat2::from_sol(&m.inverse());
    let mut pos = vec![Mat2::IDENTITY];
    while pos.len() < SOL_POWER_CACHE {
        match pos.last().unwrap().mul(&a) {
            Some(next) => pos.push(next),
            None => break,
        }
    }
    let mut neg = vec![a_inv];
    while neg.len() < SOL_POWER_CACHE {
        match neg.last().unwrap().mul(&a_inv) {
            Some(next) => neg.push(next),
            None => break,
        }
    }
    (pos, neg)
}

/// Rescale a BS fraction num/n^exp by n^k, keeping exp >= 0.
fn scale_bs(n: i128, num: i128, exp: u32, k: i32) -> Result<(i128, u32), GroupError> {
    if num == 0 {
        return Ok((0, 0));
    }
    if k >= 0 {
        let k = k as u32;
        if k >= exp {
            let pow = checked_pow(n, k - exp)?;
            Ok((num.checked_mul(pow).ok_or(GroupError::Overflow)?, 0))
        } else {
            Ok((num, exp - k))
        }
    } else {
        let extra = k.unsigned_abs();
        Ok((num, exp.checked_add(extra).ok_or(GroupError::Overflow)?))
    }
}

/// num1/n^e1 + num2/n^e2 over the common denominator.
fn add_bs(n: i128, p1: i128, e1: u32, p2: i128, e2: u32) -> Result<(i128, u32), GroupError> {
    let e = e1.max(e2);
    let s1 = p1.checked_mul(checked_pow(n, e - e1)?).ok_or(GroupError::Overflow)?;
    let s2 = p2.checked_mul(checked_pow(n, e - e2)?).ok_or(GroupError::Overflow)?;
    Ok((s1.checked_add(s2).ok_or(GroupError::Overflow)?, e))
}

fn canonical_bs(n: i128, mut num: i128, mut exp: u32, k: i32) -> GroupElement {
    if num == 0 {
        exp = 0;
    } else {
        while exp > 0 && num % n == 0 {
            num /= n;
            exp -= 1;
        }
    }
    GroupElement::BaumslagSolitar { num, exp, k }
}

fn checked_pow(base: i128, exp: u32) -> Result<i128, GroupError> {
    base.checked_pow(exp).ok_or(GroupError::Overflow)
}

fn push_letter(
    left: &GroupSpec,
    right: &GroupSpec,
    word: &mut Vec<FactorLetter>,
    letter: FactorLetter,
) -> Result<(), GroupError> {
    let factor = |side: Side| match side {
        Side::Left => left,
        Side::Right => right,
    };
    match word.last() {
        Some(last) if last.side == letter.side => {
            let spec = factor(letter.side);
            let combined = spec.multiply(&last.elem, &letter.elem)?;
            word.pop();
            if !spec.is_identity(&combined) {
                word.push(FactorLetter { side: letter.side, elem: combined });
            }
            Ok(())
        }
        _ => {
            if !factor(letter.side).is_identity(&letter.elem) {
                word.push(letter);
            }
            Ok(())
        }
    }
}

fn build_generators(family: &Family) -> Vec<Generator> {
    match family {
        Family::FreeAbelian(d) => {
            let mut gens = Vec::with_capacity(2 * d);
            for i in 0..*d {
                let (lo, hi) = axis_labels(i, *d);
                let mut plus = vec![0i64; *d];
                plus[i] = 1;
                let mut minus = vec![0i64; *d];
                minus[i] = -1;
                gens.push(Generator { label: lo, elem: GroupElement::Vector(plus) });
                gens.push(Generator { label: hi, elem: GroupElement::Vector(minus) });
            }
            gens
        }
        Family::Free(k) => {
            let mut gens = Vec::with_capacity(2 * k);
            for i in 0..*k {
                let letter = (i + 1) as i8;
                gens.push(Generator {
                    label: ((b'a' + i as u8) as char).to_string(),
                    elem: GroupElement::Word(vec![letter]),
                });
                gens.push(Generator {
                    label: ((b'A' + i as u8) as char).to_string(),
                    elem: GroupElement::Word(vec![-letter]),
                });
            }
            gens
        }
        Family::Heisenberg => vec![
            Generator { label: "x".into(), elem: GroupElement::Heisenberg { x: 1, y: 0, z: 0 } },
            Generator { label: "X".into(), elem: GroupElement::Heisenberg { x: -1, y: 0, z: 0 } },
            Generator { label: "y".into(), elem: GroupElement::Heisenberg { x: 0, y: 1, z: 0 } },
            Generator { label: "Y".into(), elem: GroupElement::Heisenberg { x: 0, y: -1, z: 0 } },
        ],
        Family::SolLattice(_) => vec![
            Generator { label: "x".into(), elem: GroupElement::Sol { v: [1, 0], n: 0 } },
            Generator { label: "X".into(), elem: GroupElement::Sol { v: [-1, 0], n: 0 } },
            Generator { label: "y".into(), elem: GroupElement::Sol { v: [0, 1], n: 0 } },
            Generator { label: "Y".into(), elem: GroupElement::Sol { v: [0, -1], n: 0 } },
            Generator { label: "t".into(), elem: GroupElement::Sol { v: [0, 0], n: 1 } },
            Generator { label: "T".into(), elem: GroupElement::Sol { v: [0, 0], n: -1 } },
        ],
        Family::BaumslagSolitar(_) => vec![
            Generator { label: "a".into(), elem: GroupElement::BaumslagSolitar { num: 1, exp: 0, k: 0 } },
            Generator { label: "A".into(), elem: GroupElement::BaumslagSolitar { num: -1, exp: 0, k: 0 } },
            Generator { label: "t".into(), elem: GroupElement::BaumslagSolitar { num: 0, exp: 0, k: 1 } },
            Generator { label: "T".into(), elem: GroupElement::BaumslagSolitar { num: 0, exp: 0, k: -1 } },
        ],
        Family::DirectProduct(l, r) => {
            let mut gens = Vec::new();
            for g in &l.generators {
                gens.push(Generator {
                    label: g.label.clone(),
                    elem: GroupElement::Pair(Box::new(g.elem.clone()), Box::new(r.identity())),
                });
            }
            for g in &r.generators {
                gens.push(Generator {
                    label: format!("{}'", g.label),
                    elem: GroupElement::Pair(Box::new(l.identity()), Box::new(g.elem.clone())),
                });
            }
            gens
        }
        Family::FreeProduct(l, r) => {
            let mut gens = Vec::new();
            for g in &l.generators {
                gens.push(Generator {
                    label: g.label.clone(),
                    elem: GroupElement::Alternating(vec![FactorLetter {
                        side: Side::Left,
                        elem: g.elem.clone(),
                    }]),
                });
            }
            for g in &r.generators {
                gens.push(Generator {
                    label: format!("{}'", g.label),
                    elem: GroupElement::Alternating(vec![FactorLetter {
                        side: Side::Right,
                        elem: g.elem.clone(),
                    }]),
                });
            }
            gens
        }
    }
}

fn axis_labels(i: usize, d: usize) -> (String, String) {
    if d <= 4 {
        let lower = ['x', 'y', 'z', 'w'][i];
        let upper = ['X', 'Y', 'Z', 'W'][i];
        (lower.to_string(), upper.to_string())
    } else {
        (format!("g{}", i + 1), format!("G{}", i + 1))
    }
}

/// Parses the group-description grammar:
///
/// ```text
/// z^<d> | free:<k> | heis | sol:<a>,<b>,<c>,<d> | bs:1,<n>
///       | product(<spec>,<spec>) | freeprod(<spec>,<spec>)
/// ```
pub fn parse_group_spec(text: &str) -> Result<GroupSpec, GroupError> {
    let (spec, rest) = parse_spec_at(text.trim())?;
    if !rest.is_empty() {
        return Err(GroupError::Syntax(format!("trailing input: {rest:?}")));
    }
    Ok(spec)
}

fn parse_spec_at(text: &str) -> Result<(GroupSpec, &str), GroupError> {
    if let Some(rest) = text.strip_prefix("z^") {
        let (num, rest) = take_integer(rest)?;
        let d = num
            .parse::<usize>()
            .map_err(|_| GroupError::Syntax(format!("bad dimension {num:?}")))?;
        return Ok((GroupSpec::new(Family::FreeAbelian(d))?, rest));
    }
    if let Some(rest) = text.strip_prefix("free:") {
        let (num, rest) = take_integer(rest)?;
        let k = num
            .parse::<usize>()
            .map_err(|_| GroupError::Syntax(format!("bad rank {num:?}")))?;
        return Ok((GroupSpec::new(Family::Free(k))?, rest));
    }
    if let Some(rest) = text.strip_prefix("heis") {
        return Ok((GroupSpec::new(Family::Heisenberg)?, rest));
    }
    if let Some(rest) = text.strip_prefix("sol:") {
        let (entries, rest) = take_integer_list(rest, 4)?;
        let m = SolMatrix { a: entries[0], b: entries[1], c: entries[2], d: entries[3] };
        return Ok((GroupSpec::new(Family::SolLattice(m))?, rest));
    }
    if let Some(rest) = text.strip_prefix("bs:") {
        let (entries, rest) = take_integer_list(rest, 2)?;
        if entries[0] != 1 {
            return Err(GroupError::BadBaumslagSolitar(format!(
                "first parameter must be 1, got {}",
                entries[0]
            )));
        }
        if entries[1] < 2 {
            return Err(GroupError::BadBaumslagSolitar(format!(
                "second parameter must be >= 2, got {}",
                entries[1]
            )));
        }
        return Ok((GroupSpec::new(Family::BaumslagSolitar(entries[1] as u32))?, rest));
    }
    for (kw, direct) in [("product(", true), ("freeprod(", false)] {
        if let Some(rest) = text.strip_prefix(kw) {
            let (left, rest) = parse_spec_at(rest)?;
            let rest = rest
                .strip_prefix(',')
                .ok_or_else(|| GroupError::Syntax("expected ',' between factors".to_string()))?;
            let (right, rest) = parse_spec_at(rest)?;
            let rest = rest
                .strip_prefix(')')
                .ok_or_else(|| GroupError::Syntax("expected ')'".to_string()))?;
            let family = if direct {
                Family::DirectProduct(Box::new(left), Box::new(right))
            } else {
                Family::FreeProduct(Box::new(left), Box::new(right))
            };
            return Ok((GroupSpec::new(family)?, rest));
        }
    }
    Err(GroupError::Syntax(format!("unrecognized spec: {text:?}")))
}

fn take_integer(text: &str) -> Result<(&str, &str), GroupError> {
    let end = text
        .char_indices()
        .take_while(|(i, c)| c.is_ascii_digit() || (*i == 0 && *c == '-'))
        .map(|(i, c)| i + c.len_utf8())
        .last()
        .ok_or_else(|| GroupError::Syntax(format!("expected integer at {text:?}")))?;
    Ok((&text[..end], &text[end..]))
}

fn take_integer_list(mut text: &str, count: usize) -> Result<(Vec<i64>, &str), GroupError> {
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        if i > 0 {
            text = text
                .strip_prefix(',')
                .ok_or_else(|| GroupError::Syntax("expected ','".to_string()))?;
        }
        let (num, rest) = take_integer(text)?;
        out.push(
            num.parse::<i64>()
                .map_err(|_| GroupError::Syntax(format!("bad integer {num:?}")))?,
        );
        text = rest;
    }
    Ok((out, text))
}

fn parse_element_inner(family: &Family, text: &str) -> Result<GroupElement, GroupError> {
    let malformed = |msg: &str| GroupError::Malformed(format!("{msg}: {text:?}"));
    match family {
        Family::FreeAbelian(d) => {
            let parts: Vec<&str> = text.split(';').collect();
            if parts.len() != *d {
                return Err(malformed("wrong coordinate count"));
            }
            let mut v = Vec::with_capacity(*d);
            for p in parts {
                v.push(p.parse::<i64>().map_err(|_| malformed("bad coordinate"))?);
            }
            Ok(GroupElement::Vector(v))
        }
        Family::Free(k) => {
            if text == "e" {
                return Ok(GroupElement::Word(Vec::new()));
            }
            let mut w = Vec::new();
            for c in text.chars() {
                let letter = if c.is_ascii_lowercase() {
                    (c as u8 - b'a' + 1) as i8
                } else if c.is_ascii_uppercase() {
                    -((c as u8 - b'A' + 1) as i8)
                } else {
                    return Err(malformed("bad letter"));
                };
                if letter.unsigned_abs() as usize > *k {
                    return Err(malformed("letter out of range"));
                }
                w.push(letter);
            }
            Ok(GroupElement::Word(w))
        }
        Family::Heisenberg => {
            let nums = parse_i128_list(text, 3).ok_or_else(|| malformed("expected x;y;z"))?;
            Ok(GroupElement::Heisenberg { x: nums[0], y: nums[1], z: nums[2] })
        }
        Family::SolLattice(_) => {
            let nums = parse_i128_list(text, 3).ok_or_else(|| malformed("expected v1;v2;n"))?;
            let n = i32::try_from(nums[2]).map_err(|_| malformed("n out of range"))?;
            Ok(GroupElement::Sol { v: [nums[0], nums[1]], n })
        }
        Family::BaumslagSolitar(_) => {
            let nums = parse_i128_list(text, 3).ok_or_else(|| malformed("expected num;exp;k"))?;
            let exp = u32::try_from(nums[1]).map_err(|_| malformed("exp out of range"))?;
            let k = i32::try_from(nums[2]).map_err(|_| malformed("k out of range"))?;
            Ok(GroupElement::BaumslagSolitar { num: nums[0], exp, k })
        }
        Family::DirectProduct(l, r) => {
            let inner = text
                .strip_prefix('(')
                .and_then(|t| t.strip_suffix(')'))
                .ok_or_else(|| malformed("expected (left|right)"))?;
            let split = split_top_level(inner, '|').ok_or_else(|| malformed("expected '|'"))?;
            Ok(GroupElement::Pair(
                Box::new(parse_element_inner(&l.family, split.0)?),
                Box::new(parse_element_inner(&r.family, split.1)?),
            ))
        }
        Family::FreeProduct(l, r) => {
            if text == "e" {
                return Ok(GroupElement::Alternating(Vec::new()));
            }
            let mut letters = Vec::new();
            for part in text.split('*') {
                let (side, enc) = if let Some(rest) = part.strip_prefix("L:") {
                    (Side::Left, rest)
                } else if let Some(rest) = part.strip_prefix("R:") {
                    (Side::Right, rest)
                } else {
                    return Err(malformed("expected L:/R: letter tag"));
                };
                let factor = match side {
                    Side::Left => l,
                    Side::Right => r,
                };
                letters.push(FactorLetter {
                    side,
                    elem: parse_element_inner(&factor.family, enc)?,
                });
            }
            Ok(GroupElement::Alternating(letters))
        }
    }
}

fn parse_i128_list(text: &str, count: usize) -> Option<Vec<i128>> {
    let parts: Vec<&str> = text.split(';').collect();
    if parts.len() != count {
        return None;
    }
    parts.iter().map(|p| p.parse::<i128>().ok()).collect()
}

/// Splits at the separator that sits at paren depth zero.
fn split_top_level(text: &str, sep: char) -> Option<(&str, &str)> {
    let mut depth = 0usize;
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            c if c == sep && depth == 0 => {
                return Some((&text[..i], &text[i + 1..]));
            }
            _ => {}
        }
    }
    None
}
